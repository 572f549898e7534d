//! Acceptance checks behind `twophase verify`.
//!
//! Closed forms are written out inline here rather than taken from the
//! strategy registry, so each check compares two separate code paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twophase::montecarlo::{simulate, EstimatorKind, ExperimentConfig};
use twophase::optimize::{maximize_two_mode_margin, minimize_trace_inverse, ObjectiveKind, OptimizeConfig};
use twophase::qfi::{qfi_matrix_analytic, qfi_matrix_numeric, DEFAULT_STEP};
use twophase::spin::{expectation_real, sym_covariance, variance};
use twophase::squeezing::{is_two_mode_squeezed, phase_sensitivity_spin};
use twophase::state::{
    constructive_squeezed_along, css, dicke, joint_optimal, random_product, random_state, sequential_optimal,
    Direction,
};
use twophase::strategy::{combine_effective, scan, StrategyRegistry};
use twophase::{Axis, CompositeSpace, PhasePair, QfiOrder, SpinOps, SpinQuantum, StateSpec, StateVector};

use crate::commands::{write_scan_csv, ScanRow};

pub const CRITERIA: usize = 11;

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String), String>;

const TABLE: [(u8, &str, Check); CRITERIA] = [
    (1, "joint bound closed form", joint_bound),
    (2, "sequential bound", sequential_bound),
    (3, "spin-measurement strategy", spin_strategy),
    (4, "numeric vs analytic QFI", oracle_equivalence),
    (5, "achievability residual", achievability),
    (6, "bound chain", bound_chain),
    (7, "first-order term vanishes", first_order_vanishing),
    (8, "optimizer corroboration", optimizer),
    (9, "Monte Carlo saturation", monte_carlo),
    (10, "two-mode criterion", two_mode),
    (11, "sensitivity scan", scan_table),
];

pub fn name(id: u8) -> Option<&'static str> {
    TABLE.iter().find(|(i, _, _)| *i == id).map(|(_, n, _)| *n)
}

/// Run the selected criteria (all when `only` is empty), in id order.
pub fn run(only: &[u8]) -> Vec<Outcome> {
    TABLE
        .iter()
        .filter(|(id, _, _)| only.is_empty() || only.contains(id))
        .map(|&(id, name, check)| {
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            Outcome { id, name, passed, detail }
        })
        .collect()
}

fn spin(two_j: u32) -> SpinQuantum {
    SpinQuantum::from_twice(two_j).expect("two_j >= 1")
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn h0(psi: &StateVector) -> Result<[[f64; 2]; 2], String> {
    Ok(e(qfi_matrix_analytic(psi, PhasePair::ZERO, QfiOrder::Zeroth))?.h)
}

fn trace_inverse(h: &[[f64; 2]; 2]) -> f64 {
    (h[0][0] + h[1][1]) / (h[0][0] * h[1][1] - h[0][1] * h[1][0])
}

fn casimir(j: SpinQuantum) -> f64 {
    j.j() * (j.j() + 1.0)
}

fn joint_formula(j: SpinQuantum) -> f64 {
    if j.is_integer() {
        1.0 / casimir(j).sqrt()
    } else {
        1.0 / (casimir(j) - 0.25).sqrt()
    }
}

fn spin_formula(j: SpinQuantum) -> f64 {
    if j.is_integer() {
        2.0 / casimir(j).sqrt()
    } else {
        2.0 / (casimir(j) + 0.25).sqrt()
    }
}

fn sql_formula(j: SpinQuantum) -> f64 {
    (2.0 / j.j()).sqrt()
}

fn joint_bound() -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    let mut spots = Vec::new();
    for two_j in 1..=20 {
        let j = spin(two_j);
        let dphi = trace_inverse(&h0(&joint_optimal(j, 0.0))?).sqrt();
        worst = worst.max((dphi - joint_formula(j)).abs());
        if two_j <= 2 {
            spots.push(dphi);
        }
    }
    let spot_ok = (spots[0] - 1.414214).abs() < 1e-6 && (spots[1] - 0.707107).abs() < 1e-6;
    Ok((
        worst <= 1e-9 && spot_ok,
        format!("max |dPhi - formula| = {worst:.2e} over j = 1/2..10; j=1/2 -> {:.6}, j=1 -> {:.6}", spots[0], spots[1]),
    ))
}

fn sequential_bound() -> Result<(bool, String), String> {
    let mut worst_h: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for two_j in 1..=20 {
        let j = spin(two_j);
        let hx = h0(&e(sequential_optimal(j, Axis::X, 0.0))?)?[0][0];
        let hy = h0(&e(sequential_optimal(j, Axis::Y, 0.0))?)?[1][1];
        worst_h = worst_h.max((hx - 4.0 * j.j() * j.j()).abs()).max((hy - 4.0 * j.j() * j.j()).abs());
        let total = e(combine_effective(1.0 / hx.sqrt(), 1.0 / hy.sqrt()))?.total;
        worst_c = worst_c.max((total - 1.0 / j.j()).abs());
    }
    Ok((
        worst_h <= 1e-9 && worst_c <= 1e-12,
        format!("max |H_xx - 4j^2| = {worst_h:.2e}, max |dPhi - 1/j| = {worst_c:.2e}"),
    ))
}

fn spin_strategy() -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    let mut below_sql = true;
    for two_j in 1..=20 {
        let j = spin(two_j);
        let dx = e(phase_sensitivity_spin(&e(constructive_squeezed_along(j, Axis::Y))?, Axis::X))?;
        let dy = e(phase_sensitivity_spin(&e(constructive_squeezed_along(j, Axis::X))?, Axis::Y))?;
        let total = e(combine_effective(dx, dy))?.total;
        worst = worst.max((total - spin_formula(j)).abs());
        if two_j >= 3 && total >= sql_formula(j) {
            below_sql = false;
        }
    }
    Ok((
        worst <= 1e-9 && below_sql,
        format!("max |dPhi - formula| = {worst:.2e}; below SQL for j >= 3/2: {below_sql}"),
    ))
}

/// Every named constructor state at `j`.
fn constructor_states(j: SpinQuantum) -> Vec<StateVector> {
    let mut out = vec![joint_optimal(j, 0.0)];
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        for k in 0..=j.two_j() {
            let two_m = j.two_j() as i32 - 2 * k as i32;
            if let Ok(s) = dicke(j, two_m, axis) {
                out.push(s);
            }
        }
        if let Ok(s) = css(j, axis.unit()) {
            out.push(s);
        }
    }
    for axis in [Axis::X, Axis::Y] {
        if let Ok(s) = sequential_optimal(j, axis, 0.0) {
            out.push(s);
        }
        if let Ok(s) = constructive_squeezed_along(j, axis) {
            out.push(s);
        }
    }
    out
}

fn max_entry_diff(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    (0..2).flat_map(|m| (0..2).map(move |n| (a[m][n] - b[m][n]).abs())).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for two_j in 1..=4 {
        let j = spin(two_j);
        let mut states = constructor_states(j);
        states.extend((0..100).map(|_| random_state(CompositeSpace::spin(j), &mut rng)));
        for s in &states {
            let a = h0(s)?;
            let n = e(qfi_matrix_numeric(s, PhasePair::ZERO, DEFAULT_STEP))?.h;
            worst = worst.max(max_entry_diff(&a, &n));
            count += 1;
        }
    }
    Ok((worst <= 1e-6, format!("max entry difference {worst:.2e} over {count} states")))
}

fn mean_jz(s: &StateVector) -> Result<f64, String> {
    let ops = e(SpinOps::for_space(s.space()))?;
    e(expectation_real(s, &ops.z))
}

fn residual(s: &StateVector) -> Result<f64, String> {
    Ok(e(qfi_matrix_analytic(s, PhasePair::ZERO, QfiOrder::Zeroth))?.achievability_residual)
}

fn achievability() -> Result<(bool, String), String> {
    let mut worst_zero: f64 = 0.0;
    let mut zero_count = 0;
    for two_j in 1..=8 {
        for s in constructor_states(spin(two_j)) {
            if mean_jz(&s)?.abs() < 1e-12 {
                worst_zero = worst_zero.max(residual(&s)?.abs());
                zero_count += 1;
            }
        }
    }
    // cos a |1,1> + sin a |1,-1>, <J_z> = cos 2a
    let j = spin(2);
    let mut ratios = Vec::new();
    for k in 1..=10 {
        let target = k as f64 / 10.0;
        let a = target.acos() / 2.0;
        let raw = StateSpec::Raw {
            amplitudes: vec![a.cos().into(), 0.0.into(), a.sin().into()],
            j: Some(j),
            ancilla: 0,
        };
        let s = e(raw.build(None))?;
        ratios.push(residual(&s)? / mean_jz(&s)?);
    }
    let spread = ratios.iter().map(|r| (r - ratios[0]).abs() / ratios[0].abs()).fold(0.0, f64::max);
    Ok((
        zero_count > 0 && worst_zero <= 1e-10 && spread <= 1e-6,
        format!(
            "max residual {worst_zero:.2e} on {zero_count} states with <J_z> = 0; residual/<J_z> = {:.9} (spread {spread:.1e})",
            ratios[0]
        ),
    ))
}

fn bound_chain() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = f64::INFINITY;
    let mut tested = 0;
    for two_j in 1..=8 {
        let j = spin(two_j);
        let ops = SpinOps::for_space(CompositeSpace::spin(j)).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let s = random_state(CompositeSpace::spin(j), &mut rng);
            let h = h0(&s)?;
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det <= 1e-12 {
                continue;
            }
            let var_x = e(variance(&s, &ops.x))?;
            let var_y = e(variance(&s, &ops.y))?;
            // <A^2> = Var(A) + <A>^2
            let second = |op| -> Result<f64, String> {
                Ok(e(sym_covariance(&s, op, op))? + e(expectation_real(&s, op))?.powi(2))
            };
            let (x2, y2, z2) = (second(&ops.x)?, second(&ops.y)?, second(&ops.z)?);
            let t0 = trace_inverse(&h);
            let t1 = 0.25 * (1.0 / var_x + 1.0 / var_y);
            let t2 = 0.25 * (1.0 / x2 + 1.0 / y2);
            let t3 = 1.0 / (casimir(j) - z2);
            worst = worst.min(t0 - t1).min(t1 - t2).min(t2 - t3);
            tested += 1;
        }
    }
    Ok((worst >= -1e-10, format!("smallest slack {worst:.2e} over {tested} states")))
}

fn first_order_vanishing() -> Result<(bool, String), String> {
    let r = 0.05;
    let phis = [
        PhasePair::new(r, 0.0),
        PhasePair::new(0.0, r),
        PhasePair::new(r * 0.6, r * 0.8),
        PhasePair::new(-r * 0.8, r * 0.6),
    ];
    let mut worst: f64 = 0.0;
    for two_j in 1..=20 {
        let j = spin(two_j);
        let mut probes = vec![joint_optimal(j, 0.0)];
        probes.push(e(sequential_optimal(j, Axis::X, 0.0))?);
        probes.push(e(sequential_optimal(j, Axis::Y, 0.0))?);
        for s in &probes {
            for phi in phis {
                let h = e(qfi_matrix_analytic(s, phi, QfiOrder::FirstCorrected))?;
                let h1 = h.first_order.ok_or("first-order term missing")?;
                let norm = h1.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max(norm);
            }
        }
    }
    Ok((worst <= 1e-12, format!("max ||H1|| = {worst:.2e} at |phi| = 0.05")))
}

fn optimizer() -> Result<(bool, String), String> {
    let mut worst_rel: f64 = 0.0;
    let mut below = false;
    for two_j in 1..=6 {
        let j = spin(two_j);
        let ancilla = if j.is_integer() { 0 } else { 2 };
        let cfg = OptimizeConfig::new(j, ObjectiveKind::TraceInverseQfi).with_ancilla(ancilla).with_seed(11);
        let r = e(minimize_trace_inverse(&cfg))?;
        let bound = joint_formula(j).powi(2);
        worst_rel = worst_rel.max(((r.best_value - bound) / bound).abs());
        below |= r.best_value < bound - 1e-9;
    }
    Ok((
        worst_rel <= 1e-5 && !below,
        format!("max relative gap {worst_rel:.2e} for j = 1/2..3; below bound: {below}"),
    ))
}

const MC_M: u64 = 10_000;
const MC_SEED: u64 = 20240601;

fn monte_carlo() -> Result<(bool, String), String> {
    let j = spin(4);
    let phi = PhasePair::new(0.01, 0.005);
    let mut ok = true;
    let mut parts = Vec::new();
    let floor_factor = 1.0 - 3.0 / (400f64).sqrt();

    let ghz = StateSpec::Seq { j: None, axis: Axis::X, xi: 0.0 };
    let cfg = ExperimentConfig::new(j, ghz.clone(), PhasePair::new(0.01, 0.0), MC_M, MC_SEED)
        .with_estimator(EstimatorKind::Ghz);
    let r = e(simulate(&cfg))?;
    let scaled = r.empirical_variances.x * r.m_x as f64;
    let target = 1.0 / (4.0 * j.j() * j.j());
    let hxx = h0(&e(ghz.build(Some(j)))?)?[0][0];
    ok &= ((scaled - target) / target).abs() <= 0.2 && scaled >= floor_factor / hxx;
    parts.push(format!("ghz {scaled:.5} vs {target:.5}"));

    let probes = [
        ("css", StateSpec::Css { j: None, direction: Direction::Axis { axis: Axis::Z, negative: false } }),
        ("squeezed", StateSpec::Squeezed { j: None, axis: Axis::Y }),
    ];
    for (label, probe) in probes {
        let state = e(probe.build(Some(j)))?;
        let ops = e(SpinOps::for_space(state.space()))?;
        let target = e(variance(&state, &ops.y))? / mean_jz(&state)?.powi(2);
        let hxx = h0(&state)?[0][0];
        let r = e(simulate(&ExperimentConfig::new(j, probe, phi, MC_M, MC_SEED)))?;
        let scaled = r.empirical_variances.x * r.m_x as f64;
        ok &= ((scaled - target) / target).abs() <= 0.2 && scaled >= floor_factor / hxx;
        parts.push(format!("{label} {scaled:.5} vs {target:.5}"));
    }
    Ok((ok, format!("Var*M_x at j = 2, M = 10^4, 400 reps: {}", parts.join(", "))))
}

fn two_mode() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut flagged = 0;
    for k in 0..1000u32 {
        let j = spin(1 + k % 4);
        let s = random_product(j, j, &mut rng);
        if e(is_two_mode_squeezed(&s))?.two_mode_squeezed {
            flagged += 1;
        }
    }
    let mut css_margin: f64 = 0.0;
    for two_j in 1..=4 {
        let up = e(css(spin(two_j), [0.0, 0.0, 1.0]))?;
        let pair = e(StateVector::product(&[up.clone(), up]))?;
        css_margin = css_margin.max(e(is_two_mode_squeezed(&pair))?.margin.abs());
    }
    let cfg = OptimizeConfig::new(spin(1), ObjectiveKind::TwoModeMargin).with_seed(4);
    let best = e(maximize_two_mode_margin(&cfg))?;
    let report = e(is_two_mode_squeezed(&best.best_state))?;
    Ok((
        flagged == 0 && css_margin <= 1e-12 && report.two_mode_squeezed && report.margin > 0.1,
        format!(
            "{flagged}/1000 products flagged; CSS pair margin {css_margin:.1e}; optimized margin {:.6}",
            report.margin
        ),
    ))
}

fn scan_table() -> Result<(bool, String), String> {
    let registry = StrategyRegistry::default();
    let reports = e(scan(spin(1), spin(20), &registry.all()))?;
    let rows: Vec<ScanRow> = reports.iter().map(ScanRow::from).collect();
    let mut buf = Vec::new();
    write_scan_csv(&rows, &mut buf).map_err(|e| e.to_string())?;

    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let parsed: Vec<ScanRow> = reader.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if parsed.len() != 80 {
        return Ok((false, format!("expected 80 rows, got {}", parsed.len())));
    }
    let mut worst: f64 = 0.0;
    let mut table = std::collections::BTreeMap::new();
    for row in &parsed {
        let j = spin(row.two_j);
        let expected = match row.strategy.as_str() {
            "joint" => joint_formula(j),
            "sequential" => 1.0 / j.j(),
            "sequential_spin" => spin_formula(j),
            "sql" => sql_formula(j),
            other => return Err(format!("unexpected strategy {other}")),
        };
        worst = worst.max((row.delta_phi - expected).abs());
        table.insert((row.two_j, row.strategy.clone()), row.delta_phi);
    }
    let get = |two_j: u32, s: &str| table[&(two_j, s.to_string())];
    let mut ordered = true;
    for two_j in 1..=20 {
        ordered &= get(two_j, "joint") <= get(two_j, "sequential");
        if two_j >= 2 {
            ordered &= get(two_j, "sequential") < get(two_j, "sequential_spin");
        }
        if two_j >= 3 {
            ordered &= get(two_j, "sequential_spin") < get(two_j, "sql");
        }
    }
    Ok((
        worst <= 1e-6 && ordered,
        format!("80 rows, max |csv - formula| = {worst:.2e}; ordering holds: {ordered}"),
    ))
}
