use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use twophase::linalg::{self, max_abs_diff, I};
use twophase::montecarlo::{simulate, EstimatorKind, ExperimentConfig, DEFAULT_REPETITIONS, DEFAULT_SPLIT};
use twophase::optimize::{optimize, ObjectiveKind, OptimizeConfig};
use twophase::qfi::{qfi_matrix_analytic, qfi_matrix_numeric, QfiMatrix};
use twophase::spin::{eigenbasis, expectation_real, make_spin_ops};
use twophase::squeezing::{is_spin_squeezed, is_two_mode_squeezed, kitagawa_ueda, mean_spin};
use twophase::strategy::{joint_sensitivity, scan, SensitivityReport, StrategyRegistry};
use twophase::{parallel, Axis, PhasePair, QfiOrder, SpinOps, SpinQuantum, StateSpec, StateVector};

use crate::args::{
    OpsArgs, OpsAxis, OpsFormat, OptimizeArgs, OrderArg, QfiArgs, ScanArgs, ScanFormat, SimulateArgs, SqueezeArgs,
    VerifyArgs,
};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{matrix_json, num, real_matrix_json, round_sig, spin_json, vector_json, OutputRecord};
use crate::verify;

fn write_err(e: io::Error) -> CliError {
    CliError::io("writing output", e)
}

fn axes(sel: OpsAxis) -> Vec<Axis> {
    match sel {
        OpsAxis::X => vec![Axis::X],
        OpsAxis::Y => vec![Axis::Y],
        OpsAxis::Z => vec![Axis::Z],
        OpsAxis::All => vec![Axis::X, Axis::Y, Axis::Z],
    }
}

fn fmt_complex(re: f64, im: f64) -> String {
    let (re, im) = (round_sig(re), round_sig(im));
    let re = if re == 0.0 { 0.0 } else { re };
    if im == 0.0 {
        format!("{re}")
    } else if im < 0.0 {
        format!("{re}-{}i", -im)
    } else {
        format!("{re}+{im}i")
    }
}

/// `max |[J_a, J_b] - i J_c|` over cyclic triples.
fn commutator_residual(ops: &SpinOps) -> f64 {
    let triples = [(&ops.x, &ops.y, &ops.z), (&ops.y, &ops.z, &ops.x), (&ops.z, &ops.x, &ops.y)];
    triples
        .iter()
        .map(|(a, b, c)| {
            let lhs = linalg::commutator(a.matrix(), b.matrix());
            max_abs_diff(&lhs, &(c.matrix() * I))
        })
        .fold(0.0, f64::max)
}

pub fn ops(args: &OpsArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let j = args.j;
    let ops = make_spin_ops(j);
    let residual = commutator_residual(&ops);
    let selected = axes(args.axis);
    let title = if args.basis { "eigenbasis" } else { "matrix" };

    if args.format == OpsFormat::Json {
        let mut entries = serde_json::Map::new();
        for &axis in &selected {
            let value = if args.basis {
                Value::Array(eigenbasis(j, axis).iter().map(vector_json).collect())
            } else {
                matrix_json(ops.component(axis).matrix())
            };
            entries.insert(axis.to_string(), value);
        }
        let inputs = json!({ "j": spin_json(j), "axis": format!("{:?}", args.axis).to_lowercase(), "basis": args.basis });
        let results = json!({ "kind": title, "operators": entries, "commutator_residual": residual });
        return OutputRecord::new("ops", inputs, results, started).write(out);
    }

    writeln!(out, "j = {j} (two_j = {}), dim = {}", j.two_j(), j.dim()).map_err(write_err)?;
    for &axis in &selected {
        if args.basis {
            writeln!(out, "\n|j,m>_{axis} for m = j..-j (one vector per row, z-basis amplitudes):").map_err(write_err)?;
            for v in eigenbasis(j, axis) {
                let cells: Vec<String> = v.iter().map(|z| fmt_complex(z.re, z.im)).collect();
                writeln!(out, "  [{}]", cells.join(", ")).map_err(write_err)?;
            }
        } else {
            writeln!(out, "\nJ_{axis}:").map_err(write_err)?;
            let m = ops.component(axis).matrix();
            for r in 0..m.nrows() {
                let cells: Vec<String> = (0..m.ncols()).map(|c| fmt_complex(m[(r, c)].re, m[(r, c)].im)).collect();
                writeln!(out, "  [{}]", cells.join(", ")).map_err(write_err)?;
            }
        }
    }
    writeln!(out, "\ncommutator residual max|[J_a,J_b] - i J_c| = {residual:e}").map_err(write_err)
}

/// Parse a state description, using `j` for specs that omit it.
fn build_state(text: &str, j: Option<SpinQuantum>) -> CliResult<(StateSpec, StateVector)> {
    let spec = StateSpec::parse(text)?;
    let state = spec.build(j)?;
    Ok((spec, state))
}

fn qfi_json(h: &QfiMatrix) -> Value {
    real_matrix_json(&h.h)
}

pub fn qfi(args: &QfiArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let (spec, psi) = build_state(&args.state, args.j)?;
    let j = psi.spin()?;
    let h = match args.order {
        OrderArg::Zeroth => qfi_matrix_analytic(&psi, args.phi, QfiOrder::Zeroth)?,
        OrderArg::First => qfi_matrix_analytic(&psi, args.phi, QfiOrder::FirstCorrected)?,
        OrderArg::Numeric => qfi_matrix_numeric(&psi, args.phi, args.step)?,
    };
    let numeric = match args.order {
        OrderArg::Numeric => h.clone(),
        _ => qfi_matrix_numeric(&psi, args.phi, args.step)?,
    };
    let delta = (0..2)
        .flat_map(|m| (0..2).map(move |n| (m, n)))
        .map(|(m, n)| (h.h[m][n] - numeric.h[m][n]).abs())
        .fold(0.0, f64::max);
    let trace_inverse = h.trace_inverse()?;
    let ops = SpinOps::for_space(psi.space())?;
    let mean_jz = expectation_real(&psi, &ops.z)?;
    let (eigenvalues, _) = h.eigen();

    let mut warnings: Vec<String> = h.warning.iter().chain(numeric.warning.iter()).cloned().collect();
    if args.phi.norm() > 0.1 {
        warnings.push(format!("|phi| = {} is outside the small-angle regime", args.phi.norm()));
    }
    let inputs = json!({
        "j": spin_json(j),
        "state": spec.to_string(),
        "phi": { "x": args.phi.x, "y": args.phi.y },
        "order": format!("{:?}", args.order).to_lowercase(),
        "step": args.step,
        "ancilla_dim": psi.space().ancilla_dim,
    });
    let results = json!({
        "h": qfi_json(&h),
        "eigenvalues": [eigenvalues[0], eigenvalues[1]],
        "first_order": h.first_order.as_ref().map(real_matrix_json),
        "trace_inverse": trace_inverse,
        "delta_phi": trace_inverse.sqrt(),
        "achievability_residual": h.achievability_residual,
        "mean_jz": mean_jz,
        "numeric_h": qfi_json(&numeric),
        "analytic_vs_numeric": delta,
        "warnings": warnings,
    });
    OutputRecord::new("qfi", inputs, results, started).write(out)
}

/// One line of the scan table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub two_j: u32,
    pub j: f64,
    pub parity: String,
    pub strategy: String,
    pub delta_phi: f64,
}

impl From<&SensitivityReport> for ScanRow {
    fn from(r: &SensitivityReport) -> Self {
        Self {
            two_j: r.j.two_j(),
            j: r.j.j(),
            parity: r.parity().to_string(),
            strategy: r.strategy.to_string(),
            delta_phi: round_sig(r.delta_phi_total),
        }
    }
}

/// CSV with header `two_j,j,parity,strategy,delta_phi`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], w: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn scan_rows(args: &ScanArgs) -> CliResult<Vec<ScanRow>> {
    let registry = StrategyRegistry::default();
    let picked = registry.select(&args.strategies)?;
    let reports = scan(args.jmin, args.jmax, &picked)?;
    Ok(reports.iter().map(ScanRow::from).collect())
}

fn render_scan(args: &ScanArgs, rows: &[ScanRow], started: Instant, w: &mut dyn Write) -> CliResult<()> {
    match args.format {
        ScanFormat::Csv => write_scan_csv(rows, w).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => write_err(io),
            other => CliError::new(ErrorKind::Io, format!("writing csv: {other:?}")),
        }),
        ScanFormat::Json => {
            let inputs = json!({
                "jmin": spin_json(args.jmin),
                "jmax": spin_json(args.jmax),
                "strategies": args.strategies,
            });
            let results = serde_json::to_value(rows).expect("rows serialize");
            OutputRecord::new("scan", inputs, results, started).write(w)
        }
    }
}

pub fn scan_cmd(args: &ScanArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let rows = scan_rows(args)?;
    match &args.output {
        Some(path) => {
            let mut file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
            render_scan(args, &rows, started, &mut file)?;
            file.flush().map_err(|e| CliError::io(path.display(), e))
        }
        None => render_scan(args, &rows, started, out),
    }
}

/// Job-file form of a Monte Carlo experiment; `j` may be `"3/2"`, `"1.5"` or `1.5`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    #[serde(default)]
    pub j: Option<JobSpin>,
    pub probe: String,
    #[serde(default)]
    pub phi_true: Option<PhasePair>,
    pub m_total: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: Option<f64>,
    #[serde(default)]
    pub repetitions: Option<usize>,
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum JobSpin {
    Text(String),
    Number(f64),
}

impl JobSpin {
    fn resolve(&self) -> CliResult<SpinQuantum> {
        let text = match self {
            JobSpin::Text(s) => s.clone(),
            JobSpin::Number(x) => x.to_string(),
        };
        Ok(text.parse::<SpinQuantum>()?)
    }
}

fn load_job(path: &Path) -> CliResult<JobFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn experiment_config(
    j: Option<SpinQuantum>,
    probe: &str,
    phi: Option<PhasePair>,
    m_total: u64,
    seed: u64,
    split: Option<f64>,
    repetitions: Option<usize>,
    estimator: Option<EstimatorKind>,
) -> CliResult<ExperimentConfig> {
    let spec = StateSpec::parse(probe)?;
    let j = match (j, spec.spin()) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::usage(format!("probe names j = {b} but j = {a} was requested")))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::usage("j is required when the probe does not name it")),
    };
    let estimator = estimator.unwrap_or(match spec {
        StateSpec::Seq { .. } => EstimatorKind::Ghz,
        _ => EstimatorKind::Spin,
    });
    let mut cfg = ExperimentConfig::new(j, spec, phi.unwrap_or(PhasePair::ZERO), m_total, seed)
        .with_estimator(estimator)
        .with_repetitions(repetitions.unwrap_or(DEFAULT_REPETITIONS));
    cfg.split = split.unwrap_or(DEFAULT_SPLIT);
    Ok(cfg)
}

pub fn simulate_cmd(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let cfg = match &args.job {
        Some(path) => {
            let job = load_job(path)?;
            let j = job.j.as_ref().map(JobSpin::resolve).transpose()?;
            experiment_config(
                j,
                &job.probe,
                job.phi_true,
                job.m_total,
                job.seed,
                job.split,
                job.repetitions,
                job.estimator,
            )?
        }
        None => {
            let probe = args.probe.as_deref().ok_or_else(|| CliError::usage("--probe or --job is required"))?;
            let m = args.m.ok_or_else(|| CliError::usage("--m is required"))?;
            experiment_config(
                args.j,
                probe,
                args.phi,
                m,
                args.seed.unwrap_or(0),
                args.split,
                args.repetitions,
                args.estimator,
            )?
        }
    };
    let result = simulate(&cfg)?;
    let inputs = json!({
        "j": spin_json(cfg.j),
        "probe": cfg.probe.to_string(),
        "phi_true": cfg.phi_true,
        "m_total": cfg.m_total,
        "seed": cfg.seed,
        "split": cfg.split,
        "repetitions": cfg.repetitions,
        "estimator": cfg.estimator,
        "threads": parallel::current_threads(),
    });
    let mut results = serde_json::to_value(&result).expect("result serializes");
    results["scaled_variances"] = serde_json::to_value(result.scaled_variances()).expect("pair serializes");
    OutputRecord::new("simulate", inputs, results, started).write(out)
}

fn state_json(s: &StateVector) -> Value {
    json!({
        "system_dim": s.space().system_dim,
        "ancilla_dim": s.space().ancilla_dim,
        "amplitudes": vector_json(s.amplitudes()),
    })
}

pub fn optimize_cmd(args: &OptimizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg = OptimizeConfig::new(args.j, args.objective)
        .with_ancilla(args.ancilla)
        .with_restarts(args.restarts)
        .with_seed(args.seed);
    cfg.max_iters = args.max_iters;
    cfg.tol = args.tol;
    cfg.product = args.product;
    let r = optimize(&cfg)?;
    let j = args.j.j();
    let reference = match args.objective {
        ObjectiveKind::TraceInverseQfi => Some(joint_sensitivity(args.j).delta_phi_total.powi(2)),
        ObjectiveKind::VarianceX => Some(j * j),
        ObjectiveKind::TwoModeMargin => None,
    };
    let inputs = json!({
        "j": spin_json(args.j),
        "ancilla": args.ancilla,
        "objective": args.objective.name(),
        "restarts": args.restarts,
        "seed": args.seed,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "product": args.product,
        "threads": parallel::current_threads(),
    });
    let results = json!({
        "best_value": r.best_value,
        "closed_form": reference.map(num),
        "gap": reference.map(|v| num(r.best_value - v)),
        "best_state": state_json(&r.best_state),
        "objective_trace": r.objective_trace,
        "iterations": r.iterations,
        "converged": r.converged,
    });
    OutputRecord::new("optimize", inputs, results, started).write(out)
}

pub fn squeeze_cmd(args: &SqueezeArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let (spec, psi) = build_state(&args.state, args.j)?;
    let inputs = json!({
        "state": spec.to_string(),
        "axis": args.axis.to_string(),
        "two_mode": args.two_mode,
        "dim": psi.dim(),
    });
    let results = if args.two_mode {
        let r = is_two_mode_squeezed(&psi)?;
        serde_json::to_value(&r).expect("report serializes")
    } else {
        let r = is_spin_squeezed(&psi, args.axis)?;
        let ku = kitagawa_ueda(&psi).ok();
        let mut v = serde_json::to_value(&r).expect("report serializes");
        v["j"] = spin_json(psi.spin()?);
        v["mean_spin"] = json!(mean_spin(&psi)?);
        v["kitagawa_ueda"] = ku.map(num).unwrap_or(Value::Null);
        v
    };
    OutputRecord::new("squeeze", inputs, results, started).write(out)
}

pub fn verify_cmd(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    for id in &args.only {
        if verify::name(*id).is_none() {
            return Err(CliError::usage(format!("no criterion {id} (1..={})", verify::CRITERIA)));
        }
    }
    let outcomes = verify::run(&args.only);
    let all_passed = outcomes.iter().all(|o| o.passed);
    match args.format {
        OpsFormat::Text => {
            for o in &outcomes {
                let mark = if o.passed { "PASS" } else { "FAIL" };
                writeln!(out, "[{mark}] {:>2} {:<28} {}", o.id, o.name, o.detail).map_err(write_err)?;
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            writeln!(out, "{passed}/{} criteria passed", outcomes.len()).map_err(write_err)?;
        }
        OpsFormat::Json => {
            let inputs = json!({ "only": args.only });
            let results = json!({ "criteria": outcomes, "all_passed": all_passed });
            OutputRecord::new("verify", inputs, results, started).write(out)?;
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::new(ErrorKind::Failed, "some criteria failed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_cells() {
        assert_eq!(fmt_complex(0.5, 0.0), "0.5");
        assert_eq!(fmt_complex(0.0, -0.5), "0-0.5i");
        assert_eq!(fmt_complex(-0.0, 1.0 / 3.0), "0+0.333333333i");
    }

    #[test]
    fn scan_rows_round_trip_through_csv() {
        let j = SpinQuantum::from_twice(2).unwrap();
        let row = ScanRow::from(&joint_sensitivity(j));
        let mut buf = Vec::new();
        write_scan_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "two_j,j,parity,strategy,delta_phi\n2,1.0,integer,joint,0.707106781\n");
        let back: Vec<ScanRow> = csv::Reader::from_reader(buf.as_slice()).deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, vec![row]);
    }

    #[test]
    fn job_spin_forms() {
        for (text, two_j) in [("\"3/2\"", 3), ("\"1.5\"", 3), ("2", 4), ("0.5", 1)] {
            let s: JobSpin = serde_json::from_str(text).unwrap();
            assert_eq!(s.resolve().unwrap().two_j(), two_j);
        }
    }
}
