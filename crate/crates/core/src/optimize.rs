//! Numerical probe-state search.
//!
//! States are parametrized by the real and imaginary parts of their
//! amplitudes, grouped in blocks that each live on a unit sphere (one block
//! for a general state, one per factor for product states). The search is a
//! projected gradient descent with central-difference gradients, a
//! Barzilai-Borwein trial step and step halving until the Armijo condition
//! holds, restarted from Haar-random points.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::parallel;
use crate::qfi::SINGULAR_TOL;
use crate::spin::{self, CompositeSpace, Operator, SpinOps, SpinQuantum};
use crate::squeezing::{two_mode_ops, two_mode_report, TwoModeOps};
use crate::state::{random_state, StateVector};

/// Cost assigned to states with a singular QFI matrix.
pub const SINGULAR_PENALTY: f64 = 1e6;
pub const GRADIENT_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    TraceInverseQfi,
    VarianceX,
    TwoModeMargin,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 3] = [
        ObjectiveKind::TraceInverseQfi,
        ObjectiveKind::VarianceX,
        ObjectiveKind::TwoModeMargin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::TraceInverseQfi => "trace_inverse_qfi",
            ObjectiveKind::VarianceX => "variance_x",
            ObjectiveKind::TwoModeMargin => "two_mode_margin",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown objective '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    /// Spin of the probe, or of each factor for `two_mode_margin`.
    pub j: SpinQuantum,
    #[serde(default)]
    pub ancilla_dim: usize,
    pub objective: ObjectiveKind,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Restrict `two_mode_margin` to product states.
    #[serde(default)]
    pub product: bool,
}

fn default_restarts() -> usize {
    32
}

fn default_max_iters() -> usize {
    2000
}

fn default_tol() -> f64 {
    1e-10
}

impl OptimizeConfig {
    pub fn new(j: SpinQuantum, objective: ObjectiveKind) -> Self {
        Self {
            j,
            ancilla_dim: 0,
            objective,
            restarts: default_restarts(),
            max_iters: default_max_iters(),
            seed: 0,
            tol: default_tol(),
            product: false,
        }
    }

    pub fn with_ancilla(mut self, ancilla_dim: usize) -> Self {
        self.ancilla_dim = ancilla_dim;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn product_states(mut self) -> Self {
        self.product = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        match self.objective {
            ObjectiveKind::TwoModeMargin if self.ancilla_dim != 0 => {
                Err(Error::InvalidConfig("two_mode_margin acts on j (x) j without an ancilla".into()))
            }
            ObjectiveKind::VarianceX if self.ancilla_dim != 0 => {
                Err(Error::InvalidConfig("variance_x is defined without an ancilla".into()))
            }
            kind if self.product && kind != ObjectiveKind::TwoModeMargin => {
                Err(Error::InvalidConfig("product restriction applies to two_mode_margin only".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub objective: ObjectiveKind,
    /// Best objective value in its natural sense (minimum of `tr[H^-1]`,
    /// maximum of the variance or margin).
    pub best_value: f64,
    #[serde(skip)]
    pub best_state: StateVector,
    /// Final value of every restart, in restart order.
    pub objective_trace: Vec<f64>,
    /// Whether the best restart met the tolerance before `max_iters`.
    pub converged: bool,
    pub iterations: Vec<usize>,
    /// Accepted costs of the best restart (the minimized quantity).
    #[serde(skip)]
    pub descent_history: Vec<f64>,
}

/// A scalar function of a pure state, minimized by [`optimize`].
pub trait Objective: Send + Sync {
    fn kind(&self) -> ObjectiveKind;
    /// Space of the candidate states.
    fn space(&self) -> CompositeSpace;
    /// Complex dimension of each unit-norm block; the state is their tensor product.
    fn blocks(&self) -> Vec<usize>;
    /// Quantity to minimize.
    fn cost(&self, state: &StateVector) -> f64;
    /// Cost converted back to the objective's natural sign.
    fn reported(&self, cost: f64) -> f64 {
        cost
    }
}

/// `tr[H^-1]` with `H = 4 Cov(J_x, J_y)`.
pub struct TraceInverseQfi {
    space: CompositeSpace,
    ops: SpinOps,
}

impl TraceInverseQfi {
    pub fn new(j: SpinQuantum, ancilla_dim: usize) -> Result<Self> {
        let space = CompositeSpace::with_ancilla(j, ancilla_dim);
        Ok(Self { space, ops: SpinOps::for_space(space)? })
    }
}

/// `tr[H^-1]` for a real symmetric 2x2 `H`, or the penalty when singular.
pub fn penalized_trace_inverse(hxx: f64, hxy: f64, hyy: f64) -> f64 {
    let mean = 0.5 * (hxx + hyy);
    let min_eig = mean - (0.25 * (hxx - hyy).powi(2) + hxy * hxy).sqrt();
    if min_eig <= SINGULAR_TOL {
        return SINGULAR_PENALTY;
    }
    ((hxx + hyy) / (hxx * hyy - hxy * hxy)).min(SINGULAR_PENALTY)
}

impl Objective for TraceInverseQfi {
    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::TraceInverseQfi
    }

    fn space(&self) -> CompositeSpace {
        self.space
    }

    fn blocks(&self) -> Vec<usize> {
        vec![self.space.total_dim()]
    }

    fn cost(&self, state: &StateVector) -> f64 {
        let cov = |a: &Operator, b: &Operator| 4.0 * spin::sym_covariance(state, a, b).expect("dimensions fixed");
        penalized_trace_inverse(cov(&self.ops.x, &self.ops.x), cov(&self.ops.x, &self.ops.y), cov(&self.ops.y, &self.ops.y))
    }
}

/// `<dJ_x^2>`, maximized.
pub struct VarianceX {
    space: CompositeSpace,
    jx: Operator,
}

impl VarianceX {
    pub fn new(j: SpinQuantum) -> Self {
        Self { space: CompositeSpace::spin(j), jx: spin::make_spin_ops(j).x }
    }
}

impl Objective for VarianceX {
    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::VarianceX
    }

    fn space(&self) -> CompositeSpace {
        self.space
    }

    fn blocks(&self) -> Vec<usize> {
        vec![self.space.total_dim()]
    }

    fn cost(&self, state: &StateVector) -> f64 {
        -spin::variance(state, &self.jx).expect("dimensions fixed")
    }

    fn reported(&self, cost: f64) -> f64 {
        -cost
    }
}

/// `|<J_z+>| - dJ_x-^2 - dJ_y+^2` on `j (x) j`, maximized.
pub struct TwoModeMargin {
    j: SpinQuantum,
    ops: TwoModeOps,
    product: bool,
}

impl TwoModeMargin {
    pub fn new(j: SpinQuantum, product: bool) -> Self {
        Self { j, ops: two_mode_ops(j, j), product }
    }
}

impl Objective for TwoModeMargin {
    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::TwoModeMargin
    }

    fn space(&self) -> CompositeSpace {
        CompositeSpace { system_dim: self.j.dim() * self.j.dim(), ancilla_dim: 0 }
    }

    fn blocks(&self) -> Vec<usize> {
        if self.product {
            vec![self.j.dim(), self.j.dim()]
        } else {
            vec![self.j.dim() * self.j.dim()]
        }
    }

    fn cost(&self, state: &StateVector) -> f64 {
        -two_mode_report(state, &self.ops).expect("dimensions fixed").margin
    }

    fn reported(&self, cost: f64) -> f64 {
        -cost
    }
}

pub fn objective_for(config: &OptimizeConfig) -> Result<Box<dyn Objective>> {
    config.validate()?;
    Ok(match config.objective {
        ObjectiveKind::TraceInverseQfi => Box::new(TraceInverseQfi::new(config.j, config.ancilla_dim)?),
        ObjectiveKind::VarianceX => Box::new(VarianceX::new(config.j)),
        ObjectiveKind::TwoModeMargin => Box::new(TwoModeMargin::new(config.j, config.product)),
    })
}

/// Real parameter vector split into unit-norm blocks.
struct Manifold {
    blocks: Vec<usize>,
    space: CompositeSpace,
}

impl Manifold {
    fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.blocks.iter().scan(0, |start, &d| {
            let r = *start..*start + 2 * d;
            *start += 2 * d;
            Some(r)
        })
    }

    fn len(&self) -> usize {
        2 * self.blocks.iter().sum::<usize>()
    }

    fn normalize(&self, x: &mut [f64]) {
        for r in self.ranges() {
            let n = x[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
            x[r].iter_mut().for_each(|v| *v /= n);
        }
    }

    /// Remove the radial component of `g` in every block.
    fn project(&self, x: &[f64], g: &mut [f64]) {
        for r in self.ranges() {
            let dot: f64 = x[r.clone()].iter().zip(&g[r.clone()]).map(|(a, b)| a * b).sum();
            for k in r {
                g[k] -= dot * x[k];
            }
        }
    }

    fn state(&self, x: &[f64]) -> StateVector {
        let mut amps = CVector::from_element(1, C64::new(1.0, 0.0));
        for r in self.ranges() {
            let block = &x[r];
            let v = CVector::from_iterator(block.len() / 2, block.chunks(2).map(|p| C64::new(p[0], p[1])));
            amps = amps.kronecker(&v);
        }
        StateVector::normalized(self.space, amps).expect("blocks are unit vectors")
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for &d in &self.blocks {
            let s = random_state(CompositeSpace { system_dim: d, ancilla_dim: 0 }, rng);
            x.extend(s.amplitudes().iter().flat_map(|z| [z.re, z.im]));
        }
        x
    }
}

struct Run {
    cost: f64,
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn descend(obj: &dyn Objective, manifold: &Manifold, mut x: Vec<f64>, config: &OptimizeConfig) -> Run {
    let f = |x: &[f64]| obj.cost(&manifold.state(x));
    let gradient = |x: &[f64]| {
        let mut g = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for k in 0..x.len() {
            probe[k] = x[k] + GRADIENT_STEP;
            let up = f(&probe);
            probe[k] = x[k] - GRADIENT_STEP;
            let down = f(&probe);
            probe[k] = x[k];
            g[k] = (up - down) / (2.0 * GRADIENT_STEP);
        }
        manifold.project(x, &mut g);
        g
    };

    let mut fx = f(&x);
    let mut history = vec![fx];
    let mut g = gradient(&x);
    let mut step = 0.1;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 < 1e-24 {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            manifold.normalize(&mut trial);
            let ft = f(&trial);
            if ft <= fx - ARMIJO * t * g2 {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fn_)) = accepted else {
            // no descent along the gradient at any scale: stationary to working precision
            converged = true;
            break;
        };
        let change = fx - fn_;
        let gn = gradient(&next);
        // Barzilai-Borwein step for the next iteration
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-6, 10.0) } else { (2.0 * t).min(10.0) };
        x = next;
        fx = fn_;
        g = gn;
        history.push(fx);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Run { cost: fx, x, iterations, converged, history }
}

/// Run the configured search with the given objective.
pub fn optimize_with(obj: &dyn Objective, config: &OptimizeConfig) -> Result<OptimizeResult> {
    config.validate()?;
    let manifold = Manifold { blocks: obj.blocks(), space: obj.space() };
    let runs: Vec<Run> = parallel::install(|| {
        (0..config.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                let x0 = manifold.random_point(&mut rng);
                descend(obj, &manifold, x0, config)
            })
            .collect()
    });
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let run = &runs[best];
    Ok(OptimizeResult {
        objective: obj.kind(),
        best_value: obj.reported(run.cost),
        best_state: manifold.state(&run.x),
        objective_trace: runs.iter().map(|r| obj.reported(r.cost)).collect(),
        converged: run.converged,
        iterations: runs.iter().map(|r| r.iterations).collect(),
        descent_history: run.history.clone(),
    })
}

pub fn optimize(config: &OptimizeConfig) -> Result<OptimizeResult> {
    let obj = objective_for(config)?;
    optimize_with(obj.as_ref(), config)
}

fn expect_objective(config: &OptimizeConfig, kind: ObjectiveKind) -> Result<()> {
    if config.objective != kind {
        return Err(Error::InvalidConfig(format!("expected objective {kind}, got {}", config.objective)));
    }
    Ok(())
}

pub fn minimize_trace_inverse(config: &OptimizeConfig) -> Result<OptimizeResult> {
    expect_objective(config, ObjectiveKind::TraceInverseQfi)?;
    optimize(config)
}

pub fn maximize_variance(config: &OptimizeConfig) -> Result<OptimizeResult> {
    expect_objective(config, ObjectiveKind::VarianceX)?;
    optimize(config)
}

pub fn maximize_two_mode_margin(config: &OptimizeConfig) -> Result<OptimizeResult> {
    expect_objective(config, ObjectiveKind::TwoModeMargin)?;
    optimize(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin(two_j: u32) -> SpinQuantum {
        SpinQuantum::from_twice(two_j).unwrap()
    }

    #[test]
    fn objective_names_round_trip() {
        for k in ObjectiveKind::ALL {
            assert_eq!(k.name().parse::<ObjectiveKind>().unwrap(), k);
        }
        assert!("nope".parse::<ObjectiveKind>().is_err());
    }

    #[test]
    fn penalty_for_singular_h() {
        assert_eq!(penalized_trace_inverse(4.0, 0.0, 0.0), SINGULAR_PENALTY);
        assert!((penalized_trace_inverse(4.0, 0.0, 4.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let cfg = OptimizeConfig::new(spin(2), ObjectiveKind::VarianceX).with_restarts(0);
        assert!(optimize(&cfg).is_err());
        let cfg = OptimizeConfig::new(spin(2), ObjectiveKind::VarianceX).with_ancilla(2);
        assert!(optimize(&cfg).is_err());
        let cfg = OptimizeConfig::new(spin(2), ObjectiveKind::TraceInverseQfi).product_states();
        assert!(optimize(&cfg).is_err());
        let cfg = OptimizeConfig::new(spin(2), ObjectiveKind::VarianceX);
        assert!(minimize_trace_inverse(&cfg).is_err());
    }

    #[test]
    fn descent_is_monotone() {
        let cfg = OptimizeConfig::new(spin(3), ObjectiveKind::TraceInverseQfi).with_ancilla(2).with_restarts(4);
        let r = optimize(&cfg).unwrap();
        assert!(r.descent_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = OptimizeConfig::new(spin(2), ObjectiveKind::TraceInverseQfi).with_restarts(4).with_seed(3);
        let a = optimize(&cfg).unwrap();
        let b = optimize(&cfg).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
