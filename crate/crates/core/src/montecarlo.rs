//! Simulated estimation experiments with projective measurements.
//!
//! The total budget of `M` probes is split into an x ensemble of `M_x` copies
//! and a y ensemble of `M_y` copies. Each ensemble measures one observable
//! whose mean responds linearly to one phase; the phase estimate is the
//! moment estimator `(mean - offset) / slope`. Repeating the whole experiment
//! gives the empirical variance compared against the Cramer-Rao predictions.
//!
//! Randomness: repetition `r`, ensemble `e` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `2r + e`, so results do not
//! depend on how repetitions are scheduled across threads.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::parallel;
use crate::qfi::{self, PhasePair, QfiOrder};
use crate::spin::{self, eigenbasis, Axis, Operator, SpinOps, SpinQuantum};
use crate::state::{sequential_optimal, StateSpec, StateVector};

pub const DEFAULT_REPETITIONS: usize = 400;
pub const MIN_REPETITIONS: usize = 100;
pub const DEFAULT_SPLIT: f64 = 0.5;
/// Phases beyond this norm leave the linearized regime; reported as a warning.
pub const LINEAR_REGIME: f64 = 0.1;
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Measure `J_y` (x ensemble) and `J_x` (y ensemble).
    #[default]
    Spin,
    /// Parity-type observable on `|j,+-j>_x` (x ensemble) and `|j,+-j>_y` (y ensemble).
    Ghz,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Spin => "spin",
            EstimatorKind::Ghz => "ghz",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin" => Ok(EstimatorKind::Spin),
            "ghz" => Ok(EstimatorKind::Ghz),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}' (spin|ghz)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub j: SpinQuantum,
    #[serde(serialize_with = "spec_to_text", deserialize_with = "spec_from_text")]
    pub probe: StateSpec,
    pub phi_true: PhasePair,
    pub m_total: u64,
    pub seed: u64,
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub estimator: EstimatorKind,
}

fn default_split() -> f64 {
    DEFAULT_SPLIT
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

fn spec_to_text<S: Serializer>(spec: &StateSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(spec)
}

fn spec_from_text<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<StateSpec, D::Error> {
    let text = String::deserialize(d)?;
    StateSpec::parse(&text).map_err(serde::de::Error::custom)
}

impl ExperimentConfig {
    pub fn new(j: SpinQuantum, probe: StateSpec, phi_true: PhasePair, m_total: u64, seed: u64) -> Self {
        Self {
            j,
            probe,
            phi_true,
            m_total,
            seed,
            split: DEFAULT_SPLIT,
            repetitions: DEFAULT_REPETITIONS,
            estimator: EstimatorKind::Spin,
        }
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_repetitions(mut self, repetitions: usize) -> Self {
        self.repetitions = repetitions;
        self
    }

    /// `(M_x, M_y)`
    pub fn ensemble_sizes(&self) -> Result<(u64, u64)> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidConfig(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if self.split == DEFAULT_SPLIT && self.m_total % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "M = {} must be even for an equal split",
                self.m_total
            )));
        }
        let m_x = (self.split * self.m_total as f64).round() as u64;
        let m_y = self.m_total.saturating_sub(m_x);
        if m_x == 0 || m_y == 0 {
            return Err(Error::InvalidConfig(format!("M = {} leaves an empty ensemble", self.m_total)));
        }
        Ok((m_x, m_y))
    }

    fn validate(&self) -> Result<(u64, u64)> {
        if self.repetitions < MIN_REPETITIONS {
            return Err(Error::InvalidConfig(format!(
                "at least {MIN_REPETITIONS} repetitions are needed for a variance estimate"
            )));
        }
        if !self.phi_true.is_finite() {
            return Err(Error::InvalidConfig("phases must be finite".into()));
        }
        self.ensemble_sizes()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub estimator: EstimatorKind,
    /// Mean of the phase estimates over repetitions.
    pub estimates: PhasePair,
    pub standard_errors: PhasePair,
    /// Sample variance of the phase estimates over repetitions.
    pub empirical_variances: PhasePair,
    /// `1/(M_a H_aa)` from the ensemble probes.
    pub crb_prediction: PhasePair,
    /// Error-propagation variance `Var(O)/(slope^2 M_a)` at zero rotation.
    pub propagation_prediction: PhasePair,
    /// Mean measured outcome per shot, averaged over repetitions.
    pub mean_outcomes: PhasePair,
    /// Exact expectation of each observable on the rotated probe.
    pub predicted_outcomes: PhasePair,
    pub m_x: u64,
    pub m_y: u64,
    pub repetitions: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    /// `Var(phi_a) * M_a`
    pub fn scaled_variances(&self) -> PhasePair {
        PhasePair::new(
            self.empirical_variances.x * self.m_x as f64,
            self.empirical_variances.y * self.m_y as f64,
        )
    }
}

/// Outcome distribution of a projective measurement of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralSampler {
    values: Vec<f64>,
    probabilities: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl SpectralSampler {
    pub fn new(state: &StateVector, op: &Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian(linalg::hermiticity_residual(op.matrix())));
        }
        if op.dim() != state.dim() {
            return Err(Error::DimensionMismatch { expected: state.dim(), found: op.dim() });
        }
        let (eigvals, vecs) = linalg::hermitian_eigen(op.matrix());
        let mut values: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        for (k, &lambda) in eigvals.iter().enumerate() {
            let p = linalg::inner(&vecs.column(k).into_owned(), state.amplitudes()).norm_sqr();
            match values.last() {
                Some(&last) if (last - lambda).abs() <= DEGENERACY_TOL => *probabilities.last_mut().unwrap() += p,
                _ => {
                    values.push(lambda);
                    probabilities.push(p);
                }
            }
        }
        let index = WeightedIndex::new(&probabilities)
            .map_err(|e| Error::InvalidConfig(format!("degenerate outcome distribution: {e}")))?;
        Ok(Self { values, probabilities, index })
    }

    /// Distinct eigenvalues, descending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.values[self.index.sample(rng)]
    }

    pub fn sum_of<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        (0..n).map(|_| self.sample(rng)).sum()
    }
}

/// `n` i.i.d. outcomes of measuring `op` on `state`.
pub fn sample_projective<R: Rng + ?Sized>(state: &StateVector, op: &Operator, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one shot".into()));
    }
    let sampler = SpectralSampler::new(state, op)?;
    Ok((0..n).map(|_| sampler.sample(rng)).collect())
}

/// Generator of the repetition/ensemble stream.
pub fn stream_rng(seed: u64, repetition: usize, ensemble: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((repetition as u64) << 1) | (ensemble as u64 & 1));
    rng
}

/// One ensemble: probe, measured observable and linear response.
struct Ensemble {
    probe: StateVector,
    observable: Operator,
    /// `<O>` at zero rotation.
    offset: f64,
    /// `d<O>/d phi` at zero rotation.
    slope: f64,
    /// Index of the estimated phase in `(phi_x, phi_y)`.
    param: usize,
}

impl Ensemble {
    fn prepare(&self, phi: PhasePair) -> Result<(SpectralSampler, f64)> {
        let out = qfi::evolve(&self.probe, phi)?;
        let predicted = spin::expectation_real(&out, &self.observable)?;
        Ok((SpectralSampler::new(&out, &self.observable)?, predicted))
    }

    fn qfi_diagonal(&self) -> Result<f64> {
        let h = qfi::qfi_matrix_analytic(&self.probe, PhasePair::ZERO, QfiOrder::Zeroth)?;
        Ok(h.h[self.param][self.param])
    }

    fn propagation_variance(&self, m: u64) -> Result<f64> {
        let var = spin::variance(&self.probe, &self.observable)?;
        Ok(var / (self.slope * self.slope * m as f64))
    }
}

fn spin_ensembles(config: &ExperimentConfig) -> Result<[Ensemble; 2]> {
    let probe = config.probe.build(Some(config.j))?;
    let ops = SpinOps::for_space(probe.space())?;
    let mean_jz = spin::expectation_real(&probe, &ops.z)?;
    if mean_jz.abs() <= crate::squeezing::VANISHING_MEAN {
        return Err(Error::DivergentSensitivity { mean_jz });
    }
    let offset_y = spin::expectation_real(&probe, &ops.y)?;
    let offset_x = spin::expectation_real(&probe, &ops.x)?;
    // J_y^out = J_y + phi_x J_z, J_x^out = J_x - phi_y J_z
    Ok([
        Ensemble { probe: probe.clone(), observable: ops.y.clone(), offset: offset_y, slope: mean_jz, param: 0 },
        Ensemble { probe, observable: ops.x.clone(), offset: offset_x, slope: -mean_jz, param: 1 },
    ])
}

/// `e^{i chi}|j,j>_a<j,-j|_a + h.c.` with `chi = pi/2 - xi`, whose mean on the
/// rotated sequential probe is `sin(2 j phi_a)`.
pub fn ghz_observable(j: SpinQuantum, axis: Axis, xi: f64) -> Result<Operator> {
    if axis == Axis::Z {
        return Err(Error::OutOfRange("sequential probes rotate about x or y".into()));
    }
    let basis = eigenbasis(j, axis);
    let top = &basis[0];
    let bottom = &basis[j.dim() - 1];
    let coupling: CMatrix = top * bottom.adjoint() * C64::from_polar(1.0, FRAC_PI_2 - xi);
    Operator::hermitian(&coupling + coupling.adjoint())
}

fn ghz_ensembles(config: &ExperimentConfig) -> Result<[Ensemble; 2]> {
    let xi = match &config.probe {
        StateSpec::Seq { xi, .. } => *xi,
        other => {
            return Err(Error::WrongProbe(format!(
                "the parity estimator needs a sequential-optimal probe, got '{}'",
                other.kind()
            )))
        }
    };
    let j = config.j;
    if let Some(named) = config.probe.spin() {
        if named != j {
            return Err(Error::InvalidConfig(format!("probe names j = {named} but j = {j} was requested")));
        }
    }
    let slope = 2.0 * j.j();
    let make = |axis: Axis, param: usize| -> Result<Ensemble> {
        Ok(Ensemble {
            probe: sequential_optimal(j, axis, xi)?,
            observable: ghz_observable(j, axis, xi)?,
            offset: 0.0,
            slope,
            param,
        })
    };
    Ok([make(Axis::X, 0)?, make(Axis::Y, 1)?])
}

fn run(config: &ExperimentConfig, ensembles: [Ensemble; 2]) -> Result<ExperimentResult> {
    let (m_x, m_y) = config.validate()?;
    let sizes = [m_x, m_y];
    let (sx, px) = ensembles[0].prepare(config.phi_true)?;
    let (sy, py) = ensembles[1].prepare(config.phi_true)?;
    let samplers = [&sx, &sy];

    let seed = config.seed;
    let per_rep: Vec<[f64; 2]> = parallel::install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                let mut means = [0.0; 2];
                for e in 0..2 {
                    let mut rng = stream_rng(seed, rep, e);
                    means[e] = samplers[e].sum_of(sizes[e], &mut rng) / sizes[e] as f64;
                }
                means
            })
            .collect()
    });

    let n = per_rep.len() as f64;
    let mut stats = [(0.0, 0.0, 0.0); 2];
    for e in 0..2 {
        let ens = &ensembles[e];
        let est: Vec<f64> = per_rep.iter().map(|m| (m[e] - ens.offset) / ens.slope).collect();
        let mean = est.iter().sum::<f64>() / n;
        let var = est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let outcome = per_rep.iter().map(|m| m[e]).sum::<f64>() / n;
        stats[e] = (mean, var, outcome);
    }

    let mut warnings = Vec::new();
    if config.phi_true.norm() > LINEAR_REGIME {
        warnings.push(format!(
            "|phi| = {:.3} exceeds {LINEAR_REGIME}; the linear estimator is biased outside the small-angle regime",
            config.phi_true.norm()
        ));
    }
    let crb = |e: usize| -> Result<f64> {
        let h = ensembles[e].qfi_diagonal()?;
        Ok(if h > 0.0 { 1.0 / (sizes[e] as f64 * h) } else { f64::INFINITY })
    };

    Ok(ExperimentResult {
        estimator: config.estimator,
        estimates: PhasePair::new(stats[0].0, stats[1].0),
        standard_errors: PhasePair::new((stats[0].1 / n).sqrt(), (stats[1].1 / n).sqrt()),
        empirical_variances: PhasePair::new(stats[0].1, stats[1].1),
        crb_prediction: PhasePair::new(crb(0)?, crb(1)?),
        propagation_prediction: PhasePair::new(
            ensembles[0].propagation_variance(m_x)?,
            ensembles[1].propagation_variance(m_y)?,
        ),
        mean_outcomes: PhasePair::new(stats[0].2, stats[1].2),
        predicted_outcomes: PhasePair::new(px, py),
        m_x,
        m_y,
        repetitions: config.repetitions,
        seed,
        warnings,
    })
}

/// Sequential strategy with spin measurements: `J_y` on the x ensemble, `J_x`
/// on the y ensemble, both on the configured probe.
pub fn estimate_sequential_spin(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut cfg = config.clone();
    cfg.estimator = EstimatorKind::Spin;
    run(&cfg, spin_ensembles(&cfg)?)
}

/// Sequential strategy on the GHZ-type probes `seq(j, x, xi)` and
/// `seq(j, y, xi)`, each measured with its parity observable.
pub fn estimate_sequential_ghz(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut cfg = config.clone();
    cfg.estimator = EstimatorKind::Ghz;
    run(&cfg, ghz_ensembles(&cfg)?)
}

pub fn simulate(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.estimator {
        EstimatorKind::Spin => estimate_sequential_spin(config),
        EstimatorKind::Ghz => estimate_sequential_ghz(config),
    }
}
