//! Closed-form two-phase sensitivities for each estimation strategy.
//!
//! Each strategy sits behind the [`Strategy`] trait and is looked up by name in
//! a [`StrategyRegistry`]. The formulas here are deliberately independent of
//! the QFI engine so the two can be checked against each other.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{Parity, SpinQuantum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Joint,
    Sequential,
    SequentialSpin,
    Sql,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Joint,
        StrategyKind::Sequential,
        StrategyKind::SequentialSpin,
        StrategyKind::Sql,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Joint => "joint",
            StrategyKind::Sequential => "sequential",
            StrategyKind::SequentialSpin => "sequential_spin",
            StrategyKind::Sql => "sql",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// Two-phase sensitivity `Delta Phi` of one strategy at one `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub strategy: StrategyKind,
    pub j: SpinQuantum,
    pub delta_phi_total: f64,
    /// Effective per-phase sensitivities `(Delta phi_x^eff, Delta phi_y^eff)`.
    pub per_phase: Option<(f64, f64)>,
}

impl SensitivityReport {
    pub fn parity(&self) -> Parity {
        self.j.parity()
    }
}

/// Effective sensitivities of a sequential protocol splitting `M` copies evenly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effective {
    pub per_phase: (f64, f64),
    pub total: f64,
}

/// `Delta phi^eff = sqrt(2) Delta phi` for each phase, combined in quadrature.
pub fn combine_effective(dphi_x: f64, dphi_y: f64) -> Result<Effective> {
    if !(dphi_x > 0.0 && dphi_y > 0.0) || !dphi_x.is_finite() || !dphi_y.is_finite() {
        return Err(Error::OutOfRange(format!(
            "single-phase sensitivities must be positive, got ({dphi_x}, {dphi_y})"
        )));
    }
    let ex = std::f64::consts::SQRT_2 * dphi_x;
    let ey = std::f64::consts::SQRT_2 * dphi_y;
    Ok(Effective {
        per_phase: (ex, ey),
        total: ex.hypot(ey),
    })
}

fn sequential_report(kind: StrategyKind, j: SpinQuantum, dphi: f64) -> SensitivityReport {
    let eff = combine_effective(dphi, dphi).expect("closed-form sensitivities are positive");
    SensitivityReport {
        strategy: kind,
        j,
        delta_phi_total: eff.total,
        per_phase: Some(eff.per_phase),
    }
}

pub trait Strategy: Send + Sync {
    fn kind(&self) -> StrategyKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    fn description(&self) -> &'static str;

    fn sensitivity(&self, j: SpinQuantum) -> SensitivityReport;
}

/// Single probe, single joint measurement: `1/sqrt(j(j+1))` for integer `j`,
/// `1/sqrt(j(j+1) - 1/4)` for semi-odd `j`.
pub struct JointEstimation;

impl Strategy for JointEstimation {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Joint
    }

    fn description(&self) -> &'static str {
        "joint estimation with an optimal (ancilla-assisted for semi-odd j) probe"
    }

    fn sensitivity(&self, j: SpinQuantum) -> SensitivityReport {
        let denom = match j.parity() {
            Parity::Integer => j.casimir(),
            Parity::SemiOdd => j.casimir() - 0.25,
        };
        SensitivityReport {
            strategy: StrategyKind::Joint,
            j,
            delta_phi_total: 1.0 / denom.sqrt(),
            per_phase: None,
        }
    }
}

/// Two GHZ-like single-phase protocols at the Heisenberg limit `1/(2j)` each; total `1/j`.
pub struct SequentialEstimation;

impl Strategy for SequentialEstimation {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Sequential
    }

    fn description(&self) -> &'static str {
        "sequential estimation with GHZ-like probes and optimal measurements"
    }

    fn sensitivity(&self, j: SpinQuantum) -> SensitivityReport {
        sequential_report(StrategyKind::Sequential, j, 1.0 / (2.0 * j.j()))
    }
}

/// Sequential strategy restricted to spin measurements on the constructive
/// squeezed probes.
pub struct SpinSequential;

impl SpinSequential {
    /// Single-phase spin-measurement sensitivity of the constructive probe.
    pub fn single_phase(j: SpinQuantum) -> f64 {
        let denom = match j.parity() {
            Parity::Integer => j.casimir(),
            Parity::SemiOdd => j.casimir() + 0.25,
        };
        1.0 / denom.sqrt()
    }
}

impl Strategy for SpinSequential {
    fn kind(&self) -> StrategyKind {
        StrategyKind::SequentialSpin
    }

    fn description(&self) -> &'static str {
        "sequential estimation with spin measurements on spin-squeezed probes"
    }

    fn sensitivity(&self, j: SpinQuantum) -> SensitivityReport {
        sequential_report(StrategyKind::SequentialSpin, j, Self::single_phase(j))
    }
}

/// Coherent-state reference `1/sqrt(2j)` per phase; total `sqrt(2/j)`.
pub struct StandardQuantumLimit;

impl Strategy for StandardQuantumLimit {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Sql
    }

    fn description(&self) -> &'static str {
        "standard quantum limit of coherent spin states"
    }

    fn sensitivity(&self, j: SpinQuantum) -> SensitivityReport {
        sequential_report(StrategyKind::Sql, j, 1.0 / (2.0 * j.j()).sqrt())
    }
}

pub fn joint_sensitivity(j: SpinQuantum) -> SensitivityReport {
    JointEstimation.sensitivity(j)
}

pub fn sequential_sensitivity(j: SpinQuantum) -> SensitivityReport {
    SequentialEstimation.sensitivity(j)
}

pub fn spin_sequential_sensitivity(j: SpinQuantum) -> SensitivityReport {
    SpinSequential.sensitivity(j)
}

pub fn sql_sensitivity(j: SpinQuantum) -> SensitivityReport {
    StandardQuantumLimit.sensitivity(j)
}

/// Named strategies, iterated in [`StrategyKind`] order.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn Strategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(JointEstimation));
        r.register(Box::new(SequentialEstimation));
        r.register(Box::new(SpinSequential));
        r.register(Box::new(StandardQuantumLimit));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Add a strategy, replacing any registered under the same kind.
    pub fn register(&mut self, strategy: Box<dyn Strategy>) {
        self.entries.retain(|s| s.kind() != strategy.kind());
        self.entries.push(strategy);
        self.entries.sort_by_key(|s| s.kind());
    }

    pub fn get(&self, name: &str) -> Option<&dyn Strategy> {
        self.entries.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }

    pub fn all(&self) -> Vec<&dyn Strategy> {
        self.entries.iter().map(|s| s.as_ref()).collect()
    }

    /// Resolve a list of names (or `"all"`), keeping registry order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<&dyn Strategy>> {
        if names.iter().any(|n| n.as_ref() == "all") {
            return Ok(self.all());
        }
        let mut picked: Vec<&dyn Strategy> = Vec::new();
        for n in names {
            let s = self
                .get(n.as_ref())
                .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {:?}; known: {}", n.as_ref(), self.names().join(", "))))?;
            if !picked.iter().any(|p| p.kind() == s.kind()) {
                picked.push(s);
            }
        }
        picked.sort_by_key(|s| s.kind());
        Ok(picked)
    }
}

/// One row per half-integer `j` in `[j_min, j_max]` per strategy, ordered by
/// ascending `j` then strategy.
pub fn scan(j_min: SpinQuantum, j_max: SpinQuantum, strategies: &[&dyn Strategy]) -> Result<Vec<SensitivityReport>> {
    if j_min > j_max || strategies.is_empty() {
        return Err(Error::EmptyRange);
    }
    let mut ordered: Vec<&dyn Strategy> = strategies.to_vec();
    ordered.sort_by_key(|s| s.kind());
    let mut rows = Vec::new();
    for two_j in j_min.two_j()..=j_max.two_j() {
        let j = SpinQuantum::from_twice(two_j)?;
        rows.extend(ordered.iter().map(|s| s.sensitivity(j)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin(two_j: u32) -> SpinQuantum {
        SpinQuantum::from_twice(two_j).unwrap()
    }

    #[test]
    fn joint_values() {
        assert!((joint_sensitivity(spin(2)).delta_phi_total - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((joint_sensitivity(spin(1)).delta_phi_total - 2f64.sqrt()).abs() < 1e-15);
        assert!((joint_sensitivity(spin(20)).delta_phi_total - 1.0 / 110f64.sqrt()).abs() < 1e-15);
        assert!((joint_sensitivity(spin(20)).delta_phi_total - 0.09535).abs() < 1e-5);
    }

    #[test]
    fn sequential_values() {
        let r = sequential_sensitivity(spin(4));
        assert!((r.delta_phi_total - 0.5).abs() < 1e-15);
        let (ex, ey) = r.per_phase.unwrap();
        assert!((ex - 2f64.sqrt() / 4.0).abs() < 1e-15 && (ey - ex).abs() == 0.0);
        assert!((sequential_sensitivity(spin(1)).delta_phi_total - 2.0).abs() < 1e-15);
        for two_j in 1..=40 {
            let j = spin(two_j);
            let r = sequential_sensitivity(j);
            let (ex, ey) = r.per_phase.unwrap();
            assert!((ex.hypot(ey) - 1.0 / j.j()).abs() < 1e-12);
            assert!((r.delta_phi_total - 1.0 / j.j()).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_sequential_values() {
        assert!((spin_sequential_sensitivity(spin(2)).delta_phi_total - 2f64.sqrt()).abs() < 1e-15);
        assert!((spin_sequential_sensitivity(spin(3)).delta_phi_total - 1.0).abs() < 1e-15);
        let j = spin(100);
        let ratio = spin_sequential_sensitivity(j).delta_phi_total / (2.0 * sequential_sensitivity(j).delta_phi_total);
        assert!((ratio - 1.0).abs() < 0.025);
    }

    #[test]
    fn sql_values_and_ordering() {
        assert!((sql_sensitivity(spin(4)).delta_phi_total - 1.0).abs() < 1e-15);
        assert!((sql_sensitivity(spin(1)).delta_phi_total - 2.0).abs() < 1e-15);
        for two_j in 1..=40 {
            let j = spin(two_j);
            let joint = joint_sensitivity(j).delta_phi_total;
            let seq = sequential_sensitivity(j).delta_phi_total;
            let spin_seq = spin_sequential_sensitivity(j).delta_phi_total;
            let sql = sql_sensitivity(j).delta_phi_total;
            assert!(joint < seq, "j={j}");
            if two_j >= 3 {
                assert!(spin_seq < sql, "j={j}");
            }
        }
        // boundary cases
        assert!((spin_sequential_sensitivity(spin(2)).delta_phi_total - sql_sensitivity(spin(2)).delta_phi_total).abs() < 1e-15);
        assert!((spin_sequential_sensitivity(spin(1)).delta_phi_total - sql_sensitivity(spin(1)).delta_phi_total).abs() < 1e-15);
    }

    #[test]
    fn combine_effective_rules() {
        let e = combine_effective(0.5, 0.5).unwrap();
        assert!((e.total - 1.0).abs() < 1e-15);
        let a = 0.37;
        assert!((combine_effective(a, a).unwrap().total - 2.0 * a).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((combine_effective(s, s).unwrap().total - 2f64.sqrt()).abs() < 1e-15);
        assert!(combine_effective(0.0, 1.0).is_err());
        assert!(combine_effective(1.0, -1.0).is_err());
        assert!(combine_effective(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn registry_lookup_and_selection() {
        let reg = StrategyRegistry::default();
        assert_eq!(reg.names(), vec!["joint", "sequential", "sequential_spin", "sql"]);
        assert!(reg.get("joint").is_some());
        assert!(reg.get("bogus").is_none());
        let sel = reg.select(&["sql", "joint", "sql"]).unwrap();
        assert_eq!(sel.iter().map(|s| s.kind()).collect::<Vec<_>>(), vec![StrategyKind::Joint, StrategyKind::Sql]);
        assert_eq!(reg.select(&["all"]).unwrap().len(), 4);
        assert!(reg.select(&["nope"]).is_err());
    }

    #[test]
    fn scan_cardinality_order_and_monotonicity() {
        let reg = StrategyRegistry::default();
        let rows = scan(spin(1), spin(4), &reg.all()).unwrap();
        assert_eq!(rows.len(), 16);
        let row = rows.iter().find(|r| r.j == spin(2) && r.strategy == StrategyKind::Joint).unwrap();
        assert!((row.delta_phi_total - 0.70711).abs() < 1e-5);
        for w in rows.windows(2) {
            assert!((w[0].j, w[0].strategy) < (w[1].j, w[1].strategy));
        }
        let rows = scan(spin(1), spin(20), &reg.all()).unwrap();
        for kind in StrategyKind::ALL {
            let col: Vec<f64> = rows.iter().filter(|r| r.strategy == kind).map(|r| r.delta_phi_total).collect();
            assert!(col.windows(2).all(|w| w[1] < w[0]), "{kind}");
        }
        assert!(matches!(scan(spin(4), spin(2), &reg.all()), Err(Error::EmptyRange)));
        assert!(matches!(scan(spin(1), spin(2), &[]), Err(Error::EmptyRange)));
    }
}
