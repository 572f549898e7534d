//! Spin-squeezing diagnostics: mean-spin direction, spin-measurement phase
//! sensitivity, the Wineland test and the two-mode criterion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spin::{self, make_spin_ops, Axis, Operator, SpinOps, SpinQuantum};
use crate::state::StateVector;

/// Margin for strict squeezing comparisons.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Below this `|<J>|` (or `|<J_z>|`) the mean spin is treated as zero.
pub const VANISHING_MEAN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub msd: [f64; 3],
    pub rotation_axis: Axis,
    pub delta_phi: f64,
    pub sql: f64,
    pub squeezed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeReport {
    pub var_x_minus: f64,
    pub var_y_plus: f64,
    pub z_plus_mean: f64,
    /// `|<J_z+>| - var_x_minus - var_y_plus`
    pub margin: f64,
    pub two_mode_squeezed: bool,
}

fn ops_for(state: &StateVector) -> Result<SpinOps> {
    SpinOps::for_space(state.space())
}

/// `(<J_x>, <J_y>, <J_z>)`
pub fn mean_spin(state: &StateVector) -> Result<[f64; 3]> {
    let ops = ops_for(state)?;
    Ok([
        spin::expectation_real(state, &ops.x)?,
        spin::expectation_real(state, &ops.y)?,
        spin::expectation_real(state, &ops.z)?,
    ])
}

/// `<J>/|<J>|`
pub fn mean_spin_direction(state: &StateVector) -> Result<[f64; 3]> {
    let m = mean_spin(state)?;
    let len = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len <= VANISHING_MEAN {
        return Err(Error::UndefinedMsd);
    }
    Ok(m.map(|x| x / len))
}

/// Spin-measurement sensitivity for a rotation about `axis`, with the mean
/// spin along z: `dJ_y/|<J_z>|` for x, `dJ_x/|<J_z>|` for y.
pub fn phase_sensitivity_spin(state: &StateVector, axis: Axis) -> Result<f64> {
    let ops = ops_for(state)?;
    let measured = match axis {
        Axis::X => &ops.y,
        Axis::Y => &ops.x,
        Axis::Z => return Err(Error::OutOfRange("rotation axis must be x or y".into())),
    };
    let mean_jz = spin::expectation_real(state, &ops.z)?;
    if mean_jz.abs() <= VANISHING_MEAN {
        return Err(Error::DivergentSensitivity { mean_jz });
    }
    let var = spin::variance(state, measured)?.max(0.0);
    Ok(var.sqrt() / mean_jz.abs())
}

/// `1/sqrt(2j)`
pub fn sql(j: SpinQuantum) -> f64 {
    1.0 / (2.0 * j.j()).sqrt()
}

pub fn is_spin_squeezed(state: &StateVector, axis: Axis) -> Result<SqueezingReport> {
    let delta_phi = phase_sensitivity_spin(state, axis)?;
    let msd = mean_spin_direction(state)?;
    let sql = sql(state.spin()?);
    Ok(SqueezingReport {
        msd,
        rotation_axis: axis,
        delta_phi,
        sql,
        squeezed: delta_phi < sql - STRICT_MARGIN,
    })
}

/// Kitagawa-Ueda parameter: smallest variance of `n.J` over unit `n`
/// orthogonal to the mean spin, divided by `j/2`.
pub fn kitagawa_ueda(state: &StateVector) -> Result<f64> {
    let ops = ops_for(state)?;
    let n = mean_spin_direction(state)?;
    // orthonormal pair spanning the plane orthogonal to n
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(n, helper));
    let e2 = cross(n, e1);
    let a = ops.along(e1);
    let b = ops.along(e2);
    let vaa = spin::variance(state, &a)?;
    let vbb = spin::variance(state, &b)?;
    let vab = spin::sym_covariance(state, &a, &b)?;
    let min = 0.5 * (vaa + vbb) - (0.25 * (vaa - vbb).powi(2) + vab * vab).sqrt();
    Ok(min / (0.5 * state.spin()?.j()))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Sums and differences `J_a1 (x) I +- I (x) J_a2` on `H_j1 (x) H_j2`.
#[derive(Clone, Debug)]
pub struct TwoModeOps {
    pub x_plus: Operator,
    pub x_minus: Operator,
    pub y_plus: Operator,
    pub y_minus: Operator,
    pub z_plus: Operator,
    pub z_minus: Operator,
}

pub fn two_mode_ops(j1: SpinQuantum, j2: SpinQuantum) -> TwoModeOps {
    let a = make_spin_ops(j1);
    let b = make_spin_ops(j2);
    let ia = linalg::identity(j1.dim());
    let ib = linalg::identity(j2.dim());
    let pair = |p: &Operator, q: &Operator| {
        let left = linalg::kron(p.matrix(), &ib);
        let right = linalg::kron(&ia, q.matrix());
        (
            Operator::hermitian_unchecked(&left + &right),
            Operator::hermitian_unchecked(left - right),
        )
    };
    let (x_plus, x_minus) = pair(&a.x, &b.x);
    let (y_plus, y_minus) = pair(&a.y, &b.y);
    let (z_plus, z_minus) = pair(&a.z, &b.z);
    TwoModeOps { x_plus, x_minus, y_plus, y_minus, z_plus, z_minus }
}

/// Spin of each factor for a state on `H_j (x) H_j`.
pub fn two_spin_factor(state: &StateVector) -> Result<SpinQuantum> {
    let d = state.dim();
    let root = (d as f64).sqrt().round() as usize;
    if root < 2 || root * root != d {
        return Err(Error::NotTwoSpin(d));
    }
    SpinQuantum::from_dim(root)
}

pub fn two_mode_report(state: &StateVector, ops: &TwoModeOps) -> Result<TwoModeReport> {
    let var_x_minus = spin::variance(state, &ops.x_minus)?;
    let var_y_plus = spin::variance(state, &ops.y_plus)?;
    let z_plus_mean = spin::expectation_real(state, &ops.z_plus)?;
    let margin = z_plus_mean.abs() - var_x_minus - var_y_plus;
    Ok(TwoModeReport {
        var_x_minus,
        var_y_plus,
        z_plus_mean,
        margin,
        two_mode_squeezed: margin > STRICT_MARGIN,
    })
}

pub fn is_two_mode_squeezed(state: &StateVector) -> Result<TwoModeReport> {
    if state.space().ancilla_dim > 1 {
        return Err(Error::NotTwoSpin(state.dim()));
    }
    let j = two_spin_factor(state)?;
    two_mode_report(state, &two_mode_ops(j, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff, CMatrix};
    use crate::state::{
        constructive_squeezed, constructive_squeezed_along, css, dicke, joint_optimal, random_product, random_state,
        sequential_optimal,
    };
    use crate::spin::CompositeSpace;
    use crate::qfi::{evolve, PhasePair};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spin(two_j: u32) -> SpinQuantum {
        SpinQuantum::from_twice(two_j).unwrap()
    }

    #[test]
    fn msd_of_coherent_states() {
        let n = mean_spin_direction(&css(spin(4), [0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert!((n[2] - 1.0).abs() < 1e-12 && n[0].abs() < 1e-12 && n[1].abs() < 1e-12);
        let dir = normalize([0.3, -0.5, 0.8]);
        for two_j in 1..=8 {
            let n = mean_spin_direction(&css(spin(two_j), dir).unwrap()).unwrap();
            for k in 0..3 {
                assert!((n[k] - dir[k]).abs() < 1e-10);
            }
        }
        assert_eq!(mean_spin_direction(&dicke(spin(2), 0, Axis::Z).unwrap()), Err(Error::UndefinedMsd));
    }

    #[test]
    fn css_sensitivity_is_sql() {
        for two_j in 1..=20 {
            let j = spin(two_j);
            let s = css(j, [0.0, 0.0, 1.0]).unwrap();
            for axis in [Axis::X, Axis::Y] {
                let d = phase_sensitivity_spin(&s, axis).unwrap();
                assert!((d - sql(j)).abs() < 1e-10);
            }
            let r = is_spin_squeezed(&s, Axis::X).unwrap();
            assert!(!r.squeezed);
            // phase convention does not matter
            let d = phase_sensitivity_spin(&s.with_global_phase(1.234), Axis::X).unwrap();
            assert!((d - sql(j)).abs() < 1e-10);
        }
    }

    #[test]
    fn constructive_sensitivity() {
        let d = phase_sensitivity_spin(&constructive_squeezed(spin(2)).unwrap(), Axis::X).unwrap();
        assert!((d - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        for two_j in 1..=20 {
            let j = spin(two_j);
            let want = if j.is_integer() {
                1.0 / j.casimir().sqrt()
            } else {
                1.0 / (j.casimir() + 0.25).sqrt()
            };
            let dx = phase_sensitivity_spin(&constructive_squeezed(j).unwrap(), Axis::X).unwrap();
            let dy = phase_sensitivity_spin(&constructive_squeezed_along(j, Axis::X).unwrap(), Axis::Y).unwrap();
            assert!((dx - want).abs() < 1e-10, "j={j}");
            assert!((dy - want).abs() < 1e-10, "j={j}");
        }
        assert!(is_spin_squeezed(&constructive_squeezed(spin(4)).unwrap(), Axis::X).unwrap().squeezed);
        let half = is_spin_squeezed(&constructive_squeezed(spin(1)).unwrap(), Axis::X).unwrap();
        assert!((half.delta_phi - 1.0).abs() < 1e-12);
        assert!(!half.squeezed);
    }

    #[test]
    fn sequential_probe_diverges() {
        // at j = 1/2 the two extremal x states are adjacent and <J_z> = cos(xi)/2
        let s = sequential_optimal(spin(1), Axis::X, 0.0).unwrap();
        assert!((phase_sensitivity_spin(&s, Axis::X).unwrap() - 1.0).abs() < 1e-12);
        for two_j in 2..=8 {
            let s = sequential_optimal(spin(two_j), Axis::X, 0.0).unwrap();
            assert!(matches!(
                phase_sensitivity_spin(&s, Axis::X),
                Err(Error::DivergentSensitivity { .. })
            ));
        }
    }

    #[test]
    fn heisenberg_limit_not_reached() {
        // SQL and Heisenberg limit coincide at j = 1/2
        for two_j in 2..=20 {
            let j = spin(two_j);
            let hl = 1.0 / (2.0 * j.j());
            let mut probes = vec![css(j, [0.0, 0.0, 1.0]).unwrap(), constructive_squeezed(j).unwrap()];
            if two_j >= 3 {
                probes.push(dicke(j, two_j as i32 - 2, Axis::Z).unwrap());
            }
            for p in probes {
                let d = phase_sensitivity_spin(&p, Axis::X).unwrap();
                assert!(d > hl + 1e-6, "j={j}: {d} vs {hl}");
            }
        }
    }

    #[test]
    fn uncertainty_relation_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for two_j in 1..=8 {
            let j = spin(two_j);
            let ops = make_spin_ops(j);
            for _ in 0..50 {
                let s = random_state(CompositeSpace::spin(j), &mut rng);
                let vx = spin::variance(&s, &ops.x).unwrap();
                let vy = spin::variance(&s, &ops.y).unwrap();
                let z = spin::expectation_real(&s, &ops.z).unwrap();
                assert!((vx * vy).sqrt() >= z.abs() / 2.0 - 1e-10);
            }
        }
    }

    #[test]
    fn heisenberg_picture_linear_response() {
        let phi = 1e-4;
        for two_j in 1..=10 {
            let j = spin(two_j);
            let ops = make_spin_ops(j);
            for s in [css(j, [0.0, 0.0, 1.0]).unwrap(), constructive_squeezed(j).unwrap()] {
                let jz = spin::expectation_real(&s, &ops.z).unwrap();
                let out = evolve(&s, PhasePair::new(phi, 0.0)).unwrap();
                let jy = spin::expectation_real(&out, &ops.y).unwrap();
                assert!((jy - phi * jz).abs() <= 10.0 * j.casimir() * phi * phi);
                let out = evolve(&s, PhasePair::new(0.0, phi)).unwrap();
                let jx = spin::expectation_real(&out, &ops.x).unwrap();
                assert!((jx + phi * jz).abs() <= 10.0 * j.casimir() * phi * phi);
            }
        }
    }

    #[test]
    fn kitagawa_ueda_reference_values() {
        for two_j in 1..=8 {
            let j = spin(two_j);
            let xi = kitagawa_ueda(&css(j, [0.2, 0.4, -0.7]).unwrap()).unwrap();
            assert!((xi - 1.0).abs() < 1e-10);
        }
        assert!(kitagawa_ueda(&constructive_squeezed(spin(6)).unwrap()).unwrap() < 1.0);
    }

    #[test]
    fn two_mode_operators() {
        let ops = two_mode_ops(spin(1), spin(1));
        let want = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![c(1.0), c(0.0), c(0.0), c(-1.0)]));
        assert!(max_abs_diff(ops.z_plus.matrix(), &want) < 1e-15);
        let up = css(spin(2), [0.0, 0.0, 1.0]).unwrap();
        let s = StateVector::product(&[up.clone(), up]).unwrap();
        assert!(spin::expectation_real(&s, &ops_for_pair(2).x_plus).unwrap().abs() < 1e-15);
    }

    fn ops_for_pair(two_j: u32) -> TwoModeOps {
        two_mode_ops(spin(two_j), spin(two_j))
    }

    #[test]
    fn two_mode_uncertainty_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for two_j in 1..=3 {
            let ops = ops_for_pair(two_j);
            let d = spin(two_j).dim();
            for _ in 0..50 {
                let s = random_state(CompositeSpace::new(d * d, 0).unwrap(), &mut rng);
                let zp = spin::expectation_real(&s, &ops.z_plus).unwrap().abs();
                for (a, b) in [(&ops.x_plus, &ops.y_plus), (&ops.x_minus, &ops.y_minus)] {
                    let va = spin::variance(&s, a).unwrap();
                    let vb = spin::variance(&s, b).unwrap();
                    let comm = spin::commutator_expectation(&s, a, b).unwrap().norm();
                    assert!((comm - zp).abs() < 1e-10);
                    assert!((va * vb).sqrt() >= zp / 2.0 - 1e-10);
                }
            }
        }
    }

    #[test]
    fn css_pair_is_boundary() {
        for two_j in 1..=6 {
            let up = css(spin(two_j), [0.0, 0.0, 1.0]).unwrap();
            let s = StateVector::product(&[up.clone(), up]).unwrap();
            let r = is_two_mode_squeezed(&s).unwrap();
            assert!(r.margin.abs() < 1e-12);
            assert!((r.var_x_minus + r.var_y_plus - two_j as f64).abs() < 1e-12);
            assert!(!r.two_mode_squeezed);
        }
    }

    #[test]
    fn product_states_never_two_mode_squeezed() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for two_j in 1..=4 {
            for _ in 0..250 {
                let s = random_product(spin(two_j), spin(two_j), &mut rng);
                let r = is_two_mode_squeezed(&s).unwrap();
                assert!(!r.two_mode_squeezed, "margin {}", r.margin);
            }
        }
    }

    #[test]
    fn entangled_pair_can_be_two_mode_squeezed() {
        // (cos t |up,up> + sin t |dn,dn>) for spin-1/2 pairs
        let t: f64 = 0.3;
        let amps = crate::linalg::CVector::from_vec(vec![c(t.cos()), c(0.0), c(0.0), c(t.sin())]);
        let s = StateVector::new(CompositeSpace::new(4, 0).unwrap(), amps).unwrap();
        let r = is_two_mode_squeezed(&s).unwrap();
        assert!(r.two_mode_squeezed);
        assert!(r.margin > 0.1);
    }

    #[test]
    fn two_mode_rejects_bad_dimensions() {
        let s = joint_optimal(spin(1), 0.0);
        assert_eq!(is_two_mode_squeezed(&s).unwrap_err(), Error::NotTwoSpin(4));
        let s = dicke(spin(2), 0, Axis::Z).unwrap();
        assert_eq!(is_two_mode_squeezed(&s).unwrap_err(), Error::NotTwoSpin(3));
    }
}
