//! Quantum Fisher information for the two-phase rotation `exp(i(phi_x J_x + phi_y J_y))`.
//!
//! Two independent routes are provided:
//!
//! * [`qfi_matrix_analytic`] evaluates `H0_{mn} = 4 <Delta J_m J_n>_0` (the
//!   symmetrized covariance of `J_x`, `J_y` on the probe) plus, optionally, the
//!   first-order correction `H1` built from commutator expectations.
//! * [`qfi_matrix_numeric`] never touches the covariance formula: it builds
//!   `rho(phi) = |psi_phi><psi_phi|` at shifted phases, differentiates by central
//!   differences, forms the pure-state SLDs `L = 2 d rho` and evaluates
//!   `H_{mn} = Tr[rho (L_m L_n + L_n L_m)/2]`.
//!
//! The achievability residual is the raw `Im <l_x|l_y>` with
//! `|l_m> = L_m |psi>`. At zeroth order it equals `2 <J_z>_0` exactly, so the
//! multiparameter bound is attainable iff `<J_z>_0 = 0`.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};
use crate::spin::{self, Operator, SpinOps};
use crate::state::StateVector;

/// Ratio `Im<l_x|l_y> / <J_z>_0` for the zeroth-order auxiliary vectors.
pub const ACHIEVABILITY_CONSTANT: f64 = 2.0;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const MIN_STEP: f64 = 1e-7;
pub const MAX_STEP: f64 = 1e-3;
/// Smallest QFI eigenvalue treated as nonsingular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Rotation angles `(phi_x, phi_y)`; the z component is identically zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub x: f64,
    pub y: f64,
}

impl PhasePair {
    pub const ZERO: PhasePair = PhasePair { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn shifted(&self, param: usize, h: f64) -> Self {
        match param {
            0 => Self::new(self.x + h, self.y),
            _ => Self::new(self.x, self.y + h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiOrder {
    Zeroth,
    FirstCorrected,
    Numeric,
}

/// 2x2 QFI matrix in the `(phi_x, phi_y)` parametrization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiMatrix {
    pub h: [[f64; 2]; 2],
    pub order: QfiOrder,
    /// `Im <l_x|l_y>`
    pub achievability_residual: f64,
    /// The `H1` correction when it was evaluated (already included in `h`).
    pub first_order: Option<[[f64; 2]; 2]>,
    /// Set by the numeric route when the step-doubling check disagrees.
    pub warning: Option<String>,
}

/// Round-off components cleared, first nonzero component positive.
fn canonical_direction(v: [f64; 2]) -> [f64; 2] {
    let v = v.map(|x| if x.abs() < 1e-12 { 0.0 } else { x });
    let first = if v[0] != 0.0 { v[0] } else { v[1] };
    let sign = if first < 0.0 { -1.0 } else { 1.0 };
    // `+ 0.0` turns -0 into 0
    v.map(|x| sign * x + 0.0)
}

fn to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn from_array(a: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

impl QfiMatrix {
    pub fn matrix(&self) -> Matrix2<f64> {
        from_array(&self.h)
    }

    pub fn first_order_matrix(&self) -> Option<Matrix2<f64>> {
        self.first_order.as_ref().map(from_array)
    }

    /// Eigenvalues ascending with their eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let m = self.matrix();
        let sym = (m + m.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym);
        let (a, b) = if e.eigenvalues[0] <= e.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let vec = |k: usize| [e.eigenvectors[(0, k)], e.eigenvectors[(1, k)]];
        ([e.eigenvalues[a], e.eigenvalues[b]], [vec(a), vec(b)])
    }

    /// Fails with [`Error::SingularQfi`] naming the unestimable direction.
    pub fn inverse(&self) -> Result<Matrix2<f64>> {
        let (vals, vecs) = self.eigen();
        let singular = Error::SingularQfi {
            min_eigenvalue: vals[0],
            direction: canonical_direction(vecs[0]),
        };
        if vals[0] <= SINGULAR_TOL {
            return Err(singular);
        }
        self.matrix().try_inverse().ok_or(singular)
    }

    /// `tr[H^-1]`
    pub fn trace_inverse(&self) -> Result<f64> {
        Ok(self.inverse()?.trace())
    }
}

/// `|psi_phi> = U(phi) (x) I_A |psi_0>`
pub fn evolve(psi0: &StateVector, phi: PhasePair) -> Result<StateVector> {
    let ops = SpinOps::for_space(psi0.space())?;
    evolve_with(psi0, phi, &ops)
}

fn evolve_with(psi0: &StateVector, phi: PhasePair, ops: &SpinOps) -> Result<StateVector> {
    let u = spin::rotation_unitary(phi, ops, psi0.space())?;
    psi0.transformed(u.matrix())
}

/// Auxiliary vectors `|l_m> ~ |l_m^(0)> + |l_m^(1)>` for `m = x, y`.
#[derive(Clone, Debug)]
pub struct AuxVectors {
    pub zeroth: [CVector; 2],
    pub first: [CVector; 2],
}

impl AuxVectors {
    pub fn total(&self, mu: usize) -> CVector {
        &self.zeroth[mu] + &self.first[mu]
    }
}

pub fn aux_vectors(psi0: &StateVector, phi: PhasePair) -> Result<AuxVectors> {
    let ops = SpinOps::for_space(psi0.space())?;
    let psi = psi0.amplitudes();
    let g = ops.generator(phi);
    let g_psi = g.apply(psi);
    let comps = [&ops.x, &ops.y];
    let mk = |op: &Operator| {
        let j_psi = op.apply(psi);
        let mean = linalg::inner(psi, &j_psi);
        // 2i (J|psi> - |psi><J>)
        let l0 = (&j_psi - psi * mean) * (I * 2.0);
        // 2 (G|psi><J> - |psi><J G>)
        let j_g = linalg::inner(&j_psi, &g_psi);
        let l1 = (&g_psi * mean - psi * j_g) * c(2.0);
        (l0, l1)
    };
    let (lx0, lx1) = mk(comps[0]);
    let (ly0, ly1) = mk(comps[1]);
    Ok(AuxVectors {
        zeroth: [lx0, ly0],
        first: [lx1, ly1],
    })
}

/// `H0` from the covariance formula; `FirstCorrected` adds `H1(phi)`.
pub fn qfi_matrix_analytic(psi0: &StateVector, phi: PhasePair, order: QfiOrder) -> Result<QfiMatrix> {
    let ops = SpinOps::for_space(psi0.space())?;
    let comps = [&ops.x, &ops.y];
    let mut h0 = Matrix2::zeros();
    for m in 0..2 {
        for n in m..2 {
            let v = 4.0 * spin::sym_covariance(psi0, comps[m], comps[n])?;
            h0[(m, n)] = v;
            h0[(n, m)] = v;
        }
    }
    let aux = aux_vectors(psi0, PhasePair::ZERO)?;
    let residual = linalg::inner(&aux.zeroth[0], &aux.zeroth[1]).im;

    let (h, first_order) = match order {
        QfiOrder::Zeroth => (h0, None),
        QfiOrder::FirstCorrected => {
            let h1 = first_order_correction(psi0, phi, &ops)?;
            (h0 + h1, Some(to_array(&h1)))
        }
        QfiOrder::Numeric => {
            return Err(Error::InvalidConfig("use qfi_matrix_numeric for the numeric route".into()))
        }
    };
    Ok(QfiMatrix {
        h: to_array(&h),
        order,
        achievability_residual: residual,
        first_order,
        warning: None,
    })
}

/// `H1_{mn} = 2i ( <[G, J_n]><J_m> + <[G, J_m]><J_n> )`, `G = phi . J`.
pub fn first_order_correction(psi0: &StateVector, phi: PhasePair, ops: &SpinOps) -> Result<Matrix2<f64>> {
    let g = ops.generator(phi);
    let comps = [&ops.x, &ops.y];
    let means = [
        spin::expectation_real(psi0, comps[0])?,
        spin::expectation_real(psi0, comps[1])?,
    ];
    let comm = [
        spin::commutator_expectation(psi0, &g, comps[0])?,
        spin::commutator_expectation(psi0, &g, comps[1])?,
    ];
    let mut h1 = Matrix2::zeros();
    for m in 0..2 {
        for n in 0..2 {
            let v = I * 2.0 * (comm[n] * means[m] + comm[m] * means[n]);
            h1[(m, n)] = v.re;
        }
    }
    Ok(h1)
}

fn density_at(psi0: &StateVector, phi: PhasePair, ops: &SpinOps) -> Result<CMatrix> {
    Ok(evolve_with(psi0, phi, ops)?.density())
}

/// QFI by finite-difference SLDs of the pure-state family (independent oracle).
pub fn qfi_matrix_numeric(psi0: &StateVector, phi: PhasePair, step: f64) -> Result<QfiMatrix> {
    if !(MIN_STEP..=MAX_STEP).contains(&step) {
        return Err(Error::StepOutOfRange(step));
    }
    let ops = SpinOps::for_space(psi0.space())?;
    let rho = density_at(psi0, phi, &ops)?;
    let (h, residual) = numeric_at_step(psi0, phi, step, &ops, &rho)?;
    let (h2, _) = numeric_at_step(psi0, phi, 2.0 * step, &ops, &rho)?;

    let scale = h.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let discrepancy = (h - h2).iter().map(|x| x.abs()).fold(0.0, f64::max);
    let tol = (40.0 * step * step * scale).max(1e-6);
    let warning = (discrepancy > tol).then(|| {
        format!("step-doubling discrepancy {discrepancy:.3e} exceeds {tol:.3e}; finite-difference result may be inaccurate")
    });
    Ok(QfiMatrix {
        h: to_array(&h),
        order: QfiOrder::Numeric,
        achievability_residual: residual,
        first_order: None,
        warning,
    })
}

fn numeric_at_step(
    psi0: &StateVector,
    phi: PhasePair,
    step: f64,
    ops: &SpinOps,
    rho: &CMatrix,
) -> Result<(Matrix2<f64>, f64)> {
    let mut slds = Vec::with_capacity(2);
    for param in 0..2 {
        let plus = density_at(psi0, phi.shifted(param, step), ops)?;
        let minus = density_at(psi0, phi.shifted(param, -step), ops)?;
        let d_rho = (plus - minus).unscale(2.0 * step);
        slds.push(d_rho.scale(2.0));
    }
    let mut h = Matrix2::zeros();
    for m in 0..2 {
        for n in 0..2 {
            h[(m, n)] = sld_qfi_entry(rho, &slds[m], &slds[n]);
        }
    }
    let residual = linalg::trace(&(rho * &slds[0] * &slds[1])).im;
    Ok((h, residual))
}

/// `Re Tr[rho (A B + B A)/2]`
pub fn sld_qfi_entry(rho: &CMatrix, a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::trace(&(rho * linalg::anticommutator(a, b))).re * 0.5
}

/// SLD of a general density matrix.
#[derive(Clone, Debug)]
pub struct Sld {
    pub operator: Operator,
    /// `max |(L rho + rho L - 2 d rho)_{ab}|` over eigenbasis entries with `p_a + p_b > 1e-12`.
    pub support_residual: f64,
    /// For pure `rho` the vanishing of `Tr[rho [L_m, L_n]]` is necessary and
    /// sufficient for attainability; for mixed states only sufficient.
    pub achievability_necessary: bool,
}

/// Solve `2 d rho = L rho + rho L` in the eigenbasis of `rho`:
/// `L_ab = 2 <a|d rho|b> / (p_a + p_b)`, zero where `p_a + p_b <= 1e-12`.
pub fn sld_general(rho: &CMatrix, d_rho: &CMatrix) -> Result<Sld> {
    let (p, v) = crate::state::validate_density(rho)?;
    if d_rho.shape() != rho.shape() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: d_rho.nrows() });
    }
    let herm = linalg::hermiticity_residual(d_rho);
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let tr = linalg::trace(d_rho).norm();
    if tr > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("derivative has trace {tr:e}")));
    }
    let d = rho.nrows();
    let d_eig = v.adjoint() * d_rho * &v;
    let l_eig = CMatrix::from_fn(d, d, |a, b| {
        let s = p[a] + p[b];
        if s > 1e-12 {
            d_eig[(a, b)] * (2.0 / s)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mut residual: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            if p[a] + p[b] > 1e-12 {
                let r = l_eig[(a, b)] * (p[a] + p[b]) - d_eig[(a, b)] * 2.0;
                residual = residual.max(r.norm());
            }
        }
    }
    let l = &v * l_eig * v.adjoint();
    let l = (&l + l.adjoint()).scale(0.5);
    let rank = p.iter().filter(|&&x| x > 1e-12).count();
    Ok(Sld {
        operator: Operator::hermitian(l)?,
        support_residual: residual,
        achievability_necessary: rank == 1,
    })
}

/// Cramér-Rao bound `tr[G H^-1] / M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrbResult {
    pub weight: [[f64; 2]; 2],
    pub value: f64,
    pub m_measurements: u64,
    /// `sqrt(tr[H^-1])`, reported only for `G = I`.
    pub total_sensitivity: Option<f64>,
}

pub fn crb(h: &QfiMatrix, weight: Option<Matrix2<f64>>, m: u64) -> Result<CrbResult> {
    if m == 0 {
        return Err(Error::InvalidConfig("number of measurements must be at least 1".into()));
    }
    let inv = h.inverse()?;
    let g = weight.unwrap_or_else(Matrix2::identity);
    let sym_err = (g - g.transpose()).abs().max();
    let ge = SymmetricEigen::new((g + g.transpose()) * 0.5);
    if sym_err > 1e-12 || ge.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidConfig("weight matrix must be symmetric positive definite".into()));
    }
    let t = (g * inv).trace();
    let is_identity = weight.is_none() || (g - Matrix2::identity()).abs().max() == 0.0;
    Ok(CrbResult {
        weight: to_array(&g),
        value: t / m as f64,
        m_measurements: m,
        total_sensitivity: is_identity.then(|| t.sqrt()),
    })
}

/// `sqrt(tr[(H0)^-1])` for the probe.
pub fn joint_delta_phi(psi0: &StateVector) -> Result<f64> {
    Ok(qfi_matrix_analytic(psi0, PhasePair::ZERO, QfiOrder::Zeroth)?.trace_inverse()?.sqrt())
}

/// Single-parameter sensitivity `1/sqrt(H_mm)` for the rotation about `axis`.
pub fn single_delta_phi(psi0: &StateVector, axis: usize) -> Result<f64> {
    let h = qfi_matrix_analytic(psi0, PhasePair::ZERO, QfiOrder::Zeroth)?;
    let v = h.h[axis][axis];
    if v <= SINGULAR_TOL {
        let mut direction = [0.0; 2];
        direction[axis] = 1.0;
        return Err(Error::SingularQfi { min_eigenvalue: v, direction });
    }
    Ok(1.0 / v.sqrt())
}

/// Unit vector along the weaker QFI eigen-direction.
pub fn weakest_direction(h: &QfiMatrix) -> Vector2<f64> {
    let (_, vecs) = h.eigen();
    Vector2::new(vecs[0][0], vecs[0][1])
}
