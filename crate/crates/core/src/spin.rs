//! Spin-j angular momentum operators in the `J_z` eigenbasis.
//!
//! Basis vectors are ordered `m = j, j-1, ..., -j`. Operators are built from
//! the ladder operator `J_+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>` and obey
//! `[J_a, J_b] = i J_c` with `hbar = 1`.
//!
//! Rotated eigenbases use a fixed phase convention:
//! `|j,m>_x = exp(-i pi/2 J_y)|j,m>_z`, `|j,m>_y = exp(+i pi/2 J_x)|j,m>_z`,
//! after which every vector is rephased so its first nonzero amplitude (in
//! `J_z` order) is real positive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};
#[cfg(test)]
use crate::linalg::I;
use crate::qfi::PhasePair;
use crate::state::StateVector;

pub const HERMITIAN_TOL: f64 = 1e-12;

/// Spin magnitude `j`, stored exactly as the integer `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SpinQuantum {
    two_j: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Integer,
    SemiOdd,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Integer => "integer",
            Parity::SemiOdd => "semi-odd",
        })
    }
}

impl SpinQuantum {
    pub fn from_twice(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::InvalidSpin("j must be at least 1/2".into()));
        }
        Ok(Self { two_j })
    }

    pub fn two_j(self) -> u32 {
        self.two_j
    }

    pub fn j(self) -> f64 {
        f64::from(self.two_j) / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_j as usize + 1
    }

    pub fn parity(self) -> Parity {
        if self.two_j % 2 == 0 {
            Parity::Integer
        } else {
            Parity::SemiOdd
        }
    }

    pub fn is_integer(self) -> bool {
        self.parity() == Parity::Integer
    }

    /// `j(j+1)`
    pub fn casimir(self) -> f64 {
        let j = self.j();
        j * (j + 1.0)
    }

    /// The next spin in half-integer steps.
    pub fn succ(self) -> Self {
        Self { two_j: self.two_j + 1 }
    }

    /// Spin of a `(2j+1)`-dimensional system.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpin(format!("dimension {dim} is too small for a spin")));
        }
        Self::from_twice((dim - 1) as u32)
    }

    /// Index of `m` (given as `2m`) in the `m = j, ..., -j` ordering.
    pub fn index_of(self, two_m: i32) -> Result<usize> {
        let tj = self.two_j as i32;
        if two_m.abs() > tj || (tj - two_m) % 2 != 0 {
            return Err(Error::OutOfRange(format!(
                "m = {} is not a projection of j = {self}",
                HalfInt(two_m)
            )));
        }
        Ok(((tj - two_m) / 2) as usize)
    }
}

impl TryFrom<u32> for SpinQuantum {
    type Error = Error;

    fn try_from(two_j: u32) -> Result<Self> {
        Self::from_twice(two_j)
    }
}

impl From<SpinQuantum> for u32 {
    fn from(s: SpinQuantum) -> u32 {
        s.two_j
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", HalfInt(self.two_j as i32))
    }
}

impl FromStr for SpinQuantum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let two = parse_twice(s).map_err(Error::InvalidSpin)?;
        if two < 0 {
            return Err(Error::InvalidSpin(format!("negative spin {s:?}")));
        }
        Self::from_twice(two as u32)
    }
}

/// A half-integer stored as its double, printed as `3/2`, `-1/2`, `2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfInt(pub i32);

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Parse `"3/2"`, `"1.5"`, `"-1/2"` or `"2"` into twice its value.
pub fn parse_twice(s: &str) -> std::result::Result<i32, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: i32 = num.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        match den.trim() {
            "1" => Ok(2 * num),
            "2" => Ok(num),
            _ => Err(format!("{s:?} is not a half-integer")),
        }
    } else {
        let v: f64 = s.parse().map_err(|_| format!("cannot parse {s:?} as a number"))?;
        let twice = 2.0 * v;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(format!("{s:?} is not a half-integer"));
        }
        Ok(twice.round() as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::OutOfRange(format!("unknown axis {other:?}"))),
        }
    }
}

/// Dense square operator with an optional Hermitian flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { matrix, hermitian: false })
    }

    /// Flag `matrix` Hermitian, rejecting it if `max|A - A^dag| > 1e-12`.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let mut op = Self::new(matrix)?;
        let r = linalg::hermiticity_residual(&op.matrix);
        if r > HERMITIAN_TOL {
            return Err(Error::NotHermitian(r));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub(crate) fn hermitian_unchecked(matrix: CMatrix) -> Self {
        debug_assert!(linalg::hermiticity_residual(&matrix) <= HERMITIAN_TOL * (1.0 + linalg::max_abs(&matrix)));
        Self { matrix, hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Real linear combination `a*self + b*other`; keeps the Hermitian flag when both carry it.
    pub fn combine(&self, a: f64, other: &Operator, b: f64) -> Operator {
        Operator {
            matrix: self.matrix.scale(a) + other.matrix.scale(b),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }
}

/// `H_j (x) H_A`; `ancilla_dim = 0` means no ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSpace {
    pub system_dim: usize,
    pub ancilla_dim: usize,
}

impl CompositeSpace {
    pub fn new(system_dim: usize, ancilla_dim: usize) -> Result<Self> {
        if system_dim == 0 {
            return Err(Error::InvalidConfig("system dimension must be positive".into()));
        }
        Ok(Self { system_dim, ancilla_dim })
    }

    pub fn spin(j: SpinQuantum) -> Self {
        Self { system_dim: j.dim(), ancilla_dim: 0 }
    }

    pub fn with_ancilla(j: SpinQuantum, ancilla_dim: usize) -> Self {
        Self { system_dim: j.dim(), ancilla_dim }
    }

    pub fn ancilla_factor(&self) -> usize {
        self.ancilla_dim.max(1)
    }

    pub fn total_dim(&self) -> usize {
        self.system_dim * self.ancilla_factor()
    }

    /// Spin carried by the system factor.
    pub fn spin_quantum(&self) -> Result<SpinQuantum> {
        SpinQuantum::from_dim(self.system_dim)
    }
}

/// The three spin components for one `j`, possibly embedded in a composite space.
#[derive(Clone, Debug)]
pub struct SpinOps {
    pub j: SpinQuantum,
    pub x: Operator,
    pub y: Operator,
    pub z: Operator,
}

impl SpinOps {
    pub fn component(&self, axis: Axis) -> &Operator {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// `n . J` for an arbitrary (not necessarily unit) real vector.
    pub fn along(&self, n: [f64; 3]) -> Operator {
        let m = self.x.matrix.scale(n[0]) + self.y.matrix.scale(n[1]) + self.z.matrix.scale(n[2]);
        Operator::hermitian_unchecked(m)
    }

    /// `phi_x J_x + phi_y J_y`
    pub fn generator(&self, phi: PhasePair) -> Operator {
        self.along([phi.x, phi.y, 0.0])
    }

    /// The same operators tensored with the ancilla identity of `space`.
    pub fn embedded(&self, space: CompositeSpace) -> Result<SpinOps> {
        Ok(SpinOps {
            j: self.j,
            x: embed(&self.x, space)?,
            y: embed(&self.y, space)?,
            z: embed(&self.z, space)?,
        })
    }

    /// Spin operators acting on the system factor of `space`.
    pub fn for_space(space: CompositeSpace) -> Result<SpinOps> {
        make_spin_ops(space.spin_quantum()?).embedded(space)
    }
}

pub fn make_spin_ops(j: SpinQuantum) -> SpinOps {
    let d = j.dim();
    let jj = j.casimir();
    let m_of = |k: usize| j.j() - k as f64;
    let mut raise = CMatrix::zeros(d, d);
    for k in 1..d {
        let m = m_of(k);
        raise[(k - 1, k)] = c((jj - m * (m + 1.0)).sqrt());
    }
    let lower = raise.adjoint();
    let x = (&raise + &lower).scale(0.5);
    let y = (&raise - &lower) * C64::new(0.0, -0.5);
    let z = CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|k| c(m_of(k)))));
    SpinOps {
        j,
        x: Operator::hermitian_unchecked(x),
        y: Operator::hermitian_unchecked(y),
        z: Operator::hermitian_unchecked(z),
    }
}

/// Eigenvectors `|j,m>_axis` for `m = j, ..., -j`.
pub fn eigenbasis(j: SpinQuantum, axis: Axis) -> Vec<CVector> {
    let ops = make_spin_ops(j);
    let d = j.dim();
    let rot = match axis {
        Axis::Z => linalg::identity(d),
        Axis::X => linalg::exp_i_hermitian(ops.y.matrix(), -std::f64::consts::FRAC_PI_2),
        Axis::Y => linalg::exp_i_hermitian(ops.x.matrix(), std::f64::consts::FRAC_PI_2),
    };
    (0..d)
        .map(|k| {
            let mut v = rot.column(k).into_owned();
            linalg::fix_phase(&mut v);
            v
        })
        .collect()
}

/// `op (x) I_ancilla`, or `op` unchanged without an ancilla.
pub fn embed(op: &Operator, space: CompositeSpace) -> Result<Operator> {
    if op.dim() != space.system_dim {
        return Err(Error::DimensionMismatch {
            expected: space.system_dim,
            found: op.dim(),
        });
    }
    if space.ancilla_dim == 0 {
        return Ok(op.clone());
    }
    Ok(Operator {
        matrix: linalg::kron(&op.matrix, &linalg::identity(space.ancilla_dim)),
        hermitian: op.hermitian,
    })
}

/// `exp(i (phi_x J_x + phi_y J_y)) (x) I_ancilla`.
///
/// `ops` may be either the bare system operators or already embedded in `space`.
pub fn rotation_unitary(phi: PhasePair, ops: &SpinOps, space: CompositeSpace) -> Result<Operator> {
    let generator = ops.generator(phi);
    let u = linalg::exp_i_hermitian(generator.matrix(), 1.0);
    let u = Operator { matrix: u, hermitian: false };
    if u.dim() == space.total_dim() && u.dim() != space.system_dim {
        return Ok(u);
    }
    embed(&u, space)
}

fn check_dims(state: &StateVector, op: &Operator) -> Result<()> {
    if state.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: op.dim(),
        });
    }
    Ok(())
}

/// `<psi|A|psi>`
pub fn expectation(state: &StateVector, op: &Operator) -> Result<C64> {
    check_dims(state, op)?;
    Ok(linalg::inner(state.amplitudes(), &op.apply(state.amplitudes())))
}

/// Real expectation of a Hermitian operator.
pub fn expectation_real(state: &StateVector, op: &Operator) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermiticity_residual(op.matrix())));
    }
    Ok(expectation(state, op)?.re)
}

/// `1/2 <{A,B}> - <A><B>`
pub fn sym_covariance(state: &StateVector, a: &Operator, b: &Operator) -> Result<f64> {
    check_dims(state, a)?;
    check_dims(state, b)?;
    let psi = state.amplitudes();
    let a_psi = a.apply(psi);
    let b_psi = b.apply(psi);
    // <{A,B}>/2 = Re <A psi | B psi> for Hermitian A, B
    let sym = linalg::inner(&a_psi, &b_psi).re;
    let ma = linalg::inner(psi, &a_psi).re;
    let mb = linalg::inner(psi, &b_psi).re;
    Ok(sym - ma * mb)
}

/// `<A^2> - <A>^2`
pub fn variance(state: &StateVector, a: &Operator) -> Result<f64> {
    sym_covariance(state, a, a)
}

/// Expectation of `[A, B]`, which is purely imaginary for Hermitian inputs.
pub fn commutator_expectation(state: &StateVector, a: &Operator, b: &Operator) -> Result<C64> {
    check_dims(state, a)?;
    let m = linalg::commutator(a.matrix(), b.matrix());
    Ok(linalg::inner(state.amplitudes(), &(m * state.amplitudes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn i_times(op: &CMatrix) -> CMatrix {
        op * I
    }

    fn spin(two_j: u32) -> SpinQuantum {
        SpinQuantum::from_twice(two_j).unwrap()
    }

    #[test]
    fn spin_half_standard_representation() {
        let ops = make_spin_ops(spin(1));
        let z = ops.z.matrix();
        assert_eq!(z[(0, 0)], c(0.5));
        assert_eq!(z[(1, 1)], c(-0.5));
        assert_eq!(ops.x.matrix()[(0, 1)], c(0.5));
        assert_eq!(ops.x.matrix()[(1, 0)], c(0.5));
        assert!(ops.x.is_hermitian() && ops.y.is_hermitian() && ops.z.is_hermitian());
    }

    #[test]
    fn commutation_and_casimir_up_to_twenty() {
        for two_j in 1..=40 {
            let j = spin(two_j);
            let ops = make_spin_ops(j);
            let (x, y, z) = (ops.x.matrix(), ops.y.matrix(), ops.z.matrix());
            for (a, b, g) in [(x, y, z), (y, z, x), (z, x, y)] {
                let r = max_abs_diff(&linalg::commutator(a, b), &i_times(g));
                assert!(r <= 1e-12, "j={j}: residual {r}");
            }
            let cas = x * x + y * y + z * z;
            let expect = linalg::identity(j.dim()).scale(j.casimir());
            assert!(max_abs_diff(&cas, &expect) <= 1e-12 * j.casimir().max(1.0));
        }
    }

    #[test]
    fn parse_spin_forms() {
        assert_eq!("3/2".parse::<SpinQuantum>().unwrap().two_j(), 3);
        assert_eq!("1.5".parse::<SpinQuantum>().unwrap().two_j(), 3);
        assert_eq!("2".parse::<SpinQuantum>().unwrap().two_j(), 4);
        assert_eq!("4/2".parse::<SpinQuantum>().unwrap().two_j(), 4);
        assert!("0".parse::<SpinQuantum>().is_err());
        assert!("1.25".parse::<SpinQuantum>().is_err());
        assert!("-1/2".parse::<SpinQuantum>().is_err());
        assert!("1/3".parse::<SpinQuantum>().is_err());
        assert_eq!(spin(3).to_string(), "3/2");
        assert_eq!(spin(4).to_string(), "2");
    }

    #[test]
    fn eigenbasis_z_is_canonical() {
        let basis = eigenbasis(spin(3), Axis::Z);
        for (k, v) in basis.iter().enumerate() {
            for (i, a) in v.iter().enumerate() {
                assert_eq!(*a, c(if i == k { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn rotated_eigenbases_satisfy_eigen_equation_and_are_orthonormal() {
        for two_j in 1..=12 {
            let j = spin(two_j);
            let ops = make_spin_ops(j);
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let basis = eigenbasis(j, axis);
                let op = ops.component(axis);
                let mut resolution = CMatrix::zeros(j.dim(), j.dim());
                for (k, v) in basis.iter().enumerate() {
                    let m = j.j() - k as f64;
                    let resid = (op.apply(v) - v * c(m)).norm();
                    assert!(resid <= 1e-10, "j={j} axis={axis} m={m}: {resid}");
                    let first = v.iter().find(|a| a.norm() > 1e-10).unwrap();
                    assert!(first.im.abs() < 1e-14 && first.re > 0.0);
                    for (l, w) in basis.iter().enumerate() {
                        let ip = linalg::inner(v, w);
                        let want = if k == l { 1.0 } else { 0.0 };
                        assert!((ip - c(want)).norm() <= 1e-10);
                    }
                    resolution += v * v.adjoint();
                }
                assert!(max_abs_diff(&resolution, &linalg::identity(j.dim())) <= 1e-10);
            }
        }
    }

    #[test]
    fn embed_kronecker_structure() {
        let j = spin(1);
        let space = CompositeSpace::with_ancilla(j, 2);
        let ops = make_spin_ops(j);
        let z = embed(&ops.z, space).unwrap();
        let diag: Vec<f64> = z.matrix().diagonal().iter().map(|a| a.re).collect();
        assert_eq!(diag, vec![0.5, 0.5, -0.5, -0.5]);

        let id = Operator::hermitian(linalg::identity(2)).unwrap();
        let eid = embed(&id, space).unwrap();
        assert!(max_abs_diff(eid.matrix(), &linalg::identity(4)) == 0.0);

        let j = spin(4);
        let space = CompositeSpace::with_ancilla(j, 3);
        let a = make_spin_ops(j).along([0.3, -0.2, 1.1]);
        let a2 = Operator::hermitian(a.matrix() * a.matrix()).unwrap();
        let t = linalg::trace(embed(&a2, space).unwrap().matrix());
        assert!((t - linalg::trace(a2.matrix()) * c(3.0)).norm() < 1e-12);

        assert!(matches!(
            embed(&ops.z, CompositeSpace::spin(spin(2))),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rotation_identity_unitarity_and_linearization() {
        let j = spin(5);
        let ops = make_spin_ops(j);
        let space = CompositeSpace::spin(j);
        let u0 = rotation_unitary(PhasePair::new(0.0, 0.0), &ops, space).unwrap();
        assert!(max_abs_diff(u0.matrix(), &linalg::identity(j.dim())) <= 1e-14);

        for &(px, py) in &[(0.3, -1.2), (2.0, 0.7), (-3.0, 3.0)] {
            let u = rotation_unitary(PhasePair::new(px, py), &ops, space).unwrap();
            let r = max_abs_diff(&(u.matrix().adjoint() * u.matrix()), &linalg::identity(j.dim()));
            assert!(r <= 1e-12);
            // U is normal, so |eigenvalues| are its singular values
            let sv = u.matrix().clone().singular_values();
            assert!(sv.iter().all(|s| (s - 1.0).abs() <= 1e-12));
        }

        let phi = PhasePair::new(6e-4, -8e-4);
        let u = rotation_unitary(phi, &ops, space).unwrap();
        let g = ops.generator(phi);
        let lin = linalg::identity(j.dim()) + i_times(g.matrix());
        let gnorm = g.matrix().clone().singular_values().max();
        let bound = gnorm * gnorm / 2.0 * 1.01 + 1e-14;
        assert!(max_abs_diff(u.matrix(), &lin) <= bound);
    }

    #[test]
    fn rotation_with_ancilla_is_embedded() {
        let j = spin(1);
        let space = CompositeSpace::with_ancilla(j, 2);
        let ops = make_spin_ops(j);
        let u = rotation_unitary(PhasePair::new(0.4, 0.1), &ops, space).unwrap();
        assert_eq!(u.dim(), 4);
        let emb = ops.embedded(space).unwrap();
        let u2 = rotation_unitary(PhasePair::new(0.4, 0.1), &emb, space).unwrap();
        assert!(max_abs_diff(u.matrix(), u2.matrix()) <= 1e-14);
    }

    #[test]
    fn operator_hermitian_flag_rejects_asymmetry() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(Operator::hermitian(m.clone()), Err(Error::NotHermitian(_))));
        assert!(!Operator::new(m).unwrap().is_hermitian());
    }
}
