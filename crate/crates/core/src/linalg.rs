//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in descending order; column `k` of the returned
/// matrix is the eigenvector of eigenvalue `k`. The input is symmetrized
/// before decomposition so that sub-tolerance asymmetry does not leak in.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `exp(i t A)` for Hermitian `A`, via its spectral decomposition.
pub fn exp_i_hermitian(a: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let phases = CVector::from_iterator(values.len(), values.iter().map(|&l| C64::from_polar(1.0, t * l)));
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, k| vectors[(r, k)] * phases[k]);
    scaled * vectors.adjoint()
}

/// Rescale `v` by a unit phase so that its first non-negligible amplitude is
/// real and positive.
pub fn fix_phase(v: &mut CVector) {
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-10 * scale).copied() {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// `<u|v>`, antilinear in the first argument.
#[inline]
pub fn inner(u: &CVector, v: &CVector) -> C64 {
    u.dotc(v)
}

/// Trace of a square matrix.
pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending_and_reconstructs() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                C64::new(0.5, 0.25),
                c(0.0),
                C64::new(0.5, -0.25),
                c(-1.0),
                C64::new(0.0, 1.0),
                c(0.0),
                C64::new(0.0, -1.0),
                c(0.5),
            ],
        );
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(3, vals.iter().map(|&v| c(v))));
        let back = &vecs * diag * vecs.adjoint();
        assert!(max_abs_diff(&back, &a) < 1e-13);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(-1.0)]);
        let u = exp_i_hermitian(&a, 0.0);
        assert!(max_abs_diff(&u, &identity(2)) < 1e-14);
    }

    #[test]
    fn fix_phase_makes_first_entry_positive() {
        let mut v = CVector::from_vec(vec![c(0.0), C64::new(0.0, -0.6), c(0.8)]);
        fix_phase(&mut v);
        assert!(v[0].norm() == 0.0);
        assert!((v[1] - c(0.6)).norm() < 1e-15);
        assert!((v[2] - C64::new(0.0, 0.8)).norm() < 1e-15);
    }
}
