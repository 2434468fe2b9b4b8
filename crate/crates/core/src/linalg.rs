//! Small dense helpers shared by the operator and resolvent code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn unitary_residual(m: &CMat) -> f64 {
    max_abs_diff(&(m.adjoint() * m), &identity(m.nrows()))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn hermitian_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    // Symmetrize to discard round-off in the strictly lower triangle.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigh(m).0
}

/// Orthonormal basis (as columns) of the range of a Hermitian projector.
pub fn projector_range(p: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigh(p);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.5).collect();
    let mut out = CMat::zeros(p.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        out.set_column(dst, &vecs.column(src));
    }
    out
}

/// `exp(t X)` for anti-Hermitian `X`, computed through the Hermitian matrix `iX`.
pub fn exp_anti_hermitian(x: &CMat, t: f64) -> CMat {
    let h = x * I;
    let (vals, vecs) = hermitian_eigh(&h);
    // X = -i Q diag(vals) Q^*, so exp(tX) = Q diag(exp(-i t vals)) Q^*.
    let phases = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::from_polar(1.0, -t * v)),
    );
    &vecs * DMatrix::from_diagonal(&phases) * vecs.adjoint()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// Ratio of extreme singular values; infinite for exactly singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn real_to_complex(m: &RMat) -> CMat {
    m.map(c)
}

/// Symmetric square root and inverse square root of a symmetric positive definite matrix.
pub fn spd_sqrt_pair(m: &RMat) -> Option<(RMat, RMat)> {
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()).scale(0.5));
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let q = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Some((q * s * q.transpose(), q * si * q.transpose()))
}
