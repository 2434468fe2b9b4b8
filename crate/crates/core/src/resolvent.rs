//! Two-by-two block operator algebra: Schur-complement inversion and the
//! square-root factorization of the Schur complement.

use crate::error::{Error, Result};
use crate::linalg::{condition_number, hermitian_eigh, hermitian_residual, identity, max_abs, spectral_norm, CMat};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Largest condition number accepted for blocks that must be inverted.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix2x2 {
    pub alpha: CMat,
    pub beta: CMat,
    pub gamma: CMat,
    pub delta: CMat,
}

impl BlockMatrix2x2 {
    pub fn new(alpha: CMat, beta: CMat, gamma: CMat, delta: CMat) -> Result<Self> {
        let (p, q) = (alpha.nrows(), delta.nrows());
        let ok = alpha.is_square()
            && delta.is_square()
            && beta.shape() == (p, q)
            && gamma.shape() == (q, p);
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "blocks α {:?}, β {:?}, γ {:?}, δ {:?}",
                alpha.shape(),
                beta.shape(),
                gamma.shape(),
                delta.shape()
            )));
        }
        Ok(Self { alpha, beta, gamma, delta })
    }

    /// `(A + ki, B; C, D + ki)`.
    pub fn shifted(a: &CMat, b: &CMat, c: &CMat, d: &CMat, k: f64) -> Result<Self> {
        let shift = |m: &CMat| m + identity(m.nrows()) * Complex64::new(0.0, k);
        Self::new(shift(a), b.clone(), c.clone(), shift(d))
    }

    pub fn to_dense(&self) -> CMat {
        let (p, q) = (self.alpha.nrows(), self.delta.nrows());
        let mut m = CMat::zeros(p + q, p + q);
        m.view_mut((0, 0), (p, p)).copy_from(&self.alpha);
        m.view_mut((0, p), (p, q)).copy_from(&self.beta);
        m.view_mut((p, 0), (q, p)).copy_from(&self.gamma);
        m.view_mut((p, p), (q, q)).copy_from(&self.delta);
        m
    }

    /// `δ - γ α^{-1} β`.
    pub fn schur_complement(&self) -> Result<CMat> {
        let alpha_inv = checked_inverse(&self.alpha, "α")?;
        Ok(&self.delta - &self.gamma * alpha_inv * &self.beta)
    }
}

fn checked_inverse(m: &CMat, what: &str) -> Result<CMat> {
    let cond = condition_number(m);
    if !(cond <= CONDITION_CAP) {
        return Err(Error::Singular(format!("{what} has condition number {cond:.3e}")));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what} is not invertible")))
}

/// Block inverse through `α^{-1}` and `S = δ - γα^{-1}β`.
pub fn schur_inverse(m: &BlockMatrix2x2) -> Result<BlockMatrix2x2> {
    let ai = checked_inverse(&m.alpha, "α")?;
    let s = &m.delta - &m.gamma * &ai * &m.beta;
    let si = checked_inverse(&s, "Schur complement")?;
    let ai_b = &ai * &m.beta;
    let c_ai = &m.gamma * &ai;
    Ok(BlockMatrix2x2 {
        alpha: &ai + &ai_b * &si * &c_ai,
        beta: -(&ai_b * &si),
        gamma: -(&si * &c_ai),
        delta: si,
    })
}

/// Relative residual `max(‖MX - I‖, ‖XM - I‖) / max(1, ‖M‖‖X‖)` in max-abs norm.
pub fn inverse_residual(m: &BlockMatrix2x2, inv: &BlockMatrix2x2) -> f64 {
    let (a, x) = (m.to_dense(), inv.to_dense());
    let id = identity(a.nrows());
    let r = max_abs(&(&a * &x - &id)).max(max_abs(&(&x * &a - &id)));
    r / (max_abs(&a) * max_abs(&x)).max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NeumannReport {
    /// `‖δ^{1/2}(I - X)δ^{1/2} - S‖ / ‖S‖` with `X = δ^{-1/2}γα^{-1}βδ^{-1/2}`.
    pub factorization_residual: f64,
    /// `‖X‖`.
    pub contraction_norm: f64,
    pub invertible: bool,
    /// Deviation of `δ^{-1/2}(Σ X^j)δ^{-1/2}` from the dense inverse of `S`,
    /// relative to the latter; present when the series converges and `S` is
    /// invertible within the condition cap.
    pub neumann_inverse_deviation: Option<f64>,
    pub direct_invertible: bool,
}

/// `f(δ)` for a normal `δ = U diag(λ) U^*`.
fn normal_function(u: &CMat, eigs: &[Complex64], f: impl Fn(Complex64) -> Complex64) -> CMat {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(eigs.len(), eigs.iter().map(|&z| f(z))));
    u * d * u.adjoint()
}

fn report(m: &BlockMatrix2x2, sqrt: CMat, inv_sqrt: CMat) -> Result<NeumannReport> {
    let s = m.schur_complement()?;
    let ai = checked_inverse(&m.alpha, "α")?;
    let x = &inv_sqrt * &m.gamma * ai * &m.beta * &inv_sqrt;
    let q = s.nrows();
    let rebuilt = &sqrt * (identity(q) - &x) * &sqrt;
    let factorization_residual = max_abs(&(rebuilt - &s)) / max_abs(&s).max(f64::MIN_POSITIVE);
    let contraction_norm = spectral_norm(&x);
    let invertible = contraction_norm < 1.0;
    let direct = checked_inverse(&s, "Schur complement").ok();
    let neumann_inverse_deviation = match (&direct, invertible) {
        (Some(direct), true) => {
            let mut sum = identity(q);
            let mut term = identity(q);
            for _ in 0..100_000 {
                term = &term * &x;
                sum += &term;
                if max_abs(&term) < 1e-17 * max_abs(&sum) {
                    break;
                }
            }
            let series = &inv_sqrt * sum * &inv_sqrt;
            Some(max_abs(&(series - direct)) / max_abs(direct))
        }
        _ => None,
    };
    Ok(NeumannReport {
        factorization_residual,
        contraction_norm,
        invertible,
        neumann_inverse_deviation,
        direct_invertible: direct.is_some(),
    })
}

/// Factorization check for a Hermitian positive definite `δ`.
pub fn neumann_factorization_check(m: &BlockMatrix2x2) -> Result<NeumannReport> {
    let scale = max_abs(&m.delta).max(1.0);
    if hermitian_residual(&m.delta) > 1e-12 * scale {
        return Err(Error::NotPositiveDefiniteMatrix("δ is not Hermitian".into()));
    }
    let (vals, u) = hermitian_eigh(&m.delta);
    if vals.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::NotPositiveDefiniteMatrix(format!(
            "δ has eigenvalue {:.3e}",
            vals[0]
        )));
    }
    let eigs: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    report(
        m,
        normal_function(&u, &eigs, |z| z.sqrt()),
        normal_function(&u, &eigs, |z| z.sqrt().inv()),
    )
}

/// Factorization check for `δ = D + ki` with `D` Hermitian and `k ≠ 0`, using the
/// principal square root of the normal matrix `δ`.
pub fn neumann_factorization_check_shifted(
    a: &CMat,
    b: &CMat,
    c: &CMat,
    d: &CMat,
    k: f64,
) -> Result<NeumannReport> {
    if k == 0.0 {
        return Err(Error::InvalidArgument("shift k must be nonzero".into()));
    }
    if hermitian_residual(d) > 1e-12 * max_abs(d).max(1.0) {
        return Err(Error::NotHermitian(hermitian_residual(d)));
    }
    let m = BlockMatrix2x2::shifted(a, b, c, d, k)?;
    let (vals, u) = hermitian_eigh(d);
    let eigs: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, k)).collect();
    report(
        &m,
        normal_function(&u, &eigs, |z| z.sqrt()),
        normal_function(&u, &eigs, |z| z.sqrt().inv()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let m = random(rng, n, n);
        (&m + m.adjoint()).scale(0.5)
    }

    #[test]
    fn block_diagonal_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 3, 3) + identity(3).scale(4.0);
        let d = random(&mut rng, 2, 2) + identity(2).scale(4.0);
        let m = BlockMatrix2x2::new(a.clone(), CMat::zeros(3, 2), CMat::zeros(2, 3), d.clone()).unwrap();
        let inv = schur_inverse(&m).unwrap();
        assert!(max_abs_diff(&inv.alpha, &a.try_inverse().unwrap()) < 1e-14);
        assert!(max_abs_diff(&inv.delta, &d.try_inverse().unwrap()) < 1e-14);
        assert!(max_abs(&inv.beta) == 0.0 && max_abs(&inv.gamma) == 0.0);
    }

    #[test]
    fn scalar_blocks() {
        let z = |x: f64| CMat::from_element(1, 1, Complex64::new(x, 0.0));
        let (a, b, c, d) = (2.0, 3.0, 1.0, 4.0);
        let inv = schur_inverse(&BlockMatrix2x2::new(z(a), z(b), z(c), z(d)).unwrap()).unwrap();
        let det = a * d - b * c;
        assert!((inv.alpha[(0, 0)].re - d / det).abs() < 1e-15);
        assert!((inv.beta[(0, 0)].re + b / det).abs() < 1e-15);
        assert!((inv.gamma[(0, 0)].re + c / det).abs() < 1e-15);
        assert!((inv.delta[(0, 0)].re - a / det).abs() < 1e-15);
    }

    #[test]
    fn singular_alpha_is_rejected() {
        let m = BlockMatrix2x2::new(CMat::zeros(2, 2), identity(2), identity(2), identity(2)).unwrap();
        assert!(matches!(schur_inverse(&m), Err(Error::Singular(_))));
        assert!(BlockMatrix2x2::new(identity(2), identity(3), identity(2), identity(2)).is_err());
    }

    #[test]
    fn zero_coupling_neumann() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = hermitian(&mut rng, 3) + identity(3).scale(5.0);
        let m = BlockMatrix2x2::new(identity(2), CMat::zeros(2, 3), CMat::zeros(3, 2), d).unwrap();
        let r = neumann_factorization_check(&m).unwrap();
        assert_eq!(r.contraction_norm, 0.0);
        assert!(r.factorization_residual < 1e-14);
        assert!(r.invertible);
    }

    #[test]
    fn large_shift_makes_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, d) = (hermitian(&mut rng, 4), hermitian(&mut rng, 3));
        let (b, c) = (random(&mut rng, 4, 3), random(&mut rng, 3, 4));
        let norms: Vec<f64> = [0.5, 2.0, 8.0, 32.0]
            .iter()
            .map(|&k| neumann_factorization_check_shifted(&a, &b, &c, &d, k).unwrap().contraction_norm)
            .collect();
        assert!(norms.last().unwrap() < &1.0);
        let r = neumann_factorization_check_shifted(&a, &b, &c, &d, 32.0).unwrap();
        assert!(r.factorization_residual < 1e-10);
        assert!(r.neumann_inverse_deviation.unwrap() < 1e-9);
    }

    #[test]
    fn indefinite_delta_is_rejected() {
        let m = BlockMatrix2x2::new(identity(1), identity(1), identity(1), identity(1).scale(-1.0)).unwrap();
        assert!(matches!(neumann_factorization_check(&m), Err(Error::NotPositiveDefiniteMatrix(_))));
    }
}
