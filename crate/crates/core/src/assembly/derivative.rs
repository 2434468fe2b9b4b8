//! First variation of Dirac eigenvalues along a family of flat metrics.

use super::torus::{gamma_combination, torus_modes};
use crate::clifford::CliffordModule;
use crate::error::{Error, Result};
use crate::geometry::MetricFamily;
use crate::linalg::{hermitian_eigh, spd_sqrt_pair, CMat, RMat};
use std::f64::consts::PI;

/// Eigenvalue branch `sign · 2π|ξ|` of the Fourier block of `mode`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub mode: Vec<i64>,
    pub sign: i8,
}

fn frame(family: &dyn MetricFamily, t: f64) -> Result<RMat> {
    let (_, inv_sqrt) = spd_sqrt_pair(&family.gram(t)).ok_or(Error::NotPositiveDefinite(t))?;
    Ok(inv_sqrt)
}

fn shifted(mode: &[i64], shift: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(mode.len(), mode.iter().zip(shift).map(|(&m, &d)| m as f64 + d))
}

fn check(family: &dyn MetricFamily, cm: &CliffordModule, shift: &[f64]) -> Result<()> {
    if family.dim() != cm.n || shift.len() != cm.n {
        return Err(Error::DimensionMismatch(format!(
            "family dimension {}, module dimension {}, shift length {}",
            family.dim(),
            cm.n,
            shift.len()
        )));
    }
    Ok(())
}

pub fn branch_eigenvalue(family: &dyn MetricFamily, shift: &[f64], branch: &Branch, t: f64) -> Result<f64> {
    let xi = frame(family, t)? * shifted(&branch.mode, shift);
    Ok(f64::from(branch.sign.signum()) * 2.0 * PI * xi.norm())
}

/// `-⅛ Σ ċ_{ij} T_{ij}` with `T_{ij} = 2 Re⟨v, (γ^i ∇_j + γ^j ∇_i) v⟩` on the
/// normalized eigenfunction of the branch; `ċ` is written in the orthonormal
/// frame `c(t)^{-1/2}`.
pub fn eigenvalue_derivative(
    family: &dyn MetricFamily,
    cm: &CliffordModule,
    shift: &[f64],
    branch: &Branch,
    t: f64,
) -> Result<f64> {
    check(family, cm, shift)?;
    let e = frame(family, t)?;
    let xi = &e * shifted(&branch.mode, shift);
    if xi.norm() < 1e-14 {
        return Err(Error::DegenerateEigenvalue(format!(
            "mode {:?} carries the eigenvalue 0 on both branches",
            branch.mode
        )));
    }
    let xi_vec: Vec<f64> = xi.iter().map(|x| 2.0 * PI * x).collect();
    let (vals, vecs) = hermitian_eigh(&gamma_combination(&cm.gammas, &xi_vec));
    let idx = if branch.sign >= 0 { vals.len() - 1 } else { 0 };
    let v = vecs.column(idx).into_owned();
    Ok(derivative_from_vector(cm, &e, &family.gram_dot(t), &xi_vec, &v))
}

fn derivative_from_vector(cm: &CliffordModule, e: &RMat, gram_dot: &RMat, xi: &[f64], v: &nalgebra::DVector<num_complex::Complex64>) -> f64 {
    let n = cm.n;
    let expect: Vec<f64> = cm
        .gammas
        .iter()
        .map(|g| v.dotc(&(g * v)).re)
        .collect();
    let c_dot = e.transpose() * gram_dot * e;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t_ij = 2.0 * (xi[j] * expect[i] + xi[i] * expect[j]);
            acc += c_dot[(i, j)] * t_ij;
        }
    }
    -acc / 8.0
}

/// Derivative of the `j`-th eigenvalue (ascending, from 0) of the torus operator
/// truncated at `n`. Clusters are accepted when every block in them moves at the
/// same rate; otherwise the eigenvalue has no well-defined derivative.
pub fn eigenvalue_derivative_indexed(
    family: &dyn MetricFamily,
    cm: &CliffordModule,
    shift: &[f64],
    n: usize,
    t: f64,
    j: usize,
) -> Result<f64> {
    check(family, cm, shift)?;
    let e = frame(family, t)?;
    let gram_dot = family.gram_dot(t);
    let mut entries: Vec<(f64, f64)> = Vec::new();
    for m in torus_modes(shift, n) {
        let xi = &e * shifted(&m, shift);
        let xi_vec: Vec<f64> = xi.iter().map(|x| 2.0 * PI * x).collect();
        let block: CMat = gamma_combination(&cm.gammas, &xi_vec);
        let (vals, vecs) = hermitian_eigh(&block);
        for (k, &lam) in vals.iter().enumerate() {
            let d = if xi.norm() < 1e-14 {
                f64::NAN
            } else {
                derivative_from_vector(cm, &e, &gram_dot, &xi_vec, &vecs.column(k).into_owned())
            };
            entries.push((lam, d));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let &(target, _) = entries.get(j).ok_or_else(|| {
        Error::InvalidArgument(format!("index {j} beyond {} eigenvalues", entries.len()))
    })?;
    let tol = 1e-8 * target.abs().max(1.0);
    let cluster: Vec<f64> = entries
        .iter()
        .filter(|(lam, _)| (lam - target).abs() <= tol)
        .map(|&(_, d)| d)
        .collect();
    let first = cluster[0];
    let spread = cluster
        .iter()
        .map(|d| (d - first).abs())
        .fold(0.0_f64, f64::max);
    if first.is_nan() || spread.is_nan() || spread > 1e-9 * first.abs().max(1.0) {
        return Err(Error::DegenerateEigenvalue(format!(
            "eigenvalue {target} has a cluster of {} moving at different rates",
            cluster.len()
        )));
    }
    Ok(first)
}
