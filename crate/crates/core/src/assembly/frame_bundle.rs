//! Horizontal-vertical Laplacian on the frame bundle `P = T² × Spin(2)`.

use super::torus::{self, torus_modes};
use crate::clifford::CliffordModule;
use crate::error::{Error, Result};
use crate::geometry::FlatTorusModel;
use crate::linalg::{hermitian_eigh, identity, CMat, I};
use crate::spectrum::{eigensolve, Spectrum};
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct FrameBundleSpectra {
    /// Spectrum of `(D^M)²`.
    pub dirac_squared: Spectrum,
    /// Spectrum of `Δ^P - c_V` on `Spin(2)`-invariant `V`-valued functions.
    pub frame_laplacian: Spectrum,
    pub casimir: f64,
}

/// Builds both sides of the frame-bundle identity for a flat 2-torus.
///
/// The group circle is parametrized by `s ∈ [0, 4π)` with `exp(s σ^{12})`, so the
/// vertical field has unit length and weight `w` means `e^{iws/2}`. Odd weights
/// see the spin structure of the torus, even weights the trivial one.
pub fn frame_bundle_operator(
    model: &FlatTorusModel,
    cm: &CliffordModule,
    n: usize,
    g_n: usize,
) -> Result<FrameBundleSpectra> {
    model.validate()?;
    if model.dim() != 2 || cm.n != 2 {
        return Err(Error::DimensionMismatch(format!(
            "frame bundle identity needs n = 2, got torus {} and module {}",
            model.dim(),
            cm.n
        )));
    }
    if n == 0 {
        return Err(Error::TruncationTooSmall("truncation must be at least 1".into()));
    }
    let casimir = cm.casimir()?;
    let dirac = torus::assemble(model, &cm.gammas, n, "flat_torus")?;
    let dirac_squared = eigensolve(&dirac.square())?;

    let integer = FlatTorusModel::new(model.basis.clone(), vec![0.0; 2])?;
    let mut values = Vec::new();
    for w in -(g_n as i64)..=(g_n as i64) {
        let half_w = w as f64 / 2.0;
        let base = if w.rem_euclid(2) == 1 { model } else { &integer };
        // Y f = i(w/2) f together with Y f = -σ^{12} f
        let constraint = identity(cm.dim_v).scale(-half_w) + &cm.sigmas[0][1] * I;
        let kernel = null_space(&constraint);
        if kernel.ncols() == 0 {
            continue;
        }
        for m in torus_modes(&base.spin_shift, n) {
            let xi2: f64 = base.frequency(&m).iter().map(|x| x * x).sum();
            let block: CMat = identity(cm.dim_v).scale(4.0 * PI * PI * xi2 + half_w * half_w);
            let restricted = kernel.adjoint() * block * &kernel;
            let (vals, _) = hermitian_eigh(&restricted);
            values.extend(vals.into_iter().map(|v| v - casimir));
        }
    }
    Ok(FrameBundleSpectra {
        dirac_squared,
        frame_laplacian: Spectrum::with_default_tol(values, n),
        casimir,
    })
}

fn null_space(m: &CMat) -> CMat {
    let gram = m.adjoint() * m;
    let (vals, vecs) = hermitian_eigh(&gram);
    let keep: Vec<usize> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() < 1e-10)
        .map(|(i, _)| i)
        .collect();
    CMat::from_fn(m.ncols(), keep.len(), |r, c| vecs[(r, keep[c])])
}
