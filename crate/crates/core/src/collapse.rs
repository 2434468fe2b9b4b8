//! Collapse experiments: `ε`-families of mapping tori, `λ_k` tracking, blow-up,
//! spectral stability along metric paths and a minimax cross-check.

use crate::assembly::{assemble_dirac, limit_operator};
use crate::clifford::{fixed_subspace, CliffordModule};
use crate::error::{Error, Result};
use crate::geometry::{
    geometric_data, metric_path, AffineMappingTorus, BundleModel, FlatTorusModel, MetricFamily,
    Segment, WindowConstants,
};
use crate::linalg::{hermitian_eigenvalues, CMat};
use crate::operator::AssembledOperator;
use crate::spectrum::{eigensolve, epsilon_close, window_intersect, Spectrum};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    BlowsUp,
}

/// Comparison of `σ(D^{M_ε})` with `σ(D^B)` inside `[-W(ε), W(ε)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowComparison {
    pub epsilon: f64,
    pub window: f64,
    /// Half-width of the band around `±W` left out on both sides.
    pub guard: f64,
    pub matched: usize,
    pub agree: bool,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollapseDiagnostics {
    pub window: Vec<WindowComparison>,
    /// `|λ_k(|D^{M_ε}|) - λ_k(|D^B|)|` per `ε`, per `k`.
    pub errors: Vec<Vec<f64>>,
    pub errors_monotone: bool,
}

impl CollapseDiagnostics {
    pub fn window_holds(&self) -> bool {
        self.window.iter().all(|w| w.agree)
    }

    pub fn matched_nondecreasing(&self) -> bool {
        self.window.windows(2).all(|p| p[1].matched >= p[0].matched)
    }

    pub fn matched_increasing(&self) -> bool {
        self.window.windows(2).all(|p| p[1].matched > p[0].matched)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CollapseReport {
    pub epsilons: Vec<f64>,
    pub spectra_per_eps: Vec<Spectrum>,
    pub limit_spectrum: Option<Spectrum>,
    /// `tracked_eigenvalues[k][i] = λ_{k+1}(|D^{M_ε_i}|)`.
    pub tracked_eigenvalues: Vec<Vec<f64>>,
    pub window_bounds: Vec<f64>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub diagnostics: CollapseDiagnostics,
}

impl CollapseReport {
    /// Rows `ε, λ_1, ..., λ_kMax, W(ε)`.
    pub fn plot_rows(&self) -> Vec<Vec<f64>> {
        self.epsilons
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let mut row = vec![e];
                row.extend(self.tracked_eigenvalues.iter().map(|track| track[i]));
                row.push(self.window_bounds[i]);
                row
            })
            .collect()
    }
}

fn check_epsilons(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("ε list is empty".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument(
            "ε list must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn reliable_abs(spec: &Spectrum, bound: f64, k_max: usize, what: &str) -> Result<Vec<f64>> {
    let abs = spec.abs_sorted();
    let reliable = abs.iter().filter(|&&v| v <= bound).count();
    if reliable < k_max {
        return Err(Error::TruncationTooSmall(format!(
            "{what}: {reliable} eigenvalues below the truncation bound {bound:.4}, {k_max} requested"
        )));
    }
    Ok(abs[..k_max].to_vec())
}

fn invariant_dim(model: &AffineMappingTorus, cm: &CliffordModule) -> Result<usize> {
    if !model.fiber.has_zero_mode() {
        return Ok(0);
    }
    Ok(fixed_subspace(&model.fiber.holonomy_rep(cm.dim_v))?.ncols())
}

/// Runs the family `ε ↦ model.with_scale(ε)` and compares it with `D^B`.
pub fn collapse_run(
    model: &AffineMappingTorus,
    cm: &CliffordModule,
    eps_list: &[f64],
    k_max: usize,
    n: usize,
    constants: &WindowConstants,
) -> Result<CollapseReport> {
    check_epsilons(eps_list)?;
    model.validate()?;
    let operators: Vec<AssembledOperator> = eps_list
        .par_iter()
        .map(|&e| assemble_dirac(&BundleModel::MappingTorus(model.with_scale(e)), cm, n))
        .collect::<Result<_>>()?;
    let spectra: Vec<Spectrum> = operators.par_iter().map(eigensolve).collect::<Result<_>>()?;
    let window_bounds: Vec<f64> = eps_list
        .iter()
        .map(|&e| constants.window(&geometric_data(&BundleModel::MappingTorus(model.with_scale(e)))))
        .collect();

    let mut per_eps = Vec::with_capacity(eps_list.len());
    for (i, (spec, op)) in spectra.iter().zip(&operators).enumerate() {
        per_eps.push(reliable_abs(spec, op.reliable_bound, k_max, &format!("ε = {}", eps_list[i]))?);
    }
    let tracked: Vec<Vec<f64>> = (0..k_max)
        .map(|k| per_eps.iter().map(|row| row[k]).collect())
        .collect();

    let verdict = if invariant_dim(model, cm)? > 0 {
        Verdict::Converges
    } else {
        Verdict::BlowsUp
    };
    let mut diagnostics = CollapseDiagnostics::default();
    let mut limit_spectrum = None;
    if verdict == Verdict::Converges {
        let limit = limit_operator(model, cm, n)?;
        let limit_spec = eigensolve(&limit)?;
        let limit_abs = reliable_abs(&limit_spec, limit.reliable_bound, k_max, "limit operator")?;
        for (i, &e) in eps_list.iter().enumerate() {
            let w = window_bounds[i];
            let cap = w.min(operators[i].reliable_bound).min(limit.reliable_bound);
            if cap < w {
                log::warn!("window {w:.4} at ε = {e} clipped to the truncation bound {cap:.4}");
            }
            let guard = 1e-9 * w.max(1.0);
            let inner = (cap - guard).max(0.0);
            let a = window_intersect(&spectra[i], inner);
            let b = window_intersect(&limit_spec, inner);
            let max_deviation = if a.len() == b.len() {
                a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            diagnostics.window.push(WindowComparison {
                epsilon: e,
                window: w,
                guard,
                matched: a.len(),
                agree: epsilon_close(&a.values, &b.values, 1e-9).is_some(),
                max_deviation,
            });
        }
        diagnostics.errors = per_eps
            .iter()
            .map(|row| row.iter().zip(&limit_abs).map(|(x, y)| (x - y).abs()).collect())
            .collect();
        diagnostics.errors_monotone = (0..k_max).all(|k| {
            diagnostics
                .errors
                .windows(2)
                .all(|p| p[1][k] <= p[0][k] + 1e-12)
        });
        limit_spectrum = Some(limit_spec);
    }
    Ok(CollapseReport {
        epsilons: eps_list.to_vec(),
        spectra_per_eps: spectra,
        limit_spectrum,
        tracked_eigenvalues: tracked,
        window_bounds,
        verdict,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlowupReport {
    pub epsilons: Vec<f64>,
    pub min_abs: Vec<f64>,
    /// Largest `a` with `min|λ|(ε) ≥ a/ε` on the whole list.
    pub rate: f64,
    pub pass: bool,
}

pub fn blowup_check(
    model: &AffineMappingTorus,
    cm: &CliffordModule,
    eps_list: &[f64],
    n: usize,
) -> Result<BlowupReport> {
    check_epsilons(eps_list)?;
    model.validate()?;
    let dim = invariant_dim(model, cm)?;
    if dim > 0 {
        return Err(Error::NonemptyInvariantSpace(dim));
    }
    let min_abs: Vec<f64> = eps_list
        .par_iter()
        .map(|&e| {
            let op = assemble_dirac(&BundleModel::MappingTorus(model.with_scale(e)), cm, n)?;
            let spec = eigensolve(&op)?;
            spec.min_abs()
                .ok_or_else(|| Error::TruncationTooSmall("empty truncated spectrum".into()))
        })
        .collect::<Result<_>>()?;
    let rate = eps_list
        .iter()
        .zip(&min_abs)
        .map(|(e, m)| e * m)
        .fold(f64::INFINITY, f64::min);
    Ok(BlowupReport {
        epsilons: eps_list.to_vec(),
        min_abs,
        rate,
        pass: rate > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmentRatio {
    pub t0: f64,
    pub t1: f64,
    pub length: f64,
    pub max_shift: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbationReport {
    pub max_observed_ratio: f64,
    pub c_used: f64,
    pub pass: bool,
    pub segments: Vec<SegmentRatio>,
}

/// Checks `|Δ asinh(λ/√K)| ≤ C·l(c)` on consecutive samples of a torus path
/// `t ∈ [0, 1]`, pairing the truncated spectra in sorted order.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_bound_check(
    family: &dyn MetricFamily,
    shift: &[f64],
    cm: &CliffordModule,
    k: f64,
    n: usize,
    samples: usize,
    c: f64,
) -> Result<PerturbationReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
    }
    let ts: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let rescaled: Vec<Vec<f64>> = ts
        .par_iter()
        .map(|&t| {
            let torus = FlatTorusModel::from_gram(&family.gram(t), shift.to_vec())?;
            let op = assemble_dirac(&BundleModel::FlatTorus(torus), cm, n)?;
            let spec = eigensolve(&op)?;
            Ok(spec.values.iter().map(|v| (v / k.sqrt()).asinh()).collect())
        })
        .collect::<Result<_>>()?;
    let mut segments = Vec::with_capacity(samples - 1);
    for i in 0..samples - 1 {
        let (t0, t1) = (ts[i], ts[i + 1]);
        let length = metric_path(&Segment { family, t0, t1 }, 9)?;
        let max_shift = rescaled[i]
            .iter()
            .zip(&rescaled[i + 1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ratio = if max_shift == 0.0 { 0.0 } else { max_shift / length };
        segments.push(SegmentRatio { t0, t1, length, max_shift, ratio });
    }
    let max_observed_ratio = segments.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(PerturbationReport {
        max_observed_ratio,
        c_used: c,
        pass: max_observed_ratio <= c,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinimaxReport {
    pub k: usize,
    pub lambda_k: f64,
    /// Smallest Rayleigh-quotient maximum over the sampled subspaces.
    pub min_sampled_sup: f64,
    pub trials: usize,
    pub pass: bool,
}

/// For random `k`-dimensional subspaces `Q`, checks `max σ(Q^* H² Q) ≥ λ_k(H²)`.
pub fn minimax_check<R: Rng>(op: &AssembledOperator, k: usize, trials: usize, rng: &mut R) -> Result<MinimaxReport> {
    let h = op.to_dense();
    let h2 = &h * &h;
    let dim = h2.nrows();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={dim}")));
    }
    let lambda_k = hermitian_eigenvalues(&h2)[k - 1];
    let tol = 1e-10 * lambda_k.abs().max(1.0);
    let mut min_sampled_sup = f64::INFINITY;
    for _ in 0..trials {
        let raw = CMat::from_fn(dim, k, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let q = raw.qr().q();
        let sup = *hermitian_eigenvalues(&(q.adjoint() * &h2 * &q))
            .last()
            .expect("k ≥ 1");
        min_sampled_sup = min_sampled_sup.min(sup);
    }
    Ok(MinimaxReport {
        k,
        lambda_k,
        min_sampled_sup,
        trials,
        pass: min_sampled_sup >= lambda_k - tol,
    })
}
