use crate::clifford::CliffordModule;
use crate::error::{Error, Result};
use crate::geometry::FlatTorusModel;
use crate::linalg::{identity, CMat};
use crate::operator::{AssembledOperator, BasisLabel};
use std::f64::consts::PI;

/// Modes `m ∈ Z^n` with `|m_i + δ_i| ≤ N`, in lexicographic order.
pub fn torus_modes(shift: &[f64], n: usize) -> Vec<Vec<i64>> {
    let ranges: Vec<(i64, i64)> = shift
        .iter()
        .map(|&d| ((-(n as f64) - d).ceil() as i64, (n as f64 - d).floor() as i64))
        .collect();
    let mut out = vec![Vec::new()];
    for &(lo, hi) in &ranges {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for prefix in &out {
            for m in lo..=hi {
                let mut v = prefix.clone();
                v.push(m);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn gamma_combination(gammas: &[CMat], v: &[f64]) -> CMat {
    let dim = gammas[0].nrows();
    let mut out = CMat::zeros(dim, dim);
    for (g, &x) in gammas.iter().zip(v) {
        if x != 0.0 {
            out += g.scale(x);
        }
    }
    out
}

/// Flat torus operator with the given gamma matrices (one per torus direction).
pub(crate) fn assemble(
    t: &FlatTorusModel,
    gammas: &[CMat],
    n: usize,
    model_ref: &str,
) -> Result<AssembledOperator> {
    if gammas.len() != t.dim() {
        return Err(Error::DimensionMismatch(format!(
            "module dimension {} but torus dimension {}",
            gammas.len(),
            t.dim()
        )));
    }
    let dim_v = gammas[0].nrows();
    let modes = torus_modes(&t.spin_shift, n);
    let mut blocks = Vec::with_capacity(modes.len());
    let mut labels = Vec::with_capacity(modes.len() * dim_v);
    for m in modes {
        let xi: Vec<f64> = t.frequency(&m).iter().map(|x| 2.0 * PI * x).collect();
        blocks.push(gamma_combination(gammas, &xi));
        labels.extend((0..dim_v).map(|component| BasisLabel {
            mode: m.clone(),
            sector: 0,
            component,
        }));
    }
    Ok(AssembledOperator {
        blocks,
        labels,
        truncation: n,
        model_ref: model_ref.to_string(),
        reliable_bound: 2.0 * PI * n as f64 * t.dual_min_singular(),
    })
}

pub(crate) fn bochner(t: &FlatTorusModel, cm: &CliffordModule, n: usize) -> Result<AssembledOperator> {
    let dirac = assemble(t, &cm.gammas, n, "flat_torus")?;
    let curvature = curvature_endomorphism(cm, &vec![0.0; cm.n.pow(4)]);
    let modes = torus_modes(&t.spin_shift, n);
    let blocks = modes
        .iter()
        .map(|m| {
            let xi2: f64 = t.frequency(m).iter().map(|x| x * x).sum();
            identity(cm.dim_v).scale(4.0 * PI * PI * xi2) + &curvature
        })
        .collect();
    Ok(AssembledOperator { blocks, ..dirac })
}

/// `-⅛ Σ R_{abij} (γ^iγ^j - γ^jγ^i) σ^{ab}` for a curvature tensor stored
/// row-major as `r[((a·n + b)·n + i)·n + j]`.
pub fn curvature_endomorphism(cm: &CliffordModule, r: &[f64]) -> CMat {
    let n = cm.n;
    let mut out = CMat::zeros(cm.dim_v, cm.dim_v);
    for a in 0..n {
        for b in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let coef = r[((a * n + b) * n + i) * n + j];
                    if coef == 0.0 {
                        continue;
                    }
                    let g = &cm.gammas;
                    let comm = &g[i] * &g[j] - &g[j] * &g[i];
                    out += (comm * &cm.sigmas[a][b]).scale(-coef / 8.0);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::spinor_gammas;
    use crate::linalg::max_abs_diff;

    #[test]
    fn mode_counts() {
        assert_eq!(torus_modes(&[0.0], 4).len(), 9);
        assert_eq!(torus_modes(&[0.5], 4).len(), 8);
        assert_eq!(torus_modes(&[0.5, 0.0], 2).len(), 4 * 5);
    }

    #[test]
    fn lichnerowicz_term_on_constant_curvature() {
        // R_{abij} = κ(δ_ai δ_bj - δ_aj δ_bi) gives scal/4 = κ n(n-1)/4
        for n in 2..=5 {
            let cm = spinor_gammas(n).unwrap();
            let kappa = 0.7;
            let mut r = vec![0.0; n.pow(4)];
            for a in 0..n {
                for b in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let v = f64::from(u8::from(a == i && b == j))
                                - f64::from(u8::from(a == j && b == i));
                            r[((a * n + b) * n + i) * n + j] = kappa * v;
                        }
                    }
                }
            }
            let term = curvature_endomorphism(&cm, &r);
            let expected = identity(cm.dim_v).scale(kappa * (n * (n - 1)) as f64 / 4.0);
            assert!(max_abs_diff(&term, &expected) < 1e-12, "n = {n}");
        }
    }
}
