//! Eigensolving and spectrum comparison predicates.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_residual};
use crate::operator::AssembledOperator;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Sorted real eigenvalues with a clustering tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub cluster_tol: f64,
    pub source_truncation: usize,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>, cluster_tol: f64, source_truncation: usize) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            values,
            cluster_tol,
            source_truncation,
        }
    }

    /// Spectrum with the default tolerance `1e-8 · max(1, max|λ|)`.
    pub fn with_default_tol(values: Vec<f64>, source_truncation: usize) -> Self {
        let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        Self::new(values, 1e-8 * scale, source_truncation)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct values (cluster means) with multiplicities.
    pub fn clusters(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((last, sum, mult)) if v - *last <= self.cluster_tol => {
                    *last = v;
                    *sum += v;
                    *mult += 1;
                }
                _ => out.push((v, v, 1)),
            }
        }
        out.into_iter().map(|(_, s, m)| (s / m as f64, m)).collect()
    }

    /// `|λ|` sorted ascending, i.e. the spectrum of `|H|` counted with multiplicity.
    pub fn abs_sorted(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.iter().map(|x| x.abs()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_abs(&self) -> Option<f64> {
        self.values.iter().map(|x| x.abs()).min_by(f64::total_cmp)
    }

    /// CSV with `#`-prefixed metadata lines, a column header, one value per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# truncation={}", self.source_truncation)?;
        writeln!(w, "# cluster_tol={:e}", self.cluster_tol)?;
        writeln!(w, "eigenvalue")?;
        for v in &self.values {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("spectrum csv: {m}"));
        let mut truncation = None;
        let mut tol = None;
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| bad(format!("metadata line {line:?}")))?;
                match k.trim() {
                    "truncation" => truncation = v.trim().parse().ok(),
                    "cluster_tol" => tol = v.trim().parse().ok(),
                    _ => {}
                }
            } else if line.is_empty() || line == "eigenvalue" {
                continue;
            } else {
                values.push(line.parse().map_err(|_| bad(format!("value {line:?}")))?);
            }
        }
        Ok(Self::new(
            values,
            tol.ok_or_else(|| bad("missing cluster_tol".into()))?,
            truncation.ok_or_else(|| bad("missing truncation".into()))?,
        ))
    }
}

/// All eigenvalues of a block-diagonal Hermitian operator, solved blockwise.
pub fn eigensolve(op: &AssembledOperator) -> Result<Spectrum> {
    let scale = op.max_abs_entry().max(1.0);
    let res = op.hermitian_residual();
    if res > 1e-10 * scale {
        return Err(Error::NotHermitian(res));
    }
    let per_block: Vec<Vec<f64>> = op.blocks.par_iter().map(hermitian_eigenvalues).collect();
    let values: Vec<f64> = per_block.into_iter().flatten().collect();
    Ok(Spectrum::with_default_tol(values, op.truncation))
}

/// Eigenvalues of a dense Hermitian matrix.
pub fn eigensolve_dense(m: &crate::linalg::CMat) -> Result<Spectrum> {
    let res = hermitian_residual(m);
    if res > 1e-10 * crate::linalg::max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(res));
    }
    Ok(Spectrum::with_default_tol(hermitian_eigenvalues(m), 0))
}

/// `λ ↦ asinh(λ / √K)`.
pub fn sinh_rescale(s: &Spectrum, k: f64) -> Result<Spectrum> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
    }
    let root = k.sqrt();
    Ok(Spectrum {
        values: s.values.iter().map(|v| (v / root).asinh()).collect(),
        cluster_tol: s.cluster_tol / root,
        source_truncation: s.source_truncation,
    })
}

fn sorted_indices(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    idx
}

/// Bijection moving each element at most `eps`, if one exists. The witness pairs
/// indices of `a` with indices of `b` in sorted order, which is optimal on a line.
pub fn epsilon_close(a: &[f64], b: &[f64], eps: f64) -> Option<Vec<(usize, usize)>> {
    if a.len() != b.len() {
        return None;
    }
    let ia = sorted_indices(a);
    let ib = sorted_indices(b);
    let pairs: Vec<(usize, usize)> = ia.into_iter().zip(ib).collect();
    pairs
        .iter()
        .all(|&(i, j)| (a[i] - b[j]).abs() <= eps)
        .then_some(pairs)
}

/// Whether `a` injects into `b` moving each element at most `eps`.
pub fn subset_epsilon_close(a: &[f64], b: &[f64], eps: f64) -> bool {
    if a.len() > b.len() {
        return false;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    // Equal-width intervals on a line: match each point, in order, to the
    // leftmost unused candidate inside its interval.
    let mut j = 0;
    for x in sa {
        while j < sb.len() && sb[j] < x - eps {
            j += 1;
        }
        if j == sb.len() || sb[j] > x + eps {
            return false;
        }
        j += 1;
    }
    true
}

/// Values with `|λ| ≤ W`; `W = ∞` keeps everything.
pub fn window_intersect(s: &Spectrum, w: f64) -> Spectrum {
    Spectrum {
        values: s.values.iter().copied().filter(|v| v.abs() <= w).collect(),
        cluster_tol: s.cluster_tol,
        source_truncation: s.source_truncation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec(), 1e-8, 0)
    }

    #[test]
    fn rescale_examples() {
        let s = sinh_rescale(&spec(&[0.0, 4.0]), 16.0).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!((s.values[1] - 0.881_373_587_0).abs() < 1e-10);
        assert!(sinh_rescale(&s, 0.0).is_err());
        assert!(sinh_rescale(&s, -1.0).is_err());
    }

    #[test]
    fn closeness_examples() {
        assert!(epsilon_close(&[0.0, 1.0], &[0.04, 0.96], 0.05).is_some());
        assert!(epsilon_close(&[0.0, 1.0], &[0.0, 1.0, 2.0], 10.0).is_none());
        assert!(subset_epsilon_close(&[1.0], &[0.99, 5.0], 0.05));
        assert!(!subset_epsilon_close(&[1.0, 1.0], &[1.0], 100.0));
        assert!(subset_epsilon_close(&[], &[1.0], 0.0));
    }

    #[test]
    fn window_examples() {
        let s = spec(&[-3.0, -1.0, 0.0, 2.0, 5.0]);
        assert_eq!(window_intersect(&s, 2.0).values, vec![-1.0, 0.0, 2.0]);
        assert_eq!(window_intersect(&s, 0.0).values, vec![0.0]);
        assert_eq!(window_intersect(&s, f64::INFINITY), s);
    }

    #[test]
    fn clusters_count_multiplicity() {
        let s = Spectrum::new(vec![1.0, 1.0 + 1e-12, 2.0, -1.0], 1e-9, 0);
        let cl = s.clusters();
        assert_eq!(cl.len(), 3);
        assert_eq!(cl[1].1, 2);
    }

    #[test]
    fn csv_roundtrip() {
        let s = Spectrum::new(vec![-0.5, 0.5, 1.25], 1e-8, 4);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# truncation=4\n# cluster_tol=1e-8\neigenvalue\n"));
        assert_eq!(Spectrum::read_csv(buf.as_slice()).unwrap(), s);
    }
}
