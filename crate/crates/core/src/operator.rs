//! Block-diagonal Hermitian operators in labelled Fourier bases.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_residual, max_abs_diff, CMat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// One basis vector: a Fourier multi-index, the sector of the holonomy it
/// belongs to, and the component inside its block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisLabel {
    pub mode: Vec<i64>,
    pub sector: u32,
    pub component: usize,
}

/// Hermitian operator stored as its diagonal blocks.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub blocks: Vec<CMat>,
    pub labels: Vec<BasisLabel>,
    pub truncation: usize,
    pub model_ref: String,
    /// Every eigenvalue of the untruncated operator with `|λ|` below this bound
    /// is present in the truncated one.
    pub reliable_bound: f64,
}

impl AssembledOperator {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += b.nrows();
        }
        off
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(hermitian_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.blocks
            .iter()
            .map(crate::linalg::max_abs)
            .fold(0.0, f64::max)
    }

    /// Blockwise square `H²`.
    pub fn square(&self) -> Self {
        self.map_blocks(|b| b * b)
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
            labels: self.labels.clone(),
            truncation: self.truncation,
            model_ref: self.model_ref.clone(),
            reliable_bound: self.reliable_bound,
        }
    }

    /// Max entrywise difference to an operator with the same block layout.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.labels != other.labels || self.blocks.len() != other.blocks.len() {
            return Err(Error::DimensionMismatch("operators have different bases".into()));
        }
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max))
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for (b, off) in self.blocks.iter().zip(self.block_offsets()) {
            out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        }
        out
    }

    /// Writes the dense matrix as text: a `rows cols` line, then one line per
    /// row holding `re im` pairs in column order.
    pub fn write_dense_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_dense_text(&self.to_dense(), &mut w)
    }
}

pub fn write_dense_text<W: Write>(m: &CMat, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_dense_text<R: BufRead>(r: R) -> Result<CMat> {
    let bad = |msg: &str| Error::InvalidArgument(format!("dense matrix text: {msg}"));
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header"))?
        .map_err(|e| bad(&e.to_string()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("header")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad("header must hold two integers"));
    };
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| bad("missing row"))?
            .map_err(|e| bad(&e.to_string()))?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("entry")))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * cols {
            return Err(bad("row length"));
        }
        for j in 0..cols {
            m[(i, j)] = Complex64::new(nums[2 * j], nums[2 * j + 1]);
        }
    }
    Ok(m)
}
