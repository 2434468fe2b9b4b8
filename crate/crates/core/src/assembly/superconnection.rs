//! Superconnection data of a fiber bundle and the limit operator on
//! affine-parallel sections.
//!
//! Indices `a, b, c` run over the whole adapted frame; the first `n_base` of them
//! are horizontal (`α, β`) and the rest vertical (`j, k`).

use super::mapping::{base_modes, sectors};
use super::torus;
use crate::clifford::{fixed_subspace, CliffordModule};
use crate::error::{Error, Result};
use crate::geometry::{geometric_data, AffineMappingTorus, BundleModel};
use crate::linalg::{identity, CMat, I};
use crate::operator::{AssembledOperator, BasisLabel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Connection coefficients `ω_{abc}` in an adapted orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    pub n: usize,
    pub n_base: usize,
    values: Vec<f64>,
}

impl Omega {
    pub fn zeros(n: usize, n_base: usize) -> Self {
        Self {
            n,
            n_base,
            values: vec![0.0; n * n * n],
        }
    }

    pub fn from_nested(omega: &[Vec<Vec<f64>>], n_base: usize) -> Result<Self> {
        let n = omega.len();
        let mut out = Self::zeros(n, n_base);
        for (a, plane) in omega.iter().enumerate() {
            for (b, row) in plane.iter().enumerate() {
                if plane.len() != n || row.len() != n {
                    return Err(Error::DimensionMismatch("ω must be n×n×n".into()));
                }
                for (c, &v) in row.iter().enumerate() {
                    out.set(a, b, c, v);
                }
            }
        }
        Ok(out)
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a * self.n + b) * self.n + c]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let n = self.n;
        self.values[(a * n + b) * n + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn base(&self) -> std::ops::Range<usize> {
        0..self.n_base
    }

    fn fiber(&self) -> std::ops::Range<usize> {
        self.n_base..self.n
    }
}

fn check_module(cm: &CliffordModule, omega: &Omega) -> Result<()> {
    if cm.n != omega.n {
        return Err(Error::DimensionMismatch(format!(
            "module dimension {} but ω dimension {}",
            cm.n, omega.n
        )));
    }
    Ok(())
}

/// `𝒱 = -i(ω_{αjk} γ^k σ^{αj} + ½ ω_{αjj} γ^α + ω_{αβj}(γ^j σ^{αβ} + γ^α σ^{jβ}))`.
pub fn cal_v(cm: &CliffordModule, omega: &Omega) -> Result<CMat> {
    check_module(cm, omega)?;
    let (g, s) = (&cm.gammas, &cm.sigmas);
    let mut acc = CMat::zeros(cm.dim_v, cm.dim_v);
    for al in omega.base() {
        for j in omega.fiber() {
            for k in omega.fiber() {
                let w = omega.get(al, j, k);
                if w != 0.0 {
                    acc += (&g[k] * &s[al][j]).scale(w);
                }
            }
            let w = omega.get(al, j, j);
            if w != 0.0 {
                acc += g[al].scale(0.5 * w);
            }
        }
        for be in omega.base() {
            for j in omega.fiber() {
                let w = omega.get(al, be, j);
                if w != 0.0 {
                    acc += (&g[j] * &s[al][be] + &g[al] * &s[j][be]).scale(w);
                }
            }
        }
    }
    Ok(acc * (-I))
}

/// Closed form of `𝒱` on the exterior algebra, in terms of `[γ̂^a, γ̂^b]`.
pub fn cal_v_exterior(cm: &CliffordModule, omega: &Omega) -> Result<CMat> {
    check_module(cm, omega)?;
    if cm.gamma_hats.len() != cm.n {
        return Err(Error::InvalidArgument("module has no γ̂ generators".into()));
    }
    let (g, h) = (&cm.gammas, &cm.gamma_hats);
    let hat_comm = |a: usize, b: usize| &h[a] * &h[b] - &h[b] * &h[a];
    let mut acc = CMat::zeros(cm.dim_v, cm.dim_v);
    for al in omega.base() {
        for j in omega.fiber() {
            for k in omega.fiber() {
                let w = omega.get(al, j, k);
                if w != 0.0 {
                    acc += (&g[k] * hat_comm(al, j)).scale(w);
                }
            }
        }
        for be in omega.base() {
            for j in omega.fiber() {
                let w = omega.get(al, be, j);
                if w != 0.0 {
                    acc += (&g[j] * hat_comm(al, be) + &g[al] * hat_comm(j, be)).scale(w);
                }
            }
        }
    }
    Ok(acc * (-0.25 * I))
}

/// Pieces of `A = D^W + ∇^W - ¼c(T)` together with `𝒱`.
#[derive(Debug, Clone)]
pub struct SuperconnectionPieces {
    /// `D^W` on fiber Fourier modes, with its zeroth-order `ω_{pqj}` term.
    pub fiber_dirac: AssembledOperator,
    pub base_connection_coeffs: Omega,
    /// Quantized `c(T)` term `(i/2) ω_{αβj} γ^j σ^{αβ}`.
    pub c_t: CMat,
    /// Zeroth-order part of `-i γ^α ∇^W_{e_α}`.
    pub base_constant: CMat,
    pub cal_v: CMat,
}

impl SuperconnectionPieces {
    /// Every zeroth-order term of `D^A + 𝒱` except the fiber ones.
    pub fn constant_term(&self) -> CMat {
        &self.c_t + &self.base_constant + &self.cal_v
    }
}

fn fiber_constant(cm: &CliffordModule, omega: &Omega) -> CMat {
    let mut acc = CMat::zeros(cm.dim_v, cm.dim_v);
    for j in omega.fiber() {
        for p in 0..omega.n {
            for q in 0..omega.n {
                let w = omega.get(p, q, j);
                if w != 0.0 {
                    acc += (&cm.gammas[j] * &cm.sigmas[p][q]).scale(0.5 * w);
                }
            }
        }
    }
    acc * (-I)
}

fn base_constant(cm: &CliffordModule, omega: &Omega) -> CMat {
    let mut acc = CMat::zeros(cm.dim_v, cm.dim_v);
    for al in omega.base() {
        let mut conn = CMat::zeros(cm.dim_v, cm.dim_v);
        for b in omega.base() {
            for c in omega.base() {
                conn += cm.sigmas[b][c].scale(0.5 * omega.get(b, c, al));
            }
        }
        for j in omega.fiber() {
            for k in omega.fiber() {
                conn += cm.sigmas[j][k].scale(0.5 * omega.get(j, k, al));
            }
            conn -= identity(cm.dim_v).scale(0.5 * omega.get(al, j, j));
        }
        acc += &cm.gammas[al] * conn;
    }
    acc * (-I)
}

fn c_t(cm: &CliffordModule, omega: &Omega) -> CMat {
    let mut acc = CMat::zeros(cm.dim_v, cm.dim_v);
    for al in omega.base() {
        for be in omega.base() {
            for j in omega.fiber() {
                let w = omega.get(al, be, j);
                if w != 0.0 {
                    acc += (&cm.gammas[j] * &cm.sigmas[al][be]).scale(0.5 * w);
                }
            }
        }
    }
    acc * I
}

pub fn superconnection_pieces(
    model: &AffineMappingTorus,
    cm: &CliffordModule,
    n: usize,
) -> Result<SuperconnectionPieces> {
    model.validate()?;
    model.resolve_lift(cm)?;
    let geo = geometric_data(&BundleModel::MappingTorus(model.clone()));
    let omega = Omega::from_nested(&geo.omega, 1)?;
    let fiber = model.fiber.scaled(model.fiber_scale);
    let mut fiber_dirac = torus::assemble(&fiber, &cm.gammas[1..], n, "fiber")?;
    if !omega.is_zero() {
        let k = fiber_constant(cm, &omega);
        fiber_dirac = fiber_dirac.map_blocks(|b| b + &k);
    }
    Ok(SuperconnectionPieces {
        fiber_dirac,
        c_t: c_t(cm, &omega),
        base_constant: base_constant(cm, &omega),
        cal_v: cal_v(cm, &omega)?,
        base_connection_coeffs: omega,
    })
}

/// `D^B = D^{A^inv} + 𝒱^inv` on base Fourier modes with values in `V^Γ`,
/// twisted around the base circle by `(-1)^{2δ_B}·U`.
pub fn limit_operator(model: &AffineMappingTorus, cm: &CliffordModule, n_base: usize) -> Result<AssembledOperator> {
    if n_base == 0 {
        return Err(Error::TruncationTooSmall("truncation must be at least 1".into()));
    }
    let pieces = superconnection_pieces(model, cm, 1)?;
    let inv = fixed_subspace(&model.fiber.holonomy_rep(cm.dim_v))?;
    if inv.ncols() == 0 || !model.fiber.has_zero_mode() {
        return Err(Error::EmptyInvariantSpace);
    }
    let u = model.resolve_lift(cm)?;
    let sign = if model.base_spin_shift == 0.0 { 1.0 } else { -1.0 };
    let w_inv = inv.adjoint() * u.scale(sign) * &inv;
    let constant = inv.adjoint() * pieces.constant_term() * &inv;
    let base_gamma = inv.adjoint() * &cm.gammas[0] * &inv;
    let length = model.base_length;
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    for (r, (beta, basis)) in sectors(&w_inv)?.iter().enumerate() {
        let g0 = basis.adjoint() * &base_gamma * basis;
        let k0 = basis.adjoint() * &constant * basis;
        for k in base_modes(*beta, n_base as f64) {
            let kappa = 2.0 * PI * (k as f64 + beta) / length;
            blocks.push(g0.scale(kappa) + &k0);
            labels.extend((0..basis.ncols()).map(|component| BasisLabel {
                mode: vec![k],
                sector: r as u32,
                component,
            }));
        }
    }
    let op = AssembledOperator {
        blocks,
        labels,
        truncation: n_base,
        model_ref: "limit_operator".into(),
        reliable_bound: 2.0 * PI * n_base as f64 / length,
    };
    let res = op.hermitian_residual();
    if res > 1e-12 {
        return Err(Error::NotHermitian(res));
    }
    Ok(op)
}
