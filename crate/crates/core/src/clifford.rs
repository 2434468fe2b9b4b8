//! Clifford modules for `SO(n)` and `Spin(n)`.
//!
//! A module carries Hermitian involutions `gammas[j]` with
//! `{γ^a, γ^b} = 2δ^{ab}` and anti-Hermitian `σ^{ab}` representing the Lie
//! algebra, with `σ^{ab}` corresponding to the generator `L_{ab} = E_{ab} - E_{ba}`
//! of `so(n)` (it maps `e_b` to `e_a`).

use crate::error::{Error, Result};
use crate::linalg::{
    anticommutator, c, commutator, hermitian_eigh, hermitian_residual, identity, max_abs,
    max_abs_diff, projector_range, unitary_residual, CMat, I,
};
use serde::{Deserialize, Serialize};

/// Cap on the order of a finite holonomy group.
pub const GROUP_ORDER_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupTag {
    #[serde(rename = "SO")]
    So,
    #[serde(rename = "Spin")]
    Spin,
}

#[derive(Debug, Clone)]
pub struct CliffordModule {
    pub n: usize,
    pub group: GroupTag,
    pub dim_v: usize,
    pub gammas: Vec<CMat>,
    /// `sigmas[a][b]` is `σ^{ab}`; the diagonal is zero.
    pub sigmas: Vec<Vec<CMat>>,
    /// `E^j + I^j` for exterior modules, empty otherwise.
    pub gamma_hats: Vec<CMat>,
}

fn pauli() -> (CMat, CMat, CMat) {
    let sx = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let sy = CMat::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]);
    let sz = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    (sx, sy, sz)
}

fn kron_all(factors: &[CMat]) -> CMat {
    factors
        .iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

fn sigmas_from(gammas: &[CMat], hats: &[CMat]) -> Vec<Vec<CMat>> {
    let n = gammas.len();
    let dim = gammas.first().map_or(1, |g| g.nrows());
    let mut out = vec![vec![CMat::zeros(dim, dim); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let mut s = commutator(&gammas[a], &gammas[b]);
            if !hats.is_empty() {
                s += commutator(&hats[a], &hats[b]);
            }
            out[a][b] = s.scale(0.25);
        }
    }
    out
}

/// Spinor module of `Spin(n)` with `σ^{ab} = ¼[γ^a, γ^b]`.
pub fn spinor_gammas(n: usize) -> Result<CliffordModule> {
    if !(1..=8).contains(&n) {
        return Err(Error::DimensionOutOfRange { n, min: 1, max: 8 });
    }
    let (sx, sy, sz) = pauli();
    let k = n / 2;
    let id2 = identity(2);
    let mut gammas = Vec::with_capacity(n);
    for j in 0..k {
        for middle in [&sx, &sy] {
            let mut factors = vec![sz.clone(); j];
            factors.push(middle.clone());
            factors.extend(std::iter::repeat_n(id2.clone(), k - j - 1));
            gammas.push(kron_all(&factors));
        }
    }
    if n % 2 == 1 {
        gammas.push(kron_all(&vec![sz.clone(); k]));
    }
    let sigmas = sigmas_from(&gammas, &[]);
    Ok(CliffordModule {
        n,
        group: GroupTag::Spin,
        dim_v: 1 << k,
        gammas,
        sigmas,
        gamma_hats: Vec::new(),
    })
}

/// Complexified exterior algebra `Λ*(R^n)` with `γ^j = i(E^j - I^j)`, `γ̂^j = E^j + I^j`.
///
/// Basis vectors are indexed by bitmasks of `{1..n}`, bit `j` standing for `e^{j+1}`.
pub fn exterior_module(n: usize) -> Result<CliffordModule> {
    if !(1..=6).contains(&n) {
        return Err(Error::DimensionOutOfRange { n, min: 1, max: 6 });
    }
    let dim = 1usize << n;
    let mut gammas = Vec::with_capacity(n);
    let mut hats = Vec::with_capacity(n);
    for j in 0..n {
        let mut ext = CMat::zeros(dim, dim);
        for s in 0..dim {
            if s & (1 << j) != 0 {
                continue;
            }
            let below = (s & ((1 << j) - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            ext[(s | (1 << j), s)] = c(sign);
        }
        let int = ext.adjoint();
        gammas.push((&ext - &int) * I);
        hats.push(&ext + &int);
    }
    let sigmas = sigmas_from(&gammas, &hats);
    Ok(CliffordModule {
        n,
        group: GroupTag::So,
        dim_v: dim,
        gammas,
        sigmas,
        gamma_hats: hats,
    })
}

/// Maximal entrywise violations of the defining relations of a module.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RelationResiduals {
    pub gamma_hermitian: f64,
    pub clifford: f64,
    pub sigma_anti_hermitian: f64,
    pub sigma_antisymmetric: f64,
    pub sigma_bracket: f64,
    pub gamma_equivariance: f64,
    /// `{γ^a, γ̂^b} = 0` and `{γ̂^a, γ̂^b} = 2δ^{ab}` for exterior modules.
    pub hat_relations: f64,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        [
            self.gamma_hermitian,
            self.clifford,
            self.sigma_anti_hermitian,
            self.sigma_antisymmetric,
            self.sigma_bracket,
            self.gamma_equivariance,
            self.hat_relations,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

impl CliffordModule {
    /// `γ(v) = Σ v_j γ^j`.
    pub fn gamma_of(&self, v: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.dim_v, self.dim_v);
        for (g, &x) in self.gammas.iter().zip(v) {
            if x != 0.0 {
                out += g.scale(x);
            }
        }
        out
    }

    pub fn residuals(&self) -> RelationResiduals {
        let n = self.n;
        let id = identity(self.dim_v);
        let mut r = RelationResiduals::default();
        for a in 0..n {
            r.gamma_hermitian = r.gamma_hermitian.max(hermitian_residual(&self.gammas[a]));
            for b in 0..n {
                let ac = anticommutator(&self.gammas[a], &self.gammas[b]);
                r.clifford = r.clifford.max(max_abs_diff(&ac, &id.scale(2.0 * delta(a, b))));
                let s = &self.sigmas[a][b];
                r.sigma_anti_hermitian = r.sigma_anti_hermitian.max(max_abs(&(s + s.adjoint())));
                r.sigma_antisymmetric =
                    r.sigma_antisymmetric.max(max_abs(&(s + &self.sigmas[b][a])));
            }
        }
        // [σ^{ab}, σ^{cd}] = δ^{ad}σ^{bc} - δ^{ac}σ^{bd} + δ^{bc}σ^{ad} - δ^{bd}σ^{ac}
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let lhs = commutator(&self.sigmas[a][b], &self.sigmas[cc][d]);
                        let rhs = self.sigmas[b][cc].scale(delta(a, d))
                            - self.sigmas[b][d].scale(delta(a, cc))
                            + self.sigmas[a][d].scale(delta(b, cc))
                            - self.sigmas[a][cc].scale(delta(b, d));
                        r.sigma_bracket = r.sigma_bracket.max(max_abs_diff(&lhs, &rhs));
                    }
                }
            }
        }
        // [γ^a, σ^{bc}] = δ^{ab}γ^c - δ^{ac}γ^b
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    let lhs = commutator(&self.gammas[a], &self.sigmas[b][cc]);
                    let rhs = self.gammas[cc].scale(delta(a, b)) - self.gammas[b].scale(delta(a, cc));
                    r.gamma_equivariance = r.gamma_equivariance.max(max_abs_diff(&lhs, &rhs));
                }
            }
        }
        for a in 0..self.gamma_hats.len() {
            for b in 0..self.gamma_hats.len() {
                let mixed = anticommutator(&self.gammas[a], &self.gamma_hats[b]);
                let hh = anticommutator(&self.gamma_hats[a], &self.gamma_hats[b]);
                r.hat_relations = r
                    .hat_relations
                    .max(max_abs(&mixed))
                    .max(max_abs_diff(&hh, &id.scale(2.0 * delta(a, b))))
                    .max(hermitian_residual(&self.gamma_hats[a]));
            }
        }
        r
    }

    /// `-Σ_{a<b} (σ^{ab})²`, the Casimir operator for the basis `{L_{ab}}_{a<b}`
    /// of `so(n)`, orthonormal for `⟨X, Y⟩ = -½ Tr(XY)`.
    pub fn casimir_operator(&self) -> CMat {
        let mut out = CMat::zeros(self.dim_v, self.dim_v);
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let s = &self.sigmas[a][b];
                out -= s * s;
            }
        }
        out
    }

    /// Casimir scalar `c_V`; fails when the module is not isotypic.
    pub fn casimir(&self) -> Result<f64> {
        let op = self.casimir_operator();
        let (vals, _) = hermitian_eigh(&op);
        let (lo, hi) = match (vals.first(), vals.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Ok(0.0),
        };
        let offdiag = max_abs_diff(&op, &identity(self.dim_v).scale(0.5 * (lo + hi)));
        if hi - lo > 1e-10 || offdiag > 1e-10 {
            return Err(Error::NonScalarCasimir((hi - lo).max(offdiag)));
        }
        Ok(0.5 * (lo + hi))
    }

    /// Distinct Casimir values with the dimension of each eigenspace.
    pub fn casimir_blocks(&self) -> Vec<(f64, usize)> {
        let (vals, _) = hermitian_eigh(&self.casimir_operator());
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some((last, mult)) if (v - *last).abs() < 1e-9 => *mult += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// `exp(angle · σ^{ab})`, the lift of the rotation `exp(angle · L_{ab})`.
    pub fn rotation_lift(&self, a: usize, b: usize, angle: f64) -> Result<CMat> {
        if a >= self.n || b >= self.n || a == b {
            return Err(Error::InvalidArgument(format!(
                "rotation plane ({a}, {b}) invalid for n = {}",
                self.n
            )));
        }
        Ok(crate::linalg::exp_anti_hermitian(&self.sigmas[a][b], angle))
    }
}

/// Unitary images of holonomy generators acting on a module.
#[derive(Debug, Clone)]
pub struct HolonomyRep {
    pub generators: Vec<CMat>,
    pub dim_v: usize,
}

impl HolonomyRep {
    pub fn new(dim_v: usize, generators: Vec<CMat>) -> Result<Self> {
        for g in &generators {
            if g.nrows() != dim_v || g.ncols() != dim_v {
                return Err(Error::DimensionMismatch(format!(
                    "generator is {}x{}, module dimension {dim_v}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            let res = unitary_residual(g);
            if res > 1e-10 {
                return Err(Error::NotUnitary(res));
            }
        }
        Ok(Self { generators, dim_v })
    }

    /// Enumerates the generated group, failing beyond [`GROUP_ORDER_CAP`] elements.
    pub fn group_elements(&self) -> Result<Vec<CMat>> {
        let mut elements = vec![identity(self.dim_v)];
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            frontier += 1;
            for g in &self.generators {
                let next = g * &current;
                if !elements.iter().any(|e| max_abs_diff(e, &next) < 1e-9) {
                    if elements.len() >= GROUP_ORDER_CAP {
                        return Err(Error::GroupTooLarge(GROUP_ORDER_CAP));
                    }
                    elements.push(next);
                }
            }
        }
        Ok(elements)
    }

    pub fn group_order(&self) -> Result<usize> {
        Ok(self.group_elements()?.len())
    }

    /// Group-averaging projector onto the fixed subspace.
    pub fn averaging_projector(&self) -> Result<CMat> {
        let elements = self.group_elements()?;
        let mut p = CMat::zeros(self.dim_v, self.dim_v);
        for e in &elements {
            p += e;
        }
        Ok(p.unscale(elements.len() as f64))
    }
}

/// Orthonormal basis (columns) of the subspace fixed by every generator.
pub fn fixed_subspace(rho: &HolonomyRep) -> Result<CMat> {
    let p = rho.averaging_projector()?;
    Ok(projector_range(&p))
}
