//! Mapping tori: fiber modes are grouped into orbits of `φ^{-T}`, and each orbit
//! unrolls to a circle of length `p·L` carrying the twist `(sU)^p`.

use super::torus::{self, gamma_combination};
use crate::clifford::{fixed_subspace, CliffordModule};
use crate::error::{Error, Result};
use crate::geometry::{geometric_data, AffineMappingTorus, BundleModel, WindowConstants};
use crate::linalg::{identity, projector_range, CMat};
use crate::operator::{AssembledOperator, BasisLabel};
use crate::spectrum::{eigensolve, Spectrum};
use num_complex::Complex64;
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

/// One orbit `ν_0, φ^{-T}ν_0, ...` of shifted fiber frequencies.
#[derive(Debug, Clone)]
pub(crate) struct Orbit {
    /// Lexicographically smallest integer mode of the orbit.
    pub rep: Vec<i64>,
    pub len: usize,
}

pub(crate) fn fiber_orbits(model: &AffineMappingTorus, n: usize) -> Vec<Orbit> {
    let phi = model.holonomy_matrix();
    let phi_inv_t = phi
        .clone()
        .try_inverse()
        .expect("validated holonomy")
        .transpose();
    let delta = &model.fiber.spin_shift;
    let step = |m: &[i64]| -> Vec<i64> {
        let nu = nalgebra::DVector::from_iterator(
            m.len(),
            m.iter().zip(delta).map(|(&x, &d)| x as f64 + d),
        );
        let moved = &phi_inv_t * nu;
        moved
            .iter()
            .zip(delta)
            .map(|(x, d)| (x - d).round() as i64)
            .collect()
    };
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut orbits = BTreeMap::new();
    for m in torus::torus_modes(delta, n) {
        if seen.contains(&m) {
            continue;
        }
        let mut members = vec![m.clone()];
        let mut cur = step(&m);
        while cur != m {
            members.push(cur.clone());
            cur = step(&cur);
        }
        let rep = members.iter().min().cloned().expect("nonempty orbit");
        let len = members.len();
        seen.extend(members);
        orbits.insert(rep.clone(), Orbit { rep, len });
    }
    orbits.into_values().collect()
}

/// Eigenspaces of a finite-order unitary `W`: `(β, basis)` with `W = e^{2πiβ}` on the
/// span of `basis`, for `β = r/q ∈ [0, 1)`.
pub(crate) fn sectors(w: &CMat) -> Result<Vec<(f64, CMat)>> {
    let dim = w.nrows();
    let id = identity(dim);
    let mut powers = vec![id.clone()];
    let mut cur = w.clone();
    let cap = 4 * crate::clifford::GROUP_ORDER_CAP;
    while crate::linalg::max_abs_diff(&cur, &id) > 1e-9 {
        if powers.len() >= cap {
            return Err(Error::GroupTooLarge(cap));
        }
        powers.push(cur.clone());
        cur = &cur * w;
    }
    let q = powers.len();
    let mut out = Vec::new();
    for r in 0..q {
        let mut p = CMat::zeros(dim, dim);
        for (j, wj) in powers.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * (r * j) as f64 / q as f64);
            p += wj * phase;
        }
        let basis = projector_range(&p.unscale(q as f64));
        if basis.ncols() > 0 {
            out.push((r as f64 / q as f64, basis));
        }
    }
    Ok(out)
}

/// Base integers `k` with `|k + β| ≤ bound`.
pub(crate) fn base_modes(beta: f64, bound: f64) -> Vec<i64> {
    let tol = 1e-9;
    let lo = (-bound - beta - tol).ceil() as i64;
    let hi = (bound - beta + tol).floor() as i64;
    (lo..=hi).collect()
}

pub(crate) struct MappingAssembly {
    pub dirac: AssembledOperator,
    pub bochner: AssembledOperator,
    /// Projector onto affine-parallel fiber sections, in the same blocks.
    pub invariant_projector: AssembledOperator,
}

pub(crate) fn assemble(model: &AffineMappingTorus, cm: &CliffordModule, n: usize) -> Result<MappingAssembly> {
    model.validate()?;
    if n == 0 {
        return Err(Error::TruncationTooSmall("truncation must be at least 1".into()));
    }
    let u = model.resolve_lift(cm)?;
    let sign = if model.base_spin_shift == 0.0 { 1.0 } else { -1.0 };
    let su = u.scale(sign);
    let fiber = model.fiber.scaled(model.fiber_scale);
    let fiber_gammas = &cm.gammas[1..];
    let fiber_rep = model.fiber.holonomy_rep(cm.dim_v);
    let inv_basis = fixed_subspace(&fiber_rep)?;
    let inv_proj = &inv_basis * inv_basis.adjoint();
    let length = model.base_length;

    let orbits = fiber_orbits(model, n);
    let mut sector_cache: BTreeMap<usize, Vec<(f64, CMat)>> = BTreeMap::new();
    let mut dirac_blocks = Vec::new();
    let mut bochner_blocks = Vec::new();
    let mut proj_blocks = Vec::new();
    let mut labels = Vec::new();
    let mut max_a: f64 = 0.0;
    for orbit in &orbits {
        let p = orbit.len;
        if let std::collections::btree_map::Entry::Vacant(slot) = sector_cache.entry(p) {
            let mut w = identity(cm.dim_v);
            for _ in 0..p {
                w = &su * w;
            }
            slot.insert(sectors(&w)?);
        }
        let xi: Vec<f64> = fiber.frequency(&orbit.rep).iter().map(|x| 2.0 * PI * x).collect();
        let a: f64 = orbit
            .rep
            .iter()
            .zip(&model.fiber.spin_shift)
            .zip(&model.connection)
            .map(|((&m, &d), &ai)| (m as f64 + d) * ai)
            .sum();
        max_a = max_a.max(a.abs());
        let fiber_part = gamma_combination(fiber_gammas, &xi);
        let xi2: f64 = xi.iter().map(|x| x * x).sum();
        let zero_orbit = orbit.rep.iter().zip(&model.fiber.spin_shift).all(|(&m, &d)| m == 0 && d == 0.0);
        for (r, (beta, basis)) in sector_cache[&p].iter().enumerate() {
            let d = basis.ncols();
            let compressed_fiber = basis.adjoint() * &fiber_part * basis;
            let compressed_base = basis.adjoint() * &cm.gammas[0] * basis;
            let compressed_proj = if zero_orbit {
                basis.adjoint() * &inv_proj * basis
            } else {
                CMat::zeros(d, d)
            };
            for k in base_modes(*beta, (p * n) as f64) {
                let kappa = 2.0 * PI * (k as f64 + beta) / (p as f64 * length);
                let w0 = kappa + 2.0 * PI * a;
                dirac_blocks.push(compressed_base.scale(w0) + &compressed_fiber);
                bochner_blocks.push(identity(d).scale(w0 * w0 + xi2));
                proj_blocks.push(compressed_proj.clone());
                let mut mode = vec![k];
                mode.extend(&orbit.rep);
                labels.extend((0..d).map(|component| BasisLabel {
                    mode: mode.clone(),
                    sector: r as u32,
                    component,
                }));
            }
        }
    }
    let base_bound = 2.0 * PI * (n as f64 / length - max_a);
    let fiber_bound = 2.0 * PI * n as f64 * fiber.dual_min_singular();
    let make = |blocks: Vec<CMat>| AssembledOperator {
        blocks,
        labels: labels.clone(),
        truncation: n,
        model_ref: "mapping_torus".into(),
        reliable_bound: base_bound.min(fiber_bound).max(0.0),
    };
    Ok(MappingAssembly {
        dirac: make(dirac_blocks),
        bochner: make(bochner_blocks),
        invariant_projector: make(proj_blocks),
    })
}

/// Split of fiber sections into affine-parallel ones and their complement.
#[derive(Debug, Clone)]
pub struct FiberSplit {
    /// Orthonormal basis of `V^Γ` (columns), the values of affine-parallel sections.
    pub invariant_basis: CMat,
    /// Orthogonal projector onto affine-parallel sections, in the blocks of `D^M`.
    pub projector: AssembledOperator,
    /// `D^Z` restricted to affine-parallel sections.
    pub d_inv: CMat,
    /// Spectrum of `D^Z` on the complement.
    pub complement_spectrum: Spectrum,
    /// Smallest `|λ|` of `D^Z` on the complement.
    pub gap: f64,
    /// `A diam(Z)^{-2} - C ‖R^Z‖`.
    pub gap_bound: f64,
    pub gap_bound_holds: bool,
}

pub fn fiber_invariant_split(
    model: &AffineMappingTorus,
    cm: &CliffordModule,
    n: usize,
    constants: &WindowConstants,
) -> Result<FiberSplit> {
    let asm = assemble(model, cm, n)?;
    let fiber = model.fiber.scaled(model.fiber_scale);
    let d_z = torus::assemble(&fiber, &cm.gammas[1..], n, "fiber")?;
    let inv_basis = fixed_subspace(&model.fiber.holonomy_rep(cm.dim_v))?;
    let has_zero = model.fiber.has_zero_mode() && inv_basis.ncols() > 0;
    let mut complement = d_z.clone();
    let mut d_inv = CMat::zeros(inv_basis.ncols(), inv_basis.ncols());
    if has_zero {
        let zero_idx = torus::torus_modes(&model.fiber.spin_shift, n)
            .iter()
            .position(|m| m.iter().all(|&x| x == 0))
            .expect("zero mode present without spin shift");
        let block = &d_z.blocks[zero_idx];
        d_inv = inv_basis.adjoint() * block * &inv_basis;
        // complement inside the zero mode
        let comp = projector_range(&(identity(cm.dim_v) - &inv_basis * inv_basis.adjoint()));
        complement.blocks[zero_idx] = comp.adjoint() * block * &comp;
    }
    let complement_spectrum = eigensolve(&complement)?;
    let gap = complement_spectrum.min_abs().unwrap_or(f64::INFINITY);
    let geo = geometric_data(&BundleModel::MappingTorus(model.clone()));
    let gap_bound = constants.a / (geo.diam_z * geo.diam_z) - constants.c * geo.norm_r;
    Ok(FiberSplit {
        invariant_basis: if has_zero { inv_basis } else { CMat::zeros(cm.dim_v, 0) },
        projector: asm.invariant_projector,
        d_inv,
        complement_spectrum,
        gap,
        gap_bound,
        gap_bound_holds: gap * gap >= gap_bound * (1.0 - 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::spinor_gammas;
    use crate::geometry::{FlatTorusModel, LiftSpec};

    fn square_minus_identity(shift: f64) -> AffineMappingTorus {
        let fiber = FlatTorusModel::rectangular(&[1.0, 1.0], &[shift, shift]).unwrap();
        let mut m = AffineMappingTorus::product(fiber, 1.0, 1.0).unwrap();
        m.holonomy = vec![vec![-1, 0], vec![0, -1]];
        m.lift = LiftSpec::Rotation { a: 1, b: 2, angle: PI };
        m
    }

    #[test]
    fn orbits_of_minus_identity_pair_modes() {
        let m = square_minus_identity(0.5);
        let orbits = fiber_orbits(&m, 2);
        assert!(orbits.iter().all(|o| o.len == 2));
        assert_eq!(orbits.iter().map(|o| o.len).sum::<usize>(), 16);
        let m = square_minus_identity(0.0);
        let orbits = fiber_orbits(&m, 2);
        assert_eq!(orbits.iter().filter(|o| o.len == 1).count(), 1);
        assert_eq!(orbits.iter().map(|o| o.len).sum::<usize>(), 25);
    }

    #[test]
    fn sectors_of_order_four_unitary() {
        let cm = spinor_gammas(2).unwrap();
        let u = cm.rotation_lift(0, 1, PI).unwrap();
        let s = sectors(&u).unwrap();
        let betas: Vec<f64> = s.iter().map(|(b, _)| *b).collect();
        assert_eq!(betas, vec![0.25, 0.75]);
    }

    #[test]
    fn base_mode_ranges() {
        assert_eq!(base_modes(0.0, 2.0), vec![-2, -1, 0, 1, 2]);
        assert_eq!(base_modes(0.5, 2.0), vec![-2, -1, 0, 1]);
    }

    #[test]
    fn circle_fiber_split() {
        let cm = spinor_gammas(2).unwrap();
        let ell = 3.0;
        let eps = 0.5;
        let fiber = FlatTorusModel::circle(ell, 0.0).unwrap();
        let m = AffineMappingTorus::product(fiber, 2.0, eps).unwrap();
        let split = fiber_invariant_split(&m, &cm, 4, &WindowConstants::default()).unwrap();
        assert_eq!(split.invariant_basis.ncols(), cm.dim_v);
        assert!((split.gap - 2.0 * PI / (eps * ell)).abs() < 1e-12);
        assert!(split.gap_bound_holds);

        let fiber = FlatTorusModel::circle(ell, 0.5).unwrap();
        let m = AffineMappingTorus::product(fiber, 2.0, eps).unwrap();
        let split = fiber_invariant_split(&m, &cm, 4, &WindowConstants::default()).unwrap();
        assert_eq!(split.invariant_basis.ncols(), 0);
        assert!(split.projector.max_abs_entry() == 0.0);
    }

    #[test]
    fn minus_identity_fiber_has_no_parallel_sections() {
        let cm = spinor_gammas(3).unwrap();
        let split =
            fiber_invariant_split(&square_minus_identity(0.5), &cm, 3, &WindowConstants::default()).unwrap();
        assert_eq!(split.invariant_basis.ncols(), 0);
        assert!((split.gap - 2.0 * PI * 0.5f64.sqrt()).abs() < 1e-12);
    }
}
