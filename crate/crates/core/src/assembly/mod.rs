//! Exact Fourier-block assembly of Dirac-type operators on flat models.
//!
//! Every model here is flat, so the operators split into finite blocks indexed
//! by dual-lattice modes and nothing is discretized: block entries are exact up
//! to rounding.

mod derivative;
mod frame_bundle;
mod mapping;
mod superconnection;
mod torus;

pub use derivative::{branch_eigenvalue, eigenvalue_derivative, eigenvalue_derivative_indexed, Branch};
pub use frame_bundle::{frame_bundle_operator, FrameBundleSpectra};
pub use mapping::{fiber_invariant_split, FiberSplit};
pub use superconnection::{
    cal_v, cal_v_exterior, limit_operator, superconnection_pieces, Omega, SuperconnectionPieces,
};
pub use torus::{curvature_endomorphism, torus_modes};

use crate::clifford::CliffordModule;
use crate::error::{Error, Result};
use crate::geometry::BundleModel;
use crate::operator::AssembledOperator;

fn check_truncation(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::TruncationTooSmall("truncation must be at least 1".into()));
    }
    Ok(())
}

/// `D^M = -i Σ γ^j ∇_{e_j}` in a truncated Fourier basis.
pub fn assemble_dirac(model: &BundleModel, cm: &CliffordModule, n: usize) -> Result<AssembledOperator> {
    check_truncation(n)?;
    match model {
        BundleModel::FlatTorus(t) => torus::assemble(t, &cm.gammas, n, "flat_torus"),
        BundleModel::MappingTorus(m) => Ok(mapping::assemble(m, cm, n)?.dirac),
    }
}

/// `∇*∇ - ⅛ Σ R_{abij}(γ^iγ^j - γ^jγ^i)σ^{ab}` in the basis of [`assemble_dirac`],
/// built from the Fourier symbol of the connection Laplacian.
pub fn bochner_rhs(model: &BundleModel, cm: &CliffordModule, n: usize) -> Result<AssembledOperator> {
    check_truncation(n)?;
    match model {
        BundleModel::FlatTorus(t) => torus::bochner(t, cm, n),
        BundleModel::MappingTorus(m) => Ok(mapping::assemble(m, cm, n)?.bochner),
    }
}
