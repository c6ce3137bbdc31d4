//! Discrete covariant calculus: the Hamiltonian `H_h`, covariant gradients,
//! the multiplier operator `T_h`, the double commutator `[K, T_h]` and the
//! fractional scale `ℋ^s`.

mod commutator;
mod gradient;
mod hamiltonian;
mod krylov;
mod sobolev;
mod spectral;

pub(crate) use commutator::OffsetTable;
pub use commutator::{apply_t, multiplier_nodes, DoubleCommutator, MultiplierOperator};
pub use gradient::{
    covariant_gradient, hessian_form, radial_tangential_split, tangential_pairwise,
};
pub use hamiltonian::{assemble_hamiltonian, DiscreteHamiltonian};
pub use krylov::{conjugate_gradient, ground_state, lanczos_power_form, CgOutcome};
pub use sobolev::{sobolev_norm, SobolevMethod, SobolevScale, AUTO_DENSE_LIMIT, KRYLOV_TOLERANCE};
pub use spectral::{SpectralDecomposition, DENSE_LIMIT};
