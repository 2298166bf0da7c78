//! Quadrature and kernel assembly for axisymmetric boundary integrals.

pub mod assemble;
pub mod elliptic;
pub mod gauss;
pub mod kernel;
pub mod rule;

pub use assemble::{assemble_operator, assemble_operators, azimuthal_reduce, single_layer_at, KernelKind, OperatorSet, ReducedKernel, TargetPoint};
pub use rule::{build_singular_rule, SingularRule};
