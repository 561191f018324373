//! Radial grids and the five-dimensional radial calculus.

pub mod calculus;
mod function;
mod grid;
pub mod quadrature;
pub mod stencil;

pub use calculus::{
    derivative, divide_by_y, hardy_ratio, inner_l2, inner_sigma, lambda_op, laplacian5, norm_l2,
    norm_rho, norm_sigma, norm_x, norm_y, sup_embedding_check, EmbeddingCheck, NormOptions, XNorm,
};
pub use function::{Parity, RadialFunction};
pub use grid::{GridSpec, RadialGrid, STENCIL_WIDTH};
