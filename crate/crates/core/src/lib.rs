//! Finite-difference and operator-splitting schemes for two-dimensional
//! hyperbolic (relaxational) heat conduction on a rectangle.
//!
//! The temperature `u` lives at the interior nodes of a uniform grid and the
//! two heat-flux components live at the face midpoints of their own
//! direction. On top of the staggered difference operators the crate
//! provides three-level schemes for the damped wave form of the model,
//! schemes for the temperature/flux system, locally one-dimensional
//! splittings that only ever invert tridiagonal line systems, and the
//! energy monitors and convergence studies used to verify all of them.
//!
//! Every numerical routine is generic over the scalar type through
//! [`Real`]; the `*64` aliases below fix it to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod operators;
pub mod scalar;
pub mod schemes;

pub use error::{HhcError, Result};
pub use grid::{Direction, FluxField, GridSpec, ScalarField, StaggeredGrid};
pub use scalar::Real;

pub type Grid64 = grid::StaggeredGrid<f64>;
pub type GridSpec64 = grid::GridSpec<f64>;
pub type ScalarField64 = grid::ScalarField<f64>;
pub type FluxField64 = grid::FluxField<f64>;
pub type Coefficients64 = operators::Coefficients<f64>;
pub type Problem64 = schemes::Problem<f64>;
pub type SchemeConfig64 = schemes::SchemeConfig<f64>;

pub type Grid32 = grid::StaggeredGrid<f32>;
pub type ScalarField32 = grid::ScalarField<f32>;
