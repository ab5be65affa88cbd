//! Shared numerical machinery: quadrature, ODE integration, finite
//! differences.

pub mod fd;
pub mod gauss;
pub mod ode;

pub use fd::central_jacobian;
pub use gauss::{adaptive_quadrature, integrate_to_infinity, GaussLegendre};
pub use ode::{OdeSolver, Until};
