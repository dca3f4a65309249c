//! Numerical kernels shared by the compute modules.

pub mod linalg;
pub mod quadrature;
pub mod stats;

pub use quadrature::{gauss_kronrod, tanh_sinh, GaussLegendre, Quad, TanhSinhRule};
pub use stats::{linear_fit, LinearFit, NeumaierSum};

/// Γ(x).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
