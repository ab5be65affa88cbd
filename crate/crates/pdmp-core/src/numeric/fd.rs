//! Central finite differences used as the model-agnostic fallback for all
//! Jacobian assemblies and as the independent oracle they are tested
//! against.

use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

/// Step size for central differences: `max(1e-6, 1e-7 * |x|)`.
pub fn fd_step(scale: f64) -> f64 {
    (1e-7 * scale.abs()).max(1e-6)
}

/// Central-difference Jacobian of `f: R^n -> R^m` at `x`, columns indexed
/// by the perturbed input coordinates.
pub fn central_jacobian<F>(mut f: F, x: &[f64], out_dim: usize) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(out_dim, n);
    let scale = x.iter().fold(0.0f64, |acc, v| acc + v * v).sqrt();
    let h = fd_step(scale);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for col in 0..n {
        let xi = x[col];
        xp[col] = xi + h;
        xm[col] = xi - h;
        let fp = f(&xp);
        let fm = f(&xm);
        debug_assert_eq!(fp.len(), out_dim);
        for row in 0..out_dim {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
        xp[col] = xi;
        xm[col] = xi;
    }
    jac
}
