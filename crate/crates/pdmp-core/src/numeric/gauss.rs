//! Gauss-Legendre quadrature with composite panels and an adaptive
//! bisection driver for smooth one-dimensional integrands.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};

/// Nodes and weights of an n-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial;
    /// accurate to machine precision for the orders used here (n <= 64).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1 && n <= 64);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Tricomi-style initial guess for the i-th positive root.
            let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node/weight pairs mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut sum = 0.0;
        for (x, w) in self.mapped(a, b) {
            sum += w * f(x);
        }
        sum
    }

    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            sum += self.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f);
        }
        sum
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive quadrature on `[a, b]` by panel bisection, comparing a 10- and
/// a 20-point rule per panel. Intended for smooth integrands.
pub fn adaptive_quadrature<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let lo = GaussLegendre::new(10);
    let hi = GaussLegendre::new(20);
    let mut total = 0.0;
    // Stack of pending panels with per-panel tolerance share.
    let mut stack = alloc::vec![(a, b, tol.max(1e-15), 0u32)];
    while let Some((a, b, tol, depth)) = stack.pop() {
        let coarse = lo.integrate(a, b, &mut f);
        let fine = hi.integrate(a, b, &mut f);
        if (fine - coarse).abs() <= tol || (b - a).abs() < 1e-14 {
            total += fine;
        } else if depth >= 48 {
            return Err(CoreError::QuadratureDiverged {
                what: alloc::format!("panel [{a}, {b}] did not converge"),
            });
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m, 0.5 * tol, depth + 1));
            stack.push((m, b, 0.5 * tol, depth + 1));
        }
    }
    Ok(total)
}

/// Integrates `f` over `[0, oo)` by summing adaptive panels over doubling
/// windows until the increment falls below `tol`. The integrand must decay;
/// divergence is reported once the window cap is hit.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut a = 0.0;
    let mut width = 1.0;
    for _ in 0..64 {
        let inc = adaptive_quadrature(&mut f, a, a + width, tol * 0.25)?;
        total += inc;
        if inc.abs() < tol * 0.5 && width >= 8.0 {
            return Ok(total);
        }
        a += width;
        width *= 2.0;
    }
    Err(CoreError::QuadratureDiverged {
        what: alloc::string::String::from("semi-infinite integral did not converge"),
    })
}
