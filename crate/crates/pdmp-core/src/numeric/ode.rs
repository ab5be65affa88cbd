//! Adaptive Dormand-Prince 5(4) integration for the flows and for hazard
//! accumulation along them.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::state::State;

// Dormand-Prince tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row (FSAL); 4th-order weights below.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive explicit Runge-Kutta 5(4) solver.
#[derive(Clone, Copy, Debug)]
pub struct OdeSolver {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeSolver {
    fn default() -> Self {
        OdeSolver {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl OdeSolver {
    pub fn with_tol(rel_tol: f64) -> Self {
        OdeSolver {
            rel_tol,
            abs_tol: rel_tol * 1e-4,
            ..OdeSolver::default()
        }
    }

    /// Integrates `y' = f(t, y)` from `(t0, y0)` to `t1 >= t0`.
    pub fn integrate<F>(&self, f: F, t0: f64, y0: State, t1: f64) -> Result<State>
    where
        F: FnMut(f64, &State) -> State,
    {
        let end = self.drive(f, t0, y0, t1, |_, _| false)?;
        Ok(end.y)
    }

    /// Steps forward until `stop(t, y)` becomes true at a step endpoint or
    /// `t_cap` is reached. On a stop, the step that triggered it is
    /// reported as a bracket for refinement by the caller.
    pub fn integrate_until<F, G>(
        &self,
        f: F,
        t0: f64,
        y0: State,
        t_cap: f64,
        stop: G,
    ) -> Result<Until>
    where
        F: FnMut(f64, &State) -> State,
        G: FnMut(f64, &State) -> bool,
    {
        let end = self.drive(f, t0, y0, t_cap, stop)?;
        Ok(match end.bracket {
            Some((t_lo, y_lo)) => Until::Stopped {
                t_lo,
                y_lo,
                t_hi: end.t,
                y_hi: end.y,
            },
            None => Until::ReachedEnd { y: end.y },
        })
    }

    fn drive<F, G>(&self, mut f: F, t0: f64, y0: State, t1: f64, mut stop: G) -> Result<Drive>
    where
        F: FnMut(f64, &State) -> State,
        G: FnMut(f64, &State) -> bool,
    {
        debug_assert!(t1 >= t0);
        if t1 == t0 {
            return Ok(Drive {
                t: t0,
                y: y0,
                bracket: None,
            });
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = self.initial_step(t0, &y0, &k1, t1);
        let mut k = [State::zeros(y0.dim()); 7];
        for _ in 0..self.max_steps {
            h = h.min(t1 - t).min(self.h_max);
            k[0] = k1;
            for stage in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage - 1][j];
                    if a != 0.0 {
                        ys = ys.scaled_add(h * a, kj);
                    }
                }
                k[stage] = f(t + C[stage] * h, &ys);
            }
            // k[6] is f at the 5th-order solution (FSAL): y5 uses A[5] row.
            let mut y5 = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let a = A[5][j];
                if a != 0.0 {
                    y5 = y5.scaled_add(h * a, kj);
                }
            }
            let mut y4 = y;
            for (j, kj) in k.iter().enumerate() {
                if B4[j] != 0.0 {
                    y4 = y4.scaled_add(h * B4[j], kj);
                }
            }
            // scaled RMS error
            let mut err = 0.0;
            for i in 0..y.dim() {
                let sc = self.abs_tol + self.rel_tol * y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4[i]) / sc;
                err += e * e;
            }
            err = (err / y.dim() as f64).sqrt();
            if err <= 1.0 || h <= 1e-14 * t1.abs().max(1.0) {
                let t_new = t + h;
                if stop(t_new, &y5) {
                    return Ok(Drive {
                        t: t_new,
                        y: y5,
                        bracket: Some((t, y)),
                    });
                }
                t = t_new;
                y = y5;
                k1 = k[6];
                if t >= t1 {
                    return Ok(Drive {
                        t,
                        y,
                        bracket: None,
                    });
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        }
        Err(CoreError::OdeMaxSteps { t_reached: t })
    }

    fn initial_step(&self, t0: f64, y0: &State, f0: &State, t1: f64) -> f64 {
        let sc = self.abs_tol + self.rel_tol * y0.norm();
        let d0 = y0.norm() / sc;
        let d1 = f0.norm() / sc;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(t1 - t0).min(self.h_max).max(1e-12)
    }
}

struct Drive {
    t: f64,
    y: State,
    bracket: Option<(f64, State)>,
}

/// Outcome of [`OdeSolver::integrate_until`].
#[derive(Clone, Copy, Debug)]
pub enum Until {
    /// The stop predicate fired within the step `[t_lo, t_hi]`.
    Stopped {
        t_lo: f64,
        y_lo: State,
        t_hi: f64,
        y_hi: State,
    },
    /// Integration reached `t_cap` without the predicate firing.
    ReachedEnd { y: State },
}
