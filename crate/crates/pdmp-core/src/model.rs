//! The process model: state space, semiflow, intensity, and jump family,
//! with hazard accumulation along the flow as the central primitive.

use alloc::string::String;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;

use crate::error::{CoreError, Result};
use crate::flow::{FlowKind, Semiflow};
use crate::intensity::Intensity;
use crate::jump::{JumpFamily, Theta};
use crate::numeric::{GaussLegendre, Until};
use crate::state::{State, StateSpace};

/// Internal cap on the time horizon when searching for a hazard-target
/// crossing. Reaching it means the accumulated hazard stalled, which for a
/// well-posed model cannot happen.
pub const HAZARD_TIME_CAP: f64 = 1e6;

/// Relative accuracy of the in-step refinement of jump times.
const CROSSING_REL_TOL: f64 = 1e-10;

/// A piecewise-deterministic Markov process model given by its local
/// characteristics.
#[derive(Clone)]
pub struct PdmpModel {
    name: String,
    space: StateSpace,
    flow: Semiflow,
    intensity: Intensity,
    jumps: JumpFamily,
}

/// Result of driving the hazard integral to a target level.
#[derive(Clone, Copy, Debug)]
pub struct HazardCrossing {
    /// Time at which the accumulated hazard reaches the target.
    pub time: f64,
    /// Flowed state at that time (the pre-jump state).
    pub state: State,
}

impl PdmpModel {
    pub fn new(
        name: impl Into<String>,
        space: StateSpace,
        flow: Semiflow,
        intensity: Intensity,
        jumps: JumpFamily,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(CoreError::InvalidModel(String::from("empty model name")));
        }
        Ok(PdmpModel {
            name,
            space,
            flow,
            intensity,
            jumps,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn flow(&self) -> &Semiflow {
        &self.flow
    }

    pub fn intensity(&self) -> &Intensity {
        &self.intensity
    }

    pub fn jumps(&self) -> &JumpFamily {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Overrides the flow tolerance (integration accuracy for ODE-defined
    /// flows, repair tolerance scale for closed forms).
    pub fn with_flow_tol(mut self, tol: f64) -> Self {
        self.flow = self.flow.with_tol(tol);
        self
    }

    /// `pi_t x`, repaired back onto the state space when the numerical
    /// solution strays within tolerance, and a domain-exit error beyond it.
    pub fn flow_at(&self, x: &State, t: f64) -> Result<State> {
        if t < 0.0 {
            return Err(CoreError::InvalidConfig(String::from(
                "flow times must be nonnegative",
            )));
        }
        let y = self.flow.evaluate(x, t)?;
        let tol = self.repair_tol(x);
        self.space.repair(&y, tol)
    }

    fn repair_tol(&self, x: &State) -> f64 {
        100.0 * self.flow.tol() * x.norm().max(1.0)
    }

    /// `phi(x)`.
    pub fn intensity_at(&self, x: &State) -> f64 {
        self.intensity.eval(x)
    }

    /// Draws a jump from `x`: returns the post-jump state `T_theta(x)` and
    /// the drawn parameter.
    pub fn jump_from(&self, x: &State, rng: &mut dyn RngCore) -> Result<(State, Theta)> {
        let theta = self.jumps.draw_theta(x, rng)?;
        let y = self.jumps.transform(theta, x);
        if !self.space.contains(&y) {
            return Err(CoreError::DomainExit {
                what: alloc::format!("jump image {:?} of {:?} left the state space", y, x),
            });
        }
        Ok((y, theta))
    }

    /// Accumulated hazard along the flow from `x` over `[0, t]`.
    pub fn cumulative_hazard(&self, x: &State, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.flow.kind() {
            FlowKind::ClosedForm(flow) => {
                let phi = |s: f64| self.intensity.eval(&flow(x, s));
                let y = self.flow.solver().integrate(
                    |s, _y| State::from_slice(&[phi(s)]),
                    0.0,
                    State::from_slice(&[0.0]),
                    t,
                )?;
                Ok(y[0])
            }
            FlowKind::OdeDefined => {
                let aug = self.augmented(x.dim());
                let mut y0 = *x;
                y0.push(0.0);
                let y = self.flow.solver().integrate(aug, 0.0, y0, t)?;
                Ok(y[x.dim()])
            }
        }
    }

    /// `exp(-Lambda_x(t))`, the probability that no jump occurs in `[0, t]`.
    pub fn survival(&self, x: &State, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(x, t)?).exp())
    }

    fn augmented(&self, dim: usize) -> impl Fn(f64, &State) -> State + '_ {
        move |_t, y: &State| {
            let mut x = *y;
            x.pop();
            let mut dy = self.flow.field(&x);
            debug_assert_eq!(dy.dim(), dim);
            dy.push(self.intensity.eval(&x));
            dy
        }
    }

    /// Integrates the hazard until it reaches `target`, refining the
    /// crossing time to relative accuracy `1e-10` within the final step.
    pub fn hazard_crossing(&self, x: &State, target: f64) -> Result<HazardCrossing> {
        debug_assert!(target >= 0.0);
        if target == 0.0 {
            return Ok(HazardCrossing {
                time: 0.0,
                state: *x,
            });
        }
        match self.flow.kind() {
            FlowKind::ClosedForm(flow) => {
                let flow = flow.clone();
                let phi = |s: f64| self.intensity.eval(&flow(x, s));
                let until = self.flow.solver().integrate_until(
                    |s, _y| State::from_slice(&[phi(s)]),
                    0.0,
                    State::from_slice(&[0.0]),
                    HAZARD_TIME_CAP,
                    |_s, y| y[0] >= target,
                )?;
                match until {
                    Until::ReachedEnd { y } => Err(CoreError::HorizonExhausted {
                        target,
                        reached: y[0],
                    }),
                    Until::Stopped {
                        t_lo,
                        y_lo,
                        t_hi,
                        y_hi,
                    } => {
                        let gl = GaussLegendre::new(15);
                        let residual = |t: f64| {
                            y_lo[0] + gl.integrate(t_lo, t, |s| phi(s)) - target
                        };
                        let time = refine_crossing(
                            residual,
                            &phi,
                            t_lo,
                            t_hi,
                            y_hi[0] - target,
                        );
                        let state = self.flow_at(x, time)?;
                        Ok(HazardCrossing { time, state })
                    }
                }
            }
            FlowKind::OdeDefined => {
                let dim = x.dim();
                let aug = self.augmented(dim);
                let mut y0 = *x;
                y0.push(0.0);
                let until = self.flow.solver().integrate_until(
                    &aug,
                    0.0,
                    y0,
                    HAZARD_TIME_CAP,
                    |_s, y| y[dim] >= target,
                )?;
                match until {
                    Until::ReachedEnd { y } => Err(CoreError::HorizonExhausted {
                        target,
                        reached: y[dim],
                    }),
                    Until::Stopped {
                        t_lo,
                        y_lo,
                        t_hi,
                        y_hi,
                    } => {
                        // Each refinement evaluation re-integrates the
                        // augmented system over the (short) final step.
                        let solver = self.flow.solver();
                        let integrate_to = |t: f64| -> State {
                            solver
                                .integrate(&aug, t_lo, y_lo, t)
                                .unwrap_or(y_hi)
                        };
                        let residual = |t: f64| integrate_to(t)[dim] - target;
                        let phi_at = |t: f64| {
                            let mut y = integrate_to(t);
                            y.pop();
                            self.intensity.eval(&y)
                        };
                        let time =
                            refine_crossing(residual, &phi_at, t_lo, t_hi, y_hi[dim] - target);
                        let mut state = integrate_to(time);
                        state.pop();
                        let tol = self.repair_tol(x);
                        let state = self.space.repair(&state, tol)?;
                        Ok(HazardCrossing { time, state })
                    }
                }
            }
        }
    }

    /// Expected holding time `E_x(t_1) = integral_0^inf exp(-Lambda_x(t)) dt`
    /// by adaptive integration of the survival function as an extra flow
    /// coordinate.
    pub fn mean_holding_time(&self, x: &State) -> Result<f64> {
        // Survival below exp(-40) contributes nothing at f64 scale.
        let hazard_stop = 40.0;
        let (hazard, mean, _t) = match self.flow.kind() {
            FlowKind::ClosedForm(flow) => {
                let flow = flow.clone();
                let phi = |s: f64| self.intensity.eval(&flow(x, s));
                let out = self.flow.solver().integrate_until(
                    |s, y: &State| State::from_slice(&[phi(s), (-y[0]).exp()]),
                    0.0,
                    State::from_slice(&[0.0, 0.0]),
                    HAZARD_TIME_CAP,
                    |_s, y| y[0] >= hazard_stop,
                )?;
                match out {
                    Until::ReachedEnd { y } => (y[0], y[1], HAZARD_TIME_CAP),
                    Until::Stopped { t_hi, y_hi, .. } => (y_hi[0], y_hi[1], t_hi),
                }
            }
            FlowKind::OdeDefined => {
                // State layout: [x.., hazard, survival-mass].
                let dim = x.dim();
                let mut y0 = *x;
                y0.push(0.0);
                y0.push(0.0);
                let f = |_s: f64, y: &State| {
                    let base = State::from_slice(&y.as_slice()[..dim]);
                    let mut dy = self.flow.field(&base);
                    dy.push(self.intensity.eval(&base));
                    dy.push((-y[dim]).exp());
                    dy
                };
                let out = self.flow.solver().integrate_until(
                    f,
                    0.0,
                    y0,
                    HAZARD_TIME_CAP,
                    |_s, y| y[dim] >= hazard_stop,
                )?;
                match out {
                    Until::ReachedEnd { y } => (y[dim], y[dim + 1], HAZARD_TIME_CAP),
                    Until::Stopped { t_hi, y_hi, .. } => (y_hi[dim], y_hi[dim + 1], t_hi),
                }
            }
        };
        if hazard < hazard_stop {
            // Hazard stalled before extinguishing the survival mass.
            let tail = match self.intensity.lower_bound() {
                Some(lb) => (-hazard).exp() / lb,
                None => f64::INFINITY,
            };
            if tail > 1e-9 {
                return Err(CoreError::QuadratureDiverged {
                    what: String::from("survival mass did not vanish before the time cap"),
                });
            }
            return Ok(mean + tail);
        }
        Ok(mean)
    }
}

/// Safeguarded Newton iteration on a monotone residual with a known
/// bracket; falls back to bisection whenever a Newton step leaves the
/// bracket.
fn refine_crossing<R, D>(residual: R, derivative: &D, mut lo: f64, mut hi: f64, r_hi: f64) -> f64
where
    R: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    debug_assert!(r_hi >= 0.0);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        if (hi - lo) <= CROSSING_REL_TOL * hi.max(1e-300) {
            break;
        }
        let r = residual(t);
        if r >= 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = derivative(t);
        let newton = if d > 0.0 { t - r / d } else { f64::NAN };
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // Keep the crossing inside the bracket even on early exit.
    t.clamp(lo, hi)
}

impl fmt::Debug for PdmpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdmpModel")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("flow", &self.flow)
            .field("intensity", &self.intensity)
            .field("jumps", &self.jumps)
            .finish()
    }
}
