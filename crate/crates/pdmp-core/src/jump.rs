//! The jump family: a parametrized set of transformations `T_theta`, the
//! probability weights `p_theta(x)` with respect to the parameter measure,
//! and samplers for the post-jump parameter.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{CoreError, Result};
use crate::state::State;

/// A jump parameter: either a point of a real interval (Lebesgue reference
/// measure) or an index into a countable set (counting measure).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theta {
    Real(f64),
    Index(usize),
}

impl Theta {
    pub fn as_real(&self) -> f64 {
        match self {
            Theta::Real(v) => *v,
            Theta::Index(i) => *i as f64,
        }
    }

    pub fn as_index(&self) -> usize {
        match self {
            Theta::Index(i) => *i,
            Theta::Real(_) => panic!("expected a discrete jump parameter"),
        }
    }
}

/// Upper envelope for the parameter mass beyond a truncation point:
/// `sup_x  integral_{theta > c} p_theta(x) nu(dtheta) <= tail(c)`.
pub type TailBound = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Descriptor of the parameter space and its reference measure.
#[derive(Clone)]
pub enum ThetaSpace {
    /// An interval of the real line with Lebesgue measure. `hi` may be
    /// infinite, in which case quadrature requires `tail`.
    Interval {
        lo: f64,
        hi: f64,
        tail: Option<TailBound>,
    },
    /// Indices `0..count` with counting measure.
    Finite { count: usize },
    /// A countable set whose per-state support is finite and supplied on
    /// demand (switching systems with local moves).
    PerState {
        support: Arc<dyn Fn(&State) -> Vec<usize> + Send + Sync>,
    },
}

impl ThetaSpace {
    pub fn half_line(tail: TailBound) -> Self {
        ThetaSpace::Interval {
            lo: 0.0,
            hi: f64::INFINITY,
            tail: Some(tail),
        }
    }

    /// Dimension of the continuous parameter component (0 for countable
    /// spaces); this is the number of parameter columns in Jacobians.
    pub fn continuous_dim(&self) -> usize {
        match self {
            ThetaSpace::Interval { .. } => 1,
            _ => 0,
        }
    }
}

impl fmt::Debug for ThetaSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSpace::Interval { lo, hi, tail } => f
                .debug_struct("Interval")
                .field("lo", lo)
                .field("hi", hi)
                .field("has_tail", &tail.is_some())
                .finish(),
            ThetaSpace::Finite { count } => f.debug_struct("Finite").field("count", count).finish(),
            ThetaSpace::PerState { .. } => f.write_str("PerState"),
        }
    }
}

pub type TransformFn = Arc<dyn Fn(Theta, &State) -> State + Send + Sync>;
pub type WeightFn = Arc<dyn Fn(Theta, &State) -> f64 + Send + Sync>;
pub type ThetaSampleFn = Arc<dyn Fn(&State, &mut dyn RngCore) -> Theta + Send + Sync>;

/// How the post-jump parameter is drawn.
#[derive(Clone)]
pub enum ThetaSampler {
    /// A sampler whose output is exactly `p_.(x) nu`.
    Exact(ThetaSampleFn),
    /// Accept-reject against a proposal with density `q` (w.r.t. `nu`) and
    /// a bound `p_theta(x) <= bound * q(theta, x)`. The attempt cap turns a
    /// silent loop into an explicit error.
    Rejection {
        proposal: ThetaSampleFn,
        proposal_density: WeightFn,
        bound: f64,
        max_attempts: usize,
    },
}

pub const DEFAULT_REJECTION_CAP: usize = 1_000_000;

/// Closed-form derivatives of the jump transformation, used by the rank
/// conditions; finite differences are the fallback when absent.
#[derive(Clone)]
pub struct JumpDerivatives {
    /// `x -> dT_theta(x)/dx`, full state dimension.
    pub d_dx: Arc<dyn Fn(Theta, &State) -> DMatrix<f64> + Send + Sync>,
    /// `x -> dT_theta(x)/dtheta`, present only for continuous parameters.
    pub d_dtheta: Option<Arc<dyn Fn(Theta, &State) -> DVector<f64> + Send + Sync>>,
}

/// The family `(Theta, nu, T_theta, p_theta)` defining the jump kernel.
#[derive(Clone)]
pub struct JumpFamily {
    space: ThetaSpace,
    transform: TransformFn,
    weight: WeightFn,
    sampler: ThetaSampler,
    derivatives: Option<JumpDerivatives>,
}

impl JumpFamily {
    pub fn new(
        space: ThetaSpace,
        transform: TransformFn,
        weight: WeightFn,
        sampler: ThetaSampler,
    ) -> Self {
        JumpFamily {
            space,
            transform,
            weight,
            sampler,
            derivatives: None,
        }
    }

    pub fn with_derivatives(mut self, derivatives: JumpDerivatives) -> Self {
        self.derivatives = Some(derivatives);
        self
    }

    pub fn space(&self) -> &ThetaSpace {
        &self.space
    }

    pub fn derivatives(&self) -> Option<&JumpDerivatives> {
        self.derivatives.as_ref()
    }

    /// `T_theta(x)`.
    pub fn transform(&self, theta: Theta, x: &State) -> State {
        (self.transform)(theta, x)
    }

    /// `p_theta(x)`, the parameter density w.r.t. `nu`.
    pub fn weight(&self, theta: Theta, x: &State) -> f64 {
        (self.weight)(theta, x)
    }

    /// Draws `theta ~ p_.(x) nu`.
    pub fn draw_theta(&self, x: &State, rng: &mut dyn RngCore) -> Result<Theta> {
        match &self.sampler {
            ThetaSampler::Exact(s) => Ok(s(x, rng)),
            ThetaSampler::Rejection {
                proposal,
                proposal_density,
                bound,
                max_attempts,
            } => {
                for _ in 0..*max_attempts {
                    let theta = proposal(x, rng);
                    let q = proposal_density(theta, x);
                    let p = (self.weight)(theta, x);
                    if q <= 0.0 {
                        continue;
                    }
                    let accept = p / (bound * q);
                    debug_assert!(
                        accept <= 1.0 + 1e-9,
                        "rejection bound is not an envelope at {theta:?}"
                    );
                    if rng.gen::<f64>() < accept {
                        return Ok(theta);
                    }
                }
                Err(CoreError::SamplerExhausted {
                    attempts: *max_attempts,
                })
            }
        }
    }
}

impl fmt::Debug for JumpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpFamily")
            .field("space", &self.space)
            .field("has_derivatives", &self.derivatives.is_some())
            .finish()
    }
}
