//! Jump intensity along the flow.

use alloc::sync::Arc;
use core::fmt;

use crate::state::State;

pub type IntensityFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// The jump rate `phi(x) >= 0`, optionally with a global positive lower
/// bound and a per-start upper bound along the flow (the envelope used by
/// thinning samplers and quadrature truncation).
#[derive(Clone)]
pub struct Intensity {
    eval: IntensityFn,
    lower_bound: Option<f64>,
    flow_bound: Option<IntensityFn>,
}

impl Intensity {
    pub fn new(eval: IntensityFn) -> Self {
        Intensity {
            eval,
            lower_bound: None,
            flow_bound: None,
        }
    }

    pub fn constant(rate: f64) -> Self {
        assert!(rate >= 0.0);
        Intensity {
            eval: Arc::new(move |_x| rate),
            lower_bound: Some(rate),
            flow_bound: Some(Arc::new(move |_x| rate)),
        }
    }

    /// Declares `phi(x) >= bound > 0` everywhere.
    pub fn with_lower_bound(mut self, bound: f64) -> Self {
        assert!(bound > 0.0);
        self.lower_bound = Some(bound);
        self
    }

    /// Declares `sup_{s >= 0} phi(pi_s x) <= flow_bound(x)`.
    pub fn with_flow_bound(mut self, flow_bound: IntensityFn) -> Self {
        self.flow_bound = Some(flow_bound);
        self
    }

    pub fn eval(&self, x: &State) -> f64 {
        let v = (self.eval)(x);
        debug_assert!(v >= 0.0, "intensity must be nonnegative");
        v
    }

    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    pub fn flow_bound(&self, x: &State) -> Option<f64> {
        self.flow_bound.as_ref().map(|b| b(x))
    }
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Intensity")
            .field("lower_bound", &self.lower_bound)
            .field("has_flow_bound", &self.flow_bound.is_some())
            .finish()
    }
}
