//! Pure-jump shift model on the integers with superlinear rates: holding
//! times sum to a finite value along the orbit, so the process explodes in
//! finite time almost surely. Used to exercise the explosion guard.

use alloc::sync::Arc;

use rand::RngCore;

use crate::error::Result;
use crate::flow::Semiflow;
use crate::intensity::Intensity;
use crate::jump::{JumpFamily, Theta, ThetaSampler, ThetaSpace};
use crate::model::PdmpModel;
use crate::state::{ReferenceMeasure, State, StateSpace};

/// Rate function and shift of the integer jump model.
#[derive(Clone)]
pub struct KatoShiftParams {
    /// Jump rate at integer state `k`; the reciprocal sums must converge
    /// along the forward orbit for the model to explode.
    pub rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Declared infimum of the rate over the state set.
    pub rate_floor: f64,
}

impl Default for KatoShiftParams {
    fn default() -> Self {
        KatoShiftParams {
            rate: Arc::new(|k: f64| k * k + 1.0),
            rate_floor: 1.0,
        }
    }
}

/// Expected explosion time from `start`, truncated to `terms` states of the
/// forward orbit: the sum of mean holding times `1/rate(k)`.
pub fn expected_explosion_time(params: &KatoShiftParams, start: i64, terms: usize) -> f64 {
    let mut total = 0.0;
    for j in 0..terms {
        total += 1.0 / (params.rate)((start + j as i64) as f64);
    }
    total
}

pub fn build_kato_shift(params: KatoShiftParams) -> Result<PdmpModel> {
    let rate = params.rate.clone();

    let space = StateSpace::new(
        1,
        ReferenceMeasure::Counting,
        Arc::new(|x: &State| x[0] == libm::floor(x[0])),
    );

    // The flow is trivial: states sit still between jumps.
    let flow = Semiflow::closed_form(
        Arc::new(|x: &State, _t: f64| *x),
        Arc::new(|x: &State| State::zeros(x.dim())),
    );

    let mut intensity = Intensity::new(Arc::new(move |x: &State| rate(x[0])));
    if params.rate_floor > 0.0 {
        intensity = intensity.with_lower_bound(params.rate_floor);
    }

    let jumps = JumpFamily::new(
        ThetaSpace::Finite { count: 1 },
        Arc::new(|_theta: Theta, x: &State| State::from_slice(&[x[0] + 1.0])),
        Arc::new(|theta: Theta, _x: &State| if theta.as_index() == 0 { 1.0 } else { 0.0 }),
        ThetaSampler::Exact(Arc::new(|_x: &State, _rng: &mut dyn RngCore| Theta::Index(0))),
    );

    PdmpModel::new("kato", space, flow, intensity, jumps)
}
