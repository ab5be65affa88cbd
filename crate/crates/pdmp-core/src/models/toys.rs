//! One-dimensional toy models with analytically known behavior, used as
//! oracles for the drift and invariant-density machinery.

use alloc::sync::Arc;

use rand::RngCore;

use crate::error::Result;
use crate::flow::Semiflow;
use crate::intensity::Intensity;
use crate::jump::{JumpFamily, Theta, ThetaSampler, ThetaSpace};
use crate::model::PdmpModel;
use crate::state::{State, StateSpace};

/// Pure-jump halving model: no flow, constant rate, deterministic jumps
/// `x -> x/2`. The expected one-step change of `V(x) = x` is exactly
/// `-x/2`, which pins the drift quadrature.
pub fn build_halving(rate: f64) -> Result<PdmpModel> {
    let flow = Semiflow::closed_form(
        Arc::new(|x: &State, _t: f64| *x),
        Arc::new(|x: &State| State::zeros(x.dim())),
    );
    let jumps = JumpFamily::new(
        ThetaSpace::Finite { count: 1 },
        Arc::new(|_theta: Theta, x: &State| State::from_slice(&[0.5 * x[0]])),
        Arc::new(|theta: Theta, _x: &State| if theta.as_index() == 0 { 1.0 } else { 0.0 }),
        ThetaSampler::Exact(Arc::new(|_x: &State, _rng: &mut dyn RngCore| Theta::Index(0))),
    );
    PdmpModel::new(
        "halving",
        StateSpace::nonneg_orthant(1),
        flow,
        Intensity::constant(rate),
        jumps,
    )
}

/// Growth-collapse model: unit drift upward, collapse to half at rate
/// `phi(x) = x`. The embedded chain is `X' = (X + tau)/2` with survival
/// `exp(-x t - t^2/2)`, which admits an exact kernel discretization.
pub fn build_growth_collapse() -> Result<PdmpModel> {
    let flow = Semiflow::closed_form(
        Arc::new(|x: &State, t: f64| State::from_slice(&[x[0] + t])),
        Arc::new(|x: &State| {
            let mut one = State::zeros(x.dim());
            one[0] = 1.0;
            one
        }),
    );
    let jumps = JumpFamily::new(
        ThetaSpace::Finite { count: 1 },
        Arc::new(|_theta: Theta, x: &State| State::from_slice(&[0.5 * x[0]])),
        Arc::new(|theta: Theta, _x: &State| if theta.as_index() == 0 { 1.0 } else { 0.0 }),
        ThetaSampler::Exact(Arc::new(|_x: &State, _rng: &mut dyn RngCore| Theta::Index(0))),
    );
    PdmpModel::new(
        "growth-collapse",
        StateSpace::nonneg_orthant(1),
        flow,
        Intensity::new(Arc::new(|x: &State| x[0])),
        jumps,
    )
}

/// Survival function of the first jump of the growth-collapse model:
/// `P(t_1 > t | X_0 = x) = exp(-x t - t^2 / 2)`.
pub fn growth_collapse_survival(x: f64, t: f64) -> f64 {
    libm::exp(-x * t - 0.5 * t * t)
}
