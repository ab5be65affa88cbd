//! Dynamical systems with random switching embedded as semiflows with
//! jumps: the state is `(x, i)` with `x` following the mode-`i` vector
//! field and jumps replacing the mode at state-dependent rates.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use crate::error::{CoreError, Result};
use crate::flow::Semiflow;
use crate::intensity::Intensity;
use crate::jump::{JumpDerivatives, JumpFamily, Theta, ThetaSampler, ThetaSpace};
use crate::model::PdmpModel;
use crate::state::{State, StateSpace};

pub type ModeField = Arc<dyn Fn(&State) -> State + Send + Sync>;
pub type ModeFlow = Arc<dyn Fn(&State, f64) -> State + Send + Sync>;
pub type ModeFlowJacobian = Arc<dyn Fn(&State, f64) -> DMatrix<f64> + Send + Sync>;
pub type RateFn = Arc<dyn Fn(usize, usize, &State) -> f64 + Send + Sync>;

/// A finite family of vector fields on a common base space plus switching
/// rates `q(i -> j, x)`.
#[derive(Clone)]
pub struct SwitchingSystem {
    pub base_dim: usize,
    pub mode_count: usize,
    /// Per-mode vector fields on the base coordinates.
    pub fields: Vec<ModeField>,
    /// Optional closed-form per-mode flows; when absent the fields are
    /// integrated on demand.
    pub closed_flows: Option<Vec<ModeFlow>>,
    /// Optional closed-form per-mode flow Jacobians (base coordinates).
    pub flow_jacobians: Option<Vec<ModeFlowJacobian>>,
    /// `q(i, j, x)`: rate of switching from mode `i` to mode `j` at base
    /// state `x`; the diagonal is ignored.
    pub rates: RateFn,
    /// Membership predicate for the base space `M`.
    pub base_contains: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    /// Integrator tolerance for ODE-defined mode flows.
    pub ode_tol: f64,
    /// Declared infimum of the total switching rate, when positive.
    pub rate_lower_bound: Option<f64>,
}

fn split_mode(x: &State) -> (State, usize) {
    let mut base = *x;
    let mode = base.pop();
    (base, mode as usize)
}

fn with_mode(base: &State, mode: usize) -> State {
    let mut out = *base;
    out.push(mode as f64);
    out
}

/// Wires a switching system into a single semiflow-with-jumps model on the
/// product space, with the mode stored as the trailing coordinate.
pub fn build_switching_model(name: &str, sys: SwitchingSystem) -> Result<PdmpModel> {
    if sys.mode_count < 2 {
        return Err(CoreError::InvalidModel(String::from(
            "switching needs at least two modes",
        )));
    }
    if sys.fields.len() != sys.mode_count {
        return Err(CoreError::InvalidModel(format!(
            "expected {} mode fields, got {}",
            sys.mode_count,
            sys.fields.len()
        )));
    }
    if let Some(f) = &sys.closed_flows {
        if f.len() != sys.mode_count {
            return Err(CoreError::InvalidModel(String::from(
                "closed flows must cover every mode",
            )));
        }
    }

    let space = StateSpace::with_mode_axis(sys.base_dim, sys.mode_count, sys.base_contains.clone());

    let fields = sys.fields.clone();
    let field = Arc::new(move |x: &State| {
        let (base, mode) = split_mode(x);
        let mut dx = fields[mode](&base);
        dx.push(0.0);
        dx
    });

    let flow = match &sys.closed_flows {
        Some(flows) => {
            let flows = flows.clone();
            Semiflow::closed_form(
                Arc::new(move |x: &State, t: f64| {
                    let (base, mode) = split_mode(x);
                    with_mode(&flows[mode](&base, t), mode)
                }),
                field,
            )
        }
        None => Semiflow::ode_defined(field, sys.ode_tol),
    };
    let flow = match &sys.flow_jacobians {
        Some(jacs) => {
            let jacs = jacs.clone();
            let d = sys.base_dim;
            flow.with_jacobian(Arc::new(move |x: &State, t: f64| {
                let (base, mode) = split_mode(x);
                let jb = jacs[mode](&base, t);
                // Mode coordinate is frozen along the flow.
                let mut full = DMatrix::zeros(d + 1, d + 1);
                full.view_mut((0, 0), (d, d)).copy_from(&jb);
                full[(d, d)] = 1.0;
                full
            }))
        }
        None => flow,
    };

    let rates = sys.rates.clone();
    let mode_count = sys.mode_count;
    let total_rate = move |x: &State| {
        let (base, mode) = split_mode(x);
        let mut total = 0.0;
        for j in 0..mode_count {
            if j != mode {
                total += rates(mode, j, &base);
            }
        }
        total
    };
    let mut intensity = Intensity::new(Arc::new(total_rate.clone()));
    if let Some(lb) = sys.rate_lower_bound {
        intensity = intensity.with_lower_bound(lb);
    }
    // Constant-rate systems have a flat envelope; state-dependent rates
    // would need a per-start bound, which callers can attach afterwards.


    let rates = sys.rates.clone();
    let weight = Arc::new(move |theta: Theta, x: &State| {
        let (base, mode) = split_mode(x);
        let j = theta.as_index();
        if j == mode || j >= mode_count {
            return 0.0;
        }
        let total = total_rate(x);
        if total > 0.0 {
            rates(mode, j, &base) / total
        } else {
            // Unreachable in simulation (no jump fires at rate zero); any
            // normalized choice works, so spread mass evenly.
            1.0 / (mode_count - 1) as f64
        }
    });

    let rates = sys.rates.clone();
    let sampler = ThetaSampler::Exact(Arc::new(move |x: &State, rng: &mut dyn RngCore| {
        let (base, mode) = split_mode(x);
        let mut total = 0.0;
        for j in 0..mode_count {
            if j != mode {
                total += rates(mode, j, &base);
            }
        }
        if total <= 0.0 {
            let mut j = rng.gen_range(0..mode_count - 1);
            if j >= mode {
                j += 1;
            }
            return Theta::Index(j);
        }
        let mut u = rng.gen::<f64>() * total;
        for j in 0..mode_count {
            if j == mode {
                continue;
            }
            u -= rates(mode, j, &base);
            if u <= 0.0 {
                return Theta::Index(j);
            }
        }
        Theta::Index(if mode == mode_count - 1 { 0 } else { mode_count - 1 })
    }));

    let rates = sys.rates.clone();
    let base_dim = sys.base_dim;
    let jumps = JumpFamily::new(
        ThetaSpace::PerState {
            support: Arc::new(move |x: &State| {
                let (base, mode) = split_mode(x);
                (0..mode_count)
                    .filter(|&j| j != mode && rates(mode, j, &base) > 0.0)
                    .collect()
            }),
        },
        Arc::new(move |theta: Theta, x: &State| {
            let (base, _mode) = split_mode(x);
            with_mode(&base, theta.as_index())
        }),
        weight,
        sampler,
    )
    .with_derivatives(JumpDerivatives {
        d_dx: Arc::new(move |_theta, _x| {
            // Mode replacement is the identity on the base coordinates and
            // kills the mode coordinate.
            let mut m = DMatrix::zeros(base_dim + 1, base_dim + 1);
            for i in 0..base_dim {
                m[(i, i)] = 1.0;
            }
            m
        }),
        d_dtheta: None,
    });

    PdmpModel::new(name, space, flow, intensity, jumps)
}

/// Constant-rate birth-death process on modes `0..=max_mode` embedded as a
/// switching system over a dormant one-dimensional base state.
pub fn birth_death(birth: f64, death: f64, max_mode: usize) -> Result<PdmpModel> {
    if birth <= 0.0 || death <= 0.0 {
        return Err(CoreError::InvalidModel(String::from(
            "birth and death rates must be positive",
        )));
    }
    let modes = max_mode + 1;
    let fields: Vec<ModeField> = (0..modes)
        .map(|_| Arc::new(|x: &State| State::zeros(x.dim())) as ModeField)
        .collect();
    let flows: Vec<ModeFlow> = (0..modes)
        .map(|_| Arc::new(|x: &State, _t: f64| *x) as ModeFlow)
        .collect();
    let sys = SwitchingSystem {
        base_dim: 1,
        mode_count: modes,
        fields,
        closed_flows: Some(flows),
        flow_jacobians: None,
        rates: Arc::new(move |i: usize, j: usize, _x: &State| {
            if j == i + 1 && i < max_mode {
                birth
            } else if i > 0 && j == i - 1 {
                death
            } else {
                0.0
            }
        }),
        base_contains: Arc::new(|_x: &State| true),
        ode_tol: 1e-8,
        rate_lower_bound: Some(birth.min(death)),
    };
    build_switching_model("birth-death", sys)
}

/// Stationary law of the constant-rate birth-death chain truncated at
/// `max_mode`: proportional to `(birth/death)^i`.
pub fn birth_death_stationary(birth: f64, death: f64, max_mode: usize) -> Vec<f64> {
    let rho = birth / death;
    let mut masses: Vec<f64> = (0..=max_mode).map(|i| libm::pow(rho, i as f64)).collect();
    let total: f64 = masses.iter().sum();
    for m in &mut masses {
        *m /= total;
    }
    masses
}

/// Two modes with constant drift fields on the plane and constant
/// switching rates; the minimal smooth example for the reachability rank
/// checks.
pub fn two_mode_drift(
    field_a: [f64; 2],
    field_b: [f64; 2],
    rate_ab: f64,
    rate_ba: f64,
) -> Result<PdmpModel> {
    if rate_ab <= 0.0 || rate_ba <= 0.0 {
        return Err(CoreError::InvalidModel(String::from(
            "switching rates must be positive",
        )));
    }
    let mk_field = |v: [f64; 2]| -> ModeField { Arc::new(move |_x: &State| State::from_slice(&v)) };
    let mk_flow = |v: [f64; 2]| -> ModeFlow {
        Arc::new(move |x: &State, t: f64| State::from_slice(&[x[0] + t * v[0], x[1] + t * v[1]]))
    };
    let mk_jac = || -> ModeFlowJacobian { Arc::new(|_x: &State, _t: f64| DMatrix::identity(2, 2)) };
    let sys = SwitchingSystem {
        base_dim: 2,
        mode_count: 2,
        fields: alloc::vec![mk_field(field_a), mk_field(field_b)],
        closed_flows: Some(alloc::vec![mk_flow(field_a), mk_flow(field_b)]),
        flow_jacobians: Some(alloc::vec![mk_jac(), mk_jac()]),
        rates: Arc::new(move |i: usize, _j: usize, _x: &State| {
            if i == 0 {
                rate_ab
            } else {
                rate_ba
            }
        }),
        base_contains: Arc::new(|_x: &State| true),
        ode_tol: 1e-8,
        rate_lower_bound: Some(rate_ab.min(rate_ba)),
    };
    build_switching_model("switch2", sys)
}
