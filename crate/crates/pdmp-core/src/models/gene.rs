//! Two-dimensional gene-expression model with bursting: mRNA (`x1`) and
//! protein (`x2`) concentrations decay linearly between jumps, translation
//! couples them, and jumps add an exponentially distributed burst of mRNA
//! at a Hill-function rate driven by the protein level.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, Exp};

use crate::error::{CoreError, Result};
use crate::flow::Semiflow;
use crate::intensity::Intensity;
use crate::jump::{JumpDerivatives, JumpFamily, Theta, ThetaSampler, ThetaSpace};
use crate::model::PdmpModel;
use crate::state::{State, StateSpace};

/// Parameters of the bursting gene-expression model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneExpressionParams {
    /// mRNA degradation rate; must exceed `gamma2`.
    pub gamma1: f64,
    /// Protein degradation rate.
    pub gamma2: f64,
    /// Translation rate.
    pub beta2: f64,
    /// Mean burst size of the exponential burst density.
    pub burst_mean: f64,
    /// Hill-function coefficients of the transcription intensity
    /// `(kappa1 + kappa2 * x2^n) / (1 + kappa3 * x2^n)`.
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    /// Hill exponent.
    pub hill_n: f64,
}

impl Default for GeneExpressionParams {
    fn default() -> Self {
        GeneExpressionParams {
            gamma1: 2.0,
            gamma2: 1.0,
            beta2: 1.0,
            burst_mean: 1.0,
            kappa1: 1.0,
            kappa2: 1.0,
            kappa3: 1.0,
            hill_n: 1.0,
        }
    }
}

impl GeneExpressionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidModel(msg));
        if !(self.gamma1 > self.gamma2) {
            return bad(format!(
                "requires gamma1 > gamma2, got {} <= {}",
                self.gamma1, self.gamma2
            ));
        }
        if self.gamma2 <= 0.0 || self.beta2 <= 0.0 || self.burst_mean <= 0.0 {
            return bad(String::from("rates and burst mean must be positive"));
        }
        if self.kappa1 <= 0.0 || self.kappa2 < 0.0 || self.kappa3 < 0.0 || self.hill_n <= 0.0 {
            return bad(String::from(
                "Hill coefficients must satisfy kappa1 > 0, kappa2, kappa3 >= 0, n > 0",
            ));
        }
        if self.kappa3 == 0.0 {
            if self.hill_n > 1.0 {
                return bad(String::from("with kappa3 = 0 the exponent must satisfy n <= 1"));
            }
            let growth = self.burst_mean * self.beta2 * self.kappa2 / (self.gamma1 - self.gamma2);
            if !(self.gamma2 > growth) {
                return bad(format!(
                    "with kappa3 = 0 stability requires gamma2 > {growth}"
                ));
            }
        }
        Ok(())
    }

    /// Cross-coupling coefficient of the flow: the protein response at
    /// time `t` to a unit of mRNA at time zero.
    pub fn cross_coupling(&self, t: f64) -> f64 {
        self.beta2 / (self.gamma1 - self.gamma2) * ((-self.gamma2 * t).exp() - (-self.gamma1 * t).exp())
    }

    /// Transcription intensity as a function of the protein level.
    pub fn hill_intensity(&self, x2: f64) -> f64 {
        let u = x2.max(0.0).powf(self.hill_n);
        (self.kappa1 + self.kappa2 * u) / (1.0 + self.kappa3 * u)
    }

    /// Global intensity bounds `(inf phi, sup phi)`; the supremum is
    /// infinite when `kappa3 = 0` and `kappa2 > 0`.
    pub fn intensity_bounds(&self) -> (f64, f64) {
        if self.kappa3 > 0.0 {
            let limit = self.kappa2 / self.kappa3;
            (self.kappa1.min(limit), self.kappa1.max(limit))
        } else if self.kappa2 == 0.0 {
            (self.kappa1, self.kappa1)
        } else {
            (self.kappa1, f64::INFINITY)
        }
    }

    /// Upper bound for the protein coordinate along the flow started at
    /// `x`: `x2 + x1 * beta2 / (gamma1 - gamma2)`.
    pub fn protein_flow_bound(&self, x: &State) -> f64 {
        x[1] + x[0] * self.beta2 / (self.gamma1 - self.gamma2)
    }

    /// The default Lyapunov function used by the drift checks:
    /// `V(x) = x1 * beta2 / (gamma1 - gamma2) + x2`.
    pub fn lyapunov(&self) -> Arc<dyn Fn(&State) -> f64 + Send + Sync> {
        let scale = self.beta2 / (self.gamma1 - self.gamma2);
        Arc::new(move |x: &State| scale * x[0] + x[1])
    }

    /// Drift integrand `W(t, x)`: the expected one-step change of the
    /// Lyapunov function decomposes as `integral W(t, x) exp(-Lambda_x(t)) dt`.
    pub fn drift_envelope(&self, t: f64, x: &State) -> f64 {
        let scale = self.beta2 / (self.gamma1 - self.gamma2);
        let v = scale * x[0] + x[1];
        let flowed = flow_map(self, x, t);
        self.burst_mean * scale * self.hill_intensity(flowed[1])
            - v * self.gamma2 * (-self.gamma2 * t).exp()
    }
}

fn flow_map(p: &GeneExpressionParams, x: &State, t: f64) -> State {
    let x1 = x[0] * (-p.gamma1 * t).exp();
    let x2 = x[1] * (-p.gamma2 * t).exp() + x[0] * p.cross_coupling(t);
    State::from_slice(&[x1, x2])
}

/// One-step Lyapunov drift `E[V(X_1)] - V(x)` through the scalar
/// reduction `integral_0^inf W(t, x) exp(-Lambda_x(t)) dt`, integrated as
/// an augmented ODE. Independent of the tensor quadrature route in the
/// drift module.
pub fn drift_closed_form(params: &GeneExpressionParams, x: &State) -> crate::error::Result<f64> {
    use crate::numeric::{OdeSolver, Until};
    let p = *params;
    let x0 = *x;
    // coords: [hazard, integral of W e^{-hazard}]
    let f = move |t: f64, y: &State| {
        let flowed = flow_map(&p, &x0, t);
        let rate = p.hill_intensity(flowed[1]);
        State::from_slice(&[rate, p.drift_envelope(t, &x0) * (-y[0]).exp()])
    };
    let solver = OdeSolver::with_tol(1e-10);
    let out = solver.integrate_until(
        f,
        0.0,
        State::from_slice(&[0.0, 0.0]),
        1e6,
        |_t, y| y[0] >= 40.0,
    )?;
    Ok(match out {
        Until::ReachedEnd { y } => y[1],
        Until::Stopped { y_hi, .. } => y_hi[1],
    })
}

/// Builds the gene-expression model with closed-form flow, exact
/// exponential burst sampling, and closed-form derivatives for the rank
/// conditions.
pub fn build_gene_model(params: GeneExpressionParams) -> Result<PdmpModel> {
    params.validate()?;
    let p = params;

    let flow = Semiflow::closed_form(
        Arc::new(move |x: &State, t: f64| flow_map(&p, x, t)),
        Arc::new(move |x: &State| {
            State::from_slice(&[-p.gamma1 * x[0], -p.gamma2 * x[1] + p.beta2 * x[0]])
        }),
    )
    .with_jacobian(Arc::new(move |_x: &State, t: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (-p.gamma1 * t).exp(),
                0.0,
                p.cross_coupling(t),
                (-p.gamma2 * t).exp(),
            ],
        )
    }));

    let (phi_lower, _phi_upper) = p.intensity_bounds();
    let intensity = Intensity::new(Arc::new(move |x: &State| p.hill_intensity(x[1])))
        .with_lower_bound(phi_lower)
        .with_flow_bound(Arc::new(move |x: &State| {
            // phi is monotone in x2; the flow keeps x2 in
            // [0, protein_flow_bound(x)], so the envelope is attained at an
            // endpoint of that interval.
            let hi = p.protein_flow_bound(x);
            p.hill_intensity(0.0).max(p.hill_intensity(hi))
        }));

    let b = p.burst_mean;
    let burst = Exp::new(1.0 / b).expect("positive burst rate");
    let jumps = JumpFamily::new(
        ThetaSpace::half_line(Arc::new(move |c: f64| (-c / b).exp())),
        Arc::new(|theta: Theta, x: &State| {
            State::from_slice(&[theta.as_real() + x[0], x[1]])
        }),
        Arc::new(move |theta: Theta, _x: &State| {
            let t = theta.as_real();
            if t <= 0.0 {
                0.0
            } else {
                (-t / b).exp() / b
            }
        }),
        ThetaSampler::Exact(Arc::new(move |_x: &State, rng: &mut dyn RngCore| {
            Theta::Real(burst.sample(rng))
        })),
    )
    .with_derivatives(JumpDerivatives {
        d_dx: Arc::new(|_theta, _x| DMatrix::identity(2, 2)),
        d_dtheta: Some(Arc::new(|_theta, _x| DVector::from_column_slice(&[1.0, 0.0]))),
    });

    PdmpModel::new(
        "gene",
        StateSpace::nonneg_orthant(2),
        flow,
        intensity,
        jumps,
    )
}
