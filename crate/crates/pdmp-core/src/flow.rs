//! The deterministic part of the process: a semiflow given either in
//! closed form or as the solution operator of `x' = g(x)`.

use alloc::sync::Arc;
use core::fmt;

use nalgebra::DMatrix;

use crate::numeric::{central_jacobian, OdeSolver};
use crate::state::State;

pub type FlowFn = Arc<dyn Fn(&State, f64) -> State + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&State) -> State + Send + Sync>;
pub type FlowJacobianFn = Arc<dyn Fn(&State, f64) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum FlowKind {
    /// `(x, t) -> pi_t x` evaluated exactly.
    ClosedForm(FlowFn),
    /// The flow is defined only through the vector field and integrated
    /// adaptively on demand.
    OdeDefined,
}

/// Semiflow `pi_t` together with its vector field `g` and, when available,
/// the closed-form state Jacobian of `pi_t`.
#[derive(Clone)]
pub struct Semiflow {
    kind: FlowKind,
    field: FieldFn,
    jacobian: Option<FlowJacobianFn>,
    tol: f64,
}

impl Semiflow {
    pub fn closed_form(flow: FlowFn, field: FieldFn) -> Self {
        Semiflow {
            kind: FlowKind::ClosedForm(flow),
            field,
            jacobian: None,
            tol: 1e-8,
        }
    }

    pub fn ode_defined(field: FieldFn, tol: f64) -> Self {
        Semiflow {
            kind: FlowKind::OdeDefined,
            field,
            jacobian: None,
            tol,
        }
    }

    pub fn with_jacobian(mut self, jacobian: FlowJacobianFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, FlowKind::ClosedForm(_))
    }

    /// Integrator tolerance for ODE-defined evaluation; doubles as the
    /// comparison tolerance in flow-consistency checks.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn field(&self, x: &State) -> State {
        (self.field)(x)
    }

    pub fn solver(&self) -> OdeSolver {
        OdeSolver::with_tol(self.tol)
    }

    /// Raw flow evaluation without the state-space repair step; use
    /// [`crate::model::PdmpModel::flow_at`] for the checked version.
    pub fn evaluate(&self, x: &State, t: f64) -> crate::error::Result<State> {
        debug_assert!(t >= 0.0, "flows run forward in time");
        match &self.kind {
            FlowKind::ClosedForm(flow) => Ok(flow(x, t)),
            FlowKind::OdeDefined => {
                let field = &self.field;
                self.solver().integrate(|_t, y| field(y), 0.0, *x, t)
            }
        }
    }

    /// State Jacobian of `pi_t` at `x`: closed form when supplied,
    /// otherwise central differences through the flow map.
    pub fn jacobian_at(&self, x: &State, t: f64) -> crate::error::Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return Ok(j(x, t));
        }
        let d = x.dim();
        let mut failed = false;
        let jac = central_jacobian(
            |v: &[f64]| match self.evaluate(&State::from_slice(v), t) {
                Ok(y) => y.to_vec(),
                Err(_) => {
                    failed = true;
                    alloc::vec![0.0; d]
                }
            },
            x.as_slice(),
            d,
        );
        if failed {
            return Err(crate::error::CoreError::NonDifferentiable(
                alloc::string::String::from("flow evaluation failed inside a difference stencil"),
            ));
        }
        Ok(jac)
    }
}

impl fmt::Debug for Semiflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Semiflow")
            .field(
                "kind",
                &match self.kind {
                    FlowKind::ClosedForm(_) => "ClosedForm",
                    FlowKind::OdeDefined => "OdeDefined",
                },
            )
            .field("tol", &self.tol)
            .finish()
    }
}
