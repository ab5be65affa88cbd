use alloc::string::String;
use core::fmt;

/// Errors surfaced by model evaluation, simulation, and the numerical
/// verification routines.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A flow evaluation produced a state outside the state space by more
    /// than the repair tolerance; indicates a mis-specified model.
    DomainExit { what: String },
    /// The hazard target was not reached before the internal cap time, so
    /// the jump-time law is not a proper distribution numerically.
    HorizonExhausted { target: f64, reached: f64 },
    /// A thinning proposal observed an intensity above the declared bound.
    ThinningBoundViolated { bound: f64, observed: f64 },
    /// A rejection sampler exceeded its attempt cap.
    SamplerExhausted { attempts: usize },
    /// The jump-count cap was hit before the queried time; the state of the
    /// process past this point is undefined.
    ExplosionSuspected { elapsed: f64, jumps: usize },
    /// Model construction or evaluation violated a structural invariant.
    InvalidModel(String),
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// The ODE integrator exceeded its step budget.
    OdeMaxSteps { t_reached: f64 },
    /// Quadrature over an unbounded parameter space requires a declared
    /// tail-mass envelope.
    ThetaTailMissing,
    /// A quadrature did not converge within its tail/refinement budget.
    QuadratureDiverged { what: String },
    /// Derivatives were requested for a model that supplies neither closed
    /// forms nor a smooth finite-difference path.
    NonDifferentiable(String),
    /// The composed-map horizon was violated: the sequence's total holding
    /// time must stay below the queried time.
    HorizonViolation { elapsed: f64, horizon: f64 },
    /// A drift grid has no points outside the candidate set.
    GridTooSmall,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DomainExit { what } => write!(f, "state left the state space: {what}"),
            CoreError::HorizonExhausted { target, reached } => write!(
                f,
                "hazard target {target} not reached before cap (accumulated {reached})"
            ),
            CoreError::ThinningBoundViolated { bound, observed } => write!(
                f,
                "intensity {observed} exceeds declared thinning bound {bound}"
            ),
            CoreError::SamplerExhausted { attempts } => {
                write!(f, "rejection sampler exhausted {attempts} attempts")
            }
            CoreError::ExplosionSuspected { elapsed, jumps } => write!(
                f,
                "jump-count cap of {jumps} hit at time {elapsed}; explosion suspected"
            ),
            CoreError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            CoreError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::OdeMaxSteps { t_reached } => {
                write!(f, "ODE integrator exceeded step budget at t = {t_reached}")
            }
            CoreError::ThetaTailMissing => write!(
                f,
                "unbounded jump-parameter space without a tail-mass envelope"
            ),
            CoreError::QuadratureDiverged { what } => {
                write!(f, "quadrature failed to converge: {what}")
            }
            CoreError::NonDifferentiable(msg) => write!(f, "non-differentiable model: {msg}"),
            CoreError::HorizonViolation { elapsed, horizon } => write!(
                f,
                "sequence holding times sum to {elapsed}, not below horizon {horizon}"
            ),
            CoreError::GridTooSmall => {
                write!(f, "evaluation grid has no points outside the candidate set")
            }
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
