//! Composed jump maps, their weights, and deterministic quadrature oracles
//! for the embedded-chain kernel and its second iterate. The oracles are
//! the ground truth that Monte-Carlo estimates are tested against.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::density::{DensityEstimate, GridSpec};
use crate::error::{CoreError, Result};
use crate::jump::{Theta, ThetaSpace};
use crate::model::PdmpModel;
use crate::numeric::GaussLegendre;
use crate::state::State;

/// A deterministic composition of flow-then-jump maps: apply
/// `T_theta(pi_s .)` for each `(theta, s)` of the sequence in order.
#[derive(Clone, Debug)]
pub struct ComposedJumpMap<'m> {
    model: &'m PdmpModel,
    sequence: Vec<(Theta, f64)>,
}

impl<'m> ComposedJumpMap<'m> {
    pub fn new(model: &'m PdmpModel, sequence: Vec<(Theta, f64)>) -> Result<Self> {
        if sequence.iter().any(|&(_, s)| !(s > 0.0)) {
            return Err(CoreError::InvalidConfig(String::from(
                "holding times in a composed map must be positive",
            )));
        }
        Ok(ComposedJumpMap { model, sequence })
    }

    pub fn sequence(&self) -> &[(Theta, f64)] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Intermediate states `y_0 = x, y_1, ..., y_n` after each stage.
    pub fn stages(&self, x: &State) -> Result<Vec<State>> {
        let mut out = Vec::with_capacity(self.sequence.len() + 1);
        out.push(*x);
        let mut cur = *x;
        for &(theta, s) in &self.sequence {
            cur = single_map(self.model, theta, s, &cur)?;
            out.push(cur);
        }
        Ok(out)
    }

    /// The composed map applied to `x`.
    pub fn evaluate(&self, x: &State) -> Result<State> {
        Ok(*self.stages(x)?.last().unwrap())
    }

    /// The multiplicative weight of the composition at `x`.
    pub fn weight(&self, x: &State) -> Result<f64> {
        let mut w = 1.0;
        let mut cur = *x;
        for &(theta, s) in &self.sequence {
            w *= single_weight(self.model, theta, s, &cur)?;
            cur = single_map(self.model, theta, s, &cur)?;
        }
        Ok(w)
    }
}

/// `T_theta(pi_s x)`.
pub fn single_map(model: &PdmpModel, theta: Theta, s: f64, x: &State) -> Result<State> {
    let flowed = model.flow_at(x, s)?;
    Ok(model.jumps().transform(theta, &flowed))
}

/// `p_theta(pi_s x) * phi(pi_s x) * exp(-Lambda_x(s))`: the density of the
/// pair (parameter, holding time) at `(theta, s)`.
pub fn single_weight(model: &PdmpModel, theta: Theta, s: f64, x: &State) -> Result<f64> {
    let flowed = model.flow_at(x, s)?;
    let hazard = model.cumulative_hazard(x, s)?;
    Ok(model.jumps().weight(theta, &flowed) * model.intensity_at(&flowed) * (-hazard).exp())
}

/// Node layout and declared truncation budget for the kernel oracles.
#[derive(Clone, Debug)]
pub struct QuadratureSpec {
    /// Holding-time truncation: the `s` integrals run over `[0, s_max]`.
    pub s_max: f64,
    pub s_panels: usize,
    pub s_nodes: usize,
    /// Declared bound on the survival mass beyond `s_max` (per stage).
    pub s_tail_mass: f64,
    /// Truncation of a continuous parameter axis; `None` keeps the
    /// interval's own upper bound (which must then be finite).
    pub theta_max: Option<f64>,
    pub theta_panels: usize,
    pub theta_nodes: usize,
}

impl QuadratureSpec {
    /// Derives truncations from the model's declared intensity lower bound
    /// and parameter tail envelope so that each tail stays below
    /// `tail_tol`.
    pub fn for_model(model: &PdmpModel, tail_tol: f64) -> Result<Self> {
        let lower = model.intensity().lower_bound().ok_or_else(|| {
            CoreError::InvalidConfig(String::from(
                "automatic truncation needs a positive intensity lower bound; \
                 construct the quadrature spec explicitly instead",
            ))
        })?;
        let s_max = -(tail_tol.ln()) / lower;
        let theta_max = match model.jumps().space() {
            ThetaSpace::Interval { hi, tail, .. } if !hi.is_finite() => {
                let tail = tail.as_ref().ok_or(CoreError::ThetaTailMissing)?;
                // scan for the truncation point satisfying the envelope
                let mut c = 1.0;
                while tail(c) > tail_tol {
                    c *= 2.0;
                    if c > 1e12 {
                        return Err(CoreError::ThetaTailMissing);
                    }
                }
                Some(c)
            }
            _ => None,
        };
        Ok(QuadratureSpec {
            s_max,
            s_panels: 8,
            s_nodes: 12,
            s_tail_mass: tail_tol,
            theta_max,
            theta_panels: 8,
            theta_nodes: 12,
        })
    }

    /// Reported truncation bound for an `n`-stage oracle: per-stage
    /// survival tail plus parameter tail, union-bounded over stages.
    pub fn truncation_bound(&self, model: &PdmpModel, n: usize) -> f64 {
        let theta_tail = match (model.jumps().space(), self.theta_max) {
            (ThetaSpace::Interval { tail, hi, .. }, Some(c)) if !hi.is_finite() => {
                tail.as_ref().map(|t| t(c)).unwrap_or(f64::NAN)
            }
            _ => 0.0,
        };
        n as f64 * (self.s_tail_mass + theta_tail)
    }

    /// Copy with panel counts raised so that node spacing stays below
    /// `target` on both axes; per-cell mass assignments need nodes much
    /// denser than the histogram cells.
    pub fn refined_for_resolution(&self, model: &PdmpModel, target: f64) -> QuadratureSpec {
        let target = target.max(1e-6);
        let mut out = self.clone();
        let need = |range: f64, nodes: usize, panels: usize| -> usize {
            ((range / target / nodes as f64).ceil() as usize).max(panels)
        };
        out.s_panels = need(self.s_max, self.s_nodes, self.s_panels);
        if let ThetaSpace::Interval { lo, hi, .. } = model.jumps().space() {
            let hi = match self.theta_max {
                Some(c) => hi.min(c),
                None => *hi,
            };
            if hi.is_finite() {
                out.theta_panels = need(hi - lo, self.theta_nodes, self.theta_panels);
            }
        }
        out
    }

    fn s_grid(&self) -> Vec<(f64, f64)> {
        let gl = GaussLegendre::new(self.s_nodes);
        let mut out = Vec::with_capacity(self.s_panels * self.s_nodes);
        let h = self.s_max / self.s_panels as f64;
        for p in 0..self.s_panels {
            out.extend(gl.mapped(p as f64 * h, (p + 1) as f64 * h));
        }
        out
    }

    fn theta_grid(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        let hi = match self.theta_max {
            Some(c) => hi.min(c),
            None => hi,
        };
        if !hi.is_finite() {
            return Err(CoreError::ThetaTailMissing);
        }
        let gl = GaussLegendre::new(self.theta_nodes);
        let mut out = Vec::with_capacity(self.theta_panels * self.theta_nodes);
        let h = (hi - lo) / self.theta_panels as f64;
        for p in 0..self.theta_panels {
            out.extend(gl.mapped(lo + p as f64 * h, lo + (p + 1) as f64 * h));
        }
        Ok(out)
    }
}

/// Survival probabilities `exp(-Lambda_x(s_i))` at an ascending node grid,
/// accumulated incrementally with a per-gap Gauss rule.
fn survival_table(model: &PdmpModel, x: &State, s_nodes: &[(f64, f64)]) -> Result<Vec<f64>> {
    let gl = GaussLegendre::new(10);
    let mut out = Vec::with_capacity(s_nodes.len());
    let mut hazard = 0.0;
    let mut prev = 0.0;
    for &(s, _w) in s_nodes {
        let mut inc = 0.0;
        for (r, w) in gl.mapped(prev, s) {
            inc += w * model.intensity_at(&model.flow_at(x, r)?);
        }
        hazard += inc;
        prev = s;
        out.push((-hazard).exp());
    }
    Ok(out)
}

fn sweep<F>(
    model: &PdmpModel,
    x: &State,
    stages: usize,
    quad: &QuadratureSpec,
    acc: &mut F,
) -> Result<()>
where
    F: FnMut(&State, f64),
{
    let s_nodes = quad.s_grid();
    let theta_nodes = match model.jumps().space() {
        ThetaSpace::Interval { lo, hi, .. } => Some(quad.theta_grid(*lo, *hi)?),
        _ => None,
    };
    sweep_rec(model, x, stages, &s_nodes, theta_nodes.as_deref(), 1.0, acc)
}

fn sweep_rec<F>(
    model: &PdmpModel,
    x: &State,
    remaining: usize,
    s_nodes: &[(f64, f64)],
    theta_nodes: Option<&[(f64, f64)]>,
    carry: f64,
    acc: &mut F,
) -> Result<()>
where
    F: FnMut(&State, f64),
{
    if remaining == 0 {
        acc(x, carry);
        return Ok(());
    }
    let survival = survival_table(model, x, s_nodes)?;
    for (&(s, ws), &surv) in s_nodes.iter().zip(survival.iter()) {
        let flowed = model.flow_at(x, s)?;
        let rate = model.intensity_at(&flowed);
        if rate <= 0.0 {
            continue;
        }
        let base = carry * ws * rate * surv;
        match model.jumps().space() {
            ThetaSpace::Interval { .. } => {
                for &(theta, wt) in theta_nodes.expect("interval grid prepared") {
                    let theta = Theta::Real(theta);
                    let p = model.jumps().weight(theta, &flowed);
                    if p <= 0.0 {
                        continue;
                    }
                    let z = model.jumps().transform(theta, &flowed);
                    sweep_rec(model, &z, remaining - 1, s_nodes, theta_nodes, base * wt * p, acc)?;
                }
            }
            ThetaSpace::Finite { count } => {
                for j in 0..*count {
                    let theta = Theta::Index(j);
                    let p = model.jumps().weight(theta, &flowed);
                    if p <= 0.0 {
                        continue;
                    }
                    let z = model.jumps().transform(theta, &flowed);
                    sweep_rec(model, &z, remaining - 1, s_nodes, theta_nodes, base * p, acc)?;
                }
            }
            ThetaSpace::PerState { support } => {
                for j in support(&flowed) {
                    let theta = Theta::Index(j);
                    let p = model.jumps().weight(theta, &flowed);
                    if p <= 0.0 {
                        continue;
                    }
                    let z = model.jumps().transform(theta, &flowed);
                    sweep_rec(model, &z, remaining - 1, s_nodes, theta_nodes, base * p, acc)?;
                }
            }
        }
    }
    Ok(())
}

/// Quadrature value together with its declared truncation budget.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleResult {
    pub value: f64,
    pub truncation_bound: f64,
}

/// `K^n(x, B)` for an indicator-described region `B`, by tensorized
/// quadrature over the `n`-stage parameter-and-holding-time space.
pub fn kernel_oracle(
    model: &PdmpModel,
    x: &State,
    region: &dyn Fn(&State) -> bool,
    n: usize,
    quad: &QuadratureSpec,
) -> Result<OracleResult> {
    if n == 0 || n > 2 {
        return Err(CoreError::InvalidConfig(String::from(
            "kernel oracles support one or two stages; use Monte-Carlo beyond",
        )));
    }
    let mut value = 0.0;
    sweep(model, x, n, quad, &mut |z: &State, w: f64| {
        if region(z) {
            value += w;
        }
    })?;
    Ok(OracleResult {
        value,
        truncation_bound: quad.truncation_bound(model, n),
    })
}

/// One-step kernel mass distributed over a histogram grid; the returned
/// estimate carries probabilities as weights, with off-grid mass in the
/// outside cell.
pub fn kernel_mass_on_grid(
    model: &PdmpModel,
    x: &State,
    grid: GridSpec,
    n: usize,
    quad: &QuadratureSpec,
) -> Result<(DensityEstimate, f64)> {
    if n == 0 || n > 2 {
        return Err(CoreError::InvalidConfig(String::from(
            "kernel oracles support one or two stages; use Monte-Carlo beyond",
        )));
    }
    // Per-cell masses integrate discontinuous indicators: keep node
    // spacing well below the cell width.
    let min_width = grid
        .axes
        .iter()
        .filter_map(|a| match a {
            crate::density::Axis::Continuous { lo, hi, bins } => {
                Some((hi - lo) / *bins as f64)
            }
            crate::density::Axis::Discrete { .. } => None,
        })
        .fold(f64::INFINITY, f64::min);
    // Two-stage sweeps square the node count; refinement is affordable
    // only for the one-stage histograms.
    let quad = if min_width.is_finite() && n == 1 {
        quad.refined_for_resolution(model, min_width / 4.0)
    } else {
        quad.clone()
    };
    let mut est = DensityEstimate::empty(grid);
    sweep(model, x, n, &quad, &mut |z: &State, w: f64| {
        est.add(z, w);
    })?;
    // Histogram comparisons normalize by total weight; the truncated tail
    // is unobserved, so fold it into the outside cell to keep masses
    // honest.
    let bound = quad.truncation_bound(model, n);
    if bound.is_finite() {
        est.outside += bound;
    }
    Ok((est, bound))
}

/// `E[f(X_1) | X_0 = x]` by one-stage quadrature.
pub fn expectation_one_step(
    model: &PdmpModel,
    x: &State,
    f: &dyn Fn(&State) -> f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mut value = 0.0;
    sweep(model, x, 1, quad, &mut |z: &State, w: f64| {
        value += w * f(z);
    })?;
    Ok(value)
}
