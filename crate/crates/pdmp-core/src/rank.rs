//! Jacobians of composed flow-jump maps and numerical rank certificates.
//!
//! The smoothing conditions ask for full row rank (equal to the Lebesgue
//! dimension of the state space) of the derivative of a composed map with
//! respect to its holding times (and, when the jump parameter is
//! continuous, the parameters as well), at a point where the composed
//! weight is positive. Factors are assembled from closed-form model
//! derivatives when available and central differences otherwise, and the
//! assembly is itself validated against end-to-end finite differences.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, Exp};

use crate::error::{CoreError, Result};
use crate::jump::Theta;
use crate::kernel::ComposedJumpMap;
use crate::model::PdmpModel;
use crate::numeric::fd::fd_step;
use crate::state::State;

/// Which variables the composed-map derivative is taken in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum JacobianMode {
    /// Holding times only.
    SOnly,
    /// Parameters and holding times (parameters contribute columns only
    /// for continuous parameter spaces).
    ThetaAndS,
}

/// Per-stage derivative factors of a composed map at a fixed sequence:
/// `xi[k]` is the state Jacobian of stage `k+1` at the stage-`k` point,
/// `psi[k]` the parameter-and-time Jacobian of the same stage.
#[derive(Clone, Debug)]
pub struct JacobianFactors {
    pub stages: Vec<State>,
    pub xi: Vec<DMatrix<f64>>,
    pub psi: Vec<DMatrix<f64>>,
}

fn transform_jacobian_x(model: &PdmpModel, theta: Theta, x: &State) -> DMatrix<f64> {
    if let Some(derivs) = model.jumps().derivatives() {
        return (derivs.d_dx)(theta, x);
    }
    let d = x.dim();
    crate::numeric::central_jacobian(
        |v: &[f64]| model.jumps().transform(theta, &State::from_slice(v)).to_vec(),
        x.as_slice(),
        d,
    )
}

fn transform_jacobian_theta(model: &PdmpModel, theta: Theta, x: &State) -> Result<DVector<f64>> {
    if let Some(derivs) = model.jumps().derivatives() {
        if let Some(dth) = &derivs.d_dtheta {
            return Ok(dth(theta, x));
        }
    }
    let t0 = match theta {
        Theta::Real(v) => v,
        Theta::Index(_) => {
            return Err(CoreError::NonDifferentiable(String::from(
                "discrete jump parameters carry no derivative",
            )))
        }
    };
    let h = fd_step(t0);
    let plus = model.jumps().transform(Theta::Real(t0 + h), x);
    let minus = model.jumps().transform(Theta::Real(t0 - h), x);
    Ok(DVector::from_iterator(
        x.dim(),
        plus.iter().zip(minus.iter()).map(|(p, m)| (p - m) / (2.0 * h)),
    ))
}

/// Computes the stage factors along a sequence. Stage `k` uses the flow
/// Jacobian at the previous stage point, the jump state-Jacobian at the
/// flowed point, and the chain rule `d/ds T_theta(pi_s y) = T' g`.
pub fn stage_factors(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
) -> Result<JacobianFactors> {
    let d = x.dim();
    let continuous_theta = model.jumps().space().continuous_dim() > 0;
    let mut stages = Vec::with_capacity(sequence.len() + 1);
    let mut xi = Vec::with_capacity(sequence.len());
    let mut psi = Vec::with_capacity(sequence.len());
    let mut cur = *x;
    stages.push(cur);
    for &(theta, s) in sequence {
        let flowed = model.flow_at(&cur, s)?;
        let flow_jac = model.flow().jacobian_at(&cur, s)?;
        let jump_jac = transform_jacobian_x(model, theta, &flowed);
        let xi_k = &jump_jac * &flow_jac;
        let g = model.flow().field(&flowed);
        let s_col = &jump_jac * DVector::from_column_slice(g.as_slice());
        let psi_k = if continuous_theta {
            let th_col = transform_jacobian_theta(model, theta, &flowed)?;
            let mut m = DMatrix::zeros(d, 2);
            m.set_column(0, &th_col);
            m.set_column(1, &s_col);
            m
        } else {
            DMatrix::from_column_slice(d, 1, s_col.as_slice())
        };
        xi.push(xi_k);
        psi.push(psi_k);
        cur = model.jumps().transform(theta, &flowed);
        stages.push(cur);
    }
    Ok(JacobianFactors { stages, xi, psi })
}

fn assemble_blocks(factors: &JacobianFactors, mode: JacobianMode) -> Vec<DMatrix<f64>> {
    let n = factors.xi.len();
    let d = factors.psi[0].nrows();
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut acc = DMatrix::<f64>::identity(d, d);
    // Right-to-left: block_j = Xi_{n-1} ... Xi_j Psi_{j-1}.
    for j in (0..n).rev() {
        let full = &acc * &factors.psi[j];
        let block = match mode {
            JacobianMode::ThetaAndS => full,
            JacobianMode::SOnly => {
                let last = full.ncols() - 1;
                DMatrix::from_column_slice(d, 1, full.column(last).as_slice())
            }
        };
        blocks.push(block);
        acc = &acc * &factors.xi[j];
    }
    blocks.reverse();
    blocks
}

fn concat_blocks(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(d, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (d, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Derivative of the composed map `x -> T_(sequence)(x)` with respect to
/// the sequence variables, assembled from the stage factors.
pub fn jacobian_chain(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    mode: JacobianMode,
) -> Result<DMatrix<f64>> {
    if sequence.is_empty() {
        return Ok(DMatrix::zeros(x.dim(), 0));
    }
    let factors = stage_factors(model, x, sequence)?;
    Ok(concat_blocks(&assemble_blocks(&factors, mode)))
}

/// Derivative of the time-`t` position map: the composed map followed by
/// the flow over the remaining time `t - sum(s)`. Each holding-time column
/// also carries the direct `-g` dependence of the remaining flow time.
pub fn jacobian_continuous(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    t: f64,
    mode: JacobianMode,
) -> Result<DMatrix<f64>> {
    if sequence.is_empty() {
        return Ok(DMatrix::zeros(x.dim(), 0));
    }
    let elapsed: f64 = sequence.iter().map(|&(_, s)| s).sum();
    if elapsed >= t {
        return Err(CoreError::HorizonViolation {
            elapsed,
            horizon: t,
        });
    }
    let factors = stage_factors(model, x, sequence)?;
    let blocks = assemble_blocks(&factors, mode);
    let y_n = *factors.stages.last().unwrap();
    let remaining = t - elapsed;
    let terminal_jac = model.flow().jacobian_at(&y_n, remaining)?;
    let terminal_point = model.flow_at(&y_n, remaining)?;
    let g_final = DVector::from_column_slice(model.flow().field(&terminal_point).as_slice());
    let mapped: Vec<DMatrix<f64>> = blocks
        .into_iter()
        .map(|b| {
            let mut m = &terminal_jac * b;
            // Holding times also shorten the terminal flow segment.
            let last = m.ncols() - 1;
            let mut col = m.column_mut(last);
            col -= &g_final;
            m
        })
        .collect();
    Ok(concat_blocks(&mapped))
}

/// Small-holding-time limit of the chain derivative: columns
/// `T'_n ... T'_i g(y_{i-1})` over jump-only stage points.
pub fn limit_matrix_chain(model: &PdmpModel, x: &State, thetas: &[Theta]) -> Result<DMatrix<f64>> {
    let d = x.dim();
    let n = thetas.len();
    let mut stages = Vec::with_capacity(n + 1);
    let mut cur = *x;
    stages.push(cur);
    for &theta in thetas {
        cur = model.jumps().transform(theta, &cur);
        stages.push(cur);
    }
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut acc = DMatrix::<f64>::identity(d, d);
    for i in (0..n).rev() {
        let jump_jac = transform_jacobian_x(model, thetas[i], &stages[i]);
        let g = DVector::from_column_slice(model.flow().field(&stages[i]).as_slice());
        cols.push(&acc * &jump_jac * g);
        acc = &acc * &jump_jac;
    }
    cols.reverse();
    let mut out = DMatrix::zeros(d, n);
    for (i, c) in cols.iter().enumerate() {
        out.set_column(i, c);
    }
    Ok(out)
}

/// Small-time limit of the continuous-time derivative: the chain limit
/// columns each reduced by the field at the final stage point.
pub fn limit_matrix_continuous(
    model: &PdmpModel,
    x: &State,
    thetas: &[Theta],
) -> Result<DMatrix<f64>> {
    let mut m = limit_matrix_chain(model, x, thetas)?;
    let mut cur = *x;
    for &theta in thetas {
        cur = model.jumps().transform(theta, &cur);
    }
    let g_final = DVector::from_column_slice(model.flow().field(&cur).as_slice());
    for c in 0..m.ncols() {
        let mut col = m.column_mut(c);
        col -= &g_final;
    }
    Ok(m)
}

/// End-to-end central differences through the composed map; the
/// independent oracle for the factor assembly.
pub fn jacobian_chain_fd(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    mode: JacobianMode,
) -> Result<DMatrix<f64>> {
    jacobian_fd_impl(model, x, sequence, mode, None)
}

/// End-to-end central differences through the time-`t` position map.
pub fn jacobian_continuous_fd(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    t: f64,
    mode: JacobianMode,
) -> Result<DMatrix<f64>> {
    let elapsed: f64 = sequence.iter().map(|&(_, s)| s).sum();
    if elapsed >= t {
        return Err(CoreError::HorizonViolation {
            elapsed,
            horizon: t,
        });
    }
    jacobian_fd_impl(model, x, sequence, mode, Some(t))
}

fn jacobian_fd_impl(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    mode: JacobianMode,
    horizon: Option<f64>,
) -> Result<DMatrix<f64>> {
    let continuous_theta = model.jumps().space().continuous_dim() > 0;
    let with_theta = matches!(mode, JacobianMode::ThetaAndS) && continuous_theta;
    let evaluate = |seq: &[(Theta, f64)]| -> Result<State> {
        let map = ComposedJumpMap::new(model, seq.to_vec())?;
        let y = map.evaluate(x)?;
        match horizon {
            Some(t) => {
                let elapsed: f64 = seq.iter().map(|&(_, s)| s).sum();
                model.flow_at(&y, t - elapsed)
            }
            None => Ok(y),
        }
    };
    let d = x.dim();
    let cols_per_stage = if with_theta { 2 } else { 1 };
    let mut out = DMatrix::zeros(d, sequence.len() * cols_per_stage);
    let mut col = 0;
    for k in 0..sequence.len() {
        if with_theta {
            let t0 = match sequence[k].0 {
                Theta::Real(v) => v,
                Theta::Index(_) => {
                    return Err(CoreError::NonDifferentiable(String::from(
                        "discrete jump parameters carry no derivative",
                    )))
                }
            };
            let h = fd_step(t0);
            let mut plus = sequence.to_vec();
            plus[k].0 = Theta::Real(t0 + h);
            let mut minus = sequence.to_vec();
            minus[k].0 = Theta::Real(t0 - h);
            let (p, m) = (evaluate(&plus)?, evaluate(&minus)?);
            for r in 0..d {
                out[(r, col)] = (p[r] - m[r]) / (2.0 * h);
            }
            col += 1;
        }
        let s0 = sequence[k].1;
        let h = fd_step(s0).min(0.5 * s0);
        let mut plus = sequence.to_vec();
        plus[k].1 = s0 + h;
        let mut minus = sequence.to_vec();
        minus[k].1 = s0 - h;
        let (p, m) = (evaluate(&plus)?, evaluate(&minus)?);
        for r in 0..d {
            out[(r, col)] = (p[r] - m[r]) / (2.0 * h);
        }
        col += 1;
    }
    Ok(out)
}

/// Singular values sorted descending and the count above
/// `tau * sigma_max`.
pub fn numeric_rank(matrix: &DMatrix<f64>, tau: f64) -> (usize, Vec<f64>) {
    if matrix.ncols() == 0 || matrix.nrows() == 0 {
        return (0, Vec::new());
    }
    let svd = matrix.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    let sigma_max = sv[0];
    if sigma_max == 0.0 {
        return (0, sv);
    }
    let rank = sv.iter().filter(|&&s| s > tau * sigma_max).count();
    (rank, sv)
}

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Outcome of testing one sequence at one point.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankReport {
    pub point: Vec<f64>,
    /// `(parameter-as-real, holding-time)` pairs of the tested sequence.
    pub sequence: Vec<(f64, f64)>,
    pub mode: JacobianMode,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Lebesgue dimension the rank is compared against.
    pub target_rank: usize,
    /// Composed weight at the point; the certificate needs it positive.
    pub weight: f64,
    pub tau: f64,
    /// True iff `rank == target_rank` and `weight > 0`.
    pub verdict: bool,
}

/// Result of a randomized certificate search: either a verified sequence
/// or the best-conditioned failure. Absence of a certificate is never a
/// negative claim.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RankSearch {
    Certificate(RankReport),
    Inconclusive { best: Option<RankReport> },
}

impl RankSearch {
    pub fn certificate(&self) -> Option<&RankReport> {
        match self {
            RankSearch::Certificate(r) => Some(r),
            RankSearch::Inconclusive { .. } => None,
        }
    }
}

fn report_for(
    model: &PdmpModel,
    x: &State,
    sequence: &[(Theta, f64)],
    mode: JacobianMode,
    tau: f64,
) -> Result<RankReport> {
    let matrix = jacobian_chain(model, x, sequence, mode)?;
    let (rank, singular_values) = numeric_rank(&matrix, tau);
    let weight = ComposedJumpMap::new(model, sequence.to_vec())?.weight(x)?;
    let target_rank = model.space().lebesgue_dim();
    Ok(RankReport {
        point: x.to_vec(),
        sequence: sequence.iter().map(|&(th, s)| (th.as_real(), s)).collect(),
        mode,
        singular_values,
        rank,
        target_rank,
        weight,
        tau,
        verdict: rank == target_rank && target_rank > 0 && weight > 0.0,
    })
}

/// Samples sequences of growing length and returns the first one whose
/// derivative has full Lebesgue rank with positive weight, certifying that
/// the reachable set from `x` has nonempty interior.
pub fn search_rank_certificate(
    model: &PdmpModel,
    x: &State,
    max_n: usize,
    budget: usize,
    tau: f64,
    rng: &mut dyn RngCore,
) -> Result<RankSearch> {
    if max_n == 0 || max_n > 4 {
        return Err(CoreError::InvalidConfig(String::from(
            "certificate search supports sequence lengths 1..=4",
        )));
    }
    let target = model.space().lebesgue_dim();
    if target == 0 {
        // Counting-measure spaces have no Lebesgue component to smooth.
        return Ok(RankSearch::Inconclusive { best: None });
    }
    let mode = if model.jumps().space().continuous_dim() > 0 {
        JacobianMode::ThetaAndS
    } else {
        JacobianMode::SOnly
    };
    let trials = (budget / max_n).max(1);
    let mut best: Option<RankReport> = None;
    for n in 1..=max_n {
        for _ in 0..trials {
            let mut sequence = Vec::with_capacity(n);
            let mut cur = *x;
            let mut ok = true;
            for _ in 0..n {
                // Holding times on the scale of actual holding times.
                let rate = model.intensity_at(&cur).max(0.5);
                let s: f64 = Exp::new(rate).expect("positive rate").sample(rng).max(1e-3);
                let flowed = match model.flow_at(&cur, s) {
                    Ok(y) => y,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                };
                let theta = match model.jumps().draw_theta(&flowed, rng) {
                    Ok(t) => t,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                };
                sequence.push((theta, s));
                cur = model.jumps().transform(theta, &flowed);
            }
            if !ok {
                continue;
            }
            let report = report_for(model, x, &sequence, mode, tau)?;
            if report.verdict {
                return Ok(RankSearch::Certificate(report));
            }
            let ratio = |r: &RankReport| -> f64 {
                match (r.singular_values.first(), r.singular_values.get(target - 1)) {
                    (Some(&s0), Some(&st)) if s0 > 0.0 => st / s0,
                    _ => 0.0,
                }
            };
            if best.as_ref().map(|b| ratio(&report) > ratio(b)).unwrap_or(true) {
                best = Some(report);
            }
        }
    }
    Ok(RankSearch::Inconclusive { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_gene_model, build_halving, GeneExpressionParams};
    use crate::simulate::path_rng;

    #[test]
    fn empty_sequence_gives_empty_matrix_and_no_verdict() {
        let model = build_gene_model(GeneExpressionParams::default()).unwrap();
        let x = State::from_slice(&[1.0, 1.0]);
        let m = jacobian_chain(&model, &x, &[], JacobianMode::ThetaAndS).unwrap();
        assert_eq!(m.ncols(), 0);
        let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
        assert_eq!(rank, 0);
    }

    #[test]
    fn degenerate_dynamics_stay_inconclusive() {
        // single deterministic jump parameter and zero field: all columns
        // vanish, so no certificate can exist
        let model = build_halving(1.0).unwrap();
        let mut rng = path_rng(3, 0);
        let out = search_rank_certificate(
            &model,
            &State::from_slice(&[1.0]),
            2,
            64,
            DEFAULT_RANK_TOL,
            &mut rng,
        )
        .unwrap();
        assert!(out.certificate().is_none());
    }

    #[test]
    fn horizon_violation_is_reported() {
        let model = build_gene_model(GeneExpressionParams::default()).unwrap();
        let x = State::from_slice(&[1.0, 1.0]);
        let seq = alloc::vec![(Theta::Real(0.5), 0.7), (Theta::Real(0.2), 0.7)];
        let err = jacobian_continuous(&model, &x, &seq, 1.0, JacobianMode::ThetaAndS).unwrap_err();
        assert!(matches!(err, CoreError::HorizonViolation { .. }));
    }
}
