//! Reproduction of the closed-form Jacobians of the gene model, the
//! finite-difference validation of the factor assembly, and the rank
//! certificate search.

mod common;

use std::sync::Arc;

use common::hill_params;
use nalgebra::DMatrix;
use pdmp_core::models::{build_gene_model, build_growth_collapse, two_mode_drift, GeneExpressionParams};
use pdmp_core::rank::{
    jacobian_chain, jacobian_chain_fd, jacobian_continuous, jacobian_continuous_fd,
    limit_matrix_chain, limit_matrix_continuous, numeric_rank, search_rank_certificate,
    JacobianMode, RankSearch, DEFAULT_RANK_TOL,
};
use pdmp_core::simulate::path_rng;
use pdmp_core::{
    Intensity, JumpFamily, PdmpModel, Semiflow, State, StateSpace, Theta, ThetaSampler, ThetaSpace,
};
use rand::Rng;

fn random_gene_params(rng: &mut impl Rng) -> GeneExpressionParams {
    let gamma2 = 0.5 + rng.gen::<f64>();
    GeneExpressionParams {
        gamma1: gamma2 + 0.5 + rng.gen::<f64>() * 2.0,
        gamma2,
        beta2: 0.5 + rng.gen::<f64>() * 2.0,
        burst_mean: 0.5 + rng.gen::<f64>(),
        ..Default::default()
    }
}

/// The displayed one-stage derivative in parameters and holding time:
/// first column (1, 0), second column the flow field pushed through the
/// stage.
fn gene_one_stage_matrix(p: &GeneExpressionParams, x: &State, s: f64) -> DMatrix<f64> {
    let d11 = 1.0;
    let d21 = 0.0;
    let d12 = -p.gamma1 * x[0] * (-p.gamma1 * s).exp();
    let d22 = -p.gamma2 * x[1] * (-p.gamma2 * s).exp()
        + x[0] * p.beta2 / (p.gamma1 - p.gamma2)
            * (p.gamma1 * (-p.gamma1 * s).exp() - p.gamma2 * (-p.gamma2 * s).exp());
    DMatrix::from_row_slice(2, 2, &[d11, d12, d21, d22])
}

#[test]
fn one_stage_jacobian_matches_the_closed_form() {
    let mut rng = path_rng(500, 0);
    for _ in 0..40 {
        let p = random_gene_params(&mut rng);
        let model = build_gene_model(p).unwrap();
        let x = State::from_slice(&[0.2 + rng.gen::<f64>() * 3.0, 0.2 + rng.gen::<f64>() * 3.0]);
        let s = 0.05 + rng.gen::<f64>() * 2.0;
        let theta = 0.1 + rng.gen::<f64>();
        let got = jacobian_chain(
            &model,
            &x,
            &[(Theta::Real(theta), s)],
            JacobianMode::ThetaAndS,
        )
        .unwrap();
        let want = gene_one_stage_matrix(&p, &x, s);
        assert!((got - want).norm() < 1e-10);
    }
}

/// Solves the scalar degeneracy condition for the protein coordinate:
/// the (2,2) entry of the one-stage matrix vanishes at this value.
fn degenerate_x2(p: &GeneExpressionParams, x1: f64, s: f64) -> f64 {
    x1 * p.beta2 / (p.gamma1 - p.gamma2)
        * (p.gamma1 * (-p.gamma1 * s).exp() - p.gamma2 * (-p.gamma2 * s).exp())
        / (p.gamma2 * (-p.gamma2 * s).exp())
}

#[test]
fn rank_drops_exactly_on_the_degeneracy_set() {
    let p = GeneExpressionParams::default();
    let model = build_gene_model(p).unwrap();
    let (x1, s) = (2.0, 0.3);
    let x2_star = degenerate_x2(&p, x1, s);
    assert!(x2_star > 0.0, "degenerate point must be admissible");
    let seq = [(Theta::Real(0.7), s)];
    let at = |x2: f64| {
        let m = jacobian_chain(
            &model,
            &State::from_slice(&[x1, x2]),
            &seq,
            JacobianMode::ThetaAndS,
        )
        .unwrap();
        numeric_rank(&m, DEFAULT_RANK_TOL).0
    };
    assert_eq!(at(x2_star), 1, "rank must drop on the zero set");
    assert_eq!(at(x2_star * 1.01), 2);
    assert_eq!(at(x2_star * 0.99), 2);
}

#[test]
fn two_stage_matrix_has_the_displayed_columns_and_full_rank() {
    let mut rng = path_rng(501, 0);
    for _ in 0..100 {
        let p = random_gene_params(&mut rng);
        let model = build_gene_model(p).unwrap();
        let x = State::from_slice(&[rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0]);
        let s1 = 0.05 + rng.gen::<f64>();
        let s2 = 0.05 + rng.gen::<f64>();
        let seq = [
            (Theta::Real(0.1 + rng.gen::<f64>()), s1),
            (Theta::Real(0.1 + rng.gen::<f64>()), s2),
        ];
        let m = jacobian_chain(&model, &x, &seq, JacobianMode::ThetaAndS).unwrap();
        assert_eq!(m.ncols(), 4);
        // first parameter column: (e^{-gamma1 s2}, cross_coupling(s2))
        assert!((m[(0, 0)] - (-p.gamma1 * s2).exp()).abs() < 1e-10);
        assert!((m[(1, 0)] - p.cross_coupling(s2)).abs() < 1e-10);
        // second parameter column: (1, 0)
        assert!((m[(0, 2)] - 1.0).abs() < 1e-12);
        assert!(m[(1, 2)].abs() < 1e-12);
        let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
        assert_eq!(rank, 2);
    }
}

#[test]
fn continuous_time_matrix_has_the_displayed_columns_and_full_rank() {
    let mut rng = path_rng(502, 0);
    for _ in 0..100 {
        let p = random_gene_params(&mut rng);
        let model = build_gene_model(p).unwrap();
        let x = State::from_slice(&[0.1 + rng.gen::<f64>() * 3.0, 0.1 + rng.gen::<f64>() * 3.0]);
        let s1 = 0.05 + rng.gen::<f64>() * 0.5;
        let s2 = 0.05 + rng.gen::<f64>() * 0.5;
        let t = s1 + s2 + 0.1 + rng.gen::<f64>();
        let seq = [
            (Theta::Real(0.1 + rng.gen::<f64>()), s1),
            (Theta::Real(0.1 + rng.gen::<f64>()), s2),
        ];
        let m = jacobian_continuous(&model, &x, &seq, t, JacobianMode::ThetaAndS).unwrap();
        let rem = t - s1 - s2;
        // first parameter column
        let want00 = (-p.gamma1 * rem).exp() * (-p.gamma1 * s2).exp();
        let want10 =
            (-p.gamma1 * s2).exp() * p.cross_coupling(rem) + (-p.gamma2 * rem).exp() * p.cross_coupling(s2);
        assert!((m[(0, 0)] - want00).abs() < 1e-10);
        assert!((m[(1, 0)] - want10).abs() < 1e-10);
        // second parameter column
        assert!((m[(0, 2)] - (-p.gamma1 * rem).exp()).abs() < 1e-10);
        assert!((m[(1, 2)] - p.cross_coupling(rem)).abs() < 1e-10);
        let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
        assert_eq!(rank, 2);
    }
}

#[test]
fn assembled_jacobians_match_end_to_end_finite_differences() {
    let mut rng = path_rng(503, 0);
    let gene = build_gene_model(hill_params()).unwrap();
    let switch = two_mode_drift([1.0, -0.3], [0.2, 1.0], 1.0, 2.0).unwrap();
    let collapse = build_growth_collapse().unwrap();
    let models: [(&PdmpModel, usize); 3] = [(&gene, 2), (&switch, 3), (&collapse, 1)];
    let mut cases = 0;
    while cases < 60 {
        let (model, dim) = models[cases % 3];
        let n = 1 + cases % 3;
        let x = match dim {
            1 => State::from_slice(&[0.3 + rng.gen::<f64>() * 2.0]),
            2 => State::from_slice(&[0.3 + rng.gen::<f64>() * 2.0, 0.3 + rng.gen::<f64>() * 2.0]),
            _ => State::from_slice(&[
                0.3 + rng.gen::<f64>() * 2.0,
                0.3 + rng.gen::<f64>() * 2.0,
                (cases % 2) as f64,
            ]),
        };
        let mut seq = Vec::new();
        let mut cur = x;
        for _ in 0..n {
            let s = 0.1 + rng.gen::<f64>() * 0.6;
            let flowed = model.flow_at(&cur, s).unwrap();
            let theta = model.jumps().draw_theta(&flowed, &mut rng).unwrap();
            seq.push((theta, s));
            cur = model.jumps().transform(theta, &flowed);
        }
        let mode = if model.jumps().space().continuous_dim() > 0 {
            JacobianMode::ThetaAndS
        } else {
            JacobianMode::SOnly
        };
        let assembled = jacobian_chain(model, &x, &seq, mode).unwrap();
        let fd = jacobian_chain_fd(model, &x, &seq, mode).unwrap();
        let diff = (assembled.clone() - fd.clone()).amax();
        let budget = (1e-4 * fd.amax()).max(1e-5);
        assert!(
            diff <= budget,
            "{} n={n}: assembly-FD gap {diff} over budget {budget}",
            model.name()
        );
        // continuous-time variant with a horizon past the sequence
        let elapsed: f64 = seq.iter().map(|&(_, s)| s).sum();
        let t = elapsed + 0.2 + rng.gen::<f64>();
        let assembled_c = jacobian_continuous(model, &x, &seq, t, mode).unwrap();
        let fd_c = jacobian_continuous_fd(model, &x, &seq, t, mode).unwrap();
        let diff_c = (assembled_c - fd_c.clone()).amax();
        let budget_c = (1e-4 * fd_c.amax()).max(1e-5);
        assert!(
            diff_c <= budget_c,
            "{} continuous n={n}: gap {diff_c} over {budget_c}",
            model.name()
        );
        cases += 1;
    }
}

#[test]
fn switching_limit_matrix_collects_the_mode_fields() {
    // constant fields: the limit columns are exactly the field values at
    // the visited modes, so independence of the fields decides the rank
    let indep = two_mode_drift([1.0, 0.0], [0.0, 1.0], 1.0, 1.0).unwrap();
    let x = State::from_slice(&[0.5, 0.5, 0.0]);
    let thetas = [Theta::Index(1), Theta::Index(0)];
    let m = limit_matrix_chain(&indep, &x, &thetas).unwrap();
    // columns: field of mode 0, then field of mode 1, zero mode row
    assert_eq!(m.column(0).as_slice(), &[1.0, 0.0, 0.0]);
    assert_eq!(m.column(1).as_slice(), &[0.0, 1.0, 0.0]);
    let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
    assert_eq!(rank, indep.space().lebesgue_dim());

    let parallel = two_mode_drift([1.0, 0.0], [2.0, 0.0], 1.0, 1.0).unwrap();
    let m = limit_matrix_chain(&parallel, &x, &thetas).unwrap();
    let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
    assert_eq!(rank, 1, "parallel fields cannot span the plane");
}

#[test]
fn gene_single_jump_limit_column_is_the_field() {
    let p = GeneExpressionParams::default();
    let model = build_gene_model(p).unwrap();
    let x = State::from_slice(&[1.0, 2.0]);
    let m = limit_matrix_chain(&model, &x, &[Theta::Real(0.5)]).unwrap();
    // bursts translate the state, so the limit column is g(x) itself
    assert!((m[(0, 0)] + p.gamma1 * x[0]).abs() < 1e-12);
    assert!((m[(1, 0)] - (-p.gamma2 * x[1] + p.beta2 * x[0])).abs() < 1e-12);
    let (rank, _sv) = numeric_rank(&m, DEFAULT_RANK_TOL);
    assert_eq!(rank, 1, "one jump-only direction cannot span the plane");
}

#[test]
fn limit_rank_persists_for_small_positive_holding_times() {
    // lower semicontinuity: full limit rank must survive at small s
    let model = two_mode_drift([1.0, 0.0], [0.0, 1.0], 1.0, 1.0).unwrap();
    let x = State::from_slice(&[0.5, 0.5, 0.0]);
    let thetas = [Theta::Index(1), Theta::Index(0)];
    let limit = limit_matrix_chain(&model, &x, &thetas).unwrap();
    let (limit_rank, _) = numeric_rank(&limit, DEFAULT_RANK_TOL);
    assert_eq!(limit_rank, 2);
    let seq = [(Theta::Index(1), 1e-4), (Theta::Index(0), 1e-4)];
    let m = jacobian_chain(&model, &x, &seq, JacobianMode::SOnly).unwrap();
    let (rank, _) = numeric_rank(&m, DEFAULT_RANK_TOL);
    assert_eq!(rank, 2);
}

#[test]
fn gene_continuous_limit_columns_are_parallel() {
    // burst translations leave the field differences proportional to
    // (-gamma1, beta2), so the all-times-to-zero limit never has rank 2
    let p = GeneExpressionParams::default();
    let model = build_gene_model(p).unwrap();
    let x = State::from_slice(&[1.0, 1.5]);
    let thetas = [Theta::Real(0.8), Theta::Real(0.4)];
    let m = limit_matrix_continuous(&model, &x, &thetas).unwrap();
    let (rank, _sv) = numeric_rank(&m, 1e-10);
    assert!(rank <= 1, "columns must be parallel, got rank {rank}");
    for c in 0..m.ncols() {
        let col = m.column(c);
        // proportional to (-gamma1, beta2)
        let cross = col[0] * p.beta2 - col[1] * (-p.gamma1);
        assert!(cross.abs() < 1e-10);
    }
}

#[test]
fn continuous_jacobian_approaches_its_limit_matrix() {
    // constant-field switching flows are linear in time, so the limit is
    // exact there; the gene model exercises genuine convergence
    let switch = two_mode_drift([1.0, 0.0], [0.0, 1.0], 1.0, 1.0).unwrap();
    let xs = State::from_slice(&[0.5, 0.5, 0.0]);
    let thetas_s = [Theta::Index(1), Theta::Index(0)];
    let limit_s = limit_matrix_continuous(&switch, &xs, &thetas_s).unwrap();
    let seq_s = [(Theta::Index(1), 1e-3), (Theta::Index(0), 1e-3)];
    let exact = jacobian_continuous(&switch, &xs, &seq_s, 3e-3, JacobianMode::SOnly).unwrap();
    assert!((exact - limit_s).amax() < 1e-12);

    let gene = build_gene_model(GeneExpressionParams::default()).unwrap();
    let x = State::from_slice(&[1.0, 1.5]);
    let thetas = [Theta::Real(0.8), Theta::Real(0.4)];
    let limit = limit_matrix_continuous(&gene, &x, &thetas).unwrap();
    let at_eps = |eps: f64| {
        let seq = [(Theta::Real(0.8), eps), (Theta::Real(0.4), eps)];
        jacobian_continuous(&gene, &x, &seq, 3.0 * eps, JacobianMode::SOnly).unwrap()
    };
    let d_coarse = (at_eps(1e-3) - limit.clone()).amax();
    let d_fine = (at_eps(1e-5) - limit.clone()).amax();
    assert!(d_fine < d_coarse, "no convergence: {d_coarse} -> {d_fine}");
    assert!(d_fine < 1e-3, "distance to limit {d_fine}");
}

#[test]
fn rank_verdicts_are_stable_across_the_tolerance_window() {
    let p = GeneExpressionParams::default();
    let model = build_gene_model(p).unwrap();
    let mut rng = path_rng(504, 0);
    let taus = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
    for case in 0..40 {
        let x = State::from_slice(&[0.2 + rng.gen::<f64>() * 3.0, 0.2 + rng.gen::<f64>() * 3.0]);
        let s1 = 0.05 + rng.gen::<f64>();
        let make = |seq: &[(Theta, f64)]| jacobian_chain(&model, &x, seq, JacobianMode::ThetaAndS).unwrap();
        let m = if case % 3 == 0 {
            // points exactly on the degeneracy set
            let x2 = degenerate_x2(&p, x[0], s1);
            jacobian_chain(
                &model,
                &State::from_slice(&[x[0], x2]),
                &[(Theta::Real(0.5), s1)],
                JacobianMode::ThetaAndS,
            )
            .unwrap()
        } else if case % 3 == 1 {
            make(&[(Theta::Real(0.5), s1)])
        } else {
            make(&[
                (Theta::Real(0.3 + rng.gen::<f64>()), s1),
                (Theta::Real(0.3 + rng.gen::<f64>()), 0.05 + rng.gen::<f64>()),
            ])
        };
        let ranks: Vec<usize> = taus.iter().map(|&t| numeric_rank(&m, t).0).collect();
        assert!(
            ranks.windows(2).all(|w| w[0] == w[1]),
            "verdict flip across tolerances: {ranks:?}"
        );
    }
}

#[test]
fn gene_certificates_appear_within_two_jumps() {
    let model = build_gene_model(GeneExpressionParams::default()).unwrap();
    let mut rng = path_rng(505, 0);
    for x in common::gene_start_points() {
        let search =
            search_rank_certificate(&model, &x, 2, 64, DEFAULT_RANK_TOL, &mut rng).unwrap();
        let report = search.certificate().expect("gene model must certify");
        assert!(report.sequence.len() <= 2);
        assert!(report.weight > 0.0);
        assert_eq!(report.rank, 2);
        assert!(report.verdict);
    }
}

#[test]
fn translation_model_certifies_with_one_jump() {
    // 1D drift with additive uniform jumps: one parameter column suffices
    let flow = Semiflow::closed_form(
        Arc::new(|x: &State, t: f64| State::from_slice(&[x[0] * (-t).exp()])),
        Arc::new(|x: &State| State::from_slice(&[-x[0]])),
    );
    let jumps = JumpFamily::new(
        ThetaSpace::Interval {
            lo: 0.0,
            hi: 1.0,
            tail: None,
        },
        Arc::new(|theta: Theta, x: &State| State::from_slice(&[x[0] + theta.as_real()])),
        Arc::new(|theta: Theta, _x: &State| {
            if (0.0..=1.0).contains(&theta.as_real()) {
                1.0
            } else {
                0.0
            }
        }),
        ThetaSampler::Exact(Arc::new(|_x: &State, rng: &mut dyn rand::RngCore| {
            Theta::Real(rng.gen::<f64>())
        })),
    );
    let model = PdmpModel::new(
        "translate",
        StateSpace::nonneg_orthant(1),
        flow,
        Intensity::constant(1.0),
        jumps,
    )
    .unwrap();
    let mut rng = path_rng(506, 0);
    let search = search_rank_certificate(
        &model,
        &State::from_slice(&[1.0]),
        2,
        32,
        DEFAULT_RANK_TOL,
        &mut rng,
    )
    .unwrap();
    let report = search.certificate().expect("translation model certifies");
    assert_eq!(report.sequence.len(), 1);
}

#[test]
fn inconclusive_searches_return_their_best_failure() {
    let model = pdmp_core::models::build_halving(1.0).unwrap();
    let mut rng = path_rng(507, 0);
    let search = search_rank_certificate(
        &model,
        &State::from_slice(&[2.0]),
        2,
        32,
        DEFAULT_RANK_TOL,
        &mut rng,
    )
    .unwrap();
    match search {
        RankSearch::Inconclusive { best } => {
            let best = best.expect("failures should still be reported");
            assert!(!best.verdict);
            assert_eq!(best.rank, 0, "all columns vanish for jump-only halving");
        }
        RankSearch::Certificate(_) => panic!("degenerate model cannot certify"),
    }
}
