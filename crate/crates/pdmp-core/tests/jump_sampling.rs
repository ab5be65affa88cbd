//! Jump-kernel normalization and sampler laws.

mod common;

use std::sync::Arc;

use common::{gene_hill, gene_start_points, hill_params};
use pdmp_core::models::{birth_death, build_kato_shift, KatoShiftParams};
use pdmp_core::numeric::GaussLegendre;
use pdmp_core::simulate::path_rng;
use pdmp_core::stats::ks_statistic;
use pdmp_core::{
    CoreError, Intensity, JumpFamily, PdmpModel, Semiflow, State, StateSpace, Theta, ThetaSampler,
    ThetaSpace,
};
use rand::Rng;

/// Numerically integrates / sums the parameter density at a point.
fn weight_mass(model: &PdmpModel, x: &State) -> f64 {
    match model.jumps().space() {
        ThetaSpace::Interval { lo, hi, tail } => {
            let hi = if hi.is_finite() {
                *hi
            } else {
                // truncate where the declared tail is negligible
                let tail = tail.as_ref().expect("unbounded interval needs a tail");
                let mut c = 1.0;
                while tail(c) > 1e-12 {
                    c *= 2.0;
                }
                c
            };
            let gl = GaussLegendre::new(32);
            gl.integrate_panels(*lo, hi, 16, |theta| {
                model.jumps().weight(Theta::Real(theta), x)
            })
        }
        ThetaSpace::Finite { count } => (0..*count)
            .map(|j| model.jumps().weight(Theta::Index(j), x))
            .sum(),
        ThetaSpace::PerState { support } => support(x)
            .into_iter()
            .map(|j| model.jumps().weight(Theta::Index(j), x))
            .sum(),
    }
}

#[test]
fn parameter_density_is_normalized_everywhere() {
    let models = [
        gene_hill(),
        birth_death(1.0, 2.0, 12).unwrap(),
        build_kato_shift(KatoShiftParams::default()).unwrap(),
    ];
    let mut rng = path_rng(200, 0);
    for model in &models {
        for i in 0..20 {
            let x = match model.dim() {
                1 => State::from_slice(&[i as f64]),
                2 => State::from_slice(&[rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0]),
                _ => State::from_slice(&[rng.gen::<f64>() * 4.0, (i % 13) as f64]),
            };
            let mass = weight_mass(model, &x);
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "model {} point {:?}: mass {}",
                model.name(),
                x,
                mass
            );
        }
    }
}

#[test]
fn gene_jump_adds_burst_to_mrna_only() {
    let model = gene_hill();
    let mut rng = path_rng(201, 0);
    for _ in 0..100 {
        let x = State::from_slice(&[rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0]);
        let (y, theta) = model.jump_from(&x, &mut rng).unwrap();
        assert_eq!(y[0], theta.as_real() + x[0]);
        assert_eq!(y[1], x[1]);
        assert!(theta.as_real() > 0.0);
    }
}

#[test]
fn burst_draws_follow_the_exponential_density() {
    let model = gene_hill();
    let mut rng = path_rng(202, 0);
    let x = State::from_slice(&[1.0, 1.0]);
    let n = 100_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        draws.push(model.jumps().draw_theta(&x, &mut rng).unwrap().as_real());
    }
    let mean: f64 = draws.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "burst mean {mean}");
    let ks = ks_statistic(&mut draws, |t| 1.0 - (-t).exp());
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn mode_draws_match_the_rate_ratios() {
    let (b, d) = (1.0, 2.0);
    let model = birth_death(b, d, 12).unwrap();
    let x = State::from_slice(&[0.0, 5.0]);
    let mut rng = path_rng(203, 0);
    let n = 100_000;
    let mut ups = 0u64;
    for _ in 0..n {
        let theta = model.jumps().draw_theta(&x, &mut rng).unwrap();
        match theta.as_index() {
            6 => ups += 1,
            4 => {}
            other => panic!("mode jump to non-neighbor {other}"),
        }
    }
    let p_up = ups as f64 / n as f64;
    let want = b / (b + d);
    let sigma = (want * (1.0 - want) / n as f64).sqrt();
    assert!((p_up - want).abs() < 4.0 * sigma, "p_up {p_up} want {want}");
}

/// A user-style model whose burst density is a triangular distribution
/// sampled by rejection from a uniform proposal.
fn triangular_rejection_model(max_attempts: usize, bound: f64) -> PdmpModel {
    let flow = Semiflow::closed_form(
        Arc::new(|x: &State, _t: f64| *x),
        Arc::new(|x: &State| State::zeros(x.dim())),
    );
    let jumps = JumpFamily::new(
        ThetaSpace::Interval {
            lo: 0.0,
            hi: 1.0,
            tail: None,
        },
        Arc::new(|theta: Theta, x: &State| State::from_slice(&[x[0] + theta.as_real()])),
        Arc::new(|theta: Theta, _x: &State| {
            let t = theta.as_real();
            if (0.0..=1.0).contains(&t) {
                2.0 * t
            } else {
                0.0
            }
        }),
        ThetaSampler::Rejection {
            proposal: Arc::new(|_x: &State, rng: &mut dyn rand::RngCore| {
                Theta::Real(rng.gen::<f64>())
            }),
            proposal_density: Arc::new(|theta: Theta, _x: &State| {
                if (0.0..=1.0).contains(&theta.as_real()) {
                    1.0
                } else {
                    0.0
                }
            }),
            bound,
            max_attempts,
        },
    );
    PdmpModel::new(
        "triangular",
        StateSpace::nonneg_orthant(1),
        flow,
        Intensity::constant(1.0),
        jumps,
    )
    .unwrap()
}

#[test]
fn rejection_sampler_reproduces_the_target_density() {
    let model = triangular_rejection_model(1_000_000, 2.0);
    let mut rng = path_rng(204, 0);
    let x = State::from_slice(&[0.0]);
    let n = 100_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        draws.push(model.jumps().draw_theta(&x, &mut rng).unwrap().as_real());
    }
    let ks = ks_statistic(&mut draws, |t| (t * t).clamp(0.0, 1.0));
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn rejection_sampler_fails_loudly_after_the_attempt_cap() {
    // an enormous envelope constant drives the acceptance rate to ~zero
    let model = triangular_rejection_model(64, 1e12);
    let mut rng = path_rng(205, 0);
    let err = model
        .jumps()
        .draw_theta(&State::from_slice(&[0.0]), &mut rng)
        .unwrap_err();
    assert_eq!(err, CoreError::SamplerExhausted { attempts: 64 });
}

#[test]
fn jump_images_stay_in_the_state_space() {
    let model = gene_hill();
    let mut rng = path_rng(206, 0);
    for x in gene_start_points() {
        for _ in 0..200 {
            let (y, _theta) = model.jump_from(&x, &mut rng).unwrap();
            assert!(model.space().contains(&y));
        }
    }
    // hill variant keeps its declared lower bound along every jump image
    let p = hill_params();
    let (lo, _) = p.intensity_bounds();
    assert!(model.intensity().lower_bound().unwrap() >= lo - 1e-12);
}
