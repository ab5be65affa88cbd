//! Flow evaluation, semigroup consistency, and hazard accumulation.

mod common;

use std::sync::Arc;

use common::{gene_default, gene_hazard_oracle, gene_hill, hill_params};
use pdmp_core::models::{build_growth_collapse, two_mode_drift, GeneExpressionParams};
use pdmp_core::simulate::path_rng;
use pdmp_core::{Intensity, JumpFamily, PdmpModel, Semiflow, State, StateSpace, Theta};
use rand::Rng;

/// The gene model as an ODE-defined flow: same field, no closed form.
/// Exercises the integrator-backed path against the exact one.
fn gene_ode_defined(p: GeneExpressionParams, tol: f64) -> PdmpModel {
    let exact = pdmp_core::models::build_gene_model(p).unwrap();
    let field = Arc::new(move |x: &State| {
        State::from_slice(&[-p.gamma1 * x[0], -p.gamma2 * x[1] + p.beta2 * x[0]])
    });
    PdmpModel::new(
        "gene-ode",
        StateSpace::nonneg_orthant(2),
        Semiflow::ode_defined(field, tol),
        Intensity::new(Arc::new(move |x: &State| p.hill_intensity(x[1]))).with_lower_bound(1.0),
        exact.jumps().clone(),
    )
    .unwrap()
}

#[test]
fn gene_flow_matches_frozen_point() {
    // start (1, 0), unit time, gamma1 = 2, gamma2 = 1, beta2 = 1:
    // exact value (e^-2, e^-1 - e^-2)
    let model = gene_default();
    let y = model.flow_at(&State::from_slice(&[1.0, 0.0]), 1.0).unwrap();
    assert!((y[0] - (-2.0f64).exp()).abs() < 1e-12);
    assert!((y[1] - ((-1.0f64).exp() - (-2.0f64).exp())).abs() < 1e-12);
}

#[test]
fn closed_form_flow_agrees_with_integrated_field() {
    let p = GeneExpressionParams::default();
    let exact = gene_default();
    let ode = gene_ode_defined(p, 1e-10);
    let mut rng = path_rng(100, 0);
    for _ in 0..25 {
        let x = State::from_slice(&[rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0]);
        let t = rng.gen::<f64>() * 4.0;
        let a = exact.flow_at(&x, t).unwrap();
        let b = ode.flow_at(&x, t).unwrap();
        assert!(a.max_dist(&b) < 1e-8, "{a:?} vs {b:?} at t={t}");
    }
}

#[test]
fn flow_at_zero_time_is_identity() {
    let mut rng = path_rng(101, 0);
    for model in [gene_default(), gene_hill(), build_growth_collapse().unwrap()] {
        for _ in 0..10 {
            let x = if model.dim() == 2 {
                State::from_slice(&[rng.gen::<f64>() * 5.0, rng.gen::<f64>() * 5.0])
            } else {
                State::from_slice(&[rng.gen::<f64>() * 5.0])
            };
            assert_eq!(model.flow_at(&x, 0.0).unwrap(), x);
        }
    }
}

#[test]
fn origin_is_an_equilibrium_of_the_gene_flow() {
    let model = gene_default();
    let zero = State::from_slice(&[0.0, 0.0]);
    for &t in &[0.3, 1.0, 10.0, 50.0] {
        assert_eq!(model.flow_at(&zero, t).unwrap(), zero);
    }
}

#[test]
fn semigroup_property_holds_within_tolerance() {
    let models = [
        gene_default(),
        gene_hill(),
        two_mode_drift([1.0, 0.0], [0.0, 1.0], 1.0, 1.0).unwrap(),
    ];
    let mut rng = path_rng(102, 0);
    for model in &models {
        let tol = 10.0 * model.flow().tol();
        for _ in 0..20 {
            let x = if model.dim() == 3 {
                State::from_slice(&[rng.gen::<f64>(), rng.gen::<f64>(), 0.0])
            } else {
                State::from_slice(&[rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0])
            };
            let (t, s) = (rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0);
            let direct = model.flow_at(&x, t + s).unwrap();
            let mid = model.flow_at(&x, s).unwrap();
            let composed = model.flow_at(&mid, t).unwrap();
            assert!(
                direct.max_dist(&composed) <= tol,
                "semigroup violation {:?} vs {:?}",
                direct,
                composed
            );
        }
    }
}

#[test]
fn semigroup_property_holds_for_integrated_flows() {
    let ode = gene_ode_defined(GeneExpressionParams::default(), 1e-8);
    let tol = 10.0 * ode.flow().tol();
    let mut rng = path_rng(103, 0);
    for _ in 0..10 {
        let x = State::from_slice(&[rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0]);
        let (t, s) = (rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0);
        let direct = ode.flow_at(&x, t + s).unwrap();
        let composed = ode.flow_at(&ode.flow_at(&x, s).unwrap(), t).unwrap();
        assert!(direct.max_dist(&composed) <= tol.max(1e-9));
    }
}

#[test]
fn gene_flow_preserves_the_nonnegative_quadrant() {
    let model = gene_hill();
    let mut rng = path_rng(104, 0);
    for _ in 0..50 {
        let x = State::from_slice(&[rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0]);
        for &t in &[0.1, 1.0, 10.0, 100.0] {
            let y = model.flow_at(&x, t).unwrap();
            assert!(y[0] >= 0.0 && y[1] >= 0.0, "left the quadrant: {y:?}");
        }
    }
}

#[test]
fn constant_intensity_hazard_is_linear() {
    let model = pdmp_core::models::build_halving(3.0).unwrap();
    let x = State::from_slice(&[1.0]);
    for &t in &[0.2, 1.0, 4.0] {
        let h = model.cumulative_hazard(&x, t).unwrap();
        assert!((h - 3.0 * t).abs() < 1e-9);
    }
}

#[test]
fn unit_rate_fixed_point_hazard_equals_time() {
    // all Hill coefficients at one make the intensity identically one, so
    // the hazard from the resting state is exactly t
    let model = gene_default();
    let x = State::from_slice(&[0.0, 0.0]);
    for &t in &[0.5, 1.0, 7.0] {
        let h = model.cumulative_hazard(&x, t).unwrap();
        assert!((h - t).abs() < 1e-9);
    }
}

#[test]
fn hill_hazard_matches_quadrature_oracle() {
    let p = hill_params();
    let model = gene_hill();
    let x = State::from_slice(&[1.0, 1.0]);
    let got = model.cumulative_hazard(&x, 1.0).unwrap();
    let want = gene_hazard_oracle(&p, &x, 1.0);
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn hazard_is_monotone_along_the_flow() {
    let models = [gene_hill(), build_growth_collapse().unwrap()];
    for model in &models {
        let x = if model.dim() == 2 {
            State::from_slice(&[1.5, 0.4])
        } else {
            State::from_slice(&[0.3])
        };
        let mut prev = 0.0;
        for i in 1..=40 {
            let t = i as f64 * 0.25;
            let h = model.cumulative_hazard(&x, t).unwrap();
            assert!(h >= prev - 1e-12, "hazard decreased at t={t}");
            prev = h;
        }
    }
}

#[test]
fn domain_exit_is_reported_for_outward_flows() {
    // a flow that drives the state negative must raise a domain exit
    let field = Arc::new(|x: &State| State::from_slice(&[-1.0 - 0.0 * x[0]]));
    let model = PdmpModel::new(
        "escaper",
        StateSpace::nonneg_orthant(1),
        Semiflow::ode_defined(field, 1e-8),
        Intensity::constant(1.0),
        JumpFamily::new(
            pdmp_core::ThetaSpace::Finite { count: 1 },
            Arc::new(|_theta: Theta, x: &State| *x),
            Arc::new(|_theta: Theta, _x: &State| 1.0),
            pdmp_core::ThetaSampler::Exact(Arc::new(|_x, _rng| Theta::Index(0))),
        ),
    )
    .unwrap();
    let err = model.flow_at(&State::from_slice(&[0.5]), 2.0).unwrap_err();
    assert!(matches!(err, pdmp_core::CoreError::DomainExit { .. }));
}

#[test]
fn mean_holding_time_respects_the_intensity_sandwich() {
    // E_x(t_1) = integral of survival <= 1 / inf(phi); and >= 1 / sup(phi)
    let p = hill_params();
    let model = gene_hill();
    let (lo, hi) = p.intensity_bounds();
    for x in common::gene_start_points() {
        let m = model.mean_holding_time(&x).unwrap();
        assert!(m <= 1.0 / lo + 1e-9, "mean {m} above 1/inf");
        assert!(m >= 1.0 / hi - 1e-9, "mean {m} below 1/sup");
    }
}
