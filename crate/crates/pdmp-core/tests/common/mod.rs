//! Shared fixtures for the integration suites.

use pdmp_core::models::{build_gene_model, GeneExpressionParams};
use pdmp_core::numeric::adaptive_quadrature;
use pdmp_core::stats::TabulatedCdf;
use pdmp_core::{PdmpModel, State};

/// Gene parameters with a genuinely state-dependent Hill intensity
/// (the defaults collapse to a constant rate).
pub fn hill_params() -> GeneExpressionParams {
    GeneExpressionParams {
        kappa1: 1.0,
        kappa2: 3.0,
        kappa3: 0.5,
        hill_n: 2.0,
        ..Default::default()
    }
}

pub fn gene_default() -> PdmpModel {
    build_gene_model(GeneExpressionParams::default()).unwrap()
}

pub fn gene_hill() -> PdmpModel {
    build_gene_model(hill_params()).unwrap()
}

/// Hazard of the gene model along the closed-form flow, by adaptive
/// quadrature: independent of the solver-driven path in the model.
pub fn gene_hazard_oracle(p: &GeneExpressionParams, x: &State, t: f64) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let phi = |s: f64| {
        let x2s = x2 * (-p.gamma2 * s).exp() + x1 * p.cross_coupling(s);
        p.hill_intensity(x2s)
    };
    adaptive_quadrature(phi, 0.0, t, 1e-12).unwrap()
}

/// Tabulates the jump-time CDF `F_x(t) = 1 - exp(-Lambda_x(t))` of the
/// gene model on a dense grid via the quadrature oracle.
pub fn gene_jump_cdf(p: &GeneExpressionParams, x: &State, t_max: f64, nodes: usize) -> TabulatedCdf {
    let mut ts = Vec::with_capacity(nodes);
    let mut vs = Vec::with_capacity(nodes);
    for i in 1..=nodes {
        let t = t_max * i as f64 / nodes as f64;
        ts.push(t);
        vs.push(1.0 - (-gene_hazard_oracle(p, x, t)).exp());
    }
    TabulatedCdf::new(ts, vs)
}

/// Five spread-out start points used by the law tests.
pub fn gene_start_points() -> Vec<State> {
    vec![
        State::from_slice(&[0.1, 0.1]),
        State::from_slice(&[1.0, 1.0]),
        State::from_slice(&[0.2, 3.0]),
        State::from_slice(&[3.0, 0.2]),
        State::from_slice(&[2.0, 2.0]),
    ]
}
