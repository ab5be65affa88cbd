//! Built-in model instances and the name-addressable registry.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::model::PdmpModel;

pub mod gene;
pub mod kato;
pub mod switching;
pub mod toys;

pub use gene::{build_gene_model, drift_closed_form, GeneExpressionParams};
pub use kato::{build_kato_shift, expected_explosion_time, KatoShiftParams};
pub use switching::{
    birth_death, birth_death_stationary, build_switching_model, two_mode_drift, SwitchingSystem,
};
pub use toys::{build_growth_collapse, build_halving, growth_collapse_survival};

/// A named, defaulted scalar parameter of a registered model.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

/// Registry entry: model identifier, short description, parameter table.
#[derive(Clone, Debug)]
pub struct ModelInfo {
    pub name: &'static str,
    pub doc: &'static str,
    pub params: Vec<ParamSpec>,
}

fn p(name: &'static str, default: f64, doc: &'static str) -> ParamSpec {
    ParamSpec { name, default, doc }
}

/// All models addressable by name from configuration files.
pub fn list_models() -> Vec<ModelInfo> {
    alloc::vec![
        ModelInfo {
            name: "gene",
            doc: "2D gene expression with exponential mRNA bursts and Hill-rate transcription",
            params: alloc::vec![
                p("gamma1", 2.0, "mRNA degradation rate (> gamma2)"),
                p("gamma2", 1.0, "protein degradation rate"),
                p("beta2", 1.0, "translation rate"),
                p("burst_mean", 1.0, "mean burst size"),
                p("kappa1", 1.0, "Hill numerator constant (> 0)"),
                p("kappa2", 1.0, "Hill numerator slope (>= 0)"),
                p("kappa3", 1.0, "Hill denominator slope (>= 0)"),
                p("hill_n", 1.0, "Hill exponent (> 0)"),
            ],
        },
        ModelInfo {
            name: "birth-death",
            doc: "constant-rate birth-death chain embedded as a switching system",
            params: alloc::vec![
                p("birth", 1.0, "birth rate (> 0)"),
                p("death", 2.0, "death rate (> 0)"),
                p("max_mode", 30.0, "truncation level of the mode axis"),
            ],
        },
        ModelInfo {
            name: "switch2",
            doc: "two constant drift fields on the plane with constant switching rates",
            params: alloc::vec![
                p("g1x", 1.0, "mode-0 drift, first coordinate"),
                p("g1y", 0.0, "mode-0 drift, second coordinate"),
                p("g2x", 0.0, "mode-1 drift, first coordinate"),
                p("g2y", 1.0, "mode-1 drift, second coordinate"),
                p("rate12", 1.0, "switching rate 0 -> 1"),
                p("rate21", 1.0, "switching rate 1 -> 0"),
            ],
        },
        ModelInfo {
            name: "kato",
            doc: "explosive pure-jump shift on the integers with rate k^2 + c",
            params: alloc::vec![p("c", 1.0, "rate offset (> 0)")],
        },
        ModelInfo {
            name: "halving",
            doc: "pure-jump halving at constant rate; exact drift oracle",
            params: alloc::vec![p("rate", 1.0, "jump rate (> 0)")],
        },
        ModelInfo {
            name: "growth-collapse",
            doc: "unit upward drift with collapse to half at rate x",
            params: alloc::vec![],
        },
    ]
}

/// Builds a registered model from its name and a parameter table. Unknown
/// parameter keys are rejected; missing keys take their defaults.
pub fn build_model(name: &str, params: &BTreeMap<String, f64>) -> Result<PdmpModel> {
    let info = list_models()
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| CoreError::InvalidConfig(format!("unknown model '{name}'")))?;
    for key in params.keys() {
        if !info.params.iter().any(|p| p.name == key) {
            return Err(CoreError::InvalidConfig(format!(
                "unknown parameter '{key}' for model '{name}'"
            )));
        }
    }
    let get = |key: &str| -> f64 {
        params
            .get(key)
            .copied()
            .unwrap_or_else(|| info.params.iter().find(|p| p.name == key).unwrap().default)
    };
    match name {
        "gene" => build_gene_model(GeneExpressionParams {
            gamma1: get("gamma1"),
            gamma2: get("gamma2"),
            beta2: get("beta2"),
            burst_mean: get("burst_mean"),
            kappa1: get("kappa1"),
            kappa2: get("kappa2"),
            kappa3: get("kappa3"),
            hill_n: get("hill_n"),
        }),
        "birth-death" => {
            let max_mode = get("max_mode");
            if max_mode < 1.0 || max_mode != libm::floor(max_mode) {
                return Err(CoreError::InvalidConfig(String::from(
                    "max_mode must be a positive integer",
                )));
            }
            birth_death(get("birth"), get("death"), max_mode as usize)
        }
        "switch2" => two_mode_drift(
            [get("g1x"), get("g1y")],
            [get("g2x"), get("g2y")],
            get("rate12"),
            get("rate21"),
        ),
        "kato" => {
            let c = get("c");
            if c <= 0.0 {
                return Err(CoreError::InvalidConfig(String::from("c must be positive")));
            }
            build_kato_shift(KatoShiftParams {
                rate: alloc::sync::Arc::new(move |k: f64| k * k + c),
                rate_floor: c,
            })
        }
        "halving" => {
            let rate = get("rate");
            if rate <= 0.0 {
                return Err(CoreError::InvalidConfig(String::from(
                    "rate must be positive",
                )));
            }
            build_halving(rate)
        }
        "growth-collapse" => build_growth_collapse(),
        _ => unreachable!("registry covers all names"),
    }
}
