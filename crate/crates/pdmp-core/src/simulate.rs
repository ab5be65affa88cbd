//! Exact simulation of the minimal process: jump times by hazard inversion
//! or thinning, the embedded chain of post-jump positions, and full
//! trajectories with explosion detection.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{CoreError, Result};
use crate::jump::Theta;
use crate::model::{HazardCrossing, PdmpModel, HAZARD_TIME_CAP};
use crate::state::State;

/// How jump times are drawn.
///
/// Inversion solves the hazard-target equation along the flow and is exact
/// up to the integration tolerance. Thinning needs a declared intensity
/// envelope along the flow and serves as an independent cross-check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum JumpTimeMethod {
    #[default]
    HazardInversion,
    Thinning,
}

/// Run-level simulation parameters.
#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    /// Time horizon of a single path.
    pub horizon: f64,
    /// Jump-count cap; hitting it before the horizon flags a suspected
    /// explosion.
    pub max_jumps: usize,
    pub method: JumpTimeMethod,
    /// Base seed for derived per-path streams.
    pub seed: u64,
    /// Worker count for ensemble drivers (unused by single-path runs).
    pub workers: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            horizon: 10.0,
            max_jumps: 1_000_000,
            method: JumpTimeMethod::HazardInversion,
            seed: 0,
            workers: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(CoreError::InvalidConfig(String::from(
                "horizon must be positive",
            )));
        }
        if self.max_jumps == 0 {
            return Err(CoreError::InvalidConfig(String::from(
                "max_jumps must be at least 1",
            )));
        }
        Ok(())
    }
}

/// One jump of a trajectory: holding time since the previous jump, the
/// pre-jump (flowed) state, the post-jump state, and the drawn parameter.
#[derive(Clone, Copy, Debug)]
pub struct JumpRecord {
    pub hold: f64,
    pub pre: State,
    pub post: State,
    pub theta: Theta,
}

/// A piecewise-deterministic path over `[0, horizon]`. Jump times are
/// stored as holding-time deltas; absolute times are prefix sums.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: State,
    pub horizon: f64,
    pub jumps: Vec<JumpRecord>,
    /// Total time covered: `horizon` for completed paths, the last jump
    /// time when the jump cap was hit first.
    pub elapsed: f64,
    pub cap_hit: bool,
    /// The jump cap was exhausted strictly before the horizon: the
    /// numerical surrogate for a finite explosion time.
    pub exploded_suspected: bool,
}

impl Trajectory {
    /// Absolute jump times `t_1 < t_2 < ...` via prefix summation.
    pub fn jump_times(&self) -> Vec<f64> {
        let mut times = Vec::with_capacity(self.jumps.len());
        let mut t = 0.0;
        for rec in &self.jumps {
            t += rec.hold;
            times.push(t);
        }
        times
    }

    /// Right-continuous state at `t`: the post-jump state flows until the
    /// next jump.
    pub fn state_at(&self, model: &PdmpModel, t: f64) -> Result<State> {
        if t > self.elapsed {
            return Err(CoreError::ExplosionSuspected {
                elapsed: self.elapsed,
                jumps: self.jumps.len(),
            });
        }
        let mut seg_start = 0.0;
        let mut state = self.initial;
        for rec in &self.jumps {
            if seg_start + rec.hold > t {
                return model.flow_at(&state, t - seg_start);
            }
            seg_start += rec.hold;
            state = rec.post;
        }
        model.flow_at(&state, t - seg_start)
    }

    pub fn final_state(&self) -> State {
        self.jumps.last().map(|r| r.post).unwrap_or(self.initial)
    }
}

/// Draws the first jump time from `x` and returns it with the pre-jump
/// state reached by the flow.
pub fn sample_jump_time(
    model: &PdmpModel,
    x: &State,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<HazardCrossing> {
    match method {
        JumpTimeMethod::HazardInversion => {
            let target: f64 = Exp1.sample(rng);
            model.hazard_crossing(x, target)
        }
        JumpTimeMethod::Thinning => {
            let bound = model.intensity().flow_bound(x).ok_or_else(|| {
                CoreError::InvalidModel(String::from(
                    "thinning requires an intensity bound along the flow",
                ))
            })?;
            if bound <= 0.0 {
                return Err(CoreError::HorizonExhausted {
                    target: f64::INFINITY,
                    reached: 0.0,
                });
            }
            let mut t = 0.0;
            loop {
                let step: f64 = Exp1.sample(rng);
                t += step / bound;
                if t > HAZARD_TIME_CAP {
                    return Err(CoreError::HorizonExhausted {
                        target: f64::INFINITY,
                        reached: t,
                    });
                }
                let y = model.flow_at(x, t)?;
                let rate = model.intensity_at(&y);
                if rate > bound * (1.0 + 1e-9) {
                    return Err(CoreError::ThinningBoundViolated {
                        bound,
                        observed: rate,
                    });
                }
                if rng.gen::<f64>() * bound < rate {
                    return Ok(HazardCrossing { time: t, state: y });
                }
            }
        }
    }
}

/// One step of the embedded chain of post-jump positions.
#[derive(Clone, Copy, Debug)]
pub struct ChainStep {
    pub state: State,
    pub pre: State,
    pub hold: f64,
    pub theta: Theta,
}

/// Samples the next post-jump position from `x`: a jump time followed by a
/// jump draw.
pub fn step_embedded_chain(
    model: &PdmpModel,
    x: &State,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<ChainStep> {
    let crossing = sample_jump_time(model, x, method, rng)?;
    let (state, theta) = model.jump_from(&crossing.state, rng)?;
    Ok(ChainStep {
        state,
        pre: crossing.state,
        hold: crossing.time,
        theta,
    })
}

/// Simulates a path until the horizon or the jump cap, whichever comes
/// first.
pub fn simulate_path(
    model: &PdmpModel,
    x0: &State,
    config: &SimulationConfig,
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    config.validate()?;
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut x = *x0;
    loop {
        if jumps.len() >= config.max_jumps {
            return Ok(Trajectory {
                initial: *x0,
                horizon: config.horizon,
                jumps,
                elapsed: t,
                cap_hit: true,
                exploded_suspected: t < config.horizon,
            });
        }
        let step = step_embedded_chain(model, &x, config.method, rng)?;
        if t + step.hold > config.horizon {
            return Ok(Trajectory {
                initial: *x0,
                horizon: config.horizon,
                jumps,
                elapsed: config.horizon,
                cap_hit: false,
                exploded_suspected: false,
            });
        }
        t += step.hold;
        jumps.push(JumpRecord {
            hold: step.hold,
            pre: step.pre,
            post: step.state,
            theta: step.theta,
        });
        x = step.state;
    }
}

/// Draws `X(t)` for every time in the sorted grid `ts` from one fresh
/// path. Fails with an explosion status if the jump cap is exhausted
/// before the last time.
pub fn sample_positions_at(
    model: &PdmpModel,
    x0: &State,
    ts: &[f64],
    method: JumpTimeMethod,
    max_jumps: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<State>> {
    debug_assert!(ts.windows(2).all(|w| w[0] <= w[1]), "time grid must be sorted");
    let mut out = Vec::with_capacity(ts.len());
    let mut seg_start = 0.0;
    let mut x = *x0;
    let mut next = 0;
    let mut jumps = 0usize;
    while next < ts.len() {
        if jumps >= max_jumps {
            return Err(CoreError::ExplosionSuspected {
                elapsed: seg_start,
                jumps,
            });
        }
        let crossing = sample_jump_time(model, &x, method, rng)?;
        let seg_end = seg_start + crossing.time;
        while next < ts.len() && ts[next] < seg_end {
            out.push(model.flow_at(&x, ts[next] - seg_start)?);
            next += 1;
        }
        if next >= ts.len() {
            break;
        }
        let (post, _theta) = model.jump_from(&crossing.state, rng)?;
        x = post;
        seg_start = seg_end;
        jumps += 1;
    }
    Ok(out)
}

/// `X(t)` from a fresh path.
pub fn sample_position_at(
    model: &PdmpModel,
    x0: &State,
    t: f64,
    config: &SimulationConfig,
    rng: &mut dyn RngCore,
) -> Result<State> {
    if t > config.horizon {
        return Err(CoreError::InvalidConfig(String::from(
            "query time exceeds the configured horizon",
        )));
    }
    let states = sample_positions_at(model, x0, &[t], config.method, config.max_jumps, rng)?;
    Ok(states[0])
}

/// Independent per-path RNG stream derived from `(seed, path)`; results of
/// parallel ensembles merge deterministically by path index.
pub fn path_rng(seed: u64, path: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_halving, build_kato_shift, KatoShiftParams};

    #[test]
    fn constant_rate_holding_times_have_unit_mean() {
        let model = build_halving(2.0).unwrap();
        let mut rng = path_rng(3, 0);
        let x = State::from_slice(&[1.0]);
        let n = 20_000;
        let mut total = 0.0;
        for _ in 0..n {
            total += sample_jump_time(&model, &x, JumpTimeMethod::HazardInversion, &mut rng)
                .unwrap()
                .time;
        }
        let mean = total / n as f64;
        // Exp(2) has mean 1/2 and sd 1/2; 4 sigma around the mean.
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn path_respects_horizon_and_never_flags_explosion() {
        let model = build_halving(1.0).unwrap();
        let mut rng = path_rng(9, 1);
        let config = SimulationConfig {
            horizon: 50.0,
            ..Default::default()
        };
        let traj = simulate_path(&model, &State::from_slice(&[4.0]), &config, &mut rng).unwrap();
        assert!(!traj.exploded_suspected);
        assert_eq!(traj.elapsed, 50.0);
        let times = traj.jump_times();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert!(times.last().copied().unwrap_or(0.0) <= 50.0);
    }

    #[test]
    fn explosive_shift_model_hits_the_cap() {
        let model = build_kato_shift(KatoShiftParams::default()).unwrap();
        let mut rng = path_rng(11, 0);
        let config = SimulationConfig {
            horizon: 3.0,
            max_jumps: 2_000,
            ..Default::default()
        };
        let traj = simulate_path(&model, &State::from_slice(&[1.0]), &config, &mut rng).unwrap();
        assert!(traj.cap_hit);
        assert!(traj.exploded_suspected);
        assert!(traj.elapsed < 3.0);
    }

    #[test]
    fn position_queries_fail_past_explosion() {
        let model = build_kato_shift(KatoShiftParams::default()).unwrap();
        let mut rng = path_rng(12, 0);
        let err = sample_positions_at(
            &model,
            &State::from_slice(&[1.0]),
            &[2.5],
            JumpTimeMethod::HazardInversion,
            1_000,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::ExplosionSuspected { .. }));
    }

    #[test]
    fn trajectory_state_lookup_matches_segments() {
        let model = build_halving(1.0).unwrap();
        let mut rng = path_rng(21, 0);
        let config = SimulationConfig {
            horizon: 5.0,
            ..Default::default()
        };
        let x0 = State::from_slice(&[2.0]);
        let traj = simulate_path(&model, &x0, &config, &mut rng).unwrap();
        // before the first jump the state is x0 (trivial flow)
        if let Some(first) = traj.jumps.first() {
            let probe = first.hold * 0.5;
            assert_eq!(traj.state_at(&model, probe).unwrap(), x0);
        }
        assert_eq!(traj.state_at(&model, 5.0).unwrap(), traj.final_state());
    }
}
