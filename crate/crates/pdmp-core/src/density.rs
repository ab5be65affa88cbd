//! Invariant-density estimation for the embedded chain and the
//! continuous-time process, plus stationarity, stability, and
//! holding-time diagnostics.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{CoreError, Result};
use crate::model::PdmpModel;
use crate::simulate::{
    sample_jump_time, sample_positions_at, step_embedded_chain, JumpTimeMethod,
};
use crate::state::State;
use crate::stats::mean_and_se;

/// One axis of a histogram grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Axis {
    /// `bins` equal cells over `[lo, hi)`, the top edge closed.
    Continuous { lo: f64, hi: f64, bins: usize },
    /// Integer values `0..count`, one cell each (mode axes).
    Discrete { count: usize },
}

impl Axis {
    fn bins(&self) -> usize {
        match self {
            Axis::Continuous { bins, .. } => *bins,
            Axis::Discrete { count } => *count,
        }
    }

    fn locate(&self, v: f64) -> Option<usize> {
        match self {
            Axis::Continuous { lo, hi, bins } => {
                if v < *lo || v > *hi {
                    return None;
                }
                let idx = ((v - lo) / (hi - lo) * *bins as f64) as usize;
                Some(idx.min(bins - 1))
            }
            Axis::Discrete { count } => {
                let idx = v as usize;
                if v >= 0.0 && v == libm::floor(v) && idx < *count {
                    Some(idx)
                } else {
                    None
                }
            }
        }
    }

    fn width(&self) -> f64 {
        match self {
            Axis::Continuous { lo, hi, bins } => (hi - lo) / *bins as f64,
            Axis::Discrete { .. } => 1.0,
        }
    }
}

/// A box-shaped histogram grid, with optional discrete axes for modes.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        for axis in &axes {
            match axis {
                Axis::Continuous { lo, hi, bins } => {
                    if !(hi > lo) || *bins < 2 {
                        return Err(CoreError::InvalidConfig(String::from(
                            "continuous axes need hi > lo and at least 2 bins",
                        )));
                    }
                }
                Axis::Discrete { count } => {
                    if *count == 0 {
                        return Err(CoreError::InvalidConfig(String::from(
                            "discrete axes need at least one value",
                        )));
                    }
                }
            }
        }
        Ok(GridSpec { axes })
    }

    /// Uniform 2D grid over `[0, hi]^2`.
    pub fn square(hi: f64, bins: usize) -> Self {
        GridSpec {
            axes: alloc::vec![
                Axis::Continuous { lo: 0.0, hi, bins },
                Axis::Continuous { lo: 0.0, hi, bins },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.bins()).product()
    }

    /// Row-major cell index of a state, `None` when outside the box.
    pub fn cell_of(&self, x: &State) -> Option<usize> {
        debug_assert_eq!(x.dim(), self.axes.len());
        let mut idx = 0;
        for (axis, &v) in self.axes.iter().zip(x.iter()) {
            idx = idx * axis.bins() + axis.locate(v)?;
        }
        Some(idx)
    }

    pub fn cell_volume(&self, _cell: usize) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    fn cell_coords(&self, mut cell: usize) -> Vec<usize> {
        let mut coords = alloc::vec![0usize; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            coords[i] = cell % axis.bins();
            cell /= axis.bins();
        }
        coords
    }

    pub fn cell_center(&self, cell: usize) -> State {
        let coords = self.cell_coords(cell);
        let mut out = State::zeros(self.axes.len());
        for (i, (axis, &c)) in self.axes.iter().zip(coords.iter()).enumerate() {
            out[i] = match axis {
                Axis::Continuous { lo, .. } => lo + (c as f64 + 0.5) * axis.width(),
                Axis::Discrete { .. } => c as f64,
            };
        }
        out
    }

    /// Per-axis `[lo, hi)` bounds of a cell (degenerate for discrete axes).
    pub fn cell_bounds(&self, cell: usize) -> Vec<(f64, f64)> {
        let coords = self.cell_coords(cell);
        self.axes
            .iter()
            .zip(coords.iter())
            .map(|(axis, &c)| match axis {
                Axis::Continuous { lo, .. } => {
                    let w = axis.width();
                    (lo + c as f64 * w, lo + (c + 1) as f64 * w)
                }
                Axis::Discrete { .. } => (c as f64, c as f64),
            })
            .collect()
    }

    /// Uniform draw from a cell (discrete axes return the cell value).
    pub fn sample_in_cell(&self, cell: usize, rng: &mut dyn RngCore) -> State {
        let coords = self.cell_coords(cell);
        let mut out = State::zeros(self.axes.len());
        for (i, (axis, &c)) in self.axes.iter().zip(coords.iter()).enumerate() {
            out[i] = match axis {
                Axis::Continuous { lo, .. } => {
                    let w = axis.width();
                    lo + (c as f64 + rng.gen::<f64>()) * w
                }
                Axis::Discrete { .. } => c as f64,
            };
        }
        out
    }
}

/// Weighted histogram over a grid. Out-of-box mass is tracked separately
/// and participates in every total-variation comparison as an extra cell.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityEstimate {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    pub outside: f64,
    pub samples: u64,
    pub burn_in: u64,
}

impl DensityEstimate {
    pub fn empty(grid: GridSpec) -> Self {
        let cells = grid.cell_count();
        DensityEstimate {
            grid,
            weights: alloc::vec![0.0; cells],
            outside: 0.0,
            samples: 0,
            burn_in: 0,
        }
    }

    pub fn add(&mut self, x: &State, w: f64) {
        match self.grid.cell_of(x) {
            Some(c) => self.weights[c] += w,
            None => self.outside += w,
        }
        self.samples += 1;
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.outside
    }

    /// Normalized in-box masses (sum to `1 - outside_mass`).
    pub fn masses(&self) -> Vec<f64> {
        let total = self.total_weight();
        if total == 0.0 {
            return alloc::vec![0.0; self.weights.len()];
        }
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn outside_mass(&self) -> f64 {
        let total = self.total_weight();
        if total == 0.0 {
            0.0
        } else {
            self.outside / total
        }
    }

    /// Density value (mass per unit reference measure) of a cell.
    pub fn density(&self, cell: usize) -> f64 {
        let total = self.total_weight();
        if total == 0.0 {
            return 0.0;
        }
        self.weights[cell] / total / self.grid.cell_volume(cell)
    }

    /// Builds an estimate directly from per-cell masses (oracle inputs).
    pub fn from_masses(grid: GridSpec, masses: Vec<f64>, outside: f64) -> Self {
        debug_assert_eq!(masses.len(), grid.cell_count());
        DensityEstimate {
            grid,
            weights: masses,
            outside,
            samples: 0,
            burn_in: 0,
        }
    }

    /// Merges another histogram over the same grid (associative,
    /// order-independent up to float rounding).
    pub fn merge(&mut self, other: &DensityEstimate) {
        debug_assert_eq!(self.grid, other.grid);
        for (w, o) in self.weights.iter_mut().zip(other.weights.iter()) {
            *w += o;
        }
        self.outside += other.outside;
        self.samples += other.samples;
    }
}

/// Total-variation distance between two estimates on the same grid,
/// counting out-of-box mass as an extra cell.
pub fn tv_distance(a: &DensityEstimate, b: &DensityEstimate) -> f64 {
    assert_eq!(a.grid, b.grid, "grids must match for TV comparison");
    let ma = a.masses();
    let mb = b.masses();
    let mut sum = (a.outside_mass() - b.outside_mass()).abs();
    for (x, y) in ma.iter().zip(mb.iter()) {
        sum += (x - y).abs();
    }
    0.5 * sum
}

/// Histogram of the embedded chain `X_{burn_in+1}, ..., X_n` from one run.
pub fn estimate_chain_density(
    model: &PdmpModel,
    x0: &State,
    n: u64,
    burn_in: u64,
    grid: GridSpec,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<DensityEstimate> {
    if n <= burn_in {
        return Err(CoreError::InvalidConfig(String::from(
            "chain length must exceed the burn-in",
        )));
    }
    let mut est = DensityEstimate::empty(grid);
    est.burn_in = burn_in;
    let mut x = *x0;
    for step in 0..n {
        let s = step_embedded_chain(model, &x, method, rng)?;
        x = s.state;
        if step >= burn_in {
            est.add(&x, 1.0);
        }
    }
    Ok(est)
}

/// Time-weighted occupation histogram of `t -> X(t)` over `[0, horizon]`,
/// sampled along each flow segment at a step resolving the local jump
/// rate.
pub fn estimate_flow_density(
    model: &PdmpModel,
    x0: &State,
    horizon: f64,
    grid: GridSpec,
    method: JumpTimeMethod,
    max_jumps: usize,
    rng: &mut dyn RngCore,
) -> Result<DensityEstimate> {
    if !(horizon > 0.0) {
        return Err(CoreError::InvalidConfig(String::from(
            "horizon must be positive",
        )));
    }
    let mut est = DensityEstimate::empty(grid);
    let mut t = 0.0;
    let mut x = *x0;
    let mut jumps = 0usize;
    while t < horizon {
        if jumps >= max_jumps {
            return Err(CoreError::ExplosionSuspected { elapsed: t, jumps });
        }
        let crossing = sample_jump_time(model, &x, method, rng)?;
        let seg = crossing.time.min(horizon - t);
        // Midpoint sampling of the segment; step targets ~100 samples per
        // unit of local jump intensity so holding times are resolved.
        let rate_scale = model
            .intensity()
            .flow_bound(&x)
            .unwrap_or_else(|| model.intensity_at(&x))
            .max(1e-3);
        let dt = (0.01 / rate_scale).min(seg.max(1e-12));
        let m = libm::ceil(seg / dt) as usize;
        let w = seg / m as f64;
        for k in 0..m {
            let s = (k as f64 + 0.5) * w;
            est.add(&model.flow_at(&x, s)?, w);
        }
        if t + crossing.time >= horizon {
            break;
        }
        let (post, _theta) = model.jump_from(&crossing.state, rng)?;
        x = post;
        t += crossing.time;
        jumps += 1;
    }
    est.samples = est.samples.max(1);
    Ok(est)
}

/// Resamples a point from the in-box part of an estimate: a cell by its
/// mass, then uniformly inside the cell.
pub fn resample(est: &DensityEstimate, rng: &mut dyn RngCore) -> State {
    let total: f64 = est.weights.iter().sum();
    debug_assert!(total > 0.0, "cannot resample an empty histogram");
    let mut u = rng.gen::<f64>() * total;
    let mut cell = est.weights.len() - 1;
    for (c, w) in est.weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            cell = c;
            break;
        }
    }
    est.grid.sample_in_cell(cell, rng)
}

/// Pushes the estimated density through one embedded-chain step and
/// returns the total-variation distance between the input and the stepped
/// histogram. Small residuals certify approximate invariance.
pub fn stationarity_residual(
    model: &PdmpModel,
    est: &DensityEstimate,
    steps: u64,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut after = DensityEstimate::empty(est.grid.clone());
    for _ in 0..steps {
        let x = resample(est, rng);
        let s = step_embedded_chain(model, &x, method, rng)?;
        after.add(&s.state, 1.0);
    }
    // Compare against the in-box normalized input.
    let before = DensityEstimate::from_masses(est.grid.clone(), est.masses(), 0.0);
    let mut before = before;
    let in_box: f64 = before.weights.iter().sum();
    if in_box > 0.0 {
        for w in &mut before.weights {
            *w /= in_box;
        }
    }
    Ok(tv_distance(&before, &after))
}

/// Pairwise L1 distances between the laws of `X(t)` from different start
/// points, estimated over `paths` fresh trajectories each.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityCurves {
    pub ts: Vec<f64>,
    /// Index pairs `(i, j)` into the start list.
    pub pairs: Vec<(usize, usize)>,
    /// `l1[p][k]` is the distance for pair `p` at time `ts[k]`.
    pub l1: Vec<Vec<f64>>,
}

pub fn stability_probe(
    model: &PdmpModel,
    starts: &[State],
    ts: &[f64],
    grid: GridSpec,
    paths: u64,
    method: JumpTimeMethod,
    max_jumps: usize,
    rng: &mut dyn RngCore,
) -> Result<StabilityCurves> {
    if starts.len() < 2 {
        return Err(CoreError::InvalidConfig(String::from(
            "stability probe needs at least two start points",
        )));
    }
    let mut hists: Vec<Vec<DensityEstimate>> = starts
        .iter()
        .map(|_| ts.iter().map(|_| DensityEstimate::empty(grid.clone())).collect())
        .collect();
    for (i, x0) in starts.iter().enumerate() {
        for _ in 0..paths {
            let states = sample_positions_at(model, x0, ts, method, max_jumps, rng)?;
            for (k, s) in states.iter().enumerate() {
                hists[i][k].add(s, 1.0);
            }
        }
    }
    let mut pairs = Vec::new();
    let mut l1 = Vec::new();
    for i in 0..starts.len() {
        for j in (i + 1)..starts.len() {
            pairs.push((i, j));
            l1.push(
                (0..ts.len())
                    .map(|k| 2.0 * tv_distance(&hists[i][k], &hists[j][k]))
                    .collect(),
            );
        }
    }
    Ok(StabilityCurves {
        ts: ts.to_vec(),
        pairs,
        l1,
    })
}

/// Stationary mean holding time estimated by sampling starts from a chain
/// density estimate; stability under doubling is the integrability
/// surrogate.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HoldingTimeReport {
    /// Pooled estimate over both halves.
    pub estimate: f64,
    pub std_error: f64,
    /// Estimate from the first half of the budget.
    pub first_half: f64,
    pub first_half_se: f64,
    /// Whether doubling the budget moved the estimate by less than three
    /// combined standard errors.
    pub stable: bool,
}

pub fn check_r0v(
    model: &PdmpModel,
    est: &DensityEstimate,
    samples: u64,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<HoldingTimeReport> {
    if samples < 16 {
        return Err(CoreError::InvalidConfig(String::from(
            "holding-time check needs at least 16 samples",
        )));
    }
    let mut draws = Vec::with_capacity(samples as usize * 2);
    for _ in 0..2 * samples {
        let x = resample(est, rng);
        draws.push(sample_jump_time(model, &x, method, rng)?.time);
    }
    let (m1, se1) = mean_and_se(&draws[..samples as usize]);
    let (m2, se2) = mean_and_se(&draws);
    let combined = (se1 * se1 + se2 * se2).max(1e-300);
    let stable = (m2 - m1).abs() < 3.0 * num_traits::Float::sqrt(combined);
    Ok(HoldingTimeReport {
        estimate: m2,
        std_error: se2,
        first_half: m1,
        first_half_se: se1,
        stable,
    })
}

/// Strict-positivity probe: the first half of a long chain run predicts
/// per-cell expected counts; every sufficiently expected cell must be hit
/// in the second half.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositivityReport {
    pub cells_checked: usize,
    pub empty_cells: Vec<usize>,
}

impl PositivityReport {
    pub fn passed(&self) -> bool {
        self.empty_cells.is_empty()
    }
}

pub fn positivity_probe(
    model: &PdmpModel,
    x0: &State,
    n: u64,
    burn_in: u64,
    grid: GridSpec,
    min_expected: f64,
    method: JumpTimeMethod,
    rng: &mut dyn RngCore,
) -> Result<PositivityReport> {
    let half = (n - burn_in) / 2;
    let pilot = estimate_chain_density(model, x0, burn_in + half, burn_in, grid.clone(), method, rng)?;
    let probe = estimate_chain_density(model, x0, burn_in + half, burn_in, grid, method, rng)?;
    let mut checked = 0;
    let mut empty = Vec::new();
    for c in 0..pilot.weights.len() {
        if pilot.weights[c] >= min_expected {
            checked += 1;
            if probe.weights[c] == 0.0 {
                empty.push(c);
            }
        }
    }
    Ok(PositivityReport {
        cells_checked: checked,
        empty_cells: empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_halving;
    use crate::simulate::path_rng;

    #[test]
    fn grid_indexing_round_trips() {
        let grid = GridSpec::new(alloc::vec![
            Axis::Continuous {
                lo: 0.0,
                hi: 2.0,
                bins: 4
            },
            Axis::Discrete { count: 3 },
        ])
        .unwrap();
        assert_eq!(grid.cell_count(), 12);
        for cell in 0..12 {
            let center = grid.cell_center(cell);
            assert_eq!(grid.cell_of(&center), Some(cell));
        }
        assert_eq!(grid.cell_of(&State::from_slice(&[2.5, 0.0])), None);
        assert_eq!(grid.cell_of(&State::from_slice(&[0.5, 1.5])), None);
        // closed top edge
        assert_eq!(grid.cell_of(&State::from_slice(&[2.0, 2.0])), Some(11));
    }

    #[test]
    fn refined_histogram_preserves_coarse_masses() {
        let model = build_halving(1.0).unwrap();
        let mut rng1 = path_rng(7, 0);
        let mut rng2 = path_rng(7, 0);
        let coarse = GridSpec::new(alloc::vec![Axis::Continuous {
            lo: 0.0,
            hi: 4.0,
            bins: 8
        }])
        .unwrap();
        let fine = GridSpec::new(alloc::vec![Axis::Continuous {
            lo: 0.0,
            hi: 4.0,
            bins: 16
        }])
        .unwrap();
        let x0 = State::from_slice(&[1.0]);
        let a = estimate_chain_density(
            &model,
            &x0,
            2_000,
            100,
            coarse,
            JumpTimeMethod::HazardInversion,
            &mut rng1,
        )
        .unwrap();
        let b = estimate_chain_density(
            &model,
            &x0,
            2_000,
            100,
            fine,
            JumpTimeMethod::HazardInversion,
            &mut rng2,
        )
        .unwrap();
        // count-based weights nest exactly
        for c in 0..a.weights.len() {
            assert_eq!(a.weights[c], b.weights[2 * c] + b.weights[2 * c + 1]);
        }
        assert_eq!(a.outside, b.outside);
    }

    #[test]
    fn tv_between_identical_estimates_is_zero() {
        let grid = GridSpec::square(2.0, 4);
        let mut a = DensityEstimate::empty(grid.clone());
        let mut b = DensityEstimate::empty(grid);
        a.add(&State::from_slice(&[0.5, 0.5]), 1.0);
        b.add(&State::from_slice(&[0.5, 0.5]), 2.0);
        assert!(tv_distance(&a, &b) < 1e-15);
    }

    #[test]
    fn single_sample_chain_concentrates_mass() {
        let model = build_halving(1.0).unwrap();
        let mut rng = path_rng(1, 0);
        let grid = GridSpec::new(alloc::vec![Axis::Continuous {
            lo: 0.0,
            hi: 4.0,
            bins: 8
        }])
        .unwrap();
        let est = estimate_chain_density(
            &model,
            &State::from_slice(&[2.0]),
            1,
            0,
            grid,
            JumpTimeMethod::HazardInversion,
            &mut rng,
        )
        .unwrap();
        let masses = est.masses();
        assert_eq!(masses.iter().filter(|&&m| m > 0.0).count(), 1);
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
