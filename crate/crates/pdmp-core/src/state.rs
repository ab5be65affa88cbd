//! State vectors and state spaces.
//!
//! States are small fixed-capacity vectors so that flow integration and
//! jump maps stay allocation-free; the capacity bounds the dimension of
//! every supported model.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Deref, DerefMut, Index, IndexMut, Mul, Sub};

use crate::error::{CoreError, Result};

/// Maximum state dimension supported by the fixed-capacity [`State`].
pub const MAX_DIM: usize = 6;

/// A point of the state space: a stack-allocated vector of up to
/// [`MAX_DIM`] coordinates.
#[derive(Clone, Copy, PartialEq)]
pub struct State {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl State {
    pub fn from_slice(coords: &[f64]) -> Self {
        assert!(coords.len() <= MAX_DIM, "state dimension exceeds MAX_DIM");
        let mut buf = [0.0; MAX_DIM];
        buf[..coords.len()].copy_from_slice(coords);
        State {
            coords: buf,
            dim: coords.len() as u8,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim <= MAX_DIM);
        State {
            coords: [0.0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim as usize]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    /// Appends a coordinate, growing the dimension by one.
    pub fn push(&mut self, v: f64) {
        assert!((self.dim as usize) < MAX_DIM);
        self.coords[self.dim as usize] = v;
        self.dim += 1;
    }

    /// Drops the last coordinate, shrinking the dimension by one.
    pub fn pop(&mut self) -> f64 {
        assert!(self.dim > 0);
        self.dim -= 1;
        self.coords[self.dim as usize]
    }

    /// `self + scale * other`, dimension-matched.
    pub fn scaled_add(&self, scale: f64, other: &State) -> State {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim as usize {
            out.coords[i] += scale * other.coords[i];
        }
        out
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for v in self.as_slice() {
            s += v * v;
        }
        num_traits::Float::sqrt(s)
    }

    /// Max-norm distance to another state.
    pub fn max_dist(&self, other: &State) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut m = 0.0f64;
        for i in 0..self.dim as usize {
            let d = num_traits::Float::abs(self.coords[i] - other.coords[i]);
            if d > m {
                m = d;
            }
        }
        m
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.as_slice().iter()
    }
}

impl Deref for State {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl DerefMut for State {
    fn deref_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for State {
    type Output = State;
    fn add(self, rhs: State) -> State {
        self.scaled_add(1.0, &rhs)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, rhs: State) -> State {
        self.scaled_add(-1.0, &rhs)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, rhs: f64) -> State {
        let mut out = self;
        for i in 0..out.dim as usize {
            out.coords[i] *= rhs;
        }
        out
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = &'a f64;
    type IntoIter = core::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.as_slice().iter()
    }
}

impl From<&[f64]> for State {
    fn from(s: &[f64]) -> State {
        State::from_slice(s)
    }
}

/// Reference measure on the state space; the Lebesgue factor determines
/// which coordinates participate in rank conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceMeasure {
    /// Lebesgue measure on all coordinates.
    Lebesgue,
    /// Lebesgue on all but the last coordinate, counting measure on the
    /// last (mode) coordinate; used by switching systems.
    LebesgueTimesCounting,
    /// Counting measure on a countable state set.
    Counting,
}

/// The state space `E`: dimension, membership predicate, reference
/// measure, and an optional repair map for states that drift numerically
/// outside `E`.
#[derive(Clone)]
pub struct StateSpace {
    dim: usize,
    measure: ReferenceMeasure,
    contains: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    repair: Arc<dyn Fn(&State, f64) -> Option<State> + Send + Sync>,
}

impl StateSpace {
    pub fn new(
        dim: usize,
        measure: ReferenceMeasure,
        contains: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    ) -> Self {
        let c = contains.clone();
        StateSpace {
            dim,
            measure,
            contains,
            repair: Arc::new(move |x, _tol| if c(x) { Some(*x) } else { None }),
        }
    }

    /// `E = [0, oo)^dim` with Lebesgue measure. States within `tol` below
    /// zero are clamped to the boundary; anything further out is a domain
    /// exit.
    pub fn nonneg_orthant(dim: usize) -> Self {
        StateSpace {
            dim,
            measure: ReferenceMeasure::Lebesgue,
            contains: Arc::new(|x: &State| x.iter().all(|&v| v >= 0.0)),
            repair: Arc::new(|x: &State, tol: f64| {
                let mut out = *x;
                for v in out.as_mut_slice() {
                    if *v < 0.0 {
                        if *v < -tol {
                            return None;
                        }
                        *v = 0.0;
                    }
                }
                Some(out)
            }),
        }
    }

    /// Product of a box-free base space and a finite mode axis stored as
    /// the trailing coordinate.
    pub fn with_mode_axis(
        base_dim: usize,
        mode_count: usize,
        base_contains: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    ) -> Self {
        let contains_base = base_contains.clone();
        let contains = move |x: &State| {
            let mode = x[x.dim() - 1];
            let is_mode = mode >= 0.0 && mode < mode_count as f64 && mode == libm::floor(mode);
            let mut base = *x;
            base.pop();
            is_mode && contains_base(&base)
        };
        let c2 = contains.clone();
        StateSpace {
            dim: base_dim + 1,
            measure: ReferenceMeasure::LebesgueTimesCounting,
            contains: Arc::new(contains),
            repair: Arc::new(move |x, _tol| if c2(x) { Some(*x) } else { None }),
        }
    }

    pub fn with_repair(mut self, repair: Arc<dyn Fn(&State, f64) -> Option<State> + Send + Sync>) -> Self {
        self.repair = repair;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> ReferenceMeasure {
        self.measure
    }

    /// Number of coordinates carrying the Lebesgue factor; this is the
    /// target rank for the smoothing conditions.
    pub fn lebesgue_dim(&self) -> usize {
        match self.measure {
            ReferenceMeasure::Lebesgue => self.dim,
            ReferenceMeasure::LebesgueTimesCounting => self.dim - 1,
            ReferenceMeasure::Counting => 0,
        }
    }

    pub fn contains(&self, x: &State) -> bool {
        debug_assert_eq!(x.dim(), self.dim, "state dimension mismatch");
        (self.contains)(x)
    }

    /// Clamp-or-reject for numerically perturbed states.
    pub fn repair(&self, x: &State, tol: f64) -> Result<State> {
        (self.repair)(x, tol).ok_or_else(|| CoreError::DomainExit {
            what: alloc::format!("{:?} is outside the state space", x),
        })
    }
}

impl fmt::Debug for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateSpace")
            .field("dim", &self.dim)
            .field("measure", &self.measure)
            .finish()
    }
}
