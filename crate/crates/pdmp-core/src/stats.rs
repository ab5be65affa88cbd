//! Small statistical helpers shared by the diagnostics and the test
//! suites: Kolmogorov-Smirnov distances and moment summaries.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Sample mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
/// Sorts the sample in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic. Sorts both samples in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).expect("NaN in sample"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("NaN in sample"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Tabulated CDF on a sorted grid with linear interpolation between nodes;
/// used to turn quadrature tables of distribution functions into callable
/// references.
#[derive(Clone, Debug)]
pub struct TabulatedCdf {
    ts: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new(ts: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(ts.len(), values.len());
        debug_assert!(ts.windows(2).all(|w| w[0] < w[1]));
        TabulatedCdf { ts, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.ts[0] {
            return self.values[0] * (t / self.ts[0]).max(0.0);
        }
        if t >= *self.ts.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let idx = self.ts.partition_point(|&u| u <= t) - 1;
        let (t0, t1) = (self.ts[idx], self.ts[idx + 1]);
        let (v0, v1) = (self.values[idx], self.values[idx + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}
