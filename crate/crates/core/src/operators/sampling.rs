use serde::{Deserialize, Serialize};

use super::Point;
use crate::young::log_grid;

/// Finite sample grids on which the pointwise hypotheses are decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    /// Points `x` of the domain.
    pub points: Vec<Point>,
    /// Dimension of the gradient variable (1 or 2).
    pub dim: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_count: usize,
    pub directions: usize,
    /// Random pairs for the monotonicity and potential checks.
    pub random_samples: usize,
    /// Hölder exponent of the `(x, s)` regularity condition.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec::unit_square(8)
    }
}

impl SampleSpec {
    /// `k x k` points on `[0, 1]^2` with the default grids.
    pub fn unit_square(k: usize) -> Self {
        let h = 1.0 / (k.max(2) - 1) as f64;
        let points = (0..k * k).map(|i| [(i % k) as f64 * h, (i / k) as f64 * h]).collect();
        SampleSpec {
            points,
            dim: 2,
            s_min: -10.0,
            s_max: 10.0,
            s_count: 64,
            xi_min: 1e-3,
            xi_max: 1e4,
            xi_count: 128,
            directions: 32,
            random_samples: 100_000,
            alpha: 1.0,
            seed: 0,
        }
    }

    /// `k` points on `[0, 1]` with a one-dimensional gradient.
    pub fn unit_interval(k: usize) -> Self {
        let h = 1.0 / (k.max(2) - 1) as f64;
        SampleSpec { points: (0..k).map(|i| [i as f64 * h, 0.0]).collect(), dim: 1, ..SampleSpec::unit_square(8) }
    }

    pub fn with_s_range(mut self, lo: f64, hi: f64) -> Self {
        self.s_min = lo;
        self.s_max = hi;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn s_values(&self) -> Vec<f64> {
        let n = self.s_count.max(1);
        if n == 1 {
            return vec![self.s_min];
        }
        let h = (self.s_max - self.s_min) / (n - 1) as f64;
        (0..n).map(|i| if i == n - 1 { self.s_max } else { self.s_min + i as f64 * h }).collect()
    }

    pub fn xi_magnitudes(&self) -> Vec<f64> {
        log_grid(self.xi_min, self.xi_max, self.xi_count.max(2))
    }

    /// Unit directions: `±e1` in 1D, equally spaced angles on the circle
    /// otherwise.
    pub fn unit_directions(&self) -> Vec<Point> {
        if self.dim == 1 {
            return vec![[1.0, 0.0], [-1.0, 0.0]];
        }
        let k = self.directions.max(1);
        (0..k)
            .map(|i| {
                let a = std::f64::consts::TAU * (i as f64 + 0.5) / k as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    }
}
