use crate::error::{Error, Result};

/// A real-valued process sampled on the uniform grid `t0 + k * dt`.
///
/// Values are always finite and there is at least one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive and finite, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::param("t0", "must be finite"));
        }
        if values.is_empty() {
            return Err(Error::param("values", "a sampled path needs at least one value"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value at index {k}")));
        }
        Ok(Self { t0, dt, values })
    }

    /// Builds a path from values the caller has already produced from finite
    /// arithmetic on finite inputs.
    pub(crate) fn from_raw(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && dt > 0.0);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { t0, dt, values }
    }

    pub fn zeros(t0: f64, dt: f64, len: usize) -> Result<Self> {
        Self::new(t0, dt, vec![0.0; len])
    }

    pub fn from_fn(t0: f64, dt: f64, len: usize, f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut f = f;
        let values = (0..len).map(|k| f(t0 + k as f64 * dt)).collect();
        Self::new(t0, dt, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always `false`; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Elapsed time `k * dt` since the start of the grid.
    pub fn elapsed(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn horizon(&self) -> f64 {
        self.elapsed(self.len() - 1)
    }

    pub fn same_grid(&self, other: &SampledPath) -> bool {
        self.len() == other.len() && self.t0 == other.t0 && self.dt == other.dt
    }

    pub(crate) fn ensure_same_grid(&self, other: &SampledPath, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: ({}, {}, {}) vs ({}, {}, {})",
                self.t0,
                self.dt,
                self.len(),
                other.t0,
                other.dt,
                other.len()
            )))
        }
    }

    /// A new path on the same grid holding `f` applied pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampledPath {
        Self::from_raw(self.t0, self.dt, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute pointwise difference. Panics on a grid mismatch.
    pub fn max_abs_diff(&self, other: &SampledPath) -> f64 {
        assert!(self.same_grid(other), "max_abs_diff on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Increments `values[k + 1] - values[k]`, one fewer than the path length.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Sum of squared increments over the whole grid.
    pub fn quadratic_variation(&self) -> f64 {
        self.increments().map(|d| d * d).sum()
    }

    /// Sum of products of increments with another path on the same grid.
    pub fn cross_variation(&self, other: &SampledPath) -> f64 {
        assert!(self.same_grid(other), "cross_variation on different grids");
        self.increments().zip(other.increments()).map(|(a, b)| a * b).sum()
    }

    /// Whether the path never decreases from one grid point to the next.
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}
