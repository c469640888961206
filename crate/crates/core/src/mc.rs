//! Monte Carlo over independent paths.
//!
//! Path `i` of a batch is seeded by `(base_seed, i)`. Per-path statistics are
//! computed in parallel, collected in index order and then summed
//! sequentially, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::degenerate::{self, DegenerateStream};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pathgen::{simulate_path_with, PathBundle, RankStream, SimulationOptions};
use crate::rng::SeedRecord;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub estimate: f64,
    /// Sample standard deviation over `sqrt(n)`; NaN when `n = 1`.
    pub stderr: f64,
    pub n: u64,
    #[serde(skip)]
    pub seeds: Vec<SeedRecord>,
}

impl McResult {
    pub fn from_values(values: &[f64], seeds: Vec<SeedRecord>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Self {
            estimate: mean,
            stderr,
            n: n as u64,
            seeds,
        }
    }

    /// `|estimate - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.estimate - target).abs() / self.stderr
    }
}

/// Evaluates `f` on seeds `(base_seed, 0..n_paths)` and returns the values in
/// index order.
pub fn mc_map<T, F>(base_seed: u64, n_paths: u64, f: F) -> Result<(Vec<T>, Vec<SeedRecord>)>
where
    T: Send,
    F: Fn(&SeedRecord) -> Result<T> + Sync,
{
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    let seeds: Vec<SeedRecord> = (0..n_paths).map(|i| SeedRecord::new(base_seed, i)).collect();
    let values = seeds.par_iter().map(&f).collect::<Result<Vec<T>>>()?;
    Ok((values, seeds))
}

/// Mean and standard error of a per-path statistic over the scenario's
/// paths.
pub fn mc_batch<F>(s: &Scenario, f: F) -> Result<McResult>
where
    F: Fn(&PathBundle) -> f64 + Sync,
{
    s.validate()?;
    let opts = SimulationOptions {
        zero_tol: s.thresholds.zero_tol,
        ..Default::default()
    };
    let (values, seeds) = mc_map(s.base_seed, s.n_paths, |seed| {
        let b = simulate_path_with(&s.params, s.horizon, s.dt, seed, &opts)?;
        Ok(f(&b))
    })?;
    Ok(McResult::from_values(&values, seeds))
}

/// First grid times at which `R1` reached `eps` and `eps / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CornerHit {
    pub at_eps: Option<f64>,
    pub at_half_eps: Option<f64>,
}

/// Scans one path for corner visits, stopping once `R1 <= eps / 2`.
pub fn first_corner_hit(p: &ModelParams, horizon: f64, dt: f64, seed: &SeedRecord, eps: f64) -> Result<CornerHit> {
    let mut hit = CornerHit::default();
    let mut record = |k: usize, r1: f64| {
        if hit.at_eps.is_none() && r1 <= eps {
            hit.at_eps = Some(k as f64 * dt);
        }
        if r1 <= 0.5 * eps {
            hit.at_half_eps = Some(k as f64 * dt);
            return true;
        }
        false
    };
    if p.sigma() == 0.0 {
        for (k, st) in DegenerateStream::new(p, horizon, dt, seed)? {
            if record(k, st.r1) {
                break;
            }
        }
    } else {
        for pt in RankStream::new(p, horizon, dt, seed)? {
            let pt = pt?;
            if record(pt.index, pt.leader()) {
                break;
            }
        }
    }
    Ok(hit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerHitReport {
    pub eps_corner: f64,
    /// Fraction of paths with `min R1 <= eps_corner` over the horizon.
    pub result: McResult,
    /// Same at `eps_corner / 2`; a large gap to `result` signals that the
    /// threshold, not the corner, drives the estimate.
    pub half_eps: McResult,
    /// `exp(-2 (g - h) xi_sum)` when `sigma = 0` and `g > h`.
    pub reference: Option<f64>,
    #[serde(skip)]
    pub hits: Vec<CornerHit>,
}

impl CornerHitReport {
    /// Hit frequency at `eps_corner` by time `t <= horizon`, from the
    /// recorded first-hit times of the same paths.
    pub fn frequency_by(&self, t: f64) -> f64 {
        let n = self.hits.len() as f64;
        self.hits.iter().filter(|h| h.at_eps.is_some_and(|s| s <= t)).count() as f64 / n
    }
}

pub fn mc_corner_hit(s: &Scenario) -> Result<CornerHitReport> {
    s.validate()?;
    if s.n_paths < 100 {
        return Err(Error::param(
            "n_paths",
            format!("corner estimates need at least 100 paths, got {}", s.n_paths),
        ));
    }
    let eps = s.thresholds.eps_corner;
    let (hits, seeds) = mc_map(s.base_seed, s.n_paths, |seed| {
        first_corner_hit(&s.params, s.horizon, s.dt, seed, eps)
    })?;
    let ind = |f: fn(&CornerHit) -> bool| hits.iter().map(|h| f(h) as u8 as f64).collect::<Vec<_>>();
    let result = McResult::from_values(&ind(|h| h.at_eps.is_some()), seeds.clone());
    let half_eps = McResult::from_values(&ind(|h| h.at_half_eps.is_some()), seeds);
    let p = &s.params;
    let reference = if p.sigma() == 0.0 && p.g() > p.h() {
        Some(degenerate::degenerate_corner_prob(p)?)
    } else {
        None
    };
    Ok(CornerHitReport {
        eps_corner: eps,
        result,
        half_eps,
        reference,
        hits,
    })
}
