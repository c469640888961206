//! Occupation-time estimates of local time at 0, and the local-time
//! identities a simulated path must satisfy.
//!
//! The estimator uses the one-sided band `[0, eps)`:
//!
//! ```text
//! L(t_{k+1}) = L(t_k) + 1{0 <= X(t_k) < eps} * rate(k) * dt / (2 eps)
//! ```
//!
//! where `rate(k)` is the quadratic-variation rate of `X` at `t_k`. With
//! this normalization `|X| = |X(0)| + int sgn(X) dX + 2 L` (Tanaka, with
//! `sgn(0) = -1`), so for a process reflected at 0 the estimate tracks the
//! Skorokhod regulator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::SampledPath;
use crate::pathgen::{sgn_left, PathBundle};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeEstimate {
    pub values: SampledPath,
    pub epsilon: f64,
    pub target: String,
}

impl LocalTimeEstimate {
    pub fn terminal(&self) -> f64 {
        self.values.last()
    }
}

pub fn estimate_local_time(
    x: &SampledPath,
    qv_rate: impl Fn(usize) -> f64,
    epsilon: f64,
    target: &str,
) -> Result<LocalTimeEstimate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let scale = x.dt() / (2.0 * epsilon);
    let xs = x.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(acc);
    for (k, x) in xs[..xs.len() - 1].iter().enumerate() {
        if (0.0..epsilon).contains(x) {
            acc += qv_rate(k) * scale;
        }
        out.push(acc);
    }
    Ok(LocalTimeEstimate {
        values: SampledPath::from_raw(x.t0(), x.dt(), out),
        epsilon,
        target: target.to_string(),
    })
}

/// Local time at 0 read off the Tanaka formula on the grid:
/// `L(t_k) = (|X(t_k)| - |X(0)| - sum_{j<k} sgn(X(t_j)) (X(t_{j+1}) - X(t_j))) / 2`.
pub fn tanaka_local_time(x: &SampledPath) -> SampledPath {
    let xs = x.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut integral = 0.0;
    out.push(0.0);
    for k in 1..xs.len() {
        integral += sgn_left(xs[k - 1]) * (xs[k] - xs[k - 1]);
        out.push(0.5 * (xs[k].abs() - xs[0].abs() - integral));
    }
    SampledPath::from_raw(x.t0(), x.dt(), out)
}

/// Relative tolerances of the identity suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityTolerances {
    pub leader: f64,
    pub laggard: f64,
    pub gap: f64,
    pub sum: f64,
    pub split: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        Self {
            leader: 0.05,
            laggard: 0.2,
            gap: 0.2,
            sum: 0.25,
            split: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityEntry {
    pub name: &'static str,
    pub estimate: f64,
    pub reference: f64,
    pub residual: f64,
    /// `relative * (scale + 1)`
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityEntry {
    fn new(name: &'static str, estimate: f64, reference: f64, relative: f64, scale: f64) -> Self {
        let residual = (estimate - reference).abs();
        let tolerance = relative * (scale + 1.0);
        Self {
            name,
            estimate,
            reference,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub epsilon: f64,
    pub entries: Vec<IdentityEntry>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Quadratic-variation rate of name 1: `rho^2` while it leads, else `sigma^2`.
pub fn name1_rate(b: &PathBundle) -> impl Fn(usize) -> f64 + '_ {
    let (rr, ss) = (b.params.rho().powi(2), b.params.sigma_sq());
    move |k| if b.x1.values()[k] > b.x2.values()[k] { rr } else { ss }
}

/// Quadratic-variation rate of name 2: `rho^2` while it leads (ties go to
/// name 2, matching the name assembly), else `sigma^2`.
pub fn name2_rate(b: &PathBundle) -> impl Fn(usize) -> f64 + '_ {
    let (rr, ss) = (b.params.rho().powi(2), b.params.sigma_sq());
    move |k| if b.x1.values()[k] > b.x2.values()[k] { ss } else { rr }
}

/// Compares occupation estimates against the regulators of a bundle:
///
/// * `leader`: `L^{R1}` against 0,
/// * `laggard`: `L^{R2}` against `Lambda(T)`,
/// * `gap`: `L^{|Y|}` against `2A(T)`,
/// * `sum`: `L^{X1} + L^{X2}` against `L^{R1} + L^{R2} = 0 + Lambda(T)`,
/// * `split`: `int 1{X1 <= X2} dL^{X1} + int 1{X1 > X2} dL^{X2}` against
///   `Lambda(T)`.
///
/// Each tolerance is relative to the reference plus one; the leader's is
/// relative to `Lambda(T) + 1`.
pub fn identity_suite(b: &PathBundle, epsilon: f64) -> Result<IdentityReport> {
    identity_suite_with(b, epsilon, &IdentityTolerances::default())
}

pub fn identity_suite_with(b: &PathBundle, epsilon: f64, tol: &IdentityTolerances) -> Result<IdentityReport> {
    let (rr, ss) = (b.params.rho().powi(2), b.params.sigma_sq());
    let lam = b.regulators.lambda.last();
    let two_a = 2.0 * b.regulators.a.last();
    let l_r1 = estimate_local_time(&b.n, |_| rr, epsilon, "R1")?;
    let l_r2 = estimate_local_time(&b.m, |_| ss, epsilon, "R2")?;
    let l_g = estimate_local_time(&b.g, |_| rr + ss, epsilon, "|Y|")?;
    let l_x1 = estimate_local_time(&b.x1, name1_rate(b), epsilon, "X1")?;
    let l_x2 = estimate_local_time(&b.x2, name2_rate(b), epsilon, "X2")?;
    let (d1, d2) = (l_x1.values.values(), l_x2.values.values());
    let mut split = 0.0;
    for k in 0..b.len() - 1 {
        split += if b.x1.values()[k] <= b.x2.values()[k] {
            d1[k + 1] - d1[k]
        } else {
            d2[k + 1] - d2[k]
        };
    }
    Ok(IdentityReport {
        epsilon,
        entries: vec![
            IdentityEntry::new("leader", l_r1.terminal(), 0.0, tol.leader, lam),
            IdentityEntry::new("laggard", l_r2.terminal(), lam, tol.laggard, lam),
            IdentityEntry::new("gap", l_g.terminal(), two_a, tol.gap, two_a),
            IdentityEntry::new("sum", l_x1.terminal() + l_x2.terminal(), lam, tol.sum, lam),
            IdentityEntry::new("split", split, lam, tol.split, lam),
        ],
    })
}
