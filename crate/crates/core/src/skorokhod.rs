//! Discrete Skorokhod reflection and the coupled regulator system.
//!
//! The coupled system asks for nondecreasing `A`, `Lambda` with
//!
//! ```text
//! 2A(t)     = max_{s<=t} (-|y0| + lambda s + Lambda(s) - V_flat(s))^+
//! Lambda(t) = max_{s<=t} (-r2 - g s + A(s) - sigma V2(s))^+
//! ```
//!
//! on the grid. Time `s` is elapsed time `k * dt` from the first grid point.
//! Writing `w1 = |y0| - lambda s + V_flat` and `w2 = r2 + g s + sigma V2`,
//! the two maps are `2A = runmax((Lambda - w1)^+)` and
//! `Lambda = runmax((A - w2)^+)`, and the processes built on top are
//! `Z = w1 - Lambda` and `K = w2 - A`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::SampledPath;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Reflects `z` at the origin: `regulator(t_k) = max_{j<=k} (-z(t_j))^+`.
///
/// Returns `(z + regulator, regulator)`.
pub fn skorokhod_reflect_1d(z: &SampledPath) -> (SampledPath, SampledPath) {
    let mut run = 0.0f64;
    let mut reg = Vec::with_capacity(z.len());
    let mut refl = Vec::with_capacity(z.len());
    for &v in z.values() {
        run = run.max(-v);
        reg.push(run);
        refl.push(v + run);
    }
    (
        SampledPath::from_raw(z.t0(), z.dt(), refl),
        SampledPath::from_raw(z.t0(), z.dt(), reg),
    )
}

/// The pair `(A, Lambda)`: local time of the name difference at 0 and local
/// time of the laggard at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorPair {
    pub a: SampledPath,
    pub lambda: SampledPath,
}

/// Largest pointwise violation of each of the two defining equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorResiduals {
    /// `sup |2A - runmax((Lambda - w1)^+)|`
    pub first: f64,
    /// `sup |Lambda - runmax((A - w2)^+)|`
    pub second: f64,
}

impl RegulatorResiduals {
    pub fn max(&self) -> f64 {
        self.first.max(self.second)
    }
}

/// The two forcing paths `w1`, `w2` of the coupled system.
#[derive(Debug, Clone)]
pub(crate) struct Forcing {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl Forcing {
    pub fn new(v_flat: &SampledPath, v2: &SampledPath, p: &ModelParams) -> Result<Self> {
        v_flat.ensure_same_grid(v2, "coupled regulators")?;
        if v_flat.first() != 0.0 || v2.first() != 0.0 {
            return Err(Error::Domain("driving paths must start at 0".into()));
        }
        if !(p.sigma() > 0.0) {
            return Err(Error::DegenerateSigma("degenerate_regulators"));
        }
        let dt = v_flat.dt();
        let (abs_y, lam, r2, g, sigma) = (p.y0().abs(), p.lambda(), p.r2(), p.g(), p.sigma());
        let w1 = v_flat
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| abs_y - lam * (k as f64 * dt) + v)
            .collect();
        let w2 = v2
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| r2 + g * (k as f64 * dt) + sigma * v)
            .collect();
        Ok(Self { w1, w2 })
    }
}

fn check_solver_args(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }
    Ok(())
}

/// Picard iteration from `(0, 0)`.
///
/// Each sweep applies the first map to the current `Lambda` and then the
/// second map to the new `A`. Both running-max maps are 1-Lipschitz in sup
/// norm and the factor 1/2 in front of `A` makes one map a contraction, so a
/// sweep shrinks `max(sup|delta A|, sup|delta Lambda|)` by at least 1/2, the
/// square of the `1/sqrt(2)` rate of a single map application.
///
/// Prefixes that did not change in the previous sweep cannot change in this
/// one, so each scan starts at the first index that moved.
fn picard(f: &Forcing, tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = f.w1.len();
    let mut a = vec![0.0; n];
    let mut l = vec![0.0; n];
    let mut gaps = Vec::new();
    let mut cl = 0usize;
    for sweep in 0..max_iter {
        let mut gap_a = 0.0f64;
        let mut ca = n;
        let mut run = if cl == 0 { 0.0 } else { 2.0 * a[cl - 1] };
        for k in cl..n {
            run = f64::max(run, l[k] - f.w1[k]);
            let v = 0.5 * run;
            let d = (v - a[k]).abs();
            if d > 0.0 {
                ca = ca.min(k);
                gap_a = gap_a.max(d);
                a[k] = v;
            }
        }
        if sweep == 0 {
            // the starting Lambda is not the image of any A
            ca = 0;
        }
        let mut gap_l = 0.0f64;
        let mut next_cl = n;
        let mut run = if ca == 0 { 0.0 } else { l[ca - 1] };
        for k in ca..n {
            run = f64::max(run, a[k] - f.w2[k]);
            let d = (run - l[k]).abs();
            if d > 0.0 {
                next_cl = next_cl.min(k);
                gap_l = gap_l.max(d);
                l[k] = run;
            }
        }
        let gap = gap_a.max(gap_l);
        gaps.push(gap);
        cl = next_cl;
        if gap < tol {
            return Ok((a, l, gaps));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_gap: *gaps.last().unwrap_or(&f64::NAN),
    })
}

/// Recomputes `A` from the final `Lambda` so that `Z + 2A` is exactly zero
/// wherever `A` increases.
fn polish(f: &Forcing, a: &mut [f64], l: &[f64]) {
    let mut run = 0.0f64;
    for k in 0..a.len() {
        run = run.max(l[k] - f.w1[k]);
        a[k] = 0.5 * run;
    }
}

fn pair(grid: &SampledPath, a: Vec<f64>, l: Vec<f64>) -> RegulatorPair {
    RegulatorPair {
        a: SampledPath::from_raw(grid.t0(), grid.dt(), a),
        lambda: SampledPath::from_raw(grid.t0(), grid.dt(), l),
    }
}

/// Solves the coupled system by whole-path Picard iteration.
pub fn solve_coupled_regulators(
    v_flat: &SampledPath,
    v2: &SampledPath,
    p: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<RegulatorPair> {
    check_solver_args(tol, max_iter)?;
    let f = Forcing::new(v_flat, v2, p)?;
    let (mut a, l, _) = picard(&f, tol, max_iter)?;
    polish(&f, &mut a, &l);
    Ok(pair(v_flat, a, l))
}

/// Sup-norm distance between successive Picard iterates, one entry per
/// sweep. The last entry is below `tol`.
pub fn picard_diagnostics(
    v_flat: &SampledPath,
    v2: &SampledPath,
    p: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    check_solver_args(tol, max_iter)?;
    let f = Forcing::new(v_flat, v2, p)?;
    picard(&f, tol, max_iter).map(|(_, _, gaps)| gaps)
}

/// Solves the grid system one index at a time.
///
/// At each index the two running maxima only depend on the current values
/// through a pair of piecewise-linear equations, which have a closed-form
/// solution. The result is the same grid fixed point the Picard iteration
/// converges to, at a fraction of the cost.
pub fn solve_coupled_regulators_stepwise(
    v_flat: &SampledPath,
    v2: &SampledPath,
    p: &ModelParams,
) -> Result<RegulatorPair> {
    let f = Forcing::new(v_flat, v2, p)?;
    let n = f.w1.len();
    let mut a = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    let mut st = RegulatorStepper::default();
    for k in 0..n {
        let (ak, lk) = st.step(f.w1[k], f.w2[k]);
        a.push(ak);
        l.push(lk);
    }
    polish(&f, &mut a, &l);
    Ok(pair(v_flat, a, l))
}

/// Streaming form of the stepwise solver: feed `w1`, `w2` one grid point at
/// a time.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegulatorStepper {
    two_a: f64,
    lambda: f64,
}

impl RegulatorStepper {
    /// Advances by one grid point and returns `(A, Lambda)` there.
    #[inline]
    pub fn step(&mut self, w1: f64, w2: f64) -> (f64, f64) {
        let (p, q) = (self.two_a, self.lambda);
        let (a, b) = (-w1, -w2);
        let a1 = 0.5 * f64::max(p, a + q);
        let (two_a, lam) = if b + a1 <= q {
            (2.0 * a1, q)
        } else {
            let ak = f64::max(0.5 * p, a + b);
            (2.0 * ak, b + ak)
        };
        // Both are running maxima; guard against rounding in the closed form.
        self.two_a = two_a.max(p);
        self.lambda = lam.max(q);
        (0.5 * self.two_a, self.lambda)
    }

    pub fn a(&self) -> f64 {
        0.5 * self.two_a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl RegulatorPair {
    /// Rechecks both defining equations against the driving paths.
    pub fn residuals(&self, v_flat: &SampledPath, v2: &SampledPath, p: &ModelParams) -> Result<RegulatorResiduals> {
        let f = Forcing::new(v_flat, v2, p)?;
        self.a.ensure_same_grid(v_flat, "residuals")?;
        let (a, l) = (self.a.values(), self.lambda.values());
        let (mut r1, mut r2) = (0.0f64, 0.0f64);
        let (mut m1, mut m2) = (0.0f64, 0.0f64);
        for k in 0..a.len() {
            m1 = m1.max(l[k] - f.w1[k]);
            m2 = m2.max(a[k] - f.w2[k]);
            r1 = r1.max((2.0 * a[k] - m1).abs());
            r2 = r2.max((l[k] - m2).abs());
        }
        Ok(RegulatorResiduals { first: r1, second: r2 })
    }
}
