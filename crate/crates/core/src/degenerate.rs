//! The `sigma = 0` model: a ballistic laggard.
//!
//! With `sigma = 0` the laggard has no noise, the leader is driven by a single
//! Brownian motion `V`, and both regulators have explicit running-max forms:
//!
//! ```text
//! Lambda(t)          = max_{s<=t} (-xi_sum - nu s - V(s))^+
//! Lambda(t) + 2LY(t) = max_{s<=t} (-|y0| + lambda s - V(s))^+
//! ```
//!
//! The gap is unfolded as in the main pipeline, except that excursions
//! leaving the corner always get the mark -1.

use crate::error::{Error, Result};
use crate::model::{CornerClass, ModelParams};
use crate::path::SampledPath;
use crate::pathgen::{
    assemble_names, excursions_with, grid_steps, unfold_gap, ExcursionSet, FairMarks, MarkSource, StartingSign,
    ROUNDOFF_ZERO_TOL,
};
use crate::rng::SeedRecord;
use rand_distr::{Distribution, StandardNormal};
use std::ops::Range;

/// Largest decrease of the raw `LY` that the monotone envelope may absorb.
pub const LY_ENVELOPE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateBundle {
    pub params: ModelParams,
    pub v: SampledPath,
    pub lambda: SampledPath,
    pub ly: SampledPath,
    pub r1: SampledPath,
    pub r2: SampledPath,
    /// `R1 - R2`
    pub gap: SampledPath,
    pub y: SampledPath,
    pub x1: SampledPath,
    pub x2: SampledPath,
    pub excursions: ExcursionSet,
    pub seed: SeedRecord,
    /// Largest amount by which the monotone envelope lifted `LY`.
    pub ly_envelope_deviation: f64,
}

fn check_degenerate(p: &ModelParams) -> Result<()> {
    if p.sigma() != 0.0 {
        return Err(Error::param(
            "sigma",
            format!("the degenerate model needs sigma = 0, got {}", p.sigma()),
        ));
    }
    if !(p.g() > 0.0) {
        return Err(Error::param("g", "the degenerate model needs g > 0"));
    }
    Ok(())
}

/// Streaming form of the construction: feed `V` one grid point at a time.
#[derive(Debug, Clone, Copy)]
pub struct DegenerateStepper {
    xi_sum: f64,
    nu: f64,
    abs_y: f64,
    lambda_rate: f64,
    r2: f64,
    g: f64,
    lambda: f64,
    /// running max of `(-Z)^+`, i.e. `Lambda + 2 LY`
    reg_gap: f64,
    ly: f64,
    deviation: f64,
}

/// One grid point of the degenerate construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateState {
    pub lambda: f64,
    pub ly: f64,
    pub gap: f64,
    pub r1: f64,
    pub r2: f64,
}

impl DegenerateStepper {
    pub fn new(p: &ModelParams) -> Result<Self> {
        check_degenerate(p)?;
        Ok(Self {
            xi_sum: p.xi_sum(),
            nu: p.nu(),
            abs_y: p.y0().abs(),
            lambda_rate: p.lambda(),
            r2: p.r2(),
            g: p.g(),
            lambda: 0.0,
            reg_gap: 0.0,
            ly: 0.0,
            deviation: 0.0,
        })
    }

    /// Advances to elapsed time `s` with driving value `v = V(s)`.
    #[inline]
    pub fn step(&mut self, s: f64, v: f64) -> DegenerateState {
        let w_sum = self.xi_sum + self.nu * s + v;
        let z = self.abs_y - self.lambda_rate * s + v;
        self.lambda = self.lambda.max(-w_sum);
        self.reg_gap = self.reg_gap.max(-z);
        let raw = 0.5 * (self.reg_gap - self.lambda);
        if raw < self.ly {
            self.deviation = self.deviation.max(self.ly - raw);
        } else {
            self.ly = raw;
        }
        let gap = z + self.reg_gap;
        let r2 = (self.r2 + self.g * s - self.ly).max(0.0);
        DegenerateState {
            lambda: self.lambda,
            ly: self.ly,
            gap,
            r1: r2 + gap,
            r2,
        }
    }

    pub fn envelope_deviation(&self) -> f64 {
        self.deviation
    }
}

/// `Lambda` and `LY` for a given driving path.
pub fn degenerate_regulators(v: &SampledPath, p: &ModelParams) -> Result<(SampledPath, SampledPath)> {
    let (states, dev) = run(v, p)?;
    let lam = states.iter().map(|s| s.lambda).collect();
    let ly = states.iter().map(|s| s.ly).collect();
    check_envelope(dev)?;
    Ok((
        SampledPath::from_raw(v.t0(), v.dt(), lam),
        SampledPath::from_raw(v.t0(), v.dt(), ly),
    ))
}

fn run(v: &SampledPath, p: &ModelParams) -> Result<(Vec<DegenerateState>, f64)> {
    if v.first() != 0.0 {
        return Err(Error::Domain("driving path must start at 0".into()));
    }
    let mut st = DegenerateStepper::new(p)?;
    let out = v
        .values()
        .iter()
        .enumerate()
        .map(|(k, &x)| st.step(v.elapsed(k), x))
        .collect();
    Ok((out, st.envelope_deviation()))
}

fn check_envelope(dev: f64) -> Result<()> {
    if dev > LY_ENVELOPE_TOL {
        Err(Error::Consistency {
            process: "LY",
            index: 0,
            value: -dev,
        })
    } else {
        Ok(())
    }
}

/// Forces the mark -1 on excursions that leave the corner.
struct CornerMarks<'a> {
    inner: &'a mut dyn MarkSource,
}

impl MarkSource for CornerMarks<'_> {
    fn mark(&mut self, index: usize, interval: &Range<usize>, from_corner: bool) -> i8 {
        if from_corner {
            -1
        } else {
            self.inner.mark(index, interval, from_corner)
        }
    }
}

pub fn degenerate_simulate(p: &ModelParams, horizon: f64, dt: f64, seed: &SeedRecord) -> Result<DegenerateBundle> {
    check_degenerate(p)?;
    let steps = grid_steps(horizon, dt)?;
    let mut rng = seed.increments();
    let sd = dt.sqrt();
    let mut vals = Vec::with_capacity(steps + 1);
    let mut acc = 0.0f64;
    vals.push(acc);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += sd * z;
        vals.push(acc);
    }
    let v = SampledPath::from_raw(0.0, dt, vals);
    let mut fair = FairMarks(seed.marks());
    degenerate_synthesize(p, v, seed, &mut fair, 0.0)
}

/// Runs the construction on a given driving path. `seed` is only recorded.
pub fn degenerate_synthesize(
    p: &ModelParams,
    v: SampledPath,
    seed: &SeedRecord,
    marks: &mut dyn MarkSource,
    zero_tol: f64,
) -> Result<DegenerateBundle> {
    let (states, dev) = run(&v, p)?;
    check_envelope(dev)?;
    let col = |f: fn(&DegenerateState) -> f64| SampledPath::from_raw(0.0, v.dt(), states.iter().map(f).collect());
    let lambda = col(|s| s.lambda);
    let ly = col(|s| s.ly);
    let gap = col(|s| s.gap);
    let r1 = col(|s| s.r1);
    let r2 = col(|s| s.r2);
    let corner_tol = zero_tol.max(ROUNDOFF_ZERO_TOL);
    let lam = lambda.values();
    let mut excursions = excursions_with(&gap, zero_tol, |j| {
        r1.values()[j] <= corner_tol || (j > 0 && lam[j] > lam[j - 1])
    });
    let mut corner = CornerMarks { inner: marks };
    let mut start = StartingSign {
        y0: p.y0(),
        inner: &mut corner,
    };
    let y = unfold_gap(&gap, &mut excursions, &mut start);
    let (x1, x2) = assemble_names(&r2, &r1, &y);
    Ok(DegenerateBundle {
        params: *p,
        v,
        lambda,
        ly,
        r1,
        r2,
        gap,
        y,
        x1,
        x2,
        excursions,
        seed: *seed,
        ly_envelope_deviation: dev,
    })
}

/// Probability that the two particles ever meet at the origin:
/// `exp(-2 (g - h) xi_sum)` when `g > h`, otherwise 1.
pub fn degenerate_corner_prob(p: &ModelParams) -> Result<f64> {
    if p.sigma() != 0.0 {
        return Err(Error::param("sigma", "corner probability formula needs sigma = 0"));
    }
    Ok(if p.g() > p.h() {
        (-2.0 * (p.g() - p.h()) * p.xi_sum()).exp()
    } else {
        1.0
    })
}

/// Corner attainability when `sigma = 0`.
pub fn classify_corner(p: &ModelParams) -> Result<CornerClass> {
    check_degenerate(p)?;
    Ok(if p.g() > p.h() {
        CornerClass::PositiveProbability
    } else {
        CornerClass::AlmostSurely
    })
}

impl DegenerateBundle {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.v.elapsed(k)
    }

    /// Largest violations of `R1 + R2 = xi_sum + nu t + V + Lambda` and of
    /// `R1 = r1 - h t + V + Lambda + LY`.
    pub fn identity_residuals(&self) -> (f64, f64) {
        let p = &self.params;
        let (mut sum, mut leader) = (0.0f64, 0.0f64);
        for k in 0..self.len() {
            let t = self.time(k);
            let (r1, r2) = (self.r1.values()[k], self.r2.values()[k]);
            let (v, l, ly) = (self.v.values()[k], self.lambda.values()[k], self.ly.values()[k]);
            sum = sum.max((r1 + r2 - (p.xi_sum() + p.nu() * t + v + l)).abs());
            leader = leader.max((r1 - (p.r1() - p.h() * t + v + l + ly)).abs());
        }
        (sum, leader)
    }
}

/// Grid states of the degenerate construction without storing the path.
/// Draws the same increments as [`degenerate_simulate`].
#[derive(Debug, Clone)]
pub struct DegenerateStream {
    rng: rand_chacha::ChaCha8Rng,
    stepper: DegenerateStepper,
    steps: usize,
    index: usize,
    dt: f64,
    v: f64,
}

impl DegenerateStream {
    pub fn new(p: &ModelParams, horizon: f64, dt: f64, seed: &SeedRecord) -> Result<Self> {
        let stepper = DegenerateStepper::new(p)?;
        let steps = grid_steps(horizon, dt)?;
        Ok(Self {
            rng: seed.increments(),
            stepper,
            steps,
            index: 0,
            dt,
            v: 0.0,
        })
    }

    pub fn envelope_deviation(&self) -> f64 {
        self.stepper.envelope_deviation()
    }
}

impl Iterator for DegenerateStream {
    type Item = (usize, DegenerateState);

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.index;
        if k > self.steps {
            return None;
        }
        if k > 0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.v += self.dt.sqrt() * z;
        }
        self.index += 1;
        Some((k, self.stepper.step(k as f64 * self.dt, self.v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgen::InjectedMarks;

    fn dparams(g: f64, h: f64, x1: f64, x2: f64) -> ModelParams {
        ModelParams::with_sigma(g, h, 0.0, x1, x2).unwrap()
    }

    #[test]
    fn rejects_nondegenerate_or_driftless() {
        let p = ModelParams::with_sigma_sq(1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        assert!(degenerate_simulate(&p, 1.0, 1e-3, &SeedRecord::new(0, 0)).is_err());
        let p = dparams(0.0, 0.5, 1.0, 0.0);
        assert!(degenerate_simulate(&p, 1.0, 1e-3, &SeedRecord::new(0, 0)).is_err());
        let z = SampledPath::zeros(0.0, 1e-3, 10).unwrap();
        assert!(degenerate_regulators(&z, &p).is_err());
    }

    #[test]
    fn lambda_activates_when_sum_runs_out() {
        // g < h: the sum drifts down at rate h - g and is reflected from then on.
        let p = dparams(0.5, 1.0, 0.75, 0.25);
        let dt = 1e-3;
        let z = SampledPath::zeros(0.0, dt, 4001).unwrap();
        let (lam, _) = degenerate_regulators(&z, &p).unwrap();
        for k in 0..z.len() {
            let t = k as f64 * dt;
            assert!((lam.values()[k] - (-1.0 + 0.5 * t).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_idle_when_sum_grows() {
        let p = dparams(1.0, 0.5, 0.75, 0.25);
        let z = SampledPath::zeros(0.0, 1e-3, 2001).unwrap();
        let (lam, _) = degenerate_regulators(&z, &p).unwrap();
        assert!(lam.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ly_from_the_diagonal() {
        let p = dparams(1.0, 0.5, 0.5, 0.5);
        let dt = 1e-3;
        let z = SampledPath::zeros(0.0, dt, 2001).unwrap();
        let (lam, ly) = degenerate_regulators(&z, &p).unwrap();
        for k in 0..z.len() {
            let t = k as f64 * dt;
            assert!((lam.values()[k] + 2.0 * ly.values()[k] - 1.5 * t).abs() < 1e-12);
            assert!((ly.values()[k] - 0.75 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_probability() {
        let p = dparams(1.0, 0.5, 0.5, 0.5);
        assert!((degenerate_corner_prob(&p).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((degenerate_corner_prob(&p).unwrap() - 0.367879).abs() < 1e-6);
        assert_eq!(degenerate_corner_prob(&dparams(1.0, 1.0, 0.5, 0.5)).unwrap(), 1.0);
        assert_eq!(degenerate_corner_prob(&dparams(0.5, 2.0, 0.5, 0.5)).unwrap(), 1.0);
        let tiny = dparams(1.0, 0.5, 1e-12, 0.0);
        assert!((degenerate_corner_prob(&tiny).unwrap() - 1.0).abs() < 1e-11);
        assert_eq!(classify_corner(&p).unwrap(), CornerClass::PositiveProbability);
        assert_eq!(
            classify_corner(&dparams(1.0, 1.0, 0.5, 0.5)).unwrap(),
            CornerClass::AlmostSurely
        );
    }

    #[test]
    fn bundle_invariants() {
        for (i, (g, h)) in [(1.0, 0.5), (0.5, 1.0), (1.0, 1.0)].into_iter().enumerate() {
            let p = dparams(g, h, 0.7, 0.3);
            for j in 0..5 {
                let b = degenerate_simulate(&p, 20.0, 1e-3, &SeedRecord::new(i as u64, j)).unwrap();
                assert!(b.lambda.is_nondecreasing() && b.ly.is_nondecreasing());
                assert_eq!(b.lambda.first(), 0.0);
                assert_eq!(b.ly.first(), 0.0);
                assert!(b.ly_envelope_deviation < LY_ENVELOPE_TOL);
                let (sum, leader) = b.identity_residuals();
                assert!(sum < 1e-9 && leader < 1e-9, "{sum} {leader}");
                for k in 0..b.len() {
                    let (r1, r2) = (b.r1.values()[k], b.r2.values()[k]);
                    assert!(r1 >= r2 && r2 >= 0.0);
                    assert_eq!(b.x1.values()[k].max(b.x2.values()[k]), r1);
                    assert_eq!(b.x1.values()[k].min(b.x2.values()[k]), r2);
                    assert!((b.x1.values()[k] - b.x2.values()[k] - b.y.values()[k]).abs() < 1e-12);
                }
                for k in crate::pathgen::increase_indices(&b.lambda) {
                    assert!(
                        b.r1.values()[k] <= 1e-9,
                        "R1 = {} at a Lambda increase",
                        b.r1.values()[k]
                    );
                    assert!(b.y.values()[k].abs() <= 1e-9);
                }
                assert_eq!(b.y.first(), p.y0());
            }
        }
    }

    #[test]
    fn corner_excursions_are_marked_down() {
        let p = dparams(0.5, 1.0, 0.7, 0.3);
        let mut seen = 0;
        for j in 0..5 {
            let seed = SeedRecord::new(42, j);
            let b = degenerate_simulate(&p, 20.0, 1e-3, &seed).unwrap();
            for (i, &flag) in b.excursions.origin_flags.iter().enumerate() {
                if flag {
                    seen += 1;
                    assert_eq!(b.excursions.marks[i], -1);
                }
            }
            // with every free mark forced up, corner excursions still go down
            let forced = degenerate_synthesize(&p, b.v.clone(), &seed, &mut InjectedMarks(vec![1]), 0.0).unwrap();
            for (i, &flag) in forced.excursions.origin_flags.iter().enumerate() {
                assert_eq!(forced.excursions.marks[i], if flag { -1 } else { 1 });
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn stepper_matches_bundle() {
        let p = dparams(1.0, 0.5, 0.5, 0.5);
        let b = degenerate_simulate(&p, 5.0, 1e-3, &SeedRecord::new(3, 3)).unwrap();
        let mut st = DegenerateStepper::new(&p).unwrap();
        for k in 0..b.len() {
            let s = st.step(b.time(k), b.v.values()[k]);
            assert_eq!(s.r1, b.r1.values()[k]);
        }
    }

    #[test]
    fn stream_matches_the_stored_construction() {
        let p = dparams(1.0, 0.5, 1.0, 0.0);
        let seed = SeedRecord::new(4, 2);
        let b = degenerate_simulate(&p, 2.0, 1e-3, &seed).unwrap();
        let mut n = 0;
        for (k, st) in DegenerateStream::new(&p, 2.0, 1e-3, &seed).unwrap() {
            assert!((st.r1 - b.r1.values()[k]).abs() <= 1e-12);
            assert!((st.lambda - b.lambda.values()[k]).abs() <= 1e-12);
            n += 1;
        }
        assert_eq!(n, b.len());
    }
}
