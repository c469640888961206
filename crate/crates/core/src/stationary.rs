//! Invariant densities of the ranked pair and their empirical counterparts.
//!
//! Coordinates are `(xi1, xi2) = (R1, R2)` on `0 < xi2 < xi1`. Every density
//! built here is a finite combination of terms `w exp(-(e1 xi1 + e2 xi2))`.
//! In gap/laggard coordinates `(u, v) = (xi1 - xi2, xi2)` such a term is
//! `w exp(-e1 u) exp(-(e1 + e2) v)`, a product of two exponentials, so mass,
//! moments and marginal distribution functions are all available in closed
//! form.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pathgen::RankStream;
use crate::rng::SeedRecord;

/// Tolerance for matching `sigma` against `cos(pi / (2 (l + 2)))`.
pub const SIGMA_MATCH_TOL: f64 = 1e-9;

/// Closed-form density of `(R1, R2)` when both variances equal 1/2:
/// `16 h (h - g) exp(-4 (h xi1 - g xi2))` on `0 < xi2 < xi1`.
pub fn density_equal_variance(xi1: f64, xi2: f64, p: &ModelParams) -> Result<f64> {
    if (p.sigma_sq() - 0.5).abs() > SIGMA_MATCH_TOL {
        return Err(Error::UnsupportedSigma { sigma: p.sigma() });
    }
    let (g, h) = (p.g(), p.h());
    if h <= g {
        return Err(Error::Domain(format!(
            "no invariant probability density unless h > g (g = {g}, h = {h})"
        )));
    }
    if !(0.0 < xi2 && xi2 < xi1) {
        return Ok(0.0);
    }
    Ok(16.0 * h * (h - g) * (-4.0 * (h * xi1 - g * xi2)).exp())
}

/// The integer `l >= 0` with `sigma = cos(pi / (2 (l + 2)))`, if any.
pub fn match_ell(sigma: f64) -> Option<usize> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return None;
    }
    // cos(pi / (2 (l + 2))) increases to 1; stop once it passes sigma
    for ell in 0..1_000_000usize {
        let c = (PI / (2.0 * (ell as f64 + 2.0))).cos();
        if (c - sigma).abs() < SIGMA_MATCH_TOL {
            return Some(ell);
        }
        if c > sigma + SIGMA_MATCH_TOL {
            return None;
        }
    }
    None
}

/// One term `weight * exp(-(exponent[0] xi1 + exponent[1] xi2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpTerm {
    pub weight: f64,
    pub exponent: [f64; 2],
}

impl ExpTerm {
    /// Rate of the gap factor.
    pub fn gap_rate(&self) -> f64 {
        self.exponent[0]
    }

    /// Rate of the laggard factor.
    pub fn laggard_rate(&self) -> f64 {
        self.exponent[0] + self.exponent[1]
    }

    /// Integral of the term over the domain.
    pub fn mass(&self) -> f64 {
        self.weight / (self.gap_rate() * self.laggard_rate())
    }

    fn eval(&self, xi1: f64, xi2: f64) -> f64 {
        self.weight * (-(self.exponent[0] * xi1 + self.exponent[1] * xi2)).exp()
    }
}

/// Sum-of-exponentials invariant density of `(R1, R2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumExpDensity {
    pub ell: usize,
    /// Drift `(h / rho, -g / sigma)` in the scaled wedge.
    pub mu_vec: [f64; 2],
    /// Reflection vector on the horizontal face of the scaled wedge.
    pub nu1_vec: [f64; 2],
    /// Wedge angle of the scaled wedge.
    pub xi_angle: f64,
    /// Terms in rank coordinates, normalized to total mass 1.
    pub terms: Vec<ExpTerm>,
    /// Same terms before normalization, with exponents in the scaled
    /// coordinates `(R1 / rho, R2 / sigma)`.
    pub scaled_terms: Vec<ExpTerm>,
    /// `1 / (rho sigma)`: density of the scaled pair per unit density of
    /// `(R1, R2)`.
    pub jacobian: f64,
    /// Signed mass of the unnormalized expansion in rank coordinates.
    pub normalizer: f64,
    /// Set for `l >= 2`, where the face labelling has only been checked
    /// through the general formula.
    pub experimental: bool,
}

type Mat = [[f64; 2]; 2];

fn rot(angle: f64) -> Mat {
    let (s, c) = angle.sin_cos();
    [[-c, s], [-s, -c]]
}

fn mul_j(m: Mat) -> Mat {
    [[m[0][0], -m[0][1]], [m[1][0], -m[1][1]]]
}

fn apply(m: Mat, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn apply_t(m: Mat, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

fn i_minus(m: Mat) -> Mat {
    [[1.0 - m[0][0], -m[0][1]], [-m[1][0], 1.0 - m[1][1]]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Expands the sum-of-exponentials formula for the parameters' `l`.
///
/// With `Rot_k` the negated rotation by `2 k xi`, `Ref_k = Rot_k diag(1, -1)`
/// and `c_k` the signed ratio of products of `<mu, (Rot_i - Rot_j) e1>`, the
/// density in the scaled wedge is proportional to
/// `sum_k c_k (<mu, (I - Rot_k) nu1> e^{-<mu, (I - Rot_k) x>} - <mu, (I - Ref_k) nu1> e^{-<mu, (I - Ref_k) x>})`.
/// Face 1 is the horizontal face with `nu1 = (0, 1)`. Terms whose weight is
/// exactly 0 are dropped.
pub fn build_sum_exp_density(p: &ModelParams) -> Result<SumExpDensity> {
    let ell = match_ell(p.sigma()).ok_or(Error::UnsupportedSigma { sigma: p.sigma() })?;
    let (g, h, rho, sigma) = (p.g(), p.h(), p.rho(), p.sigma());
    if h <= g {
        return Err(Error::Domain(format!(
            "no invariant probability density unless h > g (g = {g}, h = {h})"
        )));
    }
    let xi_angle = PI / (2.0 * (ell as f64 + 2.0));
    let mu = [h / rho, -g / sigma];
    let nu1 = [0.0, 1.0];
    let e1 = [1.0, 0.0];
    let rots: Vec<Mat> = (0..=ell).map(|k| rot(2.0 * k as f64 * xi_angle)).collect();

    let mut scaled_terms = Vec::with_capacity(2 * (ell + 1));
    for k in 0..=ell {
        let rk = rots[k];
        let fk = mul_j(rk);
        let mut num = 1.0;
        for i in 0..=ell {
            for j in i + 1..=ell {
                if i != k && j != k {
                    let d = [
                        apply(rots[i], e1)[0] - apply(rots[j], e1)[0],
                        apply(rots[i], e1)[1] - apply(rots[j], e1)[1],
                    ];
                    num *= dot(mu, d);
                }
            }
        }
        let diff = [
            apply(fk, nu1)[0] - apply(rk, nu1)[0],
            apply(fk, nu1)[1] - apply(rk, nu1)[1],
        ];
        let den = dot(mu, diff);
        if den == 0.0 || !den.is_finite() {
            return Err(Error::Domain(format!(
                "coefficient c_{k} is singular for g = {g}, h = {h}"
            )));
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * num / den;
        for (m, s) in [(i_minus(rk), 1.0), (i_minus(fk), -1.0)] {
            let weight = s * c * dot(mu, apply(m, nu1));
            if weight != 0.0 {
                scaled_terms.push(ExpTerm {
                    weight,
                    exponent: apply_t(m, mu),
                });
            }
        }
    }

    // x = (xi1 / rho, xi2 / sigma)
    let mut terms: Vec<ExpTerm> = scaled_terms
        .iter()
        .map(|t| ExpTerm {
            weight: t.weight,
            exponent: [t.exponent[0] / rho, t.exponent[1] / sigma],
        })
        .collect();
    for t in &terms {
        if !(t.gap_rate() > 0.0 && t.laggard_rate() > 0.0) {
            return Err(Error::Domain(format!(
                "expansion term with exponent {:?} is not integrable on the wedge",
                t.exponent
            )));
        }
    }
    // the expansion is only defined up to a constant, sign included
    let normalizer: f64 = terms.iter().map(ExpTerm::mass).sum();
    if normalizer == 0.0 || !normalizer.is_finite() {
        return Err(Error::Domain(format!("expansion has mass {normalizer}")));
    }
    for t in &mut terms {
        t.weight /= normalizer;
    }
    Ok(SumExpDensity {
        ell,
        mu_vec: mu,
        nu1_vec: nu1,
        xi_angle,
        terms,
        scaled_terms,
        jacobian: 1.0 / (rho * sigma),
        normalizer,
        experimental: ell >= 2,
    })
}

impl SumExpDensity {
    /// Density of `(R1, R2)` at `(xi1, xi2)`; 0 off the domain.
    pub fn density(&self, xi1: f64, xi2: f64) -> f64 {
        if !(0.0 < xi2 && xi2 < xi1) {
            return 0.0;
        }
        self.terms.iter().map(|t| t.eval(xi1, xi2)).sum()
    }

    /// Density of `(R1 - R2, R2)` at `(u, v)`.
    pub fn density_gap_laggard(&self, u: f64, v: f64) -> f64 {
        if !(u > 0.0 && v > 0.0) {
            return 0.0;
        }
        self.density(u + v, v)
    }

    pub fn total_mass(&self) -> f64 {
        self.terms.iter().map(ExpTerm::mass).sum()
    }

    pub fn gap_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| t.mass() * -(-t.gap_rate() * u).exp_m1())
            .sum()
    }

    pub fn laggard_cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| t.mass() * -(-t.laggard_rate() * v).exp_m1())
            .sum()
    }

    pub fn moments(&self) -> Moments {
        let mut m = [0.0; 5];
        for t in &self.terms {
            let (w, a, b) = (t.mass(), t.gap_rate(), t.laggard_rate());
            m[0] += w / a;
            m[1] += w / b;
            m[2] += 2.0 * w / (a * a);
            m[3] += 2.0 * w / (b * b);
            m[4] += w / (a * b);
        }
        Moments::from_raw(m[0], m[1], m[2], m[3], m[4])
    }
}

/// First and second moments of `(gap, laggard)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean_gap: f64,
    pub mean_laggard: f64,
    pub var_gap: f64,
    pub var_laggard: f64,
    pub correlation: f64,
}

impl Moments {
    fn from_raw(eu: f64, ev: f64, euu: f64, evv: f64, euv: f64) -> Self {
        let var_gap = euu - eu * eu;
        let var_laggard = evv - ev * ev;
        Self {
            mean_gap: eu,
            mean_laggard: ev,
            var_gap,
            var_laggard,
            correlation: (euv - eu * ev) / (var_gap * var_laggard).sqrt(),
        }
    }

    /// Sample moments.
    pub fn of_samples(gap: &[f64], laggard: &[f64]) -> Self {
        let n = gap.len() as f64;
        let mean = |x: &[f64]| x.iter().sum::<f64>() / n;
        let (mu, mv) = (mean(gap), mean(laggard));
        let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
        for (&u, &v) in gap.iter().zip(laggard) {
            suu += (u - mu) * (u - mu);
            svv += (v - mv) * (v - mv);
            suv += (u - mu) * (v - mv);
        }
        let d = n - 1.0;
        Self {
            mean_gap: mu,
            mean_laggard: mv,
            var_gap: suu / d,
            var_laggard: svv / d,
            correlation: suv / (suu * svv).sqrt(),
        }
    }
}

/// Two-sample-free Kolmogorov-Smirnov distance between the empirical law of
/// `samples` and a continuous distribution function.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Counts on a regular `(gap, laggard)` grid starting at 0. Samples beyond
/// the last edge go to `overflow`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram2d {
    pub gap_edges: Vec<f64>,
    pub laggard_edges: Vec<f64>,
    /// Row-major: `counts[i * laggard_bins + j]` for gap bin `i`.
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram2d {
    pub fn new(gap_max: f64, laggard_max: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(gap_max > 0.0) || !(laggard_max > 0.0) {
            return Err(Error::param("histogram", "need at least one bin and positive ranges"));
        }
        let edges = |hi: f64| (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();
        Ok(Self {
            gap_edges: edges(gap_max),
            laggard_edges: edges(laggard_max),
            counts: vec![0; bins * bins],
            overflow: 0,
        })
    }

    fn bin(edges: &[f64], x: f64) -> Option<usize> {
        let n = edges.len() - 1;
        let hi = edges[n];
        if !(x >= 0.0 && x < hi) {
            return None;
        }
        Some(((x / hi * n as f64) as usize).min(n - 1))
    }

    pub fn add(&mut self, gap: f64, laggard: f64) {
        let nl = self.laggard_edges.len() - 1;
        match (Self::bin(&self.gap_edges, gap), Self::bin(&self.laggard_edges, laggard)) {
            (Some(i), Some(j)) => self.counts[i * nl + j] += 1,
            _ => self.overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantOptions {
    pub horizon: f64,
    pub burn_in: f64,
    pub dt: f64,
    /// Grid points between kept samples.
    pub stride: usize,
    pub bins: usize,
}

impl InvariantOptions {
    /// Keeps one sample per time unit.
    pub fn new(horizon: f64, burn_in: f64, dt: f64) -> Self {
        Self {
            horizon,
            burn_in,
            dt,
            stride: default_stride(dt),
            bins: 40,
        }
    }
}

/// Grid points per time unit, the default subsampling stride.
pub fn default_stride(dt: f64) -> usize {
    ((1.0 / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalInvariant {
    pub gap: Vec<f64>,
    pub laggard: Vec<f64>,
    pub moments: Moments,
    pub histogram: Histogram2d,
    pub seeds: Vec<SeedRecord>,
}

impl EmpiricalInvariant {
    pub fn len(&self) -> usize {
        self.gap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gap.is_empty()
    }
}

fn check_invariant_args(p: &ModelParams, o: &InvariantOptions) -> Result<()> {
    if p.g() >= p.h() {
        return Err(Error::Domain(format!(
            "no stationary law unless g < h (g = {}, h = {})",
            p.g(),
            p.h()
        )));
    }
    if !(o.burn_in >= 0.0 && o.burn_in < o.horizon) {
        return Err(Error::param(
            "burn_in",
            format!("must lie in [0, horizon), got {}", o.burn_in),
        ));
    }
    if o.stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    Ok(())
}

/// Subsampled `(gap, laggard)` of one path after the burn-in.
pub fn invariant_samples(p: &ModelParams, o: &InvariantOptions, seed: &SeedRecord) -> Result<(Vec<f64>, Vec<f64>)> {
    check_invariant_args(p, o)?;
    let first = (o.burn_in / o.dt).round() as usize;
    let (mut gap, mut lag) = (Vec::new(), Vec::new());
    for pt in RankStream::new(p, o.horizon, o.dt, seed)? {
        let pt = pt?;
        if pt.index >= first && (pt.index - first).is_multiple_of(o.stride) {
            gap.push(pt.gap);
            lag.push(pt.laggard);
        }
    }
    Ok((gap, lag))
}

/// Long-run `(gap, laggard)` law from one path.
pub fn empirical_invariant(p: &ModelParams, o: &InvariantOptions, seed: &SeedRecord) -> Result<EmpiricalInvariant> {
    empirical_invariant_replicates(p, o, seed.base_seed, 1)
}

/// Pools `n_paths` independent replicates, path `i` seeded by
/// `(base_seed, i)`. Samples are concatenated in path order, so the result
/// does not depend on the thread count.
pub fn empirical_invariant_replicates(
    p: &ModelParams,
    o: &InvariantOptions,
    base_seed: u64,
    n_paths: u64,
) -> Result<EmpiricalInvariant> {
    check_invariant_args(p, o)?;
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    let seeds: Vec<SeedRecord> = (0..n_paths).map(|i| SeedRecord::new(base_seed, i)).collect();
    let runs = seeds
        .par_iter()
        .map(|s| invariant_samples(p, o, s))
        .collect::<Result<Vec<_>>>()?;
    let (mut gap, mut laggard) = (Vec::new(), Vec::new());
    for (g, l) in runs {
        gap.extend(g);
        laggard.extend(l);
    }
    let moments = Moments::of_samples(&gap, &laggard);
    // ranges cover well past the bulk of an exponential law
    let mut histogram = Histogram2d::new(8.0 * moments.mean_gap, 8.0 * moments.mean_laggard, o.bins)?;
    for (&u, &v) in gap.iter().zip(&laggard) {
        histogram.add(u, v);
    }
    Ok(EmpiricalInvariant {
        gap,
        laggard,
        moments,
        histogram,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(s2: f64, g: f64, h: f64) -> ModelParams {
        ModelParams::with_sigma_sq(g, h, s2, 1.0, 0.5).unwrap()
    }

    /// Composite Simpson over `0 < xi2 < xi1 < cut`, in polar-free form
    /// `xi2 = t xi1`.
    fn quad(f: impl Fn(f64, f64) -> f64, cut: f64) -> f64 {
        let (n1, n2) = (4000, 400);
        let simpson_w = |i: usize, n: usize| {
            if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let (h1, h2) = (cut / n1 as f64, 1.0 / n2 as f64);
        let mut acc = 0.0;
        for i in 0..=n1 {
            let x = i as f64 * h1;
            let mut inner = 0.0;
            for j in 0..=n2 {
                let t = j as f64 * h2;
                inner += simpson_w(j, n2) * f(x, t * x);
            }
            acc += simpson_w(i, n1) * inner * h2 / 3.0 * x;
        }
        acc * h1 / 3.0
    }

    /// Unclipped closed-form term sum, so quadrature on the closed triangle
    /// sees the same integrand as the open domain.
    fn raw(d: &SumExpDensity) -> impl Fn(f64, f64) -> f64 + '_ {
        move |a, b| d.terms.iter().map(|t| t.eval(a, b)).sum()
    }

    #[test]
    fn equal_variance_examples() {
        let p = params(0.5, 0.5, 1.0);
        let at_origin = 16.0 * 1.0 * 0.5;
        assert!((density_equal_variance(1e-300, 1e-301, &p).unwrap() - at_origin).abs() < 1e-12);
        assert_eq!(density_equal_variance(1.0, 2.0, &p).unwrap(), 0.0);
        assert_eq!(density_equal_variance(1.0, 0.0, &p).unwrap(), 0.0);
        let mass = quad(|a, b| 16.0 * 0.5 * (-4.0 * (a - 0.5 * b)).exp(), 12.0);
        assert!((mass - 1.0).abs() < 0.01, "{mass}");
        assert!(density_equal_variance(1.0, 0.5, &params(0.5, 1.0, 1.0))
            .unwrap_err()
            .is_domain_error());
        assert!(matches!(
            density_equal_variance(1.0, 0.5, &params(0.75, 0.5, 1.0)),
            Err(Error::UnsupportedSigma { .. })
        ));
    }

    #[test]
    fn ell_matching() {
        assert_eq!(match_ell(0.5f64.sqrt()), Some(0));
        assert_eq!(match_ell(0.75f64.sqrt()), Some(1));
        assert_eq!(match_ell((PI / 10.0).cos()), Some(3));
        assert_eq!(match_ell((PI / 8.0).cos() + 2e-9), None);
        assert_eq!(match_ell(0.6), None);
        assert_eq!(match_ell(0.5), None);
        assert!(matches!(
            build_sum_exp_density(&params(0.6, 0.5, 1.0)),
            Err(Error::UnsupportedSigma { .. })
        ));
        assert!(build_sum_exp_density(&params(0.75, 1.0, 0.5))
            .unwrap_err()
            .is_domain_error());
    }

    #[test]
    fn ell_zero_is_the_product_density() {
        for (g, h) in [(0.5, 1.0), (0.1, 2.0), (1.3, 1.4)] {
            let p = params(0.5, g, h);
            let d = build_sum_exp_density(&p).unwrap();
            assert_eq!(d.ell, 0);
            assert_eq!(d.terms.len(), 1);
            assert!(!d.experimental);
            for i in 0..10 {
                for j in 0..10 {
                    let (a, b) = (0.05 + 0.3 * i as f64, 0.03 * (j as f64 + 0.5) * (1.0 + i as f64));
                    let want = density_equal_variance(a, b, &p).unwrap();
                    assert!((d.density(a, b) - want).abs() <= 1e-12 * want.max(1.0), "{a} {b}");
                }
            }
            let m = d.moments();
            assert!((m.mean_gap - 1.0 / (4.0 * h)).abs() < 1e-12);
            assert!((m.mean_laggard - 1.0 / (4.0 * (h - g))).abs() < 1e-12);
            assert!(m.correlation.abs() < 1e-12);
        }
    }

    #[test]
    fn ell_one_exponents() {
        let (g, h) = (0.5, 1.0);
        let d = build_sum_exp_density(&params(0.75, g, h)).unwrap();
        assert_eq!(d.ell, 1);
        let want = [
            [8.0 * h, -8.0 * g / 3.0],
            [6.0 * h - 2.0 * g, -2.0 * (g + h)],
            [6.0 * h - 2.0 * g, 2.0 * h - 2.0 * g / 3.0],
        ];
        assert_eq!(d.terms.len(), 3);
        for w in want {
            assert!(
                d.terms
                    .iter()
                    .any(|t| (t.exponent[0] - w[0]).abs() < 1e-12 && (t.exponent[1] - w[1]).abs() < 1e-12),
                "{w:?} missing from {:?}",
                d.terms
            );
        }
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for (s2, g, h) in [(0.5, 0.5, 1.0), (0.75, 0.5, 1.0), (0.75, 0.2, 0.9)] {
            let d = build_sum_exp_density(&params(s2, g, h)).unwrap();
            let f = raw(&d);
            let cut = 40.0 / d.terms.iter().map(ExpTerm::laggard_rate).fold(f64::INFINITY, f64::min);
            let mass = quad(&f, cut);
            assert!((mass - 1.0).abs() < 1e-3, "{mass}");
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
            let m = d.moments();
            let mean_gap = quad(|a, b| (a - b) * f(a, b), cut);
            let mean_lag = quad(|a, b| b * f(a, b), cut);
            assert!(
                (mean_gap - m.mean_gap).abs() < 1e-3 * m.mean_gap,
                "{mean_gap} {}",
                m.mean_gap
            );
            assert!((mean_lag - m.mean_laggard).abs() < 1e-3 * m.mean_laggard);
            let cdf_half = quad(|a, b| if a - b <= 0.5 { f(a, b) } else { 0.0 }, cut);
            assert!((cdf_half - d.gap_cdf(0.5)).abs() < 5e-3);
        }
    }

    #[test]
    fn higher_ell_is_flagged_and_nonnegative() {
        for ell in 2..5 {
            let sigma = (PI / (2.0 * (ell as f64 + 2.0))).cos();
            let p = ModelParams::with_sigma(0.4, 1.0, sigma, 1.0, 0.5).unwrap();
            let d = build_sum_exp_density(&p).unwrap();
            assert_eq!(d.ell, ell);
            assert!(d.experimental);
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
            let scale = d.density(1e-9, 5e-10);
            for i in 1..=100 {
                for j in 1..=100 {
                    let a = 0.04 * i as f64;
                    let b = a * j as f64 / 101.0;
                    assert!(d.density(a, b) >= -1e-12 * scale, "ell {ell} at ({a}, {b})");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn nonnegative_on_the_domain(g in 0.01f64..2.0, dh in 0.01f64..2.0, s2 in prop::sample::select(vec![0.5, 0.75]),
                                     a in 0.0f64..10.0, t in 0.0f64..1.0) {
            let d = build_sum_exp_density(&params(s2, g, g + dh)).unwrap();
            let v = d.density(a, t * a);
            prop_assert!(v >= 0.0, "{v}");
            prop_assert_eq!(d.density(a, a + 0.1), 0.0);
            prop_assert_eq!(d.density(-a, -2.0 * a), 0.0);
        }

        #[test]
        fn marginal_cdfs_are_distribution_functions(g in 0.01f64..2.0, dh in 0.01f64..2.0, x in 0.0f64..5.0) {
            let d = build_sum_exp_density(&params(0.75, g, g + dh)).unwrap();
            for f in [d.gap_cdf(x), d.laggard_cdf(x)] {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            }
            prop_assert!(d.gap_cdf(x + 0.1) >= d.gap_cdf(x) - 1e-15);
            prop_assert!((d.gap_cdf(1e6) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_distance_basics() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&s, |x| x.clamp(0.0, 1.0)) <= 5e-4 + 1e-12);
        assert!((ks_distance(&s, |_| 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins() {
        let mut h = Histogram2d::new(1.0, 2.0, 4).unwrap();
        h.add(0.1, 0.1);
        h.add(0.99, 1.99);
        h.add(1.0, 0.0);
        h.add(-0.1, 0.0);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[15], 1);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn empirical_run_is_reproducible_and_validated() {
        let p = params(0.5, 0.5, 1.0);
        let o = InvariantOptions::new(30.0, 5.0, 1e-2);
        let a = empirical_invariant_replicates(&p, &o, 9, 3).unwrap();
        let b = empirical_invariant_replicates(&p, &o, 9, 3).unwrap();
        assert_eq!(a.gap, b.gap);
        assert_eq!(a.len(), 3 * 26);
        assert_eq!(a.histogram.total(), a.len() as u64);
        let bad = InvariantOptions { burn_in: 40.0, ..o };
        assert!(empirical_invariant(&p, &bad, &SeedRecord::new(1, 0)).is_err());
        assert!(empirical_invariant(&params(0.5, 1.0, 1.0), &o, &SeedRecord::new(1, 0))
            .unwrap_err()
            .is_domain_error());
    }
}
