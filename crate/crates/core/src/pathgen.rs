//! Path synthesis: driving noise, regulators, ranks, unfolding and names.
//!
//! The pipeline for one path is
//!
//! 1. two independent Brownian paths `V1`, `V2` and their rotations,
//! 2. the regulator pair `(A, Lambda)` from the coupled system,
//! 3. the ranked processes: gap `G = Z + 2A`, laggard `M = K + Lambda`,
//!    leader `N`,
//! 4. the signed difference `Y`, obtained by giving each excursion of `G`
//!    away from 0 an independent fair sign,
//! 5. the named particles `X1`, `X2` and the derived Brownian drivers.
//!
//! Every path functional is computed from grid values only, so the algebraic
//! identities between these processes hold at each grid point up to
//! floating-point rounding.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::SampledPath;
use crate::rng::SeedRecord;
use crate::skorokhod::{self, Forcing, RegulatorPair, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Round-off allowance for zero tests on quantities that are not produced
/// as exact zeros by the construction (the laggard `M`, for instance).
pub const ROUNDOFF_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianBundle {
    pub v1: SampledPath,
    pub v2: SampledPath,
    /// `rho V1 + sigma V2`
    pub v: SampledPath,
    /// `sigma V1 + rho V2`
    pub q: SampledPath,
    /// `rho V1 - sigma V2`
    pub v_flat: SampledPath,
    /// `sigma V1 - rho V2`
    pub q_flat: SampledPath,
}

impl BrownianBundle {
    /// Fills in the rotations of a given pair of driving paths.
    pub fn from_drivers(v1: SampledPath, v2: SampledPath, rho: f64, sigma: f64) -> Result<Self> {
        v1.ensure_same_grid(&v2, "Brownian pair")?;
        let rot = |a: f64, b: f64| -> SampledPath {
            let vals = v1
                .values()
                .iter()
                .zip(v2.values())
                .map(|(&x, &y)| a * x + b * y)
                .collect();
            SampledPath::from_raw(v1.t0(), v1.dt(), vals)
        };
        Ok(Self {
            v: rot(rho, sigma),
            q: rot(sigma, rho),
            v_flat: rot(rho, -sigma),
            q_flat: rot(sigma, -rho),
            v1,
            v2,
        })
    }
}

/// Draws `n` grid values of two independent Brownian paths from the seed's
/// increment stream. Increments are drawn in pairs, `dV1` then `dV2`, one
/// pair per step.
pub fn gen_brownian_pair(n: usize, dt: f64, p: &ModelParams, seed: &SeedRecord) -> Result<BrownianBundle> {
    if n == 0 {
        return Err(Error::param("n", "need at least one grid point"));
    }
    let (v1, v2) = brownian_values(n, dt, seed)?;
    BrownianBundle::from_drivers(
        SampledPath::from_raw(0.0, dt, v1),
        SampledPath::from_raw(0.0, dt, v2),
        p.rho(),
        p.sigma(),
    )
}

fn brownian_values(n: usize, dt: f64, seed: &SeedRecord) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let mut rng = seed.increments();
    let sd = dt.sqrt();
    let mut v1 = Vec::with_capacity(n);
    let mut v2 = Vec::with_capacity(n);
    let (mut a, mut b) = (0.0f64, 0.0f64);
    v1.push(a);
    v2.push(b);
    for _ in 1..n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        a += sd * z1;
        b += sd * z2;
        v1.push(a);
        v2.push(b);
    }
    Ok((v1, v2))
}

/// `Z`, `G`, `K`, `M` and `N` of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportingProcesses {
    pub z: SampledPath,
    pub g: SampledPath,
    pub k: SampledPath,
    pub m: SampledPath,
    pub n: SampledPath,
}

/// Builds the ranked processes from the noise and a solved regulator pair.
///
/// `tol` is the tolerance the pair was solved to: `G` and `M` values in
/// `[-10 tol, 0)` are rounded up to 0, anything lower is a
/// [`Error::Consistency`].
pub fn build_supporting_processes(
    b: &BrownianBundle,
    reg: &RegulatorPair,
    p: &ModelParams,
    tol: f64,
) -> Result<SupportingProcesses> {
    b.v_flat.ensure_same_grid(&reg.a, "supporting processes")?;
    let f = Forcing::new(&b.v_flat, &b.v2, p)?;
    let (a, l) = (reg.a.values(), reg.lambda.values());
    let dt = b.v1.dt();
    let n_pts = a.len();
    let floor = -10.0 * tol;
    let clamp = |process: &'static str, index: usize, v: f64| -> Result<f64> {
        if v >= 0.0 {
            Ok(v)
        } else if v >= floor {
            Ok(0.0)
        } else {
            Err(Error::Consistency {
                process,
                index,
                value: v,
            })
        }
    };
    let mut z = Vec::with_capacity(n_pts);
    let mut g = Vec::with_capacity(n_pts);
    let mut k_ = Vec::with_capacity(n_pts);
    let mut m = Vec::with_capacity(n_pts);
    let mut nn = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        let zi = f.w1[i] - l[i];
        let ki = f.w2[i] - a[i];
        let gi = clamp("G", i, zi + 2.0 * a[i])?;
        let mi = clamp("M", i, ki + l[i])?;
        z.push(zi);
        g.push(gi);
        k_.push(ki);
        m.push(mi);
        // equals r1 - h t + A + rho V1 up to rounding, and keeps N >= M exact
        nn.push(mi + gi);
    }
    let mk = |v| SampledPath::from_raw(0.0, dt, v);
    Ok(SupportingProcesses {
        z: mk(z),
        g: mk(g),
        k: mk(k_),
        m: mk(m),
        n: mk(nn),
    })
}

/// Excursions of the gap away from 0, with their signs once assigned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExcursionSet {
    /// Maximal index ranges on which `G > zero_tol`, in order.
    pub intervals: Vec<Range<usize>>,
    /// One sign per interval, filled in by [`unfold_gap`].
    pub marks: Vec<i8>,
    /// Whether the path was at the corner at the index just before the
    /// excursion.
    pub origin_flags: Vec<bool>,
}

impl ExcursionSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Finds the maximal runs with `G > zero_tol`. The corner flag of a run
/// starting at index `a > 0` is `N(a - 1) <= zero_tol`.
pub fn enumerate_excursions(g: &SampledPath, n: &SampledPath, zero_tol: f64) -> ExcursionSet {
    let corner = |k: usize| n.values()[k] <= zero_tol;
    excursions_with(g, zero_tol, corner)
}

pub(crate) fn excursions_with(g: &SampledPath, zero_tol: f64, corner: impl Fn(usize) -> bool) -> ExcursionSet {
    let mut set = ExcursionSet::default();
    let vals = g.values();
    let mut k = 0;
    while k < vals.len() {
        if vals[k] > zero_tol {
            let start = k;
            while k < vals.len() && vals[k] > zero_tol {
                k += 1;
            }
            set.intervals.push(start..k);
            set.origin_flags.push(start > 0 && corner(start - 1));
        } else {
            k += 1;
        }
    }
    set
}

/// Supplies excursion signs in excursion order.
pub trait MarkSource {
    fn mark(&mut self, index: usize, interval: &Range<usize>, from_corner: bool) -> i8;
}

/// Independent fair signs.
pub struct FairMarks<R>(pub R);

impl<R: Rng> MarkSource for FairMarks<R> {
    fn mark(&mut self, _: usize, _: &Range<usize>, _: bool) -> i8 {
        if self.0.gen::<bool>() {
            1
        } else {
            -1
        }
    }
}

/// Fixed signs for tests; reuses the last one when the list runs out.
pub struct InjectedMarks(pub Vec<i8>);

impl MarkSource for InjectedMarks {
    fn mark(&mut self, index: usize, _: &Range<usize>, _: bool) -> i8 {
        *self.0.get(index).or(self.0.last()).unwrap_or(&1)
    }
}

/// Gives the excursion in progress at time 0 the sign of `y0`, so that
/// `Y(0) = x1 - x2`, and defers to `inner` for every other excursion.
pub struct StartingSign<'a> {
    pub y0: f64,
    pub inner: &'a mut dyn MarkSource,
}

impl MarkSource for StartingSign<'_> {
    fn mark(&mut self, index: usize, interval: &Range<usize>, from_corner: bool) -> i8 {
        if interval.start == 0 && self.y0 != 0.0 {
            if self.y0 > 0.0 {
                1
            } else {
                -1
            }
        } else {
            self.inner.mark(index, interval, from_corner)
        }
    }
}

/// Signs each excursion of `G` and returns `Y = mark * G` on excursions,
/// 0 elsewhere. Marks are recorded in `exc.marks`.
pub fn unfold_gap(g: &SampledPath, exc: &mut ExcursionSet, marks: &mut dyn MarkSource) -> SampledPath {
    let mut y = vec![0.0; g.len()];
    exc.marks.clear();
    for (i, r) in exc.intervals.iter().enumerate() {
        let m = marks.mark(i, r, exc.origin_flags[i]);
        debug_assert!(m == 1 || m == -1);
        exc.marks.push(m);
        for k in r.clone() {
            y[k] = if m > 0 { g.values()[k] } else { -g.values()[k] };
        }
    }
    SampledPath::from_raw(g.t0(), g.dt(), y)
}

/// Names from ranks: the leader is `X1` while `Y > 0`, otherwise `X2`.
///
/// Equivalent to `X1 = M + Y^+`, `X2 = N - Y^+`, written as a selection so
/// that `max(X1, X2) = N` and `min(X1, X2) = M` hold bit for bit.
pub fn assemble_names(m: &SampledPath, n: &SampledPath, y: &SampledPath) -> (SampledPath, SampledPath) {
    let mut x1 = Vec::with_capacity(m.len());
    let mut x2 = Vec::with_capacity(m.len());
    for ((&mv, &nv), &yv) in m.values().iter().zip(n.values()).zip(y.values()) {
        if yv > 0.0 {
            x1.push(nv);
            x2.push(mv);
        } else {
            x1.push(mv);
            x2.push(nv);
        }
    }
    (
        SampledPath::from_raw(m.t0(), m.dt(), x1),
        SampledPath::from_raw(m.t0(), m.dt(), x2),
    )
}

fn integrate(grid: &SampledPath, mut step: impl FnMut(usize) -> f64) -> SampledPath {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 0..grid.len() - 1 {
        acc += step(k);
        out.push(acc);
    }
    SampledPath::from_raw(grid.t0(), grid.dt(), out)
}

/// `B1 = int 1{Y>0} dV1 + int 1{Y<=0} dV2` and the swapped `B2`, with the
/// indicator taken at the left end of each step.
pub fn derive_named_brownians(y: &SampledPath, v1: &SampledPath, v2: &SampledPath) -> (SampledPath, SampledPath) {
    let (yv, a, b) = (y.values(), v1.values(), v2.values());
    let b1 = integrate(y, |k| if yv[k] > 0.0 { a[k + 1] - a[k] } else { b[k + 1] - b[k] });
    let b2 = integrate(y, |k| if yv[k] > 0.0 { b[k + 1] - b[k] } else { a[k + 1] - a[k] });
    (b1, b2)
}

/// Left-continuous sign: `sgn(0) = -1`.
pub fn sgn_left(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `W1 = int sgn(Y) dV1`, `W2 = -int sgn(Y) dV2`, `W = int sgn(Y) dV_flat`.
pub fn derive_rank_brownians(
    y: &SampledPath,
    v1: &SampledPath,
    v2: &SampledPath,
    v_flat: &SampledPath,
) -> (SampledPath, SampledPath, SampledPath) {
    let (yv, a, b, c) = (y.values(), v1.values(), v2.values(), v_flat.values());
    let w1 = integrate(y, |k| sgn_left(yv[k]) * (a[k + 1] - a[k]));
    let w2 = integrate(y, |k| -sgn_left(yv[k]) * (b[k + 1] - b[k]));
    let w = integrate(y, |k| sgn_left(yv[k]) * (c[k + 1] - c[k]));
    (w1, w2, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Whole-path Picard iteration.
    #[default]
    Picard,
    /// Closed-form solve one grid index at a time.
    Stepwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub solver: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
    /// Threshold for excursion detection; the construction yields exact
    /// zeros of `G`, so the default is 0.
    pub zero_tol: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            solver: SolverMethod::Picard,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            zero_tol: 0.0,
        }
    }
}

/// Every process of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub params: ModelParams,
    pub brownian: BrownianBundle,
    pub regulators: RegulatorPair,
    pub z: SampledPath,
    pub g: SampledPath,
    pub k: SampledPath,
    pub m: SampledPath,
    pub n: SampledPath,
    pub y: SampledPath,
    pub x1: SampledPath,
    pub x2: SampledPath,
    pub b1: SampledPath,
    pub b2: SampledPath,
    pub w1: SampledPath,
    pub w2: SampledPath,
    pub w: SampledPath,
    pub excursions: ExcursionSet,
    pub seed: SeedRecord,
    pub zero_tol: f64,
}

/// Number of grid steps for a horizon, rejecting horizons shorter than `dt`.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !horizon.is_finite() || horizon < dt * (1.0 - 1e-9) {
        return Err(Error::param("horizon", format!("must be at least dt, got {horizon}")));
    }
    Ok((horizon / dt).round() as usize)
}

pub fn simulate_path(p: &ModelParams, horizon: f64, dt: f64, seed: &SeedRecord) -> Result<PathBundle> {
    simulate_path_with(p, horizon, dt, seed, &SimulationOptions::default())
}

pub fn simulate_path_with(
    p: &ModelParams,
    horizon: f64,
    dt: f64,
    seed: &SeedRecord,
    opts: &SimulationOptions,
) -> Result<PathBundle> {
    let mut fair = FairMarks(seed.marks());
    simulate_path_marked(p, horizon, dt, seed, opts, &mut fair)
}

/// Like [`simulate_path_with`] but with caller-supplied excursion signs
/// (the excursion in progress at time 0 still takes the sign of `y0`).
pub fn simulate_path_marked(
    p: &ModelParams,
    horizon: f64,
    dt: f64,
    seed: &SeedRecord,
    opts: &SimulationOptions,
    marks: &mut dyn MarkSource,
) -> Result<PathBundle> {
    if !(p.sigma() > 0.0) {
        return Err(Error::DegenerateSigma("degenerate_simulate"));
    }
    let steps = grid_steps(horizon, dt)?;
    let brownian = gen_brownian_pair(steps + 1, dt, p, seed)?;
    synthesize_path(p, brownian, seed, opts, marks)
}

/// Runs the pipeline from given driving paths. `seed` is only recorded.
pub fn synthesize_path(
    p: &ModelParams,
    brownian: BrownianBundle,
    seed: &SeedRecord,
    opts: &SimulationOptions,
    marks: &mut dyn MarkSource,
) -> Result<PathBundle> {
    let regulators = match opts.solver {
        SolverMethod::Picard => {
            skorokhod::solve_coupled_regulators(&brownian.v_flat, &brownian.v2, p, opts.tol, opts.max_iter)?
        }
        SolverMethod::Stepwise => skorokhod::solve_coupled_regulators_stepwise(&brownian.v_flat, &brownian.v2, p)?,
    };
    let sp = build_supporting_processes(&brownian, &regulators, p, opts.tol)?;
    let mut excursions = enumerate_excursions(&sp.g, &sp.n, opts.zero_tol);
    let mut start = StartingSign {
        y0: p.y0(),
        inner: marks,
    };
    let y = unfold_gap(&sp.g, &mut excursions, &mut start);
    let (x1, x2) = assemble_names(&sp.m, &sp.n, &y);
    let (b1, b2) = derive_named_brownians(&y, &brownian.v1, &brownian.v2);
    let (w1, w2, w) = derive_rank_brownians(&y, &brownian.v1, &brownian.v2, &brownian.v_flat);
    let bundle = PathBundle {
        params: *p,
        brownian,
        regulators,
        z: sp.z,
        g: sp.g,
        k: sp.k,
        m: sp.m,
        n: sp.n,
        y,
        x1,
        x2,
        b1,
        b2,
        w1,
        w2,
        w,
        excursions,
        seed: *seed,
        zero_tol: opts.zero_tol,
    };
    bundle.check_invariants()?;
    Ok(bundle)
}

/// Ranked state at one grid point of a streamed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPoint {
    pub index: usize,
    pub a: f64,
    pub lambda: f64,
    /// `R1 - R2`
    pub gap: f64,
    /// `R2`
    pub laggard: f64,
}

impl RankPoint {
    pub fn leader(&self) -> f64 {
        self.gap + self.laggard
    }
}

/// Grid values of `(A, Lambda, G, M)` without storing the path.
///
/// Draws the same increments as [`simulate_path`] and solves the regulators
/// with [`skorokhod::RegulatorStepper`], so its output equals the stepwise
/// pipeline point for point.
#[derive(Debug, Clone)]
pub struct RankStream {
    rng: rand_chacha::ChaCha8Rng,
    stepper: skorokhod::RegulatorStepper,
    steps: usize,
    index: usize,
    dt: f64,
    sd: f64,
    v1: f64,
    v2: f64,
    /// `|y0|, lambda, r2, g, rho, sigma`
    consts: [f64; 6],
    floor: f64,
}

impl RankStream {
    pub fn new(p: &ModelParams, horizon: f64, dt: f64, seed: &SeedRecord) -> Result<Self> {
        if !(p.sigma() > 0.0) {
            return Err(Error::DegenerateSigma("degenerate_simulate"));
        }
        let steps = grid_steps(horizon, dt)?;
        Ok(Self {
            rng: seed.increments(),
            stepper: skorokhod::RegulatorStepper::default(),
            steps,
            index: 0,
            dt,
            sd: dt.sqrt(),
            v1: 0.0,
            v2: 0.0,
            consts: [p.y0().abs(), p.lambda(), p.r2(), p.g(), p.rho(), p.sigma()],
            floor: -10.0 * DEFAULT_TOL,
        })
    }

    /// Number of grid points the stream yields.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Iterator for RankStream {
    type Item = Result<RankPoint>;

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.index;
        if k > self.steps {
            return None;
        }
        if k > 0 {
            let z1: f64 = StandardNormal.sample(&mut self.rng);
            let z2: f64 = StandardNormal.sample(&mut self.rng);
            self.v1 += self.sd * z1;
            self.v2 += self.sd * z2;
        }
        self.index += 1;
        let [abs_y, lam, r2, g, rho, sigma] = self.consts;
        let s = k as f64 * self.dt;
        let w1 = abs_y - lam * s + (rho * self.v1 + -sigma * self.v2);
        let w2 = r2 + g * s + sigma * self.v2;
        let (a, l) = self.stepper.step(w1, w2);
        let clamp = |process, v: f64| {
            if v >= 0.0 {
                Ok(v)
            } else if v >= self.floor {
                Ok(0.0)
            } else {
                Err(Error::Consistency {
                    process,
                    index: k,
                    value: v,
                })
            }
        };
        let point = clamp("G", w1 - l + 2.0 * a).and_then(|gap| {
            let laggard = clamp("M", w2 - a + l)?;
            Ok(RankPoint {
                index: k,
                a,
                lambda: l,
                gap,
                laggard,
            })
        });
        if point.is_err() {
            self.index = self.steps + 1;
        }
        Some(point)
    }
}

/// Largest absolute violation of each grid identity over a path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridResiduals {
    /// `G` vs `|Y|`
    pub gap_abs: f64,
    /// `N - M` vs `G`
    pub gap_ranks: f64,
    /// `X1 - X2` vs `Y`
    pub names: f64,
    /// `X1 + X2` vs `xi_sum + nu t + V + Lambda`
    pub sum: f64,
    /// `N` vs `r1 - h t + rho V1 + A`
    pub leader: f64,
    /// `M` vs `r2 + g t + sigma V2 - A + Lambda`
    pub laggard: f64,
    pub skew_x1: f64,
    pub skew_x2: f64,
}

impl GridResiduals {
    pub fn max(&self) -> f64 {
        [
            self.gap_abs,
            self.gap_ranks,
            self.names,
            self.sum,
            self.leader,
            self.laggard,
            self.skew_x1,
            self.skew_x2,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("gap_abs", self.gap_abs),
            ("gap_ranks", self.gap_ranks),
            ("names", self.names),
            ("sum", self.sum),
            ("leader", self.leader),
            ("laggard", self.laggard),
            ("skew_x1", self.skew_x1),
            ("skew_x2", self.skew_x2),
        ]
    }
}

impl PathBundle {
    /// Leader, `max(X1, X2)`.
    pub fn r1(&self) -> &SampledPath {
        &self.n
    }

    /// Laggard, `min(X1, X2)`.
    pub fn r2(&self) -> &SampledPath {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.g.dt()
    }

    /// Grid time of index `k`, measured from the start of the path.
    pub fn time(&self, k: usize) -> f64 {
        self.g.elapsed(k)
    }

    /// The skew representations of both names:
    ///
    /// ```text
    /// X1 = x1 + mu t + rho^2 (Y^+ - y0^+) - sigma^2 (Y^- - y0^-) + rho sigma Q
    ///         + (rho^2 - sigma^2)(Lambda/2 - A) + Lambda/2
    /// X2 = x2 + mu t - sigma^2 (Y^+ - y0^+) + rho^2 (Y^- - y0^-) + rho sigma Q
    ///         + (rho^2 - sigma^2)(Lambda/2 - A) + Lambda/2
    /// ```
    pub fn skew_representation(&self) -> (SampledPath, SampledPath) {
        self.skew_with(true)
    }

    pub(crate) fn skew_with(&self, half_lambda: bool) -> (SampledPath, SampledPath) {
        let p = &self.params;
        let (rr, ss, rs) = (p.rho() * p.rho(), p.sigma_sq(), p.rho() * p.sigma());
        let y0 = p.y0();
        let (y0p, y0m) = (y0.max(0.0), (-y0).max(0.0));
        let mut x1 = Vec::with_capacity(self.len());
        let mut x2 = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let t = self.time(k);
            let y = self.y.values()[k];
            let (yp, ym) = (y.max(0.0), (-y).max(0.0));
            let a = self.regulators.a.values()[k];
            let l = self.regulators.lambda.values()[k];
            let common = p.mu() * t
                + rs * self.brownian.q.values()[k]
                + (rr - ss) * (0.5 * l - a)
                + if half_lambda { 0.5 * l } else { 0.0 };
            x1.push(p.x1() + common + rr * (yp - y0p) - ss * (ym - y0m));
            x2.push(p.x2() + common - ss * (yp - y0p) + rr * (ym - y0m));
        }
        let mk = |v| SampledPath::from_raw(0.0, self.dt(), v);
        (mk(x1), mk(x2))
    }

    pub fn grid_residuals(&self) -> GridResiduals {
        let p = &self.params;
        let mut r = GridResiduals::default();
        let (sk1, sk2) = self.skew_representation();
        let upd = |slot: &mut f64, v: f64| *slot = slot.max(v.abs());
        for k in 0..self.len() {
            let t = self.time(k);
            let g = self.g.values()[k];
            let y = self.y.values()[k];
            let (m, n) = (self.m.values()[k], self.n.values()[k]);
            let (x1, x2) = (self.x1.values()[k], self.x2.values()[k]);
            let a = self.regulators.a.values()[k];
            let l = self.regulators.lambda.values()[k];
            let b = &self.brownian;
            upd(&mut r.gap_abs, g - y.abs());
            upd(&mut r.gap_ranks, n - m - g);
            upd(&mut r.names, x1 - x2 - y);
            upd(&mut r.sum, x1 + x2 - (p.xi_sum() + p.nu() * t + b.v.values()[k] + l));
            upd(&mut r.leader, n - (p.r1() - p.h() * t + p.rho() * b.v1.values()[k] + a));
            upd(
                &mut r.laggard,
                m - (p.r2() + p.g() * t + p.sigma() * b.v2.values()[k] - a + l),
            );
            upd(&mut r.skew_x1, x1 - sk1.values()[k]);
            upd(&mut r.skew_x2, x2 - sk2.values()[k]);
        }
        r
    }

    /// Checks the exact bundle invariants: `|Y| = G` off the excursion
    /// threshold, `0 <= M <= N`, and nonnegative names.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.len() {
            let (g, y) = (self.g.values()[k], self.y.values()[k]);
            let (m, n) = (self.m.values()[k], self.n.values()[k]);
            if g > self.zero_tol && y.abs() != g {
                return Err(Error::Consistency {
                    process: "Y",
                    index: k,
                    value: y,
                });
            }
            if m < 0.0 {
                return Err(Error::Consistency {
                    process: "M",
                    index: k,
                    value: m,
                });
            }
            if n < m {
                return Err(Error::Consistency {
                    process: "N",
                    index: k,
                    value: n - m,
                });
            }
        }
        Ok(())
    }

    /// Indices where `A` increases.
    pub fn a_increase_indices(&self) -> impl Iterator<Item = usize> + '_ {
        increase_indices(&self.regulators.a)
    }

    /// Indices where `Lambda` increases.
    pub fn lambda_increase_indices(&self) -> impl Iterator<Item = usize> + '_ {
        increase_indices(&self.regulators.lambda)
    }
}

pub(crate) fn increase_indices(p: &SampledPath) -> impl Iterator<Item = usize> + '_ {
    let v = p.values();
    (1..v.len()).filter(move |&k| v[k] > v[k - 1])
}
