//! Model parameters, wedge geometry and the closed-form classifiers.
//!
//! The two particles move with drift `g` (laggard) and `-h` (leader) and
//! dispersions `sigma` (laggard) and `rho` (leader), with `rho^2 + sigma^2 = 1`.
//!
//! Angles follow the Varadhan–Williams convention: reflection angles are
//! measured from the inward normal of each face, positive when the reflection
//! vector points toward the corner. Under that convention face 1 is the
//! horizontal face with `theta1 = 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Absolute tolerance used for every geometry identity.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// How far `sqrt(rho^2 + sigma^2)` may sit from 1 before construction fails.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    g: f64,
    h: f64,
    rho: f64,
    sigma: f64,
    x1: f64,
    x2: f64,
    lambda: f64,
    nu: f64,
    mu: f64,
    xi_sum: f64,
    y0: f64,
    r1: f64,
    r2: f64,
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, format!("must be finite, got {v}")));
    }
    if v < 0.0 {
        return Err(Error::param(name, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

impl ModelParams {
    /// Validates the tuple and precomputes the derived constants.
    ///
    /// `(rho, sigma)` is rescaled onto the unit circle when its norm is within
    /// [`NORMALIZATION_TOL`] of 1 and rejected otherwise.
    pub fn new(g: f64, h: f64, rho: f64, sigma: f64, x1: f64, x2: f64) -> Result<Self> {
        check_nonneg("g", g)?;
        check_nonneg("h", h)?;
        check_nonneg("rho", rho)?;
        check_nonneg("sigma", sigma)?;
        check_nonneg("x1", x1)?;
        check_nonneg("x2", x2)?;
        let norm = rho.hypot(sigma);
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::param(
                "rho",
                format!("rho^2 + sigma^2 must equal 1, got norm {norm}"),
            ));
        }
        let (rho, sigma) = (rho / norm, sigma / norm);
        let xi_sum = x1 + x2;
        if !(xi_sum > 0.0) {
            return Err(Error::param("x1", "x1 + x2 must be positive"));
        }
        Ok(Self {
            g,
            h,
            rho,
            sigma,
            x1,
            x2,
            lambda: g + h,
            nu: g - h,
            mu: g * rho * rho - h * sigma * sigma,
            xi_sum,
            y0: x1 - x2,
            r1: x1.max(x2),
            r2: x1.min(x2),
        })
    }

    /// Builds the parameters from `sigma`, completing `rho = sqrt(1 - sigma^2)`.
    pub fn with_sigma(g: f64, h: f64, sigma: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::param("sigma", format!("must lie in [0, 1], got {sigma}")));
        }
        Self::new(g, h, (1.0 - sigma * sigma).sqrt(), sigma, x1, x2)
    }

    /// Builds the parameters from `sigma^2`, which is how most regimes are quoted.
    pub fn with_sigma_sq(g: f64, h: f64, sigma_sq: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma_sq) {
            return Err(Error::param(
                "sigma",
                format!("sigma^2 must lie in [0, 1], got {sigma_sq}"),
            ));
        }
        Self::new(g, h, (1.0 - sigma_sq).sqrt(), sigma_sq.sqrt(), x1, x2)
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    /// `g + h`
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    /// `g - h`
    pub fn nu(&self) -> f64 {
        self.nu
    }
    /// `g rho^2 - h sigma^2`, the common drift in the skew representations.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// `x1 + x2`
    pub fn xi_sum(&self) -> f64 {
        self.xi_sum
    }
    /// `x1 - x2`
    pub fn y0(&self) -> f64 {
        self.y0
    }
    /// Initial leader position.
    pub fn r1(&self) -> f64 {
        self.r1
    }
    /// Initial laggard position.
    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// The flat configuration record for these parameters.
    pub fn to_record(&self) -> ParamsRecord {
        ParamsRecord {
            g: self.g,
            h: self.h,
            rho: Some(self.rho),
            sigma: Some(self.sigma),
            x1: self.x1,
            x2: self.x2,
        }
    }
}

/// Flat key-value form of [`ModelParams`]. Either `rho` or `sigma` may be left
/// out and is then completed from `rho^2 + sigma^2 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    pub g: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub x1: f64,
    pub x2: f64,
}

impl TryFrom<ParamsRecord> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRecord) -> Result<Self> {
        let (rho, sigma) = match (r.rho, r.sigma) {
            (Some(rho), Some(sigma)) => (rho, sigma),
            (None, Some(sigma)) if (0.0..=1.0).contains(&sigma) => ((1.0 - sigma * sigma).sqrt(), sigma),
            (Some(rho), None) if (0.0..=1.0).contains(&rho) => (rho, (1.0 - rho * rho).sqrt()),
            (None, None) => return Err(Error::param("sigma", "one of rho, sigma is required")),
            _ => return Err(Error::param("sigma", "rho and sigma must lie in [0, 1]")),
        };
        ModelParams::new(r.g, r.h, rho, sigma, r.x1, r.x2)
    }
}

impl From<ModelParams> for ParamsRecord {
    fn from(p: ModelParams) -> Self {
        p.to_record()
    }
}

impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ParamsRecord::deserialize(d)?;
        ModelParams::try_from(r).map_err(serde::de::Error::custom)
    }
}

/// Geometry of the wedge obtained by scaling the ranks to unit diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeGeometry {
    /// Opening angle, `arccos(sigma)`.
    pub xi_angle: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// `(theta1 + theta2) / xi_angle`
    pub alpha: f64,
    pub nu1: [f64; 2],
    pub nu2: [f64; 2],
    pub n1: [f64; 2],
    pub n2: [f64; 2],
}

pub fn wedge_geometry(p: &ModelParams) -> Result<WedgeGeometry> {
    let (rho, sigma) = (p.rho(), p.sigma());
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::param(
            "sigma",
            format!("wedge geometry needs 0 < sigma < 1, got {sigma}"),
        ));
    }
    let xi = sigma.acos();
    let (mut theta2, mut alpha) = (2.0 * xi - FRAC_PI_2, 2.0 - PI / (2.0 * xi));
    // Snap the equal-variance case so the sign tests below agree with
    // `classify_corner`, which decides on sigma^2 directly.
    if (p.sigma_sq() - 0.5).abs() <= GEOMETRY_TOL {
        theta2 = 0.0;
        alpha = 0.0;
    }
    Ok(WedgeGeometry {
        xi_angle: xi,
        theta1: 0.0,
        theta2,
        alpha,
        nu1: [0.0, 1.0],
        nu2: [1.0 / rho, -1.0 / sigma],
        n1: [0.0, 1.0],
        n2: [rho, -sigma],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CornerClass {
    Never,
    PositiveProbability,
    AlmostSurely,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecurrenceClass {
    Transient,
    NullRecurrentBoundary,
    PositiveRecurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub corner: CornerClass,
    pub recurrence: RecurrenceClass,
}

/// Corner attainability for `0 < sigma <= 1`.
///
/// `PositiveProbability` is deliberately not refined further when `g + h > 0`:
/// whether the hit is almost sure there is left open.
pub fn classify_corner(p: &ModelParams) -> Result<CornerClass> {
    if p.sigma() == 0.0 {
        return Err(Error::DegenerateSigma("classify_corner"));
    }
    if p.sigma_sq() >= 0.5 - GEOMETRY_TOL {
        Ok(CornerClass::Never)
    } else if p.lambda() == 0.0 {
        Ok(CornerClass::AlmostSurely)
    } else {
        Ok(CornerClass::PositiveProbability)
    }
}

pub fn classify_recurrence(p: &ModelParams) -> Result<RecurrenceClass> {
    if !(p.sigma() > 0.0 && p.sigma() < 1.0) {
        return Err(Error::param("sigma", "recurrence classification needs 0 < sigma < 1"));
    }
    if !(p.lambda() > 0.0) {
        return Err(Error::param("g", "recurrence classification needs g + h > 0"));
    }
    Ok(if p.g() > p.h() {
        RecurrenceClass::Transient
    } else if p.g() == p.h() {
        RecurrenceClass::NullRecurrentBoundary
    } else {
        RecurrenceClass::PositiveRecurrent
    })
}

pub fn classify(p: &ModelParams) -> Result<Classification> {
    Ok(Classification {
        corner: classify_corner(p)?,
        recurrence: classify_recurrence(p)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryProbability {
    SubProbability,
    AlmostSure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedEntry {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HobsonRogers {
    pub entry_as: EntryProbability,
    pub expected_entry: ExpectedEntry,
}

/// Effective drift rates `(mu + alpha_r nu^-, nu + beta_r mu^-)` of a planar
/// reflected process with drift `(mu, nu)` and pushing coefficients
/// `(alpha_r, beta_r)`.
pub fn effective_rates(mu: f64, nu: f64, alpha_r: f64, beta_r: f64) -> (f64, f64) {
    (mu + alpha_r * (-nu).max(0.0), nu + beta_r * (-mu).max(0.0))
}

pub fn classify_hobson_rogers(mu: f64, nu: f64, alpha_r: f64, beta_r: f64) -> Result<HobsonRogers> {
    if mu == 0.0 && nu == 0.0 {
        return Err(Error::Domain(
            "Hobson-Rogers classification needs (mu, nu) != (0, 0)".into(),
        ));
    }
    let (e1, e2) = effective_rates(mu, nu, alpha_r, beta_r);
    let entry_as = if e1 <= 0.0 && e2 <= 0.0 {
        EntryProbability::AlmostSure
    } else {
        EntryProbability::SubProbability
    };
    let expected_entry = if e1 < 0.0 && e2 < 0.0 {
        ExpectedEntry::Finite
    } else {
        ExpectedEntry::Infinite
    };
    Ok(HobsonRogers {
        entry_as,
        expected_entry,
    })
}

/// Drift and pushing coefficients that put the ranked pair into the
/// Hobson–Rogers form: `(-lambda, g, -1, -1/2)`.
pub fn rank_mapping(p: &ModelParams) -> (f64, f64, f64, f64) {
    (-p.lambda(), p.g(), -1.0, -0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    fn params(g: f64, h: f64, s2: f64) -> ModelParams {
        ModelParams::with_sigma_sq(g, h, s2, 1.0, 0.5).unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = ModelParams::new(0.5, 1.0, 0.6, 0.8, 0.25, 1.0).unwrap();
        assert_eq!(p.lambda(), 1.5);
        assert_eq!(p.nu(), -0.5);
        assert_eq!(p.xi_sum(), 1.25);
        assert_eq!(p.y0(), -0.75);
        assert_eq!(p.r1(), 1.0);
        assert_eq!(p.r2(), 0.25);
        assert!((p.mu() - (0.5 * 0.36 - 0.64)).abs() < 1e-15);
        // the symmetric form of the same drift
        let alt = 0.5 * (p.nu() + p.lambda() * (0.36 - 0.64));
        assert!((p.mu() - alt).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ModelParams::new(-1.0, 0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 0.9, 0.9, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, f64::NAN, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn geometry_examples() {
        let w = wedge_geometry(&params(1.0, 1.0, 0.5)).unwrap();
        assert!((w.xi_angle - FRAC_PI_4).abs() < GEOMETRY_TOL);
        assert_eq!(w.alpha, 0.0);
        assert_eq!(w.theta2, 0.0);

        let w = wedge_geometry(&params(1.0, 1.0, 0.75)).unwrap();
        assert!((w.xi_angle - FRAC_PI_6).abs() < GEOMETRY_TOL);
        assert!((w.theta2 + FRAC_PI_6).abs() < GEOMETRY_TOL);
        assert!((w.alpha + 1.0).abs() < GEOMETRY_TOL);

        let w = wedge_geometry(&params(1.0, 1.0, 0.25)).unwrap();
        assert!((w.xi_angle - FRAC_PI_3).abs() < GEOMETRY_TOL);
        assert!((w.alpha - 0.5).abs() < GEOMETRY_TOL);
        assert_eq!(w.theta1, 0.0);
    }

    #[test]
    fn geometry_vectors() {
        let p = params(0.0, 0.0, 0.36);
        let w = wedge_geometry(&p).unwrap();
        assert_eq!(w.nu1, [0.0, 1.0]);
        assert_eq!(w.n1, [0.0, 1.0]);
        assert!((w.n2[0] - 0.8).abs() < 1e-15 && (w.n2[1] + 0.6).abs() < 1e-15);
        assert!((w.nu2[0] - 1.25).abs() < 1e-12 && (w.nu2[1] + 1.0 / 0.6).abs() < 1e-12);
        assert!((w.xi_angle.cos() - p.sigma()).abs() < GEOMETRY_TOL);
    }

    #[test]
    fn geometry_rejects_endpoints() {
        assert!(wedge_geometry(&params(1.0, 1.0, 0.0)).is_err());
        assert!(wedge_geometry(&params(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn corner_examples() {
        assert_eq!(classify_corner(&params(1.0, 2.0, 0.5)).unwrap(), CornerClass::Never);
        assert_eq!(
            classify_corner(&params(0.0, 0.0, 0.25)).unwrap(),
            CornerClass::AlmostSurely
        );
        assert_eq!(
            classify_corner(&params(1.0, 0.0, 0.25)).unwrap(),
            CornerClass::PositiveProbability
        );
        assert_eq!(classify_corner(&params(0.0, 0.0, 1.0)).unwrap(), CornerClass::Never);
        assert!(matches!(
            classify_corner(&params(1.0, 0.0, 0.0)),
            Err(Error::DegenerateSigma(_))
        ));
    }

    #[test]
    fn recurrence_examples() {
        use RecurrenceClass::*;
        assert_eq!(classify_recurrence(&params(0.5, 1.0, 0.5)).unwrap(), PositiveRecurrent);
        assert_eq!(
            classify_recurrence(&params(1.0, 1.0, 0.5)).unwrap(),
            NullRecurrentBoundary
        );
        assert_eq!(classify_recurrence(&params(2.0, 1.0, 0.5)).unwrap(), Transient);
        assert!(classify_recurrence(&params(0.0, 0.0, 0.5)).is_err());
    }

    #[test]
    fn hobson_rogers_examples() {
        let p = params(0.5, 1.0, 0.5);
        let (m, n, a, b) = rank_mapping(&p);
        let (e1, e2) = effective_rates(m, n, a, b);
        assert_eq!((e1, e2), (-1.5, -0.25));
        let c = classify_hobson_rogers(m, n, a, b).unwrap();
        assert_eq!(c.entry_as, EntryProbability::AlmostSure);
        assert_eq!(c.expected_entry, ExpectedEntry::Finite);

        let c = classify_hobson_rogers(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(c.entry_as, EntryProbability::SubProbability);
        assert_eq!(c.expected_entry, ExpectedEntry::Infinite);

        let c = classify_hobson_rogers(-1.0, 1.0, -1.0, -0.5).unwrap();
        assert_eq!(c.entry_as, EntryProbability::SubProbability);

        assert!(classify_hobson_rogers(0.0, 0.0, -1.0, -0.5).is_err());
    }

    #[test]
    fn record_round_trip() {
        let p = ModelParams::new(0.5, 1.0, 0.6, 0.8, 1.0, 0.5).unwrap();
        let text = toml::to_string(&p).unwrap();
        let back: ModelParams = toml::from_str(&text).unwrap();
        assert_eq!(p, back);

        let only_sigma: ModelParams = toml::from_str("g = 1\nh = 0\nsigma = 0.8\nx1 = 1\nx2 = 0\n").unwrap();
        assert!((only_sigma.rho() - 0.6).abs() < 1e-15);
        let only_rho: ModelParams = toml::from_str("g = 1\nh = 0\nrho = 0.6\nx1 = 1\nx2 = 0\n").unwrap();
        assert!((only_rho.sigma() - 0.8).abs() < 1e-15);

        assert!(toml::from_str::<ModelParams>("g = 1\nh = 0\nx1 = 1\nx2 = 0\n").is_err());
        assert!(toml::from_str::<ModelParams>("g = 1\nh = 0\nsigma = 1\nx1 = 1\nx2 = 0\nk = 2\n").is_err());
    }

    #[test]
    fn sign_rules_on_sigma_grid() {
        for i in 1..=1000 {
            let sigma = i as f64 / 1001.0;
            let p = ModelParams::with_sigma(0.3, 0.7, sigma, 1.0, 0.0).unwrap();
            let w = wedge_geometry(&p).unwrap();
            let s2 = p.sigma_sq();
            assert_eq!(w.theta2 > 0.0, s2 < 0.5, "sigma = {sigma}");
            assert_eq!(w.alpha <= 0.0, s2 >= 0.5, "sigma = {sigma}");
            assert_eq!(classify_corner(&p).unwrap() == CornerClass::Never, w.alpha <= 0.0);
            assert!((w.theta2 - (2.0 * w.xi_angle - FRAC_PI_2)).abs() <= GEOMETRY_TOL);
            assert!((w.alpha - (w.theta1 + w.theta2) / w.xi_angle).abs() <= GEOMETRY_TOL);
        }
    }

    #[test]
    fn recurrence_matches_hobson_rogers_on_grid() {
        for i in 0..=20 {
            for j in 0..=20 {
                let (g, h) = (i as f64 * 0.25, j as f64 * 0.25);
                if g + h == 0.0 {
                    continue;
                }
                let p = params(g, h, 0.3);
                let (m, n, a, b) = rank_mapping(&p);
                let hr = classify_hobson_rogers(m, n, a, b).unwrap();
                let expected = match (hr.entry_as, hr.expected_entry) {
                    (EntryProbability::SubProbability, _) => RecurrenceClass::Transient,
                    (EntryProbability::AlmostSure, ExpectedEntry::Infinite) => RecurrenceClass::NullRecurrentBoundary,
                    (EntryProbability::AlmostSure, ExpectedEntry::Finite) => RecurrenceClass::PositiveRecurrent,
                };
                assert_eq!(classify_recurrence(&p).unwrap(), expected, "g={g}, h={h}");
            }
        }
    }

    proptest! {
        #[test]
        fn normalization_is_scale_free(s in 0.01f64..0.99, c in (1.0 - 1e-9)..(1.0 + 1e-9)) {
            let rho = (1.0 - s * s).sqrt();
            let a = ModelParams::new(1.0, 1.0, rho, s, 1.0, 1.0).unwrap();
            let b = ModelParams::new(1.0, 1.0, c * rho, c * s, 1.0, 1.0).unwrap();
            prop_assert!((a.rho() - b.rho()).abs() <= 2e-16);
            prop_assert!((a.sigma() - b.sigma()).abs() <= 2e-16);
            prop_assert!((b.rho().powi(2) + b.sigma().powi(2) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn far_from_unit_circle_is_rejected(s in 0.01f64..0.99, c in 1.00001f64..2.0) {
            let rho = (1.0 - s * s).sqrt();
            prop_assert!(ModelParams::new(1.0, 1.0, c * rho, c * s, 1.0, 1.0).is_err());
        }

        #[test]
        fn hobson_rogers_finite_implies_almost_sure(
            mu in -3.0f64..3.0, nu in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0
        ) {
            let c = classify_hobson_rogers(mu, nu, a, b).unwrap();
            if c.expected_entry == ExpectedEntry::Finite {
                prop_assert_eq!(c.entry_as, EntryProbability::AlmostSure);
            }
        }
    }
}
