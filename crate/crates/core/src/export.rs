//! Delimited-text artifacts.
//!
//! Every number is written with `{:.16e}` (17 significant digits, `.` as the
//! decimal mark regardless of locale) and every row ends in `\n`, so equal
//! inputs give byte-identical files.

use std::io::{self, Write};

use crate::degenerate::DegenerateBundle;
use crate::localtime::IdentityReport;
use crate::model::{self, ModelParams};
use crate::pathgen::PathBundle;
use crate::stationary::{Histogram2d, SumExpDensity};

/// Formats one number for an artifact.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub const BUNDLE_COLUMNS: [&str; 18] = [
    "t", "V1", "V2", "A", "Lambda", "Z", "G", "K", "M", "N", "Y", "X1", "X2", "B1", "B2", "W1", "W2", "W",
];

pub const DEGENERATE_COLUMNS: [&str; 10] = ["t", "V", "Lambda", "LY", "gap", "R1", "R2", "Y", "X1", "X2"];

fn write_rows(w: &mut impl Write, header: &[&str], t0: f64, dt: f64, cols: &[&[f64]]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    let n = cols.first().map_or(0, |c| c.len());
    let mut line = String::new();
    for k in 0..n {
        line.clear();
        line.push_str(&num(t0 + k as f64 * dt));
        for c in cols {
            line.push(',');
            line.push_str(&num(c[k]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// One row per grid point, columns as in [`BUNDLE_COLUMNS`].
pub fn write_path_bundle(w: &mut impl Write, b: &PathBundle) -> io::Result<()> {
    let br = &b.brownian;
    let cols: [&[f64]; 17] = [
        br.v1.values(),
        br.v2.values(),
        b.regulators.a.values(),
        b.regulators.lambda.values(),
        b.z.values(),
        b.g.values(),
        b.k.values(),
        b.m.values(),
        b.n.values(),
        b.y.values(),
        b.x1.values(),
        b.x2.values(),
        b.b1.values(),
        b.b2.values(),
        b.w1.values(),
        b.w2.values(),
        b.w.values(),
    ];
    write_rows(w, &BUNDLE_COLUMNS, b.g.t0(), b.dt(), &cols)
}

/// One row per grid point, columns as in [`DEGENERATE_COLUMNS`].
pub fn write_degenerate_bundle(w: &mut impl Write, b: &DegenerateBundle) -> io::Result<()> {
    let cols: [&[f64]; 9] = [
        b.v.values(),
        b.lambda.values(),
        b.ly.values(),
        b.gap.values(),
        b.r1.values(),
        b.r2.values(),
        b.y.values(),
        b.x1.values(),
        b.x2.values(),
    ];
    write_rows(w, &DEGENERATE_COLUMNS, b.v.t0(), b.v.dt(), &cols)
}

/// Columns `gap_lo,gap_hi,laggard_lo,laggard_hi,count`; the overflow count
/// goes in a final row with `inf` edges.
pub fn write_histogram(w: &mut impl Write, h: &Histogram2d) -> io::Result<()> {
    writeln!(w, "gap_lo,gap_hi,laggard_lo,laggard_hi,count")?;
    let nl = h.laggard_edges.len() - 1;
    for i in 0..h.gap_edges.len() - 1 {
        for j in 0..nl {
            writeln!(
                w,
                "{},{},{},{},{}",
                num(h.gap_edges[i]),
                num(h.gap_edges[i + 1]),
                num(h.laggard_edges[j]),
                num(h.laggard_edges[j + 1]),
                h.counts[i * nl + j]
            )?;
        }
    }
    writeln!(w, "inf,inf,inf,inf,{}", h.overflow)
}

/// Columns `xi1,xi2,p` on an `n` by `n` grid over `(0, xi_max]^2`; points
/// off the domain have `p = 0`.
pub fn write_density_grid(w: &mut impl Write, d: &SumExpDensity, xi_max: f64, n: usize) -> io::Result<()> {
    writeln!(w, "xi1,xi2,p")?;
    for i in 1..=n {
        let a = xi_max * i as f64 / n as f64;
        for j in 1..=n {
            let b = xi_max * j as f64 / n as f64;
            writeln!(w, "{},{},{}", num(a), num(b), num(d.density(a, b)))?;
        }
    }
    Ok(())
}

/// Columns `path,name,estimate,reference,residual,tolerance,pass`.
pub fn write_identity_header(w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "path,name,estimate,reference,residual,tolerance,pass")
}

pub fn write_identity_rows(w: &mut impl Write, path: u64, r: &IdentityReport) -> io::Result<()> {
    for e in &r.entries {
        writeln!(
            w,
            "{path},{},{},{},{},{},{}",
            e.name,
            num(e.estimate),
            num(e.reference),
            num(e.residual),
            num(e.tolerance),
            e.pass
        )?;
    }
    Ok(())
}

/// `key,value` lines describing geometry and classification. Entries that
/// are undefined for the parameters are written as `n/a`.
pub fn classification_rows(p: &ModelParams) -> Vec<(String, String)> {
    let mut rows = vec![
        ("g".to_string(), num(p.g())),
        ("h".to_string(), num(p.h())),
        ("rho".to_string(), num(p.rho())),
        ("sigma".to_string(), num(p.sigma())),
    ];
    let na = || "n/a".to_string();
    match model::wedge_geometry(p) {
        Ok(geo) => {
            rows.push(("xi_angle".into(), num(geo.xi_angle)));
            rows.push(("theta1".into(), num(geo.theta1)));
            rows.push(("theta2".into(), num(geo.theta2)));
            rows.push(("alpha".into(), num(geo.alpha)));
        }
        Err(_) => {
            for k in ["xi_angle", "theta1", "theta2", "alpha"] {
                rows.push((k.into(), na()));
            }
        }
    }
    if p.sigma() == 0.0 {
        let corner = crate::degenerate::classify_corner(p).map(|c| format!("{c:?}"));
        rows.push(("corner".into(), corner.unwrap_or_else(|_| na())));
        let prob = crate::degenerate::degenerate_corner_prob(p).map(num);
        rows.push(("corner_probability".into(), prob.unwrap_or_else(|_| na())));
    } else {
        let corner = model::classify_corner(p).map(|c| format!("{c:?}"));
        rows.push(("corner".into(), corner.unwrap_or_else(|_| na())));
    }
    let rec = model::classify_recurrence(p).map(|r| format!("{r:?}"));
    rows.push(("recurrence".into(), rec.unwrap_or_else(|_| na())));
    rows
}

pub fn write_classification(w: &mut impl Write, p: &ModelParams) -> io::Result<()> {
    writeln!(w, "key,value")?;
    for (k, v) in classification_rows(p) {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgen::simulate_path;
    use crate::rng::SeedRecord;

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::NAN), "NaN");
        let x = 0.1f64 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn bundle_csv_shape() {
        let p = ModelParams::with_sigma_sq(0.5, 1.0, 0.5, 1.0, 0.5).unwrap();
        let b = simulate_path(&p, 0.01, 1e-3, &SeedRecord::new(1, 0)).unwrap();
        let mut out = Vec::new();
        write_path_bundle(&mut out, &b).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], BUNDLE_COLUMNS.join(","));
        assert!(lines[1..].iter().all(|l| l.split(',').count() == BUNDLE_COLUMNS.len()));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn classification_rows_cover_degenerate_and_regular() {
        let p = ModelParams::with_sigma_sq(0.5, 1.0, 0.5, 1.0, 0.5).unwrap();
        let rows = classification_rows(&p);
        assert!(rows.contains(&("corner".to_string(), "Never".to_string())));
        assert!(rows.contains(&("recurrence".to_string(), "PositiveRecurrent".to_string())));
        let q = ModelParams::with_sigma(1.0, 0.5, 0.0, 1.0, 0.0).unwrap();
        let rows = classification_rows(&q);
        assert!(rows.contains(&("alpha".to_string(), "n/a".to_string())));
        assert!(rows
            .iter()
            .any(|(k, v)| k == "corner_probability" && v.starts_with("3.678")));
    }
}
