//! Scenario execution: writes the requested artifacts and a manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::degenerate::degenerate_simulate;
use crate::error::{Error, Result};
use crate::export;
use crate::localtime::identity_suite;
use crate::pathgen::{simulate_path_with, SimulationOptions};
use crate::rng::SeedRecord;
use crate::scenario::{Output, Scenario, ScenarioRecord};
use crate::stationary::{build_sum_exp_density, empirical_invariant_replicates, InvariantOptions};

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Everything needed to regenerate a run. `wall_time_seconds` is the only
/// field that differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub crate_name: String,
    pub crate_version: String,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    pub scenario: ScenarioRecord,
    pub seeds: Vec<SeedRecord>,
}

fn create(dir: &Path, name: &str, written: &mut Vec<String>) -> Result<BufWriter<File>> {
    written.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Name of the bundle file for path `i`.
pub fn bundle_file_name(i: u64) -> String {
    format!("path_{i:04}.csv")
}

/// Runs a scenario into `out_dir` (created if missing). Paths with
/// `sigma = 0` go through the degenerate construction.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<Manifest> {
    s.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let p = &s.params;
    let seeds: Vec<SeedRecord> = (0..s.n_paths).map(|i| SeedRecord::new(s.base_seed, i)).collect();
    let mut written = Vec::new();
    let wants = |o| s.outputs.contains(&o);

    if wants(Output::Classification) {
        let mut w = create(out_dir, "classification.csv", &mut written)?;
        export::write_classification(&mut w, p)?;
        w.flush()?;
    }

    if wants(Output::PathBundle) || wants(Output::IdentityReport) {
        run_paths(s, out_dir, &seeds, &mut written)?;
    }

    if wants(Output::Histogram) {
        let o = InvariantOptions {
            horizon: s.horizon,
            burn_in: s.burn_in,
            dt: s.dt,
            stride: s.stride,
            bins: s.bins,
        };
        let inv = empirical_invariant_replicates(p, &o, s.base_seed, s.n_paths)?;
        let mut w = create(out_dir, "histogram.csv", &mut written)?;
        export::write_histogram(&mut w, &inv.histogram)?;
        w.flush()?;
    }

    if wants(Output::DensityGrid) {
        let d = build_sum_exp_density(p)?;
        let m = d.moments();
        let xi_max = 8.0 * (m.mean_gap + m.mean_laggard);
        let mut w = create(out_dir, "density_grid.csv", &mut written)?;
        export::write_density_grid(&mut w, &d, xi_max, 100)?;
        w.flush()?;
    }

    let manifest = Manifest {
        crate_name: env!("CARGO_PKG_NAME").to_string(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        artifacts: written,
        scenario: s.to_record(),
        seeds,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}

fn run_paths(s: &Scenario, dir: &Path, seeds: &[SeedRecord], written: &mut Vec<String>) -> Result<()> {
    let p = &s.params;
    let degenerate = p.sigma() == 0.0;
    if degenerate && s.outputs.contains(&Output::IdentityReport) {
        return Err(Error::Domain("the identity report needs sigma > 0".into()));
    }
    let mut report = if s.outputs.contains(&Output::IdentityReport) {
        let mut w = create(dir, "identity_report.csv", written)?;
        export::write_identity_header(&mut w)?;
        Some(w)
    } else {
        None
    };
    let opts = SimulationOptions {
        zero_tol: s.thresholds.zero_tol,
        ..Default::default()
    };
    for seed in seeds {
        let name = bundle_file_name(seed.index);
        if degenerate {
            let b = degenerate_simulate(p, s.horizon, s.dt, seed)?;
            if s.outputs.contains(&Output::PathBundle) {
                let mut w = create(dir, &name, written)?;
                export::write_degenerate_bundle(&mut w, &b)?;
                w.flush()?;
            }
            continue;
        }
        let b = simulate_path_with(p, s.horizon, s.dt, seed, &opts)?;
        if s.outputs.contains(&Output::PathBundle) {
            let mut w = create(dir, &name, written)?;
            export::write_path_bundle(&mut w, &b)?;
            w.flush()?;
        }
        if let Some(w) = report.as_mut() {
            let r = identity_suite(&b, s.thresholds.lt_epsilon)?;
            export::write_identity_rows(w, seed.index, &r)?;
        }
    }
    if let Some(mut w) = report {
        w.flush()?;
    }
    Ok(())
}
