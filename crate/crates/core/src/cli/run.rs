//! `run` and `section`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::config::PipelineConfig;
use crate::convex::unit;
use crate::smoothing::{approximate_norm, build_smoothed, ApproximationReport};
use crate::{RenormError, Result};

/// What a `run` produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub report: ApproximationReport,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Versions {
    renorm: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a PipelineConfig,
    versions: Versions,
    seed: u64,
    files: Vec<&'static str>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Executes the pipeline and writes `report.json`, `manifest.json` and, for
/// small nets, `slabs.json` into the output directory.
pub fn run(config_path: &Path, out: Option<&Path>) -> Result<RunOutcome> {
    let config = PipelineConfig::load(config_path)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| RenormError::Config("no output directory given (--out or output_dir)".into()))?;
    let target = config.target_body()?;
    let base = config.base_norm.build(config.dimension)?;
    let approx = approximate_norm(&target, base, config.epsilon, config.lambda1, &config.options())?;
    fs::create_dir_all(&out_dir)?;
    write_json(&out_dir.join("report.json"), &approx.report)?;
    let mut files = vec!["report.json", "manifest.json"];
    let sn = &approx.smoothed;
    if sn.net().len() <= config.size_caps.slab_json {
        write_json(&out_dir.join("slabs.json"), &sn.cover().to_json(sn.net(), config.size_caps.slab_json)?)?;
        files.push("slabs.json");
    }
    let manifest = Manifest {
        config: &config,
        versions: Versions {
            renorm: env!("CARGO_PKG_VERSION"),
        },
        seed: config.seed,
        files,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    let r = &approx.report;
    let c = &r.certificates;
    println!(
        "slabs {}  net points {}  sup relative error {} (bound {})",
        r.num_slabs, c.net.points, r.sup_rel_error, c.error.bound
    );
    for (name, ok) in [
        ("error", c.error.passed),
        ("sandwich", c.sandwich.passed()),
        ("cover", c.cover.passed()),
        ("inclusions", c.inclusions.passed),
        ("convexity", c.convexity.passed),
        ("smoothness", c.smoothness.passed),
    ] {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(RunOutcome {
        passed: c.passed,
        report: approx.report,
        out_dir,
    })
}

fn parse_axes(axes: &str, d: usize) -> Result<(usize, usize)> {
    let bad = || RenormError::Config(format!("axes must be two distinct indices below {d}, got {axes:?}"));
    let (i, j) = axes.split_once(',').ok_or_else(bad)?;
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let j: usize = j.trim().parse().map_err(|_| bad())?;
    if i == j || i >= d || j >= d {
        return Err(bad());
    }
    Ok((i, j))
}

/// Writes `theta,target_gauge,smooth_gauge,ratio` for `samples` equally
/// spaced angles in the plane of the two axes.
pub fn section(config_path: &Path, axes: &str, samples: usize, out: &Path) -> Result<()> {
    let config = PipelineConfig::load(config_path)?;
    let (i, j) = parse_axes(axes, config.dimension)?;
    if samples < 8 {
        return Err(RenormError::Config(format!("section needs at least 8 samples, got {samples}")));
    }
    let target = config.target_body()?;
    let base = config.base_norm.build(config.dimension)?;
    let built = build_smoothed(&target, base, config.epsilon, config.lambda1, &config.options())?;
    let d = config.dimension;
    let mut csv = String::from("theta,target_gauge,smooth_gauge,ratio\n");
    for k in 0..samples {
        let theta = std::f64::consts::TAU * k as f64 / samples as f64;
        let x = unit(d, i) * theta.cos() + unit(d, j) * theta.sin();
        let t = target.minkowski_gauge(&x)?;
        let s = built.smoothed.gauge(&x)?;
        writeln!(csv, "{theta},{t},{s},{}", s / t).expect("writing to a String");
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, csv)?;
    Ok(())
}
