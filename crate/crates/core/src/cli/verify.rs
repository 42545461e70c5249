//! `verify`: named invariant suites with per-property pass/fail lines.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::cli::config::PipelineConfig;
use crate::convex::{gaussian_unit, BiorthogonalSystem, Subspace};
use crate::nets::{certify_sandwich, slab_decompose, verify_cover, NetConfig, PolarNet};
use crate::projection::{grid_projection, project, restricted_hessian, ProjectionProblem};
use crate::sampling::sample_map;
use crate::smooth::{Norm, NormSpec, PerturbedNorm};
use crate::smoothing::pipeline::{
    certify_convexity, certify_error, certify_inclusions, certify_smoothness,
};
use crate::smoothing::build_smoothed;
use crate::{RenormError, Result};

const STREAM_PROJECTION: u64 = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Convexity,
    Smoothness,
    Inclusions,
    Projection,
    Nets,
    All,
}

impl FromStr for Suite {
    type Err = RenormError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convexity" => Suite::Convexity,
            "smoothness" => Suite::Smoothness,
            "inclusions" => Suite::Inclusions,
            "projection" => Suite::Projection,
            "nets" => Suite::Nets,
            "all" => Suite::All,
            other => {
                return Err(RenormError::Config(format!(
                    "unknown suite {other:?}; expected convexity, smoothness, inclusions, projection, nets or all"
                )))
            }
        })
    }
}

/// Agreement of Newton projection with a grid-search oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionSuiteReport {
    pub problems: usize,
    pub max_coord_error: f64,
    pub disagreements: usize,
    pub min_hessian_eigenvalue: f64,
    pub passed: bool,
}

/// Oracle grid step and accepted coordinate disagreement.
pub const GRID_STEP: f64 = 1e-3;
pub const GRID_AGREEMENT: f64 = 2e-3;

/// Random closest-point problems with `d <= 3` and `dim E <= 2`, alternating
/// the base norm and its perturbation.
pub fn projection_suite(base: &NormSpec, d: usize, epsilon: f64, problems: usize, seed: u64) -> Result<ProjectionSuiteReport> {
    let (d, base) = if d <= 3 {
        (d, base.build(d)?)
    } else {
        (3, NormSpec::Euclidean.build(3)?)
    };
    let perturbed: Arc<dyn Norm> = Arc::new(PerturbedNorm::new(base.clone(), BiorthogonalSystem::standard(d), epsilon)?);
    let max_m = (d - 1).min(2);
    let out = sample_map(seed, STREAM_PROJECTION, problems, |rng, i| -> Result<(f64, f64)> {
        let m = 1 + i % max_m;
        let span = (0..m).map(|_| gaussian_unit(d, rng)).collect();
        let subspace = Subspace::from_vectors(d, span)?;
        let x = gaussian_unit(d, rng) * (0.5 + 1.5 * rng.random::<f64>());
        let norm = if i % 2 == 0 { base.clone() } else { perturbed.clone() };
        let p = project(&ProjectionProblem::new(norm.clone(), subspace.clone(), x.clone()))?;
        let g = grid_projection(norm.as_ref(), &subspace, &x, GRID_STEP)?;
        let h = restricted_hessian(norm.as_ref(), &subspace, &x, &p.point)?;
        Ok(((g - &p.coords).amax(), h.min_eigenvalue))
    });
    let out: Vec<(f64, f64)> = out.into_iter().collect::<Result<_>>()?;
    let disagreements = out.iter().filter(|o| !(o.0 <= GRID_AGREEMENT)).count();
    let min_eig = out.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    Ok(ProjectionSuiteReport {
        problems,
        max_coord_error: out.iter().map(|o| o.0).fold(0.0, f64::max),
        disagreements,
        min_hessian_eigenvalue: min_eig,
        passed: disagreements == 0 && min_eig > 0.0,
    })
}

fn line(ok: bool, name: &str, witness: String) -> bool {
    println!("{} {name:<24} {witness}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Runs a suite on the configuration; `Ok(false)` when a property fails.
pub fn verify(config_path: &Path, suite: &str) -> Result<bool> {
    let suite: Suite = suite.parse()?;
    let config = PipelineConfig::load(config_path)?;
    let want = |s: Suite| suite == s || suite == Suite::All;
    let seed = config.seed;
    let samples = config.samples;
    let mut ok = true;

    if want(Suite::Projection) {
        let r = projection_suite(&config.base_norm, config.dimension, config.epsilon, 100, seed)?;
        ok &= line(
            r.disagreements == 0,
            "projection.oracle",
            format!("max coordinate error {} over {} problems", r.max_coord_error, r.problems),
        );
        ok &= line(
            r.min_hessian_eigenvalue > 0.0,
            "projection.hessian",
            format!("min eigenvalue {}", r.min_hessian_eigenvalue),
        );
    }
    let target = config.target_body()?;
    let options = config.options();
    if want(Suite::Nets) {
        let mut net_config = NetConfig::new(target.clone(), BiorthogonalSystem::standard(config.dimension), config.epsilon)?;
        net_config.dual_norm = options.dual_norm;
        net_config.size_cap = options.size_cap;
        let mut net = PolarNet::build(&net_config)?;
        if options.sabotage_zero_net {
            net.sabotage_zero();
        }
        let s = certify_sandwich(&net, samples.sphere.max(1000), 200, seed)?;
        ok &= line(s.lower_ok, "nets.sandwich.lower", format!("min ratio {}", s.min_ratio));
        ok &= line(s.upper_ok, "nets.sandwich.upper", format!("max ratio {}", s.max_ratio));
        ok &= line(s.net_inequality_ok, "nets.distance", format!("ratio {}", s.net_distance_ratio));
        let cover = slab_decompose(&net, config.epsilon);
        let c = verify_cover(&net, &cover);
        ok &= line(c.exact_partition, "nets.cover.partition", format!("{} of {} points", c.covered, c.points));
        ok &= line(c.diameter_ok, "nets.cover.diameter", format!("max diameter {}", c.max_diameter));
        ok &= line(c.agreement_ok, "nets.cover.agreement", String::new());
    }
    if !(want(Suite::Convexity) || want(Suite::Smoothness) || want(Suite::Inclusions)) {
        return Ok(ok);
    }
    let base = config.base_norm.build(config.dimension)?;
    let built = build_smoothed(&target, base, config.epsilon, config.lambda1, &options)?;
    let sn = &built.smoothed;
    if want(Suite::Inclusions) {
        let s = &built.sandwich;
        ok &= line(s.lower_ok, "inclusions.net.lower", format!("min ratio {}", s.min_ratio));
        ok &= line(s.upper_ok, "inclusions.net.upper", format!("max ratio {}", s.max_ratio));
        let r = certify_inclusions(sn, samples.inclusions, seed)?;
        ok &= line(
            r.gauge_sandwich_failures == 0,
            "inclusions.gauge",
            format!("mu/F_Q in [{}, {}]", r.min_lower_ratio, r.max_upper_ratio / config.lambda1),
        );
        ok &= line(r.zero_zone_failures == 0, "inclusions.zero_zone", format!("max G {}", r.max_zero_zone_value));
        ok &= line(
            r.level_three_failures == 0,
            "inclusions.level_three",
            format!("min G {}", r.min_level_three_value),
        );
        let e = certify_error(sn, &target, samples.sphere)?;
        ok &= line(e.passed, "inclusions.uniform_error", format!("sup {} bound {}", e.sup_rel_error, e.bound));
    }
    if want(Suite::Convexity) {
        let r = certify_convexity(sn, samples.convexity, seed)?;
        ok &= line(r.g_failures == 0, "convexity.G", format!("worst {}", r.g_worst_violation));
        ok &= line(r.mu_failures == 0, "convexity.gauge", format!("worst {}", r.mu_worst_violation));
        ok &= line(
            r.homogeneity_worst <= crate::smoothing::pipeline::CONVEXITY_TOL,
            "convexity.homogeneity",
            format!("worst {}", r.homogeneity_worst),
        );
    }
    if want(Suite::Smoothness) {
        let r = certify_smoothness(sn, samples.fd, samples.paths, samples.path_points, seed)?;
        ok &= line(r.fd_failures == 0, "smoothness.gradient", format!("max rel error {}", r.fd_max_rel_error));
        ok &= line(
            r.jump_failures == 0,
            "smoothness.paths",
            format!("max jump/step {} ({} kink crossings)", r.max_jump_ratio, r.kink_crossings),
        );
    }
    Ok(ok)
}
