//! End-to-end approximation of a polytope norm by the gauge of `G`, with the
//! certificates of every stage.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{direction_grid, gaussian_unit, BiorthogonalSystem, ConvexBody};
use crate::nets::{
    certify_sandwich, slab_decompose, verify_cover, CoverCheck, DualNorm, NetConfig, NetSummary,
    PolarNet, SandwichReport,
};
use crate::sampling::sample_map;
use crate::smooth::{Norm, PerturbedNorm};
use crate::smoothing::assemble::{PriorityOptions, PriorityReport, SmoothedNorm};
use crate::smoothing::facets::FacetSetup;
use crate::smoothing::plane::PlaneNorm;
use crate::smoothing::schedule::Schedule;
use crate::{RenormError, Result, Vector};

const STREAM_INCLUSIONS: u64 = 1;
const STREAM_CONVEXITY: u64 = 2;
const STREAM_FD: u64 = 3;
const STREAM_PATHS: u64 = 4;
const STREAM_NET: u64 = 5;

/// Relative tolerance of the midpoint-convexity tests.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Largest accepted relative error of the analytic gauge gradient.
pub const FD_TOL: f64 = 1e-5;
/// Largest accepted ratio of FD-gradient jump to path step.
pub const JUMP_RATIO: f64 = 10.0;

/// Sample counts of the certificates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    /// Midpoint pairs for the convexity tests.
    pub convexity: usize,
    /// Directions for the sup error and the net sandwich sweep.
    pub sphere: usize,
    /// Points for the gradient check.
    pub fd: usize,
    /// Samples for each inclusion test.
    pub inclusions: usize,
    /// Great-circle paths and points per path.
    pub paths: usize,
    pub path_points: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            convexity: 2000,
            sphere: 2000,
            fd: 200,
            inclusions: 1000,
            paths: 10,
            path_points: 128,
        }
    }
}

impl SampleCounts {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.convexity,
            self.sphere,
            self.fd,
            self.inclusions,
            self.paths,
            self.path_points,
        ];
        if all.iter().any(|c| *c == 0) {
            return Err(RenormError::Config("sample counts must be positive".into()));
        }
        if self.path_points < 8 {
            return Err(RenormError::Config("paths need at least 8 points".into()));
        }
        Ok(())
    }
}

/// Everything besides the target, base norm, `eps` and `lambda_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    /// First plane-norm weight; defaults to `eps`.
    pub a1: Option<f64>,
    /// Coefficient of the smoothing perturbation of the base norm; defaults to `eps`.
    pub perturbation: Option<f64>,
    pub dual_norm: DualNorm,
    pub size_cap: u64,
    pub plane_width: f64,
    pub priority: PriorityOptions,
    pub samples: SampleCounts,
    pub seed: u64,
    /// Replace the net by `{0}`; the lower sandwich must then fail.
    pub sabotage_zero_net: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            a1: None,
            perturbation: None,
            dual_norm: DualNorm::Euclidean,
            size_cap: 1_000_000,
            plane_width: 1.0,
            priority: PriorityOptions::default(),
            samples: SampleCounts::default(),
            seed: 0,
            sabotage_zero_net: false,
        }
    }
}

/// Sup of `|mu_G / mu_W - 1|` over a direction grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCertificate {
    pub samples: usize,
    pub sup_rel_error: f64,
    pub worst_direction: Vec<f64>,
    /// `4 eps + (1 - lambda_1) + 0.02`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub samples: usize,
    /// Failures of `F_Q <= mu_G <= F_Q / lambda_1`.
    pub gauge_sandwich_failures: usize,
    pub min_lower_ratio: f64,
    pub max_upper_ratio: f64,
    pub zero_zone_failures: usize,
    pub max_zero_zone_value: f64,
    pub level_three_failures: usize,
    pub min_level_three_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub pairs: usize,
    pub g_failures: usize,
    pub g_worst_violation: f64,
    /// Pairs with an infinite value of `G` at an endpoint.
    pub g_infinite: usize,
    pub mu_failures: usize,
    pub mu_worst_violation: f64,
    pub homogeneity_worst: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub fd_points: usize,
    pub fd_max_rel_error: f64,
    pub fd_failures: usize,
    pub paths: usize,
    pub path_points: usize,
    pub max_jump_ratio: f64,
    pub jump_failures: usize,
    /// Path steps crossing the hyperplane where the last coordinate changes
    /// sign, which contains the kinks of the bare quotient seminorms.
    pub kink_crossings: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FacetReport {
    pub checked: usize,
    pub max_lipschitz: f64,
    pub lipschitz_at_most_two: bool,
    pub max_polar_slice_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificates {
    pub passed: bool,
    pub error: ErrorCertificate,
    pub sandwich: SandwichReport,
    pub cover: CoverCheck,
    pub net: NetSummary,
    pub priority: PriorityReport,
    pub inclusions: InclusionReport,
    pub convexity: ConvexityReport,
    pub smoothness: SmoothnessReport,
    pub facets: FacetReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproximationReport {
    pub sup_rel_error: f64,
    pub epsilon: f64,
    pub lambda1: f64,
    pub num_slabs: u64,
    pub certificates: Certificates,
}

/// The smoothed norm with the certificates of its net and cover.
pub struct Built {
    pub smoothed: SmoothedNorm,
    pub sandwich: SandwichReport,
    pub cover: CoverCheck,
}

pub struct Approximation {
    pub smoothed: SmoothedNorm,
    pub report: ApproximationReport,
}

fn check_parameters(target: &ConvexBody, base: &dyn Norm, epsilon: f64, lambda1: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.125) {
        return Err(RenormError::invalid(format!("epsilon must lie in (0, 1/8), got {epsilon}")));
    }
    if !(lambda1 > 1.0 / 3.0 && lambda1 < 1.0) {
        return Err(RenormError::invalid(format!("lambda1 must lie in (1/3, 1), got {lambda1}")));
    }
    if target.dim() != base.dim() {
        return Err(RenormError::DimensionMismatch {
            expected: target.dim(),
            got: base.dim(),
        });
    }
    if target.dim() < 2 {
        return Err(RenormError::invalid("dimension must be at least 2"));
    }
    Ok(())
}

/// Net, cover and `G` with the net and cover certificates.
pub fn build_smoothed(
    target: &ConvexBody,
    base: Arc<dyn Norm>,
    epsilon: f64,
    lambda1: f64,
    options: &PipelineOptions,
) -> Result<Built> {
    check_parameters(target, base.as_ref(), epsilon, lambda1)?;
    options.samples.validate()?;
    let d = target.dim();
    let system = BiorthogonalSystem::standard(d);
    let schedule = Schedule::new(lambda1)?;
    let perturbed = PerturbedNorm::new(base, system.clone(), options.perturbation.unwrap_or(epsilon))?;
    let plane = PlaneNorm::new(options.plane_width)?;
    let setup = FacetSetup::new(Arc::new(perturbed), plane, epsilon, options.a1.unwrap_or(epsilon))?;

    let mut config = NetConfig::new(target.clone(), system, epsilon)?;
    config.dual_norm = options.dual_norm;
    config.size_cap = options.size_cap;
    let mut net = PolarNet::build(&config)?;
    if options.sabotage_zero_net {
        net.sabotage_zero();
    }
    let sandwich = certify_sandwich(&net, options.samples.sphere.max(1000), 200, options.seed ^ STREAM_NET)?;
    let cover = slab_decompose(&net, epsilon);
    let cover_check = verify_cover(&net, &cover);
    let smoothed = SmoothedNorm::new(net, cover, setup, schedule, options.priority)?;
    Ok(Built {
        smoothed,
        sandwich,
        cover: cover_check,
    })
}

/// Builds the smoothed norm and runs every certificate.
pub fn approximate_norm(
    target: &ConvexBody,
    base: Arc<dyn Norm>,
    epsilon: f64,
    lambda1: f64,
    options: &PipelineOptions,
) -> Result<Approximation> {
    let built = build_smoothed(target, base, epsilon, lambda1, options)?;
    let sn = &built.smoothed;
    let s = options.samples;
    let error = certify_error(sn, target, s.sphere)?;
    let inclusions = certify_inclusions(sn, s.inclusions, options.seed)?;
    let convexity = certify_convexity(sn, s.convexity, options.seed)?;
    let smoothness = certify_smoothness(sn, s.fd, s.paths, s.path_points, options.seed)?;
    let facets = facet_report(sn)?;
    let passed = error.passed
        && built.sandwich.passed()
        && built.cover.passed()
        && inclusions.passed
        && convexity.passed
        && smoothness.passed;
    let report = ApproximationReport {
        sup_rel_error: error.sup_rel_error,
        epsilon,
        lambda1,
        num_slabs: sn.num_slabs(),
        certificates: Certificates {
            passed,
            error,
            sandwich: built.sandwich,
            cover: built.cover,
            net: sn.net().summary(),
            priority: sn.priority().clone(),
            inclusions,
            convexity,
            smoothness,
            facets,
        },
    };
    Ok(Approximation {
        smoothed: built.smoothed,
        report,
    })
}

/// Sup relative error against the target gauge over a direction grid.
pub fn certify_error(sn: &SmoothedNorm, target: &ConvexBody, samples: usize) -> Result<ErrorCertificate> {
    let eps = sn.setup().epsilon();
    let bound = 4.0 * eps + (1.0 - sn.schedule().lambda1()) + 0.02;
    let dirs = direction_grid(sn.dim(), samples);
    let errs: Vec<f64> = dirs
        .par_iter()
        .map(|u| Ok((sn.gauge(u)? / target.minkowski_gauge(u)? - 1.0).abs()))
        .collect::<Result<_>>()?;
    let (mut worst, mut at) = (0.0, 0);
    for (i, e) in errs.iter().enumerate() {
        if !(*e <= worst) {
            worst = *e;
            at = i;
        }
    }
    Ok(ErrorCertificate {
        samples: dirs.len(),
        sup_rel_error: worst,
        worst_direction: dirs[at].iter().copied().collect(),
        bound,
        passed: worst <= bound,
    })
}

struct InclusionSample {
    lower: f64,
    upper: f64,
    zero: f64,
    level: f64,
}

/// Gauge sandwich, zero zone and level three on random directions.
///
/// The zero zone is sampled at `y = u lambda_1 x / F_Q(x)` with `u in (0, 1]`;
/// the level-three point is `x / F_Q(x)` nudged outward until `F_Q >= 1`.
pub fn certify_inclusions(sn: &SmoothedNorm, samples: usize, seed: u64) -> Result<InclusionReport> {
    let d = sn.dim();
    let lambda1 = sn.schedule().lambda1();
    let out = sample_map(seed, STREAM_INCLUSIONS, samples, |rng, _| -> Result<InclusionSample> {
        let x = gaussian_unit(d, rng);
        let u = 1.0 - rng.random::<f64>();
        let e = sn.gauge_detail(&x)?;
        let y = &x * (u * lambda1 / e.f_q);
        let zero = if sn.f_q(&y)? <= lambda1 { sn.g_value(&y)? } else { 0.0 };
        let mut t = 1.0 / e.f_q;
        for _ in 0..64 {
            if sn.f_q(&(&x * t))? >= 1.0 {
                break;
            }
            t *= 1.0 + 2.0 * f64::EPSILON;
        }
        Ok(InclusionSample {
            lower: e.mu / e.f_q,
            upper: e.mu * lambda1 / e.f_q,
            zero,
            level: sn.g_value(&(&x * t))?,
        })
    });
    let out: Vec<InclusionSample> = out.into_iter().collect::<Result<_>>()?;
    let tol = 1e-12;
    let sandwich_fail = out
        .iter()
        .filter(|s| s.lower < 1.0 - tol || s.upper > 1.0 + tol)
        .count();
    let zero_fail = out.iter().filter(|s| s.zero != 0.0).count();
    let level_fail = out.iter().filter(|s| !(s.level >= 3.0 - 1e-9)).count();
    Ok(InclusionReport {
        samples,
        gauge_sandwich_failures: sandwich_fail,
        min_lower_ratio: out.iter().map(|s| s.lower).fold(f64::INFINITY, f64::min),
        max_upper_ratio: out.iter().map(|s| s.upper).fold(0.0, f64::max),
        zero_zone_failures: zero_fail,
        max_zero_zone_value: out.iter().map(|s| s.zero).fold(0.0, f64::max),
        level_three_failures: level_fail,
        min_level_three_value: out.iter().map(|s| s.level).fold(f64::INFINITY, f64::min),
        passed: sandwich_fail == 0 && zero_fail == 0 && level_fail == 0,
    })
}

fn in_ball<R: Rng>(d: usize, radius: f64, rng: &mut R) -> Vector {
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    gaussian_unit(d, rng) * r
}

/// Midpoint convexity of `G` and `mu_G` on pairs from the Euclidean ball of
/// radius 2, with homogeneity of `mu_G`.
pub fn certify_convexity(sn: &SmoothedNorm, pairs: usize, seed: u64) -> Result<ConvexityReport> {
    let d = sn.dim();
    let lambda1 = sn.schedule().lambda1();
    let out = sample_map(seed, STREAM_CONVEXITY, pairs, |rng, _| -> Result<[f64; 3]> {
        let a = in_ball(d, 2.0, rng);
        let b = in_ball(d, 2.0, rng);
        let t = 0.5 + 1.5 * rng.random::<f64>();
        let m = (&a + &b) * 0.5;
        // G is tested on the shell where it is finite and not identically zero.
        let mut shell = || -> Result<Vector> {
            let u = gaussian_unit(d, rng);
            let r = lambda1 * 0.95 + (1.02 - lambda1 * 0.95) * rng.random::<f64>();
            Ok(&u * (r / sn.f_q(&u)?))
        };
        let (sa, sb) = (shell()?, shell()?);
        let sm = (&sa + &sb) * 0.5;
        let (ga, gb, gm) = (sn.g_value(&sa)?, sn.g_value(&sb)?, sn.g_value(&sm)?);
        let g_avg = 0.5 * (ga + gb);
        // Deep bumps overflow far outside the unit ball; the inequality is
        // read in the extended reals.
        let g_viol = if g_avg == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            (gm - g_avg) / g_avg.abs().max(1.0)
        };
        let (ma, mb, mm) = (sn.gauge(&a)?, sn.gauge(&b)?, sn.gauge(&m)?);
        let mu_avg = 0.5 * (ma + mb);
        let mu_viol = (mm - mu_avg) / mu_avg.max(1.0);
        let hom = (sn.gauge(&(&a * t))? - t * ma).abs() / (t * ma).max(f64::MIN_POSITIVE);
        Ok([g_viol, mu_viol, hom])
    });
    let out: Vec<[f64; 3]> = out.into_iter().collect::<Result<_>>()?;
    let g_fail = out.iter().filter(|v| !(v[0] <= CONVEXITY_TOL)).count();
    let mu_fail = out.iter().filter(|v| !(v[1] <= CONVEXITY_TOL)).count();
    let hom_worst = out.iter().map(|v| v[2]).fold(0.0, f64::max);
    Ok(ConvexityReport {
        pairs,
        g_failures: g_fail,
        g_worst_violation: out.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max),
        g_infinite: out.iter().filter(|v| v[0] == f64::NEG_INFINITY).count(),
        mu_failures: mu_fail,
        mu_worst_violation: out.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max),
        homogeneity_worst: hom_worst,
        passed: g_fail == 0 && mu_fail == 0 && hom_worst <= CONVEXITY_TOL,
    })
}

/// Central-difference gradient of `mu_G` with step `h`.
pub fn fd_gauge_gradient(sn: &SmoothedNorm, x: &Vector, h: f64) -> Result<Vector> {
    let mut g = Vector::zeros(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        g[i] = (sn.gauge(&xp)? - sn.gauge(&xm)?) / (2.0 * h);
    }
    Ok(g)
}

/// Orthonormal pair spanning a random plane.
fn random_plane<R: Rng>(d: usize, rng: &mut R) -> (Vector, Vector) {
    let u = gaussian_unit(d, rng);
    loop {
        let w = gaussian_unit(d, rng);
        let v = &w - &u * u.dot(&w);
        if v.norm() > 1e-3 {
            let n = v.norm();
            return (u, v / n);
        }
    }
}

/// Analytic gradient against central differences at `|x| in [0.5, 2]`, and
/// jumps of the FD gradient along great circles of the Euclidean sphere.
pub fn certify_smoothness(
    sn: &SmoothedNorm,
    fd_points: usize,
    paths: usize,
    path_points: usize,
    seed: u64,
) -> Result<SmoothnessReport> {
    let d = sn.dim();
    let fd = sample_map(seed, STREAM_FD, fd_points, |rng, _| -> Result<f64> {
        let x = gaussian_unit(d, rng) * (0.5 + 1.5 * rng.random::<f64>());
        let g = sn.gauge_gradient(&x)?;
        let num = fd_gauge_gradient(sn, &x, 1e-5 * x.norm())?;
        Ok((num - &g).norm() / g.norm())
    });
    let fd: Vec<f64> = fd.into_iter().collect::<Result<_>>()?;
    let last = d - 1;
    let system = sn.net().system().clone();
    let path = sample_map(seed, STREAM_PATHS, paths, |rng, _| -> Result<(f64, usize, usize)> {
        let (u, v) = random_plane(d, rng);
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let points: Vec<Vector> = (0..path_points)
            .map(|i| {
                let t = phase + std::f64::consts::TAU * i as f64 / path_points as f64;
                &u * t.cos() + &v * t.sin()
            })
            .collect();
        let grads: Vec<Vector> = points
            .iter()
            .map(|x| fd_gauge_gradient(sn, x, 1e-5))
            .collect::<Result<_>>()?;
        let (mut worst, mut fails, mut crossings) = (0.0f64, 0, 0);
        for i in 0..path_points {
            let j = (i + 1) % path_points;
            let ratio = (&grads[j] - &grads[i]).norm() / (&points[j] - &points[i]).norm();
            worst = worst.max(ratio);
            if !(ratio <= JUMP_RATIO) {
                fails += 1;
            }
            let (ci, cj) = (system.coordinate(last, &points[i]), system.coordinate(last, &points[j]));
            if ci * cj <= 0.0 {
                crossings += 1;
            }
        }
        Ok((worst, fails, crossings))
    });
    let path: Vec<(f64, usize, usize)> = path.into_iter().collect::<Result<_>>()?;
    let fd_fail = fd.iter().filter(|e| !(**e <= FD_TOL)).count();
    let jump_fail: usize = path.iter().map(|p| p.1).sum();
    Ok(SmoothnessReport {
        fd_points,
        fd_max_rel_error: fd.iter().copied().fold(0.0, f64::max),
        fd_failures: fd_fail,
        paths,
        path_points,
        max_jump_ratio: path.iter().map(|p| p.0).fold(0.0, f64::max),
        jump_failures: jump_fail,
        kink_crossings: path.iter().map(|p| p.2).sum(),
        passed: fd_fail == 0 && jump_fail == 0,
    })
}

/// Lipschitz estimates of the priority facets and the first slabs, and the
/// polar-slice distance of their plane norms.
pub fn facet_report(sn: &SmoothedNorm) -> Result<FacetReport> {
    let d = sn.dim();
    let dirs = if d == 2 { 360 } else { 500 };
    let mut slabs: Vec<u64> = sn.priority().slabs.clone();
    slabs.extend(0..sn.num_slabs().min(4));
    slabs.sort_unstable();
    slabs.dedup();
    let mut max_lip: f64 = 0.0;
    let mut max_dist: Option<f64> = None;
    for c in &slabs {
        let f = sn.facet(*c)?;
        max_lip = max_lip.max(f.lipschitz_estimate(dirs)?);
        if d <= 4 {
            let dist = sn.setup().polar_slice_distance(f.n, f.a, dirs)?;
            max_dist = Some(max_dist.map_or(dist, |m: f64| m.max(dist)));
        }
    }
    Ok(FacetReport {
        checked: slabs.len(),
        max_lipschitz: max_lip,
        lipschitz_at_most_two: max_lip <= 2.0,
        max_polar_slice_distance: max_dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::BaseNorm;

    fn small() -> PipelineOptions {
        PipelineOptions {
            samples: SampleCounts {
                convexity: 100,
                sphere: 200,
                fd: 20,
                inclusions: 100,
                paths: 2,
                path_points: 64,
            },
            ..PipelineOptions::default()
        }
    }

    #[test]
    fn square_runs_end_to_end() {
        let base: Arc<dyn Norm> = Arc::new(BaseNorm::euclidean(2));
        let opts = PipelineOptions {
            a1: Some(0.5),
            ..small()
        };
        let out = approximate_norm(&ConvexBody::cube(2), base, 0.1, 0.5, &opts).unwrap();
        let c = &out.report.certificates;
        assert!(c.error.passed, "{:?}", c.error);
        assert!(c.sandwich.passed() && c.cover.passed());
        assert!(c.inclusions.passed, "{:?}", c.inclusions);
        assert!(c.convexity.passed, "{:?}", c.convexity);
        assert!(c.facets.checked > 0);
        assert_eq!(out.report.num_slabs, out.smoothed.num_slabs());
    }

    #[test]
    fn parameters_are_checked() {
        let base: Arc<dyn Norm> = Arc::new(BaseNorm::euclidean(2));
        for (eps, lambda) in [(0.2, 0.9), (0.0, 0.9), (0.05, 0.3), (0.05, 1.0)] {
            let r = approximate_norm(&ConvexBody::cube(2), base.clone(), eps, lambda, &small());
            assert!(matches!(r, Err(RenormError::InvalidInput(_))), "{eps} {lambda}");
        }
    }

    #[test]
    fn sabotaged_net_fails_the_sandwich() {
        let base: Arc<dyn Norm> = Arc::new(BaseNorm::euclidean(2));
        let opts = PipelineOptions {
            sabotage_zero_net: true,
            ..small()
        };
        let built = build_smoothed(&ConvexBody::cube(2), base, 0.1, 0.5, &opts).unwrap();
        assert!(!built.sandwich.lower_ok);
    }
}
