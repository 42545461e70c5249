//! Finite nets in a shrunken polar body and their cover by small slabs.
//!
//! A net point is an integer vector `k` standing for the functional
//! `f = sum_i k_i s_i x_i*`, so its `i`-th coordinate `f(x_i) = k_i s_i` lies
//! on a uniform grid. Points are kept implicitly as lexicographically ordered
//! columns: a fixed prefix `k_1..k_{d-1}` plus an integer interval for `k_d`.
//! Slabs are unions of whole columns (points agreeing on a coordinate
//! prefix) or single points, which keeps covers of very large nets compact.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{direction_grid, gaussian_unit, BiorthogonalSystem, ConvexBody};
use crate::lp::vertex_gauge;
use crate::{RenormError, Result, Vector};

/// Norm on functionals used for meshes and slab diameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualNorm {
    /// Euclidean norm under the dot-product pairing.
    #[default]
    Euclidean,
    /// The norm whose unit ball is the polar of the target body.
    PolarGauge,
}

#[derive(Clone, Debug)]
pub struct NetConfig {
    /// Target body `W`, given by vertices.
    pub body: ConvexBody,
    pub system: BiorthogonalSystem,
    pub epsilon: f64,
    pub dual_norm: DualNorm,
    /// Abort when the net would hold more points than this.
    pub size_cap: u64,
}

impl NetConfig {
    pub fn new(body: ConvexBody, system: BiorthogonalSystem, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            body,
            system,
            epsilon,
            dual_norm: DualNorm::Euclidean,
            size_cap: 1_000_000,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(RenormError::invalid(format!(
                "epsilon must lie in (0, 1/8), got {}",
                self.epsilon
            )));
        }
        if self.body.dim() != self.system.dim() {
            return Err(RenormError::DimensionMismatch {
                expected: self.system.dim(),
                got: self.body.dim(),
            });
        }
        if !matches!(self.body, ConvexBody::VPolytope { .. }) {
            return Err(RenormError::UnsupportedRepresentation(
                "nets need the target body as a vertex list".into(),
            ));
        }
        Ok(())
    }
}

/// One column of the net: all `k` with the given prefix and `lo <= k_d <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Column<'a> {
    pub prefix: &'a [i64],
    pub lo: i64,
    pub hi: i64,
}

impl Column<'_> {
    pub fn len(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn point(&self, last: i64) -> Vec<i64> {
        let mut k = self.prefix.to_vec();
        k.push(last);
        k
    }
}

/// Net summary for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetSummary {
    pub points: u64,
    pub columns: usize,
    pub d_inf: f64,
    pub ranges: Vec<f64>,
    pub mesh: Vec<f64>,
    pub spacing: Vec<f64>,
}

/// A finite net `F` inside `W^0 / (1 + eps)`.
#[derive(Clone, Debug)]
pub struct PolarNet {
    dim: usize,
    system: BiorthogonalSystem,
    /// Vertices of `W` up to sign; `W^0 = {f : |f(v)| <= 1}`.
    vertices: Vec<Vector>,
    epsilon: f64,
    radius: f64,
    dual_norm: DualNorm,
    d_inf: f64,
    ranges: Vec<f64>,
    mesh: Vec<f64>,
    spacing: Vec<f64>,
    bounds: Vec<i64>,
    /// `steps[i] = s_i x_i*`, the functional of a unit step in `k_i`.
    steps: Vec<Vector>,
    /// `table[j][i] = s_i x_i*(v_j)`.
    table: Vec<Vec<f64>>,
    prefixes: Vec<i64>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    offsets: Vec<u64>,
}

fn half_vertices(body: &ConvexBody) -> Vec<Vector> {
    let ConvexBody::VPolytope { points, .. } = body else {
        unreachable!("validated as a vertex polytope")
    };
    let mut out: Vec<Vector> = Vec::new();
    for p in points {
        let neg = -p;
        if !out.iter().any(|q| *q == *p || *q == neg) {
            out.push(p.clone());
        }
    }
    out
}

impl PolarNet {
    /// Enumerates the net with grid spacing `s_i` twice the mesh radius
    /// `eps d / (6 2^i ||x_i*||)`, so every point of `T_i` lies within the
    /// mesh of a grid value.
    pub fn build(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut net = Self::skeleton(config, None)?;
        net.enumerate(config.size_cap)?;
        Ok(net)
    }

    /// Net made of explicit integer points on the given spacing; points
    /// outside `W^0 / (1 + eps)` are accepted as given.
    pub fn from_grid_points(
        config: &NetConfig,
        spacing: Vec<f64>,
        mut points: Vec<Vec<i64>>,
    ) -> Result<Self> {
        config.validate()?;
        let mut net = Self::skeleton(config, Some(spacing))?;
        let d = net.dim;
        if points.iter().any(|p| p.len() != d) {
            return Err(RenormError::invalid("grid point of wrong length"));
        }
        points.sort();
        points.dedup();
        for p in points {
            let n = net.lo.len();
            let extends = n > 0
                && net.prefixes[(n - 1) * (d - 1)..n * (d - 1)] == p[..d - 1]
                && net.hi[n - 1] + 1 == p[d - 1];
            if extends {
                net.hi[n - 1] += 1;
            } else {
                net.prefixes.extend_from_slice(&p[..d - 1]);
                net.lo.push(p[d - 1]);
                net.hi.push(p[d - 1]);
            }
        }
        net.rebuild_offsets();
        Ok(net)
    }

    fn skeleton(config: &NetConfig, spacing: Option<Vec<f64>>) -> Result<Self> {
        let d = config.system.dim();
        let eps = config.epsilon;
        let vertices = half_vertices(&config.body);
        let ConvexBody::VPolytope { points, .. } = &config.body else {
            unreachable!()
        };
        let dual_value = |f: &Vector| dual_norm_of(config.dual_norm, &vertices, f);
        let d_inf = match config.dual_norm {
            DualNorm::Euclidean => vertices
                .iter()
                .map(|v| 1.0 / v.norm())
                .fold(f64::INFINITY, f64::min),
            DualNorm::PolarGauge => 1.0,
        };
        let mut ranges = Vec::with_capacity(d);
        let mut mesh = Vec::with_capacity(d);
        for i in 0..d {
            ranges.push(vertex_gauge(points, &config.system.basis()[i])?);
            let dual_len = dual_value(&config.system.duals()[i]);
            mesh.push(eps * d_inf / (6.0 * 2f64.powi(i as i32 + 1) * dual_len));
        }
        let spacing = match spacing {
            Some(s) if s.len() == d && s.iter().all(|v| *v > 0.0) => s,
            Some(_) => return Err(RenormError::invalid("bad grid spacing")),
            None => mesh.iter().map(|m| 2.0 * m).collect(),
        };
        let bounds = (0..d)
            .map(|i| (ranges[i] / spacing[i] - 0.5).ceil().max(0.0) as i64)
            .collect();
        let steps: Vec<Vector> = (0..d)
            .map(|i| &config.system.duals()[i] * spacing[i])
            .collect();
        let table = vertices
            .iter()
            .map(|v| steps.iter().map(|s| s.dot(v)).collect())
            .collect();
        Ok(Self {
            dim: d,
            system: config.system.clone(),
            vertices,
            epsilon: eps,
            radius: 1.0 / (1.0 + eps),
            dual_norm: config.dual_norm,
            d_inf,
            ranges,
            mesh,
            spacing,
            bounds,
            steps,
            table,
            prefixes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
            offsets: vec![0],
        })
    }

    fn rebuild_offsets(&mut self) {
        self.offsets = Vec::with_capacity(self.lo.len() + 1);
        let mut total = 0u64;
        self.offsets.push(0);
        for c in 0..self.lo.len() {
            total += (self.hi[c] - self.lo[c] + 1) as u64;
            self.offsets.push(total);
        }
    }

    /// Exact membership test `max_j |f(v_j)| <= 1 / (1 + eps)`.
    pub fn contains(&self, k: &[i64]) -> bool {
        self.table.iter().all(|row| {
            let s: f64 = row.iter().zip(k).map(|(a, b)| a * *b as f64).sum();
            s.abs() <= self.radius
        })
    }

    fn column_for(&self, prefix: &[i64]) -> Option<(i64, i64)> {
        let d = self.dim;
        let kd = self.bounds[d - 1];
        let (mut lo, mut hi) = (-(kd as f64), kd as f64);
        for row in &self.table {
            let base: f64 = row[..d - 1]
                .iter()
                .zip(prefix)
                .map(|(a, b)| a * *b as f64)
                .sum();
            let a = row[d - 1];
            if a == 0.0 {
                if base.abs() > self.radius {
                    return None;
                }
                continue;
            }
            let (p, q) = ((-self.radius - base) / a, (self.radius - base) / a);
            lo = lo.max(p.min(q));
            hi = hi.min(p.max(q));
        }
        if !(lo <= hi + 2.0) {
            return None;
        }
        let mut lo = lo.ceil() as i64;
        let mut hi = hi.floor() as i64;
        let mut k = prefix.to_vec();
        k.push(0);
        let mut inside = |v: i64| {
            k[d - 1] = v;
            v.abs() <= kd && self.contains(&k)
        };
        while lo <= hi && !inside(lo) {
            lo += 1;
        }
        while lo <= hi && !inside(hi) {
            hi -= 1;
        }
        if lo > hi {
            return None;
        }
        while inside(lo - 1) {
            lo -= 1;
        }
        while inside(hi + 1) {
            hi += 1;
        }
        Some((lo, hi))
    }

    fn enumerate(&mut self, cap: u64) -> Result<()> {
        let d = self.dim;
        let prefix_bounds = &self.bounds[..d - 1];
        let prefix_count = prefix_bounds
            .iter()
            .try_fold(1u64, |acc, k| acc.checked_mul(2 * *k as u64 + 1))
            .unwrap_or(u64::MAX);
        let prefix_cap = cap.saturating_mul(4).max(1 << 20);
        if prefix_count > prefix_cap {
            return Err(RenormError::SizeCap {
                what: "net prefixes",
                size: prefix_count,
                cap: prefix_cap,
            });
        }
        let total = AtomicU64::new(0);
        let overflow = AtomicBool::new(false);
        let first_range: Vec<i64> = if d == 1 {
            vec![0]
        } else {
            (-prefix_bounds[0]..=prefix_bounds[0]).collect()
        };
        let chunks: Vec<(Vec<i64>, Vec<i64>, Vec<i64>)> = first_range
            .par_iter()
            .map(|&k1| {
                let mut prefixes = Vec::new();
                let (mut los, mut his) = (Vec::new(), Vec::new());
                if overflow.load(Ordering::Relaxed) {
                    return (prefixes, los, his);
                }
                let mut prefix: Vec<i64> = Vec::with_capacity(d - 1);
                if d > 1 {
                    prefix.push(k1);
                    prefix.extend(prefix_bounds[1..].iter().map(|k| -k));
                }
                loop {
                    if let Some((lo, hi)) = self.column_for(&prefix) {
                        let n = (hi - lo + 1) as u64;
                        if total.fetch_add(n, Ordering::Relaxed) + n > cap {
                            overflow.store(true, Ordering::Relaxed);
                            break;
                        }
                        prefixes.extend_from_slice(&prefix);
                        los.push(lo);
                        his.push(hi);
                    }
                    // Odometer over k_2..k_{d-1}.
                    let mut i = d.saturating_sub(2);
                    loop {
                        if i == 0 {
                            return (prefixes, los, his);
                        }
                        if prefix[i] < prefix_bounds[i] {
                            prefix[i] += 1;
                            break;
                        }
                        prefix[i] = -prefix_bounds[i];
                        i -= 1;
                    }
                }
                (prefixes, los, his)
            })
            .collect();
        if overflow.load(Ordering::Relaxed) {
            return Err(RenormError::SizeCap {
                what: "net points",
                size: total.load(Ordering::Relaxed),
                cap,
            });
        }
        for (p, l, h) in chunks {
            self.prefixes.extend(p);
            self.lo.extend(l);
            self.hi.extend(h);
        }
        self.rebuild_offsets();
        Ok(())
    }

    /// Replaces `F` by `{0}`; used to exercise certificate failures.
    pub fn sabotage_zero(&mut self) {
        self.prefixes = vec![0; self.dim - 1];
        self.lo = vec![0];
        self.hi = vec![0];
        self.rebuild_offsets();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn system(&self) -> &BiorthogonalSystem {
        &self.system
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d_inf(&self) -> f64 {
        self.d_inf
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn dual_norm(&self) -> DualNorm {
        self.dual_norm
    }

    /// Vertices of `W` up to sign.
    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn len(&self) -> u64 {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_columns(&self) -> usize {
        self.lo.len()
    }

    pub fn column(&self, c: usize) -> Column<'_> {
        let w = self.dim - 1;
        Column {
            prefix: &self.prefixes[c * w..(c + 1) * w],
            lo: self.lo[c],
            hi: self.hi[c],
        }
    }

    /// Global index of the first point of column `c`.
    pub fn column_offset(&self, c: usize) -> u64 {
        self.offsets[c]
    }

    /// Integer coordinates of the point with the given global index.
    pub fn point(&self, index: u64) -> Vec<i64> {
        let c = self.offsets.partition_point(|o| *o <= index) - 1;
        let col = self.column(c);
        col.point(col.lo + (index - self.offsets[c]) as i64)
    }

    /// Functional `sum_i k_i s_i x_i*`.
    pub fn functional(&self, k: &[i64]) -> Vector {
        let mut f = Vector::zeros(self.dim);
        for (s, ki) in self.steps.iter().zip(k) {
            f.axpy(*ki as f64, s, 1.0);
        }
        f
    }

    /// `s_i x_i*`, the functional of a unit step in each coordinate.
    pub fn steps(&self) -> &[Vector] {
        &self.steps
    }

    /// Functional of a unit step in the last coordinate.
    pub fn last_step(&self) -> &Vector {
        &self.steps[self.dim - 1]
    }

    pub fn dual_norm_value(&self, f: &Vector) -> f64 {
        dual_norm_of(self.dual_norm, &self.vertices, f)
    }

    /// Dual-norm distance between two grid points.
    pub fn distance(&self, a: &[i64], b: &[i64]) -> f64 {
        let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.dual_norm_value(&self.functional(&diff))
    }

    /// Support function of `conv F` in direction `u`.
    pub fn support(&self, u: &Vector) -> f64 {
        let proj: Vec<f64> = self.steps.iter().map(|s| s.dot(u)).collect();
        let d = self.dim;
        let last = proj[d - 1];
        (0..self.num_columns())
            .map(|c| {
                let col = self.column(c);
                let base: f64 = col
                    .prefix
                    .iter()
                    .zip(&proj)
                    .map(|(k, p)| *k as f64 * p)
                    .sum();
                base + (col.lo as f64 * last).max(col.hi as f64 * last)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn summary(&self) -> NetSummary {
        NetSummary {
            points: self.len(),
            columns: self.num_columns(),
            d_inf: self.d_inf,
            ranges: self.ranges.clone(),
            mesh: self.mesh.clone(),
            spacing: self.spacing.clone(),
        }
    }
}

fn dual_norm_of(kind: DualNorm, vertices: &[Vector], f: &Vector) -> f64 {
    match kind {
        DualNorm::Euclidean => f.norm(),
        DualNorm::PolarGauge => vertices
            .iter()
            .map(|v| v.dot(f).abs())
            .fold(0.0, f64::max),
    }
}

/// Outcome of [`certify_sandwich`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub net_inequality_ok: bool,
    pub directions: usize,
    /// Smallest and largest `h_conv(F)(u) / h_W0(u)` seen.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Direction with the smallest lower-bound margin.
    pub worst_direction: Vec<f64>,
    /// Largest observed `dist(f, F) / (d eps / 3)` over sampled `f`.
    pub net_distance_ratio: f64,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok && self.net_inequality_ok
    }
}

/// Checks `h_W0 / (1 + 4 eps) - tol <= h_conv(F) <= h_W0 / (1 + eps) + tol`
/// over a direction grid and spot-checks that sampled functionals of
/// `W^0 / (1 + 2 eps)` have a net point within `d eps / 3`.
pub fn certify_sandwich(
    net: &PolarNet,
    directions: usize,
    net_samples: usize,
    seed: u64,
) -> Result<SandwichReport> {
    const TOL: f64 = 1e-9;
    let eps = net.epsilon;
    let all_vertices: Vec<Vector> = net
        .vertices
        .iter()
        .flat_map(|v| [v.clone(), -v])
        .collect();
    let dirs = direction_grid(net.dim, directions);
    let rows: Vec<(f64, f64)> = dirs
        .par_iter()
        .map(|u| -> Result<(f64, f64)> {
            Ok((net.support(u), vertex_gauge(&all_vertices, u)?))
        })
        .collect::<Result<_>>()?;
    let (mut lower_ok, mut upper_ok) = (true, true);
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst = (f64::INFINITY, 0usize);
    for (i, (hf, hw)) in rows.iter().enumerate() {
        let lower_margin = hf - hw / (1.0 + 4.0 * eps);
        lower_ok &= lower_margin >= -TOL;
        upper_ok &= *hf <= hw / (1.0 + eps) + TOL;
        if lower_margin < worst.0 {
            worst = (lower_margin, i);
        }
        min_ratio = min_ratio.min(hf / hw);
        max_ratio = max_ratio.max(hf / hw);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vector> = (0..net_samples)
        .map(|_| {
            let g = gaussian_unit(net.dim, &mut rng);
            let r: f64 = rng.random::<f64>().powf(1.0 / net.dim as f64);
            let scale = dual_norm_of(DualNorm::PolarGauge, &net.vertices, &g);
            g * (r / ((1.0 + 2.0 * eps) * scale))
        })
        .collect();
    let target = net.d_inf * eps / 3.0;
    let dists: Vec<f64> = samples
        .par_iter()
        .map(|f| {
            let k: Vec<i64> = (0..net.dim)
                .map(|i| (f.dot(&net.system.basis()[i]) / net.spacing[i]).round() as i64)
                .collect();
            if net.is_member(&k) {
                net.dual_norm_value(&(net.functional(&k) - f))
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let worst_dist = dists.iter().copied().fold(0.0, f64::max);
    Ok(SandwichReport {
        lower_ok,
        upper_ok,
        net_inequality_ok: worst_dist < target,
        directions: dirs.len(),
        min_ratio,
        max_ratio,
        worst_direction: dirs[worst.1].iter().copied().collect(),
        net_distance_ratio: worst_dist / target,
    })
}

impl PolarNet {
    /// Whether `k` is one of the stored points.
    pub fn is_member(&self, k: &[i64]) -> bool {
        let d = self.dim;
        let prefix = &k[..d - 1];
        let w = d - 1;
        let n = self.lo.len();
        let c = if w == 0 {
            0
        } else {
            let (mut a, mut b) = (0usize, n);
            while a < b {
                let m = (a + b) / 2;
                if &self.prefixes[m * w..(m + 1) * w] < prefix {
                    a = m + 1;
                } else {
                    b = m;
                }
            }
            a
        };
        c < n && self.column(c).prefix == prefix && (self.lo[c]..=self.hi[c]).contains(&k[d - 1])
    }
}

/// A block of consecutive slabs in a cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabBlock {
    /// One slab: all points of columns `first..end`, which agree on their
    /// first `n` coordinates.
    Group { n: usize, first: usize, end: usize },
    /// One singleton slab per point of column `col`, with `n = d`.
    Singletons { col: usize },
}

/// A slab `(g, n, members)` resolved from a cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slab {
    pub g: Vec<i64>,
    pub n: usize,
    pub block: usize,
    /// Member columns and, for singletons, the member's last coordinate.
    pub columns: (usize, usize),
    pub single: Option<i64>,
}

/// Ordered cover of a net by slabs `(g_k + M_{n_k}) cap F_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabCover {
    blocks: Vec<SlabBlock>,
    /// Cover index of the first slab of each block, plus the total.
    starts: Vec<u64>,
    epsilon: f64,
}

/// Serialized slab: `{"g": [...], "n": k, "members": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabJson {
    pub g: Vec<f64>,
    pub n: usize,
    pub members: Vec<u64>,
}

impl SlabCover {
    pub fn blocks(&self) -> &[SlabBlock] {
        &self.blocks
    }

    pub fn len(&self) -> u64 {
        *self.starts.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Cover index of the first slab of block `b`.
    pub fn block_start(&self, b: usize) -> u64 {
        self.starts[b]
    }

    pub fn num_groups(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, SlabBlock::Group { .. }))
            .count()
    }

    /// Slab with cover index `k`.
    pub fn slab(&self, net: &PolarNet, k: u64) -> Slab {
        let b = self.starts.partition_point(|s| *s <= k) - 1;
        match self.blocks[b] {
            SlabBlock::Group { n, first, end } => {
                let col = net.column(first);
                Slab {
                    g: col.point(col.lo),
                    n,
                    block: b,
                    columns: (first, end),
                    single: None,
                }
            }
            SlabBlock::Singletons { col } => {
                let c = net.column(col);
                let last = c.lo + (k - self.starts[b]) as i64;
                Slab {
                    g: c.point(last),
                    n: net.dim,
                    block: b,
                    columns: (col, col + 1),
                    single: Some(last),
                }
            }
        }
    }

    /// Global indices of the members of slab `k`.
    pub fn members(&self, net: &PolarNet, k: u64) -> Vec<u64> {
        let s = self.slab(net, k);
        match s.single {
            Some(last) => vec![net.column_offset(s.columns.0) + (last - net.column(s.columns.0).lo) as u64],
            None => (net.column_offset(s.columns.0)..net.column_offset(s.columns.1)).collect(),
        }
    }

    /// JSON form; refuses covers of more than `limit` points.
    pub fn to_json(&self, net: &PolarNet, limit: u64) -> Result<Vec<SlabJson>> {
        if net.len() > limit {
            return Err(RenormError::SizeCap {
                what: "slab JSON points",
                size: net.len(),
                cap: limit,
            });
        }
        Ok((0..self.len())
            .map(|k| {
                let s = self.slab(net, k);
                SlabJson {
                    g: net.functional(&s.g).iter().copied().collect(),
                    n: s.n,
                    members: self.members(net, k),
                }
            })
            .collect())
    }
}

/// Diameter of the points in columns `first..end`; stops early and returns a
/// value `>= bound` as soon as one pair reaches `bound`.
fn group_diameter(net: &PolarNet, first: usize, end: usize, bound: f64) -> f64 {
    let mut ends: Vec<Vec<i64>> = Vec::with_capacity(2 * (end - first));
    for c in first..end {
        let col = net.column(c);
        ends.push(col.point(col.lo));
        if col.hi != col.lo {
            ends.push(col.point(col.hi));
        }
    }
    let mut diam: f64 = 0.0;
    for e in &ends {
        diam = diam.max(net.distance(&ends[0], e));
        if diam >= bound {
            return diam;
        }
    }
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            diam = diam.max(net.distance(&ends[i], &ends[j]));
            if diam >= bound {
                return diam;
            }
        }
    }
    diam
}

/// Greedy finite cover: for `n = 0, 1, ..., d` in turn, every group of
/// uncovered points agreeing on the first `n` coordinates whose diameter is
/// below `eps` becomes a slab, in lexicographic order of the groups.
///
/// When all of `F` fits in one slab it is reported with `n = 1` if the points
/// share their first coordinate and `n = 0` otherwise.
pub fn slab_decompose(net: &PolarNet, epsilon: f64) -> SlabCover {
    let d = net.dim;
    let ncols = net.num_columns();
    let mut blocks = Vec::new();
    if ncols > 0 && group_diameter(net, 0, ncols, epsilon) < epsilon {
        let first = net.column(0);
        let same_first = if d == 1 {
            first.lo == first.hi
        } else {
            (0..ncols).all(|c| net.column(c).prefix[0] == first.prefix[0])
        };
        blocks.push(SlabBlock::Group {
            n: usize::from(same_first),
            first: 0,
            end: ncols,
        });
    } else {
        let mut alive = vec![true; ncols];
        for n in 1..d {
            let mut c = 0;
            while c < ncols {
                if !alive[c] {
                    c += 1;
                    continue;
                }
                let key = &net.column(c).prefix[..n];
                let mut e = c + 1;
                while e < ncols && alive[e] && &net.column(e).prefix[..n] == key {
                    e += 1;
                }
                if group_diameter(net, c, e, epsilon) < epsilon {
                    blocks.push(SlabBlock::Group { n, first: c, end: e });
                    alive[c..e].iter_mut().for_each(|a| *a = false);
                }
                c = e;
            }
        }
        for (col, a) in alive.iter().enumerate() {
            if *a {
                blocks.push(SlabBlock::Singletons { col });
            }
        }
    }
    let mut starts = Vec::with_capacity(blocks.len() + 1);
    let mut total = 0u64;
    for b in &blocks {
        starts.push(total);
        total += match b {
            SlabBlock::Group { .. } => 1,
            SlabBlock::Singletons { col } => net.column(*col).len(),
        };
    }
    starts.push(total);
    SlabCover {
        blocks,
        starts,
        epsilon,
    }
}

/// Independent check of a cover's invariants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverCheck {
    pub points: u64,
    pub covered: u64,
    /// Every point belongs to exactly one slab.
    pub exact_partition: bool,
    pub max_diameter: f64,
    pub diameter_ok: bool,
    /// Members agree with `g` on the first `n` coordinates and every
    /// uncovered point agreeing with `g` was taken.
    pub agreement_ok: bool,
}

impl CoverCheck {
    pub fn passed(&self) -> bool {
        self.exact_partition && self.diameter_ok && self.agreement_ok
    }
}

pub fn verify_cover(net: &PolarNet, cover: &SlabCover) -> CoverCheck {
    let ncols = net.num_columns();
    let mut owner: Vec<Option<usize>> = vec![None; ncols];
    let mut exact = true;
    let mut covered = 0u64;
    for (b, block) in cover.blocks.iter().enumerate() {
        let (first, end) = match *block {
            SlabBlock::Group { first, end, .. } => (first, end),
            SlabBlock::Singletons { col } => (col, col + 1),
        };
        for o in owner.iter_mut().take(end).skip(first) {
            exact &= o.is_none();
            *o = Some(b);
        }
        covered += net.offsets[end] - net.offsets[first];
    }
    exact &= owner.iter().all(Option::is_some) && covered == net.len();

    let mut max_diameter: f64 = 0.0;
    let mut agreement_ok = true;
    for (b, block) in cover.blocks.iter().enumerate() {
        let SlabBlock::Group { n, first, end } = *block else {
            continue;
        };
        max_diameter = max_diameter.max(group_diameter(net, first, end, f64::INFINITY));
        if net.dim == 1 {
            continue;
        }
        let key = &net.column(first).prefix[..n.min(net.dim - 1)];
        for c in first..end {
            agreement_ok &= &net.column(c).prefix[..key.len()] == key;
        }
        if n == 0 {
            agreement_ok &= first == 0 && end == ncols;
            continue;
        }
        for c in [first.checked_sub(1), Some(end)].into_iter().flatten() {
            if c < ncols && &net.column(c).prefix[..key.len()] == key {
                agreement_ok &= owner[c].is_some_and(|o| o < b);
            }
        }
    }
    CoverCheck {
        points: net.len(),
        covered,
        exact_partition: exact,
        max_diameter,
        diameter_ok: max_diameter < cover.epsilon,
        agreement_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linf_config(eps: f64, dual: DualNorm) -> NetConfig {
        let mut cfg = NetConfig::new(ConvexBody::cube(2), BiorthogonalSystem::standard(2), eps).unwrap();
        cfg.dual_norm = dual;
        cfg
    }

    #[test]
    fn linf_net_parameters() {
        let net = PolarNet::build(&linf_config(0.1, DualNorm::PolarGauge)).unwrap();
        assert_eq!(net.d_inf(), 1.0);
        assert_relative_eq!(net.mesh()[0], 1.0 / 120.0, epsilon = 1e-15);
        assert_relative_eq!(net.mesh()[1], 1.0 / 240.0, epsilon = 1e-15);
        let euclid = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        assert_relative_eq!(euclid.d_inf(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn net_points_lie_in_the_shrunken_polar() {
        let net = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        assert!(net.len() > 1000);
        for c in 0..net.num_columns() {
            let col = net.column(c);
            for k in [col.lo, col.hi] {
                let f = net.functional(&col.point(k));
                assert!(f[0].abs() + f[1].abs() <= 1.0 / 1.1 + 1e-15);
                for i in 0..2 {
                    assert!(col.point(k)[i].abs() <= net.bounds[i]);
                }
            }
            // Maximal columns: the next grid value is outside.
            assert!(!net.contains(&col.point(col.hi + 1)) || col.hi + 1 > net.bounds[1]);
        }
    }

    #[test]
    fn polygon_net_is_nonempty_and_certified() {
        let pts = (0..32)
            .map(|j| {
                let t = std::f64::consts::TAU * (j as f64 + 0.5) / 64.0;
                Vector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
        let body = ConvexBody::symmetric_hull(pts).unwrap();
        let net = PolarNet::build(&NetConfig::new(body, BiorthogonalSystem::standard(2), 0.1).unwrap())
            .unwrap();
        assert!(!net.is_empty());
        let r = certify_sandwich(&net, 720, 500, 3).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn zero_net_fails_lower_bound() {
        let mut net = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        assert!(certify_sandwich(&net, 360, 100, 1).unwrap().passed());
        net.sabotage_zero();
        let r = certify_sandwich(&net, 360, 100, 1).unwrap();
        assert!(!r.lower_ok && r.upper_ok);
    }

    #[test]
    fn size_cap_aborts() {
        let mut cfg = linf_config(0.05, DualNorm::Euclidean);
        cfg.size_cap = 1000;
        assert!(matches!(PolarNet::build(&cfg), Err(RenormError::SizeCap { .. })));
    }

    fn explicit(points: Vec<Vec<i64>>, spacing: Vec<f64>, eps: f64) -> PolarNet {
        let cfg = NetConfig::new(ConvexBody::cube(2), BiorthogonalSystem::standard(2), eps).unwrap();
        let cfg = NetConfig {
            dual_norm: DualNorm::PolarGauge,
            ..cfg
        };
        PolarNet::from_grid_points(&cfg, spacing, points).unwrap()
    }

    #[test]
    fn single_point_is_one_slab() {
        let net = explicit(vec![vec![3, -2]], vec![0.1, 0.1], 0.1);
        let cover = slab_decompose(&net, 0.1);
        assert_eq!(cover.len(), 1);
        assert_eq!(cover.slab(&net, 0).n, 1);
        assert!(verify_cover(&net, &cover).passed());
    }

    #[test]
    fn hand_run_example() {
        // F = {(0,0), (0,0.5), (1,0)} with the l1 dual norm and eps = 0.6.
        let net = explicit(vec![vec![0, 0], vec![0, 1], vec![1, 0]], vec![1.0, 0.5], 0.1);
        let cover = slab_decompose(&net, 0.6);
        assert_eq!(cover.len(), 2);
        let s0 = cover.slab(&net, 0);
        assert_eq!((s0.g.clone(), s0.n), (vec![0, 0], 1));
        assert_eq!(cover.members(&net, 0), vec![0, 1]);
        assert_eq!(cover.members(&net, 1), vec![2]);
        let json = cover.to_json(&net, 10).unwrap();
        assert_eq!(json[0].g, vec![0.0, 0.0]);
        assert!(verify_cover(&net, &cover).passed());
    }

    #[test]
    fn whole_net_in_one_slab_when_eps_is_large() {
        let net = explicit(vec![vec![0, 0], vec![1, 1]], vec![0.01, 0.01], 0.1);
        let cover = slab_decompose(&net, 0.1);
        assert_eq!(cover.len(), 1);
        assert_eq!(cover.slab(&net, 0).n, 0);
    }

    #[test]
    fn built_cover_is_valid_and_deterministic() {
        let net = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        let cover = slab_decompose(&net, 0.1);
        let check = verify_cover(&net, &cover);
        assert!(check.passed(), "{check:?}");
        assert!(cover.num_groups() > 0);
        assert_eq!(cover, slab_decompose(&net, 0.1));
        let again = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        assert_eq!(again.prefixes, net.prefixes);
        assert_eq!(again.lo, net.lo);
    }

    #[test]
    fn point_lookup_round_trips() {
        let net = PolarNet::build(&linf_config(0.1, DualNorm::Euclidean)).unwrap();
        for idx in [0, 17, net.len() / 2, net.len() - 1] {
            let k = net.point(idx);
            assert!(net.is_member(&k));
            assert!(net.contains(&k));
        }
    }
}
