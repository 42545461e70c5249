//! The assembled function `G(x) = sum_k [phi_k((1+delta_k) F_k(x)) + phi_k((1+delta_k) F_k(-x))]`
//! over the slabs of a cover, and its gauge `mu_G`.
//!
//! Slabs are ranked before the schedule is attached: a short list of
//! priority slabs chosen greedily to dominate every direction comes first,
//! then all remaining slabs in cover order. The slab of rank `r` gets
//! schedule index `r + 1` and weight `a_{r+1} = a_1 2^-r`.
//!
//! Sums are pruned with the bound `N(a, b) <= 2 max(a, b)` for groups and
//! with one linear test per column for singletons, so only slabs that can
//! contribute are evaluated exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::direction_grid;
use crate::nets::{PolarNet, SlabBlock, SlabCover};
use crate::smooth::SmoothFunction;
use crate::smoothing::facets::{FacetFunctional, FacetSetup, PointContext};
use crate::smoothing::schedule::Schedule;
use crate::{Matrix, RenormError, Result, Vector};

const PRUNE_SLACK: f64 = 1e-12;

/// Parameters of the greedy priority selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorityOptions {
    /// Number of test directions; 0 picks 720 in the plane and 2000 otherwise.
    pub directions: usize,
    pub max_slabs: usize,
}

impl Default for PriorityOptions {
    fn default() -> Self {
        Self {
            directions: 0,
            max_slabs: 64,
        }
    }
}

/// Outcome of the priority selection.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PriorityReport {
    /// Cover indices of the priority slabs in rank order.
    pub slabs: Vec<u64>,
    pub directions: usize,
    pub uncovered: usize,
}

impl PriorityReport {
    pub fn passed(&self) -> bool {
        self.uncovered == 0
    }
}

/// Result of a gauge evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeEval {
    pub mu: f64,
    /// `F_Q(x) = max_k max(F_k(x), F_k(-x))`.
    pub f_q: f64,
    pub iterations: usize,
    /// Nonzero terms of `G` at `x / mu`.
    pub active_terms: usize,
}

struct DirData {
    ctx: PointContext,
    cands: Vec<Candidate>,
}

struct GroupSlab {
    cover: u64,
    rank: u64,
    n: usize,
    g: Vector,
}

struct SingleBlock {
    col: usize,
    start: u64,
}

struct PrioritySingle {
    cover: u64,
    rank: u64,
    g: Vector,
}

#[derive(Clone, Debug)]
struct Candidate {
    cover: u64,
    rank: u64,
    sign: f64,
    n: usize,
    gx: f64,
    g: Vector,
}

#[derive(Clone, Copy)]
enum Filter {
    /// Keep slabs whose term can be nonzero.
    Bump,
    /// Keep slabs whose functional can reach the given level.
    AtLeast(f64),
}

/// Range of `last` in `[lo, hi]` where `a0 + b last > thr` may hold.
fn column_window(lo: i64, hi: i64, a0: f64, b: f64, thr: f64) -> Option<(i64, i64)> {
    if b == 0.0 {
        return (a0 > thr).then_some((lo, hi));
    }
    let t = (thr - a0) / b;
    if !t.is_finite() {
        return None;
    }
    let (lo_f, hi_f) = (lo as f64, hi as f64);
    if b > 0.0 {
        let start = t.floor().max(lo_f);
        (start <= hi_f).then(|| (start as i64, hi))
    } else {
        let end = t.ceil().min(hi_f);
        (end >= lo_f).then(|| (lo, end as i64))
    }
}

/// The smooth norm whose unit ball is `{G <= 1}`.
pub struct SmoothedNorm {
    net: PolarNet,
    cover: SlabCover,
    setup: Arc<FacetSetup>,
    schedule: Schedule,
    groups: Vec<GroupSlab>,
    singles: Vec<SingleBlock>,
    priority_singles: Vec<PrioritySingle>,
    /// `(cover index, rank)` of the priority slabs, sorted by cover index.
    priority_sorted: Vec<(u64, u64)>,
    report: PriorityReport,
}

impl SmoothedNorm {
    pub fn new(
        net: PolarNet,
        cover: SlabCover,
        setup: FacetSetup,
        schedule: Schedule,
        options: PriorityOptions,
    ) -> Result<Self> {
        if net.is_empty() || cover.is_empty() {
            return Err(RenormError::Precondition("empty net or cover".into()));
        }
        if net.dim() != setup.dim() {
            return Err(RenormError::DimensionMismatch {
                expected: net.dim(),
                got: setup.dim(),
            });
        }
        let mut groups = Vec::new();
        let mut singles = Vec::new();
        for (b, block) in cover.blocks().iter().enumerate() {
            let start = cover.block_start(b);
            match *block {
                SlabBlock::Group { n, first, .. } => {
                    let col = net.column(first);
                    groups.push(GroupSlab {
                        cover: start,
                        rank: start,
                        n,
                        g: net.functional(&col.point(col.lo)),
                    });
                }
                SlabBlock::Singletons { col } => singles.push(SingleBlock { col, start }),
            }
        }
        let mut out = Self {
            net,
            cover,
            setup: Arc::new(setup),
            schedule,
            groups,
            singles,
            priority_singles: Vec::new(),
            priority_sorted: Vec::new(),
            report: PriorityReport::default(),
        };
        out.select_priority(options)?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    pub fn net(&self) -> &PolarNet {
        &self.net
    }

    pub fn cover(&self) -> &SlabCover {
        &self.cover
    }

    pub fn setup(&self) -> &FacetSetup {
        &self.setup
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn priority(&self) -> &PriorityReport {
        &self.report
    }

    pub fn num_slabs(&self) -> u64 {
        self.cover.len()
    }

    /// 0-based rank of a slab; its schedule index is `rank + 1`.
    pub fn rank_of(&self, cover: u64) -> u64 {
        match self.priority_sorted.binary_search_by_key(&cover, |p| p.0) {
            Ok(i) => self.priority_sorted[i].1,
            Err(i) => self.priority_sorted.len() as u64 + cover - i as u64,
        }
    }

    /// Facet functional of a slab with its assigned weight.
    pub fn facet(&self, cover: u64) -> Result<FacetFunctional> {
        if cover >= self.cover.len() {
            return Err(RenormError::invalid("slab index out of range"));
        }
        let slab = self.cover.slab(&self.net, cover);
        let a = self.setup.a(self.rank_of(cover) + 1);
        FacetFunctional::new(self.setup.clone(), self.net.functional(&slab.g), slab.n, a)
    }

    fn project_steps(&self, x: &Vector) -> Vec<f64> {
        self.net.steps().iter().map(|s| s.dot(x)).collect()
    }

    fn weight(&self, rank: u64, uniform: bool) -> f64 {
        if uniform {
            self.setup.a1()
        } else {
            self.setup.a(rank + 1)
        }
    }

    /// Largest `+-g(s x)` over all slab functionals.
    fn lower_bound(&self, ctx: &PointContext, proj: &[f64], s: f64) -> f64 {
        let d = self.dim();
        let mut best: f64 = 0.0;
        for gs in &self.groups {
            best = best.max(s * gs.g.dot(&ctx.x).abs());
        }
        for sb in &self.singles {
            let col = self.net.column(sb.col);
            let base: f64 = col.prefix.iter().zip(proj).map(|(k, p)| *k as f64 * p).sum();
            let pl = proj[d - 1];
            let end = (base + col.lo as f64 * pl).abs().max((base + col.hi as f64 * pl).abs());
            best = best.max(s * end);
        }
        best
    }

    fn candidates(
        &self,
        ctx: &PointContext,
        proj: &[f64],
        s: f64,
        filter: Filter,
        uniform: bool,
    ) -> Vec<Candidate> {
        let d = self.dim();
        let eps = self.setup.epsilon();
        let mut out = Vec::new();
        for gs in &self.groups {
            let gx = gs.g.dot(&ctx.x);
            let bound = eps * self.setup.n_bound(ctx, s, gs.n, self.weight(gs.rank, uniform));
            for sign in [1.0, -1.0] {
                let upper = sign * s * gx + bound;
                let keep = match filter {
                    Filter::Bump => upper > self.schedule.lambda(gs.rank + 1) - PRUNE_SLACK,
                    Filter::AtLeast(l) => upper >= l - PRUNE_SLACK,
                };
                if keep {
                    out.push(Candidate {
                        cover: gs.cover,
                        rank: gs.rank,
                        sign,
                        n: gs.n,
                        gx,
                        g: gs.g.clone(),
                    });
                }
            }
        }
        for ps in &self.priority_singles {
            let gx = ps.g.dot(&ctx.x);
            for sign in [1.0, -1.0] {
                out.push(Candidate {
                    cover: ps.cover,
                    rank: ps.rank,
                    sign,
                    n: d,
                    gx,
                    g: ps.g.clone(),
                });
            }
        }
        if self.singles.is_empty() {
            return out;
        }
        let p = self.priority_sorted.len() as u64;
        for sb in &self.singles {
            // Non-priority slab c has rank >= max(P, c).
            let min_rank = p.max(sb.start);
            let reach = eps * self.weight(min_rank, uniform) * s * ctx.levels[d].p;
            let thr = match filter {
                Filter::Bump => self.schedule.lambda(min_rank + 1),
                Filter::AtLeast(l) => l,
            } - reach
                - PRUNE_SLACK;
            let col = self.net.column(sb.col);
            let base: f64 = col.prefix.iter().zip(proj).map(|(k, q)| *k as f64 * q).sum();
            let pl = proj[d - 1];
            for sign in [1.0, -1.0] {
                let (a0, b) = (sign * s * base, sign * s * pl);
                let Some((lo, hi)) = column_window(col.lo, col.hi, a0, b, thr) else {
                    continue;
                };
                for last in lo..=hi {
                    if a0 + b * last as f64 <= thr {
                        continue;
                    }
                    let cover = sb.start + (last - col.lo) as u64;
                    if self.priority_sorted.binary_search_by_key(&cover, |q| q.0).is_ok() {
                        continue;
                    }
                    let g = self.net.functional(&col.point(last));
                    out.push(Candidate {
                        cover,
                        rank: self.rank_of(cover),
                        sign,
                        n: d,
                        gx: g.dot(&ctx.x),
                        g,
                    });
                }
            }
        }
        out
    }

    fn facet_value(&self, ctx: &PointContext, s: f64, c: &Candidate, a: f64) -> f64 {
        c.sign * s * c.gx + self.setup.epsilon() * self.setup.n_value(ctx, s, c.n, a)
    }

    fn facet_gradient(&self, ctx: &PointContext, s: f64, c: &Candidate, a: f64) -> Vector {
        &c.g * c.sign + self.setup.n_gradient(ctx, s, c.n, a) * self.setup.epsilon()
    }

    /// `F_Q(s x)` and the maximizing slab.
    fn f_q_ray(&self, ctx: &PointContext, proj: &[f64], s: f64, uniform: bool) -> (f64, Option<Candidate>) {
        let lower = self.lower_bound(ctx, proj, s);
        let mut best = f64::NEG_INFINITY;
        let mut arg = None;
        for c in self.candidates(ctx, proj, s, Filter::AtLeast(lower), uniform) {
            let f = self.facet_value(ctx, s, &c, self.weight(c.rank, uniform));
            if f > best {
                best = f;
                arg = Some(c);
            }
        }
        (best, arg)
    }

    /// `G(s x)`, its gradient and the number of nonzero terms.
    fn g_ray(&self, ctx: &PointContext, proj: &[f64], s: f64, want_grad: bool) -> (f64, Vector, usize) {
        let mut value = 0.0;
        let mut grad = Vector::zeros(self.dim());
        let mut active = 0;
        for c in self.candidates(ctx, proj, s, Filter::Bump, false) {
            let a = self.setup.a(c.rank + 1);
            let f = self.facet_value(ctx, s, &c, a);
            let (t, dt) = self.schedule.term(c.rank + 1, f);
            if t == 0.0 && dt == 0.0 {
                continue;
            }
            active += 1;
            value += t;
            if want_grad && dt != 0.0 {
                grad.axpy(dt, &self.facet_gradient(ctx, s, &c, a), 1.0);
            }
        }
        (value, grad, active)
    }

    fn prepare(&self, x: &Vector) -> Result<(PointContext, Vec<f64>)> {
        let ctx = self.setup.context(x)?;
        let proj = self.project_steps(x);
        Ok((ctx, proj))
    }

    pub fn g_value(&self, x: &Vector) -> Result<f64> {
        let (ctx, proj) = self.prepare(x)?;
        Ok(self.g_ray(&ctx, &proj, 1.0, false).0)
    }

    pub fn g_value_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let (ctx, proj) = self.prepare(x)?;
        let (v, g, _) = self.g_ray(&ctx, &proj, 1.0, true);
        Ok((v, g))
    }

    /// Number of nonzero terms of `G` at `x`.
    pub fn active_terms(&self, x: &Vector) -> Result<usize> {
        let (ctx, proj) = self.prepare(x)?;
        Ok(self.g_ray(&ctx, &proj, 1.0, false).2)
    }

    /// `F_Q(x) = max_k max(F_k(x), F_k(-x))`.
    pub fn f_q(&self, x: &Vector) -> Result<f64> {
        let (ctx, proj) = self.prepare(x)?;
        Ok(self.f_q_ray(&ctx, &proj, 1.0, false).0)
    }

    pub fn gauge(&self, x: &Vector) -> Result<f64> {
        Ok(self.gauge_detail(x)?.mu)
    }

    pub fn gauge_detail(&self, x: &Vector) -> Result<GaugeEval> {
        Ok(self.gauge_solve(x, false)?.0)
    }

    pub fn gauge_gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.gauge_solve(x, true)?.1)
    }

    pub fn gauge_value_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let (e, g) = self.gauge_solve(x, true)?;
        Ok((e.mu, g))
    }

    /// Solves `G(s x) = 1` on `s in [lambda_1 / F_Q(x), 1 / F_Q(x)]` by
    /// Newton on `ln G` safeguarded by bisection; `mu_G(x) = 1 / s`.
    fn gauge_solve(&self, x: &Vector, want_grad: bool) -> Result<(GaugeEval, Vector)> {
        let d = self.dim();
        if x.len() != d {
            return Err(RenormError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().all(|v| *v == 0.0) {
            let eval = GaugeEval {
                mu: 0.0,
                f_q: 0.0,
                iterations: 0,
                active_terms: 0,
            };
            return Ok((eval, Vector::zeros(d)));
        }
        let (ctx, proj) = self.prepare(x)?;
        let (f_q, arg) = self.f_q_ray(&ctx, &proj, 1.0, false);
        if !(f_q > 0.0 && f_q.is_finite()) {
            return Err(RenormError::Precondition(format!(
                "F_Q is not positive at a nonzero point ({f_q})"
            )));
        }
        let mut lo = self.schedule.lambda1() / f_q;
        let mut hi = 1.0 / f_q;
        if self.g_ray(&ctx, &proj, lo, false).0 > 1.0 {
            return Err(RenormError::Bracketing(format!(
                "G exceeds 1 below the ray bracket at scale {lo}"
            )));
        }
        let (mut g, mut grad, mut active) = self.g_ray(&ctx, &proj, hi, true);
        let mut widen = 0;
        while g < 1.0 {
            widen += 1;
            if widen > 64 {
                return Err(RenormError::Bracketing(format!(
                    "G stays below 1 at the ray bracket end ({g})"
                )));
            }
            hi *= 1.0 + 4.0 * f64::EPSILON;
            (g, grad, active) = self.g_ray(&ctx, &proj, hi, true);
        }
        let mut s = hi;
        let mut iterations = 0;
        while iterations < 200 {
            if g > 1.0 {
                hi = s;
            } else {
                lo = s;
            }
            if (g - 1.0).abs() <= 16.0 * f64::EPSILON || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            // Newton on ln G, which is far closer to linear along the ray.
            let newton = s - g.ln() * g / grad.dot(x);
            if (g - 1.0).abs() < 1e-6 && newton.is_finite() && (newton - s).abs() <= 4.0 * f64::EPSILON * s {
                break;
            }
            iterations += 1;
            s = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            (g, grad, active) = self.g_ray(&ctx, &proj, s, true);
        }
        let mu = 1.0 / s;
        let eval = GaugeEval {
            mu,
            f_q,
            iterations,
            active_terms: active,
        };
        if !want_grad {
            return Ok((eval, Vector::zeros(d)));
        }
        let denom = grad.dot(x);
        let gradient = if grad.iter().all(|v| v.is_finite()) && denom > 0.0 && denom.is_finite() {
            &grad * (mu / denom)
        } else {
            let c = arg.expect("F_Q has a maximizer");
            let gf = self.facet_gradient(&ctx, s, &c, self.setup.a(c.rank + 1));
            let df = gf.dot(x);
            &gf * (mu / df)
        };
        Ok((eval, gradient))
    }

    /// Candidates that can carry the maximum in direction `u`.
    ///
    /// A slab whose value at weight `a_1` stays below the largest value at
    /// weight 0 can never carry the maximum, whatever its final rank.
    fn direction_data(&self, u: &Vector) -> Result<DirData> {
        let (ctx, proj) = self.prepare(u)?;
        let lower = self.lower_bound(&ctx, &proj, 1.0);
        let all = self.candidates(&ctx, &proj, 1.0, Filter::AtLeast(lower), true);
        let floor = all
            .iter()
            .map(|c| self.facet_value(&ctx, 1.0, c, 0.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let a1 = self.setup.a1();
        let cands = all
            .into_iter()
            .filter(|c| self.facet_value(&ctx, 1.0, c, a1) >= floor * (1.0 - PRUNE_SLACK))
            .collect();
        Ok(DirData { ctx, cands })
    }

    /// Slabs of `dd` that may take rank `j`: the value at `a_{j+1}` is within
    /// the factor `1 - c_{j+1}/2` of every value the direction can still
    /// see, namely chosen slabs at their weights (`best`) and the rest at
    /// `a_{j+2}` or less.
    fn qualifying(&self, dd: &DirData, best: f64, chosen: &[u64], j: u64) -> Vec<u64> {
        let (a_here, a_next) = (self.setup.a(j + 1), self.setup.a(j + 2));
        let eta = self.schedule.c(j + 1) / 2.0;
        let open: Vec<&Candidate> = dd.cands.iter().filter(|c| !chosen.contains(&c.cover)).collect();
        let here: Vec<f64> = open.iter().map(|c| self.facet_value(&dd.ctx, 1.0, c, a_here)).collect();
        let next: Vec<f64> = open.iter().map(|c| self.facet_value(&dd.ctx, 1.0, c, a_next)).collect();
        let mut out = Vec::new();
        for (i, c) in open.iter().enumerate() {
            let mut own = f64::NEG_INFINITY;
            let mut rival = best;
            for (k, o) in open.iter().enumerate() {
                if o.cover == c.cover {
                    own = own.max(here[k]);
                } else {
                    rival = rival.max(next[k]);
                }
            }
            if here[i] >= own && here[i] >= (1.0 - eta) * rival {
                out.push(c.cover);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Greedy ranking over the given directions; returns the chosen slabs
    /// and which directions they cover.
    fn greedy(&self, per: &[&DirData], max_slabs: usize) -> (Vec<u64>, Vec<bool>) {
        let mut chosen_best = vec![f64::NEG_INFINITY; per.len()];
        let mut covered = vec![false; per.len()];
        let mut chosen: Vec<u64> = Vec::new();
        for j in 0..max_slabs as u64 {
            let hits: Vec<Vec<u64>> = per
                .par_iter()
                .enumerate()
                .map(|(i, dd)| {
                    if covered[i] {
                        Vec::new()
                    } else {
                        self.qualifying(dd, chosen_best[i], &chosen, j)
                    }
                })
                .collect();
            let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
            for c in hits.iter().flatten() {
                *counts.entry(*c).or_default() += 1;
            }
            let Some((&best, _)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
                break;
            };
            let a_here = self.setup.a(j + 1);
            for (i, dd) in per.iter().enumerate() {
                covered[i] |= hits[i].contains(&best);
                let f = dd
                    .cands
                    .iter()
                    .filter(|c| c.cover == best)
                    .map(|c| self.facet_value(&dd.ctx, 1.0, c, a_here))
                    .fold(f64::NEG_INFINITY, f64::max);
                chosen_best[i] = chosen_best[i].max(f);
            }
            chosen.push(best);
            if covered.iter().all(|c| *c) {
                break;
            }
        }
        (chosen, covered)
    }

    /// Whether a chosen slab dominates `dd` once every rank is fixed.
    fn covered_by(&self, dd: &DirData, chosen: &[u64]) -> bool {
        let rest = self.setup.a(chosen.len() as u64 + 1);
        let rank = |cover: u64| chosen.iter().position(|c| *c == cover);
        let vals: Vec<(Option<usize>, f64)> = dd
            .cands
            .iter()
            .map(|c| {
                let r = rank(c.cover);
                let a = r.map_or(rest, |r| self.setup.a(r as u64 + 1));
                (r, self.facet_value(&dd.ctx, 1.0, c, a))
            })
            .collect();
        let top = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        vals.iter().any(|(r, f)| match r {
            Some(r) => *f >= (1.0 - self.schedule.c(*r as u64 + 1) / 2.0) * top,
            None => false,
        })
    }

    /// Greedy choice of slabs that dominate the test directions, each at the
    /// weight it will receive. Coverage is checked on a four times denser
    /// set; directions that fail it join the test set and the greedy reruns.
    fn select_priority(&mut self, options: PriorityOptions) -> Result<()> {
        const ROUNDS: usize = 4;
        let d = self.dim();
        let count = match (options.directions, d) {
            (0, 2) => 720,
            (0, _) => 2000,
            (n, _) => n,
        };
        let dirs = direction_grid(d, count);
        let check: Vec<Vector> = if d == 2 {
            let n = 4 * count;
            (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                    Vector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect()
        } else {
            direction_grid(d, 4 * count + 1)
        };
        let data: Vec<DirData> = dirs
            .par_iter()
            .chain(check.par_iter())
            .map(|u| self.direction_data(u))
            .collect::<Result<_>>()?;
        let mut active: Vec<usize> = (0..dirs.len()).collect();
        let mut round = 0;
        let (chosen, covered, failing) = loop {
            let per: Vec<&DirData> = active.iter().map(|i| &data[*i]).collect();
            let (chosen, covered) = self.greedy(&per, options.max_slabs);
            let failing: Vec<usize> = (dirs.len()..data.len())
                .into_par_iter()
                .filter(|i| !active.contains(i) && !self.covered_by(&data[*i], &chosen))
                .collect();
            round += 1;
            if failing.is_empty() || round == ROUNDS {
                break (chosen, covered, failing);
            }
            active.extend(failing);
        };

        self.priority_sorted = chosen.iter().enumerate().map(|(r, c)| (*c, r as u64)).collect();
        self.priority_sorted.sort_unstable();
        let ranks: Vec<u64> = self.groups.iter().map(|gs| self.rank_of(gs.cover)).collect();
        for (gs, r) in self.groups.iter_mut().zip(ranks) {
            gs.rank = r;
        }
        self.priority_singles = chosen
            .iter()
            .enumerate()
            .filter_map(|(r, &c)| {
                let slab = self.cover.slab(&self.net, c);
                slab.single.map(|_| PrioritySingle {
                    cover: c,
                    rank: r as u64,
                    g: self.net.functional(&slab.g),
                })
            })
            .collect();
        self.report = PriorityReport {
            slabs: chosen,
            directions: data.len(),
            uncovered: covered.iter().filter(|c| !**c).count() + failing.len(),
        };
        Ok(())
    }
}

/// The gauge `mu_G` as a smooth function. The Hessian is a central
/// difference of the analytic gradient.
impl SmoothFunction for SmoothedNorm {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.gauge(x).unwrap_or(f64::NAN)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.gauge_gradient(x)
            .unwrap_or_else(|_| Vector::from_element(x.len(), f64::NAN))
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let d = x.len();
        let h = 1e-5 * x.norm().max(1.0);
        let mut m = Matrix::zeros(d, d);
        for j in 0..d {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let col = (self.gradient(&xp) - self.gradient(&xm)) / (2.0 * h);
            m.set_column(j, &col);
        }
        (&m + m.transpose()) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{BiorthogonalSystem, ConvexBody};
    use crate::nets::{slab_decompose, NetConfig};
    use crate::smooth::{BaseNorm, PerturbedNorm};
    use crate::smoothing::plane::PlaneNorm;
    use approx::assert_relative_eq;

    fn build(body: ConvexBody, eps: f64, lambda1: f64, a1: f64) -> SmoothedNorm {
        let d = body.dim();
        let system = BiorthogonalSystem::standard(d);
        let net = PolarNet::build(&NetConfig::new(body, system.clone(), eps).unwrap()).unwrap();
        let cover = slab_decompose(&net, eps);
        let norm = PerturbedNorm::new(Arc::new(BaseNorm::euclidean(d)), system, eps).unwrap();
        let setup = FacetSetup::new(Arc::new(norm), PlaneNorm::default(), eps, a1).unwrap();
        SmoothedNorm::new(net, cover, setup, Schedule::new(lambda1).unwrap(), PriorityOptions::default()).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    #[test]
    fn window_matches_brute_force() {
        for (a0, b, thr) in [(0.1, 0.3, 1.0), (0.1, -0.3, 1.0), (2.0, 0.0, 1.0), (0.0, 0.0, 1.0), (0.5, 0.25, 0.5)] {
            let brute: Vec<i64> = (-10..=10).filter(|l| a0 + b * *l as f64 > thr).collect();
            let w = column_window(-10, 10, a0, b, thr);
            for l in brute {
                let (lo, hi) = w.unwrap();
                assert!(lo <= l && l <= hi);
            }
        }
    }

    #[test]
    fn gauge_is_near_the_square_norm() {
        let s = build(ConvexBody::cube(2), 0.1, 0.5, 0.1);
        assert!(s.priority().slabs.len() <= 64);
        for u in direction_grid(2, 40) {
            let e = s.gauge_detail(&u).unwrap();
            let target = u.amax();
            assert!(e.mu >= e.f_q * (1.0 - 1e-12) && e.mu <= e.f_q / 0.5 * (1.0 + 1e-12));
            assert!((e.mu - target).abs() <= 0.5 * target, "{u} {} {target}", e.mu);
            assert_relative_eq!(s.g_value(&(&u / e.mu)).unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn gauge_is_homogeneous_and_even() {
        let s = build(ConvexBody::cross(2), 0.1, 0.5, 0.1);
        let x = v(&[0.3, -0.7]);
        let m = s.gauge(&x).unwrap();
        assert_relative_eq!(s.gauge(&(&x * 3.0)).unwrap(), 3.0 * m, max_relative = 1e-10);
        assert_relative_eq!(s.gauge(&-&x).unwrap(), m, max_relative = 1e-12);
        assert_eq!(s.gauge(&Vector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn gradients_match_differences() {
        let s = build(ConvexBody::cube(2), 0.1, 0.5, 0.1);
        for x in [v(&[0.9, 0.2]), v(&[-0.4, 0.8]), v(&[0.6, 0.6])] {
            let (m, g) = s.gauge_value_gradient(&x).unwrap();
            assert_relative_eq!(g.dot(&x), m, max_relative = 1e-8);
            let h = 1e-6;
            for i in 0..2 {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (s.gauge(&xp).unwrap() - s.gauge(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + g.norm()), "{x} {i}: {fd} vs {}", g[i]);
            }
            let z = &x / m;
            let (gv, gg) = s.g_value_gradient(&z).unwrap();
            let mut zp = z.clone();
            zp[0] += 1e-7;
            let mut zm = z.clone();
            zm[0] -= 1e-7;
            let fd = (s.g_value(&zp).unwrap() - s.g_value(&zm).unwrap()) / 2e-7;
            assert!((fd - gg[0]).abs() < 1e-4 * (1.0 + gg.norm()), "{gv} {fd} {}", gg[0]);
        }
    }

    #[test]
    fn ranks_are_a_permutation() {
        let s = build(ConvexBody::cube(2), 0.1, 0.5, 0.1);
        let n = s.num_slabs();
        let mut ranks: Vec<u64> = (0..n).map(|c| s.rank_of(c)).collect();
        ranks.sort_unstable();
        assert!(ranks.iter().enumerate().all(|(i, r)| *r == i as u64));
        let first = s.priority().slabs.first().copied().unwrap();
        assert_eq!(s.rank_of(first), 0);
        assert!(s.facet(first).unwrap().a == 0.1);
    }
}
