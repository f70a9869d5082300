//! Generalized graphs as cell-occupancy sets.
//!
//! Cluster points of `F_{τ(ε)}(x_ε)` are approximated by sampling shrinking
//! neighbourhoods of each base cell at a sequence of levels, occupying fiber
//! cells per level and intersecting the one-cell dilations across levels.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pullback::check_c_bounded;
use crate::{Grid, Net};

/// Occupied cells of a uniform grid of edge `h` anchored at the box's lower corner.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    pub cells: BTreeSet<Vec<i64>>,
}

impl ClusterSet {
    pub fn empty(bounds: Vec<(f64, f64)>, h: f64) -> Self {
        Self { bounds, h, cells: BTreeSet::new() }
    }

    pub fn shape(&self) -> Vec<i64> {
        self.bounds.iter().map(|&(lo, hi)| ((hi - lo) / self.h - 1e-9).ceil().max(1.0) as i64).collect()
    }

    pub fn cell_of(&self, p: &[f64]) -> Option<Vec<i64>> {
        let shape = self.shape();
        let mut idx = Vec::with_capacity(p.len());
        for (i, (&v, &(lo, hi))) in p.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return None;
            }
            idx.push((((v - lo) / self.h).floor() as i64).min(shape[i] - 1));
        }
        Some(idx)
    }

    pub fn center(&self, cell: &[i64]) -> Vec<f64> {
        cell.iter().zip(&self.bounds).map(|(&c, &(lo, _))| lo + (c as f64 + 0.5) * self.h).collect()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.cell_of(p).is_some_and(|c| self.cells.contains(&c))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Row-major flat index of a cell.
    pub fn flat_index(&self, cell: &[i64]) -> i64 {
        let shape = self.shape();
        cell.iter().zip(&shape).fold(0, |acc, (&c, &s)| acc * s + c)
    }

    /// Cells plus all neighbours at Chebyshev distance one, clipped to the box.
    pub fn dilate(&self) -> Self {
        let shape = self.shape();
        let mut out = BTreeSet::new();
        for c in &self.cells {
            for off in neighbour_offsets(c.len()) {
                let n: Vec<i64> = c.iter().zip(&off).map(|(a, b)| a + b).collect();
                if n.iter().zip(&shape).all(|(&v, &s)| v >= 0 && v < s) {
                    out.insert(n);
                }
            }
        }
        Self { bounds: self.bounds.clone(), h: self.h, cells: out }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self { bounds: self.bounds.clone(), h: self.h, cells: self.cells.intersection(&other.cells).cloned().collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { bounds: self.bounds.clone(), h: self.h, cells: self.cells.union(&other.cells).cloned().collect() }
    }

    /// Lower and upper edges of the occupied cells along `axis`.
    pub fn extent(&self, axis: usize) -> Option<(f64, f64)> {
        let lo = self.cells.iter().map(|c| c[axis]).min()?;
        let hi = self.cells.iter().map(|c| c[axis]).max()?;
        let b = self.bounds[axis].0;
        Some((b + lo as f64 * self.h, b + (hi + 1) as f64 * self.h))
    }

    /// One-dimensional Hausdorff distance between occupied cell centres and `[a, b]`.
    pub fn hausdorff_to_interval(&self, a: f64, b: f64) -> f64 {
        let centers: Vec<f64> = self.cells.iter().map(|c| self.center(c)[0]).collect();
        if centers.is_empty() {
            return f64::INFINITY;
        }
        let from_set = centers.iter().map(|&y| (a - y).max(y - b).max(0.0)).fold(0.0, f64::max);
        let dist = |t: f64| centers.iter().map(|&y| (y - t).abs()).fold(f64::INFINITY, f64::min);
        let steps = (((b - a) / self.h).ceil() as usize * 4).max(1);
        let from_interval = (0..=steps).map(|k| dist(a + (b - a) * k as f64 / steps as f64)).fold(0.0, f64::max);
        from_set.max(from_interval)
    }
}

pub(crate) fn neighbour_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (-1..=1).map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
    }
    out
}

/// Cells occupied at the finest (last) level that lie within one cell of the
/// occupancy of every earlier level.
pub fn cluster_points(levels: &[Vec<Vec<f64>>], bounds: &[(f64, f64)], h: f64) -> Result<ClusterSet> {
    if levels.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 levels, got {}", levels.len())));
    }
    if levels.iter().any(|l| l.is_empty()) {
        return Err(Error::EmptyDomain("empty sample set".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("cell edge must be positive, got {h}")));
    }
    let occupy = |pts: &Vec<Vec<f64>>| {
        let mut s = ClusterSet::empty(bounds.to_vec(), h);
        for p in pts {
            if let Some(c) = s.cell_of(p) {
                s.cells.insert(c);
            }
        }
        s
    };
    let (last, earlier) = levels.split_last().expect("at least three levels");
    let mut out = occupy(last);
    for l in earlier {
        out = out.intersect(&occupy(l).dilate());
    }
    Ok(out)
}

/// Reparameterisations `τ_a(ε) = ε^a`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ReparamFamily {
    pub exponents: Vec<f64>,
}

impl Default for ReparamFamily {
    fn default() -> Self {
        Self { exponents: vec![1.0, 2.0, 4.0, 8.0] }
    }
}

impl ReparamFamily {
    pub fn identity() -> Self {
        Self { exponents: vec![1.0] }
    }

    pub fn apply(&self, eps: f64) -> impl Iterator<Item = f64> + '_ {
        self.exponents.iter().map(move |&a| eps.powf(a))
    }
}

/// `k`-th point of the Halton sequence in `[0, 1)^dim`.
pub fn halton(k: usize, dim: usize) -> Vec<f64> {
    const BASES: [usize; 4] = [2, 3, 5, 7];
    (0..dim)
        .map(|d| {
            let b = BASES[d];
            let (mut i, mut f, mut r) = (k, 1.0, 0.0);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GraphParams {
    pub h1: f64,
    pub h2: f64,
    pub levels: usize,
    pub points_per_level: usize,
    pub reparams: ReparamFamily,
    /// Sample only the base point itself (`δ_j = 0`).
    pub freeze_delta: bool,
    /// Offset into the Halton sequence used for neighbourhood points.
    pub seed: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self { h1: 0.05, h2: 0.05, levels: 6, points_per_level: 64, reparams: ReparamFamily::default(), freeze_delta: false, seed: 0 }
    }
}

/// Uniform base cells over a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseGrid {
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl BaseGrid {
    pub fn new(bounds: Vec<(f64, f64)>, h: f64) -> Result<Self> {
        if !(h > 0.0) || bounds.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Err(Error::EmptyDomain("base box must have positive extent".into()));
        }
        let shape = bounds.iter().map(|&(lo, hi)| ((hi - lo) / h - 1e-9).ceil().max(1.0) as usize).collect();
        Ok(Self { bounds, h, shape })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        let mut out = vec![0; self.shape.len()];
        for i in (0..self.shape.len()).rev() {
            out[i] = rest % self.shape[i];
            rest /= self.shape[i];
        }
        out
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).iter().zip(&self.bounds).map(|(&c, &(lo, _))| lo + (c as f64 + 0.5) * self.h).collect()
    }

    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (i, (&v, &(lo, hi))) in p.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return None;
            }
            let c = (((v - lo) / self.h).floor() as usize).min(self.shape[i] - 1);
            flat = flat * self.shape[i] + c;
        }
        Some(flat)
    }

    /// Flat indices of cells whose centres satisfy `pred`.
    pub fn select(&self, pred: impl Fn(&[f64]) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(&self.center(i))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GraphEstimate {
    pub base: BaseGrid,
    pub fiber_bounds: Vec<(f64, f64)>,
    pub h2: f64,
    pub levels: usize,
    pub fibers: Vec<ClusterSet>,
}

/// JSON layout `{box, resolutions, cells: [[base_idx, [fiber_idx...]]]}`.
#[derive(Debug, Clone, Serialize)]
pub struct GraphDocument {
    #[serde(rename = "box")]
    pub bounds: GraphBoxes,
    pub resolutions: [f64; 2],
    pub levels: usize,
    pub cells: Vec<(usize, Vec<i64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphBoxes {
    pub base: Vec<(f64, f64)>,
    pub fiber: Vec<(f64, f64)>,
}

impl GraphEstimate {
    pub fn fiber(&self, base_idx: usize) -> &ClusterSet {
        &self.fibers[base_idx]
    }

    pub fn occupied_count(&self) -> usize {
        self.fibers.iter().map(|f| f.len()).sum()
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            bounds: GraphBoxes { base: self.base.bounds.clone(), fiber: self.fiber_bounds.clone() },
            resolutions: [self.base.h, self.h2],
            levels: self.levels,
            cells: self
                .fibers
                .iter()
                .enumerate()
                .filter(|(_, f)| !f.is_empty())
                .map(|(i, f)| (i, f.cells.iter().map(|c| f.flat_index(c)).collect()))
                .collect(),
        }
    }

    /// One row per occupied (base, fiber) pair: base centre then fiber centre.
    pub fn to_csv(&self) -> String {
        let nb = self.base.bounds.len();
        let nf = self.fiber_bounds.len();
        let mut head: Vec<String> = Vec::new();
        if nb == 1 && nf == 1 {
            head.push("x_center".into());
            head.push("y_center".into());
        } else {
            head.extend((0..nb).map(|i| format!("x{i}_center")));
            head.extend((0..nf).map(|i| format!("y{i}_center")));
        }
        let mut out = head.join(",") + "\n";
        for (i, f) in self.fibers.iter().enumerate() {
            let x = self.base.center(i);
            for c in &f.cells {
                let row: Vec<String> = x.iter().chain(f.center(c).iter()).map(|v| fmt17(*v)).collect();
                out += &row.join(",");
                out.push('\n');
            }
        }
        out
    }
}

/// Float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Base point plus low-discrepancy points in the box of radius `δ_j` around it.
fn level_points(x0: &[f64], j: usize, grid: &Grid, params: &GraphParams, domain: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let eps_j = grid.values()[j - 1];
    let delta = params.h1 * 0.5f64.powi(j as i32) + eps_j;
    let mut pts = vec![x0.to_vec()];
    if !params.freeze_delta {
        let n = x0.len();
        pts.extend(
            (1..=params.points_per_level)
                .map(|k| halton(k + params.seed, n).iter().zip(x0).map(|(u, c)| c + delta * (2.0 * u - 1.0)).collect::<Vec<f64>>())
                .filter(|p| p.iter().zip(domain).all(|(v, &(lo, hi))| *v >= lo && *v <= hi)),
        );
    }
    pts
}

/// Images `F_{τ(ε)}(x′)` for the points drawn at levels `j..=levels` and `ε ≤ ε_k`
/// at each contributing level `k`, so that deeper levels are nested in shallower ones.
fn level_samples(f: &Net, x0: &[f64], j: usize, grid: &Grid, params: &GraphParams, domain: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in j..=params.levels {
        let eps_k = grid.values()[k - 1];
        let pts = level_points(x0, k, grid, params, domain);
        for &e in grid.values().iter().filter(|&&e| e <= eps_k) {
            for t in params.reparams.apply(e) {
                for x in &pts {
                    out.push(f.eval(t, x));
                }
            }
        }
    }
    out
}

/// Cluster-set estimate of the generalized graph over the cells of `base`.
///
/// `fiber_bounds` defaults to the c-boundedness hull padded by two fiber cells.
pub fn estimate_graph(
    f: &Net,
    base: &BaseGrid,
    fiber_bounds: Option<Vec<(f64, f64)>>,
    grid: &Grid,
    params: &GraphParams,
) -> Result<GraphEstimate> {
    if f.dim_in() != base.bounds.len() {
        return Err(Error::DimensionMismatch(format!("net has {} inputs, base box {}", f.dim_in(), base.bounds.len())));
    }
    if params.levels < 3 || params.levels > grid.len() {
        return Err(Error::Precondition(format!("levels must lie in 3..={}", grid.len())));
    }
    let witness = check_c_bounded(f, &base.bounds, grid);
    if !witness.bounded {
        return Err(Error::Precondition("map is not c-bounded on the base box".into()));
    }
    let fb = fiber_bounds.unwrap_or_else(|| {
        witness.k_prime.iter().map(|&(lo, hi)| (lo - 2.0 * params.h2, hi + 2.0 * params.h2)).collect()
    });
    let cells: Vec<usize> = (0..base.len()).collect();
    let fibers = estimate_fibers(f, base, &cells, &fb, grid, params)?;
    Ok(GraphEstimate { base: base.clone(), fiber_bounds: fb, h2: params.h2, levels: params.levels, fibers })
}

/// Cluster sets over selected base cells, without the c-boundedness screen.
pub fn estimate_fibers(
    f: &Net,
    base: &BaseGrid,
    cells: &[usize],
    fiber_bounds: &[(f64, f64)],
    grid: &Grid,
    params: &GraphParams,
) -> Result<Vec<ClusterSet>> {
    if params.levels < 3 || params.levels > grid.len() {
        return Err(Error::Precondition(format!("levels must lie in 3..={}", grid.len())));
    }
    cells
        .par_iter()
        .map(|&i| {
            let x0 = base.center(i);
            let levels: Vec<Vec<Vec<f64>>> =
                (1..=params.levels).map(|j| level_samples(f, &x0, j, grid, params, &base.bounds)).collect();
            cluster_points(&levels, fiber_bounds, params.h2)
        })
        .collect()
}

/// Union of the fibers over the given base cells.
pub fn project_fiber(g: &GraphEstimate, base_cells: &[usize]) -> Result<ClusterSet> {
    let mut out = ClusterSet::empty(g.fiber_bounds.clone(), g.h2);
    for &i in base_cells {
        let f = g.fibers.get(i).ok_or_else(|| Error::InvalidArgument(format!("base cell {i} outside the grid")))?;
        out = out.union(f);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquicontinuityReport {
    pub equicontinuous: bool,
    /// `(γ, largest probe δ achieving it)`.
    pub modulus: Vec<(f64, Option<f64>)>,
}

/// Probe `sup_{ε, |x − x₀| < δ} |F_ε(x) − F_ε(x₀)| < γ` for each `γ`.
pub fn is_equicontinuous_at(f: &Net, x0: &[f64], radii: &[f64], gammas: &[f64], grid: &Grid) -> Result<EquicontinuityReport> {
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Precondition("probe radii must be positive and descending".into()));
    }
    const PROBES: i32 = 32;
    let n = x0.len();
    let oscillation = |delta: f64| -> f64 {
        grid.values()
            .par_iter()
            .map(|&e| {
                let base = f.value(e, x0);
                let mut worst = 0.0f64;
                let steps: Vec<f64> = (-PROBES..=PROBES).map(|k| k as f64 / (PROBES + 1) as f64).collect();
                let mut visit = |x: &[f64]| worst = worst.max((f.value(e, x) - base).abs());
                if n == 1 {
                    for &s in &steps {
                        visit(&[x0[0] + delta * s]);
                    }
                } else {
                    for k in 1..=256 {
                        let u = halton(k, n);
                        let x: Vec<f64> = x0.iter().zip(&u).map(|(c, v)| c + delta * (2.0 * v - 1.0) * 0.999).collect();
                        visit(&x);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    };
    let sups: Vec<f64> = radii.iter().map(|&r| oscillation(r)).collect();
    let modulus: Vec<(f64, Option<f64>)> = gammas
        .iter()
        .map(|&g| (g, radii.iter().zip(&sups).find(|(_, &s)| s < g).map(|(&r, _)| r)))
        .collect();
    Ok(EquicontinuityReport { equicontinuous: modulus.iter().all(|m| m.1.is_some()), modulus })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    pub holds: bool,
    pub neighbourhood: Option<Vec<(f64, f64)>>,
    pub eps_threshold: Option<f64>,
}

fn box_samples(b: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let per_axis = if b.len() == 1 { 257 } else { 65 };
    crate::nets::box_nodes(b, per_axis)
}

/// Largest `ε′` on the grid such that every sampled `F_ε(X)` with `ε ≤ ε′` lies in the open box `y`.
fn tail_threshold(f: &Net, x: &[(f64, f64)], y: &[(f64, f64)], grid: &Grid, min_tail: usize) -> Option<f64> {
    let pts = box_samples(x);
    let ok: Vec<bool> = grid
        .values()
        .par_iter()
        .map(|&e| pts.iter().all(|p| f.eval(e, p).iter().zip(y).all(|(&v, &(lo, hi))| v > lo && v < hi)))
        .collect();
    let n = ok.len();
    let first_good_tail = (0..n).rev().take_while(|&i| ok[i]).last()?;
    (n - first_good_tail >= min_tail).then(|| grid.values()[first_good_tail])
}

/// Search neighbourhoods `X ⊇ X₀` (largest first) with `F_ε(X) ⊆ Y` on an ε-tail.
pub fn check_containment_lemma(
    f: &Net,
    x0: &[(f64, f64)],
    domain: &[(f64, f64)],
    y: &[(f64, f64)],
    grid: &Grid,
) -> ContainmentReport {
    let mut candidates = vec![domain.to_vec()];
    for r in [0.5, 0.25, 0.125, 0.0625, 0.0] {
        candidates.push(
            x0.iter().zip(domain).map(|(&(a, b), &(lo, hi))| ((a - r).max(lo), (b + r).min(hi))).collect(),
        );
    }
    for x in candidates {
        if let Some(t) = tail_threshold(f, &x, y, grid, 4) {
            return ContainmentReport { holds: true, neighbourhood: Some(x), eps_threshold: Some(t) };
        }
    }
    ContainmentReport { holds: false, neighbourhood: None, eps_threshold: None }
}

/// Complement-openness probe: `F_ε(X₀) ∩ Y₀ = ∅` on an ε-tail, with `X₀` the
/// finest-level neighbourhood of the base cell and `Y₀` the closed fiber cell.
pub fn complement_is_open(f: &Net, g: &GraphEstimate, base_idx: usize, fiber_cell: &[i64], grid: &Grid, params: &GraphParams) -> bool {
    let x0 = g.base.center(base_idx);
    let eps_l = grid.values()[g.levels - 1];
    let delta = params.h1 * 0.5f64.powi(g.levels as i32) + eps_l;
    let fib = &g.fibers[base_idx];
    let pts: Vec<Vec<f64>> = (1..=params.points_per_level)
        .map(|k| halton(k + params.seed, x0.len()).iter().zip(&x0).map(|(u, c)| c + delta * (2.0 * u - 1.0)).collect())
        .collect();
    let hits: Vec<bool> = grid
        .values()
        .iter()
        .map(|&e| {
            params.reparams.apply(e).any(|t| {
                pts.iter().any(|p| fib.cell_of(&f.eval(t, p)).is_some_and(|c| c == fiber_cell))
            })
        })
        .collect();
    let n = hits.len();
    let clean = hits.iter().rev().take_while(|&&h| !h).count();
    clean >= 4.min(n)
}
