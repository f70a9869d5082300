//! Pullbacks by c-bounded generalized maps and the transformation of wavefront sets.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{estimate_fibers, estimate_graph, BaseGrid, ClusterSet, GraphEstimate, GraphParams};
use crate::microlocal::{wavefront, ConeSet, DirectionGrid, WavefrontParams};
use crate::nets::{
    box_nodes, classify_net, compose, estimate_growth_exponent, multi_indices, AsymptoticClass, AsymptoticTag,
    ClassifyParams, Component, GeneralizedNumberNet,
};
use crate::{Error, Grid, Net, Result};

/// Outcome of [`check_c_bounded`]: hull `K′` of the images over the ε-tail `ε ≤ ε₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CBoundedWitness {
    pub bounded: bool,
    pub k_prime: Vec<(f64, f64)>,
    pub eps0: f64,
}

/// Per-ε bounding boxes of `F_ε(K)` on a sampling grid; bounded iff the image
/// radius shows no growth (fitted exponent below `0.05`) on the tail half.
pub fn check_c_bounded(f: &Net, k: &[(f64, f64)], grid: &Grid) -> CBoundedWitness {
    let per_axis = if k.len() == 1 { 513 } else { 65 };
    let pts = box_nodes(k, per_axis);
    let m = f.dim_out();
    let boxes: Vec<Vec<(f64, f64)>> = grid
        .values()
        .par_iter()
        .map(|&e| {
            let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
            for p in &pts {
                for (bi, v) in b.iter_mut().zip(f.eval(e, p)) {
                    bi.0 = bi.0.min(v);
                    bi.1 = bi.1.max(v);
                }
            }
            b
        })
        .collect();
    let n = grid.len();
    let tail = n - n / 2;
    let eps0 = grid.values()[tail];
    let mut k_prime = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
    for b in &boxes[tail..] {
        for (kp, bi) in k_prime.iter_mut().zip(b) {
            kp.0 = kp.0.min(bi.0);
            kp.1 = kp.1.max(bi.1);
        }
    }
    let radius: Vec<f64> = boxes.iter().map(|b| b.iter().map(|&(lo, hi)| lo.abs().max(hi.abs())).fold(0.0, f64::max)).collect();
    let finite = radius.iter().all(|r| r.is_finite());
    let bounded = finite
        && GeneralizedNumberNet::from_values(grid, radius)
            .ok()
            .and_then(|net| estimate_growth_exponent(&net, 0.5).ok())
            .is_some_and(|fit| fit.exponent < 0.05);
    CBoundedWitness { bounded, k_prime, eps0 }
}

/// A generalized map `Ω₁ → Ω₂` together with its c-boundedness witness on `domain`.
#[derive(Clone, Debug)]
pub struct CBoundedMap {
    pub net: Net,
    pub domain: Vec<(f64, f64)>,
    pub witness: CBoundedWitness,
}

impl CBoundedMap {
    pub fn new(net: Net, domain: Vec<(f64, f64)>, grid: &Grid) -> Result<Self> {
        if domain.len() != net.dim_in() {
            return Err(Error::DimensionMismatch(format!("domain box in {} dims, map has {} inputs", domain.len(), net.dim_in())));
        }
        if net.deriv_order() < 1 {
            return Err(Error::OrderExceeded { requested: 1, available: net.deriv_order() });
        }
        let witness = check_c_bounded(&net, &domain, grid);
        if !witness.bounded {
            return Err(Error::Precondition("map is not c-bounded on its domain".into()));
        }
        Ok(Self { net, domain, witness })
    }

    /// Trust an externally established witness (e.g. analytic flow bounds).
    pub fn with_witness(net: Net, domain: Vec<(f64, f64)>, witness: CBoundedWitness) -> Self {
        Self { net, domain, witness }
    }

    pub fn dim_in(&self) -> usize {
        self.net.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.net.dim_out()
    }

    /// `J[i][j] = ∂_j F_i`.
    pub fn jacobian(&self, eps: f64, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim_in();
        (0..self.dim_out())
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut a = vec![0; n];
                        a[j] = 1;
                        self.net.partial(i, eps, x, &a)
                    })
                    .collect()
            })
            .collect()
    }

    /// `ᵀdf_ε(x) η`.
    pub fn transpose_apply(&self, eps: f64, x: &[f64], eta: &[f64]) -> Vec<f64> {
        transpose_apply(&self.jacobian(eps, x), eta)
    }
}

fn transpose_apply(j: &[Vec<f64>], eta: &[f64]) -> Vec<f64> {
    let n = j.first().map_or(0, |r| r.len());
    (0..n).map(|c| j.iter().zip(eta).map(|(row, e)| row[c] * e).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `f*u = (u_ε ∘ f_ε)_ε`; `u_domain` is where `u` is defined, checked against `K′`.
pub fn pullback(f: &CBoundedMap, u: &Net, u_domain: Option<&[(f64, f64)]>) -> Result<Net> {
    if u.dim_in() != f.dim_out() {
        return Err(Error::DimensionMismatch(format!("map lands in ℝ^{}, u lives on ℝ^{}", f.dim_out(), u.dim_in())));
    }
    if let Some(dom) = u_domain {
        let kp = &f.witness.k_prime;
        if kp.iter().zip(dom).any(|(&(a, b), &(lo, hi))| a < lo || b > hi) {
            return Err(Error::DomainEscape { x: kp.iter().map(|&(a, b)| if a.abs() > b.abs() { a } else { b }).collect() });
        }
    }
    compose(u, &f.net)
}

/// `M_ε(x, η) = ᵀdf_ε(x) η / |ᵀdf_ε(x) η|`.
pub fn transport_direction(f: &CBoundedMap, eps: f64, x: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    if eta.len() != f.dim_out() || x.len() != f.dim_in() {
        return Err(Error::DimensionMismatch("transport needs x ∈ Ω₁ and η ∈ S^{m−1}".into()));
    }
    let v = f.transpose_apply(eps, x, eta);
    let n = norm(&v);
    if !(n > 1e-300) {
        return Err(Error::DegenerateDirection { norm: n });
    }
    Ok(v.iter().map(|a| a / n).collect())
}

/// Neighbourhood sampling and thresholds for the `D_f` test.
#[derive(Debug, Clone)]
pub struct DfParams {
    pub radius_x: f64,
    /// Half-width of the direction arc `V` in radians.
    pub radius_eta: f64,
    pub samples_x: usize,
    pub samples_eta: usize,
    pub grid_slack: f64,
    pub grid: Grid,
    pub classify: ClassifyParams<f64>,
}

impl Default for DfParams {
    fn default() -> Self {
        Self {
            radius_x: 0.0625,
            radius_eta: 2.0 * PI / 64.0,
            samples_x: 5,
            samples_eta: 5,
            grid_slack: 1.25,
            grid: Grid::default(),
            classify: ClassifyParams::default(),
        }
    }
}

/// Bounded or slowly growing: the admissible scalings for `σ_ε`.
pub fn is_slow_growth(c: &AsymptoticClass<f64>) -> bool {
    match c.tag {
        AsymptoticTag::Negligible | AsymptoticTag::SlowScale => true,
        AsymptoticTag::Moderate => c.exponent <= 0.0,
        AsymptoticTag::Undetermined => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DfVerdict {
    InDf,
    NotInDf,
}

#[derive(Debug, Clone, Serialize)]
pub struct DfWitness {
    pub verdict: DfVerdict,
    /// `σ_ε = 1 / inf_{X×V} |ᵀdf_ε η′|` per grid ε.
    pub sigma: Vec<f64>,
    pub sigma_class: AsymptoticClass<f64>,
    /// `σ_ε sup_{X×V^⊥} |ᵀdf_ε η|` per grid ε (0 when `V^⊥` is empty).
    pub perp_bound: Vec<f64>,
}

fn arc(eta: &[f64], radius: f64, samples: usize) -> Vec<Vec<f64>> {
    if eta.len() == 1 {
        return vec![eta.to_vec()];
    }
    let a0 = eta[1].atan2(eta[0]);
    let k = samples.max(1);
    (0..k)
        .map(|i| {
            let t = if k == 1 { 0.0 } else { -radius + 2.0 * radius * i as f64 / (k - 1) as f64 };
            vec![(a0 + t).cos(), (a0 + t).sin()]
        })
        .collect()
}

/// Does `(x, η)` lie in `D_f`? The scaling is the canonical `1/inf`.
pub fn is_in_df(f: &CBoundedMap, x: &[f64], eta: &[f64], params: &DfParams) -> Result<DfWitness> {
    if !(params.radius_x > 0.0 && params.radius_eta > 0.0) {
        return Err(Error::InvalidArgument("neighbourhood radii must be positive".into()));
    }
    if eta.len() != f.dim_out() || x.len() != f.dim_in() || eta.len() > 2 {
        return Err(Error::DimensionMismatch("D_f is tested for x ∈ Ω₁, η ∈ S^{m−1} with m ≤ 2".into()));
    }
    let xs = box_nodes(&x.iter().map(|&c| (c - params.radius_x, c + params.radius_x)).collect::<Vec<_>>(), params.samples_x);
    let vs = arc(eta, params.radius_eta, params.samples_eta);
    let perps: Vec<Vec<f64>> =
        if eta.len() == 2 { vs.iter().flat_map(|v| [vec![-v[1], v[0]], vec![v[1], -v[0]]]).collect() } else { Vec::new() };
    let rows: Vec<(f64, f64)> = params
        .grid
        .values()
        .iter()
        .map(|&e| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for p in &xs {
                let j = f.jacobian(e, p);
                for v in &vs {
                    lo = lo.min(norm(&transpose_apply(&j, v)));
                }
                for v in &perps {
                    hi = hi.max(norm(&transpose_apply(&j, v)));
                }
            }
            (lo, hi)
        })
        .collect();
    let sigma: Vec<f64> = rows.iter().map(|&(lo, _)| if lo > 1e-300 { 1.0 / lo } else { f64::INFINITY }).collect();
    let perp_bound: Vec<f64> = rows.iter().zip(&sigma).map(|(&(_, hi), &s)| if hi == 0.0 { 0.0 } else { s * hi }).collect();
    let sigma_class = if sigma.iter().all(|s| s.is_finite()) {
        classify_net(&GeneralizedNumberNet::from_values(&params.grid, sigma.clone())?, &params.classify)?
    } else {
        AsymptoticClass { tag: AsymptoticTag::Undetermined, exponent: f64::INFINITY, residual: f64::INFINITY }
    };
    let n = params.grid.len();
    let tail = &perp_bound[n - n / 2..];
    let ok = is_slow_growth(&sigma_class) && tail.iter().all(|&b| b <= params.grid_slack);
    Ok(DfWitness { verdict: if ok { DfVerdict::InDf } else { DfVerdict::NotInDf }, sigma, sigma_class, perp_bound })
}

/// `D_f` verdicts over base cells × directions of `S^{m−1}`.
#[derive(Debug, Clone, Serialize)]
pub struct DfEstimate {
    pub base: BaseGrid,
    pub dirs: DirectionGrid,
    /// `in_df[cell][dir]`.
    pub in_df: Vec<Vec<bool>>,
}

impl DfEstimate {
    pub fn contains(&self, cell: usize, dir: usize) -> bool {
        self.in_df[cell][dir]
    }

    pub fn is_empty(&self) -> bool {
        self.in_df.iter().all(|r| r.iter().all(|&b| !b))
    }

    pub fn complement(&self) -> ConeSet {
        let mut c = ConeSet::empty(self.base.clone(), self.dirs.clone());
        for (i, row) in self.in_df.iter().enumerate() {
            for (d, &b) in row.iter().enumerate() {
                if !b {
                    c.pairs.insert((i, d));
                }
            }
        }
        c
    }
}

pub fn estimate_df(f: &CBoundedMap, base: &BaseGrid, dirs: &DirectionGrid, params: &DfParams) -> Result<DfEstimate> {
    if dirs.dim != f.dim_out() || base.bounds.len() != f.dim_in() {
        return Err(Error::DimensionMismatch("D_f grid does not match the map".into()));
    }
    let in_df = (0..base.len())
        .into_par_iter()
        .map(|c| {
            let x = base.center(c);
            (0..dirs.len())
                .map(|d| Ok(is_in_df(f, &x, &dirs.direction(d), params)?.verdict == DfVerdict::InDf))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DfEstimate { base: base.clone(), dirs: dirs.clone(), in_df })
}

fn sup_net(grid: &Grid, f: impl Fn(f64) -> f64 + Sync) -> Result<GeneralizedNumberNet<f64>> {
    let vals: Vec<f64> = grid.values().par_iter().map(|&e| f(e)).collect();
    GeneralizedNumberNet::from_values(grid, vals)
}

fn cell_box(base: &BaseGrid, cell: usize, pad: f64) -> Vec<(f64, f64)> {
    base.center(cell).iter().map(|&c| (c - 0.5 * base.h - pad, c + 0.5 * base.h + pad)).collect()
}

/// Complement of `S_f`: cells where some `∂^α f`, `|α| ≤ max_order`, is not slowly growing
/// on the cell padded by half a cell.
pub fn slow_scale_support(
    f: &CBoundedMap,
    base: &BaseGrid,
    max_order: usize,
    grid: &Grid,
    classify: &ClassifyParams<f64>,
) -> Result<Vec<usize>> {
    if max_order > f.net.deriv_order() {
        return Err(Error::OrderExceeded { requested: max_order, available: f.net.deriv_order() });
    }
    let alphas = multi_indices(f.dim_in(), max_order);
    let per_axis = if f.dim_in() == 1 { 33 } else { 9 };
    (0..base.len())
        .filter_map(|c| {
            let pts = box_nodes(&cell_box(base, c, 0.5 * base.h), per_axis);
            let bad = alphas.iter().try_fold(false, |bad, a| {
                if bad {
                    return Ok(true);
                }
                for comp in 0..f.dim_out() {
                    let net = sup_net(grid, |e| pts.iter().map(|p| f.net.partial(comp, e, p, a).abs()).fold(0.0, f64::max))?;
                    if !is_slow_growth(&classify_net(&net, classify)?) {
                        return Ok(true);
                    }
                }
                Ok(false)
            });
            match bad {
                Ok(true) => Some(Ok(c)),
                Ok(false) => None,
                Err(e) => Some(Err(e)),
            }
        })
        .collect()
}

/// `sup |u_ε − k|` over a box, sampled on the box ∩ support hint at a
/// resolution of four nodes per feature.
fn sup_deviation(u: &Net, eps: f64, bx: &[(f64, f64)], k: f64) -> f64 {
    let mut region = bx.to_vec();
    if let Some(h) = u.support_hint(eps) {
        for (r, s) in region.iter_mut().zip(h) {
            r.0 = r.0.max(s.0);
            r.1 = r.1.min(s.1);
        }
        if region.iter().any(|r| r.0 > r.1) {
            return k.abs();
        }
    }
    let scale = u.feature_scale(eps);
    let cap = if bx.len() == 1 { 4097 } else { 257 };
    let axes: Vec<Vec<f64>> = region
        .iter()
        .zip(&scale)
        .map(|(&(a, b), &s)| {
            let m = (((b - a) / s * 4.0).ceil() as usize + 1).clamp(3, cap);
            (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
        })
        .collect();
    let mut best = if region == bx { 0.0 } else { k.abs() };
    let mut idx = vec![0usize; axes.len()];
    loop {
        let p: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        best = f64::max(best, (u.value(eps, &p) - k).abs());
        let mut d = 0;
        while d < idx.len() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == idx.len() {
            return best;
        }
    }
}

/// Values of `u` on fiber cells where it is locally constant and ε-stable at the finest four levels.
pub fn plateau_values(u: &Net, cells: &ClusterSet, grid: &Grid) -> Vec<f64> {
    let tail: Vec<f64> = grid.values()[grid.len().saturating_sub(4)..].to_vec();
    let mut out: BTreeSet<i64> = BTreeSet::new();
    for cell in &cells.cells {
        let c = cells.center(cell);
        let pts = box_nodes(&c.iter().map(|&v| (v - 0.5 * cells.h, v + 0.5 * cells.h)).collect::<Vec<_>>(), 3);
        let v0 = u.value(tail[0], &c);
        let flat = tail.iter().all(|&e| pts.iter().all(|p| (u.value(e, p) - v0).abs() <= 1e-9 * v0.abs().max(1.0)));
        if flat && v0.is_finite() {
            out.insert((v0 * 1e9).round() as i64);
        }
    }
    out.into_iter().map(|q| q as f64 * 1e-9).collect()
}

/// `K_f(u) ≈ ⋂_k π₁(C_f ∩ Ω₁ × supp(u − k))` over the candidate constants
/// (`0` plus plateau values when `candidates` is `None`).
pub fn k_support(
    g: &GraphEstimate,
    u: &Net,
    candidates: Option<Vec<f64>>,
    grid: &Grid,
    classify: &ClassifyParams<f64>,
) -> Result<Vec<usize>> {
    if u.dim_in() != g.fiber_bounds.len() {
        return Err(Error::DimensionMismatch("u must live on the fiber space of the graph".into()));
    }
    let mut occupied = ClusterSet::empty(g.fiber_bounds.clone(), g.h2);
    for f in &g.fibers {
        occupied = occupied.union(f);
    }
    let ks = candidates.unwrap_or_else(|| {
        let mut v = vec![0.0];
        v.extend(plateau_values(u, &occupied, grid).into_iter().filter(|&p| p != 0.0));
        v
    });
    let mut keep: Option<BTreeSet<usize>> = None;
    for k in ks {
        let cells: Vec<&Vec<i64>> = occupied.cells.iter().collect();
        let flags = cells
            .par_iter()
            .map(|cell| {
                let c = occupied.center(cell);
                let bx: Vec<(f64, f64)> = c.iter().map(|&v| (v - 0.5 * g.h2, v + 0.5 * g.h2)).collect();
                let net = sup_net(grid, |e| sup_deviation(u, e, &bx, k))?;
                Ok(classify_net(&net, classify)?.tag != AsymptoticTag::Negligible)
            })
            .collect::<Result<Vec<bool>>>()?;
        let mut supp = ClusterSet::empty(g.fiber_bounds.clone(), g.h2);
        supp.cells = cells.iter().zip(&flags).filter(|(_, &f)| f).map(|(c, _)| (*c).clone()).collect();
        let supp = supp.dilate();
        let here: BTreeSet<usize> =
            (0..g.base.len()).filter(|&i| !g.fibers[i].intersect(&supp).is_empty()).collect();
        keep = Some(match keep {
            None => here,
            Some(prev) => prev.intersection(&here).copied().collect(),
        });
    }
    Ok(keep.unwrap_or_default().into_iter().collect())
}

/// Controls for the `Φ_f` graph.
#[derive(Debug, Clone)]
pub struct ConeParams {
    pub graph: GraphParams,
    pub grid: Grid,
    pub df: DfParams,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self {
            graph: GraphParams { points_per_level: 32, ..GraphParams::default() },
            grid: Grid::dyadic(1, 16).expect("static grid"),
            df: DfParams::default(),
        }
    }
}

/// `f*Γ` with the sets that exempt unfavourable positions.
#[derive(Debug, Clone, Serialize)]
pub struct PullbackCone {
    /// `f*Γ` before closure.
    pub raw: ConeSet,
    /// `raw` dilated by one neighbour.
    pub cone: ConeSet,
    /// `N_f` over `Ω₂ × S^{m−1}`, closed.
    pub normal_bundle: ConeSet,
    /// `U_f(Γ)` base cells, closed.
    pub unfavourable: Vec<usize>,
    /// Occupied `(x cell, η dir, y cell, ξ dir)` witnesses of `raw`.
    pub provenance: Vec<(usize, usize, usize, usize)>,
    pub df_empty: bool,
}

/// `Φ_f(x, a) = (f_ε(x), M_ε(x, η(a)))`, with `a` the angle measured in cells of side `h`.
fn phi_net(f: &CBoundedMap, dirs: &DirectionGrid, h: f64) -> Net {
    let n = f.dim_in();
    let step = dirs.step();
    let fm = f.clone();
    let eval = Arc::new(move |e: f64, z: &[f64]| -> Vec<f64> {
        let (x, a) = z.split_at(n);
        let th = a[0] / h * step;
        let mut out = fm.net.eval(e, x);
        let v = fm.transpose_apply(e, x, &[th.cos(), th.sin()]);
        let r = norm(&v);
        out.extend(v.iter().map(|c| if r > 1e-300 { c / r } else { f64::NAN }));
        out
    });
    let dim_out = f.dim_out() + n;
    let comps: Vec<Component<f64>> = (0..dim_out)
        .map(|i| {
            let ev = eval.clone();
            Arc::new(move |e: f64, z: &[f64], _: &[usize]| ev(e, z)[i]) as Component<f64>
        })
        .collect();
    Net::vector(n + 1, 0, comps)
}

/// Transform `Γ ⊆ Ω₂ × S¹` into `f*Γ ⊆ Ω₁ × S¹` through the graph of `Φ_f`,
/// together with `N_f` and `U_f(Γ)`.
pub fn pullback_cone(
    f: &CBoundedMap,
    gamma: &ConeSet,
    base: &BaseGrid,
    out_dirs: &DirectionGrid,
    params: &ConeParams,
) -> Result<PullbackCone> {
    if f.dim_in() != 2 || f.dim_out() != 2 || gamma.dirs.dim != 2 || out_dirs.dim != 2 {
        return Err(Error::InvalidArgument("pullback cones are computed for maps ℝ² → ℝ²".into()));
    }
    let df = estimate_df(f, base, &gamma.dirs, &params.df)?;
    let cf = estimate_graph(&f.net, base, None, &params.grid, &params.graph)?;
    pullback_cone_with(f, gamma, &df, &cf, out_dirs, params)
}

/// [`pullback_cone`] from a precomputed `D_f` estimate and graph `C_f` on the same base grid.
pub fn pullback_cone_with(
    f: &CBoundedMap,
    gamma: &ConeSet,
    df: &DfEstimate,
    cf: &GraphEstimate,
    out_dirs: &DirectionGrid,
    params: &ConeParams,
) -> Result<PullbackCone> {
    let base = &df.base;
    if cf.base != *base || df.dirs != gamma.dirs {
        return Err(Error::InvalidArgument("D_f, C_f and Γ grids disagree".into()));
    }
    let gdirs = &gamma.dirs;
    // Γ-cells met by each fiber of C_f
    let hits: Vec<BTreeSet<usize>> = cf
        .fibers
        .iter()
        .map(|fib| fib.cells.iter().filter_map(|c| gamma.base.index_of(&fib.center(c))).collect())
        .collect();
    let mut normal = ConeSet::empty(gamma.base.clone(), gdirs.clone());
    let mut unfav = BTreeSet::new();
    let mut wanted: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for (x, ys) in hits.iter().enumerate() {
        for &y in ys {
            for d in 0..gdirs.len() {
                if !df.contains(x, d) {
                    normal.insert(y, d)?;
                    if gamma.contains(y, d) {
                        unfav.insert(x);
                    }
                } else if gamma.contains(y, d) {
                    wanted.entry((x, d)).or_default().insert(y);
                }
            }
        }
    }
    let mut raw = ConeSet::empty(base.clone(), out_dirs.clone());
    let mut provenance = Vec::new();
    let df_empty = df.is_empty();
    if df_empty {
        for c in 0..base.len() {
            for d in 0..out_dirs.len() {
                raw.insert(c, d)?;
            }
        }
    } else if !wanted.is_empty() {
        let h = base.h;
        let mut bounds = base.bounds.clone();
        bounds.push((-0.5 * h, (gdirs.len() as f64 - 0.5) * h));
        let phi_base = BaseGrid::new(bounds, h)?;
        let phi = phi_net(f, gdirs, h);
        let cells: Vec<usize> = wanted.keys().map(|&(x, d)| x * gdirs.len() + d).collect();
        let pad = 2.0 * params.graph.h2;
        let mut fb: Vec<(f64, f64)> = f.witness.k_prime.iter().map(|&(a, b)| (a - pad, b + pad)).collect();
        fb.extend([(-1.0 - pad, 1.0 + pad), (-1.0 - pad, 1.0 + pad)]);
        let fibers = estimate_fibers(&phi, &phi_base, &cells, &fb, &params.grid, &params.graph)?;
        for (((x, d), _), fib) in wanted.iter().zip(&fibers) {
            for cell in &fib.cells {
                let z = fib.center(cell);
                let Some(y) = gamma.base.index_of(&z[..2]) else { continue };
                if !gamma.contains(y, *d) {
                    continue;
                }
                let xi = &z[2..];
                if norm(xi) < 1e-12 {
                    continue;
                }
                let k = out_dirs.nearest(&[xi[0] / norm(xi), xi[1] / norm(xi)]);
                raw.insert(*x, k)?;
                provenance.push((*x, *d, y, k));
            }
        }
    }
    let mut u_closed = BTreeSet::new();
    let probe = ConeSet::empty(base.clone(), out_dirs.clone());
    for &c in &unfav {
        u_closed.extend(probe.cell_neighbours(c));
    }
    Ok(PullbackCone {
        cone: raw.dilate(),
        raw,
        normal_bundle: normal.dilate(),
        unfavourable: u_closed.into_iter().collect(),
        provenance,
        df_empty,
    })
}

/// Inputs of the inclusion check beyond the map and the function.
#[derive(Debug, Clone)]
pub struct TheoremSetup {
    /// Ω₁ region and cell side for the left-hand side.
    pub region: Vec<(f64, f64)>,
    pub h: f64,
    /// Ω₂ region and cell side for `WF(u)`.
    pub target_region: Vec<(f64, f64)>,
    pub target_h: f64,
    pub wavefront: WavefrontParams,
    pub cone: ConeParams,
    pub max_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub cell: usize,
    pub center: Vec<f64>,
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub violations: Vec<Violation>,
    pub lhs_count: usize,
    pub rhs_count: usize,
    /// RHS pairs not reached by the LHS.
    pub margin_cells: usize,
    pub unfavourable: Vec<usize>,
    pub k_support: Vec<usize>,
    pub s_complement: Vec<usize>,
    #[serde(skip)]
    pub lhs: ConeSet,
    #[serde(skip)]
    pub rhs: ConeSet,
    #[serde(skip)]
    pub cone: PullbackCone,
}

/// `WF(f*u) ⊆ f*WF(u) ∪ U_f(WF(u))×S¹ ∪ (K_f(u) ∩ S_f^c)×S¹` on the grids of `setup`.
///
/// `pulled` is the representative of `f*u` used for the left-hand side; it may carry
/// support and scale hints that [`pullback`] cannot infer, and is spot-checked against it.
pub fn check_main_theorem(
    f: &CBoundedMap,
    u: &Net,
    pulled: &Net,
    setup: &TheoremSetup,
    gamma: Option<ConeSet>,
) -> Result<TheoremReport> {
    let plain = pullback(f, u, None)?;
    let probe = box_nodes(&setup.region, 3);
    for &e in &setup.wavefront.grid.values()[..2] {
        for p in &probe {
            let (a, b) = (plain.value(e, p), pulled.value(e, p));
            if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1e-300) {
                return Err(Error::InvalidArgument(format!("supplied pullback differs from u∘f at {p:?}")));
            }
        }
    }
    let gamma = match gamma {
        Some(g) => g,
        None => wavefront(u, setup.target_region.clone(), setup.target_h, &setup.wavefront)?.cones,
    };
    let lhs = wavefront(pulled, setup.region.clone(), setup.h, &setup.wavefront)?.cones;
    let base = lhs.base.clone();
    let dirs = lhs.dirs.clone();
    let cone = pullback_cone(f, &gamma, &base, &dirs, &setup.cone)?;
    let cf = estimate_graph(&f.net, &base, None, &setup.cone.grid, &setup.cone.graph)?;
    let ks = k_support(&cf, u, None, &setup.wavefront.grid, &ClassifyParams::default())?;
    let sc = slow_scale_support(f, &base, setup.max_order, &setup.cone.grid, &ClassifyParams::default())?;
    let mut rhs = cone.cone.clone();
    let mut full_cells: BTreeSet<usize> = cone.unfavourable.iter().copied().collect();
    let sc_set: BTreeSet<usize> = sc.iter().copied().collect();
    let probe_set = ConeSet::empty(base.clone(), dirs.clone());
    for &c in ks.iter().filter(|c| sc_set.contains(c)) {
        full_cells.extend(probe_set.cell_neighbours(c));
    }
    for &c in &full_cells {
        for d in 0..dirs.len() {
            rhs.insert(c, d)?;
        }
    }
    let violations = lhs
        .difference(&rhs)
        .into_iter()
        .map(|(c, d)| Violation { cell: c, center: base.center(c), angle: dirs.angles[d] })
        .collect();
    let margin_cells = rhs.difference(&lhs).len();
    Ok(TheoremReport {
        violations,
        lhs_count: lhs.len(),
        rhs_count: rhs.len(),
        margin_cells,
        unfavourable: cone.unfavourable.clone(),
        k_support: ks,
        s_complement: sc,
        lhs,
        rhs,
        cone,
    })
}
