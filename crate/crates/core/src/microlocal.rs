//! Directional rapid-decrease tests and wavefront-set estimates.
//!
//! A windowed element `v` is probed along rays `λ ξ` with dyadic `λ`. For each
//! weight order `p` the λ-supremum of `(1+λ²)^{p/2} |v̂_ε(λξ)|` is regressed in
//! `ε`; a direction counts as rapidly decreasing when those growth exponents do
//! not climb with `p`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{fourier_at, window, CompactElement, Cutoff, FourierOptions};
use crate::graph::{fmt17, BaseGrid};
use crate::nets::{estimate_growth_exponent, GeneralizedNumberNet};
use crate::{Error, Grid, Net, Result};

/// Unit directions on `S⁰` or an equiangular grid on `S¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionGrid {
    pub dim: usize,
    pub angles: Vec<f64>,
}

impl DirectionGrid {
    pub fn new(dim: usize, n_dir: usize) -> Result<Self> {
        match dim {
            1 => Ok(Self { dim, angles: vec![0.0, PI] }),
            2 if n_dir >= 4 && n_dir % 2 == 0 => {
                Ok(Self { dim, angles: (0..n_dir).map(|k| 2.0 * PI * k as f64 / n_dir as f64).collect() })
            }
            2 => Err(Error::InvalidArgument(format!("need an even number of at least 4 directions, got {n_dir}"))),
            _ => Err(Error::InvalidArgument(format!("directions are gridded in dimension 1 or 2, got {dim}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn direction(&self, k: usize) -> Vec<f64> {
        let a = self.angles[k];
        if self.dim == 1 {
            vec![a.cos().round()]
        } else {
            vec![a.cos(), a.sin()]
        }
    }

    /// Index of `k + π`.
    pub fn antipode(&self, k: usize) -> usize {
        (k + self.len() / 2) % self.len()
    }

    /// Grid neighbours of `k`; `S⁰` is discrete and has none.
    pub fn neighbours(&self, k: usize) -> Vec<usize> {
        if self.dim == 1 {
            return Vec::new();
        }
        let n = self.len();
        vec![(k + n - 1) % n, (k + 1) % n]
    }

    /// Nearest grid index to a unit vector.
    pub fn nearest(&self, xi: &[f64]) -> usize {
        if self.dim == 1 {
            return if xi[0] >= 0.0 { 0 } else { 1 };
        }
        let a = xi[1].atan2(xi[0]).rem_euclid(2.0 * PI);
        let step = 2.0 * PI / self.len() as f64;
        ((a / step).round() as usize) % self.len()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }
}

/// Thresholds of the truncated `∃N ∀p` test.
#[derive(Debug, Clone, Copy)]
pub struct DecayParams {
    pub p_max: usize,
    pub n_cap: f64,
    pub stabilization_tol: f64,
    pub lambda_safety: f64,
    pub lambda_cap: f64,
    pub tail_fraction: f64,
    pub fourier: FourierOptions,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            p_max: 4,
            n_cap: 12.0,
            stabilization_tol: 1.0,
            lambda_safety: 0.5,
            lambda_cap: 4096.0,
            tail_fraction: 0.75,
            fourier: FourierOptions::default(),
        }
    }
}

/// Dyadic radii `1, 2, 4, …` up to `min(1/ε_min, cap)·safety`.
pub fn lambda_grid(eps_min: f64, params: &DecayParams) -> Vec<f64> {
    let top = (1.0 / eps_min).min(params.lambda_cap) * params.lambda_safety;
    let mut out = vec![1.0];
    while out[out.len() - 1] * 2.0 <= top * (1.0 + 1e-12) {
        out.push(out[out.len() - 1] * 2.0);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub direction: Vec<f64>,
    pub eps: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `log|v̂_{ε_i}(λ_j ξ)|`, `-inf` where the transform vanishes.
    pub log_abs: Vec<Vec<f64>>,
    /// Fitted `ε`-growth exponent of each weighted supremum, `p = 0..=p_max`.
    pub n_of_p: Vec<f64>,
    pub n_hat: f64,
    /// Largest `p` whose exponent stays within tolerance of `N(0)`.
    pub p_slope: f64,
    pub rapidly_decreasing: bool,
}

/// Rapid-decrease verdict from a table `|v̂_{ε_i}(λ_j ξ)|`.
pub fn decay_from_table(
    direction: Vec<f64>,
    grid: &Grid,
    lambdas: &[f64],
    abs: &[Vec<f64>],
    params: &DecayParams,
) -> Result<DecayProfile> {
    if abs.len() != grid.len() || abs.iter().any(|r| r.len() != lambdas.len()) {
        return Err(Error::DimensionMismatch("decay table does not match ε × λ grid".into()));
    }
    let mut n_of_p = Vec::with_capacity(params.p_max + 1);
    for p in 0..=params.p_max {
        let sup: Vec<f64> = abs
            .iter()
            .map(|row| {
                row.iter().zip(lambdas).map(|(&a, &l)| (1.0 + l * l).powf(0.5 * p as f64) * a).fold(0.0, f64::max)
            })
            .collect();
        let net = GeneralizedNumberNet::from_values(grid, sup)?;
        n_of_p.push(estimate_growth_exponent(&net, params.tail_fraction)?.exponent);
    }
    // O(ε^{-N}) with N < 0 is weaker than O(1): compare on N ≥ 0
    let pos: Vec<f64> = n_of_p.iter().map(|&n| if n.is_nan() { f64::INFINITY } else { n.max(0.0) }).collect();
    let base = pos[0];
    let climb = pos.iter().fold(f64::NEG_INFINITY, |m, &n| m.max(n - base));
    let last = n_of_p[params.p_max];
    let rapidly_decreasing = climb <= params.stabilization_tol && !(last > params.n_cap) && base.is_finite();
    let p_slope = pos.iter().take_while(|&&n| n - base <= params.stabilization_tol).count() as f64 - 1.0;
    let log_abs = abs.iter().map(|r| r.iter().map(|a| a.ln()).collect()).collect();
    Ok(DecayProfile {
        direction,
        eps: grid.values().to_vec(),
        lambdas: lambdas.to_vec(),
        log_abs,
        n_of_p,
        n_hat: base,
        p_slope,
        rapidly_decreasing,
    })
}

/// Test a spectrum given in closed form, `(ε, λ) ↦ |v̂_ε(λξ)|`.
pub fn rapid_decrease_spectrum(
    spectrum: impl Fn(f64, f64) -> f64,
    direction: Vec<f64>,
    grid: &Grid,
    params: &DecayParams,
) -> Result<DecayProfile> {
    let lambdas = lambda_grid(grid.finest(), params);
    let abs: Vec<Vec<f64>> = grid.values().iter().map(|&e| lambdas.iter().map(|&l| spectrum(e, l)).collect()).collect();
    decay_from_table(direction, grid, &lambdas, &abs, params)
}

/// Is `v̂_ε` rapidly decreasing along `ξ`?
pub fn rapid_decrease_test(v: &CompactElement, xi: &[f64], grid: &Grid, params: &DecayParams) -> Result<DecayProfile> {
    let norm = xi.iter().map(|a| a * a).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("direction must be a unit vector, |ξ| = {norm}")));
    }
    let lambdas = lambda_grid(grid.finest(), params);
    let abs = grid
        .values()
        .iter()
        .map(|&e| {
            let xis: Vec<Vec<f64>> = lambdas.iter().map(|&l| xi.iter().map(|d| l * d).collect()).collect();
            Ok(fourier_at(v, e, &xis, &params.fourier)?.iter().map(|z| z.norm()).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    decay_from_table(xi.to_vec(), grid, &lambdas, &abs, params)
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaSet {
    /// Directions failing the test, before closure.
    pub failing: Vec<usize>,
    /// Failures grown by one grid neighbour.
    pub directions: Vec<usize>,
    pub profiles: Vec<DecayProfile>,
}

/// Profiles for every grid direction. Real representatives have `|v̂(−ξ)| = |v̂(ξ)|`,
/// so only half the circle is transformed.
pub fn direction_profiles(
    v: &CompactElement,
    dirs: &DirectionGrid,
    grid: &Grid,
    params: &DecayParams,
) -> Result<Vec<DecayProfile>> {
    if v.net.dim_in() != dirs.dim {
        return Err(Error::DimensionMismatch(format!(
            "direction grid in {} dimensions, element in {}",
            dirs.dim,
            v.net.dim_in()
        )));
    }
    profiles_from(|e, xis| Ok(fourier_at(v, e, xis, &params.fourier)?.iter().map(|z| z.norm()).collect()), dirs, grid, params)
}

fn profiles_from(
    abs_at: impl Fn(f64, &[Vec<f64>]) -> Result<Vec<f64>>,
    dirs: &DirectionGrid,
    grid: &Grid,
    params: &DecayParams,
) -> Result<Vec<DecayProfile>> {
    let lambdas = lambda_grid(grid.finest(), params);
    let half = dirs.len() / 2;
    let xis: Vec<Vec<f64>> = (0..half)
        .flat_map(|k| {
            let d = dirs.direction(k);
            lambdas.iter().map(move |&l| d.iter().map(|c| l * c).collect::<Vec<f64>>()).collect::<Vec<_>>()
        })
        .collect();
    let table = grid.values().iter().map(|&e| abs_at(e, &xis)).collect::<Result<Vec<Vec<f64>>>>()?;
    (0..dirs.len())
        .map(|k| {
            let src = k % half;
            let abs: Vec<Vec<f64>> =
                table.iter().map(|row| row[src * lambdas.len()..(src + 1) * lambdas.len()].to_vec()).collect();
            decay_from_table(dirs.direction(k), grid, &lambdas, &abs, params)
        })
        .collect()
}

fn close_directions(failing: &[usize], dirs: &DirectionGrid) -> Vec<usize> {
    let mut out: BTreeSet<usize> = failing.iter().copied().collect();
    for &k in failing {
        out.extend(dirs.neighbours(k));
    }
    out.into_iter().collect()
}

/// `Σ(v)`: failing directions closed under one grid neighbour.
pub fn sigma_set(v: &CompactElement, dirs: &DirectionGrid, grid: &Grid, params: &DecayParams) -> Result<SigmaSet> {
    let profiles = direction_profiles(v, dirs, grid, params)?;
    let failing: Vec<usize> = (0..dirs.len()).filter(|&k| !profiles[k].rapidly_decreasing).collect();
    Ok(SigmaSet { directions: close_directions(&failing, dirs), failing, profiles })
}

/// Occupied `(cell, direction)` pairs over a base grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSet {
    pub base: BaseGrid,
    pub dirs: DirectionGrid,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl ConeSet {
    pub fn empty(base: BaseGrid, dirs: DirectionGrid) -> Self {
        Self { base, dirs, pairs: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, cell: usize, dir: usize) -> bool {
        self.pairs.contains(&(cell, dir))
    }

    pub fn insert(&mut self, cell: usize, dir: usize) -> Result<()> {
        if cell >= self.base.len() || dir >= self.dirs.len() {
            return Err(Error::InvalidArgument(format!("pair ({cell}, {dir}) outside the declared grids")));
        }
        self.pairs.insert((cell, dir));
        Ok(())
    }

    /// Cells adjacent to `cell` in the sup norm, including itself.
    pub fn cell_neighbours(&self, cell: usize) -> Vec<usize> {
        let m = self.base.multi(cell);
        let shape = &self.base.shape;
        let mut out = vec![0usize];
        let mut strides = Vec::new();
        let mut s = 1;
        for &n in shape.iter().rev() {
            strides.push(s);
            s *= n;
        }
        strides.reverse();
        for i in 0..shape.len() {
            let mut next = Vec::new();
            for &acc in &out {
                for d in [-1i64, 0, 1] {
                    let c = m[i] as i64 + d;
                    if c >= 0 && (c as usize) < shape[i] {
                        next.push(acc + c as usize * strides[i]);
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Grow by one neighbour in both the cell and the direction index.
    pub fn dilate(&self) -> Self {
        let mut out = self.clone();
        for &(c, d) in &self.pairs {
            let mut ds = self.dirs.neighbours(d);
            ds.push(d);
            for nc in self.cell_neighbours(c) {
                for &nd in &ds {
                    out.pairs.insert((nc, nd));
                }
            }
        }
        out
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    pub fn difference(&self, other: &Self) -> Vec<(usize, usize)> {
        self.pairs.difference(&other.pairs).copied().collect()
    }

    /// Base cells carrying at least one direction.
    pub fn projection(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn directions_at(&self, cell: usize) -> Vec<usize> {
        self.pairs.range((cell, 0)..(cell + 1, 0)).map(|p| p.1).collect()
    }
}

/// Controls for [`wavefront`].
#[derive(Debug, Clone)]
pub struct WavefrontParams {
    pub widths: Vec<f64>,
    pub n_dir: usize,
    pub grid: Grid,
    pub decay: DecayParams,
}

impl Default for WavefrontParams {
    fn default() -> Self {
        Self {
            widths: vec![0.4, 0.2, 0.1],
            n_dir: 64,
            grid: Grid::dyadic(5, 12).expect("static grid"),
            decay: DecayParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub cell: usize,
    pub dir: usize,
    pub flagged: bool,
    pub n_hat: f64,
    pub p_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WavefrontEstimate {
    /// Intersection over cutoff widths, before the output closure.
    pub raw: ConeSet,
    /// `raw` dilated by one cell and one direction.
    pub cones: ConeSet,
    pub singular_support: Vec<usize>,
    pub summaries: Vec<PairSummary>,
    pub widths: Vec<f64>,
}

#[derive(Serialize)]
struct WavefrontSummary<'a> {
    base: &'a BaseGrid,
    n_dir: usize,
    widths: &'a [f64],
    raw_pairs: usize,
    flagged_pairs: usize,
    singular_support: Vec<Vec<f64>>,
}

impl WavefrontEstimate {
    pub fn to_csv(&self) -> String {
        let dim = self.cones.base.bounds.len();
        let mut s = String::from(if dim == 1 {
            "x_center,angle,flagged,N_hat,p_slope\n"
        } else {
            "x_center,y_center,angle,flagged,N_hat,p_slope\n"
        });
        for p in &self.summaries {
            let c = self.cones.base.center(p.cell);
            for x in &c {
                s.push_str(&fmt17(*x));
                s.push(',');
            }
            let flagged = self.cones.contains(p.cell, p.dir);
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(self.cones.dirs.angles[p.dir]),
                u8::from(flagged),
                fmt17(p.n_hat),
                fmt17(p.p_slope)
            ));
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(WavefrontSummary {
            base: &self.cones.base,
            n_dir: self.cones.dirs.len(),
            widths: &self.widths,
            raw_pairs: self.raw.len(),
            flagged_pairs: self.cones.len(),
            singular_support: self.singular_support.iter().map(|&c| self.cones.base.center(c)).collect(),
        })
        .expect("summary is plain data")
    }
}

/// Anything that can report `|(ψ_{x₀,w} u_ε)^(ξ)|` for the bump window centred at `x₀`
/// with width `w`. Lets representatives without a direct net (e.g. ODE solutions)
/// reuse the wavefront driver.
pub trait WindowedSpectrum: Sync {
    fn dim(&self) -> usize;
    fn window_abs(&self, center: &[f64], width: f64, eps: f64, xis: &[Vec<f64>]) -> Result<Vec<f64>>;
}

struct NetSpectrum<'a> {
    u: &'a Net,
    fourier: FourierOptions,
}

impl WindowedSpectrum for NetSpectrum<'_> {
    fn dim(&self) -> usize {
        self.u.dim_in()
    }

    fn window_abs(&self, center: &[f64], width: f64, eps: f64, xis: &[Vec<f64>]) -> Result<Vec<f64>> {
        let v = window(self.u, &Cutoff::new(center.to_vec(), width)?)?;
        Ok(fourier_at(&v, eps, xis, &self.fourier)?.iter().map(|z| z.norm()).collect())
    }
}

/// `Σ_{x₀}(u) ≈ ⋂_w Σ(ψ_{x₀,w} u)` over every base cell of `region` with side `h`.
pub fn wavefront(u: &Net, region: Vec<(f64, f64)>, h: f64, params: &WavefrontParams) -> Result<WavefrontEstimate> {
    wavefront_with(&NetSpectrum { u, fourier: params.decay.fourier }, region, h, params)
}

/// [`wavefront`] for an arbitrary spectrum source.
pub fn wavefront_with(
    source: &dyn WindowedSpectrum,
    region: Vec<(f64, f64)>,
    h: f64,
    params: &WavefrontParams,
) -> Result<WavefrontEstimate> {
    if region.len() != source.dim() {
        return Err(Error::DimensionMismatch(format!(
            "region in {} dimensions, source in {}",
            region.len(),
            source.dim()
        )));
    }
    if params.widths.is_empty() {
        return Err(Error::Precondition("at least one cutoff width is required".into()));
    }
    let base = BaseGrid::new(region, h)?;
    let dirs = DirectionGrid::new(source.dim(), params.n_dir)?;
    let mut widths = params.widths.clone();
    widths.sort_by(|a, b| b.total_cmp(a));
    let per_cell = (0..base.len())
        .into_par_iter()
        .map(|cell| {
            let center = base.center(cell);
            let mut keep: Option<BTreeSet<usize>> = None;
            let mut last: Option<Vec<DecayProfile>> = None;
            for &w in &widths {
                let profiles =
                    profiles_from(|e, xis| source.window_abs(&center, w, e, xis), &dirs, &params.grid, &params.decay)?;
                let failing: Vec<usize> = (0..dirs.len()).filter(|&k| !profiles[k].rapidly_decreasing).collect();
                let here: BTreeSet<usize> = close_directions(&failing, &dirs).into_iter().collect();
                let next = match keep {
                    None => here,
                    Some(k) => k.intersection(&here).copied().collect(),
                };
                last = Some(profiles);
                let empty = next.is_empty();
                keep = Some(next);
                if empty {
                    break;
                }
            }
            Ok((cell, keep.unwrap_or_default(), last.unwrap_or_default()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut raw = ConeSet::empty(base.clone(), dirs.clone());
    let mut summaries = Vec::with_capacity(base.len() * dirs.len());
    for (cell, keep, profiles) in per_cell {
        for &d in &keep {
            raw.insert(cell, d)?;
        }
        for (d, p) in profiles.iter().enumerate() {
            summaries.push(PairSummary { cell, dir: d, flagged: keep.contains(&d), n_hat: p.n_hat, p_slope: p.p_slope });
        }
    }
    let cones = raw.dilate();
    Ok(WavefrontEstimate { singular_support: cones.projection(), raw, cones, summaries, widths })
}
