//! Oscillatory integrals `∫ u_ε e^{iωφ_ε}` and checks of the non-stationary phase bound
//! `ω^k |v_ε(ω)| ≤ L_{k,ε} λ_ε^{-k} Σ_{|α|≤k} sup_K |∂^α u_ε|`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::embedding::CompactElement;
use crate::graph::fmt17;
use crate::nets::{self, multi_indices, GeneralizedNumberNet};
use crate::{Error, Grid, Net, NumberNet, Result};

/// Sampling controls for suprema, infima and quadrature.
#[derive(Debug, Clone, Copy)]
pub struct StatPhaseParams {
    pub points_per_oscillation: f64,
    pub points_per_feature: f64,
    pub rel_tol: f64,
    pub min_points: usize,
    pub max_points: usize,
    /// Grid density for suprema, in nodes per feature length.
    pub sup_points_per_feature: f64,
    pub sup_cap_1d: usize,
    pub sup_cap_nd: usize,
    pub margin: f64,
}

impl Default for StatPhaseParams {
    fn default() -> Self {
        Self {
            points_per_oscillation: 20.0,
            points_per_feature: 16.0,
            rel_tol: 1e-3,
            min_points: 65,
            max_points: 1 << 22,
            sup_points_per_feature: 8.0,
            sup_cap_1d: 1 << 15,
            sup_cap_nd: 513,
            margin: 10.0,
        }
    }
}

fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximum of `f` over a box: a uniform grid at `sup_points_per_feature` nodes
/// per feature length, then golden-section refinement around the best node.
pub fn box_max<F>(region: &[(f64, f64)], scale: &[f64], params: &StatPhaseParams, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let cap = if region.len() == 1 { params.sup_cap_1d } else { params.sup_cap_nd };
    let axes: Vec<Vec<f64>> = region
        .iter()
        .zip(scale)
        .map(|(&(a, b), &s)| {
            let m = (((b - a) / s * params.sup_points_per_feature).ceil() as usize + 1).clamp(3, cap);
            if b <= a {
                return vec![a];
            }
            (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let node = |mut k: usize| -> Vec<f64> {
        axes.iter()
            .map(|ax| {
                let i = k % ax.len();
                k /= ax.len();
                ax[i]
            })
            .collect()
    };
    let (best_k, best) = (0..total)
        .into_par_iter()
        .map(|k| (k, f(&node(k))))
        .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    let mut x = node(best_k);
    let mut best = best;
    for _ in 0..2 {
        for d in 0..x.len() {
            let ax = &axes[d];
            if ax.len() < 2 {
                continue;
            }
            let h = ax[1] - ax[0];
            let (lo, hi) = ((x[d] - h).max(region[d].0), (x[d] + h).min(region[d].1));
            let mut y = x.clone();
            let (t, v) = golden(
                |t| {
                    y[d] = t;
                    f(&y)
                },
                lo,
                hi,
            );
            if v > best {
                best = v;
                x[d] = t;
            }
        }
    }
    best
}

/// `|g|_l = Σ_{|α|=l} |∂^α g|` at `x`.
pub fn jet_norm(g: &Net, eps: f64, x: &[f64], l: usize) -> f64 {
    multi_indices(g.dim_in(), l)
        .iter()
        .filter(|a| nets::order(a) == l)
        .map(|a| g.partial(0, eps, x, a).abs())
        .sum()
}

/// `μ[l][ε] = sup_K |g_ε|_l` and the running maximum `μ*[l][ε] = max_{j≤l} μ[j][ε]`.
#[derive(Debug, Clone, Serialize)]
pub struct NormTable {
    pub eps: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub mu_star: Vec<Vec<f64>>,
}

impl NormTable {
    pub fn mu_net(&self, l: usize, grid: &Grid) -> Result<NumberNet> {
        GeneralizedNumberNet::from_values(grid, self.mu[l].clone())
    }
}

/// Derivative suprema of `g` on `K` and on an enclosing `M`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeNorms {
    pub on_k: NormTable,
    pub on_m: NormTable,
}

fn contains_box(inner: &[(f64, f64)], outer: &[(f64, f64)], strict: bool) -> bool {
    inner.len() == outer.len()
        && inner.iter().zip(outer).all(|(i, o)| if strict { o.0 < i.0 && i.1 < o.1 } else { o.0 <= i.0 && i.1 <= o.1 })
}

pub fn norm_table(g: &Net, region: &[(f64, f64)], k_max: usize, grid: &Grid, params: &StatPhaseParams) -> Result<NormTable> {
    if k_max > g.deriv_order() {
        return Err(Error::OrderExceeded { requested: k_max, available: g.deriv_order() });
    }
    if region.len() != g.dim_in() {
        return Err(Error::DimensionMismatch(format!("box in {} dimensions, net in {}", region.len(), g.dim_in())));
    }
    let mut mu = vec![Vec::with_capacity(grid.len()); k_max + 1];
    for &e in grid.values() {
        let scale = g.feature_scale(e);
        for (l, row) in mu.iter_mut().enumerate() {
            row.push(box_max(region, &scale, params, |x| jet_norm(g, e, x, l)));
        }
    }
    let mut mu_star = mu.clone();
    for l in 1..=k_max {
        for j in 0..grid.len() {
            mu_star[l][j] = mu_star[l][j].max(mu_star[l - 1][j]);
        }
    }
    Ok(NormTable { eps: grid.values().to_vec(), mu, mu_star })
}

pub fn derivative_norms(
    g: &Net,
    k: &[(f64, f64)],
    m: &[(f64, f64)],
    k_max: usize,
    grid: &Grid,
    params: &StatPhaseParams,
) -> Result<DerivativeNorms> {
    if !contains_box(k, m, false) {
        return Err(Error::Precondition("K must lie inside M".into()));
    }
    Ok(DerivativeNorms {
        on_k: norm_table(g, k, k_max, grid, params)?,
        on_m: norm_table(g, m, k_max, grid, params)?,
    })
}

/// Outcome of [`check_gradient_lemma`] on one `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientLemmaRow {
    pub eps: f64,
    pub m_eps: f64,
    pub sup_k: f64,
    pub max_ratio: f64,
    pub worst_x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientLemmaReport {
    pub rows: Vec<GradientLemmaRow>,
    pub max_ratio: f64,
}

fn dir_deriv(g: &Net, eps: f64, x: &[f64], v: &[f64], order: usize) -> f64 {
    let n = g.dim_in();
    match order {
        1 => (0..n)
            .map(|i| {
                let mut a = vec![0; n];
                a[i] = 1;
                v[i] * g.partial(0, eps, x, &a)
            })
            .sum(),
        _ => {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut a = vec![0; n];
                    a[i] += 1;
                    a[j] += 1;
                    s += v[i] * v[j] * g.partial(0, eps, x, &a);
                }
            }
            s
        }
    }
}

/// Checks `δ²|∂_v g_ε(x₀)|² ≤ g_ε(x₀)(sup_K g_ε + 2δ² m_ε(v))` at every sampled `x₀ ∈ K`,
/// with `m_ε(v) = max(sup_M |∂_v² g_ε|, 2 g_ε(x₀) δ^{-2})`.
pub fn check_gradient_lemma(
    g: &Net,
    k: &[(f64, f64)],
    m: &[(f64, f64)],
    delta: f64,
    v: &[f64],
    grid: &Grid,
    params: &StatPhaseParams,
) -> Result<GradientLemmaReport> {
    let n = g.dim_in();
    if k.len() != n || m.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch("K, M and v must match the net dimension".into()));
    }
    if g.deriv_order() < 2 {
        return Err(Error::OrderExceeded { requested: 2, available: g.deriv_order() });
    }
    let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if (vn - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("direction must be a unit vector, |v| = {vn}")));
    }
    let grown: Vec<(f64, f64)> = k.iter().map(|&(a, b)| (a - delta, b + delta)).collect();
    if !(delta > 0.0) || !contains_box(&grown, m, false) {
        return Err(Error::Precondition(format!("B_δ(K) ⊄ M for δ = {delta}")));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &e in grid.values() {
        let scale = g.feature_scale(e);
        let min_m = -box_max(m, &scale, params, |x| -g.value(e, x));
        let sup_k = box_max(k, &scale, params, |x| g.value(e, x));
        if min_m < -1e-12 * sup_k.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!("g takes the value {min_m:e} < 0 on M at ε = {e}")));
        }
        let d2 = box_max(m, &scale, params, |x| dir_deriv(g, e, x, v, 2).abs());
        let cap = if n == 1 { params.sup_cap_1d } else { params.sup_cap_nd };
        let per_axis: Vec<usize> = k
            .iter()
            .zip(&scale)
            .map(|(&(a, b), &s)| (((b - a) / s * params.sup_points_per_feature).ceil() as usize + 1).clamp(3, cap))
            .collect();
        let total: usize = per_axis.iter().product();
        let node = |mut idx: usize| -> Vec<f64> {
            k.iter()
                .zip(&per_axis)
                .map(|(&(a, b), &p)| {
                    let i = idx % p;
                    idx /= p;
                    a + (b - a) * i as f64 / (p - 1) as f64
                })
                .collect()
        };
        let (ratio, idx, m_eps) = (0..total)
            .into_par_iter()
            .map(|i| {
                let x = node(i);
                let gx = g.value(e, &x);
                let dv = dir_deriv(g, e, &x, v, 1);
                let m_eps = d2.max(2.0 * gx / (delta * delta));
                let lhs = delta * delta * dv * dv;
                let rhs = gx * (sup_k + 2.0 * delta * delta * m_eps);
                let r = if rhs > 0.0 {
                    lhs / rhs
                } else if lhs == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                (r, i, m_eps)
            })
            .reduce(|| (f64::NEG_INFINITY, 0, 0.0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        rows.push(GradientLemmaRow { eps: e, m_eps, sup_k, max_ratio: ratio, worst_x: node(idx) });
    }
    let max_ratio = rows.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(GradientLemmaReport { rows, max_ratio })
}

/// `λ_ε` at or below this counts as a stationary point.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Phase `φ_ε` with the compact `K` carrying the amplitude and an enclosing `M ⊃⊃ K`.
#[derive(Debug, Clone)]
pub struct PhaseNet {
    pub phi: Net,
    pub k: Vec<(f64, f64)>,
    pub m: Vec<(f64, f64)>,
}

impl PhaseNet {
    pub fn new(phi: Net, k: Vec<(f64, f64)>, m: Vec<(f64, f64)>) -> Result<Self> {
        if phi.dim_out() != 1 {
            return Err(Error::DimensionMismatch("phase must be scalar".into()));
        }
        if k.len() != phi.dim_in() {
            return Err(Error::DimensionMismatch(format!("K in {} dimensions, phase in {}", k.len(), phi.dim_in())));
        }
        if phi.deriv_order() < 1 {
            return Err(Error::OrderExceeded { requested: 1, available: phi.deriv_order() });
        }
        if !contains_box(&k, &m, true) {
            return Err(Error::Precondition("K must lie in the interior of M".into()));
        }
        Ok(Self { phi, k, m })
    }

    pub fn gradient_norm(&self, eps: f64, x: &[f64]) -> f64 {
        let n = self.phi.dim_in();
        (0..n)
            .map(|i| {
                let mut a = vec![0; n];
                a[i] = 1;
                self.phi.partial(0, eps, x, &a).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `λ_ε = inf_K |∇φ_ε|`.
    pub fn lambda(&self, grid: &Grid, params: &StatPhaseParams) -> Result<NumberNet> {
        let vals = grid
            .values()
            .iter()
            .map(|&e| -box_max(&self.k, &self.phi.feature_scale(e), params, |x| -self.gradient_norm(e, x)))
            .collect();
        GeneralizedNumberNet::from_values(grid, vals)
    }

    /// `N_ε = |∇φ_ε|²` as a net.
    pub fn gradient_square(&self) -> Result<Net> {
        let n = self.phi.dim_in();
        let mut acc: Option<Net> = None;
        for i in 0..n {
            let mut b = vec![0; n];
            b[i] = 1;
            let d = nets::derivative(&self.phi, &b)?;
            let sq = nets::mul(&d, &d)?;
            acc = Some(match acc {
                None => sq,
                Some(a) => nets::add(&a, &sq)?,
            });
        }
        let scale = self.phi.scale_fn();
        let out = acc.expect("phase has at least one coordinate");
        Ok(match scale {
            Some(s) => out.with_scale(s),
            None => out,
        })
    }
}

/// `φ_ε(x) = x + a γ_ε sin(x/γ_ε)`, with `|φ′_ε| ≥ 1 − a`.
pub fn modulated_phase(a: f64, gamma: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Net {
    let g2 = gamma.clone();
    Net::scalar(1, usize::MAX, move |e, x: &[f64], al: &[usize]| {
        let g = gamma(e);
        let (s, c) = (x[0] / g).sin_cos();
        let k = al[0];
        let cyc = [s, c, -s, -c][k % 4];
        let base = match k {
            0 => x[0],
            1 => 1.0,
            _ => 0.0,
        };
        base + a * g.powi(1 - k as i32) * cyc
    })
    .with_scale(Arc::new(move |e| vec![g2(e)]))
}

/// Restricts `u` to a box: the value is zero outside, derivatives are left alone.
pub fn restrict(u: &Net, support: Vec<(f64, f64)>) -> Result<CompactElement> {
    if support.len() != u.dim_in() || support.iter().any(|r| !(r.1 > r.0)) {
        return Err(Error::InvalidArgument("support must be a nonempty box in the net's dimension".into()));
    }
    let center: Vec<f64> = support.iter().map(|r| 0.5 * (r.0 + r.1)).collect();
    let width = support.iter().map(|r| 0.5 * (r.1 - r.0)).fold(0.0, f64::max);
    let inner = u.clone();
    let bx = support.clone();
    let mut net = Net::scalar(u.dim_in(), u.deriv_order(), move |e, x: &[f64], a: &[usize]| {
        if x.iter().zip(&bx).all(|(v, r)| r.0 <= *v && *v <= r.1) {
            inner.partial(0, e, x, a)
        } else {
            0.0
        }
    });
    let hint_box = support.clone();
    net = net.with_support(Arc::new(move |_| Some(hint_box.clone())));
    if let Some(s) = u.scale_fn() {
        net = net.with_scale(s);
    }
    Ok(CompactElement { net, joint_support: support, cutoff: crate::embedding::Cutoff::new(center, width)? })
}

/// One quadrature result with its Richardson error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quadrature {
    pub re: f64,
    pub im: f64,
    pub error: f64,
    pub points: usize,
}

impl Quadrature {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn integration_region(u: &CompactElement, eps: f64) -> (f64, f64) {
    let (mut a, mut b) = u.joint_support[0];
    if let Some(h) = u.net.support_hint(eps) {
        a = a.max(h[0].0);
        b = b.min(h[0].1);
    }
    (a, b)
}

fn integrate_with(
    u: &CompactElement,
    phase: &PhaseNet,
    omega: f64,
    eps: f64,
    grad_sup: f64,
    params: &StatPhaseParams,
) -> Result<Quadrature> {
    let (a, b) = integration_region(u, eps);
    if !(b > a) {
        return Ok(Quadrature { re: 0.0, im: 0.0, error: 0.0, points: 0 });
    }
    let len = b - a;
    let by_wave = params.points_per_oscillation * len * omega.abs() * grad_sup / (2.0 * std::f64::consts::PI);
    let by_u = params.points_per_feature * len / u.net.feature_scale(eps)[0];
    let by_phi = params.points_per_feature * len / phase.phi.feature_scale(eps)[0];
    let mut n = (by_wave.max(by_u).max(by_phi).ceil() as usize + 1).max(params.min_points);
    loop {
        let fine = 2 * n - 1;
        if fine > params.max_points {
            return Err(Error::ResolutionExceeded { required: fine, limit: params.max_points });
        }
        let h = len / (fine - 1) as f64;
        let terms: Vec<(Complex64, f64)> = (0..fine)
            .into_par_iter()
            .map(|i| {
                let x = a + h * i as f64;
                let w = if i == 0 || i == fine - 1 { 0.5 } else { 1.0 };
                let f = u.net.value(eps, &[x]);
                let z = Complex64::from_polar(f, omega * phase.phi.value(eps, &[x]));
                (z * w, (f * w).abs())
            })
            .collect();
        let t_fine = terms.iter().fold(Complex64::new(0.0, 0.0), |s, t| s + t.0) * h;
        let mut t_coarse = terms.iter().step_by(2).fold(Complex64::new(0.0, 0.0), |s, t| s + t.0);
        // even fine nodes carry the coarse weights already
        t_coarse *= 2.0 * h;
        let mass: f64 = terms.iter().map(|t| t.1).sum::<f64>() * h;
        let rich = t_fine + (t_fine - t_coarse) / 3.0;
        let err = (t_fine - t_coarse).norm() / 3.0;
        let floor = 1e-13 * mass;
        if err <= params.rel_tol * rich.norm() + floor {
            return Ok(Quadrature { re: rich.re, im: rich.im, error: err, points: fine });
        }
        n = fine;
    }
}

/// `∫ u_ε(x) e^{iωφ_ε(x)} dx` in one dimension by the trapezoid rule on `n` and `2n − 1`
/// nodes plus one Richardson step, refined until the estimate is within `rel_tol`.
pub fn integrate_oscillatory(
    u: &CompactElement,
    phase: &PhaseNet,
    omega: f64,
    eps: f64,
    params: &StatPhaseParams,
) -> Result<Quadrature> {
    if u.net.dim_in() != 1 || phase.phi.dim_in() != 1 {
        return Err(Error::InvalidArgument("oscillatory integrals are one-dimensional".into()));
    }
    let (a, b) = integration_region(u, eps);
    let scale = phase.phi.feature_scale(eps);
    let grad_sup = if b > a { box_max(&[(a, b)], &scale, params, |x| phase.gradient_norm(eps, x)) } else { 0.0 };
    integrate_with(u, phase, omega, eps, grad_sup, params)
}

/// `|v_ε(ω)|` over an `ε × ω` grid.
#[derive(Debug, Clone, Serialize)]
pub struct OscillatoryTable {
    pub eps: Vec<f64>,
    pub omegas: Vec<f64>,
    pub abs: Vec<Vec<f64>>,
    pub points: Vec<Vec<usize>>,
}

pub fn oscillatory_table(
    u: &CompactElement,
    phase: &PhaseNet,
    omegas: &[f64],
    grid: &Grid,
    params: &StatPhaseParams,
) -> Result<OscillatoryTable> {
    if u.net.dim_in() != 1 || phase.phi.dim_in() != 1 {
        return Err(Error::InvalidArgument("oscillatory integrals are one-dimensional".into()));
    }
    let mut abs = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    for &e in grid.values() {
        let (a, b) = integration_region(u, e);
        let scale = phase.phi.feature_scale(e);
        let gs = if b > a { box_max(&[(a, b)], &scale, params, |x| phase.gradient_norm(e, x)) } else { 0.0 };
        let q: Vec<Quadrature> =
            omegas.iter().map(|&w| integrate_with(u, phase, w, e, gs, params)).collect::<Result<_>>()?;
        abs.push(q.iter().map(|q| q.value().norm()).collect());
        points.push(q.iter().map(|q| q.points).collect());
    }
    Ok(OscillatoryTable { eps: grid.values().to_vec(), omegas: omegas.to_vec(), abs, points })
}

/// Least-squares slope of `log|v|` against `log ω`.
pub fn decay_slope(omegas: &[f64], values: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        omegas.iter().zip(values).filter(|(_, v)| **v > 0.0).map(|(w, v)| (w.ln(), v.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData { usable: pts.len(), needed: 2 });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// The recursion constants for one `ε`: `σ^{(m)}`, `M_m` and `L_k` along both paths.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerConstants {
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
    pub l_recursive: Vec<f64>,
    pub l_closed: Vec<f64>,
}

/// `σ^{(m)} = max_{1≤l≤m} max(sup|N|_l, sup|φ|_{l+1})`, `M_m = σ^{(m)} Π_{i<m} max(σ^{(i)}, 1)`,
/// `L_0 = 1`, `L_1 = M_1`, `L_k = (k−1) L_{k−1} M_k`; the closed form is `(k−1)! Π M_l`.
pub fn ledger_constants(n_norms: &[f64], phi_norms: &[f64], k_max: usize) -> LedgerConstants {
    let mut sigma = vec![0.0f64; k_max + 1];
    for m in 1..=k_max {
        sigma[m] = sigma[m - 1].max(n_norms[m]).max(phi_norms[m + 1]);
    }
    let mut m = vec![1.0; k_max + 1];
    for j in 1..=k_max {
        m[j] = sigma[j] * (1..j).map(|i| sigma[i].max(1.0)).product::<f64>();
    }
    let mut l_recursive = vec![1.0; k_max + 1];
    for k in 1..=k_max {
        l_recursive[k] = if k == 1 { m[1] } else { (k - 1) as f64 * l_recursive[k - 1] * m[k] };
    }
    let l_closed = (0..=k_max)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            if m[1..=k].iter().any(|&v| v == 0.0) {
                return 0.0;
            }
            (ln_gamma(k as f64) + m[1..=k].iter().map(|v| v.ln()).sum::<f64>()).exp()
        })
        .collect();
    LedgerConstants { sigma, m, l_recursive, l_closed }
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerRow {
    pub k: usize,
    pub eps: f64,
    pub omega: f64,
    pub lambda: f64,
    pub mu_star_phi: f64,
    pub amplitude_sum: f64,
    pub l_k: f64,
    pub rhs: f64,
    pub measured: f64,
    pub ratio: f64,
}

/// Verdict of [`verify_statphase`] with the full bound ledger.
#[derive(Debug, Clone, Serialize)]
pub struct StatPhaseReport {
    pub k_max: usize,
    pub reference: (f64, f64),
    pub c_k: Vec<f64>,
    pub worst_ratio: Vec<f64>,
    pub margin: f64,
    pub pass: bool,
    pub lambda: Vec<f64>,
    pub constants: Vec<LedgerConstants>,
    pub table: OscillatoryTable,
    pub rows: Vec<LedgerRow>,
}

impl StatPhaseReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,eps,omega,measured,rhs,ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k,
                fmt17(r.eps),
                fmt17(r.omega),
                fmt17(r.measured),
                fmt17(r.rhs),
                fmt17(r.ratio)
            ));
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": if self.pass { "PASS" } else { "FAIL" },
            "k_max": self.k_max,
            "reference": { "eps": self.reference.0, "omega": self.reference.1 },
            "c_k": self.c_k,
            "worst_ratio": self.worst_ratio,
            "margin": self.margin,
        })
    }
}

/// Fills the oscillatory table, fits `C_k` at (largest `ε`, smallest `ω`) and requires
/// `ω^k|v_ε(ω)| ≤ margin · L_{k,ε} λ_ε^{-k} Σ_{|α|≤k} sup_K|∂^α u_ε|` everywhere, with
/// `L_{k,ε} = C_k max(1, μ*_{M,k,ε}(φ)^{2k²})`.
pub fn verify_statphase(
    u: &CompactElement,
    phase: &PhaseNet,
    k_max: usize,
    omegas: &[f64],
    grid: &Grid,
    params: &StatPhaseParams,
) -> Result<StatPhaseReport> {
    if omegas.is_empty() || omegas.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument("ω-grid must be nonempty and positive".into()));
    }
    if !contains_box(&u.joint_support, &phase.k, false) {
        return Err(Error::Precondition("amplitude support must lie in K".into()));
    }
    if phase.phi.deriv_order() < k_max + 2 {
        return Err(Error::OrderExceeded { requested: k_max + 2, available: phase.phi.deriv_order() });
    }
    let lambda = phase.lambda(grid, params)?;
    if let Some(e) = grid.values().iter().zip(lambda.values()).find(|(_, l)| !(**l > LAMBDA_FLOOR)).map(|(e, _)| *e) {
        return Err(Error::Precondition(format!("inf_K |φ′| vanishes at ε = {e}")));
    }
    let phi_norms = norm_table(&phase.phi, &phase.m, k_max + 1, grid, params)?;
    let n_norms = norm_table(&phase.gradient_square()?, &phase.m, k_max, grid, params)?;
    let u_sums: Vec<Vec<f64>> = {
        let idx = multi_indices(u.net.dim_in(), k_max);
        grid.values()
            .iter()
            .map(|&e| {
                let scale = u.net.feature_scale(e);
                let sups: Vec<(usize, f64)> = idx
                    .iter()
                    .map(|a| (nets::order(a), box_max(&phase.k, &scale, params, |x| u.net.partial(0, e, x, a).abs())))
                    .collect();
                (0..=k_max).map(|k| sups.iter().filter(|s| s.0 <= k).map(|s| s.1).sum()).collect()
            })
            .collect()
    };
    let table = oscillatory_table(u, phase, omegas, grid, params)?;
    let constants: Vec<LedgerConstants> = (0..grid.len())
        .map(|j| {
            let nn: Vec<f64> = (0..=k_max).map(|l| n_norms.mu[l][j]).collect();
            let pn: Vec<f64> = (0..=k_max + 1).map(|l| phi_norms.mu[l][j]).collect();
            ledger_constants(&nn, &pn, k_max)
        })
        .collect();

    let (j_ref, w_ref) = (0usize, 0usize);
    let ref_omega = omegas[w_ref];
    let log_shape = |k: usize, j: usize| -> f64 {
        let mu = phi_norms.mu_star[k][j];
        2.0 * (k * k) as f64 * mu.ln().max(0.0) - k as f64 * lambda.values()[j].ln() + u_sums[j][k].ln()
    };
    let mut c_k = Vec::with_capacity(k_max + 1);
    let mut worst_ratio = Vec::with_capacity(k_max + 1);
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let measured_ref = ref_omega.powi(k as i32) * table.abs[j_ref][w_ref];
        if !(measured_ref > 0.0) {
            return Err(Error::Precondition(format!("reference value vanishes for k = {k}")));
        }
        let log_c = measured_ref.ln() - log_shape(k, j_ref);
        c_k.push(log_c.exp());
        let mut worst = 0.0f64;
        for (j, &e) in grid.values().iter().enumerate() {
            let mu = phi_norms.mu_star[k][j];
            let log_l = log_c + 2.0 * (k * k) as f64 * mu.ln().max(0.0);
            let log_rhs = log_c + log_shape(k, j);
            for (w, &om) in omegas.iter().enumerate() {
                let measured = om.powi(k as i32) * table.abs[j][w];
                let ratio = if measured > 0.0 { (measured.ln() - log_rhs).exp() } else { 0.0 };
                if (j, w) != (j_ref, w_ref) {
                    worst = worst.max(ratio);
                }
                rows.push(LedgerRow {
                    k,
                    eps: e,
                    omega: om,
                    lambda: lambda.values()[j],
                    mu_star_phi: mu,
                    amplitude_sum: u_sums[j][k],
                    l_k: log_l.exp(),
                    rhs: log_rhs.exp(),
                    measured,
                    ratio,
                });
            }
        }
        worst_ratio.push(worst);
    }
    let pass = worst_ratio.iter().all(|&r| r <= params.margin);
    Ok(StatPhaseReport {
        k_max,
        reference: (grid.values()[j_ref], ref_omega),
        c_k,
        worst_ratio,
        margin: params.margin,
        pass,
        lambda: lambda.values().to_vec(),
        constants,
        table,
        rows,
    })
}
