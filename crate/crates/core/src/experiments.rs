//! Worked examples.
//!
//! The multiplication example multiplies two mollified deltas concentrated on
//! the crossing lines `x ± γ_ε y = 0` and compares the product's wavefront set
//! with the pullback bound for `f_ε(x, y) = (x + γ_ε y, x − γ_ε y)`.
//!
//! The Hurd–Sattinger problem `∂_t u + Θ_ε ∂_x u + Θ′_ε u = 0`, `u(0) = ι(δ_{−s₀})`,
//! is solved by characteristics: with `σ = σ_ε(0; t, x)` the foot of the
//! characteristic through `(t, x)`, `u_ε(t, x) = u_{0,ε}(σ) ∂_x σ`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{bump_profile, embed, DistributionSpec, Mollifier, EMBED_ORDER};
use crate::graph::{fmt17, BaseGrid};
use crate::microlocal::{
    wavefront, wavefront_with, ConeSet, DirectionGrid, WavefrontEstimate, WavefrontParams, WindowedSpectrum,
};
use crate::nets::{classify_net, mul, AsymptoticTag, ClassifyParams, Component};
use crate::pullback::{check_main_theorem, estimate_df, pullback_cone, CBoundedMap, ConeParams, DfParams, TheoremReport, TheoremSetup};
use crate::{Error, Grid, Net, NumberNet, Result};

/// Scale `γ_ε` of the regularized coefficient or of the shear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    /// `1/log(1/ε)`: slow scale, tends to zero.
    InverseLog,
    /// `log(1/ε)`: slow scale, grows.
    Log,
    /// `ε^{1/2}`.
    Sqrt,
    /// `ε^p`.
    Power(f64),
}

impl GammaChoice {
    pub fn value(self, eps: f64) -> f64 {
        match self {
            Self::InverseLog => 1.0 / (1.0 / eps).ln(),
            Self::Log => (1.0 / eps).ln(),
            Self::Sqrt => eps.sqrt(),
            Self::Power(p) => eps.powf(p),
        }
    }

    pub fn net(self, grid: &Grid) -> NumberNet {
        NumberNet::from_fn(grid, |e| self.value(e))
    }
}

/// `Θ_ε(x) = ∫_{x/γ_ε}^∞ ρ`, evaluated as `cdf(−x/γ_ε)` for the even profile `ρ`.
pub fn theta(eps: f64, x: f64, gamma: GammaChoice, rho: Mollifier) -> f64 {
    rho.cdf(-x / gamma.value(eps))
}

/// `Θ′_ε(x) = −ρ(x/γ_ε)/γ_ε`.
pub fn theta_prime(eps: f64, x: f64, gamma: GammaChoice, rho: Mollifier) -> f64 {
    let g = gamma.value(eps);
    -rho.rho(x / g) / g
}

/// `Θ_ε` at one `ε`.
#[derive(Debug, Clone, Copy)]
struct Coefficient {
    gamma: f64,
    rho: Mollifier,
}

impl Coefficient {
    fn th(&self, x: f64) -> f64 {
        self.rho.cdf(-x / self.gamma)
    }

    fn dth(&self, x: f64) -> f64 {
        -self.rho.rho(x / self.gamma) / self.gamma
    }

    /// `Θ′/Θ`, finite wherever `Θ` does not underflow.
    fn log_slope(&self, x: f64) -> f64 {
        let t = self.th(x);
        if t >= 1e-300 {
            self.dth(x) / t
        } else {
            f64::NAN
        }
    }
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Dormand–Prince 5(4) for a small autonomous system from `τ = 0`, landing exactly on
/// each target. Targets share one sign and grow in magnitude. Absolute tolerance per unit step.
/// A collapsed step returns `(step, τ)`.
fn dopri<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    y0: [f64; N],
    targets: &[f64],
    tol: f64,
) -> std::result::Result<Vec<[f64; N]>, (f64, f64)> {
    let mut out = Vec::with_capacity(targets.len());
    let Some(&last) = targets.last() else { return Ok(out) };
    let dir = if last < 0.0 { -1.0 } else { 1.0 };
    let span = last.abs();
    let mut h = dir * last.abs().clamp(1e-6, 0.05);
    let (mut tau, mut y) = (0.0f64, y0);
    for &tg in targets {
        loop {
            let rem = tg - tau;
            if rem.abs() <= 1e-15 * tg.abs().max(1.0) {
                tau = tg;
                break;
            }
            let clipped = h.abs() >= rem.abs();
            let step = if clipped { rem } else { h };
            let mut k = [[0.0; N]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += step * DP_A[s][j] * kj[i];
                    }
                }
                k[s] = f(&ys);
            }
            let mut yn = y;
            let mut err = 0.0f64;
            for i in 0..N {
                let (mut hi, mut lo) = (0.0, 0.0);
                for s in 0..7 {
                    hi += DP_B[s] * k[s][i];
                    lo += DP_B4[s] * k[s][i];
                }
                yn[i] += step * hi;
                err = err.max((step * (hi - lo)).abs());
            }
            // error per unit step keeps the global error near `tol`
            let e = err / (tol * (step.abs() / span).min(1.0));
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            let next = step * factor;
            if e <= 1.0 {
                tau = if clipped { tg } else { tau + step };
                y = yn;
                h = if clipped { dir * h.abs().max(next.abs()) } else { next };
                if clipped {
                    break;
                }
            } else {
                h = next;
            }
            if h.abs() < 1e-14 * tau.abs().max(1.0) {
                return Err((h, tau));
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Hurd–Sattinger experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HSConfig {
    /// The initial delta sits at `−s₀`.
    pub s0: f64,
    pub gamma: GammaChoice,
    pub rho: Mollifier,
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Absolute tolerance of the characteristic solves.
    pub tol: f64,
    pub nt: usize,
    pub nx: usize,
    /// Dyadic exponents `(j_min, j_max)` of the flow grid in `ε`.
    pub eps_levels: (i32, i32),
    /// Base cell side and `ε` exponents of the wavefront estimate.
    pub wf_h: f64,
    pub wf_levels: (i32, i32),
    pub n_dir: usize,
    pub widths: Vec<f64>,
    /// `x`-nodes of each mass quadrature.
    pub mass_nodes: usize,
}

impl Default for HSConfig {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl HSConfig {
    /// Defaults with the box `t ∈ [0, 2s₀]`, `x ∈ [−2s₀, s₀]`.
    pub fn new(s0: f64) -> Self {
        Self {
            s0,
            gamma: GammaChoice::InverseLog,
            rho: Mollifier::Gaussian,
            t_range: (0.0, 2.0 * s0),
            x_range: (-2.0 * s0, s0),
            tol: 1e-8,
            nt: 256,
            nx: 256,
            eps_levels: (3, 14),
            wf_h: 0.25 * s0,
            wf_levels: (4, 11),
            n_dir: 64,
            widths: vec![0.4 * s0, 0.2 * s0, 0.1 * s0],
            mass_nodes: 513,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidArgument(format!("s0 must be positive, got {}", self.s0)));
        }
        let (t0, t1) = self.t_range;
        let (x0, x1) = self.x_range;
        if !(t0 >= 0.0 && t1 > t0 && x1 > x0) {
            return Err(Error::InvalidArgument(format!("box t {:?}, x {:?} is empty or starts before t = 0", self.t_range, self.x_range)));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1e-3], got {}", self.tol)));
        }
        if self.nt < 3 || self.nx < 3 || self.mass_nodes < 3 {
            return Err(Error::InvalidArgument("grids need at least 3 nodes per axis".into()));
        }
        if !(self.wf_h > 0.0) || self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("wavefront cell side and widths must be positive".into()));
        }
        let class = classify_net(&self.gamma.net(&Grid::default()), &ClassifyParams::default())?;
        if class.tag != AsymptoticTag::SlowScale {
            return Err(Error::Precondition(format!("γ must be a slow-scale net, classified {:?}", class.tag)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::dyadic(self.eps_levels.0, self.eps_levels.1)
    }

    pub fn wavefront_params(&self) -> Result<WavefrontParams> {
        Ok(WavefrontParams {
            widths: self.widths.clone(),
            n_dir: self.n_dir,
            grid: Grid::dyadic(self.wf_levels.0, self.wf_levels.1)?,
            ..WavefrontParams::default()
        })
    }

    pub fn base(&self) -> Result<BaseGrid> {
        BaseGrid::new(vec![self.t_range, self.x_range], self.wf_h)
    }

    fn coefficient(&self, eps: f64) -> Coefficient {
        Coefficient { gamma: self.gamma.value(eps), rho: self.rho }
    }

    fn u0(&self, eps: f64, a: f64, k: usize) -> f64 {
        self.rho.deriv(k, (a + self.s0) / eps) * eps.powi(-1 - k as i32)
    }

    /// Half-width of the initial pulse in `a`.
    fn pulse_radius(&self, eps: f64) -> f64 {
        self.rho.support_radius() * eps
    }
}

fn stiff(eps: f64, t: f64, x: f64) -> impl Fn((f64, f64)) -> Error {
    move |(step, at)| Error::StiffFailure { step, at, eps, t, x }
}

/// `σ_ε(0; t, x)` and `log ∂_x σ` transported along the characteristic.
///
/// The equation is autonomous, so the foot is the time-`t` flow of `y′ = −Θ(y)`
/// started at `x`; `ℓ′ = −Θ′(y)` carries `ℓ = log ∂_x σ`.
pub fn characteristic_foot(cfg: &HSConfig, eps: f64, t: f64, x: f64, tol: f64) -> Result<(f64, f64)> {
    let c = cfg.coefficient(eps);
    let r = dopri(|y: &[f64; 2]| [-c.th(y[0]), -c.dth(y[0])], [x, 0.0], &[t], tol).map_err(stiff(eps, t, x))?;
    Ok((r[0][0], r[0][1]))
}

/// `σ_ε(t; 0, a)` at every `t` in `ts` (sorted ascending, either sign).
pub fn forward_characteristic(cfg: &HSConfig, eps: f64, a: f64, ts: &[f64], tol: f64) -> Result<Vec<f64>> {
    let c = cfg.coefficient(eps);
    let split = ts.partition_point(|&t| t < 0.0);
    let back: Vec<f64> = ts[..split].iter().rev().copied().collect();
    let f = |y: &[f64; 1]| [c.th(y[0])];
    let mut lo = dopri(f, [a], &back, tol).map_err(stiff(eps, ts[0], a))?;
    lo.reverse();
    let hi = dopri(f, [a], &ts[split..], tol).map_err(stiff(eps, ts[ts.len() - 1], a))?;
    Ok(lo.into_iter().chain(hi).map(|y| y[0]).collect())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// `σ_ε(0; t, x)` with its derivatives on the `(ε, t, x)` grid. Arrays are `[ε][t][x]`.
#[derive(Debug, Clone)]
pub struct CharacteristicFlow {
    pub config: HSConfig,
    pub eps: Vec<f64>,
    pub gamma: Vec<f64>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `−Θ_ε(σ)`.
    pub dt_sigma: Vec<f64>,
    /// `Θ_ε(σ)/Θ_ε(x)`, or the transported form where `Θ_ε(x)` underflows.
    pub dx_sigma: Vec<f64>,
    /// `exp(−∫Θ′_ε)` along the characteristic.
    pub dx_sigma_transported: Vec<f64>,
    /// `Θ_ε` at the `x` nodes, `[ε][x]`.
    pub theta: Vec<f64>,
}

impl CharacteristicFlow {
    pub fn index(&self, e: usize, i: usize, j: usize) -> usize {
        (e * self.t.len() + i) * self.x.len() + j
    }

    /// `u_ε(t_i, x_j)` from the tabulated flow.
    pub fn solution(&self, e: usize, i: usize, j: usize) -> f64 {
        let k = self.index(e, i, j);
        self.config.u0(self.eps[e], self.sigma[k], 0) * self.dx_sigma[k]
    }

    /// Copy with `σ` shifted by `delta`; a negative control for [`verify_flow_bounds`].
    pub fn corrupted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.sigma.iter_mut().for_each(|s| *s += delta);
        out
    }
}

pub fn solve_characteristics(cfg: &HSConfig) -> Result<CharacteristicFlow> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let eps = grid.values().to_vec();
    let t = linspace(cfg.t_range.0, cfg.t_range.1, cfg.nt);
    let x = linspace(cfg.x_range.0, cfg.x_range.1, cfg.nx);
    let (nt, nx) = (t.len(), x.len());
    let jobs: Vec<(usize, usize)> = (0..eps.len()).flat_map(|e| (0..nx).map(move |j| (e, j))).collect();
    let columns = jobs
        .par_iter()
        .map(|&(e, j)| {
            let c = cfg.coefficient(eps[e]);
            dopri(|y: &[f64; 2]| [-c.th(y[0]), -c.dth(y[0])], [x[j], 0.0], &t, cfg.tol)
                .map_err(|(step, at)| Error::StiffFailure { step, at, eps: eps[e], t: at, x: x[j] })
        })
        .collect::<Result<Vec<_>>>()?;
    let size = eps.len() * nt * nx;
    let mut flow = CharacteristicFlow {
        config: cfg.clone(),
        gamma: eps.iter().map(|&e| cfg.gamma.value(e)).collect(),
        theta: eps.iter().flat_map(|&e| x.iter().map(move |&xj| cfg.coefficient(e).th(xj))).collect(),
        sigma: vec![0.0; size],
        dt_sigma: vec![0.0; size],
        dx_sigma: vec![0.0; size],
        dx_sigma_transported: vec![0.0; size],
        eps,
        t,
        x,
    };
    for (&(e, j), col) in jobs.iter().zip(&columns) {
        let c = cfg.coefficient(flow.eps[e]);
        let th_x = flow.theta[e * nx + j];
        for (i, y) in col.iter().enumerate() {
            let k = flow.index(e, i, j);
            let th_s = c.th(y[0]);
            flow.sigma[k] = y[0];
            flow.dt_sigma[k] = -th_s;
            flow.dx_sigma_transported[k] = y[1].exp();
            flow.dx_sigma[k] = if th_x >= 1e-300 { th_s / th_x } else { y[1].exp() };
        }
    }
    Ok(flow)
}

/// Outcome of [`verify_flow_bounds`]. Violations count grid points beyond `10·tol`.
#[derive(Debug, Clone, Serialize)]
pub struct FlowBoundsReport {
    pub tolerance: f64,
    pub points: usize,
    /// Worst excess over `x − t ≤ σ ≤ x`.
    pub worst_coarse: f64,
    /// Worst excess over `x − tΘ(x − t) ≤ σ ≤ x − tΘ(x)`.
    pub worst_fine: f64,
    pub coarse_violations: usize,
    pub fine_violations: usize,
    pub monotone_x_violations: usize,
    pub monotone_t_violations: usize,
    /// Points where `∂_x σ ≤ 0` or `∂_t σ ≥ 0`.
    pub sign_violations: usize,
    /// Worst relative gap between `Θ(σ)/Θ(x)` and the transported `∂_x σ`.
    pub worst_amplitude_gap: f64,
    pub pass: bool,
}

pub fn verify_flow_bounds(flow: &CharacteristicFlow) -> FlowBoundsReport {
    let cfg = &flow.config;
    let tol = 10.0 * cfg.tol;
    let (nt, nx) = (flow.t.len(), flow.x.len());
    let mut r = FlowBoundsReport {
        tolerance: tol,
        points: flow.sigma.len(),
        worst_coarse: 0.0,
        worst_fine: 0.0,
        coarse_violations: 0,
        fine_violations: 0,
        monotone_x_violations: 0,
        monotone_t_violations: 0,
        sign_violations: 0,
        worst_amplitude_gap: 0.0,
        pass: false,
    };
    for (e, &eps) in flow.eps.iter().enumerate() {
        let c = cfg.coefficient(eps);
        for (i, &t) in flow.t.iter().enumerate() {
            for (j, &x) in flow.x.iter().enumerate() {
                let k = flow.index(e, i, j);
                let s = flow.sigma[k];
                let coarse = (x - t - s).max(s - x).max(0.0);
                let fine = (x - t * c.th(x - t) - s).max(s - (x - t * c.th(x))).max(0.0);
                r.worst_coarse = r.worst_coarse.max(coarse);
                r.worst_fine = r.worst_fine.max(fine);
                r.coarse_violations += usize::from(coarse > tol);
                r.fine_violations += usize::from(fine > tol);
                if j + 1 < nx && flow.sigma[k + 1] <= s {
                    r.monotone_x_violations += 1;
                }
                if i + 1 < nt && flow.sigma[flow.index(e, i + 1, j)] > s + tol {
                    r.monotone_t_violations += 1;
                }
                if !(flow.dx_sigma[k] > 0.0) || (t > 0.0 && !(flow.dt_sigma[k] < 0.0)) {
                    r.sign_violations += 1;
                }
                let gap = (flow.dx_sigma[k] / flow.dx_sigma_transported[k] - 1.0).abs();
                r.worst_amplitude_gap = r.worst_amplitude_gap.max(gap);
            }
        }
    }
    r.pass = r.coarse_violations == 0
        && r.fine_violations == 0
        && r.monotone_x_violations == 0
        && r.monotone_t_violations == 0
        && r.sign_violations == 0;
    r
}

/// `u_ε(t, x)` with first derivatives, from one characteristic solve.
fn hs_jet(cfg: &HSConfig, eps: f64, t: f64, x: f64, alpha: &[usize], tol: f64) -> f64 {
    let Ok((s, ell)) = characteristic_foot(cfg, eps, t, x, tol) else { return f64::NAN };
    let c = cfg.coefficient(eps);
    let th_x = c.th(x);
    let amp = if th_x >= 1e-300 { c.th(s) / th_x } else { ell.exp() };
    let (u0, du0) = (cfg.u0(eps, s, 0), cfg.u0(eps, s, 1));
    match (alpha[0], alpha[1]) {
        (0, 0) => u0 * amp,
        // ∂_t σ = −Θ(σ), ∂_t ∂_x σ = −Θ′(σ) ∂_x σ
        (1, 0) => -(du0 * c.th(s) + u0 * c.dth(s)) * amp,
        (0, 1) => amp * (du0 * amp + u0 * (amp * c.log_slope(s) - c.log_slope(x))),
        _ => f64::NAN,
    }
}

/// The characteristic solution `u_ε(t, x)` as a net in `(t, x)`, first derivatives by the chain rule.
pub fn hs_solution(cfg: &HSConfig) -> Result<Net> {
    cfg.validate()?;
    let c = cfg.clone();
    Ok(Net::scalar(2, 1, move |e, z, al| hs_jet(&c, e, z[0], z[1], al, c.tol)))
}

/// Finite-difference residual of the transport equation, relative to the size of its terms
/// plus `Θ_ε |u_ε| ∂_xσ/ε`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub worst: f64,
    /// `(ε, t, x)` of the worst point.
    pub worst_at: Option<(f64, f64, f64)>,
}

/// Tolerance for the stencil solves; tighter than the grid so differences resolve the pulse.
const STENCIL_TOL: f64 = 1e-12;

fn residual_at(cfg: &HSConfig, eps: f64, t: f64, x: f64) -> Result<f64> {
    let c = cfg.coefficient(eps);
    let (s, ell) = characteristic_foot(cfg, eps, t, x, STENCIL_TOL)?;
    let amp = ell.exp();
    // steps at 1% of the local feature size in each variable
    let dx = 1e-2 * eps / amp;
    let dt = 1e-2 * (eps / c.th(s).max(1e-300)).min(c.gamma);
    let u = |tt: f64, xx: f64| hs_jet(cfg, eps, tt, xx, &[0, 0], STENCIL_TOL);
    let d4 = |f: &dyn Fn(f64) -> f64, h: f64| (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
    let ut = d4(&|k| u(t + k, x), dt);
    let ux = d4(&|k| u(t, x + k), dx);
    let u0 = u(t, x);
    let terms = [ut, c.th(x) * ux, c.dth(x) * u0];
    // Θu/ℓ with ℓ = ε/∂_xσ the local pulse width keeps the scale nonzero at the crest
    let scale: f64 = terms.iter().map(|v| v.abs()).sum::<f64>() + c.th(x) * u0.abs() * amp / eps;
    Ok(if scale > 0.0 { terms.iter().sum::<f64>().abs() / scale } else { 0.0 })
}

/// Residual at interior grid points where the tabulated solution is non-negligible, and at
/// points riding the pulse `x = σ_ε(t; 0, −s₀ + kε/2)`, `|k| ≤ 4`, on every `row_stride`-th row.
pub fn pde_residual(flow: &CharacteristicFlow, row_stride: usize) -> Result<ResidualReport> {
    let cfg = &flow.config;
    let (nt, nx) = (flow.t.len(), flow.x.len());
    let mut pts = Vec::new();
    for (e, &eps) in flow.eps.iter().enumerate() {
        for i in 1..nt - 1 {
            let row: Vec<f64> = (0..nx).map(|j| flow.solution(e, i, j)).collect();
            let peak = row.iter().copied().fold(0.0, f64::max);
            for j in 1..nx - 1 {
                if peak > 0.0 && row[j] >= 1e-6 * peak {
                    pts.push((eps, flow.t[i], flow.x[j]));
                }
            }
        }
        let rows: Vec<f64> = (1..nt - 1).step_by(row_stride.max(1)).map(|i| flow.t[i]).collect();
        for k in -4..=4 {
            let a = -cfg.s0 + 0.5 * k as f64 * eps;
            let xs = forward_characteristic(cfg, eps, a, &rows, STENCIL_TOL)?;
            pts.extend(rows.iter().zip(xs).map(|(&t, x)| (eps, t, x)));
        }
    }
    let vals = pts.par_iter().map(|&(e, t, x)| residual_at(cfg, e, t, x)).collect::<Result<Vec<_>>>()?;
    let mut r = ResidualReport { points: pts.len(), worst: 0.0, worst_at: None };
    for (p, v) in pts.into_iter().zip(vals) {
        if !(v <= r.worst) {
            r.worst = v;
            r.worst_at = Some(p);
        }
    }
    Ok(r)
}

/// `∫u_ε(t, ·)dx` by the trapezoid rule on `n` uniform nodes spanning the pulse.
/// The span comes from forward characteristics of the pulse edges; the integrand from
/// independent backward solves.
pub fn hs_mass(cfg: &HSConfig, eps: f64, t: f64, n: usize) -> Result<f64> {
    let r = cfg.pulse_radius(eps);
    let lo = forward_characteristic(cfg, eps, -cfg.s0 - r, &[t], cfg.tol)?[0];
    let hi = forward_characteristic(cfg, eps, -cfg.s0 + r, &[t], cfg.tol)?[0];
    let h = (hi - lo) / (n - 1) as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let x = lo + h * k as f64;
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        let v = hs_jet(cfg, eps, t, x, &[0, 0], cfg.tol);
        if !v.is_finite() {
            return Err(Error::StiffFailure { step: 0.0, at: 0.0, eps, t, x });
        }
        sum += w * v;
    }
    Ok(sum * h)
}

#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub checks: usize,
    pub worst_deviation: f64,
    pub worst_at: Option<(f64, f64)>,
}

/// Mass at every `(ε, t)` row of the flow grid, `t` thinned by `row_stride`.
pub fn mass_check(flow: &CharacteristicFlow, row_stride: usize) -> Result<MassReport> {
    let cfg = &flow.config;
    let jobs: Vec<(f64, f64)> = flow
        .eps
        .iter()
        .flat_map(|&e| flow.t.iter().step_by(row_stride.max(1)).map(move |&t| (e, t)))
        .collect();
    let masses = jobs.par_iter().map(|&(e, t)| hs_mass(cfg, e, t, cfg.mass_nodes)).collect::<Result<Vec<_>>>()?;
    let mut r = MassReport { checks: jobs.len(), worst_deviation: 0.0, worst_at: None };
    for (p, m) in jobs.into_iter().zip(masses) {
        let d = (m - 1.0).abs();
        if !(d <= r.worst_deviation) {
            r.worst_deviation = d;
            r.worst_at = Some(p);
        }
    }
    Ok(r)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Location of the maximum of `u_ε(t, ·)`: bisection for `σ = −s₀` on the box, then a
/// golden-section search around it.
pub fn peak_location(cfg: &HSConfig, eps: f64, t: f64) -> Result<f64> {
    let foot = |x: f64| characteristic_foot(cfg, eps, t, x, cfg.tol).map(|r| r.0 + cfg.s0);
    let (mut a, mut b) = (cfg.x_range.0 - t, cfg.x_range.1);
    if foot(a)? > 0.0 || foot(b)? < 0.0 {
        return Err(Error::EmptyDomain(format!("pulse leaves the box at t = {t}")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if foot(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * a.abs().max(1.0) {
            break;
        }
    }
    let x0 = 0.5 * (a + b);
    let amp = characteristic_foot(cfg, eps, t, x0, cfg.tol)?.1.exp();
    let w = 3.0 * eps / amp;
    Ok(golden_max(|x| hs_jet(cfg, eps, t, x, &[0, 0], cfg.tol), x0 - w, x0 + w, 80))
}

/// `|σ_ε(0; t, σ_ε(t; 0, x)) − x|`.
pub fn semigroup_defect(cfg: &HSConfig, eps: f64, t: f64, x: f64) -> Result<f64> {
    let y = forward_characteristic(cfg, eps, x, &[t], cfg.tol)?[0];
    Ok((characteristic_foot(cfg, eps, t, y, cfg.tol)?.0 - x).abs())
}

/// Windowed transforms of the characteristic solution. Substituting `x = σ_ε(t; 0, a)`
/// cancels the amplitude: `v̂(ξ) = ∫∫ ψ(t, Φ_t(a)) u_{0,ε}(a) e^{−i(tξ_t + Φ_t(a)ξ_x)} da dt`.
struct HsSpectrum<'a> {
    cfg: &'a HSConfig,
}

impl WindowedSpectrum for HsSpectrum<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn window_abs(&self, center: &[f64], width: f64, eps: f64, xis: &[Vec<f64>]) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        let xi_max = xis.iter().map(|x| x[0].hypot(x[1])).fold(0.0, f64::max);
        let r = cfg.pulse_radius(eps);
        let na = ((2.0 * r * (4.0 / eps + xi_max / PI)).ceil() as usize + 1).max(33);
        let nt = ((2.0 * width * (256.0 / width + 2.0 * xi_max / PI)).ceil() as usize + 1).max(33);
        let (ha, ht) = (2.0 * r / (na - 1) as f64, 2.0 * width / (nt - 1) as f64);
        let ts = linspace(center[0] - width, center[0] + width, nt);
        let mut nodes: Vec<(f64, f64, f64)> = Vec::new();
        for k in 0..na {
            let a = -cfg.s0 - r + ha * k as f64;
            let amp = cfg.u0(eps, a, 0);
            if amp == 0.0 {
                continue;
            }
            let xs = forward_characteristic(cfg, eps, a, &ts, cfg.tol)?;
            for (&t, &x) in ts.iter().zip(&xs) {
                let w = bump_profile(0, (t - center[0]) / width) * bump_profile(0, (x - center[1]) / width);
                if w != 0.0 {
                    nodes.push((t, x, w * amp * ha * ht));
                }
            }
        }
        let mut phase = vec![Complex64::new(1.0, 0.0); nodes.len()];
        let mut out = Vec::with_capacity(xis.len());
        for (q, xi) in xis.iter().enumerate() {
            // dyadic rays: doubling ξ squares each phasor
            let doubled = q > 0 && xi[0] == 2.0 * xis[q - 1][0] && xi[1] == 2.0 * xis[q - 1][1];
            let mut sum = Complex64::new(0.0, 0.0);
            for (p, &(t, x, w)) in phase.iter_mut().zip(&nodes) {
                *p = if doubled { *p * *p } else { Complex64::from_polar(1.0, -(t * xi[0] + x * xi[1])) };
                sum += *p * w;
            }
            out.push(sum.norm());
        }
        Ok(out)
    }
}

/// `|(ψ_{x₀,w} u_ε)^(ξ)|` for the characteristic solution, by the change of variables above.
pub fn hs_window_transform(cfg: &HSConfig, center: &[f64], width: f64, eps: f64, xis: &[Vec<f64>]) -> Result<Vec<f64>> {
    cfg.validate()?;
    if center.len() != 2 || xis.iter().any(|x| x.len() != 2) {
        return Err(Error::DimensionMismatch("the solution lives on (t, x)".into()));
    }
    HsSpectrum { cfg }.window_abs(center, width, eps, xis)
}

/// Wavefront estimate of the characteristic solution over the configured box.
pub fn hs_wavefront(cfg: &HSConfig) -> Result<WavefrontEstimate> {
    cfg.validate()?;
    wavefront_with(&HsSpectrum { cfg }, vec![cfg.t_range, cfg.x_range], cfg.wf_h, &cfg.wavefront_params()?)
}

/// The analytic three-piece set on the experiment's grid.
#[derive(Debug, Clone, Serialize)]
pub struct PredictedWF {
    pub raw: ConeSet,
    /// `raw` dilated by one cell and one direction.
    pub dilated: ConeSet,
}

/// Every base cell whose closed box holds `p`.
fn cells_touching(base: &BaseGrid, p: &[f64]) -> Vec<usize> {
    let d = 1e-9 * base.h;
    let mut out = BTreeSet::new();
    for s0 in [-d, d] {
        for s1 in [-d, d] {
            if let Some(c) = base.index_of(&[p[0] + s0, p[1] + s1]) {
                out.insert(c);
            }
        }
    }
    out.into_iter().collect()
}

/// Rasterize `{(t, t−s₀; ∓1, ±1), t < s₀} ∪ {(s₀, 0; ∓α, ±1), α ∈ [0, 1]} ∪ {(t, 0; 0, ±1), t > s₀}`,
/// directions normalized.
pub fn hs_predicted_wf(cfg: &HSConfig) -> Result<PredictedWF> {
    cfg.validate()?;
    let base = cfg.base()?;
    let dirs = DirectionGrid::new(2, cfg.n_dir)?;
    let mut raw = ConeSet::empty(base.clone(), dirs.clone());
    let mut mark = |p: [f64; 2], xi: [f64; 2]| -> Result<()> {
        for c in cells_touching(&base, &p) {
            for s in [1.0, -1.0] {
                raw.insert(c, dirs.nearest(&[s * xi[0], s * xi[1]]))?;
            }
        }
        Ok(())
    };
    let (t0, t1) = cfg.t_range;
    let n = (64.0 * (t1 - t0) / cfg.wf_h).ceil() as usize;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for t in linspace(t0, t1, n + 1) {
        if t < cfg.s0 {
            mark([t, t - cfg.s0], [-s, s])?;
        } else if t > cfg.s0 {
            mark([t, 0.0], [0.0, 1.0])?;
        }
    }
    if cfg.s0 >= t0 && cfg.s0 <= t1 {
        for a in linspace(0.0, 1.0, 257) {
            let r = (1.0 + a * a).sqrt();
            mark([cfg.s0, 0.0], [-a / r, 1.0 / r])?;
        }
    }
    Ok(PredictedWF { dilated: raw.dilate(), raw })
}

/// Measured against predicted wavefront sets.
#[derive(Debug, Clone, Serialize)]
pub struct HsWavefrontReport {
    #[serde(skip)]
    pub measured: WavefrontEstimate,
    #[serde(skip)]
    pub predicted: PredictedWF,
    pub measured_pairs: usize,
    pub predicted_pairs: usize,
    /// Measured `(t, x, angle)` outside the dilated prediction.
    pub outside: Vec<(f64, f64, f64)>,
    pub inclusion: bool,
    /// Cells met by `{(t, t−s₀): t ∈ [0.1, 0.9]s₀}` and how many carry a measured flag.
    pub segment_cells: usize,
    pub segment_flagged: usize,
    pub segment_detected: bool,
}

/// Compare the measured intersection set `raw` with the dilated prediction.
pub fn compare_hs_wavefront(cfg: &HSConfig, measured: WavefrontEstimate, predicted: PredictedWF) -> HsWavefrontReport {
    let m = &measured.raw;
    let outside: Vec<(f64, f64, f64)> = m
        .difference(&predicted.dilated)
        .into_iter()
        .map(|(c, d)| {
            let z = m.base.center(c);
            (z[0], z[1], m.dirs.angles[d])
        })
        .collect();
    let mut seg = BTreeSet::new();
    for t in linspace(0.1 * cfg.s0, 0.9 * cfg.s0, 257) {
        if let Some(c) = m.base.index_of(&[t, t - cfg.s0]) {
            seg.insert(c);
        }
    }
    let flagged = seg.iter().filter(|&&c| !m.directions_at(c).is_empty()).count();
    HsWavefrontReport {
        measured_pairs: m.len(),
        predicted_pairs: predicted.dilated.len(),
        inclusion: outside.is_empty(),
        outside,
        segment_cells: seg.len(),
        segment_flagged: flagged,
        segment_detected: !seg.is_empty() && flagged == seg.len(),
        measured,
        predicted,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HsTimings {
    pub flow_s: f64,
    pub bounds_s: f64,
    pub residual_s: f64,
    pub mass_s: f64,
    pub wavefront_s: f64,
}

/// Everything the Hurd–Sattinger run produces.
#[derive(Debug, Clone, Serialize)]
pub struct HsRun {
    pub config: HSConfig,
    pub bounds: FlowBoundsReport,
    pub residual: ResidualReport,
    pub mass: MassReport,
    pub wavefront: HsWavefrontReport,
    pub timings: HsTimings,
}

impl HsRun {
    pub fn pass(&self) -> bool {
        self.bounds.pass
            && self.residual.worst <= 1e-3
            && self.mass.worst_deviation <= 1e-4
            && self.wavefront.inclusion
            && self.wavefront.segment_detected
    }

    /// Figure data: one row per `(cell, direction)`.
    pub fn figure_csv(&self) -> String {
        let m = &self.wavefront.measured.raw;
        let p = &self.wavefront.predicted.dilated;
        let mut s = String::from("t,x,angle,flagged_measured,flagged_predicted\n");
        for c in 0..m.base.len() {
            let z = m.base.center(c);
            for d in 0..m.dirs.len() {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt17(z[0]),
                    fmt17(z[1]),
                    fmt17(m.dirs.angles[d]),
                    u8::from(m.contains(c, d)),
                    u8::from(p.contains(c, d))
                ));
            }
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("run summary is plain data");
        v["verdict"] = serde_json::Value::from(if self.pass() { "PASS" } else { "FAIL" });
        v
    }
}

/// Flow, bound checks, residual, mass and wavefront comparison in one pass.
/// `row_stride` thins the `t` rows used by the residual and mass checks.
pub fn run_hurd_sattinger(cfg: &HSConfig, row_stride: usize) -> Result<HsRun> {
    let mut timings = HsTimings::default();
    let clock = Instant::now();
    let flow = solve_characteristics(cfg)?;
    timings.flow_s = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let bounds = verify_flow_bounds(&flow);
    timings.bounds_s = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let residual = pde_residual(&flow, row_stride)?;
    timings.residual_s = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let mass = mass_check(&flow, row_stride)?;
    timings.mass_s = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let wf = compare_hs_wavefront(cfg, hs_wavefront(cfg)?, hs_predicted_wf(cfg)?);
    timings.wavefront_s = clock.elapsed().as_secs_f64();
    Ok(HsRun { config: cfg.clone(), bounds, residual, mass, wavefront: wf, timings })
}

/// Settings of the crossing-lines example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplyConfig {
    pub gamma: GammaChoice,
    pub rho: Mollifier,
    /// Square `[−r, r]²` carrying every base grid.
    pub half_width: f64,
    pub h: f64,
    pub n_dir: usize,
    /// `ε` exponents for `WF(u)` and `WF(v)`; the lines fill every window, so these stay coarse.
    pub line_levels: (i32, i32),
}

impl Default for MultiplyConfig {
    fn default() -> Self {
        Self {
            gamma: GammaChoice::Sqrt,
            rho: Mollifier::Gaussian,
            half_width: 0.625,
            h: 0.25,
            n_dir: 64,
            line_levels: (2, 9),
        }
    }
}

/// `ε^{-1}ρ((x + sγ_ε y)/ε)`.
pub fn line_delta(gamma: GammaChoice, rho: Mollifier, s: f64) -> Net {
    Net::scalar(2, EMBED_ORDER, move |e, z, al| {
        let g = gamma.value(e);
        let k = al[0] + al[1];
        (s * g).powi(al[1] as i32) * rho.deriv(k, (z[0] + s * g * z[1]) / e) * e.powi(-1 - k as i32)
    })
    .with_scale(Arc::new(move |e| vec![e, e / gamma.value(e)]))
}

/// `f_ε(x, y) = (x + γ_ε y, x − γ_ε y)`.
pub fn shear_map(gamma: GammaChoice) -> Net {
    Net::vector(
        2,
        usize::MAX,
        [1.0, -1.0]
            .into_iter()
            .map(|s| {
                Arc::new(move |e: f64, z: &[f64], a: &[usize]| {
                    let g = gamma.value(e);
                    match (a[0], a[1]) {
                        (0, 0) => z[0] + s * g * z[1],
                        (1, 0) => 1.0,
                        (0, 1) => s * g,
                        _ => 0.0,
                    }
                }) as Component<f64>
            })
            .collect(),
    )
}

/// Shape of an estimated `WF` of a mollified line through the origin, against
/// `{x = 0} × {(±1, 0)}`.
#[derive(Debug, Clone, Serialize)]
pub struct LineWavefront {
    /// Flagged cells are exactly the column `x = 0`.
    pub cells_on_axis: bool,
    /// `(±1, 0)` flagged at every column cell.
    pub normal_flagged: bool,
    /// `(0, ±1)` flagged nowhere.
    pub tangent_clear: bool,
    /// Largest angle between a flagged direction and `(±1, 0)`.
    pub spread: f64,
    /// All of the above with `spread` at most one direction step.
    pub matches_stated: bool,
}

impl LineWavefront {
    pub fn of(w: &WavefrontEstimate) -> Self {
        let m = &w.raw;
        let column: BTreeSet<usize> = (0..m.base.len()).filter(|&c| m.base.center(c)[0].abs() < 1e-9).collect();
        let cells: BTreeSet<usize> = m.projection().into_iter().collect();
        let n = m.dirs.len();
        let (half, quarter) = (n / 2, n / 4);
        let normal_flagged = column.iter().all(|&c| m.contains(c, 0) && m.contains(c, half));
        let tangent_clear = m.pairs.iter().all(|&(_, d)| d != quarter && d != 3 * quarter);
        let spread = m
            .pairs
            .iter()
            .map(|&(_, d)| m.dirs.angles[d].sin().abs().asin())
            .fold(0.0, f64::max);
        let cells_on_axis = cells == column;
        let matches_stated =
            cells_on_axis && normal_flagged && tangent_clear && spread <= m.dirs.step() * (1.0 + 1e-9);
        Self { cells_on_axis, normal_flagged, tangent_clear, spread, matches_stated }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplyReport {
    pub gamma: GammaChoice,
    pub wf_u: LineWavefront,
    pub wf_v: LineWavefront,
    /// Angles at the origin where `D_f` fails.
    pub df_excluded_at_origin: Vec<f64>,
    /// `D_f` fails exactly within one step of `±(1, −1)/√2`, at every cell.
    pub df_matches_stated: bool,
    /// Closed `U_f(origin × S¹)` cell centres.
    pub unfavourable: Vec<Vec<f64>>,
    pub u_f_is_origin: bool,
    pub violations: usize,
    /// Closed `WF(u·v)` cells, and whether they stay in the origin's neighbourhood.
    pub product_cells: Vec<Vec<f64>>,
    pub product_at_origin: bool,
    #[serde(skip)]
    pub wf_u_estimate: WavefrontEstimate,
    #[serde(skip)]
    pub wf_v_estimate: WavefrontEstimate,
    #[serde(skip)]
    pub theorem: TheoremReport,
}

/// `WF(u·v) ⊆ f*WF(δ) ∪ …` for the crossing lines, with `u·v` read as the pullback of `δ` by the shear map.
pub fn multiplication_theorem(cfg: &MultiplyConfig) -> Result<TheoremReport> {
    if !(cfg.half_width > 0.0 && cfg.h > 0.0) {
        return Err(Error::InvalidArgument("half width and cell side must be positive".into()));
    }
    let f = CBoundedMap::new(shear_map(cfg.gamma), vec![(-1.0, 1.0), (-1.0, 1.0)], &Grid::default())?;
    check_product(cfg, &f, &line_delta(cfg.gamma, cfg.rho, 1.0), &line_delta(cfg.gamma, cfg.rho, -1.0))
}

fn check_product(cfg: &MultiplyConfig, f: &CBoundedMap, u: &Net, v: &Net) -> Result<TheoremReport> {
    let r = cfg.half_width;
    let square = vec![(-r, r), (-r, r)];
    let delta = embed(&DistributionSpec::Delta { a: vec![0.0, 0.0] }, cfg.rho)?;
    let rr = cfg.rho.support_radius();
    let gamma = cfg.gamma;
    let product = mul(u, v)?
        .with_support(Arc::new(move |e| {
            let (a, b) = (rr * e, rr * e / gamma.value(e));
            Some(vec![(-a, a), (-b, b)])
        }))
        .with_scale(Arc::new(move |e| vec![e, e / gamma.value(e)]));
    let setup = TheoremSetup {
        region: square.clone(),
        h: cfg.h,
        target_region: square,
        target_h: cfg.h,
        wavefront: WavefrontParams { n_dir: cfg.n_dir, ..WavefrontParams::default() },
        cone: ConeParams::default(),
        max_order: 2,
    };
    check_main_theorem(f, &delta, &product, &setup, None)
}

pub fn run_multiplication_example(cfg: &MultiplyConfig) -> Result<MultiplyReport> {
    if !(cfg.half_width > 0.0 && cfg.h > 0.0) {
        return Err(Error::InvalidArgument("half width and cell side must be positive".into()));
    }
    let r = cfg.half_width;
    let square = vec![(-r, r), (-r, r)];
    let dirs = DirectionGrid::new(2, cfg.n_dir)?;
    let u = line_delta(cfg.gamma, cfg.rho, 1.0);
    let v = line_delta(cfg.gamma, cfg.rho, -1.0);
    let line_params = WavefrontParams {
        n_dir: cfg.n_dir,
        grid: Grid::dyadic(cfg.line_levels.0, cfg.line_levels.1)?,
        ..WavefrontParams::default()
    };
    let strip = vec![(-1.5 * cfg.h, 1.5 * cfg.h), (-r, r)];
    let wf_u = wavefront(&u, strip.clone(), cfg.h, &line_params)?;
    let wf_v = wavefront(&v, strip, cfg.h, &line_params)?;

    let f = CBoundedMap::new(shear_map(cfg.gamma), vec![(-1.0, 1.0), (-1.0, 1.0)], &Grid::default())?;
    let base = BaseGrid::new(square.clone(), cfg.h)?;
    let origin = base.index_of(&[0.0, 0.0]).ok_or_else(|| Error::EmptyDomain("origin outside the square".into()))?;
    let df = estimate_df(&f, &base, &dirs, &DfParams::default())?;
    let n = dirs.len();
    let anti = [3 * n / 8, 7 * n / 8];
    let stated = |d: usize| !anti.iter().any(|&a| d.abs_diff(a) <= 1);
    let df_matches_stated = (0..base.len()).all(|c| (0..n).all(|d| df.contains(c, d) == stated(d)));
    let df_excluded_at_origin = (0..n).filter(|&d| !df.contains(origin, d)).map(|d| dirs.angles[d]).collect();

    let mut delta_wf = ConeSet::empty(base.clone(), dirs.clone());
    for d in 0..n {
        delta_wf.insert(origin, d)?;
    }
    let cone = pullback_cone(&f, &delta_wf, &base, &dirs, &ConeParams::default())?;
    let closed_origin = delta_wf.cell_neighbours(origin);
    let u_f_is_origin = cone.unfavourable == closed_origin;

    let theorem = check_product(cfg, &f, &u, &v)?;
    // lhs is closed by one cell, so it stays in the origin's neighbourhood iff the raw flags sit at the origin
    let product_cells = theorem.lhs.projection();
    let product_at_origin = product_cells.iter().all(|c| closed_origin.contains(c));
    Ok(MultiplyReport {
        gamma: cfg.gamma,
        wf_u: LineWavefront::of(&wf_u),
        wf_v: LineWavefront::of(&wf_v),
        df_excluded_at_origin,
        df_matches_stated,
        unfavourable: cone.unfavourable.iter().map(|&c| base.center(c)).collect(),
        u_f_is_origin,
        violations: theorem.violations.len(),
        product_cells: product_cells.iter().map(|&c| base.center(c)).collect(),
        product_at_origin,
        wf_u_estimate: wf_u,
        wf_v_estimate: wf_v,
        theorem,
    })
}
