//! Mollifier embeddings of distributions, smooth cutoffs and Fourier transforms
//! of compactly supported elements.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::nets;
use crate::Net;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Taylor coefficients of `exp(a(h))` given those of `a`.
fn series_exp(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    b[0] = a[0].exp();
    for n in 1..a.len() {
        b[n] = (1..=n).map(|k| k as f64 * a[k] * b[n - k]).sum::<f64>() / n as f64;
    }
    b
}

/// Taylor coefficients of `1 / a(h)`.
fn series_recip(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    b[0] = 1.0 / a[0];
    for n in 1..a.len() {
        b[n] = -(1..=n).map(|k| a[k] * b[n - k]).sum::<f64>() / a[0];
    }
    b
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// k-th derivative of the cutoff profile `ψ(t) = exp(1 − 1/(1 − t²))`, zero for `|t| ≥ 1`.
pub fn bump_profile(k: usize, t: f64) -> f64 {
    let s = 1.0 - t * t;
    // exp(-1/s) underflows below this
    if s <= 1.0 / 700.0 {
        return 0.0;
    }
    if k == 0 {
        return (1.0 - 1.0 / s).exp();
    }
    let mut sj = vec![0.0; k + 1];
    sj[0] = s;
    sj[1] = -2.0 * t;
    if k >= 2 {
        sj[2] = -1.0;
    }
    let mut arg: Vec<f64> = series_recip(&sj).iter().map(|r| -r).collect();
    arg[0] += 1.0;
    series_exp(&arg)[k] * factorial(k)
}

fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for m in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * m as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

/// Integral of the unnormalised bump `ψ` over `[-1, 1]`.
pub fn bump_mass() -> f64 {
    use std::sync::OnceLock;
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| trapezoid(|t| bump_profile(0, t), -1.0, 1.0, 4096))
}

/// One-dimensional mollifier profile `ρ` with `∫ρ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mollifier {
    /// `e^{-x²}/√π`.
    #[default]
    Gaussian,
    /// `ψ(x) / ∫ψ`, supported in `[-1, 1]`.
    Bump,
}

impl Mollifier {
    pub fn rho(self, x: f64) -> f64 {
        self.deriv(0, x)
    }

    pub fn deriv(self, k: usize, x: f64) -> f64 {
        match self {
            Mollifier::Gaussian => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * hermite(k, x) * (-x * x).exp() / SQRT_PI
            }
            Mollifier::Bump => bump_profile(k, x) / bump_mass(),
        }
    }

    /// `∫_{-∞}^{z} ρ`.
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            Mollifier::Gaussian => 0.5 * erfc(-z),
            Mollifier::Bump => {
                if z <= -1.0 {
                    0.0
                } else if z >= 1.0 {
                    1.0
                } else {
                    trapezoid(|t| self.rho(t), -1.0, z, 2048)
                }
            }
        }
    }

    /// `ρ̂(η) = ∫ρ(x)e^{-ixη}dx`; real because `ρ` is even.
    pub fn fourier(self, eta: f64) -> f64 {
        match self {
            Mollifier::Gaussian => (-eta * eta / 4.0).exp(),
            Mollifier::Bump => 2.0 * trapezoid(|t| self.rho(t) * (t * eta).cos(), 0.0, 1.0, 4096),
        }
    }

    /// Radius beyond which `ρ` is below `1e-30` of its peak.
    pub fn support_radius(self) -> f64 {
        match self {
            Mollifier::Gaussian => 8.5,
            Mollifier::Bump => 1.0,
        }
    }

    pub fn nonneg(self) -> bool {
        true
    }

    /// Trapezoid integral of `ρ` over its effective support.
    pub fn mass(self) -> f64 {
        let r = self.support_radius();
        trapezoid(|x| self.rho(x), -r, r, 8192)
    }
}

/// Smooth `ε`-independent function supplied through a jet closure `(x, α) ↦ ∂^α f(x)`.
pub type SmoothFn = Arc<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DistributionSpec {
    /// Dirac delta at `a` (any dimension).
    Delta { a: Vec<f64> },
    /// `H(x)` for orientation `+1`, `H(-x)` for `-1` (one dimension).
    Heaviside { orientation: f64 },
    /// `δ_a` along `axis`, constant along the others.
    TensorDelta { dim: usize, axis: usize, a: f64 },
    Smooth { dim: usize, f: SmoothFn },
}

impl std::fmt::Debug for DistributionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Delta { a } => write!(f, "Delta({a:?})"),
            Self::Heaviside { orientation } => write!(f, "Heaviside({orientation})"),
            Self::TensorDelta { dim, axis, a } => write!(f, "TensorDelta(dim={dim}, axis={axis}, a={a})"),
            Self::Smooth { dim, .. } => write!(f, "Smooth(dim={dim})"),
        }
    }
}

/// Derivative order exposed by embedded nets.
pub const EMBED_ORDER: usize = 8;

/// `ε^{-1} ρ((x − a)/ε)` and its derivatives, one dimension.
fn delta_1d(rho: Mollifier, eps: f64, x: f64, a: f64, k: usize) -> f64 {
    rho.deriv(k, (x - a) / eps) * eps.powi(-1 - k as i32)
}

pub fn embed(spec: &DistributionSpec, rho: Mollifier) -> Result<Net> {
    let r = rho.support_radius();
    match spec.clone() {
        DistributionSpec::Delta { a } => {
            if a.is_empty() {
                return Err(Error::InvalidArgument("delta needs a point".into()));
            }
            let n = a.len();
            let a2 = a.clone();
            Ok(Net::scalar(n, EMBED_ORDER, move |e, x, al| {
                let mut v = 1.0;
                for i in 0..n {
                    v *= delta_1d(rho, e, x[i], a2[i], al[i]);
                    if v == 0.0 {
                        break;
                    }
                }
                v
            })
            .with_support(Arc::new(move |e| Some(a.iter().map(|&c| (c - r * e, c + r * e)).collect())))
            .with_scale(Arc::new(move |e| vec![e; n])))
        }
        DistributionSpec::Heaviside { orientation } => {
            if orientation != 1.0 && orientation != -1.0 {
                return Err(Error::InvalidArgument(format!("orientation must be +-1, got {orientation}")));
            }
            let o = orientation;
            Ok(Net::scalar(1, EMBED_ORDER, move |e, x, al| {
                let z = o * x[0] / e;
                match al[0] {
                    0 => rho.cdf(z),
                    k => o.powi(k as i32) * rho.deriv(k - 1, z) * e.powi(-(k as i32)),
                }
            })
            .with_scale(Arc::new(|e| vec![e])))
        }
        DistributionSpec::TensorDelta { dim, axis, a } => {
            if axis >= dim {
                return Err(Error::InvalidArgument(format!("axis {axis} out of range for dim {dim}")));
            }
            Ok(Net::scalar(dim, EMBED_ORDER, move |e, x, al| {
                if al.iter().enumerate().any(|(i, &k)| i != axis && k > 0) {
                    return 0.0;
                }
                delta_1d(rho, e, x[axis], a, al[axis])
            })
            .with_support(Arc::new(move |e| {
                Some(
                    (0..dim)
                        .map(|i| if i == axis { (a - r * e, a + r * e) } else { (f64::NEG_INFINITY, f64::INFINITY) })
                        .collect(),
                )
            }))
            .with_scale(Arc::new(move |e| (0..dim).map(|i| if i == axis { e } else { 1.0 }).collect())))
        }
        DistributionSpec::Smooth { dim, f } => Ok(Net::scalar(dim, usize::MAX, move |_, x, al| f(x, al))),
    }
}

/// Isotropic cutoff `x ↦ Π ψ((x_i − c_i)/w)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Cutoff {
    pub center: Vec<f64>,
    pub width: f64,
}

impl Cutoff {
    pub fn new(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) || center.is_empty() {
            return Err(Error::InvalidArgument(format!("cutoff needs a centre and width > 0, got {width}")));
        }
        Ok(Self { center, width })
    }

    pub fn support(&self) -> Vec<(f64, f64)> {
        self.center.iter().map(|&c| (c - self.width, c + self.width)).collect()
    }

    pub fn net(&self) -> Net {
        let (c, w) = (self.center.clone(), self.width);
        let n = c.len();
        let supp = self.support();
        Net::scalar(n, usize::MAX, move |_, x, al| {
            let mut v = 1.0;
            for i in 0..n {
                v *= bump_profile(al[i], (x[i] - c[i]) / w) * w.powi(-(al[i] as i32));
                if v == 0.0 {
                    return 0.0;
                }
            }
            v
        })
        .with_support(Arc::new(move |_| Some(supp.clone())))
        // the profile flattens fast near the edges; resolve it on w/16
        .with_scale(Arc::new(move |_| vec![w / 16.0; n]))
    }
}

/// A net whose representatives all vanish outside a fixed box.
#[derive(Clone, Debug)]
pub struct CompactElement {
    pub net: Net,
    pub joint_support: Vec<(f64, f64)>,
    pub cutoff: Cutoff,
}

pub fn window(u: &Net, cutoff: &Cutoff) -> Result<CompactElement> {
    if cutoff.center.len() != u.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "cutoff in {} dimensions, net in {}",
            cutoff.center.len(),
            u.dim_in()
        )));
    }
    Ok(CompactElement { net: nets::mul(u, &cutoff.net())?, joint_support: cutoff.support(), cutoff: cutoff.clone() })
}

/// Quadrature controls for [`fourier_at`].
#[derive(Debug, Clone, Copy)]
pub struct FourierOptions {
    pub points_per_feature: f64,
    pub min_points: usize,
    pub max_points_per_axis: usize,
    pub max_points_total: usize,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self { points_per_feature: 16.0, min_points: 33, max_points_per_axis: 1 << 16, max_points_total: 1 << 22 }
    }
}

/// Integration box and node counts chosen for a given `ε` and frequency bound.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub region: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

pub fn resolution(v: &CompactElement, eps: f64, xi_max: &[f64], opts: &FourierOptions) -> Result<Resolution> {
    let n = v.net.dim_in();
    let mut region = v.joint_support.clone();
    if let Some(h) = v.net.support_hint(eps) {
        for (r, s) in region.iter_mut().zip(h) {
            r.0 = r.0.max(s.0);
            r.1 = r.1.min(s.1);
        }
    }
    let scale = v.net.feature_scale(eps);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let len = (region[i].1 - region[i].0).max(0.0);
        let by_feature = opts.points_per_feature * len / scale[i];
        // aliases of ξ then land beyond the feature bandwidth
        let by_wave = len * xi_max[i] / PI;
        let need = (by_feature + by_wave).ceil() as usize + 1;
        let need = need.max(opts.min_points);
        if need > opts.max_points_per_axis {
            return Err(Error::ResolutionExceeded { required: need, limit: opts.max_points_per_axis });
        }
        points.push(need);
    }
    let total: usize = points.iter().product();
    if total > opts.max_points_total {
        return Err(Error::ResolutionExceeded { required: total, limit: opts.max_points_total });
    }
    Ok(Resolution { region, points })
}

/// `v̂_ε(ξ) = ∫ v_ε(x) e^{-i⟨x, ξ⟩} dx` by the composite trapezoid rule, for each `ξ` in `xis`.
pub fn fourier_at(v: &CompactElement, eps: f64, xis: &[Vec<f64>], opts: &FourierOptions) -> Result<Vec<Complex64>> {
    let n = v.net.dim_in();
    if xis.iter().any(|x| x.len() != n) {
        return Err(Error::DimensionMismatch(format!("frequencies must have {n} components")));
    }
    let mut xi_max = vec![0.0f64; n];
    for xi in xis {
        for i in 0..n {
            xi_max[i] = xi_max[i].max(xi[i].abs());
        }
    }
    let res = resolution(v, eps, &xi_max, opts)?;
    fourier_with(v, eps, xis, &res)
}

/// Trapezoid transform on a prescribed resolution.
pub fn fourier_with(v: &CompactElement, eps: f64, xis: &[Vec<f64>], res: &Resolution) -> Result<Vec<Complex64>> {
    let n = v.net.dim_in();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let (a, b) = res.region[i];
            let m = res.points[i];
            let h = if m > 1 { (b - a) / (m - 1) as f64 } else { 0.0 };
            let nodes: Vec<f64> = (0..m).map(|k| a + h * k as f64).collect();
            let mut w = vec![h; m];
            if m > 1 {
                w[0] *= 0.5;
                w[m - 1] *= 0.5;
            }
            (nodes, w)
        })
        .collect();
    if res.region.iter().any(|r| !(r.1 > r.0)) {
        return Ok(vec![Complex64::new(0.0, 0.0); xis.len()]);
    }
    match n {
        1 => {
            let (xs, ws) = &axes[0];
            let vals: Vec<f64> = xs.iter().zip(ws).map(|(&x, &w)| w * v.net.value(eps, &[x])).collect();
            Ok(xis
                .par_iter()
                .map(|xi| {
                    xs.iter().zip(&vals).fold(Complex64::new(0.0, 0.0), |acc, (&x, &f)| {
                        let (s, c) = (x * xi[0]).sin_cos();
                        acc + Complex64::new(f * c, -f * s)
                    })
                })
                .collect())
        }
        2 => {
            let (xs, wx) = &axes[0];
            let (ys, wy) = &axes[1];
            let vals: Vec<Vec<f64>> = ys
                .par_iter()
                .zip(wy)
                .map(|(&y, &wyv)| xs.iter().zip(wx).map(|(&x, &wxv)| wxv * wyv * v.net.value(eps, &[x, y])).collect())
                .collect();
            // keep only the nonzero span of each row
            let rows: Vec<(f64, usize, &[f64])> = ys
                .iter()
                .zip(&vals)
                .filter_map(|(&y, r)| {
                    let lo = r.iter().position(|&f| f != 0.0)?;
                    let hi = r.iter().rposition(|&f| f != 0.0)?;
                    Some((y, lo, &r[lo..=hi]))
                })
                .collect();
            Ok(xis
                .par_iter()
                .map(|xi| {
                    let px: Vec<Complex64> = xs.iter().map(|&x| Complex64::from_polar(1.0, -x * xi[0])).collect();
                    rows.iter().fold(Complex64::new(0.0, 0.0), |acc, &(y, lo, row)| {
                        let inner = row.iter().zip(&px[lo..]).fold(Complex64::new(0.0, 0.0), |s, (&f, p)| s + p * f);
                        acc + inner * Complex64::from_polar(1.0, -y * xi[1])
                    })
                })
                .collect())
        }
        _ => Err(Error::InvalidArgument(format!("fourier supports dimension 1 or 2, got {n}"))),
    }
}

/// Transform along the ray `λ ξ₁` for each `λ` in `lambdas`.
pub fn fourier_ray(
    v: &CompactElement,
    eps: f64,
    direction: &[f64],
    lambdas: &[f64],
    opts: &FourierOptions,
) -> Result<Vec<Complex64>> {
    let xis: Vec<Vec<f64>> = lambdas.iter().map(|&l| direction.iter().map(|d| l * d).collect()).collect();
    fourier_at(v, eps, &xis, opts)
}

/// `ε`-grid × frequency table of transforms.
pub fn fourier(
    v: &CompactElement,
    grid: &crate::nets::EpsilonGrid<f64>,
    xis: &[Vec<f64>],
    opts: &FourierOptions,
) -> Result<Vec<Vec<Complex64>>> {
    grid.values().iter().map(|&e| fourier_at(v, e, xis, opts)).collect()
}
