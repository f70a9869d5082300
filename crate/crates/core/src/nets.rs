//! Representative nets and asymptotic classification.
//!
//! A Colombeau representative `(u_ε)_ε` is modelled by [`RepresentativeNet`]: a
//! closure `(ε, x, α) ↦ ∂^α u_ε(x)` per output component. Generalized numbers are
//! sampled on an [`EpsilonGrid`] and classified by a log-log tail regression.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly decreasing sequence of ε values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrid<T> {
    values: Vec<T>,
}

impl<T: Scalar> EpsilonGrid<T> {
    pub const MIN_LEN: usize = 8;

    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(Error::InvalidGrid(format!(
                "need at least {} values, got {}",
                Self::MIN_LEN,
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > T::zero() && v <= T::one()) {
                return Err(Error::InvalidGrid(format!("value {v} at index {i} outside (0, 1]")));
            }
            if i > 0 && v >= values[i - 1] {
                return Err(Error::InvalidGrid(format!("not strictly decreasing at index {i}")));
            }
        }
        Ok(Self { values })
    }

    /// `ε_j = 2^{-j}` for `j = j_min..=j_max`.
    pub fn dyadic(j_min: i32, j_max: i32) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new((j_min..=j_max).map(|j| two.powi(-j)).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn finest(&self) -> T {
        *self.values.last().expect("grid is non-empty")
    }

    pub fn coarsest(&self) -> T {
        self.values[0]
    }
}

impl<T: Scalar> Default for EpsilonGrid<T> {
    fn default() -> Self {
        Self::dyadic(1, 24).expect("default grid is valid")
    }
}

/// `(ε, x, α) ↦ ∂^α u_ε(x)` for one output component.
pub type Component<T> = Arc<dyn Fn(T, &[T], &[usize]) -> T + Send + Sync>;
/// ε-dependent box outside of which the net is negligible.
pub type BoxHint<T> = Arc<dyn Fn(T) -> Option<Vec<(T, T)>> + Send + Sync>;
/// ε-dependent smallest feature length per input axis.
pub type ScaleHint<T> = Arc<dyn Fn(T) -> Vec<T> + Send + Sync>;

/// Samplable net of smooth maps `ℝ^{dim_in} → ℝ^{dim_out}` with derivative access.
#[derive(Clone)]
pub struct RepresentativeNet<T> {
    dim_in: usize,
    components: Vec<Component<T>>,
    deriv_order: usize,
    support: Option<BoxHint<T>>,
    scale: Option<ScaleHint<T>>,
}

impl<T: Scalar> std::fmt::Debug for RepresentativeNet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RepresentativeNet")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.components.len())
            .field("deriv_order", &self.deriv_order)
            .finish()
    }
}

impl<T: Scalar> RepresentativeNet<T> {
    /// Scalar-valued net from a jet closure `(ε, x, α) ↦ ∂^α u_ε(x)`.
    pub fn scalar<F>(dim_in: usize, deriv_order: usize, f: F) -> Self
    where
        F: Fn(T, &[T], &[usize]) -> T + Send + Sync + 'static,
    {
        Self::vector(dim_in, deriv_order, vec![Arc::new(f) as Component<T>])
    }

    pub fn vector(dim_in: usize, deriv_order: usize, components: Vec<Component<T>>) -> Self {
        assert!(!components.is_empty(), "a net needs at least one component");
        Self { dim_in, components, deriv_order, support: None, scale: None }
    }

    /// ε-independent constant, all derivatives available.
    pub fn constant(dim_in: usize, c: T) -> Self {
        Self::scalar(dim_in, usize::MAX, move |_, _, a| if order(a) == 0 { c } else { T::zero() })
    }

    pub fn zero(dim_in: usize) -> Self {
        Self::constant(dim_in, T::zero())
    }

    /// Coordinate function `x ↦ x_i`.
    pub fn coordinate(dim_in: usize, i: usize) -> Self {
        assert!(i < dim_in);
        Self::scalar(dim_in, usize::MAX, move |_, x, a| match order(a) {
            0 => x[i],
            1 if a[i] == 1 => T::one(),
            _ => T::zero(),
        })
    }

    pub fn with_support(mut self, hint: BoxHint<T>) -> Self {
        self.support = Some(hint);
        self
    }

    pub fn with_scale(mut self, hint: ScaleHint<T>) -> Self {
        self.scale = Some(hint);
        self
    }

    pub fn without_support(mut self) -> Self {
        self.support = None;
        self
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.components.len()
    }

    pub fn deriv_order(&self) -> usize {
        self.deriv_order
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn support_hint(&self, eps: T) -> Option<Vec<(T, T)>> {
        self.support.as_ref().and_then(|h| h(eps))
    }

    pub fn support_fn(&self) -> Option<BoxHint<T>> {
        self.support.clone()
    }

    pub fn scale_fn(&self) -> Option<ScaleHint<T>> {
        self.scale.clone()
    }

    /// Smallest feature length per axis; `1` when no hint was supplied.
    pub fn feature_scale(&self, eps: T) -> Vec<T> {
        match &self.scale {
            Some(h) => h(eps),
            None => vec![T::one(); self.dim_in],
        }
    }

    /// First component at order zero.
    #[inline]
    pub fn value(&self, eps: T, x: &[T]) -> T {
        let zero = [0usize; 4];
        if self.dim_in <= 4 {
            (self.components[0])(eps, x, &zero[..self.dim_in])
        } else {
            (self.components[0])(eps, x, &vec![0; self.dim_in])
        }
    }

    pub fn eval(&self, eps: T, x: &[T]) -> Vec<T> {
        let zero = vec![0; self.dim_in];
        self.components.iter().map(|c| c(eps, x, &zero)).collect()
    }

    /// Unchecked partial derivative of one component.
    #[inline]
    pub fn partial(&self, component: usize, eps: T, x: &[T], alpha: &[usize]) -> T {
        (self.components[component])(eps, x, alpha)
    }

    pub fn deriv(&self, eps: T, x: &[T], alpha: &[usize]) -> Result<Vec<T>> {
        if alpha.len() != self.dim_in || x.len() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "net has dim_in {}, got |x| = {}, |alpha| = {}",
                self.dim_in,
                x.len(),
                alpha.len()
            )));
        }
        let k = order(alpha);
        if k > self.deriv_order {
            return Err(Error::OrderExceeded { requested: k, available: self.deriv_order });
        }
        Ok(self.components.iter().map(|c| c(eps, x, alpha)).collect())
    }

    /// Largest relative deviation between supplied first partials of every
    /// `∂^β u` (`|β| < D`) and central differences with step `1e-5 · scale`.
    ///
    /// Meaningful in double precision only.
    pub fn fd_check(&self, eps: T, x: &[T]) -> Result<T> {
        if x.len() != self.dim_in {
            return Err(Error::DimensionMismatch(format!("expected {} coordinates", self.dim_in)));
        }
        let scale = self.feature_scale(eps);
        let top = self.deriv_order.min(4);
        let mut worst = T::zero();
        for beta in multi_indices(self.dim_in, top.saturating_sub(1)) {
            for i in 0..self.dim_in {
                let h = T::lit(1e-5) * scale[i];
                let mut gamma = beta.clone();
                gamma[i] += 1;
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[i] += h;
                xm[i] -= h;
                for c in &self.components {
                    let base = c(eps, x, &beta).abs();
                    let d = c(eps, x, &gamma);
                    let fd = (c(eps, &xp, &beta) - c(eps, &xm, &beta)) / (h + h);
                    let denom = d.abs().max(fd.abs()).max(base / scale[i]).max(T::min_positive_value());
                    worst = worst.max((fd - d).abs() / denom);
                }
            }
        }
        Ok(worst)
    }
}

/// `|α| = Σ α_i`.
#[inline]
pub fn order(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

/// All multi-indices of length `dim` with `|α| ≤ max_order`, graded by order.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        out.push(Vec::new());
        return out;
    }
    for k in 0..=max_order {
        rec(dim, k, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Set partitions of `{0, …, n-1}`, each as a list of blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sum of two nets with equal dimensions.
pub fn add<T: Scalar>(a: &RepresentativeNet<T>, b: &RepresentativeNet<T>) -> Result<RepresentativeNet<T>> {
    check_same_shape(a, b)?;
    let comps = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(ca, cb)| {
            let (ca, cb) = (ca.clone(), cb.clone());
            Arc::new(move |e: T, x: &[T], al: &[usize]| ca(e, x, al) + cb(e, x, al)) as Component<T>
        })
        .collect();
    let mut out = RepresentativeNet::vector(a.dim_in, a.deriv_order.min(b.deriv_order), comps);
    if let (Some(sa), Some(sb)) = (a.support.clone(), b.support.clone()) {
        out.support = Some(Arc::new(move |e| match (sa(e), sb(e)) {
            (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(p, q)| (p.0.min(q.0), p.1.max(q.1))).collect()),
            _ => None,
        }));
    }
    out.scale = min_scale(a, b);
    Ok(out)
}

/// Componentwise product; derivatives by the Leibniz rule.
pub fn mul<T: Scalar>(a: &RepresentativeNet<T>, b: &RepresentativeNet<T>) -> Result<RepresentativeNet<T>> {
    check_same_shape(a, b)?;
    let comps = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(ca, cb)| {
            let (ca, cb) = (ca.clone(), cb.clone());
            Arc::new(move |e: T, x: &[T], al: &[usize]| {
                if order(al) == 0 {
                    return ca(e, x, al) * cb(e, x, al);
                }
                let mut acc = T::zero();
                let mut rest = al.to_vec();
                for beta in sub_indices(al) {
                    let mut w = 1.0;
                    for i in 0..al.len() {
                        rest[i] = al[i] - beta[i];
                        w *= binomial(al[i], beta[i]);
                    }
                    acc += T::lit(w) * ca(e, x, &beta) * cb(e, x, &rest);
                }
                acc
            }) as Component<T>
        })
        .collect();
    let mut out = RepresentativeNet::vector(a.dim_in, a.deriv_order.min(b.deriv_order), comps);
    out.support = match (a.support.clone(), b.support.clone()) {
        (Some(sa), Some(sb)) => Some(Arc::new(move |e| match (sa(e), sb(e)) {
            (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(p, q)| (p.0.max(q.0), p.1.min(q.1))).collect()),
            (x, None) => x,
            (None, y) => y,
        })),
        (s, None) | (None, s) => s,
    };
    out.scale = min_scale(a, b);
    Ok(out)
}

/// Multiply every component by a constant.
pub fn scale<T: Scalar>(a: &RepresentativeNet<T>, c: T) -> RepresentativeNet<T> {
    let comps = a
        .components
        .iter()
        .map(|ca| {
            let ca = ca.clone();
            Arc::new(move |e: T, x: &[T], al: &[usize]| c * ca(e, x, al)) as Component<T>
        })
        .collect();
    let mut out = RepresentativeNet::vector(a.dim_in, a.deriv_order, comps);
    out.support = a.support.clone();
    out.scale = a.scale.clone();
    out
}

/// `∂^β a` as a net of order `D − |β|`.
pub fn derivative<T: Scalar>(a: &RepresentativeNet<T>, beta: &[usize]) -> Result<RepresentativeNet<T>> {
    if beta.len() != a.dim_in {
        return Err(Error::DimensionMismatch(format!("multi-index of length {} for dim {}", beta.len(), a.dim_in)));
    }
    let k = order(beta);
    if k > a.deriv_order {
        return Err(Error::OrderExceeded { requested: k, available: a.deriv_order });
    }
    let comps = a
        .components
        .iter()
        .map(|ca| {
            let (ca, beta) = (ca.clone(), beta.to_vec());
            Arc::new(move |e: T, x: &[T], al: &[usize]| {
                let shifted: Vec<usize> = al.iter().zip(&beta).map(|(p, q)| p + q).collect();
                ca(e, x, &shifted)
            }) as Component<T>
        })
        .collect();
    let d = if a.deriv_order == usize::MAX { usize::MAX } else { a.deriv_order - k };
    let mut out = RepresentativeNet::vector(a.dim_in, d, comps);
    out.support = a.support.clone();
    out.scale = a.scale.clone();
    Ok(out)
}

/// `outer ∘ inner` at fixed ε, derivatives by the multivariate Faà di Bruno formula.
///
/// With a scalar `outer` this is the compose-scalar operation; with a map
/// `inner: ℝⁿ → ℝᵐ` it is the pullback `inner^* outer`.
pub fn compose<T: Scalar>(
    outer: &RepresentativeNet<T>,
    inner: &RepresentativeNet<T>,
) -> Result<RepresentativeNet<T>> {
    if outer.dim_in != inner.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "outer expects {} inputs, inner yields {}",
            outer.dim_in,
            inner.dim_out()
        )));
    }
    let d = outer.deriv_order.min(inner.deriv_order);
    let parts: Arc<Vec<Vec<Vec<Vec<usize>>>>> = Arc::new((0..=d.min(6)).map(set_partitions).collect());
    let m = inner.dim_out();
    let inner_c: Arc<Vec<Component<T>>> = Arc::new(inner.components.clone());
    let comps = outer
        .components
        .iter()
        .map(|co| {
            let co = co.clone();
            let inner_c = inner_c.clone();
            let parts = parts.clone();
            Arc::new(move |e: T, x: &[T], al: &[usize]| {
                let n = x.len();
                let zero = vec![0; n];
                let y: Vec<T> = inner_c.iter().map(|c| c(e, x, &zero)).collect();
                let r = order(al);
                if r == 0 {
                    return co(e, &y, &vec![0; m]);
                }
                let axes: Vec<usize> = al.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat(i).take(k)).collect();
                let mut total = T::zero();
                let mut beta = vec![0; n];
                let mut gamma = vec![0; m];
                for part in &parts[r] {
                    // derivative of each inner component on each block
                    let blocks: Vec<Vec<T>> = part
                        .iter()
                        .map(|blk| {
                            beta.iter_mut().for_each(|b| *b = 0);
                            for &p in blk {
                                beta[axes[p]] += 1;
                            }
                            inner_c.iter().map(|c| c(e, x, &beta)).collect()
                        })
                        .collect();
                    let k = part.len();
                    let mut js = vec![0usize; k];
                    loop {
                        let mut prod = T::one();
                        for (bi, &j) in js.iter().enumerate() {
                            prod *= blocks[bi][j];
                        }
                        if prod != T::zero() {
                            gamma.iter_mut().for_each(|g| *g = 0);
                            for &j in &js {
                                gamma[j] += 1;
                            }
                            total += prod * co(e, &y, &gamma);
                        }
                        let mut t = 0;
                        while t < k {
                            js[t] += 1;
                            if js[t] < m {
                                break;
                            }
                            js[t] = 0;
                            t += 1;
                        }
                        if t == k {
                            break;
                        }
                    }
                }
                total
            }) as Component<T>
        })
        .collect();
    let mut out = RepresentativeNet::vector(inner.dim_in, d.min(6), comps);
    out.scale = inner.scale.clone();
    Ok(out)
}

fn sub_indices(alpha: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(alpha.len())];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=a).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn check_same_shape<T: Scalar>(a: &RepresentativeNet<T>, b: &RepresentativeNet<T>) -> Result<()> {
    if a.dim_in != b.dim_in || a.dim_out() != b.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "({} -> {}) vs ({} -> {})",
            a.dim_in,
            a.dim_out(),
            b.dim_in,
            b.dim_out()
        )));
    }
    Ok(())
}

fn min_scale<T: Scalar>(a: &RepresentativeNet<T>, b: &RepresentativeNet<T>) -> Option<ScaleHint<T>> {
    match (a.scale.clone(), b.scale.clone()) {
        (Some(sa), Some(sb)) => Some(Arc::new(move |e| sa(e).iter().zip(sb(e)).map(|(p, q)| p.min(q)).collect())),
        (s, None) | (None, s) => s,
    }
}

/// A generalized number sampled on an ε-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedNumberNet<T> {
    eps: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> GeneralizedNumberNet<T> {
    pub fn from_fn(grid: &EpsilonGrid<T>, f: impl Fn(T) -> T) -> Self {
        Self { eps: grid.values().to_vec(), values: grid.values().iter().map(|&e| f(e)).collect() }
    }

    pub fn from_values(grid: &EpsilonGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} values for {} grid points", values.len(), grid.len())));
        }
        Ok(Self { eps: grid.values().to_vec(), values })
    }

    pub fn eps(&self) -> &[T] {
        &self.eps
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { eps: self.eps.clone(), values: self.values.iter().map(|&v| c * v).collect() }
    }
}

/// Fitted growth exponent `p` with `|v_ε| ≈ C ε^{-p}` and RMS log residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit<T> {
    pub exponent: T,
    pub residual: T,
}

/// Least-squares slope of `log|v|` against `log(1/ε)` over the trailing
/// `tail_fraction` of the grid.
pub fn estimate_growth_exponent<T: Scalar>(net: &GeneralizedNumberNet<T>, tail_fraction: T) -> Result<GrowthFit<T>> {
    let n = net.values.len();
    if n < EpsilonGrid::<T>::MIN_LEN {
        return Err(Error::InsufficientData { usable: n, needed: EpsilonGrid::<T>::MIN_LEN });
    }
    if !(tail_fraction > T::zero() && tail_fraction <= T::one()) {
        return Err(Error::InvalidArgument(format!("tail_fraction {tail_fraction} outside (0, 1]")));
    }
    let m = (tail_fraction * T::lit(n as f64)).ceil().to_usize().unwrap_or(n).clamp(1, n);
    fit_tail(&net.eps[n - m..], &net.values[n - m..])
}

fn fit_tail<T: Scalar>(eps: &[T], values: &[T]) -> Result<GrowthFit<T>> {
    let floor = T::lit(1e-300).max(T::min_positive_value());
    let is_zero = |v: T| v.abs() < floor;
    if values.iter().all(|&v| is_zero(v)) || values.last().is_some_and(|&v| is_zero(v)) {
        return Ok(GrowthFit { exponent: T::neg_infinity(), residual: T::zero() });
    }
    let pts: Vec<(T, T)> = eps
        .iter()
        .zip(values)
        .filter(|(_, v)| !is_zero(**v))
        .map(|(&e, &v)| (-e.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData { usable: pts.len(), needed: 4 });
    }
    let k = T::lit(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let slope = sxy / sxx;
    let rss = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<T>();
    Ok(GrowthFit { exponent: slope, residual: (rss / k).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum AsymptoticTag {
    Negligible,
    Moderate,
    SlowScale,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AsymptoticClass<T> {
    pub tag: AsymptoticTag,
    pub exponent: T,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyParams<T> {
    pub q_check: u32,
    pub slow_scale_threshold: T,
    pub residual_cap: T,
    pub tail_fraction: T,
}

impl<T: Scalar> Default for ClassifyParams<T> {
    fn default() -> Self {
        Self {
            q_check: 6,
            slow_scale_threshold: T::lit(0.1),
            residual_cap: T::lit(0.5),
            tail_fraction: T::lit(0.5),
        }
    }
}

pub fn classify_net<T: Scalar>(net: &GeneralizedNumberNet<T>, params: &ClassifyParams<T>) -> Result<AsymptoticClass<T>> {
    if params.q_check < 3 {
        return Err(Error::Precondition(format!("q_check must be >= 3, got {}", params.q_check)));
    }
    let fit = estimate_growth_exponent(net, params.tail_fraction)?;
    let tag = |tag| Ok(AsymptoticClass { tag, exponent: fit.exponent, residual: fit.residual });
    if fit.exponent <= -T::lit(params.q_check as f64) {
        return tag(AsymptoticTag::Negligible);
    }
    if !(fit.residual <= params.residual_cap) || !fit.exponent.is_finite() {
        return tag(AsymptoticTag::Undetermined);
    }
    if fit.exponent.abs() <= params.slow_scale_threshold {
        let flat = T::lit(1e-6);
        if fit.exponent.abs() <= flat {
            return tag(AsymptoticTag::SlowScale);
        }
        let n = net.values.len();
        let m = (params.tail_fraction * T::lit(n as f64)).ceil().to_usize().unwrap_or(n).clamp(1, n);
        let h = m / 2;
        if let Ok(deep) = fit_tail(&net.eps[n - h..], &net.values[n - h..]) {
            if deep.exponent.abs() < fit.exponent.abs() - flat {
                return tag(AsymptoticTag::SlowScale);
            }
        }
    }
    tag(AsymptoticTag::Moderate)
}

/// Outcome of [`is_moderate_function`].
#[derive(Debug, Clone)]
pub struct ModerateReport<T> {
    pub moderate: bool,
    pub worst_exponent: T,
    pub per_index: Vec<(Vec<usize>, AsymptoticClass<T>)>,
}

/// Uniform nodes on a box, `per_axis` per coordinate.
pub fn box_nodes<T: Scalar>(k: &[(T, T)], per_axis: usize) -> Vec<Vec<T>> {
    let axes: Vec<Vec<T>> = k
        .iter()
        .map(|&(lo, hi)| {
            if per_axis == 1 {
                return vec![(lo + hi) / T::lit(2.0)];
            }
            let step = (hi - lo) / T::lit((per_axis - 1) as f64);
            (0..per_axis).map(|i| lo + step * T::lit(i as f64)).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for ax in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Classify `ε ↦ sup_K |∂^α u_ε|` for every `|α| ≤ max_order`.
///
/// The sup is taken on `per_axis` uniform nodes per axis (513 by default, so that
/// the centre of a symmetric box is a node).
pub fn is_moderate_function<T: Scalar>(
    u: &RepresentativeNet<T>,
    k: &[(T, T)],
    max_order: usize,
    grid: &EpsilonGrid<T>,
    per_axis: usize,
    params: &ClassifyParams<T>,
) -> Result<ModerateReport<T>> {
    if max_order > u.deriv_order() {
        return Err(Error::OrderExceeded { requested: max_order, available: u.deriv_order() });
    }
    if k.len() != u.dim_in() {
        return Err(Error::DimensionMismatch(format!("box has {} axes, net has {}", k.len(), u.dim_in())));
    }
    if per_axis == 0 || k.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(Error::EmptyDomain("sampling grid of K is empty".into()));
    }
    let nodes = box_nodes(k, per_axis);
    let mut per_index = Vec::new();
    let mut worst = T::neg_infinity();
    let mut moderate = true;
    for alpha in multi_indices(u.dim_in(), max_order) {
        let sups: Vec<T> = grid
            .values()
            .par_iter()
            .map(|&e| {
                nodes
                    .iter()
                    .flat_map(|x| (0..u.dim_out()).map(move |c| (c, x)))
                    .map(|(c, x)| u.partial(c, e, x, &alpha).abs())
                    .fold(T::zero(), |a, b| if b.is_nan() { b } else { a.max(b) })
            })
            .collect();
        let class = classify_net(&GeneralizedNumberNet::from_values(grid, sups)?, params)?;
        if class.tag == AsymptoticTag::Undetermined || class.exponent.is_nan() || class.exponent == T::infinity() {
            moderate = false;
        }
        worst = worst.max(class.exponent);
        per_index.push((alpha, class));
    }
    Ok(ModerateReport { moderate, worst_exponent: worst, per_index })
}
