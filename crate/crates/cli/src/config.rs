//! Run configuration: the shared header plus per-subcommand parameter blocks.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;
use std::sync::Arc;

use colombeau_core::embedding::{embed, DistributionSpec, Mollifier, EMBED_ORDER};
use colombeau_core::experiments::{line_delta, shear_map, GammaChoice};
use colombeau_core::nets::{mul, ClassifyParams, Component};
use colombeau_core::{Grid, Net, NumberNet};
use serde::{Deserialize, Serialize};

/// Dyadic `ε_j = 2^{-j}`, `j = j_min..=j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSpec {
    pub j_min: i32,
    pub j_max: i32,
}

impl EpsSpec {
    pub fn grid(&self) -> Result<Grid, String> {
        Grid::dyadic(self.j_min, self.j_max).map_err(|e| format!("eps: {e}"))
    }

    pub fn levels(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub q_check: u32,
    pub slow_scale_threshold: f64,
    pub p_max: usize,
    pub n_cap: f64,
    pub grid_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { q_check: 6, slow_scale_threshold: 0.1, p_max: 4, n_cap: 12.0, grid_slack: 1.25 }
    }
}

impl Thresholds {
    pub fn classify(&self) -> ClassifyParams<f64> {
        ClassifyParams { q_check: self.q_check, slow_scale_threshold: self.slow_scale_threshold, ..ClassifyParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must name the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    pub eps: EpsSpec,
    /// Cell side used by the spatial estimators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub mollifier: Mollifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Offset into the low-discrepancy point sequences.
    #[serde(default)]
    pub seed: usize,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn validate(&self, subcommand: &str) -> Result<(), String> {
        if let Some(name) = &self.experiment {
            if name != subcommand {
                return Err(format!("config: experiment is \"{name}\" but the subcommand is \"{subcommand}\""));
            }
        }
        self.eps.grid()?;
        if let Some(h) = self.resolution {
            if !(h > 0.0 && h.is_finite()) {
                return Err(format!("config: resolution must be positive, got {h}"));
            }
        }
        let t = &self.thresholds;
        let positive = [
            ("q_check", t.q_check as f64),
            ("slow_scale_threshold", t.slow_scale_threshold),
            ("p_max", t.p_max as f64),
            ("n_cap", t.n_cap),
            ("grid_slack", t.grid_slack),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("config: thresholds.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Subcommand block, with `{}` standing in for an absent one.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T, String> {
        let v = if self.params.is_null() { serde_json::json!({}) } else { self.params.clone() };
        serde_json::from_value(v).map_err(|e| format!("config: params: {e}"))
    }
}

/// Generalized number sampled on the run's ε-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NumberSpec {
    /// `c ε^{-p}`.
    Power {
        p: f64,
        #[serde(default = "one")]
        c: f64,
    },
    /// `log(1/ε)`.
    Log {},
    /// `1/log(1/ε)`.
    InverseLog {},
    /// `e^{-1/ε}`.
    ExpNegInv {},
    /// `sin(1/ε)`.
    SinInv {},
    Constant { value: f64 },
    /// Explicit values, one per grid point.
    Values { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl NumberSpec {
    pub fn sample(&self, grid: &Grid) -> Result<NumberNet, String> {
        let f = |g: fn(f64) -> f64| NumberNet::from_fn(grid, g);
        Ok(match self {
            Self::Power { p, c } => NumberNet::from_fn(grid, |e| c * e.powf(-p)),
            Self::Log {} => f(|e| (1.0 / e).ln()),
            Self::InverseLog {} => f(|e| 1.0 / (1.0 / e).ln()),
            Self::ExpNegInv {} => f(|e| (-1.0 / e).exp()),
            Self::SinInv {} => f(|e| (1.0 / e).sin()),
            Self::Constant { value } => NumberNet::from_fn(grid, |_| *value),
            Self::Values { values } => NumberNet::from_values(grid, values.clone()).map_err(|e| e.to_string())?,
        })
    }
}

/// Representative net on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetSpec {
    Delta {
        a: Vec<f64>,
    },
    Heaviside {
        #[serde(default = "one")]
        orientation: f64,
    },
    TensorDelta {
        dim: usize,
        axis: usize,
        a: f64,
    },
    /// `sin(x/ε)`.
    SinInv {},
    /// `Σ c_k x^k`, constant in ε.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Constant {
        #[serde(default = "one_dim")]
        dim: usize,
        value: f64,
    },
    /// `ε^{-1}ρ((x + s γ_ε y)/ε)`.
    LineDelta {
        gamma: GammaChoice,
        slope: f64,
    },
    /// Product of the two lines with slopes `±1`.
    CrossingLines {
        gamma: GammaChoice,
    },
}

fn one_dim() -> usize {
    1
}

impl NetSpec {
    pub fn build(&self, rho: Mollifier) -> Result<Net, String> {
        let err = |e: colombeau_core::Error| e.to_string();
        Ok(match self {
            Self::Delta { a } => embed(&DistributionSpec::Delta { a: a.clone() }, rho).map_err(err)?,
            Self::Heaviside { orientation } => {
                embed(&DistributionSpec::Heaviside { orientation: *orientation }, rho).map_err(err)?
            }
            Self::TensorDelta { dim, axis, a } => {
                embed(&DistributionSpec::TensorDelta { dim: *dim, axis: *axis, a: *a }, rho).map_err(err)?
            }
            Self::SinInv {} => Net::scalar(1, EMBED_ORDER, |e, x: &[f64], al: &[usize]| {
                let k = al[0];
                (x[0] / e + k as f64 * FRAC_PI_2).sin() * e.powi(-(k as i32))
            })
            .with_scale(Arc::new(|e| vec![e])),
            Self::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err("polynomial needs at least one coefficient".into());
                }
                let c = coeffs.clone();
                Net::scalar(1, usize::MAX, move |_, x: &[f64], al: &[usize]| poly_deriv(&c, al[0], x[0]))
            }
            Self::Constant { dim, value } => {
                if *dim == 0 {
                    return Err("constant net needs dim >= 1".into());
                }
                Net::constant(*dim, *value)
            }
            Self::LineDelta { gamma, slope } => line_delta(*gamma, rho, *slope),
            Self::CrossingLines { gamma } => {
                let g = *gamma;
                let r = rho.support_radius();
                mul(&line_delta(g, rho, 1.0), &line_delta(g, rho, -1.0))
                    .map_err(err)?
                    .with_support(Arc::new(move |e| {
                        let (a, b) = (r * e, r * e / g.value(e));
                        Some(vec![(-a, a), (-b, b)])
                    }))
                    .with_scale(Arc::new(move |e| vec![e, e / g.value(e)]))
            }
        })
    }
}

fn poly_deriv(c: &[f64], k: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for (n, &cn) in c.iter().enumerate().skip(k).rev() {
        let falling: f64 = ((n - k + 1)..=n).map(|m| m as f64).product();
        acc = acc * x + cn * falling;
    }
    acc
}

/// Generalized map `ℝ² → ℝ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `(x + γ_ε y, x − γ_ε y)`.
    Shear { gamma: GammaChoice },
    /// `x ↦ A x`, constant in ε.
    Linear { matrix: [[f64; 2]; 2] },
}

impl MapSpec {
    pub fn build(&self) -> Net {
        match self {
            Self::Shear { gamma } => shear_map(*gamma),
            Self::Linear { matrix } => {
                let m = *matrix;
                Net::vector(
                    2,
                    usize::MAX,
                    (0..2)
                        .map(|i| {
                            Arc::new(move |_: f64, z: &[f64], a: &[usize]| match (a[0], a[1]) {
                                (0, 0) => m[i][0] * z[0] + m[i][1] * z[1],
                                (1, 0) => m[i][0],
                                (0, 1) => m[i][1],
                                _ => 0.0,
                            }) as Component<f64>
                        })
                        .collect(),
                )
            }
        }
    }
}
