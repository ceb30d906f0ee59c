//! Denoisers and the score estimators built on them.
//!
//! A denoiser `D(x; σ)` estimates the clean signal behind `x = x₀ + σn`.
//! Its residual gives the score of the σ-smoothed data density,
//! `∇ log p_σ(x) ≈ (D(x; σ) - x) / σ²`, exactly so for the analytic
//! Gaussian-mixture priors defined here.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::rng;

/// Anything that can denoise a flat data vector at noise level `sigma`.
pub trait Denoiser {
    /// Data dimension, when fixed.
    fn dim(&self) -> Option<usize>;

    fn denoise(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    AnalyticGaussian,
    AnalyticMixture,
    /// Placeholder for an out-of-process or tabulated denoiser; it has no
    /// closed form and cannot be evaluated by [`analytic_denoise`].
    ExternalTable {
        source: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Conditioning {
    None,
    /// Text-style conditioning on the tree genus.
    Genus {
        label: String,
    },
    /// View conditioning on a reference image taken from the given pose.
    ReferenceView {
        azimuth: f64,
        elevation: f64,
    },
}

/// One diagonal-covariance Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension variance.
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    #[serde(default)]
    pub components: Vec<GaussianComponent>,
    pub conditioning: Conditioning,
}

impl DenoiserSpec {
    /// Single Gaussian `N(mean, diag(var))`.
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let spec = DenoiserSpec {
            kind: DenoiserKind::AnalyticGaussian,
            components: vec![GaussianComponent { weight: 1.0, mean, var }],
            conditioning: Conditioning::None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single Gaussian `N(mean, s² I)`.
    pub fn isotropic(mean: Vec<f64>, s: f64) -> Result<Self> {
        let var = vec![s * s; mean.len()];
        Self::gaussian(mean, var)
    }

    pub fn mixture(components: Vec<GaussianComponent>) -> Result<Self> {
        let spec = DenoiserSpec {
            kind: DenoiserKind::AnalyticMixture,
            components,
            conditioning: Conditioning::None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn external(source: impl Into<String>) -> Self {
        DenoiserSpec {
            kind: DenoiserKind::ExternalTable { source: source.into() },
            components: Vec::new(),
            conditioning: Conditioning::None,
        }
    }

    pub fn with_conditioning(mut self, c: Conditioning) -> Self {
        self.conditioning = c;
        self
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, DenoiserKind::ExternalTable { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_analytic() {
            return Ok(());
        }
        if self.components.is_empty() {
            return Err(ArborError::invalid("analytic denoiser needs at least one component"));
        }
        if self.kind == DenoiserKind::AnalyticGaussian && self.components.len() != 1 {
            return Err(ArborError::invalid(
                "analytic-gaussian denoiser has exactly one component",
            ));
        }
        let dim = self.components[0].mean.len();
        if dim == 0 {
            return Err(ArborError::invalid("denoiser dimension must be positive"));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight > 0.0) {
                return Err(ArborError::invalid("mixture weights must be positive"));
            }
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(ArborError::invalid("all components must share one dimension"));
            }
            if c.var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(ArborError::invalid(
                    "covariances must be positive-definite and means finite",
                ));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(ArborError::invalid(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64], sigma: f64) -> Result<()> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ArborError::invalid("sigma must be positive and finite"));
        }
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(ArborError::invalid(format!(
                    "input has dimension {}, denoiser expects {d}",
                    x.len()
                )));
            }
        }
        Ok(())
    }

    /// Per-component log of `w_k N(x; μ_k, diag(v_k + σ²))`.
    fn component_log_terms(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let s2 = sigma * sigma;
        self.components
            .iter()
            .map(|c| {
                let mut acc = c.weight.ln();
                for ((&xi, &mi), &vi) in x.iter().zip(&c.mean).zip(&c.var) {
                    let v = vi + s2;
                    let d = xi - mi;
                    acc -= 0.5 * (d * d / v + (2.0 * std::f64::consts::PI * v).ln());
                }
                acc
            })
            .collect()
    }

    /// `log p_σ(x)`: log-density of the prior convolved with `N(0, σ² I)`.
    pub fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64> {
        self.require_analytic()?;
        self.check_input(x, sigma)?;
        Ok(log_sum_exp(&self.component_log_terms(x, sigma)))
    }

    fn require_analytic(&self) -> Result<()> {
        if let DenoiserKind::ExternalTable { source } = &self.kind {
            return Err(ArborError::UnsupportedOperation(format!(
                "denoiser '{source}' has no closed form"
            )));
        }
        Ok(())
    }
}

impl Denoiser for DenoiserSpec {
    fn dim(&self) -> Option<usize> {
        self.components.first().map(|c| c.mean.len())
    }

    fn denoise(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        analytic_denoise(self, x, sigma)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// Posterior mean `E[x₀ | x₀ + σn = x]` under the mixture prior.
pub fn analytic_denoise(spec: &DenoiserSpec, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    spec.require_analytic()?;
    spec.check_input(x, sigma)?;
    let s2 = sigma * sigma;
    let logs = spec.component_log_terms(x, sigma);
    let norm = log_sum_exp(&logs);
    let mut out = vec![0.0; x.len()];
    for (c, l) in spec.components.iter().zip(&logs) {
        let r = (l - norm).exp();
        if r == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let v = c.var[i];
            *o += r * (v * x[i] + s2 * c.mean[i]) / (v + s2);
        }
    }
    Ok(out)
}

/// Denoiser-based score `(D(x; σ) - x) / σ²`.
pub fn score(d: &dyn Denoiser, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(ArborError::invalid("sigma must be positive"));
    }
    let den = d.denoise(x, sigma)?;
    let s2 = sigma * sigma;
    Ok(den.iter().zip(x).map(|(d, x)| (d - x) / s2).collect())
}

/// Monte-Carlo estimate with per-dimension standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PaasEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

/// Perturb-and-average score: the average over `n ~ N(0, I)` of
/// `(D(x + σn; σ) - x) / σ²`.
pub fn paas(d: &dyn Denoiser, x: &[f64], sigma: f64, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(paas_estimate(d, x, sigma, n_samples, seed)?.mean)
}

pub fn paas_estimate(d: &dyn Denoiser, x: &[f64], sigma: f64, n_samples: usize, seed: u64) -> Result<PaasEstimate> {
    if n_samples == 0 {
        return Err(ArborError::invalid("paas needs at least one sample"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ArborError::invalid("sigma must be positive and finite"));
    }
    let mut r = rng::seeded(seed);
    let dim = x.len();
    let s2 = sigma * sigma;
    // Welford accumulators
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut noisy = vec![0.0; dim];
    for k in 0..n_samples {
        for (nv, &xv) in noisy.iter_mut().zip(x) {
            let n: f64 = r.sample(StandardNormal);
            *nv = xv + sigma * n;
        }
        let den = d.denoise(&noisy, sigma)?;
        let count = (k + 1) as f64;
        for i in 0..dim {
            let v = (den[i] - x[i]) / s2;
            let delta = v - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (v - mean[i]);
        }
    }
    let n = n_samples as f64;
    let stderr = if n_samples > 1 {
        m2.iter().map(|m| (m / (n - 1.0) / n).sqrt()).collect()
    } else {
        vec![f64::NAN; dim]
    };
    Ok(PaasEstimate {
        mean,
        stderr,
        samples: n_samples,
    })
}

/// Descending geometric ladder of noise levels, sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub sigmas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn geometric(sigma_max: f64, sigma_min: f64, levels: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max >= sigma_min && sigma_max.is_finite()) || levels == 0 {
            return Err(ArborError::invalid(
                "schedule needs 0 < sigma_min <= sigma_max and levels >= 1",
            ));
        }
        let sigmas = if levels == 1 {
            vec![sigma_max]
        } else {
            let ratio = (sigma_min / sigma_max).ln() / (levels - 1) as f64;
            (0..levels).map(|i| sigma_max * (ratio * i as f64).exp()).collect()
        };
        Ok(NoiseSchedule { sigmas })
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(ArborError::invalid("noise levels must be positive and finite"));
        }
        if self.sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(ArborError::invalid("noise levels must be descending"));
        }
        Ok(())
    }

    pub fn sample(&self, r: &mut rng::Rng) -> f64 {
        self.sigmas[r.random_range(0..self.sigmas.len())]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule::geometric(1.0, 0.02, 50).expect("valid default schedule")
    }
}
