//! Noise-level estimation, deflection covariance, significance testing and
//! residual-based outlier filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{d_matrix, EstimatorOutput, MAX_CONDITION};
use crate::field::DisplacementField;
use crate::geometry::{Matrix3, Vector3, Vector6};

/// Fewest nodes a field may keep after filtering.
pub const MIN_FILTERED_NODES: usize = 6;

/// Pooled residual-based noise estimate over `m` experiments:
/// `sqrt(sum r² / sum_j (3 n_j - 6))`.
pub fn estimate_sigma<R: AsRef<[Vector3]>>(residual_sets: &[R]) -> Result<f64> {
    if residual_sets.is_empty() {
        return Err(Error::InvalidInput("no residual sets to pool".into()));
    }
    let mut sum_sq = 0.0;
    let mut dof = 0usize;
    for (j, set) in residual_sets.iter().enumerate() {
        let set = set.as_ref();
        if set.len() <= 2 {
            return Err(Error::InvalidInput(format!(
                "experiment {j} has {} nodes; noise variance is undefined below 3",
                set.len()
            )));
        }
        dof += 3 * set.len() - 6;
        sum_sq += set.iter().map(|r| r.norm_squared()).sum::<f64>();
    }
    Ok((sum_sq / dof as f64).sqrt())
}

/// Covariance of an estimated deflection under i.i.d. noise of level `sigma`.
/// `cov_t` refers to the translation at the field centroid unless moved with
/// [`DeflectionCovariance::at_reference`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionCovariance {
    pub cov_t: Matrix3,
    pub cov_phi: Matrix3,
    pub sigma: f64,
    unit_t: Matrix3,
    unit_phi: Matrix3,
}

impl DeflectionCovariance {
    /// Builds the covariance from its value at unit noise variance.
    pub fn from_unit(unit_t: Matrix3, unit_phi: Matrix3, sigma: f64) -> Self {
        let s2 = sigma * sigma;
        Self {
            cov_t: unit_t * s2,
            cov_phi: unit_phi * s2,
            sigma,
            unit_t,
            unit_phi,
        }
    }

    /// Same geometry at a different noise level.
    pub fn rescaled(&self, sigma: f64) -> Self {
        Self::from_unit(self.unit_t, self.unit_phi, sigma)
    }

    /// Moves `cov_t` from the centroid to the reference point of a field whose
    /// centroid sits at `centroid`: `t_ref = t_c + centroid x phi`. The
    /// centroid translation and rotation estimates are uncorrelated, so only
    /// the rotational term is added.
    pub fn at_reference(&self, centroid: &Vector3) -> Self {
        let a = centroid.cross_matrix();
        Self::from_unit(
            self.unit_t + a * self.unit_phi * a.transpose(),
            self.unit_phi,
            self.sigma,
        )
    }

    /// Standard deviations of `(t, phi)` components.
    pub fn std(&self) -> Vector6 {
        let t = self.cov_t.diagonal();
        let p = self.cov_phi.diagonal();
        Vector6::new(t.x, t.y, t.z, p.x, p.y, p.z).map(f64::sqrt)
    }
}

/// `cov[t] = sigma²/n I`, `cov[phi] = sigma² (sum P̂ᵀP̂)⁻¹`.
pub fn deflection_covariance(
    field: &DisplacementField,
    sigma: f64,
) -> Result<DeflectionCovariance> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    let d = d_matrix(field);
    let eig = nalgebra::SymmetricEigen::new(d).eigenvalues;
    if eig.max().is_nan() || eig.max() <= 0.0 || eig.min() <= eig.max() / MAX_CONDITION {
        return Err(Error::RotationUnidentifiable(
            "rotational normal matrix is singular".into(),
        ));
    }
    let d_inv = d.try_inverse().ok_or_else(|| {
        Error::RotationUnidentifiable("rotational normal matrix is singular".into())
    })?;
    Ok(DeflectionCovariance::from_unit(
        Matrix3::identity() / field.len() as f64,
        d_inv,
        sigma,
    ))
}

/// Outcome of residual-based filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub field: DisplacementField,
    /// Removed node indices in the input field, ascending.
    pub removed: Vec<usize>,
}

/// Drops the `ceil(percent * n)` nodes whose largest absolute residual
/// component is highest. Ties resolve toward the lower index.
pub fn filter_outliers(
    field: &DisplacementField,
    fit: &EstimatorOutput,
    percent: f64,
) -> Result<FilterOutcome> {
    if !(0.0..0.5).contains(&percent) {
        return Err(Error::InvalidInput(format!(
            "outlier percent must be in [0, 0.5), got {percent}"
        )));
    }
    if fit.per_node_residuals.len() != field.len() {
        return Err(Error::InvalidInput(format!(
            "fit has {} residuals for a field of {} nodes",
            fit.per_node_residuals.len(),
            field.len()
        )));
    }
    let n = field.len();
    let count = (percent * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if n - count < MIN_FILTERED_NODES {
        return Err(Error::InsufficientData {
            needed: MIN_FILTERED_NODES,
            got: n - count,
        });
    }
    if count == 0 {
        return Ok(FilterOutcome {
            field: field.clone(),
            removed: Vec::new(),
        });
    }
    let score = |i: usize| fit.per_node_residuals[i].amax();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    let mut removed = order[..count].to_vec();
    removed.sort_unstable();
    Ok(FilterOutcome {
        field: field.without(&removed)?,
        removed,
    })
}

/// `k` in the `k * std` zero-inclusion rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub k: f64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { k: 3.0 }
    }
}

impl SignificanceConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "significance multiplier must be positive, got {k}"
            )));
        }
        Ok(Self { k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Significance {
    Significant,
    Zero,
}

/// `Zero` when the interval `value +- k * std` contains zero.
pub fn significance_test(value: f64, std: f64, config: &SignificanceConfig) -> Significance {
    if value.abs() <= config.k * std {
        Significance::Zero
    } else {
        Significance::Significant
    }
}

/// Sample moments used for normality sanity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    /// Root mean square about zero.
    pub rms: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    if values.is_empty() {
        return Moments {
            count: 0,
            mean: f64::NAN,
            std: f64::NAN,
            rms: f64::NAN,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    Moments {
        count: values.len(),
        mean,
        std: if values.len() > 1 {
            (m2 * n / (n - 1.0)).sqrt()
        } else {
            0.0
        },
        rms,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Equal-width histogram over `[min, max]` of the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if values.is_empty() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}
