//! End-to-end identification: per-experiment deflection fits, single-pass
//! outlier filtering, pooled noise estimate, compliance assembly, pruning and
//! symmetrisation.

use crate::compliance::{
    identify, propagated_std, prune, symmetrize, to_stiffness, ComplianceMatrix, Experiment,
    LoadCase, Stiffness,
};
use crate::error::Result;
use crate::estimators::{Estimator, EstimatorOutput};
use crate::field::DisplacementField;
use crate::statistics::{
    deflection_covariance, estimate_sigma, filter_outliers, SignificanceConfig,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub estimator: Estimator,
    /// Fraction of nodes dropped by residual filtering.
    pub outlier_percent: f64,
    pub significance: SignificanceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Lin,
            outlier_percent: 0.10,
            significance: SignificanceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFit {
    pub load: LoadCase,
    /// Fit on the full field.
    pub initial: EstimatorOutput,
    /// Fit after filtering.
    pub fit: EstimatorOutput,
    pub removed: Vec<usize>,
    pub nodes_used: usize,
    pub experiment: Experiment,
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub experiments: Vec<ExperimentFit>,
    /// Pooled noise estimate over all experiments, mm.
    pub sigma: f64,
    /// Least-squares compliance with uncertainties, before pruning.
    pub raw: ComplianceMatrix,
    pub pruned: ComplianceMatrix,
    /// Pruned and symmetrised.
    pub symmetric: ComplianceMatrix,
    pub stiffness: std::result::Result<Stiffness, String>,
}

/// Fits, filters and re-fits one field.
pub fn fit_experiment(
    load: LoadCase,
    field: &DisplacementField,
    config: &PipelineConfig,
) -> Result<ExperimentFit> {
    let initial = config.estimator.estimate(field)?;
    let filtered = filter_outliers(field, &initial, config.outlier_percent)?;
    let fit = if filtered.removed.is_empty() {
        initial.clone()
    } else {
        config.estimator.estimate(&filtered.field)?
    };
    let covariance =
        deflection_covariance(&filtered.field, 1.0)?.at_reference(&filtered.field.centroid());
    let experiment = Experiment {
        load: load.clone(),
        deflection: fit.deflection,
        covariance,
    };
    Ok(ExperimentFit {
        load,
        nodes_used: filtered.field.len(),
        initial,
        fit,
        removed: filtered.removed,
        experiment,
    })
}

/// Runs the full chain on `(load, field)` pairs.
pub fn identify_fields(
    inputs: &[(LoadCase, DisplacementField)],
    config: &PipelineConfig,
) -> Result<Identification> {
    if inputs.len() < 6 {
        return Err(crate::Error::InsufficientExperiments(inputs.len()));
    }
    let fits = inputs
        .iter()
        .map(|(load, field)| fit_experiment(load.clone(), field, config))
        .collect::<Result<Vec<_>>>()?;
    identify_fits(fits, config)
}

/// Assembles the compliance from already-fitted experiments.
pub fn identify_fits(
    mut fits: Vec<ExperimentFit>,
    config: &PipelineConfig,
) -> Result<Identification> {
    let residuals: Vec<&[_]> = fits
        .iter()
        .map(|f| f.fit.per_node_residuals.as_slice())
        .collect();
    let sigma = estimate_sigma(&residuals)?;
    for f in &mut fits {
        f.experiment.covariance = f.experiment.covariance.rescaled(sigma);
    }
    let experiments: Vec<Experiment> = fits.iter().map(|f| f.experiment.clone()).collect();
    let k = identify(&experiments)?;
    let std = propagated_std(&experiments, sigma)?;
    let raw = k.with_uncertainty(std, &config.significance);
    let pruned = prune(&raw, &config.significance);
    let symmetric = symmetrize(&pruned);
    let stiffness = to_stiffness(&symmetric).map_err(|e| e.to_string());
    Ok(Identification {
        experiments: fits,
        sigma,
        raw,
        pruned,
        symmetric,
        stiffness,
    })
}
