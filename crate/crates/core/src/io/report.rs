//! Serializable reports written by the command-line tools. Matrices are
//! row-major nested arrays; angles carry `_rad`/`_deg` suffixes.

use serde::{Deserialize, Serialize};

use crate::beam::{
    beam_compliance_discretized, BeamBenchmark, BeamSpec, Confusion, PrintedRotationalTerms,
};
use crate::compliance::{ComplianceMatrix, COMPONENT_LABELS};
use crate::error::Result;
use crate::estimators::Estimator;
use crate::field::DisplacementField;
use crate::geometry::{Matrix6, RigidDeflection, RotationModel};
use crate::pipeline::{Identification, PipelineConfig};
use crate::statistics::{deflection_covariance, estimate_sigma, filter_outliers};

pub type Array6x6 = [[f64; 6]; 6];

pub fn matrix_rows(m: &Matrix6) -> Array6x6 {
    let mut out = [[0.0; 6]; 6];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

/// CSV with a label column and one column per wrench component.
pub fn matrix_csv(m: &Matrix6) -> String {
    let mut out = format!("row,{}\n", COMPONENT_LABELS.join(","));
    for i in 0..6 {
        let row: Vec<String> = (0..6).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        out.push_str(&format!("{},{}\n", COMPONENT_LABELS[i], row.join(",")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionReport {
    pub t_mm: [f64; 3],
    pub phi_rad: [f64; 3],
    pub phi_deg: [f64; 3],
}

impl From<&RigidDeflection> for DeflectionReport {
    fn from(d: &RigidDeflection) -> Self {
        Self {
            t_mm: d.t.into(),
            phi_rad: d.phi.into(),
            phi_deg: d.phi_deg().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub sum_sq_mm2: f64,
    pub rms_mm: f64,
    pub max_abs_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimator: String,
    pub outlier_percent: f64,
    pub reference_point_mm: [f64; 3],
    pub nodes_total: usize,
    pub nodes_used: usize,
    pub removed: Vec<usize>,
    pub deflection: DeflectionReport,
    /// One-sigma uncertainties at the estimated noise level.
    pub t_std_mm: [f64; 3],
    pub phi_std_deg: [f64; 3],
    pub residuals: ResidualStats,
    pub sigma_hat_mm: f64,
}

/// Estimate, filter, re-estimate and summarise one field.
pub fn estimation_report(
    field: &DisplacementField,
    estimator: Estimator,
    outlier_percent: f64,
) -> Result<EstimationReport> {
    let initial = estimator.estimate(field)?;
    let filtered = filter_outliers(field, &initial, outlier_percent)?;
    let fit = if filtered.removed.is_empty() {
        initial
    } else {
        estimator.estimate(&filtered.field)?
    };
    let sigma = estimate_sigma(&[fit.per_node_residuals.as_slice()])?;
    let cov =
        deflection_covariance(&filtered.field, sigma)?.at_reference(&filtered.field.centroid());
    let std = cov.std();
    let n = fit.per_node_residuals.len() as f64;
    Ok(EstimationReport {
        estimator: estimator.name().to_string(),
        outlier_percent,
        reference_point_mm: field.origin().into(),
        nodes_total: field.len(),
        nodes_used: filtered.field.len(),
        removed: filtered.removed,
        deflection: DeflectionReport::from(&fit.deflection),
        t_std_mm: [std[0], std[1], std[2]],
        phi_std_deg: [
            std[3].to_degrees(),
            std[4].to_degrees(),
            std[5].to_degrees(),
        ],
        residuals: ResidualStats {
            sum_sq_mm2: fit.residual_sum_sq,
            rms_mm: (fit.residual_sum_sq / n).sqrt(),
            max_abs_mm: fit
                .per_node_residuals
                .iter()
                .map(|r| r.amax())
                .fold(0.0, f64::max),
        },
        sigma_hat_mm: sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub k: Array6x6,
    pub std: Array6x6,
    pub ci: Array6x6,
    pub significant: [[bool; 6]; 6],
}

impl From<&ComplianceMatrix> for MatrixReport {
    fn from(m: &ComplianceMatrix) -> Self {
        Self {
            k: matrix_rows(&m.k),
            std: matrix_rows(&m.std),
            ci: matrix_rows(&m.ci),
            significant: m.significant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub label: String,
    pub force_n: [f64; 3],
    pub moment_nmm: [f64; 3],
    pub deflection: DeflectionReport,
    pub nodes_used: usize,
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub estimator: String,
    pub outlier_percent: f64,
    pub k_multiplier: f64,
    pub components: Vec<String>,
    pub sigma_hat_mm: f64,
    pub experiments: Vec<ExperimentSummary>,
    pub raw: MatrixReport,
    pub pruned: MatrixReport,
    pub symmetric: MatrixReport,
    pub zero_count: usize,
    pub stiffness: Option<Array6x6>,
    pub stiffness_min_eigenvalue: Option<f64>,
    pub stiffness_error: Option<String>,
}

impl ComplianceReport {
    pub fn new(id: &Identification, config: &PipelineConfig) -> Self {
        let (stiffness, min_eig, err) = match &id.stiffness {
            Ok(s) => (Some(matrix_rows(&s.matrix)), Some(s.min_eigenvalue), None),
            Err(e) => (None, None, Some(e.clone())),
        };
        Self {
            estimator: config.estimator.name().to_string(),
            outlier_percent: config.outlier_percent,
            k_multiplier: config.significance.k,
            components: COMPONENT_LABELS.iter().map(|s| s.to_string()).collect(),
            sigma_hat_mm: id.sigma,
            experiments: id
                .experiments
                .iter()
                .map(|f| ExperimentSummary {
                    label: f.load.label.clone(),
                    force_n: f.load.force.into(),
                    moment_nmm: f.load.moment.into(),
                    deflection: DeflectionReport::from(&f.fit.deflection),
                    nodes_used: f.nodes_used,
                    removed: f.removed.clone(),
                })
                .collect(),
            raw: MatrixReport::from(&id.raw),
            pruned: MatrixReport::from(&id.pruned),
            symmetric: MatrixReport::from(&id.symmetric),
            zero_count: id.symmetric.zero_count(),
            stiffness,
            stiffness_min_eigenvalue: min_eig,
            stiffness_error: err,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    pub area_mm2: f64,
    pub i_y_mm4: f64,
    pub i_z_mm4: f64,
    pub shear_modulus: f64,
    pub torsion_constant_mm4: f64,
}

impl From<&BeamSpec> for SectionProperties {
    fn from(s: &BeamSpec) -> Self {
        Self {
            area_mm2: s.area(),
            i_y_mm4: s.i_y(),
            i_z_mm4: s.i_z(),
            shear_modulus: s.shear_modulus(),
            torsion_constant_mm4: s.torsion_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamReport {
    pub spec: BeamSpec,
    pub section: SectionProperties,
    pub noise_sigma_mm: f64,
    pub seed: u64,
    pub rotation_model: RotationModel,
    pub analytic: Array6x6,
    pub discretized: Array6x6,
    /// `L/(3 EI)` variants of the rotational diagonal, for comparison.
    pub printed_rotational_terms: PrintedRotationalTerms,
    pub identification: ComplianceReport,
    pub max_rel_error: f64,
    pub zero_leak: f64,
    pub confusion: Confusion,
    pub min_margin: f64,
    pub all_zeros_detected: bool,
}

/// Elements in the discretized oracle.
const ORACLE_ELEMENTS: usize = 10;

impl BeamReport {
    pub fn new(
        bench: &BeamBenchmark,
        config: &PipelineConfig,
        noise_sigma: f64,
        seed: u64,
        model: RotationModel,
    ) -> Result<Self> {
        let discretized = beam_compliance_discretized(&bench.spec, ORACLE_ELEMENTS)?;
        Ok(Self {
            spec: bench.spec,
            section: SectionProperties::from(&bench.spec),
            noise_sigma_mm: noise_sigma,
            seed,
            rotation_model: model,
            analytic: matrix_rows(&bench.analytic),
            discretized: matrix_rows(&discretized.k),
            printed_rotational_terms: bench.printed,
            identification: ComplianceReport::new(&bench.identification, config),
            max_rel_error: bench.max_rel_error,
            zero_leak: bench.zero_leak,
            confusion: bench.confusion,
            min_margin: bench.min_margin,
            all_zeros_detected: bench.all_zeros_detected(),
        })
    }
}
