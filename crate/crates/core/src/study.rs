//! Synthetic accuracy studies: noiseless translation/rotation sweeps, Monte
//! Carlo noise replications and the cantilever benchmark.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{beam_benchmark, reference_grid, reference_loads, BeamSpec};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::fieldgen::{add_noise, apply_rigid, make_grid, GridSpec, NoiseSpec};
use crate::geometry::{RotationModel, Vector3};
use crate::io::report::{matrix_csv, BeamReport};
use crate::pipeline::PipelineConfig;
use crate::statistics::{
    deflection_covariance, filter_outliers, histogram, moments, Histogram, Moments,
    SignificanceConfig,
};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Translation sweep, amplitudes in mm.
    Table2,
    /// Rotation sweep, amplitudes in degrees.
    Table3,
    /// Seeded noise replications, amplitudes in degrees.
    NoiseStudy,
    BeamBench,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Table2 => "table2",
            StudyKind::Table3 => "table3",
            StudyKind::NoiseStudy => "noise-study",
            StudyKind::BeamBench => "beam-bench",
        }
    }
}

impl std::str::FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table2" => Ok(StudyKind::Table2),
            "table3" => Ok(StudyKind::Table3),
            "noise-study" => Ok(StudyKind::NoiseStudy),
            "beam-bench" => Ok(StudyKind::BeamBench),
            other => Err(Error::InvalidInput(format!(
                "unknown study `{other}` (expected table2, table3, noise-study or beam-bench)"
            ))),
        }
    }
}

/// Study definition. Unset optional fields take per-study defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
    /// Noise level, mm.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator: Option<Estimator>,
    #[serde(default)]
    pub outlier_percent: Option<f64>,
    #[serde(default = "default_k_multiplier")]
    pub k_multiplier: f64,
    #[serde(default)]
    pub rotation_model: Option<RotationModel>,
    /// Translation applied on every axis in rotation studies, mm.
    #[serde(default)]
    pub translation_mm: Option<f64>,
}

fn default_trials() -> usize {
    1000
}

fn default_k_multiplier() -> f64 {
    3.0
}

impl StudyConfig {
    pub fn new(study: StudyKind) -> Self {
        Self {
            study,
            grid: None,
            amplitudes: None,
            sigma: None,
            trials: default_trials(),
            seed: 0,
            estimator: None,
            outlier_percent: None,
            k_multiplier: default_k_multiplier(),
            rotation_model: None,
            translation_mm: None,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_else(|| match self.study {
            StudyKind::BeamBench => reference_grid(),
            _ => GridSpec::cubic(10.0, 1.0),
        })
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.amplitudes.clone().unwrap_or_else(|| match self.study {
            StudyKind::Table2 => vec![0.01, 0.1, 1.0, 10.0],
            StudyKind::Table3 => vec![0.01, 0.1, 1.0, 5.0],
            StudyKind::NoiseStudy => vec![0.1],
            StudyKind::BeamBench => Vec::new(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(match self.study {
            StudyKind::NoiseStudy => 5e-5,
            StudyKind::BeamBench => 5.6e-5,
            _ => 0.0,
        })
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator.unwrap_or(Estimator::Lin)
    }

    pub fn outlier_percent(&self) -> f64 {
        self.outlier_percent.unwrap_or(match self.study {
            StudyKind::BeamBench => 0.10,
            _ => 0.0,
        })
    }

    /// Sweeps use the sequential x-y-z construction; the beam, whose
    /// displacements come from a linear model, uses the linearized one.
    pub fn rotation_model(&self) -> RotationModel {
        self.rotation_model.unwrap_or(match self.study {
            StudyKind::BeamBench => RotationModel::Linearized,
            _ => RotationModel::Sequential,
        })
    }

    pub fn translation_mm(&self) -> f64 {
        self.translation_mm.unwrap_or(1.0)
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            estimator: self.estimator(),
            outlier_percent: self.outlier_percent(),
            significance: SignificanceConfig::new(self.k_multiplier)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        let sigma = self.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        if let Some(a) = self.amplitudes.as_ref() {
            if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "amplitudes must be a non-empty list of finite values".into(),
                ));
            }
        }
        let p = self.outlier_percent();
        if !(0.0..0.5).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "outlier percent must be in [0, 0.5), got {p}"
            )));
        }
        if !self.translation_mm().is_finite() {
            return Err(Error::InvalidInput("translation must be finite".into()));
        }
        self.pipeline_config()?;
        self.grid().node_count()?;
        Ok(())
    }
}

/// Identification error for one estimator at one amplitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub amplitude: f64,
    /// Largest absolute translation-component error, mm.
    pub t_error_mm: f64,
    /// Largest absolute rotation-component error, degrees.
    pub phi_error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub estimator: Estimator,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub study: StudyKind,
    pub amplitude_unit: String,
    pub amplitudes: Vec<f64>,
    pub rotation_model: RotationModel,
    pub sigma_mm: f64,
    pub nodes: usize,
    pub rows: Vec<TableRow>,
}

impl TableReport {
    /// The error the sweep targets: translation for table 2, rotation otherwise.
    pub fn error(&self, estimator: Estimator, amplitude_index: usize) -> f64 {
        let row = self
            .rows
            .iter()
            .find(|r| r.estimator == estimator)
            .expect("all estimators run");
        let cell = &row.cells[amplitude_index];
        match self.study {
            StudyKind::Table2 => cell.t_error_mm,
            _ => cell.phi_error_deg,
        }
    }

    fn csv(&self) -> String {
        let unit = match self.study {
            StudyKind::Table2 => "t_error_mm",
            _ => "phi_error_deg",
        };
        let header: Vec<String> = self
            .amplitudes
            .iter()
            .map(|a| format!("{unit}@{a}{}", self.amplitude_unit))
            .collect();
        let mut out = format!("estimator,{}\n", header.join(","));
        for row in &self.rows {
            let values: Vec<String> = (0..self.amplitudes.len())
                .map(|i| format!("{:.6e}", self.error(row.estimator, i)))
                .collect();
            out.push_str(&format!("{},{}\n", row.estimator, values.join(",")));
        }
        out
    }
}

fn sweep(config: &StudyConfig) -> Result<TableReport> {
    let grid = make_grid(&config.grid())?;
    let model = config.rotation_model();
    let amplitudes = config.amplitudes();
    let sigma = config.sigma();
    let fields = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let (t, phi) = match config.study {
                StudyKind::Table2 => (Vector3::repeat(a), Vector3::zeros()),
                _ => (
                    Vector3::repeat(config.translation_mm()),
                    Vector3::repeat(a.to_radians()),
                ),
            };
            let moved = apply_rigid(&grid, &t, &phi, model);
            let field = add_noise(
                &moved,
                &NoiseSpec::new(sigma, config.seed).for_trial(i as u64),
            )?;
            Ok((t, phi, field))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = Estimator::ALL
        .iter()
        .map(|&estimator| {
            let cells = amplitudes
                .iter()
                .zip(&fields)
                .map(|(&amplitude, (t, phi, field))| {
                    let d = estimator.estimate(field)?.deflection;
                    Ok(TableCell {
                        amplitude,
                        t_error_mm: (d.t - t).amax(),
                        phi_error_deg: (d.phi - phi).amax().to_degrees(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TableRow { estimator, cells })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport {
        study: config.study,
        amplitude_unit: match config.study {
            StudyKind::Table2 => "mm".into(),
            _ => "deg".into(),
        },
        amplitudes,
        rotation_model: model,
        sigma_mm: sigma,
        nodes: grid.len(),
        rows,
    })
}

pub const ERROR_COMPONENTS: [&str; 6] = ["tx", "ty", "tz", "phix", "phiy", "phiz"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStats {
    pub component: String,
    /// `mm` for translations, `deg` for rotations.
    pub unit: String,
    pub moments: Moments,
    /// Noise-only standard deviation from the closed-form covariance.
    pub predicted_std: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCase {
    pub amplitude_deg: f64,
    pub components: Vec<ComponentStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    pub study: StudyKind,
    pub estimator: Estimator,
    pub sigma_mm: f64,
    pub trials: usize,
    pub seed: u64,
    pub nodes: usize,
    pub translation_mm: f64,
    pub outlier_percent: f64,
    pub rotation_model: RotationModel,
    pub cases: Vec<NoiseCase>,
}

impl NoiseReport {
    fn summary_csv(&self) -> String {
        let mut out = String::from(
            "amplitude_deg,component,unit,count,mean,std,rms,skewness,excess_kurtosis,predicted_std\n",
        );
        for case in &self.cases {
            for c in &case.components {
                let m = &c.moments;
                out.push_str(&format!(
                    "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.4},{:.4},{:.6e}\n",
                    case.amplitude_deg,
                    c.component,
                    c.unit,
                    m.count,
                    m.mean,
                    m.std,
                    m.rms,
                    m.skewness,
                    m.excess_kurtosis,
                    c.predicted_std
                ));
            }
        }
        out
    }

    fn histogram_csv(&self) -> String {
        let mut out = String::from("amplitude_deg,component,bin,lower,upper,count\n");
        for case in &self.cases {
            for c in &case.components {
                let h = &c.histogram;
                for (bin, count) in h.counts.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{:.6e},{:.6e},{}\n",
                        case.amplitude_deg,
                        c.component,
                        bin,
                        h.edges[bin],
                        h.edges[bin + 1],
                        count
                    ));
                }
            }
        }
        out
    }
}

fn noise_study(config: &StudyConfig) -> Result<NoiseReport> {
    let grid = make_grid(&config.grid())?;
    let model = config.rotation_model();
    let estimator = config.estimator();
    let sigma = config.sigma();
    let percent = config.outlier_percent();
    let translation = config.translation_mm();
    let predicted = deflection_covariance(&grid, sigma)?
        .at_reference(&grid.centroid())
        .std();
    let base_noise = NoiseSpec::new(sigma, config.seed);
    let cases = config
        .amplitudes()
        .into_iter()
        .map(|b| {
            let t = Vector3::repeat(translation);
            let phi = Vector3::repeat(b.to_radians());
            let clean = apply_rigid(&grid, &t, &phi, model);
            let errors = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let field = add_noise(&clean, &base_noise.for_trial(trial as u64))?;
                    let mut fit = estimator.estimate(&field)?;
                    if percent > 0.0 {
                        let filtered = filter_outliers(&field, &fit, percent)?;
                        fit = estimator.estimate(&filtered.field)?;
                    }
                    let dt = fit.deflection.t - t;
                    let dphi = (fit.deflection.phi - phi).map(f64::to_degrees);
                    Ok([dt.x, dt.y, dt.z, dphi.x, dphi.y, dphi.z])
                })
                .collect::<Result<Vec<_>>>()?;
            let components = (0..6)
                .map(|c| {
                    let values: Vec<f64> = errors.iter().map(|e| e[c]).collect();
                    let (unit, predicted_std) = if c < 3 {
                        ("mm", predicted[c])
                    } else {
                        ("deg", predicted[c].to_degrees())
                    };
                    ComponentStats {
                        component: ERROR_COMPONENTS[c].to_string(),
                        unit: unit.to_string(),
                        moments: moments(&values),
                        predicted_std,
                        histogram: histogram(&values, HISTOGRAM_BINS),
                    }
                })
                .collect();
            Ok(NoiseCase {
                amplitude_deg: b,
                components,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseReport {
        study: config.study,
        estimator,
        sigma_mm: sigma,
        trials: config.trials,
        seed: config.seed,
        nodes: grid.len(),
        translation_mm: translation,
        outlier_percent: percent,
        rotation_model: model,
        cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StudyReport {
    Table(TableReport),
    Noise(NoiseReport),
    Beam(Box<BeamReport>),
}

impl StudyReport {
    /// `(file name, contents)` pairs for the tabular outputs.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        match self {
            StudyReport::Table(t) => vec![(format!("{}.csv", t.study.name()), t.csv())],
            StudyReport::Noise(n) => vec![
                ("noise_summary.csv".into(), n.summary_csv()),
                ("noise_histograms.csv".into(), n.histogram_csv()),
            ],
            StudyReport::Beam(b) => {
                let m = |rows: &[[f64; 6]; 6]| crate::geometry::Matrix6::from_fn(|i, j| rows[i][j]);
                vec![
                    ("beam_k_analytic.csv".into(), matrix_csv(&m(&b.analytic))),
                    (
                        "beam_k_identified.csv".into(),
                        matrix_csv(&m(&b.identification.symmetric.k)),
                    ),
                    (
                        "beam_ci.csv".into(),
                        matrix_csv(&m(&b.identification.raw.ci)),
                    ),
                ]
            }
        }
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    match config.study {
        StudyKind::Table2 | StudyKind::Table3 => Ok(StudyReport::Table(sweep(config)?)),
        StudyKind::NoiseStudy => Ok(StudyReport::Noise(noise_study(config)?)),
        StudyKind::BeamBench => {
            let spec = BeamSpec::reference();
            let pipeline = config.pipeline_config()?;
            let model = config.rotation_model();
            let sigma = config.sigma();
            let bench = beam_benchmark(
                &spec,
                &config.grid(),
                &NoiseSpec::new(sigma, config.seed),
                &reference_loads(),
                &pipeline,
                model,
            )?;
            Ok(StudyReport::Beam(Box::new(BeamReport::new(
                &bench,
                &pipeline,
                sigma,
                config.seed,
                model,
            )?)))
        }
    }
}
