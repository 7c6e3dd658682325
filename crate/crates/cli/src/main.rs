use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stiffid_core::beam::{beam_compliance_analytic, reference_loads};
use stiffid_core::fieldgen::{
    add_noise, apply_rigid, inject_outliers, make_grid, simulate_experiment,
};
use stiffid_core::io::report::{estimation_report, ComplianceReport};
use stiffid_core::io::{
    read_field, read_json, to_canonical_string, write_field, Manifest, ManifestEntry,
};
use stiffid_core::pipeline::{identify_fields, PipelineConfig};
use stiffid_core::statistics::SignificanceConfig;
use stiffid_core::study::run_study;
use stiffid_core::{
    Axis, Error, ErrorClass, Estimator, GridSpec, NoisePreset, NoiseSpec, Result, RotationModel,
    StudyConfig, StudyKind, Vector3,
};

#[derive(Parser)]
#[command(
    name = "stiffid",
    version,
    about = "Rigid-deflection and compliance identification from displacement fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic displacement field.
    GenField(GenFieldArgs),
    /// Estimate the rigid deflection of one field.
    Estimate(EstimateArgs),
    /// Identify a compliance matrix from an experiment manifest.
    Identify(IdentifyArgs),
    /// Run an accuracy study.
    Study(StudyArgs),
    /// Run the cantilever benchmark.
    BeamBench(BeamArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Cubic,
    Planar,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

fn parse_vec3(s: &str) -> std::result::Result<Vector3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut v = Vector3::zeros();
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(v)
}

#[derive(Args)]
struct GenFieldArgs {
    #[arg(long, value_enum, default_value = "cubic")]
    kind: KindArg,
    /// Grid edge length, mm.
    #[arg(long, default_value_t = 10.0)]
    extent: f64,
    /// Mesh step, mm.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Plane normal for planar grids.
    #[arg(long, value_enum, default_value = "z")]
    normal: AxisArg,
    /// Reference point, `x,y,z` mm.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    center: Option<Vector3>,
    /// Translation, `x,y,z` mm.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    t: Vector3,
    /// Rotation, `x,y,z` degrees.
    #[arg(long = "phi-deg", value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    phi_deg: Vector3,
    #[arg(long = "rotation-model", default_value = "exact")]
    rotation_model: RotationModel,
    /// Noise standard deviation per component, mm.
    #[arg(long, conflicts_with = "noise_preset")]
    sigma: Option<f64>,
    /// Named noise level (linear-2mm, linear-1mm, parabolic-3mm, parabolic-2mm).
    #[arg(long = "noise-preset")]
    noise_preset: Option<NoisePreset>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of nodes replaced by outliers.
    #[arg(long = "outlier-fraction", default_value_t = 0.0)]
    outlier_fraction: f64,
    /// Outlier size in multiples of sigma.
    #[arg(long = "outlier-magnitude", default_value_t = 10.0)]
    outlier_magnitude: f64,
    /// Output path; `.csv` selects CSV, anything else JSON.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    estimator: Option<Estimator>,
    #[arg(long = "outlier-percent")]
    outlier_percent: Option<f64>,
    #[arg(long = "k-multiplier")]
    k_multiplier: Option<f64>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let defaults = PipelineConfig::default();
        Ok(PipelineConfig {
            estimator: self.estimator.unwrap_or(defaults.estimator),
            outlier_percent: self.outlier_percent.unwrap_or(defaults.outlier_percent),
            significance: match self.k_multiplier {
                Some(k) => SignificanceConfig::new(k)?,
                None => defaults.significance,
            },
        })
    }
}

#[derive(Args)]
struct EstimateArgs {
    field: PathBuf,
    #[arg(long, default_value = "lin")]
    estimator: Estimator,
    #[arg(long = "outlier-percent", default_value_t = 0.0)]
    outlier_percent: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    manifest: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyOverrides {
    /// Study configuration as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    estimator: Option<Estimator>,
    #[arg(long = "outlier-percent")]
    outlier_percent: Option<f64>,
    #[arg(long = "k-multiplier")]
    k_multiplier: Option<f64>,
    /// Noise standard deviation, mm.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "rotation-model")]
    rotation_model: Option<RotationModel>,
    /// Directory for `summary.json` and CSV tables; stdout when absent.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl StudyOverrides {
    fn resolve(&self, study: Option<StudyKind>) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_json::<StudyConfig>(path)?,
            None => StudyConfig::new(
                study.ok_or_else(|| Error::InvalidInput("give a study name or --config".into()))?,
            ),
        };
        if let Some(s) = study {
            cfg.study = s;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.estimator {
            cfg.estimator = Some(v);
        }
        if let Some(v) = self.outlier_percent {
            cfg.outlier_percent = Some(v);
        }
        if let Some(v) = self.k_multiplier {
            cfg.k_multiplier = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = Some(v);
        }
        if let Some(v) = self.rotation_model {
            cfg.rotation_model = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct StudyArgs {
    /// table2, table3, noise-study or beam-bench; overrides the config.
    study: Option<String>,
    #[command(flatten)]
    overrides: StudyOverrides,
}

#[derive(Args)]
struct BeamArgs {
    #[command(flatten)]
    overrides: StudyOverrides,
    /// Also write the simulated fields and a manifest to this directory.
    #[arg(long = "write-fields")]
    write_fields: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_field(args: &GenFieldArgs) -> Result<()> {
    let mut grid = match args.kind {
        KindArg::Cubic => GridSpec::cubic(args.extent, args.step),
        KindArg::Planar => GridSpec::planar(args.extent, args.step, args.normal.into()),
    };
    if let Some(c) = args.center {
        grid = grid.with_center(c);
    }
    let sigma = match (args.sigma, args.noise_preset) {
        (Some(s), _) => s,
        (None, Some(p)) => p.sigma(),
        (None, None) => 0.0,
    };
    let base = make_grid(&grid)?;
    let moved = apply_rigid(
        &base,
        &args.t,
        &args.phi_deg.map(f64::to_radians),
        args.rotation_model,
    );
    let mut field = add_noise(&moved, &NoiseSpec::new(sigma, args.seed))?;
    if args.outlier_fraction > 0.0 {
        let scale = if sigma > 0.0 { sigma } else { 1.0 };
        field = inject_outliers(
            &field,
            args.outlier_fraction,
            args.outlier_magnitude,
            scale,
            args.seed,
        )?
        .0;
    }
    write_field(&args.out, &field)
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let field = read_field(&args.field)?;
    let report = estimation_report(&field, args.estimator, args.outlier_percent)?;
    emit(&to_canonical_string(&report)?, args.out.as_deref())
}

fn identify(args: &IdentifyArgs) -> Result<()> {
    let config = args.pipeline.config()?;
    let manifest = Manifest::read(&args.manifest)?;
    let experiments = manifest.load_experiments(&args.manifest)?;
    let id = identify_fields(&experiments, &config)?;
    emit(
        &to_canonical_string(&ComplianceReport::new(&id, &config))?,
        args.out.as_deref(),
    )
}

fn run_and_emit(cfg: &StudyConfig, out_dir: Option<&Path>) -> Result<()> {
    let report = run_study(cfg)?;
    let summary = to_canonical_string(&report)?;
    match out_dir {
        None => emit(&summary, None),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            emit(&summary, Some(&dir.join("summary.json")))?;
            for (name, text) in report.csv_files() {
                emit(&text, Some(&dir.join(name)))?;
            }
            Ok(())
        }
    }
}

fn study(args: &StudyArgs) -> Result<()> {
    let kind = args
        .study
        .as_deref()
        .map(str::parse::<StudyKind>)
        .transpose()?;
    let cfg = args.overrides.resolve(kind)?;
    run_and_emit(&cfg, args.overrides.out_dir.as_deref())
}

/// Writes the benchmark's simulated experiments so `identify` can replay them.
fn write_beam_fields(cfg: &StudyConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let k = beam_compliance_analytic(&stiffid_core::BeamSpec::reference())?.k;
    let noise = NoiseSpec::new(cfg.sigma(), cfg.seed);
    let mut entries = Vec::new();
    for (j, load) in reference_loads().iter().enumerate() {
        let field = simulate_experiment(
            &k,
            load,
            &cfg.grid(),
            &noise.for_trial(j as u64),
            cfg.rotation_model(),
        )?;
        let name = format!("field_{}.json", load.label);
        write_field(&dir.join(&name), &field)?;
        entries.push(ManifestEntry::from_load(load, name));
    }
    Manifest::new(entries).write(&dir.join("manifest.json"))
}

fn beam_bench(args: &BeamArgs) -> Result<()> {
    let cfg = args.overrides.resolve(Some(StudyKind::BeamBench))?;
    if let Some(dir) = &args.write_fields {
        write_beam_fields(&cfg, dir)?;
    }
    run_and_emit(&cfg, args.overrides.out_dir.as_deref())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenField(a) => gen_field(a),
        Command::Estimate(a) => estimate(a),
        Command::Identify(a) => identify(a),
        Command::Study(a) => study(a),
        Command::BeamBench(a) => beam_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
