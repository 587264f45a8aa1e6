//! Experiment runner: loads measures and point sets from files, dispatches
//! the toolkit's operators, and writes reproducible JSON/CSV reports that
//! echo the full configuration and seed.
//!
//! Thread count follows rayon's `RAYON_NUM_THREADS` environment variable
//! (default: machine parallelism). Exit codes: 0 success, 2 config parse
//! error, 3 validation failure, 4 solver iteration cap, 5 I/O error,
//! 6 internal error, 7 acceptance criteria failed.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Diagnostic, ExperimentConfig};
use potkit::capacity::{self, DiscreteSet};
use potkit::differentiability::{self, DiffOptions};
use potkit::geom::AxisBox;
use potkit::kernels::Kernel;
use potkit::levelset::{self, LevelSetOptions};
use potkit::lipschitz::{self, LipschitzOptions};
use potkit::measures::RadonMeasure;
use potkit::operators::{self, EpsilonSchedule};
use potkit::suite;
use potkit::Error as PotkitError;

#[derive(Parser)]
#[command(name = "potkit", version, about = "Potential-theory experiments: fields, capacities, differentiability indices, Lipschitz domination and level sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an operator field on a point set and write CSV rows.
    Field {
        /// potential | gradient | maximal | truncated-singular | maximal-singular
        #[arg(long)]
        operator: String,
        /// riesz | newtonian | oscillating
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dimension: usize,
        /// Measure file (JSON: {dimension, atoms, density})
        #[arg(long)]
        measure: PathBuf,
        /// Points file (CSV: one comma-separated point per line)
        #[arg(long)]
        points: PathBuf,
        /// Increasing ball radii for the maximal operator
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Truncation radius for the truncated singular integral
        #[arg(long)]
        epsilon: Option<f64>,
        /// Truncation schedule runs over 2^0 .. 2^-max_exponent
        #[arg(long)]
        schedule_max_exponent: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        output: PathBuf,
    },
    /// Capacity of a cube-union set by linear programming (JSON report).
    Capacity {
        /// Set file (JSON: {dimension, h, centers})
        #[arg(long)]
        set: PathBuf,
        /// Override the cube side from the set file
        #[arg(long)]
        mesh: Option<f64>,
        /// Sub-lattice order of extra constraint points per cube
        #[arg(long)]
        refinement: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Capacity-sense differentiability indices on shrinking windows.
    Diff {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dimension: usize,
        #[arg(long)]
        measure: PathBuf,
        /// Window center coordinates
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Vec<f64>,
        /// Candidate gradient; defaults to the assembled gradient of the potential
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gradient: Option<Vec<f64>>,
        /// Strictly decreasing window radii
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        /// Window cells per radius (mesh = radius / mesh_ratio)
        #[arg(long)]
        mesh_ratio: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sampled two-point Lipschitz check with the dominating function.
    Lipschitz {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dimension: usize,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window_lo: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window_hi: Vec<f64>,
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Level-set band reports and a.c. mass decay for Newtonian potentials.
    Levelset {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        level: f64,
        /// Strictly decreasing band widths
        #[arg(long, value_delimiter = ',')]
        bands: Vec<f64>,
        /// Also compute per-cell Laplacians (slow on large bands)
        #[arg(long, default_value_t = false)]
        with_laplacian: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Optional CSV of band cells (coords, gradient norm, density)
        #[arg(long)]
        cells_csv: Option<PathBuf>,
    },
    /// Run the acceptance battery and emit a pass/fail table.
    Suite {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config file and list diagnostics without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute a run described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Validation(Vec<Diagnostic>),
    SolverCap(String),
    Io(String),
    Internal(String),
    SuiteFailed(usize),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::SolverCap(_) => 4,
            CliError::Io(_) => 5,
            CliError::Internal(_) => 6,
            CliError::SuiteFailed(_) => 7,
        }
    }

    fn emit(&self) {
        #[derive(Serialize)]
        struct ErrorRecord<'a> {
            code: i32,
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            diagnostics: Option<&'a [Diagnostic]>,
        }
        let (kind, message, diagnostics) = match self {
            CliError::Config(m) => ("config", m.clone(), None),
            CliError::Validation(d) => ("validation", format!("{} diagnostic(s)", d.len()), Some(d.as_slice())),
            CliError::SolverCap(m) => ("solver-cap", m.clone(), None),
            CliError::Io(m) => ("io", m.clone(), None),
            CliError::Internal(m) => ("internal", m.clone(), None),
            CliError::SuiteFailed(n) => ("suite", format!("{n} criteria failed"), None),
        };
        let record = ErrorRecord {
            code: self.code(),
            kind,
            message,
            diagnostics,
        };
        eprintln!("{}", serde_json::to_string(&record).unwrap());
    }
}

impl From<PotkitError> for CliError {
    fn from(err: PotkitError) -> Self {
        match err {
            PotkitError::IterationCap { cap } => {
                CliError::SolverCap(format!("simplex exceeded {cap} pivots"))
            }
            PotkitError::InvalidParameter(_)
            | PotkitError::DimensionMismatch { .. }
            | PotkitError::EmptyInput(_)
            | PotkitError::UnsupportedDimension(_)
            | PotkitError::DegenerateWindow(_)
            | PotkitError::AtomCollision(_) => CliError::Validation(vec![Diagnostic {
                field: "parameters".into(),
                message: err.to_string(),
            }]),
            PotkitError::Unbounded => CliError::Internal(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

/// Report envelope: the timestamp is isolated in the header so payloads of
/// identical runs compare byte-for-byte.
#[derive(Serialize)]
struct Report<T: Serialize> {
    header: Header,
    result: T,
}

#[derive(Serialize)]
struct Header {
    timestamp_unix: u64,
    toolkit_version: &'static str,
    config: ExperimentConfig,
}

fn header_for(config: &ExperimentConfig) -> Header {
    Header {
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        toolkit_version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
    }
}

fn write_json_report<T: Serialize>(path: &Path, config: &ExperimentConfig, result: T) -> Result<(), CliError> {
    let report = Report {
        header: header_for(config),
        result,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn load_measure(path: &Path) -> Result<RadonMeasure, CliError> {
    let text = fs::read_to_string(path)?;
    let raw: RadonMeasure =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // re-validate through the constructor
    RadonMeasure::new(raw.dimension, raw.atoms, raw.density).map_err(CliError::from)
}

#[derive(serde::Deserialize)]
struct SetFile {
    dimension: usize,
    #[serde(default)]
    h: Option<f64>,
    centers: Vec<Vec<f64>>,
}

fn load_set(path: &Path, mesh_override: Option<f64>) -> Result<DiscreteSet, CliError> {
    let text = fs::read_to_string(path)?;
    let raw: SetFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let h = mesh_override.or(raw.h).ok_or_else(|| {
        CliError::Validation(vec![Diagnostic {
            field: "mesh".into(),
            message: "the set file carries no cube side; pass --mesh".into(),
        }])
    })?;
    DiscreteSet::from_centers(raw.dimension, h, raw.centers).map_err(CliError::from)
}

fn load_points(path: &Path, dimension: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| {
            CliError::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if coords.len() != dimension {
            return Err(CliError::Config(format!(
                "{}:{}: expected {dimension} coordinates, found {}",
                path.display(),
                lineno + 1,
                coords.len()
            )));
        }
        out.push(coords);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: no points", path.display())));
    }
    Ok(out)
}

fn validated(config: &ExperimentConfig) -> Result<(), CliError> {
    let diagnostics = config.validate();
    if diagnostics.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(diagnostics))
    }
}

fn default_maximal_radii(mu: &RadonMeasure) -> Vec<f64> {
    let (r_min, r_max) = match (&mu.density, mu.support_bounds()) {
        (Some(d), Some((lo, hi))) => {
            let diam = potkit::geom::dist(&lo, &hi).max(d.grid.h);
            (d.grid.h / 2.0, 2.0 * diam)
        }
        (None, Some((lo, hi))) => {
            let diam = potkit::geom::dist(&lo, &hi).max(1e-3);
            (diam / 256.0, 2.0 * diam)
        }
        _ => (1e-3, 2.0),
    };
    operators::geometric_radii(r_min, r_max)
}

fn run_field(config: &ExperimentConfig) -> Result<(), CliError> {
    validated(config)?;
    let kernel = Kernel::by_name(config.kernel.as_deref().unwrap(), config.dimension.unwrap())?;
    let mu = load_measure(config.measure.as_deref().unwrap())?;
    let points = load_points(config.points.as_deref().unwrap(), kernel.dimension())?;
    let schedule = EpsilonSchedule::dyadic(config.schedule_max_exponent.unwrap_or(40));
    let field = match config.operator.as_deref().unwrap() {
        "potential" => operators::potential(&kernel, &mu, &points)?,
        "maximal" => {
            let radii = config
                .radii
                .clone()
                .unwrap_or_else(|| default_maximal_radii(&mu));
            operators::maximal_function(&mu, &points, &radii)?
        }
        "maximal-singular" => operators::maximal_singular(&kernel, &mu, &points, &schedule)?,
        "truncated-singular" => {
            let eps = config.epsilon.unwrap();
            let values: Result<Vec<Vec<f64>>, PotkitError> = points
                .iter()
                .map(|x| operators::truncated_singular(&kernel, &mu, x, eps))
                .collect();
            potkit::operators::FieldSample {
                points: points.clone(),
                values: potkit::operators::FieldValues::Vector(values?),
                kind: potkit::operators::FieldKind::TruncatedSingular,
            }
        }
        "gradient" => {
            let values: Result<Vec<Vec<f64>>, PotkitError> = points
                .iter()
                .map(|x| {
                    operators::gradient_potential(&kernel, &mu, x, &schedule).map(|g| {
                        // undefined entries surface as NaN rows in the CSV
                        g.value.unwrap_or_else(|| vec![f64::NAN; kernel.dimension()])
                    })
                })
                .collect();
            potkit::operators::FieldSample {
                points: points.clone(),
                values: potkit::operators::FieldValues::Vector(values?),
                kind: potkit::operators::FieldKind::Gradient,
            }
        }
        other => return Err(CliError::Config(format!("unknown operator '{other}'"))),
    };
    let output = config.output.as_deref().unwrap();
    let mut buffer = Vec::new();
    {
        use std::io::Write;
        writeln!(
            buffer,
            "# potkit {} field operator={} kernel={} seed={}",
            env!("CARGO_PKG_VERSION"),
            config.operator.as_deref().unwrap(),
            config.kernel.as_deref().unwrap(),
            config.seed
        )?;
    }
    field
        .write_csv(&mut buffer)
        .map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(output, buffer)?;
    Ok(())
}

fn run_capacity(config: &ExperimentConfig) -> Result<(), CliError> {
    validated(config)?;
    let set = load_set(config.set.as_deref().unwrap(), config.mesh)?;
    let estimate = capacity::capacity_lp(&set, config.refinement.unwrap_or(1))?;
    write_json_report(config.output.as_deref().unwrap(), config, estimate)
}

fn run_diff(config: &ExperimentConfig) -> Result<(), CliError> {
    validated(config)?;
    let kernel = Kernel::by_name(config.kernel.as_deref().unwrap(), config.dimension.unwrap())?;
    let mu = load_measure(config.measure.as_deref().unwrap())?;
    let center = config.center.clone().unwrap();
    let radii = config.radii.clone().unwrap();
    let gradient = match &config.gradient {
        Some(g) => g.clone(),
        None => operators::gradient_potential(&kernel, &mu, &center, &EpsilonSchedule::default())?
            .value
            .ok_or_else(|| {
                CliError::Validation(vec![Diagnostic {
                    field: "gradient".into(),
                    message: "the assembled gradient is undefined at the center; pass --gradient"
                        .into(),
                }])
            })?,
    };
    let options = DiffOptions {
        mesh_ratio: config.mesh_ratio.unwrap_or(16),
        ..DiffOptions::default()
    };
    let report =
        differentiability::capacity_diff_index(&kernel, &mu, &center, &gradient, &radii, &options)?;
    write_json_report(config.output.as_deref().unwrap(), config, report)
}

fn run_lipschitz(config: &ExperimentConfig) -> Result<(), CliError> {
    validated(config)?;
    let kernel = Kernel::by_name(config.kernel.as_deref().unwrap(), config.dimension.unwrap())?;
    let mu = load_measure(config.measure.as_deref().unwrap())?;
    let window = AxisBox::new(
        config.window_lo.clone().unwrap(),
        config.window_hi.clone().unwrap(),
    )?;
    let options = LipschitzOptions::for_window(&window);
    let report = lipschitz::lipschitz_check(
        &kernel,
        &mu,
        &window,
        config.pairs.unwrap(),
        config.seed,
        &options,
    )?;
    write_json_report(config.output.as_deref().unwrap(), config, report)
}

#[derive(Serialize)]
struct LevelsetResult {
    decay: levelset::LevelSetDecay,
    report: levelset::LevelSetReport,
}

fn run_levelset(config: &ExperimentConfig) -> Result<(), CliError> {
    validated(config)?;
    let mu = load_measure(config.measure.as_deref().unwrap())?;
    let level = config.level.unwrap();
    let bands = config.bands.clone().unwrap();
    let options = LevelSetOptions {
        with_laplacian: config.with_laplacian.unwrap_or(false),
        ..LevelSetOptions::default()
    };
    let decay = levelset::levelset_density_check(&mu, level, &bands, options.fallback_cells)?;
    let report = levelset::levelset_report(&mu, level, bands[0], &options)?;
    if let Some(csv_path) = &config.cells_csv {
        use std::io::Write;
        let mut buffer = Vec::new();
        writeln!(buffer, "# band cells: coordinates, |grad P|, density")?;
        for (i, cell) in report.cells.iter().enumerate() {
            let mut row: Vec<String> = cell.iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", report.gradient_norms[i]));
            row.push(format!("{}", report.density_values[i]));
            writeln!(buffer, "{}", row.join(","))?;
        }
        fs::write(csv_path, buffer)?;
    }
    write_json_report(
        config.output.as_deref().unwrap(),
        config,
        LevelsetResult { decay, report },
    )
}

fn run_suite(config: &ExperimentConfig) -> Result<(), CliError> {
    let outcomes = suite::run_all();
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    if let Some(path) = &config.output {
        write_json_report(path, config, &outcomes)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::SuiteFailed(failed));
    }
    Ok(())
}

fn execute(config: &ExperimentConfig) -> Result<(), CliError> {
    match config.subcommand.as_str() {
        "field" => run_field(config),
        "capacity" => run_capacity(config),
        "diff" => run_diff(config),
        "lipschitz" => run_lipschitz(config),
        "levelset" => run_levelset(config),
        "suite" => run_suite(config),
        other => Err(CliError::Config(format!("unknown subcommand '{other}'"))),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn real_main() -> Result<(), CliError> {
    let cli = Cli::parse();
    let config = match cli.command {
        Command::Field {
            operator,
            kernel,
            dimension,
            measure,
            points,
            radii,
            epsilon,
            schedule_max_exponent,
            seed,
            output,
        } => ExperimentConfig {
            subcommand: "field".into(),
            operator: Some(operator),
            kernel: Some(kernel),
            dimension: Some(dimension),
            measure: Some(measure),
            points: Some(points),
            radii,
            epsilon,
            schedule_max_exponent,
            seed,
            output: Some(output),
            ..Default::default()
        },
        Command::Capacity {
            set,
            mesh,
            refinement,
            seed,
            output,
        } => ExperimentConfig {
            subcommand: "capacity".into(),
            set: Some(set),
            mesh,
            refinement,
            seed,
            output: Some(output),
            ..Default::default()
        },
        Command::Diff {
            kernel,
            dimension,
            measure,
            center,
            gradient,
            radii,
            mesh_ratio,
            seed,
            output,
        } => ExperimentConfig {
            subcommand: "diff".into(),
            kernel: Some(kernel),
            dimension: Some(dimension),
            measure: Some(measure),
            center: Some(center),
            gradient,
            radii: Some(radii),
            mesh_ratio,
            seed,
            output: Some(output),
            ..Default::default()
        },
        Command::Lipschitz {
            kernel,
            dimension,
            measure,
            window_lo,
            window_hi,
            pairs,
            seed,
            output,
        } => ExperimentConfig {
            subcommand: "lipschitz".into(),
            kernel: Some(kernel),
            dimension: Some(dimension),
            measure: Some(measure),
            window_lo: Some(window_lo),
            window_hi: Some(window_hi),
            pairs: Some(pairs),
            seed,
            output: Some(output),
            ..Default::default()
        },
        Command::Levelset {
            measure,
            level,
            bands,
            with_laplacian,
            seed,
            output,
            cells_csv,
        } => ExperimentConfig {
            subcommand: "levelset".into(),
            measure: Some(measure),
            level: Some(level),
            bands: Some(bands),
            with_laplacian: Some(with_laplacian),
            seed,
            output: Some(output),
            cells_csv,
            ..Default::default()
        },
        Command::Suite { output } => ExperimentConfig {
            subcommand: "suite".into(),
            output,
            ..Default::default()
        },
        Command::Validate { config } => {
            let config = load_config(&config)?;
            let diagnostics = config.validate();
            if diagnostics.is_empty() {
                println!("ok");
                return Ok(());
            }
            for d in &diagnostics {
                println!("{}: {}", d.field, d.message);
            }
            return Err(CliError::Validation(diagnostics));
        }
        Command::Run { config } => load_config(&config)?,
    };
    execute(&config)
}

fn main() {
    match real_main() {
        Ok(()) => {}
        Err(err) => {
            err.emit();
            std::process::exit(err.code());
        }
    }
}
