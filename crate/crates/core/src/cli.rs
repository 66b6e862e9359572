//! Command-line front end.
//!
//! Flags override config-file keys, which override built-in defaults. Every
//! output file embeds the seed and a hash of the resolved configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{parse_angle, ConfigError, ConfigFile};
use crate::error::ModelError;
use crate::estimators::{bell_correlation, CorrelationEstimate, PortPair};
use crate::inequality::{
    chsh_analytic, chsh_from_independent, chsh_from_shared, generate_shared_dataset, read_dataset_csv,
    ChshReport, ChshSettings,
};
use crate::montecarlo::{empirical_correlation, run_experiment, Estimator, RunConfig, SettingRecord};
use crate::optics::{AnalyzerSetting, Port};
use crate::output::{digest_hex, format_float, json_document, scan_csv, scan_svg, write_atomic, ScanRow, Stamp};
use crate::source::{validate_constraints, CheckStatus, Side, SourceConstraints, ValidationReport};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EVENTS: u64 = 1_000_000;
pub const DEFAULT_PARTITIONS: u32 = 8;
pub const DEFAULT_SCAN_POINTS: u64 = 181;
const CURVE_SAMPLES: usize = 721;

#[derive(Debug, Parser)]
#[command(name = "bell-wave", version, about = "Local wave model of a down-conversion Bell experiment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlation E(Δ) over a range of analyzer angle differences (CSV, optional SVG).
    Scan(ScanArgs),
    /// CHSH value from independent runs, a shared-row dataset, or a CSV file (JSON).
    Chsh(ChshArgs),
    /// Check the source constraints of a config file.
    Validate(ValidateArgs),
    /// Run the experiment at a list of settings and report counts and estimates (JSON).
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    McWeight,
    McOutcome,
}

impl Mode {
    fn parse(v: &str) -> Result<Mode, String> {
        <Mode as ValueEnum>::from_str(v, false)
    }

    fn name(self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::McWeight => "mc-weight",
            Mode::McOutcome => "mc-outcome",
        }
    }

    fn estimator(self) -> Option<Estimator> {
        match self {
            Mode::Analytic => None,
            Mode::McWeight => Some(Estimator::SignedWeight),
            Mode::McOutcome => Some(Estimator::OutcomeSampling),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Base seed of the random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Events per setting.
    #[arg(long)]
    pub events: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Independent random streams; must divide the event count.
    #[arg(long)]
    pub partitions: Option<u32>,
}

fn angle_arg(v: &str) -> Result<f64, String> {
    parse_angle(v)
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Start of the Δ range (`deg`, `rad` or `pi` suffix).
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub delta_min: Option<f64>,
    /// End of the Δ range.
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<u64>,
    /// Fixed side-A angle; side B is set to θ₁ − Δ.
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub theta1: Option<f64>,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ChshArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `a,a',b,b'` analyzer angles.
    #[arg(long, allow_hyphen_values = true)]
    pub angles: Option<String>,
    /// Generate one shared-row dataset instead of four independent runs.
    #[arg(long, conflicts_with = "dataset")]
    pub shared: bool,
    /// CSV with ±1 columns a, a', b, b'.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Config file (same as `--config`).
    #[arg(conflicts_with = "config")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `theta1:theta2` pairs separated by commas.
    #[arg(long, allow_hyphen_values = true)]
    pub settings: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ResourceExhausted(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses the process arguments, runs, and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Scan(a) => cmd_scan(&a, stdout),
        Command::Chsh(a) => cmd_chsh(&a, stdout),
        Command::Validate(a) => cmd_validate(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
    }
}

/// Flags, config file and defaults merged.
struct Resolved {
    config: ConfigFile,
    source: SourceConstraints,
    seed: u64,
    events: u64,
    partitions: u32,
    mode: Mode,
    out: Option<PathBuf>,
}

impl Resolved {
    fn new(common: &CommonArgs, default_mode: Mode) -> CliResult<Self> {
        Self::with_config_path(common, common.config.as_deref(), default_mode)
    }

    fn with_config_path(common: &CommonArgs, path: Option<&Path>, default_mode: Mode) -> CliResult<Self> {
        let config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
                let cfg = ConfigFile::parse(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                cfg
            }
            None => ConfigFile::default(),
        };
        let source = config.source_constraints()?;
        let mode = match common.mode {
            Some(m) => m,
            None => match config.raw("mode") {
                Some(v) => Mode::parse(v).map_err(|e| CliError::Usage(format!("config: key `mode`: {e}")))?,
                None => default_mode,
            },
        };
        let partitions = match common.partitions {
            Some(p) => p,
            None => match config.get_u64("partitions")? {
                Some(p) => u32::try_from(p).map_err(|_| CliError::Usage(format!("partitions {p} out of range")))?,
                None => DEFAULT_PARTITIONS,
            },
        };
        Ok(Resolved {
            seed: common.seed.or(config.get_u64("seed")?).unwrap_or(DEFAULT_SEED),
            events: common.events.or(config.get_u64("events")?).unwrap_or(DEFAULT_EVENTS),
            partitions,
            mode,
            out: common.out.clone(),
            source,
            config,
        })
    }

    /// Refuses to run on a source that violates its constraints.
    fn require_valid_source(&self) -> CliResult<ValidationReport> {
        let report = validate_constraints(&self.source)?;
        if !report.passed() {
            let names: Vec<_> = report.failures().map(|c| c.name).collect();
            return Err(CliError::Validation(format!(
                "source constraints fail: {}",
                names.join(", ")
            )));
        }
        Ok(report)
    }

    /// Canonical text hashed into the output stamp. The seed and output paths
    /// are excluded; the seed is stamped separately.
    fn canonical(&self, command: &str, extra: &[(&str, String)]) -> String {
        let s = &self.source;
        let mut out = String::new();
        let _ = writeln!(out, "command={command}");
        let _ = writeln!(out, "mode={}", self.mode.name());
        if self.mode != Mode::Analytic {
            let _ = writeln!(out, "events={}", self.events);
            let _ = writeln!(out, "partitions={}", self.partitions);
        }
        for (k, v) in [
            ("const_sum", s.const_sum),
            ("delta_2h", s.delta_2h),
            ("delta_2v", s.delta_2v),
            ("pump_frequency", s.pump_frequency),
            ("theta_1h", s.beam1_phases.0),
            ("theta_1v", s.beam1_phases.1),
            ("omega_1h", s.beam1_frequencies.0),
            ("omega_1v", s.beam1_frequencies.1),
            ("detector_distance", s.detector_distance),
        ] {
            let _ = writeln!(out, "{k}={}", format_float(v));
        }
        let _ = writeln!(out, "entangled_source={}", s.entangled_source);
        for (k, v) in extra {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    fn stamp(&self, command: &str, extra: &[(&str, String)]) -> Stamp {
        Stamp::new(self.seed, &self.canonical(command, extra))
    }

    fn emit(&self, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
        match &self.out {
            Some(p) => write_file(p, bytes),
            None => stdout
                .write_all(bytes)
                .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}"))),
        }
    }

    fn run_config(&self, estimator: Estimator, settings: Vec<AnalyzerSetting>) -> RunConfig {
        RunConfig {
            n_events: self.events,
            seed: self.seed,
            n_partitions: self.partitions,
            estimator,
            settings,
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn check_run_shape(r: &Resolved) -> CliResult<()> {
    if r.mode == Mode::Analytic {
        return Ok(());
    }
    // Surface divisibility problems as usage errors before any work starts.
    r.run_config(Estimator::OutcomeSampling, vec![AnalyzerSetting::new(0.0, 0.0)?])
        .validate()
        .map_err(CliError::from)
}

pub fn cmd_scan(args: &ScanArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let r = Resolved::new(&args.common, Mode::Analytic)?;
    let delta_min = args.delta_min.or(r.config.get_angle("delta_min")?).unwrap_or(0.0);
    let delta_max = args.delta_max.or(r.config.get_angle("delta_max")?).unwrap_or(PI);
    let points = args.points.or(r.config.get_u64("points")?).unwrap_or(DEFAULT_SCAN_POINTS);
    let theta1 = args.theta1.or(r.config.get_angle("theta1")?).unwrap_or(0.0);
    if points < 2 {
        return Err(CliError::Usage(format!("points must be at least 2, got {points}")));
    }
    if !(delta_min.is_finite() && delta_max.is_finite()) {
        return Err(CliError::Usage("delta range must be finite".into()));
    }
    check_run_shape(&r)?;
    r.require_valid_source()?;

    let deltas: Vec<f64> = (0..points)
        .map(|k| delta_min + (delta_max - delta_min) * k as f64 / (points - 1) as f64)
        .collect();
    let settings = deltas
        .iter()
        .map(|&d| AnalyzerSetting::with_delta(theta1, d))
        .collect::<Result<Vec<_>, _>>()?;

    let estimates: Vec<Option<CorrelationEstimate>> = match r.mode.estimator() {
        None => vec![None; settings.len()],
        Some(estimator) => {
            let record = run_experiment(&r.run_config(estimator, settings.clone()))?;
            settings
                .iter()
                .map(|s| empirical_correlation(&record, s).map(Some))
                .collect::<Result<_, _>>()?
        }
    };
    let rows: Vec<ScanRow> = deltas
        .iter()
        .zip(&settings)
        .zip(&estimates)
        .map(|((&delta, s), est)| ScanRow {
            delta,
            e_analytic: bell_correlation(s),
            e_mc: est.map(|e| e.value),
            std_err: est.map(|e| e.std_error),
            n_events: est.map_or(0, |e| e.n_events),
        })
        .collect();

    let stamp = r.stamp(
        "scan",
        &[
            ("delta_min", format_float(delta_min)),
            ("delta_max", format_float(delta_max)),
            ("points", points.to_string()),
            ("theta1", format_float(theta1)),
        ],
    );
    let csv = scan_csv(&stamp, &rows).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(svg_path) = &args.svg {
        let curve: Vec<(f64, f64)> = (0..CURVE_SAMPLES)
            .map(|k| {
                let d = delta_min + (delta_max - delta_min) * k as f64 / (CURVE_SAMPLES - 1) as f64;
                AnalyzerSetting::with_delta(theta1, d).map(|s| (d, bell_correlation(&s)))
            })
            .collect::<Result<_, _>>()?;
        write_file(svg_path, scan_svg(&stamp, &rows, &curve).as_bytes())?;
    }
    r.emit(&csv, stdout)
}

#[derive(Serialize)]
struct ChshOutput<'a> {
    command: &'static str,
    source: &'static str,
    mode: Option<&'static str>,
    n_events: u64,
    n_partitions: Option<u32>,
    angles: Option<ChshSettings>,
    #[serde(flatten)]
    report: &'a ChshReport,
}

fn parse_chsh_angles(v: &str) -> CliResult<ChshSettings> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::Usage(format!(
            "--angles expects four values a,a',b,b', got {}",
            parts.len()
        )));
    }
    let mut x = [0.0; 4];
    for (slot, p) in x.iter_mut().zip(&parts) {
        *slot = parse_angle(p).map_err(|e| CliError::Usage(format!("--angles: {e}")))?;
    }
    Ok(ChshSettings {
        a: x[0],
        a_prime: x[1],
        b: x[2],
        b_prime: x[3],
    })
}

pub fn cmd_chsh(args: &ChshArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let r = Resolved::new(&args.common, Mode::McOutcome)?;

    if let Some(path) = &args.dataset {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read dataset {}: {e}", path.display())))?;
        let dataset =
            read_dataset_csv(bytes.as_slice()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let report = chsh_from_shared(&dataset)?;
        let stamp = r.stamp("chsh", &[("dataset_sha256", digest_hex(&bytes))]);
        let out = ChshOutput {
            command: "chsh",
            source: "external_dataset",
            mode: None,
            n_events: dataset.len() as u64,
            n_partitions: None,
            angles: None,
            report: &report,
        };
        return r.emit(json_document(&stamp, &out).map_err(|e| CliError::Io(e.to_string()))?.as_bytes(), stdout);
    }

    let angles = match &args.angles {
        Some(v) => parse_chsh_angles(v)?,
        None => {
            let d = ChshSettings::standard();
            ChshSettings {
                a: r.config.get_angle("chsh_a")?.unwrap_or(d.a),
                a_prime: r.config.get_angle("chsh_a_prime")?.unwrap_or(d.a_prime),
                b: r.config.get_angle("chsh_b")?.unwrap_or(d.b),
                b_prime: r.config.get_angle("chsh_b_prime")?.unwrap_or(d.b_prime),
            }
        }
    };
    r.require_valid_source()?;
    let extra = [
        ("a", format_float(angles.a)),
        ("a_prime", format_float(angles.a_prime)),
        ("b", format_float(angles.b)),
        ("b_prime", format_float(angles.b_prime)),
        ("shared", args.shared.to_string()),
    ];

    let (source, mode, n_partitions, report) = if args.shared {
        if r.mode == Mode::McWeight {
            return Err(CliError::Usage("--shared needs ±1 outcomes; use --mode mc-outcome".into()));
        }
        let n = usize::try_from(r.events).map_err(|_| CliError::Usage("--events too large".into()))?;
        if n == 0 {
            return Err(CliError::Usage("--events must be at least 1".into()));
        }
        let dataset = generate_shared_dataset(&angles, n, r.seed)?;
        ("shared_run", Mode::McOutcome, None, chsh_from_shared(&dataset)?)
    } else {
        match r.mode.estimator() {
            None => ("analytic", Mode::Analytic, None, chsh_analytic(&angles)?),
            Some(estimator) => {
                check_run_shape(&r)?;
                (
                    "independent_pairs",
                    r.mode,
                    Some(r.partitions),
                    chsh_from_independent(&angles, r.events, r.seed, r.partitions, estimator)?,
                )
            }
        }
    };
    let stamp = r.stamp("chsh", &extra);
    let out = ChshOutput {
        command: "chsh",
        source,
        mode: Some(mode.name()),
        n_events: if mode == Mode::Analytic { 0 } else { r.events },
        n_partitions,
        angles: Some(angles),
        report: &report,
    };
    r.emit(json_document(&stamp, &out).map_err(|e| CliError::Io(e.to_string()))?.as_bytes(), stdout)
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    command: &'static str,
    passed: bool,
    fractional_detuning: f64,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

pub fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let path = args.path.as_deref().or(args.common.config.as_deref());
    let r = Resolved::with_config_path(&args.common, path, Mode::Analytic)?;
    let report = validate_constraints(&r.source)?;

    let mut text = String::new();
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
            CheckStatus::Fail => "FAIL",
        };
        let _ = writeln!(text, "{tag} {:<20} residual={} {}", c.name, format_float(c.residual), c.detail);
    }
    let failures = report.failures().count();
    let warnings = report.warnings().count();
    let _ = writeln!(
        text,
        "{}: {failures} failure(s), {warnings} warning(s)",
        if report.passed() { "ok" } else { "FAILED" }
    );

    match &r.out {
        Some(p) => {
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}")))?;
            let stamp = r.stamp("validate", &[]);
            let body = ValidateOutput {
                command: "validate",
                passed: report.passed(),
                fractional_detuning: r.source.fractional_detuning(),
                report: &report,
            };
            write_file(p, json_document(&stamp, &body).map_err(|e| CliError::Io(e.to_string()))?.as_bytes())?;
        }
        None => {
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}")))?;
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{failures} constraint(s) failed")))
    }
}

#[derive(Serialize)]
struct SimulatedSetting {
    theta1: f64,
    theta2: f64,
    delta: f64,
    analytic: f64,
    estimate: Option<CorrelationEstimate>,
    singles: Option<[f64; 4]>,
    joint: Option<[f64; 4]>,
    same_side: Option<[f64; 2]>,
    record: Option<SettingRecord>,
}

#[derive(Serialize)]
struct SimulateOutput {
    command: &'static str,
    mode: &'static str,
    n_events: u64,
    n_partitions: Option<u32>,
    settings: Vec<SimulatedSetting>,
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let r = Resolved::new(&args.common, Mode::McOutcome)?;
    let settings: Vec<AnalyzerSetting> = match &args.settings {
        Some(v) => {
            let cfg = ConfigFile::parse(&format!("settings = {v}")).map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.get_settings("settings")
                .map_err(|e| CliError::Usage(format!("--settings: {e}")))?
                .unwrap_or_default()
        }
        None => match r.config.get_settings("settings")? {
            Some(s) => s,
            None => ChshSettings::standard().pairs()?.to_vec(),
        },
    };
    check_run_shape(&r)?;
    r.require_valid_source()?;

    let record = match r.mode.estimator() {
        Some(estimator) => Some(run_experiment(&r.run_config(estimator, settings.clone()))?),
        None => None,
    };
    let mut rows = Vec::with_capacity(settings.len());
    for s in &settings {
        let rec = record.as_ref().and_then(|rec| rec.get(s));
        let estimate = match &record {
            Some(rec) => Some(empirical_correlation(rec, s)?),
            None => None,
        };
        rows.push(SimulatedSetting {
            theta1: s.theta1(),
            theta2: s.theta2(),
            delta: s.delta(),
            analytic: bell_correlation(s),
            estimate,
            singles: rec.map(|rec| {
                [
                    rec.singles_rate(Side::A, Port::N),
                    rec.singles_rate(Side::A, Port::P),
                    rec.singles_rate(Side::B, Port::N),
                    rec.singles_rate(Side::B, Port::P),
                ]
            }),
            joint: rec.map(|rec| PortPair::ALL.map(|p| rec.joint_rate(p))),
            same_side: rec.and_then(|rec| Some([rec.same_side_rate(Side::A)?, rec.same_side_rate(Side::B)?])),
            record: rec.cloned(),
        });
    }
    let settings_text: Vec<String> = settings
        .iter()
        .map(|s| format!("{}:{}", format_float(s.theta1()), format_float(s.theta2())))
        .collect();
    let stamp = r.stamp("simulate", &[("settings", settings_text.join(","))]);
    let out = SimulateOutput {
        command: "simulate",
        mode: r.mode.name(),
        n_events: if record.is_some() { r.events } else { 0 },
        n_partitions: record.as_ref().map(|_| r.partitions),
        settings: rows,
    };
    r.emit(json_document(&stamp, &out).map_err(|e| CliError::Io(e.to_string()))?.as_bytes(), stdout)
}
