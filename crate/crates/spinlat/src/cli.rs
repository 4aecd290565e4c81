//! Command implementations behind the `spinlat` binary.
//!
//! Every command accepts a JSON config (unknown keys rejected) or the
//! equivalent explicit flags, validates all paths before any computation,
//! stages its outputs in memory, and only then writes them atomically.
//! Result records are JSON; rerunning a command with identical inputs and
//! seed reproduces the `results` object byte for byte (the timestamp
//! lives outside it).
//!
//! Exit codes: 0 ok, 2 config/schema error, 3 fit failure, 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::decay_tau_grid;
use crate::fit::{
    fit_decay_pair, fit_two_lorentzian, DataPoint, FitError, FitModel, FitResult, RateExtraction,
    SharedRateDecay,
};
use crate::io::{self, IoError};
use crate::kinetics::{t1_from_rates, RatePair};
use crate::phonon::{
    fit_temperature_series, pdos_peaks, predict_t1_curve, CouplingSet, PhononError, PhononMode,
    MODE_COUNT,
};
use crate::plot::{render_svg, Figure, Series};
use crate::sequence::{
    synth_dataset_with, CurveKind, DecayDataset, ProtocolOptions, ReadoutModel, SequenceError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Fit(_) => EXIT_FIT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Schema { .. } => CliError::Config(e.to_string()),
            IoError::File { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Fit(e.to_string())
    }
}

impl From<PhononError> for CliError {
    fn from(e: PhononError) -> Self {
        CliError::Fit(e.to_string())
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Output format for the numeric tables; records are always JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

impl TableFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(CliError::Config(format!(
                "unknown format {other:?}, expected csv or json"
            ))),
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

/// Envelope for every command's JSON record.
#[derive(Debug, Serialize)]
pub struct ResultRecord<T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub timestamp_unix_s: u64,
    pub input_digest: String,
    pub results: T,
}

impl<T: Serialize> ResultRecord<T> {
    fn new(command: &'static str, input_digest: String, results: T) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            input_digest,
            results,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamDto {
    pub name: &'static str,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDto {
    pub model: String,
    pub params: Vec<ParamDto>,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitDto {
    fn new(model: impl Into<String>, names: &[&'static str], fit: &FitResult) -> Self {
        Self {
            model: model.into(),
            params: names
                .iter()
                .zip(fit.params.iter().zip(&fit.stderr))
                .map(|(&name, (&value, &stderr))| ParamDto {
                    name,
                    value,
                    stderr,
                })
                .collect(),
            chi2: fit.chi2,
            dof: fit.dof,
            reduced_chi2: fit.reduced_chi2(),
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesDto {
    pub omega_khz: f64,
    pub omega_stderr_khz: f64,
    pub gamma_khz: f64,
    pub gamma_stderr_khz: f64,
    pub t1_us: Option<f64>,
}

/// A staged output file: rendered bytes plus destination name.
struct Staged {
    name: String,
    bytes: Vec<u8>,
}

/// Paths written by a command, in write order.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub record_path: PathBuf,
    pub files: Vec<PathBuf>,
    pub record_json: String,
}

fn write_staged(
    out_dir: &Path,
    record_name: &str,
    record_json: String,
    staged: Vec<Staged>,
) -> Result<CommandOutput, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut files = Vec::new();
    for s in &staged {
        let path = out_dir.join(&s.name);
        io::atomic_write(&path, &s.bytes)?;
        files.push(path);
    }
    let record_path = out_dir.join(record_name);
    io::atomic_write(&record_path, record_json.as_bytes())?;
    Ok(CommandOutput {
        record_path,
        files,
        record_json,
    })
}

fn record_json<T: Serialize>(record: &ResultRecord<T>) -> Result<String, CliError> {
    serde_json::to_string_pretty(record)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Io(format!("serializing record: {e}")))
}

fn require<T>(field: Option<T>, name: &str) -> Result<T, CliError> {
    field.ok_or_else(|| CliError::Config(format!("missing required field {name:?}")))
}

fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("config structs always serialize")
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Config for `simulate`. Fields left null fall back to the documented
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub omega_khz: Option<f64>,
    pub gamma_khz: Option<f64>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub tau_points: Option<usize>,
    /// Explicit grid; overrides `tau_points`/`tau_max_*`.
    pub tau_grid_us: Option<Vec<f64>>,
    pub tau_max_f1_us: Option<f64>,
    pub tau_max_f2_us: Option<f64>,
    pub rate_bright: Option<f64>,
    pub rate_dark: Option<f64>,
    pub temperature_k: Option<f64>,
    pub pi_fidelity: Option<f64>,
}

impl SimulateConfig {
    /// Later values win; used to fold explicit flags over a config file.
    pub fn merged_with(mut self, overlay: SimulateConfig) -> SimulateConfig {
        macro_rules! fold {
            ($($field:ident),*) => {
                $(if overlay.$field.is_some() { self.$field = overlay.$field; })*
            };
        }
        fold!(
            omega_khz,
            gamma_khz,
            shots,
            seed,
            tau_points,
            tau_grid_us,
            tau_max_f1_us,
            tau_max_f2_us,
            rate_bright,
            rate_dark,
            temperature_k,
            pi_fidelity
        );
        self
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateResults {
    pub omega_khz: f64,
    pub gamma_khz: f64,
    pub shots: u64,
    pub seed: u64,
    pub temperature_k: f64,
    pub f1_file: String,
    pub f2_file: String,
    pub f1_points: usize,
    pub f2_points: usize,
}

pub fn cmd_simulate(
    config: &SimulateConfig,
    out_dir: &Path,
    format: TableFormat,
) -> Result<CommandOutput, CliError> {
    let omega = require(config.omega_khz, "omega_khz")?;
    let gamma = require(config.gamma_khz, "gamma_khz")?;
    let shots = config.shots.unwrap_or(100_000);
    let seed = config.seed.unwrap_or(0);
    let tau_points = config.tau_points.unwrap_or(20);
    let rate_bright = config.rate_bright.unwrap_or(1.0);
    let rate_dark = config.rate_dark.unwrap_or(0.85);
    let temperature_k = config.temperature_k.unwrap_or(293.0);
    let pi_fidelity = config.pi_fidelity.unwrap_or(1.0);

    let rates = RatePair::new(omega, gamma).map_err(|e| CliError::Config(e.to_string()))?;
    let readout = ReadoutModel::new(rate_bright, rate_dark, shots)?;
    if config.tau_grid_us.is_none() && tau_points < 2 {
        return Err(CliError::Config(format!(
            "tau_points must be at least 2, got {tau_points}"
        )));
    }
    if !(0.0..=1.0).contains(&pi_fidelity) {
        return Err(CliError::Config(format!(
            "pi_fidelity {pi_fidelity} outside [0, 1]"
        )));
    }

    let f1_grid = match &config.tau_grid_us {
        Some(grid) => grid.clone(),
        None => {
            let k1 = 3.0 * omega;
            match config.tau_max_f1_us {
                Some(max) => uniform_grid(max, tau_points),
                None if k1 > 0.0 => decay_tau_grid(k1, tau_points),
                None => {
                    return Err(CliError::Config(
                        "omega_khz = 0 needs an explicit tau grid".into(),
                    ))
                }
            }
        }
    };
    let f2_grid = match &config.tau_grid_us {
        Some(grid) => grid.clone(),
        None => {
            let k2 = 2.0 * gamma + omega;
            match config.tau_max_f2_us {
                Some(max) => uniform_grid(max, tau_points),
                None if k2 > 0.0 => decay_tau_grid(k2, tau_points),
                None => {
                    return Err(CliError::Config(
                        "gamma_khz = 0 needs an explicit tau grid".into(),
                    ))
                }
            }
        }
    };

    let opts = ProtocolOptions {
        pi_fidelity,
        ..Default::default()
    };
    let f1 = synth_dataset_with(
        CurveKind::F1,
        &rates,
        &readout,
        &f1_grid,
        seed,
        &opts,
        temperature_k,
    )?;
    let f2 = synth_dataset_with(
        CurveKind::F2,
        &rates,
        &readout,
        &f2_grid,
        seed,
        &opts,
        temperature_k,
    )?;

    let f1_name = format!("f1.{}", format.extension());
    let f2_name = format!("f2.{}", format.extension());
    let staged = vec![
        Staged {
            name: f1_name.clone(),
            bytes: dataset_bytes(&f1, format)?,
        },
        Staged {
            name: f2_name.clone(),
            bytes: dataset_bytes(&f2, format)?,
        },
    ];

    let mut digest = io::InputDigest::new();
    digest.add_section("config", &canonical_json(config));
    let record = ResultRecord::new(
        "simulate",
        digest.finish(),
        SimulateResults {
            omega_khz: omega,
            gamma_khz: gamma,
            shots,
            seed,
            temperature_k,
            f1_file: f1_name,
            f2_file: f2_name,
            f1_points: f1.points.len(),
            f2_points: f2.points.len(),
        },
    );
    write_staged(
        out_dir,
        "simulate_record.json",
        record_json(&record)?,
        staged,
    )
}

fn uniform_grid(max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| max * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Serialize)]
struct DatasetDto {
    curve: &'static str,
    temperature_k: f64,
    points: Vec<PointDto>,
}

#[derive(Debug, Serialize)]
struct PointDto {
    tau_us: f64,
    signal: f64,
    sigma: f64,
}

fn dataset_bytes(dataset: &DecayDataset, format: TableFormat) -> Result<Vec<u8>, CliError> {
    match format {
        TableFormat::Csv => Ok(io::decay_csv_string(&dataset.points).into_bytes()),
        TableFormat::Json => {
            let dto = DatasetDto {
                curve: dataset.curve.as_str(),
                temperature_k: dataset.temperature_k,
                points: dataset
                    .points
                    .iter()
                    .map(|p| PointDto {
                        tau_us: p.x,
                        signal: p.y,
                        sigma: p.sigma,
                    })
                    .collect(),
            };
            serde_json::to_vec_pretty(&dto)
                .map(|mut v| {
                    v.push(b'\n');
                    v
                })
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// fit-decay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDecayConfig {
    pub f1: Option<PathBuf>,
    pub f2: Option<PathBuf>,
    /// Fit the F2 rate freely instead of sharing omega from the F1 fit.
    pub free_rate: Option<bool>,
}

impl FitDecayConfig {
    pub fn merged_with(mut self, overlay: FitDecayConfig) -> FitDecayConfig {
        if overlay.f1.is_some() {
            self.f1 = overlay.f1;
        }
        if overlay.f2.is_some() {
            self.f2 = overlay.f2;
        }
        if overlay.free_rate.is_some() {
            self.free_rate = overlay.free_rate;
        }
        self
    }
}

#[derive(Debug, Serialize)]
pub struct FitDecayResults {
    pub extraction: &'static str,
    pub f1_fit: FitDto,
    pub f2_fit: FitDto,
    pub rates: RatesDto,
}

pub fn cmd_fit_decay(
    config: &FitDecayConfig,
    out_dir: &Path,
    format: TableFormat,
) -> Result<CommandOutput, CliError> {
    let f1_path = require(config.f1.clone(), "f1")?;
    let f2_path = require(config.f2.clone(), "f2")?;
    let mode = if config.free_rate.unwrap_or(false) {
        RateExtraction::FreeRate
    } else {
        RateExtraction::SharedOmega
    };
    for p in [&f1_path, &f2_path] {
        if !p.is_file() {
            return Err(CliError::Io(format!("{}: no such file", p.display())));
        }
    }

    let f1_points = io::read_decay_csv(&f1_path)?;
    let f2_points = io::read_decay_csv(&f2_path)?;
    let pair = fit_decay_pair(&f1_points, &f2_points, mode)?;

    let t1_us = RatePair::new(pair.rates.omega_khz.max(0.0), pair.rates.gamma_khz.max(0.0))
        .ok()
        .and_then(|r| t1_from_rates(&r).ok());

    let (extraction, f2_dto) = match mode {
        RateExtraction::SharedOmega => (
            "shared-omega",
            FitDto::new(
                "a*exp(-(2*gamma+omega)*tau*1e-3)+c",
                &["amplitude", "gamma_khz", "baseline"],
                &pair.f2,
            ),
        ),
        RateExtraction::FreeRate => (
            "free-rate",
            FitDto::new(
                "a*exp(-k*tau*1e-3)+c",
                &["amplitude", "rate_khz", "baseline"],
                &pair.f2,
            ),
        ),
    };

    // plot data: measured points plus the fitted curve on the same grid
    let shared_model = SharedRateDecay {
        omega_khz: pair.rates.omega_khz,
    };
    let eval_f2 = |x: f64| match mode {
        RateExtraction::SharedOmega => shared_model.eval(&pair.f2.params, x),
        RateExtraction::FreeRate => crate::fit::ExponentialDecay.eval(&pair.f2.params, x),
    };
    let eval_f1 = |x: f64| crate::fit::ExponentialDecay.eval(&pair.f1.params, x);

    let mut staged = Vec::new();
    for (name, points, eval) in [
        ("f1_fit", &f1_points, &eval_f1 as &dyn Fn(f64) -> f64),
        ("f2_fit", &f2_points, &eval_f2 as &dyn Fn(f64) -> f64),
    ] {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.x, p.y, eval(p.x)]).collect();
        staged.push(Staged {
            name: format!("{name}.{}", format.extension()),
            bytes: table_bytes("tau_us,signal,fit", &rows, format)?,
        });
        staged.push(Staged {
            name: format!("{name}.svg"),
            bytes: decay_figure(name, points, eval)?.into_bytes(),
        });
    }

    let mut digest = io::InputDigest::new();
    digest.add_file(&f1_path)?;
    digest.add_file(&f2_path)?;
    digest.add_section("config", &canonical_json(config));
    let record = ResultRecord::new(
        "fit-decay",
        digest.finish(),
        FitDecayResults {
            extraction,
            f1_fit: FitDto::new(
                "a*exp(-k*tau*1e-3)+c",
                &["amplitude", "rate_khz", "baseline"],
                &pair.f1,
            ),
            f2_fit: f2_dto,
            rates: RatesDto {
                omega_khz: pair.rates.omega_khz,
                omega_stderr_khz: pair.rates.omega_stderr_khz,
                gamma_khz: pair.rates.gamma_khz,
                gamma_stderr_khz: pair.rates.gamma_stderr_khz,
                t1_us,
            },
        },
    );
    write_staged(
        out_dir,
        "fit_decay_record.json",
        record_json(&record)?,
        staged,
    )
}

fn decay_figure(
    name: &str,
    points: &[DataPoint],
    eval: &dyn Fn(f64) -> f64,
) -> Result<String, CliError> {
    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let (lo, hi) = (points[0].x, points[points.len() - 1].x);
    let fit: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 199.0;
            (x, eval(x))
        })
        .collect();
    let figure = Figure {
        title: format!("{name} decay"),
        x_label: "tau (us)".into(),
        y_label: "normalized fluorescence difference".into(),
        series: vec![Series::points("data", data), Series::line("fit", fit)],
    };
    render_svg(&figure).map_err(|e| CliError::Fit(e.to_string()))
}

fn table_bytes(header: &str, rows: &[Vec<f64>], format: TableFormat) -> Result<Vec<u8>, CliError> {
    match format {
        TableFormat::Csv => Ok(io::table_csv_string(header, rows).into_bytes()),
        TableFormat::Json => {
            let cols: Vec<&str> = header.split(',').collect();
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = cols
                        .iter()
                        .zip(row)
                        .map(|(c, v)| ((*c).to_string(), serde_json::json!(v)))
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            serde_json::to_vec_pretty(&objects)
                .map(|mut v| {
                    v.push(b'\n');
                    v
                })
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// fit-odmr
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOdmrConfig {
    pub spectrum: Option<PathBuf>,
}

impl FitOdmrConfig {
    pub fn merged_with(mut self, overlay: FitOdmrConfig) -> FitOdmrConfig {
        if overlay.spectrum.is_some() {
            self.spectrum = overlay.spectrum;
        }
        self
    }
}

#[derive(Debug, Serialize)]
pub struct FitOdmrResults {
    pub fit: FitDto,
    pub nu1_mhz: f64,
    pub nu1_stderr_mhz: f64,
    pub nu2_mhz: f64,
    pub nu2_stderr_mhz: f64,
    pub nu0_mhz: f64,
    pub nu0_stderr_mhz: f64,
    pub width1_mhz: f64,
    pub width2_mhz: f64,
}

pub fn cmd_fit_odmr(
    config: &FitOdmrConfig,
    out_dir: &Path,
    format: TableFormat,
) -> Result<CommandOutput, CliError> {
    let path = require(config.spectrum.clone(), "spectrum")?;
    if !path.is_file() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    let spectrum = io::read_odmr_csv(&path)?;
    let fit = fit_two_lorentzian(&spectrum)?;

    let model = crate::fit::TwoLorentzian;
    let rows: Vec<Vec<f64>> = spectrum
        .iter()
        .map(|&(x, y)| vec![x, y, model.eval(&fit.fit.params, x)])
        .collect();
    let fit_curve: Vec<(f64, f64)> = spectrum
        .iter()
        .map(|&(x, _)| (x, model.eval(&fit.fit.params, x)))
        .collect();
    let figure = Figure {
        title: "ODMR spectrum".into(),
        x_label: "microwave frequency (MHz)".into(),
        y_label: "contrast".into(),
        series: vec![
            Series::points("data", spectrum.clone()),
            Series::line("two-Lorentzian fit", fit_curve),
        ],
    };

    let staged = vec![
        Staged {
            name: format!("odmr_fit.{}", format.extension()),
            bytes: table_bytes("freq_MHz,contrast,fit", &rows, format)?,
        },
        Staged {
            name: "odmr_fit.svg".into(),
            bytes: render_svg(&figure)
                .map_err(|e| CliError::Fit(e.to_string()))?
                .into_bytes(),
        },
    ];

    let mut digest = io::InputDigest::new();
    digest.add_file(&path)?;
    digest.add_section("config", &canonical_json(config));
    let record = ResultRecord::new(
        "fit-odmr",
        digest.finish(),
        FitOdmrResults {
            fit: FitDto::new(
                "c0 - a1*w1^2/((nu-nu1)^2+w1^2) - a2*w2^2/((nu-nu2)^2+w2^2)",
                &["c0", "a1", "nu1_mhz", "w1_mhz", "a2", "nu2_mhz", "w2_mhz"],
                &fit.fit,
            ),
            nu1_mhz: fit.nu1_mhz,
            nu1_stderr_mhz: fit.nu1_stderr_mhz,
            nu2_mhz: fit.nu2_mhz,
            nu2_stderr_mhz: fit.nu2_stderr_mhz,
            nu0_mhz: fit.nu0_mhz,
            nu0_stderr_mhz: fit.nu0_stderr_mhz,
            width1_mhz: fit.width1_mhz,
            width2_mhz: fit.width2_mhz,
        },
    );
    write_staged(
        out_dir,
        "fit_odmr_record.json",
        record_json(&record)?,
        staged,
    )
}

// ---------------------------------------------------------------------------
// fit-temp
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTempConfig {
    pub series: Option<PathBuf>,
    pub pdos: Option<PathBuf>,
}

impl FitTempConfig {
    pub fn merged_with(mut self, overlay: FitTempConfig) -> FitTempConfig {
        if overlay.series.is_some() {
            self.series = overlay.series;
        }
        if overlay.pdos.is_some() {
            self.pdos = overlay.pdos;
        }
        self
    }
}

#[derive(Debug, Serialize)]
pub struct CouplingDto {
    pub modes_mev: Vec<f64>,
    pub a_coeffs_khz: Vec<f64>,
    pub a_offset_khz: f64,
    pub b_coeffs_khz: Vec<f64>,
    pub b_offset_khz: f64,
}

impl CouplingDto {
    fn new(c: &CouplingSet) -> Self {
        Self {
            modes_mev: c.modes().iter().map(|m| m.energy_mev()).collect(),
            a_coeffs_khz: c.a_coeffs().to_vec(),
            a_offset_khz: c.a_offset(),
            b_coeffs_khz: c.b_coeffs().to_vec(),
            b_offset_khz: c.b_offset(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitTempResults {
    pub spot_label: String,
    pub coupling: CouplingDto,
    pub omega_fit: FitDto,
    pub gamma_fit: FitDto,
    pub prediction_file: String,
}

/// 1 K prediction grid used by `fit-temp`.
pub const PREDICTION_T_MIN_K: f64 = 290.0;
pub const PREDICTION_T_MAX_K: f64 = 420.0;

pub fn cmd_fit_temp(
    config: &FitTempConfig,
    out_dir: &Path,
    format: TableFormat,
) -> Result<CommandOutput, CliError> {
    let series_path = require(config.series.clone(), "series")?;
    let pdos_path = require(config.pdos.clone(), "pdos")?;
    for p in [&series_path, &pdos_path] {
        if !p.is_file() {
            return Err(CliError::Io(format!("{}: no such file", p.display())));
        }
    }

    let series = io::read_temperature_csv(&series_path)?;
    let pdos = io::read_pdos_csv(&pdos_path)?;

    let modes_vec = pdos_peaks(&pdos, MODE_COUNT)?;
    let modes: [PhononMode; MODE_COUNT] = [modes_vec[0], modes_vec[1], modes_vec[2]];
    let fit = fit_temperature_series(&series, &modes)?;

    let grid: Vec<f64> = (PREDICTION_T_MIN_K as i64..=PREDICTION_T_MAX_K as i64)
        .map(|t| t as f64)
        .collect();
    let curve = predict_t1_curve(&fit.coupling, &grid)?;
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|p| vec![p.t_k, p.omega_khz, p.gamma_khz, p.t1_us])
        .collect();

    let figure = Figure {
        title: format!(
            "relaxation rates vs temperature{}",
            if series.spot_label().is_empty() {
                String::new()
            } else {
                format!(" ({})", series.spot_label())
            }
        ),
        x_label: "temperature (K)".into(),
        y_label: "rate (kHz)".into(),
        series: vec![
            Series::points(
                "omega data",
                series
                    .points()
                    .iter()
                    .map(|p| (p.t_k, p.omega_khz))
                    .collect(),
            ),
            Series::line(
                "omega fit",
                curve.iter().map(|p| (p.t_k, p.omega_khz)).collect(),
            ),
            Series::points(
                "gamma data",
                series
                    .points()
                    .iter()
                    .map(|p| (p.t_k, p.gamma_khz))
                    .collect(),
            ),
            Series::line(
                "gamma fit",
                curve.iter().map(|p| (p.t_k, p.gamma_khz)).collect(),
            ),
        ],
    };

    let prediction_file = format!("t1_prediction.{}", format.extension());
    let staged = vec![
        Staged {
            name: prediction_file.clone(),
            bytes: table_bytes("T_K,omega_kHz,gamma_kHz,t1_us", &rows, format)?,
        },
        Staged {
            name: "temp_fit.svg".into(),
            bytes: render_svg(&figure)
                .map_err(|e| CliError::Fit(e.to_string()))?
                .into_bytes(),
        },
    ];

    let param_names = ["a1_khz", "a2_khz", "a3_khz", "offset_khz"];
    let mut digest = io::InputDigest::new();
    digest.add_file(&series_path)?;
    digest.add_file(&pdos_path)?;
    digest.add_section("config", &canonical_json(config));
    let record = ResultRecord::new(
        "fit-temp",
        digest.finish(),
        FitTempResults {
            spot_label: series.spot_label().to_string(),
            coupling: CouplingDto::new(&fit.coupling),
            omega_fit: FitDto::new(
                "sum_i a_i n_i (n_i + 1) + offset",
                &param_names,
                &fit.omega_fit,
            ),
            gamma_fit: FitDto::new(
                "sum_i b_i n_i (n_i + 1) + offset",
                &param_names,
                &fit.gamma_fit,
            ),
            prediction_file,
        },
    );
    write_staged(
        out_dir,
        "fit_temp_record.json",
        record_json(&record)?,
        staged,
    )
}

// ---------------------------------------------------------------------------
// predict-t1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictT1Config {
    pub modes_mev: Option<Vec<f64>>,
    pub a_coeffs_khz: Option<Vec<f64>>,
    pub a_offset_khz: Option<f64>,
    pub b_coeffs_khz: Option<Vec<f64>>,
    pub b_offset_khz: Option<f64>,
    pub t_min_k: Option<f64>,
    pub t_max_k: Option<f64>,
    pub t_step_k: Option<f64>,
}

impl PredictT1Config {
    pub fn merged_with(mut self, overlay: PredictT1Config) -> PredictT1Config {
        macro_rules! fold {
            ($($field:ident),*) => {
                $(if overlay.$field.is_some() { self.$field = overlay.$field; })*
            };
        }
        fold!(
            modes_mev,
            a_coeffs_khz,
            a_offset_khz,
            b_coeffs_khz,
            b_offset_khz,
            t_min_k,
            t_max_k,
            t_step_k
        );
        self
    }
}

#[derive(Debug, Serialize)]
pub struct PredictT1Results {
    pub coupling: CouplingDto,
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub t_step_k: f64,
    pub points: usize,
    pub curve_file: String,
}

pub fn cmd_predict_t1(
    config: &PredictT1Config,
    out_dir: &Path,
    format: TableFormat,
) -> Result<CommandOutput, CliError> {
    let modes_mev = require(config.modes_mev.clone(), "modes_mev")?;
    let a_coeffs = require(config.a_coeffs_khz.clone(), "a_coeffs_khz")?;
    let b_coeffs = require(config.b_coeffs_khz.clone(), "b_coeffs_khz")?;
    let a_offset = config.a_offset_khz.unwrap_or(0.0);
    let b_offset = config.b_offset_khz.unwrap_or(0.0);
    let t_min = config.t_min_k.unwrap_or(PREDICTION_T_MIN_K);
    let t_max = config.t_max_k.unwrap_or(PREDICTION_T_MAX_K);
    let t_step = config.t_step_k.unwrap_or(1.0);
    if t_step <= 0.0 || !t_step.is_finite() || t_max < t_min {
        return Err(CliError::Config(format!(
            "invalid temperature grid [{t_min}, {t_max}] step {t_step}"
        )));
    }

    let modes: Vec<PhononMode> = modes_mev
        .iter()
        .map(|&e| PhononMode::new(e))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let coupling = CouplingSet::new(modes, a_coeffs, a_offset, b_coeffs, b_offset)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut grid = Vec::new();
    let mut t = t_min;
    while t <= t_max + 1e-9 {
        grid.push(t);
        t += t_step;
    }
    let curve = predict_t1_curve(&coupling, &grid)?;
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|p| vec![p.t_k, p.omega_khz, p.gamma_khz, p.t1_us])
        .collect();

    let figure = Figure {
        title: "predicted spin-lattice relaxation time".into(),
        x_label: "temperature (K)".into(),
        y_label: "T1 (us)".into(),
        series: vec![Series::line(
            "T1 = 1/(3*omega + gamma)",
            curve.iter().map(|p| (p.t_k, p.t1_us)).collect(),
        )],
    };

    let curve_file = format!("t1_curve.{}", format.extension());
    let staged = vec![
        Staged {
            name: curve_file.clone(),
            bytes: table_bytes("T_K,omega_kHz,gamma_kHz,t1_us", &rows, format)?,
        },
        Staged {
            name: "t1_curve.svg".into(),
            bytes: render_svg(&figure)
                .map_err(|e| CliError::Fit(e.to_string()))?
                .into_bytes(),
        },
    ];

    let mut digest = io::InputDigest::new();
    digest.add_section("config", &canonical_json(config));
    let record = ResultRecord::new(
        "predict-t1",
        digest.finish(),
        PredictT1Results {
            coupling: CouplingDto::new(&coupling),
            t_min_k: t_min,
            t_max_k: t_max,
            t_step_k: t_step,
            points: curve.len(),
            curve_file,
        },
    );
    write_staged(
        out_dir,
        "predict_t1_record.json",
        record_json(&record)?,
        staged,
    )
}
