//! File schemas and disk plumbing.
//!
//! All numeric tables are headered CSV with one record type per file:
//!
//! - decay curves:        `tau_us,signal,sigma`
//! - ODMR spectra:        `freq_MHz,contrast`
//! - temperature series:  `T_K,omega_kHz,sigma_omega_kHz,gamma_kHz,sigma_gamma_kHz[,spot_label]`
//! - PDOS spectra:        `energy_meV,density`
//!
//! Floats are written with 17 significant digits so a write/read round
//! trip is bit exact. Writes go to a temporary file in the target
//! directory followed by an atomic rename, so failed commands never leave
//! partial outputs behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fit::DataPoint;
use crate::phonon::{TemperaturePoint, TemperatureSeries};

pub const DECAY_HEADER: &str = "tau_us,signal,sigma";
pub const ODMR_HEADER: &str = "freq_MHz,contrast";
pub const TEMPERATURE_HEADER: &str = "T_K,omega_kHz,sigma_omega_kHz,gamma_kHz,sigma_gamma_kHz";
pub const TEMPERATURE_LABEL_COLUMN: &str = "spot_label";
pub const PDOS_HEADER: &str = "energy_meV,density";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: row {row}: {message}")]
    Schema {
        path: String,
        row: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
}

impl IoError {
    fn schema(path: &Path, row: usize, message: impl Into<String>) -> Self {
        IoError::Schema {
            path: path.display().to_string(),
            row,
            message: message.into(),
        }
    }

    fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn is_positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn parse_float(path: &Path, row: usize, field: &str, value: &str) -> Result<f64, IoError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| IoError::schema(path, row, format!("cannot parse {field} from {value:?}")))
}

/// Data rows paired with their 1-based line numbers.
type NumberedRows = Vec<(usize, Vec<String>)>;

fn read_rows(path: &Path, expected_header: &str) -> Result<NumberedRows, IoError> {
    read_rows_with_optional_column(path, expected_header, None).map(|(rows, _)| rows)
}

/// Reads a CSV, checking the header; `optional_column`, when given, may
/// appear as one extra trailing header field. Returns the data rows with
/// their 1-based line numbers and whether the extra column is present.
fn read_rows_with_optional_column(
    path: &Path,
    expected_header: &str,
    optional_column: Option<&str>,
) -> Result<(NumberedRows, bool), IoError> {
    let content = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut lines = content.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(IoError::schema(path, 1, "empty file, expected a header"));
    };
    let header = header.trim_end_matches('\r');
    let base_cols = expected_header.split(',').count();
    let has_extra = match optional_column {
        Some(col) if header == format!("{expected_header},{col}") => true,
        _ if header == expected_header => false,
        _ => {
            return Err(IoError::schema(
                path,
                1,
                format!("expected header {expected_header:?}, got {header:?}"),
            ));
        }
    };
    let n_cols = base_cols + usize::from(has_extra);

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != n_cols {
            return Err(IoError::schema(
                path,
                idx + 1,
                format!("expected {n_cols} fields, got {}", fields.len()),
            ));
        }
        rows.push((idx + 1, fields));
    }
    if rows.is_empty() {
        return Err(IoError::schema(path, 1, "no data rows"));
    }
    Ok((rows, has_extra))
}

/// Read a decay curve, enforcing nonnegative strictly increasing taus and
/// positive sigmas.
pub fn read_decay_csv(path: &Path) -> Result<Vec<DataPoint>, IoError> {
    let rows = read_rows(path, DECAY_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut prev = -f64::INFINITY;
    for (row, fields) in rows {
        let tau = parse_float(path, row, "tau_us", &fields[0])?;
        let signal = parse_float(path, row, "signal", &fields[1])?;
        let sigma = parse_float(path, row, "sigma", &fields[2])?;
        if !tau.is_finite() || tau < 0.0 {
            return Err(IoError::schema(
                path,
                row,
                format!("tau_us {tau} is negative"),
            ));
        }
        if tau <= prev {
            return Err(IoError::schema(
                path,
                row,
                format!("tau_us {tau} does not increase past {prev}"),
            ));
        }
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(IoError::schema(
                path,
                row,
                format!("sigma {sigma} must be positive"),
            ));
        }
        prev = tau;
        points.push(DataPoint::new(tau, signal, sigma));
    }
    Ok(points)
}

pub fn decay_csv_string(points: &[DataPoint]) -> String {
    let mut out = String::from(DECAY_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_float(p.x),
            format_float(p.y),
            format_float(p.sigma)
        );
    }
    out
}

/// Read an ODMR spectrum with strictly increasing frequencies.
pub fn read_odmr_csv(path: &Path) -> Result<Vec<(f64, f64)>, IoError> {
    let rows = read_rows(path, ODMR_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut prev = -f64::INFINITY;
    for (row, fields) in rows {
        let freq = parse_float(path, row, "freq_MHz", &fields[0])?;
        let contrast = parse_float(path, row, "contrast", &fields[1])?;
        if !freq.is_finite() || freq <= prev {
            return Err(IoError::schema(
                path,
                row,
                format!("freq_MHz {freq} does not increase past {prev}"),
            ));
        }
        prev = freq;
        points.push((freq, contrast));
    }
    Ok(points)
}

pub fn odmr_csv_string(points: &[(f64, f64)]) -> String {
    let mut out = String::from(ODMR_HEADER);
    out.push('\n');
    for (f, c) in points {
        let _ = writeln!(out, "{},{}", format_float(*f), format_float(*c));
    }
    out
}

/// Read a temperature series; the optional trailing `spot_label` column
/// must carry one consistent label when present.
pub fn read_temperature_csv(path: &Path) -> Result<TemperatureSeries, IoError> {
    let (rows, has_label) =
        read_rows_with_optional_column(path, TEMPERATURE_HEADER, Some(TEMPERATURE_LABEL_COLUMN))?;
    let mut points = Vec::with_capacity(rows.len());
    let mut label = String::new();
    let mut prev = 0.0;
    for (row, fields) in rows {
        let t_k = parse_float(path, row, "T_K", &fields[0])?;
        let omega = parse_float(path, row, "omega_kHz", &fields[1])?;
        let sigma_omega = parse_float(path, row, "sigma_omega_kHz", &fields[2])?;
        let gamma = parse_float(path, row, "gamma_kHz", &fields[3])?;
        let sigma_gamma = parse_float(path, row, "sigma_gamma_kHz", &fields[4])?;
        if !t_k.is_finite() || t_k <= 0.0 || t_k <= prev {
            return Err(IoError::schema(
                path,
                row,
                format!("T_K {t_k} must be positive and increase past {prev}"),
            ));
        }
        if !is_positive(sigma_omega) || !is_positive(sigma_gamma) {
            return Err(IoError::schema(path, row, "sigmas must be positive"));
        }
        if has_label {
            let this = fields[5].clone();
            if label.is_empty() {
                label = this;
            } else if this != label {
                return Err(IoError::schema(
                    path,
                    row,
                    format!("spot_label {this:?} differs from {label:?}"),
                ));
            }
        }
        prev = t_k;
        points.push(TemperaturePoint {
            t_k,
            omega_khz: omega,
            sigma_omega_khz: sigma_omega,
            gamma_khz: gamma,
            sigma_gamma_khz: sigma_gamma,
        });
    }
    TemperatureSeries::new(points, label).map_err(|e| IoError::schema(path, 1, e.to_string()))
}

pub fn temperature_csv_string(series: &TemperatureSeries) -> String {
    let labeled = !series.spot_label().is_empty();
    let mut out = String::from(TEMPERATURE_HEADER);
    if labeled {
        out.push(',');
        out.push_str(TEMPERATURE_LABEL_COLUMN);
    }
    out.push('\n');
    for p in series.points() {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            format_float(p.t_k),
            format_float(p.omega_khz),
            format_float(p.sigma_omega_khz),
            format_float(p.gamma_khz),
            format_float(p.sigma_gamma_khz)
        );
        if labeled {
            let _ = write!(out, ",{}", series.spot_label());
        }
        out.push('\n');
    }
    out
}

/// Read a PDOS spectrum with strictly increasing energies.
pub fn read_pdos_csv(path: &Path) -> Result<Vec<(f64, f64)>, IoError> {
    let rows = read_rows(path, PDOS_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut prev = -f64::INFINITY;
    for (row, fields) in rows {
        let energy = parse_float(path, row, "energy_meV", &fields[0])?;
        let density = parse_float(path, row, "density", &fields[1])?;
        if !energy.is_finite() || energy <= prev {
            return Err(IoError::schema(
                path,
                row,
                format!("energy_meV {energy} does not increase past {prev}"),
            ));
        }
        prev = energy;
        points.push((energy, density));
    }
    Ok(points)
}

/// Tabular output with a caller-chosen header, used for the plot-data and
/// prediction curves.
pub fn table_csv_string(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

static WRITE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write via a temporary sibling file plus rename, so the destination is
/// never observed half-written.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let stamp = WRITE_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp_name = format!(
        ".{}.{}.{stamp}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default(),
        std::process::id()
    );
    let tmp: PathBuf = match dir {
        Some(d) => d.join(tmp_name),
        None => PathBuf::from(tmp_name),
    };
    fs::write(&tmp, bytes).map_err(|e| IoError::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        IoError::file(path, e)
    })
}

/// SHA-256 over a sequence of labeled byte sections; any changed input
/// byte changes the digest.
#[derive(Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_section(&mut self, label: &str, bytes: &[u8]) {
        self.hasher.update(label.as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn add_file(&mut self, path: &Path) -> Result<(), IoError> {
        let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
        self.add_section(&path.display().to_string(), &bytes);
        Ok(())
    }

    pub fn finish(self) -> String {
        let out = self.hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in out {
            let _ = write!(hex, "{b:02x}");
        }
        format!("sha256:{hex}")
    }
}
