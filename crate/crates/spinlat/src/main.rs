use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinlat::cli::{
    cmd_fit_decay, cmd_fit_odmr, cmd_fit_temp, cmd_predict_t1, cmd_simulate, CliError,
    CommandOutput, FitDecayConfig, FitOdmrConfig, FitTempConfig, PredictT1Config, SimulateConfig,
    TableFormat, EXIT_CONFIG,
};

/// Spin-lattice relaxometry toolkit: simulate pulse-sequence decay data,
/// fit relaxation rates, ODMR spectra and phonon temperature models.
#[derive(Parser)]
#[command(name = "spinlat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files (created if missing)
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output format for numeric tables
    #[arg(long, default_value = "csv")]
    format: String,
    /// Base seed for any randomness in the command
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize Poisson-noisy F1/F2 decay datasets
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Single-quantum rate in kHz
        #[arg(long)]
        omega_khz: Option<f64>,
        /// Double-quantum rate in kHz
        #[arg(long)]
        gamma_khz: Option<f64>,
        /// Readout repetitions per point
        #[arg(long)]
        shots: Option<u64>,
        /// Number of tau samples per curve
        #[arg(long)]
        tau_points: Option<usize>,
        /// Bright-state counts per shot
        #[arg(long)]
        rate_bright: Option<f64>,
        /// Dark-state counts per shot
        #[arg(long)]
        rate_dark: Option<f64>,
        /// Sample temperature tag in K
        #[arg(long)]
        temperature_k: Option<f64>,
    },
    /// Fit an F1/F2 pair and extract omega and gamma
    FitDecay {
        #[command(flatten)]
        common: CommonOpts,
        /// F1 decay CSV (tau_us,signal,sigma)
        #[arg(long)]
        f1: Option<PathBuf>,
        /// F2 decay CSV (tau_us,signal,sigma)
        #[arg(long)]
        f2: Option<PathBuf>,
        /// Fit the F2 rate freely instead of sharing omega from F1
        #[arg(long)]
        free_rate: bool,
    },
    /// Fit a two-Lorentzian ODMR spectrum
    FitOdmr {
        #[command(flatten)]
        common: CommonOpts,
        /// Spectrum CSV (freq_MHz,contrast)
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Fit the phonon temperature models to a rate series
    FitTemp {
        #[command(flatten)]
        common: CommonOpts,
        /// Temperature series CSV
        #[arg(long)]
        series: Option<PathBuf>,
        /// PDOS CSV (energy_meV,density) for the mode energies
        #[arg(long)]
        pdos: Option<PathBuf>,
    },
    /// Evaluate omega(T), gamma(T) and T1(T) for a coupling set
    PredictT1 {
        #[command(flatten)]
        common: CommonOpts,
        /// Mode energies in meV (three values)
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        modes_mev: Option<Vec<f64>>,
        /// Omega coupling coefficients in kHz
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        a_coeffs_khz: Option<Vec<f64>>,
        /// Omega sample offset in kHz
        #[arg(long)]
        a_offset_khz: Option<f64>,
        /// Gamma coupling coefficients in kHz
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        b_coeffs_khz: Option<Vec<f64>>,
        /// Gamma sample offset in kHz
        #[arg(long)]
        b_offset_khz: Option<f64>,
        #[arg(long)]
        t_min_k: Option<f64>,
        #[arg(long)]
        t_max_k: Option<f64>,
        #[arg(long)]
        t_step_k: Option<f64>,
    },
}

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<CommandOutput, CliError> {
    match cli.command {
        Command::Simulate {
            common,
            omega_khz,
            gamma_khz,
            shots,
            tau_points,
            rate_bright,
            rate_dark,
            temperature_k,
        } => {
            let format = TableFormat::parse(&common.format)?;
            let base: SimulateConfig = load_config(&common.config)?;
            let config = base.merged_with(SimulateConfig {
                omega_khz,
                gamma_khz,
                shots,
                seed: common.seed,
                tau_points,
                rate_bright,
                rate_dark,
                temperature_k,
                ..Default::default()
            });
            let out = cmd_simulate(&config, &common.out_dir, format)?;
            println!(
                "simulate: wrote {} and {}",
                out.files[0].display(),
                out.files[1].display()
            );
            Ok(out)
        }
        Command::FitDecay {
            common,
            f1,
            f2,
            free_rate,
        } => {
            let format = TableFormat::parse(&common.format)?;
            let base: FitDecayConfig = load_config(&common.config)?;
            let config = base.merged_with(FitDecayConfig {
                f1,
                f2,
                free_rate: free_rate.then_some(true),
            });
            let out = cmd_fit_decay(&config, &common.out_dir, format)?;
            print_rates(&out);
            Ok(out)
        }
        Command::FitOdmr { common, spectrum } => {
            let format = TableFormat::parse(&common.format)?;
            let base: FitOdmrConfig = load_config(&common.config)?;
            let config = base.merged_with(FitOdmrConfig { spectrum });
            let out = cmd_fit_odmr(&config, &common.out_dir, format)?;
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&out.record_json) {
                if let Some(nu0) = v["results"]["nu0_mhz"].as_f64() {
                    println!("fit-odmr: nu0 = {nu0:.3} MHz");
                }
            }
            Ok(out)
        }
        Command::FitTemp {
            common,
            series,
            pdos,
        } => {
            let format = TableFormat::parse(&common.format)?;
            let base: FitTempConfig = load_config(&common.config)?;
            let config = base.merged_with(FitTempConfig { series, pdos });
            let out = cmd_fit_temp(&config, &common.out_dir, format)?;
            println!("fit-temp: record at {}", out.record_path.display());
            Ok(out)
        }
        Command::PredictT1 {
            common,
            modes_mev,
            a_coeffs_khz,
            a_offset_khz,
            b_coeffs_khz,
            b_offset_khz,
            t_min_k,
            t_max_k,
            t_step_k,
        } => {
            let format = TableFormat::parse(&common.format)?;
            let base: PredictT1Config = load_config(&common.config)?;
            let config = base.merged_with(PredictT1Config {
                modes_mev,
                a_coeffs_khz,
                a_offset_khz,
                b_coeffs_khz,
                b_offset_khz,
                t_min_k,
                t_max_k,
                t_step_k,
            });
            let out = cmd_predict_t1(&config, &common.out_dir, format)?;
            println!("predict-t1: curve at {}", out.files[0].display());
            Ok(out)
        }
    }
}

fn print_rates(out: &CommandOutput) {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&out.record_json) {
        let r = &v["results"]["rates"];
        if let (Some(w), Some(we), Some(g), Some(ge)) = (
            r["omega_khz"].as_f64(),
            r["omega_stderr_khz"].as_f64(),
            r["gamma_khz"].as_f64(),
            r["gamma_stderr_khz"].as_f64(),
        ) {
            println!("fit-decay: omega = {w:.2} +/- {we:.2} kHz, gamma = {g:.2} +/- {ge:.2} kHz");
            if let Some(t1) = r["t1_us"].as_f64() {
                println!("fit-decay: T1 = {t1:.3} us");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
