//! Thermal occupation of the effective phonon modes and the second-order
//! (two-phonon) temperature models for the relaxation rates:
//!
//! omega(T) = sum_i A_i n_i (n_i + 1) + A_S
//! gamma(T) = sum_i B_i n_i (n_i + 1) + B_S
//!
//! with n_i the Bose-Einstein occupation of mode i. The mode energies are
//! fixed inputs taken from the peaks of a phonon density of states; only
//! the coupling coefficients and the sample offsets are fitted. Because
//! both models are linear in those coefficients, the weighted fit is
//! solved exactly by nonnegative linear least squares.

use thiserror::Error;

use crate::fit::models::moving_average;
use crate::fit::{linalg, nnls, FitModel, FitResult};
use crate::kinetics::{t1_from_rates, KineticsError, RatePair};

/// Boltzmann constant in meV per kelvin; mode energies carry hbar*omega
/// in meV so hbar never appears separately.
pub const BOLTZMANN_MEV_PER_K: f64 = 0.08617333;

/// Number of effective phonon modes in the temperature models.
pub const MODE_COUNT: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum PhononError {
    #[error("phonon energy must be positive and finite, got {0} meV")]
    InvalidEnergy(f64),
    #[error("temperature must be positive and finite, got {0} K")]
    InvalidTemperature(f64),
    #[error("{got} coefficients for {modes} modes")]
    CoefficientCountMismatch { modes: usize, got: usize },
    #[error("coupling coefficients and offsets must be nonnegative, got {0}")]
    NegativeCoefficient(f64),
    #[error("temperature series needs at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series temperatures must be positive and strictly increasing at index {0}")]
    SeriesNotIncreasing(usize),
    #[error("series sigma must be positive at index {0}")]
    SeriesInvalidSigma(usize),
    #[error("spectrum needs at least {needed} points, got {got}")]
    SpectrumTooShort { needed: usize, got: usize },
    #[error("spectrum energies must be strictly increasing at index {0}")]
    SpectrumNotIncreasing(usize),
    #[error("requested {requested} peaks but found {} at {found:?} meV", found.len())]
    InsufficientPeaks { requested: usize, found: Vec<f64> },
    #[error("design matrix is singular; temperatures do not constrain the modes")]
    SingularFit,
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

fn is_positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// One effective phonon mode, identified by its energy hbar*omega in meV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononMode {
    energy_mev: f64,
}

impl PhononMode {
    pub fn new(energy_mev: f64) -> Result<Self, PhononError> {
        if !energy_mev.is_finite() || energy_mev <= 0.0 {
            return Err(PhononError::InvalidEnergy(energy_mev));
        }
        Ok(Self { energy_mev })
    }

    pub fn energy_mev(&self) -> f64 {
        self.energy_mev
    }
}

/// Mean thermal occupation n = 1/(exp(E/kT) - 1), computed through expm1
/// so small exponents do not cancel.
pub fn bose_occupation(energy_mev: f64, temperature_k: f64) -> Result<f64, PhononError> {
    if !energy_mev.is_finite() || energy_mev <= 0.0 {
        return Err(PhononError::InvalidEnergy(energy_mev));
    }
    if !temperature_k.is_finite() || temperature_k <= 0.0 {
        return Err(PhononError::InvalidTemperature(temperature_k));
    }
    let x = energy_mev / (BOLTZMANN_MEV_PER_K * temperature_k);
    Ok(1.0 / x.exp_m1())
}

/// The two-phonon occupation factor n(n+1), the temperature dependence of
/// a second-order (Raman-type) process. Computed as the product of the
/// expm1 forms of n and n+1 = 1/(1 - exp(-x)).
pub fn occupation_product(energy_mev: f64, temperature_k: f64) -> Result<f64, PhononError> {
    if !energy_mev.is_finite() || energy_mev <= 0.0 {
        return Err(PhononError::InvalidEnergy(energy_mev));
    }
    if !temperature_k.is_finite() || temperature_k <= 0.0 {
        return Err(PhononError::InvalidTemperature(temperature_k));
    }
    let x = energy_mev / (BOLTZMANN_MEV_PER_K * temperature_k);
    Ok(1.0 / (x.exp_m1() * -(-x).exp_m1()))
}

/// Which rate a coupling model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// omega(T), the single-quantum rate model.
    SingleQuantum,
    /// gamma(T), the double-quantum rate model.
    DoubleQuantum,
}

/// Mode energies plus the fitted coupling coefficients (kHz) and sample
/// offsets (kHz) of the two temperature models.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    modes: Vec<PhononMode>,
    a_coeffs: Vec<f64>,
    a_offset: f64,
    b_coeffs: Vec<f64>,
    b_offset: f64,
}

impl CouplingSet {
    pub fn new(
        modes: Vec<PhononMode>,
        a_coeffs: Vec<f64>,
        a_offset: f64,
        b_coeffs: Vec<f64>,
        b_offset: f64,
    ) -> Result<Self, PhononError> {
        for coeffs in [&a_coeffs, &b_coeffs] {
            if coeffs.len() != modes.len() {
                return Err(PhononError::CoefficientCountMismatch {
                    modes: modes.len(),
                    got: coeffs.len(),
                });
            }
        }
        for &c in a_coeffs
            .iter()
            .chain(&b_coeffs)
            .chain([&a_offset, &b_offset])
        {
            if !c.is_finite() || c < 0.0 {
                return Err(PhononError::NegativeCoefficient(c));
            }
        }
        Ok(Self {
            modes,
            a_coeffs,
            a_offset,
            b_coeffs,
            b_offset,
        })
    }

    pub fn modes(&self) -> &[PhononMode] {
        &self.modes
    }

    pub fn a_coeffs(&self) -> &[f64] {
        &self.a_coeffs
    }

    pub fn a_offset(&self) -> f64 {
        self.a_offset
    }

    pub fn b_coeffs(&self) -> &[f64] {
        &self.b_coeffs
    }

    pub fn b_offset(&self) -> f64 {
        self.b_offset
    }
}

/// Evaluate omega(T) or gamma(T) for a coupling set, in kHz.
pub fn rate_model(
    kind: RateKind,
    coupling: &CouplingSet,
    temperature_k: f64,
) -> Result<f64, PhononError> {
    let (coeffs, offset) = match kind {
        RateKind::SingleQuantum => (&coupling.a_coeffs, coupling.a_offset),
        RateKind::DoubleQuantum => (&coupling.b_coeffs, coupling.b_offset),
    };
    let mut rate = offset;
    for (mode, &c) in coupling.modes.iter().zip(coeffs) {
        rate += c * occupation_product(mode.energy_mev, temperature_k)?;
    }
    Ok(rate)
}

/// One row of a measured temperature series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperaturePoint {
    pub t_k: f64,
    pub omega_khz: f64,
    pub sigma_omega_khz: f64,
    pub gamma_khz: f64,
    pub sigma_gamma_khz: f64,
}

/// Relaxation rates versus temperature for one sample spot.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSeries {
    points: Vec<TemperaturePoint>,
    spot_label: String,
}

impl TemperatureSeries {
    pub fn new(points: Vec<TemperaturePoint>, spot_label: String) -> Result<Self, PhononError> {
        let mut prev = 0.0;
        for (i, p) in points.iter().enumerate() {
            if !p.t_k.is_finite() || p.t_k <= prev {
                return Err(PhononError::SeriesNotIncreasing(i));
            }
            if !is_positive(p.sigma_omega_khz) || !is_positive(p.sigma_gamma_khz) {
                return Err(PhononError::SeriesInvalidSigma(i));
            }
            prev = p.t_k;
        }
        Ok(Self { points, spot_label })
    }

    pub fn points(&self) -> &[TemperaturePoint] {
        &self.points
    }

    pub fn spot_label(&self) -> &str {
        &self.spot_label
    }
}

/// The coupling model as a [`FitModel`] over abscissa T, parameters
/// [c1, c2, c3, offset]; bounds keep every parameter nonnegative.
#[derive(Debug, Clone, Copy)]
pub struct PhononRateModel {
    pub mode_energies_mev: [f64; MODE_COUNT],
}

const NONNEGATIVE_BOUNDS: [(f64, f64); 4] = [(0.0, f64::INFINITY); 4];

impl FitModel for PhononRateModel {
    fn arity(&self) -> usize {
        MODE_COUNT + 1
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        let mut v = p[MODE_COUNT];
        for (i, &e) in self.mode_energies_mev.iter().enumerate() {
            // x > 0 is guaranteed by the series invariants
            v += p[i] * occupation_product(e, x).unwrap_or(f64::NAN);
        }
        v
    }
    fn bounds(&self) -> Option<&[(f64, f64)]> {
        Some(&NONNEGATIVE_BOUNDS)
    }
}

/// Both temperature-model fits for one series.
#[derive(Debug, Clone)]
pub struct TemperatureFit {
    pub coupling: CouplingSet,
    pub omega_fit: FitResult,
    pub gamma_fit: FitResult,
}

/// Fit omega(T) and gamma(T) with fixed mode energies.
///
/// Each model is linear in (c1, c2, c3, offset), so the weighted
/// nonnegative least-squares solution is exact; no iterative optimizer is
/// involved. The covariance is the unconstrained (X^T W X)^-1; entries
/// for coefficients pegged at zero are nominal.
pub fn fit_temperature_series(
    series: &TemperatureSeries,
    modes: &[PhononMode; MODE_COUNT],
) -> Result<TemperatureFit, PhononError> {
    let pts = series.points();
    if pts.len() < 5 {
        return Err(PhononError::SeriesTooShort {
            needed: 5,
            got: pts.len(),
        });
    }

    let design: Vec<[f64; 4]> = pts
        .iter()
        .map(|p| {
            let mut row = [0.0; 4];
            for (i, m) in modes.iter().enumerate() {
                row[i] = occupation_product(m.energy_mev, p.t_k)?;
            }
            row[MODE_COUNT] = 1.0;
            Ok(row)
        })
        .collect::<Result<_, PhononError>>()?;

    let omega_fit = solve_linear_rate_fit(
        &design,
        &pts.iter()
            .map(|p| (p.omega_khz, p.sigma_omega_khz))
            .collect::<Vec<_>>(),
    )?;
    let gamma_fit = solve_linear_rate_fit(
        &design,
        &pts.iter()
            .map(|p| (p.gamma_khz, p.sigma_gamma_khz))
            .collect::<Vec<_>>(),
    )?;

    let coupling = CouplingSet::new(
        modes.to_vec(),
        omega_fit.params[..MODE_COUNT].to_vec(),
        omega_fit.params[MODE_COUNT],
        gamma_fit.params[..MODE_COUNT].to_vec(),
        gamma_fit.params[MODE_COUNT],
    )?;
    Ok(TemperatureFit {
        coupling,
        omega_fit,
        gamma_fit,
    })
}

fn solve_linear_rate_fit(
    design: &[[f64; 4]],
    data: &[(f64, f64)],
) -> Result<FitResult, PhononError> {
    let weighted_rows: Vec<Vec<f64>> = design
        .iter()
        .zip(data)
        .map(|(row, (_, sigma))| row.iter().map(|v| v / sigma).collect())
        .collect();
    let weighted_rhs: Vec<f64> = data.iter().map(|(y, sigma)| y / sigma).collect();

    let params = nnls::nnls(&weighted_rows, &weighted_rhs).ok_or(PhononError::SingularFit)?;

    let n = design.len();
    let arity = 4;
    let chi2: f64 = design
        .iter()
        .zip(data)
        .map(|(row, (y, sigma))| {
            let model: f64 = row.iter().zip(&params).map(|(a, p)| a * p).sum();
            ((y - model) / sigma).powi(2)
        })
        .sum();

    let mut normal = vec![vec![0.0; arity]; arity];
    for (j, row_j) in normal.iter_mut().enumerate() {
        for k in 0..arity {
            row_j[k] = weighted_rows.iter().map(|r| r[j] * r[k]).sum();
        }
    }
    let covariance = linalg::invert(&normal).ok_or(PhononError::SingularFit)?;
    let stderr = (0..arity)
        .map(|j| covariance[j][j].max(0.0).sqrt())
        .collect();

    Ok(FitResult {
        params,
        stderr,
        covariance,
        chi2,
        dof: n - arity,
        converged: true,
        iterations: 1,
    })
}

/// One point of a predicted relaxation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1Point {
    pub t_k: f64,
    pub omega_khz: f64,
    pub gamma_khz: f64,
    pub t1_us: f64,
}

/// Evaluate omega(T), gamma(T) and T1(T) over a temperature grid.
pub fn predict_t1_curve(
    coupling: &CouplingSet,
    t_grid_k: &[f64],
) -> Result<Vec<T1Point>, PhononError> {
    t_grid_k
        .iter()
        .map(|&t_k| {
            let omega_khz = rate_model(RateKind::SingleQuantum, coupling, t_k)?;
            let gamma_khz = rate_model(RateKind::DoubleQuantum, coupling, t_k)?;
            let rates = RatePair::new(omega_khz, gamma_khz)?;
            Ok(T1Point {
                t_k,
                omega_khz,
                gamma_khz,
                t1_us: t1_from_rates(&rates)?,
            })
        })
        .collect()
}

/// Locate the `count` most prominent peaks of a density-of-states
/// spectrum, returned in ascending energy.
///
/// The density is smoothed with a 5-point moving average, local maxima
/// are ranked by prominence (height above the higher of the two flanking
/// minima), and fewer than `count` surviving peaks is an error that
/// reports what was found.
pub fn pdos_peaks(spectrum: &[(f64, f64)], count: usize) -> Result<Vec<PhononMode>, PhononError> {
    if spectrum.len() < 16 {
        return Err(PhononError::SpectrumTooShort {
            needed: 16,
            got: spectrum.len(),
        });
    }
    for (i, w) in spectrum.windows(2).enumerate() {
        if !w[0].0.is_finite() || w[1].0 <= w[0].0 {
            return Err(PhononError::SpectrumNotIncreasing(i + 1));
        }
    }

    let smoothed = moving_average(&spectrum.iter().map(|&(_, d)| d).collect::<Vec<_>>(), 5);
    let maxima = local_maxima(&smoothed);

    let mut ranked: Vec<(f64, usize)> = maxima
        .iter()
        .map(|&i| (prominence(&smoothed, i), i))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    if ranked.len() < count {
        return Err(PhononError::InsufficientPeaks {
            requested: count,
            found: {
                let mut found: Vec<f64> = ranked.iter().map(|&(_, i)| spectrum[i].0).collect();
                found.sort_by(|a, b| a.partial_cmp(b).unwrap());
                found
            },
        });
    }

    let mut picked: Vec<f64> = ranked[..count]
        .iter()
        .map(|&(_, i)| spectrum[i].0)
        .collect();
    picked.sort_by(|a, b| a.partial_cmp(b).unwrap());
    picked.into_iter().map(PhononMode::new).collect()
}

/// Interior local maxima, tolerant of flat two-sample plateaus.
fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Height of `values[peak]` above the higher of the two flanking minima,
/// where each flank extends to the nearest strictly higher sample (or the
/// window edge).
fn prominence(values: &[f64], peak: usize) -> f64 {
    let h = values[peak];
    let mut left_min = h;
    for i in (0..peak).rev() {
        if values[i] > h {
            break;
        }
        left_min = left_min.min(values[i]);
    }
    let mut right_min = h;
    for &v in &values[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}
