//! The three model families the toolkit fits: single-exponential decays,
//! the two-dip ODMR line shape, and (in `phonon`) the coupling models.

use super::{levenberg_marquardt, DataPoint, FitError, FitModel, FitResult};
use crate::kinetics::RATE_TIME_SCALE;

/// y = a * exp(-k * x * 1e-3) + c with x in us and k in kHz.
/// Parameter order: [amplitude, rate_khz, baseline].
#[derive(Debug, Clone, Copy, Default)]
pub struct ExponentialDecay;

impl FitModel for ExponentialDecay {
    fn arity(&self) -> usize {
        3
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-p[1] * x * RATE_TIME_SCALE).exp() + p[2]
    }
}

/// F2 decay with the single-quantum rate pinned from a prior F1 fit:
/// y = a * exp(-(2*gamma + omega) * x * 1e-3) + c.
/// Parameter order: [amplitude, gamma_khz, baseline].
#[derive(Debug, Clone, Copy)]
pub struct SharedRateDecay {
    pub omega_khz: f64,
}

impl FitModel for SharedRateDecay {
    fn arity(&self) -> usize {
        3
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-(2.0 * p[1] + self.omega_khz) * x * RATE_TIME_SCALE).exp() + p[2]
    }
}

/// Two dips below a flat baseline:
/// C(nu) = c0 - a1*w1^2/((nu-nu1)^2+w1^2) - a2*w2^2/((nu-nu2)^2+w2^2).
/// Parameter order: [c0, a1, nu1, w1, a2, nu2, w2]; widths are half widths
/// at half depth.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoLorentzian;

impl FitModel for TwoLorentzian {
    fn arity(&self) -> usize {
        7
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        let dip = |a: f64, nu: f64, w: f64| {
            let d = x - nu;
            a * w * w / (d * d + w * w)
        };
        p[0] - dip(p[1], p[2], p[3]) - dip(p[4], p[5], p[6])
    }
}

/// Fit y = A*exp(-k*tau*1e-3) + c to weighted decay data.
///
/// Initial guess: baseline from the mean of the last 10% of points (by
/// tau), amplitude from the earliest point, rate from a log-linear
/// regression of the baseline-subtracted first half.
pub fn fit_single_exponential(points: &[DataPoint]) -> Result<FitResult, FitError> {
    if points.len() < 4 {
        return Err(FitError::InsufficientData {
            needed: 4,
            got: points.len(),
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());

    let n = sorted.len();
    let tail = (n / 10).max(1);
    let baseline: f64 = sorted[n - tail..].iter().map(|p| p.y).sum::<f64>() / tail as f64;
    let amplitude = sorted[0].y - baseline;
    if amplitude <= 0.0 {
        return Err(FitError::InconsistentWithDecay(amplitude));
    }

    let half = &sorted[..(n / 2).max(2)];
    let logs: Vec<(f64, f64)> = half
        .iter()
        .filter(|p| p.y - baseline > 0.0)
        .map(|p| (p.x, (p.y - baseline).ln()))
        .collect();
    if logs.len() < 2 {
        return Err(FitError::InsufficientSignal);
    }
    let rate = {
        let m = logs.len() as f64;
        let sx: f64 = logs.iter().map(|(x, _)| x).sum();
        let sy: f64 = logs.iter().map(|(_, y)| y).sum();
        let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
        let denom = m * sxx - sx * sx;
        let slope = if denom.abs() > 0.0 {
            (m * sxy - sx * sy) / denom
        } else {
            0.0
        };
        let k = -slope / RATE_TIME_SCALE;
        if k.is_finite() && k > 0.0 {
            k
        } else {
            // flat first half: fall back to one decay constant per span
            let span = (sorted[n - 1].x - sorted[0].x).max(f64::MIN_POSITIVE);
            1.0 / (span * RATE_TIME_SCALE)
        }
    };

    levenberg_marquardt(&ExponentialDecay, &sorted, &[amplitude, rate, baseline])
}

/// Relaxation rates recovered from the two decay fits, with the
/// propagated one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub omega_khz: f64,
    pub omega_stderr_khz: f64,
    pub gamma_khz: f64,
    pub gamma_stderr_khz: f64,
}

/// Invert the decay-rate formulas: omega = k1/3, gamma = (k2 - omega)/2.
///
/// The two fits are treated as independent, so sigma_omega = sigma_k1/3
/// and sigma_gamma = sqrt(sigma_k2^2 + sigma_omega^2)/2. A gamma estimate
/// below -3 sigma is flagged as inconsistent with the rate model; a small
/// negative value inside that band is reported as-is (consistent with
/// zero).
pub fn extract_rates(f1_fit: &FitResult, f2_fit: &FitResult) -> Result<RateEstimate, FitError> {
    if !f1_fit.converged || !f2_fit.converged {
        return Err(FitError::NotConverged);
    }
    let omega = f1_fit.params[1] / 3.0;
    let omega_stderr = f1_fit.stderr[1] / 3.0;
    let gamma = (f2_fit.params[1] - omega) / 2.0;
    let gamma_stderr = (f2_fit.stderr[1].powi(2) + omega_stderr.powi(2)).sqrt() / 2.0;
    if gamma < -3.0 * gamma_stderr {
        return Err(FitError::ModelInconsistent {
            gamma,
            sigma: gamma_stderr,
        });
    }
    Ok(RateEstimate {
        omega_khz: omega,
        omega_stderr_khz: omega_stderr,
        gamma_khz: gamma,
        gamma_stderr_khz: gamma_stderr,
    })
}

/// How the F2 rate is tied to the F1 result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateExtraction {
    /// Fit F2 with the rate parametrized as 2*gamma + omega_hat, omega_hat
    /// frozen from the F1 fit.
    #[default]
    SharedOmega,
    /// Fit the F2 rate freely and invert both rates afterwards.
    FreeRate,
}

/// Both decay fits plus the extracted rates.
#[derive(Debug, Clone)]
pub struct DecayPairFit {
    pub f1: FitResult,
    pub f2: FitResult,
    pub rates: RateEstimate,
}

/// Fit an F1/F2 dataset pair end to end.
pub fn fit_decay_pair(
    f1_points: &[DataPoint],
    f2_points: &[DataPoint],
    mode: RateExtraction,
) -> Result<DecayPairFit, FitError> {
    let f1 = fit_single_exponential(f1_points)?;
    if !f1.converged {
        return Err(FitError::NotConverged);
    }
    let omega = f1.params[1] / 3.0;
    let omega_stderr = f1.stderr[1] / 3.0;

    match mode {
        RateExtraction::FreeRate => {
            let f2 = fit_single_exponential(f2_points)?;
            let rates = extract_rates(&f1, &f2)?;
            Ok(DecayPairFit { f1, f2, rates })
        }
        RateExtraction::SharedOmega => {
            // seed gamma from a free-rate pre-fit of the same data
            let free = fit_single_exponential(f2_points)?;
            let gamma_init = ((free.params[1] - omega) / 2.0).max(0.0);
            let model = SharedRateDecay { omega_khz: omega };
            let f2 = levenberg_marquardt(
                &model,
                f2_points,
                &[free.params[0], gamma_init, free.params[2]],
            )?;
            if !f2.converged {
                return Err(FitError::NotConverged);
            }
            let gamma = f2.params[1];
            // d(gamma)/d(omega_hat) = -1/2 at fixed total rate
            let gamma_stderr = (f2.stderr[1].powi(2) + (omega_stderr / 2.0).powi(2)).sqrt();
            if gamma < -3.0 * gamma_stderr {
                return Err(FitError::ModelInconsistent {
                    gamma,
                    sigma: gamma_stderr,
                });
            }
            let rates = RateEstimate {
                omega_khz: omega,
                omega_stderr_khz: omega_stderr,
                gamma_khz: gamma,
                gamma_stderr_khz: gamma_stderr,
            };
            Ok(DecayPairFit { f1, f2, rates })
        }
    }
}

/// Two-Lorentzian ODMR fit with the derived center frequency.
#[derive(Debug, Clone)]
pub struct TwoLorentzianFit {
    pub fit: FitResult,
    pub nu1_mhz: f64,
    pub nu1_stderr_mhz: f64,
    pub nu2_mhz: f64,
    pub nu2_stderr_mhz: f64,
    pub width1_mhz: f64,
    pub width2_mhz: f64,
    /// Center nu0 = (nu1 + nu2)/2.
    pub nu0_mhz: f64,
    pub nu0_stderr_mhz: f64,
}

/// Fit a two-dip spectrum of (frequency MHz, contrast) points.
///
/// The spectrum carries no per-point uncertainties, so the fit runs with
/// unit weights and the covariance is rescaled by the reduced chi-square
/// afterwards. The initial guess comes from the two deepest local minima
/// of the 5-point moving-average smoothed data.
pub fn fit_two_lorentzian(spectrum: &[(f64, f64)]) -> Result<TwoLorentzianFit, FitError> {
    if spectrum.len() < 8 {
        return Err(FitError::InsufficientData {
            needed: 8,
            got: spectrum.len(),
        });
    }
    let values: Vec<f64> = spectrum.iter().map(|&(_, c)| c).collect();
    let smoothed = moving_average(&values, 5);

    // baseline guess: mean of the upper quartile of the smoothed data
    let mut ranked = smoothed.clone();
    ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = (ranked.len() * 3) / 4;
    let baseline = ranked[q..].iter().sum::<f64>() / (ranked.len() - q) as f64;

    let minima = local_minima(&smoothed);
    if minima.len() < 2 {
        return Err(FitError::UnresolvedDips {
            found: minima.len(),
        });
    }
    let mut by_depth: Vec<usize> = minima;
    by_depth.sort_by(|&a, &b| smoothed[a].partial_cmp(&smoothed[b]).unwrap());
    let mut dips = [by_depth[0], by_depth[1]];
    dips.sort_unstable();

    let guess_width = |idx: usize| -> f64 {
        let depth = baseline - smoothed[idx];
        let half = baseline - depth / 2.0;
        let mut left = idx;
        while left > 0 && smoothed[left] < half {
            left -= 1;
        }
        let mut right = idx;
        while right + 1 < smoothed.len() && smoothed[right] < half {
            right += 1;
        }
        let w = (spectrum[right].0 - spectrum[left].0) / 2.0;
        if w > 0.0 {
            w
        } else {
            (spectrum[dips[1]].0 - spectrum[dips[0]].0).abs() / 6.0
        }
    };

    let init = [
        baseline,
        baseline - smoothed[dips[0]],
        spectrum[dips[0]].0,
        guess_width(dips[0]),
        baseline - smoothed[dips[1]],
        spectrum[dips[1]].0,
        guess_width(dips[1]),
    ];

    let data: Vec<DataPoint> = spectrum
        .iter()
        .map(|&(x, y)| DataPoint::new(x, y, 1.0))
        .collect();
    let mut fit = levenberg_marquardt(&TwoLorentzian, &data, &init)?;
    fit.scale_covariance_by_reduced_chi2();

    // order the dips by frequency; widths enter squared, report magnitudes
    let (i1, i2) = if fit.params[2] <= fit.params[5] {
        (2, 5)
    } else {
        (5, 2)
    };
    let nu1 = fit.params[i1];
    let nu2 = fit.params[i2];
    let nu1_err = fit.stderr[i1];
    let nu2_err = fit.stderr[i2];
    Ok(TwoLorentzianFit {
        nu1_mhz: nu1,
        nu1_stderr_mhz: nu1_err,
        nu2_mhz: nu2,
        nu2_stderr_mhz: nu2_err,
        width1_mhz: fit.params[i1 + 1].abs(),
        width2_mhz: fit.params[i2 + 1].abs(),
        nu0_mhz: (nu1 + nu2) / 2.0,
        nu0_stderr_mhz: (nu1_err.powi(2) + nu2_err.powi(2)).sqrt() / 2.0,
        fit,
    })
}

/// Centered moving average with a truncated window at the edges.
pub(crate) fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Interior local minima, tolerant of flat two-sample plateaus.
fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] < values[i - 1] {
            // walk across any plateau
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] > values[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}
