//! Weighted nonlinear least squares: a Levenberg-Marquardt core with
//! multiplicative damping, a central-difference Jacobian, and an exact
//! nonnegative linear solver for models that are linear in their
//! coefficients.

pub mod linalg;
pub mod models;
pub mod nnls;

use thiserror::Error;

pub use models::{
    fit_decay_pair, fit_single_exponential, fit_two_lorentzian, DecayPairFit, ExponentialDecay,
    RateEstimate, RateExtraction, SharedRateDecay, TwoLorentzian, TwoLorentzianFit,
};

/// One weighted observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma }
    }
}

/// A parametric model the optimizer can evaluate.
///
/// `bounds`, when present, gives one closed interval per parameter
/// (use infinities for open sides); trial steps are projected onto it.
pub trait FitModel {
    fn arity(&self) -> usize;
    fn eval(&self, params: &[f64], x: f64) -> f64;
    fn bounds(&self) -> Option<&[(f64, f64)]> {
        None
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("initial guess has {got} parameters, model expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("initial guess outside the model bounds at parameter {0}")]
    InitOutOfBounds(usize),
    #[error("normal matrix J^T W J is singular")]
    SingularNormalMatrix,
    #[error("baseline-subtracted amplitude {0} is not positive: data inconsistent with a decay")]
    InconsistentWithDecay(f64),
    #[error("fewer than two points above baseline for the log-linear rate guess")]
    InsufficientSignal,
    #[error("found {found} resolvable dip(s), need 2")]
    UnresolvedDips { found: usize },
    #[error("implied gamma = {gamma:.6} kHz is negative beyond 3 sigma ({sigma:.6} kHz)")]
    ModelInconsistent { gamma: f64, sigma: f64 },
    #[error("fit did not converge; rates cannot be extracted")]
    NotConverged,
}

/// Outcome of a weighted least-squares fit.
///
/// `covariance` is (J^T W J)^-1 with W = 1/sigma_i^2 for the sigmas the
/// caller supplied; fits without absolute sigmas rescale it by the
/// reduced chi-square (see [`FitResult::scale_covariance_by_reduced_chi2`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    /// Reduced chi-square, chi2 / dof.
    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof as f64
    }

    /// Fold the residual scatter into the covariance. Appropriate when
    /// the fit ran with placeholder unit sigmas and the noise scale must
    /// be estimated from the residuals themselves.
    pub fn scale_covariance_by_reduced_chi2(&mut self) {
        let s = self.reduced_chi2();
        for row in &mut self.covariance {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        let sqrt_s = s.sqrt();
        for e in &mut self.stderr {
            *e *= sqrt_s;
        }
    }
}

const LM_MAX_ITERATIONS: usize = 500;
const LM_CHI2_REL_TOL: f64 = 1e-10;
const LM_STEP_NORM_TOL: f64 = 1e-12;
const LM_LAMBDA_INIT: f64 = 1e-3;
const LM_LAMBDA_CEILING: f64 = 1e120;

/// Levenberg-Marquardt minimization of sum(((y - model)/sigma)^2).
///
/// Damping is multiplicative on the normal-matrix diagonal: lambda starts
/// at 1e-3, grows x10 on a rejected step and shrinks /10 on an accepted
/// one. Convergence is declared when the relative chi-square decrease of
/// an accepted step falls below 1e-10 or the step norm below 1e-12; after
/// 500 iterations the result is returned with `converged = false`.
pub fn levenberg_marquardt(
    model: &dyn FitModel,
    data: &[DataPoint],
    init: &[f64],
) -> Result<FitResult, FitError> {
    let arity = model.arity();
    if data.len() < arity + 1 {
        return Err(FitError::InsufficientData {
            needed: arity + 1,
            got: data.len(),
        });
    }
    if let Some(bad) = data.iter().find(|p| p.sigma <= 0.0 || !p.sigma.is_finite()) {
        return Err(FitError::InvalidSigma(bad.sigma));
    }
    if init.len() != arity {
        return Err(FitError::ArityMismatch {
            expected: arity,
            got: init.len(),
        });
    }
    let bounds = model.bounds().map(<[(f64, f64)]>::to_vec);
    if let Some(b) = &bounds {
        for (i, (&p, (lo, hi))) in init.iter().zip(b).enumerate() {
            if p < *lo || p > *hi {
                return Err(FitError::InitOutOfBounds(i));
            }
        }
    }

    let xs: Vec<f64> = data.iter().map(|p| p.x).collect();
    let weights: Vec<f64> = data.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect();
    let chi2_of = |params: &[f64]| -> f64 {
        data.iter()
            .zip(&weights)
            .map(|(p, w)| {
                let r = p.y - model.eval(params, p.x);
                w * r * r
            })
            .sum()
    };
    let project = |params: &mut [f64]| {
        if let Some(b) = &bounds {
            for (p, (lo, hi)) in params.iter_mut().zip(b) {
                *p = p.clamp(*lo, *hi);
            }
        }
    };

    let normal_equations = |params: &[f64]| {
        let jac = numeric_jacobian(model, params, &xs);
        let mut hessian = vec![vec![0.0; arity]; arity];
        let mut gradient = vec![0.0; arity];
        for j in 0..arity {
            gradient[j] = data
                .iter()
                .zip(&weights)
                .zip(&jac)
                .map(|((p, w), row)| w * row[j] * (p.y - model.eval(params, p.x)))
                .sum();
            for k in 0..arity {
                hessian[j][k] = jac
                    .iter()
                    .zip(&weights)
                    .map(|(row, w)| w * row[j] * row[k])
                    .sum();
            }
        }
        (hessian, gradient)
    };

    let mut params = init.to_vec();
    let mut chi2 = chi2_of(&params);
    let mut lambda = LM_LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut jacobian_stale = true;
    let mut hessian = vec![vec![0.0; arity]; arity];
    let mut gradient = vec![0.0; arity];

    while iterations < LM_MAX_ITERATIONS {
        iterations += 1;
        if jacobian_stale {
            (hessian, gradient) = normal_equations(&params);
            jacobian_stale = false;
        }

        let mut damped = hessian.clone();
        for (j, row) in damped.iter_mut().enumerate() {
            row[j] += lambda * hessian[j][j];
        }
        let step = linalg::solve(&damped, &gradient).ok_or(FitError::SingularNormalMatrix)?;

        let mut trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
        project(&mut trial);
        let trial_chi2 = chi2_of(&trial);

        if trial_chi2.is_finite() && trial_chi2 <= chi2 {
            let step_norm = params
                .iter()
                .zip(&trial)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let rel_decrease = if chi2 > 0.0 {
                (chi2 - trial_chi2) / chi2
            } else {
                0.0
            };
            params = trial;
            chi2 = trial_chi2;
            lambda /= 10.0;
            jacobian_stale = true;
            if rel_decrease < LM_CHI2_REL_TOL || step_norm < LM_STEP_NORM_TOL {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > LM_LAMBDA_CEILING {
                break;
            }
        }
    }

    let jac = numeric_jacobian(model, &params, &xs);
    let mut normal = vec![vec![0.0; arity]; arity];
    for (j, row_j) in normal.iter_mut().enumerate() {
        for k in 0..arity {
            row_j[k] = jac
                .iter()
                .zip(&weights)
                .map(|(row, w)| w * row[j] * row[k])
                .sum();
        }
    }
    let covariance = linalg::invert(&normal).ok_or(FitError::SingularNormalMatrix)?;
    let stderr = (0..arity)
        .map(|j| covariance[j][j].max(0.0).sqrt())
        .collect();

    Ok(FitResult {
        params,
        stderr,
        covariance,
        chi2,
        dof: data.len() - arity,
        converged,
        iterations,
    })
}

/// Central-difference Jacobian, one row per abscissa, one column per
/// parameter. Step h_i = max(1e-8, 1e-6 * |p_i|).
pub fn numeric_jacobian(model: &dyn FitModel, params: &[f64], xs: &[f64]) -> Vec<Vec<f64>> {
    let arity = model.arity();
    let mut rows = vec![vec![0.0; arity]; xs.len()];
    let mut p = params.to_vec();
    for j in 0..arity {
        let h = (1e-6 * params[j].abs()).max(1e-8);
        p[j] = params[j] + h;
        let plus: Vec<f64> = xs.iter().map(|&x| model.eval(&p, x)).collect();
        p[j] = params[j] - h;
        let minus: Vec<f64> = xs.iter().map(|&x| model.eval(&p, x)).collect();
        p[j] = params[j];
        for (row, (f_plus, f_minus)) in rows.iter_mut().zip(plus.iter().zip(&minus)) {
            row[j] = (f_plus - f_minus) / (2.0 * h);
        }
    }
    rows
}
