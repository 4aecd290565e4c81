//! Seed sweeps for Monte Carlo studies.
//!
//! Every trial is a pure function of its seed, so sweeps are data
//! parallel. With the default `parallel` feature the sweep fans out over
//! a rayon pool; the `_seq` variants always run on the calling thread and
//! the benches compare the two.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::fit::{fit_decay_pair, DecayPairFit, FitError, RateExtraction};
use crate::kinetics::RatePair;
use crate::phonon::{
    fit_temperature_series, rate_model, CouplingSet, PhononError, PhononMode, RateKind,
    TemperaturePoint, TemperatureSeries, MODE_COUNT,
};
use crate::sequence::{synth_dataset, CurveKind, ReadoutModel, SequenceError};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrialError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Phonon(#[from] PhononError),
}

/// Map `f` over a seed range, in parallel when the `parallel` feature is
/// enabled.
pub fn run_seeded<T, F>(seeds: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        seeds.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.map(f).collect()
    }
}

/// Sequential reference implementation of [`run_seeded`].
pub fn run_seeded_seq<T, F>(seeds: std::ops::Range<u64>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.map(f).collect()
}

/// One synth-and-fit round trip: Poisson-noisy F1/F2 datasets at `seed`,
/// fitted end to end.
pub fn rate_recovery_trial(
    truth: &RatePair,
    readout: &ReadoutModel,
    f1_grid_us: &[f64],
    f2_grid_us: &[f64],
    mode: RateExtraction,
    seed: u64,
) -> Result<DecayPairFit, TrialError> {
    let f1 = synth_dataset(CurveKind::F1, truth, readout, f1_grid_us, seed)?;
    let f2 = synth_dataset(CurveKind::F2, truth, readout, f2_grid_us, seed)?;
    Ok(fit_decay_pair(&f1.points, &f2.points, mode)?)
}

/// [`rate_recovery_trial`] swept over a seed range.
pub fn rate_recovery_trials(
    truth: &RatePair,
    readout: &ReadoutModel,
    f1_grid_us: &[f64],
    f2_grid_us: &[f64],
    mode: RateExtraction,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<DecayPairFit, TrialError>> {
    run_seeded(seeds, |seed| {
        rate_recovery_trial(truth, readout, f1_grid_us, f2_grid_us, mode, seed)
    })
}

/// Sequential variant of [`rate_recovery_trials`].
pub fn rate_recovery_trials_seq(
    truth: &RatePair,
    readout: &ReadoutModel,
    f1_grid_us: &[f64],
    f2_grid_us: &[f64],
    mode: RateExtraction,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<DecayPairFit, TrialError>> {
    run_seeded_seq(seeds, |seed| {
        rate_recovery_trial(truth, readout, f1_grid_us, f2_grid_us, mode, seed)
    })
}

/// One temperature-model round trip: sample the true rates on `temps_k`
/// with relative Gaussian noise, refit with fixed modes, and predict the
/// gamma/omega ratio at `predict_at_k`.
pub fn coupling_recovery_trial(
    truth: &CouplingSet,
    modes: &[PhononMode; MODE_COUNT],
    temps_k: &[f64],
    noise_frac: f64,
    predict_at_k: f64,
    seed: u64,
) -> Result<f64, TrialError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let points: Vec<TemperaturePoint> = temps_k
        .iter()
        .map(|&t| {
            let omega = rate_model(RateKind::SingleQuantum, truth, t)?;
            let gamma = rate_model(RateKind::DoubleQuantum, truth, t)?;
            let sigma_omega = noise_frac * omega;
            let sigma_gamma = noise_frac * gamma;
            Ok(TemperaturePoint {
                t_k: t,
                omega_khz: (omega + sigma_omega * unit.sample(&mut rng)).max(0.0),
                sigma_omega_khz: sigma_omega,
                gamma_khz: (gamma + sigma_gamma * unit.sample(&mut rng)).max(0.0),
                sigma_gamma_khz: sigma_gamma,
            })
        })
        .collect::<Result<_, PhononError>>()?;

    let series = TemperatureSeries::new(points, format!("trial-{seed}"))?;
    let fit = fit_temperature_series(&series, modes)?;
    let omega = rate_model(RateKind::SingleQuantum, &fit.coupling, predict_at_k)?;
    let gamma = rate_model(RateKind::DoubleQuantum, &fit.coupling, predict_at_k)?;
    Ok(gamma / omega)
}

/// [`coupling_recovery_trial`] swept over a seed range.
pub fn coupling_recovery_trials(
    truth: &CouplingSet,
    modes: &[PhononMode; MODE_COUNT],
    temps_k: &[f64],
    noise_frac: f64,
    predict_at_k: f64,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<f64, TrialError>> {
    run_seeded(seeds, |seed| {
        coupling_recovery_trial(truth, modes, temps_k, noise_frac, predict_at_k, seed)
    })
}

/// Sequential variant of [`coupling_recovery_trials`].
pub fn coupling_recovery_trials_seq(
    truth: &CouplingSet,
    modes: &[PhononMode; MODE_COUNT],
    temps_k: &[f64],
    noise_frac: f64,
    predict_at_k: f64,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<f64, TrialError>> {
    run_seeded_seq(seeds, |seed| {
        coupling_recovery_trial(truth, modes, temps_k, noise_frac, predict_at_k, seed)
    })
}

/// Evenly spaced grid from 0 to three decay times of rate `k_khz`.
pub fn decay_tau_grid(k_khz: f64, points: usize) -> Vec<f64> {
    let tau_max = 3.0 / (k_khz * crate::kinetics::RATE_TIME_SCALE);
    (0..points)
        .map(|i| tau_max * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_sweeps_agree() {
        let truth = RatePair::new(33.26, 81.60).unwrap();
        let readout = ReadoutModel::new(1.0, 0.85, 100_000).unwrap();
        let f1_grid = decay_tau_grid(3.0 * 33.26, 20);
        let f2_grid = decay_tau_grid(2.0 * 81.60 + 33.26, 20);
        let par = rate_recovery_trials(
            &truth,
            &readout,
            &f1_grid,
            &f2_grid,
            RateExtraction::SharedOmega,
            0..8,
        );
        let seq = rate_recovery_trials_seq(
            &truth,
            &readout,
            &f1_grid,
            &f2_grid,
            RateExtraction::SharedOmega,
            0..8,
        );
        for (a, b) in par.iter().zip(&seq) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            assert_eq!(a.rates, b.rates);
        }
    }

    #[test]
    fn coupling_trial_is_deterministic() {
        let modes = [
            PhononMode::new(23.48).unwrap(),
            PhononMode::new(77.39).unwrap(),
            PhononMode::new(165.75).unwrap(),
        ];
        let truth = CouplingSet::new(
            modes.to_vec(),
            vec![8.0, 150.0, 2200.0],
            10.0,
            vec![40.0, 750.0, 11000.0],
            50.0,
        )
        .unwrap();
        let temps: Vec<f64> = (0..11).map(|i| 293.0 + 10.0 * i as f64).collect();
        let a = coupling_recovery_trial(&truth, &modes, &temps, 0.05, 400.0, 5).unwrap();
        let b = coupling_recovery_trial(&truth, &modes, &temps, 0.05, 400.0, 5).unwrap();
        assert_eq!(a, b);
    }
}
