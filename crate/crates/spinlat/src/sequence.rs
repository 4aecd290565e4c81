//! Pulse protocols for the relaxometry measurements and synthesis of
//! noisy decay datasets.
//!
//! The F1 protocol prepares |0>, waits, and reads out with and without a
//! final pi pulse on the 0 <-> -1 transition; the difference tracks
//! p0 - p_minus and decays at 3*omega. The F2 protocol prepares |-1> and
//! compares readouts mapped through pi(0,-1) versus pi(0,+1); the
//! difference tracks p_minus - p_plus and decays at omega + 2*gamma.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::fit::DataPoint;
use crate::kinetics::{evolve_analytic, KineticsError, PopulationState, RatePair};

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("sequence must end with exactly one readout")]
    MissingReadout,
    #[error("readout must be the final element (found at position {0})")]
    ReadoutNotLast(usize),
    #[error("pi-pulse fidelity {0} outside [0, 1]")]
    InvalidFidelity(f64),
    #[error("wait time {0} must be nonnegative and finite")]
    InvalidWait(f64),
    #[error(
        "readout model requires rate_bright > rate_dark >= 0, got bright {bright}, dark {dark}"
    )]
    InvalidReadout { bright: f64, dark: f64 },
    #[error("shots must be at least 1")]
    NoShots,
    #[error("tau grid is empty")]
    EmptyGrid,
    #[error("tau grid must be strictly increasing and nonnegative at index {0}")]
    GridNotIncreasing(usize),
    #[error("dataset sigma vanished at tau = {0} us (no counts at either readout)")]
    DegenerateSigma(f64),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// Microwave transition addressed by a pi pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// |0> <-> |-1>
    ZeroMinus,
    /// |0> <-> |+1>
    ZeroPlus,
}

/// One element of an optical/microwave protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseElement {
    /// Long green laser pulse; prepares the polarized state.
    Polarize,
    /// Free evolution for `tau_us` microseconds.
    Wait { tau_us: f64 },
    /// Population swap on `transition` with probability `fidelity`.
    PiPulse {
        transition: Transition,
        fidelity: f64,
    },
    /// Short green laser pulse; converts populations to photon counts.
    Readout,
}

/// Photon-count model for the readout pulse.
///
/// The paper reports normalized fluorescence only, so the count scale is
/// configurable; the defaults mirror its ~15% contrast regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    rate_bright: f64,
    rate_dark: f64,
    shots: u64,
}

impl ReadoutModel {
    pub fn new(rate_bright: f64, rate_dark: f64, shots: u64) -> Result<Self, SequenceError> {
        if !(rate_bright.is_finite() && rate_dark.is_finite())
            || rate_dark < 0.0
            || rate_bright <= rate_dark
        {
            return Err(SequenceError::InvalidReadout {
                bright: rate_bright,
                dark: rate_dark,
            });
        }
        if shots == 0 {
            return Err(SequenceError::NoShots);
        }
        Ok(Self {
            rate_bright,
            rate_dark,
            shots,
        })
    }

    /// Counts per shot for the |0> population.
    pub fn rate_bright(&self) -> f64 {
        self.rate_bright
    }

    /// Counts per shot for the |+-1> populations.
    pub fn rate_dark(&self) -> f64 {
        self.rate_dark
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Expected total counts for a population state.
    fn expected_counts(&self, state: &PopulationState) -> f64 {
        self.shots as f64
            * (state.p_zero() * self.rate_bright
                + (state.p_minus() + state.p_plus()) * self.rate_dark)
    }
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            rate_bright: 1.0,
            rate_dark: 0.85,
            shots: 1,
        }
    }
}

/// Knobs for imperfect protocols. Defaults are the ideal ones the decay
/// laws assume: unit-fidelity pi pulses and perfect polarization to |0>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub pi_fidelity: f64,
    pub polarized_state: PopulationState,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            pi_fidelity: 1.0,
            polarized_state: PopulationState::polarized(),
        }
    }
}

fn is_positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn validate_sequence(seq: &[PulseElement]) -> Result<(), SequenceError> {
    let readouts = seq
        .iter()
        .filter(|e| matches!(e, PulseElement::Readout))
        .count();
    if readouts != 1 {
        return Err(SequenceError::MissingReadout);
    }
    if let Some(pos) = seq.iter().position(|e| matches!(e, PulseElement::Readout)) {
        if pos != seq.len() - 1 {
            return Err(SequenceError::ReadoutNotLast(pos));
        }
    }
    for e in seq {
        match *e {
            PulseElement::Wait { tau_us } if !tau_us.is_finite() || tau_us < 0.0 => {
                return Err(SequenceError::InvalidWait(tau_us));
            }
            PulseElement::PiPulse { fidelity, .. } if !(0.0..=1.0).contains(&fidelity) => {
                return Err(SequenceError::InvalidFidelity(fidelity));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Execute a protocol and return the expected photon counts at readout.
///
/// The state starts at thermal equilibrium; `Polarize` resets it to
/// `polarized` (the ideal (0,1,0) unless overridden).
pub fn run_sequence_from(
    seq: &[PulseElement],
    rates: &RatePair,
    readout: &ReadoutModel,
    polarized: &PopulationState,
) -> Result<f64, SequenceError> {
    validate_sequence(seq)?;
    let mut state = PopulationState::equilibrium();
    for e in seq {
        match *e {
            PulseElement::Polarize => state = *polarized,
            PulseElement::Wait { tau_us } => {
                state = evolve_analytic(&state, rates, tau_us)?;
            }
            PulseElement::PiPulse {
                transition,
                fidelity,
            } => {
                state = match transition {
                    Transition::ZeroMinus => state.mix_swap(0, 1, fidelity),
                    Transition::ZeroPlus => state.mix_swap(1, 2, fidelity),
                };
            }
            PulseElement::Readout => return Ok(readout.expected_counts(&state)),
        }
    }
    unreachable!("validated sequence always ends in a readout");
}

/// [`run_sequence_from`] with ideal polarization.
pub fn run_sequence(
    seq: &[PulseElement],
    rates: &RatePair,
    readout: &ReadoutModel,
) -> Result<f64, SequenceError> {
    run_sequence_from(seq, rates, readout, &PopulationState::polarized())
}

/// Which decay curve a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    F1,
    F2,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::F1 => "F1",
            CurveKind::F2 => "F2",
        }
    }

    /// The two sequences whose count difference forms this curve.
    fn sequence_pair(&self, tau_us: f64, fidelity: f64) -> [Vec<PulseElement>; 2] {
        let pi = |transition| PulseElement::PiPulse {
            transition,
            fidelity,
        };
        match self {
            CurveKind::F1 => [
                vec![
                    PulseElement::Polarize,
                    PulseElement::Wait { tau_us },
                    PulseElement::Readout,
                ],
                vec![
                    PulseElement::Polarize,
                    PulseElement::Wait { tau_us },
                    pi(Transition::ZeroMinus),
                    PulseElement::Readout,
                ],
            ],
            CurveKind::F2 => [
                vec![
                    PulseElement::Polarize,
                    pi(Transition::ZeroMinus),
                    PulseElement::Wait { tau_us },
                    pi(Transition::ZeroMinus),
                    PulseElement::Readout,
                ],
                vec![
                    PulseElement::Polarize,
                    pi(Transition::ZeroMinus),
                    PulseElement::Wait { tau_us },
                    pi(Transition::ZeroPlus),
                    PulseElement::Readout,
                ],
            ],
        }
    }
}

/// Expected counts of the two sequences of `curve` at `tau_us`.
fn expected_pair(
    curve: CurveKind,
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
    opts: &ProtocolOptions,
) -> Result<(f64, f64), SequenceError> {
    let [seq_a, seq_b] = curve.sequence_pair(tau_us, opts.pi_fidelity);
    let a = run_sequence_from(&seq_a, rates, readout, &opts.polarized_state)?;
    let b = run_sequence_from(&seq_b, rates, readout, &opts.polarized_state)?;
    Ok((a, b))
}

fn normalized_signal(
    curve: CurveKind,
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
    opts: &ProtocolOptions,
) -> Result<f64, SequenceError> {
    let (a, b) = expected_pair(curve, tau_us, rates, readout, opts)?;
    let (a0, b0) = expected_pair(curve, 0.0, rates, readout, opts)?;
    Ok((a - b) / (a0 - b0))
}

/// Normalized F1(tau) = S_{0,0} - S_{0,-1}, unity at tau = 0.
/// Equals exp(-3*omega*tau') under ideal pulses.
pub fn signal_f1(
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
) -> Result<f64, SequenceError> {
    normalized_signal(
        CurveKind::F1,
        tau_us,
        rates,
        readout,
        &ProtocolOptions::default(),
    )
}

/// Normalized F2(tau) = S_{-1,-1} - S_{-1,+1}, unity at tau = 0.
/// Equals exp(-(2*gamma + omega)*tau') under ideal pulses.
pub fn signal_f2(
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
) -> Result<f64, SequenceError> {
    normalized_signal(
        CurveKind::F2,
        tau_us,
        rates,
        readout,
        &ProtocolOptions::default(),
    )
}

/// [`signal_f1`]/[`signal_f2`] with explicit protocol imperfections.
pub fn signal_with_options(
    curve: CurveKind,
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
    opts: &ProtocolOptions,
) -> Result<f64, SequenceError> {
    normalized_signal(curve, tau_us, rates, readout, opts)
}

/// Unnormalized count difference of the two sequences, for amplitude
/// studies where the tau = 0 normalization would hide the scale.
pub fn raw_difference(
    curve: CurveKind,
    tau_us: f64,
    rates: &RatePair,
    readout: &ReadoutModel,
    opts: &ProtocolOptions,
) -> Result<f64, SequenceError> {
    let (a, b) = expected_pair(curve, tau_us, rates, readout, opts)?;
    Ok(a - b)
}

/// A synthesized or measured decay curve: strictly increasing taus with
/// the normalized fluorescence difference and its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayDataset {
    pub curve: CurveKind,
    pub points: Vec<DataPoint>,
    pub temperature_k: f64,
}

impl DecayDataset {
    pub fn new(
        curve: CurveKind,
        points: Vec<DataPoint>,
        temperature_k: f64,
    ) -> Result<Self, SequenceError> {
        if points.is_empty() {
            return Err(SequenceError::EmptyGrid);
        }
        let mut prev = -f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || p.x < 0.0 || p.x <= prev {
                return Err(SequenceError::GridNotIncreasing(i));
            }
            if !is_positive(p.sigma) {
                return Err(SequenceError::DegenerateSigma(p.x));
            }
            prev = p.x;
        }
        Ok(Self {
            curve,
            points,
            temperature_k,
        })
    }
}

/// Room temperature, the default metadata tag for synthetic datasets.
pub const DEFAULT_TEMPERATURE_K: f64 = 293.0;

/// Synthesize a Poisson-noisy decay dataset.
///
/// For every tau the two protocol sequences are run `shots` times in
/// aggregate: total counts are drawn from Poisson(shots * mean) for each
/// sequence, the difference is normalized by the noise-free tau = 0
/// difference, and the attached sigma is the exactly propagated standard
/// error sqrt(mean_a + mean_b)/norm. Output is a pure function of
/// (seed, curve, grid, rates, readout).
pub fn synth_dataset(
    curve: CurveKind,
    rates: &RatePair,
    readout: &ReadoutModel,
    tau_grid_us: &[f64],
    seed: u64,
) -> Result<DecayDataset, SequenceError> {
    synth_dataset_with(
        curve,
        rates,
        readout,
        tau_grid_us,
        seed,
        &ProtocolOptions::default(),
        DEFAULT_TEMPERATURE_K,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn synth_dataset_with(
    curve: CurveKind,
    rates: &RatePair,
    readout: &ReadoutModel,
    tau_grid_us: &[f64],
    seed: u64,
    opts: &ProtocolOptions,
    temperature_k: f64,
) -> Result<DecayDataset, SequenceError> {
    if tau_grid_us.is_empty() {
        return Err(SequenceError::EmptyGrid);
    }
    for (i, w) in tau_grid_us.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(SequenceError::GridNotIncreasing(i + 1));
        }
    }

    let (a0, b0) = expected_pair(curve, 0.0, rates, readout, opts)?;
    let norm = a0 - b0;
    if !is_positive(norm) {
        return Err(SequenceError::DegenerateSigma(0.0));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(match curve {
        CurveKind::F1 => 1,
        CurveKind::F2 => 2,
    });

    let mut points = Vec::with_capacity(tau_grid_us.len());
    for &tau in tau_grid_us {
        let (mean_a, mean_b) = expected_pair(curve, tau, rates, readout, opts)?;
        let count_a = sample_poisson(&mut rng, mean_a);
        let count_b = sample_poisson(&mut rng, mean_b);
        let sigma = (mean_a + mean_b).sqrt() / norm;
        if !is_positive(sigma) {
            return Err(SequenceError::DegenerateSigma(tau));
        }
        points.push(DataPoint::new(tau, (count_a - count_b) / norm, sigma));
    }
    DecayDataset::new(curve, points, temperature_k)
}

fn sample_poisson(rng: &mut ChaCha12Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::RATE_TIME_SCALE;
    use proptest::prelude::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    fn perfect_readout() -> ReadoutModel {
        ReadoutModel::new(1.0, 0.0, 1).unwrap()
    }

    fn room_rates() -> RatePair {
        RatePair::new(33.26, 81.60).unwrap()
    }

    #[test]
    fn polarize_then_read_gives_unity() {
        let counts = run_sequence(
            &[PulseElement::Polarize, PulseElement::Readout],
            &room_rates(),
            &perfect_readout(),
        )
        .unwrap();
        assert_close(counts, 1.0, 1e-15);
    }

    #[test]
    fn pi_pulse_moves_population_to_dark_state() {
        let counts = run_sequence(
            &[
                PulseElement::Polarize,
                PulseElement::PiPulse {
                    transition: Transition::ZeroMinus,
                    fidelity: 1.0,
                },
                PulseElement::Readout,
            ],
            &room_rates(),
            &perfect_readout(),
        )
        .unwrap();
        assert_close(counts, 0.0, 1e-15);
    }

    #[test]
    fn long_wait_relaxes_to_one_third() {
        let counts = run_sequence(
            &[
                PulseElement::Polarize,
                PulseElement::Wait { tau_us: 1e6 },
                PulseElement::Readout,
            ],
            &room_rates(),
            &perfect_readout(),
        )
        .unwrap();
        assert_close(counts, 1.0 / 3.0, 1e-12);
    }

    #[test]
    fn malformed_sequences_are_rejected() {
        let r = room_rates();
        let ro = perfect_readout();
        assert_eq!(
            run_sequence(&[PulseElement::Polarize], &r, &ro).unwrap_err(),
            SequenceError::MissingReadout
        );
        assert_eq!(
            run_sequence(
                &[PulseElement::Readout, PulseElement::Wait { tau_us: 1.0 }],
                &r,
                &ro
            )
            .unwrap_err(),
            SequenceError::ReadoutNotLast(0)
        );
        assert_eq!(
            run_sequence(
                &[
                    PulseElement::Polarize,
                    PulseElement::PiPulse {
                        transition: Transition::ZeroMinus,
                        fidelity: 1.5
                    },
                    PulseElement::Readout
                ],
                &r,
                &ro
            )
            .unwrap_err(),
            SequenceError::InvalidFidelity(1.5)
        );
    }

    #[test]
    fn readout_model_validation() {
        assert!(ReadoutModel::new(1.0, 0.85, 100).is_ok());
        assert!(ReadoutModel::new(0.8, 0.85, 100).is_err());
        assert!(ReadoutModel::new(1.0, -0.1, 100).is_err());
        assert_eq!(
            ReadoutModel::new(1.0, 0.85, 0).unwrap_err(),
            SequenceError::NoShots
        );
    }

    #[test]
    fn f1_hits_e_inverse_at_one_decay_time() {
        // 3*omega*tau' = 1 at tau = 10.022 us for omega = 33.26 kHz
        let tau = 1.0 / (3.0 * 33.26 * RATE_TIME_SCALE);
        let f1 = signal_f1(tau, &room_rates(), &ReadoutModel::default()).unwrap();
        assert_close(f1, (-1.0f64).exp(), 1e-12);
        assert_close(tau, 10.022, 1e-3);
    }

    #[test]
    fn f2_hits_e_inverse_at_one_decay_time() {
        let tau = 1.0 / ((2.0 * 81.60 + 33.26) * RATE_TIME_SCALE);
        let f2 = signal_f2(tau, &room_rates(), &ReadoutModel::default()).unwrap();
        assert_close(f2, (-1.0f64).exp(), 1e-12);
        assert_close(tau, 5.090, 1e-3);
    }

    #[test]
    fn f1_is_independent_of_gamma() {
        let readout = ReadoutModel::default();
        for tau in [0.5, 3.0, 12.0] {
            let lo = signal_f1(tau, &RatePair::new(33.26, 0.0).unwrap(), &readout).unwrap();
            let hi = signal_f1(tau, &RatePair::new(33.26, 500.0).unwrap(), &readout).unwrap();
            assert_close(lo, hi, 1e-12);
        }
    }

    #[test]
    fn f2_with_zero_gamma_decays_at_omega() {
        let rates = RatePair::new(20.0, 0.0).unwrap();
        let readout = ReadoutModel::default();
        for tau in [1.0, 7.0, 31.0] {
            let f2 = signal_f2(tau, &rates, &readout).unwrap();
            assert_close(f2, (-20.0 * tau * RATE_TIME_SCALE).exp(), 1e-12);
        }
    }

    #[test]
    fn imperfect_pulse_rescales_amplitude_but_not_rate() {
        let rates = room_rates();
        let readout = ReadoutModel::new(1.0, 0.85, 1000).unwrap();
        let (tau_a, tau_b) = (2.0, 9.0);
        let slope_ref: f64 = {
            let pa = signal_f1(tau_a, &rates, &readout).unwrap();
            let pb = signal_f1(tau_b, &rates, &readout).unwrap();
            (pb.ln() - pa.ln()) / (tau_b - tau_a)
        };
        for fidelity in [0.6, 0.8, 0.95] {
            let opts = ProtocolOptions {
                pi_fidelity: fidelity,
                ..Default::default()
            };
            let fa = signal_with_options(CurveKind::F1, tau_a, &rates, &readout, &opts).unwrap();
            let fb = signal_with_options(CurveKind::F1, tau_b, &rates, &readout, &opts).unwrap();
            let slope = (fb.ln() - fa.ln()) / (tau_b - tau_a);
            assert_close(slope, slope_ref, 1e-9);

            let raw_ideal = raw_difference(
                CurveKind::F1,
                tau_a,
                &rates,
                &readout,
                &ProtocolOptions::default(),
            )
            .unwrap();
            let raw = raw_difference(CurveKind::F1, tau_a, &rates, &readout, &opts).unwrap();
            assert_close(raw, fidelity * raw_ideal, 1e-9 * raw_ideal.abs());
        }
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let grid: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let readout = ReadoutModel::new(1.0, 0.85, 1000).unwrap();
        let a = synth_dataset(CurveKind::F1, &room_rates(), &readout, &grid, 42).unwrap();
        let b = synth_dataset(CurveKind::F1, &room_rates(), &readout, &grid, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_dataset(CurveKind::F1, &room_rates(), &readout, &grid, 43).unwrap();
        assert_ne!(a, c);
        // F1 and F2 streams are independent even for equal seeds
        let d = synth_dataset(CurveKind::F2, &room_rates(), &readout, &grid, 42).unwrap();
        assert_ne!(a.points, d.points);
    }

    #[test]
    fn synthesis_rejects_bad_grids() {
        let readout = ReadoutModel::default();
        assert_eq!(
            synth_dataset(CurveKind::F1, &room_rates(), &readout, &[], 1).unwrap_err(),
            SequenceError::EmptyGrid
        );
        assert_eq!(
            synth_dataset(CurveKind::F1, &room_rates(), &readout, &[0.0, 2.0, 2.0], 1).unwrap_err(),
            SequenceError::GridNotIncreasing(2)
        );
    }

    #[test]
    fn large_shot_limit_matches_noise_free_curve() {
        let grid: Vec<f64> = (0..8).map(|i| 2.0 * i as f64).collect();
        let readout = ReadoutModel::new(1.0, 0.85, 1_000_000_000).unwrap();
        let rates = room_rates();
        let data = synth_dataset(CurveKind::F1, &rates, &readout, &grid, 7).unwrap();
        for p in &data.points {
            let truth = signal_f1(p.x, &rates, &readout).unwrap();
            assert!(
                (p.y - truth).abs() <= 3.0 * p.sigma,
                "tau {}: {} vs {} (sigma {})",
                p.x,
                p.y,
                truth,
                p.sigma
            );
        }
    }

    #[test]
    fn attached_sigma_matches_empirical_scatter() {
        let readout = ReadoutModel::new(1.0, 0.85, 2000).unwrap();
        let rates = room_rates();
        let grid = [4.0];
        let n_seeds = 10_000;
        let mut values = Vec::with_capacity(n_seeds);
        let mut sigma = 0.0;
        for seed in 0..n_seeds as u64 {
            let d = synth_dataset(CurveKind::F1, &rates, &readout, &grid, seed).unwrap();
            values.push(d.points[0].y);
            sigma = d.points[0].sigma;
        }
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let var: f64 =
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let empirical = var.sqrt();
        assert!(
            (empirical - sigma).abs() < 0.05 * sigma,
            "empirical sd {empirical} vs attached {sigma}"
        );
    }

    proptest! {
        #[test]
        fn f1_f2_match_closed_form_decay_laws(
            w in 0.1..300.0f64,
            g in 0.0..300.0f64,
            tau in 0.0..50.0f64,
        ) {
            let rates = RatePair::new(w, g).unwrap();
            let readout = ReadoutModel::default();
            let f1 = signal_f1(tau, &rates, &readout).unwrap();
            let f2 = signal_f2(tau, &rates, &readout).unwrap();
            let law1 = (-3.0 * w * tau * RATE_TIME_SCALE).exp();
            let law2 = (-(2.0 * g + w) * tau * RATE_TIME_SCALE).exp();
            prop_assert!((f1 - law1).abs() < 1e-10);
            prop_assert!((f2 - law2).abs() < 1e-10);
        }
    }
}
