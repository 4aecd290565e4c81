//! Spin-lattice relaxometry toolkit for boron-vacancy spin ensembles in
//! hexagonal boron nitride.
//!
//! The crate simulates the three-level population kinetics driven by the
//! single-quantum rate omega and the double-quantum rate gamma, composes
//! the pulse protocols whose fluorescence differences decay at 3*omega
//! and omega + 2*gamma, synthesizes shot-noise-limited datasets, and fits
//! measured or synthetic data: single-exponential decays, two-Lorentzian
//! ODMR spectra, and the two-phonon temperature models for omega(T) and
//! gamma(T).
//!
//! Modules:
//! - [`kinetics`]: rate matrix, closed-form eigenmodes, propagation, T1.
//! - [`sequence`]: pulse protocols, F1/F2 signals, Poisson synthesis.
//! - [`fit`]: Levenberg-Marquardt core, jacobians, model families, NNLS.
//! - [`phonon`]: Bose-Einstein occupations, coupling models, PDOS peaks.
//! - [`batch`]: seed sweeps (rayon-parallel behind the `parallel` feature).
//! - [`io`]: CSV/JSON schemas, atomic writes, input digests.
//! - [`plot`]: standalone SVG emission for the fitted curves.
//! - [`cli`]: the command implementations behind the `spinlat` binary.

// index loops read naturally in the small fixed-size matrix kernels
#![allow(clippy::needless_range_loop)]

pub mod batch;
pub mod cli;
pub mod fit;
pub mod io;
pub mod kinetics;
pub mod phonon;
pub mod plot;
pub mod sequence;

pub use kinetics::{
    build_rate_matrix, eigenmodes, evolve_analytic, evolve_numeric, t1_from_rates,
    KineticEigenmodes, PopulationState, RateMatrix, RatePair, RATE_TIME_SCALE,
};
pub use sequence::{
    run_sequence, signal_f1, signal_f2, synth_dataset, CurveKind, DecayDataset, PulseElement,
    ReadoutModel, Transition,
};
