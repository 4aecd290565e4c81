//! Population kinetics of the spin-1 ground-state triplet.
//!
//! The three sublevels (|-1>, |0>, |+1>) exchange population through a
//! single-quantum rate `omega` (|0> <-> |+-1>) and a double-quantum rate
//! `gamma` (|-1> <-> |+1>). Up and down rates are taken equal (the level
//! splitting of a few GHz is far below k_B*T in the 293-393 K regime), so
//! the generator is symmetric, the equilibrium is uniform, and the decay
//! rates are exactly {0, 3*omega, omega + 2*gamma}.
//!
//! Unit convention used throughout the crate: rates are in kHz (10^3 1/s),
//! times in microseconds, so `rate * time * 1e-3` is the dimensionless
//! exponent. [`RATE_TIME_SCALE`] encodes the 1e-3.

use thiserror::Error;

/// Dimensionless exponent per (kHz * us) rate-time product.
pub const RATE_TIME_SCALE: f64 = 1e-3;

/// Tolerance on the probability sum of a [`PopulationState`].
pub const POPULATION_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum KineticsError {
    #[error("rate must be finite and nonnegative, got {0}")]
    InvalidRate(f64),
    #[error("population {name} = {value} outside [0, 1]")]
    PopulationOutOfRange { name: &'static str, value: f64 },
    #[error("populations sum to {0}, expected 1 within {POPULATION_SUM_TOL}")]
    NotNormalized(f64),
    #[error("tau must be nonnegative, got {0}")]
    NegativeTau(f64),
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("3*omega + gamma = 0: relaxation time is infinite")]
    InfiniteT1,
    #[error("matrix is not a valid symmetric rate generator: {0}")]
    InvalidMatrix(&'static str),
}

/// The pair of relaxation rates, both in kHz. The central fit target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    omega_khz: f64,
    gamma_khz: f64,
}

impl RatePair {
    pub fn new(omega_khz: f64, gamma_khz: f64) -> Result<Self, KineticsError> {
        for r in [omega_khz, gamma_khz] {
            if !r.is_finite() || r < 0.0 {
                return Err(KineticsError::InvalidRate(r));
            }
        }
        Ok(Self {
            omega_khz,
            gamma_khz,
        })
    }

    /// Single-quantum rate (|0> <-> |+-1>), kHz.
    pub fn omega_khz(&self) -> f64 {
        self.omega_khz
    }

    /// Double-quantum rate (|-1> <-> |+1>), kHz.
    pub fn gamma_khz(&self) -> f64 {
        self.gamma_khz
    }
}

/// Occupation probabilities of (|-1>, |0>, |+1>). Always normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    p_minus: f64,
    p_zero: f64,
    p_plus: f64,
}

impl PopulationState {
    pub fn new(p_minus: f64, p_zero: f64, p_plus: f64) -> Result<Self, KineticsError> {
        for (name, value) in [("p_minus", p_minus), ("p_zero", p_zero), ("p_plus", p_plus)] {
            if !value.is_finite()
                || !(-POPULATION_SUM_TOL..=1.0 + POPULATION_SUM_TOL).contains(&value)
            {
                return Err(KineticsError::PopulationOutOfRange { name, value });
            }
        }
        let sum = p_minus + p_zero + p_plus;
        if (sum - 1.0).abs() > POPULATION_SUM_TOL {
            return Err(KineticsError::NotNormalized(sum));
        }
        Ok(Self {
            p_minus: p_minus.clamp(0.0, 1.0),
            p_zero: p_zero.clamp(0.0, 1.0),
            p_plus: p_plus.clamp(0.0, 1.0),
        })
    }

    /// The optically polarized state (0, 1, 0).
    pub fn polarized() -> Self {
        Self {
            p_minus: 0.0,
            p_zero: 1.0,
            p_plus: 0.0,
        }
    }

    /// Infinite-temperature equilibrium (1/3, 1/3, 1/3).
    pub fn equilibrium() -> Self {
        Self {
            p_minus: 1.0 / 3.0,
            p_zero: 1.0 / 3.0,
            p_plus: 1.0 / 3.0,
        }
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_zero(&self) -> f64 {
        self.p_zero
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_minus, self.p_zero, self.p_plus]
    }

    /// Swap the populations of |0> and |-1> (or |0> and |+1>) with
    /// probability `fidelity`, leaving the rest untouched.
    pub(crate) fn mix_swap(&self, a: usize, b: usize, fidelity: f64) -> Self {
        let mut p = self.as_array();
        let (pa, pb) = (p[a], p[b]);
        p[a] = fidelity * pb + (1.0 - fidelity) * pa;
        p[b] = fidelity * pa + (1.0 - fidelity) * pb;
        Self {
            p_minus: p[0],
            p_zero: p[1],
            p_plus: p[2],
        }
    }
}

/// Symmetric 3x3 rate generator in kHz, basis order (|-1>, |0>, |+1>).
///
/// `entries[i][j]` is the flow rate into state `i` from state `j`;
/// columns sum to zero so total population is conserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMatrix {
    entries: [[f64; 3]; 3],
}

impl RateMatrix {
    /// Validate an explicit generator: symmetric, conservative columns,
    /// nonnegative off-diagonals, nonpositive diagonal, and a single
    /// common single-quantum rate on both |0> legs.
    pub fn from_entries(entries: [[f64; 3]; 3]) -> Result<Self, KineticsError> {
        let tol = 1e-12;
        for i in 0..3 {
            for j in 0..3 {
                if !entries[i][j].is_finite() {
                    return Err(KineticsError::InvalidMatrix("non-finite entry"));
                }
                if (entries[i][j] - entries[j][i]).abs() > tol {
                    return Err(KineticsError::InvalidMatrix("not symmetric"));
                }
                if i == j && entries[i][j] > tol {
                    return Err(KineticsError::InvalidMatrix("positive diagonal entry"));
                }
                if i != j && entries[i][j] < -tol {
                    return Err(KineticsError::InvalidMatrix("negative off-diagonal entry"));
                }
            }
        }
        for j in 0..3 {
            let col_sum: f64 = (0..3).map(|i| entries[i][j]).sum();
            if col_sum.abs() > tol {
                return Err(KineticsError::InvalidMatrix("column sum not zero"));
            }
        }
        if (entries[0][1] - entries[2][1]).abs() > tol {
            return Err(KineticsError::InvalidMatrix(
                "unequal single-quantum rates on the two |0> legs",
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[[f64; 3]; 3] {
        &self.entries
    }

    /// Rates read back from the validated structure.
    pub fn rates(&self) -> RatePair {
        RatePair {
            omega_khz: self.entries[1][0],
            gamma_khz: self.entries[2][0],
        }
    }
}

/// Spectral decomposition of a [`RateMatrix`]: decay rates sorted
/// ascending, paired with their population-difference eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticEigenmodes {
    /// Decay rates {0, 3*omega, omega + 2*gamma} in kHz, ascending.
    pub rates_khz: [f64; 3],
    /// Unnormalized eigenvectors matching `rates_khz` by index.
    pub modes: [[f64; 3]; 3],
}

/// Transcribe the rate equations into the 3x3 generator.
///
/// dp0/dt = -2*omega*p0 + omega*(p- + p+),
/// dp-/dt = omega*p0 - (omega+gamma)*p- + gamma*p+,  and symmetrically for p+.
pub fn build_rate_matrix(rates: &RatePair) -> RateMatrix {
    let w = rates.omega_khz;
    let g = rates.gamma_khz;
    RateMatrix {
        entries: [[-(w + g), w, g], [w, -2.0 * w, w], [g, w, -(w + g)]],
    }
}

/// Closed-form spectral decomposition.
///
/// The symmetric generator always has eigenvectors (1,1,1) at rate 0,
/// (1,-2,1) at 3*omega and (1,0,-1) at omega + 2*gamma, so no numeric
/// eigensolver is involved.
pub fn eigenmodes(matrix: &RateMatrix) -> KineticEigenmodes {
    let RatePair {
        omega_khz: w,
        gamma_khz: g,
    } = matrix.rates();
    let sq = 3.0 * w;
    let dq = w + 2.0 * g;
    let mode_sq = [1.0, -2.0, 1.0];
    let mode_dq = [1.0, 0.0, -1.0];
    let (rates_khz, modes) = if sq <= dq {
        ([0.0, sq, dq], [[1.0, 1.0, 1.0], mode_sq, mode_dq])
    } else {
        ([0.0, dq, sq], [[1.0, 1.0, 1.0], mode_dq, mode_sq])
    };
    KineticEigenmodes { rates_khz, modes }
}

/// Exact population propagation by time `tau_us`.
///
/// The initial state is projected onto the orthogonal eigenvectors and
/// each component decays with its own rate:
/// p(tau) = 1/3 + c1*exp(-3*omega*tau')*(1,-2,1) + c2*exp(-(omega+2*gamma)*tau')*(1,0,-1)
/// with tau' = tau * 1e-3 and c1 = (p- - 2 p0 + p+)/6, c2 = (p- - p+)/2.
pub fn evolve_analytic(
    initial: &PopulationState,
    rates: &RatePair,
    tau_us: f64,
) -> Result<PopulationState, KineticsError> {
    if !tau_us.is_finite() || tau_us < 0.0 {
        return Err(KineticsError::NegativeTau(tau_us));
    }
    let [pm, pz, pp] = initial.as_array();
    let c1 = (pm - 2.0 * pz + pp) / 6.0;
    let c2 = (pm - pp) / 2.0;
    let e1 = (-3.0 * rates.omega_khz * tau_us * RATE_TIME_SCALE).exp();
    let e2 = (-(rates.omega_khz + 2.0 * rates.gamma_khz) * tau_us * RATE_TIME_SCALE).exp();
    let third = 1.0 / 3.0;
    PopulationState::new(
        third + c1 * e1 + c2 * e2,
        third - 2.0 * c1 * e1,
        third + c1 * e1 - c2 * e2,
    )
}

/// Result of the fixed-step integration, with a flag recording whether
/// the probability sum drifted past 1e-9 and had to be renormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericEvolution {
    pub state: PopulationState,
    pub renormalized: bool,
}

/// Classical fixed-step 4th-order Runge-Kutta integration of the rate
/// equations. Serves as the independent oracle for [`evolve_analytic`].
pub fn evolve_numeric(
    initial: &PopulationState,
    rates: &RatePair,
    tau_us: f64,
    step_us: f64,
) -> Result<NumericEvolution, KineticsError> {
    if !tau_us.is_finite() || tau_us < 0.0 {
        return Err(KineticsError::NegativeTau(tau_us));
    }
    if !step_us.is_finite() || step_us <= 0.0 {
        return Err(KineticsError::InvalidStep(step_us));
    }
    if tau_us == 0.0 {
        return Ok(NumericEvolution {
            state: *initial,
            renormalized: false,
        });
    }

    let matrix = build_rate_matrix(rates);
    let m = matrix.entries();
    let deriv = |p: &[f64; 3]| -> [f64; 3] {
        let mut d = [0.0; 3];
        for i in 0..3 {
            d[i] = RATE_TIME_SCALE * (m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]);
        }
        d
    };

    let n_steps = (tau_us / step_us).ceil().max(1.0) as usize;
    let h = tau_us / n_steps as f64;
    let mut p = initial.as_array();
    for _ in 0..n_steps {
        let k1 = deriv(&p);
        let k2 = deriv(&add_scaled(&p, &k1, h / 2.0));
        let k3 = deriv(&add_scaled(&p, &k2, h / 2.0));
        let k4 = deriv(&add_scaled(&p, &k3, h));
        for i in 0..3 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let sum: f64 = p.iter().sum();
    let renormalized = (sum - 1.0).abs() > 1e-9;
    if renormalized {
        for v in &mut p {
            *v /= sum;
        }
    }
    Ok(NumericEvolution {
        state: PopulationState::new(p[0], p[1], p[2])?,
        renormalized,
    })
}

fn add_scaled(p: &[f64; 3], d: &[f64; 3], s: f64) -> [f64; 3] {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

/// Total relaxation time T1 = 1/(3*omega + gamma), returned in us.
///
/// With rates in kHz the reciprocal is in ms, hence the factor 1000.
pub fn t1_from_rates(rates: &RatePair) -> Result<f64, KineticsError> {
    let total = 3.0 * rates.omega_khz + rates.gamma_khz;
    if total <= 0.0 {
        return Err(KineticsError::InfiniteT1);
    }
    Ok(1000.0 / total)
}
