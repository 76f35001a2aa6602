//! Numerical kernels for the embedding: weighted-stress majorization, the
//! cascade least-squares objective and an L-BFGS front end.

mod cascade;
mod matrix;
mod quasi_newton;
mod stress;

use thiserror::Error;

pub use cascade::CascadeProblem;
pub use matrix::SymMatrix;
pub use quasi_newton::{quasi_newton_minimize, QnStatus, QuasiNewtonResult};
pub use stress::{minimize_stress, StressProblem, StressResult};

use crate::par::Exec;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid target distances: {0}")]
    InvalidTarget(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub relative_objective_tolerance: f64,
    /// Quasi-Newton history length.
    pub memory: usize,
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::stress()
    }
}

impl SolverOptions {
    /// Defaults for stress majorization (500 iterations).
    pub fn stress() -> Self {
        SolverOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-7,
            relative_objective_tolerance: 1e-9,
            memory: 10,
            seed: 0,
            exec: Exec::default(),
        }
    }

    /// Defaults for the quasi-Newton solver (200 iterations).
    pub fn quasi_newton() -> Self {
        SolverOptions {
            max_iterations: 200,
            ..Self::stress()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.gradient_tolerance > 0.0 && self.relative_objective_tolerance > 0.0) {
            return Err(OptimError::InvalidOptions("tolerances must be positive".into()));
        }
        if self.memory == 0 {
            return Err(OptimError::InvalidOptions("memory must be at least 1".into()));
        }
        Ok(())
    }
}

/// Deterministic pseudo-random unit vector for the ordered pair `(i, j)`,
/// antisymmetric in its arguments. Used as the direction between two
/// coincident points.
pub(crate) fn pair_direction(i: usize, j: usize, seed: u64, out: &mut [f64]) {
    let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let mut state = seed ^ ((lo as u64) << 32 | hi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut norm2 = 0.0;
    for x in out.iter_mut() {
        state = splitmix64(state);
        *x = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        norm2 += *x * *x;
    }
    if norm2 == 0.0 {
        out[0] = 1.0;
        norm2 = 1.0;
    }
    let scale = sign / norm2.sqrt();
    out.iter_mut().for_each(|x| *x *= scale);
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
