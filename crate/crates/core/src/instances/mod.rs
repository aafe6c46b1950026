//! Data model for scheduling instances: extended costs, cost matrices,
//! feasible allocations, makespan and exact optimal makespan, plus the
//! parametrized instance family used by the adversary.

use core::fmt;

use serde::{Deserialize, Serialize};

mod builders;
mod cost;
mod matrix;
mod opt;

pub use builders::{build_matrix, proper_column, MatrixKind};
pub use cost::ExtendedCost;
pub use matrix::{approximation_ratio, makespan, Allocation, CostMatrix, PaymentVector};
pub use opt::{optimal_makespan, DEFAULT_NODE_BUDGET};

/// Errors from instance construction and the makespan operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceError {
    EmptyDimensions { n: usize, m: usize },
    WrongEntryCount { expected: usize, got: usize },
    RaggedRows,
    InvalidEntry { machine: usize, task: usize },
    NoFiniteEntry { task: usize },
    InvalidMachine { machine: usize, machines: usize },
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    BudgetExhausted { explored: u64 },
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::EmptyDimensions { n, m } => {
                write!(f, "instances need at least one machine and task, got {n}x{m}")
            }
            InstanceError::WrongEntryCount { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            InstanceError::RaggedRows => write!(f, "rows have differing lengths"),
            InstanceError::InvalidEntry { machine, task } => {
                write!(f, "entry ({machine}, {task}) is negative or not a number")
            }
            InstanceError::NoFiniteEntry { task } => {
                write!(f, "task {task} has no finite processing time on any machine")
            }
            InstanceError::InvalidMachine { machine, machines } => {
                write!(f, "machine index {machine} out of range for {machines} machines")
            }
            InstanceError::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            InstanceError::BudgetExhausted { explored } => {
                write!(f, "search budget exhausted after {explored} nodes")
            }
        }
    }
}

impl core::error::Error for InstanceError {}

/// Errors specific to the instance-family builders.
#[derive(Clone, Debug, PartialEq)]
pub enum BuildError {
    Params(ParamsError),
    InvalidDetourIndex { j: usize, n: usize },
    InvalidDetourMachine { machine: usize, j: usize },
    Instance(InstanceError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Params(e) => write!(f, "{e}"),
            BuildError::InvalidDetourIndex { j, n } => {
                write!(f, "proper-task ordinal {j} must lie in 2..={}", n - 1)
            }
            BuildError::InvalidDetourMachine { machine, j } => {
                write!(f, "detour machine {machine} must be 1 or {j}")
            }
            BuildError::Instance(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for BuildError {}

impl From<ParamsError> for BuildError {
    fn from(e: ParamsError) -> Self {
        BuildError::Params(e)
    }
}

/// Parameters of the adversary's instance family.
///
/// The discount factor `a` and fallback price `r` must satisfy
/// `0 < r < 1 < a` together with the strict slack condition
/// `1 - r > 1/a - a^{-(n-2)}`, which is what lets the game force at least
/// one proper task onto machine 0. `epsilon` is the magnitude of the
/// pinning perturbations and `big_m` the finite surrogate presented to
/// mechanisms in place of unbounded entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub n: usize,
    pub r: f64,
    pub a: f64,
    pub epsilon: f64,
    pub big_m: f64,
}

/// Default surrogate for unbounded entries.
pub const DEFAULT_BIG_M: f64 = 1e6;

/// Default scale of the pinning perturbation, relative to the smallest
/// positive entry of the unperturbed family.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;

impl GameParams {
    /// Parameters with the default perturbation magnitude and unbounded
    /// surrogate.
    pub fn new(n: usize, r: f64, a: f64) -> Result<Self, ParamsError> {
        let mut params = GameParams {
            n,
            r,
            a,
            epsilon: 0.0,
            big_m: DEFAULT_BIG_M,
        };
        if !(r.is_finite() && a.is_finite()) {
            return Err(ParamsError::NonFinite);
        }
        if a > 1.0 {
            params.epsilon = DEFAULT_EPSILON_SCALE * r.min(params.inv_power(n.saturating_sub(2)));
            let floor = params.min_big_m();
            if params.big_m <= floor {
                params.big_m = 10.0 * floor;
            }
        }
        params.validate()?;
        Ok(params)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, ParamsError> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_big_m(mut self, big_m: f64) -> Result<Self, ParamsError> {
        self.big_m = big_m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.n < 3 {
            return Err(ParamsError::MachineCount { n: self.n });
        }
        if !(self.r.is_finite()
            && self.a.is_finite()
            && self.epsilon.is_finite()
            && self.big_m.is_finite())
        {
            return Err(ParamsError::NonFinite);
        }
        if !(self.a > 1.0 && 1.0 > self.r && self.r > 0.0) {
            return Err(ParamsError::ParameterOrder {
                r: self.r,
                a: self.a,
            });
        }
        let slack = self.feasibility_slack();
        if slack <= 0.0 {
            return Err(ParamsError::NotStrictlyFeasible { slack });
        }
        let epsilon_limit = self.r.min(self.inv_power(self.n - 2));
        if !(self.epsilon > 0.0 && self.epsilon < epsilon_limit) {
            return Err(ParamsError::EpsilonOutOfRange {
                epsilon: self.epsilon,
                limit: epsilon_limit,
            });
        }
        let required = self.min_big_m();
        if self.big_m <= required {
            return Err(ParamsError::BigMTooSmall {
                big_m: self.big_m,
                required,
            });
        }
        Ok(())
    }

    /// `a^{-k}`, computed by repeated multiplication so every module prices
    /// the geometric scale identically.
    pub fn inv_power(&self, k: usize) -> f64 {
        let z = 1.0 / self.a;
        let mut p = 1.0;
        for _ in 0..k {
            p *= z;
        }
        p
    }

    /// `r + a^{-1} + ... + a^{-(n-2)}`: machine 0's total proper load after
    /// the discount step.
    pub fn proper_row_sum(&self) -> f64 {
        let mut sum = self.r;
        for k in 1..=self.n - 2 {
            sum += self.inv_power(k);
        }
        sum
    }

    /// `(1 - r) - (a^{-1} - a^{-(n-2)})`; must be strictly positive.
    pub fn feasibility_slack(&self) -> f64 {
        (1.0 - self.r) - (self.inv_power(1) - self.inv_power(self.n - 2))
    }

    /// Smallest admissible surrogate: above the target ratio times the
    /// total finite work in any family member, so a surrogate assignment
    /// always shows up as a ratio violation.
    fn min_big_m(&self) -> f64 {
        let mut geo = 0.0;
        for k in 0..=self.n.saturating_sub(3) {
            geo += self.inv_power(k);
        }
        (2.0 + self.a) * (4.0 + 3.0 * geo)
    }
}

/// Violations of the [`GameParams`] invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamsError {
    MachineCount { n: usize },
    NonFinite,
    ParameterOrder { r: f64, a: f64 },
    NotStrictlyFeasible { slack: f64 },
    EpsilonOutOfRange { epsilon: f64, limit: f64 },
    BigMTooSmall { big_m: f64, required: f64 },
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsError::MachineCount { n } => write!(
                f,
                "need at least 3 machines (got {n}); the two-machine case is settled with ratio 2"
            ),
            ParamsError::NonFinite => write!(f, "parameters must be finite numbers"),
            ParamsError::ParameterOrder { r, a } => {
                write!(f, "parameters must satisfy 0 < r < 1 < a, got r={r}, a={a}")
            }
            ParamsError::NotStrictlyFeasible { slack } => write!(
                f,
                "1 - r must strictly exceed 1/a - a^-(n-2), slack was {slack}"
            ),
            ParamsError::EpsilonOutOfRange { epsilon, limit } => {
                write!(f, "epsilon {epsilon} must lie strictly in (0, {limit})")
            }
            ParamsError::BigMTooSmall { big_m, required } => {
                write!(f, "big_m {big_m} must exceed {required}")
            }
        }
    }
}

impl core::error::Error for ParamsError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_validate() {
        let p = GameParams::new(3, 0.7, 1.4).unwrap();
        assert!(p.epsilon > 0.0);
        assert!(p.big_m >= DEFAULT_BIG_M);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_two_machines() {
        assert!(matches!(
            GameParams::new(2, 0.5, 1.5),
            Err(ParamsError::MachineCount { n: 2 })
        ));
    }

    #[test]
    fn rejects_slack_violation() {
        // n = 4, r = 1 - (1/a - 1/a^2) makes the slack exactly zero.
        let a: f64 = 1.5;
        let r = 1.0 - (1.0 / a - 1.0 / (a * a));
        assert!(matches!(
            GameParams::new(4, r, a),
            Err(ParamsError::NotStrictlyFeasible { .. })
        ));
        assert!(GameParams::new(4, r - 1e-9, a).is_ok());
    }

    #[test]
    fn rejects_bad_epsilon() {
        let p = GameParams::new(3, 0.7, 1.4).unwrap();
        assert!(p.with_epsilon(0.8).is_err());
        assert!(p.with_epsilon(0.0).is_err());
        assert!(p.with_epsilon(1e-9).is_ok());
    }

    #[test]
    fn rejects_small_big_m() {
        let p = GameParams::new(3, 0.7, 1.4).unwrap();
        assert!(p.with_big_m(5.0).is_err());
    }
}
