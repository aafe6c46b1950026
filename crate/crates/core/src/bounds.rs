//! The lower bound `rho(n)` as the optimum of a small nonlinear program.
//!
//! With `z = 1/a`, the program maximizes
//! `min { 1 + r + z + ... + z^(n-2), 1 + 1/r, 1 + 1/z }` over
//! `0 <= r, z <= 1` subject to `r <= 1 - z + z^(n-2)`. Its optimum is
//! `rho = 1 + a`, where `a` is the smaller of the roots of two fixed-point
//! equations (`a_{n,1}` and `a_{n,2}` below); the choice flips from the
//! first family to the second at `n = 6`. As `n` grows the bound converges
//! to the root of `(rho - 1)(rho - 2)^2 = 1`.
//!
//! [`analytic_bound`] computes the optimum by bisection; [`grid_oracle`]
//! maximizes the same objective by coarse-to-fine grid search and serves as
//! an independent check that never shares the root-finding path.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::instances::{GameParams, ParamsError};

/// Residual tolerance for the bisection solvers.
pub const ROOT_TOL: f64 = 1e-12;

/// Default shift applied to `r` at the feasibility boundary for `n >= 6`,
/// where the optimizer sits exactly on the constraint the game needs to be
/// strict.
pub const DEFAULT_BOUNDARY_DELTA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum BoundsError {
    MachineCountTooSmall { n: usize },
    ResolutionTooSmall { resolution: usize },
    Params(ParamsError),
}

impl fmt::Display for BoundsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundsError::MachineCountTooSmall { n } => write!(
                f,
                "need at least 3 machines (got {n}); the two-machine case is settled with ratio 2"
            ),
            BoundsError::ResolutionTooSmall { resolution } => {
                write!(f, "grid resolution must be at least 100, got {resolution}")
            }
            BoundsError::Params(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for BoundsError {}

impl From<ParamsError> for BoundsError {
    fn from(e: ParamsError) -> Self {
        BoundsError::Params(e)
    }
}

/// Which fixed-point family produced the optimal `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    An1,
    An2,
}

/// Constraints active at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintTag {
    SumConstraint,
    RInverse,
    AConstraint,
    RandABoundary,
}

/// The solved program for one machine count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSolution {
    pub n: usize,
    pub a: f64,
    pub z: f64,
    pub r: f64,
    pub rho: f64,
    pub branch: Branch,
    pub tight: Vec<ConstraintTag>,
}

/// A feasible point of the relaxed program, as found by the grid oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlpPoint {
    pub r: f64,
    pub z: f64,
    pub rho: f64,
}

/// One row of [`sequence_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub n: usize,
    pub a_n1: f64,
    pub a_n2: f64,
    pub branch: Branch,
    pub r: f64,
    pub rho: f64,
}

/// Bisection on a sign-changing interval; runs to f64 resolution.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    debug_assert!(f_lo * f(hi) <= 0.0, "bisection bracket must change sign");
    let positive_at_lo = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `sum_{k=from}^{to} a^{-k}`; empty when `to < from`.
fn inv_powers_sum(a: f64, from: usize, to: usize) -> f64 {
    if to < from {
        return 0.0;
    }
    let z = 1.0 / a;
    let mut p = 1.0;
    let mut sum = 0.0;
    for k in 0..=to {
        if k >= from {
            sum += p;
        }
        p *= z;
    }
    sum
}

fn check_n(n: usize) -> Result<(), BoundsError> {
    if n < 3 {
        Err(BoundsError::MachineCountTooSmall { n })
    } else {
        Ok(())
    }
}

/// Unique root in (1, 2) of `a = 2/a + 1/a^2 + ... + 1/a^(n-2)`.
pub fn solve_an1(n: usize) -> Result<f64, BoundsError> {
    check_n(n)?;
    let f = move |a: f64| 1.0 / a + inv_powers_sum(a, 1, n - 2) - a;
    Ok(bisect(f, 1.0 + 1e-9, 2.0))
}

/// Unique root in (1, 2) of
/// `a = 1 + 1/a^2 + ... + 1/a^(n-3) + 2/a^(n-2)`, written in the form
/// `a = 1 - 1/a + 1/a^(n-2) + (1/a + ... + 1/a^(n-2))` which is valid for
/// every `n >= 3`.
pub fn solve_an2(n: usize) -> Result<f64, BoundsError> {
    check_n(n)?;
    let f = move |a: f64| {
        1.0 - 1.0 / a + inv_powers_sum(a, n - 2, n - 2) + inv_powers_sum(a, 1, n - 2) - a
    };
    Ok(bisect(f, 1.0 + 1e-9, 2.0))
}

/// The limiting bound: unique real root of `(rho - 1)(rho - 2)^2 = 1`,
/// bracketed in [2, 3].
pub fn limit_bound() -> f64 {
    bisect(|rho| (rho - 1.0) * (rho - 2.0) * (rho - 2.0) - 1.0, 2.0, 3.0)
}

/// `1 - z + z^(n-2)`: the closed feasibility boundary for `r`.
pub fn randa_boundary(n: usize, z: f64) -> f64 {
    let mut p = 1.0;
    for _ in 0..n - 2 {
        p *= z;
    }
    1.0 - z + p
}

/// `min { 1 + r + z + ... + z^(n-2), 1 + 1/r, 1 + 1/z }` with `1/0` read as
/// infinity, i.e. the continuous extension to the closed square.
pub fn relaxed_objective(n: usize, r: f64, z: f64) -> f64 {
    let mut sum = 1.0 + r;
    let mut p = 1.0;
    for _ in 1..=n - 2 {
        p *= z;
        sum += p;
    }
    let r_bound = if r > 0.0 { 1.0 + 1.0 / r } else { f64::INFINITY };
    let z_bound = if z > 0.0 { 1.0 + 1.0 / z } else { f64::INFINITY };
    sum.min(r_bound).min(z_bound)
}

/// Optimal solution of the program for `n` machines: `rho = 1 + a` with `a`
/// the smaller of the two fixed-point roots, and
/// `r = min { 1/a, 1 - 1/a + 1/a^(n-2) }`.
pub fn analytic_bound(n: usize) -> Result<BoundSolution, BoundsError> {
    check_n(n)?;
    let a1 = solve_an1(n)?;
    let a2 = solve_an2(n)?;
    let (a, branch) = if a1 <= a2 {
        (a1, Branch::An1)
    } else {
        (a2, Branch::An2)
    };
    let z = 1.0 / a;
    let r = z.min(randa_boundary(n, z));
    let tight = match branch {
        Branch::An1 => alloc::vec![
            ConstraintTag::SumConstraint,
            ConstraintTag::RInverse,
            ConstraintTag::AConstraint,
        ],
        Branch::An2 => alloc::vec![
            ConstraintTag::SumConstraint,
            ConstraintTag::AConstraint,
            ConstraintTag::RandABoundary,
        ],
    };
    Ok(BoundSolution {
        n,
        a,
        z,
        r,
        rho: 1.0 + a,
        branch,
        tight,
    })
}

/// Independent optimum oracle: coarse grid over the closed feasible square
/// followed by zoomed refinement passes around the incumbent, ties broken
/// toward the lexicographically smallest `(r, z)`.
pub fn grid_oracle(
    n: usize,
    resolution: usize,
    refinement_rounds: usize,
) -> Result<NlpPoint, BoundsError> {
    check_n(n)?;
    if resolution < 100 {
        return Err(BoundsError::ResolutionTooSmall { resolution });
    }

    let mut best = NlpPoint {
        r: 0.0,
        z: 0.0,
        rho: f64::NEG_INFINITY,
    };
    let scan = |r_lo: f64, r_hi: f64, z_lo: f64, z_hi: f64, best: &mut NlpPoint| {
        for ri in 0..=resolution {
            let r = r_lo + (r_hi - r_lo) * ri as f64 / resolution as f64;
            for zi in 0..=resolution {
                let z = z_lo + (z_hi - z_lo) * zi as f64 / resolution as f64;
                if r > randa_boundary(n, z) {
                    continue;
                }
                let rho = relaxed_objective(n, r, z);
                if rho > best.rho {
                    *best = NlpPoint { r, z, rho };
                }
            }
        }
    };

    scan(0.0, 1.0, 0.0, 1.0, &mut best);
    let mut half_width = 1.0;
    for _ in 0..refinement_rounds {
        half_width /= 10.0;
        let r_lo = (best.r - half_width).max(0.0);
        let r_hi = (best.r + half_width).min(1.0);
        let z_lo = (best.z - half_width).max(0.0);
        let z_hi = (best.z + half_width).min(1.0);
        scan(r_lo, r_hi, z_lo, z_hi, &mut best);
    }
    Ok(best)
}

/// Both root families, the chosen branch and the bound, for `n` from 3 to
/// `n_max`. Requires `n_max >= 6` so the table spans the branch crossover.
pub fn sequence_report(n_max: usize) -> Result<Vec<SequenceRow>, BoundsError> {
    if n_max < 6 {
        return Err(BoundsError::MachineCountTooSmall { n: n_max });
    }
    (3..=n_max)
        .map(|n| {
            let sol = analytic_bound(n)?;
            Ok(SequenceRow {
                n,
                a_n1: solve_an1(n)?,
                a_n2: solve_an2(n)?,
                branch: sol.branch,
                r: sol.r,
                rho: sol.rho,
            })
        })
        .collect()
}

/// Game parameters realizing the bound for `n` machines: the analytic
/// optimum, with `r` pulled inside the feasible region by `delta` when the
/// optimizer sits on the boundary (`n >= 6`). The bound is approached, not
/// attained, so certificates report `rho - O(delta)`.
pub fn game_params_with_delta(n: usize, delta: f64) -> Result<GameParams, BoundsError> {
    let sol = analytic_bound(n)?;
    let r = match sol.branch {
        Branch::An1 => sol.r,
        Branch::An2 => sol.r - delta,
    };
    GameParams::new(n, r, sol.a).map_err(BoundsError::from)
}

/// [`game_params_with_delta`] with the default boundary shift.
pub fn game_params(n: usize) -> Result<GameParams, BoundsError> {
    game_params_with_delta(n, DEFAULT_BOUNDARY_DELTA)
}
