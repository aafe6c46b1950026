//! Weak-monotonicity auditing.
//!
//! A truthful mechanism must satisfy, for every machine `i` and every
//! single-machine deviation `t_i -> t'_i`,
//!
//! ```text
//! (a_i - a'_i) . (t_i - t'_i) <= 0
//! ```
//!
//! A strictly positive value is therefore a checkable certificate that the
//! mechanism cannot be truthful. This module computes that inner product,
//! its restriction to a task partition `S / T / V` (allocation pinned on
//! `S`, costs unchanged on `V`), and the resulting persistence check: when
//! costs strictly drop on a machine's allocated tasks in `T` and strictly
//! rise on her unallocated ones, her allocation on `T` may not move at all.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::instances::{CostMatrix, ExtendedCost};

mod audit;

pub use audit::{
    audit_mechanism, random_pairs, row_scaling_pairs, single_entry_pairs, structured_pairs,
    AuditFailure, AuditOutcome, DeviationPair, GeneratorKind, DEFAULT_FACTORS,
};

/// Default slack below which a positive inner product is reported as
/// inconclusive rather than as a violation; geometric-scale arithmetic in
/// `f64` needs the headroom.
pub const DEFAULT_WITNESS_TOL: f64 = 1e-9;

/// Disjoint split of the task set into `s` (allocation pinned), `t` (the
/// tested tasks) and `v` (costs unchanged).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPartition {
    m: usize,
    s: Vec<usize>,
    t: Vec<usize>,
    v: Vec<usize>,
}

impl TaskPartition {
    pub fn new(
        m: usize,
        s: Vec<usize>,
        t: Vec<usize>,
        v: Vec<usize>,
    ) -> Result<Self, WmonError> {
        let mut seen = alloc::vec![false; m];
        for &j in s.iter().chain(&t).chain(&v) {
            if j >= m || seen[j] {
                return Err(WmonError::InvalidPartition { task: j });
            }
            seen[j] = true;
        }
        if seen.iter().any(|&b| !b) {
            return Err(WmonError::IncompletePartition);
        }
        Ok(TaskPartition { m, s, t, v })
    }

    pub fn tasks(&self) -> usize {
        self.m
    }

    pub fn pinned(&self) -> &[usize] {
        &self.s
    }

    pub fn tested(&self) -> &[usize] {
        &self.t
    }

    pub fn unchanged(&self) -> &[usize] {
        &self.v
    }
}

/// One weak-monotonicity evaluation for a single machine: the two reported
/// rows, the two allocation rows, and the inner product of their
/// differences. A strictly positive `value` refutes truthfulness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmonWitness {
    pub machine: usize,
    pub costs_before: Vec<ExtendedCost>,
    pub costs_after: Vec<ExtendedCost>,
    pub alloc_before: Vec<bool>,
    pub alloc_after: Vec<bool>,
    pub value: f64,
}

impl WmonWitness {
    pub fn from_rows(
        machine: usize,
        alloc_before: Vec<bool>,
        alloc_after: Vec<bool>,
        costs_before: Vec<ExtendedCost>,
        costs_after: Vec<ExtendedCost>,
    ) -> Result<Self, WmonError> {
        let value = wmon_value(&alloc_before, &alloc_after, &costs_before, &costs_after)?;
        Ok(WmonWitness {
            machine,
            costs_before,
            costs_after,
            alloc_before,
            alloc_after,
            value,
        })
    }
}

/// A witness embedded in reports and certificates, together with the full
/// matrices the two rows came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub label: String,
    pub base: CostMatrix,
    pub deviated: CostMatrix,
    pub witness: WmonWitness,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WmonError {
    LengthMismatch,
    /// A task switched between finite and unbounded cost while its
    /// allocation moved; the inner product is unbounded.
    UnboundedViolation { task: usize },
    InvalidPartition { task: usize },
    IncompletePartition,
    /// A precondition of the restricted check does not hold.
    Precondition { task: usize, reason: &'static str },
}

impl fmt::Display for WmonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WmonError::LengthMismatch => write!(f, "rows have differing lengths"),
            WmonError::UnboundedViolation { task } => write!(
                f,
                "task {task}: unbounded cost change with a moved allocation"
            ),
            WmonError::InvalidPartition { task } => {
                write!(f, "task {task} is out of range or listed twice")
            }
            WmonError::IncompletePartition => write!(f, "partition does not cover all tasks"),
            WmonError::Precondition { task, reason } => {
                write!(f, "precondition failed at task {task}: {reason}")
            }
        }
    }
}

impl core::error::Error for WmonError {}

fn term(
    task: usize,
    before: bool,
    after: bool,
    t_before: ExtendedCost,
    t_after: ExtendedCost,
) -> Result<f64, WmonError> {
    match (t_before, t_after) {
        (ExtendedCost::Finite(x), ExtendedCost::Finite(y)) => {
            let da = (before as i8 - after as i8) as f64;
            Ok(da * (x - y))
        }
        // Both unbounded: the difference carries no information.
        (ExtendedCost::Unbounded, ExtendedCost::Unbounded) => Ok(0.0),
        // One side unbounded: fine while the allocation stays put, an
        // unbounded violation otherwise.
        _ if before == after => Ok(0.0),
        _ => Err(WmonError::UnboundedViolation { task }),
    }
}

/// The weak-monotonicity inner product `(a - a') . (t - t')` for one
/// machine's rows.
pub fn wmon_value(
    alloc_before: &[bool],
    alloc_after: &[bool],
    costs_before: &[ExtendedCost],
    costs_after: &[ExtendedCost],
) -> Result<f64, WmonError> {
    if alloc_before.len() != alloc_after.len()
        || costs_before.len() != costs_after.len()
        || alloc_before.len() != costs_before.len()
    {
        return Err(WmonError::LengthMismatch);
    }
    let mut sum = 0.0;
    for j in 0..alloc_before.len() {
        sum += term(
            j,
            alloc_before[j],
            alloc_after[j],
            costs_before[j],
            costs_after[j],
        )?;
    }
    Ok(sum)
}

/// The inner product restricted to `T`, after checking that costs are
/// unchanged on `V` and the allocation is unchanged on `S`. For a truthful
/// mechanism the result is nonpositive.
pub fn restricted_wmon_value(
    partition: &TaskPartition,
    alloc_before: &[bool],
    alloc_after: &[bool],
    costs_before: &[ExtendedCost],
    costs_after: &[ExtendedCost],
) -> Result<f64, WmonError> {
    check_lengths(partition, alloc_before, alloc_after, costs_before, costs_after)?;
    check_sv_preconditions(partition, alloc_before, alloc_after, costs_before, costs_after)?;
    let mut sum = 0.0;
    for &j in partition.tested() {
        sum += term(
            j,
            alloc_before[j],
            alloc_after[j],
            costs_before[j],
            costs_after[j],
        )?;
    }
    Ok(sum)
}

/// Outcome of [`check_persistence`].
#[derive(Clone, Debug, PartialEq)]
pub enum Persistence {
    Holds,
    /// The allocation moved on `T` even though every moved task makes the
    /// restricted inner product strictly positive.
    Violated { changed: Vec<usize>, value: f64 },
}

/// Verify that a machine's allocation on `T` is unchanged, given that her
/// costs strictly decreased on allocated tasks in `T` and strictly
/// increased on unallocated ones. Any change is returned as a violation
/// whose restricted inner product is strictly positive.
pub fn check_persistence(
    partition: &TaskPartition,
    alloc_before: &[bool],
    alloc_after: &[bool],
    costs_before: &[ExtendedCost],
    costs_after: &[ExtendedCost],
) -> Result<Persistence, WmonError> {
    check_lengths(partition, alloc_before, alloc_after, costs_before, costs_after)?;
    check_sv_preconditions(partition, alloc_before, alloc_after, costs_before, costs_after)?;

    for &j in partition.tested() {
        let (before, after) = match (costs_before[j], costs_after[j]) {
            (ExtendedCost::Finite(x), ExtendedCost::Finite(y)) => (x, y),
            _ => {
                return Err(WmonError::Precondition {
                    task: j,
                    reason: "tested tasks must have finite costs on both sides",
                })
            }
        };
        if alloc_before[j] && !(after < before) {
            return Err(WmonError::Precondition {
                task: j,
                reason: "allocated task must get strictly cheaper",
            });
        }
        if !alloc_before[j] && !(after > before) {
            return Err(WmonError::Precondition {
                task: j,
                reason: "unallocated task must get strictly more expensive",
            });
        }
    }

    let changed: Vec<usize> = partition
        .tested()
        .iter()
        .copied()
        .filter(|&j| alloc_before[j] != alloc_after[j])
        .collect();
    if changed.is_empty() {
        return Ok(Persistence::Holds);
    }
    let value = restricted_wmon_value(
        partition,
        alloc_before,
        alloc_after,
        costs_before,
        costs_after,
    )?;
    Ok(Persistence::Violated { changed, value })
}

fn check_lengths(
    partition: &TaskPartition,
    alloc_before: &[bool],
    alloc_after: &[bool],
    costs_before: &[ExtendedCost],
    costs_after: &[ExtendedCost],
) -> Result<(), WmonError> {
    if [
        alloc_before.len(),
        alloc_after.len(),
        costs_before.len(),
        costs_after.len(),
    ]
    .iter()
    .any(|&l| l != partition.tasks())
    {
        return Err(WmonError::LengthMismatch);
    }
    Ok(())
}

fn check_sv_preconditions(
    partition: &TaskPartition,
    alloc_before: &[bool],
    alloc_after: &[bool],
    costs_before: &[ExtendedCost],
    costs_after: &[ExtendedCost],
) -> Result<(), WmonError> {
    for &j in partition.unchanged() {
        if costs_before[j] != costs_after[j] {
            return Err(WmonError::Precondition {
                task: j,
                reason: "costs changed on V",
            });
        }
    }
    for &j in partition.pinned() {
        if alloc_before[j] != alloc_after[j] {
            return Err(WmonError::Precondition {
                task: j,
                reason: "allocation changed on S",
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fin(v: f64) -> ExtendedCost {
        ExtendedCost::Finite(v)
    }

    #[test]
    fn identical_rows_give_zero() {
        let a = vec![true, false];
        let t = vec![fin(1.0), fin(2.0)];
        assert_eq!(wmon_value(&a, &a, &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn swap_example_expands_to_ainv_minus_r() {
        // a = (1,0), a' = (0,1), t = (1,1), t' = (r, 1/a):
        // value = (1-r) - (1 - 1/a) = 1/a - r.
        let r = 0.3;
        let a_inv = 0.5;
        let value = wmon_value(
            &[true, false],
            &[false, true],
            &[fin(1.0), fin(1.0)],
            &[fin(r), fin(a_inv)],
        )
        .unwrap();
        assert!((value - (a_inv - r)).abs() < 1e-15);
    }

    #[test]
    fn both_unbounded_contributes_zero() {
        let value = wmon_value(
            &[true, true],
            &[false, false],
            &[ExtendedCost::Unbounded, fin(1.0)],
            &[ExtendedCost::Unbounded, fin(0.5)],
        )
        .unwrap();
        assert!((value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unbounded_flip_with_moved_allocation_errors() {
        let err = wmon_value(
            &[true],
            &[false],
            &[ExtendedCost::Unbounded],
            &[fin(1.0)],
        )
        .unwrap_err();
        assert_eq!(err, WmonError::UnboundedViolation { task: 0 });
    }

    #[test]
    fn antisymmetric_under_swapping_sides() {
        let a = [true, false, true];
        let b = [false, false, true];
        let t = [fin(1.0), fin(0.25), fin(2.0)];
        let u = [fin(0.5), fin(0.75), fin(1.5)];
        let v1 = wmon_value(&a, &b, &t, &u).unwrap();
        let v2 = wmon_value(&b, &a, &u, &t).unwrap();
        assert!((v1 - v2).abs() < 1e-15);
    }

    #[test]
    fn empty_tested_set_gives_zero() {
        let p = TaskPartition::new(2, vec![0], vec![], vec![1]).unwrap();
        let a = [true, false];
        let t = [fin(1.0), fin(2.0)];
        assert_eq!(restricted_wmon_value(&p, &a, &a, &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn partition_must_cover_and_not_overlap() {
        assert!(matches!(
            TaskPartition::new(3, vec![0], vec![0], vec![1, 2]),
            Err(WmonError::InvalidPartition { task: 0 })
        ));
        assert!(matches!(
            TaskPartition::new(3, vec![0], vec![1], vec![]),
            Err(WmonError::IncompletePartition)
        ));
    }

    #[test]
    fn restricted_rejects_changed_v_costs() {
        let p = TaskPartition::new(2, vec![], vec![0], vec![1]).unwrap();
        let a = [true, false];
        let err = restricted_wmon_value(
            &p,
            &a,
            &a,
            &[fin(1.0), fin(2.0)],
            &[fin(0.5), fin(2.5)],
        )
        .unwrap_err();
        assert!(matches!(err, WmonError::Precondition { task: 1, .. }));
    }

    #[test]
    fn persistence_holds_when_allocation_stays() {
        let p = TaskPartition::new(3, vec![0], vec![1, 2], vec![]).unwrap();
        let before = [true, true, false];
        let t_before = [fin(1.0), fin(1.0), fin(1.0)];
        let t_after = [fin(1.0), fin(0.9), fin(1.1)];
        assert_eq!(
            check_persistence(&p, &before, &before, &t_before, &t_after).unwrap(),
            Persistence::Holds
        );
    }

    #[test]
    fn dropping_a_cheaper_task_is_a_positive_violation() {
        // 2 tasks, machine drops task 0 after its cost fell by 0.4.
        let p = TaskPartition::new(2, vec![], vec![0], vec![1]).unwrap();
        let outcome = check_persistence(
            &p,
            &[true, false],
            &[false, false],
            &[fin(1.0), fin(2.0)],
            &[fin(0.6), fin(2.0)],
        )
        .unwrap();
        match outcome {
            Persistence::Violated { changed, value } => {
                assert_eq!(changed, vec![0]);
                assert!((value - 0.4).abs() < 1e-15);
            }
            Persistence::Holds => panic!("expected a violation"),
        }
    }

    #[test]
    fn persistence_rejects_non_strict_changes() {
        let p = TaskPartition::new(1, vec![], vec![0], vec![]).unwrap();
        let err = check_persistence(&p, &[true], &[true], &[fin(1.0)], &[fin(1.0)]).unwrap_err();
        assert!(matches!(err, WmonError::Precondition { task: 0, .. }));
    }

    #[test]
    fn decomposition_matches_full_inner_product() {
        // S/T/V split of the full sum: with valid preconditions the S and V
        // terms vanish, so the T-restricted value equals the full value.
        let p = TaskPartition::new(4, vec![0], vec![1, 2], vec![3]).unwrap();
        let a_before = [true, true, false, true];
        let a_after = [true, false, true, false];
        let t_before = [fin(2.0), fin(1.0), fin(0.5), fin(3.0)];
        let t_after = [fin(1.5), fin(0.8), fin(0.7), fin(3.0)];
        let full = wmon_value(&a_before, &a_after, &t_before, &t_after).unwrap();
        let restricted =
            restricted_wmon_value(&p, &a_before, &a_after, &t_before, &t_after).unwrap();
        let s_term = (a_before[0] as i8 - a_after[0] as i8) as f64 * (2.0 - 1.5);
        let v_term = 0.0;
        assert!((restricted + s_term + v_term - full).abs() < 1e-15);
    }
}
