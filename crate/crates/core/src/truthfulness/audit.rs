//! Deviation generators and the audit loop.
//!
//! Weak monotonicity quantifies over *all* single-machine deviations, so
//! any finite audit is a sound but incomplete violation detector. The
//! generators document exactly which slice gets tested: single-entry
//! nudges, whole-row scalings, the structured deviations of the adversary's
//! instance family, and seeded random rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instances::{BuildError, CostMatrix, ExtendedCost, GameParams, InstanceError, MatrixKind};
use crate::mechanisms::Mechanism;

use super::{wmon_value, ViolationRecord, WmonWitness};

/// One audited deviation: a base instance and a replacement row for one
/// machine.
#[derive(Clone, Debug)]
pub struct DeviationPair {
    pub label: String,
    pub base: CostMatrix,
    pub machine: usize,
    pub deviated_row: Vec<ExtendedCost>,
}

impl DeviationPair {
    pub fn deviated_matrix(&self) -> Result<CostMatrix, InstanceError> {
        self.base.with_row(self.machine, self.deviated_row.clone())
    }
}

/// The audit families exposed to callers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    SingleEntry,
    RowScaling,
    Structured,
    Random,
}

impl GeneratorKind {
    pub fn label(&self) -> &'static str {
        match self {
            GeneratorKind::SingleEntry => "single-entry",
            GeneratorKind::RowScaling => "row-scaling",
            GeneratorKind::Structured => "structured",
            GeneratorKind::Random => "random",
        }
    }
}

/// Multiplicative factors used by the entry and row generators.
pub const DEFAULT_FACTORS: [f64; 4] = [0.5, 0.9, 1.1, 2.0];

/// Every finite positive entry nudged by each factor, one pair per nudge.
pub fn single_entry_pairs(base: &CostMatrix, factors: &[f64]) -> Vec<DeviationPair> {
    let mut pairs = Vec::new();
    for i in 0..base.machines() {
        for j in 0..base.tasks() {
            let Some(v) = base.get(i, j).value() else {
                continue;
            };
            for &f in factors {
                if v * f == v {
                    continue;
                }
                let mut row = base.row(i).to_vec();
                row[j] = ExtendedCost::Finite(v * f);
                pairs.push(DeviationPair {
                    label: format!("entry ({i},{j}) x{f}"),
                    base: base.clone(),
                    machine: i,
                    deviated_row: row,
                });
            }
        }
    }
    pairs
}

/// Every machine's whole row scaled by each factor.
pub fn row_scaling_pairs(base: &CostMatrix, factors: &[f64]) -> Vec<DeviationPair> {
    let mut pairs = Vec::new();
    for i in 0..base.machines() {
        for &f in factors {
            if f == 1.0 {
                continue;
            }
            let row: Vec<ExtendedCost> = base
                .row(i)
                .iter()
                .map(|e| match e {
                    ExtendedCost::Finite(v) => ExtendedCost::Finite(v * f),
                    ExtendedCost::Unbounded => ExtendedCost::Unbounded,
                })
                .collect();
            pairs.push(DeviationPair {
                label: format!("row {i} x{f}"),
                base: base.clone(),
                machine: i,
                deviated_row: row,
            });
        }
    }
    pairs
}

/// The single-machine deviations the adversary itself plays, in both
/// directions, materialized with the params' surrogate.
pub fn structured_pairs(params: &GameParams) -> Result<Vec<DeviationPair>, BuildError> {
    use MatrixKind as K;
    let mut steps: Vec<(MatrixKind, MatrixKind, usize)> = Vec::new();
    steps.push((K::A0, K::A1, 0));
    steps.push((K::A1, K::B1, 0));
    for j in 2..params.n {
        steps.push((K::A1, K::B2 { j }, 0));
        for detour in [1, j] {
            steps.push((K::B2 { j }, K::C2 { j, detour }, detour));
        }
    }
    steps.push((K::A1, K::B3, 0));
    steps.push((K::B3, K::C3, 1));

    let mut pairs = Vec::new();
    for (from, to, machine) in steps {
        let base = crate::instances::build_matrix(from, params)?.materialize(params.big_m);
        let deviated = crate::instances::build_matrix(to, params)?.materialize(params.big_m);
        pairs.push(DeviationPair {
            label: format!("{}->{}", from.label(), to.label()),
            base: base.clone(),
            machine,
            deviated_row: deviated.row(machine).to_vec(),
        });
        pairs.push(DeviationPair {
            label: format!("{}->{}", to.label(), from.label()),
            base: deviated,
            machine,
            deviated_row: base.row(machine).to_vec(),
        });
    }
    Ok(pairs)
}

/// Seeded random instances with one random replacement row each.
pub fn random_pairs(n: usize, m: usize, count: usize, seed: u64) -> Vec<DeviationPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let between = Uniform::from(0.05..1.0);
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let entries: Vec<ExtendedCost> = (0..n * m)
            .map(|_| ExtendedCost::Finite(between.sample(&mut rng)))
            .collect();
        let base = CostMatrix::new(n, m, entries).expect("random entries are valid");
        let machine = rng.gen_range(0..n);
        let deviated_row: Vec<ExtendedCost> = (0..m)
            .map(|_| ExtendedCost::Finite(between.sample(&mut rng)))
            .collect();
        pairs.push(DeviationPair {
            label: format!("random #{k} machine {machine}"),
            base,
            machine,
            deviated_row,
        });
    }
    pairs
}

/// A pair the mechanism could not be scored on.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AuditFailure {
    pub pair_index: usize,
    pub label: String,
    pub error: String,
}

/// Result of running a mechanism over a deviation family.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AuditOutcome {
    pub pairs_tested: usize,
    pub witnesses: Vec<ViolationRecord>,
    /// Positive inner products at or below the tolerance.
    pub inconclusive: usize,
    pub failures: Vec<AuditFailure>,
}

impl AuditOutcome {
    pub fn is_clean(&self) -> bool {
        self.witnesses.is_empty() && self.failures.is_empty()
    }

    pub fn worst_value(&self) -> Option<f64> {
        self.witnesses
            .iter()
            .map(|w| w.witness.value)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Query the mechanism on both sides of every pair and collect all
/// monotonicity witnesses above `tol`, in generator order.
///
/// Infeasible or failing oracle responses are reported as failures, not as
/// witnesses.
pub fn audit_mechanism(
    mech: &dyn Mechanism,
    pairs: &[DeviationPair],
    tol: f64,
) -> AuditOutcome {
    let mut outcome = AuditOutcome {
        pairs_tested: pairs.len(),
        witnesses: Vec::new(),
        inconclusive: 0,
        failures: Vec::new(),
    };

    for (idx, pair) in pairs.iter().enumerate() {
        let fail = |error: String, outcome: &mut AuditOutcome| {
            outcome.failures.push(AuditFailure {
                pair_index: idx,
                label: pair.label.clone(),
                error,
            });
        };

        let deviated = match pair.deviated_matrix() {
            Ok(t) => t,
            Err(e) => {
                fail(format!("bad deviation: {e}"), &mut outcome);
                continue;
            }
        };
        let before = match checked_allocation(mech, &pair.base) {
            Ok(a) => a,
            Err(e) => {
                fail(format!("base query: {e}"), &mut outcome);
                continue;
            }
        };
        let after = match checked_allocation(mech, &deviated) {
            Ok(a) => a,
            Err(e) => {
                fail(format!("deviated query: {e}"), &mut outcome);
                continue;
            }
        };

        let alloc_before = before.row_mask(pair.machine);
        let alloc_after = after.row_mask(pair.machine);
        let value = match wmon_value(
            &alloc_before,
            &alloc_after,
            pair.base.row(pair.machine),
            &pair.deviated_row,
        ) {
            Ok(v) => v,
            Err(e) => {
                fail(format!("inner product: {e}"), &mut outcome);
                continue;
            }
        };

        if value > tol {
            let witness = WmonWitness {
                machine: pair.machine,
                costs_before: pair.base.row(pair.machine).to_vec(),
                costs_after: pair.deviated_row.clone(),
                alloc_before,
                alloc_after,
                value,
            };
            outcome.witnesses.push(ViolationRecord {
                label: pair.label.clone(),
                base: pair.base.clone(),
                deviated,
                witness,
            });
        } else if value > 0.0 {
            outcome.inconclusive += 1;
        }
    }
    outcome
}

fn checked_allocation(
    mech: &dyn Mechanism,
    costs: &CostMatrix,
) -> Result<crate::instances::Allocation, String> {
    let alloc = mech.allocate(costs).map_err(|e| format!("{e}"))?;
    if alloc.machines() != costs.machines() || alloc.tasks() != costs.tasks() {
        return Err(format!(
            "infeasible allocation: got {}x{} for a {}x{} instance",
            alloc.machines(),
            alloc.tasks(),
            costs.machines(),
            costs.tasks()
        ));
    }
    Ok(alloc)
}
