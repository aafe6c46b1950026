//! Mechanism oracles: the interface the adversary and auditor query, plus
//! reference implementations.
//!
//! Oracles are pure functions of the reported matrix; no state may persist
//! between queries. Callers substitute a finite surrogate for unbounded
//! entries before querying (see [`CostMatrix::materialize`]), mirroring the
//! fact that real mechanisms take real inputs.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::instances::{Allocation, CostMatrix, ExtendedCost, InstanceError, PaymentVector};

/// A deterministic allocation rule with optional payments.
pub trait Mechanism {
    fn name(&self) -> &str;

    /// Human-readable statement of the tie-breaking policy.
    fn tie_break(&self) -> &'static str {
        "none"
    }

    fn allocate(&self, costs: &CostMatrix) -> Result<Allocation, MechanismError>;

    fn payments(&self, costs: &CostMatrix) -> Option<PaymentVector> {
        let _ = costs;
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MechanismError {
    /// A scripted oracle was asked about an instance it has no line for.
    MissingScript { digest: String },
    Instance(InstanceError),
}

impl fmt::Display for MechanismError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismError::MissingScript { digest } => {
                write!(f, "no scripted response for instance {digest}")
            }
            MechanismError::Instance(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MechanismError {}

impl From<InstanceError> for MechanismError {
    fn from(e: InstanceError) -> Self {
        MechanismError::Instance(e)
    }
}

/// Digest of an instance, used to address scripted responses.
///
/// The canonical form rounds every entry to 12 significant digits, so
/// instances differing only by the pinning perturbation hash differently
/// while re-serialized copies hash identically.
pub fn instance_digest(costs: &CostMatrix) -> String {
    let mut canonical = String::new();
    canonical.push_str("{\"n\":");
    push_usize(&mut canonical, costs.machines());
    canonical.push_str(",\"m\":");
    push_usize(&mut canonical, costs.tasks());
    canonical.push_str(",\"entries\":[");
    let mut first = true;
    for i in 0..costs.machines() {
        for e in costs.row(i) {
            if !first {
                canonical.push(',');
            }
            first = false;
            match e {
                ExtendedCost::Finite(v) => {
                    canonical.push_str(&alloc::format!("{v:.11e}"));
                }
                ExtendedCost::Unbounded => canonical.push_str("\"inf\""),
            }
        }
    }
    canonical.push_str("]}");

    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let bytes = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in bytes {
        hex.push_str(&alloc::format!("{b:02x}"));
    }
    hex
}

fn push_usize(out: &mut String, v: usize) {
    out.push_str(&alloc::format!("{v}"));
}

/// Tie-breaking policy for per-task minimum selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    LowestIndex,
    HighestIndex,
    /// Prefer machine 1 among tied minima, then the lowest index.
    PreferSecond,
}

impl TieBreak {
    fn pick(&self, tied: &[usize]) -> usize {
        match self {
            TieBreak::LowestIndex => tied[0],
            TieBreak::HighestIndex => *tied.last().expect("at least one candidate"),
            TieBreak::PreferSecond => {
                if tied.contains(&1) {
                    1
                } else {
                    tied[0]
                }
            }
        }
    }

    fn describe(&self) -> &'static str {
        match self {
            TieBreak::LowestIndex => "lowest-index",
            TieBreak::HighestIndex => "highest-index",
            TieBreak::PreferSecond => "prefer-machine-2",
        }
    }
}

/// Assigns each task independently to the machine that performs it
/// fastest, paying the second-lowest report per task. Truthful for any
/// fixed tie-break.
pub struct Vcg {
    tie_break: TieBreak,
    name: String,
}

pub fn vcg(tie_break: TieBreak) -> Vcg {
    let name = alloc::format!("vcg-{}", tie_break.describe());
    Vcg { tie_break, name }
}

impl Mechanism for Vcg {
    fn name(&self) -> &str {
        &self.name
    }

    fn tie_break(&self) -> &'static str {
        self.tie_break.describe()
    }

    fn allocate(&self, costs: &CostMatrix) -> Result<Allocation, MechanismError> {
        let n = costs.machines();
        let mut assignment = Vec::with_capacity(costs.tasks());
        for j in 0..costs.tasks() {
            let mut min = ExtendedCost::Unbounded;
            for i in 0..n {
                let c = costs.get(i, j);
                if c < min {
                    min = c;
                }
            }
            let tied: Vec<usize> = (0..n).filter(|&i| costs.get(i, j) == min).collect();
            assignment.push(self.tie_break.pick(&tied));
        }
        Allocation::new(n, assignment).map_err(MechanismError::from)
    }

    fn payments(&self, costs: &CostMatrix) -> Option<PaymentVector> {
        if !costs.is_all_finite() || costs.machines() < 2 {
            return None;
        }
        let alloc = self.allocate(costs).ok()?;
        let mut pay = alloc::vec![0.0f64; costs.machines()];
        for j in 0..costs.tasks() {
            let mut values: Vec<f64> = costs.column(j).filter_map(|e| e.value()).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
            pay[alloc.machine_for(j)] += values[1];
        }
        Some(PaymentVector::new(pay))
    }
}

/// Assigns tasks in index order to the machine that minimizes the
/// resulting load, ties to the lowest index. A natural rule that is not
/// weakly monotone; it serves as the non-truthful foil in tests and audits.
pub struct GreedyLoad;

pub fn greedy_load() -> GreedyLoad {
    GreedyLoad
}

impl Mechanism for GreedyLoad {
    fn name(&self) -> &str {
        "greedy-load"
    }

    fn tie_break(&self) -> &'static str {
        "lowest-index"
    }

    fn allocate(&self, costs: &CostMatrix) -> Result<Allocation, MechanismError> {
        let n = costs.machines();
        let mut loads = alloc::vec![ExtendedCost::ZERO; n];
        let mut assignment = Vec::with_capacity(costs.tasks());
        for j in 0..costs.tasks() {
            let mut pick = 0usize;
            let mut pick_load = ExtendedCost::Unbounded;
            for i in 0..n {
                let load = loads[i] + costs.get(i, j);
                if load < pick_load {
                    pick = i;
                    pick_load = load;
                }
            }
            loads[pick] = pick_load;
            assignment.push(pick);
        }
        Allocation::new(n, assignment).map_err(MechanismError::from)
    }
}

/// Replays a fixed map from instance digests to allocations; used to drive
/// the adversary down chosen branches in tests and from script files.
pub struct Scripted {
    name: String,
    responses: BTreeMap<String, Allocation>,
}

pub fn scripted(name: &str, responses: BTreeMap<String, Allocation>) -> Scripted {
    Scripted {
        name: name.to_owned(),
        responses,
    }
}

impl Scripted {
    pub fn responses(&self) -> &BTreeMap<String, Allocation> {
        &self.responses
    }
}

impl Mechanism for Scripted {
    fn name(&self) -> &str {
        &self.name
    }

    fn tie_break(&self) -> &'static str {
        "scripted"
    }

    fn allocate(&self, costs: &CostMatrix) -> Result<Allocation, MechanismError> {
        let digest = instance_digest(costs);
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(MechanismError::MissingScript { digest })
    }
}

pub mod scripts {
    //! Helpers for building scripted oracles that walk the adversary's
    //! game tree: they compute the digests of the exact instances the game
    //! will pose, including relabeling and surrogate substitution.

    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    use super::{instance_digest, scripted, Scripted};
    use crate::adversary::Relabeling;
    use crate::instances::{build_matrix, Allocation, BuildError, GameParams, MatrixKind};

    /// One planned response, in game (post-relabeling) labels.
    #[derive(Clone, Debug)]
    pub struct PlannedStep {
        pub kind: MatrixKind,
        /// Machine index per task.
        pub assignment: Vec<usize>,
    }

    impl PlannedStep {
        pub fn new(kind: MatrixKind, assignment: Vec<usize>) -> Self {
            PlannedStep { kind, assignment }
        }
    }

    /// Build a scripted oracle answering the planned steps. With `swapped`
    /// set, the oracle's physical behavior hands the first proper task to
    /// machine 1 on the opening query, exercising the relabeling path.
    pub fn scripted_game(
        name: &str,
        params: &GameParams,
        swapped: bool,
        steps: &[PlannedStep],
    ) -> Result<Scripted, BuildError> {
        let relabeling = Relabeling::from_swapped(swapped);
        let mut responses = BTreeMap::new();
        for step in steps {
            let logical = build_matrix(step.kind, params)?;
            let physical = relabeling
                .to_physical(&logical)
                .materialize(params.big_m);
            let digest = instance_digest(&physical);
            let allocation = Allocation::new(params.n, step.assignment.clone())
                .map_err(BuildError::Instance)?;
            responses.insert(digest, relabeling.to_physical_allocation(&allocation));
        }
        Ok(scripted(name, responses))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fin(v: f64) -> ExtendedCost {
        ExtendedCost::Finite(v)
    }

    #[test]
    fn vcg_single_column_second_price() {
        let t = CostMatrix::from_rows(vec![vec![fin(1.0)], vec![fin(2.0)], vec![fin(3.0)]])
            .unwrap();
        let mech = vcg(TieBreak::LowestIndex);
        let a = mech.allocate(&t).unwrap();
        assert_eq!(a.machine_for(0), 0);
        let p = mech.payments(&t).unwrap();
        assert_eq!(p.amount(0), 2.0);
        assert_eq!(p.amount(1), 0.0);
    }

    #[test]
    fn vcg_tie_breaking_policies() {
        let t = CostMatrix::from_rows(vec![
            vec![fin(1.0)],
            vec![fin(1.0)],
            vec![fin(1.0)],
        ])
        .unwrap();
        assert_eq!(vcg(TieBreak::LowestIndex).allocate(&t).unwrap().machine_for(0), 0);
        assert_eq!(vcg(TieBreak::HighestIndex).allocate(&t).unwrap().machine_for(0), 2);
        assert_eq!(vcg(TieBreak::PreferSecond).allocate(&t).unwrap().machine_for(0), 1);
    }

    #[test]
    fn greedy_splits_identical_tasks() {
        let t = CostMatrix::from_rows(vec![
            vec![fin(1.0), fin(1.0)],
            vec![fin(1.0), fin(1.0)],
        ])
        .unwrap();
        let a = greedy_load().allocate(&t).unwrap();
        assert_eq!(a.machine_for(0), 0);
        assert_eq!(a.machine_for(1), 1);
    }

    #[test]
    fn digest_distinguishes_small_perturbations() {
        let base = CostMatrix::from_rows(vec![vec![fin(0.5), fin(1.0)]]).unwrap();
        let nudged = CostMatrix::from_rows(vec![vec![fin(0.5 - 1e-7), fin(1.0)]]).unwrap();
        assert_ne!(instance_digest(&base), instance_digest(&nudged));
        assert_eq!(instance_digest(&base), instance_digest(&base.clone()));
    }

    #[test]
    fn digest_collapses_sub_rounding_noise() {
        let x = 0.123456789012345;
        let base = CostMatrix::from_rows(vec![vec![fin(x)]]).unwrap();
        let noisy = CostMatrix::from_rows(vec![vec![fin(x + 1e-16)]]).unwrap();
        assert_eq!(instance_digest(&base), instance_digest(&noisy));
    }

    #[test]
    fn scripted_missing_digest_errors() {
        let t = CostMatrix::from_rows(vec![vec![fin(1.0)]]).unwrap();
        let mech = scripted("empty", BTreeMap::new());
        assert!(matches!(
            mech.allocate(&t),
            Err(MechanismError::MissingScript { .. })
        ));
    }

    #[test]
    fn scripted_replays_responses() {
        let t = CostMatrix::from_rows(vec![vec![fin(1.0), fin(2.0)], vec![fin(3.0), fin(0.5)]])
            .unwrap();
        let want = Allocation::new(2, vec![1, 0]).unwrap();
        let mut responses = BTreeMap::new();
        responses.insert(instance_digest(&t), want.clone());
        let mech = scripted("replay", responses);
        assert_eq!(mech.allocate(&t).unwrap(), want);
    }
}
