//! The adversarial lower-bound game.
//!
//! The adversary queries a mechanism with a short, adaptive sequence of
//! instances. The opening pair `A0 -> A1` forces a finite-ratio mechanism
//! to leave at least one of the first two proper tasks with machine 0;
//! depending on which proper tasks machine 0 holds after the discount, the
//! game steers into one of three endgames (`B1`, `B2 -> C2`, `B3 -> C3`),
//! each of which pins the earlier allocation via strict perturbations and
//! ends in a makespan at least `rho(n)` times the optimum. A mechanism can
//! only escape by breaking weak monotonicity or by accepting a surrogate
//! "unbounded" task; both escapes are themselves certified.
//!
//! Every run produces a [`Certificate`] that [`verify_certificate`] can
//! replay without access to the mechanism.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::instances::{
    build_matrix, makespan, optimal_makespan, proper_column, Allocation, BuildError, CostMatrix,
    ExtendedCost, GameParams, InstanceError, MatrixKind, ParamsError, DEFAULT_NODE_BUDGET,
};
use crate::mechanisms::Mechanism;
use crate::truthfulness::{
    check_persistence, Persistence, TaskPartition, ViolationRecord, WmonError, WmonWitness,
};

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;

/// Machines 0 and 1 price the baseline identically, so a mechanism may hand
/// the pivotal proper task to either. Rather than assuming the symmetric
/// choice, the game conjugates every later query by the swap of machines 0
/// and 1 (and of their dummy tasks) when needed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    swapped: bool,
}

impl Relabeling {
    pub fn identity() -> Self {
        Relabeling { swapped: false }
    }

    pub fn swapped() -> Self {
        Relabeling { swapped: true }
    }

    pub fn from_swapped(swapped: bool) -> Self {
        Relabeling { swapped }
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    fn machine(&self, i: usize) -> usize {
        match (self.swapped, i) {
            (true, 0) => 1,
            (true, 1) => 0,
            _ => i,
        }
    }

    /// Dummy tasks follow their owners; proper columns are shared.
    fn task(&self, j: usize) -> usize {
        match (self.swapped, j) {
            (true, 0) => 1,
            (true, 1) => 0,
            _ => j,
        }
    }

    /// The matrix as presented to the mechanism.
    pub fn to_physical(&self, logical: &CostMatrix) -> CostMatrix {
        let n = logical.machines();
        let m = logical.tasks();
        let entries: Vec<ExtendedCost> = (0..n * m)
            .map(|idx| logical.get(self.machine(idx / m), self.task(idx % m)))
            .collect();
        CostMatrix::new(n, m, entries).expect("relabeling permutes a valid matrix")
    }

    /// A mechanism response mapped back into the game's labeling. The swap
    /// is an involution, so the same map also turns logical allocations
    /// into physical ones.
    pub fn to_logical_allocation(&self, physical: &Allocation) -> Allocation {
        let assignment: Vec<usize> = (0..physical.tasks())
            .map(|j| self.machine(physical.machine_for(self.task(j))))
            .collect();
        Allocation::new(physical.machines(), assignment)
            .expect("relabeling permutes a valid allocation")
    }

    pub fn to_physical_allocation(&self, logical: &Allocation) -> Allocation {
        self.to_logical_allocation(logical)
    }
}

/// One query of the game, in the game's (post-relabeling) machine labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: MatrixKind,
    pub matrix: CostMatrix,
    /// Digest of the materialized instance the mechanism actually saw.
    pub instance_digest: String,
    pub allocation: Allocation,
    pub check: String,
    /// Exact optimal makespan of `matrix`, where the game uses one.
    pub analytic_opt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    /// The mechanism kept the forced allocation; its makespan on the final
    /// instance is at least `value` times the optimum.
    RatioAtLeast {
        value: f64,
        /// The same bound without the perturbation losses, in exact
        /// parameters.
        ideal_value: f64,
        formula: String,
    },
    /// The mechanism moved an allocation it was not allowed to move.
    TruthfulnessViolation { violation: ViolationRecord },
    /// The mechanism accepted a task priced at the unbounded surrogate.
    UnboundedRatio {
        task: usize,
        machine: usize,
        implied_ratio: f64,
    },
}

/// Full record of one game: parameters, the query trace, and the outcome.
/// Self-contained; see [`verify_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub mechanism: String,
    pub params: GameParams,
    pub relabeled: bool,
    pub case_taken: Option<u8>,
    pub detour_j: Option<usize>,
    pub detour_machine: Option<usize>,
    pub trace: Vec<TraceStep>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GameError {
    Params(ParamsError),
    Build(BuildError),
    Oracle { kind: MatrixKind, message: String },
    Infeasible { kind: MatrixKind, detail: String },
    Search(InstanceError),
    Internal { detail: String },
}

impl core::fmt::Display for GameError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GameError::Params(e) => write!(f, "{e}"),
            GameError::Build(e) => write!(f, "{e}"),
            GameError::Oracle { kind, message } => {
                write!(f, "oracle failed on {}: {message}", kind.label())
            }
            GameError::Infeasible { kind, detail } => {
                write!(f, "infeasible response on {}: {detail}", kind.label())
            }
            GameError::Search(e) => write!(f, "{e}"),
            GameError::Internal { detail } => write!(f, "internal invariant breach: {detail}"),
        }
    }
}

impl core::error::Error for GameError {}

impl From<ParamsError> for GameError {
    fn from(e: ParamsError) -> Self {
        GameError::Params(e)
    }
}

impl From<BuildError> for GameError {
    fn from(e: BuildError) -> Self {
        GameError::Build(e)
    }
}

/// The bound the game certifies at these parameters:
/// `min { 1 + r + 1/a + ... + 1/a^(n-2), 1 + 1/r, 1 + a }`.
pub fn guaranteed_ratio(params: &GameParams) -> f64 {
    let sum = 1.0 + params.proper_row_sum();
    let r_inv = 1.0 + 1.0 / params.r;
    let a = 1.0 + params.a;
    sum.min(r_inv).min(a)
}

/// Exact optimal makespan of a family member, including the perturbation
/// terms, for the kinds whose optimum the game divides by.
pub fn analytic_opt(kind: MatrixKind, params: &GameParams) -> Option<f64> {
    match kind {
        MatrixKind::B1 => Some(1.0),
        MatrixKind::B2 { j } | MatrixKind::C2 { j, .. } => {
            Some(params.inv_power(j - 1) + params.epsilon)
        }
        MatrixKind::C3 => Some(params.inv_power(1).max(params.r + params.epsilon)),
        _ => None,
    }
}

fn ideal_ratio(kind: MatrixKind, params: &GameParams) -> (f64, String) {
    match kind {
        MatrixKind::B1 => (
            1.0 + params.proper_row_sum(),
            "1 + r + 1/a + ... + 1/a^(n-2)".to_string(),
        ),
        MatrixKind::C2 { .. } => (1.0 + params.a, "1 + a".to_string()),
        MatrixKind::C3 => (
            1.0 + params.a.min(1.0 / params.r),
            "1 + min{1/r, a}".to_string(),
        ),
        _ => (f64::NAN, String::new()),
    }
}

/// Play the game against `mech` and certify the outcome.
pub fn run_game(mech: &dyn Mechanism, params: &GameParams) -> Result<Certificate, GameError> {
    run_game_with_budget(mech, params, DEFAULT_NODE_BUDGET)
}

/// [`run_game`] with an explicit node budget for the exact-optimum searches
/// backing unbounded-ratio outcomes.
pub fn run_game_with_budget(
    mech: &dyn Mechanism,
    params: &GameParams,
    node_budget: u64,
) -> Result<Certificate, GameError> {
    params.validate()?;
    let game = Game {
        mech,
        params: *params,
        relabeling: Relabeling::identity(),
        trace: Vec::new(),
        node_budget,
    };
    game.play()
}

struct Game<'a> {
    mech: &'a dyn Mechanism,
    params: GameParams,
    relabeling: Relabeling,
    trace: Vec<TraceStep>,
    node_budget: u64,
}

impl Game<'_> {
    fn play(mut self) -> Result<Certificate, GameError> {
        let n = self.params.n;

        // Opening query: the mechanism must place every dummy task with its
        // owner and the first proper task with machine 0 or 1; the winner
        // becomes "machine 0" for the rest of the game.
        let a0 = build_matrix(MatrixKind::A0, &self.params)?;
        let (mut alloc0, digest0) = self.ask(MatrixKind::A0, &a0)?;
        if let Some((task, machine)) = unbounded_assignment(&a0, &alloc0) {
            self.push(MatrixKind::A0, &a0, digest0, alloc0, CHECK_A0, None);
            return self.finish_unbounded(&a0, task, machine);
        }
        if alloc0.machine_for(proper_column(n, 1)) == 1 {
            self.relabeling = Relabeling::swapped();
            alloc0 = self.relabeling.to_logical_allocation(&alloc0);
        }
        self.push(MatrixKind::A0, &a0, digest0, alloc0.clone(), CHECK_A0, None);

        // Discount machine 0's proper row. Monotonicity now forces at least
        // one of the first two proper tasks to stay with machine 0.
        let a1 = build_matrix(MatrixKind::A1, &self.params)?;
        let (alloc1, digest1) = self.ask(MatrixKind::A1, &a1)?;
        if let Some((task, machine)) = unbounded_assignment(&a1, &alloc1) {
            self.push(MatrixKind::A1, &a1, digest1, alloc1, CHECK_A1, None);
            return self.finish_unbounded(&a1, task, machine);
        }
        self.push(MatrixKind::A1, &a1, digest1, alloc1.clone(), CHECK_A1, None);

        let has_first = alloc1.assigns(0, proper_column(n, 1));
        let has_second = alloc1.assigns(0, proper_column(n, 2));
        if !has_first && !has_second {
            let witness = self.witness(0, &a0, &a1, &alloc0, &alloc1)?;
            return self.finish_violation("A0->A1", &a0, &a1, witness, None, None, None);
        }

        if (1..n).all(|p| alloc1.assigns(0, proper_column(n, p))) {
            self.case_one(&a1, &alloc1)
        } else if has_first {
            self.case_two(&a1, &alloc1)
        } else {
            self.case_three(&a1, &alloc1)
        }
    }

    /// Machine 0 holds every proper task: price her dummy at 1 and pin the
    /// proper row with discounts.
    fn case_one(mut self, a1: &CostMatrix, alloc1: &Allocation) -> Result<Certificate, GameError> {
        let b1 = build_matrix(MatrixKind::B1, &self.params)?;
        let (alloc_b1, digest) = self.ask(MatrixKind::B1, &b1)?;
        if let Some((task, machine)) = unbounded_assignment(&b1, &alloc_b1) {
            self.push(MatrixKind::B1, &b1, digest, alloc_b1, CHECK_B1, Some(1.0));
            return self.finish_unbounded(&b1, task, machine);
        }
        self.push(
            MatrixKind::B1,
            &b1,
            digest,
            alloc_b1.clone(),
            CHECK_B1,
            Some(1.0),
        );

        let partition = partition_for(MatrixKind::B1, &self.params)
            .map_err(|e| internal(&e))?;
        match self.persistence(&partition, 0, a1, &b1, alloc1, &alloc_b1)? {
            Persistence::Holds => {}
            Persistence::Violated { .. } => {
                let witness = self.witness(0, a1, &b1, alloc1, &alloc_b1)?;
                return self.finish_violation("A1->B1", a1, &b1, witness, Some(1), None, None);
            }
        }

        let value = finite_makespan(&alloc_b1, &b1)? / 1.0;
        let (ideal_value, formula) = ideal_ratio(MatrixKind::B1, &self.params);
        Ok(self.certificate(
            Some(1),
            None,
            None,
            Outcome::RatioAtLeast {
                value,
                ideal_value,
                formula,
            },
        ))
    }

    /// Machine 0 holds the first proper task but not all: zero out what she
    /// holds below the lowest missing ordinal `j`, pin, then price the
    /// detour machine's dummy.
    fn case_two(mut self, a1: &CostMatrix, alloc1: &Allocation) -> Result<Certificate, GameError> {
        let n = self.params.n;
        let j = (2..n)
            .find(|&p| !alloc1.assigns(0, proper_column(n, p)))
            .expect("case 2 requires a missing proper task");

        let b2_kind = MatrixKind::B2 { j };
        let b2 = build_matrix(b2_kind, &self.params)?;
        let (alloc_b2, digest) = self.ask(b2_kind, &b2)?;
        if let Some((task, machine)) = unbounded_assignment(&b2, &alloc_b2) {
            self.push(b2_kind, &b2, digest, alloc_b2, CHECK_B2, None);
            return self.finish_unbounded(&b2, task, machine);
        }
        self.push(b2_kind, &b2, digest, alloc_b2.clone(), CHECK_B2, None);

        let partition = partition_for(b2_kind, &self.params).map_err(|e| internal(&e))?;
        match self.persistence(&partition, 0, a1, &b2, alloc1, &alloc_b2)? {
            Persistence::Holds => {}
            Persistence::Violated { .. } => {
                let witness = self.witness(0, a1, &b2, alloc1, &alloc_b2)?;
                return self.finish_violation("A1->B2", a1, &b2, witness, Some(2), Some(j), None);
            }
        }

        let detour = alloc_b2.machine_for(proper_column(n, j));
        if detour != 1 && detour != j {
            // The only other finite entry in that column belongs to machine
            // 0, which persistence just excluded.
            return Err(internal(&format!(
                "detour machine {detour} outside {{1, {j}}} after persistence"
            )));
        }

        let c2_kind = MatrixKind::C2 { j, detour };
        let c2 = build_matrix(c2_kind, &self.params)?;
        let opt = analytic_opt(c2_kind, &self.params);
        let (alloc_c2, digest) = self.ask(c2_kind, &c2)?;
        if let Some((task, machine)) = unbounded_assignment(&c2, &alloc_c2) {
            self.push(c2_kind, &c2, digest, alloc_c2, CHECK_C2, opt);
            return self.finish_unbounded(&c2, task, machine);
        }
        self.push(c2_kind, &c2, digest, alloc_c2.clone(), CHECK_C2, opt);

        let partition = partition_for(c2_kind, &self.params).map_err(|e| internal(&e))?;
        match self.persistence(&partition, detour, &b2, &c2, &alloc_b2, &alloc_c2)? {
            Persistence::Holds => {}
            Persistence::Violated { .. } => {
                let witness = self.witness(detour, &b2, &c2, &alloc_b2, &alloc_c2)?;
                return self.finish_violation(
                    "B2->C2",
                    &b2,
                    &c2,
                    witness,
                    Some(2),
                    Some(j),
                    Some(detour),
                );
            }
        }

        let value = finite_makespan(&alloc_c2, &c2)? / opt.expect("C2 has an analytic optimum");
        let (ideal_value, formula) = ideal_ratio(c2_kind, &self.params);
        Ok(self.certificate(
            Some(2),
            Some(j),
            Some(detour),
            Outcome::RatioAtLeast {
                value,
                ideal_value,
                formula,
            },
        ))
    }

    /// Machine 0 lost the first proper task but must hold the second: make
    /// it free, pin, then price machine 1's dummy.
    fn case_three(
        mut self,
        a1: &CostMatrix,
        alloc1: &Allocation,
    ) -> Result<Certificate, GameError> {
        let b3 = build_matrix(MatrixKind::B3, &self.params)?;
        let (alloc_b3, digest) = self.ask(MatrixKind::B3, &b3)?;
        if let Some((task, machine)) = unbounded_assignment(&b3, &alloc_b3) {
            self.push(MatrixKind::B3, &b3, digest, alloc_b3, CHECK_B3, None);
            return self.finish_unbounded(&b3, task, machine);
        }
        self.push(MatrixKind::B3, &b3, digest, alloc_b3.clone(), CHECK_B3, None);

        let partition = partition_for(MatrixKind::B3, &self.params).map_err(|e| internal(&e))?;
        match self.persistence(&partition, 0, a1, &b3, alloc1, &alloc_b3)? {
            Persistence::Holds => {}
            Persistence::Violated { .. } => {
                let witness = self.witness(0, a1, &b3, alloc1, &alloc_b3)?;
                return self.finish_violation("A1->B3", a1, &b3, witness, Some(3), None, None);
            }
        }

        let c3 = build_matrix(MatrixKind::C3, &self.params)?;
        let opt = analytic_opt(MatrixKind::C3, &self.params);
        let (alloc_c3, digest) = self.ask(MatrixKind::C3, &c3)?;
        if let Some((task, machine)) = unbounded_assignment(&c3, &alloc_c3) {
            self.push(MatrixKind::C3, &c3, digest, alloc_c3, CHECK_C3, opt);
            return self.finish_unbounded(&c3, task, machine);
        }
        self.push(MatrixKind::C3, &c3, digest, alloc_c3.clone(), CHECK_C3, opt);

        let partition = partition_for(MatrixKind::C3, &self.params).map_err(|e| internal(&e))?;
        match self.persistence(&partition, 1, &b3, &c3, &alloc_b3, &alloc_c3)? {
            Persistence::Holds => {}
            Persistence::Violated { .. } => {
                let witness = self.witness(1, &b3, &c3, &alloc_b3, &alloc_c3)?;
                return self.finish_violation("B3->C3", &b3, &c3, witness, Some(3), None, None);
            }
        }

        let value = finite_makespan(&alloc_c3, &c3)? / opt.expect("C3 has an analytic optimum");
        let (ideal_value, formula) = ideal_ratio(MatrixKind::C3, &self.params);
        Ok(self.certificate(
            Some(3),
            None,
            None,
            Outcome::RatioAtLeast {
                value,
                ideal_value,
                formula,
            },
        ))
    }

    /// Materialize, relabel, query, and map the response back.
    fn ask(
        &self,
        kind: MatrixKind,
        logical: &CostMatrix,
    ) -> Result<(Allocation, String), GameError> {
        let physical = self
            .relabeling
            .to_physical(logical)
            .materialize(self.params.big_m);
        let digest = crate::mechanisms::instance_digest(&physical);
        let response = self
            .mech
            .allocate(&physical)
            .map_err(|e| GameError::Oracle {
                kind,
                message: format!("{e}"),
            })?;
        if response.machines() != logical.machines() || response.tasks() != logical.tasks() {
            return Err(GameError::Infeasible {
                kind,
                detail: format!(
                    "got {}x{}, expected {}x{}",
                    response.machines(),
                    response.tasks(),
                    logical.machines(),
                    logical.tasks()
                ),
            });
        }
        Ok((self.relabeling.to_logical_allocation(&response), digest))
    }

    fn push(
        &mut self,
        kind: MatrixKind,
        matrix: &CostMatrix,
        instance_digest: String,
        allocation: Allocation,
        check: &str,
        analytic_opt: Option<f64>,
    ) {
        self.trace.push(TraceStep {
            kind,
            matrix: matrix.clone(),
            instance_digest,
            allocation,
            check: check.to_string(),
            analytic_opt,
        });
    }

    fn persistence(
        &self,
        partition: &TaskPartition,
        machine: usize,
        before: &CostMatrix,
        after: &CostMatrix,
        alloc_before: &Allocation,
        alloc_after: &Allocation,
    ) -> Result<Persistence, GameError> {
        check_persistence(
            partition,
            &alloc_before.row_mask(machine),
            &alloc_after.row_mask(machine),
            before.row(machine),
            after.row(machine),
        )
        .map_err(|e| internal(&e))
    }

    fn witness(
        &self,
        machine: usize,
        before: &CostMatrix,
        after: &CostMatrix,
        alloc_before: &Allocation,
        alloc_after: &Allocation,
    ) -> Result<WmonWitness, GameError> {
        let witness = WmonWitness::from_rows(
            machine,
            alloc_before.row_mask(machine),
            alloc_after.row_mask(machine),
            before.row(machine).to_vec(),
            after.row(machine).to_vec(),
        )
        .map_err(|e| internal(&e))?;
        if witness.value <= 0.0 {
            return Err(internal(&format!(
                "violation witness is not positive: {}",
                witness.value
            )));
        }
        Ok(witness)
    }

    fn finish_violation(
        self,
        label: &str,
        base: &CostMatrix,
        deviated: &CostMatrix,
        witness: WmonWitness,
        case: Option<u8>,
        detour_j: Option<usize>,
        detour_machine: Option<usize>,
    ) -> Result<Certificate, GameError> {
        let violation = ViolationRecord {
            label: label.to_string(),
            base: base.clone(),
            deviated: deviated.clone(),
            witness,
        };
        Ok(self.certificate(
            case,
            detour_j,
            detour_machine,
            Outcome::TruthfulnessViolation { violation },
        ))
    }

    fn finish_unbounded(
        self,
        matrix: &CostMatrix,
        task: usize,
        machine: usize,
    ) -> Result<Certificate, GameError> {
        let opt = optimal_makespan(matrix, self.node_budget).map_err(GameError::Search)?;
        let implied_ratio = if opt > 0.0 {
            self.params.big_m / opt
        } else {
            f64::INFINITY
        };
        Ok(self.certificate(
            None,
            None,
            None,
            Outcome::UnboundedRatio {
                task,
                machine,
                implied_ratio,
            },
        ))
    }

    fn certificate(
        self,
        case_taken: Option<u8>,
        detour_j: Option<usize>,
        detour_machine: Option<usize>,
        outcome: Outcome,
    ) -> Certificate {
        Certificate {
            schema_version: CERTIFICATE_SCHEMA_VERSION,
            mechanism: self.mech.name().to_string(),
            params: self.params,
            relabeled: self.relabeling.is_swapped(),
            case_taken,
            detour_j,
            detour_machine,
            trace: self.trace,
            outcome,
        }
    }
}

const CHECK_A0: &str = "dummies with owners; first proper task with machine 0 after relabeling";
const CHECK_A1: &str = "dummies with owners; machine 0 keeps one of the first two proper tasks";
const CHECK_B1: &str = "machine 0 keeps her dummy and, by persistence, every proper task";
const CHECK_B2: &str = "persistence on machine 0's proper tasks up to the lowest missing ordinal";
const CHECK_C2: &str = "detour machine keeps her dummy and, by persistence, the detour task";
const CHECK_B3: &str = "persistence pins proper tasks 1 and 2 for machine 0";
const CHECK_C3: &str = "machine 1 keeps her dummy and, by persistence, the first proper task";

fn internal(detail: &dyn core::fmt::Display) -> GameError {
    GameError::Internal {
        detail: detail.to_string(),
    }
}

/// First task assigned to a machine that cannot finish it, if any.
fn unbounded_assignment(matrix: &CostMatrix, alloc: &Allocation) -> Option<(usize, usize)> {
    (0..matrix.tasks()).find_map(|j| {
        let i = alloc.machine_for(j);
        matrix.get(i, j).is_unbounded().then_some((j, i))
    })
}

fn finite_makespan(alloc: &Allocation, matrix: &CostMatrix) -> Result<f64, GameError> {
    let ms = makespan(alloc, matrix).map_err(|e| internal(&e))?;
    ms.value()
        .ok_or_else(|| internal(&"makespan unbounded after the unbounded check"))
}

/// The partition justifying each pinned query: `S` holds the repriced
/// dummy, `T` the perturbed proper tasks, `V` everything untouched.
fn partition_for(kind: MatrixKind, params: &GameParams) -> Result<TaskPartition, WmonError> {
    let n = params.n;
    let m = 2 * n - 1;
    let (s, t): (Vec<usize>, Vec<usize>) = match kind {
        MatrixKind::B1 => (
            alloc::vec![0],
            (1..n).map(|p| proper_column(n, p)).collect(),
        ),
        MatrixKind::B2 { j } => (
            Vec::new(),
            (1..=j).map(|p| proper_column(n, p)).collect(),
        ),
        MatrixKind::C2 { j, detour } => (alloc::vec![detour], alloc::vec![proper_column(n, j)]),
        MatrixKind::B3 => (
            Vec::new(),
            alloc::vec![proper_column(n, 1), proper_column(n, 2)],
        ),
        MatrixKind::C3 => (alloc::vec![1], alloc::vec![proper_column(n, 1)]),
        MatrixKind::A0 | MatrixKind::A1 => (
            Vec::new(),
            (1..n).map(|p| proper_column(n, p)).collect(),
        ),
    };
    let v: Vec<usize> = (0..m).filter(|c| !s.contains(c) && !t.contains(c)).collect();
    TaskPartition::new(m, s, t, v)
}

/// Verification report: `valid` iff `failures` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    pub failures: Vec<String>,
}

impl Verification {
    fn from_failures(failures: Vec<String>) -> Self {
        Verification {
            valid: failures.is_empty(),
            failures,
        }
    }
}

/// Replay a certificate without the mechanism: rebuild every matrix from
/// the parameters, re-run every check against the recorded allocations,
/// and recompute the outcome value. Returns all inconsistencies found.
pub fn verify_certificate(cert: &Certificate) -> Verification {
    let mut failures = Vec::new();
    let mut check = Checker {
        cert,
        failures: &mut failures,
    };
    check.run();
    Verification::from_failures(failures)
}

struct Checker<'a> {
    cert: &'a Certificate,
    failures: &'a mut Vec<String>,
}

impl Checker<'_> {
    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn run(&mut self) {
        let cert = self.cert;
        if cert.schema_version != CERTIFICATE_SCHEMA_VERSION {
            self.fail(format!(
                "unsupported schema version {}",
                cert.schema_version
            ));
            return;
        }
        if let Err(e) = cert.params.validate() {
            self.fail(format!("invalid params: {e}"));
            return;
        }
        if cert.trace.is_empty() {
            self.fail("empty trace".to_string());
            return;
        }

        for (idx, step) in cert.trace.iter().enumerate() {
            self.check_step_consistency(idx, step);
        }

        // The expected query order, given the recorded branch.
        let expected = self.expected_kinds();
        let got: Vec<MatrixKind> = cert.trace.iter().map(|s| s.kind).collect();
        if got != expected {
            self.fail(format!("trace kinds {got:?} do not match expected {expected:?}"));
            return;
        }

        self.check_game_logic();
    }

    fn expected_kinds(&self) -> Vec<MatrixKind> {
        let cert = self.cert;
        let steps = cert.trace.len();
        let mut kinds = alloc::vec![MatrixKind::A0];
        if steps >= 2 {
            kinds.push(MatrixKind::A1);
        }
        if steps >= 3 {
            match (cert.case_taken, cert.detour_j, cert.detour_machine) {
                (Some(1), _, _) => kinds.push(MatrixKind::B1),
                (Some(2), Some(j), detour) => {
                    kinds.push(MatrixKind::B2 { j });
                    if steps >= 4 {
                        kinds.push(MatrixKind::C2 {
                            j,
                            detour: detour.unwrap_or(usize::MAX),
                        });
                    }
                }
                (Some(3), _, _) => {
                    kinds.push(MatrixKind::B3);
                    if steps >= 4 {
                        kinds.push(MatrixKind::C3);
                    }
                }
                _ => {}
            }
        }
        kinds
    }

    fn check_step_consistency(&mut self, idx: usize, step: &TraceStep) {
        let cert = self.cert;
        match build_matrix(step.kind, &cert.params) {
            Ok(expected) => {
                if expected != step.matrix {
                    self.fail(format!(
                        "step {idx}: stored {} matrix differs from rebuilt one",
                        step.kind.label()
                    ));
                }
            }
            Err(e) => {
                self.fail(format!("step {idx}: cannot rebuild matrix: {e}"));
                return;
            }
        }
        let relabeling = Relabeling::from_swapped(cert.relabeled);
        let physical = relabeling
            .to_physical(&step.matrix)
            .materialize(cert.params.big_m);
        let digest = crate::mechanisms::instance_digest(&physical);
        if digest != step.instance_digest {
            self.fail(format!("step {idx}: instance digest mismatch"));
        }
        if step.allocation.machines() != step.matrix.machines()
            || step.allocation.tasks() != step.matrix.tasks()
        {
            self.fail(format!("step {idx}: allocation dimensions mismatch"));
        }
        let expected_opt = analytic_opt(step.kind, &cert.params);
        match (step.analytic_opt, expected_opt) {
            (Some(stored), Some(expected)) if !close(stored, expected) => {
                self.fail(format!(
                    "step {idx}: stored analytic optimum {stored} differs from {expected}"
                ));
            }
            (Some(_), None) => {
                self.fail(format!("step {idx}: unexpected analytic optimum"));
            }
            _ => {}
        }
    }

    fn check_game_logic(&mut self) {
        let cert = self.cert;
        let n = cert.params.n;
        let trace = &cert.trace;

        // Unbounded assignments may appear only at the last step, and force
        // that outcome.
        for (idx, step) in trace.iter().enumerate() {
            if let Some((task, machine)) = unbounded_assignment(&step.matrix, &step.allocation) {
                if idx != trace.len() - 1 {
                    self.fail(format!("step {idx}: unbounded assignment mid-game"));
                    return;
                }
                match &cert.outcome {
                    Outcome::UnboundedRatio {
                        task: t,
                        machine: m,
                        implied_ratio,
                    } => {
                        if (*t, *m) != (task, machine) {
                            self.fail(format!(
                                "unbounded outcome names ({t}, {m}), trace shows ({task}, {machine})"
                            ));
                        }
                        match optimal_makespan(&step.matrix, DEFAULT_NODE_BUDGET) {
                            Ok(opt) if opt > 0.0 => {
                                if !close(*implied_ratio, cert.params.big_m / opt) {
                                    self.fail("implied ratio mismatch".to_string());
                                }
                            }
                            Ok(_) => {}
                            Err(InstanceError::BudgetExhausted { .. }) => {}
                            Err(e) => self.fail(format!("implied ratio: {e}")),
                        }
                    }
                    _ => self.fail(format!(
                        "step {idx} has an unbounded assignment but the outcome is not unbounded"
                    )),
                }
                return;
            }
        }

        if trace.len() < 2 {
            self.fail("game ended after the opening query without an unbounded outcome".into());
            return;
        }

        let a0 = &trace[0];
        let a1 = &trace[1];
        if a0.allocation.machine_for(proper_column(n, 1)) != 0 {
            self.fail("first proper task not with machine 0 on the opening query".into());
        }

        let has_first = a1.allocation.assigns(0, proper_column(n, 1));
        let has_second = a1.allocation.assigns(0, proper_column(n, 2));
        let all = (1..n).all(|p| a1.allocation.assigns(0, proper_column(n, p)));

        if !has_first && !has_second {
            if cert.case_taken.is_some() || trace.len() != 2 {
                self.fail("discount step lost both pivotal tasks; game should stop".into());
            }
            self.expect_violation(a0, a1, 0, "A0->A1");
            return;
        }

        let expected_case = if all {
            1
        } else if has_first {
            2
        } else {
            3
        };
        if cert.case_taken != Some(expected_case) {
            self.fail(format!(
                "case_taken {:?} does not match allocation-implied case {expected_case}",
                cert.case_taken
            ));
            return;
        }

        match expected_case {
            1 => self.check_pinned_tail(&[(2, 0, "A1->B1")]),
            2 => {
                let j = (2..n)
                    .find(|&p| !a1.allocation.assigns(0, proper_column(n, p)))
                    .expect("case 2 has a missing ordinal");
                if cert.detour_j != Some(j) {
                    self.fail(format!(
                        "detour_j {:?} does not match lowest missing ordinal {j}",
                        cert.detour_j
                    ));
                    return;
                }
                if trace.len() >= 3 {
                    let holder = trace[2].allocation.machine_for(proper_column(n, j));
                    let continued = trace.len() >= 4;
                    if continued {
                        if cert.detour_machine != Some(holder) {
                            self.fail(format!(
                                "detour_machine {:?} does not match holder {holder}",
                                cert.detour_machine
                            ));
                            return;
                        }
                        if holder != 1 && holder != j {
                            self.fail(format!("detour machine {holder} outside {{1, {j}}}"));
                            return;
                        }
                    }
                }
                self.check_pinned_tail(&[(2, 0, "A1->B2"), (3, usize::MAX, "B2->C2")]);
            }
            3 => self.check_pinned_tail(&[(2, 0, "A1->B3"), (3, 1, "B3->C3")]),
            _ => unreachable!(),
        }
    }

    /// Walk the pinned queries after the discount step. `steps` lists
    /// `(trace index, deviating machine, label)`; `usize::MAX` marks the
    /// recorded detour machine.
    fn check_pinned_tail(&mut self, steps: &[(usize, usize, &str)]) {
        let cert = self.cert;
        let trace = &cert.trace;
        for &(idx, machine_spec, label) in steps {
            if idx >= trace.len() {
                self.fail(format!(
                    "trace ends before {label} but the outcome is not a violation there"
                ));
                return;
            }
            let machine = if machine_spec == usize::MAX {
                match cert.detour_machine {
                    Some(d) => d,
                    None => {
                        self.fail("missing detour machine for the C2 step".into());
                        return;
                    }
                }
            } else {
                machine_spec
            };
            let before = &trace[idx - 1];
            let after = &trace[idx];
            let partition = match partition_for(after.kind, &cert.params) {
                Ok(p) => p,
                Err(e) => {
                    self.fail(format!("{label}: cannot build partition: {e}"));
                    return;
                }
            };
            let outcome = check_persistence(
                &partition,
                &before.allocation.row_mask(machine),
                &after.allocation.row_mask(machine),
                before.matrix.row(machine),
                after.matrix.row(machine),
            );
            match outcome {
                Ok(Persistence::Holds) => {
                    if idx == trace.len() - 1 {
                        self.expect_ratio(after);
                        return;
                    }
                }
                Ok(Persistence::Violated { .. }) => {
                    if idx != trace.len() - 1 {
                        self.fail(format!("{label}: persistence broke but the game continued"));
                        return;
                    }
                    self.expect_violation(before, after, machine, label);
                    return;
                }
                Err(e) => {
                    self.fail(format!("{label}: persistence preconditions failed: {e}"));
                    return;
                }
            }
        }
    }

    fn expect_ratio(&mut self, final_step: &TraceStep) {
        let cert = self.cert;
        let Outcome::RatioAtLeast {
            value,
            ideal_value,
            ..
        } = &cert.outcome
        else {
            self.fail("all checks held but the outcome is not a ratio".into());
            return;
        };
        let Some(opt) = final_step.analytic_opt else {
            self.fail("final step is missing its analytic optimum".into());
            return;
        };
        let ms = match makespan(&final_step.allocation, &final_step.matrix) {
            Ok(ExtendedCost::Finite(v)) => v,
            _ => {
                self.fail("final makespan is not finite".into());
                return;
            }
        };
        if !close(*value, ms / opt) {
            self.fail(format!(
                "outcome value {value} does not equal recomputed ratio {}",
                ms / opt
            ));
        }
        let (expected_ideal, _) = ideal_ratio(final_step.kind, &cert.params);
        if !close(*ideal_value, expected_ideal) {
            self.fail(format!(
                "ideal value {ideal_value} does not equal recomputed {expected_ideal}"
            ));
        }
        // Exact search as a second opinion where the budget allows.
        match optimal_makespan(&final_step.matrix, DEFAULT_NODE_BUDGET) {
            Ok(exact) => {
                if (exact - opt).abs() > 1e-9 {
                    self.fail(format!(
                        "analytic optimum {opt} disagrees with exact search {exact}"
                    ));
                }
            }
            Err(InstanceError::BudgetExhausted { .. }) => {}
            Err(e) => self.fail(format!("exact optimum: {e}")),
        }
    }

    fn expect_violation(
        &mut self,
        before: &TraceStep,
        after: &TraceStep,
        machine: usize,
        label: &str,
    ) {
        let cert = self.cert;
        let Outcome::TruthfulnessViolation { violation } = &cert.outcome else {
            self.fail(format!("{label}: expected a truthfulness violation outcome"));
            return;
        };
        let w = &violation.witness;
        if w.machine != machine {
            self.fail(format!(
                "{label}: witness machine {} != deviating machine {machine}",
                w.machine
            ));
        }
        if violation.base != before.matrix || violation.deviated != after.matrix {
            self.fail(format!("{label}: witness matrices differ from trace"));
        }
        if w.costs_before != before.matrix.row(machine)
            || w.costs_after != after.matrix.row(machine)
            || w.alloc_before != before.allocation.row_mask(machine)
            || w.alloc_after != after.allocation.row_mask(machine)
        {
            self.fail(format!("{label}: witness rows differ from trace"));
        }
        match crate::truthfulness::wmon_value(
            &w.alloc_before,
            &w.alloc_after,
            &w.costs_before,
            &w.costs_after,
        ) {
            Ok(v) => {
                if !close(v, w.value) {
                    self.fail(format!(
                        "{label}: witness value {} does not recompute ({v})",
                        w.value
                    ));
                }
                if !(v > 0.0) {
                    self.fail(format!("{label}: witness value {v} is not positive"));
                }
            }
            Err(e) => self.fail(format!("{label}: witness does not evaluate: {e}")),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
