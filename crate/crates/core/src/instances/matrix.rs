use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::cost::ExtendedCost;
use super::InstanceError;

/// An `n x m` matrix of processing times: entry `(i, j)` is the time machine
/// `i` needs for task `j`. Every column must contain at least one finite
/// entry, otherwise no finite-makespan allocation exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CostMatrix {
    n: usize,
    m: usize,
    entries: Vec<ExtendedCost>,
}

/// Wire form: `{n, m, entries}` with row-major entries and `"inf"` for
/// unbounded values. Field order is fixed for golden-file comparisons.
#[derive(Serialize, Deserialize)]
struct RawMatrix {
    n: usize,
    m: usize,
    entries: Vec<ExtendedCost>,
}

impl TryFrom<RawMatrix> for CostMatrix {
    type Error = InstanceError;

    fn try_from(raw: RawMatrix) -> Result<Self, InstanceError> {
        CostMatrix::new(raw.n, raw.m, raw.entries)
    }
}

impl From<CostMatrix> for RawMatrix {
    fn from(t: CostMatrix) -> RawMatrix {
        RawMatrix {
            n: t.n,
            m: t.m,
            entries: t.entries,
        }
    }
}

impl CostMatrix {
    pub fn new(n: usize, m: usize, entries: Vec<ExtendedCost>) -> Result<Self, InstanceError> {
        if n == 0 || m == 0 {
            return Err(InstanceError::EmptyDimensions { n, m });
        }
        if entries.len() != n * m {
            return Err(InstanceError::WrongEntryCount {
                expected: n * m,
                got: entries.len(),
            });
        }
        for (idx, e) in entries.iter().enumerate() {
            if !e.is_valid() {
                return Err(InstanceError::InvalidEntry {
                    machine: idx / m,
                    task: idx % m,
                });
            }
        }
        for j in 0..m {
            if !(0..n).any(|i| entries[i * m + j].is_finite()) {
                return Err(InstanceError::NoFiniteEntry { task: j });
            }
        }
        Ok(CostMatrix { n, m, entries })
    }

    pub fn from_rows(rows: Vec<Vec<ExtendedCost>>) -> Result<Self, InstanceError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(InstanceError::RaggedRows);
        }
        let entries = rows.into_iter().flatten().collect();
        CostMatrix::new(n, m, entries)
    }

    pub fn machines(&self) -> usize {
        self.n
    }

    pub fn tasks(&self) -> usize {
        self.m
    }

    pub fn get(&self, machine: usize, task: usize) -> ExtendedCost {
        self.entries[machine * self.m + task]
    }

    pub fn row(&self, machine: usize) -> &[ExtendedCost] {
        &self.entries[machine * self.m..(machine + 1) * self.m]
    }

    pub fn column(&self, task: usize) -> impl Iterator<Item = ExtendedCost> + '_ {
        (0..self.n).map(move |i| self.get(i, task))
    }

    /// Copy with machine `i`'s row replaced; the result is revalidated.
    pub fn with_row(&self, machine: usize, row: Vec<ExtendedCost>) -> Result<Self, InstanceError> {
        if machine >= self.n {
            return Err(InstanceError::InvalidMachine {
                machine,
                machines: self.n,
            });
        }
        if row.len() != self.m {
            return Err(InstanceError::WrongEntryCount {
                expected: self.m,
                got: row.len(),
            });
        }
        let mut entries = self.entries.clone();
        entries[machine * self.m..(machine + 1) * self.m].copy_from_slice(&row);
        CostMatrix::new(self.n, self.m, entries)
    }

    pub fn is_all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }

    /// Replace every unbounded entry by the finite surrogate `big_m`.
    pub fn materialize(&self, big_m: f64) -> CostMatrix {
        let entries = self
            .entries
            .iter()
            .map(|e| ExtendedCost::Finite(e.unwrap_or(big_m)))
            .collect();
        CostMatrix {
            n: self.n,
            m: self.m,
            entries,
        }
    }

    pub fn finite_sum(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.value()).sum()
    }

    pub fn min_positive_finite(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.value())
            .filter(|&v| v > 0.0)
            .fold(None, |acc, v| match acc {
                Some(best) if best <= v => Some(best),
                _ => Some(v),
            })
    }
}

/// A feasible assignment: exactly one machine per task. Stored as the
/// machine index of each task, which makes the feasibility constraint hold
/// by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAllocation", into = "RawAllocation")]
pub struct Allocation {
    n: usize,
    machine_for_task: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawAllocation {
    n: usize,
    machine_for_task: Vec<usize>,
}

impl TryFrom<RawAllocation> for Allocation {
    type Error = InstanceError;

    fn try_from(raw: RawAllocation) -> Result<Self, InstanceError> {
        Allocation::new(raw.n, raw.machine_for_task)
    }
}

impl From<Allocation> for RawAllocation {
    fn from(a: Allocation) -> RawAllocation {
        RawAllocation {
            n: a.n,
            machine_for_task: a.machine_for_task,
        }
    }
}

impl Allocation {
    pub fn new(n: usize, machine_for_task: Vec<usize>) -> Result<Self, InstanceError> {
        if n == 0 || machine_for_task.is_empty() {
            return Err(InstanceError::EmptyDimensions {
                n,
                m: machine_for_task.len(),
            });
        }
        if let Some(&bad) = machine_for_task.iter().find(|&&i| i >= n) {
            return Err(InstanceError::InvalidMachine {
                machine: bad,
                machines: n,
            });
        }
        Ok(Allocation {
            n,
            machine_for_task,
        })
    }

    pub fn machines(&self) -> usize {
        self.n
    }

    pub fn tasks(&self) -> usize {
        self.machine_for_task.len()
    }

    pub fn machine_for(&self, task: usize) -> usize {
        self.machine_for_task[task]
    }

    pub fn assigns(&self, machine: usize, task: usize) -> bool {
        self.machine_for_task[task] == machine
    }

    pub fn tasks_of(&self, machine: usize) -> impl Iterator<Item = usize> + '_ {
        self.machine_for_task
            .iter()
            .enumerate()
            .filter(move |&(_, &i)| i == machine)
            .map(|(j, _)| j)
    }

    /// Machine `i`'s row of the 0/1 assignment grid.
    pub fn row_mask(&self, machine: usize) -> Vec<bool> {
        self.machine_for_task
            .iter()
            .map(|&i| i == machine)
            .collect()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.machine_for_task
    }
}

/// Payments handed to the machines; may be negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentVector {
    amounts: Vec<f64>,
}

impl PaymentVector {
    pub fn new(amounts: Vec<f64>) -> Self {
        PaymentVector { amounts }
    }

    pub fn machines(&self) -> usize {
        self.amounts.len()
    }

    pub fn amount(&self, machine: usize) -> f64 {
        self.amounts[machine]
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }
}

/// Maximum load over machines under the given assignment; unbounded as soon
/// as any assigned entry is unbounded.
pub fn makespan(alloc: &Allocation, costs: &CostMatrix) -> Result<ExtendedCost, InstanceError> {
    if alloc.machines() != costs.machines() || alloc.tasks() != costs.tasks() {
        return Err(InstanceError::DimensionMismatch {
            expected: (costs.machines(), costs.tasks()),
            got: (alloc.machines(), alloc.tasks()),
        });
    }
    let mut loads = alloc_loads(alloc, costs);
    Ok(loads
        .drain(..)
        .fold(ExtendedCost::ZERO, |acc, l| acc.max(l)))
}

pub(crate) fn alloc_loads(alloc: &Allocation, costs: &CostMatrix) -> Vec<ExtendedCost> {
    let mut loads = alloc::vec![ExtendedCost::ZERO; costs.machines()];
    for (task, &machine) in alloc.assignments().iter().enumerate() {
        loads[machine] = loads[machine] + costs.get(machine, task);
    }
    loads
}

/// Ratio of the allocation's makespan to the optimal makespan.
///
/// Unbounded when the makespan is unbounded, or when the optimum is zero
/// while the makespan is positive. The degenerate all-zero case `0/0` is
/// defined as 1.
pub fn approximation_ratio(
    alloc: &Allocation,
    costs: &CostMatrix,
    node_budget: u64,
) -> Result<ExtendedCost, InstanceError> {
    let ms = makespan(alloc, costs)?;
    let opt = super::optimal_makespan(costs, node_budget)?;
    match ms {
        ExtendedCost::Unbounded => Ok(ExtendedCost::Unbounded),
        ExtendedCost::Finite(v) => {
            if opt == 0.0 {
                if v == 0.0 {
                    Ok(ExtendedCost::Finite(1.0))
                } else {
                    Ok(ExtendedCost::Unbounded)
                }
            } else {
                Ok(ExtendedCost::Finite(v / opt))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn inf() -> ExtendedCost {
        ExtendedCost::Unbounded
    }

    fn fin(v: f64) -> ExtendedCost {
        ExtendedCost::Finite(v)
    }

    #[test]
    fn rejects_all_unbounded_column() {
        let err = CostMatrix::from_rows(vec![
            vec![fin(1.0), inf()],
            vec![fin(2.0), inf()],
        ])
        .unwrap_err();
        assert_eq!(err, InstanceError::NoFiniteEntry { task: 1 });
    }

    #[test]
    fn rejects_negative_entry() {
        let err = CostMatrix::from_rows(vec![vec![fin(-0.5)]]).unwrap_err();
        assert_eq!(
            err,
            InstanceError::InvalidEntry {
                machine: 0,
                task: 0
            }
        );
    }

    #[test]
    fn makespan_of_diagonal_dummies_is_zero() {
        // 3x3 block with zero diagonal and unbounded off-diagonal entries:
        // assigning every task to its owner costs nothing.
        let t = CostMatrix::from_rows(vec![
            vec![fin(0.0), inf(), inf()],
            vec![inf(), fin(0.0), inf()],
            vec![inf(), inf(), fin(0.0)],
        ])
        .unwrap();
        let a = Allocation::new(3, vec![0, 1, 2]).unwrap();
        assert_eq!(makespan(&a, &t).unwrap(), fin(0.0));
    }

    #[test]
    fn makespan_unbounded_when_assigned_off_diagonal() {
        let t = CostMatrix::from_rows(vec![
            vec![fin(0.0), inf()],
            vec![inf(), fin(0.0)],
        ])
        .unwrap();
        let a = Allocation::new(2, vec![1, 1]).unwrap();
        assert_eq!(makespan(&a, &t).unwrap(), ExtendedCost::Unbounded);
    }

    #[test]
    fn makespan_dimension_mismatch() {
        let t = CostMatrix::from_rows(vec![vec![fin(1.0), fin(2.0)]]).unwrap();
        let a = Allocation::new(2, vec![0]).unwrap();
        assert!(matches!(
            makespan(&a, &t),
            Err(InstanceError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ratio_degenerate_zero_over_zero_is_one() {
        let t = CostMatrix::from_rows(vec![vec![fin(0.0)], vec![fin(0.0)]]).unwrap();
        let a = Allocation::new(2, vec![1]).unwrap();
        assert_eq!(
            approximation_ratio(&a, &t, 1_000).unwrap(),
            fin(1.0)
        );
    }

    #[test]
    fn materialize_replaces_unbounded() {
        let t = CostMatrix::from_rows(vec![vec![fin(1.0), inf()], vec![inf(), fin(2.0)]]).unwrap();
        let m = t.materialize(99.0);
        assert!(m.is_all_finite());
        assert_eq!(m.get(0, 1), fin(99.0));
        assert_eq!(m.get(0, 0), fin(1.0));
    }
}
