use alloc::vec;
use alloc::vec::Vec;

use super::{CostMatrix, InstanceError};

/// Node allowance for [`optimal_makespan`] when callers have no opinion.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Exact minimum makespan over all feasible allocations, by depth-first
/// branch and bound.
///
/// Tasks are branched in order of descending cheapest finite cost, which
/// tightens the incumbent early; branches through unbounded entries or with
/// a partial load at or above the incumbent are pruned. The search counts
/// task-machine placements as nodes and stops with
/// [`InstanceError::BudgetExhausted`] once `node_budget` is spent, so
/// callers on oversized instances can fall back to an analytic optimum
/// where one is known.
pub fn optimal_makespan(costs: &CostMatrix, node_budget: u64) -> Result<f64, InstanceError> {
    let n = costs.machines();
    let m = costs.tasks();

    let min_finite: Vec<f64> = (0..m)
        .map(|j| {
            costs
                .column(j)
                .filter_map(|e| e.value())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| {
        min_finite[y]
            .partial_cmp(&min_finite[x])
            .expect("matrix entries are never NaN")
            .then(x.cmp(&y))
    });

    // Per task (in branch order): finite candidates sorted by cost, then
    // machine index, so the search order is deterministic.
    let candidates: Vec<Vec<(usize, f64)>> = order
        .iter()
        .map(|&j| {
            let mut c: Vec<(usize, f64)> = (0..n)
                .filter_map(|i| costs.get(i, j).value().map(|v| (i, v)))
                .collect();
            c.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .expect("matrix entries are never NaN")
                    .then(a.0.cmp(&b.0))
            });
            c
        })
        .collect();

    let mut loads = vec![0.0f64; n];
    let incumbent = greedy_seed(&candidates, &mut loads);

    let mut search = Search {
        candidates: &candidates,
        loads: vec![0.0; n],
        best: incumbent,
        nodes: 0,
        budget: node_budget,
    };
    search.descend(0, 0.0)?;
    Ok(search.best)
}

/// Assign each task to the machine minimizing its resulting load. Not
/// optimal in general, but a cheap upper bound to seed pruning.
fn greedy_seed(candidates: &[Vec<(usize, f64)>], loads: &mut [f64]) -> f64 {
    let mut max_load = 0.0f64;
    for cands in candidates {
        let (mut pick, mut pick_load) = (usize::MAX, f64::INFINITY);
        for &(machine, cost) in cands {
            let load = loads[machine] + cost;
            if load < pick_load {
                pick = machine;
                pick_load = load;
            }
        }
        loads[pick] += pick_load - loads[pick];
        max_load = max_load.max(pick_load);
    }
    max_load
}

struct Search<'a> {
    candidates: &'a [Vec<(usize, f64)>],
    loads: Vec<f64>,
    best: f64,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, current_max: f64) -> Result<(), InstanceError> {
        if depth == self.candidates.len() {
            if current_max < self.best {
                self.best = current_max;
            }
            return Ok(());
        }
        for idx in 0..self.candidates[depth].len() {
            let (machine, cost) = self.candidates[depth][idx];
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(InstanceError::BudgetExhausted {
                    explored: self.nodes,
                });
            }
            let new_load = self.loads[machine] + cost;
            let new_max = current_max.max(new_load);
            if new_max >= self.best {
                continue;
            }
            self.loads[machine] = new_load;
            self.descend(depth + 1, new_max)?;
            self.loads[machine] = new_load - cost;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::cost::ExtendedCost;
    use super::*;

    fn fin(v: f64) -> ExtendedCost {
        ExtendedCost::Finite(v)
    }

    fn inf() -> ExtendedCost {
        ExtendedCost::Unbounded
    }

    #[test]
    fn two_machines_split() {
        let t = CostMatrix::from_rows(alloc::vec![
            alloc::vec![fin(1.0), fin(1.0)],
            alloc::vec![fin(1.0), fin(1.0)],
        ])
        .unwrap();
        assert_eq!(optimal_makespan(&t, 1_000).unwrap(), 1.0);
    }

    #[test]
    fn respects_unbounded_entries() {
        let t = CostMatrix::from_rows(alloc::vec![
            alloc::vec![fin(0.0), inf()],
            alloc::vec![inf(), fin(3.0)],
        ])
        .unwrap();
        assert_eq!(optimal_makespan(&t, 1_000).unwrap(), 3.0);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let rows: alloc::vec::Vec<_> = (0..4)
            .map(|i| (0..7).map(|j| fin(1.0 + (i * 7 + j) as f64)).collect())
            .collect();
        let t = CostMatrix::from_rows(rows).unwrap();
        assert!(matches!(
            optimal_makespan(&t, 3),
            Err(InstanceError::BudgetExhausted { .. })
        ));
    }
}
