//! Equivalence of the branch-and-bound optimum with independent oracles:
//! plain enumeration on small random instances, and the closed-form optima
//! of the adversary's pinned instances.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schedcert_core::bounds::game_params;
use schedcert_core::instances::{
    build_matrix, optimal_makespan, Allocation, CostMatrix, ExtendedCost, MatrixKind,
};

/// Exhaustive minimum makespan over all n^m assignments. Slow and obviously
/// correct; kept free of any shared code with the search it checks.
fn brute_force_opt(costs: &CostMatrix) -> f64 {
    let n = costs.machines();
    let m = costs.tasks();
    let mut assignment = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let mut loads = vec![0.0f64; n];
        let mut feasible = true;
        for (task, &machine) in assignment.iter().enumerate() {
            match costs.get(machine, task) {
                ExtendedCost::Finite(v) => loads[machine] += v,
                ExtendedCost::Unbounded => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            let makespan = loads.iter().cloned().fold(0.0f64, f64::max);
            if makespan < best {
                best = makespan;
            }
        }
        // Odometer increment over the assignment vector.
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            assignment[pos] += 1;
            if assignment[pos] < n {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> CostMatrix {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=7);
    let between = Uniform::from(0.0..4.0);
    let entries: Vec<ExtendedCost> = (0..n * m)
        .map(|_| {
            // Sprinkle unbounded entries, keeping at least machine 0 finite
            // so every column stays coverable.
            if rng.gen_bool(0.2) {
                ExtendedCost::Unbounded
            } else {
                ExtendedCost::Finite(between.sample(rng))
            }
        })
        .collect();
    let mut entries = entries;
    for j in 0..m {
        if (0..n).all(|i| entries[i * m + j].is_unbounded()) {
            entries[j] = ExtendedCost::Finite(between.sample(rng));
        }
    }
    CostMatrix::new(n, m, entries).expect("columns patched to stay coverable")
}

#[test]
fn matches_brute_force_on_200_seeded_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C0);
    for trial in 0..200 {
        let costs = random_instance(&mut rng);
        let expected = brute_force_opt(&costs);
        let got = optimal_makespan(&costs, 10_000_000).expect("budget is ample");
        assert!(
            (expected - got).abs() < 1e-12,
            "trial {trial}: brute force {expected} vs search {got}"
        );
    }
}

#[test]
fn pinned_instances_have_closed_form_optima() {
    for n in [3usize, 4, 5, 6] {
        let params = game_params(n).unwrap();

        let b1 = build_matrix(MatrixKind::B1, &params).unwrap();
        let opt = optimal_makespan(&b1, 10_000_000).unwrap();
        assert!((opt - 1.0).abs() < 1e-12, "B1 optimum at n={n}: {opt}");

        for j in 2..n {
            for detour in [1, j] {
                let c2 = build_matrix(MatrixKind::C2 { j, detour }, &params).unwrap();
                let opt = optimal_makespan(&c2, 10_000_000).unwrap();
                let expected = params.inv_power(j - 1) + params.epsilon;
                assert!(
                    (opt - expected).abs() < 1e-12,
                    "C2 optimum at n={n}, j={j}, d={detour}: {opt} vs {expected}"
                );
            }
        }

        let c3 = build_matrix(MatrixKind::C3, &params).unwrap();
        let opt = optimal_makespan(&c3, 10_000_000).unwrap();
        let expected = params.inv_power(1).max(params.r + params.epsilon);
        assert!(
            (opt - expected).abs() < 1e-12,
            "C3 optimum at n={n}: {opt} vs {expected}"
        );
    }
}

#[test]
fn optimum_is_a_lower_bound_for_any_allocation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let costs = random_instance(&mut rng);
        let opt = optimal_makespan(&costs, 10_000_000).unwrap();
        let assignment: Vec<usize> = (0..costs.tasks())
            .map(|_| rng.gen_range(0..costs.machines()))
            .collect();
        let alloc = Allocation::new(costs.machines(), assignment).unwrap();
        let ms = schedcert_core::instances::makespan(&alloc, &costs).unwrap();
        match ms {
            ExtendedCost::Finite(v) => assert!(v >= opt - 1e-12),
            ExtendedCost::Unbounded => {}
        }
    }
}
