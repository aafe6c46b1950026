//! End-to-end runs of the adversary game: scripted walks of every branch,
//! scripted rule-breakers, relabeling, and certificate verification
//! including tamper detection.

use schedcert_core::adversary::{
    run_game, verify_certificate, Certificate, Outcome, Relabeling,
};
use schedcert_core::bounds::{analytic_bound, game_params};
use schedcert_core::instances::{build_matrix, Allocation, GameParams, MatrixKind};
use schedcert_core::mechanisms::scripts::{scripted_game, PlannedStep};
use schedcert_core::mechanisms::{vcg, Mechanism, MechanismError, TieBreak};

fn assignment(n: usize, props: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.extend_from_slice(props);
    v
}

/// Opening-query allocation: first proper task to machine 0, every later
/// ordinal to its owner.
fn a0_props(n: usize) -> Vec<usize> {
    let mut p = vec![0usize];
    p.extend(2..n);
    p
}

fn case1_steps(n: usize) -> Vec<PlannedStep> {
    let all_zero = vec![0usize; n - 1];
    vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &all_zero)),
        PlannedStep::new(MatrixKind::B1, assignment(n, &all_zero)),
    ]
}

fn case2_props(n: usize, j: usize, detour: usize) -> Vec<usize> {
    (1..n)
        .map(|p| {
            if p < j {
                0
            } else if p == j {
                detour
            } else {
                p
            }
        })
        .collect()
}

fn case2_steps(n: usize, j: usize, detour: usize) -> Vec<PlannedStep> {
    let props = case2_props(n, j, detour);
    vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &props)),
        PlannedStep::new(MatrixKind::B2 { j }, assignment(n, &props)),
        PlannedStep::new(MatrixKind::C2 { j, detour }, assignment(n, &props)),
    ]
}

fn case3_props(n: usize) -> Vec<usize> {
    (1..n)
        .map(|p| match p {
            1 => 1,
            2 => 0,
            _ => p,
        })
        .collect()
}

fn case3_steps(n: usize) -> Vec<PlannedStep> {
    let props = case3_props(n);
    vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &props)),
        PlannedStep::new(MatrixKind::B3, assignment(n, &props)),
        PlannedStep::new(MatrixKind::C3, assignment(n, &props)),
    ]
}

fn ratio_of(cert: &Certificate) -> f64 {
    match &cert.outcome {
        Outcome::RatioAtLeast { value, .. } => *value,
        other => panic!("expected a ratio outcome, got {other:?}"),
    }
}

fn assert_violation(cert: &Certificate) {
    match &cert.outcome {
        Outcome::TruthfulnessViolation { violation } => {
            assert!(violation.witness.value > 0.0);
        }
        other => panic!("expected a violation outcome, got {other:?}"),
    }
}

#[test]
fn case_one_script_certifies_the_sum_bound() {
    for n in [3usize, 4, 6] {
        let params = game_params(n).unwrap();
        let mech = scripted_game("case1", &params, false, &case1_steps(n)).unwrap();
        let cert = run_game(&mech, &params).unwrap();
        assert_eq!(cert.case_taken, Some(1));
        let expected = 1.0 + params.proper_row_sum() - (n - 1) as f64 * params.epsilon;
        assert!((ratio_of(&cert) - expected).abs() < 1e-12);
        assert!(verify_certificate(&cert).valid);
    }
}

#[test]
fn case_two_scripts_certify_one_plus_a_for_both_detours() {
    for n in [3usize, 5] {
        let params = game_params(n).unwrap();
        let rho = analytic_bound(n).unwrap().rho;
        for j in 2..n {
            let mut values = Vec::new();
            for detour in [1, j] {
                let mech = scripted_game("case2", &params, false, &case2_steps(n, j, detour))
                    .unwrap();
                let cert = run_game(&mech, &params).unwrap();
                assert_eq!(cert.case_taken, Some(2));
                assert_eq!(cert.detour_j, Some(j));
                assert_eq!(cert.detour_machine, Some(detour));
                let value = ratio_of(&cert);
                assert!(
                    value >= rho - 1e-3,
                    "n={n} j={j} d={detour}: {value} vs rho {rho}"
                );
                assert!(verify_certificate(&cert).valid);
                values.push(value);
            }
            // The certified bound does not depend on which machine took
            // the detour task.
            assert!((values[0] - values[1]).abs() < 1e-12);
        }
    }
}

#[test]
fn case_three_script_certifies_the_r_inverse_bound() {
    for n in [3usize, 4, 6] {
        let params = game_params(n).unwrap();
        let mech = scripted_game("case3", &params, false, &case3_steps(n)).unwrap();
        let cert = run_game(&mech, &params).unwrap();
        assert_eq!(cert.case_taken, Some(3));
        let value = ratio_of(&cert);
        let ideal = 1.0 + params.a.min(1.0 / params.r);
        assert!((value - ideal).abs() < 1e-3, "n={n}: {value} vs {ideal}");
        assert!(verify_certificate(&cert).valid);
    }
}

#[test]
fn relabeled_script_is_isomorphic() {
    let n = 4;
    let params = game_params(n).unwrap();
    let plain = scripted_game("plain", &params, false, &case1_steps(n)).unwrap();
    let swapped = scripted_game("swapped", &params, true, &case1_steps(n)).unwrap();
    let cert_plain = run_game(&plain, &params).unwrap();
    let cert_swapped = run_game(&swapped, &params).unwrap();
    assert!(!cert_plain.relabeled);
    assert!(cert_swapped.relabeled);
    assert_eq!(cert_plain.case_taken, cert_swapped.case_taken);
    assert_eq!(ratio_of(&cert_plain), ratio_of(&cert_swapped));
    assert!(verify_certificate(&cert_swapped).valid);
}

/// A mechanism conjugated by the machine-0/1 swap: behaves like its inner
/// rule with the first two machines renamed.
struct Conjugated<M>(M);

impl<M: Mechanism> Mechanism for Conjugated<M> {
    fn name(&self) -> &str {
        "conjugated"
    }

    fn allocate(
        &self,
        costs: &schedcert_core::instances::CostMatrix,
    ) -> Result<Allocation, MechanismError> {
        let swap = Relabeling::swapped();
        let inner_view = swap.to_physical(costs);
        let inner_alloc = self.0.allocate(&inner_view)?;
        Ok(swap.to_physical_allocation(&inner_alloc))
    }
}

#[test]
fn conjugated_vcg_yields_the_same_bound_through_relabeling() {
    let params = game_params(3).unwrap();
    let straight = run_game(&vcg(TieBreak::LowestIndex), &params).unwrap();
    let conjugated = run_game(&Conjugated(vcg(TieBreak::LowestIndex)), &params).unwrap();
    assert!(!straight.relabeled);
    assert!(conjugated.relabeled);
    assert_eq!(straight.case_taken, conjugated.case_taken);
    assert_eq!(ratio_of(&straight), ratio_of(&conjugated));
    assert!(verify_certificate(&conjugated).valid);
}

#[test]
fn dropping_both_pivotal_tasks_is_a_lemma_style_violation() {
    let n = 4;
    let params = game_params(n).unwrap();
    // Machine 1 takes both of the first two proper tasks after the
    // discount.
    let props: Vec<usize> = (1..n).map(|p| if p <= 2 { 1 } else { p }).collect();
    let steps = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &props)),
    ];
    let mech = scripted_game("lemma-drop", &params, false, &steps).unwrap();
    let cert = run_game(&mech, &params).unwrap();
    assert_violation(&cert);
    match &cert.outcome {
        Outcome::TruthfulnessViolation { violation } => {
            // The telescoping lower bound on the witness value.
            let floor = params.feasibility_slack();
            assert!(violation.witness.value >= floor - 1e-12);
            assert_eq!(violation.witness.machine, 0);
        }
        _ => unreachable!(),
    }
    assert!(verify_certificate(&cert).valid);
}

#[test]
fn violation_scripts_on_every_pinned_step() {
    let n = 4;
    let params = game_params(n).unwrap();
    let all_zero = vec![0usize; n - 1];

    // Drop the cheapest proper task after the pinning discount.
    let mut b1_drop_props = all_zero.clone();
    b1_drop_props[n - 2] = 1;
    let b1_drop = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &all_zero)),
        PlannedStep::new(MatrixKind::B1, assignment(n, &b1_drop_props)),
    ];

    // Grab the ordinal whose price just rose.
    let case2_a1 = case2_props(n, 2, 1);
    let mut b2_grab_props = case2_a1.clone();
    b2_grab_props[1] = 0;
    let b2_grab = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &case2_a1)),
        PlannedStep::new(MatrixKind::B2 { j: 2 }, assignment(n, &b2_grab_props)),
    ];

    // Detour machine abandons the task whose price just fell.
    let mut c2_drop_props = case2_a1.clone();
    c2_drop_props[1] = 0;
    let c2_drop = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &case2_a1)),
        PlannedStep::new(MatrixKind::B2 { j: 2 }, assignment(n, &case2_a1)),
        PlannedStep::new(
            MatrixKind::C2 { j: 2, detour: 1 },
            assignment(n, &c2_drop_props),
        ),
    ];

    // Machine 0 abandons the now-free second ordinal.
    let case3 = case3_props(n);
    let mut b3_drop_props = case3.clone();
    b3_drop_props[1] = 2;
    let b3_drop = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &case3)),
        PlannedStep::new(MatrixKind::B3, assignment(n, &b3_drop_props)),
    ];

    // Machine 1 abandons the first ordinal after its discount.
    let mut c3_drop_props = case3.clone();
    c3_drop_props[0] = 0;
    let c3_drop = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, assignment(n, &case3)),
        PlannedStep::new(MatrixKind::B3, assignment(n, &case3)),
        PlannedStep::new(MatrixKind::C3, assignment(n, &c3_drop_props)),
    ];

    for (name, steps) in [
        ("b1-drop", b1_drop),
        ("b2-grab", b2_grab),
        ("c2-drop", c2_drop),
        ("b3-drop", b3_drop),
        ("c3-drop", c3_drop),
    ] {
        let mech = scripted_game(name, &params, false, &steps).unwrap();
        let cert = run_game(&mech, &params)
            .unwrap_or_else(|e| panic!("{name}: game failed: {e}"));
        assert_violation(&cert);
        assert!(verify_certificate(&cert).valid, "{name}");
    }
}

#[test]
fn surrogate_assignment_yields_unbounded_ratio() {
    let n = 3;
    let params = game_params(n).unwrap();
    // Machine 1 claims machine 0's dummy task after the discount step.
    let mut bad = assignment(n, &[0, 0]);
    bad[0] = 1;
    let steps = vec![
        PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n))),
        PlannedStep::new(MatrixKind::A1, bad),
    ];
    let mech = scripted_game("grabby", &params, false, &steps).unwrap();
    let cert = run_game(&mech, &params).unwrap();
    match &cert.outcome {
        Outcome::UnboundedRatio {
            task,
            machine,
            implied_ratio,
        } => {
            assert_eq!((*task, *machine), (0, 1));
            // The first discounted instance has optimum 1.
            assert!((implied_ratio - params.big_m).abs() < 1e-6 * params.big_m);
        }
        other => panic!("expected unbounded outcome, got {other:?}"),
    }
    assert!(verify_certificate(&cert).valid);
}

#[test]
fn scripted_oracle_without_a_line_fails_cleanly() {
    let n = 3;
    let params = game_params(n).unwrap();
    // Only the opening query is scripted.
    let steps = vec![PlannedStep::new(MatrixKind::A0, assignment(n, &a0_props(n)))];
    let mech = scripted_game("partial", &params, false, &steps).unwrap();
    let err = run_game(&mech, &params).unwrap_err();
    let msg = format!("{err}");
    assert!(msg.contains("no scripted response"), "got: {msg}");
}

#[test]
fn certificates_serialize_deterministically() {
    let params = game_params(4).unwrap();
    let mech = vcg(TieBreak::LowestIndex);
    let one = serde_json::to_string(&run_game(&mech, &params).unwrap()).unwrap();
    let two = serde_json::to_string(&run_game(&mech, &params).unwrap()).unwrap();
    assert_eq!(one, two);
    // And the round trip preserves the certificate exactly.
    let parsed: Certificate = serde_json::from_str(&one).unwrap();
    assert_eq!(serde_json::to_string(&parsed).unwrap(), one);
}

#[test]
fn tampered_certificates_are_rejected() {
    let params = game_params(3).unwrap();
    let cert = run_game(&vcg(TieBreak::LowestIndex), &params).unwrap();
    assert!(verify_certificate(&cert).valid);

    // Inflated outcome value.
    let mut tampered = cert.clone();
    if let Outcome::RatioAtLeast { value, .. } = &mut tampered.outcome {
        *value += 1e-3;
    }
    let report = verify_certificate(&tampered);
    assert!(!report.valid);
    assert!(!report.failures.is_empty());

    // Rewritten allocation in the final step.
    let mut tampered = cert.clone();
    let last = tampered.trace.last_mut().unwrap();
    let mut assignment: Vec<usize> = last.allocation.assignments().to_vec();
    let col = assignment.len() - 1;
    assignment[col] = 1;
    last.allocation = Allocation::new(params.n, assignment).unwrap();
    assert!(!verify_certificate(&tampered).valid);

    // Perturbed parameters no longer rebuild the recorded matrices.
    let mut tampered = cert.clone();
    tampered.params.r += 1e-3;
    assert!(!verify_certificate(&tampered).valid);

    // Wrong claimed case.
    let mut tampered = cert;
    tampered.case_taken = Some(3);
    assert!(!verify_certificate(&tampered).valid);
}

#[test]
fn greedy_load_is_caught_by_the_game() {
    for n in [3usize, 4, 5, 6] {
        let params = game_params(n).unwrap();
        let cert = run_game(&schedcert_core::mechanisms::greedy_load(), &params).unwrap();
        match &cert.outcome {
            Outcome::TruthfulnessViolation { violation } => {
                assert!(violation.witness.value > 0.0);
            }
            Outcome::RatioAtLeast { value, .. } => {
                let rho = analytic_bound(n).unwrap().rho;
                assert!(*value >= rho - 1e-3);
            }
            Outcome::UnboundedRatio { .. } => {
                panic!("greedy load never accepts a surrogate task")
            }
        }
        assert!(verify_certificate(&cert).valid);
    }
}

#[test]
fn all_vcg_tie_breaks_reach_the_bound() {
    for n in [3usize, 4, 5, 6] {
        let params = game_params(n).unwrap();
        let rho = analytic_bound(n).unwrap().rho;
        for mech in [
            vcg(TieBreak::LowestIndex),
            vcg(TieBreak::HighestIndex),
            vcg(TieBreak::PreferSecond),
        ] {
            let cert = run_game(&mech, &params).unwrap();
            let value = ratio_of(&cert);
            assert!(
                value >= rho - 1e-3,
                "{} at n={n}: {value} vs {rho}",
                mech.name()
            );
            assert!(verify_certificate(&cert).valid);
        }
    }
}

#[test]
fn game_params_respect_guarantee_identity(){
    // The parameters the CLI defaults to never promise more than the
    // analytic bound and lose at most the boundary shift.
    for n in 3..=12 {
        let params = game_params(n).unwrap();
        let g = schedcert_core::adversary::guaranteed_ratio(&params);
        let rho = analytic_bound(n).unwrap().rho;
        assert!(g <= rho + 1e-12);
        assert!(g >= rho - 1e-5);
    }
}

#[test]
fn build_matrix_rejects_invalid_params() {
    let params = GameParams::new(3, 0.5, 1.5).unwrap();
    let mut broken = params;
    broken.r = 1.5;
    assert!(build_matrix(MatrixKind::A0, &broken).is_err());
}
