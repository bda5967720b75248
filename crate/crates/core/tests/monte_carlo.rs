//! Statistical checks of the simulator against the oracle, and collective
//! attack behavior.

use approx::assert_abs_diff_eq;
use msqkd::adversary::{
    adversary_distinguishability, cnot, collective_constraint_report, AttackStrategy,
    CollectiveParams, CollectiveVariant,
};
use msqkd::analysis::{
    chi_square_case_test, detection_report, enumerate_branches, exact_distinguishability,
    per_round_detection, HONEST_CASE_WEIGHTS,
};
use msqkd::protocol::{run_protocol, run_rounds, Execution, ProtocolConfig, Situation};
use msqkd::qubit::{Basis1Q, JointUnitary};
use msqkd::Error;

fn cfg(rounds: usize, seed: u64) -> ProtocolConfig {
    ProtocolConfig {
        rounds,
        master_seed: seed,
        ..Default::default()
    }
}

#[test]
fn chi_square_calibration_over_100_seeds() {
    let mut passes = 0;
    for seed in 0..100 {
        let (_, out) = run_protocol(
            &cfg(100_000, seed),
            &AttackStrategy::honest(),
            Execution::Parallel,
        )
        .unwrap();
        if chi_square_case_test(&out.counts, &HONEST_CASE_WEIGHTS, 0.01)
            .unwrap()
            .pass
        {
            passes += 1;
        }
    }
    assert!(passes >= 99, "{passes}/100 seeds pass");
}

#[test]
fn chi_square_rejects_attacked_histogram() {
    let (_, out) = run_protocol(
        &cfg(20_000, 3),
        &AttackStrategy::builtin("faked-0/x").unwrap(),
        Execution::Parallel,
    )
    .unwrap();
    assert!(
        !chi_square_case_test(&out.counts, &HONEST_CASE_WEIGHTS, 0.01)
            .unwrap()
            .pass
    );
}

#[test]
fn empty_run_is_rejected() {
    assert_eq!(
        run_rounds(&cfg(0, 0), &AttackStrategy::honest(), Execution::Serial),
        Err(Error::EmptyRun)
    );
}

#[test]
fn honest_run_never_aborts() {
    let (_, out) = run_protocol(
        &cfg(50_000, 9),
        &AttackStrategy::honest(),
        Execution::Parallel,
    )
    .unwrap();
    assert!(!out.aborted);
    assert_eq!(out.raw_key_alice, out.raw_key_bob);
}

#[test]
fn attacked_runs_abort() {
    for name in [
        "z-measure",
        "breidbart",
        "faked-bell/bell",
        "collective-cnot",
    ] {
        let (_, out) = run_protocol(
            &cfg(5_000, 2),
            &AttackStrategy::builtin(name).unwrap(),
            Execution::Parallel,
        )
        .unwrap();
        assert!(out.aborted, "{name}");
    }
}

#[test]
fn reports_agree_with_oracle() {
    for name in ["z-measure", "faked-bell/computational", "collective-cnot"] {
        let r = detection_report(
            &AttackStrategy::builtin(name).unwrap(),
            &cfg(50_000, 4),
            &[1, 4, 16, 64],
            Execution::Parallel,
        )
        .unwrap();
        assert!(r.consistent, "{name}: {r:?}");
    }
}

#[test]
fn cnot_on_first_channel_copies_the_key() {
    let s = AttackStrategy::builtin("collective-cnot").unwrap();
    let defaults = ProtocolConfig::default();
    assert!(exact_distinguishability(&s, &defaults).unwrap() > 0.9);
    let by = enumerate_branches(&s, &defaults)
        .unwrap()
        .flagged_by_situation();
    assert!(by[Situation::HmMh.index()] > 0.0 && by[Situation::HmHm.index()] > 0.0);
    let ts = run_rounds(&cfg(20_000, 11), &s, Execution::Parallel).unwrap();
    assert!(adversary_distinguishability(&ts).unwrap() > 0.9);
}

#[test]
fn cnot_on_second_channel_copies_the_key() {
    let defaults = ProtocolConfig::default();
    let with = |basis| {
        AttackStrategy::collective_fresh(
            [JointUnitary::identity(2), cnot(), JointUnitary::identity(2)],
            basis,
        )
    };
    let z = with(Basis1Q::Z);
    assert!(exact_distinguishability(&z, &defaults).unwrap() > 0.9);
    let by = enumerate_branches(&z, &defaults)
        .unwrap()
        .flagged_by_situation();
    assert!(by[Situation::HmMh.index()] > 0.0);
    assert_abs_diff_eq!(by[Situation::HmHm.index()], 0.0, epsilon = 1e-12);
    let ts = run_rounds(&cfg(20_000, 12), &z, Execution::Parallel).unwrap();
    assert!(adversary_distinguishability(&ts).unwrap() > 0.9);

    let x = with(Basis1Q::X);
    assert!(exact_distinguishability(&x, &defaults).unwrap() <= 1e-10);
    assert!(per_round_detection(&x, &defaults).unwrap() > 0.0);
}

#[test]
fn zero_detection_params_leak_nothing() {
    let s = AttackStrategy::builtin("collective-zero-detection").unwrap();
    let defaults = ProtocolConfig::default();
    assert_eq!(per_round_detection(&s, &defaults).unwrap(), 0.0);
    assert!(exact_distinguishability(&s, &defaults).unwrap() <= 1e-10);
    let (ts, out) = run_protocol(&cfg(20_000, 13), &s, Execution::Parallel).unwrap();
    assert!(!out.aborted);
    assert!(adversary_distinguishability(&ts).unwrap() <= 1e-10);
}

#[test]
fn same_params_with_x_measurement_are_caught() {
    let r = collective_constraint_report(
        &CollectiveParams::zero_detection(),
        CollectiveVariant::Shared,
        Basis1Q::X,
    )
    .unwrap();
    assert!(!r.all_residuals_zero);
    assert!(r.detection > 0.0);
    assert_abs_diff_eq!(r.detection_channels_1_2, 0.0, epsilon = 1e-12);
    assert!(r.no_go_consistent);
}

#[test]
fn shared_channel_two_residuals_vanish() {
    let r = collective_constraint_report(
        &CollectiveParams::zero_detection(),
        CollectiveVariant::Shared,
        Basis1Q::Z,
    )
    .unwrap();
    for x in r
        .residuals
        .iter()
        .filter(|x| x.name.starts_with("channel-2"))
    {
        assert!(x.residual <= 1e-12, "{x:?}");
    }
    assert!(r.contradictions.is_empty());
}

#[test]
fn monte_carlo_distinguishability_tracks_exact_value() {
    let weak = AttackStrategy::collective_shared(
        [JointUnitary::identity(2), cnot(), JointUnitary::identity(2)],
        Basis1Q::Z,
    )
    .unwrap();
    let exact = exact_distinguishability(&weak, &ProtocolConfig::default()).unwrap();
    let ts = run_rounds(&cfg(40_000, 14), &weak, Execution::Parallel).unwrap();
    let mc = adversary_distinguishability(&ts).unwrap();
    assert!((mc - exact).abs() < 0.03, "mc {mc} exact {exact}");
}
