//! Acceptance criteria 1 to 8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::f64::consts::FRAC_PI_8;
use std::time::Instant;

use msqkd::adversary::{
    adversary_distinguishability, collective_constraint_report, collective_from_paper_params,
    AttackStrategy, Channel, CollectiveParams, CollectiveVariant,
};
use msqkd::analysis::{
    chi_square_case_test, detection_report, efficiency_expected, enumerate_branches,
    exact_distinguishability, per_round_detection, HONEST_CASE_WEIGHTS,
};
use msqkd::protocol::{
    party_step, qubit_efficiency, run_protocol, run_rounds, write_transcript_log, Execution,
    ForcedDraws, ParticipantOp, Party, ProtocolConfig,
};
use msqkd::qubit::{Basis1Q, PureState1Q};
use msqkd::rng::RngStream;

const ROUNDS: usize = 100_000;
const N_VALUES: [u32; 4] = [1, 4, 16, 64];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg(seed: u64) -> ProtocolConfig {
    ProtocolConfig {
        rounds: ROUNDS,
        master_seed: seed,
        ..Default::default()
    }
}

fn reference_detection_table() -> Vec<(&'static str, f64)> {
    let breidbart = 0.25 * (FRAC_PI_8.cos() - FRAC_PI_8.sin()).powi(2);
    vec![
        ("z-measure", 0.25),
        ("breidbart", breidbart),
        ("faked-0/z", 7.0 / 16.0),
        ("faked-0/x", 0.25),
        ("faked-1/z", 7.0 / 16.0),
        ("faked-1/x", 0.25),
        ("faked-bell/bell", 3.0 / 8.0),
        ("faked-bell/computational", 7.0 / 16.0),
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (_, out) = run_protocol(&cfg(1), &AttackStrategy::honest(), Execution::Parallel).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let freq = out.counts.frequencies();
    let worst = freq
        .iter()
        .zip(HONEST_CASE_WEIGHTS)
        .map(|(f, w)| (f - w).abs())
        .fold(0.0, f64::max);
    let chi = chi_square_case_test(&out.counts, &HONEST_CASE_WEIGHTS, 0.01).unwrap();
    outcome(
        worst <= 0.01 && chi.pass && elapsed < 10.0,
        format!(
            "max |freq - weight| = {worst:.4}, chi2 = {:.3} (p = {:.3}), s4 chi2 = {:.3} (p = {:.3}), {elapsed:.2} s",
            chi.statistic, chi.p_value, chi.s4_statistic, chi.s4_p_value
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut failures = Vec::new();
    let mut key_bits = 0;
    for seed in 0..20 {
        let (_, out) =
            run_protocol(&cfg(seed), &AttackStrategy::honest(), Execution::Parallel).unwrap();
        key_bits += out.raw_key_alice.len();
        if out.raw_key_alice != out.raw_key_bob
            || out.per_situation_error_rate != [0.0; 4]
            || out.aborted
        {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!("20 seeds, {key_bits} raw key bits, failing seeds {failures:?}"),
    )
}

fn criterion_3() -> Outcome {
    let defaults = ProtocolConfig::default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (name, want) in reference_detection_table() {
        let got = per_round_detection(&AttackStrategy::builtin(name).unwrap(), &defaults).unwrap();
        worst = worst.max((got - want).abs());
        lines.push(format!("{name}={got:.12}"));
    }
    outcome(
        worst <= 1e-12,
        format!("max deviation {worst:.1e}; {}", lines.join(", ")),
    )
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (k, (name, _)) in reference_detection_table().into_iter().enumerate() {
        let s = AttackStrategy::builtin(name).unwrap();
        let r = detection_report(&s, &cfg(100 + k as u64), &N_VALUES, Execution::Parallel).unwrap();
        pass &= r.consistent;
        let z = (r.empirical_detection - r.per_round_detection) / r.stderr;
        let bad: Vec<u32> = r
            .curve
            .iter()
            .filter(|c| !c.consistent)
            .map(|c| c.n)
            .collect();
        lines.push(format!(
            "{name} z={z:+.2}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!(" curve-fail {bad:?}")
            }
        ));
    }
    outcome(pass, lines.join(", "))
}

fn criterion_5() -> Outcome {
    let c = cfg(5);
    let (_, out) = run_protocol(&c, &AttackStrategy::honest(), Execution::Parallel).unwrap();
    let eff = qubit_efficiency(&out, &c);
    let expected = efficiency_expected(&ProtocolConfig::default());
    outcome(
        (eff - 0.125).abs() <= 0.01 && expected == 0.125,
        format!("empirical {eff:.4}, analytic {expected}"),
    )
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();

    // (a) constrained parameters, both ancilla variants
    let params = CollectiveParams::zero_detection();
    let mut a_pass = true;
    for variant in [CollectiveVariant::Shared, CollectiveVariant::Fresh] {
        let r = collective_constraint_report(&params, variant, Basis1Q::Z).unwrap();
        let s = collective_from_paper_params(&params, variant, Basis1Q::Z).unwrap();
        let ts = run_rounds(&cfg(6), &s, Execution::Parallel).unwrap();
        let mc = adversary_distinguishability(&ts).unwrap();
        let ok = r.all_residuals_zero
            && r.detection_channels_1_2 == 0.0
            && r.distinguishability <= 1e-10
            && mc <= 1e-10;
        a_pass &= ok;
        notes.push(format!(
            "(a) {variant:?}: ch1-2 detection {}, exact D {:.1e}, MC D {mc:.1e}",
            r.detection_channels_1_2, r.distinguishability
        ));
    }

    // (b) randomized collective attacks
    let mut rng = common::rng(66);
    let defaults = ProtocolConfig::default();
    let (mut informative, mut violations, mut min_detection) = (0, 0, f64::INFINITY);
    let samples = 200;
    for k in 0..samples {
        let s = common::random_collective(k, &mut rng);
        let dist = exact_distinguishability(&s, &defaults).unwrap();
        let det = per_round_detection(&s, &defaults).unwrap();
        if dist > 0.01 {
            informative += 1;
            min_detection = min_detection.min(det);
            if det <= 0.0 {
                violations += 1;
            }
        }
    }
    let b_pass = violations == 0 && informative > 0;
    notes.push(format!(
        "(b) {samples} samples, {informative} with D > 0.01, min detection among them {min_detection:.2e}, violations {violations}"
    ));

    // (c) fresh ancillas with orthonormal bases
    let mut flagged = 0;
    let trials = 100;
    for _ in 0..trials {
        let p = common::orthonormal_fresh_params(2, &mut rng);
        let r = collective_constraint_report(&p, CollectiveVariant::Fresh, Basis1Q::X).unwrap();
        let key0 = r
            .residuals
            .iter()
            .find(|x| x.name == "channel-2/key-bit-0")
            .unwrap();
        if r.contradictions.iter().any(|c| c.contains("no solution"))
            && (key0.residual - 1.0).abs() < 1e-9
            && !r.all_residuals_zero
            && r.no_go_consistent
        {
            flagged += 1;
        }
    }
    let c_pass = flagged == trials;
    notes.push(format!("(c) contradiction flagged in {flagged}/{trials}"));

    outcome(a_pass && b_pass && c_pass, notes.join("; "))
}

/// TP outcome probabilities after Bob's MH step for a forced case-5 branch,
/// with the qubit Alice emits optionally multiplied by `phase`.
/// `None` when the branch has zero probability under the strategy.
fn case5_tp_statistics(strategy: &AttackStrategy, phase: f64) -> Option<Vec<f64>> {
    use ParticipantOp::*;
    let mut d = ForcedDraws::new(RngStream::new(7, 7))
        .outcome(Party::Alice, 1)
        .outcome(Party::Bob, 1);
    let mut memory = Vec::new();
    let sys = strategy
        .hook_channel(Channel::TpToAlice, strategy.hook_prepare())
        .unwrap();
    let (a, q, r) = party_step(Mh, &sys, Party::Alice, &mut d).ok()?;
    assert_eq!(a, 1);
    let q = q.with_global_phase(num_complex::Complex64::new(phase, 0.0));
    let sys = strategy.hook_forward(Channel::AliceToBob, &q, r, &mut memory);
    let sys = strategy.hook_channel(Channel::AliceToBob, sys).unwrap();
    let (b, q, r) = party_step(Mh, &sys, Party::Bob, &mut d).ok()?;
    assert_eq!(b, 1);
    let q = q.with_global_phase(num_complex::Complex64::new(phase, 0.0));
    let sys = strategy.hook_forward(Channel::BobToTp, &q, r, &mut memory);
    let sys = strategy.hook_channel(Channel::BobToTp, sys).unwrap();
    Some(
        strategy
            .tp_branches(&sys)
            .unwrap()
            .iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    )
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    let minus = PureState1Q::minus();
    let neg_minus = minus.with_global_phase(num_complex::Complex64::new(-1.0, 0.0));
    assert!(neg_minus.same_ray(&minus, 1e-15));
    let mut compared = 0;
    for name in msqkd::adversary::BUILTIN_STRATEGIES {
        let s = AttackStrategy::builtin(name).unwrap();
        let (Some(a), Some(b)) = (case5_tp_statistics(&s, 1.0), case5_tp_statistics(&s, -1.0))
        else {
            continue;
        };
        compared += 1;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    // the honest oracle weight of case 5 equals that of the phase-free case 1
    let e = enumerate_branches(&AttackStrategy::honest(), &ProtocolConfig::default()).unwrap();
    let dist = e.case_distribution();
    worst = worst.max((dist[4] - dist[0]).abs());
    outcome(
        worst <= 1e-12 && compared > 0,
        format!("max deviation of TP outcome statistics {worst:.1e} over {compared} strategies reaching case 5"),
    )
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut compared = Vec::new();
    for name in ["honest", "faked-bell/bell", "collective-cnot", "breidbart"] {
        let s = AttackStrategy::builtin(name).unwrap();
        let c = ProtocolConfig {
            rounds: 20_000,
            master_seed: 88,
            ..Default::default()
        };
        let mut logs = Vec::new();
        let mut reports = Vec::new();
        for exec in [Execution::Serial, Execution::Parallel, Execution::Parallel] {
            let ts = run_rounds(&c, &s, exec).unwrap();
            let mut buf = Vec::new();
            write_transcript_log(&mut buf, &ts).unwrap();
            logs.push(buf);
            let r = detection_report(&s, &c, &N_VALUES, exec).unwrap();
            reports.push(serde_json::to_vec(&r).unwrap());
        }
        let same =
            logs.windows(2).all(|w| w[0] == w[1]) && reports.windows(2).all(|w| w[0] == w[1]);
        pass &= same;
        compared.push(format!(
            "{name}: {}",
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    outcome(pass, compared.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("honest case distribution", criterion_1),
        ("honest key agreement", criterion_2),
        ("oracle exactness", criterion_3),
        ("Monte Carlo vs oracle", criterion_4),
        ("efficiency", criterion_5),
        ("collective no-go", criterion_6),
        ("global-phase invariance", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} -- {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
