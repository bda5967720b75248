//! Exact branch-enumeration oracle and statistics against Monte Carlo runs.
//!
//! The oracle walks every operation choice and every measurement outcome of
//! a round with its exact Born weight. It shares the adversary hooks with the
//! simulator but re-derives the participants' steps and the error predicate
//! on its own.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::adversary::{
    adversary_distinguishability, classical_quantum_view, key_conditioned_distance, AttackStrategy,
    Channel,
};
use crate::error::{Error, Result};
use crate::protocol::{
    classify, run_protocol, CaseHistogram, Execution, ParticipantOp, ProtocolConfig, Situation,
};
use crate::qubit::{hadamard, norm_sqr, DensityMatrix, JointState, PureState1Q, DEGENERATE_PROB};

/// Probabilities of cases 1..=9 in an honest run with default parameters.
pub const HONEST_CASE_WEIGHTS: [f64; 9] = [
    1.0 / 16.0,
    1.0 / 16.0,
    1.0 / 8.0,
    1.0 / 16.0,
    1.0 / 16.0,
    1.0 / 8.0,
    1.0 / 4.0,
    1.0 / 8.0,
    1.0 / 8.0,
];

/// One leaf of the round's branch tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub alice_op: ParticipantOp,
    pub bob_op: ParticipantOp,
    pub alice_bit: u8,
    pub bob_bit: u8,
    pub tp_outcome: usize,
    pub tp_bit: u8,
    /// For key-generating rounds: whether the round is disclosed.
    pub disclosed: Option<bool>,
    pub case_id: Option<u8>,
    pub weight: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchEnumeration {
    pub branches: Vec<Branch>,
}

impl BranchEnumeration {
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().fold(0.0, |acc, b| acc + b.weight)
    }

    pub fn flagged_weight(&self) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.flagged)
            .fold(0.0, |acc, b| acc + b.weight)
    }

    /// Probability of each case 1..=9.
    pub fn case_distribution(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for b in &self.branches {
            if let Some(c) = b.case_id {
                out[c as usize - 1] += b.weight;
            }
        }
        out
    }

    /// Probability that a round falls outside the honest case table.
    pub fn off_table_weight(&self) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.case_id.is_none())
            .fold(0.0, |acc, b| acc + b.weight)
    }

    /// Flagged weight within each situation.
    pub fn flagged_by_situation(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for b in self.branches.iter().filter(|b| b.flagged) {
            out[Situation::of(b.alice_op, b.bob_op).index()] += b.weight;
        }
        out
    }
}

struct PartyBranch {
    bit: u8,
    probability: f64,
    emitted: PureState1Q,
    residual: Vec<Complex64>,
}

fn party_branches(op: ParticipantOp, system: &JointState) -> Vec<PartyBranch> {
    let measured = match op {
        ParticipantOp::Mh => system.clone(),
        ParticipantOp::Hm => system.apply_hadamard(),
    };
    let mut out = Vec::with_capacity(2);
    for bit in 0..2u8 {
        let basis_state = PureState1Q::computational(bit);
        let mut residual = measured.project_qubit(&basis_state);
        let probability = norm_sqr(&residual);
        if probability < DEGENERATE_PROB {
            continue;
        }
        let scale = 1.0 / probability.sqrt();
        residual.iter_mut().for_each(|z| *z *= scale);
        let emitted = match op {
            ParticipantOp::Mh => hadamard(&basis_state),
            ParticipantOp::Hm => basis_state,
        };
        out.push(PartyBranch {
            bit,
            probability,
            emitted,
            residual,
        });
    }
    out
}

/// Whether the round's honesty check fails; `None` for a key-generating
/// round, whose check depends on disclosure.
fn check_error(
    alice_op: ParticipantOp,
    bob_op: ParticipantOp,
    a: u8,
    b: u8,
    tp: u8,
) -> Option<bool> {
    use ParticipantOp::*;
    let alice_abort = alice_op == Hm && a == 1;
    match (alice_op, bob_op) {
        (Mh, Mh) => Some(tp != b),
        (Mh, Hm) => None,
        (Hm, Mh) => Some(alice_abort || a != 0 || b != 0 || tp != 0),
        (Hm, Hm) => Some(alice_abort || a != 0),
    }
}

/// A (Alice outcome, Bob outcome) node with the TP's view at their final
/// measurement.
struct ViewNode {
    alice_op: ParticipantOp,
    bob_op: ParticipantOp,
    alice_bit: u8,
    weight: f64,
    view: Option<DensityMatrix>,
}

fn walk(
    strategy: &AttackStrategy,
    cfg: &ProtocolConfig,
    mut leaf: impl FnMut(Branch),
    mut node: impl FnMut(ViewNode),
) -> Result<()> {
    use ParticipantOp::*;
    let op_weight = |op: ParticipantOp, p_mh: f64| if op == Mh { p_mh } else { 1.0 - p_mh };
    for alice_op in [Mh, Hm] {
        for bob_op in [Mh, Hm] {
            let w_ops = op_weight(alice_op, cfg.p_alice_mh) * op_weight(bob_op, cfg.p_bob_mh);
            if w_ops <= 0.0 {
                continue;
            }
            let start = strategy.hook_channel(Channel::TpToAlice, strategy.hook_prepare())?;
            for a in party_branches(alice_op, &start) {
                let mut memory_a = Vec::new();
                let sys = strategy.hook_forward(
                    Channel::AliceToBob,
                    &a.emitted,
                    a.residual,
                    &mut memory_a,
                );
                let sys = strategy.hook_channel(Channel::AliceToBob, sys)?;
                for b in party_branches(bob_op, &sys) {
                    let mut memory = memory_a.clone();
                    let sys = strategy.hook_forward(
                        Channel::BobToTp,
                        &b.emitted,
                        b.residual,
                        &mut memory,
                    );
                    let sys = strategy.hook_channel(Channel::BobToTp, sys)?;
                    let tp = strategy.tp_branches(&sys)?;
                    let w_ab = w_ops * a.probability * b.probability;
                    if !strategy.is_honest() {
                        memory.push(classical_quantum_view(&tp));
                    }
                    let mut it = memory.into_iter();
                    let view = it.next().map(|first| it.fold(first, |acc, m| acc.kron(&m)));
                    node(ViewNode {
                        alice_op,
                        bob_op,
                        alice_bit: a.bit,
                        weight: w_ab,
                        view,
                    });
                    for (k, r) in tp.iter().enumerate() {
                        let p = norm_sqr(r);
                        if p < DEGENERATE_PROB {
                            continue;
                        }
                        let tp_bit = strategy.policy().announce(k);
                        let aborted = alice_op == Hm && a.bit == 1;
                        let case_id = classify(alice_op, bob_op, a.bit, b.bit, aborted).case_id;
                        let base = Branch {
                            alice_op,
                            bob_op,
                            alice_bit: a.bit,
                            bob_bit: b.bit,
                            tp_outcome: k,
                            tp_bit,
                            disclosed: None,
                            case_id,
                            weight: w_ab * p,
                            flagged: false,
                        };
                        match check_error(alice_op, bob_op, a.bit, b.bit, tp_bit) {
                            Some(flagged) => leaf(Branch { flagged, ..base }),
                            None => {
                                let mismatch = a.bit != b.bit;
                                for (disclosed, share) in [
                                    (true, cfg.check_fraction),
                                    (false, 1.0 - cfg.check_fraction),
                                ] {
                                    if share > 0.0 {
                                        leaf(Branch {
                                            disclosed: Some(disclosed),
                                            flagged: disclosed && mismatch,
                                            weight: base.weight * share,
                                            ..base.clone()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Every branch of one round under `strategy`, with exact weights.
pub fn enumerate_branches(
    strategy: &AttackStrategy,
    cfg: &ProtocolConfig,
) -> Result<BranchEnumeration> {
    let mut branches = Vec::new();
    walk(strategy, cfg, |b| branches.push(b), |_| {})?;
    Ok(BranchEnumeration { branches })
}

/// Probability that a single round is flagged by the public discussion.
pub fn per_round_detection(strategy: &AttackStrategy, cfg: &ProtocolConfig) -> Result<f64> {
    Ok(enumerate_branches(strategy, cfg)?
        .flagged_weight()
        .clamp(0.0, 1.0))
}

/// Exact trace distance between the TP's key-conditioned memory states over
/// key-generating rounds.
pub fn exact_distinguishability(strategy: &AttackStrategy, cfg: &ProtocolConfig) -> Result<f64> {
    let mut views = Vec::new();
    walk(
        strategy,
        cfg,
        |_| {},
        |n| {
            if Situation::of(n.alice_op, n.bob_op) == Situation::MhHm {
                views.push(n);
            }
        },
    )?;
    let mut triples = Vec::with_capacity(views.len());
    for n in views {
        let view = n
            .view
            .ok_or_else(|| Error::InsufficientData("strategy keeps no adversary memory".into()))?;
        triples.push((n.alice_bit, n.weight, view));
    }
    key_conditioned_distance(triples)
}

/// `1 − (1 − p)^N` for each `N`.
pub fn detection_curve(p: f64, n_values: &[u32]) -> Vec<f64> {
    let q = 1.0 - p.clamp(0.0, 1.0);
    n_values.iter().map(|&n| 1.0 - q.powf(n as f64)).collect()
}

/// Raw-key bits per prepared qubit implied by the configuration.
pub fn efficiency_expected(cfg: &ProtocolConfig) -> f64 {
    cfg.p_alice_mh * (1.0 - cfg.p_bob_mh) * (1.0 - cfg.check_fraction)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    /// Pearson statistic over the nine cases (8 degrees of freedom).
    pub statistic: f64,
    pub p_value: f64,
    /// Statistic for situation-4 announcements against (1/2, 1/2) (1 degree
    /// of freedom).
    pub s4_statistic: f64,
    pub s4_p_value: f64,
    pub alpha: f64,
    /// Both tests pass at `alpha / 2` each.
    pub pass: bool,
}

/// Smallest histogram total accepted by [`chi_square_case_test`].
pub const CHI_SQUARE_MIN_TOTAL: u64 = 1000;

fn pearson(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let o = o as f64;
            if e > 0.0 {
                (o - e).powi(2) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum()
}

fn upper_tail(df: f64, statistic: f64) -> f64 {
    if !statistic.is_finite() {
        return 0.0;
    }
    ChiSquared::new(df).map_or(0.0, |d| d.sf(statistic))
}

/// Goodness of fit of a case histogram to `expected` case probabilities,
/// combined with a balance test on situation-4 announcements.
pub fn chi_square_case_test(
    observed: &CaseHistogram,
    expected: &[f64; 9],
    alpha: f64,
) -> Result<ChiSquareResult> {
    let total = observed.total();
    if total < CHI_SQUARE_MIN_TOTAL {
        return Err(Error::InsufficientData(format!(
            "{total} rounds in the histogram, need at least {CHI_SQUARE_MIN_TOTAL}"
        )));
    }
    let n = total as f64;
    let expected_counts: Vec<f64> = expected.iter().map(|p| p * n).collect();
    let mut statistic = pearson(&observed.cases, &expected_counts);
    if observed.off_table > 0 {
        statistic = f64::INFINITY;
    }
    let p_value = upper_tail(8.0, statistic);

    let s4 = observed.s4_announcements;
    let s4_n = (s4[0] + s4[1]) as f64;
    let s4_statistic = pearson(&s4, &[s4_n / 2.0, s4_n / 2.0]);
    let s4_p_value = if s4_n > 0.0 {
        upper_tail(1.0, s4_statistic)
    } else {
        1.0
    };

    let level = alpha / 2.0;
    Ok(ChiSquareResult {
        statistic,
        p_value,
        s4_statistic,
        s4_p_value,
        alpha,
        pass: p_value > level && s4_p_value > level,
    })
}

/// Whether `observed` lies within three binomial standard errors of `p`
/// over `trials` trials. A zero (or one) probability demands an exact match.
pub fn within_three_sigma(observed: f64, p: f64, trials: usize) -> bool {
    if p <= 0.0 || p >= 1.0 {
        return (observed - p).abs() <= 1e-12;
    }
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    (observed - p).abs() <= 3.0 * se + 1e-12
}

/// Fraction of consecutive, non-overlapping blocks of `n` rounds that contain
/// a flagged round, and the number of complete blocks.
pub fn grouped_detection(flagged: &[bool], n: usize) -> (f64, usize) {
    if n == 0 {
        return (0.0, 0);
    }
    let blocks = flagged.len() / n;
    if blocks == 0 {
        return (0.0, 0);
    }
    let hit = flagged
        .chunks_exact(n)
        .filter(|chunk| chunk.iter().any(|&f| f))
        .count();
    (hit as f64 / blocks as f64, blocks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u32,
    pub analytic: f64,
    pub empirical: f64,
    pub blocks: usize,
    pub stderr: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub strategy: String,
    pub rounds: usize,
    pub seed: u64,
    pub per_round_detection: f64,
    pub empirical_detection: f64,
    pub stderr: f64,
    pub consistent: bool,
    pub verdict: String,
    pub curve: Vec<CurvePoint>,
    pub per_situation_error_rate: [f64; 4],
    pub aborted: bool,
    /// Monte Carlo estimate from the run's adversary records.
    pub distinguishability: Option<f64>,
    pub exact_distinguishability: Option<f64>,
}

/// Runs the protocol under `strategy` and compares the flagged-round rate
/// and grouped detection with the oracle.
pub fn detection_report(
    strategy: &AttackStrategy,
    cfg: &ProtocolConfig,
    n_values: &[u32],
    execution: Execution,
) -> Result<DetectionReport> {
    let p = per_round_detection(strategy, cfg)?;
    let (transcripts, outcome) = run_protocol(cfg, strategy, execution)?;
    let rounds = transcripts.len();
    let empirical = outcome.flagged_fraction();
    let consistent_round = within_three_sigma(empirical, p, rounds);

    let analytic = detection_curve(p, n_values);
    let curve: Vec<CurvePoint> = n_values
        .iter()
        .zip(analytic)
        .map(|(&n, q)| {
            let (emp, blocks) = grouped_detection(&outcome.flagged, n as usize);
            CurvePoint {
                n,
                analytic: q,
                empirical: emp,
                blocks,
                stderr: (q * (1.0 - q) / blocks.max(1) as f64).sqrt(),
                consistent: blocks > 0 && within_three_sigma(emp, q, blocks),
            }
        })
        .collect();

    let (distinguishability, exact) = if strategy.is_honest() {
        (None, None)
    } else {
        (
            adversary_distinguishability(&transcripts).ok(),
            exact_distinguishability(strategy, cfg).ok(),
        )
    };
    let consistent = consistent_round && curve.iter().all(|c| c.consistent);
    Ok(DetectionReport {
        strategy: strategy.label(),
        rounds,
        seed: cfg.master_seed,
        per_round_detection: p,
        empirical_detection: empirical,
        stderr: (p * (1.0 - p) / rounds as f64).sqrt(),
        consistent,
        verdict: if consistent { "pass" } else { "fail" }.into(),
        curve,
        per_situation_error_rate: outcome.per_situation_error_rate,
        aborted: outcome.aborted,
        distinguishability,
        exact_distinguishability: exact,
    })
}

/// Header of [`curve_csv`].
pub const CURVE_CSV_HEADER: &str = "N,analytic,empirical,blocks,stderr,consistent";

/// Plot-ready CSV of a detection curve.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for c in curve {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.n, c.analytic, c.empirical, c.blocks, c.stderr, c.consistent
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::Basis1Q;
    use approx::assert_abs_diff_eq;

    #[test]
    fn honest_case_weights() {
        let e = enumerate_branches(&AttackStrategy::honest(), &ProtocolConfig::default()).unwrap();
        assert_abs_diff_eq!(e.total_weight(), 1.0, epsilon = 1e-12);
        let dist = e.case_distribution();
        for (got, want) in dist.iter().zip(HONEST_CASE_WEIGHTS) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(e.flagged_weight(), 0.0);
        assert_eq!(e.off_table_weight(), 0.0);
    }

    #[test]
    fn z_measure_flags_a_quarter() {
        let p = per_round_detection(
            &AttackStrategy::measure(Basis1Q::Z),
            &ProtocolConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn faked_zero_z_has_alice_abort_row() {
        let s = AttackStrategy::builtin("faked-0/z").unwrap();
        let e = enumerate_branches(&s, &ProtocolConfig::default()).unwrap();
        assert_abs_diff_eq!(e.off_table_weight(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(e.flagged_weight(), 7.0 / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_values() {
        let v = detection_curve(0.25, &[1, 4, 16, 64]);
        assert_abs_diff_eq!(v[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0 - 0.75f64.powi(4), epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.98997, epsilon = 1e-5);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(detection_curve(0.0, &[1, 100]), vec![0.0, 0.0]);
    }

    #[test]
    fn efficiency_values() {
        assert_eq!(efficiency_expected(&ProtocolConfig::default()), 0.125);
        let cfg = ProtocolConfig {
            p_alice_mh: 0.9,
            p_bob_mh: 0.1,
            ..Default::default()
        };
        assert_abs_diff_eq!(efficiency_expected(&cfg), 0.405, epsilon = 1e-15);
        let cfg = ProtocolConfig {
            check_fraction: 1.0,
            ..Default::default()
        };
        assert_eq!(efficiency_expected(&cfg), 0.0);
    }

    fn exact_histogram(n: u64) -> CaseHistogram {
        let cases = HONEST_CASE_WEIGHTS.map(|w| (w * n as f64) as u64);
        CaseHistogram {
            cases,
            off_table: 0,
            s4_announcements: [(cases[7] + cases[8]) / 2; 2],
        }
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r =
            chi_square_case_test(&exact_histogram(100_000), &HONEST_CASE_WEIGHTS, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.s4_statistic, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn chi_square_detects_shift() {
        let mut h = exact_histogram(100_000);
        h.cases[6] -= 5000;
        h.cases[0] += 5000;
        let r = chi_square_case_test(&h, &HONEST_CASE_WEIGHTS, 0.01).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn chi_square_needs_data() {
        assert!(matches!(
            chi_square_case_test(&exact_histogram(999), &HONEST_CASE_WEIGHTS, 0.01),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn chi_square_off_table_fails() {
        let mut h = exact_histogram(10_000);
        h.off_table = 1;
        assert!(
            !chi_square_case_test(&h, &HONEST_CASE_WEIGHTS, 0.01)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn grouping() {
        let f = [false, true, false, false, false, false, true];
        assert_eq!(grouped_detection(&f, 2), (1.0 / 3.0, 3));
        assert_eq!(grouped_detection(&f, 1), (2.0 / 7.0, 7));
        assert_eq!(grouped_detection(&f, 8), (0.0, 0));
    }

    #[test]
    fn three_sigma_rule() {
        assert!(within_three_sigma(0.0, 0.0, 10));
        assert!(!within_three_sigma(0.001, 0.0, 10));
        assert!(within_three_sigma(0.251, 0.25, 100_000));
        assert!(!within_three_sigma(0.26, 0.25, 100_000));
    }

    #[test]
    fn csv_layout() {
        let csv = curve_csv(&[CurvePoint {
            n: 4,
            analytic: 0.5,
            empirical: 0.25,
            blocks: 10,
            stderr: 0.1,
            consistent: false,
        }]);
        assert_eq!(
            csv,
            format!("{CURVE_CSV_HEADER}\n4,0.5,0.25,10,0.1,false\n")
        );
    }
}
