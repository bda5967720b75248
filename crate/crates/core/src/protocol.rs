//! Round execution, Table-of-cases classification and public discussion.
//!
//! A round is the pipeline
//! `TP prepare → channel 1 → Alice → channel 2 → Bob → channel 3 → TP measure`,
//! where every channel and both TP actions are adversary hooks (see
//! [`crate::adversary`]). The honest TP is just one strategy.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryRecord, AttackStrategy, Channel};
use crate::error::{Error, Result};
use crate::qubit::{
    born_probabilities, hadamard, Basis1Q, JointState, PureState1Q, DEGENERATE_PROB,
};
use crate::rng::{RngStream, SIFT_STREAM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParticipantOp {
    /// Measure in Z, re-prepare, then Hadamard.
    #[serde(rename = "MH")]
    Mh,
    /// Hadamard, then measure in Z and re-prepare.
    #[serde(rename = "HM")]
    Hm,
}

impl fmt::Display for ParticipantOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mh => "MH",
            Self::Hm => "HM",
        })
    }
}

impl FromStr for ParticipantOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MH" => Ok(Self::Mh),
            "HM" => Ok(Self::Hm),
            other => Err(Error::InvalidConfig {
                field: "op",
                reason: format!("unknown operation `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
    Tp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Number of qubits the TP prepares (one per round).
    pub rounds: usize,
    pub p_alice_mh: f64,
    pub p_bob_mh: f64,
    /// Fraction of key-generating rounds disclosed for the agreement check.
    pub check_fraction: f64,
    /// Maximum tolerated error rate in each situation.
    pub error_threshold: f64,
    pub master_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rounds: 100_000,
            p_alice_mh: 0.5,
            p_bob_mh: 0.5,
            check_fraction: 0.5,
            error_threshold: 0.0,
            master_seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::EmptyRun);
        }
        let open = |field: &'static str, p: f64| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field,
                    reason: format!("{p} is not in (0, 1)"),
                })
            }
        };
        open("p_alice_mh", self.p_alice_mh)?;
        open("p_bob_mh", self.p_bob_mh)?;
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(Error::InvalidConfig {
                field: "check_fraction",
                reason: format!("{} is not in [0, 1]", self.check_fraction),
            });
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(Error::InvalidConfig {
                field: "error_threshold",
                reason: format!("{} is not in [0, 1]", self.error_threshold),
            });
        }
        Ok(())
    }
}

/// Source of the random choices made during a round.
pub trait Draws {
    fn choose_op(&mut self, party: Party, p_mh: f64) -> ParticipantOp;
    /// Index of the measurement outcome, given the Born probabilities.
    fn choose_outcome(&mut self, party: Party, probs: &[f64]) -> usize;
}

impl Draws for RngStream {
    fn choose_op(&mut self, _party: Party, p_mh: f64) -> ParticipantOp {
        if self.next_f64() < p_mh {
            ParticipantOp::Mh
        } else {
            ParticipantOp::Hm
        }
    }

    fn choose_outcome(&mut self, _party: Party, probs: &[f64]) -> usize {
        self.choose(probs)
    }
}

/// Draws with some or all choices pinned, for walking a specific branch.
///
/// Unpinned choices fall back to the wrapped stream. Forcing an outcome of
/// zero probability makes the round fail with `DegenerateBranch`.
#[derive(Clone, Debug)]
pub struct ForcedDraws {
    alice_op: Option<ParticipantOp>,
    bob_op: Option<ParticipantOp>,
    outcomes: VecDeque<(Party, usize)>,
    fallback: RngStream,
}

impl ForcedDraws {
    pub fn new(fallback: RngStream) -> Self {
        Self {
            alice_op: None,
            bob_op: None,
            outcomes: VecDeque::new(),
            fallback,
        }
    }

    pub fn ops(mut self, alice: ParticipantOp, bob: ParticipantOp) -> Self {
        self.alice_op = Some(alice);
        self.bob_op = Some(bob);
        self
    }

    /// Pins the next measurement outcome of `party`.
    pub fn outcome(mut self, party: Party, k: usize) -> Self {
        self.outcomes.push_back((party, k));
        self
    }
}

impl Draws for ForcedDraws {
    fn choose_op(&mut self, party: Party, p_mh: f64) -> ParticipantOp {
        let pinned = match party {
            Party::Alice => self.alice_op,
            Party::Bob => self.bob_op,
            Party::Tp => None,
        };
        pinned.unwrap_or_else(|| self.fallback.choose_op(party, p_mh))
    }

    fn choose_outcome(&mut self, party: Party, probs: &[f64]) -> usize {
        match self.outcomes.front() {
            Some(&(p, k)) if p == party => {
                self.outcomes.pop_front();
                k
            }
            _ => self.fallback.choose_outcome(party, probs),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTranscript {
    pub round_index: usize,
    pub alice_op: ParticipantOp,
    pub bob_op: ParticipantOp,
    pub alice_bit: u8,
    pub bob_bit: u8,
    pub tp_announced_bit: u8,
    /// Alice chose HM and measured 1.
    pub alice_aborted: bool,
    pub adversary_record: Option<AdversaryRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    /// Alice MH, Bob MH: TP must announce Bob's bit.
    MhMh,
    /// Alice MH, Bob HM: raw key.
    MhHm,
    /// Alice HM, Bob MH: all three results must be 0.
    HmMh,
    /// Alice HM, Bob HM: Alice must obtain 0.
    HmHm,
}

impl Situation {
    pub fn of(alice: ParticipantOp, bob: ParticipantOp) -> Self {
        use ParticipantOp::*;
        match (alice, bob) {
            (Mh, Mh) => Self::MhMh,
            (Mh, Hm) => Self::MhHm,
            (Hm, Mh) => Self::HmMh,
            (Hm, Hm) => Self::HmHm,
        }
    }

    /// 1-based situation number.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn index(self) -> usize {
        match self {
            Self::MhMh => 0,
            Self::MhHm => 1,
            Self::HmMh => 2,
            Self::HmHm => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SituationClass {
    pub situation: Situation,
    /// Case 1..=9 of the honest case table; `None` when Alice aborted or the
    /// outcome combination cannot occur in an honest run.
    pub case_id: Option<u8>,
}

pub fn classify_round(t: &RoundTranscript) -> SituationClass {
    classify(
        t.alice_op,
        t.bob_op,
        t.alice_bit,
        t.bob_bit,
        t.alice_aborted,
    )
}

pub(crate) fn classify(
    alice_op: ParticipantOp,
    bob_op: ParticipantOp,
    alice_bit: u8,
    bob_bit: u8,
    aborted: bool,
) -> SituationClass {
    let situation = Situation::of(alice_op, bob_op);
    let case_id = if aborted {
        None
    } else {
        match (situation, alice_bit, bob_bit) {
            (Situation::MhMh, 0, 0) => Some(1),
            (Situation::MhMh, 0, 1) => Some(2),
            (Situation::MhMh, 1, 0) => Some(4),
            (Situation::MhMh, 1, 1) => Some(5),
            (Situation::MhHm, 0, 0) => Some(3),
            (Situation::MhHm, 1, 1) => Some(6),
            (Situation::HmMh, 0, 0) => Some(7),
            (Situation::HmHm, 0, 0) => Some(8),
            (Situation::HmHm, 0, 1) => Some(9),
            _ => None,
        }
    };
    SituationClass { situation, case_id }
}

/// The TP's honest preparation, `|+⟩`.
pub fn tp_prepare() -> PureState1Q {
    PureState1Q::plus()
}

/// One classical participant acting on a lone qubit.
pub fn classical_party_step(
    op: ParticipantOp,
    incoming: &PureState1Q,
    rng: &mut RngStream,
) -> (u8, PureState1Q) {
    let to_measure = match op {
        ParticipantOp::Mh => *incoming,
        ParticipantOp::Hm => hadamard(incoming),
    };
    let (p0, p1) = born_probabilities(&to_measure, &Basis1Q::Z);
    let bit = rng.choose(&[p0, p1]) as u8;
    let fresh = PureState1Q::computational(bit);
    let outgoing = match op {
        ParticipantOp::Mh => hadamard(&fresh),
        ParticipantOp::Hm => fresh,
    };
    (bit, outgoing)
}

/// A classical participant acting on the channel qubit of a joint state.
///
/// Returns the recorded bit, the emitted qubit and the normalized residual
/// of whatever the qubit was entangled with.
pub fn party_step<D: Draws + ?Sized>(
    op: ParticipantOp,
    incoming: &JointState,
    party: Party,
    draws: &mut D,
) -> Result<(u8, PureState1Q, Vec<Complex64>)> {
    let to_measure = match op {
        ParticipantOp::Mh => incoming.clone(),
        ParticipantOp::Hm => incoming.apply_hadamard(),
    };
    let probs = to_measure.qubit_probabilities(&Basis1Q::Z);
    let k = draws.choose_outcome(party, &probs);
    if k > 1 || probs[k] < DEGENERATE_PROB {
        return Err(Error::DegenerateBranch {
            probability: probs.get(k).copied().unwrap_or(0.0),
        });
    }
    let (_, residual) = to_measure.qubit_branch(&Basis1Q::Z, k)?;
    let bit = k as u8;
    let fresh = PureState1Q::computational(bit);
    let outgoing = match op {
        ParticipantOp::Mh => hadamard(&fresh),
        ParticipantOp::Hm => fresh,
    };
    Ok((bit, outgoing, residual))
}

/// Honest TP measurement: X basis, `|+⟩ → 0`, `|−⟩ → 1`.
pub fn tp_measure_announce(incoming: &PureState1Q, rng: &mut RngStream) -> u8 {
    let (p0, p1) = born_probabilities(incoming, &Basis1Q::X);
    rng.choose(&[p0, p1]) as u8
}

/// Runs round `round_index` with draws from stream `(master_seed, round_index)`.
pub fn run_round(
    cfg: &ProtocolConfig,
    strategy: &AttackStrategy,
    round_index: usize,
) -> Result<RoundTranscript> {
    if round_index >= cfg.rounds {
        return Err(Error::InvalidConfig {
            field: "round_index",
            reason: format!("{round_index} >= rounds ({})", cfg.rounds),
        });
    }
    let mut rng = RngStream::new(cfg.master_seed, round_index as u64);
    run_round_with(cfg, strategy, round_index, &mut rng)
}

pub fn run_round_with<D: Draws + ?Sized>(
    cfg: &ProtocolConfig,
    strategy: &AttackStrategy,
    round_index: usize,
    draws: &mut D,
) -> Result<RoundTranscript> {
    let alice_op = draws.choose_op(Party::Alice, cfg.p_alice_mh);
    let bob_op = draws.choose_op(Party::Bob, cfg.p_bob_mh);
    let mut memory = Vec::new();

    let system = strategy.hook_prepare();
    let system = strategy.hook_channel(Channel::TpToAlice, system)?;
    let (alice_bit, qubit, residual) = party_step(alice_op, &system, Party::Alice, draws)?;

    let system = strategy.hook_forward(Channel::AliceToBob, &qubit, residual, &mut memory);
    let system = strategy.hook_channel(Channel::AliceToBob, system)?;
    let (bob_bit, qubit, residual) = party_step(bob_op, &system, Party::Bob, draws)?;

    let system = strategy.hook_forward(Channel::BobToTp, &qubit, residual, &mut memory);
    let system = strategy.hook_channel(Channel::BobToTp, system)?;
    let (tp_announced_bit, adversary_record) =
        strategy.hook_tp_final_measure(&system, memory, draws)?;

    Ok(RoundTranscript {
        round_index,
        alice_op,
        bob_op,
        alice_bit,
        bob_bit,
        tp_announced_bit,
        alice_aborted: alice_op == ParticipantOp::Hm && alice_bit == 1,
        adversary_record,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Runs rounds `0..cfg.rounds`. Both execution modes give identical output.
pub fn run_rounds(
    cfg: &ProtocolConfig,
    strategy: &AttackStrategy,
    execution: Execution,
) -> Result<Vec<RoundTranscript>> {
    cfg.validate()?;
    match execution {
        Execution::Serial => (0..cfg.rounds)
            .map(|i| run_round(cfg, strategy, i))
            .collect(),
        Execution::Parallel => (0..cfg.rounds)
            .into_par_iter()
            .map(|i| run_round(cfg, strategy, i))
            .collect(),
    }
}

/// Runs every round then the public discussion.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    strategy: &AttackStrategy,
    execution: Execution,
) -> Result<(Vec<RoundTranscript>, SiftOutcome)> {
    let transcripts = run_rounds(cfg, strategy, execution)?;
    let mut rng = RngStream::new(cfg.master_seed, SIFT_STREAM);
    let outcome = sift(&transcripts, cfg, &mut rng)?;
    Ok((transcripts, outcome))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseHistogram {
    /// Counts of cases 1..=9.
    pub cases: [u64; 9],
    /// Rounds with no honest case (Alice aborts, impossible outcome pairs).
    pub off_table: u64,
    /// TP announcements `[0, 1]` in situation-4 rounds.
    pub s4_announcements: [u64; 2],
}

impl CaseHistogram {
    pub fn total(&self) -> u64 {
        self.cases.iter().sum::<u64>() + self.off_table
    }

    pub fn frequencies(&self) -> [f64; 9] {
        let n = self.total().max(1) as f64;
        self.cases.map(|c| c as f64 / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    None,
    ThresholdExceeded,
    AliceHmMeasuredOne,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftOutcome {
    /// Error rate of each situation over its checked rounds.
    pub per_situation_error_rate: [f64; 4],
    pub situation_rounds: [u64; 4],
    /// Rounds actually tested; for situation 2 only the disclosed ones.
    pub situation_checked: [u64; 4],
    pub situation_errors: [u64; 4],
    pub raw_key_alice: Vec<u8>,
    pub raw_key_bob: Vec<u8>,
    /// Round indices of the disclosed key-generating rounds, ascending.
    pub disclosed_positions: Vec<usize>,
    pub aborted: bool,
    pub abort_reason: AbortReason,
    pub counts: CaseHistogram,
    /// Per-transcript error flag, in input order.
    pub flagged: Vec<bool>,
}

impl SiftOutcome {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged.iter().filter(|&&f| f).count() as f64 / self.flagged.len().max(1) as f64
    }
}

/// Number of key-generating rounds disclosed for checking.
pub fn disclosed_count(check_fraction: f64, situation2_rounds: usize) -> usize {
    let x = check_fraction * situation2_rounds as f64;
    ((x - 1e-9).ceil().max(0.0) as usize).min(situation2_rounds)
}

/// Public discussion: honesty checks, agreement check on a random subset of
/// key rounds, raw-key extraction and the abort decision.
pub fn sift(
    transcripts: &[RoundTranscript],
    cfg: &ProtocolConfig,
    rng: &mut RngStream,
) -> Result<SiftOutcome> {
    if transcripts.is_empty() {
        return Err(Error::EmptyRun);
    }
    let mut rounds = [0u64; 4];
    let mut checked = [0u64; 4];
    let mut errors = [0u64; 4];
    let mut counts = CaseHistogram::default();
    let mut flagged = vec![false; transcripts.len()];
    let mut key_rounds = Vec::new();

    for (pos, t) in transcripts.iter().enumerate() {
        let class = classify_round(t);
        let s = class.situation;
        rounds[s.index()] += 1;
        match class.case_id {
            Some(c) => counts.cases[c as usize - 1] += 1,
            None => counts.off_table += 1,
        }
        let error = match s {
            Situation::MhMh => t.tp_announced_bit != t.bob_bit,
            Situation::MhHm => {
                key_rounds.push(pos);
                continue;
            }
            Situation::HmMh => t.alice_bit != 0 || t.bob_bit != 0 || t.tp_announced_bit != 0,
            Situation::HmHm => {
                counts.s4_announcements[t.tp_announced_bit as usize] += 1;
                t.alice_bit != 0
            }
        } || t.alice_aborted;
        checked[s.index()] += 1;
        if error {
            errors[s.index()] += 1;
            flagged[pos] = true;
        }
    }

    let n_disclosed = disclosed_count(cfg.check_fraction, key_rounds.len());
    let mut disclosed: Vec<usize> = index::sample(rng, key_rounds.len(), n_disclosed)
        .into_iter()
        .map(|i| key_rounds[i])
        .collect();
    disclosed.sort_unstable();

    let mut raw_key_alice = Vec::new();
    let mut raw_key_bob = Vec::new();
    let mut next = disclosed.iter().peekable();
    let s2 = Situation::MhHm.index();
    for &pos in &key_rounds {
        let t = &transcripts[pos];
        if next.peek() == Some(&&pos) {
            next.next();
            checked[s2] += 1;
            if t.alice_bit != t.bob_bit {
                errors[s2] += 1;
                flagged[pos] = true;
            }
        } else {
            raw_key_alice.push(t.alice_bit);
            raw_key_bob.push(t.bob_bit);
        }
    }

    let rates: [f64; 4] = std::array::from_fn(|i| {
        if checked[i] == 0 {
            0.0
        } else {
            errors[i] as f64 / checked[i] as f64
        }
    });
    let aborted = rates.iter().any(|&r| r > cfg.error_threshold);
    let abort_reason = if !aborted {
        AbortReason::None
    } else if transcripts.iter().any(|t| t.alice_aborted) {
        AbortReason::AliceHmMeasuredOne
    } else {
        AbortReason::ThresholdExceeded
    };

    Ok(SiftOutcome {
        per_situation_error_rate: rates,
        situation_rounds: rounds,
        situation_checked: checked,
        situation_errors: errors,
        raw_key_alice,
        raw_key_bob,
        disclosed_positions: disclosed
            .into_iter()
            .map(|p| transcripts[p].round_index)
            .collect(),
        aborted,
        abort_reason,
        counts,
        flagged,
    })
}

/// Raw-key bits per TP-prepared qubit.
pub fn qubit_efficiency(outcome: &SiftOutcome, cfg: &ProtocolConfig) -> f64 {
    if cfg.rounds == 0 {
        return 0.0;
    }
    outcome.raw_key_alice.len() as f64 / cfg.rounds as f64
}

// ---------------------------------------------------------------------------
// transcript log: one whitespace-separated record per round
//
//   index alice_op bob_op alice_bit bob_bit tp_bit aborted tp_outcome
//
// `aborted` is `A` or `-`; `tp_outcome` is `-` when no adversary record exists.

pub const TRANSCRIPT_LOG_HEADER: &str =
    "# index alice_op bob_op alice_bit bob_bit tp_bit aborted tp_outcome";

pub fn write_transcript_log<W: Write>(
    mut w: W,
    transcripts: &[RoundTranscript],
) -> std::io::Result<()> {
    writeln!(w, "{TRANSCRIPT_LOG_HEADER}")?;
    for t in transcripts {
        let outcome = t
            .adversary_record
            .as_ref()
            .map_or_else(|| "-".to_string(), |r| r.tp_outcome.to_string());
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            t.round_index,
            t.alice_op,
            t.bob_op,
            t.alice_bit,
            t.bob_bit,
            t.tp_announced_bit,
            if t.alice_aborted { "A" } else { "-" },
            outcome
        )?;
    }
    Ok(())
}

fn parse_field<T: FromStr>(field: &'static str, s: Option<&str>, line: usize) -> Result<T> {
    let s = s.ok_or_else(|| Error::InvalidConfig {
        field,
        reason: format!("line {line}: missing"),
    })?;
    s.parse().map_err(|_| Error::InvalidConfig {
        field,
        reason: format!("line {line}: cannot parse `{s}`"),
    })
}

fn parse_bit(field: &'static str, s: Option<&str>, line: usize) -> Result<u8> {
    let b: u8 = parse_field(field, s, line)?;
    if b > 1 {
        return Err(Error::InvalidConfig {
            field,
            reason: format!("line {line}: {b} is not a bit"),
        });
    }
    Ok(b)
}

/// Reads a log written by [`write_transcript_log`]. Adversary records come
/// back with their outcome only.
pub fn read_transcript_log<R: BufRead>(r: R) -> Result<Vec<RoundTranscript>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidConfig {
            field: "transcript",
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let round_index = parse_field("index", it.next(), n + 1)?;
        let alice_op = parse_field("alice_op", it.next(), n + 1)?;
        let bob_op = parse_field("bob_op", it.next(), n + 1)?;
        let alice_bit = parse_bit("alice_bit", it.next(), n + 1)?;
        let bob_bit = parse_bit("bob_bit", it.next(), n + 1)?;
        let tp_announced_bit = parse_bit("tp_bit", it.next(), n + 1)?;
        let alice_aborted = match it.next() {
            Some("A") => true,
            Some("-") => false,
            other => {
                return Err(Error::InvalidConfig {
                    field: "aborted",
                    reason: format!("line {}: `{}`", n + 1, other.unwrap_or("")),
                })
            }
        };
        let adversary_record = match it.next() {
            Some("-") => None,
            s => Some(AdversaryRecord {
                tp_outcome: parse_field("tp_outcome", s, n + 1)?,
                memory: Vec::new(),
            }),
        };
        out.push(RoundTranscript {
            round_index,
            alice_op,
            bob_op,
            alice_bit,
            bob_bit,
            tp_announced_bit,
            alice_aborted,
            adversary_record,
        });
    }
    Ok(out)
}
