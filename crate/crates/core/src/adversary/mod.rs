//! Adversarial TP behavior as hooks into the round pipeline.
//!
//! Every strategy works on a [`JointState`] of the channel qubit and a private
//! system of dimension `d`: a trivial one (`d = 1`) for single-qubit attacks,
//! the retained Bell particle for the faked-Bell attack and the ancilla for
//! collective attacks.

mod collective;
mod doc;

pub use collective::{
    collective_constraint_report, collective_from_paper_params, extend_to_unitary,
    CollectiveParams, CollectiveVariant, ConstraintReport, ConstraintResidual, RESIDUAL_TOL,
};
pub use doc::{BasisDoc, MatrixDoc, StrategyDoc, StrategySpec};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Draws, Party, RoundTranscript, Situation};
use crate::qubit::{
    c, trace_distance, Basis1Q, Basis2Q, CMatrix, DensityMatrix, JointState, JointUnitary,
    PureState1Q, PureState2Q, DEGENERATE_PROB,
};

/// The three quantum channels of a round, in transit order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    TpToAlice,
    AliceToBob,
    BobToTp,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Self::TpToAlice => 0,
            Self::AliceToBob => 1,
            Self::BobToTp => 2,
        }
    }
}

/// Maps each outcome index of the TP's measurement to the announced bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct AnnouncementPolicy(Vec<u8>);

impl AnnouncementPolicy {
    pub fn new(map: Vec<u8>) -> Result<Self> {
        if map.is_empty() || map.iter().any(|&b| b > 1) {
            return Err(Error::InvalidConfig {
                field: "policy",
                reason: format!("{map:?} is not a nonempty list of bits"),
            });
        }
        Ok(Self(map))
    }

    /// Outcome k of a two-outcome basis announces bit k.
    pub fn identity() -> Self {
        Self(vec![0, 1])
    }

    /// `Φ+, Ψ+ → 0` and `Φ−, Ψ− → 1`.
    pub fn bell() -> Self {
        Self(vec![0, 1, 0, 1])
    }

    /// `|00⟩, |01⟩ → 0` and `|10⟩, |11⟩ → 1`.
    pub fn computational() -> Self {
        Self(vec![0, 0, 1, 1])
    }

    pub fn announce(&self, outcome: usize) -> u8 {
        self.0[outcome]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<Vec<u8>> for AnnouncementPolicy {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AnnouncementPolicy> for Vec<u8> {
    fn from(p: AnnouncementPolicy) -> Self {
        p.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttackKind {
    Honest,
    /// `|+⟩` prepared honestly, final measurement in another basis.
    TpMeasureBasis {
        basis: Basis1Q,
    },
    /// `|prep⟩` sent instead of `|+⟩`.
    FakedSingle {
        prep: u8,
        tp_basis: Basis1Q,
    },
    /// First half of `Φ+` sent, second half kept; joint final measurement.
    FakedBell {
        tp_basis: Basis2Q,
    },
    /// A fresh ancilla per channel; each is set aside once its channel qubit
    /// has been measured by a participant.
    CollectiveFresh {
        unitaries: [JointUnitary; 3],
        tp_basis: Basis1Q,
    },
    /// One ancilla carried through all three channels.
    CollectiveShared {
        unitaries: [JointUnitary; 3],
        tp_basis: Basis1Q,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyDoc", into = "StrategyDoc")]
pub struct AttackStrategy {
    kind: AttackKind,
    policy: AnnouncementPolicy,
}

/// Built-in strategy names accepted by [`AttackStrategy::builtin`].
pub const BUILTIN_STRATEGIES: &[&str] = &[
    "honest",
    "z-measure",
    "breidbart",
    "faked-0/z",
    "faked-0/x",
    "faked-1/z",
    "faked-1/x",
    "faked-bell/bell",
    "faked-bell/computational",
    "collective-zero-detection",
    "collective-cnot",
];

fn ancilla_basis_vector(dim: usize) -> Vec<Complex64> {
    let mut e = vec![c(0.0, 0.0); dim];
    e[0] = c(1.0, 0.0);
    e
}

fn check_two_outcome(basis: &Basis1Q) -> Result<()> {
    match basis {
        Basis1Q::Z | Basis1Q::X => Ok(()),
        other => Err(Error::InvalidConfig {
            field: "tp_basis",
            reason: format!(
                "faked-state attacks measure in z or x, not {}",
                other.name()
            ),
        }),
    }
}

impl AttackStrategy {
    fn with_default_policy(kind: AttackKind) -> Self {
        let policy = match &kind {
            AttackKind::FakedBell {
                tp_basis: Basis2Q::Bell,
            } => AnnouncementPolicy::bell(),
            AttackKind::FakedBell {
                tp_basis: Basis2Q::Computational,
            } => AnnouncementPolicy::computational(),
            _ => AnnouncementPolicy::identity(),
        };
        Self { kind, policy }
    }

    pub fn honest() -> Self {
        Self::with_default_policy(AttackKind::Honest)
    }

    pub fn measure(basis: Basis1Q) -> Self {
        Self::with_default_policy(AttackKind::TpMeasureBasis { basis })
    }

    pub fn faked_single(prep: u8, tp_basis: Basis1Q) -> Result<Self> {
        if prep > 1 {
            return Err(Error::InvalidConfig {
                field: "prep",
                reason: format!("{prep} is not 0 or 1"),
            });
        }
        check_two_outcome(&tp_basis)?;
        Ok(Self::with_default_policy(AttackKind::FakedSingle {
            prep,
            tp_basis,
        }))
    }

    pub fn faked_bell(tp_basis: Basis2Q) -> Self {
        Self::with_default_policy(AttackKind::FakedBell { tp_basis })
    }

    pub fn collective_fresh(unitaries: [JointUnitary; 3], tp_basis: Basis1Q) -> Self {
        Self::with_default_policy(AttackKind::CollectiveFresh {
            unitaries,
            tp_basis,
        })
    }

    pub fn collective_shared(unitaries: [JointUnitary; 3], tp_basis: Basis1Q) -> Result<Self> {
        let d = unitaries[0].ancilla_dim();
        if let Some(u) = unitaries.iter().find(|u| u.ancilla_dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.ancilla_dim(),
            });
        }
        Ok(Self::with_default_policy(AttackKind::CollectiveShared {
            unitaries,
            tp_basis,
        }))
    }

    /// Replaces the announcement policy; it must cover every outcome.
    pub fn with_policy(mut self, policy: AnnouncementPolicy) -> Result<Self> {
        if policy.len() != self.outcome_count() {
            return Err(Error::InvalidConfig {
                field: "policy",
                reason: format!(
                    "{} entries for a measurement with {} outcomes",
                    policy.len(),
                    self.outcome_count()
                ),
            });
        }
        self.policy = policy;
        Ok(self)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let s = match name {
            "honest" => Self::honest(),
            "z-measure" => Self::measure(Basis1Q::Z),
            "breidbart" => Self::measure(Basis1Q::Breidbart),
            "faked-0/z" => Self::faked_single(0, Basis1Q::Z).ok()?,
            "faked-0/x" => Self::faked_single(0, Basis1Q::X).ok()?,
            "faked-1/z" => Self::faked_single(1, Basis1Q::Z).ok()?,
            "faked-1/x" => Self::faked_single(1, Basis1Q::X).ok()?,
            "faked-bell/bell" => Self::faked_bell(Basis2Q::Bell),
            "faked-bell/computational" => Self::faked_bell(Basis2Q::Computational),
            "collective-zero-detection" => collective_from_paper_params(
                &CollectiveParams::zero_detection(),
                CollectiveVariant::Shared,
                Basis1Q::Z,
            )
            .ok()?,
            "collective-cnot" => Self::collective_fresh(
                [cnot(), JointUnitary::identity(2), JointUnitary::identity(2)],
                Basis1Q::X,
            ),
            _ => return None,
        };
        Some(s)
    }

    pub fn kind(&self) -> &AttackKind {
        &self.kind
    }

    pub fn policy(&self) -> &AnnouncementPolicy {
        &self.policy
    }

    pub fn is_honest(&self) -> bool {
        matches!(self.kind, AttackKind::Honest)
    }

    pub fn is_collective(&self) -> bool {
        matches!(
            self.kind,
            AttackKind::CollectiveFresh { .. } | AttackKind::CollectiveShared { .. }
        )
    }

    /// Number of outcomes of the TP's final measurement.
    pub fn outcome_count(&self) -> usize {
        match self.kind {
            AttackKind::FakedBell { .. } => 4,
            _ => 2,
        }
    }

    /// Short descriptive label, e.g. `measure/breidbart` or `faked-bell/bell`.
    pub fn label(&self) -> String {
        match &self.kind {
            AttackKind::Honest => "honest".into(),
            AttackKind::TpMeasureBasis { basis } => format!("measure/{}", basis.name()),
            AttackKind::FakedSingle { prep, tp_basis } => {
                format!("faked-{prep}/{}", tp_basis.name())
            }
            AttackKind::FakedBell { tp_basis } => format!("faked-bell/{}", tp_basis.name()),
            AttackKind::CollectiveFresh { tp_basis, .. } => {
                format!("collective-fresh/{}", tp_basis.name())
            }
            AttackKind::CollectiveShared { tp_basis, .. } => {
                format!("collective-shared/{}", tp_basis.name())
            }
        }
    }

    /// The system the TP puts on the first channel.
    pub fn hook_prepare(&self) -> JointState {
        match &self.kind {
            AttackKind::Honest | AttackKind::TpMeasureBasis { .. } => {
                JointState::from_qubit(&PureState1Q::plus())
            }
            AttackKind::FakedSingle { prep, .. } => {
                JointState::from_qubit(&PureState1Q::computational(*prep))
            }
            AttackKind::FakedBell { .. } => JointState::from_pure_2q(&PureState2Q::phi_plus()),
            AttackKind::CollectiveFresh { unitaries, .. }
            | AttackKind::CollectiveShared { unitaries, .. } => JointState::product_unchecked(
                &PureState1Q::plus(),
                &ancilla_basis_vector(unitaries[0].ancilla_dim()),
            ),
        }
    }

    /// Interaction with the qubit in transit on `channel`.
    pub fn hook_channel(&self, channel: Channel, system: JointState) -> Result<JointState> {
        match &self.kind {
            AttackKind::CollectiveFresh { unitaries, .. }
            | AttackKind::CollectiveShared { unitaries, .. } => {
                unitaries[channel.index()].apply(&system)
            }
            _ => Ok(system),
        }
    }

    /// Re-joins the qubit a participant emits with the TP's private system
    /// before it enters `next`. `residual` is the normalized state of that
    /// system after the participant's measurement.
    pub fn hook_forward(
        &self,
        next: Channel,
        qubit: &PureState1Q,
        residual: Vec<Complex64>,
        memory: &mut Vec<DensityMatrix>,
    ) -> JointState {
        match &self.kind {
            AttackKind::CollectiveFresh { unitaries, .. } => {
                memory.push(DensityMatrix::from_pure(&residual));
                JointState::product_unchecked(
                    qubit,
                    &ancilla_basis_vector(unitaries[next.index()].ancilla_dim()),
                )
            }
            _ => JointState::product_unchecked(qubit, &residual),
        }
    }

    /// Unnormalized post-measurement residual of the TP's private system for
    /// each outcome of the TP's final measurement; squared norms are the Born
    /// probabilities.
    pub fn tp_branches(&self, system: &JointState) -> Result<Vec<Vec<Complex64>>> {
        let basis = match &self.kind {
            AttackKind::Honest => Basis1Q::X,
            AttackKind::TpMeasureBasis { basis } => *basis,
            AttackKind::FakedSingle { tp_basis, .. }
            | AttackKind::CollectiveFresh { tp_basis, .. }
            | AttackKind::CollectiveShared { tp_basis, .. } => *tp_basis,
            AttackKind::FakedBell { tp_basis } => {
                let s = system.as_pure_2q()?;
                return Ok(tp_basis
                    .vectors()
                    .iter()
                    .map(|b| vec![b.inner(&s)])
                    .collect());
            }
        };
        if let AttackKind::CollectiveFresh { unitaries, .. }
        | AttackKind::CollectiveShared { unitaries, .. } = &self.kind
        {
            if system.dim() != unitaries[2].ancilla_dim() {
                return Err(Error::DimensionMismatch {
                    expected: unitaries[2].ancilla_dim(),
                    found: system.dim(),
                });
            }
        } else if system.dim() != 1 && !matches!(self.kind, AttackKind::FakedBell { .. }) {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: system.dim(),
            });
        }
        Ok(basis
            .vectors()
            .iter()
            .map(|v| system.project_qubit(v))
            .collect())
    }

    /// The TP's final measurement and announcement. Returns the announced bit
    /// and, for dishonest strategies, the round's adversary record.
    pub fn hook_tp_final_measure<D: Draws + ?Sized>(
        &self,
        system: &JointState,
        mut memory: Vec<DensityMatrix>,
        draws: &mut D,
    ) -> Result<(u8, Option<AdversaryRecord>)> {
        let branches = self.tp_branches(system)?;
        let probs: Vec<f64> = branches.iter().map(|r| crate::qubit::norm_sqr(r)).collect();
        let k = draws.choose_outcome(Party::Tp, &probs);
        if k >= probs.len() || probs[k] < DEGENERATE_PROB {
            return Err(Error::DegenerateBranch {
                probability: probs.get(k).copied().unwrap_or(0.0),
            });
        }
        let bit = self.policy.announce(k);
        if self.is_honest() {
            return Ok((bit, None));
        }
        memory.push(classical_quantum_view(&branches));
        Ok((
            bit,
            Some(AdversaryRecord {
                tp_outcome: k,
                memory,
            }),
        ))
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `Σ_k |k⟩⟨k| ⊗ r_k r_k†` for unnormalized residuals `r_k` of equal length.
pub(crate) fn classical_quantum_view(branches: &[Vec<Complex64>]) -> DensityMatrix {
    let d = branches[0].len();
    let n = branches.len() * d;
    let mut m = CMatrix::zeros(n, n);
    for (k, r) in branches.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                m[(k * d + i, k * d + j)] = r[i] * r[j].conj();
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(m)
}

/// Controlled-NOT with the channel qubit as control and a qubit ancilla as
/// target.
pub fn cnot() -> JointUnitary {
    let mut m = CMatrix::zeros(4, 4);
    for (row, col) in [(0, 0), (1, 1), (3, 2), (2, 3)] {
        m[(row, col)] = c(1.0, 0.0);
    }
    JointUnitary::new(m).expect("permutation matrix is unitary")
}

/// What the TP holds after one round.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryRecord {
    /// Raw outcome index of the TP's final measurement.
    pub tp_outcome: usize,
    /// Private states kept in quantum memory, in channel order. The last
    /// entry is the TP's classical-quantum state at the final measurement
    /// (outcome register ⊗ residual ancilla), built before the outcome is
    /// drawn; fresh-ancilla attacks also keep one reduced state per earlier
    /// channel.
    pub memory: Vec<DensityMatrix>,
}

impl AdversaryRecord {
    /// Joint state of everything in memory, or `None` when it is empty.
    pub fn view(&self) -> Option<DensityMatrix> {
        let mut it = self.memory.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, m| acc.kron(m)))
    }
}

/// Trace distance between the two key-conditioned weighted averages of
/// `views`; `(key bit, weight, view)` triples.
pub(crate) fn key_conditioned_distance<I>(views: I) -> Result<f64>
where
    I: IntoIterator<Item = (u8, f64, DensityMatrix)>,
{
    let mut acc: [Option<CMatrix>; 2] = [None, None];
    let mut weight = [0.0; 2];
    for (bit, w, view) in views {
        let b = bit as usize;
        weight[b] += w;
        let add = view.matrix() * c(w, 0.0);
        match acc[b].as_mut() {
            None => acc[b] = Some(add),
            Some(a) if a.shape() == add.shape() => *a += add,
            Some(a) => {
                return Err(Error::DimensionMismatch {
                    expected: a.nrows(),
                    found: add.nrows(),
                })
            }
        }
    }
    let [Some(a0), Some(a1)] = acc else {
        return Err(Error::InsufficientData(
            "no key-generating rounds for one of the key values".into(),
        ));
    };
    if weight[0] <= 0.0 || weight[1] <= 0.0 {
        return Err(Error::InsufficientData(
            "zero weight for a key value".into(),
        ));
    }
    let r0 = DensityMatrix::from_matrix_unchecked(a0 / c(weight[0], 0.0));
    let r1 = DensityMatrix::from_matrix_unchecked(a1 / c(weight[1], 0.0));
    trace_distance(&r0, &r1)
}

/// How well the TP's memory separates raw-key bit 0 from bit 1: the trace
/// distance between the TP's key-conditioned average states over the
/// key-generating rounds.
pub fn adversary_distinguishability(transcripts: &[RoundTranscript]) -> Result<f64> {
    let mut views = Vec::new();
    for t in transcripts {
        if Situation::of(t.alice_op, t.bob_op) != Situation::MhHm || t.alice_aborted {
            continue;
        }
        let view = t
            .adversary_record
            .as_ref()
            .and_then(AdversaryRecord::view)
            .ok_or_else(|| Error::InsufficientData("transcript without adversary memory".into()))?;
        views.push((t.alice_bit, 1.0, view));
    }
    key_conditioned_distance(views)
}
