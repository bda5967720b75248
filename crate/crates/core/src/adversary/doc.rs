//! Structured (serde) descriptions of attack strategies.
//!
//! Unitaries are row-major nested arrays of `[re, im]` pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AnnouncementPolicy, AttackKind, AttackStrategy, CollectiveParams, CollectiveVariant};
use crate::error::{Error, Result};
use crate::qubit::{Basis1Q, Basis2Q, CMatrix, JointUnitary, PureState1Q};

/// Row-major complex matrix.
pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisDoc {
    Z,
    X,
    Breidbart,
    Custom([PureState1Q; 2]),
}

impl TryFrom<BasisDoc> for Basis1Q {
    type Error = Error;

    fn try_from(d: BasisDoc) -> Result<Self> {
        Ok(match d {
            BasisDoc::Z => Basis1Q::Z,
            BasisDoc::X => Basis1Q::X,
            BasisDoc::Breidbart => Basis1Q::Breidbart,
            BasisDoc::Custom([v0, v1]) => Basis1Q::custom(v0, v1)?,
        })
    }
}

impl From<Basis1Q> for BasisDoc {
    fn from(b: Basis1Q) -> Self {
        match b {
            Basis1Q::Z => Self::Z,
            Basis1Q::X => Self::X,
            Basis1Q::Breidbart => Self::Breidbart,
            Basis1Q::Custom(v) => Self::Custom(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    /// One of [`super::BUILTIN_STRATEGIES`].
    Builtin {
        name: String,
    },
    Honest,
    Measure {
        basis: BasisDoc,
    },
    FakedSingle {
        prep: u8,
        tp_basis: BasisDoc,
    },
    FakedBell {
        tp_basis: Basis2Q,
    },
    CollectiveFresh {
        unitaries: [MatrixDoc; 3],
        tp_basis: BasisDoc,
    },
    CollectiveShared {
        unitaries: [MatrixDoc; 3],
        tp_basis: BasisDoc,
    },
    CollectiveParams {
        params: Box<CollectiveParams>,
        variant: CollectiveVariant,
        tp_basis: BasisDoc,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyDoc {
    #[serde(flatten)]
    pub spec: StrategySpec,
    /// Announced bit per outcome; the strategy's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<AnnouncementPolicy>,
}

fn matrix_from_doc(m: &MatrixDoc) -> Result<JointUnitary> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidConfig {
            field: "unitaries",
            reason: "matrix is not square".into(),
        });
    }
    let cm = CMatrix::from_fn(n, n, |r, k| Complex64::new(m[r][k][0], m[r][k][1]));
    JointUnitary::new(cm)
}

fn matrix_to_doc(u: &JointUnitary) -> MatrixDoc {
    let m = u.matrix();
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|k| [m[(r, k)].re, m[(r, k)].im])
                .collect()
        })
        .collect()
}

fn unitaries_from_doc(us: &[MatrixDoc; 3]) -> Result<[JointUnitary; 3]> {
    Ok([
        matrix_from_doc(&us[0])?,
        matrix_from_doc(&us[1])?,
        matrix_from_doc(&us[2])?,
    ])
}

impl TryFrom<StrategyDoc> for AttackStrategy {
    type Error = Error;

    fn try_from(doc: StrategyDoc) -> Result<Self> {
        let s = match doc.spec {
            StrategySpec::Builtin { name } => {
                AttackStrategy::builtin(&name).ok_or_else(|| Error::InvalidConfig {
                    field: "strategy",
                    reason: format!("unknown built-in strategy `{name}`"),
                })?
            }
            StrategySpec::Honest => AttackStrategy::honest(),
            StrategySpec::Measure { basis } => AttackStrategy::measure(basis.try_into()?),
            StrategySpec::FakedSingle { prep, tp_basis } => {
                AttackStrategy::faked_single(prep, tp_basis.try_into()?)?
            }
            StrategySpec::FakedBell { tp_basis } => AttackStrategy::faked_bell(tp_basis),
            StrategySpec::CollectiveFresh {
                unitaries,
                tp_basis,
            } => AttackStrategy::collective_fresh(
                unitaries_from_doc(&unitaries)?,
                tp_basis.try_into()?,
            ),
            StrategySpec::CollectiveShared {
                unitaries,
                tp_basis,
            } => AttackStrategy::collective_shared(
                unitaries_from_doc(&unitaries)?,
                tp_basis.try_into()?,
            )?,
            StrategySpec::CollectiveParams {
                params,
                variant,
                tp_basis,
            } => super::collective_from_paper_params(&params, variant, tp_basis.try_into()?)?,
        };
        match doc.policy {
            Some(p) => s.with_policy(p),
            None => Ok(s),
        }
    }
}

impl From<AttackStrategy> for StrategyDoc {
    fn from(s: AttackStrategy) -> Self {
        let spec = match s.kind {
            AttackKind::Honest => StrategySpec::Honest,
            AttackKind::TpMeasureBasis { basis } => StrategySpec::Measure {
                basis: basis.into(),
            },
            AttackKind::FakedSingle { prep, tp_basis } => StrategySpec::FakedSingle {
                prep,
                tp_basis: tp_basis.into(),
            },
            AttackKind::FakedBell { tp_basis } => StrategySpec::FakedBell { tp_basis },
            AttackKind::CollectiveFresh {
                unitaries,
                tp_basis,
            } => StrategySpec::CollectiveFresh {
                unitaries: unitaries.each_ref().map(matrix_to_doc),
                tp_basis: tp_basis.into(),
            },
            AttackKind::CollectiveShared {
                unitaries,
                tp_basis,
            } => StrategySpec::CollectiveShared {
                unitaries: unitaries.each_ref().map(matrix_to_doc),
                tp_basis: tp_basis.into(),
            },
        };
        StrategyDoc {
            spec,
            policy: Some(s.policy),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::BUILTIN_STRATEGIES;

    #[test]
    fn builtins_round_trip_through_json() {
        for name in BUILTIN_STRATEGIES {
            let s = AttackStrategy::builtin(name).unwrap();
            let json = serde_json::to_string(&s).unwrap();
            let back: AttackStrategy = serde_json::from_str(&json).unwrap();
            assert_eq!(back, s, "{name}");
        }
    }

    #[test]
    fn parses_hand_written_documents() {
        let s: AttackStrategy =
            serde_json::from_str(r#"{"kind":"measure","basis":"breidbart"}"#).unwrap();
        assert_eq!(s, AttackStrategy::measure(Basis1Q::Breidbart));
        let s: AttackStrategy =
            serde_json::from_str(r#"{"kind":"builtin","name":"faked-bell/bell"}"#).unwrap();
        assert_eq!(s, AttackStrategy::faked_bell(Basis2Q::Bell));
        let s: AttackStrategy =
            serde_json::from_str(r#"{"kind":"faked-bell","tp_basis":"bell","policy":[1,0,1,0]}"#)
                .unwrap();
        assert_eq!(s.policy().as_slice(), &[1, 0, 1, 0]);
        let s: AttackStrategy = serde_json::from_str(
            r#"{"kind":"collective-fresh","tp_basis":"x","unitaries":[
                [[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]],[[0,0],[0,0],[1,0],[0,0]]],
                [[[1,0],[0,0]],[[0,0],[1,0]]],
                [[[1,0],[0,0]],[[0,0],[1,0]]]]}"#,
        )
        .unwrap();
        assert!(s.is_collective());
    }

    #[test]
    fn rejects_bad_documents() {
        let non_unitary = r#"{"kind":"collective-shared","tp_basis":"z","unitaries":[
            [[[1,0],[1,0]],[[0,0],[1,0]]],[[[1,0],[0,0]],[[0,0],[1,0]]],[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#;
        assert!(serde_json::from_str::<AttackStrategy>(non_unitary)
            .unwrap_err()
            .to_string()
            .contains("unitary"));
        assert!(serde_json::from_str::<AttackStrategy>(
            r#"{"kind":"faked-single","prep":3,"tp_basis":"z"}"#
        )
        .is_err());
        assert!(
            serde_json::from_str::<AttackStrategy>(r#"{"kind":"builtin","name":"nope"}"#).is_err()
        );
        assert!(serde_json::from_str::<AttackStrategy>(
            r#"{"kind":"measure","basis":"z","policy":[0,1,1]}"#
        )
        .is_err());
    }

    #[test]
    fn params_document() {
        let doc = StrategyDoc {
            spec: StrategySpec::CollectiveParams {
                params: Box::new(CollectiveParams::zero_detection()),
                variant: CollectiveVariant::Shared,
                tp_basis: BasisDoc::Z,
            },
            policy: None,
        };
        let json = serde_json::to_string(&doc).unwrap();
        let s: AttackStrategy = serde_json::from_str(&json).unwrap();
        assert_eq!(
            s,
            AttackStrategy::builtin("collective-zero-detection").unwrap()
        );
    }
}
