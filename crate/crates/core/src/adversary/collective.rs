//! Collective attacks given by coefficient/ancilla-vector parameters, their
//! completion to full unitaries, and the zero-disturbance constraint check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AttackStrategy;
use crate::analysis::{exact_distinguishability, per_round_detection};
use crate::error::{Error, Result};
use crate::protocol::ProtocolConfig;
use crate::qubit::{c, inner, norm_sqr, Basis1Q, CMatrix, JointUnitary, PureState1Q};

/// Residuals and overlaps at or below this are treated as zero.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectiveVariant {
    /// A new ancilla `|e⟩` is attached on every channel.
    Fresh,
    /// One ancilla carried from channel to channel.
    Shared,
}

/// Action of the three channel unitaries on the inputs that occur in an
/// honest-looking run:
///
/// ```text
/// U1 |+⟩|e⟩   = a0|0⟩|f0⟩ + a1|1⟩|f1⟩
/// U2 |+⟩|x⟩   = b0|0⟩|g0⟩ + b1|1⟩|g1⟩
/// U2 |−⟩|x⟩   = c0|0⟩|h0⟩ + c1|1⟩|h1⟩
/// U3 |+⟩|y⟩   = d0|0⟩|i0⟩ + d1|1⟩|i1⟩
/// U3 |−⟩|y⟩   = e0|0⟩|j0⟩ + e1|1⟩|j1⟩
/// ```
///
/// `|e⟩` is the first ancilla basis vector. For the fresh variant `x = y = e`;
/// for the shared variant `x = f0` and `y = g0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectiveParams {
    pub a: [Complex64; 2],
    pub b: [Complex64; 2],
    pub c: [Complex64; 2],
    pub d: [Complex64; 2],
    pub e: [Complex64; 2],
    pub f: [Vec<Complex64>; 2],
    pub g: [Vec<Complex64>; 2],
    pub h: [Vec<Complex64>; 2],
    pub i: [Vec<Complex64>; 2],
    pub j: [Vec<Complex64>; 2],
}

fn real(x: f64) -> Complex64 {
    c(x, 0.0)
}

fn ket(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| real(x)).collect()
}

/// `α|0⟩|u⟩ + β|1⟩|v⟩` as a qubit ⊗ ancilla vector.
fn branch_pair(
    alpha: Complex64,
    u: &[Complex64],
    beta: Complex64,
    v: &[Complex64],
) -> Vec<Complex64> {
    u.iter()
        .map(|&z| alpha * z)
        .chain(v.iter().map(|&z| beta * z))
        .collect()
}

fn product(q: &PureState1Q, anc: &[Complex64]) -> Vec<Complex64> {
    let [a0, a1] = q.amplitudes();
    anc.iter()
        .map(|&z| a0 * z)
        .chain(anc.iter().map(|&z| a1 * z))
        .collect()
}

fn combination(x: Complex64, u: &[Complex64], y: Complex64, v: &[Complex64]) -> Vec<Complex64> {
    u.iter().zip(v).map(|(&p, &q)| x * p + y * q).collect()
}

impl CollectiveParams {
    /// Ancilla dimension 2 parameters with no disturbance on any channel:
    /// `f0 = f1`, `b0 = b1 = c0 = −c1 = 1/√2` with all channel-2 vectors equal,
    /// and `d1 = e0 = 0` for a Z-basis final measurement.
    pub fn zero_detection() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let one = ket(&[0.0, 1.0]);
        let plus = ket(&[s, s]);
        Self {
            a: [real(s), real(s)],
            b: [real(s), real(s)],
            c: [real(s), real(-s)],
            d: [real(1.0), real(0.0)],
            e: [real(0.0), real(1.0)],
            f: [one.clone(), one],
            g: [plus.clone(), plus.clone()],
            h: [plus.clone(), plus],
            i: [ket(&[1.0, 0.0]), ket(&[0.0, 1.0])],
            j: [ket(&[1.0, 0.0]), ket(&[0.0, 1.0])],
        }
    }

    pub fn ancilla_dim(&self) -> usize {
        self.f[0].len()
    }

    fn coefficient_pairs(&self) -> [(&'static str, &[Complex64; 2]); 5] {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("d", &self.d),
            ("e", &self.e),
        ]
    }

    fn vector_pairs(&self) -> [(&'static str, &[Vec<Complex64>; 2]); 5] {
        [
            ("f", &self.f),
            ("g", &self.g),
            ("h", &self.h),
            ("i", &self.i),
            ("j", &self.j),
        ]
    }

    /// Unit-norm coefficient pairs and unit ancilla vectors of one dimension.
    pub fn validate(&self) -> Result<()> {
        for (name, [x, y]) in self.coefficient_pairs() {
            let n = x.norm_sqr() + y.norm_sqr();
            if (n - 1.0).abs() > RESIDUAL_TOL {
                return Err(Error::InconsistentParams(format!(
                    "|{name}0|² + |{name}1|² = {n}, expected 1"
                )));
            }
        }
        let d = self.ancilla_dim();
        if d == 0 {
            return Err(Error::InconsistentParams("ancilla dimension 0".into()));
        }
        for (name, pair) in self.vector_pairs() {
            for (k, v) in pair.iter().enumerate() {
                if v.len() != d {
                    return Err(Error::InconsistentParams(format!(
                        "{name}{k} has dimension {}, expected {d}",
                        v.len()
                    )));
                }
                let n = norm_sqr(v);
                if (n - 1.0).abs() > RESIDUAL_TOL {
                    return Err(Error::InconsistentParams(format!(
                        "{name}{k} has squared norm {n}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Full unitaries agreeing with the parameters on their specified inputs.
    pub fn unitaries(&self, variant: CollectiveVariant) -> Result<[JointUnitary; 3]> {
        self.validate()?;
        let d = self.ancilla_dim();
        let e = super::ancilla_basis_vector(d);
        let (plus, minus) = (PureState1Q::plus(), PureState1Q::minus());
        let (x, y) = match variant {
            CollectiveVariant::Fresh => (e.clone(), e.clone()),
            CollectiveVariant::Shared => (self.f[0].clone(), self.g[0].clone()),
        };
        let u1 = extend_to_unitary(
            &[product(&plus, &e)],
            &[branch_pair(self.a[0], &self.f[0], self.a[1], &self.f[1])],
        )?;
        let u2 = extend_to_unitary(
            &[product(&plus, &x), product(&minus, &x)],
            &[
                branch_pair(self.b[0], &self.g[0], self.b[1], &self.g[1]),
                branch_pair(self.c[0], &self.h[0], self.c[1], &self.h[1]),
            ],
        )?;
        let u3 = extend_to_unitary(
            &[product(&plus, &y), product(&minus, &y)],
            &[
                branch_pair(self.d[0], &self.i[0], self.d[1], &self.i[1]),
                branch_pair(self.e[0], &self.j[0], self.e[1], &self.j[1]),
            ],
        )?;
        Ok([u1, u2, u3])
    }
}

/// Orthonormalizes `candidates` in order, dropping vectors that are
/// dependent on earlier ones, and stops once `n` vectors are collected.
fn gram_schmidt(
    candidates: impl IntoIterator<Item = Vec<Complex64>>,
    n: usize,
) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for mut v in candidates {
        if basis.len() == n {
            break;
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = inner(b, &v);
                v.iter_mut().zip(b).for_each(|(x, &y)| *x -= proj * y);
            }
        }
        let norm = norm_sqr(&v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// A unitary `U` with `U inputs[k] = outputs[k]`, the remaining columns
/// completed arbitrarily.
///
/// Fails with `InconsistentParams` unless the inputs are orthonormal and the
/// outputs have the same Gram matrix.
pub fn extend_to_unitary(
    inputs: &[Vec<Complex64>],
    outputs: &[Vec<Complex64>],
) -> Result<JointUnitary> {
    let m = inputs.len();
    if m == 0 || outputs.len() != m {
        return Err(Error::InconsistentParams(format!(
            "{m} inputs for {} outputs",
            outputs.len()
        )));
    }
    let n = inputs[0].len();
    if !n.is_multiple_of(2) || inputs.iter().chain(outputs).any(|v| v.len() != n) {
        return Err(Error::InconsistentParams(
            "vectors of unequal or odd dimension".into(),
        ));
    }
    for p in 0..m {
        for q in 0..m {
            let want = if p == q { 1.0 } else { 0.0 };
            let gi = inner(&inputs[p], &inputs[q]);
            if (gi - real(want)).norm() > RESIDUAL_TOL {
                return Err(Error::InconsistentParams(format!(
                    "inputs {p} and {q} are not orthonormal (overlap {gi})"
                )));
            }
            let go = inner(&outputs[p], &outputs[q]);
            if (go - gi).norm() > RESIDUAL_TOL {
                return Err(Error::InconsistentParams(format!(
                    "images {p} and {q} have overlap {go}, inputs have {gi}"
                )));
            }
        }
    }
    let standard = |k: usize| {
        let mut v = vec![real(0.0); n];
        v[k] = real(1.0);
        v
    };
    let xs = gram_schmidt(inputs.iter().cloned().chain((0..n).map(standard)), n);
    let ys = gram_schmidt(outputs.iter().cloned().chain((0..n).map(standard)), n);
    let x = CMatrix::from_fn(n, n, |r, k| xs[k][r]);
    let y = CMatrix::from_fn(n, n, |r, k| ys[k][r]);
    JointUnitary::new(y * x.adjoint())
}

/// A collective strategy built from parameters.
pub fn collective_from_paper_params(
    p: &CollectiveParams,
    variant: CollectiveVariant,
    tp_basis: Basis1Q,
) -> Result<AttackStrategy> {
    let u = p.unitaries(variant)?;
    match variant {
        CollectiveVariant::Fresh => Ok(AttackStrategy::collective_fresh(u, tp_basis)),
        CollectiveVariant::Shared => AttackStrategy::collective_shared(u, tp_basis),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    pub name: String,
    /// The vector that must vanish for the check to pass undisturbed.
    pub expression: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub variant: CollectiveVariant,
    pub tp_basis: String,
    /// Zero-disturbance conditions as norms of vectors that must vanish.
    pub residuals: Vec<ConstraintResidual>,
    /// `|⟨x0|x1⟩|` for each ancilla pair the variant needs orthogonal so the
    /// TP can tell the branches apart.
    pub orthogonality: Vec<ConstraintResidual>,
    /// Conditions that cannot hold for any unit-norm coefficients given the
    /// orthogonality the variant needs.
    pub contradictions: Vec<String>,
    pub all_residuals_zero: bool,
    /// Exact per-round detection probability of the full attack.
    pub detection: f64,
    /// Detection with channel 3 left alone and an honest X measurement.
    pub detection_channels_1_2: f64,
    /// Exact key distinguishability from the TP's memory.
    pub distinguishability: f64,
    /// Zero residuals imply (numerically) zero distinguishability.
    pub no_go_consistent: bool,
}

fn residual(name: &str, expression: &str, v: &[Complex64]) -> ConstraintResidual {
    ConstraintResidual {
        name: name.into(),
        expression: expression.into(),
        residual: norm_sqr(v).sqrt(),
    }
}

fn overlap(name: &str, pair: &[Vec<Complex64>; 2]) -> ConstraintResidual {
    ConstraintResidual {
        name: name.into(),
        expression: format!("<{name}0|{name}1>"),
        residual: inner(&pair[0], &pair[1]).norm(),
    }
}

/// Evaluates every zero-disturbance condition of a collective attack, checks
/// them against the orthogonality the variant needs, and compares with exact
/// detection and distinguishability from branch enumeration.
pub fn collective_constraint_report(
    p: &CollectiveParams,
    variant: CollectiveVariant,
    tp_basis: Basis1Q,
) -> Result<ConstraintReport> {
    if !matches!(tp_basis, Basis1Q::Z | Basis1Q::X) {
        return Err(Error::InconsistentParams(format!(
            "constraint report covers z and x final measurements, not {}",
            tp_basis.name()
        )));
    }
    p.validate()?;
    let mut residuals = vec![
        residual(
            "channel-1/alice-hm",
            "a0 f0 - a1 f1",
            &combination(p.a[0], &p.f[0], -p.a[1], &p.f[1]),
        ),
        residual(
            "channel-2/bob-mh-after-hm",
            "b1 g1 + c1 h1",
            &combination(p.b[1], &p.g[1], p.c[1], &p.h[1]),
        ),
        residual(
            "channel-2/key-bit-0",
            "b0 g0 - b1 g1",
            &combination(p.b[0], &p.g[0], -p.b[1], &p.g[1]),
        ),
        residual(
            "channel-2/key-bit-1",
            "c0 h0 + c1 h1",
            &combination(p.c[0], &p.h[0], p.c[1], &p.h[1]),
        ),
    ];
    match tp_basis {
        Basis1Q::X => {
            residuals.push(residual(
                "channel-3/plus",
                "d0 i0 - d1 i1",
                &combination(p.d[0], &p.i[0], -p.d[1], &p.i[1]),
            ));
            residuals.push(residual(
                "channel-3/minus",
                "e0 j0 + e1 j1",
                &combination(p.e[0], &p.j[0], p.e[1], &p.j[1]),
            ));
        }
        _ => {
            residuals.push(residual(
                "channel-3/plus",
                "d1 i1",
                &combination(p.d[1], &p.i[1], real(0.0), &p.i[1]),
            ));
            residuals.push(residual(
                "channel-3/minus",
                "e0 j0",
                &combination(p.e[0], &p.j[0], real(0.0), &p.j[0]),
            ));
        }
    }

    let needed: Vec<(&str, &[Vec<Complex64>; 2])> = match variant {
        CollectiveVariant::Fresh => vec![
            ("f", &p.f),
            ("g", &p.g),
            ("h", &p.h),
            ("i", &p.i),
            ("j", &p.j),
        ],
        CollectiveVariant::Shared => vec![("i", &p.i), ("j", &p.j)],
    };
    let orthogonality: Vec<ConstraintResidual> =
        needed.iter().map(|(n, pair)| overlap(n, pair)).collect();
    let orthogonal = |name: &str| {
        orthogonality
            .iter()
            .any(|o| o.name == name && o.residual <= RESIDUAL_TOL)
    };

    // With x0 ⊥ x1 and |α|² + |β|² = 1, ‖α x0 ± β x1‖ = 1 whatever the
    // coefficients, so the matching condition cannot hold.
    let mut contradictions = Vec::new();
    let mut flag = |pair: &str, cond: &str| {
        contradictions.push(format!(
            "{pair}0 ⊥ {pair}1 forces ‖{cond}‖ = 1 for every unit-norm coefficient pair"
        ))
    };
    if orthogonal("f") {
        flag("f", "a0 f0 - a1 f1");
    }
    if orthogonal("g") {
        flag("g", "b0 g0 - b1 g1");
    }
    if orthogonal("h") {
        flag("h", "c0 h0 + c1 h1");
    }
    if matches!(tp_basis, Basis1Q::X) {
        if orthogonal("i") {
            flag("i", "d0 i0 - d1 i1");
        }
        if orthogonal("j") {
            flag("j", "e0 j0 + e1 j1");
        }
    }
    if variant == CollectiveVariant::Fresh && orthogonal("g") && orthogonal("h") {
        contradictions.push(
            "b0 g0 = b1 g1 = c0 h0 = -c1 h1 has no solution with orthonormal {g0, g1} and {h0, h1}"
                .into(),
        );
    }

    let all_residuals_zero = residuals.iter().all(|r| r.residual <= RESIDUAL_TOL);
    let cfg = ProtocolConfig::default();
    let strategy = collective_from_paper_params(p, variant, tp_basis)?;
    let detection = per_round_detection(&strategy, &cfg)?;
    let distinguishability = exact_distinguishability(&strategy, &cfg)?;

    let [u1, u2, _] = p.unitaries(variant)?;
    let id3 = JointUnitary::identity(p.ancilla_dim());
    let early = match variant {
        CollectiveVariant::Fresh => AttackStrategy::collective_fresh([u1, u2, id3], Basis1Q::X),
        CollectiveVariant::Shared => AttackStrategy::collective_shared([u1, u2, id3], Basis1Q::X)?,
    };
    let detection_channels_1_2 = per_round_detection(&early, &cfg)?;

    Ok(ConstraintReport {
        variant,
        tp_basis: tp_basis.name().into(),
        residuals,
        orthogonality,
        contradictions,
        all_residuals_zero,
        detection,
        detection_channels_1_2,
        distinguishability,
        no_go_consistent: !all_residuals_zero || distinguishability <= RESIDUAL_TOL,
    })
}
