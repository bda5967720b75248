//! Exact state-vector algebra for one qubit, two qubits and a qubit coupled
//! to an ancilla of arbitrary dimension.
//!
//! Joint states are indexed `(qubit, ancilla)` in row-major order, i.e. the
//! amplitude of `|q⟩|a⟩` lives at `q * dim + a`. Two-qubit states follow the
//! same convention with the channel qubit first.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type Amplitude = Complex64;
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on the norm of every stored state.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance of the `U^dagger U = I` check.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on hermiticity, trace and positivity of density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Branches lighter than this are treated as impossible.
pub const DEGENERATE_PROB: f64 = 1e-15;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a|b⟩`
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_normalized(v: &[Complex64]) -> Result<()> {
    let n = norm_sqr(v);
    if !all_finite(v) || (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr: n });
    }
    Ok(())
}

fn normalize(v: &mut [Complex64]) -> Result<()> {
    let n = norm_sqr(v);
    if !all_finite(v) || n < DEGENERATE_PROB {
        return Err(Error::NotNormalized { norm_sqr: n });
    }
    let s = 1.0 / n.sqrt();
    v.iter_mut().for_each(|z| *z *= s);
    Ok(())
}

// ---------------------------------------------------------------------------
// single qubit

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState1Q {
    a0: Complex64,
    a1: Complex64,
}

impl PureState1Q {
    pub fn new(a0: Complex64, a1: Complex64) -> Result<Self> {
        check_normalized(&[a0, a1])?;
        Ok(Self { a0, a1 })
    }

    /// Builds a state from any nonzero pair of coefficients.
    pub fn normalized(a0: Complex64, a1: Complex64) -> Result<Self> {
        let mut v = [a0, a1];
        normalize(&mut v)?;
        Ok(Self { a0: v[0], a1: v[1] })
    }

    pub const fn zero() -> Self {
        Self { a0: ONE, a1: ZERO }
    }

    pub const fn one() -> Self {
        Self { a0: ZERO, a1: ONE }
    }

    pub fn plus() -> Self {
        Self {
            a0: c(FRAC_1_SQRT_2, 0.0),
            a1: c(FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn minus() -> Self {
        Self {
            a0: c(FRAC_1_SQRT_2, 0.0),
            a1: c(-FRAC_1_SQRT_2, 0.0),
        }
    }

    /// `|0⟩` or `|1⟩`.
    pub fn computational(bit: u8) -> Self {
        if bit == 0 {
            Self::zero()
        } else {
            Self::one()
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        [self.a0, self.a1]
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.a0.conj() * other.a0 + self.a1.conj() * other.a1
    }

    /// Multiplies by a unit-modulus scalar.
    pub fn with_global_phase(&self, phase: Complex64) -> Self {
        Self {
            a0: phase * self.a0,
            a1: phase * self.a1,
        }
    }

    /// True if the two states are equal up to a global phase.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        (self.inner(other).norm() - 1.0).abs() <= tol
    }
}

pub fn hadamard(s: &PureState1Q) -> PureState1Q {
    let h = FRAC_1_SQRT_2;
    PureState1Q {
        a0: (s.a0 + s.a1) * h,
        a1: (s.a0 - s.a1) * h,
    }
}

/// Single-qubit measurement bases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Basis1Q {
    /// `{|0⟩, |1⟩}`
    Z,
    /// `{|+⟩, |−⟩}`
    X,
    /// `{cos(π/8)|0⟩ + sin(π/8)|1⟩, −sin(π/8)|0⟩ + cos(π/8)|1⟩}`
    Breidbart,
    Custom([PureState1Q; 2]),
}

impl Basis1Q {
    pub fn custom(v0: PureState1Q, v1: PureState1Q) -> Result<Self> {
        let overlap = v0.inner(&v1).norm();
        if overlap > NORM_TOL {
            return Err(Error::NonOrthonormalBasis { deviation: overlap });
        }
        Ok(Self::Custom([v0, v1]))
    }

    pub fn vectors(&self) -> [PureState1Q; 2] {
        match self {
            Self::Z => [PureState1Q::zero(), PureState1Q::one()],
            Self::X => [PureState1Q::plus(), PureState1Q::minus()],
            Self::Breidbart => {
                let (s, co) = FRAC_PI_8.sin_cos();
                [
                    PureState1Q {
                        a0: c(co, 0.0),
                        a1: c(s, 0.0),
                    },
                    PureState1Q {
                        a0: c(-s, 0.0),
                        a1: c(co, 0.0),
                    },
                ]
            }
            Self::Custom(v) => *v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Z => "z",
            Self::X => "x",
            Self::Breidbart => "breidbart",
            Self::Custom(_) => "custom",
        }
    }
}

/// `(|⟨b_0|s⟩|², |⟨b_1|s⟩|²)`
pub fn born_probabilities(s: &PureState1Q, b: &Basis1Q) -> (f64, f64) {
    let [v0, v1] = b.vectors();
    (v0.inner(s).norm_sqr(), v1.inner(s).norm_sqr())
}

/// Projective measurement; the post-measurement state is the basis vector
/// itself (global phases are dropped).
pub fn measure_1q(s: &PureState1Q, b: &Basis1Q, rng: &mut RngStream) -> (u8, PureState1Q) {
    let (p0, p1) = born_probabilities(s, b);
    let k = rng.choose(&[p0, p1]);
    (k as u8, b.vectors()[k])
}

// ---------------------------------------------------------------------------
// two qubits

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState2Q {
    amps: [Complex64; 4],
}

impl PureState2Q {
    /// Coefficients of `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        check_normalized(&amps)?;
        Ok(Self { amps })
    }

    pub fn product(first: &PureState1Q, second: &PureState1Q) -> Self {
        let [a0, a1] = first.amplitudes();
        let [b0, b1] = second.amplitudes();
        Self {
            amps: [a0 * b0, a0 * b1, a1 * b0, a1 * b1],
        }
    }

    pub fn phi_plus() -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        Self {
            amps: [h, ZERO, ZERO, h],
        }
    }

    pub fn phi_minus() -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        Self {
            amps: [h, ZERO, ZERO, -h],
        }
    }

    pub fn psi_plus() -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        Self {
            amps: [ZERO, h, h, ZERO],
        }
    }

    pub fn psi_minus() -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        Self {
            amps: [ZERO, h, -h, ZERO],
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.amps
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.amps, &other.amps)
    }

    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        (self.inner(other).norm() - 1.0).abs() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis2Q {
    /// `Φ+, Φ−, Ψ+, Ψ−` in that order.
    Bell,
    /// `|00⟩, |01⟩, |10⟩, |11⟩`.
    Computational,
}

impl Basis2Q {
    pub fn vectors(&self) -> [PureState2Q; 4] {
        match self {
            Self::Bell => [
                PureState2Q::phi_plus(),
                PureState2Q::phi_minus(),
                PureState2Q::psi_plus(),
                PureState2Q::psi_minus(),
            ],
            Self::Computational => {
                let z = PureState1Q::zero();
                let o = PureState1Q::one();
                [
                    PureState2Q::product(&z, &z),
                    PureState2Q::product(&z, &o),
                    PureState2Q::product(&o, &z),
                    PureState2Q::product(&o, &o),
                ]
            }
        }
    }

    pub fn label(&self, k: usize) -> &'static str {
        match self {
            Self::Bell => ["phi+", "phi-", "psi+", "psi-"][k],
            Self::Computational => ["00", "01", "10", "11"][k],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bell => "bell",
            Self::Computational => "computational",
        }
    }
}

pub fn born_probabilities_2q(s: &PureState2Q, b: &Basis2Q) -> [f64; 4] {
    b.vectors().map(|v| v.inner(s).norm_sqr())
}

pub fn measure_2q(s: &PureState2Q, b: &Basis2Q, rng: &mut RngStream) -> (usize, PureState2Q) {
    let probs = born_probabilities_2q(s, b);
    let k = rng.choose(&probs);
    (k, b.vectors()[k])
}

// ---------------------------------------------------------------------------
// qubit ⊗ ancilla

#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    dim: usize,
    amps: Vec<Complex64>,
}

impl JointState {
    pub fn new(dim: usize, amps: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || amps.len() != 2 * dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * dim.max(1),
                found: amps.len(),
            });
        }
        check_normalized(&amps)?;
        Ok(Self { dim, amps })
    }

    /// The qubit alone, with a trivial one-dimensional ancilla.
    pub fn from_qubit(q: &PureState1Q) -> Self {
        Self {
            dim: 1,
            amps: q.amplitudes().to_vec(),
        }
    }

    pub fn from_pure_2q(s: &PureState2Q) -> Self {
        Self {
            dim: 2,
            amps: s.amplitudes().to_vec(),
        }
    }

    pub(crate) fn product_unchecked(q: &PureState1Q, anc: &[Complex64]) -> Self {
        let [a0, a1] = q.amplitudes();
        let mut amps = Vec::with_capacity(2 * anc.len());
        amps.extend(anc.iter().map(|&z| a0 * z));
        amps.extend(anc.iter().map(|&z| a1 * z));
        Self {
            dim: anc.len(),
            amps,
        }
    }

    pub fn as_pure_2q(&self) -> Result<PureState2Q> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: self.dim,
            });
        }
        Ok(PureState2Q {
            amps: [self.amps[0], self.amps[1], self.amps[2], self.amps[3]],
        })
    }

    /// Ancilla dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// Applies `G ⊗ I` for a 2×2 gate `G`.
    pub fn apply_qubit_gate(&self, g: &[[Complex64; 2]; 2]) -> Self {
        let d = self.dim;
        let mut amps = vec![ZERO; 2 * d];
        for a in 0..d {
            let x0 = self.amps[a];
            let x1 = self.amps[d + a];
            amps[a] = g[0][0] * x0 + g[0][1] * x1;
            amps[d + a] = g[1][0] * x0 + g[1][1] * x1;
        }
        Self { dim: d, amps }
    }

    pub fn apply_hadamard(&self) -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        self.apply_qubit_gate(&[[h, h], [h, -h]])
    }

    /// Unnormalized ancilla residual `(⟨v| ⊗ I)|s⟩`.
    pub fn project_qubit(&self, v: &PureState1Q) -> Vec<Complex64> {
        let d = self.dim;
        let [v0, v1] = v.amplitudes();
        (0..d)
            .map(|a| v0.conj() * self.amps[a] + v1.conj() * self.amps[d + a])
            .collect()
    }

    /// Probability of each outcome of a qubit measurement in basis `b`.
    pub fn qubit_probabilities(&self, b: &Basis1Q) -> [f64; 2] {
        b.vectors().map(|v| norm_sqr(&self.project_qubit(&v)))
    }

    /// Probability of outcome `k` together with the normalized ancilla residual.
    pub fn qubit_branch(&self, b: &Basis1Q, k: usize) -> Result<(f64, Vec<Complex64>)> {
        let mut r = self.project_qubit(&b.vectors()[k]);
        let p = norm_sqr(&r);
        if p < DEGENERATE_PROB {
            return Err(Error::DegenerateBranch { probability: p });
        }
        let s = 1.0 / p.sqrt();
        r.iter_mut().for_each(|z| *z *= s);
        Ok((p, r))
    }

    /// Post-measurement state for a forced outcome `k`.
    pub fn collapse_qubit(&self, b: &Basis1Q, k: usize) -> Result<(f64, JointState)> {
        let (p, r) = self.qubit_branch(b, k)?;
        Ok((p, Self::product_unchecked(&b.vectors()[k], &r)))
    }
}

pub fn attach_ancilla(q: &PureState1Q, anc: &[Complex64]) -> Result<JointState> {
    if anc.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    check_normalized(anc)?;
    Ok(JointState::product_unchecked(q, anc))
}

/// Largest entry of `|U^dagger U - I|`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            let z = g[(i, j)] - target;
            if !(z.re.is_finite() && z.im.is_finite()) {
                return f64::INFINITY;
            }
            worst = worst.max(z.norm());
        }
    }
    worst
}

/// A validated unitary acting on qubit ⊗ ancilla.
#[derive(Clone, Debug, PartialEq)]
pub struct JointUnitary {
    m: CMatrix,
}

impl JointUnitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 2 * (m.nrows() / 2).max(1),
                found: m.ncols(),
            });
        }
        let deviation = unitarity_deviation(&m);
        if deviation > UNITARY_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Self { m })
    }

    pub fn identity(ancilla_dim: usize) -> Self {
        Self {
            m: CMatrix::identity(2 * ancilla_dim, 2 * ancilla_dim),
        }
    }

    pub fn ancilla_dim(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn apply(&self, s: &JointState) -> Result<JointState> {
        if s.dim != self.ancilla_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ancilla_dim(),
                found: s.dim,
            });
        }
        let n = self.m.nrows();
        let mut amps: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| self.m[(i, j)] * s.amps[j]).sum())
            .collect();
        normalize(&mut amps)?;
        Ok(JointState { dim: s.dim, amps })
    }
}

/// `s' = U s`, checking unitarity of `u` first.
pub fn apply_joint_unitary(s: &JointState, u: &CMatrix) -> Result<JointState> {
    JointUnitary::new(u.clone())?.apply(s)
}

pub fn measure_qubit_of_joint(
    s: &JointState,
    b: &Basis1Q,
    rng: &mut RngStream,
) -> Result<(u8, JointState)> {
    let k = rng.choose(&s.qubit_probabilities(b));
    let (_, post) = s.collapse_qubit(b, k)?;
    Ok((k as u8, post))
}

/// Partial trace over the qubit.
pub fn reduced_ancilla_state(s: &JointState) -> DensityMatrix {
    let d = s.dim;
    let m = CMatrix::from_fn(d, d, |i, j| {
        s.amps[i] * s.amps[j].conj() + s.amps[d + i] * s.amps[d + j].conj()
    });
    DensityMatrix { m }
}

/// Partial trace over the ancilla.
pub fn reduced_qubit_state(s: &JointState) -> DensityMatrix {
    let d = s.dim;
    let m = CMatrix::from_fn(2, 2, |i, j| {
        (0..d)
            .map(|a| s.amps[i * d + a] * s.amps[j * d + a].conj())
            .sum()
    });
    DensityMatrix { m }
}

// ---------------------------------------------------------------------------
// density matrices

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let herm = (&m - m.adjoint())
            .iter()
            .fold(0.0f64, |w, z| w.max(z.norm()));
        if herm.is_nan() || herm > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let rho = Self { m };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`
    pub fn from_pure(v: &[Complex64]) -> Self {
        let n = norm_sqr(v);
        let m = CMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() / n);
        Self { m }
    }

    /// Diagonal (classical) state.
    pub fn from_probabilities(p: &[f64]) -> Self {
        let total: f64 = p.iter().sum();
        let m = CMatrix::from_fn(p.len(), p.len(), |i, j| {
            if i == j {
                c(p[i] / total, 0.0)
            } else {
                ZERO
            }
        });
        Self { m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_probabilities(&vec![1.0; dim])
    }

    /// Normalized weighted mixture. Errors on an empty or weightless input.
    pub fn mixture<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a DensityMatrix)>,
    {
        let mut acc: Option<CMatrix> = None;
        let mut total = 0.0;
        for (w, rho) in parts {
            total += w;
            match acc.as_mut() {
                None => acc = Some(&rho.m * c(w, 0.0)),
                Some(a) => {
                    if a.nrows() != rho.m.nrows() {
                        return Err(Error::DimensionMismatch {
                            expected: a.nrows(),
                            found: rho.m.nrows(),
                        });
                    }
                    *a += &rho.m * c(w, 0.0);
                }
            }
        }
        match acc {
            Some(a) if total > 0.0 => Ok(Self {
                m: a / c(total, 0.0),
            }),
            _ => Err(Error::InsufficientData("empty mixture".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    /// `⟨v|ρ|v⟩`
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += v[i].conj() * self.m[(i, j)] * v[j];
            }
        }
        acc.re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }
}

fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `½ Σ |λ_i(ρ₁ − ρ₂)|`, clamped to `[0, 1]`.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.dim(),
            found: r2.dim(),
        });
    }
    let diff = &r1.m - &r2.m;
    let t = 0.5
        * hermitian_eigenvalues(&diff)
            .iter()
            .map(|l| l.abs())
            .sum::<f64>();
    Ok(t.clamp(0.0, 1.0))
}
