#![allow(dead_code)]

use msqkd::adversary::{AttackStrategy, CollectiveParams};
use msqkd::qubit::{Basis1Q, CMatrix, JointUnitary};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            d / d.norm()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    q * phases
}

pub fn unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Two orthonormal columns of a Haar unitary.
pub fn orthonormal_pair(d: usize, rng: &mut ChaCha8Rng) -> [Vec<Complex64>; 2] {
    let u = haar_unitary(d, rng);
    [0, 1].map(|k| (0..d).map(|r| u[(r, k)]).collect())
}

/// Unit-norm coefficient pair with both entries nonzero.
pub fn coefficients(rng: &mut ChaCha8Rng) -> [Complex64; 2] {
    loop {
        let v = unit_vector(2, rng);
        if v[0].norm() > 1e-3 && v[1].norm() > 1e-3 {
            return [v[0], v[1]];
        }
    }
}

/// `(−conj(y), conj(x))`, orthogonal to `(x, y)`.
pub fn orthogonal_coefficients(p: [Complex64; 2]) -> [Complex64; 2] {
    [-p[1].conj(), p[0].conj()]
}

/// Parameters where every ancilla pair the fresh variant relies on is
/// orthonormal and every coefficient is nonzero.
pub fn orthonormal_fresh_params(d: usize, rng: &mut ChaCha8Rng) -> CollectiveParams {
    let g = orthonormal_pair(d, rng);
    let i = orthonormal_pair(d, rng);
    let b = coefficients(rng);
    let dd = coefficients(rng);
    CollectiveParams {
        a: coefficients(rng),
        b,
        c: orthogonal_coefficients(b),
        d: dd,
        e: orthogonal_coefficients(dd),
        f: orthonormal_pair(d, rng),
        g: g.clone(),
        h: g,
        i: i.clone(),
        j: i,
    }
}

pub fn haar_joint(d: usize, rng: &mut ChaCha8Rng) -> JointUnitary {
    JointUnitary::new(haar_unitary(2 * d, rng)).expect("Haar sample is unitary")
}

/// Interpolates between the identity and a Haar unitary: `exp(i t H)` with
/// `H` Hermitian, giving attacks of every strength.
pub fn weak_unitary(d: usize, t: f64, rng: &mut ChaCha8Rng) -> JointUnitary {
    let n = 2 * d;
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(0.0, t * eig.eigenvalues[i]).exp()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let v = eig.eigenvectors;
    JointUnitary::new(&v * phases * v.adjoint()).expect("exponential of Hermitian is unitary")
}

/// A collective strategy drawn from a mix of families: Haar-random,
/// near-identity of random strength, and single-channel attacks.
pub fn random_collective(k: usize, rng: &mut ChaCha8Rng) -> AttackStrategy {
    let d = 2 + k % 2;
    let tp_basis = if k.is_multiple_of(3) {
        Basis1Q::Z
    } else {
        Basis1Q::X
    };
    let us: [JointUnitary; 3] = match k % 4 {
        0 => [haar_joint(d, rng), haar_joint(d, rng), haar_joint(d, rng)],
        1 => {
            let t: f64 = rng.random_range(0.0..0.5);
            [
                weak_unitary(d, t, rng),
                weak_unitary(d, t, rng),
                weak_unitary(d, t, rng),
            ]
        }
        2 => {
            let t: f64 = rng.random_range(0.0..0.05);
            [
                weak_unitary(d, t, rng),
                JointUnitary::identity(d),
                weak_unitary(d, t, rng),
            ]
        }
        _ => {
            let mut us = [
                JointUnitary::identity(d),
                JointUnitary::identity(d),
                JointUnitary::identity(d),
            ];
            us[rng.random_range(0..3)] = haar_joint(d, rng);
            us
        }
    };
    if k.is_multiple_of(2) {
        AttackStrategy::collective_fresh(us, tp_basis)
    } else {
        AttackStrategy::collective_shared(us, tp_basis).expect("equal dimensions")
    }
}
