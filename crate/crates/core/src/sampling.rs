//! Seeded random instances: Haar-uniform rays, Hermitian matrices, unitaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector, C64};
use crate::projective::{Observable, PureState};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for shard `k` of a computation seeded with `seed`.
pub fn shard_rng(seed: u64, k: u64) -> Rng64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k + 1);
    r
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    CVector::from_fn(dim, |_, _| complex_gaussian(rng))
}

/// Ray distributed according to the unitary-invariant (Fubini-Study volume) measure.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        if let Ok(s) = PureState::new(gaussian_vector(dim, rng)) {
            return s;
        }
    }
}

/// Nonzero complex factor with log-uniform modulus in [1e-3, 1e3] and uniform phase.
pub fn random_gauge<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let r = 10f64.powf(rng.random_range(-3.0..3.0));
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, phi)
}

/// Hermitian matrix from the Gaussian unitary ensemble (unit off-diagonal variance).
pub fn random_hermitian_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_observable<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Observable {
    Observable::new(random_hermitian_matrix(dim, rng)).expect("symmetrized matrix is Hermitian")
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = a.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, k)] *= ph;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        let u = random_unitary(4, &mut r);
        assert!((u.adjoint() * &u - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn seeded_streams_reproduce() {
        let a = random_state(3, &mut rng(11));
        let b = random_state(3, &mut rng(11));
        assert_eq!(a.components(), b.components());
        let c = random_state(3, &mut shard_rng(11, 0));
        let d = random_state(3, &mut shard_rng(11, 1));
        assert_ne!(c.components(), d.components());
    }
}
