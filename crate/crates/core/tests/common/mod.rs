#![allow(dead_code)]

use std::f64::consts::PI;

use qgeom_core::linalg::{c, hermitian_eigh, CMatrix, C64};
use qgeom_core::model::{DiracModel, Factor, FourierModel, FourierTerm, Trig};
use qgeom_core::RMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_k(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// Random point kept away from the sign-changing set `cos k_a = 0` and from
/// the high-symmetry momenta where lattice Dirac models can close the gap.
pub fn generic_k(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let k = random_k(rng, dim);
        let ok = k.iter().all(|x| {
            let x: f64 = *x;
            x.cos().abs() > 0.1 && x.sin().abs() > 0.1
        });
        if ok {
            return k;
        }
    }
}

fn random_term(rng: &mut ChaCha8Rng, k_dim: usize) -> FourierTerm {
    let n_factors = rng.gen_range(0..=2);
    FourierTerm {
        coeff: rng.gen_range(-1.0..1.0),
        factors: (0..n_factors)
            .map(|_| Factor {
                axis: rng.gen_range(0..k_dim),
                trig: if rng.gen_bool(0.5) {
                    Trig::Sin
                } else {
                    Trig::Cos
                },
                harmonic: rng.gen_range(1..=2),
            })
            .collect(),
    }
}

/// Random smooth model: a few random Fourier terms per component plus a
/// constant on the last component so that most points are gapped.
pub fn random_model(rng: &mut ChaCha8Rng, n_half_dim: usize) -> FourierModel {
    let k_dim = 2 * n_half_dim;
    let mut d: Vec<Vec<FourierTerm>> = (0..=k_dim)
        .map(|_| (0..3).map(|_| random_term(rng, k_dim)).collect())
        .collect();
    d[k_dim].push(FourierTerm::constant(rng.gen_range(1.0..2.0)));
    let d0 = (0..2).map(|_| random_term(rng, k_dim)).collect();
    FourierModel::new(n_half_dim, d).unwrap().with_offset(d0)
}

/// Haar-ish random unitary from the polar part of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    qgeom_core::linalg::unitary_part(&m)
}

/// Projector onto the lowest `rank` eigenvectors of a brute-force eigen-solve.
pub fn eigen_projector(h: &CMatrix, rank: usize) -> CMatrix {
    let (_, vecs) = hermitian_eigh(h);
    let occ = vecs.columns(0, rank);
    occ * occ.adjoint()
}

pub fn max_diff_c(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_diff_r(a: &RMatrix, b: &RMatrix) -> f64 {
    (a - b).amax()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n) * c(1.0)
}

/// A model that only exposes `d(k)`; derivative-dependent code must fall back
/// to finite differences.
pub struct NoJacobian<M>(pub M);

impl<M: DiracModel> DiracModel for NoJacobian<M> {
    fn n_half_dim(&self) -> usize {
        self.0.n_half_dim()
    }

    fn d_vector(&self, k: &[f64]) -> Vec<f64> {
        self.0.d_vector(k)
    }
}
