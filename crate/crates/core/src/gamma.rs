//! Clifford algebra of `2N + 1` anticommuting Hermitian matrices of size `2^N`.
//!
//! The representation is fixed by a recursive tensor-product rule so that
//! every downstream number is reproducible bit-for-bit. Starting from the
//! Pauli matrices at `N = 1`, a valid set `{G_i}` at level `N - 1` yields
//! `{sx (x) G_i, sy (x) 1, sz (x) 1}` at level `N`.

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, c, max_abs, trace, CMatrix, C64};

/// Largest supported half-dimension (16 x 16 matrices).
pub const MAX_HALF_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    n_half_dim: usize,
    matrices: Vec<CMatrix>,
}

pub fn pauli() -> [CMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let one = c(1.0);
    let i = C64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

pub fn build_gammas(n_half_dim: usize) -> Result<GammaSet> {
    build_gammas_capped(n_half_dim, MAX_HALF_DIM)
}

pub fn build_gammas_capped(n_half_dim: usize, max_half_dim: usize) -> Result<GammaSet> {
    if n_half_dim == 0 || n_half_dim > max_half_dim {
        return Err(Error::InvalidDimension {
            n: n_half_dim,
            max: max_half_dim,
        });
    }
    let [sx, sy, sz] = pauli();
    let mut matrices = vec![sx.clone(), sy.clone(), sz.clone()];
    for level in 2..=n_half_dim {
        let identity = CMatrix::identity(1 << (level - 1), 1 << (level - 1));
        let mut next: Vec<CMatrix> = matrices.iter().map(|g| sx.kronecker(g)).collect();
        next.push(sy.kronecker(&identity));
        next.push(sz.kronecker(&identity));
        matrices = next;
    }
    Ok(GammaSet {
        n_half_dim,
        matrices,
    })
}

impl GammaSet {
    pub fn n_half_dim(&self) -> usize {
        self.n_half_dim
    }

    /// Matrix size `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n_half_dim
    }

    /// Number of matrices, `2N + 1`.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn get(&self, i: usize) -> &CMatrix {
        &self.matrices[i]
    }

    /// `sum_i coeffs[i] * Gamma_i`.
    pub fn combine(&self, coeffs: &[f64]) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (g, &x) in self.matrices.iter().zip(coeffs) {
            if x != 0.0 {
                out += g * c(x);
            }
        }
        out
    }

    /// Largest max-norm of `{G_i, G_j} - 2 delta_ij 1` over all pairs.
    pub fn clifford_residual(&self) -> f64 {
        let id = CMatrix::identity(self.dim(), self.dim());
        let mut worst: f64 = 0.0;
        for (i, a) in self.matrices.iter().enumerate() {
            for (j, b) in self.matrices.iter().enumerate() {
                let mut r = anticommutator(a, b);
                if i == j {
                    r -= &id * c(2.0);
                }
                worst = worst.max(max_abs(&r));
            }
        }
        worst
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.matrices
            .iter()
            .map(|g| max_abs(&(g - g.adjoint())))
            .fold(0.0, f64::max)
    }

    pub fn max_trace(&self) -> f64 {
        self.matrices
            .iter()
            .map(|g| trace(g).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_is_pauli() {
        let g = build_gammas(1).unwrap();
        assert_eq!(g.matrices(), &pauli());
        assert_eq!(g.clifford_residual(), 0.0);
    }

    #[test]
    fn level_two_first_pair_anticommutes() {
        let g = build_gammas(2).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.dim(), 4);
        let ac = anticommutator(g.get(0), g.get(1));
        assert_eq!(max_abs(&ac), 0.0);
    }

    #[test]
    fn all_levels_satisfy_clifford_relations() {
        for n in 1..=MAX_HALF_DIM {
            let g = build_gammas(n).unwrap();
            assert_eq!(g.len(), 2 * n + 1);
            assert!(g.clifford_residual() < 1e-14, "N={n}");
            assert!(g.hermiticity_residual() < 1e-14, "N={n}");
            assert!(g.max_trace() < 1e-14, "N={n}");
            for m in g.matrices() {
                let sq = m * m;
                assert!(max_abs(&(sq - CMatrix::identity(g.dim(), g.dim()))) < 1e-14);
            }
        }
    }

    #[test]
    fn level_three_has_seven_8x8() {
        let g = build_gammas(3).unwrap();
        assert_eq!(g.len(), 7);
        assert!(g.matrices().iter().all(|m| m.shape() == (8, 8)));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            build_gammas(0),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(matches!(
            build_gammas(5),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(build_gammas_capped(3, 2).is_err());
    }
}
