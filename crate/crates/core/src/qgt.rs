//! Quantum geometric tensor of the occupied doublet, quantum metric and
//! Berry-curvature traces.
//!
//! Three independent routes to the metric are provided:
//! the closed form `g = 2^(N-3) sum_i d_a d_hat_i d_b d_hat_i`, the spectral
//! sum `Q = tr(P dH (1 - P) dH) / 4d^2`, and the band-resolved tensor built
//! from an explicit (gauge-fixed) eigenbasis. Curvature operators use the
//! projector form `F_ab = i P [d_a P, d_b P] P`, which is gauge covariant, so
//! every trace of products of them is gauge invariant.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::GammaSet;
use crate::linalg::{
    c, hermitian_eigh, permutation_sign, sqrt_det_psd, trace, trace_product, CMatrix, RMatrix, C64,
    I,
};
use crate::model::{
    d_hat, d_hat_jacobian, hamiltonian_derivatives, occupied_projector, projector_derivatives,
    DerivativeScheme, DiracModel,
};

/// Pivot magnitude below which eigenvector phase fixing is refused.
pub const GAUGE_PIVOT_THRESHOLD: f64 = 1e-12;

/// Relative threshold (against the Hadamard bound of `sqrt(det g)`) under
/// which the curvature form is treated as zero.
pub const SIGN_THRESHOLD: f64 = 1e-12;

/// `tr(F_ab F_cd)` over all index quadruples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTrace {
    pub k_dim: usize,
    pub values: Vec<f64>,
}

impl PairTrace {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.k_dim;
        self.values[((a * n + b) * n + c) * n + d]
    }

    /// `sum eps_{abcd} tr(F_ab F_cd)` (four-dimensional only).
    pub fn epsilon_contraction(&self) -> f64 {
        assert_eq!(self.k_dim, 4);
        (0..4)
            .permutations(4)
            .map(|p| permutation_sign(&p) * self.get(p[0], p[1], p[2], p[3]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QgtResult {
    pub k: Vec<f64>,
    pub metric: RMatrix,
    /// Band-traced tensor `Q_ab = sum_n Q^{nn}_ab`.
    pub qgt: CMatrix,
    /// `sum_n F^{nn}_ab = i (Q_ab - Q_ba)`.
    pub curvature_trace: RMatrix,
    pub pair_trace: PairTrace,
}

pub fn metric_prefactor(n_half_dim: usize) -> f64 {
    2f64.powi(n_half_dim as i32 - 3)
}

/// `g_ab = 2^(N-3) sum_i d_a d_hat_i d_b d_hat_i`.
pub fn metric_closed_form(
    model: &dyn DiracModel,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<RMatrix> {
    let jac = d_hat_jacobian(model, k, scheme)?;
    Ok(metric_from_hat_jacobian(model.n_half_dim(), &jac))
}

pub(crate) fn metric_from_hat_jacobian(n_half_dim: usize, jac: &RMatrix) -> RMatrix {
    (jac * jac.transpose()) * metric_prefactor(n_half_dim)
}

/// Band-traced tensor from the spectral sum over occupied and empty states.
pub fn qgt_spectral(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<QgtResult> {
    let (_, d) = d_hat(model, k)?;
    let p = occupied_projector(model, gammas, k)?;
    let q = p.complement();
    let dh = hamiltonian_derivatives(model, gammas, k, scheme)?;
    let k_dim = model.k_dim();
    let left: Vec<CMatrix> = dh.iter().map(|x| &p.matrix * x * &q).collect();
    let scale = 1.0 / (4.0 * d * d);
    let qgt = CMatrix::from_fn(k_dim, k_dim, |a, b| trace_product(&left[a], &dh[b]) * scale);
    let metric = RMatrix::from_fn(k_dim, k_dim, |a, b| 0.5 * (qgt[(a, b)] + qgt[(b, a)]).re);
    let curvature_trace =
        RMatrix::from_fn(k_dim, k_dim, |a, b| (I * (qgt[(a, b)] - qgt[(b, a)])).re);
    let pair_trace = curvature_pair_trace(model, gammas, k, scheme)?;
    Ok(QgtResult {
        k: k.to_vec(),
        metric,
        qgt,
        curvature_trace,
        pair_trace,
    })
}

/// Band-traced tensor in projector form, `Q_ab = tr(P d_a P d_b P)`.
pub fn qgt_projector(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<CMatrix> {
    let p = occupied_projector(model, gammas, k)?;
    let dp = projector_derivatives(model, gammas, k, scheme)?;
    let k_dim = model.k_dim();
    let left: Vec<CMatrix> = dp.iter().map(|x| &p.matrix * x).collect();
    Ok(CMatrix::from_fn(k_dim, k_dim, |a, b| {
        trace_product(&left[a], &dp[b])
    }))
}

/// Curvature operators `F_ab = i P [d_a P, d_b P] P`, indexed `a * 2N + b`.
pub fn curvature_operators(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<Vec<CMatrix>> {
    let p = occupied_projector(model, gammas, k)?;
    let dp = projector_derivatives(model, gammas, k, scheme)?;
    Ok(curvature_from_projector(&p.matrix, &dp))
}

pub(crate) fn curvature_from_projector(p: &CMatrix, dp: &[CMatrix]) -> Vec<CMatrix> {
    let k_dim = dp.len();
    let n = p.nrows();
    let mut out = vec![CMatrix::zeros(n, n); k_dim * k_dim];
    for a in 0..k_dim {
        for b in (a + 1)..k_dim {
            let comm = &dp[a] * &dp[b] - &dp[b] * &dp[a];
            let f = p * comm * p * I;
            out[b * k_dim + a] = -&f;
            out[a * k_dim + b] = f;
        }
    }
    out
}

pub fn curvature_pair_trace(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<PairTrace> {
    let f = curvature_operators(model, gammas, k, scheme)?;
    let k_dim = model.k_dim();
    let n2 = k_dim * k_dim;
    let mut values = vec![0.0; n2 * n2];
    for ab in 0..n2 {
        for cd in ab..n2 {
            let t = trace_product(&f[ab], &f[cd]).re;
            values[ab * n2 + cd] = t;
            values[cd * n2 + ab] = t;
        }
    }
    Ok(PairTrace { k_dim, values })
}

/// `eps_{a1..a2N} tr(F_{a1 a2} ... F_{a2N-1 a2N})`.
pub fn curvature_form(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<f64> {
    let f = curvature_operators(model, gammas, k, scheme)?;
    Ok(epsilon_trace(&f, model.k_dim()))
}

pub(crate) fn epsilon_trace(f: &[CMatrix], k_dim: usize) -> f64 {
    if k_dim == 2 {
        return 2.0 * trace(&f[1]).re;
    }
    // Each term is invariant under swapping indices within a pair, so only
    // permutations with ordered pairs are summed and the result is rescaled.
    let pairs = k_dim / 2;
    let mut total = 0.0;
    for perm in (0..k_dim).permutations(k_dim) {
        if (0..pairs).any(|j| perm[2 * j] > perm[2 * j + 1]) {
            continue;
        }
        let mut prod = f[perm[0] * k_dim + perm[1]].clone();
        for j in 1..pairs - 1 {
            prod *= &f[perm[2 * j] * k_dim + perm[2 * j + 1]];
        }
        let last = &f[perm[k_dim - 2] * k_dim + perm[k_dim - 1]];
        total += permutation_sign(&perm) * trace_product(&prod, last).re;
    }
    total * (1u64 << pairs) as f64
}

/// `2^(N^2 - 3N + 1) / (2N)!`, the factor relating `sqrt(det g)` to the curvature form.
pub fn curvature_form_coefficient(n_half_dim: usize) -> f64 {
    let n = n_half_dim as i32;
    let fact: f64 = (1..=2 * n_half_dim).map(|x| x as f64).product();
    2f64.powi(n * n - 3 * n + 1) / fact
}

/// `det` of the square matrix with rows `d_hat, d_1 d_hat, ..., d_2N d_hat`.
pub fn d_hat_determinant(
    model: &dyn DiracModel,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<f64> {
    let (hat, _) = d_hat(model, k)?;
    let jac = d_hat_jacobian(model, k, scheme)?;
    let n = hat.len();
    let a = RMatrix::from_fn(
        n,
        n,
        |r, col| {
            if r == 0 {
                hat[col]
            } else {
                jac[(r - 1, col)]
            }
        },
    );
    Ok(a.determinant())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetIdentityReport {
    pub sqrt_det_g: f64,
    /// `2^(N(N-3)) |det A|`.
    pub det_a_form: f64,
    /// Curvature form scaled to `sqrt(det g)` units.
    pub ff_form: f64,
    pub max_rel_discrepancy: f64,
}

impl DetIdentityReport {
    pub fn from_parts(sqrt_det_g: f64, det_a_form: f64, ff_form: f64) -> Self {
        let vals = [sqrt_det_g, det_a_form, ff_form];
        let mut worst: f64 = 0.0;
        for (i, x) in vals.iter().enumerate() {
            for y in &vals[i + 1..] {
                let scale = x.abs().max(y.abs());
                if scale > 0.0 {
                    worst = worst.max((x - y).abs() / scale);
                }
            }
        }
        Self {
            sqrt_det_g,
            det_a_form,
            ff_form,
            max_rel_discrepancy: worst,
        }
    }
}

pub fn det_identity_report(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<DetIdentityReport> {
    det_identity_report_scaled(model, gammas, k, scheme, 1.0)
}

/// As [`det_identity_report`] with the metric multiplied by `metric_scale`
/// before its determinant is taken (negative control).
pub fn det_identity_report_scaled(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
    metric_scale: f64,
) -> Result<DetIdentityReport> {
    let n = model.n_half_dim();
    if !(1..=2).contains(&n) {
        return Err(Error::Unsupported(format!(
            "determinant identity report is limited to N = 1, 2 (got N = {n})"
        )));
    }
    let g = metric_closed_form(model, k, scheme)? * metric_scale;
    let sqrt_det_g = sqrt_det_psd(&g);
    let nn = n as i32;
    let det_a_form = 2f64.powi(nn * (nn - 3)) * d_hat_determinant(model, k, scheme)?.abs();
    let ff_form = curvature_form_coefficient(n) * curvature_form(model, gammas, k, scheme)?.abs();
    Ok(DetIdentityReport::from_parts(
        sqrt_det_g, det_a_form, ff_form,
    ))
}

/// Sign of the curvature form, 0 where it vanishes to [`SIGN_THRESHOLD`].
pub fn sgn_tf(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<i8> {
    Ok(chern_density(model, gammas, k, scheme)?.sign)
}

/// Per-point ingredients of the metric-area Chern number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernDensity {
    pub sqrt_det_g: f64,
    pub form: f64,
    pub sign: i8,
}

pub fn chern_density(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<ChernDensity> {
    let g = metric_closed_form(model, k, scheme)?;
    let f = curvature_operators(model, gammas, k, scheme)?;
    let form = epsilon_trace(&f, model.k_dim());
    let sqrt_det_g = sqrt_det_psd(&g);
    let bound: f64 = g.diagonal().iter().map(|x| x.max(0.0).sqrt()).product();
    let scaled = curvature_form_coefficient(model.n_half_dim()) * form.abs();
    let sign = if bound == 0.0 || scaled <= SIGN_THRESHOLD * bound {
        0
    } else if form > 0.0 {
        1
    } else {
        -1
    };
    Ok(ChernDensity {
        sqrt_det_g,
        form,
        sign,
    })
}

/// Band-resolved tensor `Q^{n1 n2}_ab` in an explicit occupied basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NonAbelianQgt {
    pub k_dim: usize,
    /// Occupied eigenvectors as columns.
    pub occupied: CMatrix,
    /// `n_occ x n_occ` blocks indexed `a * 2N + b`.
    pub blocks: Vec<CMatrix>,
}

impl NonAbelianQgt {
    pub fn block(&self, a: usize, b: usize) -> &CMatrix {
        &self.blocks[a * self.k_dim + b]
    }

    /// Trace over the band index, `Q_ab`.
    pub fn traced(&self) -> CMatrix {
        CMatrix::from_fn(self.k_dim, self.k_dim, |a, b| trace(self.block(a, b)))
    }

    pub fn metric(&self) -> RMatrix {
        let t = self.traced();
        RMatrix::from_fn(self.k_dim, self.k_dim, |a, b| {
            0.5 * (t[(a, b)] + t[(b, a)]).re
        })
    }
}

/// Multiply a vector by the phase that makes its largest component real positive.
pub fn gauge_fix(v: &mut CMatrix, col: usize) -> Result<()> {
    let (pivot, mag) = (0..v.nrows())
        .map(|r| (r, v[(r, col)].norm()))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if mag < GAUGE_PIVOT_THRESHOLD {
        return Err(Error::GaugeFixFailure { pivot: mag });
    }
    let phase = v[(pivot, col)].conj() / mag;
    for r in 0..v.nrows() {
        v[(r, col)] *= phase;
    }
    Ok(())
}

/// Deterministically gauge-fixed eigenbasis `(occupied, unoccupied)` at `k`.
pub fn gauge_fixed_eigenbasis(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
) -> Result<(CMatrix, CMatrix)> {
    d_hat(model, k)?;
    let h = crate::model::eval_hamiltonian(model, gammas, k)?;
    let (_, mut vecs) = hermitian_eigh(&h);
    for col in 0..vecs.ncols() {
        gauge_fix(&mut vecs, col)?;
    }
    let half = gammas.dim() / 2;
    let occ = vecs.columns(0, half).into_owned();
    let unocc = vecs.columns(half, half).into_owned();
    Ok((occ, unocc))
}

pub fn nonabelian_qgt(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<NonAbelianQgt> {
    let (occ, unocc) = gauge_fixed_eigenbasis(model, gammas, k)?;
    nonabelian_qgt_in_basis(model, gammas, k, scheme, &occ, &unocc)
}

/// `Q^{n1 n2}_ab = sum_m <d_a n1|m><m|d_b n2>` using
/// `<m|d_a n> = <m|d_a H|n> / (E_n - E_m)` in the supplied basis.
pub fn nonabelian_qgt_in_basis(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
    occupied: &CMatrix,
    unoccupied: &CMatrix,
) -> Result<NonAbelianQgt> {
    let (_, d) = d_hat(model, k)?;
    let dh = hamiltonian_derivatives(model, gammas, k, scheme)?;
    let denom = c(-2.0 * d);
    let overlaps: Vec<CMatrix> = dh
        .iter()
        .map(|x| unoccupied.adjoint() * x * occupied / denom)
        .collect();
    let k_dim = model.k_dim();
    let blocks = (0..k_dim * k_dim)
        .map(|ab| overlaps[ab / k_dim].adjoint() * &overlaps[ab % k_dim])
        .collect();
    Ok(NonAbelianQgt {
        k_dim,
        occupied: occupied.clone(),
        blocks,
    })
}

/// Convenience: `sum` of a complex matrix's entries' imaginary parts' magnitudes.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().map(|z: &C64| z.im.abs()).fold(0.0, f64::max)
}
