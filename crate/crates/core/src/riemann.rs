//! Riemannian geometry induced by the quantum metric.
//!
//! Derivatives of `g` are central differences of metric evaluations at
//! shifted momenta; the Riemann tensor differentiates the Christoffel symbols
//! once more (nested stencils). The sphere identities checked here are those
//! of a `2N`-sphere of radius `2^((N-3)/2)`, i.e. constant sectional curvature
//! `K = 2^(3-N)`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::chern::BrillouinGrid;
use crate::error::{Error, Result};
use crate::linalg::{permutation_sign, symmetric_eigenvalues, RMatrix};
use crate::model::{DerivativeScheme, DiracModel};
use crate::qgt::metric_closed_form;

pub const DEFAULT_CURVATURE_STEP: f64 = 1e-3;
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdOptions {
    pub step: f64,
    /// Combine steps `h` and `h/2` to cancel the leading truncation error.
    pub richardson: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_CURVATURE_STEP,
            richardson: false,
        }
    }
}

/// A smooth field of symmetric matrices over parameter space.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn metric(&self, k: &[f64]) -> Result<RMatrix>;
}

/// The closed-form quantum metric of a Dirac model.
pub struct QuantumMetric<'a> {
    pub model: &'a dyn DiracModel,
    pub scheme: DerivativeScheme,
}

impl<'a> QuantumMetric<'a> {
    pub fn new(model: &'a dyn DiracModel) -> Self {
        Self {
            model,
            scheme: DerivativeScheme::preferred(model),
        }
    }
}

impl MetricField for QuantumMetric<'_> {
    fn dim(&self) -> usize {
        self.model.k_dim()
    }

    fn metric(&self, k: &[f64]) -> Result<RMatrix> {
        metric_closed_form(self.model, k, self.scheme)
    }
}

/// `scale * g` of an inner field; used as a negative control.
pub struct ScaledMetric<F> {
    pub inner: F,
    pub scale: f64,
}

impl<F: MetricField> MetricField for ScaledMetric<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn metric(&self, k: &[f64]) -> Result<RMatrix> {
        Ok(self.inner.metric(k)? * self.scale)
    }
}

fn central<F>(f: &F, k: &[f64], axis: usize, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut kp = k.to_vec();
    let mut km = k.to_vec();
    kp[axis] += h;
    km[axis] -= h;
    let (p, m) = (f(&kp)?, f(&km)?);
    Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

fn fd_derivative<F>(f: &F, k: &[f64], axis: usize, opts: FdOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let coarse = central(f, k, axis, opts.step)?;
    if !opts.richardson {
        return Ok(coarse);
    }
    let fine = central(f, k, axis, 0.5 * opts.step)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

fn flat(m: &RMatrix) -> Vec<f64> {
    // nalgebra storage is column-major; g is symmetric so either order works,
    // but keep row-major explicitly for the index helpers below.
    let n = m.nrows();
    (0..n * n).map(|i| m[(i / n, i % n)]).collect()
}

/// Inverse metric with the condition-number guard.
pub fn guarded_inverse(g: &RMatrix, k: &[f64]) -> Result<RMatrix> {
    let eig = symmetric_eigenvalues(g);
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition >= MAX_CONDITION {
        return Err(Error::SingularMetric {
            k: k.to_vec(),
            condition,
        });
    }
    g.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or(Error::SingularMetric {
            k: k.to_vec(),
            condition,
        })
}

/// Christoffel symbols of the second kind, `values[(a * n + b) * n + c] = Gamma^a_bc`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Christoffel {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a * self.dim + b) * self.dim + c]
    }
}

/// `Gamma^a_bc = 1/2 g^{ad} (d_b g_dc + d_c g_db - d_d g_bc)`.
pub fn christoffel(field: &dyn MetricField, k: &[f64], opts: FdOptions) -> Result<Christoffel> {
    let n = field.dim();
    let g = field.metric(k)?;
    let g_inv = guarded_inverse(&g, k)?;
    let metric_flat = |x: &[f64]| field.metric(x).map(|m| flat(&m));
    let dg: Vec<Vec<f64>> = (0..n)
        .map(|axis| fd_derivative(&metric_flat, k, axis, opts))
        .collect::<Result<_>>()?;
    let dgi = |c: usize, a: usize, b: usize| dg[c][a * n + b];
    let mut values = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let v: f64 = (0..n)
                    .map(|d| g_inv[(a, d)] * (dgi(b, d, c) + dgi(c, d, b) - dgi(d, b, c)))
                    .sum::<f64>()
                    * 0.5;
                values[(a * n + b) * n + c] = v;
                values[(a * n + c) * n + b] = v;
            }
        }
    }
    Ok(Christoffel { dim: n, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureBundle {
    pub k: Vec<f64>,
    pub dim: usize,
    #[serde(skip)]
    pub metric: RMatrix,
    pub christoffel: Christoffel,
    /// `R^a_bcd`, row-major over `(a, b, c, d)`.
    pub riemann_up: Vec<f64>,
    /// `R_abcd = g_ae R^e_bcd`.
    pub riemann_down: Vec<f64>,
    #[serde(skip)]
    pub ricci: RMatrix,
    pub scalar: f64,
    /// `eps_klmn eps_abcd R_klab R_mncd` (four dimensions only).
    pub euler_density_lhs: Option<f64>,
    /// `384 det g` (four dimensions only).
    pub euler_density_rhs: Option<f64>,
}

fn idx4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

impl CurvatureBundle {
    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riemann_down[idx4(self.dim, a, b, c, d)]
    }
}

pub fn curvature_bundle(
    field: &dyn MetricField,
    k: &[f64],
    opts: FdOptions,
) -> Result<CurvatureBundle> {
    let n = field.dim();
    let g = field.metric(k)?;
    let g_inv = guarded_inverse(&g, k)?;
    let gam = christoffel(field, k, opts)?;
    let gam_at = |x: &[f64]| christoffel(field, x, opts).map(|c| c.values);
    let dgam: Vec<Vec<f64>> = (0..n)
        .map(|axis| fd_derivative(&gam_at, k, axis, opts))
        .collect::<Result<_>>()?;
    let dgi = |e: usize, a: usize, b: usize, c: usize| dgam[e][(a * n + b) * n + c];

    let mut up = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dgi(c, a, b, d) - dgi(d, a, b, c);
                    for e in 0..n {
                        v += gam.get(a, e, c) * gam.get(e, b, d)
                            - gam.get(a, e, d) * gam.get(e, b, c);
                    }
                    up[idx4(n, a, b, c, d)] = v;
                }
            }
        }
    }
    let mut down = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    down[idx4(n, a, b, c, d)] =
                        (0..n).map(|e| g[(a, e)] * up[idx4(n, e, b, c, d)]).sum();
                }
            }
        }
    }
    let ricci = RMatrix::from_fn(n, n, |b, d| (0..n).map(|a| up[idx4(n, a, b, a, d)]).sum());
    let scalar = (0..n)
        .flat_map(|b| (0..n).map(move |d| (b, d)))
        .map(|(b, d)| g_inv[(b, d)] * ricci[(b, d)])
        .sum();
    let (lhs, rhs) = if n == 4 {
        (Some(euler_density(&down)), Some(384.0 * g.determinant()))
    } else {
        (None, None)
    };
    Ok(CurvatureBundle {
        k: k.to_vec(),
        dim: n,
        metric: g,
        christoffel: gam,
        riemann_up: up,
        riemann_down: down,
        ricci,
        scalar,
        euler_density_lhs: lhs,
        euler_density_rhs: rhs,
    })
}

/// `eps_klmn eps_abcd R_klab R_mncd` for a four-dimensional covariant tensor.
pub fn euler_density(riemann_down: &[f64]) -> f64 {
    assert_eq!(riemann_down.len(), 256, "euler density needs a 4D tensor");
    let perms: Vec<(Vec<usize>, f64)> = (0..4)
        .permutations(4)
        .map(|p| {
            let s = permutation_sign(&p);
            (p, s)
        })
        .collect();
    let r = |a, b, c, d| riemann_down[idx4(4, a, b, c, d)];
    let mut total = 0.0;
    for (p, sp) in &perms {
        for (q, sq) in &perms {
            total += sp * sq * r(p[0], p[1], q[0], q[1]) * r(p[2], p[3], q[2], q[3]);
        }
    }
    total
}

/// `K (g_ac g_bd - g_ad g_bc)`, the curvature tensor of a sphere with sectional curvature `K`.
pub fn sphere_riemann(g: &RMatrix, sectional: f64) -> Vec<f64> {
    let n = g.nrows();
    let mut out = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[idx4(n, a, b, c, d)] =
                        sectional * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)]);
                }
            }
        }
    }
    out
}

/// Sectional curvature `2^(3-N)` of the hypersphere carrying the quantum metric.
pub fn hypersphere_curvature(n_half_dim: usize) -> f64 {
    2f64.powi(3 - n_half_dim as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

impl EulerCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let scale = rhs.abs().max(f64::MIN_POSITIVE);
        Self {
            lhs,
            rhs,
            rel_err: (lhs - rhs).abs() / scale,
        }
    }
}

pub fn euler_density_check(
    field: &dyn MetricField,
    k: &[f64],
    opts: FdOptions,
) -> Result<EulerCheck> {
    if field.dim() != 4 {
        return Err(Error::Unsupported(
            "the Euler density identity is four-dimensional".into(),
        ));
    }
    let b = curvature_bundle(field, k, opts)?;
    Ok(EulerCheck::new(
        b.euler_density_lhs.unwrap_or_default(),
        b.euler_density_rhs.unwrap_or_default(),
    ))
}

/// Euler density check on a supplied covariant tensor instead of a finite-difference one.
pub fn euler_check_from_tensor(riemann_down: &[f64], g: &RMatrix) -> EulerCheck {
    EulerCheck::new(euler_density(riemann_down), 384.0 * g.determinant())
}

/// Deviations of a curvature bundle from the constant-curvature sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypersphereCheck {
    /// `max |R_abcd - K(g g - g g)| / max |K(g g - g g)|`.
    pub riemann_rel_err: f64,
    /// `max |R_ab - (D-1) K g_ab| / max |(D-1) K g_ab|`.
    pub ricci_rel_err: f64,
    pub scalar: f64,
    pub scalar_expected: f64,
    /// `max |R_ab - R g_ab / 2 + Lambda g_ab|` with `Lambda = (D-1)(D-2)K/2`.
    pub einstein_residual: f64,
    /// `lhs / rhs` of the Euler density identity (four dimensions only).
    pub euler_ratio: Option<f64>,
}

pub fn hypersphere_check(bundle: &CurvatureBundle, sectional: f64) -> HypersphereCheck {
    let n = bundle.dim;
    let g = &bundle.metric;
    let expected = sphere_riemann(g, sectional);
    let scale = expected.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let riemann_rel_err = bundle
        .riemann_down
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    let dm1 = (n - 1) as f64;
    let ricci_expected = g * (dm1 * sectional);
    let ricci_rel_err = (&bundle.ricci - &ricci_expected).amax() / ricci_expected.amax();
    let lambda = dm1 * (n as f64 - 2.0) * sectional / 2.0;
    let einstein = &bundle.ricci - g * (0.5 * bundle.scalar) + g * lambda;
    let euler_ratio = match (bundle.euler_density_lhs, bundle.euler_density_rhs) {
        (Some(l), Some(r)) => Some(l / r),
        _ => None,
    };
    HypersphereCheck {
        riemann_rel_err,
        ricci_rel_err,
        scalar: bundle.scalar,
        scalar_expected: n as f64 * dm1 * sectional,
        einstein_residual: einstein.amax(),
        euler_ratio,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerIntegral {
    /// `int eps eps R R / sqrt(det g) d^4k`.
    pub integral: f64,
    /// `int sqrt(det g) d^4k` over the same points.
    pub s_bz: f64,
    /// `integral / s_bz`; 384 on the sphere.
    pub ratio: f64,
    /// Points dropped because the metric was singular there.
    pub skipped: usize,
}

/// Brillouin-zone integral of the Euler density next to the metric area.
pub fn euler_integral(
    field: &dyn MetricField,
    grid: &BrillouinGrid,
    opts: FdOptions,
) -> Result<EulerIntegral> {
    if field.dim() != 4 || grid.k_dim() != 4 {
        return Err(Error::Unsupported(
            "the Euler density integral is four-dimensional".into(),
        ));
    }
    let per_point: Vec<Result<Option<(f64, f64)>>> = (0..grid.num_points())
        .into_par_iter()
        .map(|i| {
            let k = grid.point(i);
            match curvature_bundle(field, &k, opts) {
                Ok(b) => {
                    let det = b.metric.determinant();
                    let sqrt = det.max(0.0).sqrt();
                    Ok(Some((b.euler_density_lhs.unwrap_or_default() / sqrt, sqrt)))
                }
                Err(Error::SingularMetric { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let (mut integral, mut area, mut skipped) = (0.0, 0.0, 0);
    for r in per_point {
        match r? {
            Some((e, s)) => {
                integral += e;
                area += s;
            }
            None => skipped += 1,
        }
    }
    let vol = grid.cell_volume();
    Ok(EulerIntegral {
        integral: integral * vol,
        s_bz: area * vol,
        ratio: integral / area,
        skipped,
    })
}
