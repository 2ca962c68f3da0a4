//! Dirac Hamiltonians `H(k) = d0(k) + sum_i d_i(k) Gamma_i`, their spectra and
//! occupied-band projectors.
//!
//! Models are plain data: a [`FourierModel`] stores every component of the
//! d-vector as a finite sum of products of `sin`/`cos` of single momentum
//! components, which keeps them periodic and gives exact Jacobians. The
//! built-in lattice models are just named Fourier tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaSet;
use crate::linalg::{c, CMatrix, RMatrix};

/// Absolute threshold on `d = |d_vec|` below which geometry is refused.
pub const GAP_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// How momentum derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeScheme {
    /// Chain rule through the model's analytic Jacobian.
    #[default]
    Analytic,
    /// Central differences of the unit vector `d_hat` (and of `H`).
    CentralFdHat { step: f64 },
    /// Central differences of the occupied projector `P` directly.
    CentralFdProjector { step: f64 },
}

impl DerivativeScheme {
    /// Analytic when the model supplies a Jacobian, central differences otherwise.
    pub fn preferred(model: &dyn DiracModel) -> Self {
        if model.has_jacobian() {
            DerivativeScheme::Analytic
        } else {
            DerivativeScheme::CentralFdHat {
                step: DEFAULT_FD_STEP,
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DerivativeScheme::Analytic => "analytic".into(),
            DerivativeScheme::CentralFdHat { step } => format!("central_fd_hat(h={step:e})"),
            DerivativeScheme::CentralFdProjector { step } => {
                format!("central_fd_projector(h={step:e})")
            }
        }
    }
}

/// A map `k -> (d0, d1, ..., d_{2N+1})` over a `2N`-dimensional parameter space.
pub trait DiracModel: Send + Sync {
    fn n_half_dim(&self) -> usize;

    /// `[d0, d1, ..., d_{2N+1}]`, length `2N + 2`.
    fn d_vector(&self, k: &[f64]) -> Vec<f64>;

    /// `jac[(a, i)] = d(d_i)/d(k_a)` with column 0 holding `d0`; shape `2N x (2N + 2)`.
    fn jacobian(&self, _k: &[f64]) -> Option<RMatrix> {
        None
    }

    fn has_jacobian(&self) -> bool {
        false
    }

    fn k_dim(&self) -> usize {
        2 * self.n_half_dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

fn one() -> i32 {
    1
}

/// `trig(harmonic * k[axis])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub axis: usize,
    pub trig: Trig,
    #[serde(default = "one")]
    pub harmonic: i32,
}

impl Factor {
    fn value(&self, k: &[f64]) -> f64 {
        let x = self.harmonic as f64 * k[self.axis];
        match self.trig {
            Trig::Sin => x.sin(),
            Trig::Cos => x.cos(),
        }
    }

    fn derivative(&self, k: &[f64]) -> f64 {
        let n = self.harmonic as f64;
        let x = n * k[self.axis];
        match self.trig {
            Trig::Sin => n * x.cos(),
            Trig::Cos => -n * x.sin(),
        }
    }
}

/// `coeff * prod(factors)`; an empty factor list is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub coeff: f64,
    #[serde(default)]
    pub factors: Vec<Factor>,
}

impl FourierTerm {
    pub fn constant(coeff: f64) -> Self {
        Self {
            coeff,
            factors: Vec::new(),
        }
    }

    pub fn single(coeff: f64, axis: usize, trig: Trig) -> Self {
        Self {
            coeff,
            factors: vec![Factor {
                axis,
                trig,
                harmonic: 1,
            }],
        }
    }

    fn value(&self, k: &[f64]) -> f64 {
        self.factors
            .iter()
            .fold(self.coeff, |acc, f| acc * f.value(k))
    }

    fn partial(&self, k: &[f64], axis: usize) -> f64 {
        let mut total = 0.0;
        for (j, fj) in self.factors.iter().enumerate() {
            if fj.axis != axis {
                continue;
            }
            let mut prod = self.coeff * fj.derivative(k);
            for (l, fl) in self.factors.iter().enumerate() {
                if l != j {
                    prod *= fl.value(k);
                }
            }
            total += prod;
        }
        total
    }
}

/// Dirac model whose d-vector components are finite Fourier sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierModel {
    pub n_half_dim: usize,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Energy offset `d0`.
    #[serde(default)]
    pub d0: Vec<FourierTerm>,
    /// `d_1 .. d_{2N+1}`.
    pub d: Vec<Vec<FourierTerm>>,
}

impl FourierModel {
    pub fn new(n_half_dim: usize, d: Vec<Vec<FourierTerm>>) -> Result<Self> {
        let model = Self {
            n_half_dim,
            name: "custom".into(),
            params: BTreeMap::new(),
            d0: Vec::new(),
            d,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_half_dim == 0 || self.n_half_dim > crate::gamma::MAX_HALF_DIM {
            return Err(Error::InvalidDimension {
                n: self.n_half_dim,
                max: crate::gamma::MAX_HALF_DIM,
            });
        }
        let expected = 2 * self.n_half_dim + 1;
        if self.d.len() != expected {
            return Err(Error::InvalidModel(format!(
                "expected {expected} d-vector components, found {}",
                self.d.len()
            )));
        }
        let k_dim = 2 * self.n_half_dim;
        for term in self.d0.iter().chain(self.d.iter().flatten()) {
            if !term.coeff.is_finite() {
                return Err(Error::InvalidModel("non-finite coefficient".into()));
            }
            if let Some(f) = term.factors.iter().find(|f| f.axis >= k_dim) {
                return Err(Error::InvalidModel(format!(
                    "factor axis {} out of range for {k_dim} momentum components",
                    f.axis
                )));
            }
        }
        Ok(())
    }

    pub fn with_offset(mut self, d0: Vec<FourierTerm>) -> Self {
        self.d0 = d0;
        self
    }

    pub fn named(mut self, name: &str, params: &[(&str, f64)]) -> Self {
        self.name = name.into();
        self.params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }
}

impl DiracModel for FourierModel {
    fn n_half_dim(&self) -> usize {
        self.n_half_dim
    }

    fn d_vector(&self, k: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d.len() + 1);
        out.push(self.d0.iter().map(|t| t.value(k)).sum());
        out.extend(
            self.d
                .iter()
                .map(|comp| comp.iter().map(|t| t.value(k)).sum::<f64>()),
        );
        out
    }

    fn jacobian(&self, k: &[f64]) -> Option<RMatrix> {
        let k_dim = 2 * self.n_half_dim;
        let cols = self.d.len() + 1;
        Some(RMatrix::from_fn(k_dim, cols, |a, i| {
            let terms = if i == 0 { &self.d0 } else { &self.d[i - 1] };
            terms.iter().map(|t| t.partial(k, a)).sum()
        }))
    }

    fn has_jacobian(&self) -> bool {
        true
    }
}

/// Lattice Chern insulator in 2D: `d = (sin k1, sin k2, m + cos k1 + cos k2)`.
pub fn qwz_2d(m: f64) -> FourierModel {
    lattice_dirac(1, m).named("qwz2d", &[("m", m)])
}

/// Lattice Dirac model in 4D: `d = (sin k1..sin k4, m + sum cos k_a)`.
pub fn qhz_4d(m: f64) -> FourierModel {
    lattice_dirac(2, m).named("qhz4d", &[("m", m)])
}

/// `d_a = sin k_a` for `a < 2N`, `d_{2N+1} = m + sum_a cos k_a`.
pub fn lattice_dirac(n_half_dim: usize, m: f64) -> FourierModel {
    let k_dim = 2 * n_half_dim;
    let mut d: Vec<Vec<FourierTerm>> = (0..k_dim)
        .map(|a| vec![FourierTerm::single(1.0, a, Trig::Sin)])
        .collect();
    let mut mass = vec![FourierTerm::constant(m)];
    mass.extend((0..k_dim).map(|a| FourierTerm::single(1.0, a, Trig::Cos)));
    d.push(mass);
    FourierModel {
        n_half_dim,
        name: format!("lattice_dirac_{k_dim}d"),
        params: [("m".to_string(), m)].into_iter().collect(),
        d0: Vec::new(),
        d,
    }
}

pub const BUILTIN_MODELS: &[&str] = &["qwz2d", "qhz4d"];

pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<FourierModel> {
    if let Some(unknown) = params.keys().find(|k| k.as_str() != "m") {
        return Err(Error::InvalidModel(format!(
            "unknown parameter `{unknown}` for model `{name}`"
        )));
    }
    let m = params.get("m").copied().unwrap_or(1.0);
    match name {
        "qwz2d" => Ok(qwz_2d(m)),
        "qhz4d" => Ok(qhz_4d(m)),
        other => Err(Error::InvalidModel(format!(
            "unknown model `{other}` (known: {})",
            BUILTIN_MODELS.join(", ")
        ))),
    }
}

/// Serializable model description: a named built-in or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Fourier(FourierModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<FourierModel> {
        match self {
            ModelSpec::Builtin { name, params } => builtin(name, params),
            ModelSpec::Fourier(model) => {
                model.validate()?;
                Ok(model.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumAtK {
    pub e_minus: f64,
    pub e_plus: f64,
    /// Half the gap, `d = |d_vec|`.
    pub d: f64,
    /// Multiplicity of each level, `2^(N-1)`.
    pub degeneracy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupiedProjector {
    pub matrix: CMatrix,
}

impl OccupiedProjector {
    pub fn rank(&self) -> f64 {
        crate::linalg::trace(&self.matrix).re
    }

    pub fn complement(&self) -> CMatrix {
        let n = self.matrix.nrows();
        CMatrix::identity(n, n) - &self.matrix
    }
}

fn check_k(model: &dyn DiracModel, k: &[f64]) -> Result<()> {
    if k.len() != model.k_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.k_dim(),
            found: k.len(),
        });
    }
    Ok(())
}

fn check_gammas(model: &dyn DiracModel, gammas: &GammaSet) -> Result<()> {
    if gammas.n_half_dim() != model.n_half_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.n_half_dim(),
            found: gammas.n_half_dim(),
        });
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn eval_hamiltonian(model: &dyn DiracModel, gammas: &GammaSet, k: &[f64]) -> Result<CMatrix> {
    check_gammas(model, gammas)?;
    check_k(model, k)?;
    let dv = model.d_vector(k);
    let n = gammas.dim();
    Ok(CMatrix::identity(n, n) * c(dv[0]) + gammas.combine(&dv[1..]))
}

pub fn spectrum(model: &dyn DiracModel, gammas: &GammaSet, k: &[f64]) -> Result<SpectrumAtK> {
    spectrum_with_tolerance(model, gammas, k, GAP_TOLERANCE)
}

pub fn spectrum_with_tolerance(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    gap_tolerance: f64,
) -> Result<SpectrumAtK> {
    check_gammas(model, gammas)?;
    check_k(model, k)?;
    let dv = model.d_vector(k);
    let d = norm(&dv[1..]);
    if d < gap_tolerance {
        return Err(Error::GapClosure { k: k.to_vec(), d });
    }
    Ok(SpectrumAtK {
        e_minus: dv[0] - d,
        e_plus: dv[0] + d,
        d,
        degeneracy: 1 << (model.n_half_dim() - 1),
    })
}

/// Unit vector `d_hat` (length `2N + 1`) and `d`.
pub fn d_hat(model: &dyn DiracModel, k: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_k(model, k)?;
    let dv = model.d_vector(k);
    let d = norm(&dv[1..]);
    if d < GAP_TOLERANCE {
        return Err(Error::GapClosure { k: k.to_vec(), d });
    }
    Ok((dv[1..].iter().map(|x| x / d).collect(), d))
}

/// `P = (1 - sum_i d_hat_i Gamma_i) / 2`, the projector onto the lower level.
pub fn occupied_projector(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
) -> Result<OccupiedProjector> {
    check_gammas(model, gammas)?;
    let (hat, _) = d_hat(model, k)?;
    Ok(OccupiedProjector {
        matrix: projector_from_hat(gammas, &hat),
    })
}

pub(crate) fn projector_from_hat(gammas: &GammaSet, hat: &[f64]) -> CMatrix {
    let n = gammas.dim();
    (CMatrix::identity(n, n) - gammas.combine(hat)) * c(0.5)
}

fn shifted(k: &[f64], axis: usize, h: f64) -> Vec<f64> {
    let mut out = k.to_vec();
    out[axis] += h;
    out
}

/// `jac[(a, i)] = d(d_i)/d(k_a)` including the `d0` column, by the requested scheme.
pub fn d_vector_jacobian(
    model: &dyn DiracModel,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<RMatrix> {
    check_k(model, k)?;
    match scheme {
        DerivativeScheme::Analytic => model.jacobian(k).ok_or(Error::MissingJacobian),
        DerivativeScheme::CentralFdHat { step } | DerivativeScheme::CentralFdProjector { step } => {
            let k_dim = model.k_dim();
            let mut jac = RMatrix::zeros(k_dim, k_dim + 2);
            for a in 0..k_dim {
                let plus = model.d_vector(&shifted(k, a, step));
                let minus = model.d_vector(&shifted(k, a, -step));
                for i in 0..k_dim + 2 {
                    jac[(a, i)] = (plus[i] - minus[i]) / (2.0 * step);
                }
            }
            Ok(jac)
        }
    }
}

/// `out[(a, i)] = d(d_hat_i)/d(k_a)`, shape `2N x (2N + 1)`.
///
/// The projector scheme has no separate meaning here and differentiates
/// `d_hat` with its step.
pub fn d_hat_jacobian(
    model: &dyn DiracModel,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<RMatrix> {
    let (hat, d) = d_hat(model, k)?;
    let k_dim = model.k_dim();
    let n_comp = hat.len();
    match scheme {
        DerivativeScheme::Analytic => {
            let jac = model.jacobian(k).ok_or(Error::MissingJacobian)?;
            let mut out = RMatrix::zeros(k_dim, n_comp);
            for a in 0..k_dim {
                let dd: f64 = (0..n_comp).map(|i| hat[i] * jac[(a, i + 1)]).sum();
                for i in 0..n_comp {
                    out[(a, i)] = (jac[(a, i + 1)] - hat[i] * dd) / d;
                }
            }
            Ok(out)
        }
        DerivativeScheme::CentralFdHat { step } | DerivativeScheme::CentralFdProjector { step } => {
            let mut out = RMatrix::zeros(k_dim, n_comp);
            for a in 0..k_dim {
                let (plus, _) = d_hat(model, &shifted(k, a, step))?;
                let (minus, _) = d_hat(model, &shifted(k, a, -step))?;
                for i in 0..n_comp {
                    out[(a, i)] = (plus[i] - minus[i]) / (2.0 * step);
                }
            }
            Ok(out)
        }
    }
}

/// `dH/dk_a` for every momentum direction.
pub fn hamiltonian_derivatives(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<Vec<CMatrix>> {
    check_gammas(model, gammas)?;
    let jac = d_vector_jacobian(model, k, scheme)?;
    let n = gammas.dim();
    let id = CMatrix::identity(n, n);
    Ok((0..model.k_dim())
        .map(|a| {
            let row: Vec<f64> = jac.row(a).iter().copied().collect();
            &id * c(row[0]) + gammas.combine(&row[1..])
        })
        .collect())
}

/// `dP/dk_a` for every momentum direction.
pub fn projector_derivatives(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    scheme: DerivativeScheme,
) -> Result<Vec<CMatrix>> {
    check_gammas(model, gammas)?;
    match scheme {
        DerivativeScheme::CentralFdProjector { step } => (0..model.k_dim())
            .map(|a| {
                let plus = occupied_projector(model, gammas, &shifted(k, a, step))?;
                let minus = occupied_projector(model, gammas, &shifted(k, a, -step))?;
                Ok((plus.matrix - minus.matrix) * c(0.5 / step))
            })
            .collect(),
        _ => {
            let jac = d_hat_jacobian(model, k, scheme)?;
            Ok((0..model.k_dim())
                .map(|a| {
                    let row: Vec<f64> = jac.row(a).iter().copied().collect();
                    gammas.combine(&row) * c(-0.5)
                })
                .collect())
        }
    }
}
