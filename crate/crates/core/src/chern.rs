//! Brillouin-zone integration and Chern numbers.
//!
//! The metric-area method sums `sgn(form) * sqrt(det g)` over a midpoint grid
//! and divides by the area of the hypersphere of radius `2^((N-3)/2)`. Two
//! lattice gauge-theory oracles are independent of the metric entirely: the
//! Fukui-Hatsugai-Suzuki plaquette phases for `N = 1`, and a clover-averaged
//! non-Abelian field strength built from doublet link overlaps for `N = 2`.
//!
//! Orientation convention: the curvature is `F_ab = i P [d_a P, d_b P] P`
//! (equivalently `F = i (Q_ab - Q_ba)`), and the oracles are oriented so that
//! `C_1 = (1/2pi) int F_12` and `C_2 = (1/32pi^2) int eps_abcd tr(F_ab F_cd)`.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::GammaSet;
use crate::linalg::{c, hermitian_eigh, unitary_part, CMatrix, C64};
use crate::model::{eval_hamiltonian, DerivativeScheme, DiracModel, FourierModel};
use crate::qgt::{chern_density, epsilon_trace, metric_closed_form, ChernDensity};

/// Uniform periodic grid over `[-pi, pi)^(2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BrillouinGrid {
    pub n_half_dim: usize,
    pub points_per_axis: usize,
    /// Shift every point by half a cell (midpoint rule).
    pub offset: bool,
}

impl BrillouinGrid {
    /// Midpoint grid with `points_per_axis` cells along every axis.
    pub fn new(n_half_dim: usize, points_per_axis: usize) -> Self {
        Self {
            n_half_dim,
            points_per_axis,
            offset: true,
        }
    }

    pub fn k_dim(&self) -> usize {
        2 * self.n_half_dim
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.k_dim() as i32)
    }

    pub fn num_points(&self) -> usize {
        self.points_per_axis.pow(self.k_dim() as u32)
    }

    /// Integer coordinates of a flat index; axis 0 varies slowest.
    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let l = self.points_per_axis;
        let mut out = vec![0; self.k_dim()];
        for slot in out.iter_mut().rev() {
            *slot = index % l;
            index /= l;
        }
        out
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &x| {
            acc * self.points_per_axis + x % self.points_per_axis
        })
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let shift = if self.offset { 0.5 } else { 0.0 };
        let h = self.spacing();
        self.coords(index)
            .into_iter()
            .map(|j| -std::f64::consts::PI + (j as f64 + shift) * h)
            .collect()
    }

    /// Periodic neighbour `steps` cells along `axis`.
    pub fn neighbor(&self, index: usize, axis: usize, steps: isize) -> usize {
        let l = self.points_per_axis;
        let stride = l.pow((self.k_dim() - 1 - axis) as u32);
        let current = (index / stride) % l;
        let moved = (current as isize + steps).rem_euclid(l as isize) as usize;
        index - current * stride + moved * stride
    }
}

/// Area of the `2N`-sphere of radius `2^((N-3)/2)`: `pi^N N! 2^(N^2-N+1) / (2N)!`.
pub fn hypersphere_area(n_half_dim: usize) -> f64 {
    assert!(n_half_dim >= 1, "hypersphere_area needs N >= 1");
    let n = n_half_dim as u32;
    let mut num: u128 = (1..=n as u128).product::<u128>() * (1u128 << (n * n - n + 1));
    let mut den: u128 = (1..=2 * n as u128).product();
    let g = gcd(num, den);
    num /= g;
    den /= g;
    num as f64 * std::f64::consts::PI.powi(n as i32) / den as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernMethod {
    /// Metric area times a grid-constant curvature sign.
    MetricAreaSgn,
    /// `(S_BZ+ - S_BZ-) / S^2N` with a sign that varies over the grid.
    MetricAreaSplit,
    Fhs2d,
    Plaquette4d,
}

impl fmt::Display for ChernMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChernMethod::MetricAreaSgn => "metric_area_sgn",
            ChernMethod::MetricAreaSplit => "metric_area_split",
            ChernMethod::Fhs2d => "fhs_2d",
            ChernMethod::Plaquette4d => "plaquette_4d",
        };
        f.write_str(s)
    }
}

/// Whether the curvature-form sign is constant over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRegime {
    Constant(i8),
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernResult {
    pub value: f64,
    pub nearest_integer: i64,
    pub residual: f64,
    pub method: ChernMethod,
    pub grid: BrillouinGrid,
    pub s_bz_plus: Option<f64>,
    pub s_bz_minus: Option<f64>,
    pub sign_regime: Option<SignRegime>,
    pub wall_time_ms: f64,
}

impl ChernResult {
    fn new(value: f64, method: ChernMethod, grid: BrillouinGrid, started: Instant) -> Self {
        let nearest = value.round();
        Self {
            value,
            nearest_integer: nearest as i64,
            residual: (value - nearest).abs(),
            method,
            grid,
            s_bz_plus: None,
            s_bz_minus: None,
            sign_regime: None,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub fn s_bz(&self) -> Option<f64> {
        Some(self.s_bz_plus? + self.s_bz_minus?)
    }
}

fn check_grid(model: &dyn DiracModel, grid: &BrillouinGrid) -> Result<()> {
    if grid.n_half_dim != model.n_half_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.n_half_dim(),
            found: grid.n_half_dim,
        });
    }
    if grid.points_per_axis < 2 {
        return Err(Error::Unsupported(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    Ok(())
}

/// Evaluate `f` at every grid point in parallel, preserving grid order.
/// Gap closures are gathered into a single [`Error::GapClosureOnGrid`].
pub fn evaluate_grid<T, F>(grid: &BrillouinGrid, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..grid.num_points())
        .into_par_iter()
        .map(|i| f(i, &grid.point(i)))
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut gapless = Vec::new();
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(Error::GapClosure { k, .. }) => gapless.push(k),
            Err(e) => return Err(e),
        }
    }
    if !gapless.is_empty() {
        return Err(Error::GapClosureOnGrid { points: gapless });
    }
    Ok(values)
}

/// `S_BZ = int sqrt(det g) d^2N k` by the midpoint rule.
pub fn bz_area(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
    scheme: DerivativeScheme,
) -> Result<f64> {
    check_grid(model, grid)?;
    let _ = gammas;
    let dens = evaluate_grid(grid, |_, k| {
        metric_closed_form(model, k, scheme).map(|g| crate::linalg::sqrt_det_psd(&g))
    })?;
    Ok(dens.iter().sum::<f64>() * grid.cell_volume())
}

/// `C_N = (1/S^2N) sum sgn(form) sqrt(det g) dV`.
pub fn chern_metric_method(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
    scheme: DerivativeScheme,
) -> Result<ChernResult> {
    chern_metric_method_with(model, grid, |k| chern_density(model, gammas, k, scheme))
}

/// Metric-area Chern number from an arbitrary per-point density, e.g. one
/// whose metric was reconstructed from simulated rates.
pub fn chern_metric_method_with<F>(
    model: &dyn DiracModel,
    grid: &BrillouinGrid,
    density: F,
) -> Result<ChernResult>
where
    F: Fn(&[f64]) -> Result<ChernDensity> + Sync,
{
    check_grid(model, grid)?;
    let started = Instant::now();
    let dens = evaluate_grid(grid, |_, k| density(k))?;
    let (mut plus, mut minus) = (0.0, 0.0);
    let (mut seen_plus, mut seen_minus) = (false, false);
    for d in &dens {
        match d.sign {
            1 => {
                plus += d.sqrt_det_g;
                seen_plus = true;
            }
            -1 => {
                minus += d.sqrt_det_g;
                seen_minus = true;
            }
            _ => {}
        }
    }
    let vol = grid.cell_volume();
    let (s_plus, s_minus) = (plus * vol, minus * vol);
    let sphere = hypersphere_area(model.n_half_dim());
    let (value, method, regime) = match (seen_plus, seen_minus) {
        (true, true) => (
            (s_plus - s_minus) / sphere,
            ChernMethod::MetricAreaSplit,
            SignRegime::Mixed,
        ),
        (true, false) => (
            (s_plus + s_minus) / sphere,
            ChernMethod::MetricAreaSgn,
            SignRegime::Constant(1),
        ),
        (false, true) => (
            -(s_plus + s_minus) / sphere,
            ChernMethod::MetricAreaSgn,
            SignRegime::Constant(-1),
        ),
        (false, false) => (0.0, ChernMethod::MetricAreaSgn, SignRegime::Constant(0)),
    };
    let mut result = ChernResult::new(value, method, *grid, started);
    result.s_bz_plus = Some(s_plus);
    result.s_bz_minus = Some(s_minus);
    result.sign_regime = Some(regime);
    Ok(result)
}

/// Occupied eigenvectors (columns) at every grid point.
fn occupied_frames(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
) -> Result<Vec<CMatrix>> {
    let half = gammas.dim() / 2;
    evaluate_grid(grid, |_, k| {
        crate::model::d_hat(model, k)?;
        let h = eval_hamiltonian(model, gammas, k)?;
        let (_, vecs) = hermitian_eigh(&h);
        Ok(vecs.columns(0, half).into_owned())
    })
}

/// First Chern number from lattice plaquette phases.
///
/// Each plaquette is traversed `k -> k + e2 -> k + e1 + e2 -> k + e1 -> k`.
pub fn chern_first_fhs(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
) -> Result<ChernResult> {
    if model.n_half_dim() != 1 {
        return Err(Error::Unsupported(
            "the plaquette-phase first Chern number needs N = 1".into(),
        ));
    }
    check_grid(model, grid)?;
    let started = Instant::now();
    let frames = occupied_frames(model, gammas, grid)?;
    let link = |from: usize, to: usize| -> C64 {
        let z = (frames[from].adjoint() * &frames[to])[(0, 0)];
        z / z.norm()
    };
    let phases: Vec<f64> = (0..grid.num_points())
        .into_par_iter()
        .map(|x| {
            let x1 = grid.neighbor(x, 0, 1);
            let x2 = grid.neighbor(x, 1, 1);
            let x12 = grid.neighbor(x1, 1, 1);
            let w = link(x, x2) * link(x2, x12) * link(x12, x1) * link(x1, x);
            w.arg()
        })
        .collect();
    let value = phases.iter().sum::<f64>() / (2.0 * std::f64::consts::PI);
    Ok(ChernResult::new(value, ChernMethod::Fhs2d, *grid, started))
}

/// Hermitian `X` with `exp(-i X) = w` for a 2x2 unitary near the identity.
pub(crate) fn u2_generator(w: &Matrix2<C64>) -> Matrix2<C64> {
    let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
    let phi = det.arg() / 2.0;
    let s = w * C64::from_polar(1.0, -phi);
    let a0 = 0.5 * (s[(0, 0)] + s[(1, 1)]).re;
    let a1 = 0.5 * (s[(0, 1)] + s[(1, 0)]).im;
    let a2 = 0.5 * (s[(0, 1)] - s[(1, 0)]).re;
    let a3 = 0.5 * (s[(0, 0)] - s[(1, 1)]).im;
    let norm = (a1 * a1 + a2 * a2 + a3 * a3).sqrt();
    let theta = norm.atan2(a0);
    let scale = if norm > 0.0 { theta / norm } else { 0.0 };
    let (x1, x2, x3) = (scale * a1, scale * a2, scale * a3);
    // exp(i (phi + x.sigma)) = w, so X = -(phi + x.sigma).
    -Matrix2::new(
        C64::new(phi + x3, 0.0),
        C64::new(x1, -x2),
        C64::new(x1, x2),
        C64::new(phi - x3, 0.0),
    )
}

/// Second Chern number from lattice field strengths of the occupied doublet.
///
/// The field strength at each site is the clover average of loop generators,
/// extrapolated from `1x1` and `2x2` loops.
pub fn chern_second_plaquette(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
) -> Result<ChernResult> {
    if model.n_half_dim() != 2 {
        return Err(Error::Unsupported(
            "the plaquette second Chern number needs N = 2".into(),
        ));
    }
    check_grid(model, grid)?;
    let started = Instant::now();
    let frames = occupied_frames(model, gammas, grid)?;
    let k_dim = grid.k_dim();
    // links[x * k_dim + mu] = U_mu(x) = polar(V(x)^dag V(x + mu))
    let links: Vec<Matrix2<C64>> = (0..grid.num_points() * k_dim)
        .into_par_iter()
        .map(|i| {
            let (x, mu) = (i / k_dim, i % k_dim);
            let y = grid.neighbor(x, mu, 1);
            unitary_part(&(frames[x].adjoint() * &frames[y]))
                .fixed_view::<2, 2>(0, 0)
                .into_owned()
        })
        .collect();
    // Ordered product of links along a rectangle: `size` steps along each of
    // the four sides `a, b, -a, -b`.
    let leaf = |start: usize, a: (usize, isize), b: (usize, isize), size: usize| {
        let mut at = start;
        let mut prod = Matrix2::<C64>::identity();
        for (axis, dir) in [a, b, (a.0, -a.1), (b.0, -b.1)] {
            for _ in 0..size {
                let next = grid.neighbor(at, axis, dir);
                if dir > 0 {
                    prod *= links[at * k_dim + axis];
                } else {
                    prod *= links[next * k_dim + axis].adjoint();
                }
                at = next;
            }
        }
        prod
    };
    // Mean generator of the four counter-clockwise `size x size` loops based at x.
    let clover = |x: usize, mu: usize, nu: usize, size: usize| -> Matrix2<C64> {
        [
            ((mu, 1), (nu, 1)),
            ((nu, 1), (mu, -1)),
            ((mu, -1), (nu, -1)),
            ((nu, -1), (mu, 1)),
        ]
        .iter()
        .map(|&(a, b)| u2_generator(&leaf(x, a, b, size)))
        .sum::<Matrix2<C64>>()
            * c(0.25)
    };
    let densities: Vec<f64> = (0..grid.num_points())
        .into_par_iter()
        .map(|x| {
            let mut f = vec![CMatrix::zeros(2, 2); k_dim * k_dim];
            for mu in 0..k_dim {
                for nu in (mu + 1)..k_dim {
                    let small = clover(x, mu, nu, 1);
                    let large = clover(x, mu, nu, 2);
                    // The 2x2 clover encloses four times the flux; the
                    // combination cancels the leading O(spacing^2) error.
                    let clover = (small * c(4.0) - large * c(0.25)) * c(1.0 / 3.0);
                    let clover = CMatrix::from_fn(2, 2, |i, j| clover[(i, j)]);
                    f[nu * k_dim + mu] = -&clover;
                    f[mu * k_dim + nu] = clover;
                }
            }
            epsilon_trace(&f, k_dim)
        })
        .collect();
    let value = densities.iter().sum::<f64>() / (32.0 * std::f64::consts::PI.powi(2));
    Ok(ChernResult::new(
        value,
        ChernMethod::Plaquette4d,
        *grid,
        started,
    ))
}

/// Requested Chern-number algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernAlgorithm {
    MetricArea,
    /// The lattice oracle matching the model's dimension.
    LatticeOracle,
}

impl fmt::Display for ChernAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChernAlgorithm::MetricArea => "metric_area",
            ChernAlgorithm::LatticeOracle => "lattice_oracle",
        })
    }
}

pub fn compute_chern(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
    algorithm: ChernAlgorithm,
    scheme: DerivativeScheme,
) -> Result<ChernResult> {
    match algorithm {
        ChernAlgorithm::MetricArea => chern_metric_method(model, gammas, grid, scheme),
        ChernAlgorithm::LatticeOracle => match model.n_half_dim() {
            1 => chern_first_fhs(model, gammas, grid),
            2 => chern_second_plaquette(model, gammas, grid),
            n => Err(Error::Unsupported(format!("no lattice oracle for N = {n}"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: f64,
    pub algorithm: ChernAlgorithm,
    pub outcome: std::result::Result<ChernResult, Error>,
}

/// Chern numbers of a one-parameter model family for every mass and algorithm.
/// Failures (typically gap closures on the grid) are kept in their rows.
pub fn mass_sweep(
    family: &dyn Fn(f64) -> FourierModel,
    m_values: &[f64],
    grid: &BrillouinGrid,
    algorithms: &[ChernAlgorithm],
    scheme: DerivativeScheme,
) -> Result<Vec<SweepRow>> {
    let gammas = crate::gamma::build_gammas(grid.n_half_dim)?;
    let mut rows = Vec::with_capacity(m_values.len() * algorithms.len());
    for &m in m_values {
        let model = family(m);
        for &algorithm in algorithms {
            rows.push(SweepRow {
                m,
                algorithm,
                outcome: compute_chern(&model, &gammas, grid, algorithm, scheme),
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CsvRow {
    m: f64,
    method: String,
    value: Option<f64>,
    nearest_integer: Option<i64>,
    residual: Option<f64>,
    s_bz_plus: Option<f64>,
    s_bz_minus: Option<f64>,
    grid_l: usize,
    wall_time_ms: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "m",
    "method",
    "value",
    "nearest_integer",
    "residual",
    "s_bz_plus",
    "s_bz_minus",
    "grid_L",
    "wall_time_ms",
];

/// Writes sweep rows as CSV. Failed rows keep `m`, the algorithm name and
/// `grid_L` and leave the numeric columns empty.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow], grid_l: usize) -> Result<()> {
    let io = |e: csv::Error| Error::Unsupported(format!("csv output failed: {e}"));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for row in rows {
        let rec = match &row.outcome {
            Ok(r) => CsvRow {
                m: row.m,
                method: r.method.to_string(),
                value: Some(r.value),
                nearest_integer: Some(r.nearest_integer),
                residual: Some(r.residual),
                s_bz_plus: r.s_bz_plus,
                s_bz_minus: r.s_bz_minus,
                grid_l,
                wall_time_ms: Some(r.wall_time_ms),
            },
            Err(_) => CsvRow {
                m: row.m,
                method: row.algorithm.to_string(),
                value: None,
                nearest_integer: None,
                residual: None,
                s_bz_plus: None,
                s_bz_minus: None,
                grid_l,
                wall_time_ms: None,
            },
        };
        w.serialize(rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Unsupported(format!("csv output failed: {e}")))?;
    Ok(())
}
