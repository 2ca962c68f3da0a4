//! Metric extraction from simulated periodic-modulation spectroscopy.
//!
//! Shaking `k_a(t) = k_a + (2 eps / w) cos(w t)` couples the two levels
//! through `dH/dk_a`. The golden-rule rate is evaluated with the amplitude
//! factor `(eps / w)^2` fixed at the resonance `w0 = E+ - E-`, and the delta
//! function is regularized by a Lorentzian of half-width `eta`. Units: hbar = 1.

use rayon::prelude::*;
use serde::Serialize;

use crate::chern::{chern_metric_method_with, BrillouinGrid, ChernResult};
use crate::error::{Error, Result};
use crate::gamma::GammaSet;
use crate::linalg::{c, max_abs_real, sqrt_det_psd, trace_product, CMatrix, RMatrix, C64};
use crate::model::{
    d_hat, eval_hamiltonian, hamiltonian_derivatives, occupied_projector, DerivativeScheme,
    DiracModel,
};
use crate::qgt::{chern_density, metric_closed_form, qgt_spectral, ChernDensity};

/// Largest Lorentzian weight allowed outside a truncated window.
pub const MAX_TAIL_FRACTION: f64 = 0.005;
/// Minimum distance, in linewidths, between the resonance and either window edge.
pub const MIN_WINDOW_MARGIN: f64 = 10.0;
/// Largest frequency spacing, in linewidths.
pub const MAX_SPACING_PER_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaWindow {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl OmegaWindow {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.samples.max(2) - 1) as f64
    }

    pub fn omegas(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.samples).map(|j| self.lo + j as f64 * h).collect()
    }
}

/// What to do with the Lorentzian weight outside the sampled window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailHandling {
    /// Ignore it; refuse windows losing more than [`MAX_TAIL_FRACTION`].
    Truncate,
    /// Add the closed-form Lorentzian tail mass back.
    AnalyticCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveSpec {
    pub axis: usize,
    /// Second modulated axis and its relative sign (+1 or -1).
    pub second_axis: Option<(usize, f64)>,
    pub epsilon: f64,
    /// Lorentzian half-width `eta`.
    pub broadening: f64,
    pub window: OmegaWindow,
    pub tail: TailHandling,
}

/// Drive parameters expressed relative to the local gap `E+ - E-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub broadening_fraction: f64,
    pub window_lo_fraction: f64,
    pub window_hi_fraction: f64,
    /// Frequency samples per linewidth.
    pub samples_per_width: f64,
    pub tail: TailHandling,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            broadening_fraction: 0.01,
            window_lo_fraction: 0.5,
            window_hi_fraction: 1.5,
            samples_per_width: 8.0,
            tail: TailHandling::AnalyticCorrection,
        }
    }
}

impl DriveSpec {
    pub fn for_gap(
        gap: f64,
        axis: usize,
        second_axis: Option<(usize, f64)>,
        epsilon: f64,
        settings: &ProbeSettings,
    ) -> Self {
        let eta = settings.broadening_fraction * gap;
        let lo = settings.window_lo_fraction * gap;
        let hi = settings.window_hi_fraction * gap;
        let samples = ((hi - lo) / eta * settings.samples_per_width).ceil() as usize + 1;
        Self {
            axis,
            second_axis,
            epsilon,
            broadening: eta,
            window: OmegaWindow { lo, hi, samples },
            tail: settings.tail,
        }
    }

    fn validate(&self, k_dim: usize, resonance: f64) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidDrive(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.broadening.is_nan() || self.broadening <= 0.0 {
            return Err(Error::InvalidDrive(format!(
                "broadening must be > 0, got {}",
                self.broadening
            )));
        }
        let axes_ok = self.axis < k_dim
            && self
                .second_axis
                .is_none_or(|(b, s)| b < k_dim && (s == 1.0 || s == -1.0));
        if !axes_ok {
            return Err(Error::InvalidDrive(
                "drive axis out of range or bad sign".into(),
            ));
        }
        if self.window.samples < 3
            || self.window.hi.is_nan()
            || self.window.lo.is_nan()
            || self.window.hi <= self.window.lo
        {
            return Err(Error::InvalidDrive("degenerate frequency window".into()));
        }
        let margin = MIN_WINDOW_MARGIN * self.broadening;
        if self.window.lo > resonance - margin || self.window.hi < resonance + margin {
            return Err(Error::WindowTooNarrow {
                reason: format!(
                    "[{}, {}] does not cover the resonance {resonance} with margin {margin}",
                    self.window.lo, self.window.hi
                ),
            });
        }
        let limit = MAX_SPACING_PER_WIDTH * self.broadening;
        if self.window.spacing() > limit {
            return Err(Error::UndersampledWindow {
                spacing: self.window.spacing(),
                limit,
            });
        }
        Ok(())
    }
}

pub fn lorentzian(x: f64, eta: f64) -> f64 {
    eta / std::f64::consts::PI / (x * x + eta * eta)
}

/// Lorentzian weight centred at `center` lying outside `[lo, hi]`.
pub fn lorentzian_tail_fraction(center: f64, eta: f64, lo: f64, hi: f64) -> f64 {
    1.0 - (((hi - center) / eta).atan() - ((lo - center) / eta).atan()) / std::f64::consts::PI
}

/// Perturbing operator `d_a H (+/- d_b H)`.
pub fn drive_operator(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    drive: &DriveSpec,
    scheme: DerivativeScheme,
) -> Result<CMatrix> {
    let dh = hamiltonian_derivatives(model, gammas, k, scheme)?;
    let mut v = dh[drive.axis].clone();
    if let Some((b, sign)) = drive.second_axis {
        v += &dh[b] * c(sign);
    }
    Ok(v)
}

/// `sum_{m in unocc, n in occ} |<m|V|n>|^2 = tr(P V (1 - P) V)`.
pub fn transition_strength(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    v: &CMatrix,
) -> Result<f64> {
    let p = occupied_projector(model, gammas, k)?;
    let left = &p.matrix * v * p.complement();
    Ok(trace_product(&left, v).re)
}

/// Golden-rule rate from the occupied to the empty doublet at drive frequency `omega`.
pub fn golden_rule_rate(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    drive: &DriveSpec,
    omega: f64,
) -> Result<f64> {
    let (_, d) = d_hat(model, k)?;
    let v = drive_operator(model, gammas, k, drive, DerivativeScheme::preferred(model))?;
    let w = transition_strength(model, gammas, k, &v)?;
    let resonance = 2.0 * d;
    Ok(rate_prefactor(drive.epsilon, resonance, w)
        * lorentzian(omega - resonance, drive.broadening))
}

fn rate_prefactor(epsilon: f64, resonance: f64, strength: f64) -> f64 {
    2.0 * std::f64::consts::PI * (epsilon / resonance).powi(2) * strength
}

/// Sampled rate curve, its trapezoidal integral over the window, and the
/// Lorentzian weight outside the window. No window checks are applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub omegas: Vec<f64>,
    pub rates: Vec<f64>,
    pub window_integral: f64,
    pub tail_fraction: f64,
    /// `2 pi (eps / w0)^2 sum |<m|V|n>|^2`, the integral over all frequencies.
    pub total_weight: f64,
}

pub fn sample_rate_curve(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    drive: &DriveSpec,
) -> Result<RateCurve> {
    let (_, d) = d_hat(model, k)?;
    let resonance = 2.0 * d;
    let v = drive_operator(model, gammas, k, drive, DerivativeScheme::preferred(model))?;
    let w = transition_strength(model, gammas, k, &v)?;
    let total_weight = rate_prefactor(drive.epsilon, resonance, w);
    let omegas = drive.window.omegas();
    let rates: Vec<f64> = omegas
        .iter()
        .map(|om| total_weight * lorentzian(om - resonance, drive.broadening))
        .collect();
    let h = drive.window.spacing();
    let window_integral =
        h * (rates.iter().sum::<f64>() - 0.5 * (rates[0] + rates[rates.len() - 1]));
    let tail_fraction = lorentzian_tail_fraction(
        resonance,
        drive.broadening,
        drive.window.lo,
        drive.window.hi,
    );
    Ok(RateCurve {
        omegas,
        rates,
        window_integral,
        tail_fraction,
        total_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub omegas: Vec<f64>,
    /// Sampled rate; for a differential measurement, the `+` drive.
    pub gamma_of_omega: Vec<f64>,
    /// The `-` drive of a differential measurement.
    pub gamma_minus_of_omega: Option<Vec<f64>>,
    pub gamma_int: f64,
    pub metric_estimate: f64,
    pub reference_metric: f64,
    pub rel_err: f64,
    pub tail_fraction: f64,
}

fn rel_error(estimate: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        estimate.abs()
    } else {
        (estimate - reference).abs() / reference.abs()
    }
}

fn integrate(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    drive: &DriveSpec,
) -> Result<RateCurve> {
    let (_, d) = d_hat(model, k)?;
    drive.validate(model.k_dim(), 2.0 * d)?;
    let mut curve = sample_rate_curve(model, gammas, k, drive)?;
    match drive.tail {
        TailHandling::Truncate if curve.tail_fraction > MAX_TAIL_FRACTION => {
            return Err(Error::WindowTooNarrow {
                reason: format!(
                    "{:.3}% of the line lies outside the window (limit {:.1}%)",
                    100.0 * curve.tail_fraction,
                    100.0 * MAX_TAIL_FRACTION
                ),
            })
        }
        TailHandling::Truncate => {}
        TailHandling::AnalyticCorrection => {
            curve.window_integral += curve.total_weight * curve.tail_fraction;
        }
    }
    Ok(curve)
}

/// Frequency-integrated rate and the metric component (combination) it measures,
/// `Gamma_int = 2 pi eps^2 g_aa` for a single-axis drive.
pub fn integrated_rate(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    drive: &DriveSpec,
) -> Result<RateResult> {
    let curve = integrate(model, gammas, k, drive)?;
    let g = metric_closed_form(model, k, DerivativeScheme::preferred(model))?;
    let a = drive.axis;
    let reference = match drive.second_axis {
        None => g[(a, a)],
        Some((b, s)) => g[(a, a)] + 2.0 * s * g[(a, b)] + g[(b, b)],
    };
    let estimate = curve.window_integral / (2.0 * std::f64::consts::PI * drive.epsilon.powi(2));
    Ok(RateResult {
        omegas: curve.omegas,
        gamma_of_omega: curve.rates,
        gamma_minus_of_omega: None,
        gamma_int: curve.window_integral,
        metric_estimate: estimate,
        reference_metric: reference,
        rel_err: rel_error(estimate, reference),
        tail_fraction: curve.tail_fraction,
    })
}

fn local_gap(model: &dyn DiracModel, k: &[f64]) -> Result<f64> {
    Ok(2.0 * d_hat(model, k)?.1)
}

/// `Delta Gamma_int = Gamma_+ - Gamma_- = 8 pi eps^2 g_ab` from the two
/// relative signs of a two-axis drive.
pub fn differential_integrated_rate(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    axes: (usize, usize),
    epsilon: f64,
    settings: &ProbeSettings,
) -> Result<RateResult> {
    let gap = local_gap(model, k)?;
    let (a, b) = axes;
    let plus = integrated_rate(
        model,
        gammas,
        k,
        &DriveSpec::for_gap(gap, a, Some((b, 1.0)), epsilon, settings),
    )?;
    let minus = integrated_rate(
        model,
        gammas,
        k,
        &DriveSpec::for_gap(gap, a, Some((b, -1.0)), epsilon, settings),
    )?;
    let g = metric_closed_form(model, k, DerivativeScheme::preferred(model))?;
    let delta = plus.gamma_int - minus.gamma_int;
    let estimate = delta / (8.0 * std::f64::consts::PI * epsilon * epsilon);
    let reference = g[(a, b)];
    Ok(RateResult {
        gamma_of_omega: plus.gamma_of_omega,
        gamma_minus_of_omega: Some(minus.gamma_of_omega),
        omegas: plus.omegas,
        gamma_int: delta,
        metric_estimate: estimate,
        reference_metric: reference,
        rel_err: rel_error(estimate, reference),
        tail_fraction: plus.tail_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReconstruction {
    pub k: Vec<f64>,
    pub estimate: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    /// Relative error per component; components below `1e-6 max|g|` are
    /// measured against `max|g|` instead of themselves.
    pub component_errors: Vec<Vec<f64>>,
    pub max_rel_err: f64,
    /// `max |Im Q_aa|`, which must vanish for `Gamma_int` to measure `g_aa`.
    pub max_imag_diagonal: f64,
    /// `max |sum_n F^nn_ab|`; zero for degenerate (N >= 2) doublets.
    pub traced_curvature_max: f64,
}

impl MetricReconstruction {
    pub fn estimate_matrix(&self) -> RMatrix {
        let n = self.estimate.len();
        RMatrix::from_fn(n, n, |i, j| self.estimate[i][j])
    }
}

fn rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Every metric component from single-axis (diagonal) and differential
/// two-axis (off-diagonal) integrated rates.
pub fn reconstruct_metric(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    epsilon: f64,
    settings: &ProbeSettings,
) -> Result<MetricReconstruction> {
    let gap = local_gap(model, k)?;
    let n = model.k_dim();
    let spectral = qgt_spectral(model, gammas, k, DerivativeScheme::preferred(model))?;
    let max_imag_diagonal = (0..n)
        .map(|a| spectral.qgt[(a, a)].im.abs())
        .fold(0.0, f64::max);
    if max_imag_diagonal >= 1e-12 {
        return Err(Error::Unsupported(format!(
            "Im Q_aa = {max_imag_diagonal:e} does not vanish"
        )));
    }
    let mut est = RMatrix::zeros(n, n);
    for a in 0..n {
        let r = integrated_rate(
            model,
            gammas,
            k,
            &DriveSpec::for_gap(gap, a, None, epsilon, settings),
        )?;
        est[(a, a)] = r.metric_estimate;
        for b in (a + 1)..n {
            let r = differential_integrated_rate(model, gammas, k, (a, b), epsilon, settings)?;
            est[(a, b)] = r.metric_estimate;
            est[(b, a)] = r.metric_estimate;
        }
    }
    let reference = metric_closed_form(model, k, DerivativeScheme::preferred(model))?;
    let scale = max_abs_real(&reference);
    let errors = RMatrix::from_fn(n, n, |i, j| {
        let r = reference[(i, j)];
        let denom = if r.abs() >= 1e-6 * scale {
            r.abs()
        } else {
            scale
        };
        if denom == 0.0 {
            est[(i, j)].abs()
        } else {
            (est[(i, j)] - r).abs() / denom
        }
    });
    Ok(MetricReconstruction {
        k: k.to_vec(),
        max_rel_err: max_abs_real(&errors),
        estimate: rows(&est),
        reference: rows(&reference),
        component_errors: rows(&errors),
        max_imag_diagonal,
        traced_curvature_max: max_abs_real(&spectral.curvature_trace),
    })
}

/// Metric-area Chern number with `sqrt(det g)` taken from the reconstructed
/// metric at every grid point and the orientation from the curvature form.
pub fn chern_from_spectroscopy(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    grid: &BrillouinGrid,
    epsilon: f64,
    settings: &ProbeSettings,
) -> Result<ChernResult> {
    let scheme = DerivativeScheme::preferred(model);
    chern_metric_method_with(model, grid, |k| {
        let exact = chern_density(model, gammas, k, scheme)?;
        let rec = reconstruct_metric(model, gammas, k, epsilon, settings)?;
        Ok(ChernDensity {
            sqrt_det_g: sqrt_det_psd(&rec.estimate_matrix()),
            ..exact
        })
    })
}

/// Parameters of the direct Schroedinger-equation cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeDomainSettings {
    /// Drive duration in periods of the resonance frequency.
    pub periods: f64,
    pub steps_per_period: usize,
    /// Half-width of the frequency scan in units of `2 pi / T`.
    pub scan_half_width: f64,
    /// Frequency samples per `2 pi / T`.
    pub samples_per_fringe: f64,
}

impl Default for TimeDomainSettings {
    fn default() -> Self {
        Self {
            periods: 60.0,
            steps_per_period: 64,
            scan_half_width: 30.0,
            samples_per_fringe: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeDomainCheck {
    /// `(1/T) int dw P_exc(T; w)` from explicit time evolution.
    pub time_domain_rate: f64,
    /// `2 pi eps^2 g_aa` (golden rule, delta-function limit).
    pub golden_rule_rate: f64,
    pub rel_err: f64,
}

fn schroedinger_rhs(h: &CMatrix, psi: &CMatrix) -> CMatrix {
    h * psi * C64::new(0.0, -1.0)
}

/// Excitation probability, summed over the initially occupied states, after
/// driving `k_axis` for a time `t_final` at frequency `omega`.
#[allow(clippy::too_many_arguments)]
pub fn excitation_after_drive(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    axis: usize,
    epsilon: f64,
    omega: f64,
    t_final: f64,
    steps: usize,
) -> Result<f64> {
    let p = occupied_projector(model, gammas, k)?;
    let (_, vecs) = crate::linalg::hermitian_eigh(&eval_hamiltonian(model, gammas, k)?);
    let half = gammas.dim() / 2;
    let mut psi = vecs.columns(0, half).into_owned();
    let amp = 2.0 * epsilon / omega;
    let ham = |t: f64| -> Result<CMatrix> {
        let mut kt = k.to_vec();
        kt[axis] += amp * (omega * t).cos();
        eval_hamiltonian(model, gammas, &kt)
    };
    let dt = t_final / steps as f64;
    for s in 0..steps {
        let t = s as f64 * dt;
        let h0 = ham(t)?;
        let hm = ham(t + 0.5 * dt)?;
        let h1 = ham(t + dt)?;
        let k1 = schroedinger_rhs(&h0, &psi);
        let k2 = schroedinger_rhs(&hm, &(&psi + &k1 * c(0.5 * dt)));
        let k3 = schroedinger_rhs(&hm, &(&psi + &k2 * c(0.5 * dt)));
        let k4 = schroedinger_rhs(&h1, &(&psi + &k3 * c(dt)));
        psi += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
    }
    let excited = p.complement() * &psi;
    Ok(excited.iter().map(|z| z.norm_sqr()).sum())
}

/// Compares the early-time excitation growth under an explicit drive with
/// the golden-rule integrated rate.
pub fn time_domain_rate_check(
    model: &dyn DiracModel,
    gammas: &GammaSet,
    k: &[f64],
    axis: usize,
    epsilon: f64,
    settings: &TimeDomainSettings,
) -> Result<TimeDomainCheck> {
    let resonance = local_gap(model, k)?;
    let period = 2.0 * std::f64::consts::PI / resonance;
    let t_final = settings.periods * period;
    let steps = (settings.periods * settings.steps_per_period as f64).ceil() as usize;
    let fringe = 2.0 * std::f64::consts::PI / t_final;
    let half_width = settings.scan_half_width * fringe;
    let n_omega =
        (2.0 * settings.scan_half_width * settings.samples_per_fringe).ceil() as usize + 1;
    let h = 2.0 * half_width / (n_omega - 1) as f64;
    let probs: Vec<f64> = (0..n_omega)
        .into_par_iter()
        .map(|j| {
            let omega = resonance - half_width + j as f64 * h;
            excitation_after_drive(model, gammas, k, axis, epsilon, omega, t_final, steps)
        })
        .collect::<Result<_>>()?;
    let integral = h * (probs.iter().sum::<f64>() - 0.5 * (probs[0] + probs[n_omega - 1]));
    let time_domain_rate = integral / t_final;
    let g = metric_closed_form(model, k, DerivativeScheme::preferred(model))?;
    let golden = 2.0 * std::f64::consts::PI * epsilon * epsilon * g[(axis, axis)];
    Ok(TimeDomainCheck {
        time_domain_rate,
        golden_rule_rate: golden,
        rel_err: rel_error(time_domain_rate, golden),
    })
}
