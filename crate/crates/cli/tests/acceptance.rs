//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use qgeom_core::chern::{
    chern_first_fhs, chern_metric_method, chern_second_plaquette, hypersphere_area,
};
use qgeom_core::linalg::{max_abs_real, symmetric_eigenvalues, trace};
use qgeom_core::model::{qhz_4d, qwz_2d};
use qgeom_core::qgt::{
    curvature_operators, det_identity_report_scaled, metric_closed_form, qgt_spectral,
};
use qgeom_core::riemann::{
    curvature_bundle, hypersphere_check, hypersphere_curvature, HypersphereCheck, QuantumMetric,
    ScaledMetric,
};
use qgeom_core::spectroscopy::{integrated_rate, reconstruct_metric};
use qgeom_core::{
    build_gammas, BrillouinGrid, DerivativeScheme, DriveSpec, FdOptions, FourierModel, MetricField,
    ProbeSettings,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD: DerivativeScheme = DerivativeScheme::CentralFdHat { step: 1e-5 };
const CURVATURE_FD: FdOptions = FdOptions {
    step: 1e-3,
    richardson: true,
};

type Criterion = Box<dyn FnOnce() -> Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn random_k(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-PI..PI)).collect()
}

fn generic_k(rng: &mut ChaCha8Rng, field: &dyn MetricField) -> Vec<f64> {
    loop {
        let k = random_k(rng, field.dim());
        let e = symmetric_eigenvalues(&field.metric(&k).unwrap());
        if e[0] > 0.0 && e[e.len() - 1] / e[0] <= 100.0 {
            return k;
        }
    }
}

/// Gapped QWZ and QHZ phases, cycled over the sample points.
fn gapped_models() -> Vec<FourierModel> {
    vec![
        qwz_2d(-1.0),
        qwz_2d(1.0),
        qwz_2d(2.5),
        qhz_4d(-3.0),
        qhz_4d(-1.0),
        qhz_4d(1.0),
        qhz_4d(3.0),
    ]
}

fn timed(limit: Duration, run: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = run();
    let elapsed = start.elapsed();
    v.detail = format!(
        "{}; {:.2} s (limit {} s)",
        v.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    v.pass &= elapsed < limit;
    v
}

fn metric_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let models = gapped_models();
    let (mut worst_analytic, mut worst_fd) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let model = &models[i % models.len()];
        let gammas = build_gammas(model.n_half_dim).unwrap();
        let k = random_k(&mut rng, 2 * model.n_half_dim);
        for (scheme, worst) in [
            (DerivativeScheme::Analytic, &mut worst_analytic),
            (FD, &mut worst_fd),
        ] {
            let closed = metric_closed_form(model, &k, scheme).unwrap();
            let spectral = qgt_spectral(model, &gammas, &k, scheme).unwrap().metric;
            *worst = worst.max(max_abs_real(&(closed - spectral)));
        }
    }
    Verdict {
        pass: worst_analytic < 1e-10 && worst_fd < 1e-6,
        detail: format!("max |closed - spectral| analytic {worst_analytic:.2e} (tol 1e-10), fd {worst_fd:.2e} (tol 1e-6)"),
    }
}

fn max_det_discrepancy(scale: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 2];
    let mut best = [f64::INFINITY; 2];
    for (slot, n) in [1usize, 2].into_iter().enumerate() {
        let gammas = build_gammas(n).unwrap();
        for i in 0..100 {
            let m = [-3.0, -1.0, 1.0, 3.0][i % 4];
            let model = if n == 1 { qwz_2d(m) } else { qhz_4d(m) };
            let k = random_k(&mut rng, 2 * n);
            let r =
                det_identity_report_scaled(&model, &gammas, &k, DerivativeScheme::Analytic, scale)
                    .unwrap();
            worst[slot] = worst[slot].max(r.max_rel_discrepancy);
            best[slot] = best[slot].min(r.max_rel_discrepancy);
        }
    }
    (worst[0].max(worst[1]), best[0].min(best[1]))
}

fn determinant_identity() -> Verdict {
    let (worst, _) = max_det_discrepancy(1.0);
    Verdict {
        pass: worst < 1e-8,
        detail: format!("max relative three-way discrepancy {worst:.2e} over 100 k each for N = 1, 2 (tol 1e-8)"),
    }
}

fn chern_reproduction() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    let gammas = build_gammas(2).unwrap();
    let grid = BrillouinGrid::new(2, 16);
    let masses = [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0];
    let magnitudes = [0, 1, 3, 3, 1, 0];
    let mut metric_ints = Vec::new();
    let mut worst_residual = 0.0f64;
    for (&m, &mag) in masses.iter().zip(&magnitudes) {
        let model = qhz_4d(m);
        let metric =
            chern_metric_method(&model, &gammas, &grid, DerivativeScheme::Analytic).unwrap();
        let oracle = chern_second_plaquette(&model, &gammas, &grid).unwrap();
        worst_residual = worst_residual.max(metric.residual);
        pass &= metric.nearest_integer == oracle.nearest_integer;
        pass &= metric.nearest_integer.abs() == mag;
        metric_ints.push(metric.nearest_integer);
    }
    pass &= worst_residual < 0.05;
    // One global sign s with pattern (0, s, -3s, 3s, -s, 0).
    let s = metric_ints[1];
    let expected: Vec<i64> = [0, 1, -3, 3, -1, 0].iter().map(|x| x * s).collect();
    pass &= s.abs() == 1 && metric_ints == expected;
    notes.push(format!(
        "QHZ L=16 metric = oracle = {metric_ints:?}, max residual {worst_residual:.2e} (tol 0.05)"
    ));

    let gammas = build_gammas(1).unwrap();
    let grid = BrillouinGrid::new(1, 200);
    let mut qwz = Vec::new();
    for m in [-3.0, -1.0, 1.0, 3.0] {
        let model = qwz_2d(m);
        let metric =
            chern_metric_method(&model, &gammas, &grid, DerivativeScheme::Analytic).unwrap();
        let fhs = chern_first_fhs(&model, &gammas, &grid).unwrap();
        pass &= metric.nearest_integer == fhs.nearest_integer;
        qwz.push(metric.nearest_integer);
    }
    pass &= qwz == [0, 1, -1, 0];
    notes.push(format!("QWZ L=200 metric = FHS = {qwz:?}"));
    Verdict {
        pass,
        detail: notes.join("; "),
    }
}

#[derive(Default)]
struct SphereWorst {
    riemann: f64,
    scalar: f64,
    einstein: f64,
    euler: f64,
}

impl SphereWorst {
    fn add(&mut self, c: &HypersphereCheck) {
        self.riemann = self.riemann.max(c.riemann_rel_err);
        self.scalar = self.scalar.max((c.scalar - 24.0).abs());
        self.einstein = self.einstein.max(c.einstein_residual);
        self.euler = self.euler.max((c.euler_ratio.unwrap() - 1.0).abs());
    }

    fn within(&self) -> bool {
        self.riemann < 1e-3 && self.scalar < 1e-3 && self.einstein < 1e-4 && self.euler < 1e-3
    }

    fn broken_everywhere(&self) -> bool {
        self.riemann >= 1e-3 && self.scalar >= 1e-3 && self.einstein >= 1e-4 && self.euler >= 1e-3
    }
}

fn sphere_checks(scale: f64) -> (SphereWorst, SphereWorst) {
    let model = qhz_4d(-3.0);
    let exact = QuantumMetric::new(&model);
    let field = ScaledMetric {
        inner: QuantumMetric::new(&model),
        scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = SphereWorst::default();
    // Smallest deviation over the points; used by the negative control.
    let mut least = SphereWorst {
        riemann: f64::INFINITY,
        scalar: f64::INFINITY,
        einstein: f64::INFINITY,
        euler: f64::INFINITY,
    };
    for _ in 0..20 {
        let k = generic_k(&mut rng, &exact);
        let bundle = curvature_bundle(&field, &k, CURVATURE_FD).unwrap();
        let c = hypersphere_check(&bundle, hypersphere_curvature(2));
        worst.add(&c);
        least.riemann = least.riemann.min(c.riemann_rel_err);
        least.scalar = least.scalar.min((c.scalar - 24.0).abs());
        least.einstein = least.einstein.min(c.einstein_residual);
        least.euler = least.euler.min((c.euler_ratio.unwrap() - 1.0).abs());
    }
    (worst, least)
}

fn hypersphere_geometry() -> Verdict {
    let (w, _) = sphere_checks(1.0);
    Verdict {
        pass: w.within(),
        detail: format!(
            "20 generic k, QHZ m=-3: Riemann rel {:.2e} (1e-3), |R-24| {:.2e} (1e-3), Einstein {:.2e} (1e-4), |eeRR/384det g - 1| {:.2e} (1e-3)",
            w.riemann, w.scalar, w.einstein, w.euler
        ),
    }
}

fn vanishing_curvature_trace() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gammas = build_gammas(2).unwrap();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let model = qhz_4d([-3.0, -1.0, 1.0, 3.0][i % 4]);
        let k = random_k(&mut rng, 4);
        let spectral = qgt_spectral(&model, &gammas, &k, DerivativeScheme::Analytic).unwrap();
        worst = worst.max(max_abs_real(&spectral.curvature_trace));
        for f in curvature_operators(&model, &gammas, &k, DerivativeScheme::Analytic).unwrap() {
            worst = worst.max(trace(&f).norm());
        }
    }
    Verdict {
        pass: worst < 1e-12,
        detail: format!("max |sum_n F^nn_ab| {worst:.2e} over 100 k of QHZ (tol 1e-12)"),
    }
}

fn spectroscopy_protocol() -> Verdict {
    let model = qhz_4d(-3.0);
    let gammas = build_gammas(2).unwrap();
    let settings = ProbeSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut worst_scaling) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let k = random_k(&mut rng, 4);
        let rec = reconstruct_metric(&model, &gammas, &k, 1e-3, &settings).unwrap();
        worst = worst.max(rec.max_rel_err);
        let gap = 2.0 * qgeom_core::model::d_hat(&model, &k).unwrap().1;
        for axis in 0..4 {
            let rate = |eps: f64| {
                let spec = DriveSpec::for_gap(gap, axis, None, eps, &settings);
                integrated_rate(&model, &gammas, &k, &spec)
                    .unwrap()
                    .gamma_int
            };
            let ratio = rate(1e-2) / rate(1e-3) / 100.0;
            worst_scaling = worst_scaling.max((ratio - 1.0).abs());
        }
    }
    Verdict {
        pass: worst < 0.01 && worst_scaling < 1e-3,
        detail: format!(
            "10 k, eta = 0.01 gap: max component error {worst:.2e} (tol 1e-2), eps^2 scaling deviation {worst_scaling:.2e} over eps 1e-3..1e-2 (tol 1e-3)"
        ),
    }
}

fn constants() -> Verdict {
    let a1 = hypersphere_area(1);
    let a2 = hypersphere_area(2);
    let e1 = (a1 - PI).abs() / PI;
    let e2 = (a2 - 2.0 * PI * PI / 3.0).abs() / (2.0 * PI * PI / 3.0);
    Verdict {
        pass: e1 < 1e-15 && e2 < 1e-15,
        detail: format!("S^2 area {a1} (rel err {e1:.1e}), S^4 area {a2} (rel err {e2:.1e})"),
    }
}

fn negative_controls() -> Verdict {
    let (_, least_det) = max_det_discrepancy(1.01);
    let (_, least_sphere) = sphere_checks(1.01);
    let mut codes = Vec::new();
    for model in ["qwz2d", "qhz4d"] {
        let dir = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_qgeom"))
            .args([
                "identity-check",
                "--model",
                model,
                "--m",
                "-1",
                "--samples",
                "20",
                "--perturb-metric",
                "1.01",
                "--out",
            ])
            .arg(dir.path())
            .output()
            .unwrap()
            .status;
        codes.push(status.code());
    }
    let pass = least_det >= 1e-8 && least_sphere.broken_everywhere() && codes == [Some(4), Some(4)];
    Verdict {
        pass,
        detail: format!(
            "g -> 1.01 g: smallest det discrepancy {least_det:.2e}, smallest Riemann {:.2e} / scalar {:.2e} / Einstein {:.2e} / Euler {:.2e} deviations; identity-check exit codes {codes:?}",
            least_sphere.riemann, least_sphere.scalar, least_sphere.einstein, least_sphere.euler
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let criteria: Vec<(&str, Criterion)> = vec![
        (
            "1 metric equivalence",
            Box::new(move || timed(secs(5), metric_equivalence)),
        ),
        (
            "2 determinant identity",
            Box::new(move || timed(secs(10), determinant_identity)),
        ),
        (
            "3 Chern-number reproduction",
            Box::new(move || timed(secs(300), chern_reproduction)),
        ),
        (
            "4 hypersphere geometry",
            Box::new(move || timed(secs(30), hypersphere_geometry)),
        ),
        (
            "5 vanishing curvature trace",
            Box::new(vanishing_curvature_trace),
        ),
        (
            "6 spectroscopy protocol",
            Box::new(move || timed(secs(60), spectroscopy_protocol)),
        ),
        ("7 constants", Box::new(constants)),
        ("8 negative controls", Box::new(negative_controls)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
