use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use qgeom_core::chern::{compute_chern, mass_sweep, write_sweep_csv, ChernAlgorithm};
use qgeom_core::linalg::{max_abs_real, symmetric_eigenvalues};
use qgeom_core::model::builtin;
use qgeom_core::qgt::{det_identity_report_scaled, metric_closed_form, qgt_spectral};
use qgeom_core::riemann::{
    curvature_bundle, hypersphere_check, hypersphere_curvature, HypersphereCheck, QuantumMetric,
    ScaledMetric,
};
use qgeom_core::spectroscopy::{integrated_rate, reconstruct_metric, MetricReconstruction};
use qgeom_core::{
    build_gammas, BrillouinGrid, DetIdentityReport, DiracModel, DriveSpec, Error, FourierModel,
    MetricField, ModelSpec, RMatrix, RateResult, SweepRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{Command, MethodArg};
use crate::config::Settings;
use crate::error::CliError;
use crate::output::{write_csv, write_json, Header};

/// Files written by a successful (or tolerance-violating) run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub violations: Vec<String>,
}

pub fn execute(command: Command, settings: &Settings) -> Result<Outcome, CliError> {
    let model = settings.model.build()?;
    match command {
        Command::Metric => metric(settings, &model),
        Command::IdentityCheck => identity_check(settings, &model),
        Command::Chern => chern(settings, &model),
        Command::Sweep => sweep(settings),
        Command::Geometry => geometry(settings, &model),
        Command::Spectroscopy => spectroscopy(settings, &model),
    }
}

fn rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn random_points(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-PI..PI)).collect())
        .collect()
}

fn condition(g: &RMatrix) -> f64 {
    let e = symmetric_eigenvalues(g);
    let (lo, hi) = (e[0], e[e.len() - 1]);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Random points where the metric is well conditioned.
fn generic_points(
    rng: &mut ChaCha8Rng,
    field: &dyn MetricField,
    count: usize,
    max_condition: f64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let dim = field.dim();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(CliError::Failure(format!(
                "found only {} of {count} points with cond(g) <= {max_condition}",
                out.len()
            )));
        }
        let k = random_points(rng, dim, 1).remove(0);
        match field.metric(&k) {
            Ok(g) if condition(&g) <= max_condition => out.push(k),
            Ok(_) | Err(Error::GapClosure { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn sample_points(settings: &Settings, rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    match &settings.points {
        Some(p) => p.clone(),
        None => random_points(rng, dim, settings.samples),
    }
}

fn sample_generic(
    settings: &Settings,
    rng: &mut ChaCha8Rng,
    field: &dyn MetricField,
) -> Result<Vec<Vec<f64>>, CliError> {
    match &settings.points {
        Some(p) => Ok(p.clone()),
        None => generic_points(
            rng,
            field,
            settings.samples,
            settings.tolerances.generic_condition,
        ),
    }
}

#[derive(Serialize)]
struct MetricRecord {
    k: Vec<f64>,
    metric: Vec<Vec<f64>>,
    spectral_metric: Vec<Vec<f64>>,
    curvature_trace: Vec<Vec<f64>>,
    max_abs_diff: f64,
}

#[derive(Serialize)]
struct MetricDoc {
    max_abs_diff: f64,
    within_tolerance: bool,
    records: Vec<MetricRecord>,
}

fn metric(settings: &Settings, model: &FourierModel) -> Result<Outcome, CliError> {
    let gammas = build_gammas(model.n_half_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let points = sample_points(settings, &mut rng, model.k_dim());
    let mut records = Vec::with_capacity(points.len());
    for k in points {
        let closed = metric_closed_form(model, &k, settings.scheme)?;
        let spectral = qgt_spectral(model, &gammas, &k, settings.scheme)?;
        records.push(MetricRecord {
            max_abs_diff: max_abs_real(&(&closed - &spectral.metric)),
            metric: rows(&closed),
            spectral_metric: rows(&spectral.metric),
            curvature_trace: rows(&spectral.curvature_trace),
            k,
        });
    }
    let max_abs_diff = records.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max);
    let doc = MetricDoc {
        max_abs_diff,
        within_tolerance: max_abs_diff <= settings.tolerances.metric,
        records,
    };
    eprintln!("metric: max |closed - spectral| = {max_abs_diff:e}");
    let path = write_json(&settings.out, "metric.json", &Header::new(settings), &doc)?;
    Ok(Outcome {
        files: vec![path],
        violations: Vec::new(),
    })
}

#[derive(Serialize)]
struct DetRecord {
    k: Vec<f64>,
    #[serde(flatten)]
    report: DetIdentityReport,
}

#[derive(Serialize)]
struct DetSection {
    samples: usize,
    max_rel_discrepancy: f64,
    records: Vec<DetRecord>,
}

#[derive(Serialize)]
struct SphereRecord {
    k: Vec<f64>,
    condition: f64,
    #[serde(flatten)]
    check: HypersphereCheck,
}

#[derive(Serialize)]
struct SphereSection {
    samples: usize,
    sectional_curvature: f64,
    max_riemann_rel_err: f64,
    max_scalar_err: f64,
    max_einstein_residual: f64,
    max_euler_err: Option<f64>,
    records: Vec<SphereRecord>,
}

#[derive(Serialize)]
struct IdentityDoc {
    perturb_metric: f64,
    det_identity: DetSection,
    hypersphere: SphereSection,
    violations: Vec<String>,
    passed: bool,
}

fn sphere_section(
    settings: &Settings,
    field: &dyn MetricField,
    points: Vec<Vec<f64>>,
    sectional: f64,
) -> Result<SphereSection, CliError> {
    let mut records = Vec::with_capacity(points.len());
    for k in points {
        let bundle = curvature_bundle(field, &k, settings.curvature)?;
        records.push(SphereRecord {
            condition: condition(&bundle.metric),
            check: hypersphere_check(&bundle, sectional),
            k,
        });
    }
    let max = |f: &dyn Fn(&SphereRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    let euler: Vec<f64> = records
        .iter()
        .filter_map(|r| r.check.euler_ratio.map(|x| (x - 1.0).abs()))
        .collect();
    Ok(SphereSection {
        samples: records.len(),
        sectional_curvature: sectional,
        max_riemann_rel_err: max(&|r| r.check.riemann_rel_err),
        max_scalar_err: max(&|r| (r.check.scalar - r.check.scalar_expected).abs()),
        max_einstein_residual: max(&|r| r.check.einstein_residual),
        max_euler_err: (!euler.is_empty()).then(|| euler.iter().copied().fold(0.0, f64::max)),
        records,
    })
}

fn identity_check(settings: &Settings, model: &FourierModel) -> Result<Outcome, CliError> {
    let gammas = build_gammas(model.n_half_dim())?;
    let tol = &settings.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let det_points = sample_points(settings, &mut rng, model.k_dim());
    let mut det_records = Vec::with_capacity(det_points.len());
    for k in det_points {
        let report = det_identity_report_scaled(
            model,
            &gammas,
            &k,
            settings.scheme,
            settings.perturb_metric,
        )?;
        det_records.push(DetRecord { k, report });
    }
    let det_max = det_records
        .iter()
        .map(|r| r.report.max_rel_discrepancy)
        .fold(0.0, f64::max);

    let field = ScaledMetric {
        inner: QuantumMetric {
            model,
            scheme: settings.scheme,
        },
        scale: settings.perturb_metric,
    };
    let sphere_points = sample_generic(settings, &mut rng, &field.inner)?;
    let sphere = sphere_section(
        settings,
        &field,
        sphere_points,
        hypersphere_curvature(model.n_half_dim()),
    )?;

    let mut violations = Vec::new();
    let mut check = |name: &str, value: f64, limit: f64| {
        if value.is_nan() || value >= limit {
            violations.push(format!("{name} = {value:e} exceeds {limit:e}"));
        }
    };
    check(
        "determinant identity discrepancy",
        det_max,
        tol.det_identity,
    );
    check(
        "Riemann tensor relative error",
        sphere.max_riemann_rel_err,
        tol.riemann,
    );
    check("Ricci scalar error", sphere.max_scalar_err, tol.scalar);
    check(
        "Einstein residual",
        sphere.max_einstein_residual,
        tol.einstein,
    );
    if let Some(e) = sphere.max_euler_err {
        check("Euler density ratio error", e, tol.euler);
    }

    eprintln!(
        "identity-check: det identity {det_max:e}, riemann {:e}, scalar {:e}, einstein {:e}",
        sphere.max_riemann_rel_err, sphere.max_scalar_err, sphere.max_einstein_residual
    );
    let doc = IdentityDoc {
        perturb_metric: settings.perturb_metric,
        det_identity: DetSection {
            samples: det_records.len(),
            max_rel_discrepancy: det_max,
            records: det_records,
        },
        hypersphere: sphere,
        passed: violations.is_empty(),
        violations: violations.clone(),
    };
    let path = write_json(
        &settings.out,
        "identity_check.json",
        &Header::new(settings),
        &doc,
    )?;
    Ok(Outcome {
        files: vec![path],
        violations,
    })
}

fn algorithms(method: MethodArg) -> Vec<ChernAlgorithm> {
    match method {
        MethodArg::Metric => vec![ChernAlgorithm::MetricArea],
        MethodArg::Oracle => vec![ChernAlgorithm::LatticeOracle],
        MethodArg::All => vec![ChernAlgorithm::MetricArea, ChernAlgorithm::LatticeOracle],
    }
}

fn sweep_csv(settings: &Settings, name: &str, rows: &[SweepRow]) -> Result<PathBuf, CliError> {
    write_csv(&settings.out, name, &Header::new(settings), |buf| {
        write_sweep_csv(buf, rows, settings.grid).map_err(|e| CliError::Failure(e.to_string()))
    })
}

fn chern(settings: &Settings, model: &FourierModel) -> Result<Outcome, CliError> {
    let gammas = build_gammas(model.n_half_dim())?;
    let grid = BrillouinGrid::new(model.n_half_dim(), settings.grid);
    let m = model.params.get("m").copied().unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    for algorithm in algorithms(settings.method) {
        let result = compute_chern(model, &gammas, &grid, algorithm, settings.scheme)?;
        eprintln!(
            "chern: {} = {:.6} (nearest {}, residual {:.2e})",
            result.method, result.value, result.nearest_integer, result.residual
        );
        rows.push(SweepRow {
            m,
            algorithm,
            outcome: Ok(result),
        });
    }
    let path = sweep_csv(settings, "chern.csv", &rows)?;
    Ok(Outcome {
        files: vec![path],
        violations: Vec::new(),
    })
}

fn sweep(settings: &Settings) -> Result<Outcome, CliError> {
    let (name, params) = match &settings.model {
        ModelSpec::Builtin { name, params } => (name.clone(), params.clone()),
        ModelSpec::Fourier(_) => {
            return Err(CliError::Config(
                "sweep needs a built-in model family".into(),
            ))
        }
    };
    let family = move |m: f64| {
        let mut p: BTreeMap<String, f64> = params.clone();
        p.insert("m".into(), m);
        builtin(&name, &p).expect("model family validated before the sweep")
    };
    let grid = BrillouinGrid::new(settings.n_half_dim, settings.grid);
    let m_values = settings.m_values.clone().unwrap_or_default();
    let rows = mass_sweep(
        &family,
        &m_values,
        &grid,
        &algorithms(settings.method),
        settings.scheme,
    )?;
    for row in &rows {
        match &row.outcome {
            Ok(r) => eprintln!(
                "sweep: m = {} {} = {:.6} (nearest {})",
                row.m, r.method, r.value, r.nearest_integer
            ),
            Err(e) => eprintln!("sweep: m = {} {}: {e}", row.m, row.algorithm),
        }
    }
    if let Some(Err(e)) = rows
        .iter()
        .map(|r| &r.outcome)
        .find(|o| matches!(o, Err(e) if !matches!(e, Error::GapClosureOnGrid { .. } | Error::GapClosure { .. })))
    {
        return Err(e.clone().into());
    }
    let path = sweep_csv(settings, "sweep.csv", &rows)?;
    Ok(Outcome {
        files: vec![path],
        violations: Vec::new(),
    })
}

#[derive(Serialize)]
struct GeometryRecord {
    k: Vec<f64>,
    condition: f64,
    metric: Vec<Vec<f64>>,
    ricci: Vec<Vec<f64>>,
    euler_density_lhs: Option<f64>,
    euler_density_rhs: Option<f64>,
    #[serde(flatten)]
    check: HypersphereCheck,
}

#[derive(Serialize)]
struct GeometryDoc {
    sectional_curvature: f64,
    curvature_step: f64,
    richardson: bool,
    records: Vec<GeometryRecord>,
}

fn geometry(settings: &Settings, model: &FourierModel) -> Result<Outcome, CliError> {
    let field = QuantumMetric {
        model,
        scheme: settings.scheme,
    };
    let sectional = hypersphere_curvature(model.n_half_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let points = sample_generic(settings, &mut rng, &field)?;
    let mut records = Vec::with_capacity(points.len());
    for k in points {
        let b = curvature_bundle(&field, &k, settings.curvature)?;
        records.push(GeometryRecord {
            condition: condition(&b.metric),
            metric: rows(&b.metric),
            ricci: rows(&b.ricci),
            euler_density_lhs: b.euler_density_lhs,
            euler_density_rhs: b.euler_density_rhs,
            check: hypersphere_check(&b, sectional),
            k,
        });
    }
    eprintln!("geometry: {} points", records.len());
    let doc = GeometryDoc {
        sectional_curvature: sectional,
        curvature_step: settings.curvature.step,
        richardson: settings.curvature.richardson,
        records,
    };
    let path = write_json(&settings.out, "geometry.json", &Header::new(settings), &doc)?;
    Ok(Outcome {
        files: vec![path],
        violations: Vec::new(),
    })
}

#[derive(Serialize)]
struct SpectroscopyRecord {
    gap: f64,
    #[serde(flatten)]
    reconstruction: MetricReconstruction,
    /// Single-axis rate curves, one per momentum axis.
    rates: Vec<RateResult>,
}

#[derive(Serialize)]
struct SpectroscopyDoc {
    epsilon: f64,
    max_rel_err: f64,
    records: Vec<SpectroscopyRecord>,
}

fn spectroscopy(settings: &Settings, model: &FourierModel) -> Result<Outcome, CliError> {
    let drive = settings
        .drive
        .as_ref()
        .ok_or_else(|| CliError::Config("missing drive settings".into()))?;
    let gammas = build_gammas(model.n_half_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let points = sample_points(settings, &mut rng, model.k_dim());
    let mut records = Vec::with_capacity(points.len());
    for k in points {
        let gap = 2.0 * qgeom_core::model::d_hat(model, &k)?.1;
        let reconstruction = reconstruct_metric(model, &gammas, &k, drive.epsilon, &drive.probe)?;
        let rates = (0..model.k_dim())
            .map(|a| {
                let spec = DriveSpec::for_gap(gap, a, None, drive.epsilon, &drive.probe);
                integrated_rate(model, &gammas, &k, &spec)
            })
            .collect::<qgeom_core::Result<Vec<_>>>()?;
        records.push(SpectroscopyRecord {
            gap,
            reconstruction,
            rates,
        });
    }
    let max_rel_err = records
        .iter()
        .map(|r| r.reconstruction.max_rel_err)
        .fold(0.0, f64::max);
    eprintln!("spectroscopy: max relative metric error {max_rel_err:e}");
    let doc = SpectroscopyDoc {
        epsilon: drive.epsilon,
        max_rel_err,
        records,
    };
    let path = write_json(
        &settings.out,
        "spectroscopy.json",
        &Header::new(settings),
        &doc,
    )?;
    Ok(Outcome {
        files: vec![path],
        violations: Vec::new(),
    })
}
