//! Configuration-driven experiment runner.
//!
//! Each experiment kind writes its CSV artifacts into the output directory
//! and a `report.json` with scalar results, pass/fail flags and timings.
//! CSV numbers use the shortest round-trip decimal form, so identical
//! configurations produce byte-identical files; wall-clock timings go only
//! into the JSON report.

use crate::check::{
    classify, extract_f_of_d, tangency_radii, ExtractOutcome, FFunction, GForm,
    OverdeterminedData, Verdict,
};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::fem::{
    boundary_normal_samples, build_mesh, solve_torsion, BoundarySample, Mesh, SolverConfig,
    StarDomain, TorsionField,
};
use crate::quad::QuadratureSpec;
use crate::radial::{boundary_normal_derivative, export_csv, ode_residual, solve_radial};
use crate::warp::{ball_quantities, WarpProfile};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: BTreeMap<String, String>,
    pub scalars: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub manifest: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub success: bool,
    pub error: Option<String>,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig) -> Self {
        let mut echo = BTreeMap::new();
        echo.insert("kind".into(), config.kind.name().to_string());
        echo.insert("profile".into(), config.profile.clone());
        echo.insert("n".into(), config.n.to_string());
        echo.insert("p".into(), config.p.to_string());
        if let Some(a) = config.profile_param {
            echo.insert("profile_param".into(), a.to_string());
        }
        if let Some(s) = config.seed {
            echo.insert("seed".into(), s.to_string());
        }
        match config.kind {
            ExperimentKind::Radial | ExperimentKind::PhiTable | ExperimentKind::FemBall => {
                echo.insert("r".into(), config.r.to_string());
            }
            _ => {}
        }
        Self {
            kind: config.kind.name().to_string(),
            config: echo,
            scalars: BTreeMap::new(),
            flags: BTreeMap::new(),
            manifest: Vec::new(),
            timings_ms: BTreeMap::new(),
            success: false,
            error: None,
        }
    }

    pub fn all_flags_pass(&self) -> bool {
        self.success && self.flags.values().all(|&v| v)
    }
}

fn make_named_profile(config: &ExperimentConfig) -> Result<Arc<WarpProfile>> {
    Ok(Arc::new(WarpProfile::from_name(
        &config.profile,
        config.n,
        config.profile_param,
    )?))
}

fn write_file(dir: &Path, name: &str, contents: &str, manifest: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    manifest.push(name.to_string());
    Ok(())
}

fn write_mesh_txt(mesh: &Mesh, dir: &Path, manifest: &mut Vec<String>) -> Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {} {}\n", v[0], v[1]));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", t[0], t[1], t[2]));
    }
    write_file(dir, "mesh.txt", &out, manifest)
}

fn write_field_csv(field: &TorsionField, dir: &Path, manifest: &mut Vec<String>) -> Result<()> {
    let mut out = String::from("vertex_id,t,theta,u\n");
    for (i, v) in field.mesh.vertices.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", v[0], v[1], field.values[i]));
    }
    write_file(dir, "field.csv", &out, manifest)
}

fn write_boundary_csv(
    samples: &[BoundarySample],
    dir: &Path,
    manifest: &mut Vec<String>,
) -> Result<()> {
    let mut out = String::from("theta,d,dnu_u\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{}\n",
            s.theta, s.distance, s.normal_derivative
        ));
    }
    write_file(dir, "boundary.csv", &out, manifest)
}

fn solve_on_domain(
    config: &ExperimentConfig,
    profile: &Arc<WarpProfile>,
    domain: &StarDomain,
) -> Result<(TorsionField, Vec<BoundarySample>)> {
    let mesh = Arc::new(build_mesh(domain, profile, config.n_r, config.n_theta)?);
    let field = solve_torsion(&mesh, profile, &SolverConfig::new(config.p))?;
    let samples = boundary_normal_samples(&field)?;
    Ok((field, samples))
}

/// Spread of per-bin means of dnu_u over equal-width bins in d. Zero when
/// all distances coincide (single bin).
pub fn dispersion(samples: &[BoundarySample], n_bins: usize) -> f64 {
    let d_min = samples.iter().map(|s| s.distance).fold(f64::MAX, f64::min);
    let d_max = samples.iter().map(|s| s.distance).fold(f64::MIN, f64::max);
    if d_max - d_min < 1e-12 {
        return 0.0;
    }
    let width = (d_max - d_min) / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for s in samples {
        let k = (((s.distance - d_min) / width) as usize).min(n_bins - 1);
        sums[k] += s.normal_derivative;
        counts[k] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    let hi = means.iter().cloned().fold(f64::MIN, f64::max);
    let lo = means.iter().cloned().fold(f64::MAX, f64::min);
    hi - lo
}

fn timed<T>(
    report: &mut ExperimentReport,
    label: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f();
    report
        .timings_ms
        .insert(label.to_string(), start.elapsed().as_secs_f64() * 1e3);
    out
}

pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut report = ExperimentReport::new(config);
    match dispatch(config, out_dir, &mut report) {
        Ok(()) => report.success = true,
        Err(e) => report.error = Some(e.to_string()),
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| {
        Error::ConfigInvalid(format!("report serialization failed: {e}"))
    })?;
    let mut f = std::fs::File::create(out_dir.join("report.json"))?;
    writeln!(f, "{json}")?;
    Ok(report)
}

fn dispatch(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    match config.kind {
        ExperimentKind::Radial => run_radial(config, out_dir, report),
        ExperimentKind::PhiTable => run_phi_table(config, out_dir, report),
        ExperimentKind::FemBall => run_fem_ball(config, out_dir, report),
        ExperimentKind::FemStar => run_fem_star(config, out_dir, report),
        ExperimentKind::Classify => run_classify(config, out_dir, report),
        ExperimentKind::RigiditySweep => run_sweep(config, out_dir, report),
    }
}

fn run_radial(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let quad = QuadratureSpec::default();
    let sol = timed(report, "solve", || {
        solve_radial(&profile, config.p, config.r, config.grid_size, &quad)
    })?;
    let mut buf = Vec::new();
    export_csv(&sol, &mut buf)?;
    write_file(
        out_dir,
        "radial.csv",
        &String::from_utf8(buf).expect("csv is ascii"),
        &mut report.manifest,
    )?;
    let residual = ode_residual(&sol);
    report.scalars.insert("V_center".into(), sol.values[0]);
    report
        .scalars
        .insert("boundary_normal_derivative".into(), boundary_normal_derivative(&sol));
    report.scalars.insert("ode_residual".into(), residual);
    report.flags.insert("ode_residual_below_1e-4".into(), residual < 1e-4);
    Ok(())
}

fn run_phi_table(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let quad = QuadratureSpec::default();
    let bq = ball_quantities(profile.clone(), config.p, &quad)?;
    if config.r > profile.usable_max_radius() {
        return Err(Error::ConfigInvalid(format!(
            "table extent {} exceeds the profile validity radius {}",
            config.r,
            profile.usable_max_radius()
        )));
    }
    let mut out = String::from("t,S,A,Phi,eta\n");
    let cells = config.grid_size - 1;
    let table = timed(report, "table", || {
        for i in 1..=cells {
            let t = config.r * i as f64 / cells as f64;
            out.push_str(&format!(
                "{t},{},{},{},{}\n",
                bq.sphere_area(t),
                bq.ball_volume(t)?,
                bq.phi(t)?,
                bq.eta_at(t)?
            ));
        }
        Ok(out)
    })?;
    write_file(out_dir, "phi_table.csv", &table, &mut report.manifest)?;
    report.scalars.insert("phi_at_r".into(), bq.phi(config.r)?);
    Ok(())
}

fn run_fem_ball(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let quad = QuadratureSpec::default();
    let domain = StarDomain::ball(config.r)?;
    let (field, samples) = timed(report, "solve", || {
        solve_on_domain(config, &profile, &domain)
    })?;
    write_mesh_txt(&field.mesh, out_dir, &mut report.manifest)?;
    write_field_csv(&field, out_dir, &mut report.manifest)?;
    write_boundary_csv(&samples, out_dir, &mut report.manifest)?;

    let oracle = solve_radial(&profile, config.p, config.r, 1025, &quad)?;
    let phi_r = boundary_normal_derivative(&oracle);
    let mut max_nodal = 0.0f64;
    for (i, v) in field.mesh.vertices.iter().enumerate() {
        max_nodal = max_nodal.max((field.values[i] - oracle.value_at(v[0])).abs());
    }
    let max_boundary_dev = samples
        .iter()
        .map(|s| (s.normal_derivative - phi_r).abs())
        .fold(0.0f64, f64::max);
    report.scalars.insert("phi_r".into(), phi_r);
    report.scalars.insert("max_nodal_error".into(), max_nodal);
    report
        .scalars
        .insert("max_boundary_deviation".into(), max_boundary_dev);
    report.flags.insert(
        "boundary_within_1pct".into(),
        max_boundary_dev < 0.01 * phi_r,
    );
    Ok(())
}

fn star_domain_from_config(config: &ExperimentConfig) -> Result<StarDomain> {
    let mut cos_coeffs = config.domain_cos.clone();
    let mut sin_coeffs = config.domain_sin.clone();
    if let Some(seed) = config.seed {
        // Deterministic small perturbation of the first four modes.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        cos_coeffs.resize(cos_coeffs.len().max(4), 0.0);
        sin_coeffs.resize(sin_coeffs.len().max(4), 0.0);
        for k in 0..4 {
            cos_coeffs[k] += rng.gen_range(-0.05..0.05);
            sin_coeffs[k] += rng.gen_range(-0.05..0.05);
        }
    }
    StarDomain::new(config.domain_a0, cos_coeffs, sin_coeffs)
}

fn run_fem_star(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let domain = star_domain_from_config(config)?;
    let (field, samples) = timed(report, "solve", || {
        solve_on_domain(config, &profile, &domain)
    })?;
    write_mesh_txt(&field.mesh, out_dir, &mut report.manifest)?;
    write_field_csv(&field, out_dir, &mut report.manifest)?;
    write_boundary_csv(&samples, out_dir, &mut report.manifest)?;

    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.distance, s.normal_derivative))
        .collect();
    let outcome = extract_f_of_d(&pairs, 16, 0.01)?;
    let is_function = matches!(outcome, ExtractOutcome::Table { .. });
    if let ExtractOutcome::Spread { max_spread } = outcome {
        report.scalars.insert("max_spread".into(), max_spread);
    }
    report
        .scalars
        .insert("dispersion".into(), dispersion(&samples, 16));
    // Informational rather than a pass/fail flag: on a genuinely non-round
    // domain the dependence on d is expected to fail.
    report.scalars.insert(
        "is_function_of_d".into(),
        if is_function { 1.0 } else { 0.0 },
    );
    Ok(())
}

fn run_classify(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let quad = QuadratureSpec::default();
    let bq = Arc::new(ball_quantities(profile.clone(), config.p, &quad)?);
    let domain = star_domain_from_config(config)?;
    let radii = tangency_radii(&domain);
    let g = GForm::parse(&config.f_form, config.f_param, config.f_param2)?;
    let t_min = 1e-5 * radii.r1;
    let t_max = (2.5 * radii.r1).min(profile.usable_max_radius());
    let data = OverdeterminedData::new(FFunction::PhiMultiple(g), bq, t_min, t_max)?;
    let verdict = timed(report, "classify", || classify(&data, &domain))?;
    write_file(
        out_dir,
        "verdict.txt",
        &verdict.to_report_string(),
        &mut report.manifest,
    )?;
    report.scalars.insert("r0".into(), verdict.r0);
    report.scalars.insert("r1".into(), verdict.r1);
    report.scalars.insert("ratio_at_r0".into(), verdict.ratio_at_r0);
    report.scalars.insert("ratio_at_r1".into(), verdict.ratio_at_r1);
    report
        .scalars
        .insert("case_i_margin".into(), verdict.case_i_margin);
    report
        .scalars
        .insert("crossings".into(), verdict.crossings as f64);
    if let Verdict::BallOfRadius(r) = verdict.verdict {
        report.scalars.insert("R".into(), r);
    }
    report.config.insert(
        "verdict".into(),
        match verdict.verdict {
            Verdict::BallForcedCaseI => "ball_case_i".into(),
            Verdict::BallOfRadius(_) => "ball_of_radius".into(),
            Verdict::NotApplicable(_) => "not_applicable".into(),
            Verdict::Inconsistent(_) => "inconsistent".into(),
        },
    );
    Ok(())
}

fn run_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut ExperimentReport,
) -> Result<()> {
    let profile = make_named_profile(config)?;
    let quad = QuadratureSpec::default();
    let bq = ball_quantities(profile.clone(), config.p, &quad)?;
    let phi_r = bq.phi(config.sweep_radius)?;
    let mut lambdas = config.sweep_lambdas.clone();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut dispersions = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let mut cos_coeffs = vec![0.0; config.sweep_mode as usize];
        cos_coeffs[config.sweep_mode as usize - 1] = config.sweep_radius * lambda;
        let domain = StarDomain::new(config.sweep_radius, cos_coeffs, vec![])?;
        let (_, samples) = timed(report, &format!("solve_lambda_{lambda}"), || {
            solve_on_domain(config, &profile, &domain)
        })?;
        dispersions.push(dispersion(&samples, config.n_bins));
    }

    let mut out = String::from("lambda,D\n");
    for (l, d) in lambdas.iter().zip(&dispersions) {
        out.push_str(&format!("{l},{d}\n"));
    }
    write_file(out_dir, "sweep.csv", &out, &mut report.manifest)?;

    report.scalars.insert("phi_R".into(), phi_r);
    report.scalars.insert("D_0".into(), dispersions[0]);
    report
        .scalars
        .insert("D_max".into(), *dispersions.last().unwrap());
    let monotone = dispersions.windows(2).all(|w| w[1] > w[0]);
    report.flags.insert(
        "round_baseline_small".into(),
        lambdas[0] > 0.0 || dispersions[0] < 0.01 * phi_r,
    );
    if lambdas.len() > 1 {
        report.flags.insert("dispersion_increasing".into(), monotone);
    }
    Ok(())
}

/// Output directory defaulting: alongside the config file under `out/`.
pub fn default_out_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("out")
}
