use std::f64::consts::FRAC_PI_2;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qwalk::export::{
    fmt_float, write_averaged_csv, write_json, write_moments_csv, write_profiles_csv, write_scan_csv, write_table,
};
use qwalk::resolvent::{
    moment_certificate, neumann_oracle, parseval_check, resolvent_window_scan, solve_resolvent, CertificateReport,
    ParsevalReport, TruncatedResolventProblem,
};
use qwalk::transfer::{check_commutation_identity, uniform_bound_scan, verify_eigenrecursion, window_bound_scan};
use qwalk::walk::{evolve, transport_exponent_estimate};
use qwalk::{CoinAngles, Error, Result, SpectralParameter, WalkModel, WalkState};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, WalkKind};

/// Largest number of `(ℓ, n)` cells `simulate` will hold in memory.
pub const PROFILE_CELL_CAP: usize = 1 << 26;

pub enum Status {
    Ok,
    Failed(Vec<String>),
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let cells = (cfg.l_max + 1).saturating_mul(2 * cfg.l_max + 3);
    if cells > PROFILE_CELL_CAP {
        return Err(Error::ResourceCap { requested: cells, cap: PROFILE_CELL_CAP });
    }
    let model = cfg.model(cache)?;
    let profiles = model.profiles(cfg.l_max)?;
    let mut w = create(&cfg.out, "profiles.csv")?;
    write_profiles_csv(&mut w, cfg, &profiles)?;
    finish(w)?;

    let averaged = cfg.grid()?.iter().map(|&l| model.time_averaged(l, cfg.tail_tol)).collect::<Result<Vec<_>>>()?;
    let mut w = create(&cfg.out, "averaged.csv")?;
    write_averaged_csv(&mut w, cfg, &averaged)?;
    finish(w)?;

    if let WalkModel::Pattern(pc) = &model {
        let r = cfg.l_max as i64 + 1;
        let window = pc.sequence.window_cached(pc.offset, -r, r, pc.cache_dir.as_deref())?;
        let mut w = create(&cfg.out, "window.json")?;
        write_json(&mut w, cfg, &window)?;
        finish(w)?;
    }
    let last = profiles.last().expect("l_max + 1 profiles");
    println!("simulate: {} profiles, mass at l = {}: {:.16e}", profiles.len(), last.time, last.total_mass());
    for a in &averaged {
        println!("  L = {}: l_max = {}, tail bound {:.3e}", a.scale, a.l_max, a.tail_bound);
    }
    Ok(Status::Ok)
}

pub fn exponents(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let model = cfg.model(cache)?;
    let grid = cfg.grid()?;
    let estimates = cfg
        .p
        .iter()
        .map(|&p| transport_exponent_estimate(p, &grid, &model, cfg.tail_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut w = create(&cfg.out, "exponents.json")?;
    write_json(&mut w, cfg, &estimates)?;
    finish(w)?;
    let points: Vec<_> = estimates.iter().flat_map(|e| e.moments.iter().copied()).collect();
    let mut w = create(&cfg.out, "moments.csv")?;
    write_moments_csv(&mut w, cfg, &points)?;
    finish(w)?;
    for e in &estimates {
        println!("p = {}: slope {:.6} (local {:.6} .. {:.6})", e.p, e.slope, e.slope_local_min, e.slope_local_max);
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    measured: Value,
    threshold: Option<f64>,
}

impl Check {
    fn new(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, passed: value <= threshold, measured: json!(value), threshold: Some(threshold) }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Self { name, passed: true, measured: json!({ "skipped": why }), threshold: None }
    }
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<Check>,
}

fn sample_parameters() -> Vec<SpectralParameter> {
    // fixed so that reports are reproducible
    [(0.3, 1.0 / 20.0), (1.9, 0.1), (FRAC_PI_2, 0.3), (4.0, 0.5), (5.5, 2f64.ln())]
        .iter()
        .map(|&(tau, eta)| SpectralParameter::from_phase(tau, eta).expect("nonzero"))
        .collect()
}

pub fn verify(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let model = cfg.model(cache)?;
    let angles = cfg.angles()?;
    let mut checks = Vec::new();

    let r = cfg.l_max as i64 + 1;
    match model.coin_bank(-r, r)? {
        Some(mut bank) => {
            if let Some(c) = cfg.corrupt_coin {
                let coin = *bank.coin_at(c.site).ok_or_else(|| {
                    Error::InvalidArgument(format!("corrupt_coin site {} outside [{}, {}]", c.site, -r, r))
                })?;
                bank.set_coin(c.site, coin.scale(c.scale.into()))?;
            }
            checks.push(Check::new("coin_unitarity", bank.max_unitarity_defect(), 1e-12));
            let profiles = evolve(&WalkState::delta_plus(0, 0)?, &bank, cfg.l_max)?;
            let mass = profiles.iter().map(|p| (p.total_mass() - 1.0).abs()).fold(0.0, f64::max);
            checks.push(Check::new("normalization", mass, 1e-12));
            let leak = profiles
                .iter()
                .flat_map(|p| p.rows().filter(move |r| r.0.unsigned_abs() as usize > p.time).map(|r| r.3))
                .fold(0.0, f64::max);
            checks.push(Check::new("light_cone", leak, 0.0));
        }
        None => {
            checks.push(Check::skipped("coin_unitarity", "identity operator has no coins"));
            checks.push(Check::skipped("normalization", "identity operator has no coins"));
            checks.push(Check::skipped("light_cone", "identity operator has no coins"));
        }
    }

    checks.push(Check::new("commutation_identity", check_commutation_identity(&angles)?.max(), 1e-12));
    let mut grid_worst = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let t = 0.05 + (FRAC_PI_2 - 0.1) * i as f64 / 19.0;
            let p = 0.05 + (FRAC_PI_2 - 0.1) * j as f64 / 19.0;
            grid_worst = grid_worst.max(check_commutation_identity(&CoinAngles::new(t, p)?)?.max());
        }
    }
    checks.push(Check::new("commutation_grid", grid_worst, 1e-12));

    let short = uniform_bound_scan(&angles, 8.min(cfg.max_span), &cfg.offsets)?;
    let long = uniform_bound_scan(&angles, cfg.max_span, &cfg.offsets)?;
    let mut plateau = Check::new("uniform_plateau", (long - short).abs(), 1e-9);
    plateau.measured = json!({ "difference": (long - short).abs(), "span_8": short, "max_span": long });
    checks.push(plateau);

    let mut bounds = Vec::new();
    for &eps in &cfg.epsilons {
        bounds.push(window_bound_scan(&angles, eps, cfg.z_samples, &cfg.offsets)?);
    }
    let bounded = bounds.iter().all(|b| b.max_norm.is_finite() && b.max_norm >= 1.0);
    let values: Vec<Value> = bounds.iter().map(|b| json!({ "epsilon": b.epsilon, "max_norm": b.max_norm })).collect();
    checks.push(Check { name: "window_bound", passed: bounded, measured: json!(values), threshold: None });

    let mut parseval_worst = 0.0f64;
    for scale in [5.0, 10.0, 20.0] {
        for &n in &cfg.targets {
            let r = parseval_check(&model, n, scale, cfg.tail_tol.min(1e-12), cfg.node_count(scale), cfg.solver_tol)?;
            parseval_worst = parseval_worst.max(r.rel_diff);
        }
    }
    checks.push(Check::new("parseval", parseval_worst, 1e-6));

    if matches!(model, WalkModel::Identity) {
        checks.push(Check::skipped("resolvent_oracle", "identity operator has no coins"));
    } else {
        let (mut diff, mut recursion) = (0.0f64, 0.0f64);
        for z in sample_parameters() {
            let problem = TruncatedResolventProblem::from_model(&model, z, vec![0], 1e-12)?;
            let solved = solve_resolvent(&problem)?;
            let eta = z.modulus().ln();
            let l_max = (30.0 / eta).ceil() as usize;
            let bank = model.evolution_bank(l_max)?.expect("coined model");
            let series = neumann_oracle(&bank, &z, l_max)?;
            let r = problem.radius() as i64;
            for n in -r..=r {
                let (a, b) = solved.state.amplitude(n);
                let (c, d) = series.state.amplitude(n);
                diff = diff.max((a - c).norm()).max((b - d).norm());
            }
            if let WalkModel::Pattern(pc) = &model {
                let x = pc.sequence.window_cached(pc.offset, -r, r, pc.cache_dir.as_deref())?;
                recursion = recursion.max(verify_eigenrecursion(&solved.state, &x, &pc.angles, &z, &[-1])?);
            }
        }
        checks.push(Check::new("resolvent_oracle", diff, 1e-8));
        if cfg.walk == WalkKind::Coined {
            checks.push(Check::new("eigenrecursion", recursion, 1e-8));
        } else {
            checks.push(Check::skipped("eigenrecursion", "transfer matrices need rotation angles in (0, pi/2)"));
        }
    }

    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured);
    }
    let report = VerifyReport { passed: failed.is_empty(), checks };
    let mut w = create(&cfg.out, "verify.json")?;
    write_json(&mut w, cfg, &report)?;
    finish(w)?;
    Ok(if failed.is_empty() { Status::Ok } else { Status::Failed(failed) })
}

pub fn certify(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let model = cfg.model(cache)?;
    let grid = cfg.grid()?;
    let mut reports: Vec<CertificateReport> = Vec::new();
    for &p in &cfg.p {
        if p <= 1.0 {
            eprintln!("warning: p = {p} <= 1, the certified bound L^(p-1) does not grow");
        }
        reports.push(moment_certificate(&model, p, &grid, cfg.tau_nodes, cfg.tail_tol, cfg.solver_tol)?);
    }
    let mut w = create(&cfg.out, "certificate.json")?;
    write_json(&mut w, cfg, &reports)?;
    finish(w)?;
    let columns = [
        "p",
        "L",
        "window_integral",
        "left_integral",
        "right_integral",
        "lower_bound_functional",
        "accounted_bound",
        "annulus_moment",
        "moment",
        "positive",
        "ordered",
    ];
    let rows = reports.iter().flat_map(|r| {
        r.rows.iter().map(move |row| {
            vec![
                fmt_float(r.p),
                fmt_float(row.scale),
                fmt_float(row.window_integral),
                fmt_float(row.left_integral),
                fmt_float(row.right_integral),
                fmt_float(row.lower_bound_functional),
                fmt_float(row.accounted_bound),
                fmt_float(row.annulus_moment),
                fmt_float(row.moment),
                row.positive.to_string(),
                row.ordered.to_string(),
            ]
        })
    });
    let mut w = create(&cfg.out, "certificate.csv")?;
    write_table(&mut w, cfg, &columns, rows)?;
    finish(w)?;

    let mut failed = Vec::new();
    for r in &reports {
        println!(
            "p = {}: moment exponent {:.4}, certificate exponent {:.4}, C = {:.4e}, positive {}, ordered {}",
            r.p, r.moment_exponent, r.certificate_exponent, r.fitted_constant, r.all_positive, r.all_ordered
        );
        if !(r.all_positive && r.all_ordered) {
            failed.push(format!("certificate p={}", r.p));
        }
    }
    Ok(if failed.is_empty() { Status::Ok } else { Status::Failed(failed) })
}

pub fn transfer_scan(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let angles = cfg.angles()?;
    let uniform = uniform_bound_scan(&angles, cfg.max_span, &cfg.offsets)?;
    let windows = cfg
        .epsilons
        .iter()
        .map(|&eps| window_bound_scan(&angles, eps, cfg.z_samples, &cfg.offsets))
        .collect::<Result<Vec<_>>>()?;
    let model = cfg.model(cache)?;
    let mut scans = Vec::new();
    for &eps in &cfg.epsilons {
        let scan = resolvent_window_scan(&model, eps, cfg.c0 / eps, cfg.tau_nodes, cfg.solver_tol)?;
        let mut w = create(&cfg.out, &format!("resolvent_scan_eps_{eps}.csv"))?;
        write_scan_csv(&mut w, cfg, &scan.rows)?;
        finish(w)?;
        scans.push(json!({
            "epsilon": eps,
            "L": scan.scale,
            "min_value": scan.min_value,
            "min_left": scan.min_left,
            "min_right": scan.min_right,
        }));
    }
    let result = json!({
        "uniform": { "max_span": cfg.max_span, "offsets": cfg.offsets, "max_norm": uniform },
        "windows": windows,
        "resolvent": scans,
    });
    let mut w = create(&cfg.out, "transfer_scan.json")?;
    write_json(&mut w, cfg, &result)?;
    finish(w)?;
    println!("uniform bound at z = i: {uniform:.12}");
    for (b, s) in windows.iter().zip(&scans) {
        println!("eps = {}: max_norm {:.6}, resolvent floor {}", b.epsilon, b.max_norm, s["min_value"]);
    }
    Ok(Status::Ok)
}

pub fn parseval(cfg: &ExperimentConfig, cache: Option<PathBuf>) -> Result<Status> {
    let model = cfg.model(cache)?;
    let mut reports: Vec<ParsevalReport> = Vec::new();
    for scale in cfg.grid()? {
        for &n in &cfg.targets {
            reports.push(parseval_check(&model, n, scale, cfg.tail_tol, cfg.node_count(scale), cfg.solver_tol)?);
        }
    }
    let mut w = create(&cfg.out, "parseval.json")?;
    write_json(&mut w, cfg, &reports)?;
    finish(w)?;
    for r in &reports {
        println!("L = {}, n = {}: lhs {:.12e} rhs {:.12e} rel_diff {:.3e}", r.scale, r.n, r.lhs, r.rhs, r.rel_diff);
    }
    Ok(Status::Ok)
}
