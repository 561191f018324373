//! Acceptance suite: twelve criteria, one PASS/FAIL line each. Runs without
//! the libtest harness and exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use hmhf_core::blowup::{
    blowup_speed_check, convergence_report, evolve_physical, fit_run, initial_from_profile,
    PhysicalConfig, ProfileNorms,
};
use hmhf_core::evolution::{
    make_initial, measure_decay, tune_t, EvolutionConfig, Evolver, LinearPart, Perturbation, Shape,
    TuneConfig,
};
use hmhf_core::profile::{find_profile, ProfileConfig, ProfileSolution};
use hmhf_core::radial::{
    inner_l2, lambda_op, laplacian5, norm_l2, norm_x, GridSpec, NormOptions, Parity,
    RadialFunction, RadialGrid,
};
use hmhf_core::spectrum::{
    assemble_operator, eigenpairs, free_kernel_apply, spectral_gap, verify_translation_mode,
    EigenPair,
};

type Outcome = Result<(bool, String), String>;

fn grid(y_max: f64, n: usize, stretch: f64) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(GridSpec::new(y_max, n, stretch)).unwrap())
}

struct Setup {
    grid: Arc<RadialGrid>,
    profile: ProfileSolution,
    profile_seconds: f64,
    pairs: Vec<EigenPair>,
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn bump(s: &Setup, norm: f64) -> Result<Perturbation, String> {
    let shape = Shape::GaussianBump {
        center: 2.0,
        width: 1.0,
    };
    Perturbation::with_y_norm(shape, norm, &s.profile, &s.grid).map_err(e)
}

fn c1_profile(s: &Setup) -> Outcome {
    let p = &s.profile;
    let width = p.bracket[1] - p.bracket[0];
    // ODE defect of the samples on a grid whose first node is near 1e-3
    let fine = grid(30.0, 400, 6.0);
    let (f, fp) = p.f_on(&fine);
    let resampled = ProfileSolution::from_samples(p.b, p.f_infinity, f, fp).map_err(e)?;
    let residual = p.residual.max(resampled.ode_defect());
    let first = fine.nodes()[0];
    let dense_min = (0..=3000)
        .map(|k| 1e-3 + (30.0 - 1e-3) * k as f64 / 3000.0)
        .map(|y| p.eval(y).0)
        .fold(f64::MAX, f64::min);
    let positive = dense_min > 0.0 && p.f.values().iter().all(|v| *v > 0.0);
    let tail = p.tail_fit().exponent;
    let ok = width <= 1e-8
        && residual <= 1e-8
        && first <= 1.2e-3
        && positive
        && (tail + 2.0).abs() <= 0.2
        && s.profile_seconds <= 60.0;
    Ok((
        ok,
        format!(
            "bracket {width:.1e}, residual {residual:.1e} from y={first:.2e}, min f0 {dense_min:.4}, tail exponent {tail:.4}, {:.2}s",
            s.profile_seconds
        ),
    ))
}

fn c2_free_spectrum(s: &Setup) -> Outcome {
    let ev = eigenpairs(&assemble_operator(None, s.grid.clone()).map_err(e)?, 3).map_err(e)?;
    let err = ev
        .iter()
        .enumerate()
        .map(|(k, p)| (p.lambda + 0.5 + k as f64).abs())
        .fold(0.0, f64::max);
    Ok((
        err <= 1e-6,
        format!(
            "max |lambda_k + 1/2 + k| = {err:.2e} at N = {}",
            s.grid.len()
        ),
    ))
}

fn c3_unstable(s: &Setup) -> Outcome {
    let a = assemble_operator(Some(&s.profile), s.grid.clone()).map_err(e)?;
    let l1 = s.pairs[0].lambda;
    let tm = verify_translation_mode(&a, &s.profile, Some(&s.pairs[0]));
    let cos = tm.alignment.unwrap_or(0.0);
    let ok = (l1 - 1.0).abs() <= 1e-4 && cos >= 0.9999 && tm.residual <= 1e-5;
    Ok((
        ok,
        format!(
            "lambda_1 = {l1:.10}, cosine {cos:.12}, translation residual {:.2e}",
            tm.residual
        ),
    ))
}

fn c4_gap(s: &Setup) -> Outcome {
    let c0 = spectral_gap(&s.pairs).ok_or("no gap")?;
    let fine = eigenpairs(
        &assemble_operator(Some(&s.profile), grid(30.0, 800, 3.0)).map_err(e)?,
        6,
    )
    .map_err(e)?;
    let c0_fine = spectral_gap(&fine).ok_or("no gap")?;
    let short = eigenpairs(
        &assemble_operator(Some(&s.profile), grid(20.0, 400, 3.0)).map_err(e)?,
        6,
    )
    .map_err(e)?;
    let c0_short = spectral_gap(&short).ok_or("no gap")?;
    // eigenvalues that agree under refinement count as resolved
    let nonneg = s
        .pairs
        .iter()
        .zip(&fine)
        .filter(|(a, b)| (a.lambda - b.lambda).abs() < 1e-3 && a.lambda >= 0.0)
        .count();
    let ok = s.pairs[1].lambda < 0.0
        && (c0 - c0_fine).abs() <= 1e-3
        && (c0 - c0_short).abs() <= 1e-3
        && nonneg == 1;
    Ok((
        ok,
        format!(
            "lambda_2 = {:.8}, c0 = {c0:.8} (N=800: {:+.1e}, Y_max=20: {:+.1e}), resolved eigenvalues >= 0: {nonneg}",
            s.pairs[1].lambda,
            c0_fine - c0,
            c0_short - c0
        ),
    ))
}

fn c5_kernel(s: &Setup) -> Outcome {
    let w0 = RadialFunction::from_fn(s.grid.clone(), Parity::Even, |y| (-y * y).exp());
    let exact = free_kernel_apply(&w0, 1.0).map_err(e)?;
    let mut worst: f64 = 0.0;
    for (part, factor) in [
        (LinearPart::Principal, 1.0),
        (LinearPart::Free, (-0.5f64).exp()),
    ] {
        let cfg = EvolutionConfig {
            nonlinear: false,
            linear: part,
            s_end: 1.0,
            ds: 0.005,
            halt_on_escape: false,
            ..Default::default()
        };
        let got = Evolver::new(&s.profile, s.grid.clone(), &cfg)
            .map_err(e)?
            .evolve(w0.clone())
            .map_err(e)?
            .last
            .w;
        let ex = exact.scale(factor);
        worst = worst.max(got.axpy(-1.0, &ex).map_err(e)?.max_abs() / ex.max_abs());
    }
    Ok((
        worst <= 1e-4,
        format!("max relative error at s = 1: {worst:.2e}"),
    ))
}

fn c6_equilibrium(s: &Setup) -> Outcome {
    let cfg = EvolutionConfig {
        s_end: 3.0,
        halt_on_escape: false,
        ..Default::default()
    };
    let ev = Evolver::new(&s.profile, s.grid.clone(), &cfg).map_err(e)?;
    let tr = ev
        .evolve(RadialFunction::zeros(s.grid.clone(), Parity::Even))
        .map_err(e)?;
    let drift = tr.samples.iter().map(|x| x.norm_rho).fold(0.0, f64::max);
    let lin_cfg = EvolutionConfig {
        nonlinear: false,
        s_end: 1.0,
        ds: 0.005,
        ..cfg
    };
    let lin = Evolver::new(&s.profile, s.grid.clone(), &lin_cfg).map_err(e)?;
    let tr = lin.evolve(lin.psi1().clone()).map_err(e)?;
    let growth = tr.samples.last().ok_or("empty")?.a / tr.samples[0].a;
    let rel = (growth / 1f64.exp() - 1.0).abs();
    Ok((
        drift <= 1e-6 && rel <= 1e-4,
        format!(
            "max ||w||_rho from zero data {drift:.1e}; psi1 growth a(1)/a(0) = e * (1 {rel:+.1e})"
        ),
    ))
}

fn c7_tuning(
    s: &Setup,
    tuned: &mut Option<(f64, f64, hmhf_core::evolution::Trajectory)>,
) -> Outcome {
    let start = Instant::now();
    let h = bump(s, 1e-3)?;
    let evo = EvolutionConfig {
        s_end: 6.0,
        ..Default::default()
    };
    let tcfg = TuneConfig::default();
    let (rep, traj) = tune_t(&h, &s.profile, &s.grid, &evo, &tcfg).map_err(e)?;
    let secs = start.elapsed().as_secs_f64();
    let c0 = spectral_gap(&s.pairs).ok_or("no gap")?;
    // linear rate of the same data with its unstable component removed
    let lin_cfg = EvolutionConfig {
        nonlinear: false,
        halt_on_escape: false,
        s_end: tcfg.window[1] + 1.0,
        ..Default::default()
    };
    let lin = Evolver::new(&s.profile, s.grid.clone(), &lin_cfg).map_err(e)?;
    let w0 = make_initial(&h, rep.t_h, &s.profile, &s.grid).map_err(e)?;
    let w0 = w0.axpy(-lin.amplitude(&w0), lin.psi1()).map_err(e)?;
    let linear = measure_decay(&lin.evolve(w0).map_err(e)?, tcfg.window)
        .map_err(e)?
        .rate;
    let reference = c0.min(linear);
    let omega = rep.omega_fit.rate;
    let run_cfg = EvolutionConfig {
        s_end: tcfg.s_end,
        ..evo
    };
    let ev = Evolver::new(&s.profile, s.grid.clone(), &run_cfg).map_err(e)?;
    let off = 10.0 * tcfg.tol;
    let sign = |t: f64| -> Result<f64, String> {
        Ok(ev
            .evolve(make_initial(&h, t, &s.profile, &s.grid).map_err(e)?)
            .map_err(e)?
            .escape_sign())
    };
    let (lo, hi) = (sign(rep.t_h - off)?, sign(rep.t_h + off)?);
    let ok = (rep.t_h - 1.0).abs() <= 1e-2
        && omega > 0.0
        && (omega / reference - 1.0).abs() <= 0.25
        && lo * hi < 0.0
        && secs <= 600.0;
    *tuned = Some((rep.t_h, omega, traj));
    Ok((
        ok,
        format!(
            "T_h = {:.10}, omega = {omega:.4} vs min(c0 = {c0:.4}, linear = {linear:.4}), escape signs {lo:+}/{hi:+}, {secs:.1}s",
            rep.t_h
        ),
    ))
}

fn c8_speed(s: &Setup) -> Outcome {
    let sc = blowup_speed_check(&s.profile).map_err(e)?;
    let x = sc.late.exponent;
    Ok((
        (x + 1.25).abs() <= 0.05,
        format!(
            "fitted exponent {x:.4} on t in [0.9, 0.999] (A = {:.4}, B = {:.4})",
            sc.norms.h2, sc.norms.h4
        ),
    ))
}

fn c9_consistency(
    s: &Setup,
    tuned: &Option<(f64, f64, hmhf_core::evolution::Trajectory)>,
) -> Outcome {
    let (t_h, omega, traj) = tuned
        .as_ref()
        .ok_or("criterion 7 did not produce a tuned run")?;
    let h = bump(s, 1e-3)?;
    let run = evolve_physical(
        initial_from_profile(&s.profile, Some(&h), &s.grid),
        s.profile.b,
        &[],
        &PhysicalConfig::default(),
    )
    .map_err(e)?;
    let fit = fit_run(&run).map_err(e)?;
    let norms = ProfileNorms::of(&s.profile).map_err(e)?;
    let cr = convergence_report(traj, *t_h, *omega, &norms, [1.0, 4.0]).map_err(e)?;
    let slope = cr.slope.unwrap_or(f64::NAN);
    let ok = (fit.t_est - t_h).abs() <= 1e-2 && cr.decreasing && slope > 0.0;
    Ok((
        ok,
        format!(
            "T_est - T_h = {:+.2e} ({:?}), ratio decreasing: {}, exponent {slope:.4}",
            fit.t_est - t_h,
            run.status,
            cr.decreasing
        ),
    ))
}

fn c10_nonlinearity(s: &Setup) -> Outcome {
    let ev = Evolver::new(&s.profile, s.grid.clone(), &EvolutionConfig::default()).map_err(e)?;
    let shapes = [
        RadialFunction::from_fn(s.grid.clone(), Parity::Even, |y| (-y * y).exp()),
        s.profile.f_prime.clone(),
        RadialFunction::from_fn(s.grid.clone(), Parity::Even, |y| {
            (1.0 - 0.5 * y * y) * (-0.3 * y * y).exp()
        }),
    ];
    let mut worst: f64 = 0.0;
    for phi in &shapes {
        let q: Vec<f64> = (0..=8)
            .map(|k| 10f64.powf(-4.0 + 0.25 * k as f64))
            .map(|eps| {
                let n = phi.with_values(ev.nonlinear(phi.scale(eps).values()));
                norm_x(&n, &NormOptions::default())
                    .map(|x| x.value / (eps * eps))
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let max = q.iter().cloned().fold(f64::MIN, f64::max);
        let min = q.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max(max / min - 1.0);
    }
    Ok((
        worst <= 0.05,
        format!("max spread of ||N(eps phi)||_X / eps^2 over three shapes: {worst:.2e}"),
    ))
}

fn c11_calculus(s: &Setup) -> Outcome {
    let mut comm: f64 = 0.0;
    let mut quad: f64 = 0.0;
    for a in [1.0, 0.3, 2.0] {
        let f = RadialFunction::from_fn(s.grid.clone(), Parity::Even, |y| (-a * y * y).exp());
        let df = laplacian5(&f).map_err(e)?;
        let dl = laplacian5(&lambda_op(&f).map_err(e)?).map_err(e)?;
        let ld = lambda_op(&df).map_err(e)?;
        let defect = dl.axpy(-1.0, &ld).map_err(e)?.axpy(-1.0, &df).map_err(e)?;
        comm = comm.max(norm_l2(&defect) / norm_l2(&df));
        let lhs = -inner_l2(&ld, &df).map_err(e)?;
        let rhs = 0.75 * norm_l2(&df).powi(2);
        quad = quad.max((lhs - rhs).abs() / rhs);
    }
    Ok((
        comm <= 1e-6 && quad <= 1e-6,
        format!("commutator defect {comm:.1e}, quadratic form defect {quad:.1e}"),
    ))
}

fn hashes(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(e)?;
    let m: serde_json::Value = serde_json::from_str(&text).map_err(e)?;
    Ok(m["files"]
        .as_array()
        .ok_or("manifest without files")?
        .iter()
        .map(|f| {
            (
                f["path"].as_str().unwrap_or("").to_string(),
                f["sha256"].as_str().unwrap_or("").to_string(),
            )
        })
        .collect())
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hmhf"))
            .args(["verify", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .map_err(e)?;
        if !status.status.success() {
            return Ok((false, format!("verify exited with {}", status.status)));
        }
        runs.push(hashes(&out)?);
    }
    let same = !runs[0].is_empty() && runs[0] == runs[1];
    Ok((
        same,
        format!(
            "{} artifact hashes compared, identical: {same}",
            runs[0].len()
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let g = grid(30.0, 400, 3.0);
    let t = Instant::now();
    let profile = find_profile(&ProfileConfig::default(), g.clone()).expect("profile");
    let profile_seconds = t.elapsed().as_secs_f64();
    let pairs = eigenpairs(
        &assemble_operator(Some(&profile), g.clone()).expect("assembly"),
        6,
    )
    .expect("eigenpairs");
    let s = Setup {
        grid: g,
        profile,
        profile_seconds,
        pairs,
    };
    let mut tuned = None;
    let results: Vec<(&str, Outcome)> = vec![
        ("profile existence and quality", c1_profile(&s)),
        ("free-operator spectrum", c2_free_spectrum(&s)),
        ("unstable eigenvalue", c3_unstable(&s)),
        ("spectral gap", c4_gap(&s)),
        ("kernel oracle", c5_kernel(&s)),
        ("equilibrium and instability", c6_equilibrium(&s)),
        ("T-tuning", c7_tuning(&s, &mut tuned)),
        ("blowup speed", c8_speed(&s)),
        (
            "physical/similarity consistency",
            c9_consistency(&s, &tuned),
        ),
        ("nonlinearity smallness", c10_nonlinearity(&s)),
        ("calculus identities", c11_calculus(&s)),
        ("determinism", c12_determinism()),
    ];
    let mut failed = 0;
    for (k, (name, r)) in results.iter().enumerate() {
        let (ok, detail) = match r {
            Ok((ok, d)) => (*ok, d.clone()),
            Err(err) => (false, format!("error: {err}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
