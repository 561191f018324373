use std::sync::{Arc, OnceLock};

use hmhf_core::blowup::*;
use hmhf_core::evolution::{tune_t, EvolutionConfig, Perturbation, Shape, TuneConfig};
use hmhf_core::profile::{find_profile, ProfileConfig, ProfileSolution};
use hmhf_core::radial::{GridSpec, Parity, RadialFunction, RadialGrid};

fn grid() -> Arc<RadialGrid> {
    static G: OnceLock<Arc<RadialGrid>> = OnceLock::new();
    G.get_or_init(|| Arc::new(RadialGrid::new(GridSpec::new(30.0, 400, 3.0)).unwrap()))
        .clone()
}

fn profile() -> &'static ProfileSolution {
    static P: OnceLock<ProfileSolution> = OnceLock::new();
    P.get_or_init(|| find_profile(&ProfileConfig::default(), grid()).unwrap())
}

fn bump(norm: f64) -> Perturbation {
    let shape = Shape::GaussianBump {
        center: 2.0,
        width: 1.0,
    };
    Perturbation::with_y_norm(shape, norm, profile(), &grid()).unwrap()
}

#[test]
fn synthetic_gradient_law_is_inverted_exactly() {
    let ts: Vec<f64> = (0..40)
        .map(|k| 0.8 - 0.8 * 10f64.powf(-6.0 * k as f64 / 39.0))
        .collect();
    let gs: Vec<f64> = ts.iter().map(|t| 2.0 * (0.8 - t).powf(-0.5)).collect();
    let f = fit_blowup_time(&ts, &gs, 0).unwrap();
    assert!((f.t_est - 0.8).abs() < 1e-12);
    assert!((f.prefactor - 2.0).abs() < 1e-10);
    assert!((f.free_fit.exponent + 0.5).abs() < 1e-10);
    assert!(!f.free_fit.non_monotone);
    assert!(fit_blowup_time(&ts[..5], &gs[..5], 0).is_err());
}

#[test]
fn profile_data_blows_up_self_similarly_at_one() {
    let p = profile();
    let cfg = PhysicalConfig::default();
    let run = evolve_physical(
        initial_from_profile(p, None, &grid()),
        p.b,
        &[0.5, 0.9],
        &cfg,
    )
    .unwrap();
    assert_eq!(run.status, RunStatus::GradientThreshold);
    assert!(run.history.iter().any(|h| h.refinements > 0));
    let f = fit_run(&run).unwrap();
    assert!((f.t_est - 1.0).abs() < 1e-3);
    assert!((f.free_fit.exponent + 0.5).abs() < 0.01);
    assert!((f.prefactor / p.b - 1.0).abs() < 1e-3);
    for (t, v) in &run.snapshots {
        let g = v.value_at_origin();
        // a blowup-time error δ shifts the ratio by about δ/(2(1 - t))
        assert!(
            (g / (p.b / (1.0 - t).sqrt()) - 1.0).abs() < 1e-3,
            "t={t}: {g}"
        );
    }
    assert_eq!(run.snapshots.len(), 2);
    let umax = run.history.iter().map(|h| h.max_abs_u).fold(0.0, f64::max);
    assert!(umax <= std::f64::consts::PI + 1e-3);
    assert!(run.u().value_at_origin() == 0.0);
}

#[test]
fn blowup_time_converges_under_refinement() {
    let p = profile();
    let t: Vec<f64> = [(200usize, 0.008), (400, 0.004), (800, 0.002)]
        .iter()
        .map(|&(n, theta)| {
            let g = Arc::new(RadialGrid::new(GridSpec::new(30.0, n, 3.0)).unwrap());
            let cfg = PhysicalConfig {
                resolution: n,
                theta,
                ..Default::default()
            };
            fit_run(&evolve_physical(initial_from_profile(p, None, &g), p.b, &[], &cfg).unwrap())
                .unwrap()
                .t_est
        })
        .collect();
    let order = ((t[0] - t[1]) / (t[1] - t[2])).log2();
    assert!(order >= 1.5, "{t:?}");
}

#[test]
fn zero_data_stays_zero() {
    let cfg = PhysicalConfig {
        t_end: 1.0,
        ..Default::default()
    };
    let run = evolve_physical(
        RadialFunction::zeros(grid(), Parity::Even),
        profile().b,
        &[],
        &cfg,
    )
    .unwrap();
    assert_eq!(run.status, RunStatus::EndTime);
    assert_eq!(run.v.max_abs(), 0.0);
    assert!((run.t - 1.0).abs() < 1e-14);
}

#[test]
fn refinement_cap_reports_under_resolved() {
    let p = profile();
    let cfg = PhysicalConfig {
        max_refinements: 1,
        gradient_stop: 1e6,
        ..Default::default()
    };
    let run = evolve_physical(initial_from_profile(p, None, &grid()), p.b, &[], &cfg).unwrap();
    assert_eq!(run.status, RunStatus::UnderResolved);
    assert!(run.t < 1.0);
}

#[test]
fn profile_norms_match_quadrature_oracle() {
    let n = ProfileNorms::of(profile()).unwrap();
    assert!((n.h2 / 23.92996049890628 - 1.0).abs() < 1e-5, "{}", n.h2);
    assert!((n.h4 / 158.9593994321009 - 1.0).abs() < 1e-6, "{}", n.h4);
}

#[test]
fn blowup_speed_is_five_quarters() {
    let sc = blowup_speed_check(profile()).unwrap();
    assert!(
        (sc.late.exponent + 1.25).abs() < 0.05,
        "{}",
        sc.late.exponent
    );
    assert!(sc.early.exponent > -1.25 && sc.early.exponent < -0.25);
    assert!((sc.direct_at_099 / sc.closed_form_at_099 - 1.0).abs() < 1e-6);
    let exact = speed_fit(
        &ProfileNorms {
            h2: 0.0,
            h4: 1.0,
            tail_flag: false,
        },
        [0.9, 0.999],
        20,
    )
    .unwrap();
    assert!((exact.exponent + 1.25).abs() < 1e-12);
}

#[test]
fn physical_and_similarity_descriptions_agree() {
    let p = profile();
    let h = bump(1e-3);
    let evo = EvolutionConfig {
        s_end: 6.0,
        ..Default::default()
    };
    let (rep, traj) = tune_t(&h, p, &grid(), &evo, &TuneConfig::default()).unwrap();
    let run = evolve_physical(
        initial_from_profile(p, Some(&h), &grid()),
        p.b,
        &[],
        &PhysicalConfig::default(),
    )
    .unwrap();
    let fit = fit_run(&run).unwrap();
    assert!((fit.t_est - rep.t_h).abs() < 1e-2);
    // both methods resolve T_h far better than the stated tolerance
    assert!((fit.t_est - rep.t_h).abs() < 1e-4);
    let norms = ProfileNorms::of(p).unwrap();
    let cr = convergence_report(&traj, rep.t_h, rep.omega_fit.rate, &norms, [1.0, 4.0]).unwrap();
    assert!(cr.decreasing);
    let slope = cr.slope.unwrap();
    assert!(
        slope > 0.0 && (slope / rep.omega_fit.rate - 1.0).abs() < 0.2,
        "{slope}"
    );
}

#[test]
fn convergence_ratio_is_linear_in_h() {
    let p = profile();
    let evo = EvolutionConfig {
        s_end: 5.0,
        ..Default::default()
    };
    let norms = ProfileNorms::of(p).unwrap();
    let ratio = |n: f64| {
        let (rep, traj) = tune_t(&bump(n), p, &grid(), &evo, &TuneConfig::default()).unwrap();
        convergence_report(&traj, rep.t_h, rep.omega_fit.rate, &norms, [1.0, 4.0]).unwrap()
    };
    let (a, b) = (ratio(5e-4), ratio(1e-3));
    for (x, y) in a.points.iter().zip(&b.points).skip(10) {
        assert!(
            (y.ratio / x.ratio - 2.0).abs() < 0.1,
            "{} {}",
            x.ratio,
            y.ratio
        );
    }
    let zero = Perturbation {
        scale: 0.0,
        ..bump(1e-3)
    };
    let (rep, traj) = tune_t(&zero, p, &grid(), &evo, &TuneConfig::default()).unwrap();
    let cr = convergence_report(&traj, rep.t_h, 0.5, &norms, [1.0, 4.0]).unwrap();
    assert!(cr.points.iter().all(|x| x.ratio == 0.0));
}

#[test]
fn untuned_trajectory_is_rejected() {
    let p = profile();
    let evo = EvolutionConfig {
        s_end: 15.0,
        ..Default::default()
    };
    let ev = hmhf_core::evolution::Evolver::new(p, grid(), &evo).unwrap();
    let traj = ev
        .evolve(hmhf_core::evolution::make_initial(&bump(1e-3), 1.01, p, &grid()).unwrap())
        .unwrap();
    assert!(traj.escape.is_some());
    let norms = ProfileNorms::of(p).unwrap();
    assert!(convergence_report(&traj, 1.01, 0.5, &norms, [1.0, 4.0]).is_err());
}

#[test]
fn run_history_csv() {
    let p = profile();
    let cfg = PhysicalConfig {
        t_end: 0.2,
        ..Default::default()
    };
    let run = evolve_physical(initial_from_profile(p, None, &grid()), p.b, &[], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    run.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,gradient,max_abs_u,norm_Y,refinements\n"));
    assert_eq!(text.lines().count(), run.history.len() + 1);
}
