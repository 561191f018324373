//! Invariant suite: every numerical property the solvers are expected to
//! satisfy, evaluated on one grid and reported as pass/fail checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blowup::{
    blowup_speed_check, convergence_report, evolve_physical, fit_blowup_time, fit_run,
    initial_from_profile, PhysicalConfig, ProfileNorms,
};
use crate::error::{invalid, Result};
use crate::evolution::{
    make_initial, measure_decay, tune_t, EvolutionConfig, Evolver, LinearPart, Perturbation, Shape,
    SimilarityState, TuneConfig,
};
use crate::profile::{find_profile, ProfileConfig, ProfileSolution};
use crate::radial::{
    divide_by_y, hardy_ratio, inner_l2, inner_sigma, lambda_op, laplacian5, norm_l2, norm_rho,
    norm_x, GridSpec, NormOptions, Parity, RadialFunction, RadialGrid,
};
use crate::spectrum::{
    assemble_operator, eigenpairs, free_kernel_apply, spectral_gap, verify_translation_mode,
    EigenPair,
};
use crate::SPHERE_AREA;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    #[serde(rename = "Y_max")]
    pub y_max: f64,
    pub resolution: usize,
    pub stretch: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            y_max: 30.0,
            resolution: 400,
            stretch: 3.0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 200 {
            return Err(invalid(
                "resolution",
                self.resolution,
                "must be at least 200 for the invariant suite",
            ));
        }
        if !(self.y_max >= 20.0 && self.y_max <= 50.0) {
            return Err(invalid(
                "Y_max",
                self.y_max,
                "must lie in [20, 50] for the invariant suite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= tol,
            value,
            tolerance: tol,
            detail: format!("|{value:.10e} - {target:.10e}| <= {tol:e}"),
        }
    }

    fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= tol,
            value,
            tolerance: tol,
            detail: format!("{value:.6e} <= {tol:e}"),
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= bound,
            value,
            tolerance: bound,
            detail: format!("{value:.10e} >= {bound:e}"),
        }
    }

    fn holds(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            tolerance: 0.0,
            detail,
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self::holds(name, false, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub grid: GridSpec,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Ctx {
    cfg: VerifyConfig,
    grid: Arc<RadialGrid>,
    p: ProfileSolution,
    pairs: Vec<EigenPair>,
}

impl Ctx {
    fn grid_with(&self, y_max: f64, resolution: usize) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(GridSpec::new(
            y_max,
            resolution,
            self.cfg.stretch,
        ))?))
    }

    fn gaussian(&self, a: f64) -> RadialFunction {
        RadialFunction::from_fn(self.grid.clone(), Parity::Even, |y| (-a * y * y).exp())
    }

    /// Random even combination of Gaussians.
    fn random_shape(&self, rng: &mut ChaCha8Rng) -> RadialFunction {
        let terms: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.2..2.0),
                    rng.random_range(0.0..3.0),
                )
            })
            .collect();
        RadialFunction::from_fn(self.grid.clone(), Parity::Even, |y| {
            terms
                .iter()
                .map(|(c, a, m)| c * ((-a * (y - m).powi(2)).exp() + (-a * (y + m).powi(2)).exp()))
                .sum()
        })
    }
}

type Group = fn(&Ctx) -> Result<Vec<Check>>;

fn group_profile(c: &Ctx) -> Result<Vec<Check>> {
    let p = &c.p;
    let tail = p.tail_fit();
    let positive = p.f.values().iter().all(|&f| f > 0.0);
    Ok(vec![
        Check::at_most("profile.bracket_width", p.bracket[1] - p.bracket[0], 1e-8),
        Check::at_most("profile.ode_residual", p.residual, 1e-8),
        Check::holds("profile.positive", positive, "f0 > 0 on all nodes".into()),
        Check::within("profile.tail_exponent", tail.exponent, -2.0, 0.2),
        Check::holds(
            "profile.monotone_bracket",
            p.monotone_bracket,
            "single sign flip inside the bracket".into(),
        ),
    ])
}

fn group_spectrum(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let free = eigenpairs(&assemble_operator(None, c.grid.clone())?, 3)?;
    for (k, e) in free.iter().enumerate() {
        out.push(Check::within(
            &format!("spectrum.free_eigenvalue_{k}"),
            e.lambda,
            -0.5 - k as f64,
            1e-6,
        ));
    }
    let a = assemble_operator(Some(&c.p), c.grid.clone())?;
    out.push(Check::at_most(
        "spectrum.symmetry_defect",
        a.symmetry_defect(),
        1e-10,
    ));
    let e = &c.pairs;
    out.push(Check::within(
        "spectrum.unstable_eigenvalue",
        e[0].lambda,
        1.0,
        1e-4,
    ));
    let tm = verify_translation_mode(&a, &c.p, Some(&e[0]));
    out.push(Check::at_most(
        "spectrum.translation_residual",
        tm.residual,
        1e-5,
    ));
    out.push(Check::at_least(
        "spectrum.translation_alignment",
        tm.alignment.unwrap_or(0.0),
        0.9999,
    ));
    out.push(Check::at_most(
        "spectrum.second_eigenvalue_negative",
        e[1].lambda,
        -1e-3,
    ));
    let nonneg = e
        .iter()
        .filter(|x| x.lambda >= 0.0 && x.residual < 1e-6)
        .count();
    out.push(Check::holds(
        "spectrum.single_nonnegative_eigenvalue",
        nonneg == 1,
        format!("{nonneg} resolved eigenvalues in [0, inf)"),
    ));
    let c0 = spectral_gap(e).unwrap_or(f64::NAN);
    let fine = c.grid_with(c.cfg.y_max, 2 * c.cfg.resolution)?;
    let c0_fine =
        spectral_gap(&eigenpairs(&assemble_operator(Some(&c.p), fine)?, 4)?).unwrap_or(f64::NAN);
    out.push(Check::within("spectrum.gap_resolution", c0_fine, c0, 1e-3));
    let short = c.grid_with(20.0, c.cfg.resolution)?;
    let c0_short =
        spectral_gap(&eigenpairs(&assemble_operator(Some(&c.p), short)?, 4)?).unwrap_or(f64::NAN);
    out.push(Check::within("spectrum.gap_domain", c0_short, c0, 1e-3));
    // ρ-orthonormality of the computed eigenvectors
    let mut orth: f64 = 0.0;
    for i in 0..e.len() {
        for j in 0..=i {
            let d = a.inner(e[i].phi.values(), e[j].phi.values()) - if i == j { 1.0 } else { 0.0 };
            orth = orth.max(d.abs());
        }
    }
    out.push(Check::at_most("spectrum.orthonormality", orth, 1e-10));
    Ok(out)
}

fn group_evolution_linear(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let base = EvolutionConfig {
        nonlinear: false,
        s_end: 1.0,
        ds: 0.005,
        halt_on_escape: false,
        ..Default::default()
    };
    // kernel oracle for Δ - Λ
    let free = Evolver::new(
        &c.p,
        c.grid.clone(),
        &EvolutionConfig {
            linear: LinearPart::Free,
            ..base
        },
    )?;
    let w0 = c.gaussian(1.0);
    let got = free.evolve(w0.clone())?.last.w;
    let exact = free_kernel_apply(&w0, 1.0)?.scale((-0.5f64).exp());
    let err = got.axpy(-1.0, &exact)?.max_abs() / exact.max_abs();
    out.push(Check::at_most("evolution.kernel_oracle", err, 1e-4));
    // equilibrium
    let full = Evolver::new(
        &c.p,
        c.grid.clone(),
        &EvolutionConfig {
            nonlinear: true,
            s_end: 3.0,
            ..base
        },
    )?;
    let zero = RadialFunction::zeros(c.grid.clone(), Parity::Even);
    let eq = full.evolve(zero)?;
    let worst = eq.samples.iter().map(|x| x.norm_rho).fold(0.0, f64::max);
    out.push(Check::at_most("evolution.equilibrium", worst, 1e-6));
    // unstable mode growth
    let lin = Evolver::new(&c.p, c.grid.clone(), &base)?;
    let tr = lin.evolve(lin.psi1().clone())?;
    let ratio = tr.samples.last().map_or(f64::NAN, |x| x.a) / tr.samples[0].a;
    out.push(Check::within(
        "evolution.psi1_growth",
        ratio / 1f64.exp(),
        1.0,
        1e-4,
    ));
    let st = SimilarityState {
        s: 0.0,
        w: lin.psi1().clone(),
    };
    let one = lin.step(&st);
    let per_step = lin.amplitude(&one.w) / lin.amplitude(&st.w);
    out.push(Check::within(
        "evolution.psi1_step_factor",
        per_step,
        base.ds.exp(),
        1e-6,
    ));
    // projection consistency against the eigensolver
    let a = assemble_operator(Some(&c.p), c.grid.clone())?;
    let phi = &c.pairs[0].phi;
    let mut rng = ChaCha8Rng::seed_from_u64(c.cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let w = c.random_shape(&mut rng);
        let via_sigma = lin.amplitude(&w);
        let sign = a.inner(phi.values(), c.p.f_prime.values()).signum();
        let via_eigen = sign * SPHERE_AREA.sqrt() * a.inner(w.values(), phi.values());
        worst = worst.max((via_sigma - via_eigen).abs());
    }
    out.push(Check::at_most(
        "evolution.projection_consistency",
        worst,
        1e-8,
    ));
    // free decay rate
    let decay = Evolver::new(
        &c.p,
        c.grid.clone(),
        &EvolutionConfig {
            linear: LinearPart::Free,
            s_end: 8.0,
            ..base
        },
    )?;
    let rate = measure_decay(&decay.evolve(w0)?, [4.0, 8.0])?;
    out.push(Check::within(
        "evolution.free_decay_rate",
        rate.rate,
        0.5,
        1e-3,
    ));
    Ok(out)
}

fn group_evolution_nonlinear(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ev = Evolver::new(&c.p, c.grid.clone(), &EvolutionConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.cfg.seed ^ 0x9e37_79b9);
    let shapes = [
        c.gaussian(1.0),
        c.p.f_prime.clone(),
        c.random_shape(&mut rng),
    ];
    for (k, phi) in shapes.iter().enumerate() {
        let q: Vec<f64> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&e| {
                let n = phi.with_values(ev.nonlinear(phi.scale(e).values()));
                norm_x(&n, &NormOptions::default())
                    .map(|x| x.value / (e * e))
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let spread = (q.iter().cloned().fold(f64::MIN, f64::max)
            - q.iter().cloned().fold(f64::MAX, f64::min))
            / q[0];
        out.push(Check::at_most(
            &format!("evolution.nonlinear_quadratic_{k}"),
            spread,
            0.05,
        ));
    }
    // step-size order
    let h = Perturbation::with_y_norm(
        Shape::GaussianBump {
            center: 2.0,
            width: 1.0,
        },
        0.3,
        &c.p,
        &c.grid,
    )?;
    let w0 = make_initial(&h, 1.0, &c.p, &c.grid)?;
    let finals: Vec<RadialFunction> = [0.04, 0.02, 0.01]
        .par_iter()
        .map(|&ds| {
            let cfg = EvolutionConfig {
                ds,
                s_end: 1.0,
                halt_on_escape: false,
                ..Default::default()
            };
            Ok(Evolver::new(&c.p, c.grid.clone(), &cfg)?
                .evolve(w0.clone())?
                .last
                .w)
        })
        .collect::<Result<_>>()?;
    let d1 = finals[0].axpy(-1.0, &finals[1])?.max_abs();
    let d2 = finals[1].axpy(-1.0, &finals[2])?.max_abs();
    out.push(Check::at_least(
        "evolution.step_order",
        (d1 / d2).log2(),
        1.7,
    ));
    // Taylor expansion of the data map in T
    let zero = Perturbation::unit(Shape::Psi1Like)?;
    let zero = Perturbation { scale: 0.0, ..zero };
    let eps = 1e-4;
    let u = make_initial(&zero, 1.0 + eps, &c.p, &c.grid)?;
    let lead = c.p.f_prime.scale(0.5 * eps);
    let rem = u.axpy(-1.0, &lead)?.max_abs() / lead.max_abs();
    out.push(Check::at_most("evolution.data_map_taylor", rem, 10.0 * eps));
    Ok(out)
}

fn group_tuning(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let h = Perturbation::with_y_norm(
        Shape::GaussianBump {
            center: 2.0,
            width: 1.0,
        },
        1e-3,
        &c.p,
        &c.grid,
    )?;
    let evo = EvolutionConfig {
        s_end: 8.0,
        ..Default::default()
    };
    let tcfg = TuneConfig::default();
    let (rep, traj) = tune_t(&h, &c.p, &c.grid, &evo, &tcfg)?;
    out.push(Check::at_most(
        "tune.T_h_near_one",
        (rep.t_h - 1.0).abs(),
        1e-2,
    ));
    let c0 = spectral_gap(&c.pairs).unwrap_or(f64::NAN);
    let linear = linear_transverse_rate(c, &h, rep.t_h, tcfg.window)?;
    let reference = c0.min(linear);
    out.push(Check::at_least(
        "tune.decay_positive",
        rep.omega_fit.rate,
        1e-6,
    ));
    out.push(Check::within(
        "tune.decay_vs_gap",
        rep.omega_fit.rate / reference,
        1.0,
        0.25,
    ));
    let run_cfg = EvolutionConfig {
        s_end: tcfg.s_end,
        ..evo
    };
    let ev = Evolver::new(&c.p, c.grid.clone(), &run_cfg)?;
    let off = 10.0 * tcfg.tol;
    let lo = ev
        .evolve(make_initial(&h, rep.t_h - off, &c.p, &c.grid)?)?
        .escape_sign();
    let hi = ev
        .evolve(make_initial(&h, rep.t_h + off, &c.p, &c.grid)?)?
        .escape_sign();
    out.push(Check::holds(
        "tune.opposite_escape_signs",
        lo * hi < 0.0,
        format!("signs {lo:+} / {hi:+} at T_h -/+ {off:e}"),
    ));
    // physical run with the same data
    let pcfg = PhysicalConfig {
        r_max: c.cfg.y_max,
        resolution: c.cfg.resolution,
        stretch: c.cfg.stretch,
        ..Default::default()
    };
    let run = evolve_physical(
        initial_from_profile(&c.p, Some(&h), &c.grid),
        c.p.b,
        &[],
        &pcfg,
    )?;
    let fit = fit_run(&run)?;
    out.push(Check::within(
        "blowup.T_est_vs_T_h",
        fit.t_est,
        rep.t_h,
        1e-2,
    ));
    let umax = run.history.iter().map(|x| x.max_abs_u).fold(0.0, f64::max);
    out.push(Check::at_most(
        "blowup.range_bound",
        umax,
        std::f64::consts::PI + 1e-3,
    ));
    let norms = ProfileNorms::of(&c.p)?;
    let cr = convergence_report(&traj, rep.t_h, rep.omega_fit.rate, &norms, tcfg.window)?;
    out.push(Check::holds(
        "blowup.ratio_decreasing",
        cr.decreasing,
        "ratio strictly decreasing on window".into(),
    ));
    let slope = cr.slope.unwrap_or(f64::NAN);
    out.push(Check::at_least(
        "blowup.ratio_exponent_positive",
        slope,
        1e-6,
    ));
    out.push(Check::within(
        "blowup.ratio_exponent_vs_omega",
        slope / rep.omega_fit.rate,
        1.0,
        0.2,
    ));
    Ok(out)
}

/// Decay rate of the linearized flow from the tuned data with its
/// unstable component removed.
fn linear_transverse_rate(c: &Ctx, h: &Perturbation, t_h: f64, window: [f64; 2]) -> Result<f64> {
    let cfg = EvolutionConfig {
        nonlinear: false,
        halt_on_escape: false,
        s_end: window[1] + 1.0,
        ..Default::default()
    };
    let ev = Evolver::new(&c.p, c.grid.clone(), &cfg)?;
    let w0 = make_initial(h, t_h, &c.p, &c.grid)?;
    let w0 = w0.axpy(-ev.amplitude(&w0), ev.psi1())?;
    Ok(measure_decay(&ev.evolve(w0)?, window)?.rate)
}

fn group_blowup(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let sc = blowup_speed_check(&c.p)?;
    out.push(Check::within(
        "blowup.speed_exponent",
        sc.late.exponent,
        -1.25,
        0.05,
    ));
    out.push(Check::holds(
        "blowup.early_window_mixed",
        sc.early.exponent > -1.25 && sc.early.exponent < -0.25,
        format!("early exponent {:.6}", sc.early.exponent),
    ));
    let rel = (sc.direct_at_099 - sc.closed_form_at_099).abs() / sc.closed_form_at_099;
    out.push(Check::at_most("blowup.scaling_identity", rel, 1e-6));
    // exact model inversion
    let ts: Vec<f64> = (0..40)
        .map(|k| 0.8 - 0.8 * 10f64.powf(-6.0 * k as f64 / 39.0))
        .collect();
    let gs: Vec<f64> = ts.iter().map(|t| 2.0 * (0.8 - t).powf(-0.5)).collect();
    let f = fit_blowup_time(&ts, &gs, 0)?;
    out.push(Check::within("blowup.synthetic_T", f.t_est, 0.8, 1e-10));
    out.push(Check::within("blowup.synthetic_C", f.prefactor, 2.0, 1e-9));
    // pure profile: exact self-similar blowup at T = 1
    let runs: Vec<Result<(f64, f64)>> = [(200usize, 0.008), (400, 0.004), (800, 0.002)]
        .par_iter()
        .map(|&(n, theta)| {
            let g = Arc::new(RadialGrid::new(GridSpec::new(
                c.cfg.y_max,
                n,
                c.cfg.stretch,
            ))?);
            let cfg = PhysicalConfig {
                r_max: c.cfg.y_max,
                resolution: n,
                stretch: c.cfg.stretch,
                theta,
                ..Default::default()
            };
            let run = evolve_physical(initial_from_profile(&c.p, None, &g), c.p.b, &[], &cfg)?;
            let f = fit_run(&run)?;
            Ok((f.t_est, f.free_fit.exponent))
        })
        .collect();
    let runs: Vec<(f64, f64)> = runs.into_iter().collect::<Result<_>>()?;
    out.push(Check::within("blowup.profile_T_est", runs[1].0, 1.0, 1e-3));
    out.push(Check::within(
        "blowup.profile_gradient_exponent",
        runs[1].1,
        -0.5,
        0.01,
    ));
    let order = ((runs[0].0 - runs[1].0) / (runs[1].0 - runs[2].0))
        .abs()
        .log2();
    out.push(Check::at_least("blowup.T_est_refinement_order", order, 1.5));
    // zero data stays zero
    let zero = RadialFunction::zeros(c.grid.clone(), Parity::Even);
    let run = evolve_physical(
        zero,
        c.p.b,
        &[],
        &PhysicalConfig {
            r_max: c.cfg.y_max,
            resolution: c.cfg.resolution,
            stretch: c.cfg.stretch,
            t_end: 1.0,
            ..Default::default()
        },
    )?;
    out.push(Check::at_most("blowup.zero_data", run.v.max_abs(), 0.0));
    Ok(out)
}

fn group_calculus(c: &Ctx) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(c.cfg.seed ^ 0x5bd1_e995);
    let mut comm: f64 = 0.0;
    let mut quad: f64 = 0.0;
    for a in [1.0, 0.3, rng.random_range(0.3..1.0)] {
        let f = c.gaussian(a);
        let df = laplacian5(&f)?;
        let dl = laplacian5(&lambda_op(&f)?)?;
        let ld = lambda_op(&df)?;
        let defect = dl.axpy(-1.0, &ld)?.axpy(-1.0, &df)?;
        comm = comm.max(norm_l2(&defect) / norm_l2(&df));
        let lhs = -inner_l2(&ld, &df)?;
        let rhs = 0.75 * norm_l2(&df).powi(2);
        quad = quad.max((lhs - rhs).abs() / rhs);
    }
    out.push(Check::at_most("calculus.commutator", comm, 1e-6));
    out.push(Check::at_most("calculus.quadratic_form", quad, 1e-6));
    // dilation identity of the homogeneous parts
    let f = c.gaussian(1.0);
    let lam: f64 = 1.3;
    let g = RadialFunction::from_fn(c.grid.clone(), Parity::Even, |y| (-(y / lam).powi(2)).exp());
    let (xf, xg) = (
        norm_x(&f, &NormOptions::default())?,
        norm_x(&g, &NormOptions::default())?,
    );
    let d2 = (xg.dot_h2 - lam.powf(0.5) * xf.dot_h2).abs() / xg.dot_h2;
    let d4 = (xg.dot_h4 - lam.powf(-1.5) * xf.dot_h4).abs() / xg.dot_h4;
    out.push(Check::at_most(
        "calculus.dilation_identity",
        d2.max(d4),
        1e-6,
    ));
    let hardy = hardy_ratio(&f)?.unwrap_or(f64::NAN);
    out.push(Check::at_most("calculus.hardy", hardy, 2.0));
    let mut rng2 = ChaCha8Rng::seed_from_u64(c.cfg.seed);
    let (u, v) = (c.random_shape(&mut rng2), c.random_shape(&mut rng2));
    let asym = (inner_sigma(&u, &v)? - inner_sigma(&v, &u)?).abs();
    out.push(Check::at_most(
        "calculus.inner_symmetry",
        asym,
        1e-14 * (norm_rho(&u) * norm_rho(&v)).max(1.0),
    ));
    let odd = RadialFunction::from_fn(c.grid.clone(), Parity::Odd, |y| y * (-y * y).exp());
    let back = divide_by_y(&odd)?;
    out.push(Check::at_most(
        "calculus.divide_by_y",
        back.axpy(-1.0, &f)?.max_abs(),
        1e-12,
    ));
    Ok(out)
}

/// Runs every group and returns the collected checks in a fixed order.
pub fn run_suite(cfg: &VerifyConfig, profile: Option<&ProfileSolution>) -> Result<VerifyReport> {
    cfg.validate()?;
    let grid = Arc::new(RadialGrid::new(GridSpec::new(
        cfg.y_max,
        cfg.resolution,
        cfg.stretch,
    ))?);
    let p = match profile {
        Some(p) if **p.grid() == *grid => p.clone(),
        _ => find_profile(&ProfileConfig::default(), grid.clone())?,
    };
    let pairs = eigenpairs(&assemble_operator(Some(&p), grid.clone())?, 6)?;
    let ctx = Ctx {
        cfg: *cfg,
        grid,
        p,
        pairs,
    };
    let groups: [(&str, Group); 7] = [
        ("profile", group_profile),
        ("spectrum", group_spectrum),
        ("evolution", group_evolution_linear),
        ("evolution", group_evolution_nonlinear),
        ("tune", group_tuning),
        ("blowup", group_blowup),
        ("calculus", group_calculus),
    ];
    let checks: Vec<Vec<Check>> = groups
        .par_iter()
        .map(|(name, g)| g(&ctx).unwrap_or_else(|e| vec![Check::failed(name, e)]))
        .collect();
    Ok(VerifyReport {
        seed: cfg.seed,
        grid: ctx.grid.spec(),
        checks: checks.into_iter().flatten().collect(),
    })
}
