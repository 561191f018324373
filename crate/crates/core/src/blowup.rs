//! Physical-coordinate runs of the corotational flow and the blowup
//! observables built on them.
//!
//! The flow is integrated for `v = u/r`, which solves the radial heat
//! equation in five dimensions, `v_t = Δv + P(v)`, with
//! `P(v) = 2v/r² - sin(2rv)/r³ = -8v³ S₃(2rv)`. The far-field value is
//! frozen at `R_max`. As the solution concentrates, the sinh stretch of the
//! grid is raised so that the spacing at the origin halves whenever the
//! self-similar scale `√(T-t)` falls below a configured number of cells.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{radial_operator, Perturbation, Trajectory};
use crate::fit::linear_fit;
use crate::imex::ImplicitPart;
use crate::profile::ProfileSolution;
use crate::radial::{norm_x, GridSpec, NormOptions, Parity, RadialFunction, RadialGrid, XNorm};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConfig {
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub resolution: usize,
    pub stretch: f64,
    /// Step as a fraction of the current estimate of `T - t`.
    pub theta: f64,
    /// Largest step.
    pub dt_max: f64,
    pub t_end: f64,
    /// Stop once `∂_r u(0, t)` reaches this value.
    pub gradient_stop: f64,
    /// Refine when `√(T-t)` spans fewer origin cells than this.
    pub refine_cells: f64,
    pub max_refinements: usize,
    /// Compute the `Y` norm every this many steps.
    pub norm_every: usize,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            r_max: 30.0,
            resolution: 400,
            stretch: 3.0,
            theta: 0.004,
            dt_max: 0.01,
            t_end: 2.0,
            gradient_stop: 2.0e3,
            refine_cells: 8.0,
            max_refinements: 12,
            norm_every: 25,
        }
    }
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.r_max <= 200.0) {
            return Err(invalid("R_max", self.r_max, "must lie in (0, 200]"));
        }
        if self.resolution < 64 {
            return Err(invalid(
                "resolution",
                self.resolution,
                "must be at least 64",
            ));
        }
        if !(self.theta > 0.0 && self.theta <= 0.1) {
            return Err(invalid("theta", self.theta, "must lie in (0, 0.1]"));
        }
        if !(self.dt_max > 0.0) {
            return Err(invalid("dt_max", self.dt_max, "must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid("t_end", self.t_end, "must be positive"));
        }
        if !(self.gradient_stop > 0.0) {
            return Err(invalid(
                "gradient_stop",
                self.gradient_stop,
                "must be positive",
            ));
        }
        if !(self.refine_cells >= 1.0) {
            return Err(invalid(
                "refine_cells",
                self.refine_cells,
                "must be at least 1",
            ));
        }
        if self.norm_every == 0 {
            return Err(invalid("norm_every", 0, "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhysicalSample {
    pub t: f64,
    /// `∂_r u(0, t) = v(0, t)`.
    pub gradient: f64,
    pub max_abs_u: f64,
    /// `‖u(·, t)‖_Y`, if computed at this step.
    pub norm_y: Option<f64>,
    pub refinements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    GradientThreshold,
    EndTime,
    UnderResolved,
}

/// Outcome of a physical-coordinate run.
#[derive(Debug, Clone)]
pub struct PhysicalRun {
    /// `v = u/r` at the final time.
    pub v: RadialFunction,
    pub t: f64,
    pub history: Vec<PhysicalSample>,
    pub status: RunStatus,
    /// `(t, v)` at the requested snapshot times that were reached.
    pub snapshots: Vec<(f64, RadialFunction)>,
}

impl PhysicalRun {
    pub fn gradient_at_origin(&self) -> f64 {
        self.v.value_at_origin()
    }

    /// `u = r v` at the final time.
    pub fn u(&self) -> RadialFunction {
        let vals = self
            .v
            .values()
            .iter()
            .zip(self.v.nodes())
            .map(|(v, r)| v * r)
            .collect();
        RadialFunction::new(self.v.grid().clone(), vals, Parity::Odd).expect("same grid")
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,gradient,max_abs_u,norm_Y,refinements")?;
        for x in &self.history {
            let ny = x.norm_y.map_or(String::new(), |n| format!("{n:.10e}"));
            writeln!(
                out,
                "{:.15e},{:.12e},{:.12e},{},{}",
                x.t, x.gradient, x.max_abs_u, ny, x.refinements
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

fn s3(d: f64) -> f64 {
    if d.abs() < 0.5 {
        let d2 = d * d;
        -1.0 / 6.0
            + d2 * (1.0 / 120.0 + d2 * (-1.0 / 5040.0 + d2 * (1.0 / 362880.0 - d2 / 39916800.0)))
    } else {
        (d.sin() - d) / (d * d * d)
    }
}

fn heat_operator(grid: &RadialGrid) -> crate::banded::BandMatrix {
    let n = grid.len();
    let mut a = radial_operator(grid.nodes(), 0.0, &vec![0.0; n], false);
    for j in a.row_range(n - 1) {
        let v = a.get(n - 1, j);
        a.add(n - 1, j, -v);
    }
    a
}

/// Stretch whose origin spacing is `target` at fixed `R_max` and resolution.
fn stretch_for_spacing(spec: GridSpec, target: f64) -> Result<f64> {
    let spacing = |k: f64| {
        RadialGrid::new(GridSpec::new(spec.y_max, spec.resolution, k)).map(|g| g.origin_spacing())
    };
    let (mut lo, mut hi) = (spec.stretch, spec.stretch + 1.0);
    while spacing(hi)? > target {
        lo = hi;
        hi += 1.0;
        if hi > 60.0 {
            return Err(Error::NonConvergence("grid stretch exceeds 60".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if spacing(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn y_norm_of_v(v: &RadialFunction) -> Option<f64> {
    norm_x(v, &NormOptions::default()).ok().map(|x| x.value)
}

/// Initial data `v₀ = (f₀ + h)/r` on a physical grid.
pub fn initial_from_profile(
    p: &ProfileSolution,
    h: Option<&Perturbation>,
    grid: &Arc<RadialGrid>,
) -> RadialFunction {
    RadialFunction::from_fn(grid.clone(), Parity::Even, |r| {
        (p.eval(r).0 + h.map_or(0.0, |h| h.value(r, p))) / r
    })
}

/// Integrates the flow from `v0` until the gradient threshold, the end time
/// or the refinement cap. `b_ref` is the profile's `f₀'(0)`, used to turn
/// the gradient into an estimate of `T - t`.
pub fn evolve_physical(
    v0: RadialFunction,
    b_ref: f64,
    snapshot_times: &[f64],
    cfg: &PhysicalConfig,
) -> Result<PhysicalRun> {
    cfg.validate()?;
    if v0.parity() != Parity::Even {
        return Err(Error::ParityMismatch { expected: "even" });
    }
    let mut v = v0;
    let mut grid = v.grid().clone();
    let mut refinements = 0;
    let mut t = 0.0;
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&s| s >= 0.0)
        .collect();
    pending.sort_by(f64::total_cmp);
    let mut op = heat_operator(&grid);
    let mut cached: Option<ImplicitPart> = None;
    let mut step = 0usize;
    let status = loop {
        let g = v.value_at_origin();
        let u_max = v
            .values()
            .iter()
            .zip(v.nodes())
            .map(|(v, r)| (v * r).abs())
            .fold(0.0, f64::max);
        let norm_y = step
            .is_multiple_of(cfg.norm_every)
            .then(|| y_norm_of_v(&v))
            .flatten();
        history.push(PhysicalSample {
            t,
            gradient: g,
            max_abs_u: u_max,
            norm_y,
            refinements,
        });
        while pending.first().is_some_and(|&s| s <= t + 1e-14) {
            snapshots.push((pending.remove(0), v.clone()));
        }
        if !g.is_finite() || g.abs() >= cfg.gradient_stop {
            break RunStatus::GradientThreshold;
        }
        if t >= cfg.t_end - 1e-14 {
            break RunStatus::EndTime;
        }
        let tau = if g.abs() > 0.0 {
            (b_ref / g).powi(2)
        } else {
            f64::INFINITY
        };
        if tau.sqrt() < cfg.refine_cells * grid.origin_spacing() {
            if refinements == cfg.max_refinements {
                break RunStatus::UnderResolved;
            }
            let k = stretch_for_spacing(grid.spec(), 0.5 * grid.origin_spacing())?;
            let new_grid = Arc::new(RadialGrid::new(GridSpec::new(grid.y_max(), grid.len(), k))?);
            let mut vals = v.resample(new_grid.clone()).into_values();
            *vals.last_mut().expect("nonempty") = *v.values().last().expect("nonempty");
            grid = new_grid;
            v = RadialFunction::new(grid.clone(), vals, Parity::Even)?;
            op = heat_operator(&grid);
            cached = None;
            refinements += 1;
            continue;
        }
        let mut dt = (cfg.theta * tau).min(cfg.dt_max);
        let mut next = t + dt;
        if let Some(&s) = pending.first() {
            if next > s {
                next = s;
            }
        }
        if next > cfg.t_end {
            next = cfg.t_end;
        }
        dt = next - t;
        // Reuse the factorization while the step changes by under 1%.
        let reuse = cached
            .as_ref()
            .is_some_and(|c| ((c.dt - dt) / dt).abs() < 1e-2);
        if !reuse {
            cached = Some(ImplicitPart::new(op.clone(), dt)?);
        }
        let imp = cached.as_ref().expect("set above");
        let nodes = grid.nodes().to_vec();
        let n = nodes.len();
        let vals = imp.step(v.values(), |w| {
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        0.0
                    } else {
                        let (r, w) = (nodes[i], w[i]);
                        -8.0 * w * w * w * s3(2.0 * r * w)
                    }
                })
                .collect()
        });
        t += imp.dt;
        v = v.with_values(vals);
        step += 1;
    };
    Ok(PhysicalRun {
        v,
        t,
        history,
        status,
        snapshots,
    })
}

/// Power-law fit with diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateReport {
    pub exponent: f64,
    pub prefactor: f64,
    /// Range of the independent variable used.
    pub window: [f64; 2],
    pub residual: f64,
    pub samples: usize,
    pub resolution: usize,
    pub non_monotone: bool,
}

/// Blowup time and gradient law `g = C (T - t)^{-1/2}` from a run history.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlowupFit {
    #[serde(rename = "T_est")]
    pub t_est: f64,
    /// `C`; equals `f₀'(0)` for a profile-driven blowup.
    pub prefactor: f64,
    /// Free power-law fit of `g` against `T_est - t`.
    pub free_fit: RateReport,
}

/// Fits `(T, C)` in `g(t) = C (T - t)^{-1/2}` over the growth regime
/// `g ≥ 3 g(0)`: a linear fit of `1/g²` for the start, then Gauss–Newton on
/// the log residuals.
pub fn fit_blowup_time(ts: &[f64], gs: &[f64], resolution: usize) -> Result<BlowupFit> {
    if ts.len() != gs.len() || ts.is_empty() {
        return Err(Error::Degenerate(
            "empty or mismatched gradient history".into(),
        ));
    }
    let g0 = gs[0].abs();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(gs)
        .filter(|(_, g)| g.is_finite() && **g > 0.0 && g.abs() >= 3.0 * g0)
        .map(|(t, g)| (*t, *g))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Degenerate(format!(
            "{} samples in the growth regime, need 10",
            pts.len()
        )));
    }
    let non_monotone = pts.windows(2).any(|w| w[1].1 < w[0].1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(t, g)| (*t, 1.0 / (g * g))).unzip();
    let lin =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Degenerate("flat gradient history".into()))?;
    if !(lin.slope < 0.0) {
        return Err(Error::Degenerate("gradient is not growing".into()));
    }
    let t_last = pts.last().expect("nonempty").0;
    let mut tb = (-lin.intercept / lin.slope).max(t_last * (1.0 + 1e-15) + 1e-300);
    let mut lc = (-1.0 / lin.slope).sqrt().ln();
    for _ in 0..100 {
        // residual r = log g - log C + ½ log(T - t)
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, g) in &pts {
            let r = g.ln() - lc + 0.5 * (tb - t).ln();
            let jt = 0.5 / (tb - t);
            let jc = -1.0;
            a11 += jt * jt;
            a12 += jt * jc;
            a22 += jc * jc;
            b1 += jt * r;
            b2 += jc * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            break;
        }
        let dt = -(a22 * b1 - a12 * b2) / det;
        let dc = -(a11 * b2 - a12 * b1) / det;
        let mut scale = 1.0;
        while tb + scale * dt <= t_last {
            scale *= 0.5;
        }
        tb += scale * dt;
        lc += scale * dc;
        if (scale * dt).abs() < 1e-15 * tb.abs().max(1.0) && dc.abs() < 1e-14 {
            break;
        }
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(t, g)| ((tb - t).ln(), g.ln())).unzip();
    let free =
        linear_fit(&lx, &ly).ok_or_else(|| Error::Degenerate("free power fit failed".into()))?;
    Ok(BlowupFit {
        t_est: tb,
        prefactor: lc.exp(),
        free_fit: RateReport {
            exponent: free.slope,
            prefactor: free.intercept.exp(),
            window: [pts[0].0, t_last],
            residual: free.rms,
            samples: pts.len(),
            resolution,
            non_monotone,
        },
    })
}

pub fn fit_run(run: &PhysicalRun) -> Result<BlowupFit> {
    let ts: Vec<f64> = run.history.iter().map(|h| h.t).collect();
    let gs: Vec<f64> = run.history.iter().map(|h| h.gradient).collect();
    fit_blowup_time(&ts, &gs, run.v.grid().len())
}

/// `‖f₀/y‖_{Ḣ²}` and `‖f₀/y‖_{Ḣ⁴}` with tail corrections.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileNorms {
    pub h2: f64,
    pub h4: f64,
    pub tail_flag: bool,
}

impl ProfileNorms {
    pub fn of(p: &ProfileSolution) -> Result<Self> {
        let (f, _) = p.f_on(p.grid());
        Self::of_v(&crate::radial::divide_by_y(&f)?)
    }

    fn of_v(v: &RadialFunction) -> Result<Self> {
        let x: XNorm = norm_x(v, &NormOptions::default())?;
        Ok(Self {
            h2: x.corrected_h2(),
            h4: x.corrected_h4(),
            tail_flag: x.tail_flag,
        })
    }

    /// `‖u*(·, t)‖_Y` at `τ = T - t`.
    pub fn y_norm(&self, tau: f64) -> f64 {
        tau.powf(-0.25) * self.h2 + tau.powf(-1.25) * self.h4
    }
}

/// Power fit of the two-term blowup speed on a window of times, with blowup at `t = 1`.
pub fn speed_fit(norms: &ProfileNorms, window: [f64; 2], samples: usize) -> Result<RateReport> {
    if !(window[0] < window[1] && window[1] < 1.0) || samples < 2 {
        return Err(invalid("window", format!("{window:?}"), "need t0 < t1 < 1"));
    }
    let (l0, l1) = ((1.0 - window[1]).ln(), (1.0 - window[0]).ln());
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..samples)
        .map(|k| {
            let lt = l0 + (l1 - l0) * k as f64 / (samples - 1) as f64;
            (lt, norms.y_norm(lt.exp()).ln())
        })
        .unzip();
    let f = linear_fit(&xs, &ys).ok_or_else(|| Error::Degenerate("speed fit".into()))?;
    Ok(RateReport {
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        window,
        residual: f.rms,
        samples,
        resolution: 0,
        non_monotone: false,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpeedCheck {
    pub norms: ProfileNorms,
    pub late: RateReport,
    pub early: RateReport,
    /// Direct quadrature of the dilated profile at `t = 0.99`.
    pub direct_at_099: f64,
    pub closed_form_at_099: f64,
}

/// `‖u*₁(·, t)‖_Y = (1-t)^{-1/4} A + (1-t)^{-5/4} B` with power fits on the
/// late window `[0.9, 0.999]` and the early window `[0, 0.5]`.
pub fn blowup_speed_check(p: &ProfileSolution) -> Result<SpeedCheck> {
    let norms = ProfileNorms::of(p)?;
    let late = speed_fit(&norms, [0.9, 0.999], 200)?;
    let early = speed_fit(&norms, [0.0, 0.5], 200)?;
    let tau: f64 = 0.01;
    let sq = tau.sqrt();
    // Same resolution in y = r/√τ near the origin as the profile grid.
    let spec = GridSpec::new(p.grid().y_max(), 2 * p.grid().len(), p.grid().stretch());
    let k = stretch_for_spacing(spec, sq * p.grid().origin_spacing())?;
    let g = Arc::new(RadialGrid::new(GridSpec::new(
        spec.y_max,
        spec.resolution,
        k,
    ))?);
    let v = RadialFunction::from_fn(g, Parity::Even, |r| p.eval(r / sq).0 / r);
    let direct = ProfileNorms::of_v(&v)?;
    Ok(SpeedCheck {
        norms,
        late,
        early,
        direct_at_099: direct.h2 + direct.h4,
        closed_form_at_099: norms.y_norm(tau),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergencePoint {
    pub t: f64,
    pub tau: f64,
    pub ratio: f64,
    /// `(T_h - t)^{ω}` with the fitted decay rate.
    pub model: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    #[serde(rename = "T_h")]
    pub t_h: f64,
    pub omega_fit: f64,
    pub points: Vec<ConvergencePoint>,
    /// Log-log slope of the ratio against `T_h - t` on the fit window.
    pub slope: Option<f64>,
    pub decreasing: bool,
}

/// Relative distance `‖u_h - u*_{T_h}‖_Y / ‖u*_{T_h}‖_Y` along a tuned
/// similarity trajectory. With `u_h - u* = (r/√τ) w(r/√τ, s)` and
/// `τ = T_h e^{-s}` the dilation identities reduce it to
/// `(τ ‖w‖_{Ḣ²} + ‖w‖_{Ḣ⁴}) / (τ A + B)`.
pub fn convergence_report(
    traj: &Trajectory,
    t_h: f64,
    omega_fit: f64,
    norms: &ProfileNorms,
    window: [f64; 2],
) -> Result<ConvergenceReport> {
    if traj.escape.is_some() {
        return Err(Error::Degenerate(
            "trajectory escaped along the unstable mode".into(),
        ));
    }
    let points: Vec<ConvergencePoint> = traj
        .samples
        .iter()
        .map(|x| {
            let tau = t_h * (-x.s).exp();
            let ratio = (tau * x.dot_h2 + x.dot_h4) / (tau * norms.h2 + norms.h4);
            ConvergencePoint {
                t: t_h - tau,
                tau,
                ratio,
                model: tau.powf(omega_fit),
            }
        })
        .collect();
    let inside: Vec<&ConvergencePoint> = traj
        .samples
        .iter()
        .zip(&points)
        .filter(|(x, _)| x.s >= window[0] - 1e-9 && x.s <= window[1] + 1e-9)
        .map(|(_, p)| p)
        .collect();
    let decreasing = inside.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let slope = if inside.iter().all(|p| p.ratio > 0.0) {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            inside.iter().map(|p| (p.tau.ln(), p.ratio.ln())).unzip();
        linear_fit(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    Ok(ConvergenceReport {
        t_h,
        omega_fit,
        points,
        slope,
        decreasing,
    })
}
