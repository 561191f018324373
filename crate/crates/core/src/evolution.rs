//! Perturbations of the self-similar solution in similarity variables
//! `y = r/√(T-t)`, `s = log T - log(T-t)`:
//!
//! `∂_s w = L̂ w + N(w)`, `L̂ = Δ - Λ - V`,
//!
//! where `v = f₀/y + w` and `u = r v`. The linear part is discretized by
//! sixth-order finite differences on the radial grid. At the last node the
//! outward drift dominates and only the transport and potential terms are
//! kept, discretized upwind. Time stepping is ARS(2,2,2).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::imex::ImplicitPart;
use crate::profile::ProfileSolution;
use crate::radial::stencil::{fold, Stencil};
use crate::radial::{
    divide_by_y, inner_sigma, norm_rho, norm_sigma, norm_x, NormOptions, Parity, RadialFunction,
    RadialGrid,
};

const FD_WIDTH: usize = 7;

/// Which linear operator drives the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearPart {
    /// `Δ - Λ - V`, the linearization around `f₀/y`.
    Full,
    /// `Δ - Λ`.
    Free,
    /// `Δ - ½ y ∂_y`, whose semigroup is the explicit Gaussian kernel.
    Principal,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub ds: f64,
    pub s_end: f64,
    pub nonlinear: bool,
    pub linear: LinearPart,
    /// `|a(s)|` at which a run counts as escaped along the unstable mode.
    pub escape: f64,
    /// Stop integrating once escaped.
    pub halt_on_escape: bool,
    /// Record a trajectory sample every this many steps.
    pub record_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            ds: 0.01,
            s_end: 6.0,
            nonlinear: true,
            linear: LinearPart::Full,
            escape: 0.05,
            halt_on_escape: true,
            record_every: 10,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ds > 0.0 && self.ds <= 0.5) {
            return Err(invalid("ds", self.ds, "must lie in (0, 0.5]"));
        }
        if !(self.s_end > 0.0 && self.s_end.is_finite()) {
            return Err(invalid("s_end", self.s_end, "must be positive"));
        }
        if !(self.escape > 0.0) {
            return Err(invalid("escape", self.escape, "must be positive"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", 0, "must be at least 1"));
        }
        Ok(())
    }
}

/// `(sin δ - δ)/δ³`, accurate for small `δ`.
fn s3(d: f64) -> f64 {
    if d.abs() < 0.5 {
        let d2 = d * d;
        -1.0 / 6.0
            + d2 * (1.0 / 120.0 + d2 * (-1.0 / 5040.0 + d2 * (1.0 / 362880.0 - d2 / 39916800.0)))
    } else {
        (d.sin() - d) / (d * d * d)
    }
}

/// Builds `D2 + (4/y - y/2) D1 - W` as a band matrix for even functions,
/// with the outflow row at the last node.
pub(crate) fn radial_operator(nodes: &[f64], drift: f64, w: &[f64], outflow: bool) -> BandMatrix {
    let n = nodes.len();
    let d1 = Stencil::new(nodes, FD_WIDTH, 1);
    let d2 = Stencil::new(nodes, FD_WIDTH, 2);
    let mut a = BandMatrix::zeros(n, FD_WIDTH - 1, FD_WIDTH / 2);
    let scatter = |a: &mut BandMatrix, i: usize, st: &Stencil, c: f64| {
        let row = &st.rows()[i];
        for (k, wk) in row.weights.iter().enumerate() {
            let (j, s) = fold(row.start + k as isize, Parity::Even);
            a.add(i, j, c * s * wk);
        }
    };
    for i in 0..n {
        let y = nodes[i];
        if outflow && i == n - 1 {
            scatter(&mut a, i, &d1, -drift * y);
        } else {
            scatter(&mut a, i, &d2, 1.0);
            scatter(&mut a, i, &d1, 4.0 / y - drift * y);
        }
        a.add(i, i, -w[i]);
    }
    a
}

/// Precomputed operators for one grid, profile and step size.
pub struct Evolver {
    grid: Arc<RadialGrid>,
    cfg: EvolutionConfig,
    implicit: ImplicitPart,
    sin_theta_y: Vec<f64>,
    cos_theta: Vec<f64>,
    psi1: RadialFunction,
}

/// Similarity time and perturbation.
#[derive(Debug, Clone)]
pub struct SimilarityState {
    pub s: f64,
    pub w: RadialFunction,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectorySample {
    pub s: f64,
    pub norm_rho: f64,
    pub norm_x: f64,
    pub dot_h2: f64,
    pub dot_h4: f64,
    /// Coefficient along the unstable direction `ψ₁`.
    pub a: f64,
    pub tail_flag: bool,
}

/// Recorded evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub last: SimilarityState,
    /// `(s, sign)` when `|a|` crossed the escape threshold.
    pub escape: Option<(f64, f64)>,
}

impl Trajectory {
    /// Sign of the escape, or of `a` at the final time when no escape
    /// happened (zero if `a` vanishes exactly).
    pub fn escape_sign(&self) -> f64 {
        match self.escape {
            Some((_, s)) => s,
            None => {
                let a = self.samples.last().map_or(0.0, |x| x.a);
                if a == 0.0 {
                    0.0
                } else {
                    a.signum()
                }
            }
        }
    }

    /// Writes `s,norm_rho,norm_X,a,flags`.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "s,norm_rho,norm_X,a,flags")?;
        let esc = self.escape.map(|e| e.0);
        for x in &self.samples {
            let mut flags = Vec::new();
            if x.tail_flag {
                flags.push("tail");
            }
            if esc.is_some_and(|e| x.s >= e) {
                flags.push("escaped");
            }
            let flags = if flags.is_empty() {
                "ok".to_string()
            } else {
                flags.join("|")
            };
            writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{:.10e},{}",
                x.s, x.norm_rho, x.norm_x, x.a, flags
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

impl Evolver {
    pub fn new(p: &ProfileSolution, grid: Arc<RadialGrid>, cfg: &EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        if grid.len() < 4 * FD_WIDTH {
            return Err(Error::GridTooCoarse {
                nodes: grid.len(),
                required: 4 * FD_WIDTH,
            });
        }
        let (f, fp) = p.f_on(&grid);
        let nodes = grid.nodes();
        let theta: Vec<f64> = f.values().iter().map(|f| 2.0 * f).collect();
        let sin_theta_y = theta.iter().zip(nodes).map(|(t, y)| t.sin() / y).collect();
        let cos_theta: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let (drift, w): (f64, Vec<f64>) = match cfg.linear {
            LinearPart::Full => (
                0.5,
                cos_theta
                    .iter()
                    .zip(nodes)
                    .map(|(c, y)| 0.5 + (2.0 * c - 2.0) / (y * y))
                    .collect(),
            ),
            LinearPart::Free => (0.5, vec![0.5; nodes.len()]),
            LinearPart::Principal => (0.5, vec![0.0; nodes.len()]),
        };
        let op = radial_operator(nodes, drift, &w, true);
        let implicit = ImplicitPart::new(op, cfg.ds)?;
        let psi1 = fp.scale(1.0 / norm_sigma(&fp));
        Ok(Self {
            grid,
            cfg: *cfg,
            implicit,
            sin_theta_y,
            cos_theta,
            psi1,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }
    /// `ψ₁ = f₀'/‖f₀'‖_σ`.
    pub fn psi1(&self) -> &RadialFunction {
        &self.psi1
    }
    pub fn operator(&self) -> &BandMatrix {
        &self.implicit.op
    }

    /// `N(w)`, the part of the right-hand side beyond linear order.
    pub fn nonlinear(&self, w: &[f64]) -> Vec<f64> {
        let nodes = self.grid.nodes();
        (0..w.len())
            .map(|i| {
                let (y, w) = (nodes[i], w[i]);
                let q = (y * w).sin() / y;
                2.0 * self.sin_theta_y[i] * q * q
                    - 8.0 * w * w * w * self.cos_theta[i] * s3(2.0 * y * w)
            })
            .collect()
    }

    /// `L̂w + N(w)` (the nonlinear term only if enabled).
    pub fn rhs(&self, w: &RadialFunction) -> RadialFunction {
        let mut r = self.implicit.op.matvec(w.values());
        if self.cfg.nonlinear {
            for (r, n) in r.iter_mut().zip(self.nonlinear(w.values())) {
                *r += n;
            }
        }
        w.with_values(r)
    }

    pub fn amplitude(&self, w: &RadialFunction) -> f64 {
        inner_sigma(w, &self.psi1).unwrap_or(f64::NAN)
    }

    pub fn step(&self, state: &SimilarityState) -> SimilarityState {
        let v = if self.cfg.nonlinear {
            self.implicit.step(state.w.values(), |u| self.nonlinear(u))
        } else {
            self.implicit.step(state.w.values(), |u| vec![0.0; u.len()])
        };
        SimilarityState {
            s: state.s + self.cfg.ds,
            w: state.w.with_values(v),
        }
    }

    pub fn sample(&self, st: &SimilarityState) -> TrajectorySample {
        let x = norm_x(&st.w, &NormOptions::default()).ok();
        TrajectorySample {
            s: st.s,
            norm_rho: norm_rho(&st.w),
            norm_x: x.map_or(f64::NAN, |x| x.value),
            dot_h2: x.map_or(f64::NAN, |x| x.dot_h2),
            dot_h4: x.map_or(f64::NAN, |x| x.dot_h4),
            a: self.amplitude(&st.w),
            tail_flag: x.is_none_or(|x| x.tail_flag),
        }
    }

    /// Integrates from `w0` at `s = 0` to `s_end`.
    pub fn evolve(&self, w0: RadialFunction) -> Result<Trajectory> {
        if w0.parity() != Parity::Even {
            return Err(Error::ParityMismatch { expected: "even" });
        }
        if **w0.grid() != *self.grid {
            return Err(Error::GridMismatch(
                "initial data on a different grid".into(),
            ));
        }
        let steps = (self.cfg.s_end / self.cfg.ds).round() as usize;
        let mut st = SimilarityState { s: 0.0, w: w0 };
        let mut samples = vec![self.sample(&st)];
        let mut escape = None;
        for k in 1..=steps {
            st = self.step(&st);
            let a = self.amplitude(&st.w);
            let blown = !a.is_finite() || st.w.values().iter().any(|v| !v.is_finite());
            if escape.is_none() && (blown || a.abs() >= self.cfg.escape) {
                let sign = if a.is_finite() { a.signum() } else { 1.0 };
                escape = Some((st.s, sign));
            }
            if blown || (escape.is_some() && self.cfg.halt_on_escape) {
                if !blown {
                    samples.push(self.sample(&st));
                }
                break;
            }
            if k % self.cfg.record_every == 0 || k == steps {
                samples.push(self.sample(&st));
            }
        }
        Ok(Trajectory {
            samples,
            last: st,
            escape,
        })
    }
}

/// Shape of the odd perturbation `h` added to the profile.
#[derive(Debug, Clone)]
pub enum Shape {
    /// `h = y f₀'(y)`, so that `h/y` is proportional to `ψ₁`.
    Psi1Like,
    /// `h = y [e^{-(y-c)²/σ²} + e^{-(y+c)²/σ²}]`.
    GaussianBump { center: f64, width: f64 },
    /// User samples of an odd function, zero beyond their grid.
    Samples(RadialFunction),
}

/// A scaled perturbation shape.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub shape: Shape,
    pub scale: f64,
}

impl Perturbation {
    pub fn unit(shape: Shape) -> Result<Self> {
        match &shape {
            Shape::GaussianBump { width, .. } if !(*width > 0.0) => {
                return Err(invalid("width", width, "must be positive"))
            }
            Shape::Samples(f) if f.parity() != Parity::Odd => {
                return Err(Error::ParityMismatch { expected: "odd" })
            }
            _ => {}
        }
        Ok(Self { shape, scale: 1.0 })
    }

    /// Rescales so that `‖h‖_Y` on `grid` equals `target`.
    pub fn with_y_norm(
        shape: Shape,
        target: f64,
        p: &ProfileSolution,
        grid: &Arc<RadialGrid>,
    ) -> Result<Self> {
        let unit = Self::unit(shape)?;
        if target == 0.0 {
            return Ok(Self { scale: 0.0, ..unit });
        }
        let n = unit.y_norm(p, grid)?;
        if !(n > 0.0) {
            return Err(Error::Degenerate(
                "perturbation shape has zero Y norm".into(),
            ));
        }
        Ok(Self {
            scale: target / n,
            ..unit
        })
    }

    pub fn value(&self, y: f64, p: &ProfileSolution) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let v = match &self.shape {
            Shape::Psi1Like => y * p.eval(y).1,
            Shape::GaussianBump { center, width } => {
                y * ((-((y - center) / width).powi(2)).exp()
                    + (-((y + center) / width).powi(2)).exp())
            }
            Shape::Samples(f) => {
                if y.abs() <= f.grid().y_max() {
                    f.interpolate(y)
                } else {
                    0.0
                }
            }
        };
        self.scale * v
    }

    pub fn sample(&self, p: &ProfileSolution, grid: &Arc<RadialGrid>) -> RadialFunction {
        let v = grid.nodes().par_iter().map(|&y| self.value(y, p)).collect();
        RadialFunction::new(grid.clone(), v, Parity::Odd).expect("sized to grid")
    }

    pub fn y_norm(&self, p: &ProfileSolution, grid: &Arc<RadialGrid>) -> Result<f64> {
        Ok(norm_x(
            &divide_by_y(&self.sample(p, grid))?,
            &NormOptions::default(),
        )?
        .value)
    }
}

/// `U(h, T)(y) = f₀(√T y)/y - f₀(y)/y + h(√T y)/y`.
pub fn make_initial(
    h: &Perturbation,
    t: f64,
    p: &ProfileSolution,
    grid: &Arc<RadialGrid>,
) -> Result<RadialFunction> {
    if !(0.5..=1.5).contains(&t) {
        return Err(invalid("T", t, "must lie in [1/2, 3/2]"));
    }
    let (f, _) = p.f_on(grid);
    let st = t.sqrt();
    let v = grid
        .nodes()
        .par_iter()
        .zip(f.values().par_iter())
        .map(|(&y, &f0)| {
            let shifted = if t == 1.0 { f0 } else { p.eval(st * y).0 };
            (shifted - f0 + h.value(st * y, p)) / y
        })
        .collect();
    RadialFunction::new(grid.clone(), v, Parity::Even)
}

/// Least-squares decay rate of `‖w‖_ρ` on a window of similarity time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateReport {
    /// `ω` in `‖w(s)‖_ρ ≈ C e^{-ω s}`.
    pub rate: f64,
    pub intercept: f64,
    pub rms: f64,
    pub window: [f64; 2],
    /// Spread of the rates fitted on the two halves of the window.
    pub window_sensitivity: f64,
    /// Norm is zero or flat on the window.
    pub degenerate: bool,
    /// Norm increases somewhere inside the window.
    pub non_monotone: bool,
}

/// Fits `log ‖w‖_ρ` against `s` on `window`; needs at least ten samples.
pub fn measure_decay(traj: &Trajectory, window: [f64; 2]) -> Result<RateReport> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|x| x.s >= window[0] - 1e-9 && x.s <= window[1] + 1e-9)
        .map(|x| (x.s, x.norm_rho))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Degenerate(format!(
            "{} samples in decay window {:?}, need 10",
            pts.len(),
            window
        )));
    }
    let fit_on = |pts: &[(f64, f64)]| {
        if pts.iter().any(|p| !(p.1 > 0.0)) {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p.0, p.1.ln())).unzip();
        linear_fit(&xs, &ys)
    };
    let full = fit_on(&pts);
    let mid = pts.len() / 2;
    let halves = (
        fit_on(&pts[..=mid.min(pts.len().saturating_sub(1))]),
        fit_on(&pts[mid..]),
    );
    let non_monotone = pts.windows(2).any(|w| w[1].1 > w[0].1);
    Ok(match full {
        Some(f) => {
            let sens = match halves {
                (Some(a), Some(b)) => (a.slope - b.slope).abs(),
                _ => f64::NAN,
            };
            RateReport {
                rate: -f.slope,
                intercept: f.intercept,
                rms: f.rms,
                window,
                window_sensitivity: sens,
                degenerate: f.slope.abs() < 1e-10,
                non_monotone,
            }
        }
        None => RateReport {
            rate: 0.0,
            intercept: f64::NAN,
            rms: f64::NAN,
            window,
            window_sensitivity: f64::NAN,
            degenerate: true,
            non_monotone,
        },
    })
}

/// Search settings for the blowup-time parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    /// Half-width of the initial interval around `T = 1`.
    pub delta: f64,
    pub scan_points: usize,
    /// Bracket width on `T` at which bisection stops.
    pub tol: f64,
    /// Final similarity time of the classifying runs.
    pub s_end: f64,
    /// Window used for the decay fit of the tuned run.
    pub window: [f64; 2],
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            scan_points: 5,
            tol: 1e-10,
            s_end: 25.0,
            window: [1.0, 4.0],
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", self.delta, "must lie in (0, 1)"));
        }
        if self.scan_points < 2 {
            return Err(invalid(
                "scan_points",
                self.scan_points,
                "must be at least 2",
            ));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", self.tol, "must be positive"));
        }
        if !(self.s_end > self.window[1]
            && self.window[1] > self.window[0]
            && self.window[0] >= 0.0)
        {
            return Err(invalid(
                "window",
                format!("{:?}", self.window),
                "need 0 <= start < end < s_end",
            ));
        }
        Ok(())
    }
}

/// Outcome of the blowup-time search.
#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    #[serde(rename = "T_h")]
    pub t_h: f64,
    pub bracket: [f64; 2],
    /// `(T, sign)` for every classifying run, in evaluation order.
    pub escape_signs: Vec<(f64, f64)>,
    pub omega_fit: RateReport,
    pub c0_reference: Option<f64>,
}

/// Finds `T_h` such that the evolution of `U(h, T_h)` does not escape along
/// the unstable mode: a scan locates a sign change of the escape direction,
/// then bisection shrinks the bracket. Returns the report and the tuned
/// trajectory (not halted at escape).
pub fn tune_t(
    h: &Perturbation,
    p: &ProfileSolution,
    grid: &Arc<RadialGrid>,
    evo: &EvolutionConfig,
    cfg: &TuneConfig,
) -> Result<(TuneReport, Trajectory)> {
    cfg.validate()?;
    let run_cfg = EvolutionConfig {
        s_end: cfg.s_end,
        halt_on_escape: true,
        record_every: usize::MAX / 2,
        ..*evo
    };
    let ev = Evolver::new(p, grid.clone(), &run_cfg)?;
    let classify = |t: f64| -> Result<f64> {
        let w0 = make_initial(h, t, p, grid)?;
        Ok(ev.evolve(w0)?.escape_sign())
    };
    let m = cfg.scan_points;
    let ts: Vec<f64> = (0..m)
        .map(|k| 1.0 + cfg.delta * (2.0 * k as f64 / (m - 1) as f64 - 1.0))
        .collect();
    let signs: Vec<f64> = ts.par_iter().map(|&t| classify(t)).collect::<Result<_>>()?;
    let mut escape_signs: Vec<(f64, f64)> = ts.iter().copied().zip(signs.iter().copied()).collect();
    let mut bracket = None;
    if let Some(k) = signs.iter().position(|s| *s == 0.0) {
        bracket = Some([ts[k], ts[k]]);
    } else if let Some(k) = signs.windows(2).position(|w| w[0] < 0.0 && w[1] > 0.0) {
        bracket = Some([ts[k], ts[k + 1]]);
    }
    let [mut lo, mut hi] = bracket.ok_or_else(|| {
        let table: Vec<String> = escape_signs
            .iter()
            .map(|(t, s)| format!("T={t:.6}:{s:+}"))
            .collect();
        Error::NoSignChange(table.join(" "))
    })?;
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let s = classify(mid)?;
        escape_signs.push((mid, s));
        if s < 0.0 {
            lo = mid;
        } else if s > 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let t_h = 0.5 * (lo + hi);
    let final_cfg = EvolutionConfig {
        halt_on_escape: false,
        ..*evo
    };
    let ev = Evolver::new(p, grid.clone(), &final_cfg)?;
    let traj = ev.evolve(make_initial(h, t_h, p, grid)?)?;
    let omega_fit = measure_decay(&traj, cfg.window)?;
    Ok((
        TuneReport {
            t_h,
            bracket: [lo, hi],
            escape_signs,
            omega_fit,
            c0_reference: None,
        },
        traj,
    ))
}
