//! The shrinking self-similar profile `f₀` of
//! `f'' = -(2/y - y/2) f' + sin(2f)/y²`, `f(0) = 0`, bounded as `y → ∞`.
//!
//! The slope `b = f'(0)` is bracketed by shooting (solutions with the wrong
//! slope escape to ±∞ like `e^{y²/4}`), bisected, and finally refined by
//! matching a forward integration from the origin series to a backward
//! integration from the asymptotic tail `f∞ + a₂/y² + a₄/y⁴ + a₆/y⁶`.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::ode::{Dopri5, Halt, OdeOptions};
use crate::radial::{GridSpec, Parity, RadialFunction, RadialGrid};

/// Second derivative prescribed by the profile equation.
pub fn profile_rhs(y: f64, f: f64, fp: f64) -> f64 {
    -(2.0 / y - 0.5 * y) * fp + (2.0 * f).sin() / (y * y)
}

fn system(y: f64, x: &[f64; 2]) -> [f64; 2] {
    [x[1], profile_rhs(y, x[0], x[1])]
}

/// Odd Taylor coefficients `[c₁, c₃, …, c_order]` of the solution with
/// `f'(0) = b`, obtained by substituting the series into the equation.
pub fn series_at_origin(b: f64, order: usize) -> Result<Vec<f64>> {
    if order.is_multiple_of(2) || !(1..=15).contains(&order) {
        return Err(invalid("order", order, "must be odd and at most 15"));
    }
    let mut c = vec![0.0; order + 1];
    c[1] = b;
    for k in (3..=order).step_by(2) {
        // coefficient of y^k in sin(2f) with c_k still zero
        let g: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
        let (s, _) = sin_cos_series(&g, k);
        let r = s[k];
        let kf = k as f64;
        c[k] = (c[k - 2] * (kf - 2.0) / 2.0 + r) / ((kf - 1.0) * (kf + 2.0));
    }
    Ok(c.into_iter().skip(1).step_by(2).collect())
}

/// Power series of `sin g` and `cos g` up to degree `n`, for `g(0) = 0`.
fn sin_cos_series(g: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; n + 1];
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    for m in 1..=n {
        let (mut a, mut b) = (0.0, 0.0);
        for j in 1..=m.min(g.len() - 1) {
            a += j as f64 * g[j] * c[m - j];
            b -= j as f64 * g[j] * s[m - j];
        }
        s[m] = a / m as f64;
        c[m] = b / m as f64;
    }
    (s, c)
}

/// `(f, f')` from odd coefficients `[c₁, c₃, …]`.
pub fn eval_series(coeffs: &[f64], y: f64) -> (f64, f64) {
    let y2 = y * y;
    let (mut f, mut fp) = (0.0, 0.0);
    for (i, c) in coeffs.iter().enumerate().rev() {
        let k = (2 * i + 1) as f64;
        f = f * y2 + c;
        fp = fp * y2 + k * c;
    }
    (f * y, fp)
}

/// Far-field expansion `f∞ + a₂/y² + a₄/y⁴ + a₆/y⁶` and its derivative.
pub fn tail_series(f_inf: f64, y: f64) -> (f64, f64) {
    let (s, c) = ((2.0 * f_inf).sin(), (2.0 * f_inf).cos());
    let a2 = s;
    let a4 = a2 * (c - 1.0);
    let a6 = (a4 * (2.0 * c - 12.0) - 2.0 * s * a2 * a2) / 3.0;
    let u = 1.0 / (y * y);
    let f = f_inf + u * (a2 + u * (a4 + u * a6));
    let fp = -u / y * (2.0 * a2 + u * (4.0 * a4 + u * 6.0 * a6));
    (f, fp)
}

/// Fate of a shooting trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Escapes upward (`f' → +∞`).
    Overshoot,
    /// Escapes downward.
    Undershoot,
    /// Stayed bounded up to the integration horizon.
    Bounded,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShootResult {
    pub b: f64,
    pub branch: Branch,
    /// Radius at which the trajectory left the tube (or the horizon).
    pub radius: f64,
    pub f: f64,
    pub f_prime: f64,
}

fn ode_options(rtol: f64) -> OdeOptions {
    OdeOptions {
        rtol,
        atol: 1e-3 * rtol,
        ..OdeOptions::default()
    }
}

/// Integrates from the origin with slope `b` up to `horizon` and classifies
/// the outcome. Step-size collapse counts as escape in the direction of `f'`.
pub fn shoot(b: f64, horizon: f64, cfg: &ProfileConfig) -> ShootResult {
    let y0 = cfg.handoff / b.abs().max(1.0);
    let coeffs = series_at_origin(b, cfg.series_order).expect("validated order");
    let (f0, fp0) = eval_series(&coeffs, y0);
    let mut ode = Dopri5::new(system, y0, [f0, fp0], ode_options(cfg.rtol));
    let escaped = |y: f64, x: &[f64; 2]| {
        (y >= 1.0 && x[1].abs() * y * y * y > 25.0) || x[0].abs() > 4.0 * std::f64::consts::PI
    };
    let res = ode.advance(horizon, escaped);
    let branch = match res {
        Ok(()) => Branch::Bounded,
        Err(_) if ode.x[1] >= 0.0 => Branch::Overshoot,
        Err(_) => Branch::Undershoot,
    };
    ShootResult {
        b,
        branch,
        radius: ode.t,
        f: ode.x[0],
        f_prime: ode.x[1],
    }
}

/// Parameters of the profile search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// Bracket width on `b` at which bisection stops.
    pub tol: f64,
    /// Upper end of the initial scan over `b`.
    pub b_scan: f64,
    pub scan_points: usize,
    /// Series handoff radius (divided by `max(1, b)`).
    pub handoff: f64,
    pub series_order: usize,
    /// Radius where forward and backward integrations are matched.
    pub match_radius: f64,
    /// Backward integration starts this far beyond `Y_max`.
    pub far_margin: f64,
    /// Horizon of the classifying integrations.
    pub shoot_horizon: f64,
    pub rtol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            b_scan: 5.0,
            scan_points: 40,
            handoff: 1e-3,
            series_order: 7,
            match_radius: 4.0,
            far_margin: 20.0,
            shoot_horizon: 16.0,
            rtol: 1e-13,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", self.tol, "must lie in (0, 1)"));
        }
        if !(self.b_scan > 0.0 && self.b_scan.is_finite()) {
            return Err(invalid("b_scan", self.b_scan, "must be positive"));
        }
        if self.scan_points < 2 {
            return Err(invalid(
                "scan_points",
                self.scan_points,
                "must be at least 2",
            ));
        }
        if !(self.handoff > 0.0 && self.handoff < 0.1) {
            return Err(invalid("handoff", self.handoff, "must lie in (0, 0.1)"));
        }
        if ![3, 5, 7].contains(&self.series_order) {
            return Err(invalid(
                "series_order",
                self.series_order,
                "must be 3, 5 or 7",
            ));
        }
        if !(self.match_radius > 0.5) {
            return Err(invalid(
                "match_radius",
                self.match_radius,
                "must exceed 0.5",
            ));
        }
        if !(self.far_margin >= 5.0) {
            return Err(invalid("far_margin", self.far_margin, "must be at least 5"));
        }
        if !(self.shoot_horizon > 2.0) {
            return Err(invalid(
                "shoot_horizon",
                self.shoot_horizon,
                "must exceed 2",
            ));
        }
        if !(self.rtol >= 1e-15 && self.rtol <= 1e-6) {
            return Err(invalid("rtol", self.rtol, "must lie in [1e-15, 1e-6]"));
        }
        Ok(())
    }
}

/// Settings needed to evaluate a stored profile off the grid.
#[derive(Debug, Clone, Copy)]
struct EvalMeta {
    handoff: f64,
    series_order: usize,
    far_radius: f64,
    rtol: f64,
}

/// The computed profile together with its diagnostics.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    /// Slope `f₀'(0)`.
    pub b: f64,
    /// Limit of `f₀` at infinity (the far-field parameter of the match).
    pub f_infinity: f64,
    /// Odd samples of `f₀`.
    pub f: RadialFunction,
    /// Even samples of `f₀'`.
    pub f_prime: RadialFunction,
    /// Largest one-step ODE defect between consecutive nodes.
    pub residual: f64,
    /// Final bisection bracket on `b`.
    pub bracket: [f64; 2],
    /// Classification table of the initial scan.
    pub scan: Vec<ShootResult>,
    /// Whether the classification flipped exactly once inside the bracket.
    pub monotone_bracket: bool,
    meta: EvalMeta,
}

/// Searches for the profile and samples it on `grid`.
pub fn find_profile(cfg: &ProfileConfig, grid: Arc<RadialGrid>) -> Result<ProfileSolution> {
    cfg.validate()?;
    let n = cfg.scan_points;
    let scan: Vec<ShootResult> = (1..=n)
        .into_par_iter()
        .map(|k| shoot(cfg.b_scan * k as f64 / n as f64, cfg.shoot_horizon, cfg))
        .collect();
    let pair = scan
        .windows(2)
        .find(|w| w[0].branch == Branch::Overshoot && w[1].branch != Branch::Overshoot)
        .map(|w| (w[0].b, w[1]));
    let (mut lo, upper) = pair.ok_or_else(|| {
        let table: Vec<String> = scan
            .iter()
            .map(|s| format!("{:.4}:{:?}", s.b, s.branch))
            .collect();
        Error::NoSignChange(table.join(" "))
    })?;
    let mut hi = upper.b;
    if upper.branch == Branch::Bounded {
        lo = hi;
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        match shoot(mid, cfg.shoot_horizon, cfg).branch {
            Branch::Overshoot => lo = mid,
            Branch::Undershoot => hi = mid,
            Branch::Bounded => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let monotone_bracket = single_flip(lo, hi, cfg);
    let far_radius = grid.y_max().max(cfg.match_radius) + cfg.far_margin;
    let meta = EvalMeta {
        handoff: cfg.handoff,
        series_order: cfg.series_order,
        far_radius,
        rtol: cfg.rtol,
    };
    let (b, f_infinity) = match_profile(0.5 * (lo + hi), cfg, far_radius)?;
    let slack = 1e-12 * b.abs();
    if b < lo - slack || b > hi + slack {
        return Err(Error::NonConvergence(format!(
            "matched slope {b} left the bisection bracket [{lo}, {hi}]"
        )));
    }
    let (f, f_prime) = sample(b, f_infinity, cfg.match_radius, &meta, &grid)?;
    let mut sol = ProfileSolution {
        b,
        f_infinity,
        f,
        f_prime,
        residual: 0.0,
        bracket: [lo, hi],
        scan,
        monotone_bracket,
        meta,
    };
    sol.residual = sol.ode_defect();
    Ok(sol)
}

fn single_flip(lo: f64, hi: f64, cfg: &ProfileConfig) -> bool {
    if hi <= lo {
        return true;
    }
    let branches: Vec<Branch> = (0..=8)
        .into_par_iter()
        .map(|k| shoot(lo + (hi - lo) * k as f64 / 8.0, cfg.shoot_horizon, cfg).branch)
        .collect();
    let flips = branches.windows(2).filter(|w| w[0] != w[1]).count();
    flips <= 1 && branches[0] == Branch::Overshoot
}

fn forward_state(b: f64, y: f64, meta: &EvalMeta) -> Result<[f64; 2]> {
    let y0 = meta.handoff / b.abs().max(1.0);
    let coeffs = series_at_origin(b, meta.series_order)?;
    let (f, fp) = eval_series(&coeffs, y0.min(y));
    let mut ode = Dopri5::new(system, y0.min(y), [f, fp], ode_options(meta.rtol));
    ode.advance(y, |_, _| false)
        .map_err(|h| Error::NonConvergence(format!("forward integration halted: {h:?}")))?;
    Ok(ode.x)
}

fn backward_state(f_inf: f64, y: f64, meta: &EvalMeta) -> Result<[f64; 2]> {
    let (f, fp) = tail_series(f_inf, meta.far_radius);
    let mut ode = Dopri5::new(system, meta.far_radius, [f, fp], ode_options(meta.rtol));
    ode.advance(y, |_, _| false)
        .map_err(|h| Error::NonConvergence(format!("backward integration halted: {h:?}")))?;
    Ok(ode.x)
}

/// Newton iteration on `(b, f∞)` for continuity of `(f, f')` at the match
/// radius.
fn match_profile(b_start: f64, cfg: &ProfileConfig, far_radius: f64) -> Result<(f64, f64)> {
    let meta = EvalMeta {
        handoff: cfg.handoff,
        series_order: cfg.series_order,
        far_radius,
        rtol: cfg.rtol,
    };
    let ym = cfg.match_radius;
    let residual = |b: f64, finf: f64| -> Result<[f64; 2]> {
        let u = forward_state(b, ym, &meta)?;
        let v = backward_state(finf, ym, &meta)?;
        Ok([u[0] - v[0], u[1] - v[1]])
    };
    let start = forward_state(b_start, ym, &meta)?;
    let mut x = [b_start, start[0] + 0.5 * start[1] * ym];
    let mut r = residual(x[0], x[1])?;
    for _ in 0..30 {
        if r[0].abs().max(r[1].abs()) < 1e-14 {
            break;
        }
        let eps = 1e-6;
        let rb1 = residual(x[0] + eps, x[1])?;
        let rb0 = residual(x[0] - eps, x[1])?;
        let rf1 = residual(x[0], x[1] + eps)?;
        let rf0 = residual(x[0], x[1] - eps)?;
        let j = [
            [
                (rb1[0] - rb0[0]) / (2.0 * eps),
                (rf1[0] - rf0[0]) / (2.0 * eps),
            ],
            [
                (rb1[1] - rb0[1]) / (2.0 * eps),
                (rf1[1] - rf0[1]) / (2.0 * eps),
            ],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NonConvergence("singular matching Jacobian".into()));
        }
        let db = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let df = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let next = [x[0] - db, x[1] - df];
        let rn = residual(next[0], next[1])?;
        if rn[0].abs().max(rn[1].abs()) >= r[0].abs().max(r[1].abs()) && db.abs() < 1e-13 {
            break;
        }
        x = next;
        r = rn;
    }
    if r[0].abs().max(r[1].abs()) > 1e-9 {
        return Err(Error::NonConvergence(format!(
            "matching residual {:.3e} after Newton iterations",
            r[0].abs().max(r[1].abs())
        )));
    }
    Ok((x[0], x[1]))
}

fn sample(
    b: f64,
    f_inf: f64,
    ym: f64,
    meta: &EvalMeta,
    grid: &Arc<RadialGrid>,
) -> Result<(RadialFunction, RadialFunction)> {
    let nodes = grid.nodes();
    let mut f = vec![0.0; nodes.len()];
    let mut fp = vec![0.0; nodes.len()];
    let y0 = meta.handoff / b.abs().max(1.0);
    let coeffs = series_at_origin(b, meta.series_order)?;
    let (sf, sfp) = eval_series(&coeffs, y0);
    let mut fwd = Dopri5::new(system, y0, [sf, sfp], ode_options(meta.rtol));
    for (i, &y) in nodes.iter().enumerate().filter(|(_, y)| **y <= ym) {
        if y <= y0 {
            (f[i], fp[i]) = eval_series(&coeffs, y);
        } else {
            fwd.advance(y, |_, _| false)
                .map_err(|h| Error::NonConvergence(format!("sampling halted: {h:?}")))?;
            (f[i], fp[i]) = (fwd.x[0], fwd.x[1]);
        }
    }
    let (tf, tfp) = tail_series(f_inf, meta.far_radius);
    let mut bwd = Dopri5::new(system, meta.far_radius, [tf, tfp], ode_options(meta.rtol));
    for (i, &y) in nodes.iter().enumerate().rev().filter(|(_, y)| **y > ym) {
        bwd.advance(y, |_, _| false)
            .map_err(|h| Error::NonConvergence(format!("sampling halted: {h:?}")))?;
        (f[i], fp[i]) = (bwd.x[0], bwd.x[1]);
    }
    Ok((
        RadialFunction::new(grid.clone(), f, Parity::Odd)?,
        RadialFunction::new(grid.clone(), fp, Parity::Even)?,
    ))
}

/// Classical RK4 with fixed substeps, used as an independent check.
fn rk4(mut y: f64, mut x: [f64; 2], to: f64, steps: usize) -> [f64; 2] {
    let h = (to - y) / steps as f64;
    for _ in 0..steps {
        let k1 = system(y, &x);
        let k2 = system(
            y + 0.5 * h,
            &[x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]],
        );
        let k3 = system(
            y + 0.5 * h,
            &[x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]],
        );
        let k4 = system(y + h, &[x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        y += h;
    }
    x
}

/// Least-squares fit `f ≈ f∞ + A y^p` on the outer third of the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub exponent: f64,
    pub f_infinity: f64,
    pub amplitude: f64,
    pub rms: f64,
    /// No decaying tail could be fitted.
    pub degenerate: bool,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    b: f64,
    f_infinity: f64,
    residual: f64,
    #[serde(rename = "Y_max")]
    y_max: f64,
    resolution: usize,
    #[serde(default)]
    stretch: Option<f64>,
    bracket: [f64; 2],
}

impl ProfileSolution {
    /// Assembles a solution from given samples (for synthetic profiles).
    pub fn from_samples(
        b: f64,
        f_infinity: f64,
        f: RadialFunction,
        f_prime: RadialFunction,
    ) -> Result<Self> {
        f.check_same_grid(&f_prime)?;
        if f.parity() != Parity::Odd || f_prime.parity() != Parity::Even {
            return Err(Error::ParityMismatch {
                expected: "odd f / even f'",
            });
        }
        let cfg = ProfileConfig::default();
        let far_radius = f.grid().y_max().max(cfg.match_radius) + cfg.far_margin;
        Ok(Self {
            b,
            f_infinity,
            f,
            f_prime,
            residual: f64::NAN,
            bracket: [b, b],
            scan: Vec::new(),
            monotone_bracket: true,
            meta: EvalMeta {
                handoff: cfg.handoff,
                series_order: cfg.series_order,
                far_radius,
                rtol: cfg.rtol,
            },
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.f.grid()
    }

    /// Largest `|Δ(f, f')| / Δy` between the stored samples at consecutive
    /// nodes and an RK4 re-integration from the left node.
    pub fn ode_defect(&self) -> f64 {
        let y = self.f.nodes();
        let (f, fp) = (self.f.values(), self.f_prime.values());
        (0..y.len() - 1)
            .into_par_iter()
            .map(|i| {
                let dy = y[i + 1] - y[i];
                let h = (0.002f64).min(0.02 * y[i]).min(0.05 / y[i]);
                let steps = (dy / h).ceil().max(4.0) as usize;
                let x = rk4(y[i], [f[i], fp[i]], y[i + 1], steps);
                ((x[0] - f[i + 1]).abs().max((x[1] - fp[i + 1]).abs())) / dy
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `(f₀(y), f₀'(y))` for any `y ≥ 0`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let y = y.abs();
        let m = &self.meta;
        let y0 = m.handoff / self.b.abs().max(1.0);
        if y <= y0 {
            let c = series_at_origin(self.b, m.series_order).expect("validated order");
            return eval_series(&c, y);
        }
        if y >= m.far_radius {
            return tail_series(self.f_infinity, y);
        }
        let nodes = self.f.nodes();
        let last = nodes.len() - 1;
        if y > nodes[last] {
            return backward_state(self.f_infinity, y, m)
                .map(|x| (x[0], x[1]))
                .unwrap_or((f64::NAN, f64::NAN));
        }
        let i = match nodes.binary_search_by(|n| n.total_cmp(&y)) {
            Ok(i) => return (self.f.values()[i], self.f_prime.values()[i]),
            Err(i) => i,
        };
        let (start, state) = if i == 0 {
            let c = series_at_origin(self.b, m.series_order).expect("validated order");
            let (a, b) = eval_series(&c, y0);
            (y0, [a, b])
        } else {
            let k = if i <= last && nodes[i] - y < y - nodes[i - 1] {
                i
            } else {
                i - 1
            };
            (nodes[k], [self.f.values()[k], self.f_prime.values()[k]])
        };
        let mut ode = Dopri5::new(system, start, state, ode_options(m.rtol));
        match ode.advance(y, |_, _| false) {
            Ok(()) => (ode.x[0], ode.x[1]),
            Err(_) => (f64::NAN, f64::NAN),
        }
    }

    /// Samples `f₀` on another grid.
    pub fn f_on(&self, grid: &Arc<RadialGrid>) -> (RadialFunction, RadialFunction) {
        if **grid == **self.grid() {
            return (self.f.clone(), self.f_prime.clone());
        }
        let (f, fp): (Vec<f64>, Vec<f64>) = grid.nodes().par_iter().map(|&y| self.eval(y)).unzip();
        (
            RadialFunction::new(grid.clone(), f, Parity::Odd).expect("sized to grid"),
            RadialFunction::new(grid.clone(), fp, Parity::Even).expect("sized to grid"),
        )
    }

    pub fn tail_fit(&self) -> TailFit {
        let y_max = self.grid().y_max();
        let pts: Vec<(f64, f64, f64)> = self
            .f
            .nodes()
            .iter()
            .zip(self.f.values().iter().zip(self.f_prime.values()))
            .filter(|(y, _)| **y >= y_max / 3.0)
            .map(|(y, (f, fp))| (*y, *f, *fp))
            .collect();
        let degenerate = TailFit {
            exponent: f64::NAN,
            f_infinity: f64::NAN,
            amplitude: f64::NAN,
            rms: f64::NAN,
            degenerate: true,
        };
        if pts.len() < 4 || pts.iter().any(|p| !(p.2.abs() > 0.0)) {
            return degenerate;
        }
        let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ld: Vec<f64> = pts.iter().map(|p| p.2.abs().ln()).collect();
        let Some(slope) = linear_fit(&lx, &ld) else {
            return degenerate;
        };
        let p = slope.slope + 1.0;
        if !(p < 0.0) {
            return degenerate;
        }
        let xs: Vec<f64> = pts.iter().map(|q| q.0.powf(p)).collect();
        let fs: Vec<f64> = pts.iter().map(|q| q.1).collect();
        let Some(line) = linear_fit(&xs, &fs) else {
            return degenerate;
        };
        TailFit {
            exponent: p,
            f_infinity: line.intercept,
            amplitude: line.slope,
            rms: line.rms,
            degenerate: false,
        }
    }

    /// Writes `y,f,f_prime` rows and the JSON sidecar.
    pub fn write(&self, csv: impl AsRef<Path>, json: impl AsRef<Path>) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(csv)?);
        writeln!(out, "y,f,f_prime")?;
        for ((y, f), fp) in self
            .f
            .nodes()
            .iter()
            .zip(self.f.values())
            .zip(self.f_prime.values())
        {
            writeln!(out, "{y:.17e},{f:.17e},{fp:.17e}")?;
        }
        out.flush()?;
        let side = Sidecar {
            b: self.b,
            f_infinity: self.f_infinity,
            residual: self.residual,
            y_max: self.grid().y_max(),
            resolution: self.grid().len(),
            stretch: Some(self.grid().stretch()),
            bracket: self.bracket,
        };
        std::fs::write(json, serde_json::to_string_pretty(&side)? + "\n")?;
        Ok(())
    }

    pub fn read(csv: impl AsRef<Path>, json: impl AsRef<Path>) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(json)?)?;
        let text = std::fs::read_to_string(csv)?;
        let mut cols: [Vec<f64>; 3] = Default::default();
        for (k, line) in text.lines().enumerate().skip(1) {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
            if vals.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", k + 1)));
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        if cols[0].len() != side.resolution || cols[0].last() != Some(&side.y_max) {
            return Err(Error::Parse("sidecar disagrees with samples".into()));
        }
        let grid = match side.stretch {
            Some(k) => {
                let g = RadialGrid::new(GridSpec::new(side.y_max, side.resolution, k))?;
                let off = g
                    .nodes()
                    .iter()
                    .zip(&cols[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if off > 1e-12 * side.y_max {
                    return Err(Error::Parse(
                        "samples are not on the grid named in the sidecar".into(),
                    ));
                }
                Arc::new(g)
            }
            None => Arc::new(RadialGrid::from_nodes(&cols[0])?),
        };
        let [_, f, fp] = cols;
        let mut sol = Self::from_samples(
            side.b,
            side.f_infinity,
            RadialFunction::new(grid.clone(), f, Parity::Odd)?,
            RadialFunction::new(grid, fp, Parity::Even)?,
        )?;
        sol.residual = side.residual;
        sol.bracket = side.bracket;
        Ok(sol)
    }
}

impl std::fmt::Display for Halt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}
