//! Radial calculus in ℝ⁵: Laplacian, dilation generator, weighted inner
//! products and the `X` / `Y` norms.

use serde::Serialize;

use super::{Parity, RadialFunction};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::SPHERE_AREA;

/// First derivative; flips parity.
pub fn derivative(f: &RadialFunction) -> Result<RadialFunction> {
    let d = f.grid().d1()?.apply(f.values(), f.parity());
    RadialFunction::new(f.grid().clone(), d, f.parity().flip())
}

/// `Δf = f'' + (4/y) f'` for radial `f` on ℝ⁵.
pub fn laplacian5(f: &RadialFunction) -> Result<RadialFunction> {
    let g = f.grid();
    let d1 = g.d1()?.apply(f.values(), f.parity());
    let d2 = g.d2()?.apply(f.values(), f.parity());
    let v = g
        .nodes()
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(y, (a, b))| b + 4.0 * a / y)
        .collect();
    RadialFunction::new(g.clone(), v, f.parity())
}

/// `Λf = (y/2) f' + f/2`.
pub fn lambda_op(f: &RadialFunction) -> Result<RadialFunction> {
    let d1 = f.grid().d1()?.apply(f.values(), f.parity());
    let v = f
        .nodes()
        .iter()
        .zip(d1.iter().zip(f.values()))
        .map(|(y, (d, v))| 0.5 * y * d + 0.5 * v)
        .collect();
    Ok(f.with_values(v))
}

fn gaussian_weighted_sum(f: &RadialFunction, g: &RadialFunction) -> Result<f64> {
    f.check_same_grid(g)?;
    let grid = f.grid();
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(f.values().iter().zip(g.values()))
        .map(|((y, w), (a, b))| w * a * b * (-0.25 * y * y).exp())
        .sum())
}

/// `(f|g)_σ = |S⁴| ∫ f g y⁴ e^{-y²/4} dy` on the truncated domain.
pub fn inner_sigma(f: &RadialFunction, g: &RadialFunction) -> Result<f64> {
    Ok(SPHERE_AREA * gaussian_weighted_sum(f, g)?)
}

pub fn norm_sigma(f: &RadialFunction) -> f64 {
    inner_sigma(f, f).unwrap_or(0.0).sqrt()
}

/// `‖f‖_ρ` with `ρ = y⁴ e^{-y²/4}` (no sphere factor).
pub fn norm_rho(f: &RadialFunction) -> f64 {
    gaussian_weighted_sum(f, f).unwrap_or(0.0).sqrt()
}

/// Unweighted `L²(ℝ⁵)` inner product over the truncated ball.
pub fn inner_l2(f: &RadialFunction, g: &RadialFunction) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(SPHERE_AREA
        * f.grid()
            .weights()
            .iter()
            .zip(f.values().iter().zip(g.values()))
            .map(|(w, (a, b))| w * a * b)
            .sum::<f64>())
}

/// Unweighted `L²(ℝ⁵)` norm over the truncated ball.
pub fn norm_l2(f: &RadialFunction) -> f64 {
    (SPHERE_AREA * squared_sum(f)).sqrt()
}

fn squared_sum(f: &RadialFunction) -> f64 {
    f.grid()
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v * v)
        .sum()
}

/// Options for the `X` norm.
#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    /// Relative size of `|f|` on the last 5% of nodes that counts as a
    /// non-decaying tail.
    pub tail_threshold: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tail_threshold: 1e-3,
        }
    }
}

/// `‖f‖_X = ‖Δf‖ + ‖Δ²f‖` on the truncated ball, plus power-law tail
/// estimates for the squared norms beyond `Y_max`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct XNorm {
    pub value: f64,
    pub dot_h2: f64,
    pub dot_h4: f64,
    pub tail_h2: f64,
    pub tail_h4: f64,
    pub tail_flag: bool,
}

impl XNorm {
    /// Norm with the extrapolated tails included.
    pub fn corrected(&self) -> f64 {
        self.corrected_h2() + self.corrected_h4()
    }
    pub fn corrected_h2(&self) -> f64 {
        (self.dot_h2 * self.dot_h2 + self.tail_h2).sqrt()
    }
    pub fn corrected_h4(&self) -> f64 {
        (self.dot_h4 * self.dot_h4 + self.tail_h4).sqrt()
    }
}

/// Extrapolates `|S⁴| ∫_{Y}^∞ g² y⁴ dy` from a power law fitted on the outer
/// half of the grid. Returns `None` when the integrand does not decay fast
/// enough to be integrable.
pub fn tail_integral(g: &RadialFunction) -> Option<f64> {
    let y_max = g.grid().y_max();
    let outer = g
        .nodes()
        .iter()
        .zip(g.values())
        .filter(|(y, _)| **y >= 0.5 * y_max)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if outer <= 1e-12 * g.max_abs() {
        return Some(0.0);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = g
        .nodes()
        .iter()
        .zip(g.values())
        .filter(|(y, v)| **y >= 0.5 * y_max && v.abs() > 0.0)
        .map(|(y, v)| (y.ln(), (v * v * y.powi(4)).ln()))
        .unzip();
    if xs.len() < 4 {
        return Some(0.0);
    }
    let fit = linear_fit(&xs, &ys)?;
    let p = -fit.slope;
    if p <= 1.05 {
        return None;
    }
    let at_end = (fit.intercept + fit.slope * y_max.ln()).exp();
    Some(SPHERE_AREA * at_end * y_max / (p - 1.0))
}

fn has_tail(f: &RadialFunction, threshold: f64) -> bool {
    let n = f.values().len();
    let k = (n / 20).max(1);
    let max = f.max_abs();
    let tail = f.values()[n - k..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    max > 0.0 && tail > threshold * max
}

pub fn norm_x(f: &RadialFunction, opts: &NormOptions) -> Result<XNorm> {
    let l1 = laplacian5(f)?;
    let l2 = laplacian5(&l1)?;
    let dot_h2 = norm_l2(&l1);
    let dot_h4 = norm_l2(&l2);
    let t2 = tail_integral(&l1);
    let t4 = tail_integral(&l2);
    Ok(XNorm {
        value: dot_h2 + dot_h4,
        dot_h2,
        dot_h4,
        tail_h2: t2.unwrap_or(0.0),
        tail_h4: t4.unwrap_or(0.0),
        tail_flag: has_tail(f, opts.tail_threshold) || t2.is_none() || t4.is_none(),
    })
}

/// `f / y` for odd `f`, an even function.
pub fn divide_by_y(h: &RadialFunction) -> Result<RadialFunction> {
    if h.parity() != Parity::Odd {
        return Err(Error::ParityMismatch { expected: "odd" });
    }
    let v = h
        .nodes()
        .iter()
        .zip(h.values())
        .map(|(y, v)| v / y)
        .collect();
    RadialFunction::new(h.grid().clone(), v, Parity::Even)
}

/// `‖h‖_Y = ‖h/y‖_X` for odd `h`.
pub fn norm_y(h: &RadialFunction, opts: &NormOptions) -> Result<XNorm> {
    norm_x(&divide_by_y(h)?, opts)
}

/// Ratio `(‖f‖_∞ + ‖f'‖_∞) / ‖f‖_X` probing the embedding `X ⊂ W^{1,∞}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingCheck {
    pub sup: f64,
    pub sup_derivative: f64,
    pub norm_x: f64,
    /// `None` when `‖f‖_X` vanishes.
    pub ratio: Option<f64>,
}

pub fn sup_embedding_check(f: &RadialFunction) -> Result<EmbeddingCheck> {
    let d = derivative(f)?;
    let x = norm_x(f, &NormOptions::default())?;
    let sup = f.max_abs();
    let sup_derivative = d.max_abs();
    let ratio = (x.value > 0.0).then(|| (sup + sup_derivative) / x.value);
    Ok(EmbeddingCheck {
        sup,
        sup_derivative,
        norm_x: x.value,
        ratio,
    })
}

/// `‖f'/y‖ / ‖Δf‖`, bounded by 2 in five dimensions.
pub fn hardy_ratio(f: &RadialFunction) -> Result<Option<f64>> {
    let d = derivative(f)?;
    let q = f.with_values(
        d.values()
            .iter()
            .zip(f.nodes())
            .map(|(d, y)| d / y)
            .collect(),
    );
    let den = norm_l2(&laplacian5(f)?);
    Ok((den > 0.0).then(|| norm_l2(&q) / den))
}
