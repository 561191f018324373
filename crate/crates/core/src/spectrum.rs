//! Spectrum of the linearized operator
//! `L̂ = Δ - Λ - V`, `V = -4 (sin f₀ / y)²`, on even radial functions.
//!
//! In the weighted space `L²(ρ)`, `ρ = y⁴ e^{-y²/4}`, the operator takes the
//! Sturm–Liouville form `ρ⁻¹(ρ f')' - (½ + V) f`. It is discretized through
//! its quadratic form: a staggered eighth-order derivative maps node values
//! to cell faces, so the stiffness matrix is symmetric by construction and
//! the eigenproblem reduces to a dense symmetric one.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::profile::ProfileSolution;
use crate::radial::quadrature::gauss_legendre;
use crate::radial::stencil::fornberg;
use crate::radial::{Parity, RadialFunction, RadialGrid};

const FACE_WIDTH: usize = 8;

/// Discrete operator `A = -M⁻¹ S` on samples of even functions.
#[derive(Debug, Clone)]
pub struct OperatorAssembly {
    grid: Arc<RadialGrid>,
    /// Lumped `ρ`-mass of each node.
    mass: Vec<f64>,
    /// Symmetric form `∫ ρ f'g' + ∫ ρ (½ + V) f g`.
    stiffness: DMatrix<f64>,
    potential: RadialFunction,
}

/// Weighted Gram data `ρ` at `y`.
fn rho(y: f64) -> f64 {
    y.powi(4) * (-0.25 * y * y).exp()
}

/// Potential `V = -4 (sin f₀ / y)²` on the grid, or zero without a profile.
pub fn potential(p: Option<&ProfileSolution>, grid: &Arc<RadialGrid>) -> RadialFunction {
    match p {
        None => RadialFunction::zeros(grid.clone(), Parity::Even),
        Some(p) => {
            let (f, _) = p.f_on(grid);
            let v = f
                .values()
                .iter()
                .zip(grid.nodes())
                .map(|(f, y)| -4.0 * (f.sin() / y).powi(2))
                .collect();
            RadialFunction::new(grid.clone(), v, Parity::Even).expect("sized to grid")
        }
    }
}

/// Builds the discrete operator around `p` (or the free operator `Δ - Λ`).
pub fn assemble_operator(
    p: Option<&ProfileSolution>,
    grid: Arc<RadialGrid>,
) -> Result<OperatorAssembly> {
    let n = grid.len();
    if n < 4 * FACE_WIDTH {
        return Err(Error::GridTooCoarse {
            nodes: n,
            required: 4 * FACE_WIDTH,
        });
    }
    if grid.y_max() > 50.0 {
        return Err(invalid(
            "Y_max",
            grid.y_max(),
            "weighted assembly requires Y_max <= 50",
        ));
    }
    if grid.nodes()[0] <= 0.0 {
        return Err(Error::GridMismatch(
            "operator grids must not contain the origin".into(),
        ));
    }
    let h = grid.xi_step();
    let xi = |j: isize| (j as f64 + 0.5) * h;
    let v = potential(p, &grid);
    let mut mass: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.jacobian())
        .map(|(y, j)| h * j * rho(*y))
        .collect();
    mass[n - 1] *= 0.5;

    let mut stiffness = DMatrix::<f64>::zeros(n, n);
    let w = FACE_WIDTH as isize;
    for face in 1..n {
        let (yf, jf) = grid.map(face as f64 * h);
        let q = h * jf * rho(yf);
        if q == 0.0 {
            continue;
        }
        let start = (face as isize - w / 2).min(n as isize - w);
        let xs: Vec<f64> = (start..start + w).map(xi).collect();
        let d = fornberg(face as f64 * h, &xs, 1).swap_remove(1);
        // fold mirror nodes (even parity) and convert to d/dy
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(FACE_WIDTH);
        for (k, dk) in d.iter().enumerate() {
            let j = start + k as isize;
            let idx = if j >= 0 {
                j as usize
            } else {
                (-1 - j) as usize
            };
            match row.iter_mut().find(|(i, _)| *i == idx) {
                Some(e) => e.1 += dk / jf,
                None => row.push((idx, dk / jf)),
            }
        }
        for &(a, da) in &row {
            for &(b, db) in &row {
                if b >= a {
                    stiffness[(a, b)] += q * da * db;
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            stiffness[(a, b)] = stiffness[(b, a)];
        }
        stiffness[(a, a)] += mass[a] * (0.5 + v.values()[a]);
    }
    Ok(OperatorAssembly {
        grid,
        mass,
        stiffness,
        potential: v,
    })
}

/// An eigenvalue with its `ρ`-normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: RadialFunction,
    /// `‖Aφ - λφ‖_ρ`.
    pub residual: f64,
}

impl OperatorAssembly {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }
    pub fn potential(&self) -> &RadialFunction {
        &self.potential
    }

    /// `A v = -M⁻¹ S v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        let s = &self.stiffness * x;
        s.iter().zip(&self.mass).map(|(s, m)| -s / m).collect()
    }

    /// Dense matrix of `A`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let mut a = -self.stiffness.clone();
        for (i, m) in self.mass.iter().enumerate() {
            a.row_mut(i).scale_mut(1.0 / m);
        }
        a
    }

    /// `‖A - A†‖_F / ‖A‖_F`, with `A† = M⁻¹ Aᵀ M` the `ρ`-adjoint.
    pub fn symmetry_defect(&self) -> f64 {
        let a = self.operator_matrix();
        let ma = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| self.mass[i] * a[(i, j)]);
        (&ma - ma.transpose()).norm() / ma.norm()
    }

    /// Discrete `ρ`-inner product.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// The `k` largest eigenvalues (in decreasing order) and eigenfunctions.
pub fn eigenpairs(a: &OperatorAssembly, k: usize) -> Result<Vec<EigenPair>> {
    let n = a.grid.len();
    if k == 0 || k > n / 4 {
        return Err(invalid("k", k, "must lie in 1..=resolution/4"));
    }
    let inv_sqrt: Vec<f64> = a.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| a.stiffness[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let pairs = order
        .into_iter()
        .take(k)
        .map(|c| {
            let lambda = -eig.eigenvalues[c];
            let mut phi: Vec<f64> = (0..n)
                .map(|i| eig.eigenvectors[(i, c)] * inv_sqrt[i])
                .collect();
            let norm = a.norm(&phi);
            phi.iter_mut().for_each(|v| *v /= norm);
            let sign = first_extremum_sign(&phi);
            phi.iter_mut().for_each(|v| *v *= sign);
            let aphi = a.apply(&phi);
            let r: Vec<f64> = aphi.iter().zip(&phi).map(|(x, p)| x - lambda * p).collect();
            EigenPair {
                lambda,
                residual: a.norm(&r),
                phi: RadialFunction::new(a.grid.clone(), phi, Parity::Even).expect("sized to grid"),
            }
        })
        .collect();
    Ok(pairs)
}

/// Sign of the first local extremum of a `ρ`-normalized `φ` (the origin
/// counts, by parity).
fn first_extremum_sign(phi: &[f64]) -> f64 {
    for i in 0..phi.len() {
        let prev = if i == 0 { phi[0] } else { phi[i - 1] };
        let next = phi.get(i + 1).copied().unwrap_or(phi[i]);
        let v = phi[i];
        let is_ext = (v >= prev && v >= next) || (v <= prev && v <= next);
        if is_ext && v.abs() > 1e-8 {
            return v.signum();
        }
    }
    1.0
}

/// How well `f₀'` solves the discrete eigenproblem with eigenvalue 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TranslationModeCheck {
    /// `‖A f₀' - f₀'‖_ρ / ‖f₀'‖_ρ`.
    pub residual: f64,
    /// `|cos|` of the angle between `f₀'` and the top eigenvector, if given.
    pub alignment: Option<f64>,
}

pub fn verify_translation_mode(
    a: &OperatorAssembly,
    p: &ProfileSolution,
    top: Option<&EigenPair>,
) -> TranslationModeCheck {
    let (_, fp) = p.f_on(&a.grid);
    let g = fp.values();
    let ag = a.apply(g);
    let r: Vec<f64> = ag.iter().zip(g).map(|(x, v)| x - v).collect();
    let alignment =
        top.map(|e| (a.inner(g, e.phi.values()) / (a.norm(g) * a.norm(e.phi.values()))).abs());
    TranslationModeCheck {
        residual: a.norm(&r) / a.norm(g),
        alignment,
    }
}

/// Spectral gap `c₀ = -λ₂`.
pub fn spectral_gap(pairs: &[EigenPair]) -> Option<f64> {
    pairs.get(1).map(|e| -e.lambda)
}

/// Summary written by the spectrum stage.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub resolution: usize,
    #[serde(rename = "Y_max")]
    pub y_max: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub gap_c0: Option<f64>,
    pub translation_mode_residual: Option<f64>,
}

impl SpectrumReport {
    pub fn new(
        a: &OperatorAssembly,
        pairs: &[EigenPair],
        tm: Option<&TranslationModeCheck>,
    ) -> Self {
        Self {
            resolution: a.grid.len(),
            y_max: a.grid.y_max(),
            eigenvalues: pairs.iter().map(|e| e.lambda).collect(),
            residuals: pairs.iter().map(|e| e.residual).collect(),
            gap_c0: spectral_gap(pairs),
            translation_mode_residual: tm.map(|t| t.residual),
        }
    }
}

/// Angular average of `e^{2zr cos θ/α}` over S⁴ times `e^{-c}`, `c = 2zr/α`,
/// normalized by `|S³| = 2π²`.
fn angular_factor(c: f64) -> f64 {
    if c < 0.1 {
        let c2 = c * c;
        (4.0 / 3.0 + c2 * (4.0 / 30.0 + c2 * (4.0 / 840.0 + c2 * 4.0 / 45360.0))) * (-c).exp()
    } else {
        let e = (-2.0 * c).exp();
        4.0 / (c * c) * (0.5 * (1.0 + e) - 0.5 * (1.0 - e) / c)
    }
}

/// `e^{s(Δ - ½ y∂_y)} f` by quadrature against the five-dimensional heat
/// kernel: `(K_α * f)(e^{-s/2} y)` with `α = 4(1 - e^{-s})`. The input is
/// extended by its last value beyond `Y_max`.
pub fn free_kernel_apply(f: &RadialFunction, s: f64) -> Result<RadialFunction> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", s, "must be finite and non-negative"));
    }
    if s < 1e-8 {
        return Ok(f.clone());
    }
    let alpha = 4.0 * (-(-s).exp_m1());
    let width = alpha.sqrt();
    let (gx, gw) = gauss_legendre(8);
    let y_max = f.grid().y_max();
    let last = *f.values().last().expect("non-empty grid");
    let norm = 2.0 * std::f64::consts::PI.powi(2) * (std::f64::consts::PI * alpha).powf(-2.5);
    let panel = (0.5 * width).min(0.25);
    let values = f
        .nodes()
        .iter()
        .map(|&x| {
            let z = (-0.5 * s).exp() * x;
            let lo = (z - 12.0 * width).max(0.0);
            let hi = z + 12.0 * width;
            let m = ((hi - lo) / panel).ceil().max(1.0) as usize;
            let dh = (hi - lo) / m as f64;
            let mut acc = 0.0;
            for k in 0..m {
                let a = lo + k as f64 * dh;
                for (t, w) in gx.iter().zip(&gw) {
                    let r = a + 0.5 * dh * (1.0 + t);
                    let fr = if r <= y_max { f.interpolate(r) } else { last };
                    let g = (-(z - r).powi(2) / alpha).exp() * angular_factor(2.0 * z * r / alpha);
                    acc += 0.5 * dh * w * fr * r.powi(4) * g;
                }
            }
            norm * acc
        })
        .collect();
    Ok(f.with_values(values))
}
