use serde::{Deserialize, Serialize};

use super::quadrature::interpolatory_weights;
use super::stencil::Stencil;
use crate::error::{invalid, Error, Result};

/// Width of the centered differentiation stencils (eighth order).
pub const STENCIL_WIDTH: usize = 9;
const QUAD_WIDTH: usize = 8;

/// Parameters that determine a [`RadialGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_max: f64,
    pub resolution: usize,
    /// Clustering strength of the sinh map; zero gives uniform spacing.
    pub stretch: f64,
}

impl GridSpec {
    pub fn new(y_max: f64, resolution: usize, stretch: f64) -> Self {
        Self {
            y_max,
            resolution,
            stretch,
        }
    }
}

/// Cell-centered radial grid `y_i = a sinh(κ ξ_i)`, `ξ_i = (i + ½) h`,
/// with the last node exactly at `y_max`. There is no node at the origin.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    spec: GridSpec,
    h: f64,
    scale: f64,
    nodes: Vec<f64>,
    jacobian: Vec<f64>,
    weights: Vec<f64>,
    d1: Option<Stencil>,
    d2: Option<Stencil>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl RadialGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        if !(spec.y_max.is_finite() && spec.y_max > 0.0) {
            return Err(invalid("Y_max", spec.y_max, "must be finite and positive"));
        }
        if spec.resolution < 4 {
            return Err(invalid("resolution", spec.resolution, "must be at least 4"));
        }
        if !(spec.stretch.is_finite() && (0.0..=60.0).contains(&spec.stretch)) {
            return Err(invalid("stretch", spec.stretch, "must lie in [0, 60]"));
        }
        let n = spec.resolution;
        let h = 1.0 / (n as f64 - 0.5);
        let kappa = spec.stretch;
        let scale = if kappa > 0.0 {
            spec.y_max / kappa.sinh()
        } else {
            spec.y_max
        };
        let map = |xi: f64| -> (f64, f64) {
            if kappa > 0.0 {
                (
                    scale * (kappa * xi).sinh(),
                    scale * kappa * (kappa * xi).cosh(),
                )
            } else {
                (scale * xi, scale)
            }
        };
        let (mut nodes, jacobian): (Vec<f64>, Vec<f64>) =
            (0..n).map(|i| map((i as f64 + 0.5) * h)).unzip();
        nodes[n - 1] = spec.y_max;
        let weights = Self::quadrature(&nodes, &jacobian, h);
        let (d1, d2) = if n >= STENCIL_WIDTH {
            (
                Some(Stencil::new(&nodes, STENCIL_WIDTH, 1)),
                Some(Stencil::new(&nodes, STENCIL_WIDTH, 2)),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            spec,
            h,
            scale,
            nodes,
            jacobian,
            weights,
            d1,
            d2,
        })
    }

    /// Uniform-in-ξ composite interpolatory rule for `∫ g y⁴ dy`, with the
    /// vanishing integrand at the origin used as an extra node.
    fn quadrature(nodes: &[f64], jac: &[f64], h: f64) -> Vec<f64> {
        let n = nodes.len();
        let q = QUAD_WIDTH.min(n);
        let xi = |i: usize| (i as f64 + 0.5) * h;
        let mut w = vec![0.0; n];

        let mut xs = vec![0.0];
        xs.extend((0..q - 1).map(xi));
        let first = interpolatory_weights(&xs, 0.0, xi(0));
        for (j, wj) in first.iter().enumerate().skip(1) {
            w[j - 1] += wj;
        }
        for i in 0..n - 1 {
            let start = (i as isize - (q as isize / 2 - 1)).clamp(0, (n - q) as isize) as usize;
            let xs: Vec<f64> = (start..start + q).map(xi).collect();
            let seg = interpolatory_weights(&xs, xi(i), xi(i + 1));
            for (k, wk) in seg.iter().enumerate() {
                w[start + k] += wk;
            }
        }
        w.iter()
            .zip(nodes.iter().zip(jac))
            .map(|(w, (y, j))| w * y.powi(4) * j)
            .collect()
    }

    /// Rebuilds a grid from its node list, inferring the stretch parameter.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        let n = nodes.len();
        if n < 4 {
            return Err(Error::GridTooCoarse {
                nodes: n,
                required: 4,
            });
        }
        let y_max = nodes[n - 1];
        let h = 1.0 / (n as f64 - 0.5);
        let first = |k: f64| {
            if k > 0.0 {
                y_max * (0.5 * k * h).sinh() / k.sinh()
            } else {
                0.5 * y_max * h
            }
        };
        // first node decreases monotonically in κ
        let target = nodes[0];
        let kappa = if target >= first(0.0) * (1.0 - 1e-12) {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 60.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if first(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let grid = Self::new(GridSpec::new(y_max, n, kappa))?;
        let rebuilt = grid.nodes();
        let ok = nodes
            .iter()
            .zip(rebuilt)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        if !ok {
            return Err(Error::GridMismatch(
                "nodes do not follow the sinh-mapped cell-centered layout".into(),
            ));
        }
        Ok(grid)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn y_max(&self) -> f64 {
        self.spec.y_max
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn stretch(&self) -> f64 {
        self.spec.stretch
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    /// `dy/dξ` at the nodes.
    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }
    /// Spacing in the computational coordinate ξ.
    pub fn xi_step(&self) -> f64 {
        self.h
    }
    /// Weights `w_i` with `∫_0^{Y_max} g y⁴ dy ≈ Σ w_i g(y_i)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Physical coordinate and Jacobian at computational coordinate ξ.
    pub fn map(&self, xi: f64) -> (f64, f64) {
        let k = self.spec.stretch;
        if k > 0.0 {
            (
                self.scale * (k * xi).sinh(),
                self.scale * k * (k * xi).cosh(),
            )
        } else {
            (self.scale * xi, self.scale)
        }
    }

    /// Computational coordinate of `y`.
    pub fn inverse_map(&self, y: f64) -> f64 {
        let k = self.spec.stretch;
        if k > 0.0 {
            (y / self.scale).asinh() / k
        } else {
            y / self.scale
        }
    }

    /// Distance between the first two nodes.
    pub fn origin_spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    pub fn d1(&self) -> Result<&Stencil> {
        self.d1.as_ref().ok_or(Error::GridTooCoarse {
            nodes: self.len(),
            required: STENCIL_WIDTH,
        })
    }

    pub fn d2(&self) -> Result<&Stencil> {
        self.d2.as_ref().ok_or(Error::GridTooCoarse {
            nodes: self.len(),
            required: STENCIL_WIDTH,
        })
    }

    /// Index of the window start for `width`-point interpolation around `y`.
    pub(crate) fn window_start(&self, y: f64, width: usize) -> isize {
        let pos = self.inverse_map(y) / self.h - 0.5;
        let base = pos.floor() as isize;
        (base - (width as isize / 2 - 1)).min(self.len() as isize - width as isize)
    }
}
