//! Finite-difference stencils on nonuniform radial nodes.
//!
//! Rows may reach past the origin; indices `j < 0` refer to the mirror node
//! `-1 - j` at `-y`, whose value is `±f` depending on parity.

use super::Parity;

/// Fornberg weights. Returns `w[k][j]`, the weight of node `xs[j]` in the
/// `k`-th derivative at `x0`, for `k = 0..=m`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone)]
pub struct StencilRow {
    pub start: isize,
    pub weights: Vec<f64>,
}

/// A banded differentiation operator stored row by row.
#[derive(Debug, Clone)]
pub struct Stencil {
    rows: Vec<StencilRow>,
}

/// Coordinate of (possibly mirrored) node `j`.
pub(crate) fn node_coord(nodes: &[f64], j: isize) -> f64 {
    if j >= 0 {
        nodes[j as usize]
    } else {
        -nodes[(-1 - j) as usize]
    }
}

/// Folds index `j` onto a stored node, returning the node and the sign.
#[inline]
pub(crate) fn fold(j: isize, parity: Parity) -> (usize, f64) {
    if j >= 0 {
        (j as usize, 1.0)
    } else {
        ((-1 - j) as usize, parity.sign())
    }
}

impl Stencil {
    /// Centered `width`-point stencils for derivative `deriv`, shifted to one
    /// side near the outer boundary. Requires `nodes.len() >= width`.
    pub fn new(nodes: &[f64], width: usize, deriv: usize) -> Self {
        let n = nodes.len() as isize;
        let w = width as isize;
        let rows = (0..n)
            .map(|i| {
                let start = (i - (w - 1) / 2).min(n - w);
                let xs: Vec<f64> = (start..start + w).map(|j| node_coord(nodes, j)).collect();
                let weights = fornberg(nodes[i as usize], &xs, deriv).swap_remove(deriv);
                StencilRow { start, weights }
            })
            .collect();
        Self { rows }
    }

    pub fn rows(&self) -> &[StencilRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Applies the stencil to samples of a function with the given parity.
    pub fn apply(&self, v: &[f64], parity: Parity) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| {
                        let (j, s) = fold(r.start + k as isize, parity);
                        w * s * v[j]
                    })
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn stencil_differentiates_even_polynomial_through_origin() {
        let nodes: Vec<f64> = (0..20).map(|i| 0.1 * (i as f64 + 0.5)).collect();
        let v: Vec<f64> = nodes.iter().map(|y| y * y * y * y).collect();
        let d1 = Stencil::new(&nodes, 9, 1).apply(&v, Parity::Even);
        for (y, d) in nodes.iter().zip(&d1) {
            assert!((d - 4.0 * y * y * y).abs() < 1e-10);
        }
    }
}
