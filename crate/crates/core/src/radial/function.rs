use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::quadrature::lagrange_basis;
use super::stencil::{fold, node_coord};
use super::RadialGrid;
use crate::error::{Error, Result};

const INTERP_WIDTH: usize = 8;

/// Parity of the odd or even extension across the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    parity: Parity,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, parity: Parity) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            parity,
        })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, parity: Parity, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&y| f(y)).collect();
        Self {
            grid,
            values,
            parity,
        }
    }

    pub fn zeros(grid: Arc<RadialGrid>, parity: Parity) -> Self {
        let values = vec![0.0; grid.len()];
        Self {
            grid,
            values,
            parity,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Same grid and parity, new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
            parity: self.parity,
        }
    }

    pub fn check_same_grid(&self, other: &RadialFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "functions live on different grids".into(),
            ))
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &RadialFunction) -> Result<Self> {
        self.check_same_grid(other)?;
        if self.parity != other.parity {
            return Err(Error::ParityMismatch {
                expected: self.parity.name(),
            });
        }
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Local Lagrange interpolation using the parity extension near the
    /// origin. Points beyond `Y_max` are extrapolated from the last window.
    pub fn interpolate(&self, y: f64) -> f64 {
        let t = y.abs();
        let sign = if y < 0.0 { self.parity.sign() } else { 1.0 };
        let width = INTERP_WIDTH.min(self.grid.len());
        let start = self.grid.window_start(t, width);
        let nodes = self.grid.nodes();
        let xs: Vec<f64> = (start..start + width as isize)
            .map(|j| node_coord(nodes, j))
            .collect();
        let basis = lagrange_basis(&xs, t);
        let v: f64 = basis
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let (j, s) = fold(start + k as isize, self.parity);
                l * s * self.values[j]
            })
            .sum();
        sign * v
    }

    /// Value at the origin (zero for odd functions).
    pub fn value_at_origin(&self) -> f64 {
        match self.parity {
            Parity::Odd => 0.0,
            Parity::Even => self.interpolate(0.0),
        }
    }

    /// Resamples onto another grid.
    pub fn resample(&self, grid: Arc<RadialGrid>) -> Self {
        let values = grid.nodes().iter().map(|&y| self.interpolate(y)).collect();
        Self {
            grid,
            values,
            parity: self.parity,
        }
    }

    /// Writes `y,value,parity,Y_max,resolution` rows after a comment header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# y,value,parity,Y_max,resolution")?;
        for (y, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(
                out,
                "{:.17e},{:.17e},{},{:.17e},{}",
                y,
                v,
                self.parity.name(),
                self.grid.y_max(),
                self.grid.len()
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut ys = Vec::new();
        let mut vs = Vec::new();
        let mut parity = None;
        let mut meta: Option<(f64, usize)> = None;
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let y: f64 = fields[0].parse().map_err(|_| bad("bad y"))?;
            let v: f64 = fields[1].parse().map_err(|_| bad("bad value"))?;
            let p = match fields[2] {
                "even" => Parity::Even,
                "odd" => Parity::Odd,
                _ => return Err(bad("parity must be even or odd")),
            };
            let ym: f64 = fields[3].parse().map_err(|_| bad("bad Y_max"))?;
            let res: usize = fields[4].parse().map_err(|_| bad("bad resolution"))?;
            if *parity.get_or_insert(p) != p || *meta.get_or_insert((ym, res)) != (ym, res) {
                return Err(bad("inconsistent metadata"));
            }
            if !(y.is_finite() && v.is_finite()) {
                return Err(bad("non-finite sample"));
            }
            ys.push(y);
            vs.push(v);
        }
        let (ym, res) = meta.ok_or_else(|| Error::Parse("no samples".into()))?;
        if res != ys.len() || ys.last() != Some(&ym) {
            return Err(Error::Parse("metadata disagrees with samples".into()));
        }
        let grid = Arc::new(RadialGrid::from_nodes(&ys)?);
        Self::new(grid, vs, parity.unwrap_or(Parity::Even))
    }
}
