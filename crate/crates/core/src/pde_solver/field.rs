use std::fmt::Write as _;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Grid samples of `u: Omega -> R^m`, stored node-major (`node * m + component`).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || values.len() != grid.node_count() * m {
            return Err(Error::Shape(format!(
                "field needs {} values, got {}",
                grid.node_count() * m,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        Ok(DiscreteField { grid, m, values })
    }

    pub fn constant(grid: Grid, u: &[f64]) -> Self {
        let values = u.iter().copied().cycle().take(grid.node_count() * u.len()).collect();
        DiscreteField {
            grid,
            m: u.len(),
            values,
        }
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: Grid, m: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count() * m);
        for node in 0..grid.node_count() {
            let v = f(&grid.coords(node));
            if v.len() != m {
                return Err(Error::Shape(format!("sample has {} components, expected {m}", v.len())));
            }
            values.extend(v);
        }
        Self::new(grid, m, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
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

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(i).step_by(self.m).copied()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.node_count() as f64;
        (0..self.m).map(|i| self.component(i).sum::<f64>() / n).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.m, values)
    }

    /// `x[, y], u_1, ..., u_m` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let axes = ["x", "y"];
        let header: Vec<String> = axes[..self.grid.dimension()]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=self.m).map(|i| format!("u_{i}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for node in 0..self.grid.node_count() {
            let row: Vec<String> = self
                .grid
                .coords(node)
                .iter()
                .chain(self.node(node))
                .map(|v| format!("{v:e}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}
