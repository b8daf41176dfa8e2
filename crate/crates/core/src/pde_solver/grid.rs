use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Domain;

pub const MIN_CELLS: usize = 8;

/// Cell-centered tensor grid. Node `(ix, iy)` has flat index `iy * nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    cells: Vec<usize>,
    h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub cells: Vec<usize>,
    pub spacing: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl Grid {
    /// `n` cells along every axis.
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        Self::with_cells(domain, &vec![n; domain.dimension()])
    }

    pub fn with_cells(domain: Domain, cells: &[usize]) -> Result<Self> {
        if cells.len() != domain.dimension() {
            return Err(Error::Shape(format!(
                "{} cell counts for a {}-dimensional domain",
                cells.len(),
                domain.dimension()
            )));
        }
        if let Some(&c) = cells.iter().find(|&&c| c < MIN_CELLS) {
            return Err(Error::GridTooCoarse { cells: c, min: MIN_CELLS });
        }
        let h = domain.lengths().iter().zip(cells).map(|(l, &c)| l / c as f64).collect();
        Ok(Grid {
            domain,
            cells: cells.to_vec(),
            h,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Distance in flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Per-axis indices of a flat node index.
    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.cells
            .iter()
            .map(|&c| {
                let i = rest % c;
                rest /= c;
                i
            })
            .collect()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.h)
            .map(|(&i, h)| (i as f64 + 0.5) * h)
            .collect()
    }

    pub fn info(&self) -> GridInfo {
        GridInfo {
            cells: self.cells.clone(),
            spacing: self.h.clone(),
            lengths: self.domain.lengths(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_grid_rejected() {
        let err = Grid::new(Domain::interval(1.0).unwrap(), 4).unwrap_err();
        assert!(err.to_string().contains("grid too coarse"));
    }

    #[test]
    fn rectangle_layout() {
        let g = Grid::with_cells(Domain::rectangle(2.0, 1.0).unwrap(), &[8, 10]).unwrap();
        assert_eq!(g.node_count(), 80);
        assert_eq!(g.stride(1), 8);
        assert_eq!(g.multi_index(19), vec![3, 2]);
        let x = g.coords(19);
        assert!((x[0] - 3.5 * 0.25).abs() < 1e-15 && (x[1] - 2.5 * 0.1).abs() < 1e-15);
    }
}
