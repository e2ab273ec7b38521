use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Discretization of the slab `Sigma x (-1, 0)`.
///
/// `nx`, `ny` horizontal collocation nodes on the periodic box of side
/// lengths `l1`, `l2`; `nz` vertical cells, so `nz + 1` nodes including both
/// endpoints `x3 = -1` (bottom) and `x3 = 0` (top surface plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub l1: f64,
    pub l2: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize, l1: f64, l2: f64) -> Result<Self> {
        let grid = Grid { nx, ny, nz, l1, l2 };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx = {} (need even, >= 4)",
                self.nx
            )));
        }
        if self.ny < 4 || self.ny % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "ny = {} (need even, >= 4)",
                self.ny
            )));
        }
        if self.nz < 4 {
            return Err(Error::InvalidGrid(format!("nz = {} (need >= 4)", self.nz)));
        }
        if !(self.l1 > 0.0) || !(self.l2 > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "periodicity lengths must be positive, got ({}, {})",
                self.l1, self.l2
            )));
        }
        Ok(())
    }

    /// Vertical spacing.
    pub fn hz(&self) -> f64 {
        1.0 / self.nz as f64
    }

    /// Vertical node coordinate, `z(0) = -1`, `z(nz) = 0`.
    pub fn zcoord(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.hz()
    }

    pub fn xcoord(&self, i: usize) -> f64 {
        self.l1 * i as f64 / self.nx as f64
    }

    pub fn ycoord(&self, j: usize) -> f64 {
        self.l2 * j as f64 / self.ny as f64
    }

    /// Number of horizontal nodes per level.
    pub fn nh(&self) -> usize {
        self.nx * self.ny
    }

    /// Total volume nodes.
    pub fn nvol(&self) -> usize {
        self.nh() * (self.nz + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_grid() {
        let g = Grid::new(16, 16, 24, 1.0, 1.0).unwrap();
        assert_eq!(g.nvol(), 16 * 16 * 25);
        assert!((g.zcoord(0) + 1.0).abs() < 1e-15);
        assert!(g.zcoord(24).abs() < 1e-15);
    }

    #[test]
    fn rejects_odd_or_tiny() {
        assert!(Grid::new(15, 16, 24, 1.0, 1.0).is_err());
        assert!(Grid::new(16, 2, 24, 1.0, 1.0).is_err());
        assert!(Grid::new(16, 16, 3, 1.0, 1.0).is_err());
        assert!(Grid::new(16, 16, 24, 0.0, 1.0).is_err());
    }
}
