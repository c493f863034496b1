//! The cubic box, the cell partition of space, and the shell construction
//! that splits the box into a deep interior and a boundary layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::ball_volume;

/// Cube of side `2 * half_side` centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    dimension: usize,
    half_side: f64,
}

impl Cube {
    pub fn new(dimension: usize, half_side: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidGeometry("dimension must be >= 1".into()));
        }
        if !(half_side > 0.0) || !half_side.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "half side must be positive, got {half_side}"
            )));
        }
        Ok(Cube {
            dimension,
            half_side,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_side).powi(self.dimension as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && x.iter().all(|&c| c.abs() <= self.half_side)
    }

    /// Sup-norm distance from an interior point to the box boundary:
    /// `half_side - max_i |x_i|`, exact for the cube.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideBox);
        }
        let m = x.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
        Ok(self.half_side - m)
    }

    /// Euclidean distance from an exterior point to the cube (0 inside).
    pub fn exterior_distance(&self, y: &[f64]) -> f64 {
        y.iter()
            .map(|&c| (c.abs() - self.half_side).max(0.0))
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }
}

/// Origin-anchored partition of space into half-open cells
/// `[k * delta, (k+1) * delta)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeGrid {
    dimension: usize,
    cell_size: f64,
}

/// Result of sampling the cell-counting condition
/// `delta^d * #{cells within distance R of x} <= 2 V_d(R)`.
#[derive(Clone, Copy, Debug)]
pub struct CellCountReport {
    pub worst_ratio: f64,
    pub pass: bool,
}

impl CubeGrid {
    pub fn new(dimension: usize, cell_size: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidGeometry("dimension must be >= 1".into()));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(CubeGrid {
            dimension,
            cell_size,
        })
    }

    /// Grid aligned with `cube` (the half side is an exact multiple of the
    /// cell size, so every cell lies wholly inside or outside the box).
    pub fn aligned(cube: &Cube, cell_size: f64) -> Result<Self> {
        let ratio = cube.half_side() / cell_size;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGeometry(format!(
                "half side {} is not an integer multiple of cell size {}",
                cube.half_side(),
                cell_size
            )));
        }
        CubeGrid::new(cube.dimension(), cell_size)
    }

    /// Default cell size for interaction range `range`: start from
    /// `range * (2^(1/d) - 1) / sqrt(d)` and shrink so the half side is an
    /// integer multiple. Cells within distance `range` of any point then fit
    /// inside a ball of radius `range + delta * sqrt(d)`, whose volume is at
    /// most twice `V_d(range)`, so the cell-count condition holds a priori.
    pub fn default_for(cube: &Cube, range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::InvalidGeometry("range must be positive".into()));
        }
        let d = cube.dimension() as f64;
        let target = range * ((2.0f64).powf(1.0 / d) - 1.0) / d.sqrt();
        let k = (cube.half_side() / target).ceil().max(1.0);
        CubeGrid::new(cube.dimension(), cube.half_side() / k)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_size.powi(self.dimension as i32)
    }

    /// Index of the cell containing `x` (half-open convention makes this
    /// total and unambiguous).
    pub fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .map(|&c| (c / self.cell_size).floor() as i64)
            .collect()
    }

    /// Infimum distance from the cell with index `cell` to the point `x`.
    pub fn cell_distance(&self, cell: &[i64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in cell.iter().zip(x) {
            let lo = *k as f64 * self.cell_size;
            let hi = lo + self.cell_size;
            let dx = (lo - c).max(c - hi).max(0.0);
            acc += dx * dx;
        }
        acc.sqrt()
    }

    /// Number of cells within distance `range` of `x`.
    pub fn cells_within(&self, x: &[f64], range: f64) -> u64 {
        let lo: Vec<i64> = x
            .iter()
            .map(|&c| ((c - range) / self.cell_size).floor() as i64 - 1)
            .collect();
        let hi: Vec<i64> = x
            .iter()
            .map(|&c| ((c + range) / self.cell_size).floor() as i64 + 1)
            .collect();
        let mut cell = lo.clone();
        let mut count = 0u64;
        loop {
            if self.cell_distance(&cell, x) <= range {
                count += 1;
            }
            // odometer over the index box
            let mut axis = 0;
            loop {
                if axis == self.dimension {
                    return count;
                }
                cell[axis] += 1;
                if cell[axis] <= hi[axis] {
                    break;
                }
                cell[axis] = lo[axis];
                axis += 1;
            }
        }
    }

    /// Check `delta^d * count <= 2 V_d(range)` at each sample point and
    /// report the worst ratio.
    pub fn check_cell_count(&self, range: f64, samples: &[Vec<f64>]) -> CellCountReport {
        let bound = 2.0 * ball_volume(self.dimension, range);
        let mut worst: f64 = 0.0;
        for x in samples {
            let n = self.cells_within(x, range) as f64;
            worst = worst.max(self.cell_volume() * n / bound);
        }
        CellCountReport {
            worst_ratio: worst,
            pass: worst <= 1.0,
        }
    }
}

/// Shell function `h(L) = L^exponent` separating the deep interior from the
/// boundary layer, together with the derived order cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    exponent: f64,
}

impl Default for ShellSpec {
    fn default() -> Self {
        ShellSpec { exponent: 0.5 }
    }
}

/// Exact volumes of the interior cube and of the boundary layer.
#[derive(Clone, Copy, Debug)]
pub struct Regions {
    pub inner_half_side: f64,
    pub inner_volume: f64,
    pub shell_volume: f64,
}

impl ShellSpec {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "shell exponent must lie in (0, 1), got {exponent}"
            )));
        }
        Ok(ShellSpec { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Shell width `h(L)`.
    pub fn h(&self, half_side: f64) -> f64 {
        half_side.powf(self.exponent)
    }

    /// Interior region `{x : dist(x, boundary) > h}` and its complement.
    pub fn regions(&self, cube: &Cube) -> Result<Regions> {
        let h = self.h(cube.half_side());
        if h >= cube.half_side() {
            return Err(Error::BoxTooSmall(format!(
                "shell width {h} must be below the half side {}",
                cube.half_side()
            )));
        }
        let inner_half_side = cube.half_side() - h;
        let inner_volume = (2.0 * inner_half_side).powi(cube.dimension() as i32);
        Ok(Regions {
            inner_half_side,
            inner_volume,
            shell_volume: cube.volume() - inner_volume,
        })
    }

    /// Order cutoff `floor(h / range - 1)`. Errors when the shell is not
    /// wider than the interaction range.
    pub fn order_cutoff(&self, cube: &Cube, range: f64) -> Result<usize> {
        let h = self.h(cube.half_side());
        if h <= range {
            return Err(Error::BoxTooSmall(format!(
                "shell width {h} does not exceed the interaction range {range}"
            )));
        }
        Ok((h / range - 1.0).floor() as usize)
    }

    /// True when `x` lies in the deep interior.
    pub fn in_interior(&self, cube: &Cube, x: &[f64]) -> Result<bool> {
        Ok(cube.dist_to_boundary(x)? > self.h(cube.half_side()))
    }
}
