//! Elevation maps and radar shadow handling.

use crate::geometry::{AcquisitionGeometry, GroundGrid};
use crate::{Error, Result};

/// Single-valued surface `z = E(x, y)` over the horizontal part of a
/// [`GroundGrid`], with an optional validity mask (false = shadow).
#[derive(Clone, Debug, PartialEq)]
pub struct ElevationMap {
    grid: GroundGrid,
    heights: Vec<f64>,
    valid: Option<Vec<bool>>,
}

impl ElevationMap {
    /// Heights in meters, one per column in [`GroundGrid::column_index`]
    /// order. Every height must lie within the vertical extent of the grid.
    pub fn new(grid: &GroundGrid, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != grid.num_columns() {
            return Err(Error::DimensionMismatch(format!(
                "{} heights for {} columns",
                heights.len(),
                grid.num_columns()
            )));
        }
        let slack = 1e-9 * grid.spacing[2];
        if let Some(h) = heights
            .iter()
            .find(|h| !(**h >= grid.origin[2] - slack && **h <= grid.z_max() + slack))
        {
            return Err(Error::InvalidParameter(format!(
                "height {h} outside [{}, {}]",
                grid.origin[2],
                grid.z_max()
            )));
        }
        Ok(ElevationMap {
            grid: *grid,
            heights,
            valid: None,
        })
    }

    pub fn flat(grid: &GroundGrid, height: f64) -> Result<Self> {
        Self::new(grid, vec![height; grid.num_columns()])
    }

    /// Map whose column `c` sits at voxel layer `levels[c]`.
    pub fn from_levels(grid: &GroundGrid, levels: &[usize]) -> Result<Self> {
        if let Some(&l) = levels.iter().find(|&&l| l >= grid.nz()) {
            return Err(Error::IndexOutOfRange {
                index: l,
                len: grid.nz(),
            });
        }
        Self::new(grid, levels.iter().map(|&l| grid.z(l)).collect())
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    #[inline]
    pub fn height(&self, ix: usize, iy: usize) -> f64 {
        self.heights[self.grid.column_index(ix, iy)]
    }

    /// Voxel layer holding the surface of column `c`.
    #[inline]
    pub fn level_of_column(&self, c: usize) -> usize {
        let t = ((self.heights[c] - self.grid.origin[2]) / self.grid.spacing[2]).round();
        (t.max(0.0) as usize).min(self.grid.nz() - 1)
    }

    #[inline]
    pub fn level(&self, ix: usize, iy: usize) -> usize {
        self.level_of_column(self.grid.column_index(ix, iy))
    }

    pub fn levels(&self) -> Vec<usize> {
        (0..self.heights.len()).map(|c| self.level_of_column(c)).collect()
    }

    pub fn valid_mask(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn is_valid(&self, ix: usize, iy: usize) -> bool {
        self.valid.as_ref().is_none_or(|m| m[self.grid.column_index(ix, iy)])
    }

    pub fn set_valid_mask(&mut self, mask: Option<Vec<bool>>) -> Result<()> {
        if let Some(m) = &mask {
            if m.len() != self.heights.len() {
                return Err(Error::DimensionMismatch("mask length differs from column count".into()));
            }
        }
        self.valid = mask;
        Ok(())
    }

    /// Sum of `|E_i - E_j| / dz` over 4-connected horizontal neighbors.
    pub fn total_variation_levels(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut tv = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                let h = self.height(ix, iy);
                if ix + 1 < nx {
                    tv += (h - self.height(ix + 1, iy)).abs();
                }
                if iy + 1 < ny {
                    tv += (h - self.height(ix, iy + 1)).abs();
                }
            }
        }
        tv / self.grid.spacing[2]
    }
}

/// Columns whose surface point is hidden from the sensor by nearer parts of
/// the surface. The sensor lies toward `-y`; the line of sight from the
/// point at `(y, E)` back to the sensor rises by `cot(theta)` per meter, and
/// the point is shadowed when a nearer column pokes above that line by more
/// than `tolerance` meters.
pub fn shadow_mask(map: &ElevationMap, geom: &AcquisitionGeometry, tolerance: f64) -> Vec<bool> {
    let grid = map.grid();
    let cot = 1.0 / geom.incidence().tan();
    let mut mask = vec![false; grid.num_columns()];
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let (y, h) = (grid.y(iy), map.height(ix, iy));
            mask[grid.column_index(ix, iy)] =
                (0..iy).any(|j| map.height(ix, j) > h + (y - grid.y(j)) * cot + tolerance);
        }
    }
    mask
}

/// Replaces every shadowed height by the nearest unshadowed one along `+y`
/// in the same azimuth row (the first point past the shadow), falling back
/// to `-y` when the shadow reaches the far edge. The result carries the
/// shadow as its invalid mask.
pub fn fill_shadow(map: &ElevationMap, shadow: &[bool]) -> Result<ElevationMap> {
    let grid = map.grid();
    if shadow.len() != grid.num_columns() {
        return Err(Error::DimensionMismatch(
            "shadow mask length differs from column count".into(),
        ));
    }
    let mut heights = map.heights().to_vec();
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let c = grid.column_index(ix, iy);
            if !shadow[c] {
                continue;
            }
            let forward = (iy + 1..grid.ny()).find(|&j| !shadow[grid.column_index(ix, j)]);
            let backward = || (0..iy).rev().find(|&j| !shadow[grid.column_index(ix, j)]);
            if let Some(j) = forward.or_else(backward) {
                heights[c] = map.height(ix, j);
            }
        }
    }
    let mut out = ElevationMap::new(grid, heights)?;
    out.set_valid_mask(Some(shadow.iter().map(|s| !s).collect()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn geom(theta: f64) -> AcquisitionGeometry {
        AcquisitionGeometry::new(vec![0.0, 100.0], 0.03, theta, 6e5).unwrap()
    }

    #[test]
    fn bounds_are_checked() {
        let grid = GroundGrid::new([2, 2, 5], [1.0; 3], [0.0; 3]).unwrap();
        assert!(ElevationMap::flat(&grid, 4.0).is_ok());
        assert!(ElevationMap::flat(&grid, 4.5).is_err());
        assert!(ElevationMap::flat(&grid, -0.1).is_err());
        assert!(ElevationMap::from_levels(&grid, &[0, 1, 2, 5]).is_err());
        let m = ElevationMap::from_levels(&grid, &[0, 1, 2, 4]).unwrap();
        assert_eq!(m.levels(), vec![0, 1, 2, 4]);
        assert_eq!(m.total_variation_levels(), 1.0 + 2.0 + 2.0 + 3.0);
    }

    #[test]
    fn shadow_behind_a_wall_at_45_degrees() {
        // one row, a 3 m wall at y = 1; at 45 degrees the shadow is 3 m long
        let grid = GroundGrid::new([1, 8, 4], [1.0; 3], [0.0; 3]).unwrap();
        let m = ElevationMap::from_levels(&grid, &[0, 3, 0, 0, 0, 0, 0, 0]).unwrap();
        let mask = shadow_mask(&m, &geom(FRAC_PI_4), 1e-9);
        assert_eq!(mask, vec![false, false, true, true, false, false, false, false]);
        let filled = fill_shadow(&m, &mask).unwrap();
        assert_eq!(filled.heights(), m.heights());
        assert!(!filled.is_valid(0, 2) && filled.is_valid(0, 4));
    }

    #[test]
    fn fill_takes_first_point_past_the_shadow() {
        let grid = GroundGrid::new([1, 5, 6], [1.0; 3], [0.0; 3]).unwrap();
        let m = ElevationMap::from_levels(&grid, &[1, 5, 0, 3, 2]).unwrap();
        let mask = vec![false, false, true, false, true];
        let f = fill_shadow(&m, &mask).unwrap();
        assert_eq!(f.levels(), vec![1, 5, 3, 3, 3]);
    }

    #[test]
    fn flat_surface_has_no_shadow() {
        let grid = GroundGrid::new([3, 6, 4], [1.0; 3], [0.0; 3]).unwrap();
        let m = ElevationMap::flat(&grid, 2.0).unwrap();
        assert!(shadow_mask(&m, &geom(0.6), 1e-9).iter().all(|s| !s));
    }
}
