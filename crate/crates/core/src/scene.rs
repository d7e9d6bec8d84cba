//! Synthetic urban scenes: axis-aligned boxes on a ground plane, with point
//! scatterers on the faces the sensor can see.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{AcquisitionGeometry, GroundGrid};
use crate::surface::ElevationMap;
use crate::volume::ReflectivityVolume;
use crate::{Error, Result};

/// A building: footprint `[x0, x1) x [y0, y1)` and height above the ground
/// plane, all in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub boxes: Vec<BoxSpec>,
    /// Backscattered power of ground, facade and roof scatterers.
    pub ground_power: f64,
    pub facade_power: f64,
    pub roof_power: f64,
    /// Expected scatterers per meter of surface profile.
    pub density: f64,
    /// Noise standard deviation per real/imaginary component.
    pub sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// No buildings, unit powers, one scatterer per meter, no noise.
    pub fn flat(seed: u64) -> Self {
        SceneSpec {
            boxes: Vec::new(),
            ground_power: 1.0,
            facade_power: 1.0,
            roof_power: 1.0,
            density: 1.0,
            sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, b) in self.boxes.iter().enumerate() {
            if !(b.height >= 0.0 && b.height.is_finite()) {
                return Err(Error::InvalidParameter(format!("box {k}: height must be >= 0")));
            }
            if !(b.x[0] < b.x[1] && b.y[0] < b.y[1]) {
                return Err(Error::InvalidParameter(format!("box {k}: empty footprint")));
            }
        }
        for (name, v) in [
            ("ground_power", self.ground_power),
            ("facade_power", self.facade_power),
            ("roof_power", self.roof_power),
            ("density", self.density),
            ("sigma", self.sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Upper envelope of the boxes over the ground plane `z0`. A column belongs
/// to a footprint when its center lies inside it.
pub fn scene_envelope(spec: &SceneSpec, grid: &GroundGrid) -> Result<ElevationMap> {
    spec.validate()?;
    let (hx, hy) = (grid.spacing[0] / 2.0, grid.spacing[1] / 2.0);
    let (xlo, xhi) = (grid.origin[0] - hx, grid.x(grid.nx() - 1) + hx);
    let (ylo, yhi) = (grid.origin[1] - hy, grid.y(grid.ny() - 1) + hy);
    let top = grid.z_max() - grid.origin[2];
    let mut heights = vec![grid.origin[2]; grid.num_columns()];
    for (k, b) in spec.boxes.iter().enumerate() {
        let eps = 1e-9;
        if b.x[0] < xlo - eps || b.x[1] > xhi + eps || b.y[0] < ylo - eps || b.y[1] > yhi + eps {
            return Err(Error::FootprintOutsideGrid(format!(
                "box {k} spans x {:?}, y {:?}; grid covers x [{xlo}, {xhi}], y [{ylo}, {yhi}]",
                b.x, b.y
            )));
        }
        if b.height > top + eps {
            return Err(Error::InvalidParameter(format!(
                "box {k}: height {} exceeds the grid top {top}",
                b.height
            )));
        }
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                let (x, y) = (grid.x(ix), grid.y(iy));
                if x >= b.x[0] && x < b.x[1] && y >= b.y[0] && y < b.y[1] {
                    let c = grid.column_index(ix, iy);
                    heights[c] = heights[c].max(grid.origin[2] + b.height);
                }
            }
        }
    }
    ElevationMap::new(grid, heights)
}

/// Voxelized scene and its exact elevation map.
///
/// Scatterers sit on the top voxel of every column (ground or roof) and on
/// the facade voxels facing the sensor, i.e. the levels a column rises above
/// its `-y` neighbor. Rear and side facades stay empty, as do voxels hidden
/// behind nearer parts of the surface. Each candidate voxel hosts a
/// scatterer with probability `density * dy` (horizontal faces) or
/// `density * dz` (facades), capped at one, with amplitude `sqrt(power)` and
/// a uniform phase. One ChaCha8 stream seeded by `spec.seed` is consumed in
/// voxel order.
pub fn make_scene(
    spec: &SceneSpec,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
) -> Result<(ReflectivityVolume, ElevationMap)> {
    let truth = scene_envelope(spec, grid)?;
    let levels = truth.levels();
    let cot = 1.0 / geom.incidence().tan();
    let p_flat = (spec.density * grid.spacing[1]).min(1.0);
    let p_wall = (spec.density * grid.spacing[2]).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u = ReflectivityVolume::zeros(grid);
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let top = levels[grid.column_index(ix, iy)];
            let front = if iy == 0 {
                0
            } else {
                levels[grid.column_index(ix, iy - 1)]
            };
            let visible = |k: usize| {
                let z = grid.z(k);
                (0..iy).all(|j| truth.height(ix, j) <= z + (grid.y(iy) - grid.y(j)) * cot + 1e-9)
            };
            let first = if front < top { front + 1 } else { top };
            for k in first..=top {
                let (prob, power) = if k < top {
                    (p_wall, spec.facade_power)
                } else if top == 0 {
                    (p_flat, spec.ground_power)
                } else {
                    (p_flat, spec.roof_power)
                };
                let draw: f64 = rng.random();
                let phase = rng.random::<f64>() * TAU;
                if draw < prob && power > 0.0 && visible(k) {
                    *u.at_mut(ix, iy, k) = Complex64::from_polar(power.sqrt(), phase);
                }
            }
        }
    }
    Ok((u, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (AcquisitionGeometry, GroundGrid) {
        let geom = AcquisitionGeometry::new(vec![0.0, 100.0], 0.03, 0.6, 6e5).unwrap();
        let grid = GroundGrid::new([10, 12, 10], [1.0; 3], [0.0; 3]).unwrap();
        (geom, grid)
    }

    #[test]
    fn empty_scene_is_flat_ground() {
        let (geom, grid) = setup();
        let (u, truth) = make_scene(&SceneSpec::flat(1), &geom, &grid).unwrap();
        assert!(truth.heights().iter().all(|&h| h == 0.0));
        for ix in 0..10 {
            for iy in 0..12 {
                assert!(u.at(ix, iy, 0).norm() > 0.0);
                assert!((1..10).all(|k| u.at(ix, iy, k).norm() == 0.0));
            }
        }
    }

    #[test]
    fn envelope_of_one_and_two_boxes() {
        let (_, grid) = setup();
        let mut spec = SceneSpec::flat(1);
        spec.boxes.push(BoxSpec {
            x: [2.0, 5.0],
            y: [3.0, 7.0],
            height: 4.0,
        });
        let one = scene_envelope(&spec, &grid).unwrap();
        assert_eq!(one.height(2, 3), 4.0);
        assert_eq!(one.height(4, 6), 4.0);
        assert_eq!(one.height(5, 6), 0.0);
        assert_eq!(one.height(4, 7), 0.0);
        spec.boxes.push(BoxSpec {
            x: [4.0, 8.0],
            y: [5.0, 9.0],
            height: 6.0,
        });
        let two = scene_envelope(&spec, &grid).unwrap();
        let mut other = SceneSpec::flat(1);
        other.boxes.push(spec.boxes[1].clone());
        let second = scene_envelope(&other, &grid).unwrap();
        for c in 0..grid.num_columns() {
            assert_eq!(two.heights()[c], one.heights()[c].max(second.heights()[c]));
        }
    }

    #[test]
    fn footprint_outside_grid_is_rejected() {
        let (geom, grid) = setup();
        let mut spec = SceneSpec::flat(1);
        spec.boxes.push(BoxSpec {
            x: [8.0, 12.0],
            y: [0.0, 2.0],
            height: 3.0,
        });
        assert!(matches!(
            make_scene(&spec, &geom, &grid),
            Err(Error::FootprintOutsideGrid(_))
        ));
    }

    #[test]
    fn facade_faces_the_sensor_and_scene_is_deterministic() {
        let (geom, grid) = setup();
        let mut spec = SceneSpec::flat(3);
        spec.boxes.push(BoxSpec {
            x: [2.0, 6.0],
            y: [4.0, 8.0],
            height: 5.0,
        });
        let (u, _) = make_scene(&spec, &geom, &grid).unwrap();
        // front facade at iy = 4 fully populated, rear facade at iy = 7 empty below the roof
        assert!((1..5).all(|k| u.at(3, 4, k).norm() > 0.0));
        assert!((1..5).all(|k| u.at(3, 7, k).norm() == 0.0));
        assert!(u.at(3, 7, 5).norm() > 0.0);
        // ground right behind the building is in shadow
        assert_eq!(u.at(3, 8, 0).norm(), 0.0);
        let (again, _) = make_scene(&spec, &geom, &grid).unwrap();
        assert_eq!(u, again);
    }
}
