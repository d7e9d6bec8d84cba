//! Urban surface reconstruction from multi-baseline SAR tomographic stacks.
//!
//! The pipeline runs in ground geometry `(x, y, z)`:
//!
//! * [`forward`] simulates stacks from synthetic box scenes through the
//!   layover operator `Phi` and its adjoint;
//! * [`estimators`] (beamforming, Capon, MUSIC) and [`sparse`] (l1
//!   inversion, per cell or directly in 3-D) turn a stack back into a
//!   reflectivity volume;
//! * [`segmentation`] extracts the elevation map minimizing a ray-wise data
//!   term plus a wall-area penalty as a minimum cut;
//! * [`redress`] alternates l1 inversion and segmentation with a sparsity
//!   penalty that grows with the distance to the current surface;
//! * [`evaluation`] scores surfaces against ground truth.
//!
//! ```
//! use tomosurf::geometry::{AcquisitionGeometry, GroundGrid, RadarGrid};
//! use tomosurf::scene::{make_scene, SceneSpec, BoxSpec};
//! use tomosurf::forward::simulate_stack;
//!
//! let geom = AcquisitionGeometry::uniform(8, 1500.0, 0.031, 0.6, 6.0e5).unwrap();
//! let grid = GroundGrid::new([8, 12, 8], [1.0; 3], [0.0; 3]).unwrap();
//! let rgrid = RadarGrid::covering(&geom, &grid, RadarGrid::default_range_step(&geom, &grid)).unwrap();
//! let mut spec = SceneSpec::flat(7);
//! spec.boxes.push(BoxSpec { x: [2.0, 5.0], y: [4.0, 8.0], height: 5.0 });
//! let (scene, truth) = make_scene(&spec, &geom, &grid).unwrap();
//! let stack = simulate_stack(&scene, &geom, &rgrid, 0.0, 7).unwrap();
//! assert_eq!(stack.num_images(), 8);
//! assert_eq!(truth.height(3, 6), 5.0);
//! ```

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol * (1.0 + b.abs()), "{a} vs {b} (tol {})", $tol);
    }};
}

mod error;
mod par;

pub mod config;
pub mod edt;
pub mod estimators;
pub mod evaluation;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod rays;
pub mod redress;
pub mod scene;
pub mod segmentation;
pub mod sparse;
pub mod surface;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{AcquisitionGeometry, GroundGrid, RadarGrid};
pub use surface::ElevationMap;
pub use volume::{MagnitudeVolume, ReflectivityVolume, SarStack, Volume};
