//! Acquisition geometry, sampling grids and the ground <-> radar mapping.
//!
//! Ground coordinates are `(x, y, z)`: azimuth, ground range and height. The
//! sensor looks along `+y` and down, so a point's slant range is modelled
//! with a flat wavefront,
//!
//! ```text
//! rho(y, z) = r0 + y sin(theta) - z cos(theta)
//! ```
//!
//! and the height sensitivity of image `n` is
//! `xi_n = 4 pi b_n / (lambda r0 sin(theta))`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::{Error, Result};

/// Baselines and radar parameters of a multi-pass acquisition.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionGeometry {
    baselines: Vec<f64>,
    wavelength: f64,
    incidence: f64,
    reference_range: f64,
    xi: Vec<f64>,
}

impl AcquisitionGeometry {
    /// `baselines` in meters (one per image, the master usually at 0),
    /// `wavelength` and `reference_range` in meters, `incidence` in radians.
    pub fn new(baselines: Vec<f64>, wavelength: f64, incidence: f64, reference_range: f64) -> Result<Self> {
        if baselines.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 images, got {}",
                baselines.len()
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        if !(incidence > 0.0 && incidence <= FRAC_PI_2) {
            return Err(Error::InvalidGeometry(format!(
                "incidence must lie in (0, pi/2], got {incidence}"
            )));
        }
        if !(reference_range > 0.0 && reference_range.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "reference range must be > 0, got {reference_range}"
            )));
        }
        if let Some(b) = baselines.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite baseline {b}")));
        }
        let scale = 4.0 * PI / (wavelength * reference_range * incidence.sin());
        let xi: Vec<f64> = baselines.iter().map(|b| scale * b).collect();
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGeometry("spatial frequencies overflow".into()));
        }
        Ok(AcquisitionGeometry {
            baselines,
            wavelength,
            incidence,
            reference_range,
            xi,
        })
    }

    /// `n` images with baselines spread uniformly over `[-span/2, span/2]`,
    /// shifted so the first image (the master) sits at zero baseline.
    pub fn uniform(n: usize, span: f64, wavelength: f64, incidence: f64, reference_range: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!("need at least 2 images, got {n}")));
        }
        let step = span / (n - 1) as f64;
        let baselines = (0..n).map(|i| i as f64 * step).collect();
        Self::new(baselines, wavelength, incidence, reference_range)
    }

    pub fn num_images(&self) -> usize {
        self.baselines.len()
    }

    pub fn baselines(&self) -> &[f64] {
        &self.baselines
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn incidence(&self) -> f64 {
        self.incidence
    }

    pub fn reference_range(&self) -> f64 {
        self.reference_range
    }

    /// Height sensitivities `xi_n` (rad/m) of all images.
    pub fn spatial_frequencies(&self) -> &[f64] {
        &self.xi
    }

    /// Elevation resolution `2 pi / (xi_max - xi_min)` in meters.
    pub fn rayleigh_resolution(&self) -> f64 {
        let (lo, hi) = self.xi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        2.0 * PI / (hi - lo)
    }

    /// Canonical text form, used for content hashes in file headers.
    pub fn canonical_text(&self) -> String {
        let b: Vec<String> = self.baselines.iter().map(|b| format!("{b:e}")).collect();
        format!(
            "baselines={};wavelength={:e};incidence={:e};reference_range={:e}",
            b.join(","),
            self.wavelength,
            self.incidence,
            self.reference_range
        )
    }
}

/// Height sensitivity `xi_n` of image `n` (0-based; image 0 is the master).
pub fn spatial_frequency(geom: &AcquisitionGeometry, n: usize) -> Result<f64> {
    geom.xi.get(n).copied().ok_or(Error::IndexOutOfRange {
        index: n,
        len: geom.num_images(),
    })
}

/// Master-image slant range of a point at ground range `y` and height `z`.
pub fn slant_range(geom: &AcquisitionGeometry, y: f64, z: f64) -> f64 {
    let (s, c) = geom.incidence.sin_cos();
    geom.reference_range + y * s - z * c
}

/// Steering vector `a(z)` with components `exp(-j xi_n z)`.
pub fn steering_vector(geom: &AcquisitionGeometry, z: f64) -> Vec<Complex64> {
    geom.xi.iter().map(|&xi| Complex64::from_polar(1.0, -xi * z)).collect()
}

/// Regular 3-D sampling grid in ground geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GroundGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("all dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidGrid(format!("all spacings must be > 0, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite origin {origin:?}")));
        }
        Ok(GroundGrid { dims, spacing, origin })
    }

    pub fn nx(&self) -> usize {
        self.dims[0]
    }

    pub fn ny(&self) -> usize {
        self.dims[1]
    }

    pub fn nz(&self) -> usize {
        self.dims[2]
    }

    /// Total number of voxels.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_columns(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Linear voxel index; x-major, then y, then z.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let iz = idx % self.dims[2];
        let col = idx / self.dims[2];
        (col / self.dims[1], col % self.dims[1], iz)
    }

    #[inline]
    pub fn column_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.dims[1] + iy
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.origin[0] + ix as f64 * self.spacing[0]
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.origin[1] + iy as f64 * self.spacing[1]
    }

    #[inline]
    pub fn z(&self, iz: usize) -> f64 {
        self.origin[2] + iz as f64 * self.spacing[2]
    }

    /// Height of the top voxel layer.
    pub fn z_max(&self) -> f64 {
        self.z(self.dims[2] - 1)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn same_horizontal(&self, other: &GroundGrid) -> bool {
        self.dims[..2] == other.dims[..2]
            && self.spacing[..2] == other.spacing[..2]
            && self.origin[..2] == other.origin[..2]
    }
}

/// Azimuth x range sampling of the SAR images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarGrid {
    pub azimuth_count: usize,
    pub range_count: usize,
    pub d_azimuth: f64,
    pub d_range: f64,
    /// Slant range of the center of range bin 0.
    pub range_origin: f64,
    /// Azimuth of the center of azimuth bin 0.
    pub azimuth_origin: f64,
}

impl RadarGrid {
    pub fn new(
        azimuth_count: usize,
        range_count: usize,
        d_azimuth: f64,
        d_range: f64,
        range_origin: f64,
        azimuth_origin: f64,
    ) -> Result<Self> {
        if azimuth_count == 0 || range_count == 0 {
            return Err(Error::InvalidGrid("radar grid counts must be >= 1".into()));
        }
        if !(d_azimuth > 0.0 && d_range > 0.0) {
            return Err(Error::InvalidGrid("radar grid spacings must be > 0".into()));
        }
        Ok(RadarGrid {
            azimuth_count,
            range_count,
            d_azimuth,
            d_range,
            range_origin,
            azimuth_origin,
        })
    }

    /// Smallest grid with range step `d_range` whose bins cover every voxel
    /// center of `grid`; azimuth bins coincide with the ground x samples.
    pub fn covering(geom: &AcquisitionGeometry, grid: &GroundGrid, d_range: f64) -> Result<Self> {
        let y = [grid.y(0), grid.y(grid.ny() - 1)];
        let z = [grid.z(0), grid.z_max()];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for yy in y {
            for zz in z {
                let r = slant_range(geom, yy, zz);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let count = ((hi - lo) / d_range + 0.5).floor() as usize + 1;
        Self::new(grid.nx(), count, grid.spacing[0], d_range, lo, grid.origin[0])
    }

    /// Default range step: one ground-range step projected on the line of
    /// sight, so each range cell holds about one voxel per height layer.
    pub fn default_range_step(geom: &AcquisitionGeometry, grid: &GroundGrid) -> f64 {
        grid.spacing[1] * geom.incidence().sin()
    }

    pub fn num_pixels(&self) -> usize {
        self.azimuth_count * self.range_count
    }

    #[inline]
    pub fn pixel_index(&self, azimuth: usize, range: usize) -> usize {
        azimuth * self.range_count + range
    }

    pub fn range_center(&self, r: usize) -> f64 {
        self.range_origin + r as f64 * self.d_range
    }
}

/// Bin holding the normalized coordinate `t` (bin centers at integers, width
/// one). A value exactly halfway between two centers goes to the lower bin.
#[inline]
fn bin_of(t: f64, count: usize) -> Option<usize> {
    let k = (t - 0.5).ceil();
    if k >= 0.0 && (k as usize) < count {
        Some(k as usize)
    } else {
        None
    }
}

/// Radar cell `(azimuth, range)` containing the ground point `(x, y, z)`, or
/// `None` when it falls outside the radar swath.
pub fn radar_cell_of(geom: &AcquisitionGeometry, rgrid: &RadarGrid, x: f64, y: f64, z: f64) -> Option<(usize, usize)> {
    let a = bin_of((x - rgrid.azimuth_origin) / rgrid.d_azimuth, rgrid.azimuth_count)?;
    let rho = slant_range(geom, y, z);
    let r = bin_of((rho - rgrid.range_origin) / rgrid.d_range, rgrid.range_count)?;
    Some((a, r))
}

/// Voxel <-> radar-pixel incidence, the sparsity pattern of the forward
/// operator.
#[derive(Clone, Debug)]
pub struct CellMap {
    grid: GroundGrid,
    rgrid: RadarGrid,
    voxel_pixel: Vec<u32>,
    starts: Vec<usize>,
    voxels: Vec<u32>,
}

const NO_PIXEL: u32 = u32::MAX;

impl CellMap {
    pub fn new(geom: &AcquisitionGeometry, rgrid: &RadarGrid, grid: &GroundGrid) -> Self {
        let mut voxel_pixel = vec![NO_PIXEL; grid.len()];
        let mut counts = vec![0usize; rgrid.num_pixels() + 1];
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                for iz in 0..grid.nz() {
                    if let Some((a, r)) = radar_cell_of(geom, rgrid, grid.x(ix), grid.y(iy), grid.z(iz)) {
                        let p = rgrid.pixel_index(a, r);
                        voxel_pixel[grid.index(ix, iy, iz)] = p as u32;
                        counts[p + 1] += 1;
                    }
                }
            }
        }
        for p in 0..rgrid.num_pixels() {
            counts[p + 1] += counts[p];
        }
        let starts = counts;
        let mut fill = starts.clone();
        let mut voxels = vec![0u32; starts[rgrid.num_pixels()]];
        for (v, &p) in voxel_pixel.iter().enumerate() {
            if p != NO_PIXEL {
                voxels[fill[p as usize]] = v as u32;
                fill[p as usize] += 1;
            }
        }
        CellMap {
            grid: *grid,
            rgrid: *rgrid,
            voxel_pixel,
            starts,
            voxels,
        }
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    pub fn radar_grid(&self) -> &RadarGrid {
        &self.rgrid
    }

    pub fn num_pixels(&self) -> usize {
        self.rgrid.num_pixels()
    }

    /// Radar pixel of voxel `v`, if it lies in the swath.
    #[inline]
    pub fn pixel_of(&self, v: usize) -> Option<usize> {
        match self.voxel_pixel[v] {
            NO_PIXEL => None,
            p => Some(p as usize),
        }
    }

    /// Voxels of pixel `p`, in increasing index order.
    #[inline]
    pub fn voxels_of(&self, p: usize) -> &[u32] {
        &self.voxels[self.starts[p]..self.starts[p + 1]]
    }

    pub fn max_cell_count(&self) -> usize {
        (0..self.num_pixels())
            .map(|p| self.voxels_of(p).len())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> AcquisitionGeometry {
        AcquisitionGeometry::new(vec![0.0, 120.0, -120.0, 300.0], 0.031, 0.6, 6.0e5).unwrap()
    }

    #[test]
    fn spatial_frequency_values() {
        let g = geom();
        assert_eq!(spatial_frequency(&g, 0).unwrap(), 0.0);
        assert_eq!(spatial_frequency(&g, 1).unwrap(), -spatial_frequency(&g, 2).unwrap());
        // 4 pi 120 / (0.031 * 6e5 * sin 0.6) = 1507.96447 / 10502.3500 = 0.1435835
        assert_close!(spatial_frequency(&g, 1).unwrap(), 0.143_583_5, 1e-6);
        assert!(matches!(
            spatial_frequency(&g, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn geometry_validation() {
        assert!(AcquisitionGeometry::new(vec![0.0], 0.03, 0.6, 6e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], 0.0, 0.6, 6e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], 0.03, 0.0, 6e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], 0.03, 1.7, 6e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], 0.03, 0.6, -1.0).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, f64::NAN], 0.03, 0.6, 6e5).is_err());
    }

    #[test]
    fn slant_range_examples() {
        let g = geom();
        assert_eq!(slant_range(&g, 0.0, 0.0), 6.0e5);
        let vertical = AcquisitionGeometry::new(vec![0.0, 1.0], 0.03, FRAC_PI_2, 6e5).unwrap();
        assert_close!(slant_range(&vertical, 1.0, 0.0), 6.0e5 + 1.0, 1e-15);
        assert!(slant_range(&g, 3.0, 2.5) < slant_range(&g, 3.0, 2.0));
        // affine with gradient (sin, -cos)
        let d = slant_range(&g, 1.0, 0.0) - slant_range(&g, 0.0, 0.0);
        assert_close!(d, 0.6f64.sin(), 1e-9);
    }

    #[test]
    fn steering_vector_properties() {
        let g = geom();
        assert!(steering_vector(&g, 0.0).iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        let a = steering_vector(&g, 3.7);
        let b = steering_vector(&g, -3.7);
        for (p, q) in a.iter().zip(&b) {
            assert_close!(p.norm(), 1.0, 1e-15);
            assert_close!(p.re, q.re, 1e-15);
            assert_close!(p.im, -q.im, 1e-15);
        }
    }

    #[test]
    fn bin_tie_goes_low() {
        assert_eq!(bin_of(0.0, 3), Some(0));
        assert_eq!(bin_of(0.5, 3), Some(0));
        assert_eq!(bin_of(0.5000001, 3), Some(1));
        assert_eq!(bin_of(1.5, 3), Some(1));
        assert_eq!(bin_of(-0.5, 3), None);
        assert_eq!(bin_of(2.5, 3), Some(2));
        assert_eq!(bin_of(2.6, 3), None);
    }

    #[test]
    fn radar_cell_at_bin_center_and_boundary() {
        let g = geom();
        let rg = RadarGrid::new(4, 10, 1.0, 2.0, 6.0e5, 0.0).unwrap();
        // y chosen so rho hits the center of range bin 3 exactly
        let y = 6.0 / 0.6f64.sin();
        assert_eq!(radar_cell_of(&g, &rg, 2.0, y, 0.0), Some((2, 3)));
        // azimuth boundary between bins 1 and 2 goes to 1
        assert_eq!(radar_cell_of(&g, &rg, 1.5, 0.0, 0.0), Some((1, 0)));
        // before the first range bin
        assert_eq!(radar_cell_of(&g, &rg, 0.0, -5.0, 0.0), None);
    }

    #[test]
    fn grid_indexing_round_trip() {
        let grid = GroundGrid::new([3, 4, 5], [1.0, 2.0, 0.5], [0.0, 0.0, 0.0]).unwrap();
        for v in 0..grid.len() {
            let (ix, iy, iz) = grid.unravel(v);
            assert_eq!(grid.index(ix, iy, iz), v);
        }
        assert!(GroundGrid::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(GroundGrid::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
    }
}
