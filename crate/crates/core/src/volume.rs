//! Dense voxel volumes and SAR image stacks.

use num_complex::Complex64;

use crate::geometry::{GroundGrid, RadarGrid};
use crate::{Error, Result};

/// Values on a [`GroundGrid`], stored x-major, then y, then z.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    grid: GroundGrid,
    data: Vec<T>,
}

/// Complex reflectivity `u(x, y, z)`.
pub type ReflectivityVolume = Volume<Complex64>;
/// Real nonnegative volume: reflectivity magnitudes, sparsity maps, distances.
pub type MagnitudeVolume = Volume<f64>;

impl<T: Clone + Default> Volume<T> {
    pub fn zeros(grid: &GroundGrid) -> Self {
        Volume {
            grid: *grid,
            data: vec![T::default(); grid.len()],
        }
    }

    pub fn filled(grid: &GroundGrid, value: T) -> Self {
        Volume {
            grid: *grid,
            data: vec![value; grid.len()],
        }
    }
}

impl<T> Volume<T> {
    pub fn from_vec(grid: &GroundGrid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "volume data has {} values, grid {:?} needs {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        Ok(Volume { grid: *grid, data })
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> &T {
        &self.data[self.grid.index(ix, iy, iz)]
    }

    #[inline]
    pub fn at_mut(&mut self, ix: usize, iy: usize, iz: usize) -> &mut T {
        let i = self.grid.index(ix, iy, iz);
        &mut self.data[i]
    }

    /// The z column at `(ix, iy)`, bottom first.
    pub fn column(&self, ix: usize, iy: usize) -> &[T] {
        let start = self.grid.index(ix, iy, 0);
        &self.data[start..start + self.grid.nz()]
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Volume<U> {
        Volume {
            grid: self.grid,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Volume<Complex64> {
    pub fn magnitude(&self) -> MagnitudeVolume {
        self.map(|c| c.norm())
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|c| **c != Complex64::new(0.0, 0.0)).count()
    }
}

impl Volume<f64> {
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// `N` co-registered complex images on a common [`RadarGrid`]. Image-major,
/// then azimuth, then range.
#[derive(Clone, Debug, PartialEq)]
pub struct SarStack {
    num_images: usize,
    rgrid: RadarGrid,
    data: Vec<Complex64>,
}

impl SarStack {
    pub fn zeros(num_images: usize, rgrid: &RadarGrid) -> Self {
        SarStack {
            num_images,
            rgrid: *rgrid,
            data: vec![Complex64::new(0.0, 0.0); num_images * rgrid.num_pixels()],
        }
    }

    pub fn from_vec(num_images: usize, rgrid: &RadarGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != num_images * rgrid.num_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "stack data has {} values, expected {} images of {} pixels",
                data.len(),
                num_images,
                rgrid.num_pixels()
            )));
        }
        Ok(SarStack {
            num_images,
            rgrid: *rgrid,
            data,
        })
    }

    /// Builds a stack from pixel-major data (`N` consecutive values per pixel).
    pub fn from_pixel_major(num_images: usize, rgrid: &RadarGrid, pixels: &[Complex64]) -> Result<Self> {
        let np = rgrid.num_pixels();
        if pixels.len() != num_images * np {
            return Err(Error::DimensionMismatch(
                "pixel-major buffer has the wrong length".into(),
            ));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); pixels.len()];
        for p in 0..np {
            for n in 0..num_images {
                data[n * np + p] = pixels[p * num_images + n];
            }
        }
        Ok(SarStack {
            num_images,
            rgrid: *rgrid,
            data,
        })
    }

    /// Pixel-major copy of the data (`N` consecutive values per pixel).
    pub fn to_pixel_major(&self) -> Vec<Complex64> {
        let np = self.rgrid.num_pixels();
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for n in 0..self.num_images {
            for p in 0..np {
                out[p * self.num_images + n] = self.data[n * np + p];
            }
        }
        out
    }

    pub fn num_images(&self) -> usize {
        self.num_images
    }

    pub fn radar_grid(&self) -> &RadarGrid {
        &self.rgrid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn image(&self, n: usize) -> &[Complex64] {
        let np = self.rgrid.num_pixels();
        &self.data[n * np..(n + 1) * np]
    }

    pub fn image_mut(&mut self, n: usize) -> &mut [Complex64] {
        let np = self.rgrid.num_pixels();
        &mut self.data[n * np..(n + 1) * np]
    }

    /// The `N` values of pixel `(azimuth, range)`.
    pub fn pixel_vector(&self, azimuth: usize, range: usize) -> Vec<Complex64> {
        let p = self.rgrid.pixel_index(azimuth, range);
        let np = self.rgrid.num_pixels();
        (0..self.num_images).map(|n| self.data[n * np + p]).collect()
    }

    /// Mean of `|v|^2` over all images and pixels.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len().max(1) as f64
    }
}
