//! Resampling of ground-geometry volumes along the radar lines of sight.
//!
//! Within an azimuth slice the sensor looks along `(sin t, -cos t)` in the
//! `(y, z)` plane. Rotating the slice gives ray coordinates
//!
//! ```text
//! h = y cos t + z sin t     (which ray)
//! s = y sin t - z cos t     (distance along the ray, = rho - r0)
//! ```
//!
//! Both are sampled with step `min(dy, dz)` on a lattice anchored at the
//! `(y0, z0)` voxel, so at `t = pi/2` the samples are exactly the voxel
//! centers. Samples are kept inside the volume footprint extended by half a
//! voxel on every side.

use crate::geometry::{AcquisitionGeometry, GroundGrid};
use crate::volume::MagnitudeVolume;
use crate::{par, Error, Result};

/// Ray-geometry copy of a magnitude volume.
///
/// Columns are indexed `ix * columns_per_slice() + j`; every slice shares the
/// same sample layout.
#[derive(Clone, Debug)]
pub struct RayVolume {
    grid: GroundGrid,
    step: f64,
    incidence: f64,
    h_ref: f64,
    j_min: i64,
    /// Offsets of the columns of one slice into the per-slice sample list.
    col_starts: Vec<usize>,
    /// Nearest voxel of each sample, as `iy * nz + iz`.
    sample_voxel: Vec<u32>,
    /// Bilinear stencil of each sample.
    stencil: Vec<[(u32, f64); 4]>,
    /// Sample values, slice-major.
    values: Vec<f64>,
}

fn axis_weights(t: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let t = t.clamp(0.0, (n - 1) as f64);
    let i0 = (t.floor() as usize).min(n - 2);
    (i0, i0 + 1, t - i0 as f64)
}

impl RayVolume {
    /// Sample layout for `grid` at incidence `theta`, with zero values.
    pub fn layout(grid: &GroundGrid, theta: f64) -> Self {
        let (sn, cs) = theta.sin_cos();
        let (dy, dz) = (grid.spacing[1], grid.spacing[2]);
        let step = dy.min(dz);
        let (ny, nz) = (grid.ny(), grid.nz());
        let h = |y: f64, z: f64| y * cs + z * sn;
        let s = |y: f64, z: f64| y * sn - z * cs;
        let (y0, z0) = (grid.origin[1], grid.origin[2]);
        let (ylo, yhi) = (y0 - dy / 2.0, grid.y(ny - 1) + dy / 2.0);
        let (zlo, zhi) = (z0 - dz / 2.0, grid.z_max() + dz / 2.0);
        let (h_ref, s_ref) = (h(y0, z0), s(y0, z0));
        let corners = [(ylo, zlo), (ylo, zhi), (yhi, zlo), (yhi, zhi)];
        let range = |f: &dyn Fn(f64, f64) -> f64, origin: f64| {
            let vals = corners.map(|(y, z)| (f(y, z) - origin) / step);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).floor() as i64;
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
            (lo, hi)
        };
        let (j_min, j_max) = range(&h, h_ref);
        let (i_min, i_max) = range(&s, s_ref);
        let mut col_starts = vec![0];
        let mut sample_voxel = Vec::new();
        let mut stencil = Vec::new();
        for j in j_min..=j_max {
            let hj = h_ref + j as f64 * step;
            for i in i_min..=i_max {
                let si = s_ref + i as f64 * step;
                let y = hj * cs + si * sn;
                let z = hj * sn - si * cs;
                if !(y >= ylo && y < yhi && z >= zlo && z < zhi) {
                    continue;
                }
                let ty = (y - y0) / dy;
                let tz = (z - z0) / dz;
                let iy = ((ty + 0.5).floor().max(0.0) as usize).min(ny - 1);
                let iz = ((tz + 0.5).floor().max(0.0) as usize).min(nz - 1);
                sample_voxel.push((iy * nz + iz) as u32);
                let (a0, a1, wy) = axis_weights(ty, ny);
                let (b0, b1, wz) = axis_weights(tz, nz);
                let at = |a: usize, b: usize| (a * nz + b) as u32;
                stencil.push([
                    (at(a0, b0), (1.0 - wy) * (1.0 - wz)),
                    (at(a1, b0), wy * (1.0 - wz)),
                    (at(a0, b1), (1.0 - wy) * wz),
                    (at(a1, b1), wy * wz),
                ]);
            }
            col_starts.push(sample_voxel.len());
        }
        // drop rays that only graze the extended footprint
        let lead = col_starts.windows(2).take_while(|w| w[0] == w[1]).count();
        let trail = col_starts.windows(2).rev().take_while(|w| w[0] == w[1]).count();
        col_starts.truncate(col_starts.len() - trail);
        col_starts.drain(..lead);
        let j_min = j_min + lead as i64;
        let values = vec![0.0; grid.nx() * sample_voxel.len()];
        RayVolume {
            grid: *grid,
            step,
            incidence: theta,
            h_ref,
            j_min,
            col_starts,
            sample_voxel,
            stencil,
            values,
        }
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    /// Sample spacing along and across rays, meters.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn columns_per_slice(&self) -> usize {
        self.col_starts.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.grid.nx() * self.columns_per_slice()
    }

    fn samples_per_slice(&self) -> usize {
        self.sample_voxel.len()
    }

    fn span(&self, c: usize) -> (usize, usize) {
        let per = self.columns_per_slice();
        let (ix, j) = (c / per, c % per);
        let base = ix * self.samples_per_slice();
        (base + self.col_starts[j], base + self.col_starts[j + 1])
    }

    /// Samples of column `c`, ordered by increasing range.
    pub fn column(&self, c: usize) -> &[f64] {
        let (a, b) = self.span(c);
        &self.values[a..b]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        let (a, b) = self.span(c);
        &mut self.values[a..b]
    }

    /// All sample values, column after column.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Ground voxel nearest to each sample of column `c`.
    pub fn column_voxels(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let per = self.columns_per_slice();
        let (ix, j) = (c / per, c % per);
        let base = ix * self.grid.ny() * self.grid.nz();
        self.sample_voxel[self.col_starts[j]..self.col_starts[j + 1]]
            .iter()
            .map(move |&v| base + v as usize)
    }

    /// The ray column passing closest to the center of voxel `v`.
    pub fn column_of_voxel(&self, v: usize) -> usize {
        let (ix, iy, iz) = self.grid.unravel(v);
        let (sn, cs) = self.incidence.sin_cos();
        let h = self.grid.y(iy) * cs + self.grid.z(iz) * sn;
        let j = ((h - self.h_ref) / self.step).round() as i64 - self.j_min;
        let j = j.clamp(0, self.columns_per_slice() as i64 - 1) as usize;
        ix * self.columns_per_slice() + j
    }

    /// Pushes every sample back to its nearest voxel, conserving mass:
    /// voxel value = sum of samples * step^2 / (dy dz).
    pub fn back_map(&self) -> MagnitudeVolume {
        let mut out = MagnitudeVolume::zeros(&self.grid);
        let scale = self.step * self.step / (self.grid.spacing[1] * self.grid.spacing[2]);
        for c in 0..self.num_columns() {
            for (v, x) in self.column_voxels(c).zip(self.column(c)) {
                out.data_mut()[v] += x * scale;
            }
        }
        out
    }
}

/// Bilinear resampling of `volume` along the lines of sight of `geom`.
pub fn resample_to_rays(volume: &MagnitudeVolume, geom: &AcquisitionGeometry) -> Result<RayVolume> {
    if volume.is_empty() {
        return Err(Error::EmptyVolume);
    }
    let mut rays = RayVolume::layout(volume.grid(), geom.incidence());
    let per_slice = rays.samples_per_slice();
    let slice_len = volume.grid().ny() * volume.grid().nz();
    let stencil = std::mem::take(&mut rays.stencil);
    let data = volume.data();
    par::for_each_chunk_mut(&mut rays.values, per_slice, |ix, out| {
        let slice = &data[ix * slice_len..(ix + 1) * slice_len];
        for (o, st) in out.iter_mut().zip(&stencil) {
            *o = st.iter().map(|&(k, w)| w * slice[k as usize]).sum();
        }
    });
    rays.stencil = stencil;
    Ok(rays)
}
