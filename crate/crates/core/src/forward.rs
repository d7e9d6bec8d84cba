//! The layover operator `Phi` from ground-geometry reflectivity to SAR
//! stacks, its adjoint, and noisy stack simulation.
//!
//! Pixel `p` of image `n` sums every voxel whose center falls in the radar
//! cell of `p`, each weighted by its steering phase:
//! `v_n(p) = sum_{voxels in p} u * exp(-j xi_n z)`.

use std::collections::HashSet;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{AcquisitionGeometry, CellMap, GroundGrid, RadarGrid};
use crate::volume::{ReflectivityVolume, SarStack};
use crate::{par, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Matrix-free `Phi` with a precomputed voxel/pixel incidence and phase
/// table.
#[derive(Clone, Debug)]
pub struct PhiOperator {
    num_images: usize,
    cells: CellMap,
    /// `exp(-j xi_n z_k)` at `[k * N + n]`.
    phases: Vec<Complex64>,
    norm_sq: OnceLock<f64>,
}

impl PhiOperator {
    pub fn new(geom: &AcquisitionGeometry, rgrid: &RadarGrid, grid: &GroundGrid) -> Self {
        let n = geom.num_images();
        let xi = geom.spatial_frequencies();
        let mut phases = Vec::with_capacity(grid.nz() * n);
        for k in 0..grid.nz() {
            let z = grid.z(k);
            phases.extend(xi.iter().map(|&x| Complex64::from_polar(1.0, -x * z)));
        }
        PhiOperator {
            num_images: n,
            cells: CellMap::new(geom, rgrid, grid),
            phases,
            norm_sq: OnceLock::new(),
        }
    }

    /// Exact `||Phi||^2`. `Phi^H Phi` is block diagonal over radar cells, so
    /// this is the largest eigenvalue of any cell's Gram matrix. Cells with
    /// the same set of height layers share a Gram matrix and are solved once.
    pub fn norm_sq(&self) -> f64 {
        *self.norm_sq.get_or_init(|| {
            let nz = self.grid().nz();
            let mut patterns = HashSet::new();
            for p in 0..self.cells.num_pixels() {
                let layers: Vec<u32> = self.cells.voxels_of(p).iter().map(|&v| v % nz as u32).collect();
                if !layers.is_empty() {
                    patterns.insert(layers);
                }
            }
            let keys: Vec<Vec<u32>> = patterns.into_iter().collect();
            par::map_range(keys.len(), |i| self.gram_lambda_max(&keys[i]))
                .into_iter()
                .fold(0.0, f64::max)
        })
    }

    /// Largest eigenvalue of `A^H A` where `A` stacks the steering vectors
    /// of `layers`.
    pub(crate) fn gram_lambda_max(&self, layers: &[u32]) -> f64 {
        let m = layers.len();
        let n = self.num_images;
        let cols: Vec<&[Complex64]> = layers.iter().map(|&k| self.layer_phases(k as usize)).collect();
        let gram = if m <= n {
            DMatrix::from_fn(m, m, |i, j| inner(cols[i], cols[j]))
        } else {
            DMatrix::from_fn(n, n, |a, b| cols.iter().map(|c| c[a] * c[b].conj()).sum())
        };
        gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
    }

    pub fn num_images(&self) -> usize {
        self.num_images
    }

    pub fn grid(&self) -> &GroundGrid {
        self.cells.grid()
    }

    pub fn radar_grid(&self) -> &RadarGrid {
        self.cells.radar_grid()
    }

    pub fn cell_map(&self) -> &CellMap {
        &self.cells
    }

    /// Length of a pixel-major data vector.
    pub fn data_len(&self) -> usize {
        self.num_images * self.cells.num_pixels()
    }

    /// Steering phases of height layer `k`.
    #[inline]
    pub fn layer_phases(&self, k: usize) -> &[Complex64] {
        &self.phases[k * self.num_images..(k + 1) * self.num_images]
    }

    /// `out = Phi u` with `out` pixel-major.
    pub fn apply_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(u.len(), self.grid().len());
        assert_eq!(out.len(), self.data_len());
        let nz = self.grid().nz();
        par::for_each_chunk_mut(out, self.num_images, |p, acc| {
            acc.fill(ZERO);
            for &v in self.cells.voxels_of(p) {
                let uv = u[v as usize];
                if uv == ZERO {
                    continue;
                }
                let ph = self.layer_phases(v as usize % nz);
                for (a, &e) in acc.iter_mut().zip(ph) {
                    *a += uv * e;
                }
            }
        });
    }

    /// `out = Phi^H v` with `v` pixel-major.
    pub fn adjoint_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(v.len(), self.data_len());
        assert_eq!(out.len(), self.grid().len());
        let n = self.num_images;
        let nz = self.grid().nz();
        par::for_each_chunk_mut(out, nz, |col, column| {
            for (k, o) in column.iter_mut().enumerate() {
                *o = match self.cells.pixel_of(col * nz + k) {
                    Some(p) => {
                        let ph = self.layer_phases(k);
                        v[p * n..(p + 1) * n].iter().zip(ph).map(|(&x, e)| e.conj() * x).sum()
                    }
                    None => ZERO,
                };
            }
        });
    }

    pub fn apply(&self, u: &ReflectivityVolume) -> Result<SarStack> {
        if u.grid() != self.grid() {
            return Err(Error::DimensionMismatch(
                "volume grid differs from the operator grid".into(),
            ));
        }
        let mut out = vec![ZERO; self.data_len()];
        self.apply_into(u.data(), &mut out);
        SarStack::from_pixel_major(self.num_images, self.radar_grid(), &out)
    }

    pub fn adjoint(&self, v: &SarStack) -> Result<ReflectivityVolume> {
        self.check_stack(v)?;
        let mut out = vec![ZERO; self.grid().len()];
        self.adjoint_into(&v.to_pixel_major(), &mut out);
        ReflectivityVolume::from_vec(self.grid(), out)
    }

    pub(crate) fn check_stack(&self, v: &SarStack) -> Result<()> {
        if v.num_images() != self.num_images || v.radar_grid() != self.radar_grid() {
            return Err(Error::DimensionMismatch(format!(
                "stack has {} images on {:?}, operator expects {} on {:?}",
                v.num_images(),
                v.radar_grid(),
                self.num_images,
                self.radar_grid()
            )));
        }
        Ok(())
    }
}

/// `Phi u`.
pub fn apply_phi(u: &ReflectivityVolume, geom: &AcquisitionGeometry, rgrid: &RadarGrid) -> Result<SarStack> {
    PhiOperator::new(geom, rgrid, u.grid()).apply(u)
}

/// `Phi^H v`.
pub fn adjoint_phi(
    v: &SarStack,
    geom: &AcquisitionGeometry,
    rgrid: &RadarGrid,
    grid: &GroundGrid,
) -> Result<ReflectivityVolume> {
    PhiOperator::new(geom, rgrid, grid).adjoint(v)
}

/// `Phi u + noise`, the noise circular complex Gaussian with standard
/// deviation `sigma` on each of the real and imaginary parts. Image `n`
/// draws from its own ChaCha8 stream `(seed, n)`.
pub fn simulate_stack(
    scene: &ReflectivityVolume,
    geom: &AcquisitionGeometry,
    rgrid: &RadarGrid,
    sigma: f64,
    seed: u64,
) -> Result<SarStack> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let mut stack = apply_phi(scene, geom, rgrid)?;
    if sigma > 0.0 {
        add_noise(&mut stack, sigma, seed);
    }
    Ok(stack)
}

/// Adds circular complex Gaussian noise in place; see [`simulate_stack`].
pub fn add_noise(stack: &mut SarStack, sigma: f64, seed: u64) {
    let np = stack.radar_grid().num_pixels();
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    par::for_each_chunk_mut(stack.data_mut(), np, |n, image| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        for c in image.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *c += Complex64::new(re, im);
        }
    });
}

/// Complex inner product `<a, b> = sum conj(a) b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
