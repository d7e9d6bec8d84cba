//! Test-side oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tomosurf::scene::{BoxSpec, SceneSpec};
use tomosurf::segmentation::SurfaceEnergyModel;
use tomosurf::{AcquisitionGeometry, GroundGrid, RadarGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect()
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Height wavenumber of baseline `b`, evaluated from scratch.
pub fn xi(b: f64, wavelength: f64, incidence: f64, r0: f64) -> f64 {
    4.0 * std::f64::consts::PI * b / (wavelength * r0 * incidence.sin())
}

/// `exp(-j xi_n z)` by a scalar loop.
pub fn steering_oracle(geom: &AcquisitionGeometry, z: f64) -> Vec<Complex64> {
    let mut out = Vec::new();
    for &b in geom.baselines() {
        let k = xi(b, geom.wavelength(), geom.incidence(), geom.reference_range());
        out.push(Complex64::new((k * z).cos(), -(k * z).sin()));
    }
    out
}

/// Minimum energy (in cost units) over every elevation map of the model's
/// grid, and the pointwise lowest map reaching it. Energies are recomputed
/// from the per-voxel costs, not through the model's own evaluator.
pub fn brute_force_segmentation(model: &SurfaceEnergyModel) -> (f64, Vec<usize>) {
    let g = *model.grid();
    let (nx, ny, nz) = (g.nx(), g.ny(), g.nz());
    let ncol = nx * ny;
    // cost[c][e]: interior at 0..=e, air above
    let mut cost = vec![vec![0.0; nz]; ncol];
    for (c, row) in cost.iter_mut().enumerate() {
        for (e, slot) in row.iter_mut().enumerate() {
            for k in 0..nz {
                let v = c * nz + k;
                *slot += if k <= e {
                    model.interior_units(v)
                } else {
                    model.air_units(v)
                };
            }
        }
    }
    let beta = model.beta_units();
    let total = nz.pow(ncol as u32);
    let mut best = f64::INFINITY;
    let mut lowest: Vec<usize> = vec![usize::MAX; ncol];
    let mut levels = vec![0usize; ncol];
    for code in 0..total {
        let mut rest = code;
        for l in levels.iter_mut() {
            *l = rest % nz;
            rest /= nz;
        }
        let mut e = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                let c = ix * ny + iy;
                e += cost[c][levels[c]];
                if ix + 1 < nx {
                    e += beta * levels[c].abs_diff(levels[c + ny]) as f64;
                }
                if iy + 1 < ny {
                    e += beta * levels[c].abs_diff(levels[c + 1]) as f64;
                }
            }
        }
        if e < best {
            best = e;
            lowest.copy_from_slice(&levels);
        } else if e == best {
            for (l, &x) in lowest.iter_mut().zip(&levels) {
                *l = (*l).min(x);
            }
        }
    }
    (best, lowest)
}

/// Squared distance to the nearest seed by exhaustive search.
pub fn brute_force_edt(seeds: &[bool], dims: [usize; 3]) -> Vec<f64> {
    let [_, ny, nz] = dims;
    let coords = |v: usize| ((v / (ny * nz)) as i64, ((v / nz) % ny) as i64, (v % nz) as i64);
    let on: Vec<(i64, i64, i64)> = (0..seeds.len()).filter(|&v| seeds[v]).map(coords).collect();
    (0..seeds.len())
        .map(|v| {
            let (x, y, z) = coords(v);
            on.iter()
                .map(|&(a, b, c)| ((x - a).pow(2) + (y - b).pow(2) + (z - c).pow(2)) as f64)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Random magnitude volume with a few bright voxels over a dim floor.
pub fn random_magnitudes(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let x: f64 = rng.random();
            if x < 0.25 {
                1.0 + 4.0 * rng.random::<f64>()
            } else {
                0.2 * rng.random::<f64>()
            }
        })
        .collect()
}

/// Desk-scale acquisition used by the end-to-end checks.
pub fn bench_geometry() -> AcquisitionGeometry {
    AcquisitionGeometry::uniform(20, 2000.0, 0.031, 0.6, 6.0e5).unwrap()
}

pub fn bench_grid(n: usize, nz: usize) -> GroundGrid {
    GroundGrid::new([n, n, nz], [1.0; 3], [0.0; 3]).unwrap()
}

pub fn bench_radar_grid(geom: &AcquisitionGeometry, grid: &GroundGrid) -> RadarGrid {
    RadarGrid::covering(geom, grid, RadarGrid::default_range_step(geom, grid)).unwrap()
}

/// Two or three buildings of 9 to 18 m on an `n x n` meter plot, laid out
/// from `seed`.
pub fn bench_scene(seed: u64, n: usize) -> SceneSpec {
    let mut r = rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let count = 2 + (seed % 2) as usize;
    let n = n as f64;
    let mut spec = SceneSpec::flat(seed);
    for _ in 0..count {
        let w = (0.18 + 0.14 * r.random::<f64>()) * n;
        let d = (0.18 + 0.14 * r.random::<f64>()) * n;
        let x0 = (2.0 + (n - 4.0 - w) * r.random::<f64>()).floor();
        let y0 = (2.0 + (n - 4.0 - d) * r.random::<f64>()).floor();
        spec.boxes.push(BoxSpec {
            x: [x0, (x0 + w).floor()],
            y: [y0, (y0 + d).floor()],
            height: r.random_range(9..=18) as f64,
        });
    }
    spec
}
