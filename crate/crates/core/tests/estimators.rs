mod common;

use common::*;
use num_complex::Complex64;
use rand::Rng;
use tomosurf::estimators::{
    beamforming_profile, capon_profile, estimate_covariance, music_profile, spectral_volume, SpectralMethod,
    SpectralParams,
};
use tomosurf::forward::{apply_phi, PhiOperator};
use tomosurf::geometry::steering_vector;
use tomosurf::scene::make_scene;
use tomosurf::{AcquisitionGeometry, RadarGrid, SarStack};

fn geom() -> AcquisitionGeometry {
    AcquisitionGeometry::uniform(20, 2000.0, 0.031, 0.6, 6.0e5).unwrap()
}

/// Stack whose pixels are sums of the given scatterers with independent
/// random phases, plus optional white noise.
fn scatterer_stack(geom: &AcquisitionGeometry, side: usize, heights: &[f64], noise: f64, seed: u64) -> SarStack {
    let rg = RadarGrid::new(side, side, 1.0, 1.0, 6.0e5, 0.0).unwrap();
    let n = geom.num_images();
    let mut r = rng(seed);
    let steer: Vec<Vec<Complex64>> = heights.iter().map(|&z| steering_vector(geom, z)).collect();
    let mut pm = Vec::with_capacity(n * rg.num_pixels());
    for _ in 0..rg.num_pixels() {
        let amps: Vec<Complex64> = heights
            .iter()
            .map(|_| Complex64::from_polar(1.0, r.random::<f64>() * std::f64::consts::TAU))
            .collect();
        let w = complex_normal(&mut r, n);
        for i in 0..n {
            let s: Complex64 = amps.iter().zip(&steer).map(|(c, a)| c * a[i]).sum();
            pm.push(s + w[i] * noise);
        }
    }
    SarStack::from_pixel_major(n, &rg, &pm).unwrap()
}

fn dense_z() -> Vec<f64> {
    (0..=400).map(|k| -10.0 + 0.1 * k as f64).collect()
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
}

fn local_maxima(p: &[f64]) -> Vec<usize> {
    (1..p.len() - 1)
        .filter(|&k| p[k] > p[k - 1] && p[k] >= p[k + 1])
        .collect()
}

#[test]
fn covariance_matches_weighted_double_loop() {
    let rg = RadarGrid::new(9, 11, 1.0, 1.0, 6.0e5, 0.0).unwrap();
    let mut r = rng(3);
    let stack = SarStack::from_vec(5, &rg, complex_normal(&mut r, 5 * rg.num_pixels())).unwrap();
    let cov = estimate_covariance(&stack, 7, 1.5).unwrap();
    for a in 0..9i64 {
        for c in 0..11i64 {
            let mut acc = vec![Complex64::new(0.0, 0.0); 25];
            let mut total = 0.0;
            for da in -3..=3i64 {
                for dc in -3..=3i64 {
                    let (qa, qc) = (a + da, c + dc);
                    if qa < 0 || qc < 0 || qa >= 9 || qc >= 11 {
                        continue;
                    }
                    let w = (-((da * da + dc * dc) as f64) / (2.0 * 1.5 * 1.5)).exp();
                    total += w;
                    let v = stack.pixel_vector(qa as usize, qc as usize);
                    for i in 0..5 {
                        for j in 0..5 {
                            acc[i * 5 + j] += v[i] * v[j].conj() * w;
                        }
                    }
                }
            }
            let m = cov.matrix(rg.pixel_index(a as usize, c as usize));
            for i in 0..5 {
                for j in 0..5 {
                    assert!((m[(i, j)] - acc[i * 5 + j] / total).norm() < 1e-10);
                }
            }
        }
    }
    let one = estimate_covariance(&stack, 1, 1.0).unwrap();
    let v = stack.pixel_vector(4, 4);
    assert!((one.matrix(rg.pixel_index(4, 4))[(1, 2)] - v[1] * v[2].conj()).norm() < 1e-12);
}

#[test]
fn single_scatterer_is_localized_by_every_method() {
    let g = geom();
    let z = dense_z();
    for (seed, truth) in [(1, 3.3), (2, 11.7), (3, -4.2)] {
        let stack = scatterer_stack(&g, 9, &[truth], 0.0, seed);
        let r = estimate_covariance(&stack, 7, 1.5).unwrap();
        let m = r.matrix(40);
        let profiles = [
            beamforming_profile(m, &g, &z).unwrap(),
            capon_profile(m, &g, &z, 1e-3).unwrap(),
            music_profile(m, &g, &z, 1).unwrap(),
            music_profile(m, &g, &z, 2).unwrap(),
        ];
        for p in profiles {
            assert!(
                (z[argmax(&p)] - truth).abs() <= 0.1 + 1e-9,
                "peak {} vs {truth}",
                z[argmax(&p)]
            );
        }
    }
}

#[test]
fn two_scatterers_at_twice_the_rayleigh_limit() {
    let g = geom();
    let z = dense_z();
    let z1 = 4.0;
    let z2 = z1 + 2.0 * g.rayleigh_resolution();
    let stack = scatterer_stack(&g, 15, &[z1, z2], 0.05, 9);
    let r = estimate_covariance(&stack, 15, 50.0).unwrap();
    let m = r.matrix(7 * 15 + 7);
    let check = |p: Vec<f64>, name: &str| {
        let mut peaks = local_maxima(&p);
        peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        let mut top: Vec<f64> = peaks.iter().take(2).map(|&k| z[k]).collect();
        top.sort_by(f64::total_cmp);
        assert_eq!(top.len(), 2, "{name}");
        assert!(
            (top[0] - z1).abs() <= 0.1 + 1e-9 && (top[1] - z2).abs() <= 0.1 + 1e-9,
            "{name}: {top:?}"
        );
    };
    check(music_profile(m, &g, &z, 2).unwrap(), "music");
    check(capon_profile(m, &g, &z, 1e-3).unwrap(), "capon");
}

#[test]
fn beamforming_finds_the_scene_surface() {
    let g = bench_geometry();
    let grid = bench_grid(32, 20);
    let rg = bench_radar_grid(&g, &grid);
    let (u, _) = make_scene(&bench_scene(3, 32), &g, &grid).unwrap();
    let stack = apply_phi(&u, &g, &rg).unwrap();
    let vol = spectral_volume(
        &stack,
        &g,
        &grid,
        SpectralMethod::Beamforming,
        &SpectralParams::default(),
    )
    .unwrap();
    let op = PhiOperator::new(&g, &rg, &grid);
    let nz = grid.nz();
    let (mut hit, mut total) = (0, 0);
    for p in 0..rg.num_pixels() {
        let voxels = op.cell_map().voxels_of(p);
        let lit: Vec<usize> = voxels
            .iter()
            .map(|&v| v as usize)
            .filter(|&v| u.data()[v].norm() > 0.0)
            .collect();
        if lit.is_empty() {
            continue;
        }
        total += 1;
        let best = *voxels
            .iter()
            .max_by(|&&a, &&b| vol.data()[a as usize].total_cmp(&vol.data()[b as usize]))
            .unwrap() as usize;
        if lit.iter().any(|&v| (v % nz).abs_diff(best % nz) <= 2) {
            hit += 1;
        }
    }
    assert!(hit as f64 >= 0.8 * total as f64, "{hit} of {total}");
}

#[test]
fn zero_stack_and_unsupported_methods() {
    let g = bench_geometry();
    let grid = bench_grid(8, 6);
    let rg = bench_radar_grid(&g, &grid);
    let zero = SarStack::zeros(20, &rg);
    for m in [
        SpectralMethod::Beamforming,
        SpectralMethod::Capon,
        SpectralMethod::Music,
    ] {
        let v = spectral_volume(&zero, &g, &grid, m, &SpectralParams::default()).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.0));
    }
    for name in ["wsf", "spice", "nsf"] {
        assert!(matches!(
            name.parse::<SpectralMethod>(),
            Err(tomosurf::Error::UnsupportedMethod(_))
        ));
    }
}
