//! Covariance-based tomographic estimators: beamforming, Capon and MUSIC.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::forward::PhiOperator;
use crate::geometry::{steering_vector, AcquisitionGeometry, GroundGrid};
use crate::volume::{MagnitudeVolume, SarStack};
use crate::{par, Error, Result};

/// One `N x N` sample covariance matrix per radar pixel.
#[derive(Clone, Debug)]
pub struct CovarianceField {
    n: usize,
    matrices: Vec<DMatrix<Complex64>>,
}

impl CovarianceField {
    pub fn num_images(&self) -> usize {
        self.n
    }

    pub fn num_pixels(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrix(&self, pixel: usize) -> &DMatrix<Complex64> {
        &self.matrices[pixel]
    }
}

fn gaussian_weights(size: usize, std: f64) -> Vec<f64> {
    let h = (size / 2) as f64;
    (0..size)
        .map(|i| {
            let d = i as f64 - h;
            (-d * d / (2.0 * std * std)).exp()
        })
        .collect()
}

/// Gaussian-weighted local covariance `R(p) = sum_q w(q) v(q) v(q)^H` over a
/// `window_size x window_size` neighborhood (azimuth x range). Weights are
/// renormalized to sum to one, so windows truncated at the image border
/// average over the pixels they do cover.
pub fn estimate_covariance(stack: &SarStack, window_size: usize, window_std: f64) -> Result<CovarianceField> {
    let rg = *stack.radar_grid();
    if window_size.is_multiple_of(2) {
        return Err(Error::EvenWindow(window_size));
    }
    if window_size > rg.azimuth_count || window_size > rg.range_count {
        return Err(Error::WindowTooLarge {
            window: window_size,
            rows: rg.azimuth_count,
            cols: rg.range_count,
        });
    }
    if !(window_std > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window std must be > 0, got {window_std}"
        )));
    }
    let n = stack.num_images();
    let w = gaussian_weights(window_size, window_std);
    let half = window_size / 2;
    let pm = stack.to_pixel_major();
    let matrices = par::map_range(rg.num_pixels(), |p| {
        let (a, r) = (p / rg.range_count, p % rg.range_count);
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        let mut total = 0.0;
        let a_lo = a.saturating_sub(half);
        let a_hi = (a + half).min(rg.azimuth_count - 1);
        let r_lo = r.saturating_sub(half);
        let r_hi = (r + half).min(rg.range_count - 1);
        for qa in a_lo..=a_hi {
            for qr in r_lo..=r_hi {
                let weight = w[qa + half - a] * w[qr + half - r];
                total += weight;
                let q = rg.pixel_index(qa, qr);
                let v = &pm[q * n..(q + 1) * n];
                for i in 0..n {
                    let vi = v[i] * weight;
                    for j in i..n {
                        acc[(i, j)] += vi * v[j].conj();
                    }
                }
            }
        }
        for i in 0..n {
            acc[(i, i)].im = 0.0;
            for j in i..n {
                acc[(i, j)] /= total;
                acc[(j, i)] = acc[(i, j)].conj();
            }
        }
        acc
    });
    Ok(CovarianceField { n, matrices })
}

fn check_hermitian(r: &DMatrix<Complex64>) -> Result<()> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let scale = r.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let asym = (r - r.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if asym > 1e-12 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

fn check_size(r: &DMatrix<Complex64>, geom: &AcquisitionGeometry) -> Result<()> {
    if r.nrows() != geom.num_images() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} covariance for {} images",
            r.nrows(),
            r.ncols(),
            geom.num_images()
        )));
    }
    Ok(())
}

fn steering(geom: &AcquisitionGeometry, z: f64) -> DVector<Complex64> {
    DVector::from_vec(steering_vector(geom, z))
}

/// Classical beamforming `P(z) = a(z)^H R a(z) / N^2`.
pub fn beamforming_profile(r: &DMatrix<Complex64>, geom: &AcquisitionGeometry, z: &[f64]) -> Result<Vec<f64>> {
    check_hermitian(r)?;
    check_size(r, geom)?;
    let n2 = (geom.num_images() * geom.num_images()) as f64;
    Ok(z.iter()
        .map(|&z| {
            let a = steering(geom, z);
            a.dotc(&(r * &a)).re / n2
        })
        .collect())
}

/// Capon `P(z) = 1 / (a^H (R + loading tr(R)/N I)^-1 a)`.
pub fn capon_profile(r: &DMatrix<Complex64>, geom: &AcquisitionGeometry, z: &[f64], loading: f64) -> Result<Vec<f64>> {
    check_hermitian(r)?;
    check_size(r, geom)?;
    if !(loading >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diagonal loading must be >= 0, got {loading}"
        )));
    }
    let n = r.nrows();
    let tr = r.trace().re;
    let loaded = r + DMatrix::<Complex64>::identity(n, n) * Complex64::new(loading * tr / n as f64, 0.0);
    let chol = loaded.cholesky().ok_or(Error::SingularMatrix)?;
    let l = chol.l();
    z.iter()
        .map(|&z| {
            let a = steering(geom, z);
            let y = l.solve_lower_triangular(&a).ok_or(Error::SingularMatrix)?;
            let q = y.norm_squared();
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::SingularMatrix);
            }
            Ok(1.0 / q)
        })
        .collect()
}

/// MUSIC pseudo-spectrum `P(z) = 1 / ||E_n^H a(z)||^2`, `E_n` spanning the
/// eigenvectors of the `N - D` smallest eigenvalues.
pub fn music_profile(r: &DMatrix<Complex64>, geom: &AcquisitionGeometry, z: &[f64], order: usize) -> Result<Vec<f64>> {
    check_hermitian(r)?;
    check_size(r, geom)?;
    let n = r.nrows();
    if order == 0 || order >= n {
        return Err(Error::InvalidModelOrder { order, n_images: n });
    }
    let eig = r.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let noise: Vec<DVector<Complex64>> = idx[..n - order]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    Ok(z.iter()
        .map(|&z| {
            let a = steering(geom, z);
            let q: f64 = noise.iter().map(|e| e.dotc(&a).norm_sqr()).sum();
            1.0 / q.max(f64::MIN_POSITIVE)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    Beamforming,
    Capon,
    Music,
}

impl FromStr for SpectralMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beamforming" | "bf" => Ok(SpectralMethod::Beamforming),
            "capon" => Ok(SpectralMethod::Capon),
            "music" => Ok(SpectralMethod::Music),
            "wsf" | "nsf" | "spice" => Err(Error::UnsupportedMethod(format!(
                "{s} is out of scope; the spectral estimators are beamforming, capon and music"
            ))),
            _ => Err(Error::UnsupportedMethod(format!("unknown method `{s}`"))),
        }
    }
}

impl SpectralMethod {
    pub fn name(self) -> &'static str {
        match self {
            SpectralMethod::Beamforming => "beamforming",
            SpectralMethod::Capon => "capon",
            SpectralMethod::Music => "music",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralParams {
    pub window_size: usize,
    pub window_std: f64,
    /// Capon diagonal loading, relative to `tr(R) / N`.
    pub loading: f64,
    /// MUSIC signal subspace dimension.
    pub model_order: usize,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            window_size: 7,
            window_std: 1.5,
            loading: 1e-3,
            model_order: 2,
        }
    }
}

/// Reflectivity amplitude volume from per-pixel spectral estimates.
///
/// Every voxel gets the square root of the profile evaluated at its own
/// height in its radar cell; voxels outside the swath stay zero. MUSIC has no
/// power scale of its own, so its profile is normalized per pixel to peak at
/// the mean image power `tr(R)/N`.
pub fn spectral_volume(
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
    method: SpectralMethod,
    params: &SpectralParams,
) -> Result<MagnitudeVolume> {
    let op = PhiOperator::new(geom, stack.radar_grid(), grid);
    op.check_stack(stack)?;
    let cov = estimate_covariance(stack, params.window_size, params.window_std)?;
    let cells = op.cell_map();
    let nz = grid.nz();
    let n = geom.num_images() as f64;
    let per_pixel = par::map_range(cells.num_pixels(), |p| -> Result<Vec<f64>> {
        let voxels = cells.voxels_of(p);
        let r = cov.matrix(p);
        let tr = r.trace().re;
        if voxels.is_empty() || tr <= 0.0 {
            return Ok(vec![0.0; voxels.len()]);
        }
        let z: Vec<f64> = voxels.iter().map(|&v| grid.z(v as usize % nz)).collect();
        let power = match method {
            SpectralMethod::Beamforming => beamforming_profile(r, geom, &z)?,
            SpectralMethod::Capon => capon_profile(r, geom, &z, params.loading)?,
            SpectralMethod::Music => {
                let pseudo = music_profile(r, geom, &z, params.model_order)?;
                let peak = pseudo.iter().copied().fold(0.0, f64::max);
                pseudo.iter().map(|q| tr / n * q / peak).collect()
            }
        };
        Ok(power.into_iter().map(|x| x.max(0.0).sqrt()).collect())
    });
    let mut out = MagnitudeVolume::zeros(grid);
    for (p, vals) in per_pixel.into_iter().enumerate() {
        for (&v, x) in cells.voxels_of(p).iter().zip(vals?) {
            out.data_mut()[v as usize] = x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> AcquisitionGeometry {
        AcquisitionGeometry::uniform(10, 1800.0, 0.031, 0.6, 6e5).unwrap()
    }

    fn outer(a: &DVector<Complex64>) -> DMatrix<Complex64> {
        a * a.adjoint()
    }

    #[test]
    fn identity_covariance_is_flat() {
        let g = geom();
        let z: Vec<f64> = (0..20).map(|k| k as f64 * 0.7).collect();
        let eye = DMatrix::<Complex64>::identity(10, 10);
        for p in beamforming_profile(&eye, &g, &z).unwrap() {
            assert!((p - 0.1).abs() < 1e-12);
        }
        for p in capon_profile(&eye, &g, &z, 0.0).unwrap() {
            assert!((p - 0.1).abs() < 1e-12);
        }
        for p in music_profile(&eye, &g, &z, 2).unwrap() {
            assert!((p - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_peaks_at_its_height() {
        let g = geom();
        let z: Vec<f64> = (0..60).map(|k| k as f64 * 0.25).collect();
        let truth = 7.25;
        let r = outer(&steering(&g, truth)) + DMatrix::<Complex64>::identity(10, 10) * Complex64::new(1e-6, 0.0);
        let argmax = |p: Vec<f64>| z[p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert_eq!(argmax(beamforming_profile(&r, &g, &z).unwrap()), truth);
        assert_eq!(argmax(capon_profile(&r, &g, &z, 1e-3).unwrap()), truth);
        assert_eq!(argmax(music_profile(&r, &g, &z, 1).unwrap()), truth);
    }

    #[test]
    fn scaling_behaviour() {
        let g = geom();
        // off the scatterer heights, where the MUSIC denominator is not ~0
        let z = [0.0, 3.7, 5.5];
        let r = outer(&steering(&g, 2.0))
            + outer(&steering(&g, 9.0))
            + DMatrix::<Complex64>::identity(10, 10) * Complex64::new(0.1, 0.0);
        let r3 = &r * Complex64::new(3.0, 0.0);
        let c1 = capon_profile(&r, &g, &z, 1e-3).unwrap();
        let c3 = capon_profile(&r3, &g, &z, 1e-3).unwrap();
        let m1 = music_profile(&r, &g, &z, 2).unwrap();
        let m3 = music_profile(&r3, &g, &z, 2).unwrap();
        for k in 0..3 {
            assert!((c3[k] - 3.0 * c1[k]).abs() < 1e-9 * c3[k]);
            assert!((m3[k] - m1[k]).abs() < 1e-8 * m1[k]);
        }
    }

    #[test]
    fn input_validation() {
        let g = geom();
        let mut r = DMatrix::<Complex64>::identity(10, 10);
        r[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            beamforming_profile(&r, &g, &[0.0]),
            Err(Error::NotHermitian(_))
        ));
        let eye = DMatrix::<Complex64>::identity(10, 10);
        assert!(matches!(
            music_profile(&eye, &g, &[0.0], 10),
            Err(Error::InvalidModelOrder { .. })
        ));
        let zero = DMatrix::<Complex64>::zeros(10, 10);
        assert!(matches!(
            capon_profile(&zero, &g, &[0.0], 1e-3),
            Err(Error::SingularMatrix)
        ));
        assert!(matches!(
            "wsf".parse::<SpectralMethod>(),
            Err(Error::UnsupportedMethod(_))
        ));
        assert_eq!("Capon".parse::<SpectralMethod>().unwrap(), SpectralMethod::Capon);
    }
}
