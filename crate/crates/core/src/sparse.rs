//! l1-regularized inversion
//!
//! ```text
//! minimize  F(u) = ||Phi u - v||^2 + sum_p mu(p) |u(p)|
//! ```
//!
//! by proximal gradient. The data term is used exactly as written (no 1/2),
//! so the gradient is `2 Phi^H (Phi u - v)`, its Lipschitz constant is
//! `2 ||Phi||^2` and a voxel stays at zero as long as
//! `|2 Phi^H (Phi u - v)| <= mu`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forward::PhiOperator;
use crate::geometry::{AcquisitionGeometry, GroundGrid, RadarGrid};
use crate::volume::{MagnitudeVolume, ReflectivityVolume, SarStack};
use crate::{par, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Nonnegative per-voxel weight of the l1 term.
#[derive(Clone, Debug, PartialEq)]
pub enum SparsityMap {
    Uniform(f64),
    Map(MagnitudeVolume),
}

impl SparsityMap {
    pub fn validate(&self, grid: &GroundGrid) -> Result<()> {
        let bad = |x: f64| !(x >= 0.0 && x.is_finite());
        match self {
            SparsityMap::Uniform(m) if bad(*m) => Err(Error::InvalidParameter(format!("mu must be >= 0, got {m}"))),
            SparsityMap::Map(v) if v.grid() != grid => {
                Err(Error::DimensionMismatch("sparsity map grid differs".into()))
            }
            SparsityMap::Map(v) if v.data().iter().any(|&x| bad(x)) => Err(Error::InvalidParameter(
                "sparsity map has negative or non-finite values".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Dense per-voxel values.
    pub fn to_vec(&self, len: usize) -> Vec<f64> {
        match self {
            SparsityMap::Uniform(m) => vec![*m; len],
            SparsityMap::Map(v) => v.data().to_vec(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            SparsityMap::Uniform(m) => *m,
            SparsityMap::Map(v) => v.sum() / v.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Stop once the relative objective change falls below this...
    pub tolerance: f64,
    /// ...and the KKT residual is below `kkt_tolerance * mean(mu)`.
    pub kkt_tolerance: f64,
    /// FISTA with adaptive restart; plain ISTA (monotone) when false.
    pub accelerated: bool,
    /// Step = `step_safety / (2 ||Phi||^2)`.
    pub step_safety: f64,
    /// Record the objective and KKT residual of every iteration.
    pub trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iterations: 5000,
            tolerance: 1e-8,
            kkt_tolerance: 1e-4,
            accelerated: true,
            step_safety: 0.95,
            trace: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) || !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        if !(self.step_safety > 0.0 && self.step_safety < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step_safety must lie in (0, 1), got {}",
                self.step_safety
            )));
        }
        Ok(())
    }
}

/// One row per iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub objective: Vec<f64>,
    pub kkt: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Inversion {
    pub volume: ReflectivityVolume,
    pub iterations: usize,
    pub objective: f64,
    pub kkt: f64,
    /// Both stopping tests passed before the iteration cap.
    pub converged: bool,
    pub trace: SolverTrace,
}

/// Complex soft threshold `x max(1 - t/|x|, 0)`.
#[inline]
pub fn soft_threshold(x: Complex64, t: f64) -> Complex64 {
    let a = x.norm();
    if a <= t {
        ZERO
    } else {
        x * ((a - t) / a)
    }
}

/// Power-iteration estimate of `||Phi||^2` from a fixed pseudo-random start.
pub fn operator_norm_sq(geom: &AcquisitionGeometry, rgrid: &RadarGrid, grid: &GroundGrid, iters: usize) -> Result<f64> {
    if iters < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 power iterations, got {iters}"
        )));
    }
    Ok(power_iteration(&PhiOperator::new(geom, rgrid, grid), iters))
}

pub(crate) fn power_iteration(op: &PhiOperator, iters: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Complex64> = (0..op.grid().len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut ax = vec![ZERO; op.data_len()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|c| *c /= norm);
        op.apply_into(&x, &mut ax);
        estimate = ax.iter().map(|c| c.norm_sqr()).sum();
        op.adjoint_into(&ax, &mut x);
    }
    estimate
}

fn objective(ax: &[Complex64], v: &[Complex64], u: &[Complex64], mu: &[f64]) -> f64 {
    let data: f64 = ax.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum();
    let reg: f64 = u.iter().zip(mu).map(|(x, m)| m * x.norm()).sum();
    data + reg
}

/// Largest violation of the optimality conditions given `g = 2 Phi^H (Phi u - v)`.
fn kkt_from_gradient(u: &[Complex64], g: &[Complex64], mu: &[f64]) -> f64 {
    u.iter()
        .zip(g)
        .zip(mu)
        .map(|((x, g), m)| {
            let a = x.norm();
            if a == 0.0 {
                (g.norm() - m).max(0.0)
            } else {
                (g + x * (m / a)).norm()
            }
        })
        .fold(0.0, f64::max)
}

fn gradient(op: &PhiOperator, ax: &[Complex64], v: &[Complex64], g: &mut [Complex64], r: &mut [Complex64]) {
    for ((r, a), b) in r.iter_mut().zip(ax).zip(v) {
        *r = (a - b) * 2.0;
    }
    op.adjoint_into(r, g);
}

/// KKT residual of `u` for the problem with data `stack` and weights `mu`.
pub fn kkt_residual(
    u: &ReflectivityVolume,
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    mu: &SparsityMap,
) -> Result<f64> {
    let op = PhiOperator::new(geom, stack.radar_grid(), u.grid());
    kkt_residual_with(&op, u, stack, mu)
}

pub fn kkt_residual_with(op: &PhiOperator, u: &ReflectivityVolume, stack: &SarStack, mu: &SparsityMap) -> Result<f64> {
    op.check_stack(stack)?;
    mu.validate(op.grid())?;
    let v = stack.to_pixel_major();
    let mut ax = vec![ZERO; op.data_len()];
    op.apply_into(u.data(), &mut ax);
    let mut r = vec![ZERO; op.data_len()];
    let mut g = vec![ZERO; op.grid().len()];
    gradient(op, &ax, &v, &mut g, &mut r);
    Ok(kkt_from_gradient(u.data(), &g, &mu.to_vec(u.len())))
}

/// 3-D inversion in ground geometry; see [`invert_l1_3d_with`].
pub fn invert_l1_3d(
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
    mu: &SparsityMap,
    params: &SolverParams,
) -> Result<Inversion> {
    let op = PhiOperator::new(geom, stack.radar_grid(), grid);
    invert_l1_3d_with(&op, stack, mu, params, None)
}

/// Proximal-gradient solution of the l1 problem on a prebuilt operator,
/// optionally warm-started.
pub fn invert_l1_3d_with(
    op: &PhiOperator,
    stack: &SarStack,
    mu: &SparsityMap,
    params: &SolverParams,
    warm_start: Option<&ReflectivityVolume>,
) -> Result<Inversion> {
    op.check_stack(stack)?;
    mu.validate(op.grid())?;
    params.validate()?;
    let grid = *op.grid();
    let nvox = grid.len();
    let v = stack.to_pixel_major();
    let mu_vec = mu.to_vec(nvox);
    let mut x = match warm_start {
        Some(w) if w.grid() == &grid => w.data().to_vec(),
        Some(_) => return Err(Error::DimensionMismatch("warm start grid differs".into())),
        None => vec![ZERO; nvox],
    };
    let lipschitz = 2.0 * op.norm_sq();
    let mut ax = vec![ZERO; op.data_len()];
    op.apply_into(&x, &mut ax);
    let mut r = vec![ZERO; op.data_len()];
    let mut g = vec![ZERO; nvox];

    let kkt_scale = if mu.mean() > 0.0 {
        mu.mean()
    } else {
        let mut aty = vec![ZERO; nvox];
        op.adjoint_into(&v, &mut aty);
        2.0 * aty.iter().map(|c| c.norm()).fold(0.0, f64::max)
    };
    let kkt_target = params.kkt_tolerance * kkt_scale;
    let kkt_at = |x: &[Complex64], ax: &[Complex64], g: &mut [Complex64], r: &mut [Complex64]| {
        gradient(op, ax, &v, g, r);
        kkt_from_gradient(x, g, &mu_vec)
    };

    let f0 = objective(&ax, &v, &x, &mu_vec);
    let mut trace = SolverTrace::default();
    if lipschitz == 0.0 || f0 == 0.0 {
        let kkt = kkt_at(&x, &ax, &mut g, &mut r);
        return Ok(Inversion {
            volume: ReflectivityVolume::from_vec(&grid, x)?,
            iterations: 0,
            objective: f0,
            kkt,
            converged: kkt <= kkt_target,
            trace,
        });
    }
    let step = params.step_safety / lipschitz;

    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut x_new = vec![ZERO; nvox];
    let mut ax_new = vec![ZERO; op.data_len()];
    let mut t = 1.0f64;
    let mut f = f0;
    let mut kkt = f64::INFINITY;
    let mut last_kkt_check = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_iterations {
        iterations = it;
        gradient(op, &ay, &v, &mut g, &mut r);
        {
            let (y, g, mu_vec) = (&y, &g, &mu_vec);
            par::for_each_mut(&mut x_new, |i, out| {
                *out = soft_threshold(y[i] - g[i] * step, step * mu_vec[i]);
            });
        }
        op.apply_into(&x_new, &mut ax_new);
        let f_new = objective(&ax_new, &v, &x_new, &mu_vec);
        if !f_new.is_finite() || f_new > 10.0 * f0 {
            return Err(Error::Divergence {
                iteration: it,
                objective: f_new,
                initial: f0,
            });
        }

        if params.accelerated {
            if f_new > f {
                t = 1.0;
                y.copy_from_slice(&x_new);
                ay.copy_from_slice(&ax_new);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let w = (t - 1.0) / t_next;
                for i in 0..nvox {
                    y[i] = x_new[i] + (x_new[i] - x[i]) * w;
                }
                for i in 0..ay.len() {
                    ay[i] = ax_new[i] + (ax_new[i] - ax[i]) * w;
                }
                t = t_next;
            }
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut ax, &mut ax_new);
        if !params.accelerated {
            y.copy_from_slice(&x);
            ay.copy_from_slice(&ax);
        }
        let rel = (f - f_new).abs() / f.max(f64::MIN_POSITIVE);
        f = f_new;

        let want_kkt =
            params.trace || (rel < params.tolerance && it - last_kkt_check >= 10) || it == params.max_iterations;
        if want_kkt {
            kkt = kkt_at(&x, &ax, &mut g, &mut r);
            last_kkt_check = it;
        }
        if params.trace {
            trace.objective.push(f);
            trace.kkt.push(kkt);
        }
        if rel < params.tolerance && want_kkt && kkt <= kkt_target {
            converged = true;
            break;
        }
    }
    if last_kkt_check != iterations {
        kkt = kkt_at(&x, &ax, &mut g, &mut r);
    }
    Ok(Inversion {
        volume: ReflectivityVolume::from_vec(&grid, x)?,
        iterations,
        objective: f,
        kkt,
        converged,
        trace,
    })
}

/// Per-cell inversion: the same l1 problem solved independently in every
/// radar cell with the dense steering matrix of the cell's voxels. Since
/// `Phi^H Phi` is block diagonal this has the same minimizer as
/// [`invert_l1_3d`] with uniform `mu`.
pub fn invert_cs_per_cell(
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
    mu: f64,
    params: &SolverParams,
) -> Result<ReflectivityVolume> {
    SparsityMap::Uniform(mu).validate(grid)?;
    params.validate()?;
    let op = PhiOperator::new(geom, stack.radar_grid(), grid);
    op.check_stack(stack)?;
    let n = op.num_images();
    let nz = grid.nz();
    let v = stack.to_pixel_major();
    let cells = op.cell_map();
    let solutions = par::map_range(cells.num_pixels(), |p| {
        let voxels = cells.voxels_of(p);
        if voxels.is_empty() {
            return Ok(Vec::new());
        }
        let a = DMatrix::from_fn(n, voxels.len(), |i, j| op.layer_phases(voxels[j] as usize % nz)[i]);
        solve_cell(&a, &v[p * n..(p + 1) * n], mu, params)
    });
    let mut out = ReflectivityVolume::zeros(grid);
    for (p, sol) in solutions.into_iter().enumerate() {
        for (&vox, x) in cells.voxels_of(p).iter().zip(sol?) {
            out.data_mut()[vox as usize] = x;
        }
    }
    Ok(out)
}

/// Dense FISTA for `||A x - b||^2 + mu ||x||_1`.
fn solve_cell(a: &DMatrix<Complex64>, b: &[Complex64], mu: f64, params: &SolverParams) -> Result<Vec<Complex64>> {
    let m = a.ncols();
    let b = nalgebra::DVector::from_column_slice(b);
    let ah = a.adjoint();
    let gram = &ah * a;
    let atb = &ah * &b;
    let lipschitz = 2.0 * gram.clone().symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let bnorm = b.norm_squared();
    if lipschitz == 0.0 || bnorm == 0.0 {
        return Ok(vec![ZERO; m]);
    }
    let step = params.step_safety / lipschitz;
    // ||A x - b||^2 = x^H G x - 2 Re(x^H A^H b) + ||b||^2
    let obj = |x: &nalgebra::DVector<Complex64>| {
        let gx = &gram * x;
        x.dotc(&gx).re - 2.0 * x.dotc(&atb).re + bnorm + mu * x.iter().map(|c| c.norm()).sum::<f64>()
    };
    let grad = |y: &nalgebra::DVector<Complex64>| (&gram * y - &atb) * Complex64::new(2.0, 0.0);
    let kkt = |x: &nalgebra::DVector<Complex64>| {
        let g = grad(x);
        kkt_from_gradient(x.as_slice(), g.as_slice(), &vec![mu; m])
    };
    let f0 = bnorm;
    let mut x = nalgebra::DVector::from_element(m, ZERO);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f = f0;
    for it in 1..=params.max_iterations {
        let g = grad(&y);
        let x_new = nalgebra::DVector::from_iterator(m, (0..m).map(|i| soft_threshold(y[i] - g[i] * step, step * mu)));
        let f_new = obj(&x_new);
        if !f_new.is_finite() || f_new > 10.0 * f0 {
            return Err(Error::Divergence {
                iteration: it,
                objective: f_new,
                initial: f0,
            });
        }
        if params.accelerated && f_new <= f {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + (&x_new - &x) * Complex64::new((t - 1.0) / t_next, 0.0);
            t = t_next;
        } else {
            t = 1.0;
            y = x_new.clone();
        }
        let rel = (f - f_new).abs() / f.max(f64::MIN_POSITIVE);
        x = x_new;
        f = f_new;
        if rel < params.tolerance && kkt(&x) <= params.kkt_tolerance * mu.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::apply_phi;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(Complex64::new(5.0, 0.0), 2.0), Complex64::new(3.0, 0.0));
        assert_eq!(soft_threshold(Complex64::new(0.3, -0.4), 0.5), ZERO);
        let r = soft_threshold(Complex64::new(3.0, 4.0), 1.0);
        assert!((r - Complex64::new(3.0, 4.0) * 0.8).norm() < 1e-15);
    }

    #[test]
    fn one_voxel_per_cell_norm_is_n() {
        let geom = AcquisitionGeometry::new(vec![0.0, 50.0, 120.0], 0.03, 0.6, 6e5).unwrap();
        let grid = GroundGrid::new([2, 3, 1], [1.0; 3], [0.0; 3]).unwrap();
        let rgrid = RadarGrid::covering(&geom, &grid, 0.5).unwrap();
        let op = PhiOperator::new(&geom, &rgrid, &grid);
        assert_eq!(op.cell_map().max_cell_count(), 1);
        assert!((op.norm_sq() - 3.0).abs() < 1e-12);
        assert!((operator_norm_sq(&geom, &rgrid, &grid, 20).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn huge_mu_kills_everything() {
        let geom = AcquisitionGeometry::new(vec![0.0, 80.0, 200.0, -60.0], 0.03, 0.6, 6e5).unwrap();
        let grid = GroundGrid::new([2, 4, 4], [1.0; 3], [0.0; 3]).unwrap();
        let rgrid = RadarGrid::covering(&geom, &grid, 0.7).unwrap();
        let mut u = ReflectivityVolume::zeros(&grid);
        *u.at_mut(1, 2, 3) = Complex64::new(1.0, 1.0);
        let stack = apply_phi(&u, &geom, &rgrid).unwrap();
        let aty = crate::forward::adjoint_phi(&stack, &geom, &rgrid, &grid).unwrap();
        let kill = 2.0 * aty.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mu = SparsityMap::Uniform(kill * 1.01);
        let inv = invert_l1_3d(&stack, &geom, &grid, &mu, &SolverParams::default()).unwrap();
        assert_eq!(inv.volume.count_nonzero(), 0);
        let zero = ReflectivityVolume::zeros(&grid);
        assert_eq!(kkt_residual(&zero, &stack, &geom, &mu).unwrap(), 0.0);
    }

    #[test]
    fn least_squares_with_orthogonal_columns() {
        let geom = AcquisitionGeometry::new(vec![0.0, 80.0, 200.0, -60.0], 0.03, 0.6, 6e5).unwrap();
        let grid = GroundGrid::new([2, 3, 1], [1.0; 3], [0.0; 3]).unwrap();
        let rgrid = RadarGrid::covering(&geom, &grid, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = (0..4 * rgrid.num_pixels())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let stack = SarStack::from_vec(4, &rgrid, data).unwrap();
        let inv = invert_l1_3d(
            &stack,
            &geom,
            &grid,
            &SparsityMap::Uniform(0.0),
            &SolverParams::default(),
        )
        .unwrap();
        let aty = crate::forward::adjoint_phi(&stack, &geom, &rgrid, &grid).unwrap();
        for (x, a) in inv.volume.data().iter().zip(aty.data()) {
            assert!((x - a / 4.0).norm() < 1e-9);
        }
    }
}
