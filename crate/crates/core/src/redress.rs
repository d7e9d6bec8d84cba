//! Alternating l1 inversion and surface segmentation.
//!
//! Iteration 0 inverts with a uniform sparsity weight `mu0` and segments the
//! result. Every later iteration `k` rebuilds the weight from the previous
//! surface,
//!
//! ```text
//! mu_k(p) = mu0 + b / (n-1)^2 * (k / (n-k) * d(p, S))^2
//! ```
//!
//! with `d` the distance to the surface in voxels, then inverts and segments
//! again. At the last iteration a voxel one voxel off the surface pays
//! `mu0 + b`.

use crate::edt::distance_to_surface;
use crate::forward::PhiOperator;
use crate::geometry::{AcquisitionGeometry, GroundGrid};
use crate::segmentation::segment;
use crate::sparse::{invert_l1_3d_with, SolverParams, SparsityMap};
use crate::surface::ElevationMap;
use crate::volume::{MagnitudeVolume, ReflectivityVolume, SarStack};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RedressParams {
    /// Total number of inversion/segmentation rounds.
    pub iterations: usize,
    pub mu0: f64,
    pub b: f64,
    pub beta: f64,
    pub solver: SolverParams,
    /// Start each inversion from the previous solution.
    pub warm_start: bool,
}

impl Default for RedressParams {
    fn default() -> Self {
        RedressParams {
            iterations: 5,
            mu0: 1.0,
            b: 1.0,
            beta: 2.0,
            solver: SolverParams::default(),
            warm_start: true,
        }
    }
}

impl RedressParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 iterations, got {}",
                self.iterations
            )));
        }
        for (name, v) in [("mu0", self.mu0), ("b", self.b), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        self.solver.validate()
    }
}

/// `mu_k` from a distance volume (voxel units).
pub fn mu_from_distance(distance: &MagnitudeVolume, k: usize, n: usize, mu0: f64, b: f64) -> Result<MagnitudeVolume> {
    if k >= n {
        return Err(Error::InvalidIteration { k, n });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let scale = b / ((n - 1) * (n - 1)) as f64;
    let ratio = k as f64 / (n - k) as f64;
    Ok(distance.map(|d| {
        let t = ratio * d;
        mu0 + scale * t * t
    }))
}

/// Sparsity map of iteration `k` around `map`.
pub fn mu_map(map: &ElevationMap, grid: &GroundGrid, k: usize, params: &RedressParams) -> Result<SparsityMap> {
    if k >= params.iterations {
        return Err(Error::InvalidIteration {
            k,
            n: params.iterations,
        });
    }
    if k == 0 {
        return Ok(SparsityMap::Uniform(params.mu0));
    }
    let d = distance_to_surface(map, grid);
    Ok(SparsityMap::Map(mu_from_distance(
        &d,
        k,
        params.iterations,
        params.mu0,
        params.b,
    )?))
}

/// Diagnostics of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub solver_iterations: usize,
    pub objective: f64,
    pub kkt: f64,
    pub converged: bool,
    pub energy: f64,
    pub nonzeros: usize,
    pub mean_mu: f64,
}

/// State handed to the observer after every round.
pub struct IterationState<'a> {
    pub record: &'a IterationRecord,
    pub volume: &'a ReflectivityVolume,
    pub surface: &'a ElevationMap,
    pub mu: &'a SparsityMap,
}

#[derive(Clone, Debug)]
pub struct RedressResult {
    pub volume: ReflectivityVolume,
    pub surface: ElevationMap,
    pub history: Vec<IterationRecord>,
}

pub fn redress(
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
    params: &RedressParams,
) -> Result<RedressResult> {
    redress_observed(stack, geom, grid, params, |_| Ok(()))
}

/// [`redress`] calling `observe` after each round, e.g. to write
/// checkpoints or collect per-iteration volumes.
pub fn redress_observed(
    stack: &SarStack,
    geom: &AcquisitionGeometry,
    grid: &GroundGrid,
    params: &RedressParams,
    mut observe: impl FnMut(&IterationState) -> Result<()>,
) -> Result<RedressResult> {
    params.validate()?;
    let op = PhiOperator::new(geom, stack.radar_grid(), grid);
    op.check_stack(stack)?;
    let mut history = Vec::with_capacity(params.iterations);
    let mut current: Option<(ReflectivityVolume, ElevationMap)> = None;
    for k in 0..params.iterations {
        let mu = match &current {
            None => SparsityMap::Uniform(params.mu0),
            Some((_, surface)) => mu_map(surface, grid, k, params)?,
        };
        let warm = if params.warm_start {
            current.as_ref().map(|(u, _)| u)
        } else {
            None
        };
        let inv = invert_l1_3d_with(&op, stack, &mu, &params.solver, warm)?;
        let seg = segment(&inv.volume.magnitude(), geom, params.beta)?;
        let record = IterationRecord {
            k,
            solver_iterations: inv.iterations,
            objective: inv.objective,
            kkt: inv.kkt,
            converged: inv.converged,
            energy: seg.energy,
            nonzeros: inv.volume.count_nonzero(),
            mean_mu: mu.mean(),
        };
        observe(&IterationState {
            record: &record,
            volume: &inv.volume,
            surface: &seg.map,
            mu: &mu,
        })?;
        history.push(record);
        current = Some((inv.volume, seg.map));
    }
    let (volume, surface) = current.expect("at least two iterations");
    Ok(RedressResult {
        volume,
        surface,
        history,
    })
}
