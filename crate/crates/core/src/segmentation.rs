//! Minimum-cut extraction of the elevation map.
//!
//! Along every ray the cumulative reflectivities
//!
//! ```text
//! C-(s) = sum_{k <= s} |u_k| d        C+(s) = sum_{k > s} |u_k| d
//! ```
//!
//! price each sample: labelling it air (in front of the surface) costs
//! `[C- - C+]+ d`, labelling it interior costs `[C+ - C-]+ d`. A ray crossed
//! by the surface at sample `r` therefore pays the penalty `D(r)`, minimal at
//! the equilibrium sample where `C-` first reaches `C+`. Sample costs are
//! pushed to their nearest voxel and the elevation map minimizing the total
//! plus `beta` per unit of vertical wall is found as a minimum cut of a
//! layer-cake network: one node per voxel, sink side = air, source side =
//! interior, infinite arcs forcing every column to be interior below its
//! surface.
//!
//! Costs are rounded to a dyadic quantum (`2^-30` of the largest voxel cost
//! or of `beta`, whichever is larger). Capacities are then small integers in
//! units of that quantum, the max-flow arithmetic is exact, and cut costs
//! equal [`surface_energy`] exactly rather than up to rounding.

use gridcut_maxflow::{max_flow, CutResult, FlowNetwork, NodeId, INF};

use crate::geometry::{AcquisitionGeometry, GroundGrid};
use crate::rays::{resample_to_rays, RayVolume};
use crate::surface::ElevationMap;
use crate::volume::MagnitudeVolume;
use crate::{par, Error, Result};

/// Cumulative reflectivity along every ray column.
#[derive(Clone, Debug)]
pub struct CumulativeProfiles {
    step: f64,
    starts: Vec<usize>,
    minus: Vec<f64>,
    plus: Vec<f64>,
    equilibrium: Vec<usize>,
}

impl CumulativeProfiles {
    /// Profiles of explicit sample columns with spacing `step`.
    pub fn from_columns(columns: &[Vec<f64>], step: f64) -> Self {
        let mut starts = vec![0];
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        let mut equilibrium = Vec::with_capacity(columns.len());
        for col in columns {
            let (m, p) = column_profile(col, step);
            equilibrium.push(m.iter().zip(&p).position(|(a, b)| a >= b).unwrap_or(0));
            minus.extend(m);
            plus.extend(p);
            starts.push(minus.len());
        }
        CumulativeProfiles {
            step,
            starts,
            minus,
            plus,
            equilibrium,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn num_columns(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn c_minus(&self, c: usize) -> &[f64] {
        &self.minus[self.starts[c]..self.starts[c + 1]]
    }

    pub fn c_plus(&self, c: usize) -> &[f64] {
        &self.plus[self.starts[c]..self.starts[c + 1]]
    }

    /// First sample where `C-` reaches `C+` (0 for an empty column).
    pub fn equilibrium(&self, c: usize) -> usize {
        self.equilibrium[c]
    }

    /// Air and interior cost of each sample of column `c`.
    pub fn sample_costs(&self, c: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.c_minus(c).iter().zip(self.c_plus(c)).map(move |(m, p)| {
            let f = m - p;
            (f.max(0.0) * self.step, (-f).max(0.0) * self.step)
        })
    }
}

fn column_profile(col: &[f64], step: f64) -> (Vec<f64>, Vec<f64>) {
    let mut minus = Vec::with_capacity(col.len());
    let mut acc = 0.0;
    for x in col {
        acc += x * step;
        minus.push(acc);
    }
    let mut plus = vec![0.0; col.len()];
    let mut acc = 0.0;
    for k in (0..col.len()).rev() {
        plus[k] = acc;
        acc += col[k] * step;
    }
    (minus, plus)
}

/// Prefix and suffix sums of `|u| d_ray` along every column of `rays`.
pub fn cumulative_profiles(rays: &RayVolume) -> CumulativeProfiles {
    let columns = par::map_range(rays.num_columns(), |c| rays.column(c).to_vec());
    CumulativeProfiles::from_columns(&columns, rays.step())
}

/// `D(r) = sum_{s<r} [C- - C+]+ d + sum_{s>=r} [C+ - C-]+ d`: the data
/// penalty of a surface crossing column `c` at sample `r`. `r` may equal
/// the column length (surface beyond the last sample).
pub fn data_penalty(profiles: &CumulativeProfiles, c: usize, r: usize) -> Result<f64> {
    if c >= profiles.num_columns() {
        return Err(Error::IndexOutOfRange {
            index: c,
            len: profiles.num_columns(),
        });
    }
    let len = profiles.c_minus(c).len();
    if r > len {
        return Err(Error::IndexOutOfRange { index: r, len: len + 1 });
    }
    Ok(profiles
        .sample_costs(c)
        .enumerate()
        .map(|(s, (air, interior))| if s < r { air } else { interior })
        .sum())
}

/// Per-voxel data costs and the smoothness weight, in integer units of a
/// dyadic quantum; evaluates the segmentation energy of any elevation map.
#[derive(Clone, Debug)]
pub struct SurfaceEnergyModel {
    grid: GroundGrid,
    quantum: f64,
    air: Vec<f64>,
    interior: Vec<f64>,
    beta: f64,
    /// Data cost of column `c` with surface at layer `e`, at `[c * nz + e]`.
    column_cost: Vec<f64>,
}

fn dyadic_quantum(max_value: f64) -> f64 {
    if max_value > 0.0 {
        2f64.powi(max_value.log2().ceil() as i32 - 30)
    } else {
        1.0
    }
}

impl SurfaceEnergyModel {
    pub fn new(volume: &MagnitudeVolume, geom: &AcquisitionGeometry, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        if let Some(x) = volume.data().iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "magnitudes must be finite and >= 0, found {x}"
            )));
        }
        let rays = resample_to_rays(volume, geom)?;
        let profiles = cumulative_profiles(&rays);
        let grid = *volume.grid();
        let mut air = vec![0.0; grid.len()];
        let mut interior = vec![0.0; grid.len()];
        for c in 0..rays.num_columns() {
            for (v, (a, i)) in rays.column_voxels(c).zip(profiles.sample_costs(c)) {
                air[v] += a;
                interior[v] += i;
            }
        }
        let largest = air.iter().chain(&interior).copied().fold(beta, f64::max);
        let quantum = dyadic_quantum(largest);
        for x in air.iter_mut().chain(interior.iter_mut()) {
            *x = (*x / quantum).round();
        }
        let nz = grid.nz();
        let column_cost = par::map_range(grid.num_columns(), |col| {
            let a = &air[col * nz..(col + 1) * nz];
            let i = &interior[col * nz..(col + 1) * nz];
            // layer e: interior at 0..=e, air above
            let mut above: f64 = a[1..].iter().sum();
            let mut below = 0.0;
            let mut out = Vec::with_capacity(nz);
            for e in 0..nz {
                below += i[e];
                out.push(below + above);
                if e + 1 < nz {
                    above -= a[e + 1];
                }
            }
            out
        })
        .concat();
        Ok(SurfaceEnergyModel {
            grid,
            quantum,
            air,
            interior,
            beta: (beta / quantum).round(),
            column_cost,
        })
    }

    pub fn grid(&self) -> &GroundGrid {
        &self.grid
    }

    /// Size of one capacity unit.
    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    /// Cost units paid by voxel `v` when labelled air.
    pub fn air_units(&self, v: usize) -> f64 {
        self.air[v]
    }

    /// Cost units paid by voxel `v` when labelled interior.
    pub fn interior_units(&self, v: usize) -> f64 {
        self.interior[v]
    }

    pub fn beta_units(&self) -> f64 {
        self.beta
    }

    /// Data cost units of column `c` with its surface at layer `e`.
    #[inline]
    pub fn column_units(&self, c: usize, e: usize) -> f64 {
        self.column_cost[c * self.grid.nz() + e]
    }

    /// Energy in cost units of the map with surface layers `levels`.
    pub fn energy_units(&self, levels: &[usize]) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut data = 0.0;
        let mut walls = 0usize;
        for ix in 0..nx {
            for iy in 0..ny {
                let c = ix * ny + iy;
                let e = levels[c];
                data += self.column_units(c, e);
                if ix + 1 < nx {
                    walls += e.abs_diff(levels[c + ny]);
                }
                if iy + 1 < ny {
                    walls += e.abs_diff(levels[c + 1]);
                }
            }
        }
        data + self.beta * walls as f64
    }

    /// Energy of the map with surface layers `levels`.
    pub fn energy(&self, levels: &[usize]) -> f64 {
        self.energy_units(levels) * self.quantum
    }
}

/// Segmentation energy of `map`: data penalty of every ray sample given the
/// label of its nearest voxel, plus `beta` times the wall area
/// `sum |E_i - E_j| / dz` over 4-connected columns. Horizontal faces add a
/// labeling-independent constant and are left out.
pub fn surface_energy(
    map: &ElevationMap,
    volume: &MagnitudeVolume,
    geom: &AcquisitionGeometry,
    beta: f64,
) -> Result<f64> {
    if !map.grid().same_horizontal(volume.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(SurfaceEnergyModel::new(volume, geom, beta)?.energy(&map.levels()))
}

/// Layer-cake network of a segmentation problem together with its energy
/// model. Node `v` is voxel `v` of the grid.
#[derive(Clone, Debug)]
pub struct SegmentationGraph {
    pub network: FlowNetwork,
    pub model: SurfaceEnergyModel,
}

impl SegmentationGraph {
    /// Node labels induced by surface layers `levels`: voxels at or below
    /// the surface (and the source) on the source side.
    pub fn labeling(&self, levels: &[usize]) -> Vec<bool> {
        let grid = self.model.grid();
        let nz = grid.nz();
        let mut side = vec![false; self.network.num_nodes()];
        for (c, &e) in levels.iter().enumerate() {
            for k in 0..=e.min(nz - 1) {
                side[c * nz + k] = true;
            }
        }
        side[self.network.source().0] = true;
        side
    }

    /// Cut cost of the labeling induced by `levels`, in energy units.
    pub fn cut_cost(&self, levels: &[usize]) -> f64 {
        self.network.cut_capacity(&self.labeling(levels)) * self.model.quantum()
    }
}

/// Builds the segmentation network of `volume` (magnitudes).
pub fn build_graph(volume: &MagnitudeVolume, geom: &AcquisitionGeometry, beta: f64) -> Result<SegmentationGraph> {
    let model = SurfaceEnergyModel::new(volume, geom, beta)?;
    let grid = *volume.grid();
    let (nx, ny, nz) = (grid.nx(), grid.ny(), grid.nz());
    let mut net = FlowNetwork::with_nodes(grid.len());
    let (s, t) = (net.source(), net.sink());
    net.reserve_arcs(5 * grid.len());
    for v in 0..grid.len() {
        let (air, interior) = (model.air_units(v), model.interior_units(v));
        if air > 0.0 {
            net.add_arc(s, NodeId(v), air, 0.0)?;
        }
        if interior > 0.0 {
            net.add_arc(NodeId(v), t, interior, 0.0)?;
        }
    }
    for ix in 0..nx {
        for iy in 0..ny {
            net.add_arc(s, NodeId(grid.index(ix, iy, 0)), INF, 0.0)?;
            for k in 0..nz - 1 {
                // interior above air would sever this arc
                net.add_arc(
                    NodeId(grid.index(ix, iy, k + 1)),
                    NodeId(grid.index(ix, iy, k)),
                    INF,
                    0.0,
                )?;
            }
        }
    }
    let b = model.beta_units();
    if b > 0.0 {
        for ix in 0..nx {
            for iy in 0..ny {
                for k in 0..nz {
                    let v = NodeId(grid.index(ix, iy, k));
                    if ix + 1 < nx {
                        net.add_arc(v, NodeId(grid.index(ix + 1, iy, k)), b, b)?;
                    }
                    if iy + 1 < ny {
                        net.add_arc(v, NodeId(grid.index(ix, iy + 1, k)), b, b)?;
                    }
                }
            }
        }
    }
    Ok(SegmentationGraph { network: net, model })
}

/// Reads the elevation map off a cut of a [`build_graph`] network: each
/// column must be source side (interior) from the bottom up to its surface
/// and sink side (air) above.
pub fn extract_surface(cut: &CutResult, grid: &GroundGrid) -> Result<ElevationMap> {
    if cut.source_side.len() < grid.len() {
        return Err(Error::GraphConstruction(
            "cut has fewer nodes than the grid has voxels".into(),
        ));
    }
    let nz = grid.nz();
    let mut levels = Vec::with_capacity(grid.num_columns());
    for c in 0..grid.num_columns() {
        let col = &cut.source_side[c * nz..(c + 1) * nz];
        let interior = col.iter().take_while(|&&x| x).count();
        if interior == 0 {
            return Err(Error::GraphConstruction(format!("column {c} has an air bottom voxel")));
        }
        if col[interior..].iter().any(|&x| x) {
            return Err(Error::GraphConstruction(format!(
                "column {c} has more than one transition"
            )));
        }
        levels.push(interior - 1);
    }
    ElevationMap::from_levels(grid, &levels)
}

/// Result of [`segment`].
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub map: ElevationMap,
    /// Energy of `map` (equal to the minimum cut).
    pub energy: f64,
    pub augmentations: usize,
}

/// Globally optimal elevation map of `volume` for smoothness `beta`. Among
/// several optima the pointwise lowest one is returned.
pub fn segment(volume: &MagnitudeVolume, geom: &AcquisitionGeometry, beta: f64) -> Result<Segmentation> {
    let graph = build_graph(volume, geom, beta)?;
    let cut = max_flow(&graph.network);
    if graph.network.severs_infinite_arc(&cut.source_side) {
        return Err(Error::GraphConstruction("minimum cut severs an infinite arc".into()));
    }
    let map = extract_surface(&cut, volume.grid())?;
    Ok(Segmentation {
        energy: cut.flow * graph.model.quantum(),
        map,
        augmentations: cut.augmentations,
    })
}

/// [`segment`] returning the map only.
pub fn segment_surface(volume: &MagnitudeVolume, geom: &AcquisitionGeometry, beta: f64) -> Result<ElevationMap> {
    segment(volume, geom, beta).map(|s| s.map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn geom(theta: f64) -> AcquisitionGeometry {
        AcquisitionGeometry::new(vec![0.0, 100.0], 0.03, theta, 6e5).unwrap()
    }

    #[test]
    fn uniform_column_equilibrium_is_lower_middle() {
        for len in 1..12 {
            let p = CumulativeProfiles::from_columns(&[vec![1.0; len]], 0.5);
            assert_eq!(p.equilibrium(0), (len - 1) / 2, "len {len}");
        }
    }

    #[test]
    fn point_mass_equilibrium_and_penalty() {
        let mut col = vec![0.0; 9];
        col[6] = 3.0;
        let p = CumulativeProfiles::from_columns(&[col], 1.0);
        assert_eq!(p.equilibrium(0), 6);
        assert_eq!(data_penalty(&p, 0, 6).unwrap(), 0.0);
        assert!(data_penalty(&p, 0, 2).unwrap() > 0.0);
        assert!(data_penalty(&p, 0, 10).is_err());
    }

    #[test]
    fn profile_invariants() {
        let col = vec![0.5, 0.0, 2.0, 1.0, 0.25];
        let p = CumulativeProfiles::from_columns(&[col], 2.0);
        let (m, q) = (p.c_minus(0), p.c_plus(0));
        assert_eq!(*q.last().unwrap(), 0.0);
        for k in 0..5 {
            assert_eq!(m[k] + q[k], 7.5);
        }
        assert!(m.windows(2).all(|w| w[0] <= w[1]));
        assert!(q.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_volume_has_zero_flow() {
        let grid = GroundGrid::new([3, 3, 4], [1.0; 3], [0.0; 3]).unwrap();
        let vol = MagnitudeVolume::zeros(&grid);
        let g = build_graph(&vol, &geom(0.6), 0.0).unwrap();
        for k in 0..g.network.num_arcs() {
            let (_, _, cap) = g.network.arc(gridcut_maxflow::ArcId(k));
            assert!(cap == 0.0 || cap.is_infinite());
        }
        let seg = segment(&vol, &geom(0.6), 0.0).unwrap();
        assert_eq!(seg.energy, 0.0);
        assert!(seg.map.levels().iter().all(|&l| l == 0));
    }

    #[test]
    fn single_column_cut_at_point_mass() {
        // at vertical incidence each ray is a y-row; a 1 x 1 x nz column is a
        // stack of one-sample rays, and only the row holding the mass costs
        let grid = GroundGrid::new([1, 1, 6], [1.0; 3], [0.0; 3]).unwrap();
        let mut vol = MagnitudeVolume::zeros(&grid);
        *vol.at_mut(0, 0, 3) = 2.0;
        let seg = segment(&vol, &geom(FRAC_PI_2), 0.0).unwrap();
        assert_eq!(seg.energy, 0.0);
        assert_eq!(seg.map.levels(), vec![3]);
    }

    #[test]
    fn smoothness_counts_wall_steps() {
        let grid = GroundGrid::new([1, 2, 5], [1.0; 3], [0.0; 3]).unwrap();
        let vol = MagnitudeVolume::zeros(&grid);
        let map = ElevationMap::from_levels(&grid, &[0, 3]).unwrap();
        assert_eq!(surface_energy(&map, &vol, &geom(0.6), 2.0).unwrap(), 6.0);
        let flat = ElevationMap::flat(&grid, 0.0).unwrap();
        assert_eq!(surface_energy(&flat, &vol, &geom(0.6), 2.0).unwrap(), 0.0);
    }
}
