//! Exact Euclidean distance transform on voxel grids (separable lower
//! envelope of parabolas, Felzenszwalb & Huttenlocher).

use crate::geometry::GroundGrid;
use crate::par;
use crate::surface::ElevationMap;
use crate::volume::MagnitudeVolume;

const FAR: f64 = 1e30;

/// 1-D squared distance transform of `f` in place. `v` and `z` are scratch.
fn transform_line(f: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>, out: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    out.clear();
    let first = match f.iter().position(|&x| x < FAR) {
        Some(q) => q,
        None => return,
    };
    v.push(first);
    z.push(f64::NEG_INFINITY);
    for q in first + 1..n {
        if f[q] >= FAR {
            continue;
        }
        loop {
            let p = *v.last().unwrap();
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out.push(d * d + f[v[k]]);
    }
    f.copy_from_slice(out);
}

/// Squared Euclidean distance (voxel units) from every voxel to the nearest
/// `true` voxel of `seeds`, laid out x-major, then y, then z. Infinite when
/// there are no seeds.
pub fn squared_edt(seeds: &[bool], dims: [usize; 3]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    assert_eq!(seeds.len(), nx * ny * nz);
    if !seeds.iter().any(|&s| s) {
        return vec![f64::INFINITY; seeds.len()];
    }
    let mut d: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    // z lines are contiguous
    par::for_each_chunk_mut(&mut d, nz, |_, line| {
        let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
        transform_line(line, &mut v, &mut z, &mut out);
    });
    // y lines within each x slice
    par::for_each_chunk_mut(&mut d, ny * nz, |_, slice| {
        let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
        let mut line = vec![0.0; ny];
        for iz in 0..nz {
            for iy in 0..ny {
                line[iy] = slice[iy * nz + iz];
            }
            transform_line(&mut line, &mut v, &mut z, &mut out);
            for iy in 0..ny {
                slice[iy * nz + iz] = line[iy];
            }
        }
    });
    // x lines, gathered per (y, z)
    let stride = ny * nz;
    let lines = par::map_range(stride, |yz| {
        let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
        let mut line: Vec<f64> = (0..nx).map(|ix| d[ix * stride + yz]).collect();
        transform_line(&mut line, &mut v, &mut z, &mut out);
        line
    });
    for (yz, line) in lines.into_iter().enumerate() {
        for (ix, x) in line.into_iter().enumerate() {
            d[ix * stride + yz] = if x >= FAR { f64::INFINITY } else { x };
        }
    }
    d
}

/// Voxels forming the surface of the solid below `map`: the top voxel of
/// every column, plus the wall voxels of a column that rise above a
/// 4-connected neighbor.
pub fn surface_voxels(map: &ElevationMap) -> Vec<bool> {
    let grid = map.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let levels = map.levels();
    let mut out = vec![false; grid.len()];
    for ix in 0..nx {
        for iy in 0..ny {
            let e = levels[grid.column_index(ix, iy)];
            let mut lowest_neighbor = e;
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                if jx >= 0 && jy >= 0 && (jx as usize) < nx && (jy as usize) < ny {
                    lowest_neighbor = lowest_neighbor.min(levels[grid.column_index(jx as usize, jy as usize)]);
                }
            }
            for k in (lowest_neighbor + 1).min(e)..=e {
                out[grid.index(ix, iy, k)] = true;
            }
        }
    }
    out
}

/// Distance in voxel units from every voxel center to the surface voxels of
/// `map`; zero exactly on the surface.
pub fn distance_to_surface(map: &ElevationMap, grid: &GroundGrid) -> MagnitudeVolume {
    assert_eq!(map.grid(), grid, "elevation map grid differs");
    let d = squared_edt(&surface_voxels(map), grid.dims);
    MagnitudeVolume::from_vec(grid, d.into_iter().map(f64::sqrt).collect()).expect("grid-sized")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_map_gives_vertical_distance() {
        let grid = GroundGrid::new([4, 5, 6], [1.0; 3], [0.0; 3]).unwrap();
        let map = ElevationMap::flat(&grid, 2.0).unwrap();
        let d = distance_to_surface(&map, &grid);
        for v in 0..grid.len() {
            let (_, _, iz) = grid.unravel(v);
            assert_eq!(d.data()[v], (iz as f64 - 2.0).abs());
        }
    }

    #[test]
    fn walls_belong_to_the_surface() {
        let grid = GroundGrid::new([1, 3, 5], [1.0; 3], [0.0; 3]).unwrap();
        let map = ElevationMap::from_levels(&grid, &[0, 4, 1]).unwrap();
        let s = surface_voxels(&map);
        let on: Vec<(usize, usize)> = (0..grid.len())
            .filter(|&v| s[v])
            .map(|v| {
                let (_, iy, iz) = grid.unravel(v);
                (iy, iz)
            })
            .collect();
        assert_eq!(on, vec![(0, 0), (1, 1), (1, 2), (1, 3), (1, 4), (2, 1)]);
    }

    #[test]
    fn single_seed_distances() {
        let dims = [3, 4, 5];
        let mut seeds = vec![false; 60];
        seeds[(4 + 2) * 5 + 3] = true;
        let d = squared_edt(&seeds, dims);
        for ix in 0..3 {
            for iy in 0..4 {
                for iz in 0..5 {
                    let want = (ix as f64 - 1.0).powi(2) + (iy as f64 - 2.0).powi(2) + (iz as f64 - 3.0).powi(2);
                    assert_eq!(d[(ix * 4 + iy) * 5 + iz], want);
                }
            }
        }
        assert!(squared_edt(&[false; 60], dims).iter().all(|x| x.is_infinite()));
    }
}
