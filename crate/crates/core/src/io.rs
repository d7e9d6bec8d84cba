//! File formats.
//!
//! Stacks and volumes share one layout: a text header of `key=value` lines
//! closed by a line `end`, followed by little-endian `f32` values. Complex
//! data is interleaved `(re, im)`. Stacks are image-major, then azimuth,
//! then range; volumes are x-major, then y, then z.
//!
//! ```text
//! tomosurf-stack
//! kind=complex
//! n_images=20
//! ...
//! end
//! <binary body>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::geometry::{AcquisitionGeometry, GroundGrid, RadarGrid};
use crate::sparse::SolverTrace;
use crate::surface::ElevationMap;
use crate::volume::{MagnitudeVolume, ReflectivityVolume, SarStack};
use crate::{Error, Result};

const STACK_MAGIC: &str = "tomosurf-stack";
const VOLUME_MAGIC: &str = "tomosurf-volume";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Content hash of an acquisition geometry.
pub fn geometry_hash(geom: &AcquisitionGeometry) -> String {
    sha256_hex(geom.canonical_text().as_bytes())
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct Header {
    path: PathBuf,
    fields: BTreeMap<String, String>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| format_err(&self.path, format!("missing header key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| format_err(&self.path, format!("bad value for `{key}`")))
    }

    fn triple<T: std::str::FromStr + Copy + Default>(&self, key: &str) -> Result<[T; 3]> {
        let parts: Vec<&str> = self.get(key)?.split(',').collect();
        if parts.len() != 3 {
            return Err(format_err(&self.path, format!("`{key}` needs three values")));
        }
        let mut out = [T::default(); 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p
                .trim()
                .parse()
                .map_err(|_| format_err(&self.path, format!("bad value for `{key}`")))?;
        }
        Ok(out)
    }
}

fn split_file(path: &Path, magic: &str) -> Result<(Header, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let marker = b"\nend\n";
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| format_err(path, "header not terminated by `end`"))?;
    let text = std::str::from_utf8(&bytes[..pos]).map_err(|_| format_err(path, "header is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some(magic) {
        return Err(format_err(path, format!("expected `{magic}` header")));
    }
    let mut fields = BTreeMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("malformed header line `{line}`")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((
        Header {
            path: path.to_path_buf(),
            fields,
        },
        bytes[pos + marker.len()..].to_vec(),
    ))
}

fn decode_f32(path: &Path, body: &[u8], count: usize) -> Result<Vec<f64>> {
    if body.len() != 4 * count {
        return Err(format_err(
            path,
            format!("body has {} bytes, expected {}", body.len(), 4 * count),
        ));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn encode_complex(out: &mut Vec<u8>, data: &[Complex64]) {
    for c in data {
        out.extend_from_slice(&(c.re as f32).to_le_bytes());
        out.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Encodes a stack; `geom` is recorded by hash.
pub fn stack_bytes(stack: &SarStack, geom: &AcquisitionGeometry) -> Vec<u8> {
    let rg = stack.radar_grid();
    let mut head = String::new();
    let _ = writeln!(head, "{STACK_MAGIC}");
    let _ = writeln!(head, "kind=complex");
    let _ = writeln!(head, "n_images={}", stack.num_images());
    let _ = writeln!(head, "azimuth_count={}", rg.azimuth_count);
    let _ = writeln!(head, "range_count={}", rg.range_count);
    let _ = writeln!(head, "d_azimuth={:?}", rg.d_azimuth);
    let _ = writeln!(head, "d_range={:?}", rg.d_range);
    let _ = writeln!(head, "range_origin={:?}", rg.range_origin);
    let _ = writeln!(head, "azimuth_origin={:?}", rg.azimuth_origin);
    let _ = writeln!(head, "geometry_hash={}", geometry_hash(geom));
    head.push_str("end\n");
    let mut out = head.into_bytes();
    encode_complex(&mut out, stack.data());
    out
}

pub fn write_stack(path: &Path, stack: &SarStack, geom: &AcquisitionGeometry) -> Result<()> {
    write_atomic(path, &stack_bytes(stack, geom))
}

/// Reads a stack and the geometry hash it was written with.
pub fn read_stack(path: &Path) -> Result<(SarStack, String)> {
    let (h, body) = split_file(path, STACK_MAGIC)?;
    if h.get("kind")? != "complex" {
        return Err(format_err(path, "stack must be complex"));
    }
    let rg = RadarGrid::new(
        h.parse("azimuth_count")?,
        h.parse("range_count")?,
        h.parse("d_azimuth")?,
        h.parse("d_range")?,
        h.parse("range_origin")?,
        h.parse("azimuth_origin")?,
    )?;
    let n: usize = h.parse("n_images")?;
    let vals = decode_f32(path, &body, 2 * n * rg.num_pixels())?;
    let data = vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok((SarStack::from_vec(n, &rg, data)?, h.get("geometry_hash")?.to_string()))
}

fn volume_header(kind: &str, grid: &GroundGrid) -> String {
    let mut head = String::new();
    let _ = writeln!(head, "{VOLUME_MAGIC}");
    let _ = writeln!(head, "kind={kind}");
    let _ = writeln!(head, "dims={},{},{}", grid.dims[0], grid.dims[1], grid.dims[2]);
    let _ = writeln!(
        head,
        "spacing={:?},{:?},{:?}",
        grid.spacing[0], grid.spacing[1], grid.spacing[2]
    );
    let _ = writeln!(
        head,
        "origin={:?},{:?},{:?}",
        grid.origin[0], grid.origin[1], grid.origin[2]
    );
    head.push_str("end\n");
    head
}

pub fn complex_volume_bytes(vol: &ReflectivityVolume) -> Vec<u8> {
    let mut out = volume_header("complex", vol.grid()).into_bytes();
    encode_complex(&mut out, vol.data());
    out
}

pub fn magnitude_volume_bytes(vol: &MagnitudeVolume) -> Vec<u8> {
    let mut out = volume_header("magnitude", vol.grid()).into_bytes();
    for x in vol.data() {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    out
}

pub fn write_complex_volume(path: &Path, vol: &ReflectivityVolume) -> Result<()> {
    write_atomic(path, &complex_volume_bytes(vol))
}

pub fn write_magnitude_volume(path: &Path, vol: &MagnitudeVolume) -> Result<()> {
    write_atomic(path, &magnitude_volume_bytes(vol))
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedVolume {
    Complex(ReflectivityVolume),
    Magnitude(MagnitudeVolume),
}

impl LoadedVolume {
    pub fn grid(&self) -> &GroundGrid {
        match self {
            LoadedVolume::Complex(v) => v.grid(),
            LoadedVolume::Magnitude(v) => v.grid(),
        }
    }

    pub fn magnitude(&self) -> MagnitudeVolume {
        match self {
            LoadedVolume::Complex(v) => v.magnitude(),
            LoadedVolume::Magnitude(v) => v.clone(),
        }
    }
}

pub fn read_volume(path: &Path) -> Result<LoadedVolume> {
    let (h, body) = split_file(path, VOLUME_MAGIC)?;
    let grid = GroundGrid::new(h.triple("dims")?, h.triple("spacing")?, h.triple("origin")?)?;
    match h.get("kind")? {
        "complex" => {
            let vals = decode_f32(path, &body, 2 * grid.len())?;
            let data = vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Ok(LoadedVolume::Complex(ReflectivityVolume::from_vec(&grid, data)?))
        }
        "magnitude" => Ok(LoadedVolume::Magnitude(MagnitudeVolume::from_vec(
            &grid,
            decode_f32(path, &body, grid.len())?,
        )?)),
        other => Err(format_err(path, format!("unknown volume kind `{other}`"))),
    }
}

/// `x,y,z` rows, one per column in azimuth-major order.
pub fn elevation_csv(map: &ElevationMap) -> String {
    let g = map.grid();
    let mut out = String::from("x,y,z\n");
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let _ = writeln!(out, "{:?},{:?},{:?}", g.x(ix), g.y(iy), map.height(ix, iy));
        }
    }
    out
}

pub fn write_elevation_csv(path: &Path, map: &ElevationMap) -> Result<()> {
    write_atomic(path, elevation_csv(map).as_bytes())
}

/// Reads an `x,y,z` map written for `grid`; rows may come in any order.
pub fn read_elevation_csv(path: &Path, grid: &GroundGrid) -> Result<ElevationMap> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y,z") {
        return Err(format_err(path, "expected header `x,y,z`"));
    }
    let mut heights = vec![f64::NAN; grid.num_columns()];
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(path, format!("row {}: not three numbers", row + 2)))?;
        if vals.len() != 3 {
            return Err(format_err(path, format!("row {}: expected 3 fields", row + 2)));
        }
        let ix = ((vals[0] - grid.origin[0]) / grid.spacing[0]).round();
        let iy = ((vals[1] - grid.origin[1]) / grid.spacing[1]).round();
        if ix < 0.0 || iy < 0.0 || ix as usize >= grid.nx() || iy as usize >= grid.ny() {
            return Err(format_err(
                path,
                format!("row {}: ({}, {}) outside the grid", row + 2, vals[0], vals[1]),
            ));
        }
        heights[grid.column_index(ix as usize, iy as usize)] = vals[2];
    }
    if heights.iter().any(|h| h.is_nan()) {
        return Err(format_err(path, "some grid columns have no row"));
    }
    ElevationMap::new(grid, heights)
}

/// Binary 16-bit PGM, one row per azimuth line. Gray value `g` encodes the
/// height `z0 + g / 65535 * (Nz - 1) dz`, as recorded in a header comment.
pub fn elevation_pgm(map: &ElevationMap) -> Vec<u8> {
    let g = map.grid();
    let span = (g.nz() - 1) as f64 * g.spacing[2];
    let scale = if span > 0.0 { span / 65535.0 } else { 1.0 };
    let mut out = format!(
        "P5\n# z = {:?} + value * {:?}\n{} {}\n65535\n",
        g.origin[2],
        scale,
        g.ny(),
        g.nx()
    )
    .into_bytes();
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let v = ((map.height(ix, iy) - g.origin[2]) / scale).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(path: &Path, map: &ElevationMap) -> Result<()> {
    write_atomic(path, &elevation_pgm(map))
}

/// Maps `t` in `[0, 1]` to a blue-green-red ramp.
fn height_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let r = (2.0 * t - 1.0).max(0.0);
    let b = (1.0 - 2.0 * t).max(0.0);
    let g = 1.0 - r - b;
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// ASCII PLY point cloud, one vertex per column, colored by height.
pub fn elevation_ply(map: &ElevationMap) -> String {
    let g = map.grid();
    let (lo, hi) = map
        .heights()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(out, "ply\nformat ascii 1.0\ncomment elevation map");
    let _ = writeln!(out, "element vertex {}", g.num_columns());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let z = map.height(ix, iy);
            let [r, gr, b] = height_color((z - lo) / span);
            let _ = writeln!(out, "{} {} {} {r} {gr} {b}", g.x(ix), g.y(iy), z);
        }
    }
    out
}

pub fn write_ply(path: &Path, map: &ElevationMap) -> Result<()> {
    write_atomic(path, elevation_ply(map).as_bytes())
}

pub fn trace_csv(trace: &SolverTrace) -> String {
    let mut out = String::from("iteration,objective,kkt\n");
    for (i, (f, k)) in trace.objective.iter().zip(&trace.kkt).enumerate() {
        let _ = writeln!(out, "{},{:?},{:?}", i + 1, f, k);
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &SolverTrace) -> Result<()> {
    write_atomic(path, trace_csv(trace).as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
