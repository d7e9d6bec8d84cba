//! Surface error against ground truth and selection of the smoothness
//! weight.

use std::fmt::Write as _;

use crate::geometry::AcquisitionGeometry;
use crate::segmentation::segment_surface;
use crate::surface::ElevationMap;
use crate::volume::MagnitudeVolume;
use crate::{par, Error, Result};

/// Mean `|E_est - E_truth|` over the columns where `excluded` is false (all
/// columns when no mask is given). Columns are compared in ground geometry.
pub fn mean_error(est: &ElevationMap, truth: &ElevationMap, excluded: Option<&[bool]>) -> Result<f64> {
    if !est.grid().same_horizontal(truth.grid()) {
        return Err(Error::GridMismatch);
    }
    if let Some(m) = excluded {
        if m.len() != est.heights().len() {
            return Err(Error::DimensionMismatch("mask length differs from column count".into()));
        }
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (c, (a, b)) in est.heights().iter().zip(truth.heights()).enumerate() {
        if excluded.is_some_and(|m| m[c]) {
            continue;
        }
        sum += (a - b).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidParameter("every column is masked".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceErrorReport {
    pub label: String,
    pub beta: f64,
    /// Mean error outside the shadow mask, meters.
    pub mean_error: f64,
    /// Mean error over the shadow columns alone (filled values), if any.
    pub shadow_mean_error: Option<f64>,
    /// `|E_est - E_truth|` per column, meters.
    pub errors: Vec<f64>,
    pub masked_fraction: f64,
}

pub fn evaluate(
    label: &str,
    beta: f64,
    est: &ElevationMap,
    truth: &ElevationMap,
    shadow: &[bool],
) -> Result<SurfaceErrorReport> {
    let mean = mean_error(est, truth, Some(shadow))?;
    let errors: Vec<f64> = est
        .heights()
        .iter()
        .zip(truth.heights())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let masked = shadow.iter().filter(|&&s| s).count();
    let shadow_mean_error = (masked > 0).then(|| {
        errors
            .iter()
            .zip(shadow)
            .filter(|(_, s)| **s)
            .map(|(e, _)| e)
            .sum::<f64>()
            / masked as f64
    });
    Ok(SurfaceErrorReport {
        label: label.to_string(),
        beta,
        mean_error: mean,
        shadow_mean_error,
        errors,
        masked_fraction: masked as f64 / shadow.len() as f64,
    })
}

/// Segments `volume` once per entry of `betas` and scores each surface
/// against `truth` outside `excluded`. Returns the weight with the smallest
/// error (the smaller weight on ties) and all errors in input order.
pub fn beta_sweep(
    volume: &MagnitudeVolume,
    geom: &AcquisitionGeometry,
    truth: &ElevationMap,
    betas: &[f64],
    excluded: Option<&[bool]>,
) -> Result<(f64, Vec<f64>)> {
    if betas.is_empty() {
        return Err(Error::InvalidParameter("empty beta list".into()));
    }
    let errors = par::map_range(betas.len(), |i| {
        segment_surface(volume, geom, betas[i]).and_then(|s| mean_error(&s, truth, excluded))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..betas.len() {
        if errors[i] < errors[best] || (errors[i] == errors[best] && betas[i] < betas[best]) {
            best = i;
        }
    }
    Ok((betas[best], errors))
}

/// CSV with one row per report.
pub fn reports_csv(reports: &[SurfaceErrorReport]) -> String {
    let mut out = String::from("estimator,beta,mean_error_m,shadow_mean_error_m,masked_fraction\n");
    for r in reports {
        let shadow = r.shadow_mean_error.map(|e| format!("{e:.6}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{:.6}",
            r.label, r.beta, r.mean_error, shadow, r.masked_fraction
        );
    }
    out
}

/// Plain-text table: estimator, mean error, beta.
pub fn summary_table(reports: &[SurfaceErrorReport]) -> String {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let mut out = format!("{:<width$}  {:>14}  {:>6}\n", "Estimator", "Mean error (m)", "beta");
    let _ = writeln!(out, "{}", "-".repeat(width + 24));
    for r in reports {
        let _ = writeln!(out, "{:<width$}  {:>14.2}  {:>6}", r.label, r.mean_error, r.beta);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GroundGrid;

    fn grid() -> GroundGrid {
        GroundGrid::new([2, 2, 10], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn mean_error_examples() {
        let g = grid();
        let truth = ElevationMap::new(&g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mean_error(&truth, &truth, None).unwrap(), 0.0);
        let up = ElevationMap::new(&g, vec![4.0, 5.0, 6.0, 7.0]).unwrap();
        assert_eq!(mean_error(&up, &truth, None).unwrap(), 3.0);
        let half = ElevationMap::new(&g, vec![3.0, 4.0, 3.0, 4.0]).unwrap();
        assert_eq!(mean_error(&half, &truth, None).unwrap(), 1.0);
        assert_eq!(
            mean_error(&half, &truth, Some(&[false, true, true, true])).unwrap(),
            2.0
        );
        let other = GroundGrid::new([4, 1, 10], [1.0; 3], [0.0; 3]).unwrap();
        let wrong = ElevationMap::flat(&other, 0.0).unwrap();
        assert!(matches!(mean_error(&wrong, &truth, None), Err(Error::GridMismatch)));
    }

    #[test]
    fn report_layout() {
        let g = grid();
        let truth = ElevationMap::flat(&g, 2.0).unwrap();
        let est = ElevationMap::new(&g, vec![2.0, 2.0, 5.0, 2.0]).unwrap();
        let r = evaluate("capon", 1.5, &est, &truth, &[false, false, true, false]).unwrap();
        assert_eq!(r.mean_error, 0.0);
        assert_eq!(r.shadow_mean_error, Some(3.0));
        assert_eq!(r.masked_fraction, 0.25);
        let csv = reports_csv(std::slice::from_ref(&r));
        assert_eq!(csv.lines().nth(1).unwrap(), "capon,1.5,0.000000,3.000000,0.250000");
        assert!(summary_table(&[r]).contains("capon"));
    }
}
