//! TOML run configuration.
//!
//! ```toml
//! [geometry]
//! n_images = 20
//! baseline_span = 2000.0      # or: baselines = [0.0, 105.3, ...]
//! wavelength = 0.031
//! incidence_rad = 0.6
//! reference_range = 600000.0
//!
//! [grid]
//! dims = [64, 64, 24]
//! spacing = [1.0, 1.0, 1.0]
//!
//! [scene]
//! seed = 1
//! snr_db = 10.0               # or: sigma = 0.1
//! [[scene.boxes]]
//! x = [10.0, 30.0]
//! y = [12.0, 28.0]
//! height = 12.0
//! ```
//!
//! Every block is optional and every key not listed is rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimators::{SpectralMethod, SpectralParams};
use crate::geometry::{AcquisitionGeometry, GroundGrid, RadarGrid};
use crate::redress::RedressParams;
use crate::scene::{BoxSpec, SceneSpec};
use crate::sparse::SolverParams;
use crate::volume::SarStack;
use crate::{Error, Result};

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    pub scene: SceneConfig,
    pub estimator: EstimatorConfig,
    pub solver: SolverConfig,
    pub segmentation: SegmentationConfig,
    pub redress: RedressConfig,
    pub io: IoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_images: usize,
    pub baselines: Option<Vec<f64>>,
    pub baseline_span: Option<f64>,
    pub wavelength: f64,
    pub incidence_rad: f64,
    pub reference_range: f64,
    /// Slant-range bin size; defaults to `dy sin(theta)`.
    pub range_step: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            n_images: 20,
            baselines: None,
            baseline_span: Some(2000.0),
            wavelength: 0.031,
            incidence_rad: 0.6,
            reference_range: 6.0e5,
            range_step: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dims: [64, 64, 24],
            spacing: [1.0; 3],
            origin: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub boxes: Vec<BoxConfig>,
    pub ground_power: f64,
    pub facade_power: f64,
    pub roof_power: f64,
    pub density: f64,
    /// Noise standard deviation per real/imaginary part.
    pub sigma: Option<f64>,
    /// Ratio of mean clean pixel power to noise power, in dB.
    pub snr_db: Option<f64>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 1,
            boxes: Vec::new(),
            ground_power: 1.0,
            facade_power: 1.0,
            roof_power: 1.0,
            density: 1.0,
            sigma: None,
            snr_db: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: String,
    pub window_size: usize,
    pub window_std: f64,
    pub loading: f64,
    pub model_order: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let p = SpectralParams::default();
        EstimatorConfig {
            method: "capon".into(),
            window_size: p.window_size,
            window_std: p.window_std,
            loading: p.loading,
            model_order: p.model_order,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Uniform sparsity weight of the plain l1 inversion.
    pub mu: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub kkt_tolerance: f64,
    pub accelerated: bool,
    pub step_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig {
            mu: 1.0,
            max_iterations: p.max_iterations,
            tolerance: p.tolerance,
            kkt_tolerance: p.kkt_tolerance,
            accelerated: p.accelerated,
            step_safety: p.step_safety,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub beta: f64,
    /// Height slack of the shadow test, in units of `dz`.
    pub shadow_tolerance: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            beta: 2.0,
            shadow_tolerance: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedressConfig {
    pub iterations: usize,
    pub mu0: f64,
    pub b: f64,
    pub warm_start: bool,
}

impl Default for RedressConfig {
    fn default() -> Self {
        let p = RedressParams::default();
        RedressConfig {
            iterations: p.iterations,
            mu0: p.mu0,
            b: p.b,
            warm_start: p.warm_start,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub stack: Option<PathBuf>,
    pub volume: Option<PathBuf>,
    pub surface: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(key, format!("must be >= 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            // the span covers the offending key or value
            let key = e
                .span()
                .and_then(|s| text.get(s))
                .map(|k| k.trim().chars().take(60).collect::<String>())
                .filter(|k| !k.is_empty())
                .unwrap_or_else(|| "toml".into());
            config_err(&key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every value and its cross-block consistency.
    pub fn validate(&self) -> Result<()> {
        self.acquisition()?;
        self.ground_grid()?;
        let g = &self.geometry;
        if let Some(s) = g.range_step {
            positive("geometry.range_step", s)?;
        }
        let s = &self.scene;
        if s.sigma.is_some() && s.snr_db.is_some() {
            return Err(config_err("scene.sigma", "give either sigma or snr_db, not both"));
        }
        if let Some(sigma) = s.sigma {
            non_negative("scene.sigma", sigma)?;
        }
        if let Some(snr) = s.snr_db {
            if !snr.is_finite() {
                return Err(config_err("scene.snr_db", "must be finite"));
            }
        }
        self.scene_spec()
            .validate()
            .map_err(|e| config_err("scene", e.to_string()))?;
        self.spectral_params()?;
        non_negative("solver.mu", self.solver.mu)?;
        self.solver_params()
            .validate()
            .map_err(|e| config_err("solver", e.to_string()))?;
        non_negative("segmentation.beta", self.segmentation.beta)?;
        non_negative("segmentation.shadow_tolerance", self.segmentation.shadow_tolerance)?;
        self.redress_params()
            .validate()
            .map_err(|e| config_err("redress", e.to_string()))?;
        Ok(())
    }

    pub fn acquisition(&self) -> Result<AcquisitionGeometry> {
        let g = &self.geometry;
        let geom = match (&g.baselines, g.baseline_span) {
            (Some(b), _) => {
                if b.len() != g.n_images {
                    return Err(config_err(
                        "geometry.baselines",
                        format!("{} baselines for {} images", b.len(), g.n_images),
                    ));
                }
                AcquisitionGeometry::new(b.clone(), g.wavelength, g.incidence_rad, g.reference_range)
            }
            (None, Some(span)) => {
                positive("geometry.baseline_span", span)?;
                AcquisitionGeometry::uniform(g.n_images, span, g.wavelength, g.incidence_rad, g.reference_range)
            }
            (None, None) => return Err(config_err("geometry.baselines", "give baselines or baseline_span")),
        };
        geom.map_err(|e| config_err("geometry", e.to_string()))
    }

    pub fn ground_grid(&self) -> Result<GroundGrid> {
        let g = &self.grid;
        GroundGrid::new(g.dims, g.spacing, g.origin).map_err(|e| config_err("grid", e.to_string()))
    }

    pub fn radar_grid(&self) -> Result<RadarGrid> {
        let geom = self.acquisition()?;
        let grid = self.ground_grid()?;
        let step = self
            .geometry
            .range_step
            .unwrap_or_else(|| RadarGrid::default_range_step(&geom, &grid));
        RadarGrid::covering(&geom, &grid, step).map_err(|e| config_err("geometry.range_step", e.to_string()))
    }

    /// Scene description with the noise level left at zero; see
    /// [`RunConfig::noise_sigma`].
    pub fn scene_spec(&self) -> SceneSpec {
        let s = &self.scene;
        SceneSpec {
            boxes: s
                .boxes
                .iter()
                .map(|b| BoxSpec {
                    x: b.x,
                    y: b.y,
                    height: b.height,
                })
                .collect(),
            ground_power: s.ground_power,
            facade_power: s.facade_power,
            roof_power: s.roof_power,
            density: s.density,
            sigma: s.sigma.unwrap_or(0.0),
            seed: s.seed,
        }
    }

    /// Per-component noise deviation. With `snr_db` it is set so that the
    /// complex noise power `2 sigma^2` sits `snr_db` below the mean power of
    /// the clean stack.
    pub fn noise_sigma(&self, clean: &SarStack) -> f64 {
        match (self.scene.sigma, self.scene.snr_db) {
            (Some(s), _) => s,
            (None, Some(snr)) => (clean.mean_power() / (2.0 * 10f64.powf(snr / 10.0))).sqrt(),
            (None, None) => 0.0,
        }
    }

    /// Seed of the noise draws, a fixed function of the scene seed so that
    /// scene layout and noise use unrelated streams.
    pub fn noise_seed(&self) -> u64 {
        self.scene.seed ^ 0x6e6f_6973_655f_7365
    }

    /// `estimator.method` as a spectral estimator. Method names are checked
    /// here rather than at load time so that out-of-scope methods surface as
    /// [`Error::UnsupportedMethod`].
    pub fn spectral_method(&self) -> Result<SpectralMethod> {
        self.estimator.method.parse()
    }

    pub fn spectral_params(&self) -> Result<SpectralParams> {
        let e = &self.estimator;
        if e.window_size == 0 || e.window_size.is_multiple_of(2) {
            return Err(config_err("estimator.window_size", "must be odd"));
        }
        positive("estimator.window_std", e.window_std)?;
        non_negative("estimator.loading", e.loading)?;
        if e.model_order == 0 || e.model_order >= self.geometry.n_images {
            return Err(config_err("estimator.model_order", "must lie in 1..n_images"));
        }
        Ok(SpectralParams {
            window_size: e.window_size,
            window_std: e.window_std,
            loading: e.loading,
            model_order: e.model_order,
        })
    }

    pub fn solver_params(&self) -> SolverParams {
        let s = &self.solver;
        SolverParams {
            max_iterations: s.max_iterations,
            tolerance: s.tolerance,
            kkt_tolerance: s.kkt_tolerance,
            accelerated: s.accelerated,
            step_safety: s.step_safety,
            trace: false,
        }
    }

    pub fn redress_params(&self) -> RedressParams {
        let r = &self.redress;
        RedressParams {
            iterations: r.iterations,
            mu0: r.mu0,
            b: r.b,
            beta: self.segmentation.beta,
            solver: self.solver_params(),
            warm_start: r.warm_start,
        }
    }

    /// Shadow tolerance in meters.
    pub fn shadow_tolerance(&self) -> f64 {
        self.segmentation.shadow_tolerance * self.grid.spacing[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.acquisition().unwrap().num_images(), 20);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parses_boxes_and_baselines() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [geometry]
            n_images = 3
            baselines = [0.0, 40.0, 100.0]
            [grid]
            dims = [8, 8, 6]
            [scene]
            snr_db = 10.0
            [[scene.boxes]]
            x = [1.0, 4.0]
            y = [2.0, 5.0]
            height = 3.0
            [estimator]
            method = "music"
            model_order = 2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.acquisition().unwrap().baselines(), &[0.0, 40.0, 100.0]);
        assert_eq!(cfg.scene_spec().boxes.len(), 1);
        assert_eq!(cfg.spectral_method().unwrap(), SpectralMethod::Music);
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| match RunConfig::from_toml_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(
            key("[geometry]\nn_images = 3\nbaselines = [0.0, 1.0]"),
            "geometry.baselines"
        );
        assert_eq!(key("[scene]\nsigma = 0.1\nsnr_db = 3.0"), "scene.sigma");
        assert_eq!(key("[estimator]\nwindow_size = 4"), "estimator.window_size");
        assert_eq!(key("[grid]\nbogus = 1"), "bogus");
        let cfg = RunConfig::from_toml_str("[estimator]\nmethod = \"spice\"").unwrap();
        assert!(matches!(cfg.spectral_method(), Err(Error::UnsupportedMethod(_))));
    }
}
