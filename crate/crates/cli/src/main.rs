//! `tomosurf` command-line pipelines.
//!
//! Every command reads one TOML run configuration, writes its outputs into
//! `--out`, prints `key=value` summary lines and records the content hash of
//! each output in `manifest_<command>.json`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O or file format error,
//! 4 unsupported feature, 5 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use tomosurf::config::RunConfig;
use tomosurf::estimators::{spectral_volume, SpectralMethod};
use tomosurf::evaluation::{evaluate, reports_csv, summary_table};
use tomosurf::forward::{add_noise, apply_phi};
use tomosurf::io;
use tomosurf::redress::redress_observed;
use tomosurf::scene::make_scene;
use tomosurf::segmentation::segment;
use tomosurf::sparse::{invert_cs_per_cell, invert_l1_3d, SparsityMap};
use tomosurf::surface::{fill_shadow, shadow_mask, ElevationMap};
use tomosurf::{Error, SarStack};

#[derive(Parser)]
#[command(
    name = "tomosurf",
    version,
    about = "SAR tomography surface reconstruction pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `scene.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene, its stack and its true elevation map.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a reflectivity volume from a stack.
    Invert {
        #[command(flatten)]
        common: Common,
        /// beamforming, capon, music, cs or l1-3d; defaults to `estimator.method`.
        #[arg(long)]
        method: Option<String>,
        /// Write the per-iteration objective of l1-3d to `trace.csv`.
        #[arg(long)]
        trace: bool,
    },
    /// Extract the elevation map of a volume.
    Segment {
        #[command(flatten)]
        common: Common,
    },
    /// Alternate l1 inversion and segmentation.
    Redress {
        #[command(flatten)]
        common: Common,
    },
    /// Score a surface against the true one.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Write a surface as PLY, PGM and CSV.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format { .. } => 3,
        Error::UnsupportedMethod(_) => 4,
        Error::NotHermitian(_) | Error::SingularMatrix | Error::Divergence { .. } | Error::GraphConstruction(_) => 5,
        _ => 2,
    }
}

/// Loaded configuration plus the bookkeeping of one command run.
struct Run {
    cfg: RunConfig,
    config_dir: PathBuf,
    out: PathBuf,
    command: &'static str,
    outputs: BTreeMap<String, String>,
    extra: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    fn start(command: &'static str, common: &Common) -> tomosurf::Result<Self> {
        let text = std::fs::read_to_string(&common.config).map_err(|e| Error::Config {
            key: "--config".into(),
            reason: format!("{}: {e}", common.config.display()),
        })?;
        let mut cfg = RunConfig::from_toml_str(&text)?;
        if let Some(seed) = common.seed {
            cfg.scene.seed = seed;
        }
        std::fs::create_dir_all(&common.out)?;
        let config_dir = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
        println!("command={command}");
        Ok(Run {
            cfg,
            config_dir,
            out: common.out.clone(),
            command,
            outputs: BTreeMap::new(),
            extra: serde_json::Map::new(),
        })
    }

    /// Input path from the `io` block (relative to the config file) or the
    /// default file in the output directory. Must exist.
    fn input(&self, key: &str, configured: &Option<PathBuf>, default: &str) -> tomosurf::Result<PathBuf> {
        let path = match configured {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.config_dir.join(p),
            None => self.out.join(default),
        };
        if !path.is_file() {
            return Err(Error::Config {
                key: key.into(),
                reason: format!("input file {} does not exist", path.display()),
            });
        }
        Ok(path)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> tomosurf::Result<()> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes)?;
        let hash = io::sha256_hex(bytes);
        println!("{}={} sha256={hash}", name.replace(['/', '.'], "_"), path.display());
        self.outputs.insert(name.to_string(), hash);
        Ok(())
    }

    fn report(&mut self, key: &str, value: serde_json::Value) {
        match &value {
            serde_json::Value::String(s) => println!("{key}={s}"),
            v => println!("{key}={v}"),
        }
        self.extra.insert(key.to_string(), value);
    }

    fn finish(mut self) -> tomosurf::Result<()> {
        let manifest = json!({
            "command": self.command,
            "config_sha256": io::sha256_hex(self.cfg.to_toml_string().as_bytes()),
            "seed": self.cfg.scene.seed,
            "summary": self.extra,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let name = format!("manifest_{}.json", self.command);
        self.outputs.clear();
        self.write(&name, text.as_bytes())
    }

    fn stack(&self) -> tomosurf::Result<SarStack> {
        let path = self.input("io.stack", &self.cfg.io.stack, "stack.bin")?;
        let (stack, hash) = io::read_stack(&path)?;
        if hash != io::geometry_hash(&self.cfg.acquisition()?) {
            return Err(Error::Config {
                key: "geometry".into(),
                reason: format!("{} was simulated with a different acquisition geometry", path.display()),
            });
        }
        Ok(stack)
    }

    fn surface(&self, key: &str, configured: &Option<PathBuf>, default: &str) -> tomosurf::Result<ElevationMap> {
        let path = self.input(key, configured, default)?;
        io::read_elevation_csv(&path, &self.cfg.ground_grid()?)
    }
}

fn simulate(common: &Common) -> tomosurf::Result<()> {
    let mut run = Run::start("simulate", common)?;
    let geom = run.cfg.acquisition()?;
    let grid = run.cfg.ground_grid()?;
    let rgrid = run.cfg.radar_grid()?;
    let (scene, truth) = make_scene(&run.cfg.scene_spec(), &geom, &grid)?;
    let mut stack = apply_phi(&scene, &geom, &rgrid)?;
    let sigma = run.cfg.noise_sigma(&stack);
    if sigma > 0.0 {
        add_noise(&mut stack, sigma, run.cfg.noise_seed());
    }
    run.report("seed", json!(run.cfg.scene.seed));
    run.report("sigma", json!(sigma));
    run.report("geometry_hash", json!(io::geometry_hash(&geom)));
    run.write("stack.bin", &io::stack_bytes(&stack, &geom))?;
    run.write("scene.bin", &io::complex_volume_bytes(&scene))?;
    run.write("truth.csv", io::elevation_csv(&truth).as_bytes())?;
    run.finish()
}

fn invert(common: &Common, method: Option<&str>, trace: bool) -> tomosurf::Result<()> {
    let mut run = Run::start("invert", common)?;
    let method = method.unwrap_or(&run.cfg.estimator.method).to_ascii_lowercase();
    let geom = run.cfg.acquisition()?;
    let grid = run.cfg.ground_grid()?;
    let stack = run.stack()?;
    run.report("method", json!(method));
    match method.as_str() {
        "l1-3d" | "l1" => {
            let mut params = run.cfg.solver_params();
            params.trace = trace;
            let mu = SparsityMap::Uniform(run.cfg.solver.mu);
            let inv = invert_l1_3d(&stack, &geom, &grid, &mu, &params)?;
            run.report("iterations", json!(inv.iterations));
            run.report("objective", json!(inv.objective));
            run.report("kkt", json!(inv.kkt));
            run.report("converged", json!(inv.converged));
            run.write("volume.bin", &io::magnitude_volume_bytes(&inv.volume.magnitude()))?;
            run.write("volume_complex.bin", &io::complex_volume_bytes(&inv.volume))?;
            if trace {
                run.write("trace.csv", io::trace_csv(&inv.trace).as_bytes())?;
            }
        }
        "cs" => {
            let vol = invert_cs_per_cell(&stack, &geom, &grid, run.cfg.solver.mu, &run.cfg.solver_params())?;
            run.write("volume.bin", &io::magnitude_volume_bytes(&vol.magnitude()))?;
            run.write("volume_complex.bin", &io::complex_volume_bytes(&vol))?;
        }
        other => {
            let m: SpectralMethod = other.parse()?;
            let vol = spectral_volume(&stack, &geom, &grid, m, &run.cfg.spectral_params()?)?;
            run.write("volume.bin", &io::magnitude_volume_bytes(&vol))?;
        }
    }
    run.finish()
}

fn segment_cmd(common: &Common) -> tomosurf::Result<()> {
    let mut run = Run::start("segment", common)?;
    let geom = run.cfg.acquisition()?;
    let path = run.input("io.volume", &run.cfg.io.volume, "volume.bin")?;
    let vol = io::read_volume(&path)?.magnitude();
    if vol.grid() != &run.cfg.ground_grid()? {
        return Err(Error::Config {
            key: "grid".into(),
            reason: format!("{} was written for a different grid", path.display()),
        });
    }
    let seg = segment(&vol, &geom, run.cfg.segmentation.beta)?;
    let shadow = shadow_mask(&seg.map, &geom, run.cfg.shadow_tolerance());
    let filled = fill_shadow(&seg.map, &shadow)?;
    run.report("beta", json!(run.cfg.segmentation.beta));
    run.report("energy", json!(seg.energy));
    run.report("shadow_columns", json!(shadow.iter().filter(|&&s| s).count()));
    run.write("surface.csv", io::elevation_csv(&seg.map).as_bytes())?;
    run.write("surface_filled.csv", io::elevation_csv(&filled).as_bytes())?;
    run.finish()
}

fn redress_cmd(common: &Common) -> tomosurf::Result<()> {
    let mut run = Run::start("redress", common)?;
    let geom = run.cfg.acquisition()?;
    let grid = run.cfg.ground_grid()?;
    let stack = run.stack()?;
    let params = run.cfg.redress_params();
    let mut files = Vec::new();
    let mut history = Vec::new();
    let result = redress_observed(&stack, &geom, &grid, &params, |s| {
        let dir = format!("iter_{}", s.record.k);
        let mu = s.mu.to_vec(grid.len());
        let mu = tomosurf::MagnitudeVolume::from_vec(&grid, mu)?;
        files.push((format!("{dir}/volume.bin"), io::complex_volume_bytes(s.volume)));
        files.push((format!("{dir}/surface.csv"), io::elevation_csv(s.surface).into_bytes()));
        files.push((format!("{dir}/mu.bin"), io::magnitude_volume_bytes(&mu)));
        let r = s.record;
        println!(
            "iteration={} solver_iterations={} objective={} kkt={} energy={} nonzeros={}",
            r.k, r.solver_iterations, r.objective, r.kkt, r.energy, r.nonzeros
        );
        history.push(json!({
            "k": r.k,
            "solver_iterations": r.solver_iterations,
            "objective": r.objective,
            "kkt": r.kkt,
            "converged": r.converged,
            "energy": r.energy,
            "nonzeros": r.nonzeros,
            "mean_mu": r.mean_mu,
        }));
        Ok(())
    })?;
    for (name, bytes) in files {
        run.write(&name, &bytes)?;
    }
    run.extra.insert("iterations".into(), json!(history));
    run.write("volume.bin", &io::magnitude_volume_bytes(&result.volume.magnitude()))?;
    run.write("volume_complex.bin", &io::complex_volume_bytes(&result.volume))?;
    run.write("surface.csv", io::elevation_csv(&result.surface).as_bytes())?;
    run.finish()
}

fn eval_cmd(common: &Common) -> tomosurf::Result<()> {
    let mut run = Run::start("eval", common)?;
    let geom = run.cfg.acquisition()?;
    let est = run.surface("io.surface", &run.cfg.io.surface, "surface.csv")?;
    let truth = run.surface("io.truth", &run.cfg.io.truth, "truth.csv")?;
    let shadow = shadow_mask(&truth, &geom, run.cfg.shadow_tolerance());
    let label = run.cfg.estimator.method.clone();
    let report = evaluate(&label, run.cfg.segmentation.beta, &est, &truth, &shadow)?;
    run.report("mean_error_m", json!(report.mean_error));
    run.report("masked_fraction", json!(report.masked_fraction));
    run.write("report.csv", reports_csv(std::slice::from_ref(&report)).as_bytes())?;
    run.write("summary.txt", summary_table(&[report]).as_bytes())?;
    run.finish()
}

fn export_cmd(common: &Common) -> tomosurf::Result<()> {
    let mut run = Run::start("export", common)?;
    let map = run.surface("io.surface", &run.cfg.io.surface, "surface.csv")?;
    run.write("surface.ply", io::elevation_ply(&map).as_bytes())?;
    run.write("surface.pgm", &io::elevation_pgm(&map))?;
    run.write("surface_xyz.csv", io::elevation_csv(&map).as_bytes())?;
    run.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => simulate(common),
        Command::Invert { common, method, trace } => invert(common, method.as_deref(), *trace),
        Command::Segment { common } => segment_cmd(common),
        Command::Redress { common } => redress_cmd(common),
        Command::Eval { common } => eval_cmd(common),
        Command::Export { common } => export_cmd(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
