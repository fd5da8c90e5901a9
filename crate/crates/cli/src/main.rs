use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use cmm_core::charmap::Window;
use cmm_core::config::{parse_number, SimulationConfig};
use cmm_core::diagnostics::{linf_diff, radial_spectrum};
use cmm_core::experiments::{damping_sweep, spatial_convergence, submap_spectra, temporal_convergence, zoom_chain};
use cmm_core::output::{read_snapshot, write_snapshot, write_timeseries, RunManifest, SnapshotMeta};
use cmm_core::solver::{run_cmm_with, Snapshot};
use cmm_core::spectral::run_spectral;
use cmm_core::CmmError;

#[derive(Parser)]
#[command(name = "cmm", version, about = "Vlasov-Poisson solver based on characteristic maps")]
struct Cli {
    /// More log output (repeat for debug level).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Setup {
    /// Start from a named preset: landau-linear, landau-nonlinear, two-stream.
    #[arg(long)]
    preset: Option<String>,

    /// Config file of `key = value` lines, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a single key, e.g. `--set t_final=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    snapshot_every: Option<usize>,

    /// Write zeros in the wall-clock column so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve with the characteristic mapping method.
    RunCmm {
        #[command(flatten)]
        setup: Setup,
        /// Also write the node values of every submap.
        #[arg(long)]
        save_submaps: bool,
    },
    /// Evolve with the pseudo-spectral reference solver on an n x n grid.
    RunSpectral {
        #[command(flatten)]
        setup: Setup,
    },
    /// Errors against a fine coarse-grid reference for several map grids.
    ConvergenceSpace {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 512)]
        reference: usize,
    },
    /// Errors against a small-step reference for several time steps.
    ConvergenceTime {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, value_delimiter = ',', default_value = "1/16,1/32,1/64", value_parser = real)]
        dts: Vec<f64>,
        #[arg(long, default_value = "1/256", value_parser = real)]
        reference_dt: f64,
    },
    /// Damping rate and frequency of the field for several wave numbers.
    DampingSweep {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, value_delimiter = ',', required = true, value_parser = real)]
        k: Vec<f64>,
    },
    /// Evaluate the distribution on successively smaller windows.
    Zoom {
        #[command(flatten)]
        setup: Setup,
        /// Window center as `x,v`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values = ["0", "0"], value_parser = real)]
        center: Vec<f64>,
        #[arg(long, default_value_t = 4.0)]
        factor: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Radial spectra of snapshot files, or of every submap after a run when
    /// no files are given.
    Spectrum {
        #[command(flatten)]
        setup: Setup,
        inputs: Vec<PathBuf>,
    },
    /// Maximum pointwise difference between two snapshots.
    Compare { a: PathBuf, b: PathBuf },
}

fn real(s: &str) -> Result<f64, String> {
    parse_number(s)
}

enum Failure {
    Usage(String),
    Core(CmmError),
}

impl From<CmmError> for Failure {
    fn from(e: CmmError) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

impl Setup {
    fn config(&self) -> CliResult<SimulationConfig> {
        let mut cfg = match &self.preset {
            Some(name) => SimulationConfig::preset(name)?,
            None => SimulationConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| CmmError::io(path, e))?;
            cfg.apply_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set_key(k, v)?;
        }
        if let Some(every) = self.snapshot_every {
            cfg.snapshot_every = every;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare(&self, command: &str) -> CliResult<(SimulationConfig, RunManifest)> {
        let cfg = self.config()?;
        fs::create_dir_all(&self.out).map_err(|e| CmmError::io(&self.out, e))?;
        let mut manifest = RunManifest::new(command, cfg.to_config_string());
        let echo = self.out.join("config.txt");
        cfg.write_file(&echo)?;
        manifest.add(&echo);
        Ok((cfg, manifest))
    }

    fn finish(&self, mut manifest: RunManifest) -> CliResult<()> {
        manifest.write(&self.out.join("manifest.json"))?;
        Ok(())
    }
}

fn write_text(path: &Path, text: &str, manifest: &mut RunManifest) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CmmError::io(path, e))?;
    manifest.add(path);
    Ok(())
}

fn save_snapshot(dir: &Path, prefix: &str, s: &Snapshot, manifest: &mut RunManifest) -> CliResult<()> {
    let g = &s.grid;
    let meta = SnapshotMeta::new(g.nx, g.nv, g.domain.lx, g.domain.lv, s.t, "f");
    let path = dir.join(format!("{prefix}_{:06}.bin", s.step));
    write_snapshot(&s.f, &meta, &path)?;
    manifest.add(&path);
    Ok(())
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::RunCmm { setup, save_submaps } => {
            let (cfg, mut manifest) = setup.prepare("run-cmm")?;
            let mut written = Vec::new();
            let run = run_cmm_with(&cfg, |s| {
                let g = &s.grid;
                let meta = SnapshotMeta::new(g.nx, g.nv, g.domain.lx, g.domain.lv, s.t, "f");
                let path = setup.out.join(format!("f_{:06}.bin", s.step));
                write_snapshot(&s.f, &meta, &path)?;
                written.push(path);
                Ok(())
            })?;
            for p in &written {
                manifest.add(p);
            }
            let csv = setup.out.join("diagnostics.csv");
            write_timeseries(&run.records, &csv, !setup.no_timing)?;
            manifest.add(&csv);
            if save_submaps {
                let maps = run.stack.stored.iter().chain(std::iter::once(&run.stack.active));
                for (i, m) in maps.enumerate() {
                    let g = m.grid();
                    let parts = [("disp_x", &m.disp_x), ("disp_v", &m.disp_v)];
                    for (name, field) in parts {
                        let values: Vec<f64> = (0..g.len()).map(|k| field.node(k).value).collect();
                        let meta = SnapshotMeta::new(g.nx, g.nv, g.domain.lx, g.domain.lv, cfg.t_final, name);
                        let path = setup.out.join(format!("submap_{i:04}_{name}.bin"));
                        write_snapshot(&values, &meta, &path)?;
                        manifest.add(&path);
                    }
                }
            }
            let last = run.records.last().copied().unwrap_or_default();
            println!(
                "t = {}  mass = {:.15e}  e_tot = {:.15e}  submaps = {}",
                last.t, last.mass, last.e_tot, last.n_submaps
            );
            setup.finish(manifest)
        }
        Command::RunSpectral { setup } => {
            let (cfg, mut manifest) = setup.prepare("run-spectral")?;
            let run = run_spectral(&cfg)?;
            for s in &run.snapshots {
                save_snapshot(&setup.out, "f", s, &mut manifest)?;
            }
            let csv = setup.out.join("diagnostics.csv");
            write_timeseries(&run.records, &csv, !setup.no_timing)?;
            manifest.add(&csv);
            let last = run.records.last().copied().unwrap_or_default();
            println!("t = {}  mass = {:.15e}  e_tot = {:.15e}", last.t, last.mass, last.e_tot);
            setup.finish(manifest)
        }
        Command::ConvergenceSpace { setup, ns, reference } => {
            if ns.is_empty() || ns.iter().any(|&n| n < 4 || n % 2 != 0) {
                return Err(Failure::Usage("--ns needs even grid sizes of at least 4".into()));
            }
            let (cfg, mut manifest) = setup.prepare("convergence-space")?;
            let table = spatial_convergence(&cfg, &ns, reference)?;
            print!("{}", table.render());
            write_text(&setup.out.join("convergence_space.txt"), &table.render(), &mut manifest)?;
            let json = serde_json_string(&table);
            write_text(&setup.out.join("convergence_space.json"), &json, &mut manifest)?;
            setup.finish(manifest)
        }
        Command::ConvergenceTime { setup, dts, reference_dt } => {
            if dts.iter().any(|&dt| dt <= 0.0) || reference_dt <= 0.0 {
                return Err(Failure::Usage("time steps must be positive".into()));
            }
            let (cfg, mut manifest) = setup.prepare("convergence-time")?;
            let table = temporal_convergence(&cfg, &dts, reference_dt)?;
            print!("{}", table.render());
            write_text(&setup.out.join("convergence_time.txt"), &table.render(), &mut manifest)?;
            let json = serde_json_string(&table);
            write_text(&setup.out.join("convergence_time.json"), &json, &mut manifest)?;
            setup.finish(manifest)
        }
        Command::DampingSweep { setup, k } => {
            let (cfg, mut manifest) = setup.prepare("damping-sweep")?;
            let rows = damping_sweep(&cfg, &k)?;
            let mut csv = String::from("k,gamma,omega,peaks,residual\n");
            for r in &rows {
                println!("k = {:<6} gamma = {:+.6}  omega = {:.6}", r.k, r.fit.gamma, r.fit.omega);
                csv.push_str(&format!(
                    "{:?},{:?},{:?},{},{:?}\n",
                    r.k,
                    r.fit.gamma,
                    r.fit.omega,
                    r.fit.peak_times.len(),
                    r.fit.residual
                ));
            }
            write_text(&setup.out.join("damping.csv"), &csv, &mut manifest)?;
            setup.finish(manifest)
        }
        Command::Zoom {
            setup,
            center,
            factor,
            levels,
            resolution,
        } => {
            if factor <= 1.0 || resolution < 2 {
                return Err(Failure::Usage("--factor must exceed 1 and --resolution be at least 2".into()));
            }
            let (cfg, mut manifest) = setup.prepare("zoom")?;
            let cfg = SimulationConfig {
                snapshot_every: 0,
                ..cfg
            };
            let run = run_cmm_with(&cfg, |_| Ok(()))?;
            let ic = cfg.initial_condition();
            let f0 = move |x: f64, v: f64| ic.eval(x, v);
            let chain = zoom_chain(&run.stack, &f0, (center[0], center[1]), factor, levels, resolution)?;
            for (level, (w, values)) in chain.iter().enumerate() {
                let path = setup.out.join(format!("zoom_{}.bin", level + 1));
                write_window(&path, w, values, resolution, cfg.t_final)?;
                manifest.add(&path);
                println!(
                    "level {}: [{:.6}, {:.6}) x [{:.6}, {:.6})",
                    level + 1,
                    w.x0,
                    w.x1,
                    w.v0,
                    w.v1
                );
            }
            setup.finish(manifest)
        }
        Command::Spectrum { setup, inputs } => {
            if inputs.is_empty() {
                let (cfg, mut manifest) = setup.prepare("spectrum")?;
                let cfg = SimulationConfig {
                    snapshot_every: 0,
                    ..cfg
                };
                let run = run_cmm_with(&cfg, |_| Ok(()))?;
                let spectra = submap_spectra(&run.stack)?;
                let mut csv = String::from("submap,component,k,energy\n");
                for (i, pair) in spectra.iter().enumerate() {
                    for (name, s) in ["disp_x", "disp_v"].iter().zip(pair) {
                        for (k, e) in s.iter().enumerate() {
                            csv.push_str(&format!("{i},{name},{k},{e:?}\n"));
                        }
                    }
                }
                println!("{} submaps", spectra.len());
                write_text(&setup.out.join("submap_spectra.csv"), &csv, &mut manifest)?;
                setup.finish(manifest)
            } else {
                println!("file,k,energy");
                for p in &inputs {
                    let (meta, data) = read_snapshot(p)?;
                    let s = radial_spectrum(&data, meta.nx, meta.nv)?;
                    for (k, e) in s.iter().enumerate() {
                        println!("{},{k},{e:?}", p.display());
                    }
                }
                Ok(())
            }
        }
        Command::Compare { a, b } => {
            let (ma, fa) = read_snapshot(&a)?;
            let (mb, fb) = read_snapshot(&b)?;
            if (ma.nx, ma.nv) != (mb.nx, mb.nv) {
                return Err(Failure::Usage(format!(
                    "shapes differ: {}x{} against {}x{}",
                    ma.nx, ma.nv, mb.nx, mb.nv
                )));
            }
            println!("{:e}", linf_diff(&fa, &fb));
            Ok(())
        }
    }
}

fn write_window(path: &Path, w: &Window, values: &[f64], res: usize, t: f64) -> CliResult<()> {
    let meta = SnapshotMeta::new(res, res, w.x1 - w.x0, 0.5 * (w.v1 - w.v0), t, "f_zoom");
    info!("writing {}", path.display());
    write_snapshot(values, &meta, path)?;
    Ok(())
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}
