mod config;

use anyhow::{anyhow, Context};
use beb_core::analysis::{attractor_points, sweep_gamma_l, sweep_mu, trap_check, write_sweep_csv, SweepRecord, TrapRegion};
use beb_core::hybrid::{simulate, write_trajectory_csv, SimOptions};
use beb_core::onedmap::{map_profile, write_profile_csv};
use beb_core::{ReturnMap, System, Vec3};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Config;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const OUT_DIR_VAR: &str = "BEB_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "beb", version, about = "Return maps, attractors and bifurcation sweeps of a piecewise-linear 3D flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// TOML config with [params], [settings], [sweep], [simulate]; a run manifest (.json) also works
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; `-` for stdout. Defaults to a per-command file in $BEB_OUT_DIR (or the current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel work (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a full trajectory and write t,x,y,z,side rows
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Start point `x,y,z`, or a single `x` for the point g(x) of the section
        #[arg(long, allow_hyphen_values = true)]
        seed_point: Option<String>,
        /// Duration (overrides [simulate] duration)
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Tabulate the one-dimensional map and its iterates on an interval
    Map1d {
        #[command(flatten)]
        common: Common,
        /// Interval `a,b` (default: x-range of the attractor)
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        /// Grid points
        #[arg(long, default_value_t = 401)]
        steps: usize,
        /// Iterates to tabulate, e.g. `1,5`
        #[arg(long, default_value = "1,5")]
        powers: String,
    },
    /// Bifurcation sweep over gamma_L or over mu (with the quadratic term)
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        which: SweepKind,
        /// Parameter range `a,b` (default: 0.05,0.35 for gamma_L and -1,1.5 for mu)
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        #[arg(long, default_value_t = 600)]
        steps: usize,
        /// Also write a matplotlib script next to the CSV
        #[arg(long)]
        plot_script: bool,
    },
    /// Iterate the return map and write the attractor samples
    Attractor {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        seed_point: Option<String>,
        /// Iterates kept after the transient
        #[arg(long, default_value_t = 10000)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        transient: usize,
    },
    /// Build a box around the attractor and check that it is mapped into itself
    Trap {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        seed_point: Option<String>,
        /// Boundary points
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Relative padding of the attractor's bounding box
        #[arg(long, default_value_t = 0.2)]
        inflate: f64,
        /// Split the horizontal padding evenly instead of by the slope of f at the left end
        #[arg(long)]
        symmetric: bool,
        /// Explicit box `x_min,x_max,d_min,d_max` instead of the constructed one
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
    },
    /// Evaluate the return map once and write the full trace as JSON
    ReturnMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        seed_point: Option<String>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepKind {
    #[value(name = "gamma-l", alias = "gammaL", alias = "gamma_l")]
    GammaL,
    Mu,
}

enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

trait Classify<T> {
    fn usage(self) -> Outcome<T>;
    fn compute(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn compute(self) -> Outcome<T> {
        self.map_err(|e| Failure::Compute(e.into()))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    arguments: Vec<String>,
    config: Config,
    output: String,
    wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

fn parse_list(s: &str, n: Option<usize>) -> anyhow::Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(anyhow!("non-finite value in {s:?}"));
    }
    match n {
        Some(n) if vals.len() != n => Err(anyhow!("expected {n} comma-separated numbers, got {s:?}")),
        _ => Ok(vals),
    }
}

fn parse_range(s: &str) -> anyhow::Result<(f64, f64)> {
    let v = parse_list(s, Some(2))?;
    if v[0] >= v[1] {
        return Err(anyhow!("range {s:?} must be increasing"));
    }
    Ok((v[0], v[1]))
}

/// `x,y,z` as given, or `x` as the point `g(x)`.
fn seed(map: Option<&ReturnMap>, s: Option<&str>, default_x: f64) -> Outcome<Vec3> {
    let vals = match s {
        Some(s) => parse_list(s, None).usage()?,
        None => vec![default_x],
    };
    match vals.len() {
        3 => Ok(Vec3::new(vals[0], vals[1], vals[2])),
        1 => match map {
            Some(m) => m.g(vals[0]).usage(),
            None => Err(Failure::Usage(anyhow!("a single-coordinate seed needs mu > 0"))),
        },
        _ => Err(Failure::Usage(anyhow!("seed point must have 1 or 3 coordinates"))),
    }
}

fn output_path(common: &Common, default_name: &str) -> PathBuf {
    match &common.out {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            dir.join(default_name)
        }
    }
}

fn open_out(path: &Path) -> anyhow::Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn write_manifest(path: &Path, m: &Manifest) -> anyhow::Result<()> {
    if path == Path::new("-") {
        return Ok(());
    }
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    let mut w = open_out(Path::new(&name))?;
    serde_json::to_writer_pretty(&mut w, m)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_config(common: &Common) -> Outcome<Config> {
    match &common.config {
        Some(p) => Config::load(p).usage(),
        None => Ok(Config::default()),
    }
}

fn return_map(cfg: &Config) -> Outcome<ReturnMap> {
    ReturnMap::new(cfg.params, cfg.settings).usage()
}

fn run(cli: Cli) -> Outcome<()> {
    let started = Instant::now();
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    let (name, common) = match &cli.command {
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Map1d { common, .. } => ("map1d", common),
        Command::Sweep { common, .. } => ("sweep", common),
        Command::Attractor { common, .. } => ("attractor", common),
        Command::Trap { common, .. } => ("trap", common),
        Command::ReturnMap { common, .. } => ("return-map", common),
    };
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(Failure::Usage(anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().compute()?;
    }
    let mut cfg = load_config(common)?;
    let mu = cfg.params.mu;
    let default_x = -0.001 * mu.abs();
    let mut summary = None;

    let out = match &cli.command {
        Command::Simulate { common, seed_point, duration } => {
            let sys = System::new(cfg.params).usage()?;
            let map = ReturnMap::new(cfg.params, cfg.settings).ok();
            let start = match (seed_point, &map) {
                (None, None) => sys.x_left.location + Vec3::new(0.1 * mu.abs().max(1e-3), 0.0, 0.0),
                _ => seed(map.as_ref(), seed_point.as_deref(), default_x)?,
            };
            if let Some(d) = duration {
                cfg.simulate.duration = *d;
            }
            if !(cfg.simulate.duration >= 0.0 && cfg.simulate.sample_dt > 0.0) {
                return Err(Failure::Usage(anyhow!("duration must be >= 0 and sample_dt > 0")));
            }
            let opts = SimOptions { sample_dt: cfg.simulate.sample_dt, force_rk: cfg.simulate.force_rk };
            let segs = simulate(&sys, cfg.settings, opts, start, cfg.simulate.duration).compute()?;
            let path = output_path(common, "simulate.csv");
            let mut w = open_out(&path).usage()?;
            write_trajectory_csv(&mut w, &segs).and_then(|_| w.flush()).usage()?;
            eprintln!("{} segments", segs.len());
            summary = Some(serde_json::json!({ "segments": segs.len(), "start": start }));
            path
        }
        Command::Map1d { common, range, steps, powers } => {
            if *steps < 2 {
                return Err(Failure::Usage(anyhow!("--steps must be at least 2")));
            }
            let powers: Vec<usize> = powers
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Usage(anyhow!("invalid --powers: {e}")))?;
            let range = range.as_deref().map(parse_range).transpose().usage()?;
            let map = return_map(&cfg)?;
            let (a, b) = match range {
                Some(r) => r,
                None => {
                    let pts = attractor_points(&map, map.g(default_x).compute()?, 1000, 10000).compute()?;
                    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)))
                }
            };
            let profile = map_profile(&map, a, b, *steps, &powers);
            let failed = profile.values.iter().flatten().filter(|v| v.is_err()).count();
            let path = output_path(common, "map1d.csv");
            let mut w = open_out(&path).usage()?;
            write_profile_csv(&mut w, &profile).and_then(|_| w.flush()).usage()?;
            eprintln!("{} grid points on [{a}, {b}], {failed} failed evaluations", profile.grid.len());
            summary = Some(serde_json::json!({ "interval": [a, b], "critical_x": profile.critical_x, "failed": failed }));
            path
        }
        Command::Sweep { common, which, range, steps, plot_script } => {
            if *steps < 2 {
                return Err(Failure::Usage(anyhow!("--steps must be at least 2")));
            }
            let range = range.as_deref().map(parse_range).transpose().usage()?;
            let records: Vec<SweepRecord> = match which {
                SweepKind::GammaL => {
                    let r = range.unwrap_or((0.05, 0.35));
                    if r.0 <= 0.0 {
                        return Err(Failure::Usage(anyhow!("gamma_L must be positive")));
                    }
                    return_map(&cfg)?;
                    sweep_gamma_l(cfg.params, cfg.settings, r, *steps, &cfg.sweep)
                }
                SweepKind::Mu => {
                    cfg.params.nonlinear = true;
                    sweep_mu(cfg.params, cfg.settings, range.unwrap_or((-1.0, 1.5)), *steps, &cfg.sweep)
                }
            };
            let failed: Vec<&SweepRecord> = records.iter().filter(|r| r.error.is_some()).collect();
            let path = output_path(common, "sweep.csv");
            let mut w = open_out(&path).usage()?;
            write_sweep_csv(&mut w, &records).and_then(|_| w.flush()).usage()?;
            if *plot_script && path != Path::new("-") {
                write_plot_script(&path, *which).usage()?;
            }
            for r in &failed {
                eprintln!("param {:.6}: {}", r.param, r.error.as_deref().unwrap_or(""));
            }
            eprintln!("{} parameter values, {} failed", records.len(), failed.len());
            if !records.is_empty() && failed.len() == records.len() {
                return Err(Failure::Compute(anyhow!("every sweep point failed")));
            }
            summary = Some(serde_json::json!({ "which": which, "steps": steps, "failed": failed.len() }));
            path
        }
        Command::Attractor { common, seed_point, steps, transient } => {
            let map = return_map(&cfg)?;
            let start = seed(Some(&map), seed_point.as_deref(), default_x)?;
            let pts = attractor_points(&map, start, *transient, *steps).compute()?;
            let path = output_path(common, "attractor.csv");
            let mut w = open_out(&path).usage()?;
            let mut write = || -> io::Result<()> {
                writeln!(w, "index,x,y,z,d")?;
                for (i, p) in pts.iter().enumerate() {
                    let (_, d) = map.plot_coords(*p);
                    writeln!(w, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.y, p.z, d)?;
                }
                w.flush()
            };
            write().usage()?;
            path
        }
        Command::Trap { common, seed_point, steps, inflate, symmetric, range } => {
            if *steps < 4 {
                return Err(Failure::Usage(anyhow!("--steps must be at least 4")));
            }
            let map = return_map(&cfg)?;
            let region = match range {
                Some(s) => {
                    let v = parse_list(s, Some(4)).usage()?;
                    if v[0] >= v[1] || v[2] >= v[3] {
                        return Err(Failure::Usage(anyhow!("box {s:?} must have x_min < x_max and d_min < d_max")));
                    }
                    TrapRegion { x_min: v[0], x_max: v[1], d_min: v[2], d_max: v[3] }
                }
                None => {
                    let start = seed(Some(&map), seed_point.as_deref(), default_x)?;
                    let pts = attractor_points(&map, start, 1000, 10000).compute()?;
                    let built = if *symmetric {
                        TrapRegion::around(&map, &pts, *inflate)
                    } else {
                        TrapRegion::around_balanced(&map, &pts, *inflate).compute()?
                    };
                    built.ok_or_else(|| Failure::Compute(anyhow!("attractor has an empty bounding box")))?
                }
            };
            let report = trap_check(&map, &region, *steps);
            let path = output_path(common, "trap.json");
            let mut w = open_out(&path).usage()?;
            serde_json::to_writer_pretty(&mut w, &report).usage()?;
            writeln!(w).and_then(|_| w.flush()).usage()?;
            eprintln!("contained: {} (margin {:.3e})", report.contained, report.min_margin);
            summary = Some(serde_json::json!({ "contained": report.contained, "min_margin": report.min_margin }));
            path
        }
        Command::ReturnMap { common, seed_point } => {
            let map = return_map(&cfg)?;
            let start = seed(Some(&map), seed_point.as_deref(), default_x)?;
            let (image, trace) = map.evaluate(start).compute()?;
            let path = output_path(common, "return_map.json");
            let mut w = open_out(&path).usage()?;
            let doc = serde_json::json!({
                "input": start,
                "output": image,
                "input_chart": map.chart(start).ok(),
                "output_chart": map.chart(image).ok(),
                "trace": trace,
            });
            serde_json::to_writer_pretty(&mut w, &doc).usage()?;
            writeln!(w).and_then(|_| w.flush()).usage()?;
            path
        }
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        arguments,
        config: cfg,
        output: out.display().to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        summary,
    };
    write_manifest(&out, &manifest).usage()?;
    Ok(())
}

fn write_plot_script(csv: &Path, which: SweepKind) -> io::Result<()> {
    let mut name = csv.as_os_str().to_owned();
    name.push(".py");
    let label = match which {
        SweepKind::GammaL => "gamma_L",
        SweepKind::Mu => "mu",
    };
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let script = format!(
        r#"import csv, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
p, x = [], []
with open(os.path.join(here, "{file}")) as f:
    for row in csv.DictReader(f):
        if row["x"] != "nan":
            p.append(float(row["param"]))
            x.append(float(row["x"]))
plt.figure(figsize=(8, 5))
plt.plot(p, x, ",k")
plt.xlabel("{label}")
plt.ylabel("x")
plt.tight_layout()
plt.savefig(os.path.join(here, "{file}.png"), dpi=200)
"#
    );
    std::fs::write(name, script)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("computation failed: {e:#}");
            ExitCode::from(2)
        }
    }
}
