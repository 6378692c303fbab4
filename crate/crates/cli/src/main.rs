//! `branchflow` command-line front end.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use branchflow::analysis::time_scales_from_series;
use branchflow::classical::integrate_ensemble;
use branchflow::config::parse_override;
use branchflow::quantum::{quantum_ensemble, InitialState};
use branchflow::series::{write_meta, Provenance};
use branchflow::sweep::{
    run_end_time, run_provenance, write_point, write_sweep_csv, write_timescales_csv, SweepCell,
};
use branchflow::whitenoise::{
    branching_time, ek_white_noise_quantum, energy_time, sigma2_white_noise_quantum,
};
use branchflow::analysis::{extract_tb, extract_te, TimeScales};
use branchflow::{
    resolve_config, run_point, run_sweep, sample_realization, Error, Method, ObservableSeries, ParameterPoint,
    Result, RunConfig,
};

#[derive(Parser)]
/// Configuration flags go before the subcommand.
#[command(name = "branchflow", version, about = "Branched flow in time-dependent random potentials")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set grid.N=2048`. Wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Start from the large-ensemble settings instead of the desk defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory (same as `--set output.dir=...`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one potential realization and write it as a BFG1 grid.
    Potential {
        #[command(flatten)]
        point: PointArgs,
        /// Realization index within the master seed's ensemble.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Classical particle ensemble and white-noise curves at one point.
    Classical {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Plane-wave and Gaussian-packet propagation at one point.
    Quantum {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Tabulate the white-noise closed forms in quantum units.
    Analytics {
        /// `tau:v0` pair; repeatable.
        #[arg(long = "point", value_name = "TAU:V0")]
        points: Vec<String>,
        /// Preset name; repeatable. Defaults to B0..B5 when no point is given.
        #[arg(long = "preset")]
        presets: Vec<String>,
        /// Samples per point over `[0, tb_multiple·t_b]`.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Read observable CSVs (or point directories) and write a time-scales table.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file; defaults to `<out>/timescales.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Log-spaced `(τ, v0)` scan with every model at every cell.
    Sweep {
        /// Skip the per-cell output directories.
        #[arg(long)]
        no_points: bool,
    },
    /// Run every model at a named preset point.
    Preset {
        /// B0..B5, Q0..Q5, B2-text, topinka or patsyk.
        name: String,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Named preset instead of `--tau`/`--v0`.
    #[arg(long, conflicts_with_all = ["tau", "v0"], required_unless_present_all = ["tau", "v0"])]
    preset: Option<String>,
    #[arg(long, requires = "v0")]
    tau: Option<f64>,
    #[arg(long, requires = "tau")]
    v0: Option<f64>,
}

impl PointArgs {
    fn resolve(&self) -> Result<ParameterPoint> {
        match (&self.preset, self.tau, self.v0) {
            (Some(name), _, _) => ParameterPoint::preset(name),
            (None, Some(tau), Some(v0)) => ParameterPoint::new(tau, v0),
            _ => Err(Error::Argument("give --preset or both --tau and --v0".into())),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = if cli.paper_scale { RunConfig::paper_scale() } else { RunConfig::default() };
    let overrides = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = resolve_config(base, cli.config.as_deref(), &overrides)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn parse_pair(text: &str) -> Result<ParameterPoint> {
    let bad = || Error::Argument(format!("expected TAU:V0, got `{text}`"));
    let (tau, v0) = text.split_once(':').ok_or_else(bad)?;
    ParameterPoint::new(tau.trim().parse().map_err(|_| bad())?, v0.trim().parse().map_err(|_| bad())?)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn cmd_potential(cfg: &RunConfig, point: &ParameterPoint, index: u64) -> Result<()> {
    let t_end = run_end_time(point, cfg)?;
    let grid = cfg.grid_for(point.tau(), t_end)?;
    let real = sample_realization(&point.spec(), &grid, cfg.master_seed, index)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("potential.bfg1");
    real.save(&path)?;
    let mut meta = run_provenance(point, cfg, &grid, t_end);
    meta.insert("potential.index".into(), index.to_string());
    meta.insert("potential.seed".into(), real.seed().to_string());
    let meta_path = ObservableSeries::meta_path(&path);
    write_meta(&meta_path, &meta)?;
    report(&[path, meta_path]);
    Ok(())
}

fn write_series(dir: &Path, series: &[&ObservableSeries]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in series {
        let path = dir.join(format!("{}_{}.csv", s.method(), s.kind()));
        s.write_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}

fn white_noise_series(point: &ParameterPoint, times: &[f64], meta: &Provenance) -> Result<[ObservableSeries; 2]> {
    let (tau, v0) = (point.tau(), point.v0());
    let n = times.len();
    let ek = times.iter().map(|&t| ek_white_noise_quantum(t, v0, tau, 0.0)).collect();
    let s2 = times.iter().map(|&t| sigma2_white_noise_quantum(t, v0, tau, 0.0)).collect();
    let mk = |kind, values| {
        ObservableSeries::new(kind, Method::WhiteNoise, tau, v0, times.to_vec(), values, vec![0.0; n], 1)
            .map(|s| s.with_provenance(meta.clone()))
    };
    Ok([
        mk(branchflow::ObservableKind::KineticEnergy, ek)?,
        mk(branchflow::ObservableKind::Sigma2, s2)?,
    ])
}

fn cmd_classical(cfg: &RunConfig, point: &ParameterPoint) -> Result<()> {
    let t_end = run_end_time(point, cfg)?;
    let grid = cfg.grid_for(point.tau(), t_end)?;
    let meta = run_provenance(point, cfg, &grid, t_end);
    let obs = integrate_ensemble(&point.spec(), &grid, cfg.master_seed, cfg.realizations, cfg.particles, t_end)?;
    let ek = obs.kinetic_energy.with_provenance(meta.clone());
    let s2 = obs.sigma2.with_provenance(meta.clone());
    let [wn_ek, wn_s2] = white_noise_series(point, ek.times(), &meta)?;
    let mut written = write_series(&cfg.output_dir, &[&ek, &s2, &wn_ek, &wn_s2])?;
    let rows = time_scales_from_series(&[ek, s2, wn_ek, wn_s2]);
    let path = cfg.output_dir.join("timescales.csv");
    write_timescales_csv(&path, &rows, &meta)?;
    written.push(path);
    report(&written);
    Ok(())
}

fn cmd_quantum(cfg: &RunConfig, point: &ParameterPoint) -> Result<()> {
    let t_end = run_end_time(point, cfg)?;
    let grid = cfg.grid_for(point.tau(), t_end)?;
    let meta = run_provenance(point, cfg, &grid, t_end);
    let spec = point.spec();
    let plane = quantum_ensemble(&spec, &grid, cfg.master_seed, cfg.realizations, InitialState::PlaneWave, t_end)?;
    let packet = quantum_ensemble(&spec, &grid, cfg.master_seed, cfg.realizations, InitialState::Gaussian, t_end)?;
    let ek = plane.kinetic_energy.with_provenance(meta.clone());
    let mut series = vec![ek];
    series.extend(plane.scintillation.map(|s| s.with_provenance(meta.clone())));
    series.extend(packet.sigma2.map(|s| s.with_provenance(meta.clone())));
    let refs: Vec<&ObservableSeries> = series.iter().collect();
    let mut written = write_series(&cfg.output_dir, &refs)?;

    let sigma2 = series.iter().find(|s| s.kind() == branchflow::ObservableKind::Sigma2);
    let row = TimeScales {
        tau: point.tau(),
        v0: point.v0(),
        method: Method::QuantumSim,
        t_b: sigma2.map_or_else(branchflow::analysis::TimeScale::invalid, extract_tb),
        t_e: extract_te(&series[0], point.v0()),
    };
    let mut meta = meta;
    meta.insert("result.max_norm_drift".into(), plane.max_norm_drift.max(packet.max_norm_drift).to_string());
    let path = cfg.output_dir.join("timescales.csv");
    write_timescales_csv(&path, &[row], &meta)?;
    written.push(path);
    report(&written);
    Ok(())
}

const ANALYTICS_HEADER: &str = "tau,v0,vtilde,t,ek_white_noise,sigma2_white_noise,tb,te";

fn cmd_analytics(cfg: &RunConfig, points: &[String], presets: &[String], samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::Argument("--samples must be at least 2".into()));
    }
    let mut list = points.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
    for name in presets {
        list.push(ParameterPoint::preset(name)?);
    }
    if list.is_empty() {
        list = (0..=5)
            .map(|n| ParameterPoint::preset(&format!("B{n}")))
            .collect::<Result<_>>()?;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("analytics.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "{ANALYTICS_HEADER}")?;
    for p in &list {
        let (tau, v0) = (p.tau(), p.v0());
        let (tb, te) = (branching_time(v0, tau), energy_time(v0, tau));
        let t_max = match cfg.t_end {
            Some(t) => t,
            None if tb.is_finite() => cfg.tb_multiple * tb,
            None => return Err(Error::config("window.t_end", "v0 = 0 has no branching time; set an explicit end time")),
        };
        for i in 0..samples {
            let t = t_max * i as f64 / (samples - 1) as f64;
            writeln!(
                w,
                "{tau},{v0},{},{t},{},{},{tb},{te}",
                p.vtilde(),
                ek_white_noise_quantum(t, v0, tau, 0.0),
                sigma2_white_noise_quantum(t, v0, tau, 0.0)
            )?;
        }
    }
    w.flush()?;
    let meta_path = ObservableSeries::meta_path(&path);
    write_meta(&meta_path, &cfg.to_provenance())?;
    report(&[path, meta_path]);
    Ok(())
}

fn collect_csvs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| {
                p.extension().is_some_and(|e| e == "csv") && ObservableSeries::meta_path(p).exists() && {
                    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                    ["_kinetic_energy.csv", "_sigma2.csv"].iter().any(|s| name.ends_with(s))
                }
            });
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Argument("no observable CSVs found in the inputs".into()));
    }
    Ok(files)
}

fn cmd_extract(cfg: &RunConfig, inputs: &[PathBuf], output: Option<&Path>) -> Result<()> {
    let files = collect_csvs(inputs)?;
    let series = files.iter().map(ObservableSeries::read_csv).collect::<Result<Vec<_>>>()?;
    let rows = time_scales_from_series(&series);
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            std::fs::create_dir_all(&cfg.output_dir)?;
            cfg.output_dir.join("timescales.csv")
        }
    };
    let mut meta = Provenance::new();
    for (i, f) in files.iter().enumerate() {
        meta.insert(format!("source.{i}"), f.display().to_string());
    }
    write_timescales_csv(&path, &rows, &meta)?;
    report(&[path]);
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, no_points: bool) -> Result<bool> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let point_dir = cfg.output_dir.join("points");
    let progress = |cell: &SweepCell| match &cell.outcome {
        Ok(_) => eprintln!("cell tau={} v0={}: ok", cell.point.tau(), cell.point.v0()),
        Err(e) => eprintln!("cell tau={} v0={}: failed: {e}", cell.point.tau(), cell.point.v0()),
    };
    let sweep = run_sweep(
        cfg.tau_range,
        cfg.v0_range,
        cfg.sweep_steps,
        cfg,
        (!no_points).then_some(point_dir.as_path()),
        progress,
    )?;
    let path = cfg.output_dir.join("sweep.csv");
    write_sweep_csv(&path, &sweep)?;
    report(&[path]);
    Ok(sweep.all_succeeded())
}

fn cmd_preset(cfg: &RunConfig, name: &str) -> Result<()> {
    let point = ParameterPoint::preset(name)?;
    let result = run_point(&point, cfg)?;
    let written = write_point(&result, &cfg.output_dir.join(name))?;
    report(&written);
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Potential { point, index } => cmd_potential(&cfg, &point.resolve()?, *index)?,
        Command::Classical { point } => cmd_classical(&cfg, &point.resolve()?)?,
        Command::Quantum { point } => cmd_quantum(&cfg, &point.resolve()?)?,
        Command::Analytics {
            points,
            presets,
            samples,
        } => cmd_analytics(&cfg, points, presets, *samples)?,
        Command::Extract { inputs, output } => cmd_extract(&cfg, inputs, output.as_deref())?,
        Command::Sweep { no_points } => return cmd_sweep(&cfg, *no_points),
        Command::Preset { name } => cmd_preset(&cfg, name)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some cells failed; see the reason column");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
