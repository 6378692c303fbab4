//! Parameter points, presets, single-point runs and `(τ, v0)` sweeps.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{chi_indicator_with, extract_tb, extract_te, ChiOptions, TimeScale, TimeScales};
use crate::classical::{combine_traces, run_realization, ClassicalObservables};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::GridFile;
use crate::grid::{CorrelationSpec, SimulationGrid};
use crate::potential::{map_realizations, realization_seed, sample_realization};
use crate::quantum::{combine_quantum_traces, propagate_and_observe, InitialState, QuantumObservables};
use crate::series::{write_meta, Method, ObservableKind, ObservableSeries, Provenance};
use crate::whitenoise::{
    branching_time, ek_white_noise_quantum, energy_time, sigma2_white_noise_quantum, validity_bound,
};

/// Mixed into the master seed when quantum runs use their own potentials.
const QUANTUM_SEED_SALT: u64 = 0x5155_414E_5455_4D00;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    tau: f64,
    v0: f64,
    label: Option<String>,
}

impl ParameterPoint {
    pub fn new(tau: f64, v0: f64) -> Result<Self> {
        CorrelationSpec::new(v0, tau)?;
        Ok(Self { tau, v0, label: None })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Point at strength `v0` with `ṽ₀ = vtilde`, i.e. `τ = sqrt(ṽ₀/v0)`.
    pub fn from_vtilde(vtilde: f64, v0: f64) -> Result<Self> {
        Self::new((vtilde / v0).sqrt(), v0)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn vtilde(&self) -> f64 {
        self.v0 * self.tau * self.tau
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn spec(&self) -> CorrelationSpec {
        CorrelationSpec::new(self.v0, self.tau).expect("validated on construction")
    }

    /// Directory name for this point's outputs.
    pub fn dir_name(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => format!("tau{:.6e}_v0{:.6e}", self.tau, self.v0),
        }
    }

    /// Named presets: `B0`..`B5` (`v0 = 50`), `Q0`..`Q5` (`v0 = 0.2`), both
    /// with `ṽ₀ = 10^(n-3)`; `B2-text` (`v0 = 50`, `τ = 0.05`); the
    /// experimental anchors `topinka` and `patsyk`.
    pub fn preset(name: &str) -> Result<Self> {
        let series = |prefix: char, v0: f64| -> Option<Result<Self>> {
            let rest = name.strip_prefix(prefix)?;
            let n: i32 = rest.parse().ok().filter(|n| (0..=5).contains(n))?;
            Some(Self::from_vtilde(10f64.powi(n - 3), v0).map(|p| p.labeled(name)))
        };
        if let Some(p) = series('B', 50.0).or_else(|| series('Q', 0.2)) {
            return p;
        }
        match name {
            "B2-text" => Ok(Self::new(0.05, 50.0)?.labeled(name)),
            "topinka" => Ok(Self::new(0.22, 0.83)?.labeled(name)),
            "patsyk" => Ok(Self::new(3.36e-4, 4.42e5)?.labeled(name)),
            _ => Err(Error::Argument(format!("unknown preset `{name}`"))),
        }
    }

    pub fn preset_names() -> Vec<String> {
        let mut names: Vec<String> = (0..=5).map(|n| format!("B{n}")).collect();
        names.extend((0..=5).map(|n| format!("Q{n}")));
        names.extend(["B2-text", "topinka", "patsyk"].map(String::from));
        names
    }
}

/// Everything computed at one parameter point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: ParameterPoint,
    pub grid: SimulationGrid,
    pub t_end: f64,
    pub classical: ClassicalObservables,
    /// Plane-wave `ε_k`, `S` and Gaussian-packet `σ_x²`.
    pub quantum: Option<QuantumObservables>,
    pub white_noise_ek: ObservableSeries,
    pub white_noise_sigma2: ObservableSeries,
    pub chi_class_vs_wn: f64,
    pub chi_class_vs_quant: Option<f64>,
    pub classical_scales: TimeScales,
    pub quantum_scales: Option<TimeScales>,
    pub white_noise_scales: TimeScales,
    pub provenance: Provenance,
    pub potential_dump: Option<GridFile>,
    pub amplitude_dump: Option<GridFile>,
}

impl PointResult {
    pub fn time_scales(&self) -> Vec<TimeScales> {
        let mut out = vec![self.classical_scales];
        out.extend(self.quantum_scales);
        out.push(self.white_noise_scales);
        out
    }
}

/// End time of a run: `window.t_end` if set, else `tb_multiple·t_b`.
pub fn run_end_time(point: &ParameterPoint, cfg: &RunConfig) -> Result<f64> {
    if let Some(t) = cfg.t_end {
        return Ok(t);
    }
    let tb = branching_time(point.v0, point.tau);
    if !tb.is_finite() {
        return Err(Error::config("window.t_end", "v0 = 0 has no branching time; set an explicit end time"));
    }
    Ok(cfg.tb_multiple * tb)
}

fn white_noise_series(point: &ParameterPoint, times: &[f64], kind: ObservableKind) -> Result<ObservableSeries> {
    let (v0, tau) = (point.v0, point.tau);
    let values: Vec<f64> = times
        .iter()
        .map(|&t| match kind {
            ObservableKind::Sigma2 => sigma2_white_noise_quantum(t, v0, tau, 0.0),
            _ => ek_white_noise_quantum(t, v0, tau, 0.0),
        })
        .collect();
    ObservableSeries::new(kind, Method::WhiteNoise, tau, v0, times.to_vec(), values, vec![0.0; times.len()], 1)
}

/// Config keys plus the point and the resolved grid of one run.
pub fn run_provenance(point: &ParameterPoint, cfg: &RunConfig, grid: &SimulationGrid, t_end: f64) -> Provenance {
    let mut provenance = cfg.to_provenance();
    provenance.insert("point.label".into(), point.label.clone().unwrap_or_default());
    provenance.insert("point.tau".into(), point.tau.to_string());
    provenance.insert("point.v0".into(), point.v0.to_string());
    provenance.insert("point.vtilde".into(), point.vtilde().to_string());
    provenance.insert("run.t_end".into(), t_end.to_string());
    provenance.insert("run.N".into(), grid.n().to_string());
    provenance.insert("run.M".into(), grid.m().to_string());
    provenance.insert("run.dx".into(), grid.dx().to_string());
    provenance.insert("run.dt".into(), grid.dt().to_string());
    provenance.insert("run.seed_of_realization_0".into(), realization_seed(cfg.master_seed, 0).to_string());
    provenance.insert("run.version".into(), env!("CARGO_PKG_VERSION").to_string());
    provenance
}

struct RealizationOutput {
    classical: crate::classical::ClassicalTrace,
    plane: Option<crate::quantum::QuantumTrace>,
    packet: Option<crate::quantum::QuantumTrace>,
    potential: Option<GridFile>,
}

/// Runs classical, quantum and white-noise models at one point.
///
/// Realization `i` of the ensemble is drawn from `(seed.master, i)` and
/// shared by the classical particles and both quantum initial states unless
/// `quantum.share_seeds` is off. Deterministic given the config.
pub fn run_point(point: &ParameterPoint, cfg: &RunConfig) -> Result<PointResult> {
    let spec = point.spec();
    let t_end = run_end_time(point, cfg)?;
    let grid = cfg.grid_for(point.tau, t_end)?;
    grid.check_dynamics()?;
    let quantum_seed = if cfg.share_seeds {
        cfg.master_seed
    } else {
        cfg.master_seed ^ QUANTUM_SEED_SALT
    };
    let want_dump = |i: u64| cfg.dumps && i == 0;

    let outputs = map_realizations(&grid, cfg.realizations, |i| {
        let real = sample_realization(&spec, &grid, cfg.master_seed, i)?;
        let classical = run_realization(&real, &spec, cfg.particles, t_end)?;
        let potential = want_dump(i).then(|| real.to_grid_file());
        let (plane, packet) = if cfg.quantum {
            let qreal = if cfg.share_seeds {
                real
            } else {
                drop(real);
                sample_realization(&spec, &grid, quantum_seed, i)?
            };
            let plane = propagate_and_observe(&spec, &grid, Some(&qreal), InitialState::PlaneWave, t_end, want_dump(i))?;
            let packet = propagate_and_observe(&spec, &grid, Some(&qreal), InitialState::Gaussian, t_end, false)?;
            (Some(plane), Some(packet))
        } else {
            (None, None)
        };
        Ok(RealizationOutput {
            classical,
            plane,
            packet,
            potential,
        })
    })?;

    let mut provenance = run_provenance(point, cfg, &grid, t_end);
    provenance.insert("run.quantum_seed".into(), quantum_seed.to_string());

    let mut potential_dump = None;
    let mut amplitude_dump = None;
    let mut classical_traces = Vec::with_capacity(outputs.len());
    let mut planes = Vec::new();
    let mut packets = Vec::new();
    for mut out in outputs {
        if let Some(p) = out.potential.take() {
            potential_dump = Some(p);
        }
        if let Some(mut plane) = out.plane {
            if let Some(r) = plane.raster.take() {
                amplitude_dump = Some(r);
            }
            planes.push(plane);
        }
        packets.extend(out.packet);
        classical_traces.push(out.classical);
    }

    let with_prov = |s: ObservableSeries| s.with_provenance(provenance.clone());
    let mut classical = combine_traces(&spec, &classical_traces)?;
    classical.kinetic_energy = with_prov(classical.kinetic_energy);
    classical.sigma2 = with_prov(classical.sigma2);

    let quantum = if cfg.quantum {
        let plane = combine_quantum_traces(&spec, &planes)?;
        let packet = combine_quantum_traces(&spec, &packets)?;
        Some(QuantumObservables {
            kinetic_energy: with_prov(plane.kinetic_energy),
            sigma2: packet.sigma2.map(with_prov),
            scintillation: plane.scintillation.map(with_prov),
            max_norm_drift: plane.max_norm_drift.max(packet.max_norm_drift),
        })
    } else {
        None
    };

    let times = classical.kinetic_energy.times().to_vec();
    let white_noise_ek = with_prov(white_noise_series(point, &times, ObservableKind::KineticEnergy)?);
    let white_noise_sigma2 = with_prov(white_noise_series(point, &times, ObservableKind::Sigma2)?);

    let tb_wn = branching_time(point.v0, point.tau);
    let opts = ChiOptions {
        floor: cfg.chi_floor,
        t_start: 0.0,
        t_end: if tb_wn.is_finite() { cfg.tb_multiple * tb_wn } else { t_end },
    };
    let chi_class_vs_wn = chi_indicator_with(&classical.kinetic_energy, &white_noise_ek, &opts)?.chi;
    let chi_class_vs_quant = match &quantum {
        Some(q) => Some(chi_indicator_with(&q.kinetic_energy, &classical.kinetic_energy, &opts)?.chi),
        None => None,
    };

    let scales = |method, tb: TimeScale, te: TimeScale| TimeScales {
        tau: point.tau,
        v0: point.v0,
        method,
        t_b: tb,
        t_e: te,
    };
    let classical_scales = scales(
        Method::ClassicalSim,
        extract_tb(&classical.sigma2),
        extract_te(&classical.kinetic_energy, point.v0),
    );
    let quantum_scales = quantum.as_ref().map(|q| {
        scales(
            Method::QuantumSim,
            q.sigma2.as_ref().map_or_else(TimeScale::invalid, extract_tb),
            extract_te(&q.kinetic_energy, point.v0),
        )
    });
    let finite = |v: f64| TimeScale {
        value: if v.is_finite() { v } else { f64::NAN },
        valid: v.is_finite(),
    };
    let white_noise_scales = scales(
        Method::WhiteNoise,
        finite(tb_wn),
        finite(energy_time(point.v0, point.tau)),
    );

    Ok(PointResult {
        point: point.clone(),
        grid,
        t_end,
        classical,
        quantum,
        white_noise_ek,
        white_noise_sigma2,
        chi_class_vs_wn,
        chi_class_vs_quant,
        classical_scales,
        quantum_scales,
        white_noise_scales,
        provenance,
        potential_dump,
        amplitude_dump,
    })
}

fn series_file(method: Method, kind: ObservableKind) -> String {
    format!("{method}_{kind}.csv")
}

/// Writes every output of a point into `dir` and returns the paths written.
///
/// Series go to `<method>_<kind>.csv` with a `.meta` sidecar; time scales to
/// `timescales.csv`; the summary record to `point.meta`; realization 0's
/// potential and plane-wave amplitude to `potential.bfg1` and
/// `amplitude.bfg1` when dumps are enabled.
pub fn write_point(result: &PointResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut series: Vec<&ObservableSeries> = vec![
        &result.classical.kinetic_energy,
        &result.classical.sigma2,
        &result.white_noise_ek,
        &result.white_noise_sigma2,
    ];
    if let Some(q) = &result.quantum {
        series.push(&q.kinetic_energy);
        series.extend(q.sigma2.as_ref());
        series.extend(q.scintillation.as_ref());
    }
    for s in series {
        let path = dir.join(series_file(s.method(), s.kind()));
        s.write_csv(&path)?;
        written.push(path);
    }
    let path = dir.join("timescales.csv");
    write_timescales_csv(&path, &result.time_scales(), &result.provenance)?;
    written.push(path);

    let mut record = result.provenance.clone();
    record.insert("result.chi_class_vs_wn".into(), result.chi_class_vs_wn.to_string());
    record.insert(
        "result.chi_class_vs_quant".into(),
        result.chi_class_vs_quant.map_or("nan".into(), |c| c.to_string()),
    );
    if let Some(q) = &result.quantum {
        record.insert("result.max_norm_drift".into(), q.max_norm_drift.to_string());
    }
    let path = dir.join("point.meta");
    write_meta(&path, &record)?;
    written.push(path);

    for (name, dump) in [("potential.bfg1", &result.potential_dump), ("amplitude.bfg1", &result.amplitude_dump)] {
        if let Some(grid) = dump {
            let path = dir.join(name);
            grid.write(BufWriter::new(std::fs::File::create(&path)?))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Header of the time-scales table.
pub const TIMESCALES_HEADER: &str = "tau,v0,vtilde,tb,te,method,valid";

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "nan".into()
    }
}

/// Writes `tau,v0,vtilde,tb,te,method,valid` rows; invalid entries are `nan`
/// and `valid` is true only when both crossings were found.
pub fn write_timescales_csv(path: &Path, rows: &[TimeScales], provenance: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{TIMESCALES_HEADER}")?;
    for r in rows {
        let tb = if r.t_b.valid { r.t_b.value } else { f64::NAN };
        let te = if r.t_e.valid { r.t_e.value } else { f64::NAN };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.tau,
            r.v0,
            r.vtilde(),
            fmt_value(tb),
            fmt_value(te),
            r.method,
            r.valid()
        )?;
    }
    w.flush()?;
    write_meta(&ObservableSeries::meta_path(path), provenance)
}

pub fn read_timescales_csv(path: &Path) -> Result<Vec<TimeScales>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))??;
    if header.trim() != TIMESCALES_HEADER {
        return Err(Error::Format(format!("{}: unexpected header `{header}`", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("{}:{}: malformed row", path.display(), i + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let scale = |v: f64| TimeScale {
            value: v,
            valid: v.is_finite(),
        };
        out.push(TimeScales {
            tau: num(cols[0])?,
            v0: num(cols[1])?,
            method: cols[5].parse()?,
            t_b: scale(num(cols[3])?),
            t_e: scale(num(cols[4])?),
        });
    }
    Ok(out)
}

/// `steps` values spaced evenly in `log` between `min` and `max`.
pub fn log_space(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && steps >= 1) {
        return Err(Error::Argument(format!("bad log range [{min}, {max}] with {steps} steps")));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..steps)
        .map(|i| {
            if i == 0 {
                min
            } else if i == steps - 1 {
                max
            } else {
                (a + (b - a) * i as f64 / (steps - 1) as f64).exp()
            }
        })
        .collect())
}

/// Summary of one successful sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub chi_class_vs_wn: f64,
    pub chi_class_vs_quant: Option<f64>,
    pub classical: TimeScales,
    pub quantum: Option<TimeScales>,
    pub white_noise: TimeScales,
}

impl From<&PointResult> for CellSummary {
    fn from(r: &PointResult) -> Self {
        Self {
            chi_class_vs_wn: r.chi_class_vs_wn,
            chi_class_vs_quant: r.chi_class_vs_quant,
            classical: r.classical_scales,
            quantum: r.quantum_scales,
            white_noise: r.white_noise_scales,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub point: ParameterPoint,
    /// Failure reason when the cell could not be computed.
    pub outcome: std::result::Result<CellSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Ordered by `(τ, v0)`.
    pub cells: Vec<SweepCell>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn all_succeeded(&self) -> bool {
        self.cells.iter().all(|c| c.outcome.is_ok())
    }
}

/// Runs [`run_point`] on a log-spaced `steps × steps` grid. Cells run one
/// after the other, each with its realizations in parallel, so results do not
/// depend on scheduling. A failing cell records its reason and the sweep
/// moves on. When `point_dir` is given, each cell's outputs are written to a
/// subdirectory of it. `progress` is called after every cell.
pub fn run_sweep(
    tau_range: (f64, f64),
    v0_range: (f64, f64),
    steps: usize,
    cfg: &RunConfig,
    point_dir: Option<&Path>,
    mut progress: impl FnMut(&SweepCell),
) -> Result<SweepResult> {
    let taus = log_space(tau_range.0, tau_range.1, steps)?;
    let v0s = log_space(v0_range.0, v0_range.1, steps)?;
    let mut cells = Vec::with_capacity(taus.len() * v0s.len());
    for &tau in &taus {
        for &v0 in &v0s {
            let point = ParameterPoint::new(tau, v0)?;
            let outcome = run_point(&point, cfg).and_then(|r| {
                if let Some(dir) = point_dir {
                    write_point(&r, &dir.join(point.dir_name()))?;
                }
                Ok(CellSummary::from(&r))
            });
            let cell = SweepCell {
                point,
                outcome: outcome.map_err(|e| e.to_string()),
            };
            progress(&cell);
            cells.push(cell);
        }
    }
    let mut provenance = cfg.to_provenance();
    provenance.insert("sweep.tau_range".into(), format!("{}..{}", tau_range.0, tau_range.1));
    provenance.insert("sweep.v0_range".into(), format!("{}..{}", v0_range.0, v0_range.1));
    provenance.insert("sweep.cells".into(), cells.len().to_string());
    provenance.insert("run.version".into(), env!("CARGO_PKG_VERSION").to_string());
    Ok(SweepResult { cells, provenance })
}

/// Columns of the sweep table.
pub const SWEEP_HEADER: &str = "tau,v0,vtilde,vtilde_over_bound,status,chi_class_vs_wn,chi_class_vs_quant,\
tb_class,tb_quant,tb_wn,te_class,te_quant,te_wn,tb_class_valid,tb_quant_valid,te_class_valid,te_quant_valid,reason";

/// Writes the sweep table and its `.meta` sidecar. `vtilde_over_bound` is
/// `ṽ₀/(9/2π)^{1/4}`; the white-noise validity contour is where it equals 1.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SWEEP_HEADER}")?;
    let bound = validity_bound();
    for cell in &sweep.cells {
        let p = &cell.point;
        let mut row = format!("{},{},{},{}", p.tau, p.v0, p.vtilde(), p.vtilde() / bound);
        match &cell.outcome {
            Ok(s) => {
                let q = s.quantum.as_ref();
                let tb = |t: Option<&TimeScales>| t.filter(|t| t.t_b.valid).map_or(f64::NAN, |t| t.t_b.value);
                let te = |t: Option<&TimeScales>| t.filter(|t| t.t_e.valid).map_or(f64::NAN, |t| t.t_e.value);
                write!(
                    row,
                    ",ok,{},{},{},{},{},{},{},{},{},{},{},{},",
                    fmt_value(s.chi_class_vs_wn),
                    fmt_value(s.chi_class_vs_quant.unwrap_or(f64::NAN)),
                    fmt_value(tb(Some(&s.classical))),
                    fmt_value(tb(q)),
                    fmt_value(tb(Some(&s.white_noise))),
                    fmt_value(te(Some(&s.classical))),
                    fmt_value(te(q)),
                    fmt_value(te(Some(&s.white_noise))),
                    s.classical.t_b.valid,
                    q.is_some_and(|q| q.t_b.valid),
                    s.classical.t_e.valid,
                    q.is_some_and(|q| q.t_e.valid),
                )
                .expect("writing to a String");
            }
            Err(reason) => {
                let reason = reason.replace([',', '\n'], ";");
                write!(row, ",failed,nan,nan,nan,nan,nan,nan,nan,nan,false,false,false,false,{reason}")
                    .expect("writing to a String");
            }
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    write_meta(&ObservableSeries::meta_path(path), &sweep.provenance)
}
