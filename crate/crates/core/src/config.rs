//! Run configuration: documented defaults, `key = value` files and overrides.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `grid.L` | 100 | domain length |
//! | `grid.N` | 4096 | spatial samples (power of two) |
//! | `grid.dt_ratio` | 1 | `dt = dt_ratio·dx²` |
//! | `grid.samples_per_tau` | 4 | additionally `dt <= τ/samples_per_tau` |
//! | `grid.max_cells` | 2²⁵ | largest potential grid `N·M` a point may allocate |
//! | `window.tb_multiple` | 5 | run to `tb_multiple·t_b` of the white-noise model |
//! | `window.t_end` | unset | fixed end time, overrides `tb_multiple` |
//! | `ensemble.realizations` | 20 | potentials per point |
//! | `ensemble.particles` | 1000 | classical particles per potential |
//! | `seed.master` | 1 | master seed |
//! | `quantum.enabled` | true | also run the wave propagation |
//! | `quantum.share_seeds` | true | quantum runs reuse the classical potentials |
//! | `analysis.chi_floor` | 1e-12 | denominator floor of the χ indicator |
//! | `sweep.tau_min`, `sweep.tau_max` | 0.01, 1 | sweep range in `τ` |
//! | `sweep.v0_min`, `sweep.v0_max` | 10, 1000 | sweep range in `v0` |
//! | `sweep.steps` | 8 | log-spaced values per axis |
//! | `output.dir` | `out` | output directory |
//! | `output.dumps` | true | write the potential and amplitude grids of realization 0 |

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::series::{parse_key_values, Provenance};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub length: f64,
    pub n: usize,
    pub dt_ratio: f64,
    pub samples_per_tau: f64,
    pub max_cells: usize,
    pub tb_multiple: f64,
    pub t_end: Option<f64>,
    pub realizations: usize,
    pub particles: usize,
    pub master_seed: u64,
    pub quantum: bool,
    pub share_seeds: bool,
    pub chi_floor: f64,
    pub tau_range: (f64, f64),
    pub v0_range: (f64, f64),
    pub sweep_steps: usize,
    pub output_dir: PathBuf,
    pub dumps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            length: 100.0,
            n: 4096,
            dt_ratio: 1.0,
            samples_per_tau: 4.0,
            max_cells: 1 << 25,
            tb_multiple: 5.0,
            t_end: None,
            realizations: 20,
            particles: 1000,
            master_seed: 1,
            quantum: true,
            share_seeds: true,
            chi_floor: 1e-12,
            tau_range: (0.01, 1.0),
            v0_range: (10.0, 1000.0),
            sweep_steps: 8,
            output_dir: PathBuf::from("out"),
            dumps: true,
        }
    }
}

/// Every recognized key, in documentation order.
pub const KEYS: &[&str] = &[
    "grid.L",
    "grid.N",
    "grid.dt_ratio",
    "grid.samples_per_tau",
    "grid.max_cells",
    "window.tb_multiple",
    "window.t_end",
    "ensemble.realizations",
    "ensemble.particles",
    "seed.master",
    "quantum.enabled",
    "quantum.share_seeds",
    "analysis.chi_floor",
    "sweep.tau_min",
    "sweep.tau_max",
    "sweep.v0_min",
    "sweep.v0_max",
    "sweep.steps",
    "output.dir",
    "output.dumps",
];

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not a number")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(key, format!("must be a positive number, got {value}")));
    }
    Ok(v)
}

fn count(key: &str, value: &str) -> Result<usize> {
    let v: usize = value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not a non-negative integer")))?;
    if v == 0 {
        return Err(Error::config(key, "must be at least 1"));
    }
    Ok(v)
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("`{value}` is not a boolean"))),
    }
}

impl RunConfig {
    /// Full-size ensembles and resolution: 104 realizations × 4000 particles
    /// on `N = 8192`.
    pub fn paper_scale() -> Self {
        Self {
            n: 8192,
            realizations: 104,
            particles: 4000,
            max_cells: 1 << 28,
            ..Self::default()
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "grid.L" => self.length = positive(key, value)?,
            "grid.N" => {
                let n = count(key, value)?;
                if !n.is_power_of_two() || n < 2 {
                    return Err(Error::config(key, format!("must be a power of two >= 2, got {n}")));
                }
                self.n = n;
            }
            "grid.dt_ratio" => {
                let r = positive(key, value)?;
                if r > 1.0 {
                    return Err(Error::config(key, format!("must be <= 1, got {r}")));
                }
                self.dt_ratio = r;
            }
            "grid.samples_per_tau" => {
                let s = positive(key, value)?;
                if s < 4.0 {
                    return Err(Error::config(key, format!("must be >= 4, got {s}")));
                }
                self.samples_per_tau = s;
            }
            "grid.max_cells" => self.max_cells = count(key, value)?,
            "window.tb_multiple" => self.tb_multiple = positive(key, value)?,
            "window.t_end" => {
                self.t_end = match value {
                    "" | "none" | "auto" => None,
                    v => Some(positive(key, v)?),
                }
            }
            "ensemble.realizations" => self.realizations = count(key, value)?,
            "ensemble.particles" => self.particles = count(key, value)?,
            "seed.master" => {
                self.master_seed = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{value}` is not an unsigned 64-bit integer")))?
            }
            "quantum.enabled" => self.quantum = flag(key, value)?,
            "quantum.share_seeds" => self.share_seeds = flag(key, value)?,
            "analysis.chi_floor" => self.chi_floor = positive(key, value)?,
            "sweep.tau_min" => self.tau_range.0 = positive(key, value)?,
            "sweep.tau_max" => self.tau_range.1 = positive(key, value)?,
            "sweep.v0_min" => self.v0_range.0 = positive(key, value)?,
            "sweep.v0_max" => self.v0_range.1 = positive(key, value)?,
            "sweep.steps" => self.sweep_steps = count(key, value)?,
            "output.dir" => {
                if value.is_empty() {
                    return Err(Error::config(key, "must not be empty"));
                }
                self.output_dir = PathBuf::from(value);
            }
            "output.dumps" => self.dumps = flag(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Current value of `key` in the textual form accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "grid.L" => self.length.to_string(),
            "grid.N" => self.n.to_string(),
            "grid.dt_ratio" => self.dt_ratio.to_string(),
            "grid.samples_per_tau" => self.samples_per_tau.to_string(),
            "grid.max_cells" => self.max_cells.to_string(),
            "window.tb_multiple" => self.tb_multiple.to_string(),
            "window.t_end" => self.t_end.map_or_else(|| "auto".to_string(), |t| t.to_string()),
            "ensemble.realizations" => self.realizations.to_string(),
            "ensemble.particles" => self.particles.to_string(),
            "seed.master" => self.master_seed.to_string(),
            "quantum.enabled" => self.quantum.to_string(),
            "quantum.share_seeds" => self.share_seeds.to_string(),
            "analysis.chi_floor" => self.chi_floor.to_string(),
            "sweep.tau_min" => self.tau_range.0.to_string(),
            "sweep.tau_max" => self.tau_range.1.to_string(),
            "sweep.v0_min" => self.v0_range.0.to_string(),
            "sweep.v0_max" => self.v0_range.1.to_string(),
            "sweep.steps" => self.sweep_steps.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "output.dumps" => self.dumps.to_string(),
            _ => return None,
        })
    }

    /// Every key with its resolved value, prefixed `config.`.
    pub fn to_provenance(&self) -> Provenance {
        KEYS.iter()
            .map(|k| (format!("config.{k}"), self.get(k).unwrap_or_default()))
            .collect()
    }

    /// Rebuilds a config from the `config.` entries of a provenance block.
    pub fn from_provenance(meta: &Provenance) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in meta {
            if let Some(key) = k.strip_prefix("config.") {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// `min(dt_ratio·dx², τ/samples_per_tau)`.
    pub fn time_step(&self, tau: f64) -> f64 {
        let dx = self.dx();
        (self.dt_ratio * dx * dx).min(tau / self.samples_per_tau)
    }

    /// Grid covering `t_end` at the configured resolution, refusing grids
    /// beyond `grid.max_cells`.
    pub fn grid_for(&self, tau: f64, t_end: f64) -> Result<SimulationGrid> {
        let grid = SimulationGrid::covering(self.length, self.n, self.time_step(tau), t_end)?;
        if grid.cells() > self.max_cells {
            return Err(Error::config(
                "grid.max_cells",
                format!(
                    "a {}x{} potential grid ({} cells) is needed to reach t = {t_end}, limit is {}",
                    grid.n(),
                    grid.m(),
                    grid.cells(),
                    self.max_cells
                ),
            ));
        }
        Ok(grid)
    }
}

/// Layers a config file and then `(key, value)` overrides on top of `base`.
pub fn resolve_config(base: RunConfig, file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = base;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in parse_key_values(&text)? {
            cfg.set(&k, &v)?;
        }
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// Splits a `key=value` override.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "expected key=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
