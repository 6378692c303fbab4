//! Time series of ensemble-averaged observables and their CSV form.
//!
//! A series is stored as `name.csv` (header `t,value,stderr`) with a sidecar
//! `name.csv.meta` holding `key = value` lines: the observable kind, the
//! method that produced it, `tau`, `v0`, the ensemble size, and whatever run
//! provenance the producer attached.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered `key = value` metadata.
pub type Provenance = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObservableKind {
    KineticEnergy,
    Sigma2,
    Scintillation,
}

impl ObservableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservableKind::KineticEnergy => "kinetic_energy",
            ObservableKind::Sigma2 => "sigma2",
            ObservableKind::Scintillation => "scintillation",
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinetic_energy" => Ok(Self::KineticEnergy),
            "sigma2" => Ok(Self::Sigma2),
            "scintillation" => Ok(Self::Scintillation),
            other => Err(Error::Format(format!("unknown observable kind `{other}`"))),
        }
    }
}

/// Which model produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ClassicalSim,
    QuantumSim,
    WhiteNoise,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClassicalSim => "classical_sim",
            Method::QuantumSim => "quantum_sim",
            Method::WhiteNoise => "white_noise",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical_sim" => Ok(Self::ClassicalSim),
            "quantum_sim" => Ok(Self::QuantumSim),
            "white_noise" => Ok(Self::WhiteNoise),
            other => Err(Error::Format(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    kind: ObservableKind,
    method: Method,
    tau: f64,
    v0: f64,
    times: Vec<f64>,
    values: Vec<f64>,
    stderr: Vec<f64>,
    ensemble_count: usize,
    provenance: Provenance,
}

impl ObservableSeries {
    /// Times must be strictly increasing and values finite.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: ObservableKind,
        method: Method,
        tau: f64,
        v0: f64,
        times: Vec<f64>,
        values: Vec<f64>,
        stderr: Vec<f64>,
        ensemble_count: usize,
    ) -> Result<Self> {
        if times.len() != values.len() || times.len() != stderr.len() {
            return Err(Error::Argument(format!(
                "column lengths differ: {} times, {} values, {} stderr",
                times.len(),
                values.len(),
                stderr.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("times must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite value at t = {}", times[i])));
        }
        Ok(Self {
            kind,
            method,
            tau,
            v0,
            times,
            values,
            stderr,
            ensemble_count,
            provenance: Provenance::new(),
        })
    }

    /// Mean and standard error across realizations, sample by sample.
    pub fn from_ensemble(
        kind: ObservableKind,
        method: Method,
        tau: f64,
        v0: f64,
        times: Vec<f64>,
        per_realization: &[Vec<f64>],
    ) -> Result<Self> {
        let count = per_realization.len();
        if count == 0 {
            return Err(Error::Argument("empty ensemble".into()));
        }
        if per_realization.iter().any(|r| r.len() != times.len()) {
            return Err(Error::Argument("realization traces differ in length".into()));
        }
        let mut values = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for i in 0..times.len() {
            let mean = per_realization.iter().map(|r| r[i]).sum::<f64>() / count as f64;
            let err = if count > 1 {
                let var = per_realization.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>()
                    / (count - 1) as f64;
                (var / count as f64).sqrt()
            } else {
                0.0
            };
            values.push(mean);
            stderr.push(err);
        }
        Self::new(kind, method, tau, v0, times, values, stderr, count)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn ensemble_count(&self) -> usize {
        self.ensemble_count
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Drops every sample from index `len` on.
    pub fn truncate(&mut self, len: usize) {
        self.times.truncate(len);
        self.values.truncate(len);
        self.stderr.truncate(len);
    }

    /// Linear interpolation; `None` outside the sampled interval.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let hi = self.times.partition_point(|&s| s < t);
        if self.times[hi] == t {
            return Some(self.values[hi]);
        }
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        Some(self.values[lo] + w * (self.values[hi] - self.values[lo]))
    }

    /// The same curve against `t / time_unit`, with values divided by
    /// `value_unit`.
    pub fn rescaled(&self, time_unit: f64, value_unit: f64) -> Self {
        let mut out = self.clone();
        out.times.iter_mut().for_each(|t| *t /= time_unit);
        out.values.iter_mut().for_each(|v| *v /= value_unit);
        out.stderr.iter_mut().for_each(|v| *v /= value_unit.abs());
        out
    }

    /// Sidecar path for a CSV path.
    pub fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn metadata(&self) -> Provenance {
        let mut meta = self.provenance.clone();
        meta.insert("kind".into(), self.kind.to_string());
        meta.insert("method".into(), self.method.to_string());
        meta.insert("tau".into(), self.tau.to_string());
        meta.insert("v0".into(), self.v0.to_string());
        meta.insert("ensemble_count".into(), self.ensemble_count.to_string());
        meta
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,value,stderr")?;
        for ((t, v), e) in self.times.iter().zip(&self.values).zip(&self.stderr) {
            writeln!(w, "{t},{v},{e}")?;
        }
        w.flush()?;
        write_meta(&Self::meta_path(path), &self.metadata())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = read_meta(&Self::meta_path(path))?;
        let get = |key: &str| {
            meta.get(key)
                .ok_or_else(|| Error::Format(format!("{}: missing `{key}`", path.display())))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("{}: `{key}` is not a number", path.display())))
        };
        let kind: ObservableKind = get("kind")?.parse()?;
        let method: Method = get("method")?.parse()?;
        let (tau, v0) = (num("tau")?, num("v0")?);
        let ensemble_count = num("ensemble_count")? as usize;

        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))??;
        if header.trim() != "t,value,stderr" {
            return Err(Error::Format(format!("{}: unexpected header `{header}`", path.display())));
        }
        let (mut times, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| {
                    Error::Format(format!("{}:{}: bad number `{s}`", path.display(), lineno + 2))
                })
            };
            if cols.len() != 3 {
                return Err(Error::Format(format!(
                    "{}:{}: expected 3 columns",
                    path.display(),
                    lineno + 2
                )));
            }
            times.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
            stderr.push(parse(cols[2])?);
        }
        let mut provenance = meta.clone();
        for key in ["kind", "method", "tau", "v0", "ensemble_count"] {
            provenance.remove(key);
        }
        Ok(Self::new(kind, method, tau, v0, times, values, stderr, ensemble_count)?.with_provenance(provenance))
    }
}

pub fn write_meta(path: &Path, meta: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in meta {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_meta(path: &Path) -> Result<Provenance> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_key_values(&text)?.into_iter().collect())
}
