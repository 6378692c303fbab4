//! Split-step Fourier propagation of `i ∂ψ/∂t = -½ ∂²ψ/∂x² + v0 ξ(x, t) ψ`.

use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::classical::steps_to;
use crate::error::{Error, Result};
use crate::format::{GridFile, GridKind};
use crate::grid::{CorrelationSpec, SimulationGrid};
use crate::potential::{map_realizations, sample_realization, PotentialRealization};
use crate::series::{Method, ObservableKind, ObservableSeries};

/// Largest tolerated `|‖ψ‖² - 1|` at any step.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// `|ψ|` at the domain edge beyond which `σ_x²` is no longer trusted.
pub const BOUNDARY_AMPLITUDE: f64 = 1e-4;
/// Smallest domain accepted for a Gaussian packet.
pub const MIN_PACKET_DOMAIN: f64 = 20.0;
/// Raster dumps are subsampled to at most this many samples per axis.
pub const MAX_RASTER_SIDE: usize = 2048;

/// Wave function on a periodic grid, normalized to `Σ|ψ|² dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    length: f64,
    psi: Vec<Complex64>,
    time: f64,
}

impl WaveState {
    /// `ψ(x, 0) ∝ exp(-(x - L/2)²/2)`, so that `σ_x²(0) = 1/2` and
    /// `ε_k(0) = 1/4`.
    pub fn init_gaussian(n: usize, length: f64) -> Result<Self> {
        if length < MIN_PACKET_DOMAIN {
            return Err(Error::DomainTooSmall(format!(
                "a Gaussian packet needs L >= {MIN_PACKET_DOMAIN}, got {length}"
            )));
        }
        let dx = length / n as f64;
        let center = length / 2.0;
        let psi = (0..n)
            .map(|j| {
                let x = j as f64 * dx - center;
                Complex64::new((-0.5 * x * x).exp(), 0.0)
            })
            .collect();
        Ok(Self::normalized(length, psi))
    }

    /// `ψ = 1/sqrt(L)`.
    pub fn init_plane_wave(n: usize, length: f64) -> Result<Self> {
        if n == 0 || !(length > 0.0) {
            return Err(Error::Argument("plane wave needs n > 0 and L > 0".into()));
        }
        Ok(Self::normalized(length, vec![Complex64::new(1.0, 0.0); n]))
    }

    /// Arbitrary samples `ψ(j·L/n)`, rescaled to unit norm.
    pub fn from_amplitudes(length: f64, psi: Vec<Complex64>) -> Result<Self> {
        if psi.is_empty() || !(length > 0.0) {
            return Err(Error::Argument("wave state needs samples and L > 0".into()));
        }
        let total: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Argument("wave state must have finite nonzero norm".into()));
        }
        Ok(Self::normalized(length, psi))
    }

    fn normalized(length: f64, mut psi: Vec<Complex64>) -> Self {
        let dx = length / psi.len() as f64;
        let norm = (psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt();
        psi.iter_mut().for_each(|c| *c /= norm);
        Self { length, psi, time: 0.0 }
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.psi.len() as f64
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `Σ|ψ|² dx`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dx()
    }

    /// Second moment of `|ψ|²` about `L/2`, and whether the packet is still
    /// clear of the domain edge.
    pub fn displacement2(&self) -> (f64, bool) {
        let dx = self.dx();
        let center = self.length / 2.0;
        let (mut m2, mut norm) = (0.0, 0.0);
        for (j, c) in self.psi.iter().enumerate() {
            let d = j as f64 * dx - center;
            let p = c.norm_sqr();
            m2 += d * d * p;
            norm += p;
        }
        let edge = self.psi[0].norm().max(self.psi[self.psi.len() - 1].norm());
        (m2 / norm, edge <= BOUNDARY_AMPLITUDE)
    }

    /// `S = <I²>/<I>² - 1` over the grid, `I = |ψ|²`.
    pub fn scintillation(&self) -> f64 {
        let n = self.psi.len() as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for c in &self.psi {
            let i = c.norm_sqr();
            s1 += i;
            s2 += i * i;
        }
        let mean = s1 / n;
        (s2 / n) / (mean * mean) - 1.0
    }
}

/// Strang splitting: half potential phase at `t + dt/2`, full kinetic phase,
/// half potential phase.
pub struct SplitStepPropagator<'a> {
    v0: f64,
    potential: Option<&'a PotentialRealization>,
    dt: f64,
    t_max: f64,
    wavenumbers: Vec<f64>,
    kinetic_phase: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    slice: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl<'a> SplitStepPropagator<'a> {
    /// `potential` may be `None` only for a free spec.
    pub fn new(spec: &CorrelationSpec, grid: &SimulationGrid, potential: Option<&'a PotentialRealization>) -> Result<Self> {
        if potential.is_none() && !spec.is_free() {
            return Err(Error::Argument("a potential realization is required when v0 > 0".into()));
        }
        if let Some(p) = potential {
            if p.grid() != grid {
                return Err(Error::Argument("potential realization lives on a different grid".into()));
            }
        }
        let n = grid.n();
        let dt = grid.dt();
        let wavenumbers: Vec<f64> = (0..n).map(|j| grid.wavenumber(j)).collect();
        let kinetic_phase = wavenumbers
            .iter()
            .map(|k| Complex64::from_polar(1.0 / n as f64, -0.5 * k * k * dt))
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            v0: spec.v0(),
            potential: if spec.is_free() { None } else { potential },
            dt,
            t_max: grid.duration(),
            wavenumbers,
            kinetic_phase,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            slice: vec![0.0; n],
            spectrum: vec![Complex64::default(); n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn potential_half_phase(&mut self, psi: &mut [Complex64]) {
        if self.potential.is_none() {
            return;
        }
        let scale = -self.v0 * 0.5 * self.dt;
        for (c, &xi) in psi.iter_mut().zip(&self.slice) {
            *c *= Complex64::from_polar(1.0, scale * xi);
        }
    }

    /// Advances `state` by one step and checks that the norm is preserved.
    pub fn split_step(&mut self, state: &mut WaveState) -> Result<()> {
        if state.psi.len() != self.wavenumbers.len() {
            return Err(Error::Argument("wave function and propagator grids differ".into()));
        }
        let t1 = state.time + self.dt;
        if t1 > self.t_max * (1.0 + 1e-12) {
            return Err(Error::Domain { t: t1, t_max: self.t_max });
        }
        if let Some(p) = self.potential {
            p.slice_at(state.time + 0.5 * self.dt, &mut self.slice)?;
        }
        self.potential_half_phase(&mut state.psi);
        self.forward.process(&mut state.psi);
        state.psi.iter_mut().zip(&self.kinetic_phase).for_each(|(c, k)| *c *= k);
        self.inverse.process(&mut state.psi);
        self.potential_half_phase(&mut state.psi);
        state.time = t1;

        let drift = (state.norm() - 1.0).abs();
        if !(drift <= NORM_TOLERANCE) {
            return Err(Error::NumericalInstability(format!(
                "norm drifted by {drift:e} at t = {t1}"
            )));
        }
        Ok(())
    }

    /// `ε_k = Σ(k²/2)|ψ̂|² / Σ|ψ̂|²`.
    pub fn kinetic_energy(&mut self, state: &WaveState) -> f64 {
        self.spectrum.copy_from_slice(&state.psi);
        self.forward.process(&mut self.spectrum);
        let (mut num, mut den) = (0.0, 0.0);
        for (c, k) in self.spectrum.iter().zip(&self.wavenumbers) {
            let p = c.norm_sqr();
            num += 0.5 * k * k * p;
            den += p;
        }
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Gaussian,
    PlaneWave,
}

/// Per-step observables of one propagation. Gaussian runs record `σ_x²` up to
/// the first step where the packet touches the edge; plane-wave runs record
/// the scintillation index.
#[derive(Debug, Clone)]
pub struct QuantumTrace {
    pub times: Vec<f64>,
    pub kinetic_energy: Vec<f64>,
    pub sigma2: Option<Vec<f64>>,
    pub scintillation: Option<Vec<f64>>,
    pub max_norm_drift: f64,
    /// `|ψ(x, t)|` subsampled to at most [`MAX_RASTER_SIDE`] per axis.
    pub raster: Option<GridFile>,
}

fn raster_stride(count: usize) -> usize {
    count.div_ceil(MAX_RASTER_SIDE).max(1)
}

/// Propagates one initial state to `t_end`, recording observables after
/// every step.
pub fn propagate_and_observe(
    spec: &CorrelationSpec,
    grid: &SimulationGrid,
    potential: Option<&PotentialRealization>,
    initial: InitialState,
    t_end: f64,
    with_raster: bool,
) -> Result<QuantumTrace> {
    grid.check_dynamics()?;
    let steps = steps_to(grid, t_end)?;
    let mut state = match initial {
        InitialState::Gaussian => WaveState::init_gaussian(grid.n(), grid.length())?,
        InitialState::PlaneWave => WaveState::init_plane_wave(grid.n(), grid.length())?,
    };
    let mut prop = SplitStepPropagator::new(spec, grid, potential)?;
    let dt = grid.dt();

    let (sx, st) = (raster_stride(grid.n()), raster_stride(steps + 1));
    let mut raster_values = Vec::new();
    let mut raster_rows = 0u32;

    let mut trace = QuantumTrace {
        times: Vec::with_capacity(steps + 1),
        kinetic_energy: Vec::with_capacity(steps + 1),
        sigma2: (initial == InitialState::Gaussian).then(Vec::new),
        scintillation: (initial == InitialState::PlaneWave).then(Vec::new),
        max_norm_drift: (state.norm() - 1.0).abs(),
        raster: None,
    };
    let mut sigma_open = true;
    for step in 0..=steps {
        if step > 0 {
            prop.split_step(&mut state)?;
            trace.max_norm_drift = trace.max_norm_drift.max((state.norm() - 1.0).abs());
        }
        trace.times.push(step as f64 * dt);
        trace.kinetic_energy.push(prop.kinetic_energy(&state));
        if let Some(s2) = trace.sigma2.as_mut() {
            if sigma_open {
                let (m2, inside) = state.displacement2();
                if inside {
                    s2.push(m2);
                } else {
                    sigma_open = false;
                }
            }
        }
        if let Some(s) = trace.scintillation.as_mut() {
            s.push(state.scintillation());
        }
        if with_raster && step % st == 0 {
            raster_values.extend(state.psi().iter().step_by(sx).map(|c| c.norm()));
            raster_rows += 1;
        }
    }
    if with_raster {
        trace.raster = Some(GridFile {
            kind: GridKind::Amplitude,
            n: grid.n().div_ceil(sx) as u32,
            m: raster_rows,
            dx: grid.dx() * sx as f64,
            dt: dt * st as f64,
            tau: spec.tau(),
            v0: spec.v0(),
            seed: potential.map_or(0, |p| p.seed()),
            index: potential.map_or(0, |p| p.index()),
            values: raster_values,
        });
    }
    Ok(trace)
}

/// Ensemble-averaged quantum observables.
#[derive(Debug, Clone)]
pub struct QuantumObservables {
    pub kinetic_energy: ObservableSeries,
    /// Truncated to the shortest valid trace.
    pub sigma2: Option<ObservableSeries>,
    pub scintillation: Option<ObservableSeries>,
    pub max_norm_drift: f64,
}

/// Combines traces in index order.
pub fn combine_quantum_traces(spec: &CorrelationSpec, traces: &[QuantumTrace]) -> Result<QuantumObservables> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Argument("no realizations".into()))?;
    let build = |kind, data: Vec<Vec<f64>>, len: usize| {
        let data: Vec<Vec<f64>> = data.into_iter().map(|mut d| {
            d.truncate(len);
            d
        }).collect();
        ObservableSeries::from_ensemble(kind, Method::QuantumSim, spec.tau(), spec.v0(), first.times[..len].to_vec(), &data)
    };
    let full = first.times.len();
    let kinetic_energy = build(
        ObservableKind::KineticEnergy,
        traces.iter().map(|t| t.kinetic_energy.clone()).collect(),
        full,
    )?;
    let sigma2 = match traces.iter().map(|t| t.sigma2.clone()).collect::<Option<Vec<_>>>() {
        Some(all) => {
            let len = all.iter().map(Vec::len).min().unwrap_or(0);
            if len == 0 {
                return Err(Error::DomainTooSmall("the packet reaches the domain edge immediately".into()));
            }
            Some(build(ObservableKind::Sigma2, all, len)?)
        }
        None => None,
    };
    let scintillation = match traces.iter().map(|t| t.scintillation.clone()).collect::<Option<Vec<_>>>() {
        Some(all) => Some(build(ObservableKind::Scintillation, all, full)?),
        None => None,
    };
    Ok(QuantumObservables {
        kinetic_energy,
        sigma2,
        scintillation,
        max_norm_drift: traces.iter().map(|t| t.max_norm_drift).fold(0.0, f64::max),
    })
}

/// Propagates one state per realization `(master_seed, i)` and averages.
pub fn quantum_ensemble(
    spec: &CorrelationSpec,
    grid: &SimulationGrid,
    master_seed: u64,
    n_realizations: usize,
    initial: InitialState,
    t_end: f64,
) -> Result<QuantumObservables> {
    grid.check_dynamics()?;
    if n_realizations == 0 {
        return Err(Error::Argument("need at least one realization".into()));
    }
    steps_to(grid, t_end)?;
    let traces = map_realizations(grid, n_realizations, |i| {
        if spec.is_free() {
            propagate_and_observe(spec, grid, None, initial, t_end, false)
        } else {
            let real = sample_realization(spec, grid, master_seed, i)?;
            propagate_and_observe(spec, grid, Some(&real), initial, t_end, false)
        }
    })?;
    combine_quantum_traces(spec, &traces)
}
