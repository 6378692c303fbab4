//! Classical particles under `ẍ = -v0 ∂ξ/∂x`, integrated with velocity Verlet.

use crate::error::{Error, Result};
use crate::grid::{CorrelationSpec, SimulationGrid};
use crate::potential::{map_realizations, sample_realization, PotentialRealization};
use crate::series::{Method, ObservableKind, ObservableSeries};

/// A time-dependent force on a periodic line.
pub trait ForceField {
    fn force(&self, x: f64, t: f64) -> Result<f64>;

    /// Largest time at which the field is defined.
    fn t_max(&self) -> f64;
}

/// Force from a sampled potential realization.
pub struct PotentialForce<'a> {
    pub realization: &'a PotentialRealization,
    pub spec: &'a CorrelationSpec,
}

impl ForceField for PotentialForce<'_> {
    fn force(&self, x: f64, t: f64) -> Result<f64> {
        self.realization.force_at(self.spec, x, t)
    }

    fn t_max(&self) -> f64 {
        self.realization.grid().duration()
    }
}

/// The force of one time slice, held fixed forever.
pub struct FrozenForce<'a> {
    pub realization: &'a PotentialRealization,
    pub spec: &'a CorrelationSpec,
    pub at_time: f64,
}

impl ForceField for FrozenForce<'_> {
    fn force(&self, x: f64, _t: f64) -> Result<f64> {
        self.realization.force_at(self.spec, x, self.at_time)
    }

    fn t_max(&self) -> f64 {
        f64::INFINITY
    }
}

/// Initial placement of particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// `x_j = (j + 1/2)·L/N_p`, all at rest.
    #[default]
    EvenlySpaced,
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    length: f64,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    displacements: Vec<f64>,
    time: f64,
}

pub fn init_ensemble(n_particles: usize, length: f64, mode: InitMode) -> Result<ParticleEnsemble> {
    if n_particles == 0 {
        return Err(Error::Argument("need at least one particle".into()));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Argument(format!("domain length must be > 0, got {length}")));
    }
    let positions = match mode {
        InitMode::EvenlySpaced => (0..n_particles)
            .map(|j| (j as f64 + 0.5) * length / n_particles as f64)
            .collect(),
    };
    Ok(ParticleEnsemble {
        length,
        positions,
        velocities: vec![0.0; n_particles],
        displacements: vec![0.0; n_particles],
        time: 0.0,
    })
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Positions wrapped into `[0, L)`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// Unwrapped `x(t) - x(0)`.
    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `<ẋ²/2>`.
    pub fn kinetic_energy(&self) -> f64 {
        self.velocities.iter().map(|v| 0.5 * v * v).sum::<f64>() / self.len() as f64
    }

    /// `<(x(t) - x(0))²>`.
    pub fn sigma2(&self) -> f64 {
        self.displacements.iter().map(|d| d * d).sum::<f64>() / self.len() as f64
    }

    pub fn mean_velocity(&self) -> f64 {
        self.velocities.iter().sum::<f64>() / self.len() as f64
    }

    /// One kick-drift-kick step, with the force evaluated at `t` and `t + dt`.
    pub fn verlet_step<F: ForceField + ?Sized>(&mut self, field: &F, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Argument(format!("dt must be > 0, got {dt}")));
        }
        let t0 = self.time;
        let t1 = t0 + dt;
        if t1 > field.t_max() * (1.0 + 1e-12) {
            return Err(Error::Domain { t: t1, t_max: field.t_max() });
        }
        let half = 0.5 * dt;
        for i in 0..self.positions.len() {
            let f0 = field.force(self.positions[i], t0)?;
            let v_half = self.velocities[i] + half * f0;
            let step = v_half * dt;
            self.displacements[i] += step;
            self.positions[i] = (self.positions[i] + step).rem_euclid(self.length);
            // rem_euclid can round up to exactly L
            if self.positions[i] >= self.length {
                self.positions[i] = 0.0;
            }
            let f1 = field.force(self.positions[i], t1)?;
            self.velocities[i] = v_half + half * f1;
        }
        self.time = t1;
        Ok(())
    }
}

/// Per-step observables of one realization.
#[derive(Debug, Clone)]
pub struct ClassicalTrace {
    pub times: Vec<f64>,
    pub kinetic_energy: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Number of grid steps needed to reach `t_end`.
pub(crate) fn steps_to(grid: &SimulationGrid, t_end: f64) -> Result<usize> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Argument(format!("t_end must be > 0, got {t_end}")));
    }
    if t_end > grid.duration() * (1.0 + 1e-12) {
        return Err(Error::Domain { t: t_end, t_max: grid.duration() });
    }
    Ok(((t_end / grid.dt()) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// Evolves a fresh evenly spaced ensemble through one realization.
pub fn run_realization(
    realization: &PotentialRealization,
    spec: &CorrelationSpec,
    n_particles: usize,
    t_end: f64,
) -> Result<ClassicalTrace> {
    let grid = realization.grid();
    let steps = steps_to(grid, t_end)?;
    let dt = grid.dt();
    let mut ensemble = init_ensemble(n_particles, grid.length(), InitMode::EvenlySpaced)?;
    let field = PotentialForce { realization, spec };
    let mut trace = ClassicalTrace {
        times: Vec::with_capacity(steps + 1),
        kinetic_energy: Vec::with_capacity(steps + 1),
        sigma2: Vec::with_capacity(steps + 1),
    };
    let mut record = |e: &ParticleEnsemble, step: usize| {
        trace.times.push(step as f64 * dt);
        trace.kinetic_energy.push(e.kinetic_energy());
        trace.sigma2.push(e.sigma2());
    };
    record(&ensemble, 0);
    for step in 1..=steps {
        ensemble.verlet_step(&field, dt)?;
        record(&ensemble, step);
    }
    Ok(trace)
}

/// Ensemble-averaged `ε_k(t)` and `σ_x²(t)`.
#[derive(Debug, Clone)]
pub struct ClassicalObservables {
    pub kinetic_energy: ObservableSeries,
    pub sigma2: ObservableSeries,
}

/// Combines per-realization traces in index order.
pub fn combine_traces(spec: &CorrelationSpec, traces: &[ClassicalTrace]) -> Result<ClassicalObservables> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Argument("no realizations".into()))?;
    let ek: Vec<Vec<f64>> = traces.iter().map(|t| t.kinetic_energy.clone()).collect();
    let s2: Vec<Vec<f64>> = traces.iter().map(|t| t.sigma2.clone()).collect();
    let build = |kind, data: &[Vec<f64>]| {
        ObservableSeries::from_ensemble(kind, Method::ClassicalSim, spec.tau(), spec.v0(), first.times.clone(), data)
    };
    Ok(ClassicalObservables {
        kinetic_energy: build(ObservableKind::KineticEnergy, &ek)?,
        sigma2: build(ObservableKind::Sigma2, &s2)?,
    })
}

/// Runs `n_realizations` independent potentials (realization `i` drawn from
/// `(master_seed, i)`) and averages the observables. Realizations run in
/// parallel; the reduction is in index order, so results do not depend on
/// the thread count.
pub fn integrate_ensemble(
    spec: &CorrelationSpec,
    grid: &SimulationGrid,
    master_seed: u64,
    n_realizations: usize,
    n_particles: usize,
    t_end: f64,
) -> Result<ClassicalObservables> {
    grid.check_dynamics()?;
    if n_realizations == 0 {
        return Err(Error::Argument("need at least one realization".into()));
    }
    steps_to(grid, t_end)?;
    let traces = map_realizations(grid, n_realizations, |i| {
        let real = sample_realization(spec, grid, master_seed, i)?;
        run_realization(&real, spec, n_particles, t_end)
    })?;
    combine_traces(spec, &traces)
}
