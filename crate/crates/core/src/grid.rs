//! Physical parameters of the random potential and the space-time grid it
//! lives on.
//!
//! Everything is expressed in quantum units: lengths in units of the
//! correlation length, times in units of `m λ² / ħ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Shape of the two-point correlation along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Envelope {
    /// `s(z) = exp(-z²/2)`.
    #[default]
    Gaussian,
}

impl Envelope {
    /// Correlation envelope `s(z)`.
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Envelope::Gaussian => (-0.5 * z * z).exp(),
        }
    }

    /// Continuous Fourier transform `∫ s(z) e^{-iqz} dz` of the unit-width
    /// envelope.
    pub fn spectrum(self, q: f64) -> f64 {
        match self {
            Envelope::Gaussian => (2.0 * PI).sqrt() * (-0.5 * q * q).exp(),
        }
    }
}

/// Strength and correlation time of the fluctuating potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSpec {
    v0: f64,
    tau: f64,
    vtilde: f64,
    envelope: Envelope,
}

impl CorrelationSpec {
    /// `v0 = 0` is accepted and describes a free particle.
    pub fn new(v0: f64, tau: f64) -> Result<Self> {
        if !v0.is_finite() || v0 < 0.0 {
            return Err(Error::Argument(format!("v0 must be finite and >= 0, got {v0}")));
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::Argument(format!("tau must be finite and > 0, got {tau}")));
        }
        Ok(Self {
            v0,
            tau,
            vtilde: v0 * tau * tau,
            envelope: Envelope::Gaussian,
        })
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The classical parameter `v0·τ²`.
    pub fn vtilde(&self) -> f64 {
        self.vtilde
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    pub fn is_free(&self) -> bool {
        self.v0 == 0.0
    }
}

/// Smallest number of samples per correlation length accepted for dynamics.
pub const MIN_SAMPLES_PER_LENGTH: f64 = 40.0;

/// Periodic space-time grid `[0, L) × [0, T)` with `N × M` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    length: f64,
    duration: f64,
    n: usize,
    m: usize,
}

impl SimulationGrid {
    /// Both sample counts must be powers of two.
    pub fn new(length: f64, duration: f64, n: usize, m: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be > 0, got {length}")));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidGrid(format!("duration must be > 0, got {duration}")));
        }
        for (name, count) in [("N", n), ("M", m)] {
            if count < 2 || !count.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be a power of two >= 2, got {count}"
                )));
            }
        }
        Ok(Self {
            length,
            duration,
            n,
            m,
        })
    }

    /// Grid with spacing `dx = L/N`, time step `dt`, and the smallest
    /// power-of-two `M` such that `M·dt >= t_end`.
    pub fn covering(length: f64, n: usize, dt: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be > 0, got {dt}")));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidGrid(format!("t_end must be > 0, got {t_end}")));
        }
        let steps = (t_end / dt * (1.0 - 1e-12)).ceil().max(2.0) as usize;
        let m = steps.next_power_of_two();
        Self::new(length, m as f64 * dt, n, m)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.m as f64
    }

    pub fn cells(&self) -> usize {
        self.n * self.m
    }

    /// Node position `x_j = j·dx`.
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Angular wave number of FFT bin `j` (signed frequency ordering).
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * signed_index(j, self.n) as f64 / self.length
    }

    /// Angular frequency of FFT bin `j` along the time axis.
    pub fn frequency(&self, j: usize) -> f64 {
        2.0 * PI * signed_index(j, self.m) as f64 / self.duration
    }

    /// Checks the resolution and stability requirements for propagating
    /// particles or waves on this grid: at least 40 samples per correlation
    /// length and `dt/dx² <= 1`.
    pub fn check_dynamics(&self) -> Result<()> {
        let dx = self.dx();
        if dx > 1.0 / MIN_SAMPLES_PER_LENGTH * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "dx = {dx} exceeds 1/{MIN_SAMPLES_PER_LENGTH}"
            )));
        }
        let ratio = self.dt() / (dx * dx);
        if ratio > 1.0 + 1e-9 {
            return Err(Error::InvalidGrid(format!("dt/dx² = {ratio} exceeds 1")));
        }
        Ok(())
    }
}

/// Maps FFT bin `j` of an `n`-point transform onto `-n/2+1 ..= n/2`.
pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}
