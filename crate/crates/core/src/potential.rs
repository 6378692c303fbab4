//! Spectral synthesis of the fluctuating random potential `ξ(x, t)`.
//!
//! A realization is built from its Fourier series on the periodic grid. Every
//! mode gets the deterministic magnitude `sqrt(F[s](k)·F[s](ω))` and a uniform
//! random phase; phases of `(k, ω)` and `(-k, -ω)` are negatives of each other
//! so the synthesized field is real. The zero mode is dropped (the field has
//! zero mean) and the remaining magnitudes are rescaled so that every
//! realization has unit variance.
//!
//! Phases are drawn from ChaCha8 streams keyed by the spatial mode, walking
//! the temporal modes in order of increasing `|ω|`. Grids that share `L` and
//! `T` but differ in sample counts therefore produce the same low-frequency
//! content from the same seed.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::fft::transform_2d;
use crate::format::{GridFile, GridKind};
use crate::grid::{CorrelationSpec, SimulationGrid};

/// Largest imaginary residue tolerated after the inverse transform.
pub const REALNESS_TOLERANCE: f64 = 1e-12;

/// Per-realization seed: a SplitMix64 finalizer applied to the master seed
/// offset by `index` golden-ratio increments.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_resolution(spec: &CorrelationSpec, grid: &SimulationGrid) -> Result<()> {
    if grid.dx() > 0.25 {
        return Err(Error::Resolution(format!(
            "dx = {} cannot resolve a unit correlation length (need <= 1/4)",
            grid.dx()
        )));
    }
    if grid.dt() > spec.tau() / 4.0 {
        return Err(Error::Resolution(format!(
            "dt = {} cannot resolve tau = {} (need dt <= tau/4)",
            grid.dt(),
            spec.tau()
        )));
    }
    Ok(())
}

/// Square roots of the envelope spectra along each axis, each normalized to
/// unit sum of squares.
fn axis_factors(spec: &CorrelationSpec, grid: &SimulationGrid) -> (Vec<f64>, Vec<f64>) {
    let env = spec.envelope();
    let normalize = |mut v: Vec<f64>| {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    };
    let space = (0..grid.n())
        .map(|j| env.spectrum(grid.wavenumber(j)).abs().sqrt())
        .collect();
    let time = (0..grid.m())
        .map(|j| (spec.tau() * env.spectrum(grid.frequency(j) * spec.tau())).abs().sqrt())
        .collect();
    (normalize(space), normalize(time))
}

/// Fourier magnitudes `|F[ξ](k_n, ω_m)|`, time-major (`M` rows of `N`) in FFT
/// bin order, normalized so that their squares sum to one.
pub fn build_spectral_amplitudes(spec: &CorrelationSpec, grid: &SimulationGrid) -> Result<Vec<f64>> {
    check_resolution(spec, grid)?;
    let (space, time) = axis_factors(spec, grid);
    let mut out = Vec::with_capacity(grid.cells());
    for b in &time {
        out.extend(space.iter().map(|a| a * b));
    }
    Ok(out)
}

/// One sampled realization of the unit-variance random field on a grid.
#[derive(Debug)]
pub struct PotentialRealization {
    spec: CorrelationSpec,
    grid: SimulationGrid,
    values: Vec<f64>,
    gradient: OnceLock<Vec<f64>>,
    seed: u64,
    index: u64,
    imag_residue: f64,
}

impl Clone for PotentialRealization {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            grid: self.grid,
            values: self.values.clone(),
            gradient: self.gradient.clone(),
            seed: self.seed,
            index: self.index,
            imag_residue: self.imag_residue,
        }
    }
}

/// Synthesizes realization `index` of the ensemble identified by `seed`.
pub fn sample_realization(
    spec: &CorrelationSpec,
    grid: &SimulationGrid,
    seed: u64,
    index: u64,
) -> Result<PotentialRealization> {
    check_resolution(spec, grid)?;
    let (n, m) = (grid.n(), grid.m());
    let (space, time) = axis_factors(spec, grid);
    let dc = space[0] * time[0];
    let scale = 1.0 / (1.0 - dc * dc).sqrt();
    let rseed = realization_seed(seed, index);

    let mut buf = vec![Complex64::default(); n * m];
    let bin = |signed: i64, len: usize| signed.rem_euclid(len as i64) as usize;
    let mut put = |ks: i64, ws: i64, amp: f64, phase: f64| {
        let c = Complex64::from_polar(amp, phase);
        buf[bin(ws, m) * n + bin(ks, n)] = c;
        buf[bin(-ws, m) * n + bin(-ks, n)] = c.conj();
    };
    let amp = |ks: i64, ws: i64| space[bin(ks, n)] * time[bin(ws, m)] * scale;
    let (half_n, half_m) = ((n / 2) as i64, (m / 2) as i64);

    for ks in 0..=half_n {
        let mut rng = ChaCha8Rng::seed_from_u64(rseed);
        rng.set_stream(ks as u64);
        let sign = |rng: &mut ChaCha8Rng| if rng.gen::<f64>() < 0.5 { 0.0 } else { PI };
        if ks == 0 || ks == half_n {
            // (ks, ws) pairs with (ks, -ws); ws = 0 and ws = M/2 are self-conjugate
            let phase = sign(&mut rng);
            if ks != 0 {
                put(ks, 0, amp(ks, 0), phase);
            }
            for ws in 1..half_m {
                let phase = rng.gen::<f64>() * TAU;
                put(ks, ws, amp(ks, ws), phase);
            }
            let phase = sign(&mut rng);
            put(ks, half_m, amp(ks, half_m), phase);
        } else {
            let phase = rng.gen::<f64>() * TAU;
            put(ks, 0, amp(ks, 0), phase);
            for w in 1..half_m {
                for ws in [w, -w] {
                    let phase = rng.gen::<f64>() * TAU;
                    put(ks, ws, amp(ks, ws), phase);
                }
            }
            let phase = rng.gen::<f64>() * TAU;
            put(ks, half_m, amp(ks, half_m), phase);
        }
    }

    transform_2d(&mut buf, n, m, FftDirection::Inverse);
    let imag_residue = buf.iter().fold(0.0f64, |acc, c| acc.max(c.im.abs()));
    if imag_residue > REALNESS_TOLERANCE {
        return Err(Error::NumericalInstability(format!(
            "synthesized field has imaginary residue {imag_residue:e}"
        )));
    }
    let values = buf.into_iter().map(|c| c.re).collect();
    Ok(PotentialRealization {
        spec: *spec,
        grid: *grid,
        values,
        gradient: OnceLock::new(),
        seed,
        index,
        imag_residue,
    })
}

// Snap coordinates that sit on a node up to round-off so node queries return
// stored values exactly.
fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < 1e-9 {
        r
    } else {
        u
    }
}

impl PotentialRealization {
    /// Wraps an externally supplied field (time-major, `M` rows of `N`).
    pub fn from_values(spec: &CorrelationSpec, grid: &SimulationGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Argument(format!(
                "expected {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("field contains non-finite values".into()));
        }
        Ok(Self {
            spec: *spec,
            grid: *grid,
            values,
            gradient: OnceLock::new(),
            seed: 0,
            index: 0,
            imag_residue: 0.0,
        })
    }

    pub fn spec(&self) -> &CorrelationSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SimulationGrid {
        &self.grid
    }

    /// Field samples, time-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Largest `|Im ξ|` seen before the imaginary part was discarded.
    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    /// Time slice `ξ(·, t_m)`.
    pub fn slice(&self, m: usize) -> &[f64] {
        let n = self.grid.n();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    /// `∂ξ/∂x` on the grid, from spectral differentiation of each time slice.
    pub fn gradient(&self) -> &[f64] {
        self.gradient.get_or_init(|| {
            let n = self.grid.n();
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            let ik: Vec<Complex64> = (0..n)
                .map(|j| {
                    if 2 * j == n {
                        Complex64::default()
                    } else {
                        Complex64::new(0.0, self.grid.wavenumber(j) / n as f64)
                    }
                })
                .collect();
            let mut row = vec![Complex64::default(); n];
            let mut out = Vec::with_capacity(self.values.len());
            for slice in self.values.chunks_exact(n) {
                row.iter_mut().zip(slice).for_each(|(c, &v)| *c = Complex64::new(v, 0.0));
                fwd.process(&mut row);
                row.iter_mut().zip(&ik).for_each(|(c, f)| *c *= f);
                inv.process(&mut row);
                out.extend(row.iter().map(|c| c.re));
            }
            out
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let t_max = self.grid.duration();
        if !(t >= 0.0 && t <= t_max * (1.0 + 1e-12)) {
            return Err(Error::Domain { t, t_max });
        }
        Ok(())
    }

    // Periodic in x, clamped in t.
    fn interpolate(&self, data: &[f64], x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !x.is_finite() {
            return Err(Error::Argument(format!("position {x} is not finite")));
        }
        let (n, m) = (self.grid.n(), self.grid.m());
        let u = snap(x.rem_euclid(self.grid.length()) / self.grid.dx());
        let j0 = (u.floor() as usize) % n;
        let fx = u - u.floor();
        let j1 = (j0 + 1) % n;

        let s = snap(t / self.grid.dt());
        let i0 = (s.floor() as usize).min(m - 1);
        let (i1, ft) = if i0 + 1 < m { (i0 + 1, s - i0 as f64) } else { (i0, 0.0) };

        let r0 = i0 * n;
        let r1 = i1 * n;
        Ok((1.0 - ft) * ((1.0 - fx) * data[r0 + j0] + fx * data[r0 + j1])
            + ft * ((1.0 - fx) * data[r1 + j0] + fx * data[r1 + j1]))
    }

    /// Bilinear interpolation of `ξ(x, t)`.
    pub fn evaluate_xi(&self, x: f64, t: f64) -> Result<f64> {
        self.interpolate(&self.values, x, t)
    }

    /// Bilinear interpolation of `∂ξ/∂x`.
    pub fn gradient_at(&self, x: f64, t: f64) -> Result<f64> {
        let grad = self.gradient();
        self.interpolate(grad, x, t)
    }

    /// Classical force `-v0 ∂ξ/∂x` at `(x, t)`.
    pub fn force_at(&self, spec: &CorrelationSpec, x: f64, t: f64) -> Result<f64> {
        if spec.is_free() {
            self.check_time(t)?;
            return Ok(0.0);
        }
        Ok(-spec.v0() * self.gradient_at(x, t)?)
    }

    /// Writes `ξ(x_j, t)` for every node into `out`, interpolating linearly
    /// between time slices.
    pub fn slice_at(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.check_time(t)?;
        let (n, m) = (self.grid.n(), self.grid.m());
        assert_eq!(out.len(), n);
        let s = snap(t / self.grid.dt());
        let i0 = (s.floor() as usize).min(m - 1);
        let ft = if i0 + 1 < m { s - i0 as f64 } else { 0.0 };
        let a = self.slice(i0);
        if ft == 0.0 {
            out.copy_from_slice(a);
        } else {
            let b = self.slice(i0 + 1);
            for ((o, &va), &vb) in out.iter_mut().zip(a).zip(b) {
                *o = (1.0 - ft) * va + ft * vb;
            }
        }
        Ok(())
    }

    pub fn to_grid_file(&self) -> GridFile {
        GridFile {
            kind: GridKind::Potential,
            n: self.grid.n() as u32,
            m: self.grid.m() as u32,
            dx: self.grid.dx(),
            dt: self.grid.dt(),
            tau: self.spec.tau(),
            v0: self.spec.v0(),
            seed: self.seed,
            index: self.index,
            values: self.values.clone(),
        }
    }

    pub fn from_grid_file(file: GridFile) -> Result<Self> {
        if file.kind != GridKind::Potential {
            return Err(Error::Format("grid file does not hold a potential".into()));
        }
        let (n, m) = (file.n as usize, file.m as usize);
        let grid = SimulationGrid::new(file.dx * n as f64, file.dt * m as f64, n, m)?;
        let spec = CorrelationSpec::new(file.v0, file.tau)?;
        let mut real = Self::from_values(&spec, &grid, file.values)?;
        real.seed = file.seed;
        real.index = file.index;
        Ok(real)
    }

    pub fn write_bfg1<W: Write>(&self, w: W) -> Result<()> {
        self.to_grid_file().write(w)
    }

    pub fn read_bfg1<R: Read>(r: R) -> Result<Self> {
        Self::from_grid_file(GridFile::read(r)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_bfg1(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_bfg1(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Space-time autocorrelation estimate on lags `|i| <= lag_x`, `|j| <= lag_t`
/// (in grid steps).
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    dx: f64,
    dt: f64,
    lag_x: usize,
    lag_t: usize,
    values: Vec<f64>,
}

impl CorrelationEstimate {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn max_lag_x(&self) -> usize {
        self.lag_x
    }

    pub fn max_lag_t(&self) -> usize {
        self.lag_t
    }

    /// Correlation at lag `(ix·dx, it·dt)`.
    pub fn at(&self, ix: i64, it: i64) -> f64 {
        assert!(ix.unsigned_abs() as usize <= self.lag_x && it.unsigned_abs() as usize <= self.lag_t);
        let width = 2 * self.lag_x + 1;
        let row = (it + self.lag_t as i64) as usize;
        let col = (ix + self.lag_x as i64) as usize;
        self.values[row * width + col]
    }

    /// `(x lag, t lag, correlation)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let (lx, lt) = (self.lag_x as i64, self.lag_t as i64);
        (-lt..=lt).flat_map(move |it| {
            (-lx..=lx).map(move |ix| (ix as f64 * self.dx, it as f64 * self.dt, self.at(ix, it)))
        })
    }
}

/// Restricted-ensemble correlation `(LT)⁻¹ ∬ ξ(x'+x, t'+t) ξ(x', t')`,
/// averaged over the given realizations, via FFT autocorrelation.
pub fn empirical_correlation(
    realizations: &[PotentialRealization],
    max_lag_x: f64,
    max_lag_t: f64,
) -> Result<CorrelationEstimate> {
    let first = realizations
        .first()
        .ok_or_else(|| Error::Argument("no realizations to correlate".into()))?;
    let grid = *first.grid();
    if realizations.iter().any(|r| r.grid() != &grid) {
        return Err(Error::Argument("realizations live on different grids".into()));
    }
    if !(0.0..=grid.length() / 2.0).contains(&max_lag_x) || !(0.0..=grid.duration() / 2.0).contains(&max_lag_t) {
        return Err(Error::Argument(format!(
            "lags ({max_lag_x}, {max_lag_t}) exceed half the domain ({}, {})",
            grid.length() / 2.0,
            grid.duration() / 2.0
        )));
    }
    let (n, m) = (grid.n(), grid.m());
    let lag_x = (max_lag_x / grid.dx() + 1e-9).floor() as usize;
    let lag_t = (max_lag_t / grid.dt() + 1e-9).floor() as usize;

    let norm = 1.0 / ((n * m) as f64).powi(2) / realizations.len() as f64;
    let mut acc = vec![0.0; n * m];
    let mut buf = vec![Complex64::default(); n * m];
    for real in realizations {
        buf.iter_mut()
            .zip(real.values())
            .for_each(|(c, &v)| *c = Complex64::new(v, 0.0));
        transform_2d(&mut buf, n, m, FftDirection::Forward);
        buf.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
        transform_2d(&mut buf, n, m, FftDirection::Inverse);
        acc.iter_mut().zip(&buf).for_each(|(a, c)| *a += c.re * norm);
    }

    let mut values = Vec::with_capacity((2 * lag_x + 1) * (2 * lag_t + 1));
    for it in -(lag_t as i64)..=lag_t as i64 {
        let row = it.rem_euclid(m as i64) as usize;
        for ix in -(lag_x as i64)..=lag_x as i64 {
            let col = ix.rem_euclid(n as i64) as usize;
            values.push(acc[row * n + col]);
        }
    }
    Ok(CorrelationEstimate {
        dx: grid.dx(),
        dt: grid.dt(),
        lag_x,
        lag_t,
        values,
    })
}

/// Potential-grid cells that parallel realization jobs may hold at once.
pub(crate) const PARALLEL_CELL_BUDGET: usize = 1 << 26;

/// Runs `job(i)` for `i in 0..count` in parallel, in batches small enough
/// that at most [`PARALLEL_CELL_BUDGET`] grid cells are alive together.
/// Results come back in index order.
pub(crate) fn map_realizations<T, F>(grid: &SimulationGrid, count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let batch = (PARALLEL_CELL_BUDGET / grid.cells().max(1)).clamp(1, count.max(1));
    let mut out = Vec::with_capacity(count);
    for start in (0..count).step_by(batch) {
        let end = (start + batch).min(count);
        let part = (start as u64..end as u64)
            .into_par_iter()
            .map(&job)
            .collect::<Result<Vec<_>>>()?;
        out.extend(part);
    }
    Ok(out)
}
