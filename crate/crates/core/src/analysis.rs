//! Series comparison, time-scale extraction and power-law fits.

use crate::error::{Error, Result};
use crate::series::{Method, ObservableKind, ObservableSeries};

/// Denominator magnitude below which a point is left out of [`chi_indicator`].
pub const DEFAULT_CHI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiResult {
    pub chi: f64,
    pub compared: usize,
    /// Points dropped because `|b(tᵢ)|` was below the floor.
    pub excluded: usize,
}

/// Options for [`chi_indicator_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiOptions {
    pub floor: f64,
    /// Only `t_start < t ≤ t_end` is compared.
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for ChiOptions {
    fn default() -> Self {
        Self {
            floor: DEFAULT_CHI_FLOOR,
            t_start: f64::NEG_INFINITY,
            t_end: f64::INFINITY,
        }
    }
}

/// `χ(a, b) = sqrt(mean over tᵢ of (1 - a(tᵢ)/b(tᵢ))²)` on the times of `a`.
///
/// `b` is linearly interpolated onto `a`'s samples when the grids differ.
/// Not symmetric in its arguments.
pub fn chi_indicator(a: &ObservableSeries, b: &ObservableSeries) -> Result<f64> {
    chi_indicator_with(a, b, &ChiOptions::default()).map(|r| r.chi)
}

pub fn chi_indicator_with(a: &ObservableSeries, b: &ObservableSeries, opts: &ChiOptions) -> Result<ChiResult> {
    let same_grid = a.times() == b.times();
    let (mut sum, mut compared, mut excluded) = (0.0, 0usize, 0usize);
    for (i, (&t, &av)) in a.times().iter().zip(a.values()).enumerate() {
        if t <= opts.t_start || t > opts.t_end {
            continue;
        }
        let bv = if same_grid {
            b.values()[i]
        } else {
            match b.interpolate(t) {
                Some(v) => v,
                None => continue,
            }
        };
        if bv.abs() < opts.floor {
            excluded += 1;
            continue;
        }
        let r = 1.0 - av / bv;
        sum += r * r;
        compared += 1;
    }
    if compared == 0 {
        return Err(Error::Argument("no comparable points between the two series".into()));
    }
    Ok(ChiResult {
        chi: (sum / compared as f64).sqrt(),
        compared,
        excluded,
    })
}

/// One extracted time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale {
    /// Quantum time units; NaN when invalid.
    pub value: f64,
    pub valid: bool,
}

impl TimeScale {
    pub fn invalid() -> Self {
        Self {
            value: f64::NAN,
            valid: false,
        }
    }

    /// Value in units of `τ`.
    pub fn rescaled(&self, tau: f64) -> f64 {
        self.value / tau
    }
}

/// Branching and energy times of one `(τ, v0)` point by one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScales {
    pub tau: f64,
    pub v0: f64,
    pub method: Method,
    pub t_b: TimeScale,
    pub t_e: TimeScale,
}

impl TimeScales {
    pub fn vtilde(&self) -> f64 {
        self.v0 * self.tau * self.tau
    }

    pub fn tb_over_tau(&self) -> f64 {
        self.t_b.rescaled(self.tau)
    }

    pub fn te_over_tau(&self) -> f64 {
        self.t_e.rescaled(self.tau)
    }

    pub fn valid(&self) -> bool {
        self.t_b.valid && self.t_e.valid
    }
}

/// First upward crossing of `threshold`, linearly interpolated. A series that
/// starts at or above the threshold has no meaningful crossing.
pub fn first_crossing(times: &[f64], values: &[f64], threshold: f64) -> TimeScale {
    match values.first() {
        Some(&v) if v < threshold => {}
        _ => return TimeScale::invalid(),
    }
    for i in 1..values.len() {
        let (v0, v1) = (values[i - 1], values[i]);
        if v1 >= threshold {
            let (t0, t1) = (times[i - 1], times[i]);
            let frac = (threshold - v0) / (v1 - v0);
            return TimeScale {
                value: t0 + frac * (t1 - t0),
                valid: true,
            };
        }
    }
    TimeScale::invalid()
}

/// `t_b`: first time with `σ_x² = 1`.
pub fn extract_tb(sigma2: &ObservableSeries) -> TimeScale {
    first_crossing(sigma2.times(), sigma2.values(), 1.0)
}

/// `t_e`: first time with `ε_k = v0`.
pub fn extract_te(ek: &ObservableSeries, v0: f64) -> TimeScale {
    first_crossing(ek.times(), ek.values(), v0)
}

/// Both time scales from one method's series.
pub fn extract_time_scales(sigma2: &ObservableSeries, ek: &ObservableSeries) -> TimeScales {
    TimeScales {
        tau: ek.tau(),
        v0: ek.v0(),
        method: ek.method(),
        t_b: extract_tb(sigma2),
        t_e: extract_te(ek, ek.v0()),
    }
}

/// Groups series by `(τ, v0, method)` and extracts both time scales from each
/// group's `σ_x²` and `ε_k`. A missing observable leaves its scale invalid.
/// Rows are ordered by `(τ, v0, method)`.
pub fn time_scales_from_series(series: &[ObservableSeries]) -> Vec<TimeScales> {
    let mut rows: Vec<TimeScales> = Vec::new();
    for s in series {
        let row = match rows
            .iter_mut()
            .find(|r| r.tau == s.tau() && r.v0 == s.v0() && r.method == s.method())
        {
            Some(r) => r,
            None => {
                rows.push(TimeScales {
                    tau: s.tau(),
                    v0: s.v0(),
                    method: s.method(),
                    t_b: TimeScale::invalid(),
                    t_e: TimeScale::invalid(),
                });
                rows.last_mut().expect("just pushed")
            }
        };
        match s.kind() {
            ObservableKind::Sigma2 => row.t_b = extract_tb(s),
            ObservableKind::KineticEnergy => row.t_e = extract_te(s, s.v0()),
            ObservableKind::Scintillation => {}
        }
    }
    rows.sort_by(|a, b| {
        a.tau
            .total_cmp(&b.tau)
            .then(a.v0.total_cmp(&b.v0))
            .then(a.method.cmp(&b.method))
    });
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual in natural-log space.
    pub residual: f64,
}

impl PowerLaw {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

/// Least-squares fit of `ln y = ln c + β ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLaw> {
    if points.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Argument(format!("power-law fit needs positive values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("power-law fit needs distinct x values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLaw {
        exponent: slope,
        prefactor: intercept.exp(),
        residual,
    })
}

/// Least-squares slope of `values` against `times` over `t_start < t ≤ t_end`.
pub fn linear_slope(series: &ObservableSeries, t_start: f64, t_end: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .times()
        .iter()
        .zip(series.values())
        .filter(|(t, _)| **t > t_start && **t <= t_end)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Argument("need at least 2 points in the slope window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stv: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    Ok(stv / stt)
}
