//! Acceptance suite: one line per criterion, tolerances pinned below.
//!
//! Exits 0 after reporting unless `BRANCHFLOW_STRICT_ACCEPTANCE=1`, in which
//! case any failing criterion makes the process exit 1.

use std::collections::HashMap;
use std::time::Instant;

use branchflow::analysis::{chi_indicator_with, fit_power_law, linear_slope, ChiOptions};
use branchflow::grid::{CorrelationSpec, SimulationGrid};
use branchflow::potential::{empirical_correlation, sample_realization};
use branchflow::quantum::{propagate_and_observe, InitialState};
use branchflow::sweep::{log_space, PointResult};
use branchflow::whitenoise::{
    branching_time, branching_time_rescaled, ek_random_force, ek_white_noise, energy_time, energy_time_rescaled,
    validity_bound, AnalyticParams,
};
use branchflow::{run_point, ParameterPoint, RunConfig};

const CORRELATION_REALIZATIONS: usize = 100;
const CORRELATION_SIDE: usize = 512;
const CORRELATION_EXTENT: f64 = 25.6;
const CORRELATION_MAX_LAG: f64 = 3.0;
const CORRELATION_TOL: f64 = 0.05;

const SLOPE_TOL: f64 = 0.10;
const TB_ANCHOR: (f64, f64) = (0.19, 0.26);
const QUANTUM_TB_TOL: f64 = 0.20;

const TB_WHITE_EXPONENT: f64 = -2.0 / 3.0;
const TB_WHITE_TOL: f64 = 0.10;
const TB_TRANSIENT_EXPONENT: f64 = -0.5;
const TB_TRANSIENT_TOL: f64 = 0.15;
const TE_EXPONENT: f64 = -1.0;
const TE_TOL: f64 = 0.10;
const TE_SCAN_STEPS: usize = 9;
/// Allowed distance of the scan minimum from `ṽ₀ = 1`, in decades.
const TE_MIN_DECADES: f64 = 0.5 + 1e-9;

const COLLAPSE_TOL: f64 = 0.05;

const FREE_SIGMA_TOL: f64 = 0.005;
const FREE_NORM_TOL: f64 = 1e-10;
const FREE_EK_TOL: f64 = 1e-8;
const FREE_T_END: f64 = 5.0;

const DIVERGENCE_FACTOR: f64 = 3.0;

const RATIO_TIME: f64 = 50.0;
const RATIO_TOL: f64 = 0.005;
const CLOSED_FORM_TOL: f64 = 1e-12;
const BOUND_VALUE: f64 = 1.094;
const BOUND_TOL: f64 = 5e-4;

/// Small periodic box for points whose potential window is long.
const SMALL_BOX: [(&str, &str); 2] = [("grid.L", "25.6"), ("grid.N", "1024")];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

#[derive(Default)]
struct Runs {
    cache: HashMap<String, PointResult>,
}

impl Runs {
    fn get(&mut self, point: &ParameterPoint, quantum: bool, overrides: &[(&str, &str)], t_end: Option<f64>) -> Result<&PointResult, String> {
        let key = format!("{}:{}:{quantum}:{overrides:?}:{t_end:?}", point.tau(), point.v0());
        if !self.cache.contains_key(&key) {
            let mut cfg = RunConfig {
                quantum,
                dumps: false,
                t_end,
                ..RunConfig::default()
            };
            for (k, v) in overrides {
                cfg.set(k, v).map_err(|e| e.to_string())?;
            }
            let result = run_point(point, &cfg).map_err(|e| e.to_string())?;
            self.cache.insert(key.clone(), result);
        }
        Ok(&self.cache[&key])
    }
}

fn preset(name: &str) -> ParameterPoint {
    ParameterPoint::preset(name).expect("known preset")
}

fn correlation_recovery() -> Outcome {
    let run = || -> branchflow::Result<(f64, f64)> {
        let spec = CorrelationSpec::new(1.0, 1.0)?;
        let grid = SimulationGrid::new(
            CORRELATION_EXTENT,
            CORRELATION_EXTENT,
            CORRELATION_SIDE,
            CORRELATION_SIDE,
        )?;
        let chunk = 10;
        let mut sum: Option<Vec<f64>> = None;
        let mut lags = Vec::new();
        for start in (0..CORRELATION_REALIZATIONS).step_by(chunk) {
            let reals = (start..start + chunk)
                .map(|i| sample_realization(&spec, &grid, 1, i as u64))
                .collect::<branchflow::Result<Vec<_>>>()?;
            let est = empirical_correlation(&reals, CORRELATION_MAX_LAG, CORRELATION_MAX_LAG)?;
            let vals: Vec<f64> = est.iter().map(|(_, _, c)| c).collect();
            if lags.is_empty() {
                lags = est.iter().map(|(x, t, _)| (x, t)).collect();
            }
            match sum.as_mut() {
                Some(s) => s.iter_mut().zip(&vals).for_each(|(a, v)| *a += v),
                None => sum = Some(vals),
            }
        }
        let chunks = (CORRELATION_REALIZATIONS / chunk) as f64;
        let mut max_dev: f64 = 0.0;
        let mut at_origin = 0.0;
        for ((x, t), s) in lags.iter().zip(sum.unwrap_or_default()) {
            let c = s / chunks;
            if *x == 0.0 && *t == 0.0 {
                at_origin = c;
            }
            max_dev = max_dev.max((c - (-(x * x + t * t) / 2.0).exp()).abs());
        }
        Ok((max_dev, at_origin))
    };
    match run() {
        Ok((dev, c0)) => Outcome::new(
            dev < CORRELATION_TOL,
            format!("max |C - exp(-x²/2-t²/2)| = {dev:.4} (tol {CORRELATION_TOL}), C(0,0) = {c0:.4}"),
        ),
        Err(e) => Outcome::error(e),
    }
}

fn white_noise_slope(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["B0", "B1"] {
        let p = preset(name);
        let r = match runs.get(&p, false, &[], None) {
            Ok(r) => r,
            Err(e) => return Outcome::error(e),
        };
        let tb = branching_time(p.v0(), p.tau());
        let expected = (std::f64::consts::PI / 2.0).sqrt() * p.v0() * p.v0() * p.tau();
        match linear_slope(&r.classical.kinetic_energy, p.tau(), 5.0 * tb) {
            Ok(s) => {
                let ratio = s / expected;
                pass &= (ratio - 1.0).abs() <= SLOPE_TOL;
                parts.push(format!("{name} slope ratio {ratio:.4}"));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(pass, format!("{} (tol {SLOPE_TOL})", parts.join(", ")))
}

fn branching_anchor(runs: &mut Runs) -> Outcome {
    let r = match runs.get(&preset("B2"), true, &[], None) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let tc = r.classical_scales.t_b;
    let Some(tq) = r.quantum_scales.map(|s| s.t_b) else {
        return Outcome::error("quantum run missing");
    };
    let rel = (tq.value - tc.value).abs() / tc.value;
    let pass = tc.valid && tq.valid && (TB_ANCHOR.0..=TB_ANCHOR.1).contains(&tc.value) && rel <= QUANTUM_TB_TOL;
    Outcome::new(
        pass,
        format!(
            "classical t_b = {:.4} in [{}, {}], quantum t_b = {:.4}, rel diff {rel:.3} (tol {QUANTUM_TB_TOL})",
            tc.value, TB_ANCHOR.0, TB_ANCHOR.1, tq.value
        ),
    )
}

fn scaling_exponents(runs: &mut Runs) -> Outcome {
    let v0: f64 = 50.0;
    let mut notes = Vec::new();
    let mut pass = true;
    let fit = |label: &str, pts: Vec<(f64, f64)>, target: f64, tol: f64, notes: &mut Vec<String>| {
        match fit_power_law(&pts) {
            Ok(f) => {
                let ok = (f.exponent - target).abs() <= tol;
                notes.push(format!("{label} {:.3} (want {target:.3} ± {tol})", f.exponent));
                ok
            }
            Err(e) => {
                notes.push(format!("{label} fit failed: {e}"));
                false
            }
        }
    };

    let mut tb_white = Vec::new();
    for name in ["B0", "B1", "B2"] {
        let p = preset(name);
        let quantum = name == "B2";
        match runs.get(&p, quantum, &[], None) {
            Ok(r) => tb_white.push((p.vtilde(), r.classical_scales.tb_over_tau())),
            Err(e) => return Outcome::error(e),
        }
    }
    pass &= fit("t_b white", tb_white, TB_WHITE_EXPONENT, TB_WHITE_TOL, &mut notes);

    // transient passages last ~ v0^{-1/2} in quantum units
    let transient_end = 5.0 / v0.sqrt();
    let mut tb_transient = Vec::new();
    for vt in [10.0, 100.0, 1000.0] {
        let p = ParameterPoint::from_vtilde(vt, v0).unwrap();
        match runs.get(&p, false, &SMALL_BOX, Some(transient_end)) {
            Ok(r) => tb_transient.push((vt, r.classical_scales.tb_over_tau())),
            Err(e) => return Outcome::error(e),
        }
    }
    pass &= fit("t_b transient", tb_transient, TB_TRANSIENT_EXPONENT, TB_TRANSIENT_TOL, &mut notes);

    let mut te = Vec::new();
    for vt in [1e-3, 1e-2, 1e-1] {
        let p = ParameterPoint::from_vtilde(vt, v0).unwrap();
        let end = 2.5 * energy_time(p.v0(), p.tau());
        match runs.get(&p, false, &SMALL_BOX, Some(end)) {
            Ok(r) => te.push((vt, r.classical_scales.te_over_tau())),
            Err(e) => return Outcome::error(e),
        }
    }
    pass &= fit("t_e", te, TE_EXPONENT, TE_TOL, &mut notes);

    let mut best: Option<(f64, f64)> = None;
    let mut cells = Vec::new();
    for vt in log_space(0.1, 10.0, TE_SCAN_STEPS).unwrap() {
        let p = ParameterPoint::from_vtilde(vt, v0).unwrap();
        let end = (2.5 * energy_time(p.v0(), p.tau())).max(20.0 * p.tau());
        let r = match runs.get(&p, false, &SMALL_BOX, Some(end)) {
            Ok(r) => r,
            Err(e) => return Outcome::error(e),
        };
        let s = r.classical_scales;
        if s.t_e.valid {
            let v = s.te_over_tau();
            cells.push(format!("{vt:.3}:{v:.2}"));
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((vt, v));
            }
        } else {
            cells.push(format!("{vt:.3}:nan"));
        }
    }
    let min_ok = best.is_some_and(|(vt, _)| vt.log10().abs() <= TE_MIN_DECADES);
    pass &= min_ok;
    notes.push(format!(
        "t_e/τ scan minimum at ṽ₀ = {} (within {:.1} decade of 1) [{}]",
        best.map_or("none".into(), |(vt, _)| format!("{vt:.3}")),
        TE_MIN_DECADES,
        cells.join(" ")
    ));
    Outcome::new(pass, notes.join("; "))
}

fn collapse(runs: &mut Runs) -> Outcome {
    let a = preset("B2");
    let b = ParameterPoint::from_vtilde(a.vtilde(), 12.5).unwrap();
    let window = 5.0 * branching_time_rescaled(a.vtilde());
    let ra = match runs.get(&a, true, &[], None) {
        Ok(r) => r.classical.kinetic_energy.rescaled(a.tau(), a.v0()),
        Err(e) => return Outcome::error(e),
    };
    let rb = match runs.get(&b, false, &[], None) {
        Ok(r) => r.classical.kinetic_energy.rescaled(b.tau(), b.v0()),
        Err(e) => return Outcome::error(e),
    };
    // diagnostic only: second point on an independent ensemble
    let rb_indep = match runs.get(&b, false, &[("seed.master", "2")], None) {
        Ok(r) => r.classical.kinetic_energy.rescaled(b.tau(), b.v0()),
        Err(e) => return Outcome::error(e),
    };
    let opts = ChiOptions {
        t_start: 0.0,
        t_end: window,
        ..ChiOptions::default()
    };
    match (chi_indicator_with(&ra, &rb, &opts), chi_indicator_with(&ra, &rb_indep, &opts)) {
        (Ok(c), Ok(ci)) => Outcome::new(
            c.chi < COLLAPSE_TOL,
            format!(
                "χ = {:.2e} over t/τ in (0, {window:.2}] with τ = {:.5}, {:.5} (tol {COLLAPSE_TOL}); independent seeds χ = {:.4}",
                c.chi,
                a.tau(),
                b.tau(),
                ci.chi
            ),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::error(e),
    }
}

fn free_packet() -> Outcome {
    let run = || -> branchflow::Result<(f64, f64, f64, usize)> {
        let cfg = RunConfig::default();
        let spec = CorrelationSpec::new(0.0, 1.0)?;
        let grid = SimulationGrid::covering(cfg.length, cfg.n, cfg.dx() * cfg.dx(), FREE_T_END)?;
        let trace = propagate_and_observe(&spec, &grid, None, InitialState::Gaussian, FREE_T_END, false)?;
        let s2 = trace.sigma2.unwrap_or_default();
        let sigma_err = trace
            .times
            .iter()
            .zip(&s2)
            .map(|(t, v)| (v.sqrt() / ((1.0 + t * t) / 2.0).sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        let ek0 = trace.kinetic_energy[0];
        let ek_err = trace.kinetic_energy.iter().map(|e| (e - ek0).abs()).fold(0.0, f64::max);
        Ok((sigma_err, trace.max_norm_drift, ek_err, s2.len()))
    };
    match run() {
        Ok((se, nd, ee, len)) => Outcome::new(
            se < FREE_SIGMA_TOL && nd < FREE_NORM_TOL && ee < FREE_EK_TOL,
            format!(
                "max σ rel err {se:.2e} (tol {FREE_SIGMA_TOL}) over {len} steps, norm drift {nd:.2e} (tol {FREE_NORM_TOL:e}), ε_k drift {ee:.2e} (tol {FREE_EK_TOL:e})"
            ),
        ),
        Err(e) => Outcome::error(e),
    }
}

fn divergence(runs: &mut Runs) -> Outcome {
    let mut chi = Vec::new();
    for name in ["Q4", "B4"] {
        match runs.get(&preset(name), true, &SMALL_BOX, None) {
            Ok(r) => match r.chi_class_vs_quant {
                Some(c) => chi.push(c),
                None => return Outcome::error("quantum run missing"),
            },
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(
        chi[0] >= DIVERGENCE_FACTOR * chi[1],
        format!(
            "χ(Q4) = {:.4}, χ(B4) = {:.4}, factor {:.1} (want ≥ {DIVERGENCE_FACTOR})",
            chi[0],
            chi[1],
            chi[0] / chi[1]
        ),
    )
}

fn analytics() -> Outcome {
    let p = AnalyticParams::at_rest(1.0).unwrap();
    let ratio = ek_random_force(RATIO_TIME, &p) / ek_white_noise(RATIO_TIME, &p);
    let h = 1e-3;
    let slope = (ek_random_force(RATIO_TIME + h, &p) - ek_random_force(RATIO_TIME - h, &p)) / (2.0 * h);
    let slope_ratio = slope / p.gamma2();

    let prefactor = (9.0 / (2.0 * std::f64::consts::PI)).powf(1.0 / 6.0);
    let mut closed_err: f64 = 0.0;
    for &(v0, tau) in &[(50.0f64, 0.044_72f64), (0.2, 7.07), (12.5, 0.089_44), (4.42e5, 3.36e-4), (1.0, 1.0)] {
        let tb = prefactor / v0.powf(2.0 / 3.0) / tau.cbrt();
        let te = 1.0 / ((std::f64::consts::PI / 2.0).sqrt() * v0 * tau);
        let vt = v0 * tau * tau;
        closed_err = closed_err
            .max((branching_time(v0, tau) / tb - 1.0).abs())
            .max((energy_time(v0, tau) / te - 1.0).abs())
            .max((branching_time_rescaled(vt) / (tb / tau) - 1.0).abs())
            .max((energy_time_rescaled(vt) / (te / tau) - 1.0).abs());
    }
    let bound = validity_bound();
    let ratio_ok = (ratio - 1.0).abs() <= RATIO_TOL;
    let closed_ok = closed_err <= CLOSED_FORM_TOL;
    let bound_ok = (bound - BOUND_VALUE).abs() <= BOUND_TOL;
    Outcome::new(
        ratio_ok && closed_ok && bound_ok,
        format!(
            "ε_k ratio at t = {RATIO_TIME}: {ratio:.5} (tol {RATIO_TOL}, slope ratio {slope_ratio:.6}); closed-form rel err {closed_err:.1e} (tol {CLOSED_FORM_TOL:e}); bound {bound:.5} vs {BOUND_VALUE} ± {BOUND_TOL}"
        ),
    )
}

type Criterion = Box<dyn FnOnce(&mut Runs) -> Outcome>;

fn main() {
    let strict = std::env::var("BRANCHFLOW_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    let mut runs = Runs::default();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("correlation recovery", Box::new(|_| correlation_recovery())),
        ("white-noise slope B0/B1", Box::new(white_noise_slope)),
        ("branching time anchor B2", Box::new(branching_anchor)),
        ("scaling exponents", Box::new(scaling_exponents)),
        ("single-parameter collapse", Box::new(collapse)),
        ("quantum free limit", Box::new(|_| free_packet())),
        ("quantum-classical divergence Q4/B4", Box::new(divergence)),
        ("analytics self-consistency", Box::new(|_| analytics())),
    ];
    let total = criteria.len();
    let mut passed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = check(&mut runs);
        passed += o.pass as usize;
        println!(
            "[{}] C{} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if strict && passed < total {
        std::process::exit(1);
    }
}
