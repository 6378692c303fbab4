use branchflow::analysis::{
    chi_indicator, first_crossing, fit_power_law, time_scales_from_series, TimeScale, TimeScales,
};
use branchflow::series::Provenance;
use branchflow::sweep::{read_timescales_csv, write_sweep_csv, write_timescales_csv, PointResult, SWEEP_HEADER};
use branchflow::{run_point, run_sweep, Method, ObservableKind, ObservableSeries, ParameterPoint, RunConfig};
use proptest::prelude::*;

fn tiny() -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("grid.L", "25.6"),
        ("grid.N", "1024"),
        ("ensemble.realizations", "3"),
        ("ensemble.particles", "64"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn series(kind: ObservableKind, method: Method, tau: f64, v0: f64, f: impl Fn(f64) -> f64) -> ObservableSeries {
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
    let values = times.iter().map(|&t| f(t)).collect();
    ObservableSeries::new(kind, method, tau, v0, times, values, vec![0.0; 200], 1).unwrap()
}

fn same_outputs(a: &PointResult, b: &PointResult) {
    assert_eq!(a.classical.kinetic_energy.values(), b.classical.kinetic_energy.values());
    assert_eq!(a.classical.sigma2.values(), b.classical.sigma2.values());
    let (qa, qb) = (a.quantum.as_ref().unwrap(), b.quantum.as_ref().unwrap());
    assert_eq!(qa.kinetic_energy.values(), qb.kinetic_energy.values());
    assert_eq!(a.chi_class_vs_wn.to_bits(), b.chi_class_vs_wn.to_bits());
    assert_eq!(a.provenance, b.provenance);
}

#[test]
fn timescales_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("timescales.csv");
    let rows = vec![
        TimeScales {
            tau: 0.1,
            v0: 50.0,
            method: Method::ClassicalSim,
            t_b: TimeScale { value: 0.25, valid: true },
            t_e: TimeScale::invalid(),
        },
        TimeScales {
            tau: 7.07,
            v0: 0.2,
            method: Method::QuantumSim,
            t_b: TimeScale { value: 1.5e-3, valid: true },
            t_e: TimeScale { value: 31.25, valid: true },
        },
    ];
    let mut meta = Provenance::new();
    meta.insert("source".into(), "test".into());
    write_timescales_csv(&path, &rows, &meta).unwrap();
    let back = read_timescales_csv(&path).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].t_b, rows[0].t_b);
    assert!(!back[0].t_e.valid && back[0].t_e.value.is_nan());
    assert_eq!(back[1], rows[1]);
    assert!(!back[0].valid() && back[1].valid());
}

#[test]
fn points_are_deterministic_across_thread_counts() {
    let cfg = tiny();
    let point = ParameterPoint::preset("B4").unwrap();
    let a = run_point(&point, &cfg).unwrap();
    let b = run_point(&point, &cfg).unwrap();
    same_outputs(&a, &b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| run_point(&point, &cfg)).unwrap();
    same_outputs(&a, &c);
}

#[test]
fn sweep_table_covers_every_cell() {
    let mut cfg = tiny();
    cfg.set("quantum.enabled", "false").unwrap();
    cfg.set("ensemble.realizations", "2").unwrap();
    let mut seen = 0;
    let sweep = run_sweep((0.5, 1.0), (10.0, 20.0), 2, &cfg, None, |_| seen += 1).unwrap();
    assert_eq!(seen, 4);
    assert!(sweep.all_succeeded());
    let order: Vec<(f64, f64)> = sweep.cells.iter().map(|c| (c.point.tau(), c.point.v0())).collect();
    assert_eq!(order, [(0.5, 10.0), (0.5, 20.0), (1.0, 10.0), (1.0, 20.0)]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&path, &sweep).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let width = SWEEP_HEADER.split(',').count();
    for line in lines {
        assert_eq!(line.split(',').count(), width, "{line}");
    }
    assert!(dir.path().join("sweep.csv.meta").exists());
}

#[test]
fn scales_group_by_point_and_method() {
    let s = [
        series(ObservableKind::KineticEnergy, Method::QuantumSim, 1.0, 2.0, |t| t),
        series(ObservableKind::Sigma2, Method::ClassicalSim, 1.0, 2.0, |t| t * t),
        series(ObservableKind::KineticEnergy, Method::ClassicalSim, 1.0, 2.0, |t| 4.0 * t),
        series(ObservableKind::Scintillation, Method::QuantumSim, 1.0, 2.0, |t| t),
        series(ObservableKind::Sigma2, Method::ClassicalSim, 0.5, 2.0, |t| 2.0 * t),
    ];
    let rows = time_scales_from_series(&s);
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[0].tau, rows[0].method), (0.5, Method::ClassicalSim));
    assert!((rows[0].t_b.value - 0.5).abs() < 1e-12 && !rows[0].t_e.valid);
    let class = &rows[1];
    assert_eq!((class.tau, class.method), (1.0, Method::ClassicalSim));
    assert!((class.t_b.value - 1.0).abs() < 1e-12);
    assert!((class.t_e.value - 0.5).abs() < 1e-12);
    let quant = &rows[2];
    assert_eq!(quant.method, Method::QuantumSim);
    assert!(!quant.t_b.valid);
    // ε_k = t stays below v0 = 2 on [0, 1.99]
    assert!(!quant.t_e.valid);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi_of_a_series_with_itself_is_zero(a in 0.1f64..10.0, p in 0.5f64..3.0) {
        let s = series(ObservableKind::KineticEnergy, Method::ClassicalSim, 1.0, 1.0, |t| a * t.powf(p));
        prop_assert_eq!(chi_indicator(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn chi_of_a_scaled_copy_is_the_scale_error(c in 0.0f64..3.0, a in 0.1f64..10.0) {
        let b = series(ObservableKind::KineticEnergy, Method::ClassicalSim, 1.0, 1.0, |t| a * (1.0 + t));
        let scaled = series(ObservableKind::KineticEnergy, Method::ClassicalSim, 1.0, 1.0, |t| c * a * (1.0 + t));
        let chi = chi_indicator(&scaled, &b).unwrap();
        prop_assert!((chi - (1.0 - c).abs()).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_exponent(exp in -3.0f64..3.0, pre in 1e-3f64..1e3, x0 in 1e-3f64..1.0) {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| {
            let x = x0 * 3f64.powi(i);
            (x, pre * x.powf(exp))
        }).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.exponent - exp).abs() < 1e-10);
        prop_assert!((fit.prefactor / pre - 1.0).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn crossing_is_the_linear_root(slope in 0.1f64..10.0, threshold in 0.01f64..1.0) {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|t| slope * t).collect();
        let found = first_crossing(&times, &values, threshold);
        prop_assert!(found.valid);
        prop_assert!((found.value - threshold / slope).abs() < 1e-12);
        // unreached thresholds are invalid
        let never = first_crossing(&times, &values, slope * 10.0);
        prop_assert!(!never.valid && never.value.is_nan());
    }
}
