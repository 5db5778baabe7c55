//! End-to-end runs of small experiment specs.

use hetcomp::experiment::{
    manifest_path, run, run_with_workers, write_csv, write_outputs, ExperimentSpec, OutputFormat, Scenario, Sweep,
    SweepAxis, CSV_HEADER,
};
use hetcomp::overhead::DelayDist;
use hetcomp::sir::SirSimulator;
use hetcomp::throughput::{ergodic_throughput_mc, ergodic_throughput_mc_paired, ergodic_throughput_mixture_mc};
use hetcomp::Error;

fn small(scenario: Scenario, sweep: Sweep, trials: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(scenario);
    spec.trials = Some(trials);
    spec.fading_per_geometry = Some(2);
    spec.sweep = Some(sweep);
    spec
}

fn csv_bytes(spec: &ExperimentSpec, workers: usize) -> Vec<u8> {
    let table = run_with_workers(spec, Some(workers)).unwrap();
    let mut out = Vec::new();
    write_csv(&table.rows, &mut out).unwrap();
    out
}

#[test]
fn csv_is_identical_across_worker_counts() {
    for spec in [
        small(Scenario::TimeFractionSweep, Sweep::explicit(SweepAxis::WindowMs, vec![0.0, 40.0, 70.0]), 5_000),
        small(Scenario::ThroughputVsDelayAdaptive, Sweep::explicit(SweepAxis::MeanDelayMs, vec![20.0, 100.0]), 300),
        small(Scenario::CcdfVsBounds, Sweep::explicit(SweepAxis::Beta, vec![0.1, 1.0]), 2_000),
    ] {
        assert_eq!(csv_bytes(&spec, 1), csv_bytes(&spec, 3), "{}", spec.scenario);
    }
}

#[test]
fn time_fraction_rows_are_consistent() {
    let spec = small(Scenario::TimeFractionSweep, Sweep::range(SweepAxis::WindowMs, 0.0, 150.0, 50.0), 50_000);
    let table = run(&spec).unwrap();
    let eta = table.metric("eta");
    let mc = table.metric("eta_mc");
    assert_eq!(eta.len(), 4);
    assert_eq!(eta[0].value, 0.0);
    for (e, m) in eta.iter().zip(&mc) {
        assert_eq!(e.sweep_value, m.sweep_value);
        let se = m.stderr.unwrap();
        assert!((e.value - m.value).abs() <= 4.0 * se + 1e-12, "w={}: {} vs {} ± {se}", e.sweep_value, e.value, m.value);
    }
    assert!(eta.windows(2).all(|w| w[0].value <= w[1].value));
    assert!(table.metric("window_objective")[0].flags.contains("undefined"));
}

#[test]
fn outputs_and_manifest_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(Scenario::TimeFractionSweep, Sweep::explicit(SweepAxis::WindowMs, vec![10.0, 60.0]), 1_000);
    let table = run(&spec).unwrap();

    let csv_path = dir.path().join("out.csv");
    write_outputs(&table, &csv_path, OutputFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + table.rows.len());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest_path(&csv_path)).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "hetcomp");
    assert_eq!(manifest["spec"]["scenario"], "time-fraction-sweep");
    assert_eq!(manifest["spec"]["trials"], 1_000);
    assert!(manifest["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));

    let json_path = dir.path().join("out.json");
    write_outputs(&table, &json_path, OutputFormat::Json).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), table.rows.len());
    assert!(manifest_path(&json_path).exists());
}

#[test]
fn resolved_spec_round_trips_through_toml() {
    let spec = ExperimentSpec::preset(Scenario::CcdfVsBounds).resolved();
    let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
    assert_eq!(back.to_toml().unwrap(), spec.to_toml().unwrap());
}

#[test]
fn unbounded_window_reproduces_nonadaptive_run() {
    let sweep = Sweep::explicit(SweepAxis::MeanDelayMs, vec![30.0, 90.0]);
    let non = small(Scenario::ThroughputVsDelayNonadaptive, sweep.clone(), 400);
    let mut ada = small(Scenario::ThroughputVsDelayAdaptive, sweep, 400);
    ada.durations.window_ms = f64::INFINITY;
    let a = run(&non).unwrap();
    let b = run(&ada).unwrap();
    for (x, y) in a.metric("throughput").iter().zip(b.metric("throughput")) {
        assert_eq!(x.value.to_bits(), y.value.to_bits());
        assert_eq!(x.stderr, y.stderr);
    }
    assert!(b.metric("gain_vs_nonadaptive").is_empty());
}

#[test]
fn finite_window_helps_at_long_delays() {
    let spec = ExperimentSpec::preset(Scenario::ThroughputVsDelayAdaptive);
    let sim = SirSimulator::new(spec.network.clone(), spec.cos_gain).unwrap();
    let base = spec.durations.with_delay(DelayDist::uniform_with_mean(100.0));
    let models = [base.with_window(70.0), base.with_window(f64::INFINITY)];
    let out = ergodic_throughput_mc_paired(&sim, &models, 3_000, 4, 5).unwrap();
    let d = out.difference(0, 1).unwrap();
    assert!(d.diff > 0.0 && d.z() > 3.0, "gain {} ± {}", d.diff, d.stderr);
}

#[test]
fn conditional_mixture_agrees_with_direct_simulation() {
    let spec = ExperimentSpec::preset(Scenario::ThroughputVsDelayAdaptive);
    let sim = SirSimulator::new(spec.network.clone(), spec.cos_gain).unwrap();
    let model = spec.durations.with_delay(DelayDist::uniform_with_mean(60.0));
    let direct = ergodic_throughput_mc(&sim, &model, 4_000, 2, 11).unwrap();
    let mixed = ergodic_throughput_mixture_mc(&sim, &model, 4_000, 2, 12).unwrap();
    let se = direct.stderr.unwrap().hypot(mixed.stderr.unwrap());
    assert!((direct.value - mixed.value).abs() < 3.5 * se, "{} vs {} (se {se})", direct.value, mixed.value);
    assert!((mixed.mixture.iter().map(|m| m.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn infeasible_and_malformed_specs_are_rejected() {
    let mut spec = ExperimentSpec::preset(Scenario::ThroughputVsDelayAdaptive);
    spec.network.coord_set_size = spec.network.tiers[0].antennas;
    let d = spec.validate();
    assert!(!d.is_ok());
    assert!(d.errors.iter().any(|e| e.message.contains("zero-forcing") || e.message.contains("antennas")), "{d:?}");
    assert!(matches!(run(&spec), Err(Error::Config(_))));

    let mut spec = ExperimentSpec::preset(Scenario::TimeFractionSweep);
    spec.network.tiers[1].density_per_m2 = 0.0;
    assert!(!spec.validate().is_ok());

    let mut spec = ExperimentSpec::preset(Scenario::TimeFractionSweep);
    spec.network.tiers.clear();
    assert!(!spec.validate().is_ok());

    let spec = small(Scenario::TimeFractionSweep, Sweep::explicit(SweepAxis::Beta, vec![1.0]), 10);
    assert!(spec.validate().errors.iter().any(|e| e.field == "sweep.axis"));

    assert!(ExperimentSpec::from_toml("scenario = \"custom\"\nbogus = 1\n").is_err());
}

#[test]
fn even_exponent_ccdf_run_flags_gamma_pole() {
    let spec = small(Scenario::CcdfVsBounds, Sweep::explicit(SweepAxis::Beta, vec![1.0]), 1_000);
    assert!(!spec.validate().warnings.is_empty());
    let table = run(&spec).unwrap();
    let upper = table.metric("ccdf_upper");
    assert!(upper[0].value.is_nan() && upper[0].flags.contains("gamma-pole"));
}
