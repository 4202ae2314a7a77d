use podilqr::harness::{
    export_run, run_ensemble, run_scenario, summarize, write_summary, ExperimentConfig, PlantKind,
    Scenario, CONVERGENCE_HEADER, SUMMARY_HEADER,
};

fn small(plant: &str, scenario: &str, extra: &str) -> ExperimentConfig {
    let horizon = if extra.contains("horizon") {
        ""
    } else {
        "horizon = 100\n"
    };
    let text = format!(
        "plant = \"{plant}\"\nscenario = \"{scenario}\"\n{horizon}max_iterations = 6\n{extra}"
    );
    ExperimentConfig::parse_without_env(&text).unwrap()
}

fn read_csv(path: &std::path::Path) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn single_seed_summary_equals_the_record() {
    let config = small("pendulum", "FullyObservedNoisy_Modified", "seeds = [3]\n");
    let ensemble = run_ensemble(&config);
    let record = ensemble.successes().next().unwrap();
    assert_eq!(ensemble.summary.rows.len(), record.records.len());
    for (row, rec) in ensemble.summary.rows.iter().zip(&record.records) {
        assert_eq!(row.mean, rec.cost);
        assert_eq!(row.std, 0.0);
    }
}

#[test]
fn repeated_seed_gives_identical_records() {
    let config = small("cartpole", "PartialNoisy_Modified", "seeds = [2, 2]\n");
    let ensemble = run_ensemble(&config);
    let records: Vec<_> = ensemble.successes().collect();
    assert_eq!(records.len(), 2);
    let timeless = |r: &podilqr::harness::RunRecord| {
        let mut v = r.records.clone();
        v.iter_mut().for_each(|x| x.millis = 0);
        // The initial record carries a NaN residual.
        format!("{v:?}")
    };
    assert_eq!(timeless(records[0]), timeless(records[1]));
    assert_eq!(records[0].trajectory, records[1].trajectory);
}

#[test]
fn averaged_rollout_budget_is_exact() {
    let config = small(
        "pendulum",
        "PartialNoisy_Averaged",
        "seeds = [0, 1, 2]\nrollouts = 8\naveraging = 4\n",
    );
    let ensemble = run_ensemble(&config);
    let mut identification = 0;
    let mut forward = 0;
    for record in ensemble.successes() {
        let iterations = (record.records.len() - 1) as u64;
        assert_eq!(record.identification_rollouts(), iterations * 8 * 4);
        for r in &record.records[1..] {
            // Every line-search candidate averages `averaging` forward rollouts.
            assert_eq!(r.forward_rollouts % 4, 0);
        }
        identification += record.identification_rollouts();
        forward += record.forward_rollouts();
    }
    assert_eq!(ensemble.summary.identification_rollouts, identification);
    assert_eq!(ensemble.summary.forward_rollouts, forward);
}

#[test]
fn exported_csvs_have_documented_shape_and_repeat() {
    let config = small("pendulum", "NominalNoiseless", "seeds = [0]\n");
    let record = run_scenario(&config, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_run(&dir.path().join("a"), &record, false).unwrap();
    export_run(&dir.path().join("b"), &record, false).unwrap();
    for file in ["convergence.csv", "trajectory.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let rows = read_csv(&dir.path().join("a/convergence.csv"));
    assert_eq!(rows[0], CONVERGENCE_HEADER);
    assert_eq!(rows.len() - 1, record.records.len());
    assert!(rows[1..].iter().all(|r| r[5] == "0"));

    let rows = read_csv(&dir.path().join("a/trajectory.csv"));
    assert_eq!(rows[0], ["t", "x_0", "x_1", "u_0", "z_0", "z_1"]);
    assert_eq!(rows.len() - 1, config.horizon + 1);
    assert_eq!(rows.last().unwrap()[3], "");
}

#[test]
fn summary_has_every_seed_on_the_common_grid() {
    let config = small(
        "pendulum",
        "FullyObservedNoisy_Modified",
        "seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]\nhorizon = 60\n",
    );
    let ensemble = run_ensemble(&config);
    let records: Vec<_> = ensemble.successes().collect();
    assert_eq!(records.len(), 10);
    let summary = summarize(&records);
    let longest = records.iter().map(|r| r.records.len()).max().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary(&path, &records, &summary).unwrap();
    let rows = read_csv(&path);
    assert_eq!(rows[0], SUMMARY_HEADER);
    assert_eq!(rows.len() - 1, 10 * longest);
}

#[test]
fn scenario_switch_keeps_plant_and_rederives_noise() {
    let base = ExperimentConfig::defaults(PlantKind::Cartpole, Scenario::NominalNoiseless).unwrap();
    let partial = base
        .with_scenario(Scenario::PartialNoisyAveraged, None)
        .unwrap();
    assert_eq!(partial.plant, PlantKind::Cartpole);
    assert_eq!(partial.cost_q.len(), 2);
    assert!(partial.averaging >= 32);
    assert_eq!(partial.process_std, 0.1 * partial.initial_deviation_std);
    assert_eq!(partial.measurement_std, 0.1 * partial.initial_deviation_std);
}
