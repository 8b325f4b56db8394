use sketchreg_core::harness::{emit_trace_plot_data, run_experiment, write_outputs, ExperimentConfig, RESULT_COLUMNS};
use sketchreg_core::problems::make_embedded;
use sketchreg_core::solver::{parse_trace_csv, run, SolverConfig, TRACE_COLUMNS};

#[test]
fn config_file_to_results_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "problem = rosenbr:2:40, tridia:4:40\ntau = 1, 0.25\nsolver = skoffar2, adam_norm\nseed = 0..2\ntrace_dir = {}\n",
            dir.path().join("traces").display()
        ),
    )
    .unwrap();
    let config = ExperimentConfig::from_file(&cfg_path).unwrap();
    let result = run_experiment(&config).unwrap();
    let out = dir.path().join("results.csv");
    write_outputs(&config, &result, &out).unwrap();

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULT_COLUMNS);
    // 2 problems × (2 τ + 1 baseline row)
    assert_eq!(lines.count(), 6);

    for entry in std::fs::read_dir(dir.path().join("traces")).unwrap() {
        let body = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(body.starts_with(&TRACE_COLUMNS.join(",")));
        let rows = parse_trace_csv(&body).unwrap();
        assert!(rows.last().unwrap()[1].unwrap() <= 1e-3);
    }
}

#[test]
fn smaller_tau_is_cheaper_on_desk_rosenbrock() {
    let config = ExperimentConfig::parse("problem = rosenbr\ntau = 1, 0.1, 0.01\nseed = 0..3\n").unwrap();
    let result = run_experiment(&config).unwrap();
    let cost = |t: f64| result.row("rosenbr", "skoffar2", t).unwrap().mean_w2_cost.unwrap();
    assert!(cost(1.0) > cost(0.1) && cost(0.1) > cost(0.01));
}

#[test]
fn plot_series_for_two_sketch_sizes() {
    let p = make_embedded("rosenbr", 2, 200).unwrap();
    let series = |tau: f64| {
        let c = SolverConfig {
            diagnostics: true,
            ..SolverConfig::skoffar(2, tau, 3)
        };
        emit_trace_plot_data(&run(&p, &c).unwrap()).unwrap()
    };
    let (a, b) = (series(0.1), series(0.01));
    // cost to first reach f <= 1e-2 is lower for the smaller sketch
    let reach = |s: &[(f64, f64)]| s.iter().find(|(_, f)| *f <= 1e-2).map(|(c, _)| *c).unwrap();
    assert!(reach(&b) < reach(&a));
    assert_eq!(p.f_calls(), (a.len() + b.len()) as u64);
}
