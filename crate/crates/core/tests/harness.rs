//! Harness runs against the shipped synthetic panel.

use std::path::PathBuf;

use causal_copula::estimators::EstimatorName;
use causal_copula::harness::{
    analyze_dataset, export_lp, run_analysis, run_simulation, DesignConfig, Effect, EffectGrid, Method,
    ResidualConfig, SimulationConfig,
};
use causal_copula::harness::analyze::load_experiment;
use causal_copula::solver::{solution_for, solve, SolverKind, SolverOptions};
use causal_copula::Error;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn analysis_config() -> SimulationConfig {
    let mut c = SimulationConfig::desk(data("gdp_synthetic_assigned.csv"));
    c.data.treatment = Some("treated".into());
    c.designs = vec![DesignConfig::CompleteRandomization { n1: None }];
    c.bootstrap_reps = 300;
    c
}

#[test]
fn desk_analysis_reports_every_default_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = analysis_config();
    c.output.json = Some(dir.path().join("a.json"));
    c.output.csv = Some(dir.path().join("a.csv"));
    c.output.quantiles = Some(dir.path().join("q.dat"));
    let report = run_analysis(&c).unwrap();
    assert_eq!((report.n, report.n1), (10, 3));
    assert_eq!(report.intervals.len(), 4);
    assert!(report.intervals.iter().all(|r| r.ci.is_some()), "{:?}", report.intervals);
    assert_eq!(report.solver_status.as_deref(), Some("optimal"));
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let dump = std::fs::read_to_string(dir.path().join("q.dat")).unwrap();
    assert_eq!(dump.lines().count(), 102);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(json["intervals"].as_array().unwrap().len(), 4);
}

#[test]
fn external_route_reproduces_the_internal_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("p.lp");
    let sol = dir.path().join("p.sol");
    let mut c = analysis_config();
    c.methods = vec![Method::OptCausalBoot, Method::NormalVstar];
    let program = export_lp(&c, &lp).unwrap();
    let internal = solve(SolverKind::Bnb, &program, &SolverOptions::default()).unwrap();
    std::fs::write(&sol, solution_for(&program, internal.assignment.as_ref().unwrap()).to_text()).unwrap();
    let inside = analyze_dataset(&c).unwrap();
    c.solver.kind = SolverKind::External;
    c.solver.lp_path = Some(lp);
    c.solver.solution_path = Some(sol);
    let outside = analyze_dataset(&c).unwrap();
    assert_eq!(inside.v_star, outside.v_star);
    assert_eq!(inside.intervals, outside.intervals);
}

#[test]
fn relative_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data("gdp_synthetic.csv"), dir.path().join("panel.csv")).unwrap();
    let text = r#"{
        "data": {"path": "panel.csv", "outcome": "gdp2019", "unit_id": "country", "first": 6},
        "designs": [{"kind": "complete_randomization"}],
        "estimator": {"name": "dim"},
        "methods": ["sampling_boot", "conservative_var"],
        "replications": 4,
        "bootstrap_reps": 50,
        "output": {"csv": "out/summary.csv", "replications": "out/runs.csv"}
    }"#;
    std::fs::create_dir(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("config.json"), text).unwrap();
    let c = SimulationConfig::load(dir.path().join("config.json")).unwrap();
    let report = run_simulation(&c).unwrap();
    assert_eq!(report.n, 6);
    let runs = std::fs::read_to_string(dir.path().join("out/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4 * 2);
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = SimulationConfig::desk(data("gdp_synthetic.csv"));
    c.replications = 5;
    c.bootstrap_reps = 100;
    let mut outputs = Vec::new();
    for k in 0..2 {
        c.output.json = Some(dir.path().join(format!("r{k}.json")));
        c.output.csv = Some(dir.path().join(format!("r{k}.csv")));
        run_simulation(&c).unwrap();
        outputs.push((
            std::fs::read(dir.path().join(format!("r{k}.json"))).unwrap(),
            std::fs::read(dir.path().join(format!("r{k}.csv"))).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn growth_adjusted_matched_pairs_grid() {
    let mut c = SimulationConfig::desk(data("gdp_synthetic.csv"));
    c.designs = vec![
        DesignConfig::CompleteRandomization { n1: None },
        DesignConfig::MatchedPairs { pair_by: Some("gdp2018".into()) },
    ];
    c.estimator.name = EstimatorName::DrGrowth;
    c.estimator.residual = ResidualConfig::Growth { pre0: "gdp2017".into(), pre1: "gdp2018".into() };
    c.effects = EffectGrid::List(vec![Effect::None, Effect::Multiplicative { gamma: 0.10 }]);
    c.methods = Method::ALL.to_vec();
    c.replications = 6;
    c.bootstrap_reps = 100;
    let report = run_simulation(&c).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * Method::ALL.len());
    for row in &report.rows {
        assert_eq!(row.missing, 0, "{row:?}");
        assert!((0.0..=1.0).contains(&row.coverage.unwrap()));
    }
    let lifted = report.row("matched_pairs", "multiplicative(0.1)", Method::SamplingBoot).unwrap();
    assert!(lifted.power.unwrap() > 0.5);
}

#[test]
fn mismatched_design_is_rejected() {
    let mut c = analysis_config();
    c.designs = vec![DesignConfig::CompleteRandomization { n1: Some(5) }];
    assert!(matches!(load_experiment(&c), Err(Error::Validation(_))));
}
