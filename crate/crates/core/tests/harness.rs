use serde_json::Value;

use pfopt::harness::{
    ablation_base_factor, ablation_eta0, grid_search, parse_value, run, run_and_write,
    summary_to_json, trace_to_csv, write_trace_csv, ExperimentConfig, InitKind,
    DEFAULT_BASE_FACTORS, DEFAULT_ETA0_VALUES, TRACE_HEADER,
};
use pfopt::optim::Algorithm;
use pfopt::problems::{NoiseModel, ProblemKind};
use pfopt::OptimizerConfig;

fn logistic() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = ProblemKind::Logistic;
    cfg.problem.d = 6;
    cfg.problem.m = 80;
    cfg.problem.l2_reg = 0.1;
    cfg.noise = NoiseModel::minibatch(8, 4);
    cfg.total_steps = 400;
    cfg.eval_every = 7;
    cfg
}

#[test]
fn trace_csv_round_trips_exactly() {
    let out = run(&logistic()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&out.trace, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        reader
            .headers()
            .unwrap()
            .iter()
            .collect::<Vec<_>>()
            .join(","),
        TRACE_HEADER
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), out.trace.len());
    for (row, rec) in rows.iter().zip(&out.trace) {
        assert_eq!(row[0].parse::<u64>().unwrap(), rec.step);
        let parse = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!(parse(1), rec.loss);
        assert_eq!(parse(2), rec.eta);
        assert_eq!(parse(3), rec.r);
        assert_eq!(parse(4), rec.grad_l2);
        assert_eq!(parse(5), rec.s_l2);
        assert_eq!(parse(6), rec.dist_x0);
        assert_eq!(Some(parse(7)), rec.dist_xstar_inf);
        assert_eq!(parse(8), rec.lr_mult);
    }
}

#[test]
fn trace_has_one_record_per_eval_point() {
    let mut cfg = logistic();
    cfg.eval_every = 1;
    assert_eq!(run(&cfg).unwrap().trace.len(), 400);
    cfg.eval_every = 7;
    let trace = run(&cfg).unwrap().trace;
    assert_eq!(trace.len(), 400_usize.div_ceil(7));
    assert!(trace.iter().all(|r| r.step % 7 == 0));
}

#[test]
fn summary_json_carries_every_report_field() {
    let summary = run(&logistic()).unwrap().summary;
    let json: Value = serde_json::from_str(&summary_to_json(&summary).unwrap()).unwrap();
    let report = json["theorem"].as_object().unwrap();
    for key in [
        "tau",
        "total_steps",
        "d_tau",
        "d_bar_tau",
        "s_tau_l2",
        "grad_sq_sum_tau",
        "theta",
        "delta_conf",
        "l_hat",
        "g_analytic",
        "eta0",
        "eta_t",
        "log_eta_ratio",
        "gap",
        "bound_core",
        "minimizer_missing",
    ] {
        assert!(report.contains_key(key), "missing {key}");
    }
    for key in [
        "config_hash",
        "final_loss",
        "gap_final",
        "gap_avg",
        "tau",
        "diverged",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!(json.get("wall_clock_seconds").is_none());
}

#[test]
fn timing_is_opt_in() {
    let mut cfg = logistic();
    cfg.output.record_timing = true;
    assert!(run(&cfg).unwrap().summary.wall_clock_seconds.is_some());
}

#[test]
fn written_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for i in 0..2 {
        let mut cfg = logistic();
        cfg.output.trace_csv = Some(dir.path().join(format!("t{i}.csv")));
        cfg.output.summary_json = Some(dir.path().join(format!("s{i}.json")));
        run_and_write(&cfg).unwrap();
        files.push((
            std::fs::read(cfg.output.trace_csv.unwrap()).unwrap(),
            std::fs::read(cfg.output.summary_json.unwrap()).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn adagradpp_shrinks_stiff_quadratic_gap() {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = ProblemKind::Quadratic;
    cfg.problem.d = 50;
    cfg.problem.condition = Some(100.0);
    cfg.total_steps = 10_000;
    cfg.eval_every = 10_000;
    let summary = run(&cfg).unwrap().summary;
    // the final gap can land within roundoff of f*, so compare without dividing
    let (initial, last) = (summary.initial_gap.unwrap(), summary.gap_final.unwrap());
    assert!(initial > 0.0);
    assert!(last <= initial / 1e3, "initial {initial}, final {last}");
}

#[test]
fn single_value_grid_equals_run() {
    let cfg = logistic();
    let table = grid_search(&cfg, "optimizer.base_factor", &[Value::from(1.0)], false).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].summary, run(&cfg).unwrap().summary);
}

#[test]
fn grid_contains_divergence_and_ranks_it_last() {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = ProblemKind::Quadratic;
    cfg.problem.d = 10;
    cfg.problem.condition = Some(1e4);
    cfg.total_steps = 500;
    cfg.optimizer = OptimizerConfig::new(Algorithm::Sgd).with_lr(1e-5);
    let values: Vec<Value> = [1e-5, 1e-4, 1e-3].iter().map(|&v| Value::from(v)).collect();
    let table = grid_search(&cfg, "optimizer.lr", &values, false).unwrap();
    assert_eq!(table.rows.len(), 3);
    let last = table.rows.last().unwrap();
    assert!(
        last.summary.diverged,
        "lr 1e-3 on condition 1e4 should blow up"
    );
    let best = table.best().unwrap().summary.gap_final.unwrap();
    for row in table.rows.iter().filter(|r| !r.summary.diverged) {
        assert!(best <= row.summary.gap_final.unwrap());
    }
    assert!(table.to_csv().contains("true"));
}

#[test]
fn adam_grid_on_stiff_quadratic_returns_full_table() {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = ProblemKind::Quadratic;
    cfg.problem.d = 10;
    cfg.problem.condition = Some(1e4);
    cfg.total_steps = 500;
    cfg.optimizer = OptimizerConfig::new(Algorithm::Adam).with_lr(1e-3);
    let values: Vec<Value> = [1e-4, 1e-3, 1e-2].iter().map(|&v| Value::from(v)).collect();
    let table = grid_search(&cfg, "optimizer.lr", &values, true).unwrap();
    assert_eq!(table.rows.len(), 3);
}

#[test]
fn empty_grid_is_rejected() {
    assert!(grid_search(&logistic(), "optimizer.lr", &[], false).is_err());
}

#[test]
fn eta0_ablation_uses_absolute_values() {
    let table = ablation_eta0(&logistic(), &DEFAULT_ETA0_VALUES, true).unwrap();
    assert_eq!(table.rows.len(), DEFAULT_ETA0_VALUES.len());
    assert!(table.relative_spread.is_some());
    assert!(table
        .to_csv()
        .lines()
        .last()
        .unwrap()
        .starts_with("# relative_spread"));
    for (row, &eps) in table.rows.iter().zip(&DEFAULT_ETA0_VALUES) {
        assert_eq!(row.value.as_f64(), Some(eps));
        assert_eq!(row.summary.theorem.as_ref().unwrap().eta0, eps);
    }
}

#[test]
fn base_factor_ablation_echoes_inputs_and_matches_plain_run() {
    let cfg = logistic();
    let table = ablation_base_factor(&cfg, &DEFAULT_BASE_FACTORS, true).unwrap();
    let echoed: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.value.as_f64().unwrap())
        .collect();
    assert_eq!(echoed, DEFAULT_BASE_FACTORS);
    let c1 = table
        .rows
        .iter()
        .find(|r| r.value.as_f64() == Some(1.0))
        .unwrap();
    assert_eq!(c1.summary, run(&cfg).unwrap().summary);
}

#[test]
fn config_json_round_trip_and_overrides() {
    let mut cfg = logistic();
    cfg.init.kind = InitKind::Zeros;
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());

    let tweaked = cfg
        .with_override("noise.batch_size", parse_value("16"))
        .unwrap();
    assert_eq!(tweaked.noise, NoiseModel::minibatch(16, 4));
    assert!(ExperimentConfig::from_json(r#"{"total_steps": 10, "bogus": 1}"#).is_err());
}

#[test]
fn explicit_init_is_checked() {
    let mut cfg = logistic();
    cfg.init.kind = InitKind::Explicit;
    cfg.init.values = Some(vec![0.0; 3]);
    assert!(run(&cfg).is_err());
    cfg.init.values = Some(vec![0.1; 6]);
    let out = run(&cfg).unwrap();
    assert_eq!(out.trace[0].dist_x0, 0.0);
}

#[test]
fn empty_trace_serializes_to_header() {
    assert_eq!(trace_to_csv(&[]), format!("{TRACE_HEADER}\n"));
}
