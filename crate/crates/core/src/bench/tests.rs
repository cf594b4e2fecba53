use super::*;

fn inst(m: usize, jobs: Vec<Vec<(usize, u32)>>) -> Arc<JsspInstance> {
    Arc::new(JsspInstance::new(m, jobs).unwrap())
}

fn optimum(i: &Arc<JsspInstance>) -> u64 {
    brute_force_optimum(i, &ScenarioTrace::empty(i)).unwrap()
}

#[test]
fn brute_force_trivial_cases() {
    assert_eq!(optimum(&inst(1, vec![vec![(0, 5)]])), 5);
    assert_eq!(optimum(&inst(1, vec![vec![(0, 3)], vec![(0, 4)]])), 7);
}

#[test]
fn brute_force_hits_machine_load_bound() {
    // M0 carries 3 + 1 + 2 = 6 units, so 6 is a lower bound; a schedule reaching it exists.
    let i = inst(2, vec![vec![(0, 3), (1, 2)], vec![(1, 4), (0, 1)], vec![(0, 2)]]);
    assert_eq!(optimum(&i), 6);
}

#[test]
fn brute_force_regression_fixture() {
    let i = inst(2, vec![vec![(0, 4), (1, 4)], vec![(1, 1), (0, 1)], vec![(0, 1), (1, 6)]]);
    let opt = optimum(&i);
    for r in RuleId::ALL {
        let mut env = JobShopEnv::new(i.clone(), ScenarioTrace::empty(&i)).unwrap();
        assert!(heuristics::rollout(r, &mut env).unwrap() >= opt);
    }
    // frozen from this oracle; the best rule (SPTN) reaches 11
    assert_eq!(opt, 11);
}

#[test]
fn brute_force_refuses_large_instances() {
    let i = inst(1, (0..13).map(|_| vec![(0, 1)]).collect());
    assert!(matches!(
        brute_force_optimum(&i, &ScenarioTrace::empty(&i)),
        Err(BenchError::TooLarge { ops: 13, limit: 12 })
    ));
}

#[test]
fn brute_force_respects_breakdowns() {
    let i = inst(1, vec![vec![(0, 3)]]);
    let mut sc = ScenarioTrace::empty(&i);
    sc.breakdowns[0] = vec![crate::disruptions::Interval { start: 1, end: 3 }];
    assert_eq!(brute_force_optimum(&i, &sc).unwrap(), 5);
}

fn six_by_four() -> Arc<JsspInstance> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/small/fixture_6x4.json")).unwrap();
    Arc::new(parse_small_instance(&text).unwrap())
}

#[test]
fn every_algorithm_sees_the_same_scenarios() {
    let i = six_by_four();
    let mut algos = Algorithm::all_rules();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    algos.push(Algorithm::Agent {
        name: "agent".into(),
        params: Arc::new(PolicyParams::new(i.observation_len(), i.n_jobs(), &[8, 8], &mut rng)),
    });
    let res = run_benchmark(
        &i,
        "6x4",
        &algos,
        &ScenarioConfig::breakdowns_and_arrivals(),
        &SeedBank::bundled(),
        10,
    )
    .unwrap();
    for r in 0..10 {
        let d = &res.algorithms[0].scenario_digests[r];
        assert!(res.algorithms.iter().all(|a| &a.scenario_digests[r] == d));
    }
    assert_eq!(res.algorithms.len(), 13);
    let table = res.table.as_ref().unwrap();
    assert_eq!(table.ours, Some(res.get("agent").unwrap().stats.mean));
    let again = run_benchmark(&i, "6x4", &algos, &ScenarioConfig::breakdowns_and_arrivals(), &SeedBank::bundled(), 10)
        .unwrap();
    assert_eq!(res, again);
}

use rand_chacha::rand_core::SeedableRng;

#[test]
fn single_deterministic_run_has_zero_spread() {
    let i = six_by_four();
    let res = run_benchmark(
        &i,
        "6x4",
        &[Algorithm::Rule(RuleId::SPT)],
        &ScenarioConfig::disruption_free(),
        &SeedBank::bundled(),
        1,
    )
    .unwrap();
    let s = &res.algorithms[0].stats;
    assert_eq!((s.variance, s.ci95), (0.0, 0.0));
    assert!(res.table.is_none());
}

fn row(values: [f64; 12], ours: f64) -> TableRow {
    let means: Vec<(RuleId, f64)> = RuleId::TABLE_ORDER.iter().copied().zip(values).collect();
    TableRow::new("r", &means, Some(ours)).unwrap()
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[test]
fn reference_row_arithmetic() {
    let row_a = row(
        [69.1, 69.2, 74.8, 69.2, 69.1, 69.2, 74.8, 69.2, 69.1, 69.2, 74.8, 69.1],
        69.1,
    );
    assert_eq!(
        (round1(row_a.heur_avg), round1(row_a.best_heur), round1(row_a.gap_pct.unwrap())),
        (70.6, 69.1, 2.1)
    );
    let row_b = row(
        [76.3, 76.3, 66.0, 76.3, 66.0, 76.3, 66.0, 76.3, 66.0, 73.2, 76.3, 76.3],
        63.3,
    );
    assert_eq!(
        (round1(row_b.heur_avg), round1(row_b.best_heur), round1(row_b.gap_pct.unwrap())),
        (72.6, 66.0, 12.8)
    );
    assert!((gap_percent(72.6, 63.3) - 12.81).abs() < 0.01);
}

#[test]
fn emitted_tables() {
    let i = six_by_four();
    let res = run_benchmark(
        &i,
        "6x4",
        &Algorithm::all_rules(),
        &ScenarioConfig::breakdowns(),
        &SeedBank::bundled(),
        3,
    )
    .unwrap();
    let (csv, json) = emit_results(std::slice::from_ref(&res));
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "instance,FIFO,SPT,LPT,SPS,LPS,LTWR,MTWR,SPSR,LPSR,SPTN,LPTN,LWT,heur_avg,best_heur,ours,gap_pct"
    );
    let t = res.table.as_ref().unwrap();
    let min = res.algorithms.iter().map(|a| a.stats.mean).fold(f64::INFINITY, f64::min);
    assert_eq!(t.best_heur, min);
    assert_eq!(parse_results_json(&json).unwrap(), vec![res]);
}

#[test]
fn algorithm_lists() {
    let a = Algorithm::parse_list("fifo, LWT,rules").unwrap();
    assert_eq!(a.len(), 14);
    assert_eq!(a[1].name(), "LWT");
    assert!(matches!(Algorithm::parse_list("EDD"), Err(BenchError::UnknownAlgorithm(_))));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.json");
    checkpoint::save(&PolicyParams::<f64>::zeros(3, 2, &[2]), &Default::default(), &p).unwrap();
    let a = Algorithm::parse_list(&format!("agent:{}", p.display())).unwrap();
    assert_eq!(a[0].name(), "agent");
}

#[test]
fn bundled_small_instances_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/small");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        load_instance(&p).unwrap();
        n += 1;
    }
    assert!(n >= 3);
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, "breakdowns_enabled = true\nweibull_shape = 1.5\n").unwrap();
    let c = load_scenario_config(&p).unwrap();
    assert!(c.breakdowns_enabled && c.weibull_shape == 1.5);
    std::fs::write(&p, "weibull_shape = -1.0\n").unwrap();
    assert!(load_scenario_config(&p).is_err());
    std::fs::write(&p, "rollout_length = 128\nminibatch_size = 64\n").unwrap();
    assert_eq!(load_train_config(&p).unwrap().rollout_length, 128);
}
