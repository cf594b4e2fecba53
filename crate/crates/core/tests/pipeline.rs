use std::path::Path;
use std::sync::Arc;

use jobshop_core::bench::{load_instance, run_benchmark, Algorithm, SeedBank};
use jobshop_core::policy::checkpoint;
use jobshop_core::ppo::{train, TrainConfig};
use jobshop_core::{PolicyParams32, PolicyParams64, ScenarioConfig};

fn tiny() -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16],
        rollout_length: 256,
        minibatch_size: 64,
        epochs_per_update: 2,
        total_steps: 1024,
        eval_runs: 2,
        ..TrainConfig::default()
    }
}

fn fixture() -> Arc<jobshop_core::JsspInstance> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/small/fixture_5x4.json");
    Arc::new(load_instance(&p).unwrap())
}

#[test]
fn train_checkpoint_bench() {
    let inst = fixture();
    let sc = ScenarioConfig::breakdowns_and_arrivals();
    let dir = tempfile::tempdir().unwrap();
    let out = train::<f64>(inst.clone(), &sc, &tiny(), Some(dir.path())).unwrap();
    assert_eq!(out.steps, 1024);
    assert_eq!(out.log.len(), 4);

    let (loaded, _): (PolicyParams64, _) = checkpoint::load(&dir.path().join("final.json")).unwrap();
    assert_eq!(loaded, out.params);
    let algos = Algorithm::parse_list(&format!("rules,agent:{}", dir.path().join("best.json").display())).unwrap();
    let res = run_benchmark(&inst, "5x4", &algos, &sc, &SeedBank::bundled(), 5).unwrap();
    let table = res.table.clone().unwrap();
    assert_eq!(table.ours, Some(res.get("agent").unwrap().stats.mean));
}

#[test]
fn single_precision_training_runs_and_reloads() {
    let inst = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = train::<f32>(inst, &ScenarioConfig::breakdowns(), &tiny(), Some(dir.path())).unwrap();
    assert!(out.params.is_finite());
    let (loaded, _): (PolicyParams32, _) = checkpoint::load(&dir.path().join("final.json")).unwrap();
    assert_eq!(loaded, out.params);
    // a single-precision checkpoint widens losslessly
    let (wide, _): (PolicyParams64, _) = checkpoint::load(&dir.path().join("final.json")).unwrap();
    assert_eq!(wide, out.params.cast::<f64>());
}

#[test]
fn identical_seeds_reproduce_training() {
    let inst = fixture();
    let sc = ScenarioConfig::breakdowns();
    let a = train::<f64>(inst.clone(), &sc, &tiny(), None).unwrap();
    let b = train::<f64>(inst, &sc, &tiny(), None).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.len(), b.log.len());
}
