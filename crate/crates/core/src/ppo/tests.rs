use super::*;
use crate::disruptions::ScenarioTrace;

fn inst(m: usize, jobs: Vec<Vec<(usize, u32)>>) -> Arc<JsspInstance> {
    Arc::new(JsspInstance::new(m, jobs).unwrap())
}

fn three_by_three() -> Arc<JsspInstance> {
    inst(
        3,
        vec![
            vec![(0, 3), (1, 2), (2, 2)],
            vec![(0, 2), (2, 1), (1, 4)],
            vec![(1, 4), (2, 3), (0, 1)],
        ],
    )
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        rollout_length: 64,
        minibatch_size: 32,
        epochs_per_update: 2,
        total_steps: 64 * 3,
        hidden: vec![16, 16],
        eval_runs: 1,
        ..TrainConfig::default()
    }
}

fn setup(cfg: &TrainConfig, scenario: ScenarioConfig) -> (PolicyParams<f64>, VecEnv, ChaCha8Rng) {
    let i = three_by_three();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = PolicyParams::new(i.observation_len(), i.n_jobs(), &cfg.hidden, &mut rng);
    let v = VecEnv::new(EpisodeSource::new(i, scenario, cfg.seed), cfg.n_envs).unwrap();
    (p, v, rng)
}

#[test]
fn rollout_has_requested_length_and_is_reproducible() {
    let cfg = TrainConfig { n_envs: 3, ..small_cfg() };
    let (p, mut v, mut rng) = setup(&cfg, ScenarioConfig::breakdowns());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    assert_eq!(b.len(), 64);
    assert!(b.advantages.iter().chain(&b.returns).all(|x| x.is_finite()));
    let (p2, mut v2, mut rng2) = setup(&cfg, ScenarioConfig::breakdowns());
    assert_eq!(b, collect_rollouts(&p2, &mut v2, &cfg, &mut rng2).unwrap());
}

#[test]
fn masked_rollouts_store_only_valid_actions() {
    let cfg = TrainConfig { rollout_length: 5000, ..small_cfg() };
    let (p, mut v, mut rng) = setup(&cfg, ScenarioConfig::breakdowns_and_arrivals());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    assert!(b.actions.iter().zip(&b.masks).all(|(&a, m)| m[a]));
    assert_eq!(b.fallbacks, 0);
    assert!(!b.finished_returns.is_empty());
}

#[test]
fn fallback_mode_samples_from_raw_policy() {
    let cfg = TrainConfig {
        rollout_length: 2000,
        masking_mode: MaskingMode::UnmaskedFallback,
        ..small_cfg()
    };
    let (p, mut v, mut rng) = setup(&cfg, ScenarioConfig::disruption_free());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    let invalid = b.actions.iter().zip(&b.masks).filter(|(&a, m)| !m[a]).count();
    assert!(invalid > 0);
    assert_eq!(invalid, b.fallbacks);
}

#[test]
fn per_env_gae_matches_direct_recursion() {
    let cfg = TrainConfig { n_envs: 2, ..small_cfg() };
    let (p, mut v, mut rng) = setup(&cfg, ScenarioConfig::disruption_free());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    // env 1 owns the odd steps
    let odd: Vec<usize> = (0..b.len()).filter(|t| t % 2 == 1).collect();
    let pick = |x: &[f64]| odd.iter().map(|&t| x[t]).collect::<Vec<_>>();
    let dones: Vec<bool> = odd.iter().map(|&t| b.dones[t]).collect();
    let (adv, _) = gae(&pick(&b.rewards), &pick(&b.values), &dones, b.last_values[1], 0.99, 0.95);
    assert_eq!(adv, pick(&b.advantages));
}

#[test]
fn unchanged_params_give_unit_ratios() {
    let cfg = small_cfg();
    let (p, mut v, mut rng) = setup(&cfg, ScenarioConfig::breakdowns());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    let m = batch_loss(&p, &b, &cfg, cfg.clip_eps).unwrap();
    assert_eq!(m.clip_fraction, 0.0);
    assert_eq!(m.approx_kl, 0.0);
}

fn single_step_batch(p: &PolicyParams<f64>, ratio: f64) -> RolloutBatch<f64> {
    let i = three_by_three();
    let env = JobShopEnv::new(i.clone(), ScenarioTrace::empty(&i)).unwrap();
    let obs = env.observe().0;
    let mask = env.mask();
    let (z, v) = p.forward(&obs).unwrap();
    let d = MaskedDistribution::new(z, mask.clone()).unwrap();
    RolloutBatch {
        obs: vec![obs],
        masks: vec![mask],
        actions: vec![0],
        log_probs: vec![d.log_prob(0).unwrap() - ratio.ln()],
        rewards: vec![0.0],
        values: vec![v],
        dones: vec![false],
        env_ids: vec![0],
        last_values: vec![0.0],
        advantages: vec![1.0],
        returns: vec![v + 1.0],
        mode: MaskingMode::Masked,
        fallbacks: 0,
        finished_returns: vec![],
    }
}

#[test]
fn clip_uses_upper_bound_for_positive_advantage() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let i = three_by_three();
    let p = PolicyParams::new(i.observation_len(), 3, &[8, 8], &mut rng);
    let b = single_step_batch(&p, 1.5);
    let m = minibatch_loss(&p, &b, &[1.0], &[0], &small_cfg(), 0.2, None).unwrap();
    assert!((m.policy_loss + 1.2).abs() < 1e-12);
    assert_eq!(m.clip_fraction, 1.0);
    let low = single_step_batch(&p, 0.5);
    let m = minibatch_loss(&p, &low, &[-2.0], &[0], &small_cfg(), 0.2, None).unwrap();
    assert!((m.policy_loss - 1.6).abs() < 1e-12);
}

#[test]
fn zero_advantage_leaves_the_actor_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let i = three_by_three();
    let p = PolicyParams::new(i.observation_len(), 3, &[8, 8], &mut rng);
    let b = single_step_batch(&p, 1.0);
    let cfg = TrainConfig {
        entropy_coef: 0.0,
        ..small_cfg()
    };
    let mut g = p.zeros_like();
    let m = minibatch_loss(&p, &b, &[0.0], &[0], &cfg, 0.2, Some(&mut g)).unwrap();
    assert_eq!(m.policy_loss, 0.0);
    assert!(g.actor.params().all(|&x| x == 0.0));
    assert!(g.critic.params().any(|&x| x != 0.0));
}

#[test]
fn one_small_step_reduces_batch_loss() {
    let cfg = TrainConfig {
        learning_rate: 1e-4,
        epochs_per_update: 1,
        minibatch_size: 64,
        lambda_inv: 0.5,
        ..small_cfg()
    };
    let (mut p, mut v, mut rng) = setup(&cfg, ScenarioConfig::breakdowns());
    let b = collect_rollouts(&p, &mut v, &cfg, &mut rng).unwrap();
    let before = batch_loss(&p, &b, &cfg, cfg.clip_eps).unwrap().total_loss;
    let mut opt = Adam::new(&p, cfg.adam_eps);
    ppo_update(&mut p, &mut opt, &b, &cfg, cfg.clip_eps, cfg.learning_rate, &mut rng).unwrap();
    let after = batch_loss(&p, &b, &cfg, cfg.clip_eps).unwrap().total_loss;
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn non_finite_loss_aborts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let i = three_by_three();
    let p = PolicyParams::new(i.observation_len(), 3, &[8, 8], &mut rng);
    let mut b = single_step_batch(&p, 1.0);
    b.returns[0] = f64::NAN;
    let err = minibatch_loss(&p, &b, &[1.0], &[0], &small_cfg(), 0.2, None).unwrap_err();
    assert!(matches!(err, PpoError::NonFinite(_)));
}

#[test]
fn log_has_one_row_per_iteration_and_is_reproducible() {
    let cfg = small_cfg();
    let a = train::<f64>(three_by_three(), &ScenarioConfig::breakdowns(), &cfg, None).unwrap();
    assert_eq!(a.log.len(), cfg.iterations());
    assert_eq!(a.steps, 192);
    let b = train::<f64>(three_by_three(), &ScenarioConfig::breakdowns(), &cfg, None).unwrap();
    assert_eq!(log_csv(&a.log), log_csv(&b.log));
    assert!(log_csv(&a.log).starts_with(
        "iteration,steps,ep_reward_mean,policy_loss,value_loss,entropy,clip_fraction,approx_kl,invalid_prob_mass\n"
    ));
    assert!(a.params.is_finite());
}

#[test]
fn trains_in_f32_too() {
    let out = train::<f32>(three_by_three(), &ScenarioConfig::breakdowns(), &small_cfg(), None).unwrap();
    assert!(out.params.is_finite());
}

#[test]
fn one_by_one_toy_is_solved_immediately() {
    let i = inst(1, vec![vec![(0, 5)]]);
    let cfg = TrainConfig {
        total_steps: 64,
        ..small_cfg()
    };
    let out = train::<f64>(i.clone(), &ScenarioConfig::disruption_free(), &cfg, None).unwrap();
    assert_eq!(out.log.len(), 1);
    let ms = evaluate_greedy(&out.best, &i, &ScenarioConfig::disruption_free(), &[1], 1).unwrap();
    assert_eq!(ms, vec![5]);
}

#[test]
fn greedy_evaluation_properties() {
    let i = three_by_three();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p: PolicyParams<f64> = PolicyParams::new(i.observation_len(), 3, &[8, 8], &mut rng);
    let seeds = [11, 22, 33, 44];
    let sc = ScenarioConfig::breakdowns();
    assert_eq!(
        evaluate_greedy(&p, &i, &sc, &seeds, 4).unwrap(),
        evaluate_greedy(&p, &i, &sc, &seeds, 4).unwrap()
    );
    let free = evaluate_greedy(&p, &i, &ScenarioConfig::disruption_free(), &seeds, 4).unwrap();
    assert!(free.iter().all(|&m| m == free[0]));
    assert!(matches!(
        evaluate_greedy(&p, &i, &sc, &seeds, 5),
        Err(PpoError::NotEnoughSeeds(5, 4))
    ));
}

#[test]
fn writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_interval: 1,
        ..small_cfg()
    };
    train::<f64>(three_by_three(), &ScenarioConfig::disruption_free(), &cfg, Some(dir.path())).unwrap();
    for f in ["train_log.csv", "final.json", "best.json", "checkpoint_1.json", "checkpoint_3.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let (p, meta) = checkpoint::load::<f64>(&dir.path().join("final.json")).unwrap();
    assert_eq!(p.n_actions(), 3);
    assert_eq!(meta["steps"], "192");
}

#[test]
fn config_toml_round_trip_and_validation() {
    let cfg = TrainConfig {
        lambda_inv: DEFAULT_LAMBDA_INV,
        masking_mode: MaskingMode::UnmaskedFallback,
        ..TrainConfig::default()
    };
    assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    let partial = TrainConfig::from_toml("gamma = 0.9\nmasking_mode = \"unmasked_fallback\"\n").unwrap();
    assert_eq!(partial.gamma, 0.9);
    assert_eq!(partial.rollout_length, 2048);
    for bad in [
        "gamma = 1.0",
        "gae_lambda = 1.5",
        "minibatch_size = 4096",
        "learning_rate = 0.0",
        "lambda_inv = -1.0",
        "typo = 3",
    ] {
        assert!(TrainConfig::from_toml(bad).is_err(), "{bad}");
    }
    assert_eq!(TrainConfig::ablation_preset(MaskingMode::Masked).total_steps, 5_000_000);
}

#[test]
fn penalty_training_lowers_raw_invalid_mass() {
    let i = inst(
        3,
        vec![
            vec![(0, 2), (1, 3), (2, 1)],
            vec![(1, 2), (0, 1)],
            vec![(2, 3), (0, 2), (1, 1)],
            vec![(0, 1), (2, 2)],
        ],
    );
    let sc = ScenarioConfig::breakdowns();
    let cfg = TrainConfig {
        lambda_inv: DEFAULT_LAMBDA_INV,
        total_steps: 64 * 15,
        eval_interval: 0,
        ..small_cfg()
    };
    // held-out states: from episodes with a different seed
    let mut hold = VecEnv::new(EpisodeSource::new(i.clone(), sc.clone(), 999), 1).unwrap();
    let probe = TrainConfig {
        rollout_length: 300,
        ..cfg.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let init = Trainer::<f64>::new(i.clone(), &sc, &cfg).unwrap().params;
    let states = collect_rollouts(&init, &mut hold, &probe, &mut rng).unwrap();
    let mass = |p: &PolicyParams<f64>| {
        states
            .obs
            .iter()
            .zip(&states.masks)
            .map(|(o, m)| p.invalid_mass(o, m).unwrap())
            .sum::<f64>()
    };
    let out = train::<f64>(i, &sc, &cfg, None).unwrap();
    assert!(mass(&out.params) < mass(&init));
}
