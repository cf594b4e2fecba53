//! Seeded comparison protocol: instance files, seed banks, statistics, result tables.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disruptions::{build_scenario, DomainError, ScenarioConfig, ScenarioTrace};
use crate::env::{validate_schedule, EnvError, GanttEntry, JobShopEnv, JsspInstance, Violation};
use crate::heuristics::{self, RuleId};
use crate::policy::{checkpoint, PolicyError, PolicyParams};
use crate::ppo::{greedy_rollout, PpoError, TrainConfig};

mod parse;
mod seeds;
mod stats;

pub use parse::{export_small_instance, export_taillard, parse_small_instance, parse_taillard};
pub use seeds::SeedBank;
pub use stats::{gap_percent, RunStats, TableRow, Z95};

/// Largest instance `brute_force_optimum` accepts, in operations.
pub const BRUTE_FORCE_LIMIT: usize = 12;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error("{runs} runs requested but the seed bank holds {available}")]
    NotEnoughSeeds { runs: usize, available: usize },
    #[error("{algorithm} produced an invalid schedule in run {run}: {violations:?}")]
    InvalidSchedule {
        algorithm: String,
        run: usize,
        violations: Vec<Violation>,
    },
    #[error("{algorithm} saw scenario {got} in run {run}, expected {expected}")]
    ScenarioDrift {
        algorithm: String,
        run: usize,
        expected: String,
        got: String,
    },
    #[error("instance has {ops} operations; exhaustive search is limited to {limit}")]
    TooLarge { ops: usize, limit: usize },
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Scenario(#[from] DomainError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error("io: {0}")]
    Io(String),
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

/// `.json` files use the small format, anything else the Taillard format.
pub fn load_instance(path: &Path) -> Result<JsspInstance, BenchError> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_small_instance(&text)
    } else {
        parse_taillard(&text)
    }
}

/// Scenario settings as TOML (keys as in [`ScenarioConfig`]).
pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig, BenchError> {
    let cfg: ScenarioConfig = toml::from_str(&read(path)?).map_err(|e| BenchError::Parse {
        line: None,
        msg: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig, BenchError> {
    Ok(TrainConfig::from_toml(&read(path)?)?)
}

/// A decision-maker under comparison.
#[derive(Clone, Debug)]
pub enum Algorithm {
    Rule(RuleId),
    /// Greedy (argmax) masked policy.
    Agent { name: String, params: Arc<PolicyParams<f64>> },
}

impl Algorithm {
    pub fn name(&self) -> String {
        match self {
            Algorithm::Rule(r) => r.name().to_string(),
            Algorithm::Agent { name, .. } => name.clone(),
        }
    }

    pub fn all_rules() -> Vec<Algorithm> {
        RuleId::TABLE_ORDER.iter().map(|&r| Algorithm::Rule(r)).collect()
    }

    /// Comma-separated rule names, `rules` for all twelve, and `agent:PATH` checkpoints.
    pub fn parse_list(list: &str) -> Result<Vec<Algorithm>, BenchError> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item.eq_ignore_ascii_case("rules") {
                out.extend(Self::all_rules());
            } else if let Some(path) = item.strip_prefix("agent:") {
                let (params, _) = checkpoint::load::<f64>(Path::new(path))?;
                out.push(Algorithm::Agent {
                    name: "agent".to_string(),
                    params: Arc::new(params),
                });
            } else {
                let rule = item.parse::<RuleId>().map_err(|_| BenchError::UnknownAlgorithm(item.to_string()))?;
                out.push(Algorithm::Rule(rule));
            }
        }
        Ok(out)
    }
}

/// One completed, validated episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    pub makespan: u64,
    pub n_machines: usize,
    pub scenario_digest: String,
    pub scenario: ScenarioTrace,
    pub schedule: Vec<GanttEntry>,
}

/// Roll `algo` out on `trace` and validate the schedule.
pub fn run_single(
    instance: &Arc<JsspInstance>,
    algo: &Algorithm,
    trace: ScenarioTrace,
    run: usize,
    seed: u64,
) -> Result<RunRecord, BenchError> {
    let mut env = JobShopEnv::new(instance.clone(), trace)?;
    let makespan = match algo {
        Algorithm::Rule(r) => heuristics::rollout(*r, &mut env)?,
        Algorithm::Agent { params, .. } => greedy_rollout(params.as_ref(), &mut env)?,
    };
    let schedule = env.schedule_trace()?;
    let violations = validate_schedule(&schedule, instance, env.scenario())?;
    if !violations.is_empty() {
        return Err(BenchError::InvalidSchedule {
            algorithm: algo.name(),
            run,
            violations,
        });
    }
    Ok(RunRecord {
        algorithm: algo.name(),
        run,
        seed,
        makespan,
        n_machines: instance.n_machines(),
        scenario_digest: env.scenario().digest(),
        scenario: env.scenario().clone(),
        schedule,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoResult {
    pub name: String,
    pub stats: RunStats,
    /// Digest of the scenario this algorithm consumed in each run.
    pub scenario_digests: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub instance: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgoResult>,
    /// Present when all twelve rules took part.
    pub table: Option<TableRow>,
}

impl BenchResult {
    pub fn get(&self, name: &str) -> Option<&AlgoResult> {
        self.algorithms.iter().find(|a| a.name == name)
    }
}

/// Run every algorithm `runs` times; run `r` of each uses the scenario built from `bank.seeds[r]`.
pub fn run_benchmark(
    instance: &Arc<JsspInstance>,
    instance_name: &str,
    algos: &[Algorithm],
    scenario: &ScenarioConfig,
    bank: &SeedBank,
    runs: usize,
) -> Result<BenchResult, BenchError> {
    let seeds = bank.take(runs)?.to_vec();
    let mut makespans = vec![Vec::with_capacity(runs); algos.len()];
    let mut digests = vec![Vec::with_capacity(runs); algos.len()];
    for (r, &seed) in seeds.iter().enumerate() {
        let trace = build_scenario(instance, &scenario.with_seed(seed))?;
        let expected = trace.digest();
        for (k, algo) in algos.iter().enumerate() {
            let rec = run_single(instance, algo, trace.clone(), r, seed)?;
            if rec.scenario_digest != expected {
                return Err(BenchError::ScenarioDrift {
                    algorithm: algo.name(),
                    run: r,
                    expected,
                    got: rec.scenario_digest,
                });
            }
            makespans[k].push(rec.makespan);
            digests[k].push(rec.scenario_digest);
        }
    }
    let algorithms: Vec<AlgoResult> = algos
        .iter()
        .zip(makespans.into_iter().zip(digests))
        .map(|(a, (m, d))| AlgoResult {
            name: a.name(),
            stats: RunStats::from_makespans(m),
            scenario_digests: d,
        })
        .collect();
    let rule_means: Vec<(RuleId, f64)> = algos
        .iter()
        .zip(&algorithms)
        .filter_map(|(a, res)| match a {
            Algorithm::Rule(r) => Some((*r, res.stats.mean)),
            _ => None,
        })
        .collect();
    let ours = algos
        .iter()
        .zip(&algorithms)
        .find(|(a, _)| matches!(a, Algorithm::Agent { .. }))
        .map(|(_, res)| res.stats.mean);
    Ok(BenchResult {
        instance: instance_name.to_string(),
        runs,
        seeds,
        table: TableRow::new(instance_name, &rule_means, ours),
        algorithms,
    })
}

/// Table CSV (one row per instance with a full rule set) and the full JSON.
pub fn emit_results(results: &[BenchResult]) -> (String, String) {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TableRow::csv_header()).expect("in-memory write");
    for row in results.iter().filter_map(|r| r.table.as_ref()) {
        w.write_record(row.csv_record(None)).expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    let json = serde_json::to_string_pretty(results).expect("results serialize");
    (csv, json)
}

pub fn parse_results_json(text: &str) -> Result<Vec<BenchResult>, BenchError> {
    serde_json::from_str(text).map_err(|e| BenchError::Parse {
        line: Some(e.line()),
        msg: e.to_string(),
    })
}

/// Minimum makespan over every valid action sequence (memoized depth-first search).
pub fn brute_force_optimum(instance: &Arc<JsspInstance>, scenario: &ScenarioTrace) -> Result<u64, BenchError> {
    let ops = instance.total_ops();
    if ops > BRUTE_FORCE_LIMIT {
        return Err(BenchError::TooLarge {
            ops,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let env = JobShopEnv::new(instance.clone(), scenario.clone())?;
    let mut memo = HashMap::new();
    search(&env, &mut memo)
}

/// The future of an episode depends only on the clock, the marking and the
/// makespan reached so far.
fn state_key(env: &JobShopEnv) -> Vec<u64> {
    let mut key = vec![env.clock(), env.makespan()];
    for (i, p) in env.net().places().iter().enumerate() {
        for t in p.tokens() {
            key.extend([i as u64, t.job_id as u64, t.op_index as u64, u64::from(t.elapsed)]);
        }
        key.push(u64::MAX);
    }
    key
}

fn search(env: &JobShopEnv, memo: &mut HashMap<Vec<u64>, u64>) -> Result<u64, BenchError> {
    if env.is_done() {
        return Ok(env.makespan());
    }
    let key = state_key(env);
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let mut best = u64::MAX;
    for (a, _) in env.mask().iter().enumerate().filter(|(_, &v)| v) {
        let mut next = env.clone();
        next.step(a)?;
        best = best.min(search(&next, memo)?);
    }
    memo.insert(key, best);
    Ok(best)
}

#[cfg(test)]
mod tests;
