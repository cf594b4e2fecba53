use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use jobshop_core::bench::{
    emit_results, load_instance, load_scenario_config, load_train_config, run_benchmark, run_single, Algorithm,
    RunRecord, SeedBank,
};
use jobshop_core::disruptions::build_scenario;
use jobshop_core::env::{gantt_csv, gantt_svg, validate_schedule, GanttEntry};
use jobshop_core::policy::checkpoint;
use jobshop_core::{JsspInstance, ScenarioTrace};
use serde_json::json;

#[derive(Parser)]
#[command(name = "jobshop", version, about = "Dynamic job-shop scheduling: training, benchmarking, schedule checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a masked PPO agent.
    Train {
        #[arg(long)]
        instance: PathBuf,
        /// Scenario TOML.
        #[arg(long)]
        scenario: PathBuf,
        /// Training TOML.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a checkpoint over seeded scenarios.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare rules and agents on identical scenarios.
    Bench {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated rule names, `rules`, and `agent:CHECKPOINT`.
        #[arg(long, default_value = "rules")]
        algos: String,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a run record as SVG or CSV (by output extension).
    Gantt {
        #[arg(long)]
        run_json: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a schedule against an instance and scenario.
    Validate {
        /// Run record JSON or a bare JSON array of schedule entries.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        /// Scenario trace JSON, or scenario TOML (built from its seed).
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_arc(path: &Path) -> Result<Arc<JsspInstance>> {
    Ok(Arc::new(load_instance(path)?))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Train {
            instance,
            scenario,
            config,
            out,
            seed,
        } => {
            let inst = load_arc(&instance)?;
            let sc = load_scenario_config(&scenario)?;
            let mut cfg = load_train_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            std::fs::create_dir_all(&out)?;
            let res = jobshop_core::ppo::train::<f64>(inst, &sc, &cfg, Some(&out))?;
            println!(
                "{}",
                pretty(&json!({
                    "steps": res.steps,
                    "iterations": res.log.len(),
                    "best_eval": res.best_eval,
                    "final_ep_reward_mean": res.log.last().map(|r| r.ep_reward_mean),
                    "out": out,
                }))
            );
        }
        Cmd::Evaluate {
            instance,
            scenario,
            checkpoint: ckpt,
            seeds,
            runs,
            out,
        } => {
            let inst = load_arc(&instance)?;
            let sc = load_scenario_config(&scenario)?;
            let (params, _) = checkpoint::load::<f64>(&ckpt)?;
            let algo = Algorithm::Agent {
                name: "agent".into(),
                params: Arc::new(params),
            };
            let res = run_benchmark(&inst, &instance_name(&instance), &[algo], &sc, &SeedBank::load(&seeds)?, runs)?;
            std::fs::create_dir_all(&out)?;
            write(&out.join("evaluation.json"), &serde_json::to_string_pretty(&res)?)?;
            let s = &res.algorithms[0].stats;
            println!(
                "{}",
                pretty(&json!({"runs": runs, "mean": s.mean, "std": s.std(), "ci95": s.ci95, "out": out}))
            );
        }
        Cmd::Bench {
            instance,
            scenario,
            algos,
            seeds,
            runs,
            out,
        } => {
            let inst = load_arc(&instance)?;
            let sc = load_scenario_config(&scenario)?;
            let algos = Algorithm::parse_list(&algos)?;
            if algos.is_empty() {
                bail!("no algorithms given");
            }
            let bank = SeedBank::load(&seeds)?;
            let name = instance_name(&instance);
            let res = run_benchmark(&inst, &name, &algos, &sc, &bank, runs)?;
            std::fs::create_dir_all(out.join("runs"))?;
            let (csv, json_text) = emit_results(std::slice::from_ref(&res));
            write(&out.join("results.csv"), &csv)?;
            write(&out.join("results.json"), &json_text)?;
            if runs > 0 {
                let trace = build_scenario(&inst, &sc.with_seed(res.seeds[0]))?;
                for a in &algos {
                    let rec = run_single(&inst, a, trace.clone(), 0, res.seeds[0])?;
                    write(
                        &out.join("runs").join(format!("{}_run0.json", rec.algorithm)),
                        &serde_json::to_string_pretty(&rec)?,
                    )?;
                }
            }
            let summary: BTreeMap<_, _> = res.algorithms.iter().map(|a| (a.name.clone(), a.stats.mean)).collect();
            println!(
                "{}",
                pretty(&json!({"instance": name, "runs": runs, "mean_makespan": summary, "table": res.table, "out": out}))
            );
        }
        Cmd::Gantt { run_json, out } => {
            let rec: RunRecord = serde_json::from_str(&read(&run_json)?).context("parsing run record")?;
            let ext = out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            let text = match ext.as_deref() {
                Some("svg") => gantt_svg(&rec.schedule, rec.n_machines, Some(&rec.scenario)),
                Some("csv") => gantt_csv(&rec.schedule),
                _ => bail!("output must end in .svg or .csv"),
            };
            write(&out, &text)?;
        }
        Cmd::Validate {
            trace,
            instance,
            scenario,
        } => {
            let inst = load_arc(&instance)?;
            let text = read(&trace)?;
            let schedule: Vec<GanttEntry> = match serde_json::from_str::<RunRecord>(&text) {
                Ok(rec) => rec.schedule,
                Err(_) => serde_json::from_str(&text).context("trace is neither a run record nor a schedule array")?,
            };
            let sc: ScenarioTrace = if scenario.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                serde_json::from_str(&read(&scenario)?).context("parsing scenario trace")?
            } else {
                build_scenario(&inst, &load_scenario_config(&scenario)?)?
            };
            let violations = validate_schedule(&schedule, &inst, &sc)?;
            let makespan = schedule.iter().map(|e| e.end).max().unwrap_or(0);
            println!(
                "{}",
                pretty(&json!({"valid": violations.is_empty(), "makespan": makespan, "violations": violations}))
            );
            if !violations.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(ToString::to_string).collect();
            eprintln!("{}", json!({"error": e.to_string(), "causes": causes}));
            ExitCode::FAILURE
        }
    }
}
