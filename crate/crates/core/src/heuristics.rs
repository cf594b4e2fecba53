//! The twelve job-selection dispatching rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::JobShopEnv;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeuristicError {
    #[error("no valid job to dispatch")]
    EmptyMask,
    #[error("mask has {mask} entries but the view has {jobs} jobs")]
    LengthMismatch { mask: usize, jobs: usize },
    #[error("unknown dispatching rule '{0}'")]
    UnknownRule(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum RuleId {
    FIFO,
    SPS,
    LPS,
    SPTN,
    LPTN,
    MTWR,
    LTWR,
    LWT,
    SPT,
    LPT,
    SPSR,
    LPSR,
}

impl RuleId {
    /// Listing order of the rule catalogue.
    pub const ALL: [RuleId; 12] = [
        RuleId::FIFO,
        RuleId::SPS,
        RuleId::LPS,
        RuleId::SPTN,
        RuleId::LPTN,
        RuleId::MTWR,
        RuleId::LTWR,
        RuleId::LWT,
        RuleId::SPT,
        RuleId::LPT,
        RuleId::SPSR,
        RuleId::LPSR,
    ];

    /// Column order of the results tables.
    pub const TABLE_ORDER: [RuleId; 12] = [
        RuleId::FIFO,
        RuleId::SPT,
        RuleId::LPT,
        RuleId::SPS,
        RuleId::LPS,
        RuleId::LTWR,
        RuleId::MTWR,
        RuleId::SPSR,
        RuleId::LPSR,
        RuleId::SPTN,
        RuleId::LPTN,
        RuleId::LWT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::FIFO => "FIFO",
            RuleId::SPS => "SPS",
            RuleId::LPS => "LPS",
            RuleId::SPTN => "SPTN",
            RuleId::LPTN => "LPTN",
            RuleId::MTWR => "MTWR",
            RuleId::LTWR => "LTWR",
            RuleId::LWT => "LWT",
            RuleId::SPT => "SPT",
            RuleId::LPT => "LPT",
            RuleId::SPSR => "SPSR",
            RuleId::LPSR => "LPSR",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            RuleId::FIFO => "job that entered the system earliest",
            RuleId::SPS => "shortest processing sequence",
            RuleId::LPS => "longest processing sequence",
            RuleId::SPTN => "shortest next operation time",
            RuleId::LPTN => "longest next operation time",
            RuleId::MTWR => "most total work remaining",
            RuleId::LTWR => "least total work remaining",
            RuleId::LWT => "longest waiting time",
            RuleId::SPT => "shortest total processing time",
            RuleId::LPT => "longest total processing time",
            RuleId::SPSR => "shortest remaining processing sequence",
            RuleId::LPSR => "longest remaining processing sequence",
        }
    }

    /// Key to score a job by and whether the smallest key wins.
    fn key(self, f: &JobFeatures) -> (u64, bool) {
        match self {
            RuleId::FIFO => (f.first_release, true),
            RuleId::SPS => (f.total_ops as u64, true),
            RuleId::LPS => (f.total_ops as u64, false),
            RuleId::SPTN => (u64::from(f.next_duration), true),
            RuleId::LPTN => (u64::from(f.next_duration), false),
            RuleId::MTWR => (f.remaining_work, false),
            RuleId::LTWR => (f.remaining_work, true),
            RuleId::LWT => (f.waiting, false),
            RuleId::SPT => (f.total_work, true),
            RuleId::LPT => (f.total_work, false),
            RuleId::SPSR => (f.remaining_ops as u64, true),
            RuleId::LPSR => (f.remaining_ops as u64, false),
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HeuristicError::UnknownRule(s.to_string()))
    }
}

/// Read-only per-job attributes the rules score on.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFeatures {
    /// Release step of the job's first operation.
    pub first_release: u64,
    /// When the head token entered the job place.
    pub head_entered_at: Option<u64>,
    pub total_ops: usize,
    pub remaining_ops: usize,
    pub next_duration: u32,
    pub total_work: u64,
    pub remaining_work: u64,
    pub waiting: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobView {
    pub jobs: Vec<JobFeatures>,
}

impl JobView {
    pub fn from_env(env: &JobShopEnv) -> Self {
        let inst = env.instance();
        let clock = env.clock();
        let jobs = (0..inst.n_jobs())
            .map(|j| {
                let ops = &inst.jobs()[j];
                let next = env.next_unselected(j);
                let head = env.job_head(j);
                JobFeatures {
                    first_release: env.scenario().release(j, 0),
                    head_entered_at: head.map(|t| t.entered_at),
                    total_ops: ops.len(),
                    remaining_ops: ops.len() - next,
                    next_duration: ops.get(next).map_or(0, |o| o.duration),
                    total_work: inst.job_work(j),
                    remaining_work: ops[next..].iter().map(|o| u64::from(o.duration)).sum(),
                    waiting: head.map_or(0, |t| clock - t.entered_at),
                }
            })
            .collect();
        Self { jobs }
    }
}

/// Pick a valid job by `rule`; ties go to the lowest index.
pub fn dispatch(rule: RuleId, view: &JobView, mask: &[bool]) -> Result<usize, HeuristicError> {
    if mask.len() != view.jobs.len() {
        return Err(HeuristicError::LengthMismatch {
            mask: mask.len(),
            jobs: view.jobs.len(),
        });
    }
    let mut best: Option<(usize, u64)> = None;
    for (j, f) in view.jobs.iter().enumerate().filter(|(j, _)| mask[*j]) {
        let (key, lower_wins) = rule.key(f);
        let better = match best {
            None => true,
            Some((_, b)) if lower_wins => key < b,
            Some((_, b)) => key > b,
        };
        if better {
            best = Some((j, key));
        }
    }
    best.map(|(j, _)| j).ok_or(HeuristicError::EmptyMask)
}

/// Roll a rule out to the end of the episode and return the makespan.
pub fn rollout(rule: RuleId, env: &mut JobShopEnv) -> Result<u64, crate::env::EnvError> {
    while !env.is_done() {
        let mask = env.mask();
        let a = dispatch(rule, &JobView::from_env(env), &mask).map_err(|_| crate::env::EnvError::EmptyMask)?;
        env.step(a)?;
    }
    Ok(env.makespan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disruptions::ScenarioTrace;
    use crate::env::JsspInstance;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn view_with(f: impl Fn(usize, &mut JobFeatures), n: usize) -> JobView {
        JobView {
            jobs: (0..n)
                .map(|j| {
                    let mut x = JobFeatures::default();
                    f(j, &mut x);
                    x
                })
                .collect(),
        }
    }

    #[test]
    fn names_parse_case_insensitively() {
        for r in RuleId::ALL {
            assert_eq!(r.name().to_lowercase().parse::<RuleId>().unwrap(), r);
        }
        assert!("EDD".parse::<RuleId>().is_err());
        let mut sorted = RuleId::TABLE_ORDER.to_vec();
        sorted.sort();
        assert_eq!(sorted, RuleId::ALL.to_vec());
    }

    #[test]
    fn remaining_work_rules() {
        let v = view_with(|j, f| f.remaining_work = [30, 45][j], 2);
        assert_eq!(dispatch(RuleId::MTWR, &v, &[true, true]).unwrap(), 1);
        assert_eq!(dispatch(RuleId::LTWR, &v, &[true, true]).unwrap(), 0);
    }

    #[test]
    fn next_duration_rules() {
        let v = view_with(|j, f| f.next_duration = [4, 2, 7][j], 3);
        assert_eq!(dispatch(RuleId::SPTN, &v, &[true; 3]).unwrap(), 1);
        assert_eq!(dispatch(RuleId::LPTN, &v, &[true; 3]).unwrap(), 2);
    }

    #[test]
    fn ties_and_singletons() {
        let v = view_with(|_, _| {}, 4);
        for r in RuleId::ALL {
            assert_eq!(dispatch(r, &v, &[false, true, true, true]).unwrap(), 1);
            assert_eq!(dispatch(r, &v, &[false, false, true, false]).unwrap(), 2);
        }
        assert_eq!(dispatch(RuleId::FIFO, &v, &[false; 4]), Err(HeuristicError::EmptyMask));
        assert!(dispatch(RuleId::FIFO, &v, &[true]).is_err());
    }

    #[test]
    fn fifo_uses_first_release() {
        let v = view_with(|j, f| f.first_release = [9, 3, 3][j], 3);
        assert_eq!(dispatch(RuleId::FIFO, &v, &[true; 3]).unwrap(), 1);
    }

    #[test]
    fn lwt_uses_head_wait() {
        // J1's second op has sat in its job place since 0; J0 arrives at 2.
        let inst = Arc::new(JsspInstance::new(2, vec![vec![(1, 1), (0, 1)], vec![(0, 3), (1, 1)]]).unwrap());
        let mut sc = ScenarioTrace::empty(&inst);
        sc.releases = vec![vec![2, 2], vec![0, 0]];
        let mut env = JobShopEnv::new(inst.clone(), sc).unwrap();
        assert_eq!(env.mask(), vec![false, true]);
        env.step(1).unwrap();
        assert_eq!((env.clock(), env.mask()), (2, vec![true, false]));
        env.step(0).unwrap();
        assert_eq!((env.clock(), env.mask()), (3, vec![true, true]));
        let v = JobView::from_env(&env);
        assert_eq!((v.jobs[0].waiting, v.jobs[1].waiting), (1, 3));
        assert_eq!(dispatch(RuleId::LWT, &v, &env.mask()).unwrap(), 1);
        assert_eq!(dispatch(RuleId::FIFO, &v, &env.mask()).unwrap(), 1);
    }

    /// Hand-scheduled 3x2 fixture (all releases at 0):
    /// J0 = (M0,3)(M1,2), J1 = (M1,4)(M0,1), J2 = (M0,2).
    ///  * SPT / SPS put J2 first: M0 runs J2 [0,2), J0 [2,5), J1 [5,6);
    ///    M1 runs J1 [0,4), J0 [5,7). Makespan 7.
    ///  * FIFO / LPT / MTWR put J0 first: M0 runs J0 [0,3), J2 [3,5), J1 [5,6);
    ///    M1 runs J1 [0,4), J0 [4,6). Makespan 6.
    #[test]
    fn rollouts_match_hand_schedules() {
        let inst = Arc::new(
            JsspInstance::new(2, vec![vec![(0, 3), (1, 2)], vec![(1, 4), (0, 1)], vec![(0, 2)]]).unwrap(),
        );
        let expected = [
            (RuleId::SPT, 7),
            (RuleId::SPS, 7),
            (RuleId::FIFO, 6),
            (RuleId::LPT, 6),
            (RuleId::MTWR, 6),
        ];
        for (rule, want) in expected {
            let mut env = JobShopEnv::new(inst.clone(), ScenarioTrace::empty(&inst)).unwrap();
            assert_eq!(rollout(rule, &mut env).unwrap(), want, "{rule}");
        }
    }

    /// Fixture where selection order matters:
    /// J0 = (M0,4)(M1,4), J1 = (M1,1)(M0,1), J2 = (M0,1)(M1,6).
    /// Hand traces:
    ///  * FIFO (lowest index): J0 on M0 [0,4); J1 on M1 [0,1); J2 queued on M0.
    ///    J1 op1 selected at 1 -> M0 queue behind J2. M0: J2 [4,5), J1 [5,6).
    ///    J0 op1 on M1 [4,8); J2 op1 on M1 [8,14). Makespan 14.
    ///  * SPTN: t0 next durations 4,1,1 -> J1 (M1 [0,1)), then J2 (M0 [0,1)), then J0 (M0 [1,5)).
    ///    t1: J1 op1 (M0, queued behind J0 -> [5,6)), J2 op1 (M1 [1,7)).
    ///    J0 op1 M1 [7,11). Makespan 11.
    ///  * LPTN: t0 picks J0 (4) -> M0 [0,4); then J1/J2 both 1 -> J1 -> M1 [0,1); then J2 -> M0 queue.
    ///    identical to FIFO: 14.
    #[test]
    fn rollouts_on_order_sensitive_fixture() {
        let inst = Arc::new(
            JsspInstance::new(2, vec![vec![(0, 4), (1, 4)], vec![(1, 1), (0, 1)], vec![(0, 1), (1, 6)]]).unwrap(),
        );
        for (rule, want) in [(RuleId::FIFO, 14), (RuleId::SPTN, 11), (RuleId::LPTN, 14)] {
            let mut env = JobShopEnv::new(inst.clone(), ScenarioTrace::empty(&inst)).unwrap();
            assert_eq!(rollout(rule, &mut env).unwrap(), want, "{rule}");
        }
    }

    proptest! {
        #[test]
        fn dispatch_returns_valid_and_is_deterministic(
            feats in proptest::collection::vec((0u64..20, 1usize..6, 0u32..9, 0u64..50), 1..8),
            mask_bits in any::<u8>(),
            rule_ix in 0usize..12,
        ) {
            let n = feats.len();
            let mut mask: Vec<bool> = (0..n).map(|i| mask_bits >> (i % 8) & 1 == 1).collect();
            if !mask.iter().any(|&b| b) { mask[0] = true; }
            let v = JobView { jobs: feats.iter().map(|&(r, ops, d, w)| JobFeatures {
                first_release: r, total_ops: ops, remaining_ops: ops, next_duration: d,
                total_work: w, remaining_work: w, waiting: r, head_entered_at: None,
            }).collect() };
            let rule = RuleId::ALL[rule_ix];
            let a = dispatch(rule, &v, &mask).unwrap();
            prop_assert!(mask[a]);
            prop_assert_eq!(a, dispatch(rule, &v, &mask).unwrap());
        }

        #[test]
        fn dual_rules_disagree_on_strict_orders(keys in proptest::collection::hash_set(0u64..1000, 2..7)) {
            let keys: Vec<u64> = keys.into_iter().collect();
            let v = JobView { jobs: keys.iter().map(|&k| JobFeatures {
                total_ops: k as usize, remaining_ops: k as usize, next_duration: k as u32,
                total_work: k, remaining_work: k, ..Default::default()
            }).collect() };
            let mask = vec![true; keys.len()];
            for (a, b) in [(RuleId::SPS, RuleId::LPS), (RuleId::SPTN, RuleId::LPTN), (RuleId::MTWR, RuleId::LTWR),
                           (RuleId::SPT, RuleId::LPT), (RuleId::SPSR, RuleId::LPSR)] {
                prop_assert_ne!(dispatch(a, &v, &mask).unwrap(), dispatch(b, &v, &mask).unwrap());
            }
        }
    }
}
