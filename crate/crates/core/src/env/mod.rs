//! The job-shop net and its decision loop.
//!
//! Per job there is a planned-jobs place holding every operation token, a job
//! place holding released tokens, a controllable *select* transition and an
//! autonomous *release* transition. A shared routing buffer feeds one colored
//! *route* transition per machine; each machine then has a buffer, an idle
//! place with one resource token, an autonomous *start*, a processing place,
//! a timed *finish* and a delivery place.
//!
//! Breakdowns force-disable the machine's start transition and freeze the
//! progress of the token being processed. Releases force-disable the release
//! transition until the head token's release step.

mod gantt;

use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disruptions::ScenarioTrace;
use crate::petri::{ArcExpr, PetriError, PetriNet, PlaceId, PlaceRole, Token, TransitionId, TransitionKind, TransitionSpec};

pub use gantt::{
    gantt_csv, gantt_json, gantt_svg, parse_gantt_csv, validate_schedule, GanttEntry, Violation,
};

/// Hard stop for runaway simulations.
const MAX_CLOCK: u64 = 1 << 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance has no jobs")]
    NoJobs,
    #[error("instance has no machines")]
    NoMachines,
    #[error("job {0} has no operations")]
    EmptyJob(usize),
    #[error("job {job} op {op}: duration must be positive")]
    ZeroDuration { job: usize, op: usize },
    #[error("job {job} op {op}: machine {machine} out of range (n_machines = {n_machines})")]
    MachineOutOfRange {
        job: usize,
        op: usize,
        machine: usize,
        n_machines: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error("action {action} out of range for {n_jobs} jobs")]
    InvalidAction { action: usize, n_jobs: usize },
    #[error("action {0} is masked out")]
    MaskedAction(usize),
    #[error("episode already terminated")]
    Terminated,
    #[error("episode has not terminated")]
    NotTerminal,
    #[error("no valid action available")]
    EmptyMask,
    #[error("scenario does not fit instance: {0}")]
    ScenarioMismatch(String),
    #[error("trace does not fit instance: {0}")]
    TraceMismatch(String),
    #[error("simulation clock exceeded {0}")]
    Runaway(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsspInstance {
    n_machines: usize,
    jobs: Vec<Vec<Operation>>,
}

impl JsspInstance {
    pub fn new(n_machines: usize, jobs: Vec<Vec<(usize, u32)>>) -> Result<Self, InstanceError> {
        if jobs.is_empty() {
            return Err(InstanceError::NoJobs);
        }
        if n_machines == 0 {
            return Err(InstanceError::NoMachines);
        }
        let mut out = Vec::with_capacity(jobs.len());
        for (j, ops) in jobs.into_iter().enumerate() {
            if ops.is_empty() {
                return Err(InstanceError::EmptyJob(j));
            }
            let mut row = Vec::with_capacity(ops.len());
            for (k, (machine, duration)) in ops.into_iter().enumerate() {
                if duration == 0 {
                    return Err(InstanceError::ZeroDuration { job: j, op: k });
                }
                if machine >= n_machines {
                    return Err(InstanceError::MachineOutOfRange {
                        job: j,
                        op: k,
                        machine,
                        n_machines,
                    });
                }
                row.push(Operation { machine, duration });
            }
            out.push(row);
        }
        Ok(Self { n_machines, jobs: out })
    }

    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_machines(&self) -> usize {
        self.n_machines
    }

    pub fn jobs(&self) -> &[Vec<Operation>] {
        &self.jobs
    }

    pub fn op(&self, job: usize, op: usize) -> Operation {
        self.jobs[job][op]
    }

    pub fn total_ops(&self) -> usize {
        self.jobs.iter().map(Vec::len).sum()
    }

    pub fn max_job_len(&self) -> usize {
        self.jobs.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_duration(&self) -> u32 {
        self.jobs.iter().flatten().map(|o| o.duration).max().unwrap_or(1)
    }

    pub fn job_work(&self, job: usize) -> u64 {
        self.jobs[job].iter().map(|o| u64::from(o.duration)).sum()
    }

    pub fn total_work(&self) -> u64 {
        (0..self.n_jobs()).map(|j| self.job_work(j)).sum()
    }

    pub fn mean_duration(&self) -> f64 {
        self.total_work() as f64 / self.total_ops() as f64
    }

    /// Length of the observation vector for this instance size.
    pub fn observation_len(&self) -> usize {
        observation_len(self.n_jobs(), self.n_machines)
    }
}

pub fn observation_len(n_jobs: usize, n_machines: usize) -> usize {
    6 * n_jobs + 4 * n_machines + 1
}

/// What a transition of the job-shop net does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionRole {
    Select(usize),
    Release(usize),
    Route(usize),
    Start(usize),
    Finish(usize),
}

/// Place and transition ids of a built job-shop net.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetIndex {
    pub planned: Vec<PlaceId>,
    pub job: Vec<PlaceId>,
    pub routing: PlaceId,
    pub buffer: Vec<PlaceId>,
    pub idle: Vec<PlaceId>,
    pub processing: Vec<PlaceId>,
    pub delivery: Vec<PlaceId>,
    pub select: Vec<TransitionId>,
    pub release: Vec<TransitionId>,
    pub route: Vec<TransitionId>,
    pub start: Vec<TransitionId>,
    pub finish: Vec<TransitionId>,
    pub roles: Vec<TransitionRole>,
}

/// Build the job-shop net with every operation token in its planned-jobs place.
pub fn build_net(instance: &JsspInstance) -> Result<(PetriNet, NetIndex), EnvError> {
    let (n, m) = (instance.n_jobs(), instance.n_machines());
    let mut net = PetriNet::new();
    let planned: Vec<_> = (0..n).map(|_| net.add_place(PlaceRole::PlannedJobs)).collect();
    let job: Vec<_> = (0..n).map(|_| net.add_place(PlaceRole::Job)).collect();
    let routing = net.add_place(PlaceRole::RoutingBuffer);
    let buffer: Vec<_> = (0..m).map(|_| net.add_place(PlaceRole::MachineBuffer)).collect();
    let idle: Vec<_> = (0..m).map(|_| net.add_place(PlaceRole::MachineIdle)).collect();
    let processing: Vec<_> = (0..m).map(|_| net.add_place(PlaceRole::MachineProc)).collect();
    let delivery: Vec<_> = (0..m).map(|_| net.add_place(PlaceRole::Delivery)).collect();

    let mut roles = Vec::new();
    let mut add = |net: &mut PetriNet, spec, role| -> Result<TransitionId, EnvError> {
        roles.push(role);
        Ok(net.add_transition(spec)?)
    };
    let select = (0..n)
        .map(|j| {
            let spec = TransitionSpec::arc(TransitionKind::Controllable, job[j], routing).with_job_guard(j);
            add(&mut net, spec, TransitionRole::Select(j))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let release = (0..n)
        .map(|j| {
            let spec = TransitionSpec::arc(TransitionKind::Autonomous, planned[j], job[j]);
            add(&mut net, spec, TransitionRole::Release(j))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let route = (0..m)
        .map(|k| {
            let spec = TransitionSpec::arc(TransitionKind::Colored, routing, buffer[k]).with_color(k);
            add(&mut net, spec, TransitionRole::Route(k))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let start = (0..m)
        .map(|k| {
            let spec = TransitionSpec::new(
                TransitionKind::Autonomous,
                vec![buffer[k], idle[k]],
                vec![(processing[k], ArcExpr::Identity(0))],
            );
            add(&mut net, spec, TransitionRole::Start(k))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let finish = (0..m)
        .map(|k| {
            let spec = TransitionSpec::new(
                TransitionKind::Timed,
                vec![processing[k]],
                vec![
                    (delivery[k], ArcExpr::Identity(0)),
                    (idle[k], ArcExpr::Constant(Token::resource(k))),
                ],
            );
            add(&mut net, spec, TransitionRole::Finish(k))
        })
        .collect::<Result<Vec<_>, _>>()?;

    for k in 0..m {
        net.push_token(idle[k], Token::resource(k))?;
    }
    for (j, ops) in instance.jobs().iter().enumerate() {
        for (i, op) in ops.iter().enumerate() {
            net.push_token(planned[j], Token::operation(j, i, op.machine, op.duration))?;
        }
    }
    let index = NetIndex {
        planned,
        job,
        routing,
        buffer,
        idle,
        processing,
        delivery,
        select,
        release,
        route,
        start,
        finish,
        roles,
    };
    Ok((net, index))
}

/// Timing of one operation as it unfolds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
struct OpRecord {
    start: Option<u64>,
    end: Option<u64>,
    pauses: Vec<(u64, u64)>,
}

/// Fixed-layout observation vector with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub clock: u64,
    pub fired: Vec<TransitionId>,
    pub makespan_so_far: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub mask: Vec<bool>,
    pub info: StepInfo,
}

/// A running episode on one instance under one scenario.
#[derive(Clone, Debug)]
pub struct JobShopEnv {
    instance: Arc<JsspInstance>,
    scenario: Arc<ScenarioTrace>,
    index: Arc<NetIndex>,
    net: PetriNet,
    horizon: u64,
    records: Vec<Vec<OpRecord>>,
    next_unselected: Vec<usize>,
    completed: Vec<usize>,
    last_delivery: u64,
    done: bool,
    fired: Vec<TransitionId>,
}

impl JobShopEnv {
    /// New episode; the horizon estimate is the FIFO makespan of the
    /// disruption-free instance.
    pub fn new(instance: Arc<JsspInstance>, scenario: ScenarioTrace) -> Result<Self, EnvError> {
        let horizon = horizon_estimate(&instance);
        Self::with_horizon(instance, scenario, horizon)
    }

    pub fn with_horizon(
        instance: Arc<JsspInstance>,
        scenario: ScenarioTrace,
        horizon: u64,
    ) -> Result<Self, EnvError> {
        scenario.check_against(&instance).map_err(EnvError::ScenarioMismatch)?;
        let (net, index) = build_net(&instance)?;
        let records = instance.jobs().iter().map(|ops| vec![OpRecord::default(); ops.len()]).collect();
        let n = instance.n_jobs();
        let mut env = Self {
            instance,
            scenario: Arc::new(scenario),
            index: Arc::new(index),
            net,
            horizon: horizon.max(1),
            records,
            next_unselected: vec![0; n],
            completed: vec![0; n],
            last_delivery: 0,
            done: false,
            fired: Vec::new(),
        };
        env.settle()?;
        Ok(env)
    }

    pub fn instance(&self) -> &JsspInstance {
        &self.instance
    }

    pub fn instance_arc(&self) -> &Arc<JsspInstance> {
        &self.instance
    }

    pub fn scenario(&self) -> &ScenarioTrace {
        &self.scenario
    }

    pub fn net(&self) -> &PetriNet {
        &self.net
    }

    pub fn index(&self) -> &NetIndex {
        &self.index
    }

    pub fn clock(&self) -> u64 {
        self.net.clock()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Completion time of the last delivered operation.
    pub fn makespan(&self) -> u64 {
        self.last_delivery
    }

    /// Index of the first operation of `job` not yet selected.
    pub fn next_unselected(&self, job: usize) -> usize {
        self.next_unselected[job]
    }

    pub fn completed_ops(&self, job: usize) -> usize {
        self.completed[job]
    }

    /// Head token of the job place (the next selectable operation), if released.
    pub fn job_head(&self, job: usize) -> Option<&Token> {
        self.net.places()[self.index.job[job]].head()
    }

    pub fn mask(&self) -> Vec<bool> {
        if self.done {
            return vec![false; self.instance.n_jobs()];
        }
        self.net.controllable_mask()
    }

    /// True iff every operation is delivered and no intermediate place holds a token.
    pub fn terminal(&self) -> bool {
        let delivered: usize = self.index.delivery.iter().map(|&p| self.net.places()[p].len()).sum();
        delivered == self.instance.total_ops()
            && self.net.places().iter().all(|p| match p.role {
                PlaceRole::Delivery | PlaceRole::MachineIdle => true,
                _ => p.is_empty(),
            })
    }

    /// Fire the select transition of `action`, then let the net run until the
    /// next decision point or the end of the episode.
    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::Terminated);
        }
        let n = self.instance.n_jobs();
        if action >= n {
            return Err(EnvError::InvalidAction { action, n_jobs: n });
        }
        let t = self.index.select[action];
        if !self.net.is_enabled(t)? {
            return Err(EnvError::MaskedAction(action));
        }
        self.fired.clear();
        self.net.fire(t)?;
        self.fired.push(t);
        self.next_unselected[action] += 1;
        self.settle()?;
        let reward = if self.done { -(self.last_delivery as f64) } else { 0.0 };
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.done,
            mask: self.mask(),
            info: StepInfo {
                clock: self.clock(),
                fired: self.fired.clone(),
                makespan_so_far: self.last_delivery,
            },
        })
    }

    /// Replace an invalid raw action by a uniformly drawn valid one.
    pub fn fallback_action<R: Rng + ?Sized>(&self, raw: usize, rng: &mut R) -> Result<usize, EnvError> {
        unmasked_fallback(&self.mask(), raw, rng)
    }

    fn settle(&mut self) -> Result<(), EnvError> {
        loop {
            self.cascade()?;
            if self.terminal() {
                self.done = true;
                return Ok(());
            }
            if self.net.controllable_mask().into_iter().any(|b| b) {
                return Ok(());
            }
            self.tick()?;
        }
    }

    fn cascade(&mut self) -> Result<(), EnvError> {
        let Self {
            net,
            index,
            scenario,
            records,
            completed,
            last_delivery,
            fired,
            ..
        } = self;
        net.run_to_quiescence(
            |net| sync_forced(net, index, scenario),
            |net, t| {
                fired.push(t);
                match index.roles[t] {
                    TransitionRole::Start(m) => {
                        let tok = net.places()[index.processing[m]].head().expect("start fills processing");
                        records[tok.job_id][tok.op_index].start = Some(net.clock());
                    }
                    TransitionRole::Finish(m) => {
                        let tok = net.places()[index.delivery[m]].tail().expect("finish fills delivery");
                        records[tok.job_id][tok.op_index].end = Some(net.clock());
                        completed[tok.job_id] += 1;
                        *last_delivery = net.clock();
                    }
                    _ => {}
                }
            },
        )?;
        Ok(())
    }

    /// One time step: progress on every working machine, pauses on broken ones.
    fn tick(&mut self) -> Result<(), EnvError> {
        let now = self.net.clock();
        if now >= MAX_CLOCK {
            return Err(EnvError::Runaway(MAX_CLOCK));
        }
        for m in 0..self.instance.n_machines() {
            let p = self.index.processing[m];
            let Some(tok) = self.net.places()[p].head() else { continue };
            if self.scenario.is_broken(m, now) {
                let pauses = &mut self.records[tok.job_id][tok.op_index].pauses;
                match pauses.last_mut() {
                    Some(last) if last.1 == now => last.1 = now + 1,
                    _ => pauses.push((now, now + 1)),
                }
            } else {
                self.net.progress_head(p)?;
            }
        }
        self.net.set_clock(now + 1)?;
        Ok(())
    }

    pub fn observe(&self) -> Observation {
        let inst = &*self.instance;
        let (n, m) = (inst.n_jobs(), inst.n_machines());
        let max_dur = f64::from(inst.max_duration());
        let max_len = inst.max_job_len() as f64;
        let total_work = inst.total_work() as f64;
        let clock = self.clock();
        let mut obs = Vec::with_capacity(inst.observation_len());
        for j in 0..n {
            let ops = &inst.jobs()[j];
            let next = self.next_unselected[j];
            match ops.get(next) {
                Some(op) => {
                    obs.push(op.machine as f64 / m as f64);
                    obs.push(f64::from(op.duration) / max_dur);
                }
                None => obs.extend([0.0, 0.0]),
            }
            let done = self.completed[j];
            obs.push((ops.len() - done) as f64 / max_len);
            let remaining_work: u64 = ops[done..].iter().map(|o| u64::from(o.duration)).sum();
            obs.push(remaining_work as f64 / total_work);
            let place = &self.net.places()[self.index.job[j]];
            obs.push(place.len() as f64 / ops.len() as f64);
            let wait = place.head().map_or(0, |t| clock - t.entered_at);
            obs.push(wait as f64 / (clock + 1) as f64);
        }
        for k in 0..m {
            let head = self.net.places()[self.index.processing[k]].head();
            obs.push(if head.is_some() { 1.0 } else { 0.0 });
            obs.push(if self.scenario.is_broken(k, clock) { 1.0 } else { 0.0 });
            obs.push(head.map_or(0.0, |t| f64::from(t.remaining()) / max_dur));
            obs.push(self.net.places()[self.index.buffer[k]].len() as f64 / n as f64);
        }
        obs.push(clock as f64 / self.horizon as f64);
        for x in &mut obs {
            *x = x.clamp(0.0, 1.0);
        }
        Observation(obs)
    }

    /// One entry per operation, ordered by job then operation.
    pub fn schedule_trace(&self) -> Result<Vec<GanttEntry>, EnvError> {
        if !self.done {
            return Err(EnvError::NotTerminal);
        }
        let mut out = Vec::with_capacity(self.instance.total_ops());
        for (j, recs) in self.records.iter().enumerate() {
            for (k, rec) in recs.iter().enumerate() {
                out.push(GanttEntry {
                    job: j,
                    op: k,
                    machine: self.instance.op(j, k).machine,
                    start: rec.start.expect("terminal episode started every op"),
                    end: rec.end.expect("terminal episode finished every op"),
                    pauses: rec.pauses.clone(),
                });
            }
        }
        Ok(out)
    }
}

/// Refresh forced flags for the current clock: broken machines cannot start,
/// and a job releases its next operation only once that operation's release
/// step is reached.
fn sync_forced(net: &mut PetriNet, index: &NetIndex, scenario: &ScenarioTrace) {
    let clock = net.clock();
    for (m, &t) in index.start.iter().enumerate() {
        net.set_forced(t, scenario.is_broken(m, clock)).expect("own transition");
    }
    for (j, &t) in index.release.iter().enumerate() {
        let due = net.places()[index.planned[j]]
            .head()
            .is_some_and(|tok| scenario.release(j, tok.op_index) <= clock);
        net.set_forced(t, !due).expect("own transition");
    }
}

/// `raw` if it is valid, otherwise a uniformly drawn valid action.
pub fn unmasked_fallback<R: Rng + ?Sized>(mask: &[bool], raw: usize, rng: &mut R) -> Result<usize, EnvError> {
    if mask.get(raw).copied().unwrap_or(false) {
        return Ok(raw);
    }
    let valid: Vec<usize> = mask.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect();
    if valid.is_empty() {
        return Err(EnvError::EmptyMask);
    }
    Ok(valid[rng.random_range(0..valid.len())])
}

/// Makespan of a FIFO rollout on the disruption-free instance.
pub fn horizon_estimate(instance: &JsspInstance) -> u64 {
    let inst = Arc::new(instance.clone());
    let mut env = JobShopEnv::with_horizon(inst, ScenarioTrace::empty(instance), 1)
        .expect("validated instance builds");
    while !env.is_done() {
        // with every release at 0, FIFO reduces to the lowest valid index
        let a = env.mask().iter().position(|&v| v).expect("decision points have a valid action");
        env.step(a).expect("valid action");
    }
    env.makespan().max(1)
}
