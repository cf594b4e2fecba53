//! A colored-timed Petri net with FIFO places.
//!
//! Arcs have weight one. Output arcs either forward the token consumed from a
//! given input place (identity expression) or emit a fixed token (used to hand
//! a resource token back to an idle place). Besides token-based enabling, every
//! transition can be force-disabled from outside, which is how machine
//! breakdowns and scheduled releases are layered onto the net.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PlaceId = usize;
pub type TransitionId = usize;

/// Upper bound on firings in a single autonomous cascade.
const MAX_CASCADE: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PetriError {
    #[error("unknown transition {0}")]
    UnknownTransition(TransitionId),
    #[error("unknown place {0}")]
    UnknownPlace(PlaceId),
    #[error("transition {0} is not enabled")]
    NotEnabled(TransitionId),
    #[error("malformed transition: {0}")]
    Malformed(String),
    #[error("clock cannot move backwards from {from} to {to}")]
    ClockRewind { from: u64, to: u64 },
    #[error("autonomous cascade did not reach quiescence")]
    Livelock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    /// A job operation in flight.
    Operation,
    /// A machine availability token.
    Resource,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub job_id: usize,
    pub op_index: usize,
    /// Machine index the token is bound to.
    pub color: usize,
    pub proc_time: u32,
    pub elapsed: u32,
    pub entered_at: u64,
}

impl Token {
    pub fn operation(job_id: usize, op_index: usize, color: usize, proc_time: u32) -> Self {
        Self {
            kind: TokenKind::Operation,
            job_id,
            op_index,
            color,
            proc_time,
            elapsed: 0,
            entered_at: 0,
        }
    }

    pub fn resource(color: usize) -> Self {
        Self {
            kind: TokenKind::Resource,
            job_id: usize::MAX,
            op_index: 0,
            color,
            proc_time: 0,
            elapsed: 0,
            entered_at: 0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.elapsed >= self.proc_time
    }

    pub fn remaining(&self) -> u32 {
        self.proc_time - self.elapsed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaceRole {
    PlannedJobs,
    Job,
    RoutingBuffer,
    MachineBuffer,
    MachineIdle,
    MachineProc,
    Delivery,
}

impl PlaceRole {
    /// Places an operation token passes through between selection and delivery.
    pub fn is_in_flight(self) -> bool {
        matches!(
            self,
            PlaceRole::RoutingBuffer | PlaceRole::MachineBuffer | PlaceRole::MachineProc
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Place {
    pub id: PlaceId,
    pub role: PlaceRole,
    queue: VecDeque<Token>,
}

impl Place {
    pub fn head(&self) -> Option<&Token> {
        self.queue.front()
    }

    pub fn tail(&self) -> Option<&Token> {
        self.queue.back()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.queue.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    /// Fires only on an external decision.
    Controllable,
    /// Fires as soon as it is enabled.
    Autonomous,
    /// Autonomous, additionally requires the head token color to match.
    Colored,
    /// Autonomous, additionally requires the head token to have finished its sojourn.
    Timed,
}

/// Expression on an output arc.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcExpr {
    /// Forward the token consumed from the input with this position.
    Identity(usize),
    /// Produce a copy of a fixed token.
    Constant(Token),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransitionId,
    pub kind: TransitionKind,
    pub inputs: Vec<PlaceId>,
    pub outputs: Vec<(PlaceId, ArcExpr)>,
    pub color_filter: Option<usize>,
    /// Job whose operations must all be out of transit/processing places.
    pub job_guard: Option<usize>,
    pub force_disabled: bool,
}

/// Builder-side description of a transition.
#[derive(Clone, Debug)]
pub struct TransitionSpec {
    pub kind: TransitionKind,
    pub inputs: Vec<PlaceId>,
    pub outputs: Vec<(PlaceId, ArcExpr)>,
    pub color_filter: Option<usize>,
    pub job_guard: Option<usize>,
}

impl TransitionSpec {
    pub fn new(kind: TransitionKind, inputs: Vec<PlaceId>, outputs: Vec<(PlaceId, ArcExpr)>) -> Self {
        Self {
            kind,
            inputs,
            outputs,
            color_filter: None,
            job_guard: None,
        }
    }

    /// One input, one output, token forwarded unchanged.
    pub fn arc(kind: TransitionKind, from: PlaceId, to: PlaceId) -> Self {
        Self::new(kind, vec![from], vec![(to, ArcExpr::Identity(0))])
    }

    pub fn with_color(mut self, color: usize) -> Self {
        self.color_filter = Some(color);
        self
    }

    pub fn with_job_guard(mut self, job: usize) -> Self {
        self.job_guard = Some(job);
        self
    }
}

/// The marking, clock and transition flags of a net.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PetriNet {
    clock: u64,
    places: Vec<Place>,
    transitions: Vec<Transition>,
    controllable: Vec<TransitionId>,
}

impl PetriNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn place(&self, id: PlaceId) -> Result<&Place, PetriError> {
        self.places.get(id).ok_or(PetriError::UnknownPlace(id))
    }

    pub fn transition(&self, id: TransitionId) -> Result<&Transition, PetriError> {
        self.transitions.get(id).ok_or(PetriError::UnknownTransition(id))
    }

    /// Controllable transition ids in ascending order; this is the action index order.
    pub fn controllable(&self) -> &[TransitionId] {
        &self.controllable
    }

    pub fn add_place(&mut self, role: PlaceRole) -> PlaceId {
        let id = self.places.len();
        self.places.push(Place {
            id,
            role,
            queue: VecDeque::new(),
        });
        id
    }

    pub fn add_transition(&mut self, spec: TransitionSpec) -> Result<TransitionId, PetriError> {
        let id = self.transitions.len();
        let bad = |msg: &str| Err(PetriError::Malformed(format!("transition {id}: {msg}")));
        if spec.inputs.is_empty() || spec.outputs.is_empty() {
            return bad("inputs and outputs must be nonempty");
        }
        for &p in spec.inputs.iter().chain(spec.outputs.iter().map(|(p, _)| p)) {
            if p >= self.places.len() {
                return Err(PetriError::UnknownPlace(p));
            }
        }
        if spec.outputs.iter().any(|(p, _)| spec.inputs.contains(p)) {
            return bad("inputs and outputs must be disjoint");
        }
        for (_, expr) in &spec.outputs {
            if let ArcExpr::Identity(i) = expr {
                if *i >= spec.inputs.len() {
                    return bad("identity arc refers to a missing input");
                }
            }
        }
        match (spec.kind, spec.color_filter) {
            (TransitionKind::Colored, None) => return bad("colored transition needs a color filter"),
            (TransitionKind::Colored, Some(_)) | (_, None) => {}
            (_, Some(_)) => return bad("only colored transitions carry a color filter"),
        }
        if spec.kind == TransitionKind::Controllable {
            self.controllable.push(id);
        }
        self.transitions.push(Transition {
            id,
            kind: spec.kind,
            inputs: spec.inputs,
            outputs: spec.outputs,
            color_filter: spec.color_filter,
            job_guard: spec.job_guard,
            force_disabled: false,
        });
        Ok(id)
    }

    /// Append a token to a place, stamping it with the current clock.
    pub fn push_token(&mut self, place: PlaceId, mut token: Token) -> Result<(), PetriError> {
        token.entered_at = self.clock;
        self.places
            .get_mut(place)
            .ok_or(PetriError::UnknownPlace(place))?
            .queue
            .push_back(token);
        Ok(())
    }

    pub fn token_count(&self) -> usize {
        self.places.iter().map(Place::len).sum()
    }

    pub fn is_enabled(&self, id: TransitionId) -> Result<bool, PetriError> {
        let t = self.transition(id)?;
        if t.force_disabled {
            return Ok(false);
        }
        for &p in &t.inputs {
            if self.places[p].is_empty() {
                return Ok(false);
            }
        }
        let head = self.places[t.inputs[0]].head().expect("checked nonempty");
        if let Some(color) = t.color_filter {
            if head.color != color {
                return Ok(false);
            }
        }
        if t.kind == TransitionKind::Timed && !head.is_complete() {
            return Ok(false);
        }
        if let Some(job) = t.job_guard {
            let busy = self
                .places
                .iter()
                .filter(|p| p.role.is_in_flight())
                .flat_map(Place::tokens)
                .any(|tok| tok.kind == TokenKind::Operation && tok.job_id == job);
            if busy {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Fire an enabled transition: one token leaves every input head, one token
    /// is appended to every output.
    pub fn fire(&mut self, id: TransitionId) -> Result<(), PetriError> {
        if !self.is_enabled(id)? {
            return Err(PetriError::NotEnabled(id));
        }
        let t = &self.transitions[id];
        let consumed: Vec<Token> = t
            .inputs
            .iter()
            .map(|&p| self.places[p].queue.pop_front().expect("enabled"))
            .collect();
        let clock = self.clock;
        for (p, expr) in &t.outputs {
            let mut tok = match expr {
                ArcExpr::Identity(i) => consumed[*i].clone(),
                ArcExpr::Constant(tok) => tok.clone(),
            };
            tok.entered_at = clock;
            self.places[*p].queue.push_back(tok);
        }
        Ok(())
    }

    pub fn controllable_mask(&self) -> Vec<bool> {
        self.controllable
            .iter()
            .map(|&t| self.is_enabled(t).expect("controllable ids are valid"))
            .collect()
    }

    pub fn set_forced(&mut self, id: TransitionId, disabled: bool) -> Result<(), PetriError> {
        self.transitions
            .get_mut(id)
            .ok_or(PetriError::UnknownTransition(id))?
            .force_disabled = disabled;
        Ok(())
    }

    /// Lowest-id enabled transition that does not wait for an external decision.
    pub fn first_enabled_autonomous(&self) -> Option<TransitionId> {
        self.transitions
            .iter()
            .filter(|t| t.kind != TransitionKind::Controllable)
            .map(|t| t.id)
            .find(|&id| self.is_enabled(id).expect("own ids are valid"))
    }

    /// Fire autonomous, colored and timed transitions in ascending id order until
    /// none is enabled. `before_each` runs before every selection (so callers
    /// can refresh forced flags) and `after_fire` after every firing.
    pub fn run_to_quiescence<B, A>(&mut self, mut before_each: B, mut after_fire: A) -> Result<usize, PetriError>
    where
        B: FnMut(&mut PetriNet),
        A: FnMut(&PetriNet, TransitionId),
    {
        let mut fired = 0;
        loop {
            before_each(self);
            let Some(id) = self.first_enabled_autonomous() else {
                return Ok(fired);
            };
            self.fire(id)?;
            after_fire(self, id);
            fired += 1;
            if fired > MAX_CASCADE {
                return Err(PetriError::Livelock);
            }
        }
    }

    pub fn set_clock(&mut self, to: u64) -> Result<(), PetriError> {
        if to < self.clock {
            return Err(PetriError::ClockRewind { from: self.clock, to });
        }
        self.clock = to;
        Ok(())
    }

    /// Advance the head token of a place by one step of processing. Returns
    /// whether progress was made.
    pub fn progress_head(&mut self, place: PlaceId) -> Result<bool, PetriError> {
        let place = self.places.get_mut(place).ok_or(PetriError::UnknownPlace(place))?;
        match place.queue.front_mut() {
            Some(tok) if !tok.is_complete() => {
                tok.elapsed += 1;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}
