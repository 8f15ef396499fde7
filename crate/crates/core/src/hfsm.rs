//! Hierarchical finite-state machines for task scripts.
//!
//! Machines are data (JSON), not code: states, a declared event alphabet,
//! transitions, optional per-state entry commands, and optional nested
//! machines inside composite states. The runtime delivers events to the
//! deepest active machine first and lets them bubble up; a declared event no
//! machine handles is silently ignored, an event nobody declared is an error.
//! `error` is special-cased: the deepest active machine that declares a
//! recovery state jumps there in one step. When a nested machine reaches a
//! terminal state, its parent receives a synthesized `child-succeeded` /
//! `child-failed` / `child-aborted` event within the same step.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Succeeded,
    Failed,
    Aborted,
}

impl TerminalKind {
    fn child_event(self) -> &'static str {
        match self {
            TerminalKind::Succeeded => "child-succeeded",
            TerminalKind::Failed => "child-failed",
            TerminalKind::Aborted => "child-aborted",
        }
    }
}

impl fmt::Display for TerminalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalKind::Succeeded => "succeeded",
            TerminalKind::Failed => "failed",
            TerminalKind::Aborted => "aborted",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDef {
    pub name: String,
    /// Command emitted when the state is entered.
    #[serde(default)]
    pub entry: Option<String>,
    /// Nested machine making this a composite state.
    #[serde(default)]
    pub machine: Option<Box<MachineDefinition>>,
    /// Reaching this state ends the machine with the given status.
    #[serde(default)]
    pub terminal: Option<TerminalKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionDef {
    pub from: String,
    pub on: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineDefinition {
    pub name: String,
    /// Declared event alphabet. Transitions may only use these.
    pub events: Vec<String>,
    pub initial: String,
    /// State to jump to when an `error` event arrives.
    #[serde(default)]
    pub recovery: Option<String>,
    pub states: Vec<StateDef>,
    pub transitions: Vec<TransitionDef>,
}

/// A structural problem found by validation. Each one names the machine it
/// was found in, so defects in nested machines are attributable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Defect {
    DuplicateState { machine: String, state: String },
    UnknownInitial { machine: String, initial: String },
    UnknownRecovery { machine: String, recovery: String },
    UnknownTransitionState { machine: String, state: String },
    UndeclaredTransitionEvent { machine: String, event: String },
    UnreachableState { machine: String, state: String },
    NoTerminalState { machine: String },
    NoPathToTerminal { machine: String, state: String },
    UnhandledChildTerminal { machine: String, state: String, event: String },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::DuplicateState { machine, state } => {
                write!(f, "[{machine}] duplicate state `{state}`")
            }
            Defect::UnknownInitial { machine, initial } => {
                write!(f, "[{machine}] initial state `{initial}` does not exist")
            }
            Defect::UnknownRecovery { machine, recovery } => {
                write!(f, "[{machine}] recovery state `{recovery}` does not exist")
            }
            Defect::UnknownTransitionState { machine, state } => {
                write!(f, "[{machine}] transition references unknown state `{state}`")
            }
            Defect::UndeclaredTransitionEvent { machine, event } => {
                write!(f, "[{machine}] transition fires on undeclared event `{event}`")
            }
            Defect::UnreachableState { machine, state } => {
                write!(f, "[{machine}] state `{state}` is unreachable")
            }
            Defect::NoTerminalState { machine } => {
                write!(f, "[{machine}] machine has no terminal state")
            }
            Defect::NoPathToTerminal { machine, state } => {
                write!(f, "[{machine}] no path from `{state}` to any terminal state")
            }
            Defect::UnhandledChildTerminal { machine, state, event } => {
                write!(
                    f,
                    "[{machine}] composite `{state}` can end with `{event}` which is not handled"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum HfsmError {
    #[error("invalid machine: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
    #[error("undeclared event `{0}`")]
    UndeclaredEvent(String),
    #[error("machine not started; call reset() first")]
    NotStarted,
    #[error("step limit of {0} exceeded")]
    StepLimitExceeded(u64),
    #[error("driver produced no event while the machine was still running")]
    DriverExhausted,
    #[error("failed to read machine: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode machine: {0}")]
    Json(#[from] serde_json::Error),
}

impl MachineDefinition {
    pub fn from_json(json: &str) -> Result<Self, HfsmError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HfsmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    /// Structural validation of this machine and every nested one.
    pub fn validate(&self) -> Vec<Defect> {
        let mut out = Vec::new();
        self.validate_into(&mut out);
        out
    }

    fn validate_into(&self, out: &mut Vec<Defect>) {
        let m = || self.name.clone();
        let mut names = BTreeSet::new();
        for s in &self.states {
            if !names.insert(s.name.as_str()) {
                out.push(Defect::DuplicateState { machine: m(), state: s.name.clone() });
            }
        }
        if !names.contains(self.initial.as_str()) {
            out.push(Defect::UnknownInitial { machine: m(), initial: self.initial.clone() });
        }
        if let Some(r) = &self.recovery {
            if !names.contains(r.as_str()) {
                out.push(Defect::UnknownRecovery { machine: m(), recovery: r.clone() });
            }
        }
        let declared: BTreeSet<&str> = self.events.iter().map(String::as_str).collect();
        for t in &self.transitions {
            for endpoint in [&t.from, &t.to] {
                if !names.contains(endpoint.as_str()) {
                    out.push(Defect::UnknownTransitionState {
                        machine: m(),
                        state: endpoint.clone(),
                    });
                }
            }
            if !declared.contains(t.on.as_str()) {
                out.push(Defect::UndeclaredTransitionEvent { machine: m(), event: t.on.clone() });
            }
        }
        // reachability from the initial state (and the recovery state, which
        // is entered out-of-band)
        let mut reachable: BTreeSet<&str> = BTreeSet::new();
        let mut frontier: Vec<&str> = Vec::new();
        for root in std::iter::once(self.initial.as_str())
            .chain(self.recovery.as_deref())
            .filter(|r| names.contains(r))
        {
            if reachable.insert(root) {
                frontier.push(root);
            }
        }
        while let Some(s) = frontier.pop() {
            for t in self.transitions.iter().filter(|t| t.from == s) {
                if names.contains(t.to.as_str()) && reachable.insert(&t.to) {
                    frontier.push(&t.to);
                }
            }
        }
        for s in &self.states {
            if !reachable.contains(s.name.as_str()) {
                out.push(Defect::UnreachableState { machine: m(), state: s.name.clone() });
            }
        }
        // every state must be able to end the machine
        let terminals: BTreeSet<&str> = self
            .states
            .iter()
            .filter(|s| s.terminal.is_some())
            .map(|s| s.name.as_str())
            .collect();
        if terminals.is_empty() {
            out.push(Defect::NoTerminalState { machine: m() });
        } else {
            for s in &self.states {
                let mut seen: BTreeSet<&str> = BTreeSet::new();
                let mut frontier = vec![s.name.as_str()];
                seen.insert(s.name.as_str());
                let mut hits_terminal = terminals.contains(s.name.as_str());
                while let Some(cur) = frontier.pop() {
                    if hits_terminal {
                        break;
                    }
                    for t in self.transitions.iter().filter(|t| t.from == cur) {
                        if terminals.contains(t.to.as_str()) {
                            hits_terminal = true;
                            break;
                        }
                        if seen.insert(&t.to) {
                            frontier.push(&t.to);
                        }
                    }
                }
                if !hits_terminal {
                    out.push(Defect::NoPathToTerminal { machine: m(), state: s.name.clone() });
                }
            }
        }
        // composite children: their endings must be handled here
        for s in &self.states {
            if let Some(child) = &s.machine {
                for kind in child.states.iter().filter_map(|cs| cs.terminal) {
                    let ev = kind.child_event();
                    let handled = self
                        .transitions
                        .iter()
                        .any(|t| t.from == s.name && t.on == ev);
                    if !declared.contains(ev) || !handled {
                        out.push(Defect::UnhandledChildTerminal {
                            machine: m(),
                            state: s.name.clone(),
                            event: ev.to_string(),
                        });
                    }
                }
                child.validate_into(out);
            }
        }
    }
}

/// Result of one `step` (or `reset`): the entry commands emitted, and the
/// root terminal status if the machine finished.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub commands: Vec<String>,
    pub terminal: Option<TerminalKind>,
}

/// A running machine: the definition plus the active state at every level of
/// nesting (root first).
#[derive(Debug, Clone)]
pub struct Machine {
    def: MachineDefinition,
    active: Vec<String>,
}

const MAX_CASCADE: usize = 64;

impl Machine {
    /// Validate and wrap a definition. The machine starts unentered; call
    /// [`Machine::reset`] to enter the initial configuration.
    pub fn new(def: MachineDefinition) -> Result<Self, HfsmError> {
        let defects = def.validate();
        if !defects.is_empty() {
            return Err(HfsmError::Invalid(defects));
        }
        Ok(Machine { def, active: Vec::new() })
    }

    pub fn definition(&self) -> &MachineDefinition {
        &self.def
    }

    /// Active state names from the root machine inward.
    pub fn active_path(&self) -> &[String] {
        &self.active
    }

    fn machine_at(&self, level: usize) -> &MachineDefinition {
        let mut m = &self.def;
        for name in &self.active[..level] {
            m = m
                .state(name)
                .and_then(|s| s.machine.as_deref())
                .expect("active path only descends into composites");
        }
        m
    }

    /// Enter `to` at `level`, dropping any deeper configuration and
    /// descending into nested initial states. Entry commands are emitted
    /// outermost first.
    fn enter(&mut self, level: usize, to: &str, commands: &mut Vec<String>) {
        self.active.truncate(level);
        let mut target = to.to_string();
        loop {
            let state = self
                .machine_at(self.active.len())
                .state(&target)
                .expect("validated state name")
                .clone();
            self.active.push(target);
            if let Some(cmd) = &state.entry {
                commands.push(cmd.clone());
            }
            match &state.machine {
                Some(child) => target = child.initial.clone(),
                None => break,
            }
        }
    }

    /// Enter the initial configuration and report its entry commands (plus a
    /// terminal status, should the initial state already be terminal).
    pub fn reset(&mut self) -> Result<StepResult, HfsmError> {
        self.active.clear();
        let mut commands = Vec::new();
        let initial = self.def.initial.clone();
        self.enter(0, &initial, &mut commands);
        let terminal = self.cascade(&mut commands)?;
        Ok(StepResult { commands, terminal })
    }

    /// While the deepest active state is terminal, tell its parent (or finish
    /// the run when it is the root that ended).
    fn cascade(&mut self, commands: &mut Vec<String>) -> Result<Option<TerminalKind>, HfsmError> {
        for _ in 0..MAX_CASCADE {
            let depth = self.active.len() - 1;
            let m = self.machine_at(depth);
            let state = m.state(&self.active[depth]).expect("active state exists");
            let Some(kind) = state.terminal else {
                return Ok(None);
            };
            if depth == 0 {
                return Ok(Some(kind));
            }
            // synthesized notification to the ancestors, deepest first
            let ev = kind.child_event();
            let mut fired = false;
            for level in (0..depth).rev() {
                let lm = self.machine_at(level);
                if let Some(t) = lm
                    .transitions
                    .iter()
                    .find(|t| t.from == self.active[level] && t.on == ev)
                {
                    let to = t.to.clone();
                    self.enter(level, &to, commands);
                    fired = true;
                    break;
                }
            }
            if !fired {
                // validation guarantees a handler, but a machine entered via
                // recovery may sit in a state without one; stay put
                return Ok(None);
            }
        }
        Err(HfsmError::StepLimitExceeded(MAX_CASCADE as u64))
    }

    /// Deliver one event.
    pub fn step(&mut self, event: &str) -> Result<StepResult, HfsmError> {
        if self.active.is_empty() {
            return Err(HfsmError::NotStarted);
        }
        // A finished machine ignores everything, even `error`: no transition,
        // no emission.
        if let Some(kind) = self.def.state(&self.active[0]).and_then(|s| s.terminal) {
            return Ok(StepResult { commands: Vec::new(), terminal: Some(kind) });
        }
        let mut commands = Vec::new();
        let depth = self.active.len() - 1;

        // `error` jumps the deepest machine that declared a recovery state
        if event == "error" {
            if let Some(level) = (0..=depth)
                .rev()
                .find(|&l| self.machine_at(l).recovery.is_some())
            {
                let to = self.machine_at(level).recovery.clone().expect("checked");
                self.enter(level, &to, &mut commands);
                let terminal = self.cascade(&mut commands)?;
                return Ok(StepResult { commands, terminal });
            }
        }

        // normal delivery: deepest machine first, bubbling outward
        let mut declared_anywhere = false;
        for level in (0..=depth).rev() {
            let m = self.machine_at(level);
            if m.events.iter().any(|e| e == event) {
                declared_anywhere = true;
                if let Some(t) = m
                    .transitions
                    .iter()
                    .find(|t| t.from == self.active[level] && t.on == event)
                {
                    let to = t.to.clone();
                    self.enter(level, &to, &mut commands);
                    let terminal = self.cascade(&mut commands)?;
                    return Ok(StepResult { commands, terminal });
                }
            }
        }
        if declared_anywhere {
            // declared but unhandled in this configuration: ignore
            Ok(StepResult { commands, terminal: None })
        } else {
            Err(HfsmError::UndeclaredEvent(event.to_string()))
        }
    }

    /// Reset, then pump events from `driver` until the machine reaches a
    /// root terminal state. The driver sees the entry commands emitted by the
    /// previous step and answers with the next event (`None` meaning it has
    /// nothing left to say, which is an error while the machine still runs).
    pub fn run(
        &mut self,
        mut driver: impl FnMut(&[String]) -> Option<String>,
        max_steps: u64,
    ) -> Result<TerminalKind, HfsmError> {
        let mut r = self.reset()?;
        if let Some(k) = r.terminal {
            return Ok(k);
        }
        for _ in 0..max_steps {
            let Some(event) = driver(&r.commands) else {
                return Err(HfsmError::DriverExhausted);
            };
            r = self.step(&event)?;
            if let Some(k) = r.terminal {
                return Ok(k);
            }
        }
        Err(HfsmError::StepLimitExceeded(max_steps))
    }
}
