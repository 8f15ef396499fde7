//! Plan execution: drives a [`Skills`] backend through a plan, turns failed
//! `find`s into refutations and replans, retries transient skill failures
//! once, and keeps a structured event log of everything it did.

use crate::kb::{DiagnosisReport, KnowledgeBase};
use crate::planner::{self, Action, Goal, Replan};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use thiserror::Error;

/// Cooperative cancellation flag shared between the executor and whoever
/// wants to interrupt it (the REPL's reader thread, a test). Skills poll it
/// once per simulated tick, so an abort lands mid-navigation rather than at
/// the next action boundary.
#[derive(Debug, Clone, Default)]
pub struct AbortHandle(Arc<AtomicBool>);

impl AbortHandle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn request(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn clear(&self) {
        self.0.store(false, Ordering::SeqCst);
    }

    pub fn is_requested(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// How a skill can fail without that being a bug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    HandOccupied,
    NotAtLocation,
    NotFound,
    NotHolding,
    NotCoLocated,
    PersonLost,
}

impl std::fmt::Display for FailureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailureClass::HandOccupied => "hand-occupied",
            FailureClass::NotAtLocation => "not-at-location",
            FailureClass::NotFound => "not-found",
            FailureClass::NotHolding => "not-holding",
            FailureClass::NotCoLocated => "not-co-located",
            FailureClass::PersonLost => "person-lost",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkillOutcome {
    Success,
    Failure(FailureClass),
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("aborted")]
    Aborted,
    #[error("unknown skill target `{0}`")]
    UnknownTarget(String),
    #[error(transparent)]
    Kb(#[from] crate::kb::KbError),
}

/// One pluggable action backend: the simulator in this crate, hardware on a
/// real robot.
pub trait Skills {
    fn dispatch(
        &mut self,
        action: &Action,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Executing,
    Replanning,
    Diagnosing,
    Succeeded,
    Failed,
}

/// One line of the execution log. The shape is fixed so logs from different
/// runs line up: every event has the same five fields, null where a field
/// does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    /// Event sequence number within one `execute` call.
    pub t: u64,
    pub phase: Phase,
    pub action: Option<String>,
    pub outcome: Option<String>,
    /// Committed hypothesis id, while one is being pursued.
    pub hypothesis: Option<String>,
}

/// Terminal result of one task execution.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Succeeded,
    TaskFailed { reason: String },
    /// Every hypothesis was refuted; here is what the robot can say about it.
    Diagnosis(DiagnosisReport),
    Aborted,
}

#[derive(Debug)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    pub log: Vec<LogEvent>,
    pub plans_made: usize,
    pub refutations: usize,
}

impl ExecutionResult {
    /// The log as JSON Lines, one event per line.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&serde_json::to_string(e).expect("log events serialize"));
            s.push('\n');
        }
        s
    }
}

pub struct Executor {
    abort: AbortHandle,
    /// Upper bound on planning rounds; generous, since each replan consumes
    /// one hypothesis and worlds are small.
    max_plans: usize,
}

impl Default for Executor {
    fn default() -> Self {
        Executor { abort: AbortHandle::new(), max_plans: 64 }
    }
}

impl Executor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handle for requesting an abort from another thread.
    pub fn abort_handle(&self) -> AbortHandle {
        self.abort.clone()
    }

    /// Plan for `goal` and run the plan to completion, replanning across
    /// refuted hypotheses. The abort flag is cleared on entry: an abort
    /// always belongs to the task it interrupts.
    pub fn execute(
        &mut self,
        goal: &Goal,
        kb: &mut KnowledgeBase,
        skills: &mut dyn Skills,
    ) -> ExecutionResult {
        self.abort.clear();
        let mut log = Log::default();
        let mut plans_made = 0usize;
        let mut refutations = 0usize;

        log.push(Phase::Idle, None, None, None);
        let mut plan = match planner::plan(kb, goal) {
            Ok(p) => p,
            Err(e) => {
                log.push(Phase::Failed, None, Some(format!("no plan: {e}")), None);
                return ExecutionResult {
                    outcome: Outcome::TaskFailed { reason: format!("no plan: {e}") },
                    log: log.events,
                    plans_made,
                    refutations,
                };
            }
        };
        plans_made += 1;

        'plans: loop {
            let hyp = plan.hypothesis.clone();
            for action in plan.actions.clone() {
                if self.abort.is_requested() {
                    log.push(Phase::Failed, None, Some("aborted".into()), hyp.clone());
                    return ExecutionResult {
                        outcome: Outcome::Aborted,
                        log: log.events,
                        plans_made,
                        refutations,
                    };
                }
                let mut outcome = skills.dispatch(&action, kb, &self.abort);
                if let Ok(SkillOutcome::Failure(class)) = outcome {
                    if self.is_refutable_find(&action, hyp.as_deref(), kb) {
                        log.push(
                            Phase::Executing,
                            Some(action.to_string()),
                            Some(format!("failure: {class}")),
                            hyp.clone(),
                        );
                        let hyp_id = hyp.clone().expect("checked by is_refutable_find");
                        log.push(Phase::Replanning, None, None, Some(hyp_id.clone()));
                        refutations += 1;
                        match planner::replan_after_failure(kb, goal, &hyp_id) {
                            Ok(Replan::NewPlan(p)) if plans_made >= self.max_plans => {
                                drop(p);
                                return ExecutionResult {
                                    outcome: Outcome::TaskFailed {
                                        reason: format!(
                                            "gave up after {plans_made} plans"
                                        ),
                                    },
                                    log: log.events,
                                    plans_made,
                                    refutations,
                                };
                            }
                            Ok(Replan::NewPlan(p)) => {
                                plan = p;
                                plans_made += 1;
                                continue 'plans;
                            }
                            Ok(Replan::Diagnose(report)) => {
                                log.push(
                                    Phase::Diagnosing,
                                    None,
                                    Some(report.conclusion.clone()),
                                    None,
                                );
                                return ExecutionResult {
                                    outcome: Outcome::Diagnosis(report),
                                    log: log.events,
                                    plans_made,
                                    refutations,
                                };
                            }
                            Err(e) => {
                                let reason = format!("replanning failed: {e}");
                                log.push(Phase::Failed, None, Some(reason.clone()), None);
                                return ExecutionResult {
                                    outcome: Outcome::TaskFailed { reason },
                                    log: log.events,
                                    plans_made,
                                    refutations,
                                };
                            }
                        }
                    }
                    // Transient failure: try the action once more.
                    log.push(
                        Phase::Executing,
                        Some(action.to_string()),
                        Some(format!("failure: {class}, retrying")),
                        hyp.clone(),
                    );
                    outcome = skills.dispatch(&action, kb, &self.abort);
                }
                match outcome {
                    Ok(SkillOutcome::Success) => {
                        log.push(
                            Phase::Executing,
                            Some(action.to_string()),
                            Some("success".into()),
                            hyp.clone(),
                        );
                    }
                    Ok(SkillOutcome::Failure(class)) => {
                        let reason = format!("{action} failed: {class}");
                        log.push(
                            Phase::Executing,
                            Some(action.to_string()),
                            Some(format!("failure: {class}")),
                            hyp.clone(),
                        );
                        log.push(Phase::Failed, None, Some(reason.clone()), hyp.clone());
                        return ExecutionResult {
                            outcome: Outcome::TaskFailed { reason },
                            log: log.events,
                            plans_made,
                            refutations,
                        };
                    }
                    Err(ExecError::Aborted) => {
                        log.push(
                            Phase::Failed,
                            Some(action.to_string()),
                            Some("aborted".into()),
                            hyp.clone(),
                        );
                        return ExecutionResult {
                            outcome: Outcome::Aborted,
                            log: log.events,
                            plans_made,
                            refutations,
                        };
                    }
                    Err(e) => {
                        let reason = format!("{action} error: {e}");
                        log.push(Phase::Failed, Some(action.to_string()), Some(reason.clone()), hyp.clone());
                        return ExecutionResult {
                            outcome: Outcome::TaskFailed { reason },
                            log: log.events,
                            plans_made,
                            refutations,
                        };
                    }
                }
            }
            log.push(Phase::Succeeded, None, None, hyp.clone());
            return ExecutionResult {
                outcome: Outcome::Succeeded,
                log: log.events,
                plans_made,
                refutations,
            };
        }
    }

    /// A failed find refutes a hypothesis only when the find was actually
    /// looking for that hypothesis' guessed entity.
    fn is_refutable_find(&self, action: &Action, hyp: Option<&str>, kb: &KnowledgeBase) -> bool {
        let (Action::Find { object }, Some(hyp_id)) = (action, hyp) else {
            return false;
        };
        kb.hypothesis(hyp_id).is_some_and(|h| h.claim.subject == *object)
    }
}

#[derive(Default)]
struct Log {
    events: Vec<LogEvent>,
}

impl Log {
    fn push(
        &mut self,
        phase: Phase,
        action: Option<String>,
        outcome: Option<String>,
        hypothesis: Option<String>,
    ) {
        let t = self.events.len() as u64;
        self.events.push(LogEvent { t, phase, action, outcome, hypothesis });
    }
}
