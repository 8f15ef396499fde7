//! Non-interactive command sessions and scenario files.
//!
//! A [`Session`] owns one simulated world plus the grammar, and turns an
//! utterance into a parse, a goal, and an execution trace. The interactive
//! shell and the batch scenario runner both go through [`Session`], which is
//! what makes their event logs byte-identical for the same commands.
//!
//! A scenario file points at a world and either a list of utterances or a
//! task-executive machine (with an optional utterance queue for its `listen`
//! states), and may pin the terminal status it expects.

use crate::executor::{AbortHandle, ExecutionResult, Executor, Outcome};
use crate::fixtures;
use crate::grammar::{frame_to_goal, CommandFrame, GoalError, GrammarError, GrammarSpec};
use crate::hfsm::{HfsmError, Machine, MachineDefinition, TerminalKind};
use crate::kb::KnowledgeBase;
use crate::ontology::Relation;
use crate::planner::{Goal, GoalAtom, ObjTerm, PlaceTerm};
use crate::sim::{SimWorld, WorldError, WorldSpec};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad scenario file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Machine(#[from] HfsmError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Terminal status of a command or scenario, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioStatus {
    Success,
    Diagnosis,
    Failure,
    Aborted,
}

impl ScenarioStatus {
    /// Shell exit code: 0 done, 2 the task did not come off, 3 aborted.
    pub fn exit_code(self) -> i32 {
        match self {
            ScenarioStatus::Success => 0,
            ScenarioStatus::Diagnosis | ScenarioStatus::Failure => 2,
            ScenarioStatus::Aborted => 3,
        }
    }
}

impl fmt::Display for ScenarioStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioStatus::Success => "success",
            ScenarioStatus::Diagnosis => "diagnosis",
            ScenarioStatus::Failure => "failure",
            ScenarioStatus::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

pub fn outcome_status(outcome: &Outcome) -> ScenarioStatus {
    match outcome {
        Outcome::Succeeded => ScenarioStatus::Success,
        Outcome::Diagnosis(_) => ScenarioStatus::Diagnosis,
        Outcome::TaskFailed { .. } => ScenarioStatus::Failure,
        Outcome::Aborted => ScenarioStatus::Aborted,
    }
}

/// One line a person would want to read about a finished command.
pub fn summarize(goal: &Goal, outcome: &Outcome, kb: &KnowledgeBase) -> String {
    match outcome {
        Outcome::Succeeded => goal
            .atoms
            .iter()
            .map(|a| atom_summary(a, kb))
            .collect::<Vec<_>>()
            .join("; "),
        Outcome::TaskFailed { reason } => format!("failed: {reason}"),
        Outcome::Aborted => "aborted".to_string(),
        Outcome::Diagnosis(report) => {
            if report.conclusion == "invalid" {
                format!("assumption invalid: no {}", report.assumption)
            } else {
                format!("assumption {}: {}", report.conclusion, report.assumption)
            }
        }
    }
}

fn resolve_term(term: &ObjTerm, holder_or_loc: Option<&str>, kb: &KnowledgeBase) -> String {
    match term {
        ObjTerm::Instance(id) => id.clone(),
        ObjTerm::AnyOf { class } => {
            // prefer the concrete instance the plan actually moved
            if let Some(anchor) = holder_or_loc {
                let held = kb
                    .query(
                        &crate::kb::Pattern::any()
                            .subject(anchor)
                            .predicate(Relation::Holds),
                        false,
                    )
                    .into_iter()
                    .filter_map(|t| t.object.as_entity().map(str::to_string))
                    .find(|id| {
                        kb.class_of(id)
                            .map(|c| kb.ontology().is_subclass(&c, class))
                            .unwrap_or(false)
                    });
                if let Some(id) = held {
                    return id;
                }
                // objects are also stored the other way round: object at place
                let at_loc = kb
                    .query(
                        &crate::kb::Pattern::any()
                            .predicate(Relation::At)
                            .object(crate::kb::TripleObject::entity(anchor)),
                        false,
                    )
                    .into_iter()
                    .map(|t| t.subject.clone())
                    .find(|id| {
                        kb.class_of(id)
                            .map(|c| kb.ontology().is_subclass(&c, class))
                            .unwrap_or(false)
                    });
                if let Some(id) = at_loc {
                    return id;
                }
            }
            format!("a {class}")
        }
    }
}

fn atom_summary(atom: &GoalAtom, kb: &KnowledgeBase) -> String {
    match atom {
        GoalAtom::Delivered { object, to } => {
            format!("delivered {} to {}", resolve_term(object, Some(to), kb), to)
        }
        GoalAtom::ObjectAt { object, location } => {
            format!("stored {} at {}", resolve_term(object, Some(location), kb), location)
        }
        GoalAtom::Found { object } => {
            let anchor = kb.robot_location();
            format!("found {}", resolve_term(object, anchor.as_deref(), kb))
        }
        GoalAtom::PersonAt { person, place } => {
            let place = match place {
                PlaceTerm::Room(r) => r.clone(),
                PlaceTerm::Location(l) => l.clone(),
            };
            format!("guided {person} to {place}")
        }
        GoalAtom::Following { person } => format!("now following {person}"),
        GoalAtom::Said { person, phrase } => format!("said '{phrase}' to {person}"),
        GoalAtom::RobotInRoom(room) => format!("arrived in {room}"),
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Parse(#[from] crate::grammar::ParseError),
    #[error("cannot ground command: {0}")]
    Goal(#[from] GoalError),
}

/// Everything one finished command produced.
#[derive(Debug)]
pub struct CommandOutcome {
    pub frame: CommandFrame,
    pub goal: Goal,
    pub result: ExecutionResult,
    pub status: ScenarioStatus,
    pub summary: String,
}

/// A loaded world with its grammar and executor; commands run against it
/// back to back, observing each other's effects.
pub struct Session {
    grammar: GrammarSpec,
    sim: SimWorld,
    kb: KnowledgeBase,
    executor: Executor,
    /// Reserved for stochastic skill models; current skills are deterministic.
    #[allow(dead_code)]
    seed: u64,
}

impl Session {
    pub fn new(grammar: GrammarSpec, world: &WorldSpec, seed: u64) -> Result<Self, WorldError> {
        let kb = world.initial_kb()?;
        let sim = SimWorld::new(world);
        Ok(Session { grammar, sim, kb, executor: Executor::new(), seed })
    }

    pub fn abort_handle(&self) -> AbortHandle {
        self.executor.abort_handle()
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn grammar(&self) -> &GrammarSpec {
        &self.grammar
    }

    /// Parse, ground, and execute one utterance.
    pub fn run_utterance(&mut self, text: &str) -> Result<CommandOutcome, SessionError> {
        let frame = self.grammar.parse(text)?;
        let goal = frame_to_goal(&frame, &mut self.kb)?;
        let result = self.executor.execute(&goal, &mut self.kb, &mut self.sim);
        let status = outcome_status(&result.outcome);
        let summary = summarize(&goal, &result.outcome, &self.kb);
        Ok(CommandOutcome { frame, goal, result, status, summary })
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    /// World file, relative to the fixtures root unless absolute.
    pub world: String,
    /// Utterances to run in order; with a machine, the queue its `listen`
    /// commands consume.
    #[serde(default)]
    pub commands: Vec<String>,
    /// Task-executive machine file, relative to the fixtures root.
    #[serde(default)]
    pub machine: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Terminal status the scenario is expected to reach.
    #[serde(default)]
    pub expect: Option<ScenarioStatus>,
}

/// The result of running a scenario end to end.
#[derive(Debug)]
pub struct ScenarioRun {
    pub name: String,
    pub status: ScenarioStatus,
    pub expected: Option<ScenarioStatus>,
    /// Executor events, one JSON object per line, all commands concatenated.
    pub log_lines: Vec<String>,
    /// One readable line per command or machine action.
    pub summaries: Vec<String>,
}

impl ScenarioRun {
    pub fn matched(&self) -> Option<bool> {
        self.expected.map(|e| e == self.status)
    }

    pub fn log_jsonl(&self) -> String {
        let mut out = self.log_lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let scenario: ScenarioFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if scenario.machine.is_none() && scenario.commands.is_empty() {
        return Err(ScenarioError::Invalid(
            "scenario needs commands, a machine, or both".into(),
        ));
    }
    Ok(scenario)
}

/// Run a scenario with fixtures resolved against the default root.
pub fn run_scenario(path: &Path) -> Result<ScenarioRun, ScenarioError> {
    run_scenario_at(path, &fixtures::fixtures_root())
}

/// Run a scenario with an explicit fixtures root (worlds, machines, and the
/// grammar are looked up beneath it).
pub fn run_scenario_at(path: &Path, root: &Path) -> Result<ScenarioRun, ScenarioError> {
    let scenario = load_scenario(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    let grammar = GrammarSpec::from_file(&root.join("grammar.json"))?;
    let world = WorldSpec::from_file(&fixtures::resolve_at(root, &scenario.world))?;
    let mut session = Session::new(grammar, &world, scenario.seed)?;

    let mut log_lines = Vec::new();
    let mut summaries = Vec::new();
    let mut status = ScenarioStatus::Success;

    match &scenario.machine {
        None => {
            for (i, utterance) in scenario.commands.iter().enumerate() {
                let outcome = session.run_utterance(utterance).map_err(|e| match e {
                    SessionError::Parse(g) => ScenarioError::Invalid(format!(
                        "command {i} does not parse: {g}"
                    )),
                    SessionError::Goal(g) => {
                        ScenarioError::Invalid(format!("command {i}: {g}"))
                    }
                })?;
                collect_outcome(utterance, &outcome, &mut log_lines, &mut summaries);
                status = status.max(outcome.status);
            }
        }
        Some(machine_file) => {
            let def = MachineDefinition::from_file(&fixtures::resolve_at(root, machine_file))?;
            let mut queue: VecDeque<String> = scenario.commands.iter().cloned().collect();
            let terminal = drive_machine(
                &mut session,
                def,
                &mut queue,
                &mut log_lines,
                &mut summaries,
            )?;
            status = match terminal {
                TerminalKind::Succeeded => ScenarioStatus::Success,
                TerminalKind::Failed => ScenarioStatus::Failure,
                TerminalKind::Aborted => ScenarioStatus::Aborted,
            };
        }
    }

    Ok(ScenarioRun { name, status, expected: scenario.expect, log_lines, summaries })
}

fn collect_outcome(
    utterance: &str,
    outcome: &CommandOutcome,
    log_lines: &mut Vec<String>,
    summaries: &mut Vec<String>,
) {
    for line in outcome.result.log_jsonl().lines() {
        log_lines.push(line.to_string());
    }
    summaries.push(format!("{utterance} -> {}", outcome.summary));
}

const MACHINE_STEP_LIMIT: u64 = 1_000;

/// Drive a machine against the session. Entry commands the driver
/// understands: `listen` pops the next queued utterance and runs it
/// (events `task-succeeded` / `task-failed` / `task-aborted` /
/// `parse-error`, or `queue-empty`); `task:<utterance>` runs a fixed
/// utterance; `say:<text>` reports it (`said`). Anything else — patrols,
/// announcements — is recorded and produces `noop`.
fn drive_machine(
    session: &mut Session,
    def: MachineDefinition,
    queue: &mut VecDeque<String>,
    log_lines: &mut Vec<String>,
    summaries: &mut Vec<String>,
) -> Result<TerminalKind, ScenarioError> {
    let mut machine = Machine::new(def)?;
    let terminal = machine.run(
        |commands| {
            let mut event = "noop".to_string();
            for command in commands {
                if command == "listen" {
                    event = match queue.pop_front() {
                        None => "queue-empty".to_string(),
                        Some(utterance) => {
                            run_for_event(session, &utterance, log_lines, summaries)
                        }
                    };
                } else if let Some(utterance) = command.strip_prefix("task:") {
                    event = run_for_event(session, utterance, log_lines, summaries);
                } else if let Some(text) = command.strip_prefix("say:") {
                    summaries.push(format!("say: {text}"));
                    event = "said".to_string();
                } else {
                    summaries.push(format!("({command})"));
                }
            }
            Some(event)
        },
        MACHINE_STEP_LIMIT,
    )?;
    Ok(terminal)
}

fn run_for_event(
    session: &mut Session,
    utterance: &str,
    log_lines: &mut Vec<String>,
    summaries: &mut Vec<String>,
) -> String {
    match session.run_utterance(utterance) {
        Err(e) => {
            summaries.push(format!("{utterance} -> {e}"));
            "parse-error".to_string()
        }
        Ok(outcome) => {
            let event = match outcome.status {
                ScenarioStatus::Success => "task-succeeded",
                // a diagnosis is an answer, but not the requested outcome
                ScenarioStatus::Diagnosis | ScenarioStatus::Failure => "task-failed",
                ScenarioStatus::Aborted => "task-aborted",
            };
            collect_outcome(utterance, &outcome, log_lines, summaries);
            event.to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const GRAMMAR: &str = r#"{
        "version": 1,
        "vocabulary": {
            "objects": ["apple"],
            "rooms": ["kitchen", "bedroom"],
            "names": ["jan"],
            "phrases": ["hello"]
        },
        "rules": [
            { "task": "go", "pattern": "go to the {room:destination}" },
            { "task": "bring", "pattern": "bring me {object:indef} from the {room:source}", "person": "operator" }
        ]
    }"#;

    const WORLD: &str = r#"{
        "name": "tiny",
        "robot_start": "door",
        "rooms": ["kitchen", "bedroom"],
        "locations": [
            { "id": "counter", "class": "counter", "room": "kitchen" },
            { "id": "bed", "class": "bed", "room": "bedroom" }
        ],
        "waypoints": [ { "id": "door" } ],
        "distances": [
            { "from": "door", "to": "counter", "meters": 4.0 },
            { "from": "door", "to": "bed", "meters": 7.0 },
            { "from": "counter", "to": "bed", "meters": 3.0 }
        ],
        "objects": [
            { "id": "apple-1", "class": "apple", "true_location": "counter", "known": false }
        ],
        "people": [ { "name": "operator", "location": "door" } ]
    }"#;

    const MACHINE: &str = r#"{
        "name": "greeter",
        "events": ["said", "noop"],
        "initial": "greet",
        "recovery": "greet",
        "states": [
            { "name": "greet", "entry": "say:hello" },
            { "name": "done", "terminal": "succeeded" }
        ],
        "transitions": [ { "from": "greet", "on": "said", "to": "done" } ]
    }"#;

    fn write_fixture_tree(root: &Path) {
        fs::create_dir_all(root.join("worlds")).unwrap();
        fs::create_dir_all(root.join("machines")).unwrap();
        fs::create_dir_all(root.join("scenarios")).unwrap();
        fs::write(root.join("grammar.json"), GRAMMAR).unwrap();
        fs::write(root.join("worlds/tiny.json"), WORLD).unwrap();
        fs::write(root.join("machines/greeter.json"), MACHINE).unwrap();
    }

    fn write_scenario(root: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = root.join("scenarios").join(name);
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn command_scenario_runs_and_matches_expectation() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path = write_scenario(
            dir.path(),
            "ok.json",
            r#"{
                "world": "worlds/tiny.json",
                "commands": ["go to the bedroom", "bring me an apple from the kitchen"],
                "expect": "success"
            }"#,
        );
        let run = run_scenario_at(&path, dir.path()).unwrap();
        assert_eq!(run.status, ScenarioStatus::Success);
        assert_eq!(run.matched(), Some(true));
        assert_eq!(run.name, "ok");
        assert!(run.summaries[0].contains("arrived in bedroom"));
        assert!(run.summaries[1].contains("delivered apple-1 to operator"));
        // every log line is a JSON object with the executor's event shape
        for line in &run.log_lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("phase").is_some());
        }
    }

    #[test]
    fn severity_aggregates_to_the_worst_command() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path = write_scenario(
            dir.path(),
            "mixed.json",
            r#"{
                "world": "worlds/tiny.json",
                "commands": ["go to the bedroom", "bring me an apple from the bedroom"],
                "expect": "success"
            }"#,
        );
        let run = run_scenario_at(&path, dir.path()).unwrap();
        // no apple in the bedroom: the second command ends in a diagnosis
        assert_eq!(run.status, ScenarioStatus::Diagnosis);
        assert_eq!(run.matched(), Some(false));
        assert!(run.summaries[1].contains("assumption invalid: no apple in bedroom"));
    }

    #[test]
    fn unparseable_commands_invalidate_the_scenario() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path = write_scenario(
            dir.path(),
            "bad.json",
            r#"{ "world": "worlds/tiny.json", "commands": ["flurb the wug"] }"#,
        );
        let err = run_scenario_at(&path, dir.path()).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)), "{err}");
    }

    #[test]
    fn machine_scenarios_finish_with_the_machine_terminal() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path = write_scenario(
            dir.path(),
            "machine.json",
            r#"{ "world": "worlds/tiny.json", "machine": "machines/greeter.json" }"#,
        );
        let run = run_scenario_at(&path, dir.path()).unwrap();
        assert_eq!(run.status, ScenarioStatus::Success);
        assert!(run.summaries.contains(&"say: hello".to_string()));
    }

    #[test]
    fn identical_runs_produce_identical_logs() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path = write_scenario(
            dir.path(),
            "det.json",
            r#"{
                "world": "worlds/tiny.json",
                "commands": ["bring me an apple from the kitchen"],
                "seed": 9
            }"#,
        );
        let a = run_scenario_at(&path, dir.path()).unwrap();
        let b = run_scenario_at(&path, dir.path()).unwrap();
        assert_eq!(a.log_jsonl(), b.log_jsonl());
        assert!(!a.log_lines.is_empty());
    }

    #[test]
    fn scenarios_without_work_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_tree(dir.path());
        let path =
            write_scenario(dir.path(), "empty.json", r#"{ "world": "worlds/tiny.json" }"#);
        assert!(matches!(
            run_scenario_at(&path, dir.path()),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
