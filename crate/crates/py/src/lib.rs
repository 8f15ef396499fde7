//! Python bindings for the majordomo stack.
//!
//! Structured results cross the boundary as plain dicts/lists (converted
//! from their JSON form), so the Python side needs no wrapper classes for
//! data — only `Grammar`, `Session` and `AbortToken` carry state.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};

use majordomo::executor::AbortHandle;
use majordomo::grammar::GrammarSpec;
use majordomo::hallway::{self, CorridorSpec, HumanModel, SignalPolicy};
use majordomo::hfsm::MachineDefinition;
use majordomo::prism::{annotate_detections, DetectionFile, SemanticMap, VerbatimExtractor};
use majordomo::scenario;
use majordomo::sim::WorldSpec;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Recursively convert a JSON value into Python objects.
fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(value_err)?;
    json_to_py(py, &json)
}

fn parse_policy(name: &str) -> PyResult<SignalPolicy> {
    match name {
        "none" => Ok(SignalPolicy::None),
        "signal" => Ok(SignalPolicy::TurnSignal),
        "signal+demo" | "signal-demo" => Ok(SignalPolicy::TurnSignalWithPassiveDemo),
        other => Err(value_err(format!(
            "unknown policy {other:?}; expected none, signal or signal+demo"
        ))),
    }
}

/// The command grammar: generate, enumerate and parse operator commands.
#[pyclass]
struct Grammar {
    inner: GrammarSpec,
}

#[pymethods]
impl Grammar {
    /// Load a grammar file; with no argument, the bundled one.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let path = path.unwrap_or_else(|| majordomo::fixtures::fixtures_root().join("grammar.json"));
        let inner = GrammarSpec::from_file(&path).map_err(value_err)?;
        Ok(Grammar { inner })
    }

    /// Draw a random command; returns `(utterance, frame)`.
    fn generate(&self, py: Python<'_>, seed: u64) -> PyResult<(String, Py<PyAny>)> {
        let (utterance, frame) = self.inner.generate(seed);
        Ok((utterance, serialize_to_py(py, &frame)?))
    }

    /// Parse an utterance into a command frame, or raise ValueError.
    fn parse(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let frame = self.inner.parse(text).map_err(value_err)?;
        serialize_to_py(py, &frame)
    }

    /// Every utterance the grammar can produce, with its frame.
    fn enumerate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let list = PyList::empty(py);
        for (utterance, frame) in self.inner.enumerate() {
            list.append((utterance, serialize_to_py(py, &frame)?))?;
        }
        Ok(list.into_any().unbind())
    }
}

/// Lets one thread interrupt a task another thread is running.
#[pyclass]
struct AbortToken {
    inner: AbortHandle,
}

#[pymethods]
impl AbortToken {
    fn request(&self) {
        self.inner.request();
    }

    fn is_requested(&self) -> bool {
        self.inner.is_requested()
    }
}

/// A loaded world plus grammar and executor; commands run back to back
/// against the same evolving knowledge base.
#[pyclass]
struct Session {
    inner: scenario::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (world, seed=0, grammar=None))]
    fn new(world: PathBuf, seed: u64, grammar: Option<PathBuf>) -> PyResult<Self> {
        let grammar_path =
            grammar.unwrap_or_else(|| majordomo::fixtures::fixtures_root().join("grammar.json"));
        let grammar = GrammarSpec::from_file(&grammar_path).map_err(value_err)?;
        let spec = WorldSpec::from_file(&world).map_err(value_err)?;
        let inner = scenario::Session::new(grammar, &spec, seed).map_err(value_err)?;
        Ok(Session { inner })
    }

    /// Parse, ground and execute one utterance. The GIL is released while
    /// the robot works, so an `AbortToken` can fire from another thread.
    fn run(&mut self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let outcome = py
            .detach(|| self.inner.run_utterance(text))
            .map_err(value_err)?;
        let dict = PyDict::new(py);
        dict.set_item("utterance", text)?;
        dict.set_item("frame", serialize_to_py(py, &outcome.frame)?)?;
        dict.set_item("status", outcome.status.to_string())?;
        dict.set_item("summary", &outcome.summary)?;
        dict.set_item("plans_made", outcome.result.plans_made)?;
        dict.set_item("refutations", outcome.result.refutations)?;
        dict.set_item("log", serialize_to_py(py, &outcome.result.log)?)?;
        Ok(dict.into_any().unbind())
    }

    /// Current knowledge base, one readable fact per line.
    fn kb_dump(&self) -> Vec<String> {
        self.inner.kb().dump()
    }

    fn abort_token(&self) -> AbortToken {
        AbortToken { inner: self.inner.abort_handle() }
    }
}

/// Run a scenario file; returns name, status, expected, matched, summaries
/// and the executor log lines.
#[pyfunction]
#[pyo3(signature = (path, fixtures_root=None))]
fn run_scenario(py: Python<'_>, path: PathBuf, fixtures_root: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let root = fixtures_root.unwrap_or_else(majordomo::fixtures::fixtures_root);
    let run = py
        .detach(|| scenario::run_scenario_at(&path, &root))
        .map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("name", &run.name)?;
    dict.set_item("status", run.status.to_string())?;
    dict.set_item("expected", run.expected.map(|e| e.to_string()))?;
    dict.set_item("matched", run.matched())?;
    dict.set_item("summaries", &run.summaries)?;
    dict.set_item("log_lines", &run.log_lines)?;
    Ok(dict.into_any().unbind())
}

/// Structural defects in a task-executive machine file; empty means valid.
#[pyfunction]
fn validate_machine(path: PathBuf) -> PyResult<Vec<String>> {
    let def = MachineDefinition::from_file(&path).map_err(value_err)?;
    Ok(def.validate().iter().map(|d| d.to_string()).collect())
}

/// Annotate a detection file and merge the landmarks into a map file.
///
/// Returns `{"annotated": n, "skipped": [(index, reason), ...],
/// "landmarks": total}`. The map is created empty if missing; `out`
/// defaults to overwriting `map`.
#[pyfunction]
#[pyo3(signature = (detections, map, out=None))]
fn ingest_detections(
    py: Python<'_>,
    detections: PathBuf,
    map: PathBuf,
    out: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let file = DetectionFile::from_file(&detections).map_err(io_err)?;
    let mut semantic_map = if map.exists() {
        SemanticMap::from_file(&map).map_err(io_err)?
    } else {
        let name = map
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| value_err("map path has no usable file name"))?;
        SemanticMap::empty(name)
    };
    let outcome = annotate_detections(&file, &VerbatimExtractor);
    semantic_map.ingest(&outcome.annotations);
    let target = out.unwrap_or(map);
    semantic_map.save(&target).map_err(io_err)?;
    let dict = PyDict::new(py);
    dict.set_item("annotated", outcome.annotations.len())?;
    dict.set_item("skipped", &outcome.skipped)?;
    dict.set_item("landmarks", semantic_map.landmarks.len())?;
    dict.set_item("map", target)?;
    Ok(dict.into_any().unbind())
}

/// Monte-Carlo corridor-passing batch; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (policy="signal", p_comply=0.5, latency=0.5, n=1000, seed=0))]
fn hallway_batch(
    py: Python<'_>,
    policy: &str,
    p_comply: f64,
    latency: f64,
    n: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let policy = parse_policy(policy)?;
    let corridor = CorridorSpec::default();
    let human = HumanModel { p_comply, latency_s: latency, ..Default::default() };
    let report = py
        .detach(|| hallway::run_batch(&corridor, &human, policy, n, seed))
        .map_err(value_err)?;
    serialize_to_py(py, &report)
}

/// 95% Wilson score interval for `successes` out of `n`.
#[pyfunction]
fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    let [lo, hi] = hallway::wilson_interval(successes, n);
    (lo, hi)
}

/// Root of the bundled data files (grammar, worlds, machines, scenarios).
#[pyfunction]
fn fixtures_root() -> PathBuf {
    majordomo::fixtures::fixtures_root()
}

#[pymodule]
fn majordomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grammar>()?;
    m.add_class::<Session>()?;
    m.add_class::<AbortToken>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(validate_machine, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_detections, m)?)?;
    m.add_function(wrap_pyfunction!(hallway_batch, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures_root, m)?)?;
    Ok(())
}
