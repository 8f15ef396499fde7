//! The data files shipped under `fixtures/` are part of the product: the CLI
//! demos run off them. These tests keep them loadable and healthy.

use std::fs;
use std::path::Path;

use majordomo::fixtures::fixtures_root;
use majordomo::grammar::GrammarSpec;
use majordomo::hfsm::MachineDefinition;
use majordomo::scenario::{run_scenario, ScenarioStatus};
use majordomo::sim::WorldSpec;

fn fixture_files(sub: &str) -> Vec<std::path::PathBuf> {
    let dir = fixtures_root().join(sub);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("listing {}: {e}", dir.display()))
        .map(|entry| entry.unwrap().path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no fixtures under {}", dir.display());
    files
}

#[test]
fn bundled_grammar_parses_the_demo_commands() {
    let grammar = GrammarSpec::from_file(fixtures_root().join("grammar.json")).unwrap();
    for text in [
        "Bring me an apple from the kitchen.",
        "Bring the juice from the living room to Jan, who is in the bedroom.",
        "Go to the bedroom.",
        "Find Amy in the living room.",
        "Say good morning to Amy.",
        "Guide Amy to the kitchen.",
        "Follow Amy.",
        "Store the crackers.",
    ] {
        grammar
            .parse(text)
            .unwrap_or_else(|e| panic!("{text:?} should parse: {e}"));
    }
}

/// The generator can also produce the two scripted demo commands verbatim.
#[test]
fn known_seeds_generate_the_demo_commands() {
    let grammar = GrammarSpec::from_file(fixtures_root().join("grammar.json")).unwrap();
    assert_eq!(grammar.generate(1045).0, "bring me an apple from the kitchen");
    assert_eq!(
        grammar.generate(3385).0,
        "bring the juice from the living room to jan, who is in the bedroom"
    );
}

#[test]
fn bundled_worlds_load_and_validate() {
    for path in fixture_files("worlds") {
        let spec = WorldSpec::from_file(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        spec.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn bundled_machines_validate_cleanly() {
    for path in fixture_files("machines") {
        let def = MachineDefinition::from_file(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let defects = def.validate();
        assert!(
            defects.is_empty(),
            "{}: {:?}",
            path.display(),
            defects
        );
    }
}

#[test]
fn bundled_scenarios_run_to_their_expected_status() {
    for path in fixture_files("scenarios") {
        let run = run_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            run.matched(),
            Some(true),
            "{}: got {:?}, expected {:?} (summaries: {:?})",
            path.display(),
            run.status,
            run.expected,
            run.summaries
        );
    }
}

#[test]
fn bundled_detections_annotate_onto_the_demo_map() {
    use majordomo::prism::{annotate_detections, DetectionFile, SemanticMap, VerbatimExtractor};

    let root = fixtures_root();
    let file = DetectionFile::from_file(root.join("detections/demo_detections.json")).unwrap();
    let outcome = annotate_detections(&file, &VerbatimExtractor);

    // Two readable placards; the pictogram sign carries no text and is skipped.
    assert_eq!(outcome.annotations.len(), 2);
    assert_eq!(outcome.skipped.len(), 1);
    assert_eq!(outcome.skipped[0].0, 2);

    let a = &outcome.annotations[0];
    assert_eq!(a.label, "3.404");
    assert!((a.x - 4.2).abs() < 1e-3 && (a.y - 3.1).abs() < 1e-3, "{a:?}");
    assert!(a.residual_px < 0.01, "{a:?}");
    let b = &outcome.annotations[1];
    assert_eq!(b.label, "3.512");
    assert!((b.x - 3.5).abs() < 1e-3 && (b.y - 3.5).abs() < 1e-3, "{b:?}");

    // The seeded map already knows placard 3.404 from a previous pass, just
    // off by a few centimetres: ingest must merge it, not duplicate it.
    let mut map = SemanticMap::from_file(&root.join("maps/demo_map.json")).unwrap();
    assert_eq!(map.landmarks.len(), 1);
    map.ingest(&outcome.annotations);
    assert_eq!(map.landmarks.len(), 2, "{:?}", map.landmarks);
    assert_eq!(map.landmarks[0].id, "placard-1");
    assert_eq!(map.landmarks[1].id, "placard-2");
    assert_eq!(map.landmarks[1].label, "3.512");
}

#[test]
fn the_flagship_scenario_finds_the_apple_on_the_third_try() {
    let root = fixtures_root();
    let run = run_scenario(Path::new(&root.join("scenarios/gpsr_apple.json"))).unwrap();
    assert_eq!(run.status, ScenarioStatus::Success);
    // The apple is hidden in the cupboard, the third-closest kitchen surface,
    // so the log must show exactly two refuted guesses before the grab.
    let failed_finds = run
        .log_lines
        .iter()
        .filter(|l| l.contains("find(") && l.contains("failure"))
        .count();
    assert_eq!(failed_finds, 2, "log: {:#?}", run.log_lines);
    assert!(run.summaries.iter().any(|s| s.contains("delivered apple-1")));
}
