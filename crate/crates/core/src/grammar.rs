//! Command grammar: generates operator utterances from a versioned grammar
//! file and parses them back into structured command frames.
//!
//! The grammar is data: a closed vocabulary plus a list of flat rule
//! patterns like `bring me {object:indef} from the {room:source}`. Generation
//! picks a rule and slot fillers uniformly from a seeded RNG; parsing is the
//! exact inverse over the same data, so `parse(generate(seed).0)` returns the
//! generated frame for every seed. Loading validates that the grammar is
//! unambiguous by exhaustively enumerating every derivation (the rules are
//! non-recursive, so the enumeration is finite and exact).

use crate::kb::{KbError, KnowledgeBase};
use crate::planner::{self, Goal, GoalAtom, ObjTerm, PlaceTerm, PlanError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Bring,
    Go,
    FindObject,
    FindPerson,
    Guide,
    Follow,
    Say,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Determiner {
    Definite,
    Indefinite,
}

/// What the command says about an object: its class, how determined the
/// reference is, and (after KB resolution) a concrete instance if one is
/// known. A definite descriptor without a known instance is legal and is
/// what triggers hypothesis injection; an indefinite descriptor never names
/// an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub class: String,
    pub determiner: Determiner,
    #[serde(default)]
    pub known_instance: Option<String>,
}

/// Structured reading of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandFrame {
    pub task: Task,
    #[serde(default)]
    pub object: Option<ObjectDescriptor>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub destination: Option<String>,
    #[serde(default)]
    pub person: Option<String>,
    #[serde(default)]
    pub payload: Option<String>,
}

impl CommandFrame {
    /// Check the per-task arity rules (bring needs an object, guide needs a
    /// person and destination, say needs a person and payload, and so on).
    pub fn validate(&self) -> Result<(), GrammarError> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(GrammarError::InvalidFrame(format!(
                    "{:?} command is missing its {what}",
                    self.task
                )))
            }
        };
        match self.task {
            Task::Bring => {
                need(self.object.is_some(), "object")?;
                need(self.person.is_some(), "recipient")
            }
            Task::Go => need(self.destination.is_some(), "destination"),
            Task::FindObject => need(self.object.is_some(), "object"),
            Task::FindPerson | Task::Follow => need(self.person.is_some(), "person"),
            Task::Guide => {
                need(self.person.is_some(), "person")?;
                need(self.destination.is_some(), "destination")
            }
            Task::Say => {
                need(self.person.is_some(), "person")?;
                need(self.payload.is_some(), "payload")
            }
            Task::Store => need(self.object.is_some(), "object"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no parse: unexpected token `{token}` at position {position}")]
pub struct ParseError {
    /// Index of the furthest token any rule failed on.
    pub position: usize,
    pub token: String,
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("failed to read grammar: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode grammar: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    pub objects: Vec<String>,
    pub rooms: Vec<String>,
    pub names: Vec<String>,
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRule {
    task: Task,
    pattern: String,
    /// Implicit recipient for patterns like "bring me ...".
    #[serde(default)]
    person: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGrammar {
    version: u32,
    vocabulary: Vocabulary,
    rules: Vec<RawRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RoomField {
    Source,
    Destination,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatTok {
    Lit(String),
    Object(Determiner),
    Room(RoomField),
    Person,
    Phrase,
}

#[derive(Debug, Clone)]
struct Rule {
    task: Task,
    implicit_person: Option<String>,
    toks: Vec<PatTok>,
}

/// A loaded, validated grammar.
#[derive(Debug, Clone)]
pub struct GrammarSpec {
    pub version: u32,
    vocabulary: Vocabulary,
    rules: Vec<Rule>,
}

/// Room ids are kebab-case versions of their surface forms
/// ("living room" <-> "living-room").
pub fn room_id(surface: &str) -> String {
    surface.replace(' ', "-")
}

/// Indefinite article by initial vowel.
fn article_for(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Lowercase, collapse runs of whitespace, strip terminal punctuation.
pub fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['.', '!', '?']).trim_end().to_string()
}

fn compile_pattern(pattern: &str) -> Result<Vec<PatTok>, GrammarError> {
    let mut toks = Vec::new();
    for word in pattern.split_whitespace() {
        // allow a trailing comma on a slot, as in "{person}, who is ..."
        let (body, tail) = match word.strip_suffix(',') {
            Some(b) => (b, Some(",".to_string())),
            None => (word, None),
        };
        if let Some(inner) = body.strip_prefix('{').and_then(|b| b.strip_suffix('}')) {
            let tok = match inner {
                "object:indef" => PatTok::Object(Determiner::Indefinite),
                "object:def" => PatTok::Object(Determiner::Definite),
                "room:source" => PatTok::Room(RoomField::Source),
                "room:destination" => PatTok::Room(RoomField::Destination),
                "person" => PatTok::Person,
                "phrase" => PatTok::Phrase,
                other => {
                    return Err(GrammarError::InvalidGrammar(format!(
                        "unknown placeholder `{{{other}}}`"
                    )))
                }
            };
            toks.push(tok);
            if let Some(t) = tail {
                toks.push(PatTok::Lit(t));
            }
        } else {
            toks.push(PatTok::Lit(word.to_string()));
        }
    }
    Ok(toks)
}

impl GrammarSpec {
    pub fn from_json(json: &str) -> Result<Self, GrammarError> {
        let raw: RawGrammar = serde_json::from_str(json)?;
        Self::from_raw(raw)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GrammarError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn from_raw(raw: RawGrammar) -> Result<Self, GrammarError> {
        if raw.version == 0 {
            return Err(GrammarError::InvalidGrammar("version must be >= 1".into()));
        }
        if raw.rules.is_empty() {
            return Err(GrammarError::InvalidGrammar("no rules".into()));
        }
        let mut rules = Vec::new();
        for r in &raw.rules {
            let toks = compile_pattern(&r.pattern)?;
            // every slot must have fillers to draw from
            for t in &toks {
                let (empty, what) = match t {
                    PatTok::Object(_) => (raw.vocabulary.objects.is_empty(), "objects"),
                    PatTok::Room(_) => (raw.vocabulary.rooms.is_empty(), "rooms"),
                    PatTok::Person => (raw.vocabulary.names.is_empty(), "names"),
                    PatTok::Phrase => (raw.vocabulary.phrases.is_empty(), "phrases"),
                    PatTok::Lit(_) => (false, ""),
                };
                if empty {
                    return Err(GrammarError::InvalidGrammar(format!(
                        "rule `{}` uses empty vocabulary `{what}`",
                        r.pattern
                    )));
                }
            }
            rules.push(Rule { task: r.task, implicit_person: r.person.clone(), toks });
        }
        let g = GrammarSpec { version: raw.version, vocabulary: raw.vocabulary, rules };
        g.check_unambiguous()?;
        Ok(g)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Exhaustively enumerate every derivable (utterance, frame) pair.
    /// The rule set is non-recursive, so this is the full language.
    pub fn enumerate(&self) -> Vec<(String, CommandFrame)> {
        let mut out = Vec::new();
        for (idx, rule) in self.rules.iter().enumerate() {
            let mut partial: Vec<Choice> = vec![Choice::default()];
            for tok in &rule.toks {
                let options: Vec<usize> = match tok {
                    PatTok::Lit(_) => continue,
                    PatTok::Object(_) => (0..self.vocabulary.objects.len()).collect(),
                    PatTok::Room(_) => (0..self.vocabulary.rooms.len()).collect(),
                    PatTok::Person => (0..self.vocabulary.names.len()).collect(),
                    PatTok::Phrase => (0..self.vocabulary.phrases.len()).collect(),
                };
                let mut next = Vec::with_capacity(partial.len() * options.len());
                for p in &partial {
                    for o in &options {
                        let mut q = p.clone();
                        q.picks.push(*o);
                        next.push(q);
                    }
                }
                partial = next;
            }
            for choice in partial {
                out.push(self.render(idx, &choice));
            }
        }
        out
    }

    fn check_unambiguous(&self) -> Result<(), GrammarError> {
        let mut seen: BTreeMap<String, CommandFrame> = BTreeMap::new();
        for (utterance, frame) in self.enumerate() {
            if let Some(prev) = seen.get(&utterance) {
                if prev != &frame {
                    return Err(GrammarError::InvalidGrammar(format!(
                        "ambiguous utterance `{utterance}`"
                    )));
                }
            } else {
                seen.insert(utterance, frame);
            }
        }
        Ok(())
    }

    /// Deterministically generate one (utterance, frame) pair from a seed.
    pub fn generate(&self, seed: u64) -> (String, CommandFrame) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rng.random_range(0..self.rules.len());
        let mut choice = Choice::default();
        for tok in &self.rules[idx].toks {
            let pick = match tok {
                PatTok::Lit(_) => continue,
                PatTok::Object(_) => rng.random_range(0..self.vocabulary.objects.len()),
                PatTok::Room(_) => rng.random_range(0..self.vocabulary.rooms.len()),
                PatTok::Person => rng.random_range(0..self.vocabulary.names.len()),
                PatTok::Phrase => rng.random_range(0..self.vocabulary.phrases.len()),
            };
            choice.picks.push(pick);
        }
        self.render(idx, &choice)
    }

    fn render(&self, rule_idx: usize, choice: &Choice) -> (String, CommandFrame) {
        let rule = &self.rules[rule_idx];
        let mut words: Vec<String> = Vec::new();
        let mut picks = choice.picks.iter().copied();
        let mut frame = CommandFrame {
            task: rule.task,
            object: None,
            source: None,
            destination: None,
            person: rule.implicit_person.clone(),
            payload: None,
        };
        for tok in &rule.toks {
            match tok {
                PatTok::Lit(l) => {
                    if l == "," {
                        // attach to the previous word
                        if let Some(last) = words.last_mut() {
                            last.push(',');
                        }
                    } else {
                        words.push(l.clone());
                    }
                }
                PatTok::Object(det) => {
                    let class = &self.vocabulary.objects[picks.next().expect("object pick")];
                    match det {
                        Determiner::Indefinite => words.push(article_for(class).to_string()),
                        Determiner::Definite => words.push("the".to_string()),
                    }
                    words.push(class.clone());
                    frame.object = Some(ObjectDescriptor {
                        class: class.clone(),
                        determiner: *det,
                        known_instance: None,
                    });
                }
                PatTok::Room(field) => {
                    let surface = &self.vocabulary.rooms[picks.next().expect("room pick")];
                    words.extend(surface.split_whitespace().map(str::to_string));
                    let id = room_id(surface);
                    match field {
                        RoomField::Source => frame.source = Some(id),
                        RoomField::Destination => frame.destination = Some(id),
                    }
                }
                PatTok::Person => {
                    let name = &self.vocabulary.names[picks.next().expect("person pick")];
                    words.push(name.clone());
                    frame.person = Some(name.clone());
                }
                PatTok::Phrase => {
                    let phrase = &self.vocabulary.phrases[picks.next().expect("phrase pick")];
                    words.extend(phrase.split_whitespace().map(str::to_string));
                    frame.payload = Some(phrase.clone());
                }
            }
        }
        (words.join(" "), frame)
    }

    /// Parse a (normalized) utterance back into its frame. The error carries
    /// the furthest token position reached over all rules.
    pub fn parse(&self, utterance: &str) -> Result<CommandFrame, ParseError> {
        let normalized = normalize(utterance);
        let tokens: Vec<String> = normalized
            .split_whitespace()
            .map(|w| w.trim_end_matches(',').to_string())
            .filter(|w| !w.is_empty())
            .collect();
        let mut furthest = 0usize;
        for (idx, rule) in self.rules.iter().enumerate() {
            let mut choice = Choice::default();
            if self.match_toks(&rule.toks, &tokens, 0, 0, &mut choice, &mut furthest) {
                return Ok(self.render(idx, &choice).1);
            }
        }
        let token = tokens
            .get(furthest)
            .cloned()
            .unwrap_or_else(|| "<end>".to_string());
        Err(ParseError { position: furthest, token })
    }

    /// Recursive descent with backtracking over vocabulary alternatives.
    /// `choice` is left holding the successful picks.
    fn match_toks(
        &self,
        toks: &[PatTok],
        tokens: &[String],
        pat_i: usize,
        tok_i: usize,
        choice: &mut Choice,
        furthest: &mut usize,
    ) -> bool {
        let Some(pat) = toks.get(pat_i) else {
            if tok_i == tokens.len() {
                return true;
            }
            *furthest = (*furthest).max(tok_i);
            return false;
        };
        let fail = |at: usize, furthest: &mut usize| {
            *furthest = (*furthest).max(at);
            false
        };
        match pat {
            PatTok::Lit(l) => {
                if l == "," {
                    // commas were stripped during tokenization
                    return self.match_toks(toks, tokens, pat_i + 1, tok_i, choice, furthest);
                }
                if tokens.get(tok_i).map(String::as_str) == Some(l.as_str()) {
                    self.match_toks(toks, tokens, pat_i + 1, tok_i + 1, choice, furthest)
                } else {
                    fail(tok_i, furthest)
                }
            }
            PatTok::Object(det) => {
                let article = tokens.get(tok_i).map(String::as_str);
                let class_tok = tokens.get(tok_i + 1);
                for (vi, class) in self.vocabulary.objects.iter().enumerate() {
                    let expected = match det {
                        Determiner::Indefinite => article_for(class),
                        Determiner::Definite => "the",
                    };
                    if article != Some(expected) {
                        continue;
                    }
                    if class_tok.map(String::as_str) != Some(class.as_str()) {
                        continue;
                    }
                    choice.picks.push(vi);
                    if self.match_toks(toks, tokens, pat_i + 1, tok_i + 2, choice, furthest) {
                        return true;
                    }
                    choice.picks.pop();
                }
                // report the failure on the class token when the article fit
                let expected_articles = ["a", "an", "the"];
                let at = if article.is_some_and(|a| expected_articles.contains(&a)) {
                    tok_i + 1
                } else {
                    tok_i
                };
                fail(at.min(tokens.len()), furthest)
            }
            PatTok::Room(_) => self.match_vocab_multiword(
                &self.vocabulary.rooms,
                toks,
                tokens,
                pat_i,
                tok_i,
                choice,
                furthest,
            ),
            PatTok::Person => self.match_vocab_multiword(
                &self.vocabulary.names,
                toks,
                tokens,
                pat_i,
                tok_i,
                choice,
                furthest,
            ),
            PatTok::Phrase => self.match_vocab_multiword(
                &self.vocabulary.phrases,
                toks,
                tokens,
                pat_i,
                tok_i,
                choice,
                furthest,
            ),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn match_vocab_multiword(
        &self,
        vocab: &[String],
        toks: &[PatTok],
        tokens: &[String],
        pat_i: usize,
        tok_i: usize,
        choice: &mut Choice,
        furthest: &mut usize,
    ) -> bool {
        for (vi, entry) in vocab.iter().enumerate() {
            let words: Vec<&str> = entry.split_whitespace().collect();
            let matches = words
                .iter()
                .enumerate()
                .all(|(k, w)| tokens.get(tok_i + k).map(String::as_str) == Some(*w));
            if !matches {
                continue;
            }
            choice.picks.push(vi);
            if self.match_toks(toks, tokens, pat_i + 1, tok_i + words.len(), choice, furthest) {
                return true;
            }
            choice.picks.pop();
        }
        *furthest = (*furthest).max(tok_i);
        false
    }
}

#[derive(Debug, Clone, Default)]
struct Choice {
    /// Vocabulary index for each slot token, in pattern order.
    picks: Vec<usize>,
}

/// Errors turning a frame into a goal against a concrete KB.
#[derive(Debug, Error)]
pub enum GoalError {
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
    #[error("unknown person `{0}`")]
    UnknownPerson(String),
    #[error("frame error: {0}")]
    Frame(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

fn check_room(kb: &KnowledgeBase, room: &str) -> Result<(), GoalError> {
    match kb.entity(room) {
        Some(e) if e.class == "room" => Ok(()),
        _ => Err(GoalError::UnknownRoom(room.to_string())),
    }
}

fn check_person(kb: &KnowledgeBase, person: &str) -> Result<(), GoalError> {
    match kb.entity(person) {
        Some(e) if e.class == "person" => Ok(()),
        _ => Err(GoalError::UnknownPerson(person.to_string())),
    }
}

/// Resolve an object descriptor against the KB: use a known (non-hypothetical)
/// instance when one exists in scope, otherwise inject hypotheses over the
/// source room (or every room when no source was given).
fn resolve_object(
    kb: &mut KnowledgeBase,
    descriptor: &ObjectDescriptor,
    source: Option<&str>,
) -> Result<(ObjTerm, Option<String>), GoalError> {
    let known: Vec<String> = kb
        .entities_of_class(&descriptor.class, false)
        .iter()
        .filter(|e| kb.ontology().is_subclass(&e.class, "object"))
        .filter(|e| match source {
            None => true,
            Some(room) => kb
                .query(
                    &crate::kb::Pattern::any()
                        .subject(&e.id)
                        .predicate(crate::ontology::Relation::At),
                    false,
                )
                .first()
                .and_then(|t| t.object.as_entity().map(str::to_string))
                .is_some_and(|loc| kb.location_room(&loc) == Some(room)),
        })
        .map(|e| e.id.clone())
        .collect();
    if let Some(first) = known.first() {
        let term = match descriptor.determiner {
            Determiner::Definite => ObjTerm::Instance(first.clone()),
            Determiner::Indefinite => ObjTerm::AnyOf { class: descriptor.class.clone() },
        };
        return Ok((term, None));
    }
    let hyps = kb.inject_hypotheses(descriptor, source)?;
    let assumption = hyps.first().map(|h| h.parent.clone());
    Ok((ObjTerm::AnyOf { class: descriptor.class.clone() }, assumption))
}

/// Turn a parsed frame into a planner goal, injecting hypotheses as needed.
/// Deterministic for a given (frame, KB) pair.
pub fn frame_to_goal(frame: &CommandFrame, kb: &mut KnowledgeBase) -> Result<Goal, GoalError> {
    frame.validate().map_err(|e| GoalError::Frame(e.to_string()))?;
    if let Some(room) = &frame.source {
        check_room(kb, room)?;
    }
    if let Some(room) = &frame.destination {
        check_room(kb, room)?;
    }
    if let Some(person) = &frame.person {
        check_person(kb, person)?;
    }
    let mut assumption = None;
    let atoms = match frame.task {
        Task::Bring => {
            let descriptor = frame.object.as_ref().expect("validated");
            let (object, a) = resolve_object(kb, descriptor, frame.source.as_deref())?;
            assumption = a;
            vec![GoalAtom::Delivered {
                object,
                to: frame.person.clone().expect("validated"),
            }]
        }
        Task::Go => {
            vec![GoalAtom::RobotInRoom(frame.destination.clone().expect("validated"))]
        }
        Task::FindObject => {
            let descriptor = frame.object.as_ref().expect("validated");
            let (object, a) = resolve_object(kb, descriptor, frame.source.as_deref())?;
            assumption = a;
            vec![GoalAtom::Found { object }]
        }
        Task::FindPerson => {
            vec![GoalAtom::Found {
                object: ObjTerm::Instance(frame.person.clone().expect("validated")),
            }]
        }
        Task::Guide => {
            vec![GoalAtom::PersonAt {
                person: frame.person.clone().expect("validated"),
                place: PlaceTerm::Room(frame.destination.clone().expect("validated")),
            }]
        }
        Task::Follow => {
            vec![GoalAtom::Following { person: frame.person.clone().expect("validated") }]
        }
        Task::Say => {
            vec![GoalAtom::Said {
                person: frame.person.clone().expect("validated"),
                phrase: frame.payload.clone().expect("validated"),
            }]
        }
        Task::Store => {
            let descriptor = frame.object.as_ref().expect("validated");
            let (object, a) = resolve_object(kb, descriptor, frame.source.as_deref())?;
            assumption = a;
            let shelf = planner::storing_placement(&descriptor.class, kb)?;
            vec![GoalAtom::ObjectAt { object, location: shelf }]
        }
    };
    Ok(Goal { atoms, assumption })
}
