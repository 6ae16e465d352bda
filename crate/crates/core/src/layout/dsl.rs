//! Constrained prompt grammar and its parser.
//!
//! Grammar (lowercase word tokens):
//!
//! ```text
//! prompt   := entity (relation entity)* [background]
//! entity   := count [color] noun
//! count    := "a" | "an" | "one" | "two" | ... | "six"
//! relation := "to the left of" | "to the right of" | "above" | "below"
//!           | "on top of" | "in front of" | "behind" | "hidden behind"
//! background := "on a plain gray background"
//! ```
//!
//! Nouns are the renderable shapes plus a few parse-only words (cat, dog,
//! bird, tree, car) so occlusion phrasing over non-shape nouns still plans;
//! generation rejects those later at the vocabulary gate. Number agreement is
//! enforced: counts above one require the plural noun.

use crate::palette::{ColorName, ShapeKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parse-only nouns accepted by the grammar beyond the renderable shapes.
pub const EXTRA_NOUNS: [&str; 5] = ["cat", "dog", "bird", "tree", "car"];

const COUNT_WORDS: [(&str, u32); 8] = [
    ("a", 1),
    ("an", 1),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
];

/// Spatial relation between two entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
    OnTopOf,
    InFrontOf,
    Behind,
    HiddenBehind,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::LeftOf,
        Relation::RightOf,
        Relation::Above,
        Relation::Below,
        Relation::OnTopOf,
        Relation::InFrontOf,
        Relation::Behind,
        Relation::HiddenBehind,
    ];

    /// Canonical surface form.
    pub fn phrase(&self) -> &'static str {
        match self {
            Relation::LeftOf => "to the left of",
            Relation::RightOf => "to the right of",
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::OnTopOf => "on top of",
            Relation::InFrontOf => "in front of",
            Relation::Behind => "behind",
            Relation::HiddenBehind => "hidden behind",
        }
    }

    /// True for relations that imply overlapping boxes and a depth order.
    pub fn is_occlusion(&self) -> bool {
        matches!(self, Relation::InFrontOf | Relation::Behind | Relation::HiddenBehind)
    }
}

/// Shape noun or one of the parse-only extra nouns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Noun {
    Shape(ShapeKind),
    Word(String),
}

impl Noun {
    pub fn singular(&self) -> String {
        match self {
            Noun::Shape(s) => s.noun().to_string(),
            Noun::Word(w) => w.clone(),
        }
    }

    pub fn plural(&self) -> String {
        match self {
            Noun::Shape(s) => s.plural().to_string(),
            Noun::Word(w) => format!("{w}s"),
        }
    }

    fn from_word(word: &str) -> Option<(Noun, bool)> {
        if let Some(kind) = ShapeKind::from_noun(word) {
            let plural = word.ends_with('s');
            return Some((Noun::Shape(kind), plural));
        }
        for extra in EXTRA_NOUNS {
            if word == extra {
                return Some((Noun::Word(extra.to_string()), false));
            }
            if word == format!("{extra}s") {
                return Some((Noun::Word(extra.to_string()), true));
            }
        }
        None
    }
}

/// One entity group: noun, attribute words (at most a color), replica count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTerm {
    pub noun: Noun,
    pub attributes: Vec<String>,
    pub count: u32,
}

impl EntityTerm {
    pub fn color(&self) -> Option<ColorName> {
        self.attributes.iter().find_map(|a| ColorName::from_word(a))
    }
}

/// Relation between two declared entities, by index into `entities`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTerm {
    pub subject: usize,
    pub relation: Relation,
    pub object: usize,
}

/// Parsed prompt: entity groups plus relations chaining adjacent groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAst {
    pub entities: Vec<EntityTerm>,
    pub relations: Vec<RelationTerm>,
    /// True when the prompt carried the plain-background suffix.
    pub background_suffix: bool,
}

/// Parse failure, with the offending token position (0-based word index).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("grammar error at token {position} ({token:?}): expected {expected}")]
pub struct GrammarError {
    pub position: usize,
    pub token: String,
    pub expected: String,
}

struct Tokens {
    words: Vec<String>,
    pos: usize,
}

impl Tokens {
    fn peek(&self, offset: usize) -> Option<&str> {
        self.words.get(self.pos + offset).map(|s| s.as_str())
    }

    fn matches(&self, phrase: &[&str]) -> bool {
        phrase.iter().enumerate().all(|(i, w)| self.peek(i) == Some(*w))
    }

    fn advance(&mut self, n: usize) {
        self.pos += n;
    }

    fn error(&self, expected: &str) -> GrammarError {
        GrammarError {
            position: self.pos,
            token: self.peek(0).unwrap_or("<end>").to_string(),
            expected: expected.to_string(),
        }
    }
}

/// Parses a prompt under the fixed grammar. Total and deterministic: every
/// string either yields one AST or one `GrammarError` with a token position.
pub fn parse_prompt_dsl(text: &str) -> Result<SceneAst, GrammarError> {
    let words: Vec<String> = text
        .to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c == '.' || c == ',').to_string())
        .filter(|w| !w.is_empty())
        .collect();
    let mut t = Tokens { words, pos: 0 };

    let mut entities = Vec::new();
    let mut relations = Vec::new();

    entities.push(parse_entity(&mut t)?);
    loop {
        if t.peek(0).is_none() {
            break;
        }
        if let Some(consumed) = match_background(&t) {
            t.advance(consumed);
            if t.peek(0).is_some() {
                return Err(t.error("end of prompt after background clause"));
            }
            return Ok(SceneAst { entities, relations, background_suffix: true });
        }
        let relation = parse_relation(&mut t)?;
        let subject = entities.len() - 1;
        entities.push(parse_entity(&mut t)?);
        relations.push(RelationTerm { subject, relation, object: entities.len() - 1 });
    }
    Ok(SceneAst { entities, relations, background_suffix: false })
}

fn match_background(t: &Tokens) -> Option<usize> {
    let phrase = ["on", "a", "plain", "gray", "background"];
    if t.matches(&phrase) {
        Some(phrase.len())
    } else {
        None
    }
}

fn parse_relation(t: &mut Tokens) -> Result<Relation, GrammarError> {
    // Longest-first so "on top of" wins over a bare "on" and "hidden behind"
    // over "behind".
    let table: [(&[&str], Relation); 8] = [
        (&["to", "the", "left", "of"], Relation::LeftOf),
        (&["to", "the", "right", "of"], Relation::RightOf),
        (&["on", "top", "of"], Relation::OnTopOf),
        (&["in", "front", "of"], Relation::InFrontOf),
        (&["hidden", "behind"], Relation::HiddenBehind),
        (&["above"], Relation::Above),
        (&["below"], Relation::Below),
        (&["behind"], Relation::Behind),
    ];
    for (phrase, rel) in table {
        if t.matches(phrase) {
            t.advance(phrase.len());
            return Ok(rel);
        }
    }
    Err(t.error("a relation phrase"))
}

fn parse_entity(t: &mut Tokens) -> Result<EntityTerm, GrammarError> {
    let Some(first) = t.peek(0) else {
        return Err(t.error("a count word"));
    };
    let Some(&(_, count)) = COUNT_WORDS.iter().find(|(w, _)| *w == first) else {
        return Err(t.error("a count word (a, an, one..six)"));
    };
    t.advance(1);

    let mut attributes = Vec::new();
    if let Some(word) = t.peek(0) {
        if ColorName::from_word(word).is_some() {
            attributes.push(word.to_string());
            t.advance(1);
        }
    }

    let Some(word) = t.peek(0) else {
        return Err(t.error("a noun"));
    };
    let Some((noun, plural)) = Noun::from_word(word) else {
        return Err(t.error("a noun from the fixed vocabulary"));
    };
    if (count > 1) != plural {
        return Err(t.error(if count > 1 { "a plural noun" } else { "a singular noun" }));
    }
    t.advance(1);
    Ok(EntityTerm { noun, attributes, count })
}

/// Canonical surface form of an entity group ("a red circle", "three dogs").
pub fn format_entity(e: &EntityTerm) -> String {
    let noun = if e.count > 1 { e.noun.plural() } else { e.noun.singular() };
    let attr = e
        .attributes
        .first()
        .map(|a| format!("{a} "))
        .unwrap_or_default();
    let count_word = match e.count {
        1 => {
            let next = e.attributes.first().cloned().unwrap_or_else(|| noun.clone());
            if starts_with_vowel(&next) { "an" } else { "a" }
        }
        2 => "two",
        3 => "three",
        4 => "four",
        5 => "five",
        6 => "six",
        _ => "several",
    };
    format!("{count_word} {attr}{noun}")
}

fn starts_with_vowel(word: &str) -> bool {
    matches!(word.chars().next(), Some('a' | 'e' | 'i' | 'o' | 'u'))
}

/// Canonical surface form of a whole AST; inverse of [`parse_prompt_dsl`] on
/// canonical text.
pub fn format_ast(ast: &SceneAst) -> String {
    let mut out = format_entity(&ast.entities[0]);
    for rel in &ast.relations {
        out.push(' ');
        out.push_str(rel.relation.phrase());
        out.push(' ');
        out.push_str(&format_entity(&ast.entities[rel.object]));
    }
    if ast.background_suffix {
        out.push_str(" on a plain gray background");
    }
    out
}
