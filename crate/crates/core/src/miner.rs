//! Mining context templates from a text corpus.
//!
//! Sentences that mention a group word (`[X]`) and an attribute word (`[Y]`)
//! are filtered, reduced to a skeleton with the two slots, and tallied; the
//! skeleton frequencies give the distribution over contexts.
//!
//! Coreference is approximated by a linkage rule: an attribute word refers
//! to the group word when it follows it in the same sentence with no other
//! person-denoting word in between. An attribute word introduced by a
//! determiner ("the actress", "a white man") names a different person and
//! is dropped, unless the determiner follows a copula ("is a woman").

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::WeightedContexts;
use crate::schema::WordSchema;

pub const X_SLOT: &str = "[X]";
pub const Y_SLOT: &str = "[Y]";

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "inc", "ltd", "co", "corp", "gen", "col", "lt",
    "sgt", "capt", "cmdr", "adm", "gov", "sen", "rep", "rev", "hon", "no", "mt", "ft", "fig", "approx", "dept", "est",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

const PRONOUNS: &[&str] = &[
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "another", "every", "each", "some", "any", "my", "your", "our",
    "their", "his", "her", "its",
];

const COPULAS: &[&str] = &[
    "is", "was", "are", "were", "be", "been", "being", "became", "becomes", "become", "remains", "remained", "seemed",
    "seems",
];

const PERSON_NOUNS: &[&str] = &[
    "person",
    "persons",
    "people",
    "man",
    "men",
    "woman",
    "women",
    "boy",
    "boys",
    "girl",
    "girls",
    "child",
    "children",
    "kid",
    "kids",
    "baby",
    "friend",
    "friends",
    "colleague",
    "colleagues",
    "patient",
    "patients",
    "customer",
    "customers",
    "client",
    "clients",
    "student",
    "students",
    "neighbor",
    "neighbors",
    "neighbour",
    "neighbours",
    "someone",
    "somebody",
    "everyone",
    "everybody",
    "anyone",
    "anybody",
    "nobody",
    "guest",
    "guests",
    "visitor",
    "visitors",
    "partner",
    "partners",
    "resident",
    "residents",
    "passenger",
    "passengers",
    "family",
    "wife",
    "husband",
    "mother",
    "father",
    "son",
    "daughter",
    "brother",
    "sister",
    "parent",
    "parents",
    "victim",
    "victims",
    "suspect",
    "suspects",
    "stranger",
    "strangers",
    "audience",
    "crowd",
    "boss",
    "employee",
    "employees",
    "owner",
    "reader",
    "readers",
    "viewer",
    "viewers",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub text: String,
}

impl CorpusDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let doc = Self {
            id: id.into(),
            text: text.into(),
        };
        if doc.text.trim().is_empty() {
            return Err(Error::InvalidCorpus(format!("document `{}` is empty", doc.id)));
        }
        Ok(doc)
    }
}

/// Reads a JSON-lines corpus (`{"id": ..., "text": ...}` per line). Extra
/// fields are ignored; blank lines are skipped.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusDocument>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDocument =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), n + 1), e))?;
        docs.push(CorpusDocument::new(doc.id, doc.text)?);
    }
    Ok(docs)
}

/// Keeps at most `n` documents, choosing by a seeded hash of the document
/// id so the selection does not depend on file order.
pub fn sample_documents(mut docs: Vec<CorpusDocument>, n: usize, seed: u64) -> Vec<CorpusDocument> {
    if docs.len() <= n {
        return docs;
    }
    let key = |d: &CorpusDocument| {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(d.id.as_bytes());
        h.finalize()
    };
    docs.sort_by_cached_key(|d| (key(d), d.id.clone()));
    docs.truncate(n);
    docs
}

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let word: String = text[..dot]
        .chars()
        .rev()
        .take_while(|c| c.is_alphabetic())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if word.chars().count() == 1 {
        // initials, and the tail of "e.g." / "i.e."
        return true;
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

/// Splits on `.`, `!` or `?` (plus any closing quotes or brackets) when
/// followed by whitespace and an uppercase letter, or by end of text.
/// Periods after a known abbreviation or a single letter do not split.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len()
            && matches!(
                chars[j].1,
                '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}'
            )
        {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let at_end = k == chars.len();
        let next_opens = k > j
            && chars.get(k).is_some_and(|&(_, n)| {
                n.is_uppercase()
                    || (matches!(n, '"' | '\u{201c}' | '(') && chars.get(k + 1).is_some_and(|&(_, m)| m.is_uppercase()))
            });
        let boundary = (at_end || next_opens) && !(c == '.' && is_abbreviation(text, pos));
        if boundary {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = end;
        }
        i = j.max(i + 1);
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    start: usize,
    end: usize,
    lower: String,
}

fn tokenize(sentence: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur: Option<usize> = None;
    let chars: Vec<(usize, char)> = sentence.char_indices().collect();
    for (idx, &(pos, c)) in chars.iter().enumerate() {
        let joiner = matches!(c, '\'' | '\u{2019}' | '-')
            && cur.is_some()
            && chars.get(idx + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
        if c.is_alphanumeric() || joiner {
            cur.get_or_insert(pos);
        } else if let Some(s) = cur.take() {
            out.push(Token {
                start: s,
                end: pos,
                lower: sentence[s..pos].to_lowercase(),
            });
        }
    }
    if let Some(s) = cur {
        out.push(Token {
            start: s,
            end: sentence.len(),
            lower: sentence[s..].to_lowercase(),
        });
    }
    out
}

/// Byte span of a match within its sentence.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupHit {
    pub word: String,
    pub group_id: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeHit {
    pub word: String,
    pub category: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceCandidate {
    pub doc_id: String,
    pub sentence: String,
    pub x_hits: Vec<GroupHit>,
    pub y_hits: Vec<AttributeHit>,
}

/// A candidate reduced to one group mention and the attribute word that
/// refers to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignatedCandidate {
    pub doc_id: String,
    pub sentence: String,
    pub x: GroupHit,
    pub y: AttributeHit,
}

/// Possessive forms ("doctor's") also match the bare word.
fn strip_possessive(token: &Token) -> (&str, usize) {
    for suffix in ["'s", "\u{2019}s"] {
        if let Some(stem) = token.lower.strip_suffix(suffix) {
            return (stem, token.end - suffix.len());
        }
    }
    (&token.lower, token.end)
}

pub fn match_candidate(doc_id: &str, sentence: &str, schema: &WordSchema) -> Option<SentenceCandidate> {
    let groups = schema.group_lookup();
    let mut categories = BTreeMap::new();
    for c in &schema.categories {
        for w in &c.words {
            categories.insert(w.as_str(), c.id.as_str());
        }
    }
    let mut x_hits = Vec::new();
    let mut y_hits = Vec::new();
    for tok in tokenize(sentence) {
        let (stem, stem_end) = strip_possessive(&tok);
        if let Some(&g) = groups.get(tok.lower.as_str()) {
            x_hits.push(GroupHit {
                word: tok.lower.clone(),
                group_id: g.to_string(),
                span: (tok.start, tok.end),
            });
        } else if let Some(&g) = groups.get(stem) {
            x_hits.push(GroupHit {
                word: stem.to_string(),
                group_id: g.to_string(),
                span: (tok.start, stem_end),
            });
        } else if let Some(&c) = categories.get(tok.lower.as_str()) {
            y_hits.push(AttributeHit {
                word: tok.lower.clone(),
                category: c.to_string(),
                span: (tok.start, tok.end),
            });
        }
    }
    if x_hits.is_empty() || y_hits.is_empty() {
        return None;
    }
    Some(SentenceCandidate {
        doc_id: doc_id.to_string(),
        sentence: sentence.to_string(),
        x_hits,
        y_hits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// The sentence names the attribute outright.
    Exclusion,
    /// Group words of more than one group.
    AmbiguousSubject,
    /// No attribute word refers to the group mention.
    NoLinkedAttribute,
}

pub fn filter_candidate(
    c: &SentenceCandidate,
    schema: &WordSchema,
) -> std::result::Result<DesignatedCandidate, Rejection> {
    let tokens = tokenize(&c.sentence);
    if tokens.iter().any(|t| schema.exclusions.contains(&t.lower)) {
        return Err(Rejection::Exclusion);
    }

    let tok_at = |start: usize| tokens.iter().position(|t| t.start == start);
    let x_idx: Vec<(usize, &GroupHit)> = c
        .x_hits
        .iter()
        .filter_map(|h| tok_at(h.span.0).map(|i| (i, h)))
        .collect();
    let y_idx: Vec<(usize, &AttributeHit)> = c
        .y_hits
        .iter()
        .filter_map(|h| tok_at(h.span.0).map(|i| (i, h)))
        .collect();

    // An attribute noun after a determiner introduces someone else.
    let introduces_other = |i: usize| -> bool {
        if PRONOUNS.contains(&tokens[i].lower.as_str()) || i == 0 {
            return false;
        }
        let prev = tokens[i - 1].lower.as_str();
        if !DETERMINERS.contains(&prev) {
            return false;
        }
        !(i >= 2 && COPULAS.contains(&tokens[i - 2].lower.as_str()))
    };

    let is_blocker = |i: usize| -> bool {
        let w = tokens[i].lower.as_str();
        PERSON_NOUNS.contains(&w)
            || x_idx.iter().any(|(xi, _)| *xi == i)
            || (y_idx.iter().any(|(yi, _)| *yi == i) && introduces_other(i))
    };

    let mut linked = None;
    for &(yi, yh) in &y_idx {
        if introduces_other(yi) {
            continue;
        }
        let Some(&(xi, xh)) = x_idx.iter().rev().find(|(xi, _)| *xi < yi) else {
            continue;
        };
        if (xi + 1..yi).any(is_blocker) {
            continue;
        }
        linked = Some((xh, yh));
        break;
    }

    let first_group = &c.x_hits[0].group_id;
    if c.x_hits.iter().any(|h| &h.group_id != first_group) {
        return Err(Rejection::AmbiguousSubject);
    }
    let (x, y) = linked.ok_or(Rejection::NoLinkedAttribute)?;
    Ok(DesignatedCandidate {
        doc_id: c.doc_id.clone(),
        sentence: c.sentence.clone(),
        x: x.clone(),
        y: y.clone(),
    })
}

/// Where the `[Y]` slot sits in a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotOrder {
    /// The sentence order as found: "The [X] said that [Y]".
    #[default]
    XThenY,
    /// Rewritten so `[Y]` is the final position: "The [X], who came, is [Y]".
    YAtEnd,
}

impl std::str::FromStr for SlotOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x_then_y" | "xtheny" => Ok(SlotOrder::XThenY),
            "y_at_end" | "yatend" => Ok(SlotOrder::YAtEnd),
            _ => Err(Error::BadTemplate(format!("unknown slot order `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTemplate {
    pub skeleton: String,
    pub count: u64,
}

impl ContextTemplate {
    pub fn new(skeleton: impl Into<String>, count: u64) -> Result<Self> {
        let t = Self {
            skeleton: skeleton.into(),
            count,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.skeleton.matches(X_SLOT).count() != 1 || self.skeleton.matches(Y_SLOT).count() != 1 {
            return Err(Error::BadTemplate(self.skeleton.clone()));
        }
        if self.count == 0 {
            return Err(Error::BadTemplate(format!("{} has zero count", self.skeleton)));
        }
        Ok(())
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for c in s.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    out
}

/// Predicate between the group word and the attribute word with relative
/// pronouns, a trailing copula and dangling connectives removed.
fn bare_predicate(between: &str) -> String {
    let trim_punct = |s: &str| {
        s.trim_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '-'))
            .to_string()
    };
    let mut words: Vec<String> = trim_punct(between).split_whitespace().map(str::to_string).collect();
    if words
        .first()
        .is_some_and(|w| matches!(w.to_lowercase().as_str(), "who" | "which" | "that"))
    {
        words.remove(0);
    }
    while let Some(last) = words.last() {
        let bare = last.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        if bare.is_empty()
            || COPULAS.contains(&bare.as_str())
            || matches!(bare.as_str(), "and" | "but" | "or" | "a" | "an" | "the")
        {
            words.pop();
        } else {
            break;
        }
    }
    trim_punct(&words.join(" "))
}

/// True when the group mention is an appositive: the text before it ends
/// with a comma, optionally followed by an article.
fn is_appositive(before: &str) -> bool {
    let rest = before.trim_end();
    let lower = rest.to_lowercase();
    let rest = ["the", "a", "an"]
        .iter()
        .filter_map(|art| lower.strip_suffix(art))
        .find(|head| head.is_empty() || head.ends_with(|c: char| !c.is_alphanumeric()))
        .map_or(lower.as_str(), str::trim_end);
    rest.ends_with(',')
}

/// Replaces the designated mentions by slots. The subject noun phrase is
/// normalized to "The [X]" and the sentence is cut after `[Y]`.
pub fn skeletonize(c: &DesignatedCandidate, mode: SlotOrder) -> Result<ContextTemplate> {
    let (xs, xe) = c.x.span;
    let (ys, ye) = c.y.span;
    if xs < ye && ys < xe {
        return Err(Error::SlotCollision);
    }
    if ys < xe {
        return Err(Error::BadTemplate(format!(
            "attribute word precedes the group word in `{}`",
            c.sentence
        )));
    }
    let mut between = &c.sentence[xe..ys];
    if is_appositive(&c.sentence[..xs]) {
        // "..., a reporter, announced" reads as "The reporter announced"
        between = between.strip_prefix(',').unwrap_or(between);
    }
    let skeleton = match mode {
        SlotOrder::XThenY => format!("The {X_SLOT}{}{Y_SLOT}", collapse_whitespace(between)),
        SlotOrder::YAtEnd => {
            let pred = bare_predicate(between);
            if pred.is_empty() {
                format!("The {X_SLOT} is {Y_SLOT}")
            } else {
                format!("The {X_SLOT}, who {pred}, is {Y_SLOT}")
            }
        }
    };
    ContextTemplate::new(skeleton, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSet {
    pub templates: Vec<ContextTemplate>,
    pub mode: SlotOrder,
}

impl ContextSet {
    pub fn weights(&self) -> Result<WeightedContexts> {
        let counts: Vec<u64> = self.templates.iter().map(|t| t.count).collect();
        WeightedContexts::from_counts(&counts)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    /// Context identifiers are the skeletons themselves.
    pub fn ids(&self) -> Vec<String> {
        self.templates.iter().map(|t| t.skeleton.clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: ContextSet = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &set.templates {
            t.validate()?;
            if !seen.insert(t.skeleton.as_str()) {
                return Err(Error::BadTemplate(format!("duplicate template `{}`", t.skeleton)));
            }
        }
        Ok(set)
    }
}

/// Merges equal skeletons; output is sorted by count (descending) then
/// skeleton text.
pub fn tally<I>(templates: I, mode: SlotOrder) -> ContextSet
where
    I: IntoIterator<Item = ContextTemplate>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for t in templates {
        *counts.entry(t.skeleton).or_default() += t.count;
    }
    finish_tally(counts, mode)
}

fn finish_tally(counts: BTreeMap<String, u64>, mode: SlotOrder) -> ContextSet {
    let mut templates: Vec<ContextTemplate> = counts
        .into_iter()
        .map(|(skeleton, count)| ContextTemplate { skeleton, count })
        .collect();
    templates.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.skeleton.cmp(&b.skeleton)));
    ContextSet { templates, mode }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningStats {
    pub documents: u64,
    pub sentences: u64,
    pub candidates: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<Rejection, u64>,
    pub skeleton_errors: u64,
}

impl MiningStats {
    fn merge(mut self, other: MiningStats) -> MiningStats {
        self.documents += other.documents;
        self.sentences += other.sentences;
        self.candidates += other.candidates;
        self.accepted += other.accepted;
        self.skeleton_errors += other.skeleton_errors;
        for (k, v) in other.rejected {
            *self.rejected.entry(k).or_default() += v;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOutcome {
    pub contexts: ContextSet,
    pub stats: MiningStats,
}

/// Outcome of running a single sentence through matching, filtering and
/// skeletonization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentenceVerdict {
    NoMatch,
    Rejected(Rejection),
    Accepted(String),
    SkeletonError,
}

pub fn judge_sentence(doc_id: &str, sentence: &str, schema: &WordSchema, mode: SlotOrder) -> SentenceVerdict {
    let Some(cand) = match_candidate(doc_id, sentence, schema) else {
        return SentenceVerdict::NoMatch;
    };
    match filter_candidate(&cand, schema) {
        Err(r) => SentenceVerdict::Rejected(r),
        Ok(d) => match skeletonize(&d, mode) {
            Ok(t) => SentenceVerdict::Accepted(t.skeleton),
            Err(_) => SentenceVerdict::SkeletonError,
        },
    }
}

/// Runs the whole mining pipeline. Documents are processed in parallel;
/// the result does not depend on document order.
pub fn mine(docs: &[CorpusDocument], schema: &WordSchema, mode: SlotOrder) -> MiningOutcome {
    let (counts, stats) = docs
        .par_iter()
        .map(|doc| {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            let mut stats = MiningStats {
                documents: 1,
                ..Default::default()
            };
            for sentence in split_sentences(&doc.text) {
                stats.sentences += 1;
                match judge_sentence(&doc.id, &sentence, schema, mode) {
                    SentenceVerdict::NoMatch => {}
                    SentenceVerdict::Rejected(r) => {
                        stats.candidates += 1;
                        *stats.rejected.entry(r).or_default() += 1;
                    }
                    SentenceVerdict::SkeletonError => {
                        stats.candidates += 1;
                        stats.skeleton_errors += 1;
                    }
                    SentenceVerdict::Accepted(s) => {
                        stats.candidates += 1;
                        stats.accepted += 1;
                        *counts.entry(s).or_default() += 1;
                    }
                }
            }
            (counts, stats)
        })
        .reduce(
            || (BTreeMap::new(), MiningStats::default()),
            |(mut a, sa), (b, sb)| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                (a, sa.merge(sb))
            },
        );
    MiningOutcome {
        contexts: finish_tally(counts, mode),
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> WordSchema {
        serde_json::from_str(
            r#"{
                "groups": [
                    {"id": "doctor", "words": ["doctor"]},
                    {"id": "nurse", "words": ["nurse"]},
                    {"id": "captain", "words": ["captain"]}
                ],
                "categories": [
                    {"id": "male", "words": ["he", "him", "his", "man", "actor"]},
                    {"id": "female", "words": ["she", "her", "woman", "actress"]}
                ],
                "exclusions": ["beard"]
            }"#,
        )
        .unwrap()
    }

    fn race() -> WordSchema {
        serde_json::from_str(
            r#"{
                "groups": [{"id": "captain", "words": ["captain"]}],
                "categories": [
                    {"id": "white", "words": ["white"]},
                    {"id": "black", "words": ["black", "african"]}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn splits_on_terminals() {
        assert_eq!(
            split_sentences("The doctor left. She was tired."),
            ["The doctor left.", "She was tired."]
        );
        assert_eq!(split_sentences("Dr. Smith arrived."), ["Dr. Smith arrived."]);
        assert!(split_sentences("   ").is_empty());
        assert!(split_sentences("").is_empty());
        assert_eq!(
            split_sentences("Is it? Yes! J. R. Smith, e.g. him, came. done"),
            ["Is it?", "Yes!", "J. R. Smith, e.g. him, came. done"]
        );
        assert_eq!(
            split_sentences("He said \"Stop.\" Then he left."),
            ["He said \"Stop.\"", "Then he left."]
        );
    }

    #[test]
    fn matching() {
        let s = schema();
        let c = match_candidate("d", "The doctor said that he was late.", &s).unwrap();
        assert_eq!(c.x_hits.len(), 1);
        assert_eq!(c.x_hits[0].word, "doctor");
        assert_eq!(c.x_hits[0].span, (4, 10));
        assert_eq!(c.y_hits.len(), 1);
        assert_eq!(c.y_hits[0].word, "he");
        assert_eq!(c.y_hits[0].category, "male");
        assert!(match_candidate("d", "The table was red.", &s).is_none());
        assert!(match_candidate("d", "He said hello.", &s).is_none());
        // case-insensitive, word boundaries only
        assert!(match_candidate("d", "DOCTOR: SHE left", &s).is_some());
        assert!(match_candidate("d", "The doctors shepherded", &s).is_none());
    }

    fn judge(s: &str) -> SentenceVerdict {
        judge_sentence("d", s, &schema(), SlotOrder::XThenY)
    }

    #[test]
    fn filters() {
        assert_eq!(
            judge("The doctor with a beard said that he left."),
            SentenceVerdict::Rejected(Rejection::Exclusion)
        );
        assert_eq!(
            judge("The doctor said that he was late."),
            SentenceVerdict::Accepted("The [X] said that [Y]".into())
        );
        let s = schema();
        let c = match_candidate("d", "The doctor said that he was late.", &s).unwrap();
        let d = filter_candidate(&c, &s).unwrap();
        assert_eq!((d.x.word.as_str(), d.y.word.as_str()), ("doctor", "he"));

        assert_eq!(
            judge("The doctor met the actress and she smiled."),
            SentenceVerdict::Rejected(Rejection::NoLinkedAttribute)
        );
        assert_eq!(
            judge("The doctor met the nurse and she smiled."),
            SentenceVerdict::Rejected(Rejection::AmbiguousSubject)
        );
        assert_eq!(
            judge("She thanked the doctor."),
            SentenceVerdict::Rejected(Rejection::NoLinkedAttribute)
        );
        assert_eq!(
            judge("The doctor told a patient that she was fine."),
            SentenceVerdict::Rejected(Rejection::NoLinkedAttribute)
        );
        assert_eq!(
            judge("The doctor is a woman."),
            SentenceVerdict::Accepted("The [X] is a [Y]".into())
        );
        assert_eq!(
            judge("The doctor's bag was where he left it."),
            SentenceVerdict::Accepted("The [X]'s bag was where [Y]".into())
        );
    }

    #[test]
    fn skeletons() {
        let r = race();
        let v = judge_sentence("d", "The captain, who came, is white.", &r, SlotOrder::YAtEnd);
        assert_eq!(v, SentenceVerdict::Accepted("The [X], who came, is [Y]".into()));
        let v = judge_sentence("d", "The captain, who came, is white.", &r, SlotOrder::XThenY);
        assert_eq!(v, SentenceVerdict::Accepted("The [X], who came, is [Y]".into()));
        let v = judge_sentence("d", "The captain came and was black.", &r, SlotOrder::YAtEnd);
        assert_eq!(v, SentenceVerdict::Accepted("The [X], who came, is [Y]".into()));
        let v = judge_sentence("d", "The captain was white.", &r, SlotOrder::YAtEnd);
        assert_eq!(v, SentenceVerdict::Accepted("The [X] is [Y]".into()));
        let v = judge_sentence("d", "A   captain  said\tthat he left", &schema(), SlotOrder::XThenY);
        assert_eq!(v, SentenceVerdict::Accepted("The [X] said that [Y]".into()));
    }

    #[test]
    fn slot_collision() {
        let hit = GroupHit {
            word: "doctor".into(),
            group_id: "doctor".into(),
            span: (4, 10),
        };
        let d = DesignatedCandidate {
            doc_id: "d".into(),
            sentence: "The doctor left".into(),
            x: hit,
            y: AttributeHit {
                word: "doc".into(),
                category: "male".into(),
                span: (5, 8),
            },
        };
        assert!(matches!(skeletonize(&d, SlotOrder::XThenY), Err(Error::SlotCollision)));
    }

    #[test]
    fn tally_merges_and_sorts() {
        let t = |s: &str, n| ContextTemplate::new(s, n).unwrap();
        let set = tally(
            [
                t("The [X] stated that [Y]", 856),
                t("The [X] said that [Y]", 2000),
                t("The [X] said that [Y]", 142),
            ],
            SlotOrder::XThenY,
        );
        assert_eq!(set.templates[0].skeleton, "The [X] said that [Y]");
        assert_eq!(set.templates[0].count, 2142);
        let w = set.weights().unwrap();
        assert_eq!(w.weights(), &[2142.0 / 2998.0, 856.0 / 2998.0]);

        let one = tally([t("The [X] said that [Y]", 1)], SlotOrder::XThenY);
        assert_eq!(one.weights().unwrap().weights(), &[1.0]);

        let empty = tally(std::iter::empty(), SlotOrder::XThenY);
        assert!(empty.is_empty());
        assert!(matches!(empty.weights(), Err(Error::EmptyContextSet)));
    }

    #[test]
    fn template_validation() {
        assert!(ContextTemplate::new("The [X] said", 1).is_err());
        assert!(ContextTemplate::new("The [X] [X] said [Y]", 1).is_err());
        assert!(ContextTemplate::new("The [X] said [Y]", 0).is_err());
    }

    #[test]
    fn sampling_ignores_order() {
        let docs: Vec<_> = (0..20)
            .map(|i| CorpusDocument::new(format!("d{i}"), "x").unwrap())
            .collect();
        let mut rev = docs.clone();
        rev.reverse();
        let a = sample_documents(docs, 5, 3);
        let b = sample_documents(rev, 5, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn appositive_subject() {
        assert_eq!(
            judge("Her spokesperson, a doctor, said that she left."),
            SentenceVerdict::Accepted("The [X] said that [Y]".into())
        );
        assert_eq!(
            judge("The doctor, who came, said that she left."),
            SentenceVerdict::Accepted("The [X], who came, said that [Y]".into())
        );
    }
}
