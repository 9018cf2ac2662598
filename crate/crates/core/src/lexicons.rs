//! Word-polarity lexicons, stopwords and frame lists.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FrameAnnotation, Sentence, Token};

const BUILTIN_FRAMES: &str = include_str!("../data/frames.tsv");
const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
}

pub type Result<T> = std::result::Result<T, LexiconError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconName {
    Connotation,
    Sentiment,
    PriorPolarity,
}

impl LexiconName {
    pub const ALL: [LexiconName; 3] = [
        LexiconName::Connotation,
        LexiconName::Sentiment,
        LexiconName::PriorPolarity,
    ];
}

impl fmt::Display for LexiconName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconName::Connotation => "connotation",
            LexiconName::Sentiment => "sentiment",
            LexiconName::PriorPolarity => "prior_polarity",
        })
    }
}

/// Row-level problem that was tolerated while loading (entry dropped).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconWarning {
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarityLexicon {
    pub name: LexiconName,
    entries: HashMap<String, Polarity>,
}

fn parse_polarity(field: &str) -> Option<Option<Polarity>> {
    match field.trim().to_ascii_lowercase().as_str() {
        "+1" | "1" | "+" | "pos" | "positive" => Some(Some(Polarity::Positive)),
        "-1" | "-" | "neg" | "negative" => Some(Some(Polarity::Negative)),
        "0" | "neutral" | "objective" | "both" => Some(None),
        _ => None,
    }
}

impl PolarityLexicon {
    pub fn from_entries<'a>(
        name: LexiconName,
        entries: impl IntoIterator<Item = (&'a str, Polarity)>,
    ) -> Self {
        PolarityLexicon {
            name,
            entries: entries
                .into_iter()
                .map(|(w, p)| (w.to_lowercase(), p))
                .collect(),
        }
    }

    /// Parses `word<TAB>polarity` rows. Neutral rows are skipped; words that
    /// appear with both polarities are dropped and reported as warnings.
    pub fn parse(
        name: LexiconName,
        text: &str,
        location: &str,
    ) -> Result<(Self, Vec<LexiconWarning>)> {
        let mut seen: BTreeMap<String, (Polarity, usize)> = BTreeMap::new();
        let mut conflicted: BTreeMap<String, usize> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or("").trim().to_lowercase();
            let pol = cols.next().ok_or_else(|| LexiconError::Parse {
                location: format!("{location}:{}", lineno + 1),
                message: "expected `word<TAB>polarity`".into(),
            })?;
            if word.is_empty() {
                return Err(LexiconError::Parse {
                    location: format!("{location}:{}", lineno + 1),
                    message: "empty word".into(),
                });
            }
            let pol = parse_polarity(pol).ok_or_else(|| LexiconError::Parse {
                location: format!("{location}:{}", lineno + 1),
                message: format!("unrecognised polarity `{}`", pol.trim()),
            })?;
            let Some(pol) = pol else { continue };
            if conflicted.contains_key(&word) {
                continue;
            }
            match seen.get(&word) {
                Some(&(prev, _)) if prev != pol => {
                    seen.remove(&word);
                    conflicted.insert(word, lineno + 1);
                }
                Some(_) => {}
                None => {
                    seen.insert(word, (pol, lineno + 1));
                }
            }
        }
        let warnings = conflicted
            .into_iter()
            .map(|(word, line)| LexiconWarning {
                location: format!("{location}:{line}"),
                message: format!("`{word}` listed with both polarities; dropped"),
            })
            .collect();
        let lex = PolarityLexicon {
            name,
            entries: seen.into_iter().map(|(w, (p, _))| (w, p)).collect(),
        };
        Ok((lex, warnings))
    }

    pub fn load(path: &Path, name: LexiconName) -> Result<Self> {
        let text = read(path)?;
        let (lex, warnings) = Self::parse(name, &text, &path.display().to_string())?;
        for w in warnings {
            log::warn!("{}: {}", w.location, w.message);
        }
        Ok(lex)
    }

    pub fn get(&self, word: &str) -> Option<Polarity> {
        self.entries.get(&word.to_lowercase()).copied()
    }

    /// Lemma first, lowercased surface as fallback.
    pub fn lookup(&self, token: &Token) -> Option<Polarity> {
        self.get(&token.lemma).or_else(|| self.get(&token.surface))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in word order, for writing the lexicon back out.
    pub fn to_tsv(&self) -> String {
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        let mut out = String::new();
        for (w, p) in sorted {
            out.push_str(w);
            out.push('\t');
            out.push_str(if *p == Polarity::Positive { "+1" } else { "-1" });
            out.push('\n');
        }
        out
    }
}

/// Lexicon polarity of `lemma`, inverted when the word is negated.
pub fn effective_polarity(lex: &PolarityLexicon, lemma: &str, negated: bool) -> Option<Polarity> {
    lex.get(lemma)
        .map(|p| if negated { p.flipped() } else { p })
}

/// Polarity of a token (lemma, then surface), inverted when negated.
pub fn token_polarity(lex: &PolarityLexicon, token: &Token, negated: bool) -> Option<Polarity> {
    lex.lookup(token)
        .map(|p| if negated { p.flipped() } else { p })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameCategory {
    Positive,
    Negative,
    Ambiguous,
    Relationship,
}

impl FrameCategory {
    fn parse(s: &str) -> Option<FrameCategory> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(FrameCategory::Positive),
            "negative" => Some(FrameCategory::Negative),
            "ambiguous" => Some(FrameCategory::Ambiguous),
            "relationship" => Some(FrameCategory::Relationship),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            FrameCategory::Positive => "positive",
            FrameCategory::Negative => "negative",
            FrameCategory::Ambiguous => "ambiguous",
            FrameCategory::Relationship => "relationship",
        }
    }
}

/// Resolved category of a fired frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameClass {
    Positive,
    Negative,
    Relationship,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    pub category: FrameCategory,
    pub relevant_elements: BTreeSet<String>,
}

/// Frame and element names compare case-insensitively, with spaces and
/// hyphens treated as underscores.
pub fn normalize_frame_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLexicon {
    entries: BTreeMap<String, FrameEntry>,
}

impl FrameLexicon {
    /// Parses `frame<TAB>category<TAB>element,element,...` rows.
    pub fn parse(text: &str, location: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| LexiconError::Parse {
                location: format!("{location}:{}", lineno + 1),
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected `frame<TAB>category<TAB>elements`".into()));
            }
            let name = normalize_frame_name(cols[0]);
            if name.is_empty() {
                return Err(err("empty frame name".into()));
            }
            let category = FrameCategory::parse(cols[1])
                .ok_or_else(|| err(format!("unknown category `{}`", cols[1])))?;
            let relevant_elements: BTreeSet<String> = cols[2]
                .split(',')
                .map(normalize_frame_name)
                .filter(|e| !e.is_empty())
                .collect();
            if relevant_elements.is_empty() {
                return Err(err(format!("frame `{name}` lists no relevant elements")));
            }
            if entries
                .insert(
                    name.clone(),
                    FrameEntry {
                        category,
                        relevant_elements,
                    },
                )
                .is_some()
            {
                return Err(err(format!("frame `{name}` listed twice")));
            }
        }
        Ok(FrameLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    /// The eight example frames shipped in `data/frames.tsv`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_FRAMES, "builtin frames.tsv").expect("builtin frame list parses")
    }

    pub fn get(&self, frame_name: &str) -> Option<&FrameEntry> {
        self.entries.get(&normalize_frame_name(frame_name))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, e) in &self.entries {
            let elems: Vec<&str> = e.relevant_elements.iter().map(String::as_str).collect();
            out.push_str(&format!(
                "{name}\t{}\t{}\n",
                e.category.as_str(),
                elems.join(",")
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn parse(text: &str, location: &str) -> Result<Self> {
        let words: HashSet<String> = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(LexiconError::Parse {
                location: location.into(),
                message: "stopword list is empty".into(),
            });
        }
        Ok(StopwordList { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS, "builtin stopwords.txt").expect("builtin stopwords parse")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn is_stopword(&self, token: &Token) -> bool {
        self.contains(&token.surface) || self.contains(&token.lemma)
    }

    pub fn to_text(&self) -> String {
        let sorted: BTreeSet<_> = self.words.iter().collect();
        sorted.into_iter().map(|w| format!("{w}\n")).collect()
    }
}

/// Resolves a fired frame to positive, negative or relationship.
///
/// Ambiguous frames take the polarity of their lexical unit in `connotation`
/// and resolve to nothing when the lexical unit is unknown.
pub fn classify_frame(
    frames: &FrameLexicon,
    connotation: &PolarityLexicon,
    frame: &FrameAnnotation,
    sentence: &Sentence,
) -> Option<FrameClass> {
    let entry = frames.get(&frame.name)?;
    match entry.category {
        FrameCategory::Positive => Some(FrameClass::Positive),
        FrameCategory::Negative => Some(FrameClass::Negative),
        FrameCategory::Relationship => Some(FrameClass::Relationship),
        FrameCategory::Ambiguous => {
            let lu = sentence.tokens.get(frame.lu)?;
            match connotation.lookup(lu)? {
                Polarity::Positive => Some(FrameClass::Positive),
                Polarity::Negative => Some(FrameClass::Negative),
            }
        }
    }
}

/// Everything content features need besides the sentence itself.
#[derive(Clone, Debug)]
pub struct Lexicons {
    pub connotation: PolarityLexicon,
    pub sentiment: PolarityLexicon,
    pub prior_polarity: PolarityLexicon,
    pub frames: FrameLexicon,
    pub stopwords: StopwordList,
}

impl Lexicons {
    /// Polarity lexicons in feature order.
    pub fn polarity(&self) -> [&PolarityLexicon; 3] {
        [&self.connotation, &self.sentiment, &self.prior_polarity]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityId, FrameElement, MentionSpan};

    fn lex(text: &str) -> (PolarityLexicon, Vec<LexiconWarning>) {
        PolarityLexicon::parse(LexiconName::Connotation, text, "t").unwrap()
    }

    #[test]
    fn parses_signs_and_aliases() {
        let (l, w) = lex("# comment\nhelp\t+1\nshun\t-1\nLove\tpos\nhate\tnegative\ntable\t0\n");
        assert!(w.is_empty());
        assert_eq!(l.get("help"), Some(Polarity::Positive));
        assert_eq!(l.get("shun"), Some(Polarity::Negative));
        assert_eq!(l.get("love"), Some(Polarity::Positive));
        assert_eq!(l.get("HATE"), Some(Polarity::Negative));
        assert_eq!(l.get("table"), None);
        assert_eq!(l.get("absent"), None);
    }

    #[test]
    fn conflicting_rows_drop_word() {
        let (l, w) = lex("help\t+1\nfight\t-1\nhelp\t-1\nhelp\t+1\nfight\t-1\n");
        assert_eq!(l.get("help"), None);
        assert_eq!(l.get("fight"), Some(Polarity::Negative));
        assert_eq!(w.len(), 1);
        assert!(w[0].message.contains("help"));
    }

    #[test]
    fn bad_rows_are_errors() {
        assert!(PolarityLexicon::parse(LexiconName::Sentiment, "help\n", "t").is_err());
        assert!(PolarityLexicon::parse(LexiconName::Sentiment, "help\tmaybe\n", "t").is_err());
    }

    #[test]
    fn negation_flips() {
        let (l, _) = lex("shun\t-1\n");
        assert_eq!(
            effective_polarity(&l, "shun", false),
            Some(Polarity::Negative)
        );
        assert_eq!(
            effective_polarity(&l, "shun", true),
            Some(Polarity::Positive)
        );
        assert_eq!(effective_polarity(&l, "nothing", true), None);
    }

    #[test]
    fn token_lookup_prefers_lemma() {
        let (l, _) = lex("help\t+1\nhelped\t-1\n");
        let t = Token {
            surface: "Helped".into(),
            lemma: "help".into(),
            pos: "VBD".into(),
        };
        assert_eq!(l.lookup(&t), Some(Polarity::Positive));
        let t = Token {
            surface: "Helped".into(),
            lemma: "assist".into(),
            pos: "VBD".into(),
        };
        assert_eq!(l.lookup(&t), Some(Polarity::Negative));
    }

    #[test]
    fn builtin_frames_match_table() {
        let f = FrameLexicon::builtin();
        assert_eq!(f.len(), 8);
        assert_eq!(f.get("Killing").unwrap().category, FrameCategory::Negative);
        assert!(f
            .get("killing")
            .unwrap()
            .relevant_elements
            .contains("victim"));
        assert_eq!(
            f.get("forgiveness").unwrap().category,
            FrameCategory::Positive
        );
        assert_eq!(
            f.get("cause bodily experience").unwrap().category,
            FrameCategory::Ambiguous
        );
        assert_eq!(
            f.get("Subordinates_and_superiors").unwrap().category,
            FrameCategory::Relationship
        );
        assert_eq!(FrameLexicon::parse(&f.to_tsv(), "rt").unwrap(), f);
    }

    #[test]
    fn frame_list_errors() {
        assert!(FrameLexicon::parse("a\tpositive\tx\na\tnegative\ty\n", "t").is_err());
        assert!(FrameLexicon::parse("a\tpositive\t\n", "t").is_err());
        assert!(FrameLexicon::parse("a\tweird\tx\n", "t").is_err());
    }

    fn frame_sentence(lu_lemma: &str) -> Sentence {
        Sentence {
            tokens: vec![Token {
                surface: lu_lemma.into(),
                lemma: lu_lemma.into(),
                pos: "VB".into(),
            }],
            deps: vec![],
            mentions: vec![MentionSpan {
                entity: EntityId(1),
                start: 0,
                end: 1,
            }],
            frames: vec![],
            doc_position: 0,
        }
    }

    fn frame(name: &str) -> FrameAnnotation {
        FrameAnnotation {
            name: name.into(),
            lu: 0,
            elements: vec![FrameElement {
                name: "Victim".into(),
                start: 0,
                end: 1,
            }],
        }
    }

    #[test]
    fn classify_uses_categories_and_lexical_unit() {
        let frames = FrameLexicon::builtin();
        let (conn, _) = lex("tickle\t+1\nburn\t-1\n");
        let s = frame_sentence("tickle");
        assert_eq!(
            classify_frame(&frames, &conn, &frame("Killing"), &s),
            Some(FrameClass::Negative)
        );
        assert_eq!(
            classify_frame(&frames, &conn, &frame("forgiveness"), &s),
            Some(FrameClass::Positive)
        );
        assert_eq!(
            classify_frame(&frames, &conn, &frame("kinship"), &s),
            Some(FrameClass::Relationship)
        );
        assert_eq!(
            classify_frame(&frames, &conn, &frame("cause_bodily_experience"), &s),
            Some(FrameClass::Positive)
        );
        let burn = frame_sentence("burn");
        assert_eq!(
            classify_frame(&frames, &conn, &frame("cause_bodily_experience"), &burn),
            Some(FrameClass::Negative)
        );
        let unknown = frame_sentence("poke");
        assert_eq!(
            classify_frame(&frames, &conn, &frame("cause_bodily_experience"), &unknown),
            None
        );
        assert_eq!(classify_frame(&frames, &conn, &frame("Motion"), &s), None);
    }

    #[test]
    fn stopwords() {
        let s = StopwordList::builtin();
        assert!(s.contains("The"));
        assert!(!s.contains("cave"));
        assert!(StopwordList::parse("\n# x\n", "t").is_err());
    }
}
