//! Lexicon and embedding files backing the text features.
//!
//! A lexicon directory holds up to six TSV files, each optional:
//!
//! | file            | payload                                   |
//! |-----------------|-------------------------------------------|
//! | `sentiment.tsv` | integer score                             |
//! | `emotion.tsv`   | six comma-separated reals in `[0, 1]`     |
//! | `hate.tsv`      | real in `[0, 100]`                        |
//! | `curse.tsv`     | none (bare term)                          |
//! | `emoticons.tsv` | none (bare glyph)                         |
//! | `pos.tsv`       | `adjective`, `adverb`, `noun`, `verb`, `other` |
//!
//! Embeddings live in their own file: a term followed by `D` space-separated reals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

pub const EMOTIONS: [&str; 6] = ["anger", "disgust", "fear", "joy", "sadness", "surprise"];

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{file}: {source}")]
    Io { file: String, source: io::Error },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosTag {
    Adjective,
    Adverb,
    Noun,
    Verb,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adjective => "adjective",
            PosTag::Adverb => "adverb",
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Other => "other",
        }
    }
}

impl std::str::FromStr for PosTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "adjective" | "adj" | "a" => PosTag::Adjective,
            "adverb" | "adv" | "r" => PosTag::Adverb,
            "noun" | "n" => PosTag::Noun,
            "verb" | "v" => PosTag::Verb,
            "other" | "x" => PosTag::Other,
            other => return Err(format!("unknown POS tag '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, term: impl Into<String>, v: Vec<f64>) -> Result<(), String> {
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = v.len();
        }
        if v.len() != self.dim {
            return Err(format!("expected {} components, got {}", self.dim, v.len()));
        }
        self.vectors.insert(term.into(), v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Dimension is taken from the first line; every later line must agree.
    pub fn parse(text: &str, file: &str) -> Result<Self, LexiconError> {
        let mut e = Embeddings::default();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(term) = parts.next() else { continue };
            let v: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let err = |message: String| LexiconError::Parse {
                file: file.to_string(),
                line: i + 1,
                message,
            };
            let v = v.map_err(|x| err(x.to_string()))?;
            if v.is_empty() {
                return Err(err("missing vector".into()));
            }
            e.insert(term, v).map_err(err)?;
        }
        Ok(e)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            file: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, mut w: impl Write) -> io::Result<()> {
        let mut terms: Vec<&String> = self.vectors.keys().collect();
        terms.sort();
        for t in terms {
            let comps: Vec<String> = self.vectors[t].iter().map(f64::to_string).collect();
            writeln!(w, "{t} {}", comps.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexiconSet {
    pub sentiment: HashMap<String, i32>,
    pub emotion: HashMap<String, [f64; 6]>,
    pub hate: HashMap<String, f64>,
    pub curse: BTreeSet<String>,
    pub emoticons: BTreeSet<String>,
    pub pos: HashMap<String, PosTag>,
    pub embeddings: Embeddings,
}

fn tsv_rows<'a>(text: &'a str) -> impl Iterator<Item = (usize, &'a str, &'a str)> + 'a {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let (term, payload) = line.split_once('\t').unwrap_or((line, ""));
        Some((i + 1, term.trim(), payload.trim()))
    })
}

impl LexiconSet {
    pub fn parse_sentiment(&mut self, text: &str) -> Result<(), LexiconError> {
        for (line, term, payload) in tsv_rows(text) {
            let score = payload.parse::<i32>().map_err(|e| parse_err("sentiment.tsv", line, e))?;
            self.sentiment.insert(term.to_lowercase(), score);
        }
        Ok(())
    }

    pub fn parse_emotion(&mut self, text: &str) -> Result<(), LexiconError> {
        for (line, term, payload) in tsv_rows(text) {
            let vals: Vec<f64> = payload
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err("emotion.tsv", line, e))?;
            let arr: [f64; 6] = vals
                .try_into()
                .map_err(|v: Vec<f64>| parse_err("emotion.tsv", line, format!("expected 6 scores, got {}", v.len())))?;
            if arr.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(parse_err("emotion.tsv", line, "scores must lie in [0, 1]"));
            }
            self.emotion.insert(term.to_lowercase(), arr);
        }
        Ok(())
    }

    pub fn parse_hate(&mut self, text: &str) -> Result<(), LexiconError> {
        for (line, term, payload) in tsv_rows(text) {
            let s = payload.parse::<f64>().map_err(|e| parse_err("hate.tsv", line, e))?;
            if !(0.0..=100.0).contains(&s) {
                return Err(parse_err("hate.tsv", line, "score must lie in [0, 100]"));
            }
            self.hate.insert(term.to_lowercase(), s);
        }
        Ok(())
    }

    pub fn parse_curse(&mut self, text: &str) {
        self.curse
            .extend(tsv_rows(text).map(|(_, t, _)| t.to_lowercase()));
    }

    pub fn parse_emoticons(&mut self, text: &str) {
        self.emoticons.extend(tsv_rows(text).map(|(_, t, _)| t.to_string()));
    }

    pub fn parse_pos(&mut self, text: &str) -> Result<(), LexiconError> {
        for (line, term, payload) in tsv_rows(text) {
            let tag = payload.parse::<PosTag>().map_err(|e| parse_err("pos.tsv", line, e))?;
            self.pos.insert(term.to_lowercase(), tag);
        }
        Ok(())
    }

    /// Loads every lexicon file present in `dir`; absent files leave that lexicon empty.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(LexiconError::Io {
                file: dir.display().to_string(),
                source: io::Error::new(io::ErrorKind::NotFound, "lexicon directory not found"),
            });
        }
        let read = |name: &str| -> Result<Option<String>, LexiconError> {
            let p = dir.join(name);
            if !p.exists() {
                return Ok(None);
            }
            fs::read_to_string(&p).map(Some).map_err(|source| LexiconError::Io {
                file: p.display().to_string(),
                source,
            })
        };
        let mut lex = LexiconSet::default();
        if let Some(t) = read("sentiment.tsv")? {
            lex.parse_sentiment(&t)?;
        }
        if let Some(t) = read("emotion.tsv")? {
            lex.parse_emotion(&t)?;
        }
        if let Some(t) = read("hate.tsv")? {
            lex.parse_hate(&t)?;
        }
        if let Some(t) = read("curse.tsv")? {
            lex.parse_curse(&t);
        }
        if let Some(t) = read("emoticons.tsv")? {
            lex.parse_emoticons(&t);
        }
        if let Some(t) = read("pos.tsv")? {
            lex.parse_pos(&t)?;
        }
        Ok(lex)
    }

    pub fn with_embeddings(mut self, e: Embeddings) -> Self {
        self.embeddings = e;
        self
    }

    /// Writes the lexicon files into `dir` (sorted, so output is reproducible).
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let sorted = |m: Vec<(String, String)>| {
            let m: BTreeMap<String, String> = m.into_iter().collect();
            m.into_iter()
                .map(|(k, v)| if v.is_empty() { format!("{k}\n") } else { format!("{k}\t{v}\n") })
                .collect::<String>()
        };
        fs::write(
            dir.join("sentiment.tsv"),
            sorted(self.sentiment.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()),
        )?;
        fs::write(
            dir.join("emotion.tsv"),
            sorted(
                self.emotion
                    .iter()
                    .map(|(k, v)| {
                        (k.clone(), v.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                    })
                    .collect(),
            ),
        )?;
        fs::write(
            dir.join("hate.tsv"),
            sorted(self.hate.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()),
        )?;
        fs::write(
            dir.join("curse.tsv"),
            sorted(self.curse.iter().map(|k| (k.clone(), String::new())).collect()),
        )?;
        fs::write(
            dir.join("emoticons.tsv"),
            sorted(self.emoticons.iter().map(|k| (k.clone(), String::new())).collect()),
        )?;
        fs::write(
            dir.join("pos.tsv"),
            sorted(self.pos.iter().map(|(k, v)| (k.clone(), v.as_str().to_string())).collect()),
        )?;
        Ok(())
    }
}

fn parse_err(file: &str, line: usize, e: impl ToString) -> LexiconError {
    LexiconError::Parse {
        file: file.to_string(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_dimension_is_enforced() {
        let e = Embeddings::parse("a 1 0\nb 0 1\n", "emb").unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.get("b"), Some(&[0.0, 1.0][..]));
        let err = Embeddings::parse("a 1 0\nb 0 1 2\n", "emb").unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 2, .. }));
    }

    #[test]
    fn lexicon_payload_validation() {
        let mut lex = LexiconSet::default();
        lex.parse_sentiment("good\t2\nAwful\t-3\n").unwrap();
        assert_eq!(lex.sentiment["awful"], -3);
        assert!(lex.parse_hate("slur\t150\n").is_err());
        assert!(lex.parse_emotion("x\t0.1,0.2\n").is_err());
        lex.parse_emotion("mad\t1,0,0,0,0,0.5\n").unwrap();
        lex.parse_pos("red\tadjective\ncar\tnoun\n").unwrap();
        assert_eq!(lex.pos["car"], PosTag::Noun);
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut lex = LexiconSet::default();
        lex.parse_sentiment("good\t2\n").unwrap();
        lex.parse_hate("slur\t80\n").unwrap();
        lex.parse_curse("damn\n");
        lex.parse_emoticons(":)\n");
        lex.parse_emotion("mad\t1,0,0,0,0,0.5\n").unwrap();
        lex.parse_pos("red\tadjective\n").unwrap();
        lex.write_dir(dir.path()).unwrap();
        assert_eq!(LexiconSet::load_dir(dir.path()).unwrap(), lex);
    }

    #[test]
    fn missing_directory_is_an_error() {
        assert!(LexiconSet::load_dir("/definitely/not/here").is_err());
    }
}
