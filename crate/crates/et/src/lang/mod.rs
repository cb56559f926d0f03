//! Synthetic subgoal instructions, templated natural instructions,
//! tokenization and vocabularies.
//!
//! Natural and synthetic language live in two separate [`Vocab`] instances
//! (two look-up tables); their id spaces never mix.

mod synth;
mod template;
mod tokenize;

pub use synth::{parse_synth, synth_annotation};
pub use template::{template_natural, LangConfig};
pub use tokenize::{detokenize, tokenize};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Subgoal;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("cannot annotate an empty subgoal sequence")]
    EmptySubgoals,
    #[error("invalid subgoal {0:?}")]
    InvalidSubgoal(Subgoal),
    #[error("bad synthetic token `{0}`")]
    BadToken(String),
    #[error("synthetic instruction ended mid-pair")]
    DanglingType,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {err}")]
    Decode { line: usize, err: String },
}

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Reserved token surface forms. EOS keeps its synthetic-language spelling;
/// natural text is lowercased so it can never collide.
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "EOS", "<unk>"];

/// Token table with stable reserved ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    map: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let map = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, map }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.map.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.map.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    /// JSON array of tokens, index = id.
    pub fn save(&self, path: &Path) -> Result<(), LangError> {
        let mut w = BufWriter::new(File::create(path)?);
        let json = serde_json::to_string_pretty(&self.tokens).map_err(|e| LangError::Decode {
            line: 0,
            err: e.to_string(),
        })?;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LangError> {
        let data = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = serde_json::from_str(&data).map_err(|e| LangError::Decode {
            line: 0,
            err: e.to_string(),
        })?;
        Ok(Vocab::from_tokens(tokens))
    }
}

/// Count-then-lexicographic vocabulary construction. Tokens below
/// `min_count` fall through to UNK at encode time.
pub fn build_vocab<'a, I>(corpus: I, min_count: usize) -> Vocab
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for tok in seq {
            if RESERVED.contains(&tok.as_str()) {
                continue;
            }
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend(entries.into_iter().map(|(t, _)| t.to_string()));
    Vocab::from_tokens(tokens)
}

/// One natural/synthetic training pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstructionPair {
    pub natural: Vec<String>,
    pub synthetic: Vec<String>,
    pub subgoals: Vec<Subgoal>,
}

pub fn save_pairs(path: &Path, pairs: &[InstructionPair]) -> Result<(), LangError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in pairs {
        let line = serde_json::to_string(p).map_err(|e| LangError::Decode {
            line: 0,
            err: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_pairs(path: &Path) -> Result<Vec<InstructionPair>, LangError> {
    let r = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line).map_err(|e| LangError::Decode {
            line: i + 1,
            err: e.to_string(),
        })?);
    }
    Ok(pairs)
}
