use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const SHIPPED_STOPWORDS: &str = include_str!("../../resources/stopwords.txt");

#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// Standard English list shipped with the crate.
    pub fn shipped() -> Self {
        Stopwords::from_list(SHIPPED_STOPWORDS)
    }

    pub fn none() -> Self {
        Stopwords::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::from_list(&text))
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn from_list(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 over the sorted list; recorded in index headers.
    pub fn digest(&self) -> String {
        let mut sorted: Vec<&str> = self.words.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let mut hasher = Sha256::new();
        for w in sorted {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenStream { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn extend_text(&mut self, text: &str, stopwords: &Stopwords) {
        self.tokens.extend(tokenize(text, stopwords).tokens);
    }

    /// Appends enrichment tokens verbatim; they bypass stopword removal.
    pub fn extend_verbatim(&mut self, tokens: impl IntoIterator<Item = String>) {
        self.tokens.extend(tokens.into_iter().filter(|t| !t.is_empty()));
    }

    /// Distinct terms with their multiplicity, in first-occurrence order.
    pub fn term_counts(&self) -> Vec<(&str, u32)> {
        let mut counts: Vec<(&str, u32)> = Vec::new();
        let mut position: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for t in &self.tokens {
            match position.get(t.as_str()) {
                Some(&i) => counts[i].1 += 1,
                None => {
                    position.insert(t.as_str(), counts.len());
                    counts.push((t.as_str(), 1));
                }
            }
        }
        counts
    }
}

/// Lowercases, splits on non-alphanumeric characters and drops stopwords.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> TokenStream {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !stopwords.contains(t))
        .collect();
    TokenStream { tokens }
}
