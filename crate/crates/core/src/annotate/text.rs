//! Word and sentence segmentation shared by mention and trigger matching.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A lowercased word with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub start: usize,
    pub end: usize,
    pub lower: String,
}

/// Maximal runs of alphanumeric characters; everything else, hyphens
/// included, separates words.
pub fn words(text: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(word(text, s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(word(text, s, text.len()));
    }
    out
}

fn word(text: &str, start: usize, end: usize) -> Word {
    Word {
        start,
        end,
        lower: text[start..end].to_lowercase(),
    }
}

/// Lowercase words joined by single spaces.
pub fn normalize_phrase(text: &str) -> String {
    words(text).into_iter().map(|w| w.lower).collect::<Vec<_>>().join(" ")
}

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../resources/abbreviations.txt");

/// Terminal-punctuation sentence splitter that does not break after known
/// abbreviations or inside numbers.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter::from_list(DEFAULT_ABBREVIATIONS).expect("shipped abbreviation list")
    }
}

impl SentenceSplitter {
    /// One abbreviation per line, without the trailing period. `#` starts a comment line.
    pub fn from_list(list: &str) -> Result<Self> {
        let mut abbreviations = HashSet::new();
        for (n, line) in list.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.contains(char::is_whitespace) {
                return Err(Error::format(
                    "abbreviations",
                    n + 1,
                    "abbreviation contains whitespace",
                ));
            }
            abbreviations.insert(line.trim_end_matches('.').to_lowercase());
        }
        Ok(SentenceSplitter { abbreviations })
    }

    fn is_abbreviation(&self, text: &str, period_at: usize) -> bool {
        let before = &text[..period_at];
        let token_start = before
            .rfind(|c: char| c.is_whitespace() || c == '(' || c == '[' || c == '"')
            .map(|i| i + 1)
            .unwrap_or(0);
        let token = before[token_start..].to_lowercase();
        !token.is_empty() && self.abbreviations.contains(token.as_str())
    }

    /// Splits `text` into trimmed, non-empty sentences in order.
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut sentences = Vec::new();
        let mut start = 0;
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            let boundary_end = if matches!(c, '.' | '!' | '?') {
                // Absorb runs like "?!" and closing brackets or quotes.
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | ')' | ']' | '"' | '\'') {
                    j += 1;
                }
                let at_break = j == chars.len() || chars[j].1.is_whitespace();
                let abbreviation = c == '.' && self.is_abbreviation(text, pos);
                if at_break && !abbreviation {
                    Some(j)
                } else {
                    None
                }
            } else if c == '\n' {
                // Blank lines separate paragraphs.
                let mut j = i + 1;
                while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                    j += 1;
                }
                (j < chars.len() && chars[j].1 == '\n').then_some(j)
            } else {
                None
            };

            match boundary_end {
                Some(j) => {
                    let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
                    push_trimmed(&mut sentences, &text[start..end]);
                    start = end;
                    i = j;
                }
                None => i += 1,
            }
        }
        push_trimmed(&mut sentences, &text[start..]);
        sentences
    }
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece);
    }
}

/// Splits with the shipped abbreviation list.
pub fn split_sentences(text: &str) -> Vec<&str> {
    SentenceSplitter::default().split(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_split_on_hyphens_and_punctuation() {
        let w: Vec<_> = words("Tinea-pedis, KOH!").into_iter().map(|w| w.lower).collect();
        assert_eq!(w, ["tinea", "pedis", "koh"]);
    }

    #[test]
    fn word_spans_index_source() {
        let text = "no DM (dx)";
        for w in words(text) {
            assert_eq!(text[w.start..w.end].to_lowercase(), w.lower);
        }
    }

    #[test]
    fn normalize() {
        assert_eq!(normalize_phrase("  Tinea   Pedis\tInfection "), "tinea pedis infection");
    }

    #[test]
    fn terminal_punctuation() {
        assert_eq!(split_sentences("He is 41. He smokes."), ["He is 41.", "He smokes."]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n ").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(
            split_sentences("Hx of DM (dx. 2010) stable."),
            ["Hx of DM (dx. 2010) stable."]
        );
        assert_eq!(
            split_sentences("Uses e.g. insulin daily. Fine."),
            ["Uses e.g. insulin daily.", "Fine."]
        );
    }

    #[test]
    fn decimals_and_closers() {
        assert_eq!(
            split_sentences("Dose 2.5 mg (daily.) Next one? Yes!"),
            ["Dose 2.5 mg (daily.)", "Next one?", "Yes!"]
        );
    }

    #[test]
    fn blank_lines_split() {
        assert_eq!(
            split_sentences("first part\n\nsecond part"),
            ["first part", "second part"]
        );
        assert_eq!(split_sentences("one line\ncontinues"), ["one line\ncontinues"]);
    }

    #[test]
    fn rejects_malformed_abbreviation_list() {
        assert!(SentenceSplitter::from_list("dx\nbad entry\n").is_err());
    }
}
