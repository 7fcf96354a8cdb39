//! Prompt length accounting.

use serde::{Deserialize, Serialize};

/// Counts tokens in a prompt. Implementations must be deterministic.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
    fn name(&self) -> &str;
}

/// Whitespace-delimited words: an approximation of model token counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn name(&self) -> &str {
        "whitespace"
    }
}

/// Unicode scalar values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn count(&self, text: &str) -> usize {
        text.chars().count()
    }

    fn name(&self) -> &str {
        "chars"
    }
}

/// Config spelling of the built-in tokenizers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    #[default]
    Whitespace,
    Chars,
}

impl TokenizerKind {
    pub fn build(self) -> Box<dyn Tokenizer> {
        match self {
            TokenizerKind::Whitespace => Box::new(WhitespaceTokenizer),
            TokenizerKind::Chars => Box::new(CharTokenizer),
        }
    }
}

/// Whitespace token count.
pub fn count_tokens(text: &str) -> usize {
    WhitespaceTokenizer.count(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_counts() {
        assert_eq!(count_tokens("a b  c"), 3);
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens(" \n\t "), 0);
        let t = TokenizerKind::Whitespace.build();
        assert_eq!(t.count("x y"), t.count("x y"));
        assert_eq!(TokenizerKind::Chars.build().count("héllo"), 5);
    }
}
