use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Splits cleaned text into tokens.
///
/// Implement this to plug in an external segmenter; the built-in
/// [`TokenizerMode`] covers space-delimited and unsegmented text.
pub trait Tokenizer {
    fn tokenize(&self, cleaned: &str) -> Vec<String>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    /// Split on any run of whitespace.
    Whitespace,
    /// One token per Unicode scalar value, whitespace dropped. The default,
    /// since it needs no segmenter for CJK text.
    #[default]
    Character,
    /// Input already segmented upstream with tokens joined by single ASCII
    /// spaces; other whitespace is kept inside tokens.
    Presegmented,
}

impl Tokenizer for TokenizerMode {
    fn tokenize(&self, cleaned: &str) -> Vec<String> {
        tokenize(cleaned, *self)
    }
}

pub fn tokenize(cleaned: &str, mode: TokenizerMode) -> Vec<String> {
    match mode {
        TokenizerMode::Whitespace => cleaned.split_whitespace().map(str::to_owned).collect(),
        TokenizerMode::Character => cleaned
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        TokenizerMode::Presegmented => cleaned
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect(),
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Whitespace => "whitespace",
            TokenizerMode::Character => "character",
            TokenizerMode::Presegmented => "presegmented",
        })
    }
}

impl FromStr for TokenizerMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerMode::Whitespace),
            "character" => Ok(TokenizerMode::Character),
            "presegmented" => Ok(TokenizerMode::Presegmented),
            other => Err(CorpusError::UnknownTokenizer(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_mode() {
        assert_eq!(
            tokenize("good movie", TokenizerMode::Whitespace),
            ["good", "movie"]
        );
        assert_eq!(tokenize("a  b", TokenizerMode::Whitespace), ["a", "b"]);
        assert!(tokenize("", TokenizerMode::Whitespace).is_empty());
    }

    #[test]
    fn character_mode() {
        assert_eq!(tokenize("很好", TokenizerMode::Character), ["很", "好"]);
        assert_eq!(
            tokenize("很 好😀", TokenizerMode::Character),
            ["很", "好", "😀"]
        );
    }

    #[test]
    fn presegmented_mode_splits_on_spaces_only() {
        assert_eq!(
            tokenize("今天 天气 很好", TokenizerMode::Presegmented),
            ["今天", "天气", "很好"]
        );
        assert_eq!(
            tokenize("a\tb c", TokenizerMode::Presegmented),
            ["a\tb", "c"]
        );
    }

    #[test]
    fn no_characters_lost() {
        let text = "ab 很好 c😀d";
        for mode in [TokenizerMode::Whitespace, TokenizerMode::Character] {
            let joined: String = tokenize(text, mode).concat();
            let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(joined, expected, "{mode}");
        }
    }

    #[test]
    fn parses_mode_names() {
        for mode in [
            TokenizerMode::Whitespace,
            TokenizerMode::Character,
            TokenizerMode::Presegmented,
        ] {
            assert_eq!(mode.to_string().parse::<TokenizerMode>().unwrap(), mode);
        }
        assert!("jieba".parse::<TokenizerMode>().is_err());
    }
}
