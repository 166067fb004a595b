//! Whitespace tokenizers with pinned, hashable configurations.
//!
//! Two presets exist and every report embeds the hash of the preset that
//! produced it, so mismatched-tokenizer comparisons are detectable:
//!
//! * [`TokenizerConfig::counting`] — NFC normalization, split on Unicode
//!   whitespace. Used for token-loss accounting.
//! * [`TokenizerConfig::matching`] — additionally lowercases and strips edge
//!   punctuation. Used for overlap detection and memorization metrics, where
//!   surface noise should not break a match.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// Punctuation stripped from token edges by the matching preset. ASCII
/// punctuation plus the common typographic quotes, dashes, and ellipsis.
const EDGE_PUNCT: &[char] = &[
    '!', '"', '#', '$', '%', '&', '\'', '(', ')', '*', '+', ',', '-', '.', '/', ':', ';', '<',
    '=', '>', '?', '@', '[', '\\', ']', '^', '_', '`', '{', '|', '}', '~', '\u{00A1}', '\u{00BF}',
    '\u{2010}', '\u{2013}', '\u{2014}', '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}',
    '\u{2026}', '\u{00AB}', '\u{00BB}',
];

/// A deterministic tokenizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    /// Lowercase after normalization.
    pub case_fold: bool,
    /// Strip [`EDGE_PUNCT`] characters from both ends of each token and drop
    /// tokens that become empty.
    pub strip_edge_punctuation: bool,
}

impl TokenizerConfig {
    /// Preset for token counting: NFC + Unicode-whitespace split, nothing else.
    pub fn counting() -> Self {
        TokenizerConfig {
            case_fold: false,
            strip_edge_punctuation: false,
        }
    }

    /// Preset for matching: NFC + lowercase + whitespace split + edge
    /// punctuation stripping.
    pub fn matching() -> Self {
        TokenizerConfig {
            case_fold: true,
            strip_edge_punctuation: true,
        }
    }

    /// Split `text` into tokens under this configuration.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let normalized: String = text.nfc().collect();
        let source = if self.case_fold {
            normalized.to_lowercase()
        } else {
            normalized
        };
        source
            .split_whitespace()
            .filter_map(|raw| {
                let tok = if self.strip_edge_punctuation {
                    raw.trim_matches(|c| EDGE_PUNCT.contains(&c))
                } else {
                    raw
                };
                if tok.is_empty() {
                    None
                } else {
                    Some(tok.to_string())
                }
            })
            .collect()
    }

    /// Token count under this configuration.
    pub fn count(&self, text: &str) -> u64 {
        let normalized: String = text.nfc().collect();
        let source = if self.case_fold {
            normalized.to_lowercase()
        } else {
            normalized
        };
        let mut n = 0u64;
        for raw in source.split_whitespace() {
            let tok = if self.strip_edge_punctuation {
                raw.trim_matches(|c| EDGE_PUNCT.contains(&c))
            } else {
                raw
            };
            if !tok.is_empty() {
                n += 1;
            }
        }
        n
    }

    /// Stable hex digest of the configuration; embedded in index files and
    /// reports so producers and consumers can detect preset mismatches.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "tokenizer-v1;norm=nfc;split=unicode-ws;fold={};strip={}",
            self.case_fold as u8, self.strip_edge_punctuation as u8
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_preserves_case_and_punctuation() {
        let t = TokenizerConfig::counting();
        assert_eq!(
            t.tokenize("The Quick, brown FOX."),
            ["The", "Quick,", "brown", "FOX."]
        );
    }

    #[test]
    fn matching_folds_and_strips() {
        let t = TokenizerConfig::matching();
        assert_eq!(
            t.tokenize("The Quick, brown FOX."),
            ["the", "quick", "brown", "fox"]
        );
        // The lone em dash is all punctuation and drops out entirely.
        assert_eq!(
            t.tokenize("\u{201C}Hello\u{201D} \u{2014} she said\u{2026}"),
            ["hello", "she", "said"]
        );
    }

    #[test]
    fn nfc_normalization_applies_before_splitting() {
        // "é" as e + combining acute composes to a single char under NFC, so
        // both spellings tokenize identically.
        let t = TokenizerConfig::counting();
        assert_eq!(t.tokenize("caf\u{0065}\u{0301}"), t.tokenize("caf\u{00e9}"));
    }

    #[test]
    fn all_unicode_whitespace_splits() {
        let t = TokenizerConfig::counting();
        assert_eq!(t.tokenize("a\u{00A0}b\u{2009}c\td\ne"), ["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn punctuation_only_tokens_drop_under_matching() {
        let t = TokenizerConfig::matching();
        assert_eq!(t.tokenize("wait ... what ?!"), ["wait", "what"]);
        // Under counting they survive.
        assert_eq!(TokenizerConfig::counting().count("wait ... what ?!"), 4);
        assert_eq!(t.count("wait ... what ?!"), 2);
    }

    #[test]
    fn count_agrees_with_tokenize_len() {
        for text in ["", "one", "  padded  out  ", "Mixed, CASE e\u{0301}xample!"] {
            for cfg in [TokenizerConfig::counting(), TokenizerConfig::matching()] {
                assert_eq!(cfg.count(text), cfg.tokenize(text).len() as u64);
            }
        }
    }

    #[test]
    fn config_hashes_distinguish_presets_and_are_stable() {
        let a = TokenizerConfig::counting().config_hash();
        let b = TokenizerConfig::matching().config_hash();
        assert_ne!(a, b);
        assert_eq!(a.len(), 16);
        // Frozen: changing these means changing every recorded report hash.
        assert_eq!(a, TokenizerConfig::counting().config_hash());
    }
}
