//! AI-crawler blocklists: the agent names whose exclusion we audit.
//!
//! The file format is forgiving on purpose — one agent per line, tolerating
//! surrounding quotes, trailing commas, and `#` comments — so that published
//! bot lists (which tend to be quoted, comma-separated listings) load without
//! editing.

use std::io;
use std::path::Path;

/// An ordered, de-duplicated list of crawler agent names. May contain the
/// literal `*`, which audits the default group rather than a named agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocklist {
    agents: Vec<String>,
}

/// The default list of AI training crawlers, used when no file is supplied.
pub const DEFAULT_AGENTS: &[&str] = &[
    "AI2Bot",
    "Applebot-Extended",
    "Bytespider",
    "CCBot",
    "CCBot/2.0",
    "CCBot/1.0",
    "ClaudeBot",
    "cohere-training-data-crawler",
    "Diffbot",
    "Meta-ExternalAgent",
    "Google-Extended",
    "GPTBot",
    "PanguBot",
    "*",
];

impl Blocklist {
    /// The built-in default list ([`DEFAULT_AGENTS`]).
    pub fn default_agents() -> Self {
        Blocklist::parse(&DEFAULT_AGENTS.join("\n"))
    }

    /// Parse blocklist text. Empty lines and `#` comments are skipped; each
    /// remaining line is stripped of trailing commas and surrounding single or
    /// double quotes. Duplicates (case-insensitive) keep the first spelling.
    pub fn parse(text: &str) -> Self {
        let mut agents: Vec<String> = Vec::new();
        let mut seen: Vec<String> = Vec::new();
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let mut token = line.trim();
            token = token.strip_suffix(',').unwrap_or(token).trim();
            token = token
                .strip_prefix('"')
                .and_then(|t| t.strip_suffix('"'))
                .or_else(|| token.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')))
                .unwrap_or(token)
                .trim();
            if token.is_empty() {
                continue;
            }
            let key = token.to_lowercase();
            if !seen.contains(&key) {
                seen.push(key);
                agents.push(token.to_string());
            }
        }
        Blocklist { agents }
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Ok(Blocklist::parse(&std::fs::read_to_string(path)?))
    }

    pub fn agents(&self) -> impl Iterator<Item = &str> {
        self.agents.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn contains_star(&self) -> bool {
        self.agents.iter().any(|a| a == "*")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quoted_comma_separated_listing() {
        let text = r#"
# crawlers to audit
"AI2Bot",      # AI2
"CCBot",
'Bytespider'
GPTBot,
"*"
"#;
        let b = Blocklist::parse(text);
        let agents: Vec<&str> = b.agents().collect();
        assert_eq!(agents, ["AI2Bot", "CCBot", "Bytespider", "GPTBot", "*"]);
        assert!(b.contains_star());
    }

    #[test]
    fn deduplicates_case_insensitively_keeping_first_spelling() {
        let b = Blocklist::parse("GPTBot\ngptbot\nGPTBOT\nCCBot\n");
        assert_eq!(b.agents().collect::<Vec<_>>(), ["GPTBot", "CCBot"]);
    }

    #[test]
    fn default_list_is_nonempty_and_has_star() {
        let b = Blocklist::default_agents();
        assert_eq!(b.len(), DEFAULT_AGENTS.len());
        assert!(b.contains_star());
        assert!(b.agents().any(|a| a == "GPTBot"));
    }

    #[test]
    fn versioned_agents_survive_quoting() {
        let b = Blocklist::parse("\"CCBot/2.0\",\n\"CCBot/1.0\"\n");
        assert_eq!(b.agents().collect::<Vec<_>>(), ["CCBot/2.0", "CCBot/1.0"]);
    }
}
