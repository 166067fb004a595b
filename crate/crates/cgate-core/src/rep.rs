//! Robots Exclusion Protocol parsing and matching (RFC 9309).
//!
//! The parser turns raw `robots.txt` bytes into a [`RobotsPolicy`]: a list of
//! agent groups with allow/disallow rules, plus diagnostics about anything it
//! had to skip. The matcher answers [`is_allowed`] queries with RFC 9309
//! semantics:
//!
//! * group selection by longest case-insensitive prefix match on the product
//!   token, with the `*` group as fallback;
//! * longest-pattern-match precedence between rules, `Allow` winning ties;
//! * `*` wildcards and a trailing `$` end anchor inside path patterns;
//! * percent-decoding applied exactly once to both patterns and query paths,
//!   with `%2F` never decoded (an encoded slash is not a path separator);
//! * default `Allowed` when nothing matches.
//!
//! Fetch-status handling is baked into the policy: a missing file or 4xx
//! fetch is an allow-everything policy, while 5xx/unreadable fetches are
//! conservatively disallow-everything (configurable via [`DecideOptions`]).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Path patterns longer than this are truncated (and counted in
/// [`ParseDiagnostics::truncated_patterns`]). Generous enough for every real
/// robots.txt; guards against pathological inputs.
pub const MAX_PATTERN_BYTES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Allow,
    Disallow,
}

/// A single allow/disallow rule. `pattern` is stored percent-decoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    pub pattern: String,
}

/// A user-agent group: one or more agent tokens and their rules, in input
/// order. Agent tokens are stored lowercased.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub agents: Vec<String>,
    pub rules: Vec<Rule>,
}

/// How the policy text was obtained, which determines fallback behavior when
/// there are no applicable rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceStatus {
    /// Body parsed normally.
    Parsed,
    /// No robots.txt exists for the host: everything allowed.
    MissingFile,
    /// Fetch returned 4xx: treated like a missing file, everything allowed.
    FetchError4xx,
    /// Fetch returned 5xx: conservatively everything disallowed.
    FetchError5xx,
    /// Body exists but is not a robots.txt (e.g. an HTML consent page or a
    /// redirect target); conservatively everything disallowed.
    Unreadable,
}

/// Counts of skipped or repaired input, for observability. Parsing never
/// fails outright.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    /// Non-empty lines without a `key: value` shape.
    pub malformed_lines: u64,
    /// Allow/disallow lines seen before any `User-agent` line.
    pub orphan_rules: u64,
    /// Patterns cut at [`MAX_PATTERN_BYTES`].
    pub truncated_patterns: u64,
    /// Well-formed lines whose directive is recognized by other tools but not
    /// by the matcher (`Sitemap`, `Crawl-delay`, ...).
    pub unknown_directives: u64,
}

/// A parsed robots.txt policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotsPolicy {
    pub groups: Vec<Group>,
    pub source_status: SourceStatus,
    pub diagnostics: ParseDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allowed,
    Disallowed,
}

/// Knobs for [`is_allowed_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecideOptions {
    /// When the policy is `FetchError5xx` or `Unreadable`, treat every path
    /// as disallowed (the conservative reading). Set to `false` to treat
    /// unreachable policies as allowing.
    pub unreachable_disallows: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            unreachable_disallows: true,
        }
    }
}

impl RobotsPolicy {
    /// Policy for a host with no robots.txt at all.
    pub fn missing() -> Self {
        RobotsPolicy {
            groups: Vec::new(),
            source_status: SourceStatus::MissingFile,
            diagnostics: ParseDiagnostics::default(),
        }
    }

    /// Policy for a fetched body that is not robots.txt.
    pub fn unreadable() -> Self {
        RobotsPolicy {
            groups: Vec::new(),
            source_status: SourceStatus::Unreadable,
            diagnostics: ParseDiagnostics::default(),
        }
    }

    /// The `*` fallback group, if present.
    pub fn default_group(&self) -> Option<&Group> {
        self.groups.iter().find(|g| g.agents.iter().any(|a| a == "*"))
    }
}

/// Parse robots.txt bytes into a policy.
///
/// `status_hint` is the HTTP status the body was fetched with, when known:
/// 4xx and 5xx produce the corresponding empty error policy (the body is
/// ignored), 3xx and other out-of-range codes produce `Unreadable`, and `None`
/// or 2xx parse the body normally. Invalid UTF-8 is replaced, never fatal.
pub fn parse_robots(content: &[u8], status_hint: Option<u16>) -> RobotsPolicy {
    match status_hint {
        None => {}
        Some(s) if (200..=299).contains(&s) => {}
        Some(s) if (400..=499).contains(&s) => {
            return RobotsPolicy {
                groups: Vec::new(),
                source_status: SourceStatus::FetchError4xx,
                diagnostics: ParseDiagnostics::default(),
            }
        }
        Some(s) if (500..=599).contains(&s) => {
            return RobotsPolicy {
                groups: Vec::new(),
                source_status: SourceStatus::FetchError5xx,
                diagnostics: ParseDiagnostics::default(),
            }
        }
        Some(_) => return RobotsPolicy::unreadable(),
    }

    let text = String::from_utf8_lossy(content);
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);

    let mut diagnostics = ParseDiagnostics::default();
    let mut groups: Vec<Group> = Vec::new();
    // Group under construction: agent tokens seen in the current run of
    // `User-agent` lines, and the rules that followed them.
    let mut agents: Vec<String> = Vec::new();
    let mut rules: Vec<Rule> = Vec::new();
    let mut collecting_agents = false;

    let flush = |agents: &mut Vec<String>, rules: &mut Vec<Rule>, groups: &mut Vec<Group>| {
        if agents.is_empty() {
            rules.clear();
            return;
        }
        let group = Group {
            agents: std::mem::take(agents),
            rules: std::mem::take(rules),
        };
        // RFC 9309 merges groups addressing the identical agent set: their
        // rules concatenate in input order.
        let key: BTreeSet<&String> = group.agents.iter().collect();
        if let Some(existing) = groups
            .iter_mut()
            .find(|g| g.agents.iter().collect::<BTreeSet<_>>() == key)
        {
            existing.rules.extend(group.rules);
        } else {
            groups.push(group);
        }
    };

    for raw_line in text.split('\n') {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            // Blank lines (and comment-only lines) do not terminate a group.
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            diagnostics.malformed_lines += 1;
            continue;
        };
        let directive = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match directive.as_str() {
            "user-agent" => {
                if value.is_empty() {
                    diagnostics.malformed_lines += 1;
                    continue;
                }
                if !collecting_agents {
                    flush(&mut agents, &mut rules, &mut groups);
                    collecting_agents = true;
                }
                // Only the product token matters: cut at the first whitespace
                // and lowercase for case-insensitive matching.
                let token = value
                    .split_whitespace()
                    .next()
                    .unwrap_or_default()
                    .to_lowercase();
                if !agents.contains(&token) {
                    agents.push(token);
                }
            }
            "allow" | "disallow" => {
                collecting_agents = false;
                if agents.is_empty() {
                    diagnostics.orphan_rules += 1;
                    continue;
                }
                let kind = if directive == "allow" {
                    RuleKind::Allow
                } else {
                    RuleKind::Disallow
                };
                let mut pattern = decode_percent(value);
                if pattern.len() > MAX_PATTERN_BYTES {
                    let mut cut = MAX_PATTERN_BYTES;
                    while !pattern.is_char_boundary(cut) {
                        cut -= 1;
                    }
                    pattern.truncate(cut);
                    diagnostics.truncated_patterns += 1;
                }
                // An empty pattern ("Disallow:") means allow-all. It is kept
                // as a rule but matches no path.
                rules.push(Rule { kind, pattern });
            }
            _ => {
                diagnostics.unknown_directives += 1;
            }
        }
    }
    flush(&mut agents, &mut rules, &mut groups);

    RobotsPolicy {
        groups,
        source_status: SourceStatus::Parsed,
        diagnostics,
    }
}

/// Percent-decode a pattern or path exactly once.
///
/// `%2F` (any case) is preserved verbatim: an encoded slash is data, not a
/// path separator, and decoding it would change which segments a pattern
/// spans. Invalid escapes pass through unchanged; decoded bytes that do not
/// form valid UTF-8 are replaced.
pub fn decode_percent(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hi = (bytes[i + 1] as char).to_digit(16);
            let lo = (bytes[i + 2] as char).to_digit(16);
            if let (Some(hi), Some(lo)) = (hi, lo) {
                let byte = (hi * 16 + lo) as u8;
                if byte == b'/' {
                    // Keep the original three bytes so an encoded slash stays
                    // distinguishable from a literal one.
                    out.extend_from_slice(&bytes[i..i + 3]);
                } else {
                    out.push(byte);
                }
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Does `pattern` (with `*` wildcards, optionally `$`-anchored) match `path`?
///
/// Unanchored patterns match any *prefix* of the path. Empty patterns match
/// nothing (that is the allow-all spelling of `Disallow:`). Uses the greedy
/// two-pointer wildcard scan; backtracking is bounded by the number of `*`s.
fn pattern_matches(pattern: &str, path: &str) -> bool {
    if pattern.is_empty() {
        return false;
    }
    let pat = pattern.as_bytes();
    let (pat, anchored) = match pat.split_last() {
        Some((b'$', head)) => (head, true),
        _ => (pat, false),
    };
    let path = path.as_bytes();

    let mut i = 0; // path cursor
    let mut j = 0; // pattern cursor
    let mut star: Option<(usize, usize)> = None; // (pattern idx after '*', path idx it consumed to)
    loop {
        if j == pat.len() {
            if !anchored || i == path.len() {
                return true;
            }
        } else if pat[j] == b'*' {
            star = Some((j + 1, i));
            j += 1;
            continue;
        } else if i < path.len() && pat[j] == path[i] {
            i += 1;
            j += 1;
            continue;
        }
        match star {
            Some((sj, si)) if si < path.len() => {
                star = Some((sj, si + 1));
                j = sj;
                i = si + 1;
            }
            _ => return false,
        }
    }
}

/// Specificity of a rule match: byte length of the stored pattern (wildcards
/// and anchors included), the RFC 9309 longest-match criterion.
fn match_len(rule: &Rule, path: &str) -> Option<usize> {
    if pattern_matches(&rule.pattern, path) {
        Some(rule.pattern.len())
    } else {
        None
    }
}

/// Answer an allow/deny query with default options (unreachable policies
/// disallow).
pub fn is_allowed(policy: &RobotsPolicy, agent: &str, path: &str) -> Decision {
    is_allowed_with(policy, agent, path, DecideOptions::default())
}

/// Answer an allow/deny query.
///
/// `agent` is a crawler product token (`"GPTBot"`, `"CCBot/2.0"`), matched
/// case-insensitively against group tokens by longest prefix; pass `"*"` to
/// query the default group directly. `path` is the URL path (beginning with
/// `/`); it is percent-decoded once, like patterns, before matching.
pub fn is_allowed_with(
    policy: &RobotsPolicy,
    agent: &str,
    path: &str,
    opts: DecideOptions,
) -> Decision {
    match policy.source_status {
        SourceStatus::Parsed => {}
        SourceStatus::MissingFile | SourceStatus::FetchError4xx => return Decision::Allowed,
        SourceStatus::FetchError5xx | SourceStatus::Unreadable => {
            return if opts.unreachable_disallows {
                Decision::Disallowed
            } else {
                Decision::Allowed
            }
        }
    }

    let path = if path.is_empty() {
        "/".to_string()
    } else {
        decode_percent(path)
    };

    let agent_lc = agent.to_lowercase();
    // Longest prefix of the query agent wins; an exact token match is
    // automatically the longest possible prefix. `*` never prefix-matches a
    // real token, it is only the fallback.
    let mut best: Option<&str> = None;
    if agent_lc != "*" {
        for group in &policy.groups {
            for token in &group.agents {
                if token != "*" && agent_lc.starts_with(token.as_str()) {
                    if best.map_or(true, |b| token.len() > b.len()) {
                        best = Some(token);
                    }
                }
            }
        }
    }

    // Combine the rules of every group carrying the selected token (RFC 9309
    // evaluates matching groups together; identical agent sets were already
    // merged at parse time).
    let mut verdict: Option<(usize, RuleKind)> = None;
    let mut consider = |rules: &[Rule]| {
        for rule in rules {
            if let Some(len) = match_len(rule, &path) {
                let better = match verdict {
                    None => true,
                    Some((best_len, best_kind)) => {
                        len > best_len
                            || (len == best_len
                                && best_kind == RuleKind::Disallow
                                && rule.kind == RuleKind::Allow)
                    }
                };
                if better {
                    verdict = Some((len, rule.kind));
                }
            }
        }
    };

    match best {
        Some(token) => {
            let token = token.to_string();
            for group in &policy.groups {
                if group.agents.iter().any(|a| *a == token) {
                    consider(&group.rules);
                }
            }
        }
        None => {
            if let Some(group) = policy.default_group() {
                consider(&group.rules);
            }
        }
    }

    match verdict {
        Some((_, RuleKind::Disallow)) => Decision::Disallowed,
        _ => Decision::Allowed,
    }
}

/// Which blocklisted agents does this policy block from `path`?
///
/// Every returned name is a member of `blocklist` (monotonicity: growing the
/// blocklist can only grow the result). The literal `*` entry is satisfied
/// when the policy's default group disallows the path.
pub fn blocked_agents<'a, I>(policy: &RobotsPolicy, blocklist: I, path: &str) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    blocked_agents_with(policy, blocklist, path, DecideOptions::default())
}

/// [`blocked_agents`] with explicit options.
pub fn blocked_agents_with<'a, I>(
    policy: &RobotsPolicy,
    blocklist: I,
    path: &str,
    opts: DecideOptions,
) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut blocked = BTreeSet::new();
    for agent in blocklist {
        if is_allowed_with(policy, agent, path, opts) == Decision::Disallowed {
            blocked.insert(agent.to_string());
        }
    }
    blocked
}

/// Serialize a policy back to robots.txt text.
///
/// Stored patterns are percent-decoded, so bytes that would be re-interpreted
/// by the parser (`%`, `#`, whitespace, control characters) are re-encoded;
/// re-parsing the output reproduces the same groups and rules.
pub fn to_robots_txt(policy: &RobotsPolicy) -> String {
    let mut out = String::new();
    for (idx, group) in policy.groups.iter().enumerate() {
        if idx > 0 {
            out.push('\n');
        }
        for agent in &group.agents {
            out.push_str("User-agent: ");
            out.push_str(agent);
            out.push('\n');
        }
        for rule in &group.rules {
            out.push_str(match rule.kind {
                RuleKind::Allow => "Allow: ",
                RuleKind::Disallow => "Disallow: ",
            });
            out.push_str(&encode_pattern(&rule.pattern));
            out.push('\n');
        }
    }
    out
}

fn encode_pattern(pattern: &str) -> String {
    let mut out = String::with_capacity(pattern.len());
    for ch in pattern.chars() {
        if ch == '%' || ch == '#' || ch.is_whitespace() || ch.is_control() {
            let mut buf = [0u8; 4];
            for byte in ch.encode_utf8(&mut buf).as_bytes() {
                out.push_str(&format!("%{byte:02X}"));
            }
        } else {
            out.push(ch);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parsed(text: &str) -> RobotsPolicy {
        parse_robots(text.as_bytes(), None)
    }

    #[test]
    fn empty_input_allows_everything() {
        let p = parsed("");
        assert_eq!(p.groups.len(), 0);
        assert_eq!(is_allowed(&p, "GPTBot", "/anything"), Decision::Allowed);
    }

    #[test]
    fn basic_group_and_rule() {
        let p = parsed("User-agent: GPTBot\nDisallow: /private\n");
        assert_eq!(p.groups.len(), 1);
        assert_eq!(p.groups[0].agents, ["gptbot"]);
        assert_eq!(is_allowed(&p, "GPTBot", "/private/x"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "GPTBot", "/public"), Decision::Allowed);
        assert_eq!(is_allowed(&p, "OtherBot", "/private/x"), Decision::Allowed);
    }

    #[test]
    fn crlf_comments_and_case_insensitive_directives() {
        let p = parsed("# preamble\r\nUSER-AGENT: GptBot # trailing\r\nDISALLOW: /a\r\n");
        assert_eq!(p.groups[0].agents, ["gptbot"]);
        assert_eq!(is_allowed(&p, "gptbot", "/a"), Decision::Disallowed);
        assert_eq!(p.diagnostics, ParseDiagnostics::default());
    }

    #[test]
    fn multiple_agents_share_a_group() {
        let p = parsed("User-agent: A\nUser-agent: B\nDisallow: /x\n");
        assert_eq!(p.groups.len(), 1);
        assert_eq!(p.groups[0].agents, ["a", "b"]);
        assert_eq!(is_allowed(&p, "B", "/x"), Decision::Disallowed);
    }

    #[test]
    fn rule_then_agent_starts_new_group() {
        let p = parsed("User-agent: A\nDisallow: /x\nUser-agent: B\nDisallow: /y\n");
        assert_eq!(p.groups.len(), 2);
        assert_eq!(is_allowed(&p, "A", "/y"), Decision::Allowed);
        assert_eq!(is_allowed(&p, "B", "/y"), Decision::Disallowed);
    }

    #[test]
    fn identical_agent_sets_merge_with_rules_in_input_order() {
        let p = parsed(
            "User-agent: CCBot\nDisallow: /a\n\nUser-agent: Other\nDisallow: /z\n\nUser-agent: CCBot\nDisallow: /b\n",
        );
        assert_eq!(p.groups.len(), 2);
        let ccbot = &p.groups[0];
        assert_eq!(ccbot.agents, ["ccbot"]);
        assert_eq!(
            ccbot.rules.iter().map(|r| r.pattern.as_str()).collect::<Vec<_>>(),
            ["/a", "/b"]
        );
    }

    #[test]
    fn orphan_rules_are_skipped_and_counted() {
        let p = parsed("Disallow: /early\nUser-agent: A\nDisallow: /x\n");
        assert_eq!(p.diagnostics.orphan_rules, 1);
        assert_eq!(p.groups.len(), 1);
        assert_eq!(is_allowed(&p, "A", "/early"), Decision::Allowed);
    }

    #[test]
    fn malformed_and_unknown_lines_are_tallied() {
        let p = parsed(
            "this is not a directive\nUser-agent: A\nCrawl-delay: 10\nSitemap: https://e.com/s.xml\nDisallow: /x\n",
        );
        assert_eq!(p.diagnostics.malformed_lines, 1);
        assert_eq!(p.diagnostics.unknown_directives, 2);
        assert_eq!(is_allowed(&p, "A", "/x"), Decision::Disallowed);
    }

    #[test]
    fn empty_disallow_is_kept_but_matches_nothing() {
        let p = parsed("User-agent: A\nDisallow:\n");
        assert_eq!(p.groups[0].rules.len(), 1);
        assert_eq!(p.groups[0].rules[0].pattern, "");
        assert_eq!(is_allowed(&p, "A", "/x"), Decision::Allowed);
        assert_eq!(is_allowed(&p, "A", "/"), Decision::Allowed);
    }

    #[test]
    fn longest_match_wins_and_allow_breaks_ties() {
        let p = parsed("User-agent: *\nAllow: /fish\nDisallow: /fish/salmon\n");
        assert_eq!(is_allowed(&p, "gptbot", "/fish/salmon/x"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "gptbot", "/fish/cod"), Decision::Allowed);

        let tie = parsed("User-agent: *\nDisallow: /page\nAllow: /page\n");
        assert_eq!(is_allowed(&tie, "anybot", "/page"), Decision::Allowed);
    }

    #[test]
    fn wildcard_and_anchor() {
        let p = parsed("User-agent: *\nDisallow: /*.pdf$\n");
        assert_eq!(is_allowed(&p, "gptbot", "/docs/a.pdf"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "gptbot", "/docs/a.pdf.html"), Decision::Allowed);
        assert_eq!(is_allowed(&p, "gptbot", "/docs/pdf"), Decision::Allowed);
    }

    #[test]
    fn unanchored_patterns_match_prefixes() {
        let p = parsed("User-agent: *\nDisallow: /fish\n");
        for path in ["/fish", "/fish.html", "/fish/salmon", "/fishheads"] {
            assert_eq!(is_allowed(&p, "x", path), Decision::Disallowed, "{path}");
        }
        assert_eq!(is_allowed(&p, "x", "/Fish"), Decision::Allowed); // paths are case-sensitive
    }

    #[test]
    fn agent_prefix_matching_prefers_longest() {
        let p = parsed(
            "User-agent: CCBot\nDisallow: /short\n\nUser-agent: CCBot/2.0\nDisallow: /long\n\nUser-agent: *\nDisallow: /default\n",
        );
        // Exact version match selects the more specific group only.
        assert_eq!(is_allowed(&p, "CCBot/2.0", "/long"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "CCBot/2.0", "/short"), Decision::Allowed);
        // Bare product token selects the bare group.
        assert_eq!(is_allowed(&p, "CCBot", "/short"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "CCBot", "/long"), Decision::Allowed);
        // Unrelated agents fall back to `*`.
        assert_eq!(is_allowed(&p, "SomeBot", "/default"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "SomeBot", "/short"), Decision::Allowed);
    }

    #[test]
    fn star_agent_queries_default_group_directly() {
        let p = parsed("User-agent: *\nDisallow: /private\n\nUser-agent: A\nDisallow: /other\n");
        assert_eq!(is_allowed(&p, "*", "/private/x"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "*", "/other"), Decision::Allowed);
    }

    #[test]
    fn percent_decoding_once_and_2f_preserved() {
        assert_eq!(decode_percent("/a%20b"), "/a b");
        assert_eq!(decode_percent("/a%2Fb"), "/a%2Fb");
        assert_eq!(decode_percent("/a%2fb"), "/a%2fb");
        assert_eq!(decode_percent("/100%25"), "/100%");
        assert_eq!(decode_percent("/bad%zz"), "/bad%zz");
        assert_eq!(decode_percent("/tail%2"), "/tail%2");

        let p = parsed("User-agent: *\nDisallow: /caf%C3%A9\n");
        assert_eq!(is_allowed(&p, "x", "/caf\u{00e9}"), Decision::Disallowed);
        assert_eq!(is_allowed(&p, "x", "/caf%C3%A9"), Decision::Disallowed);
    }

    #[test]
    fn pattern_truncation_is_flagged() {
        let long = "a".repeat(MAX_PATTERN_BYTES + 100);
        let p = parsed(&format!("User-agent: A\nDisallow: /{long}\n"));
        assert_eq!(p.diagnostics.truncated_patterns, 1);
        assert_eq!(p.groups[0].rules[0].pattern.len(), MAX_PATTERN_BYTES);
    }

    #[test]
    fn status_hints_override_content() {
        let body = b"User-agent: *\nDisallow: /\n";
        assert_eq!(parse_robots(body, Some(404)).source_status, SourceStatus::FetchError4xx);
        assert_eq!(parse_robots(body, Some(503)).source_status, SourceStatus::FetchError5xx);
        assert_eq!(parse_robots(body, Some(301)).source_status, SourceStatus::Unreadable);
        assert_eq!(parse_robots(body, Some(200)).source_status, SourceStatus::Parsed);

        let p404 = parse_robots(body, Some(404));
        assert_eq!(is_allowed(&p404, "x", "/anything"), Decision::Allowed);
        let p503 = parse_robots(body, Some(503));
        assert_eq!(is_allowed(&p503, "x", "/anything"), Decision::Disallowed);
        let lenient = DecideOptions {
            unreachable_disallows: false,
        };
        assert_eq!(is_allowed_with(&p503, "x", "/anything", lenient), Decision::Allowed);
    }

    #[test]
    fn blocked_agents_reports_blocklist_members_only() {
        let p = parsed("User-agent: *\nDisallow: /private\n");
        let blocklist = ["GPTBot", "CCBot", "*"];
        let blocked = blocked_agents(&p, blocklist, "/private/x");
        assert_eq!(
            blocked.iter().map(String::as_str).collect::<Vec<_>>(),
            ["*", "CCBot", "GPTBot"]
        );
        assert!(blocked_agents(&p, blocklist, "/open").is_empty());
    }

    #[test]
    fn blocked_agents_star_means_default_group_blocks() {
        // Specific bots blocked, default group open: `*` must NOT appear.
        let p = parsed("User-agent: GPTBot\nDisallow: /\n");
        let blocked = blocked_agents(&p, ["GPTBot", "*"], "/x");
        assert_eq!(blocked.iter().map(String::as_str).collect::<Vec<_>>(), ["GPTBot"]);
    }

    #[test]
    fn blocklist_monotonicity() {
        let p = parsed("User-agent: *\nDisallow: /\n");
        let small = blocked_agents(&p, ["GPTBot"], "/x");
        let large = blocked_agents(&p, ["GPTBot", "CCBot", "Bytespider"], "/x");
        assert!(small.is_subset(&large));
    }

    #[test]
    fn round_trip_preserves_structure() {
        let original = parsed(
            "User-agent: A\nUser-agent: B\nDisallow: /x%20y\nAllow: /x/pub\n\nUser-agent: *\nDisallow: /*.pdf$\nDisallow:\nDisallow: /caf%C3%A9\nDisallow: /keep%2Fslash\n",
        );
        let reparsed = parse_robots(to_robots_txt(&original).as_bytes(), None);
        assert_eq!(original.groups, reparsed.groups);
        assert_eq!(reparsed.diagnostics, ParseDiagnostics::default());
    }

    #[test]
    fn serializer_escapes_hash_and_whitespace() {
        let original = parsed("User-agent: A\nDisallow: /x%23frag\nDisallow: /sp%20 end%20\n");
        assert_eq!(original.groups[0].rules[0].pattern, "/x#frag");
        let text = to_robots_txt(&original);
        let reparsed = parse_robots(text.as_bytes(), None);
        assert_eq!(original.groups, reparsed.groups);
    }
}
