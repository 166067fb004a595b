//! URL → registrable domain (eTLD+1) resolution.
//!
//! Grouping by registrable domain is what makes per-publisher accounting
//! meaningful: `www.example.co.uk` and `cdn.example.co.uk` both roll up to
//! `example.co.uk`. Suffix data comes from the public suffix list bundled
//! into the `psl` crate at build time, so resolution is fully offline and
//! reproducible for a given build.

use url::{Host, Url};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("unparseable URL: {0}")]
    UnparseableUrl(String),
    #[error("URL has no host: {0}")]
    NoHost(String),
}

/// Parse `url_str` and return its host, lowercased, without a trailing dot.
/// IPv6 hosts are returned in plain textual form (no brackets).
pub fn host_of(url_str: &str) -> Result<String, DomainError> {
    let url = Url::parse(url_str).map_err(|_| DomainError::UnparseableUrl(url_str.to_string()))?;
    match url.host() {
        Some(Host::Domain(d)) => Ok(d.trim_end_matches('.').to_lowercase()),
        Some(Host::Ipv4(a)) => Ok(a.to_string()),
        Some(Host::Ipv6(a)) => Ok(a.to_string()),
        None => Err(DomainError::NoHost(url_str.to_string())),
    }
}

/// Resolve the registrable domain (eTLD+1) of a URL.
///
/// IP-address hosts are returned verbatim. Hosts the suffix list cannot
/// decompose (single labels like `localhost`, unknown TLD-less names) are
/// returned as-is rather than failing: they still form a stable grouping key.
pub fn registrable_domain(url_str: &str) -> Result<String, DomainError> {
    let url = Url::parse(url_str).map_err(|_| DomainError::UnparseableUrl(url_str.to_string()))?;
    match url.host() {
        Some(Host::Domain(d)) => {
            let host = d.trim_end_matches('.').to_lowercase();
            Ok(psl::domain_str(&host).map(str::to_string).unwrap_or(host))
        }
        Some(Host::Ipv4(a)) => Ok(a.to_string()),
        Some(Host::Ipv6(a)) => Ok(a.to_string()),
        None => Err(DomainError::NoHost(url_str.to_string())),
    }
}

/// The path component used for robots matching: path plus query string (rules
/// can target query parameters), always beginning with `/`.
pub fn match_path(url: &Url) -> String {
    match url.query() {
        Some(q) => format!("{}?{}", url.path(), q),
        None => url.path().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_label_suffixes_resolve() {
        assert_eq!(registrable_domain("https://www.bbc.co.uk/news/x").unwrap(), "bbc.co.uk");
        assert_eq!(
            registrable_domain("https://cdn.static.nytimes.com/a?b=c").unwrap(),
            "nytimes.com"
        );
        assert_eq!(registrable_domain("http://example.com").unwrap(), "example.com");
    }

    #[test]
    fn subdomain_depth_does_not_matter() {
        for u in [
            "https://a.b.c.example.org/x",
            "https://example.org/",
            "https://www.example.org",
        ] {
            assert_eq!(registrable_domain(u).unwrap(), "example.org");
        }
    }

    #[test]
    fn hosts_are_lowercased_and_trailing_dot_stripped() {
        assert_eq!(registrable_domain("https://WWW.Example.COM./x").unwrap(), "example.com");
        assert_eq!(host_of("https://API.Example.org.").unwrap(), "api.example.org");
    }

    #[test]
    fn ip_hosts_come_back_verbatim() {
        assert_eq!(registrable_domain("http://192.168.0.1/admin").unwrap(), "192.168.0.1");
        assert_eq!(registrable_domain("http://[2001:db8::1]/x").unwrap(), "2001:db8::1");
    }

    #[test]
    fn unknown_hosts_fall_back_to_themselves() {
        assert_eq!(registrable_domain("http://localhost:8080/x").unwrap(), "localhost");
    }

    #[test]
    fn error_cases_are_distinguished() {
        assert!(matches!(
            registrable_domain("not a url at all"),
            Err(DomainError::UnparseableUrl(_))
        ));
        assert!(matches!(
            registrable_domain("example.com/missing-scheme"),
            Err(DomainError::UnparseableUrl(_))
        ));
        assert!(matches!(
            registrable_domain("mailto:someone@example.com"),
            Err(DomainError::NoHost(_))
        ));
    }

    #[test]
    fn match_path_includes_query() {
        let url = Url::parse("https://example.com/search/results?q=fish&page=2").unwrap();
        assert_eq!(match_path(&url), "/search/results?q=fish&page=2");
        let bare = Url::parse("https://example.com").unwrap();
        assert_eq!(match_path(&bare), "/");
    }
}
