use std::fmt;

/// The parts of a URL that request/endpoint matching looks at.
///
/// Parsing is deliberately small: it accepts scheme-less URLs such as
/// `example.io/login`, drops query strings and fragments, lowercases the
/// host and collapses repeated slashes in the path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UrlParts {
    pub scheme: String,
    pub host: String,
    pub port: Option<u16>,
    pub path: String,
}

fn collapse_slashes(path: &str) -> String {
    let mut out = String::with_capacity(path.len() + 1);
    if !path.starts_with('/') {
        out.push('/');
    }
    for c in path.chars() {
        if c == '/' && out.ends_with('/') {
            continue;
        }
        out.push(c);
    }
    out
}

impl UrlParts {
    pub fn parse(url: &str) -> Option<UrlParts> {
        let url = url.trim();
        let (scheme, rest) = match url.find("://") {
            Some(i) => (url[..i].to_ascii_lowercase(), &url[i + 3..]),
            None => (String::new(), url),
        };
        if !scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
            return None;
        }
        let rest = rest.split(['?', '#']).next().unwrap_or_default();
        let (authority, path) = match rest.find('/') {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, "/"),
        };
        // user info is not part of the target
        let authority = authority.rsplit('@').next().unwrap_or(authority);
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) if !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) => (h, Some(p.parse().ok()?)),
            Some((h, "")) => (h, None),
            _ => (authority, None),
        };
        if host.is_empty() || host.contains(':') {
            return None;
        }
        Some(UrlParts {
            scheme,
            host: host.to_ascii_lowercase(),
            port,
            path: collapse_slashes(path),
        })
    }

    /// `scheme://host[:port]`, or just the authority for scheme-less URLs.
    pub fn origin(&self) -> String {
        let mut out = String::new();
        if !self.scheme.is_empty() {
            out.push_str(&self.scheme);
            out.push_str("://");
        }
        out.push_str(&self.host);
        if let Some(port) = self.port {
            out.push_str(&format!(":{port}"));
        }
        out
    }

    /// Host and path agree; scheme and port are ignored.
    pub fn same_target(&self, other: &UrlParts) -> bool {
        self.host == other.host && self.path == other.path
    }
}

impl fmt::Display for UrlParts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.origin(), self.path)
    }
}
