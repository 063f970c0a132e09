use std::fmt;

use super::BusError;

/// Namespaced topic name: `namespace + "/" + base`.
///
/// The namespace is either empty or a slash-led path without a trailing slash
/// (`/left`, `/cell/arm2`). The base never starts or ends with a slash.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicName {
    namespace: String,
    base: String,
}

impl TopicName {
    pub fn new(namespace: &str, base: &str) -> Result<Self, BusError> {
        let bad = |why: &str| BusError::InvalidTopic(format!("{namespace:?} + {base:?}: {why}"));
        if base.is_empty() {
            return Err(bad("empty base"));
        }
        if base.starts_with('/') || base.ends_with('/') || base.contains("//") {
            return Err(bad("malformed base"));
        }
        if !namespace.is_empty()
            && (!namespace.starts_with('/')
                || namespace.ends_with('/')
                || namespace.contains("//"))
        {
            return Err(bad("namespace must look like `/name`"));
        }
        if base.chars().chain(namespace.chars()).any(|c| c.is_whitespace() || c.is_control()) {
            return Err(bad("whitespace in topic"));
        }
        Ok(Self { namespace: namespace.to_string(), base: base.to_string() })
    }

    /// Parses a full name. The base is the last two path segments (`group/name`),
    /// or the only segment; anything in front of it is the namespace.
    pub fn parse(full: &str) -> Result<Self, BusError> {
        let trimmed = full.strip_prefix('/').unwrap_or(full);
        if trimmed.is_empty() || trimmed.ends_with('/') || trimmed.contains("//") {
            return Err(BusError::InvalidTopic(full.to_string()));
        }
        let segments: Vec<&str> = trimmed.split('/').collect();
        let split = segments.len().saturating_sub(2);
        let namespace = if split == 0 {
            String::new()
        } else {
            format!("/{}", segments[..split].join("/"))
        };
        Self::new(&namespace, &segments[split..].join("/"))
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn full(&self) -> String {
        self.to_string()
    }

    /// Same base under another namespace.
    pub fn with_namespace(&self, namespace: &str) -> Result<Self, BusError> {
        Self::new(namespace, &self.base)
    }
}

impl fmt::Display for TopicName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.namespace, self.base)
    }
}
