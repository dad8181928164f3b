//! Name-keyed registries used to pick strategies at runtime.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Named entries of one strategy family, each with a one-line summary.
pub struct Registry<T> {
    kind: &'static str,
    entries: BTreeMap<String, (String, T)>,
}

impl<T> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn register(&mut self, name: &str, summary: &str, entry: T) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::DuplicateStrategy {
                kind: self.kind,
                name: name.to_string(),
            });
        }
        self.entries
            .insert(name.to_string(), (summary.to_string(), entry));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .get(name)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// `(name, summary)` pairs in name order.
    pub fn describe(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .map(|(k, (s, _))| (k.as_str(), s.as_str()))
    }
}
