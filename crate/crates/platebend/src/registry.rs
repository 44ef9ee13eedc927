//! Name-keyed registries for interchangeable strategies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Entries of one kind (flow scheme, scenario, metric, ...) looked up by name.
pub struct Registry<T> {
    kind: &'static str,
    entries: BTreeMap<String, (String, T)>,
}

impl<T> Registry<T> {
    pub fn new(kind: &'static str) -> Registry<T> {
        Registry { kind, entries: BTreeMap::new() }
    }

    /// Registers `value` under `name`, replacing any earlier entry.
    pub fn register(&mut self, name: &str, description: &str, value: T) -> &mut Self {
        self.entries.insert(name.to_string(), (description.to_string(), value));
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries.get(name).map(|(_, v)| v).ok_or_else(|| {
            Error::InvalidParameter(format!("unknown {} '{name}' (available: {})", self.kind, self.names().join(", ")))
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// `(name, description)` pairs in name order.
    pub fn describe(&self) -> Vec<(&str, &str)> {
        self.entries.iter().map(|(k, (d, _))| (k.as_str(), d.as_str())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_unknown_name() {
        let mut r: Registry<fn() -> u32> = Registry::new("thing");
        r.register("one", "first", || 1).register("two", "second", || 2);
        assert_eq!((r.get("two").unwrap())(), 2);
        assert_eq!(r.names(), vec!["one", "two"]);
        let err = r.get("three").err().unwrap().to_string();
        assert!(err.contains("unknown thing 'three'") && err.contains("one, two"), "{err}");
    }
}
