use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Feature namespaces a [`SparseVector`] may carry.
pub const NAMESPACES: &[&str] = &[
    "writeup", "nvd", "pocinfo", "poctok", "poclang", "code", "cvss", "cwe", "cpe",
];

/// Returns true if `id` is `<namespace>:<rest>` for a registered namespace.
pub fn is_registered(id: &str) -> bool {
    match id.split_once(':') {
        Some((ns, rest)) => !rest.is_empty() && NAMESPACES.contains(&ns),
        None => false,
    }
}

/// Namespaced feature-id to value map. Zero values are never stored.
///
/// Serialises as a plain `{"id": value}` JSON object with sorted keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `id` to `value`; a zero value removes the entry.
    pub fn insert(&mut self, id: impl Into<String>, value: f64) {
        let id = id.into();
        debug_assert!(is_registered(&id), "unregistered feature namespace: {id}");
        if value == 0.0 {
            self.entries.remove(&id);
        } else {
            self.entries.insert(id, value);
        }
    }

    /// Binary OR: sets `id` to 1.
    pub fn set(&mut self, id: impl Into<String>) {
        self.insert(id, 1.0);
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Merges `other` into `self`; binary entries OR, numeric entries keep the max.
    pub fn union_with(&mut self, other: &SparseVector) {
        for (k, v) in &other.entries {
            let e = self.entries.entry(k.clone()).or_insert(*v);
            if *v > *e {
                *e = *v;
            }
        }
    }

    /// Copies every entry of `other` into `self`, overwriting.
    pub fn extend(&mut self, other: SparseVector) {
        self.entries.extend(other.entries);
    }

    /// Entries whose id starts with `<ns>:`.
    pub fn namespace<'a>(&'a self, ns: &'a str) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k.split_once(':').map(|(p, _)| p == ns).unwrap_or(false))
            .map(|(k, v)| (k.as_str(), *v))
    }
}

impl FromIterator<(String, f64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut v = SparseVector::new();
        for (k, x) in iter {
            v.insert(k, x);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_values_are_not_stored() {
        let mut v = SparseVector::new();
        v.insert("cwe:79", 0.0);
        assert!(v.is_empty());
        v.set("cwe:79");
        v.insert("cwe:79", 0.0);
        assert!(v.is_empty());
    }

    #[test]
    fn registered_namespaces() {
        assert!(is_registered("writeup:overflow"));
        assert!(is_registered("code:python:n_nodes"));
        assert!(!is_registered("tweet:rce"));
        assert!(!is_registered("writeup:"));
        assert!(!is_registered("noprefix"));
    }

    #[test]
    fn union_is_or_for_binary() {
        let a: SparseVector = [("writeup:a".to_string(), 1.0)].into_iter().collect();
        let mut b: SparseVector = [("writeup:b".to_string(), 1.0)].into_iter().collect();
        b.union_with(&a);
        assert_eq!(b.len(), 2);
        b.union_with(&a);
        assert_eq!(b.get("writeup:a"), Some(1.0));
    }
}
