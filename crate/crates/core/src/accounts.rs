//! XRPL account registry (username, parent) and entity resolution.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Suffix appended to a parent's username for unnamed child accounts.
pub const DESCENDANT_SUFFIX: &str = "-descendant";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub address: String,
    #[serde(default)]
    pub username: Option<String>,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub activation_date: Option<NaiveDate>,
}

impl AccountRecord {
    pub fn new(address: &str) -> Self {
        AccountRecord { address: address.into(), username: None, parent: None, activation_date: None }
    }

    pub fn named(mut self, username: &str) -> Self {
        self.username = Some(username.into());
        self
    }

    pub fn child_of(mut self, parent: &str) -> Self {
        self.parent = Some(parent.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AccountsError {
    #[error("cannot read registry {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid registry: {0}")]
    Invalid(#[from] serde_json::Error),
    #[error("account {0} is registered twice")]
    Duplicate(String),
    #[error("parent chain is cyclic: {}", .0.join(" -> "))]
    CyclicParentage(Vec<String>),
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    records: HashMap<String, AccountRecord>,
}

impl Registry {
    /// Builds a registry, rejecting duplicate addresses and cyclic parentage
    /// (including an account being its own parent).
    pub fn from_records(records: impl IntoIterator<Item = AccountRecord>) -> Result<Self, AccountsError> {
        let mut map = HashMap::new();
        for r in records {
            if map.contains_key(&r.address) {
                return Err(AccountsError::Duplicate(r.address));
            }
            map.insert(r.address.clone(), r);
        }
        let reg = Registry { records: map };
        let mut addresses: Vec<&String> = reg.records.keys().collect();
        addresses.sort();
        for a in addresses {
            reg.check_ancestry(a)?;
        }
        Ok(reg)
    }

    pub fn from_json(text: &str) -> Result<Self, AccountsError> {
        Self::from_records(serde_json::from_str::<Vec<AccountRecord>>(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, AccountsError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| AccountsError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn get(&self, address: &str) -> Option<&AccountRecord> {
        self.records.get(address)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_ancestry(&self, address: &str) -> Result<(), AccountsError> {
        let mut seen = HashSet::new();
        let mut path = vec![address.to_string()];
        let mut cur = address;
        seen.insert(cur);
        while let Some(parent) = self.records.get(cur).and_then(|r| r.parent.as_deref()) {
            path.push(parent.to_string());
            if !seen.insert(parent) {
                return Err(AccountsError::CyclicParentage(path));
            }
            cur = parent;
        }
        Ok(())
    }
}

fn username(r: &AccountRecord) -> Option<&str> {
    r.username.as_deref().filter(|u| !u.is_empty())
}

/// Own username, else the parent's username with [`DESCENDANT_SUFFIX`], else
/// the address itself. Only one parent hop is consulted.
pub fn resolve_entity(address: &str, registry: &Registry) -> Result<String, AccountsError> {
    registry.check_ancestry(address)?;
    let Some(record) = registry.get(address) else {
        return Ok(address.to_string());
    };
    if let Some(name) = username(record) {
        return Ok(name.to_string());
    }
    let parent_name = record.parent.as_deref().and_then(|p| registry.get(p)).and_then(username);
    Ok(match parent_name {
        Some(name) => format!("{name}{DESCENDANT_SUFFIX}"),
        None => address.to_string(),
    })
}

/// Memoizing resolver for hot loops; the registry is validated on
/// construction so lookups cannot fail.
#[derive(Debug)]
pub struct EntityResolver<'a> {
    registry: &'a Registry,
    cache: HashMap<String, String>,
}

impl<'a> EntityResolver<'a> {
    pub fn new(registry: &'a Registry) -> Self {
        EntityResolver { registry, cache: HashMap::new() }
    }

    pub fn resolve(&mut self, address: &str) -> &str {
        if !self.cache.contains_key(address) {
            let e = resolve_entity(address, self.registry).unwrap_or_else(|_| address.to_string());
            self.cache.insert(address.to_string(), e);
        }
        &self.cache[address]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Registry {
        Registry::from_records([
            AccountRecord::new("rBinance").named("Binance"),
            AccountRecord::new("rHuobi").named("Huobi"),
            AccountRecord::new("rChild").child_of("rHuobi"),
            AccountRecord::new("rGrandchild").child_of("rChild"),
            AccountRecord::new("rOrphan").child_of("rNobody"),
        ])
        .unwrap()
    }

    #[test]
    fn resolution_rules() {
        let r = registry();
        assert_eq!(resolve_entity("rBinance", &r).unwrap(), "Binance");
        assert_eq!(resolve_entity("rChild", &r).unwrap(), "Huobi-descendant");
        assert_eq!(resolve_entity("rGrandchild", &r).unwrap(), "rGrandchild");
        assert_eq!(resolve_entity("rOrphan", &r).unwrap(), "rOrphan");
        assert_eq!(resolve_entity("rUnknown", &r).unwrap(), "rUnknown");
    }

    #[test]
    fn cycles_are_rejected() {
        let err = Registry::from_records([AccountRecord::new("a").child_of("b"), AccountRecord::new("b").child_of("a")]);
        assert!(matches!(err, Err(AccountsError::CyclicParentage(_))));
        let err = Registry::from_records([AccountRecord::new("a").child_of("a")]);
        assert!(matches!(err, Err(AccountsError::CyclicParentage(_))));
    }

    #[test]
    fn json_registry() {
        let r = Registry::from_json(
            r#"[{"address":"rA","username":"Bitstamp","activation_date":"2013-01-05"},{"address":"rB","parent":"rA"}]"#,
        )
        .unwrap();
        assert_eq!(r.get("rA").unwrap().activation_date, NaiveDate::from_ymd_opt(2013, 1, 5));
        let mut res = EntityResolver::new(&r);
        assert_eq!(res.resolve("rB"), "Bitstamp-descendant");
        assert_eq!(res.resolve("rB"), "Bitstamp-descendant");
    }
}
