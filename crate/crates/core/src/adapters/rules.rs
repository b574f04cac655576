//! Action classification rules.
//!
//! Lookup order is fixed: an exact `(receiver, name)` rule, then a wildcard
//! `("*", name)` rule, then the receiver's contract label, then the default.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Action, ActionCategory, ChainId};

/// Scope matching any receiver or operation kind.
pub const ANY_SCOPE: &str = "*";

const EOSIO_RULES: &str = include_str!("../../data/rules/eosio.json");
const TEZOS_RULES: &str = include_str!("../../data/rules/tezos.json");
const XRPL_RULES: &str = include_str!("../../data/rules/xrpl.json");

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("rules are for {rules}, action is from {action}")]
    ChainMismatch { rules: ChainId, action: ChainId },
    #[error("cannot read rules file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid rules file: {0}")]
    Invalid(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub scope: String,
    pub name: String,
    pub category: ActionCategory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RulesFile {
    chain: ChainId,
    #[serde(default = "default_category")]
    default: ActionCategory,
    #[serde(default)]
    rules: Vec<Rule>,
    #[serde(default)]
    contract_labels: HashMap<String, ActionCategory>,
}

fn default_category() -> ActionCategory {
    ActionCategory::Other
}

#[derive(Debug, Clone)]
pub struct ClassificationRules {
    pub chain: ChainId,
    /// scope (receiver or `*`) -> action name -> category
    pub exact_rules: HashMap<String, HashMap<String, ActionCategory>>,
    pub contract_labels: HashMap<String, ActionCategory>,
    pub default: ActionCategory,
}

impl ClassificationRules {
    /// The rule set shipped with the crate for `chain`.
    pub fn shipped(chain: ChainId) -> Self {
        let text = match chain {
            ChainId::Eosio => EOSIO_RULES,
            ChainId::Tezos => TEZOS_RULES,
            ChainId::Xrpl => XRPL_RULES,
        };
        Self::from_json(text).expect("shipped rules are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RulesError> {
        let file: RulesFile = serde_json::from_str(text)?;
        let mut exact_rules: HashMap<String, HashMap<String, ActionCategory>> = HashMap::new();
        for r in file.rules {
            exact_rules.entry(r.scope).or_default().insert(r.name, r.category);
        }
        Ok(ClassificationRules {
            chain: file.chain,
            exact_rules,
            contract_labels: file.contract_labels,
            default: file.default,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RulesError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RulesError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut rules: Vec<Rule> = self
            .exact_rules
            .iter()
            .flat_map(|(scope, names)| {
                names.iter().map(move |(name, c)| Rule { scope: scope.clone(), name: name.clone(), category: *c })
            })
            .collect();
        rules.sort_by(|a, b| (&a.scope, &a.name).cmp(&(&b.scope, &b.name)));
        let file = RulesFile {
            chain: self.chain,
            default: self.default,
            rules,
            contract_labels: self.contract_labels.clone(),
        };
        serde_json::to_string_pretty(&file).expect("rules serialize")
    }

    /// Classification without the chain check; always yields a category.
    pub fn lookup(&self, receiver: &str, name: &str) -> ActionCategory {
        for scope in [receiver, ANY_SCOPE] {
            if let Some(c) = self.exact_rules.get(scope).and_then(|names| names.get(name)) {
                return *c;
            }
        }
        self.contract_labels.get(receiver).copied().unwrap_or(self.default)
    }
}

pub fn classify_action(rules: &ClassificationRules, action: &Action) -> Result<ActionCategory, RulesError> {
    if rules.chain != action.chain {
        return Err(RulesError::ChainMismatch { rules: rules.chain, action: action.chain });
    }
    Ok(rules.lookup(&action.receiver, &action.name))
}
