//! JSON market files.
//!
//! ```json
//! {
//!   "proposers": ["P1", "P2"],
//!   "acceptors": ["A1", "A2"],
//!   "proposer_prefs": { "P1": ["A1", "A2"], "P2": {"A1": 1.0, "A2": 0.25} },
//!   "acceptor_prefs": { "A1": ["P2", "P1"], "A2": ["P1", "P2"] }
//! }
//! ```
//!
//! Each preference entry is either an ordered list (best first, converted
//! with [`rank_value`](super::rank_value)) or an explicit map of values in
//! `(0, 1]`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{rank_value, Market, MarketError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrefSpec {
    Ordered(Vec<String>),
    Valued(IndexMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarket {
    pub proposers: Vec<String>,
    pub acceptors: Vec<String>,
    pub proposer_prefs: IndexMap<String, PrefSpec>,
    pub acceptor_prefs: IndexMap<String, PrefSpec>,
}

impl RawMarket {
    pub fn validate(&self) -> Result<Market, MarketError> {
        for (owners, prefs) in [
            (&self.proposers, &self.proposer_prefs),
            (&self.acceptors, &self.acceptor_prefs),
        ] {
            if let Some(stray) = prefs.keys().find(|k| !owners.contains(k)) {
                return Err(MarketError::UnknownAgent {
                    agent: "preference table".to_string(),
                    name: stray.clone(),
                });
            }
        }
        let pv = value_table(&self.proposers, &self.acceptors, &self.proposer_prefs)?;
        let av = value_table(&self.acceptors, &self.proposers, &self.acceptor_prefs)?;
        Market::new(self.proposers.clone(), self.acceptors.clone(), pv, av)
    }
}

fn value_table(
    owners: &[String],
    partners: &[String],
    prefs: &IndexMap<String, PrefSpec>,
) -> Result<Vec<Vec<f64>>, MarketError> {
    let index_of = |owner: &str, name: &str| {
        partners
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| MarketError::UnknownAgent {
                agent: owner.to_string(),
                name: name.to_string(),
            })
    };
    let k = partners.len();
    owners
        .iter()
        .map(|owner| {
            let Some(spec) = prefs.get(owner) else {
                return Err(MarketError::IncompleteOrdering {
                    agent: owner.clone(),
                    missing: partners.first().cloned().unwrap_or_default(),
                });
            };
            let mut row = vec![None; k];
            let entries: Vec<(&String, f64)> = match spec {
                PrefSpec::Ordered(list) => list
                    .iter()
                    .enumerate()
                    .map(|(pos, name)| (name, rank_value(pos + 1, k.max(list.len()))))
                    .collect(),
                PrefSpec::Valued(map) => map.iter().map(|(name, v)| (name, *v)).collect(),
            };
            for (name, v) in entries {
                let j = index_of(owner, name)?;
                if row[j].replace(v).is_some() {
                    return Err(MarketError::DuplicateEntry {
                        agent: owner.clone(),
                        partner: name.clone(),
                    });
                }
            }
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    v.ok_or_else(|| MarketError::IncompleteOrdering {
                        agent: owner.clone(),
                        missing: partners[j].clone(),
                    })
                })
                .collect()
        })
        .collect()
}

impl Market {
    pub fn from_json_str(text: &str) -> Result<Market, MarketError> {
        let raw: RawMarket = serde_json::from_str(text)?;
        raw.validate()
    }

    /// Explicit-value form of this market.
    pub fn to_raw(&self) -> RawMarket {
        let table = |owners: &[String], partners: &[String], values: &[Vec<f64>]| {
            owners
                .iter()
                .zip(values)
                .map(|(o, row)| {
                    let map = partners.iter().cloned().zip(row.iter().copied()).collect();
                    (o.clone(), PrefSpec::Valued(map))
                })
                .collect()
        };
        RawMarket {
            proposers: self.proposer_names().to_vec(),
            acceptors: self.acceptor_names().to_vec(),
            proposer_prefs: table(self.proposer_names(), self.acceptor_names(), self.proposer_values()),
            acceptor_prefs: table(self.acceptor_names(), self.proposer_names(), self.acceptor_values()),
        }
    }

    /// Ordered-list form of this market (values are discarded).
    pub fn to_raw_ordinal(&self) -> RawMarket {
        let proposer_prefs = self
            .proposers()
            .map(|i| {
                let list = self
                    .proposer_ranking(i)
                    .iter()
                    .map(|&j| self.acceptor_name(j).to_string())
                    .collect();
                (self.proposer_name(i).to_string(), PrefSpec::Ordered(list))
            })
            .collect();
        let acceptor_prefs = self
            .acceptors()
            .map(|j| {
                let list = self
                    .acceptor_ranking(j)
                    .iter()
                    .map(|&i| self.proposer_name(i).to_string())
                    .collect();
                (self.acceptor_name(j).to_string(), PrefSpec::Ordered(list))
            })
            .collect();
        RawMarket {
            proposers: self.proposer_names().to_vec(),
            acceptors: self.acceptor_names().to_vec(),
            proposer_prefs,
            acceptor_prefs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{AcceptorId, ProposerId};

    const M2_JSON: &str = r#"{
        "proposers": ["P1", "P2"],
        "acceptors": ["A1", "A2"],
        "proposer_prefs": {"P1": ["A1", "A2"], "P2": ["A1", "A2"]},
        "acceptor_prefs": {"A1": ["P2", "P1"], "A2": ["P1", "P2"]}
    }"#;

    #[test]
    fn ordinal_file_matches_fixture() {
        let m = Market::from_json_str(M2_JSON).unwrap();
        assert_eq!(m, fixtures::m2());
    }

    #[test]
    fn valued_entries() {
        let text = r#"{"proposers":["P"],"acceptors":["X","Y"],
            "proposer_prefs":{"P":{"X":0.9,"Y":0.1}},
            "acceptor_prefs":{"X":["P"],"Y":{"P":1.0}}}"#;
        let m = Market::from_json_str(text).unwrap();
        assert_eq!(m.proposer_value(ProposerId(0), AcceptorId(1)), 0.1);
        assert_eq!(m.acceptor_value(AcceptorId(0), ProposerId(0)), 1.0);
    }

    #[test]
    fn errors_from_files() {
        let dup = M2_JSON.replace(r#"["A1", "A2"]}"#, r#"{"A1": 1.0, "A2": 1.0}}"#);
        assert!(matches!(
            Market::from_json_str(&dup),
            Err(MarketError::DuplicateValue { .. })
        ));
        let zero = M2_JSON.replace(r#""P1": ["A1", "A2"]"#, r#""P1": {"A1": 0.0, "A2": 0.5}"#);
        assert!(matches!(
            Market::from_json_str(&zero),
            Err(MarketError::OutOfRangeValue { .. })
        ));
        let short = M2_JSON.replace(r#""P1": ["A1", "A2"]"#, r#""P1": ["A1"]"#);
        assert!(matches!(
            Market::from_json_str(&short),
            Err(MarketError::IncompleteOrdering { .. })
        ));
        let unknown = M2_JSON.replace(r#""P1": ["A1", "A2"]"#, r#""P1": ["A1", "A9"]"#);
        assert!(matches!(
            Market::from_json_str(&unknown),
            Err(MarketError::UnknownAgent { .. })
        ));
        let empty = r#"{"proposers":[],"acceptors":["A"],"proposer_prefs":{},"acceptor_prefs":{"A":[]}}"#;
        assert!(matches!(Market::from_json_str(empty), Err(MarketError::EmptySide(_))));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = Market::from_json_str("{\n  \"proposers\": [\n  oops\n}").unwrap_err();
        match err {
            MarketError::Parse(e) => assert_eq!(e.line(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn raw_forms_revalidate() {
        let m = fixtures::m2b();
        assert_eq!(m.to_raw().validate().unwrap(), m);
        assert_eq!(m.to_raw_ordinal().validate().unwrap(), m);
    }
}
