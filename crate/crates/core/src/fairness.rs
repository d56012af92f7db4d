//! Fairness-considerations map: the per-stage prompts a fairness argument is
//! expected to address, and coverage of those prompts by a case.
//!
//! Maps ship as JSON data. `fairness-v1` is bundled; a directory of
//! `{map}.json` files can override or extend it.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lifecycle::is_stage_id;
use crate::model::{AssuranceCase, NodeId};

pub const DEFAULT_MAP: &str = "fairness-v1";

const BUNDLED_FAIRNESS_V1: &str = include_str!("../maps/fairness-v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultSeverity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Consideration {
    pub id: String,
    pub stage: String,
    pub summary: String,
    pub prompt: String,
    pub default_severity: DefaultSeverity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsiderationMap {
    pub id: String,
    pub entries: Vec<Consideration>,
}

impl ConsiderationMap {
    pub fn get(&self, id: &str) -> Option<&Consideration> {
        self.entries.iter().find(|c| c.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// Parses a registry file and checks ids are unique and stages valid.
    /// Entries are ordered by the numeric suffix of their id, then by id.
    pub fn from_json(map_id: &str, text: &str) -> Result<Self, MapError> {
        let mut entries: Vec<Consideration> =
            serde_json::from_str(text).map_err(|e| MapError::Invalid(map_id.to_owned(), e.to_string()))?;
        let mut seen = HashSet::new();
        for c in &entries {
            if !seen.insert(c.id.as_str()) {
                return Err(MapError::Invalid(map_id.to_owned(), format!("duplicate consideration {}", c.id)));
            }
            if !is_stage_id(&c.stage) {
                return Err(MapError::Invalid(
                    map_id.to_owned(),
                    format!("consideration {} names unknown stage {}", c.id, c.stage),
                ));
            }
        }
        entries.sort_by(|a, b| id_key(&a.id).cmp(&id_key(&b.id)));
        Ok(ConsiderationMap {
            id: map_id.to_owned(),
            entries,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("considerations are plain data")
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("consideration map {0} not found")]
    NotFound(String),
    #[error("consideration map {0} is invalid: {1}")]
    Invalid(String, String),
    #[error("reading consideration map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Bundled registry lookup.
pub fn consideration_registry(map_id: &str) -> Result<ConsiderationMap, MapError> {
    match map_id {
        DEFAULT_MAP => ConsiderationMap::from_json(map_id, BUNDLED_FAIRNESS_V1),
        other => Err(MapError::NotFound(other.to_owned())),
    }
}

/// The bundled default map.
pub fn default_map() -> ConsiderationMap {
    consideration_registry(DEFAULT_MAP).expect("bundled fairness-v1 map is valid")
}

/// Looks for `{dir}/{map_id}.json` first, then falls back to the bundled maps.
pub fn load_map(map_id: &str, dir: Option<&Path>) -> Result<ConsiderationMap, MapError> {
    if map_id.is_empty() || map_id.contains(['/', '\\']) || map_id.starts_with('.') {
        return Err(MapError::NotFound(map_id.to_owned()));
    }
    if let Some(dir) = dir {
        let path = dir.join(format!("{map_id}.json"));
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|source| MapError::Io {
                path: path.display().to_string(),
                source,
            })?;
            return ConsiderationMap::from_json(map_id, &text);
        }
    }
    consideration_registry(map_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageStatus {
    Addressed,
    Waived,
    Unaddressed,
}

impl fmt::Display for CoverageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverageStatus::Addressed => "addressed",
            CoverageStatus::Waived => "waived",
            CoverageStatus::Unaddressed => "unaddressed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MapCoverage {
    pub map: String,
    pub per_consideration: IndexMap<String, CoverageStatus>,
    pub addressing_claims: IndexMap<String, Vec<NodeId>>,
}

impl MapCoverage {
    pub fn status(&self, id: &str) -> Option<CoverageStatus> {
        self.per_consideration.get(id).copied()
    }

    pub fn unaddressed(&self) -> impl Iterator<Item = &str> {
        self.per_consideration
            .iter()
            .filter(|(_, s)| **s == CoverageStatus::Unaddressed)
            .map(|(id, _)| id.as_str())
    }
}

/// Classifies each consideration: addressed if some claim tags it, else
/// waived if the case waives it, else unaddressed.
pub fn map_coverage(case: &AssuranceCase, map: &ConsiderationMap) -> MapCoverage {
    let claims = case.claims_preorder();
    let mut per_consideration = IndexMap::with_capacity(map.entries.len());
    let mut addressing_claims = IndexMap::with_capacity(map.entries.len());
    for entry in &map.entries {
        let tagged: Vec<NodeId> = claims
            .iter()
            .filter(|c| c.considers.contains(&entry.id))
            .map(|c| c.id.clone())
            .collect();
        let status = if !tagged.is_empty() {
            CoverageStatus::Addressed
        } else if case.waivers.iter().any(|w| w.consideration_id == entry.id) {
            CoverageStatus::Waived
        } else {
            CoverageStatus::Unaddressed
        };
        per_consideration.insert(entry.id.clone(), status);
        addressing_claims.insert(entry.id.clone(), tagged);
    }
    MapCoverage {
        map: map.id.clone(),
        per_consideration,
        addressing_claims,
    }
}

fn id_key(id: &str) -> (u64, &str) {
    let digits = id.rsplit('-').next().unwrap_or_default();
    (digits.parse().unwrap_or(u64::MAX), id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tests::id, Waiver};

    #[test]
    fn bundled_map_has_fourteen_entries() {
        let map = default_map();
        assert_eq!(map.entries.len(), 14);
        assert_eq!(map.get("FC-SD-13").unwrap().stage, "model_updating_deprovisioning");
        assert!(map.entries.iter().all(|c| c.default_severity == DefaultSeverity::Warning));
        let ids: Vec<&str> = map.entries.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids[0], "FC-PD-01");
        assert_eq!(ids[4], "FC-MD-05");
        assert_eq!(ids[13], "FC-SD-14");
    }

    #[test]
    fn unknown_map_is_not_found() {
        assert!(matches!(consideration_registry("nope"), Err(MapError::NotFound(_))));
        assert!(matches!(load_map("../etc", None), Err(MapError::NotFound(_))));
    }

    #[test]
    fn map_dir_overrides_bundled() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("tiny.json"),
            r#"[{"id":"X-1","stage":"data_analysis","summary":"s","prompt":"p","defaultSeverity":"error"}]"#,
        )
        .unwrap();
        let map = load_map("tiny", Some(dir.path())).unwrap();
        assert_eq!(map.entries.len(), 1);
        assert_eq!(load_map(DEFAULT_MAP, Some(dir.path())).unwrap().entries.len(), 14);
    }

    #[test]
    fn goal_only_case_is_all_unaddressed() {
        let c = AssuranceCase::new("x", "y").unwrap();
        let cov = map_coverage(&c, &default_map());
        assert_eq!(cov.unaddressed().count(), 14);
    }

    #[test]
    fn tag_and_waiver_partition() {
        let c = AssuranceCase::new("x", "y").unwrap();
        let c = c.add_claim("G1", id("C2"), "diverse team").unwrap();
        let c = c.tag_consideration("C2", "FC-PD-01").unwrap();
        let c = c.tag_consideration("C2", "FC-PD-03").unwrap();
        let c = c.add_waiver(Waiver::new("FC-SD-14", "vendor handles updates").unwrap()).unwrap();
        let cov = map_coverage(&c, &default_map());
        assert_eq!(cov.status("FC-PD-01"), Some(CoverageStatus::Addressed));
        assert_eq!(cov.status("FC-PD-03"), Some(CoverageStatus::Addressed));
        assert_eq!(cov.status("FC-SD-14"), Some(CoverageStatus::Waived));
        assert_eq!(cov.unaddressed().count(), 11);
        assert_eq!(cov.addressing_claims["FC-PD-01"], vec![id("C2")]);
        assert_eq!(cov.addressing_claims["FC-PD-03"], vec![id("C2")]);
    }

    #[test]
    fn tagging_wins_over_waiver_and_untag_falls_back() {
        let c = AssuranceCase::new("x", "y").unwrap();
        let c = c.add_waiver(Waiver::new("FC-PD-02", "handled elsewhere").unwrap()).unwrap();
        let tagged = c.tag_consideration("G1", "FC-PD-02").unwrap();
        let map = default_map();
        assert_eq!(map_coverage(&tagged, &map).status("FC-PD-02"), Some(CoverageStatus::Addressed));
        let untagged = tagged.untag_consideration("G1", "FC-PD-02").unwrap();
        assert_eq!(map_coverage(&untagged, &map).status("FC-PD-02"), Some(CoverageStatus::Waived));
    }
}
