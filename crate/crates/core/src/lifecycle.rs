//! The fixed three-phase, twelve-stage AI lifecycle and per-stage coverage.

use indexmap::IndexMap;
use serde::Serialize;

use crate::model::AssuranceCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ProjectDesign,
    ModelDevelopment,
    SystemDeployment,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::ProjectDesign => "Project design",
            Phase::ModelDevelopment => "Model development",
            Phase::SystemDeployment => "System deployment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Stage {
    pub id: &'static str,
    pub name: &'static str,
    pub phase: Phase,
    /// Position within the phase, 1..=4.
    pub ordinal: u8,
}

const fn stage(id: &'static str, name: &'static str, phase: Phase, ordinal: u8) -> Stage {
    Stage { id, name, phase, ordinal }
}

static STAGES: [Stage; 12] = [
    stage("project_planning", "Project planning", Phase::ProjectDesign, 1),
    stage("problem_formulation", "Problem formulation", Phase::ProjectDesign, 2),
    stage("data_extraction_procurement", "Data extraction or procurement", Phase::ProjectDesign, 3),
    stage("data_analysis", "Data analysis", Phase::ProjectDesign, 4),
    stage("preprocessing_feature_engineering", "Preprocessing and feature engineering", Phase::ModelDevelopment, 1),
    stage("model_selection_training", "Model selection and training", Phase::ModelDevelopment, 2),
    stage("model_testing_validation", "Model testing and validation", Phase::ModelDevelopment, 3),
    stage("model_documentation", "Model documentation", Phase::ModelDevelopment, 4),
    stage("system_implementation", "System implementation", Phase::SystemDeployment, 1),
    stage("user_training", "User training", Phase::SystemDeployment, 2),
    stage("system_use_monitoring", "System use and monitoring", Phase::SystemDeployment, 3),
    stage("model_updating_deprovisioning", "Model updating or deprovisioning", Phase::SystemDeployment, 4),
];

/// All twelve stages in phase order.
pub fn stage_registry() -> &'static [Stage] {
    &STAGES
}

pub fn find_stage(id: &str) -> Option<&'static Stage> {
    STAGES.iter().find(|s| s.id == id)
}

pub fn is_stage_id(id: &str) -> bool {
    find_stage(id).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageCoverage {
    /// Claim counts for every stage, in registry order (zeros included).
    pub per_stage: IndexMap<String, usize>,
    /// Stages with no tagged claim, in registry order.
    pub uncovered: Vec<String>,
}

impl StageCoverage {
    pub fn count(&self, stage_id: &str) -> usize {
        self.per_stage.get(stage_id).copied().unwrap_or(0)
    }
}

/// Counts stage-tagged claims per stage. Tags that name no registered stage
/// are ignored here; the validator reports them.
pub fn stage_coverage(case: &AssuranceCase) -> StageCoverage {
    let mut per_stage: IndexMap<String, usize> = STAGES.iter().map(|s| (s.id.to_owned(), 0)).collect();
    for claim in case.claims.values() {
        if let Some(count) = claim.stage.as_deref().and_then(|s| per_stage.get_mut(s)) {
            *count += 1;
        }
    }
    let uncovered = per_stage
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(id, _)| id.clone())
        .collect();
    StageCoverage { per_stage, uncovered }
}
