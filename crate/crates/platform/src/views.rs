//! Read models served by the API.

use serde::{Deserialize, Serialize};
use soo_core::aggregator::{children_validity, element_validity};
use soo_core::model::{ElementId, ElementKind, Milestone, Phase, Seq, SnapshotElement, WeightSet};
use soo_core::PlatformState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalView {
    pub title: String,
    pub description: String,
    pub system_boundaries: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElementView {
    pub id: ElementId,
    pub kind: ElementKind,
    pub name: String,
    pub definition: Option<String>,
    pub parent_id: Option<ElementId>,
    pub state: String,
    /// Weighted confirmation rate.
    pub validity: f64,
    pub validity_structure: f64,
    pub validity_children: f64,
    pub confirm_weight: f64,
    pub reject_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SooView {
    pub goal: Option<GoalView>,
    pub phase: Phase,
    pub seq: Seq,
    pub snapshot_hash: String,
    pub elements: Vec<ElementView>,
}

impl SooView {
    pub fn of(state: &PlatformState) -> Self {
        let (_, snapshot_hash) = state.tree.snapshot();
        let elements = state
            .tree
            .active_elements()
            .map(|e| ElementView {
                id: e.id,
                kind: e.kind,
                name: e.name.clone(),
                definition: e.definition.clone(),
                parent_id: e.parent_id,
                state: e.state.label().to_string(),
                validity: element_validity(&e.validity, &state.policy),
                validity_structure: e.validity.structure_rate(),
                validity_children: children_validity(&state.tree, &state.pairs, e.id),
                confirm_weight: e.validity.confirm_weight,
                reject_weight: e.validity.reject_weight,
            })
            .collect();
        SooView {
            goal: state.goal_info.as_ref().map(|g| GoalView {
                title: g.title.clone(),
                description: g.description.clone(),
                system_boundaries: g.system_boundaries.clone(),
            }),
            phase: state.tree.phase(),
            seq: state.seq,
            snapshot_hash,
            elements,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MilestoneView {
    pub id: u64,
    pub at_seq: Seq,
    pub snapshot_hash: String,
    pub elements: Vec<SnapshotElement>,
    pub weights: Option<WeightSet>,
}

impl From<&Milestone> for MilestoneView {
    fn from(m: &Milestone) -> Self {
        MilestoneView {
            id: m.id,
            at_seq: m.at_seq,
            snapshot_hash: m.snapshot_hash.clone(),
            elements: m.elements(),
            weights: m.weights.clone(),
        }
    }
}
