//! Scoring a platform tree against the ground truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use soo_core::model::{ElementId, ElementKind, ElementState, SooTree, WeightSet};
use thiserror::Error;

use crate::truth::{GroundTruthSoo, Node};

/// Resolves platform elements to ground-truth concepts by kind and name
/// (synonyms included). Ambiguous names are settled by the parent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConceptMap;

impl ConceptMap {
    pub fn node_of(&self, tree: &SooTree, truth: &GroundTruthSoo, id: ElementId) -> Option<Node> {
        let e = tree.get(id)?;
        if e.kind == ElementKind::Goal {
            return Some(Node::Root);
        }
        let candidates = truth.lookup(e.kind, &e.name);
        match candidates[..] {
            [] => None,
            [only] => Some(Node::Concept(only)),
            _ => {
                let parent = e.parent_id.and_then(|p| self.node_of(tree, truth, p));
                let fitting = candidates
                    .iter()
                    .copied()
                    .find(|&c| parent.is_some() && truth.parent_node(c) == parent);
                Some(Node::Concept(fitting.unwrap_or(candidates[0])))
            }
        }
    }

    /// The element is the goal, or a true concept under its true parent.
    pub fn is_placed(&self, tree: &SooTree, truth: &GroundTruthSoo, id: ElementId) -> bool {
        match self.node_of(tree, truth, id) {
            Some(Node::Root) => true,
            Some(Node::Concept(_)) => self.placed(tree, truth, id).is_some(),
            None => false,
        }
    }

    pub fn placed(&self, tree: &SooTree, truth: &GroundTruthSoo, id: ElementId) -> Option<usize> {
        let Some(Node::Concept(c)) = self.node_of(tree, truth, id) else {
            return None;
        };
        let parent = tree.get(id)?.parent_id?;
        (self.node_of(tree, truth, parent) == truth.parent_node(c)).then_some(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StructureScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub validated: usize,
    pub matched: usize,
}

/// Harmonic mean, 0 when both parts are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Precision and recall of the validated tree. A concept counts once: an
/// unmerged duplicate lowers precision.
pub fn evaluate_structure(tree: &SooTree, truth: &GroundTruthSoo) -> StructureScore {
    let map = ConceptMap;
    let mut seen = BTreeSet::new();
    let mut validated = 0;
    for e in tree.active_elements() {
        if e.kind == ElementKind::Goal || e.state != ElementState::Validated {
            continue;
        }
        validated += 1;
        if let Some(c) = map.placed(tree, truth, e.id) {
            seen.insert(c);
        }
    }
    let matched = seen.len();
    let ratio = |n: usize, d: usize| if d > 0 { n as f64 / d as f64 } else { 0.0 };
    let precision = ratio(matched, validated);
    let recall = ratio(matched, truth.len());
    StructureScore {
        precision,
        recall,
        f1: f1(precision, recall),
        validated,
        matched,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightScore {
    /// `None` when no weighted element matches a concept.
    pub rmse: Option<f64>,
    pub matched: usize,
    pub unmatched: Vec<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no milestone with weights yet")]
    NoMilestone,
}

/// RMSE between derived sibling weights and true ones over matched
/// elements. Unmatched elements are listed, not scored.
pub fn weight_rmse(weights: &WeightSet, tree: &SooTree, truth: &GroundTruthSoo) -> WeightScore {
    let map = ConceptMap;
    let mut sq = 0.0;
    let mut matched = 0;
    let mut unmatched = Vec::new();
    for (&id, &w) in &weights.weights {
        match map.placed(tree, truth, id) {
            Some(c) => {
                sq += (w - truth.concepts[c].weight).powi(2);
                matched += 1;
            }
            None => unmatched.push(id),
        }
    }
    WeightScore {
        rmse: (matched > 0).then(|| (sq / matched as f64).sqrt()),
        matched,
        unmatched,
    }
}

/// Weight recovery of the latest milestone.
pub fn evaluate_weights(tree: &SooTree, truth: &GroundTruthSoo) -> Result<WeightScore, EvalError> {
    let weights = tree
        .latest_milestone()
        .and_then(|m| m.weights.as_ref())
        .ok_or(EvalError::NoMilestone)?;
    Ok(weight_rmse(weights, tree, truth))
}
