//! Model aggregator: turns weighted answers into validity, structure and
//! weight changes of the set of objectives.

mod ahp;
mod apply;
mod assess;
mod merge;

pub use ahp::{
    build_pairwise_matrix, consistency_ratio, derive_weights, intensity_ratio, principal_eigenvalue,
    random_index, Judgment, PairwiseMatrix, RECIPROCITY_TOLERANCE,
};
pub use apply::{
    apply_answer, compute_weights, milestone_due, milestone_of, next_followup, pending_merge,
    structural_gaps_open,
};
pub use assess::{assess_alternatives, global_weight, AssessError};
pub use merge::{execute_merge, plan_merge, MergeError, MergePlan};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ElementId, SooTree, TextCandidate, ValidityRecord};

/// Thresholds governing validation, merging, relocation and milestones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AggregationPolicy {
    pub validate_rate: f64,
    pub min_confirm_weight: f64,
    pub reject_rate: f64,
    pub min_reject_weight: f64,
    pub naming_unit: f64,
    pub merge_similarity_rate: f64,
    pub min_duplicate_answers: f64,
    pub relocate_rate: f64,
    pub min_structure_weight: f64,
    pub milestone_avg_validity: f64,
    pub stability_window: u64,
    pub common_name_validate_rate: f64,
    pub common_name_min_weight: f64,
    /// Child-naming answers collected per (parent, kind) before the naming
    /// gap closes.
    pub naming_quota: u64,
    /// Judgment weight each sibling pair needs before weights are derived.
    pub min_pairwise_weight: f64,
    /// Maximum selection size for set-based interactions.
    pub set_cap: usize,
    /// Unit all answer weights are expressed in. Weight minima above are in
    /// the same unit.
    pub weight_scale: f64,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        AggregationPolicy {
            validate_rate: 0.75,
            min_confirm_weight: 10.0,
            reject_rate: 0.75,
            min_reject_weight: 10.0,
            naming_unit: 1.0,
            merge_similarity_rate: 0.6,
            min_duplicate_answers: 5.0,
            relocate_rate: 2.0 / 3.0,
            min_structure_weight: 10.0,
            milestone_avg_validity: 0.8,
            stability_window: 25,
            common_name_validate_rate: 0.75,
            common_name_min_weight: 10.0,
            naming_quota: 8,
            min_pairwise_weight: 5.0,
            set_cap: 5,
            weight_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid policy: {0}")]
pub struct PolicyError(pub String);

impl AggregationPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let rates = [
            ("validateRate", self.validate_rate),
            ("rejectRate", self.reject_rate),
            ("mergeSimilarityRate", self.merge_similarity_rate),
            ("relocateRate", self.relocate_rate),
            ("milestoneAvgValidity", self.milestone_avg_validity),
            ("commonNameValidateRate", self.common_name_validate_rate),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PolicyError(format!("{name} = {v} is outside (0,1]")));
            }
        }
        let minima = [
            ("minConfirmWeight", self.min_confirm_weight),
            ("minRejectWeight", self.min_reject_weight),
            ("namingUnit", self.naming_unit),
            ("minDuplicateAnswers", self.min_duplicate_answers),
            ("minStructureWeight", self.min_structure_weight),
            ("commonNameMinWeight", self.common_name_min_weight),
            ("minPairwiseWeight", self.min_pairwise_weight),
            ("weightScale", self.weight_scale),
        ];
        for (name, v) in minima {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PolicyError(format!("{name} = {v} must be positive")));
            }
        }
        if self.stability_window < 1 || self.naming_quota < 1 || self.set_cap < 1 {
            return Err(PolicyError(
                "stabilityWindow, namingQuota and setCap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Same policy with every answer weight and weight minimum multiplied by
    /// `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        AggregationPolicy {
            min_confirm_weight: self.min_confirm_weight * factor,
            min_reject_weight: self.min_reject_weight * factor,
            min_duplicate_answers: self.min_duplicate_answers * factor,
            min_structure_weight: self.min_structure_weight * factor,
            common_name_min_weight: self.common_name_min_weight * factor,
            min_pairwise_weight: self.min_pairwise_weight * factor,
            weight_scale: self.weight_scale * factor,
            ..self.clone()
        }
    }
}

/// `value >= threshold`, forgiving rounding noise far below any meaningful
/// difference.
pub fn at_least(value: f64, threshold: f64) -> bool {
    value >= threshold - 1e-9 * threshold.abs().max(f64::MIN_POSITIVE)
}

/// Unordered sibling pair, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub a: ElementId,
    pub b: ElementId,
}

impl PairKey {
    pub fn new(x: ElementId, y: ElementId) -> Self {
        if x <= y {
            PairKey { a: x, b: y }
        } else {
            PairKey { a: y, b: x }
        }
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.a == id || self.b == id
    }
}

/// Duplicate-question tallies for one sibling pair, plus the common names
/// proposed once the pair is flagged for merging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairStats {
    pub yes_weight: f64,
    pub no_weight: f64,
    pub dont_know_count: u64,
    /// Flagged as a likely duplicate; common names are being collected.
    pub proposed: bool,
    /// Settled: either merged or judged distinct.
    pub resolved: bool,
    pub name_candidates: Vec<TextCandidate>,
}

impl PairStats {
    pub fn total(&self) -> f64 {
        self.yes_weight + self.no_weight
    }

    pub fn similarity(&self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.yes_weight / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Validated,
    Removed,
    Pending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParentDecision {
    Keep,
    Relocate(ElementId),
    Pending,
}

/// Weighted share of confirmations (naming included) among all non-abstaining
/// answers; 0 without evidence.
pub fn element_validity(record: &ValidityRecord, policy: &AggregationPolicy) -> f64 {
    record.rate(policy.naming_unit)
}

pub fn resolve_validation(record: &ValidityRecord, policy: &AggregationPolicy) -> Resolution {
    resolve_with(record, policy, policy.validate_rate, policy.min_confirm_weight)
}

/// Validation of free-text proposals (common names, definitions).
pub fn resolve_text_candidate(record: &ValidityRecord, policy: &AggregationPolicy) -> Resolution {
    resolve_with(
        record,
        policy,
        policy.common_name_validate_rate,
        policy.common_name_min_weight,
    )
}

fn resolve_with(
    record: &ValidityRecord,
    policy: &AggregationPolicy,
    rate: f64,
    min_weight: f64,
) -> Resolution {
    let support = record.effective_confirm(policy.naming_unit);
    if at_least(record.rate(policy.naming_unit), rate) && at_least(support, min_weight) {
        Resolution::Validated
    } else if at_least(record.reject_rate(policy.naming_unit), policy.reject_rate)
        && at_least(record.reject_weight, policy.min_reject_weight)
    {
        Resolution::Removed
    } else {
        Resolution::Pending
    }
}

pub fn propose_merge(pair: &PairStats, policy: &AggregationPolicy) -> bool {
    pair.total() > 0.0
        && at_least(pair.similarity(), policy.merge_similarity_rate)
        && at_least(pair.total(), policy.min_duplicate_answers)
}

pub fn resolve_parent(record: &ValidityRecord, policy: &AggregationPolicy) -> ParentDecision {
    let total = record.structure_total();
    if !at_least(total, policy.min_structure_weight) || total <= 0.0 {
        return ParentDecision::Pending;
    }
    if let Some((&parent, _)) = record
        .structure_relocate_weight
        .iter()
        .find(|(_, &w)| at_least(w / total, policy.relocate_rate))
    {
        return ParentDecision::Relocate(parent);
    }
    if at_least(record.structure_confirm_weight / total, policy.relocate_rate) {
        ParentDecision::Keep
    } else {
        ParentDecision::Pending
    }
}

/// Borda points for an ordered selection, normalized so one answer sums to 1.
/// Unchosen offered elements score 0.
pub fn borda_scores(chosen: &[ElementId], offered: &[ElementId]) -> BTreeMap<ElementId, f64> {
    let m = chosen.len();
    let total = (m * (m + 1) / 2) as f64;
    let mut scores: BTreeMap<ElementId, f64> = offered.iter().map(|&id| (id, 0.0)).collect();
    for (i, &id) in chosen.iter().enumerate() {
        scores.insert(id, (m - i) as f64 / total);
    }
    scores
}

/// Milestone rule over the active tree: every non-goal element validated,
/// mean validity at the threshold, and `quiet_answers` answers without a
/// structural change.
pub fn detect_milestone(tree: &SooTree, policy: &AggregationPolicy, quiet_answers: u64) -> bool {
    let members: Vec<_> = tree
        .active_elements()
        .filter(|e| e.kind != crate::model::ElementKind::Goal)
        .collect();
    if members.is_empty() {
        return false;
    }
    if members
        .iter()
        .any(|e| e.state != crate::model::ElementState::Validated)
    {
        return false;
    }
    let mean = members
        .iter()
        .map(|e| element_validity(&e.validity, policy))
        .sum::<f64>()
        / members.len() as f64;
    at_least(mean, policy.milestone_avg_validity) && quiet_answers >= policy.stability_window
}

/// Diagnostic stability of a parent's children: mean structure-confirm rate
/// times the share of child pairs not currently flagged as duplicates.
pub fn children_validity(
    tree: &SooTree,
    pairs: &BTreeMap<PairKey, PairStats>,
    parent: ElementId,
) -> f64 {
    let children: Vec<_> = tree.children_of(parent).collect();
    if children.is_empty() {
        return 0.0;
    }
    let structure =
        children.iter().map(|c| c.validity.structure_rate()).sum::<f64>() / children.len() as f64;
    let mut pair_count = 0usize;
    let mut flagged = 0usize;
    for (i, a) in children.iter().enumerate() {
        for b in &children[i + 1..] {
            pair_count += 1;
            if pairs
                .get(&PairKey::new(a.id, b.id))
                .is_some_and(|s| s.proposed && !s.resolved)
            {
                flagged += 1;
            }
        }
    }
    let unflagged = if pair_count == 0 {
        1.0
    } else {
        1.0 - flagged as f64 / pair_count as f64
    };
    structure * unflagged
}
