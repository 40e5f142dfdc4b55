//! The set-of-objectives tree: goal, objectives, criteria and indicators.
//!
//! Every element ever created stays in the tree. Removed and merged elements
//! are kept for traceability; only `Candidate` and `Validated` elements are
//! "active" and take part in structural invariants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(ElementId, "E");
id_type!(ParticipantId, "P");
id_type!(EiId, "EI");

/// Event sequence number; the first event of a log has seq 1.
pub type Seq = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Goal,
    Objective,
    Criterion,
    Indicator,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] = [
        ElementKind::Goal,
        ElementKind::Objective,
        ElementKind::Criterion,
        ElementKind::Indicator,
    ];

    /// Kind every element of this kind must hang under.
    pub fn parent_kind(self) -> Option<ElementKind> {
        match self {
            ElementKind::Goal => None,
            ElementKind::Objective => Some(ElementKind::Goal),
            ElementKind::Criterion => Some(ElementKind::Objective),
            ElementKind::Indicator => Some(ElementKind::Criterion),
        }
    }

    pub fn child_kind(self) -> Option<ElementKind> {
        match self {
            ElementKind::Goal => Some(ElementKind::Objective),
            ElementKind::Objective => Some(ElementKind::Criterion),
            ElementKind::Criterion => Some(ElementKind::Indicator),
            ElementKind::Indicator => None,
        }
    }

    pub fn noun(self) -> &'static str {
        match self {
            ElementKind::Goal => "goal",
            ElementKind::Objective => "objective",
            ElementKind::Criterion => "criterion",
            ElementKind::Indicator => "indicator",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            ElementKind::Goal => "goals",
            ElementKind::Objective => "objectives",
            ElementKind::Criterion => "criteria",
            ElementKind::Indicator => "indicators",
        }
    }

    /// Noun with its indefinite article ("an objective", "a criterion").
    pub fn with_article(self) -> String {
        let noun = self.noun();
        let article = if noun.starts_with(['a', 'e', 'i', 'o', 'u']) {
            "an"
        } else {
            "a"
        };
        format!("{article} {noun}")
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.noun())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementState {
    Candidate,
    Validated,
    Removed,
    MergedInto(ElementId),
}

impl ElementState {
    pub fn is_active(self) -> bool {
        matches!(self, ElementState::Candidate | ElementState::Validated)
    }

    /// Whether the lifecycle allows moving from `self` to `next`.
    ///
    /// `Validated -> Removed` is allowed here; callers only use it for
    /// merge/relocation bookkeeping.
    pub fn can_transition_to(self, next: ElementState) -> bool {
        use ElementState::*;
        matches!(
            (self, next),
            (Candidate | Validated, Removed | MergedInto(_)) | (Candidate, Validated)
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            ElementState::Candidate => "Candidate",
            ElementState::Validated => "Validated",
            ElementState::Removed => "Removed",
            ElementState::MergedInto(_) => "MergedInto",
        }
    }
}

/// Weighted tallies behind an element's validity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityRecord {
    pub confirm_weight: f64,
    pub reject_weight: f64,
    pub dont_know_count: u64,
    pub naming_weight: f64,
    pub structure_confirm_weight: f64,
    pub structure_relocate_weight: BTreeMap<ElementId, f64>,
    pub last_affecting_seq: Seq,
}

impl ValidityRecord {
    pub fn named(weight: f64, seq: Seq) -> Self {
        ValidityRecord {
            naming_weight: weight,
            last_affecting_seq: seq,
            ..Default::default()
        }
    }

    /// Confirmations plus naming support converted at `naming_unit`.
    pub fn effective_confirm(&self, naming_unit: f64) -> f64 {
        self.confirm_weight + self.naming_weight * naming_unit
    }

    /// Share of support among all non-abstaining evidence; 0 without evidence.
    pub fn rate(&self, naming_unit: f64) -> f64 {
        let support = self.effective_confirm(naming_unit);
        let total = support + self.reject_weight;
        if total > 0.0 {
            support / total
        } else {
            0.0
        }
    }

    pub fn reject_rate(&self, naming_unit: f64) -> f64 {
        let total = self.effective_confirm(naming_unit) + self.reject_weight;
        if total > 0.0 {
            self.reject_weight / total
        } else {
            0.0
        }
    }

    pub fn structure_total(&self) -> f64 {
        self.structure_confirm_weight + self.structure_relocate_weight.values().sum::<f64>()
    }

    /// Share of structural answers confirming the current parent.
    pub fn structure_rate(&self) -> f64 {
        let total = self.structure_total();
        if total > 0.0 {
            self.structure_confirm_weight / total
        } else {
            0.0
        }
    }

    /// Element-wise sum, used when several elements are merged into one.
    pub fn absorb(&mut self, other: &ValidityRecord) {
        self.confirm_weight += other.confirm_weight;
        self.reject_weight += other.reject_weight;
        self.dont_know_count += other.dont_know_count;
        self.naming_weight += other.naming_weight;
        self.structure_confirm_weight += other.structure_confirm_weight;
        for (parent, w) in &other.structure_relocate_weight {
            *self.structure_relocate_weight.entry(*parent).or_default() += w;
        }
        self.last_affecting_seq = self.last_affecting_seq.max(other.last_affecting_seq);
    }

    pub fn reset_structure(&mut self) {
        self.structure_confirm_weight = 0.0;
        self.structure_relocate_weight.clear();
    }
}

/// A free-text proposal (definition or common name) and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCandidate {
    pub text: String,
    pub record: ValidityRecord,
}

/// Adds `weight` of naming support for `text` to a list of text proposals,
/// folding normalized duplicates. Returns the index of the touched entry.
pub fn support_text(
    candidates: &mut Vec<TextCandidate>,
    text: &str,
    weight: f64,
    seq: Seq,
) -> usize {
    let key = normalize_name(text);
    if let Some(i) = candidates.iter().position(|c| normalize_name(&c.text) == key) {
        let record = &mut candidates[i].record;
        record.naming_weight += weight;
        record.last_affecting_seq = seq;
        i
    } else {
        candidates.push(TextCandidate {
            text: clean_name(text),
            record: ValidityRecord::named(weight, seq),
        });
        candidates.len() - 1
    }
}

/// Record of candidate `index` where every other proposal's support counts
/// against it.
pub fn competing_record(candidates: &[TextCandidate], index: usize) -> ValidityRecord {
    let mut record = candidates[index].record.clone();
    record.reject_weight += candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, c)| c.record.naming_weight + c.record.confirm_weight)
        .sum::<f64>();
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    pub kind: ElementKind,
    pub name: String,
    pub definition: Option<String>,
    pub definition_candidates: Vec<TextCandidate>,
    pub parent_id: Option<ElementId>,
    pub state: ElementState,
    pub validity: ValidityRecord,
    pub created_by: Option<ParticipantId>,
    pub created_at_seq: Seq,
}

impl Element {
    pub fn is_active(&self) -> bool {
        self.state.is_active()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Structure,
    Weighting,
    Assessed,
}

/// Priorities for every sibling group of a milestone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub weights: BTreeMap<ElementId, f64>,
    pub consistency_ratios: BTreeMap<ElementId, f64>,
}

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl WeightSet {
    /// Checks positivity and sum-to-one per sibling group; `parent_of` maps
    /// each weighted element to its parent.
    pub fn check(&self, parent_of: impl Fn(ElementId) -> Option<ElementId>) -> Result<(), String> {
        let mut sums: BTreeMap<Option<ElementId>, f64> = BTreeMap::new();
        for (&id, &w) in &self.weights {
            if !(w > 0.0 && w <= 1.0 + WEIGHT_SUM_TOLERANCE) {
                return Err(format!("weight of {id} is {w}, outside (0,1]"));
            }
            *sums.entry(parent_of(id)).or_default() += w;
        }
        for (parent, sum) in sums {
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                let parent = parent.map_or_else(|| "-".to_string(), |p| p.to_string());
                return Err(format!("children of {parent} sum to {sum}"));
            }
        }
        Ok(())
    }
}

/// One element as recorded in a canonical snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotElement {
    pub id: ElementId,
    pub kind: ElementKind,
    pub name: String,
    pub definition: Option<String>,
    pub parent: Option<ElementId>,
    pub state: ElementState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub id: u64,
    pub at_seq: Seq,
    pub snapshot: String,
    pub snapshot_hash: String,
    pub weights: Option<WeightSet>,
}

impl Milestone {
    pub fn elements(&self) -> Vec<SnapshotElement> {
        serde_json::from_str(&self.snapshot).expect("milestone snapshot is canonical JSON")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Benefit,
    Cost,
}

/// Min-max normalization of one indicator over the alternatives at hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub direction: Direction,
    pub min: f64,
    pub max: f64,
}

impl TransferFunction {
    pub fn fit(direction: Direction, values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        TransferFunction {
            direction,
            min,
            max,
        }
    }

    /// Maps a raw value into [0,1]. A degenerate range maps everything to 0.5.
    pub fn normalize(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if !(span > 0.0) {
            return 0.5;
        }
        let x = ((value - self.min) / span).clamp(0.0, 1.0);
        match self.direction {
            Direction::Benefit => x,
            Direction::Cost => 1.0 - x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("element name is empty")]
    EmptyName,
    #[error("parent {0} does not exist or is not active")]
    MissingParent(ElementId),
    #[error("a {child} cannot be placed under {parent:?}")]
    KindMismatch {
        child: ElementKind,
        parent: Option<ElementKind>,
    },
    #[error("the tree already has a goal")]
    DuplicateGoal,
    #[error("element {0} does not exist")]
    UnknownElement(ElementId),
}

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    caseless::default_case_fold_str(&clean_name(name))
}

/// Trims and collapses internal whitespace, keeping case.
pub fn clean_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Outcome of planning an insertion without touching the tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Insertion {
    Created(Element),
    /// An active sibling with the same normalized name absorbed the naming.
    Named { id: ElementId, record: ValidityRecord },
}

impl Insertion {
    pub fn id(&self) -> ElementId {
        match self {
            Insertion::Created(e) => e.id,
            Insertion::Named { id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "camelCase")]
pub enum Violation {
    MissingGoal,
    MultipleGoals { ids: Vec<ElementId> },
    GoalHasParent { id: ElementId },
    KindMismatch { id: ElementId },
    MissingParent { id: ElementId },
    InactiveParent { id: ElementId },
    Cycle { ids: Vec<ElementId> },
    DuplicateSiblingName { parent: ElementId, ids: Vec<ElementId> },
    EmptyName { id: ElementId },
    PhaseWithoutMilestone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SooTree {
    goal: Option<ElementId>,
    elements: BTreeMap<ElementId, Element>,
    phase: Phase,
    milestones: Vec<Milestone>,
    next_id: u64,
}

impl Default for SooTree {
    fn default() -> Self {
        SooTree::new()
    }
}

impl SooTree {
    pub fn new() -> Self {
        SooTree {
            goal: None,
            elements: BTreeMap::new(),
            phase: Phase::Structure,
            milestones: Vec::new(),
            next_id: 1,
        }
    }

    /// Builds a tree from raw elements without checking anything. Meant for
    /// tests and tooling that need to inspect malformed trees.
    pub fn from_elements_unchecked(elements: Vec<Element>, phase: Phase) -> Self {
        let goal = elements
            .iter()
            .find(|e| e.kind == ElementKind::Goal && e.is_active())
            .map(|e| e.id);
        let next_id = elements.iter().map(|e| e.id.0).max().unwrap_or(0) + 1;
        SooTree {
            goal,
            elements: elements.into_iter().map(|e| (e.id, e)).collect(),
            phase,
            milestones: Vec::new(),
            next_id,
        }
    }

    pub fn goal(&self) -> Option<ElementId> {
        self.goal
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn milestones(&self) -> &[Milestone] {
        &self.milestones
    }

    pub fn latest_milestone(&self) -> Option<&Milestone> {
        self.milestones.last()
    }

    pub fn get(&self, id: ElementId) -> Option<&Element> {
        self.elements.get(&id)
    }

    pub fn get_mut(&mut self, id: ElementId) -> Option<&mut Element> {
        self.elements.get_mut(&id)
    }

    pub fn active(&self, id: ElementId) -> Option<&Element> {
        self.elements.get(&id).filter(|e| e.is_active())
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn active_elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values().filter(|e| e.is_active())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn next_id(&self) -> ElementId {
        ElementId(self.next_id)
    }

    /// Follows merge markers to the element that currently stands for `id`.
    pub fn resolve_merged(&self, mut id: ElementId) -> ElementId {
        for _ in 0..self.elements.len() {
            match self.elements.get(&id).map(|e| e.state) {
                Some(ElementState::MergedInto(target)) => id = target,
                _ => break,
            }
        }
        id
    }

    /// Active children of `parent` in unspecified (id) order.
    pub fn children_of(&self, parent: ElementId) -> impl Iterator<Item = &Element> {
        self.elements
            .values()
            .filter(move |e| e.is_active() && e.parent_id == Some(parent))
    }

    /// Active children ordered by state (Validated first), descending
    /// validity rate, then id.
    pub fn active_children(&self, parent: ElementId) -> Result<Vec<&Element>, ModelError> {
        if !self.elements.contains_key(&parent) {
            return Err(ModelError::MissingParent(parent));
        }
        let mut children: Vec<&Element> = self.children_of(parent).collect();
        children.sort_by(|a, b| {
            let va = a.state == ElementState::Validated;
            let vb = b.state == ElementState::Validated;
            vb.cmp(&va)
                .then_with(|| b.validity.rate(1.0).total_cmp(&a.validity.rate(1.0)))
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(children)
    }

    /// Plans `insert_candidate` without mutating the tree.
    pub fn plan_insert(
        &self,
        kind: ElementKind,
        name: &str,
        parent: Option<ElementId>,
        creator: Option<ParticipantId>,
        weight: f64,
        seq: Seq,
    ) -> Result<Insertion, ModelError> {
        let clean = clean_name(name);
        if clean.is_empty() {
            return Err(ModelError::EmptyName);
        }
        if kind == ElementKind::Goal {
            if self.goal.is_some() {
                return Err(ModelError::DuplicateGoal);
            }
            if parent.is_some() {
                return Err(ModelError::KindMismatch {
                    child: kind,
                    parent: parent.and_then(|p| self.get(p)).map(|p| p.kind),
                });
            }
            return Ok(Insertion::Created(Element {
                id: self.next_id(),
                kind,
                name: clean,
                definition: None,
                definition_candidates: Vec::new(),
                parent_id: None,
                // The goal is set by initiators and never goes through
                // crowd validation.
                state: ElementState::Validated,
                validity: ValidityRecord::named(weight, seq),
                created_by: creator,
                created_at_seq: seq,
            }));
        }
        let Some(parent_id) = parent else {
            return Err(ModelError::KindMismatch {
                child: kind,
                parent: None,
            });
        };
        let parent_el = self
            .active(parent_id)
            .ok_or(ModelError::MissingParent(parent_id))?;
        if kind.parent_kind() != Some(parent_el.kind) {
            return Err(ModelError::KindMismatch {
                child: kind,
                parent: Some(parent_el.kind),
            });
        }
        let key = normalize_name(&clean);
        if let Some(existing) = self
            .children_of(parent_id)
            .find(|e| normalize_name(&e.name) == key)
        {
            let mut record = existing.validity.clone();
            record.naming_weight += weight;
            record.last_affecting_seq = seq;
            return Ok(Insertion::Named {
                id: existing.id,
                record,
            });
        }
        Ok(Insertion::Created(Element {
            id: self.next_id(),
            kind,
            name: clean,
            definition: None,
            definition_candidates: Vec::new(),
            parent_id: Some(parent_id),
            state: ElementState::Candidate,
            validity: ValidityRecord::named(weight, seq),
            created_by: creator,
            created_at_seq: seq,
        }))
    }

    /// Adds a named element, or credits the naming to an existing sibling
    /// with the same normalized name.
    pub fn insert_candidate(
        &mut self,
        kind: ElementKind,
        name: &str,
        parent: Option<ElementId>,
        creator: Option<ParticipantId>,
        weight: f64,
        seq: Seq,
    ) -> Result<ElementId, ModelError> {
        let plan = self.plan_insert(kind, name, parent, creator, weight, seq)?;
        let id = plan.id();
        match plan {
            Insertion::Created(element) => self.add_element(element),
            Insertion::Named { id, record } => self.set_validity(id, record)?,
        }
        Ok(id)
    }

    /// Inserts a fully formed element (used when folding events).
    pub fn add_element(&mut self, element: Element) {
        if element.kind == ElementKind::Goal && element.is_active() {
            self.goal = Some(element.id);
        }
        self.next_id = self.next_id.max(element.id.0 + 1);
        self.elements.insert(element.id, element);
    }

    pub fn set_validity(&mut self, id: ElementId, record: ValidityRecord) -> Result<(), ModelError> {
        let element = self
            .elements
            .get_mut(&id)
            .ok_or(ModelError::UnknownElement(id))?;
        element.validity = record;
        Ok(())
    }

    /// Moves an element along its lifecycle. Invalid transitions are
    /// ignored and reported as `false`.
    pub fn set_state(&mut self, id: ElementId, state: ElementState) -> bool {
        match self.elements.get_mut(&id) {
            Some(e) if e.state.can_transition_to(state) => {
                e.state = state;
                true
            }
            _ => false,
        }
    }

    /// Re-parents an element, enforcing kind rules against the new parent.
    pub fn reparent(&mut self, id: ElementId, parent: ElementId) -> Result<(), ModelError> {
        let kind = self.get(id).ok_or(ModelError::UnknownElement(id))?.kind;
        let parent_kind = self
            .active(parent)
            .ok_or(ModelError::MissingParent(parent))?
            .kind;
        if kind.parent_kind() != Some(parent_kind) {
            return Err(ModelError::KindMismatch {
                child: kind,
                parent: Some(parent_kind),
            });
        }
        self.elements.get_mut(&id).expect("checked above").parent_id = Some(parent);
        Ok(())
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn push_milestone(&mut self, milestone: Milestone) {
        self.milestones.push(milestone);
        self.phase = Phase::Weighting;
    }

    pub fn attach_weights(&mut self, milestone_id: u64, weights: WeightSet) -> bool {
        match self.milestones.iter_mut().find(|m| m.id == milestone_id) {
            Some(m) => {
                m.weights = Some(weights);
                self.phase = Phase::Assessed;
                true
            }
            None => false,
        }
    }

    /// Ids of the active ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: ElementId) -> Vec<ElementId> {
        let mut out = Vec::new();
        let mut cur = self.get(id).and_then(|e| e.parent_id);
        while let Some(p) = cur {
            if out.contains(&p) || out.len() > self.elements.len() {
                break;
            }
            out.push(p);
            cur = self.get(p).and_then(|e| e.parent_id);
        }
        out
    }

    /// Every structural rule that does not hold, as data.
    pub fn check_structure(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let goals: Vec<ElementId> = self
            .active_elements()
            .filter(|e| e.kind == ElementKind::Goal)
            .map(|e| e.id)
            .collect();
        match goals.len() {
            0 if !self.elements.is_empty() => out.push(Violation::MissingGoal),
            0 | 1 => {}
            _ => out.push(Violation::MultipleGoals { ids: goals }),
        }

        for e in self.active_elements() {
            if e.name.trim().is_empty() {
                out.push(Violation::EmptyName { id: e.id });
            }
            match (e.kind, e.parent_id) {
                (ElementKind::Goal, Some(_)) => out.push(Violation::GoalHasParent { id: e.id }),
                (ElementKind::Goal, None) => {}
                (_, None) => out.push(Violation::MissingParent { id: e.id }),
                (kind, Some(p)) => match self.get(p) {
                    None => out.push(Violation::MissingParent { id: e.id }),
                    Some(parent) => {
                        if !parent.is_active() {
                            out.push(Violation::InactiveParent { id: e.id });
                        }
                        if kind.parent_kind() != Some(parent.kind) {
                            out.push(Violation::KindMismatch { id: e.id });
                        }
                    }
                },
            }
        }

        // Cycles among active parent links.
        let mut seen_cycles: BTreeSet<Vec<ElementId>> = BTreeSet::new();
        for start in self.active_elements() {
            let mut path = vec![start.id];
            let mut cur = start.parent_id;
            while let Some(p) = cur {
                if let Some(pos) = path.iter().position(|&x| x == p) {
                    let mut cycle = path[pos..].to_vec();
                    cycle.sort();
                    seen_cycles.insert(cycle);
                    break;
                }
                match self.active(p) {
                    Some(parent) => {
                        path.push(p);
                        cur = parent.parent_id;
                    }
                    None => break,
                }
            }
        }
        out.extend(seen_cycles.into_iter().map(|ids| Violation::Cycle { ids }));

        let mut by_name: BTreeMap<(ElementId, String), Vec<ElementId>> = BTreeMap::new();
        for e in self.active_elements() {
            if let Some(p) = e.parent_id {
                by_name
                    .entry((p, normalize_name(&e.name)))
                    .or_default()
                    .push(e.id);
            }
        }
        for ((parent, _), ids) in by_name {
            if ids.len() > 1 {
                out.push(Violation::DuplicateSiblingName { parent, ids });
            }
        }

        if self.phase != Phase::Structure && self.milestones.is_empty() {
            out.push(Violation::PhaseWithoutMilestone);
        }
        out
    }

    /// Canonical elements of the active tree, sorted by id.
    pub fn snapshot_elements(&self) -> Vec<SnapshotElement> {
        self.active_elements()
            .map(|e| SnapshotElement {
                id: e.id,
                kind: e.kind,
                name: e.name.clone(),
                definition: e.definition.clone(),
                parent: e.parent_id,
                state: e.state,
            })
            .collect()
    }

    /// Canonical sorted-key UTF-8 bytes of the active tree and their SHA-256.
    pub fn snapshot(&self) -> (Vec<u8>, String) {
        canonical_with_hash(&self.snapshot_elements())
    }
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted, so
/// the byte form depends only on the value.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("model types serialize to JSON");
    serde_json::to_vec(&value).expect("JSON values serialize")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn canonical_with_hash<T: Serialize>(value: &T) -> (Vec<u8>, String) {
    let bytes = canonical_json(value);
    let hash = sha256_hex(&bytes);
    (bytes, hash)
}
