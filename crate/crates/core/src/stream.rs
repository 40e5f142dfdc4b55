//! EI stream generator: finds information gaps in the current tree, turns
//! them into question instances and picks a semi-random, non-repeating
//! stream for one participant.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregator::{AggregationPolicy, Judgment, PairKey, PairStats};
use crate::catalog::{render_question, EiInstance, EiOption, EiType, Prompt};
use crate::model::{
    EiId, Element, ElementId, ElementKind, ElementState, Phase, Seq, SooTree,
};
use crate::participants::{Participant, SelfEstimation, StakeholderGroup};

/// One unit of missing information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "gap", rename_all = "camelCase")]
pub enum GapItem {
    MissingChildren { parent: ElementId, kind: ElementKind },
    PendingValidation { element: ElementId },
    /// Sibling group with candidates that a ranking question can support.
    RankableGroup { parent: ElementId },
    UncheckedPair { a: ElementId, b: ElementId },
    PendingMerge { a: ElementId, b: ElementId },
    StructureCheck { element: ElementId },
    PendingPairwise { parent: ElementId, a: ElementId, b: ElementId },
    DefinitionGap { element: ElementId },
}

impl GapItem {
    pub fn class(&self) -> GapClass {
        match self {
            GapItem::MissingChildren { .. } => GapClass::MissingChildren,
            GapItem::PendingValidation { .. } => GapClass::PendingValidation,
            GapItem::RankableGroup { .. } => GapClass::RankableGroup,
            GapItem::UncheckedPair { .. } => GapClass::UncheckedPair,
            GapItem::PendingMerge { .. } => GapClass::PendingMerge,
            GapItem::StructureCheck { .. } => GapClass::StructureCheck,
            GapItem::PendingPairwise { .. } => GapClass::PendingPairwise,
            GapItem::DefinitionGap { .. } => GapClass::DefinitionGap,
        }
    }

    pub fn ei_type(&self) -> EiType {
        match self {
            GapItem::MissingChildren { .. } | GapItem::DefinitionGap { .. } => EiType::Name,
            GapItem::PendingValidation { .. } => EiType::Confirm,
            GapItem::RankableGroup { .. } => EiType::ChooseSetBased,
            GapItem::UncheckedPair { .. } => EiType::IdentifyDuplicates,
            GapItem::PendingMerge { .. } => EiType::DetermineCommonName,
            GapItem::StructureCheck { .. } => EiType::SelectParentElement,
            GapItem::PendingPairwise { .. } => EiType::PrioritizePairwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GapClass {
    MissingChildren,
    PendingValidation,
    RankableGroup,
    UncheckedPair,
    PendingMerge,
    StructureCheck,
    PendingPairwise,
    DefinitionGap,
}

/// A gap and how close it is to being closed, in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub item: GapItem,
    pub progress: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapReport {
    pub missing_children: Vec<GapEntry>,
    pub pending_validations: Vec<GapEntry>,
    pub rankable_groups: Vec<GapEntry>,
    pub unchecked_pairs: Vec<GapEntry>,
    pub pending_merges: Vec<GapEntry>,
    pub structure_checks: Vec<GapEntry>,
    pub pending_pairwise: Vec<GapEntry>,
    pub definition_gaps: Vec<GapEntry>,
}

impl GapReport {
    pub fn entries(&self) -> impl Iterator<Item = &GapEntry> {
        self.missing_children
            .iter()
            .chain(&self.pending_validations)
            .chain(&self.rankable_groups)
            .chain(&self.unchecked_pairs)
            .chain(&self.pending_merges)
            .chain(&self.structure_checks)
            .chain(&self.pending_pairwise)
            .chain(&self.definition_gaps)
    }

    pub fn is_empty(&self) -> bool {
        self.entries().next().is_none()
    }

    pub fn contains(&self, item: &GapItem) -> bool {
        self.entries().any(|e| e.item == *item)
    }

    /// Gaps that still change the structure: naming, validation, duplicate
    /// checks and merges.
    pub fn structure_open(&self) -> bool {
        !(self.missing_children.is_empty()
            && self.pending_validations.is_empty()
            && self.unchecked_pairs.is_empty()
            && self.pending_merges.is_empty())
    }
}

/// Everything gap analysis reads.
#[derive(Debug, Clone, Copy)]
pub struct GapInputs<'a> {
    pub tree: &'a SooTree,
    pub pairs: &'a BTreeMap<PairKey, PairStats>,
    /// Child-naming answers received per parent.
    pub naming_counts: &'a BTreeMap<ElementId, u64>,
    pub judgments: &'a BTreeMap<PairKey, Vec<Judgment>>,
    pub policy: &'a AggregationPolicy,
}

fn progress(value: f64, target: f64) -> f64 {
    if target > 0.0 {
        (value / target).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

fn validated(tree: &SooTree, id: ElementId) -> bool {
    tree.active(id).is_some_and(|e| e.state == ElementState::Validated)
}

fn sibling_pairs(ids: &[ElementId]) -> Vec<PairKey> {
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            out.push(PairKey::new(a, b));
        }
    }
    out
}

/// Validated elements that could host `element`, current parent included.
pub fn parent_options(tree: &SooTree, element: &Element) -> Vec<ElementId> {
    crate::catalog::possible_parents(tree, element)
}

/// Every open gap, grouped by class and ordered by element id.
pub fn analyze_gaps(inputs: &GapInputs<'_>) -> GapReport {
    let GapInputs {
        tree,
        pairs,
        naming_counts,
        judgments,
        policy,
    } = *inputs;
    let mut report = GapReport::default();
    let phase = tree.phase();

    for e in tree.active_elements() {
        if phase == Phase::Structure {
            if e.state == ElementState::Validated {
                if let Some(kind) = e.kind.child_kind() {
                    let named = naming_counts.get(&e.id).copied().unwrap_or(0);
                    let has_children = tree.children_of(e.id).next().is_some();
                    if named < policy.naming_quota || !has_children {
                        report.missing_children.push(GapEntry {
                            item: GapItem::MissingChildren { parent: e.id, kind },
                            progress: progress(named as f64, policy.naming_quota as f64),
                        });
                    }
                }
                if e.kind != ElementKind::Goal
                    && parent_options(tree, e).len() >= 2
                    && !crate::aggregator::at_least(
                        e.validity.structure_total(),
                        policy.min_structure_weight,
                    )
                {
                    report.structure_checks.push(GapEntry {
                        item: GapItem::StructureCheck { element: e.id },
                        progress: progress(e.validity.structure_total(), policy.min_structure_weight),
                    });
                }
            }
            if e.state == ElementState::Candidate {
                report.pending_validations.push(GapEntry {
                    item: GapItem::PendingValidation { element: e.id },
                    progress: progress(
                        e.validity.effective_confirm(policy.naming_unit),
                        policy.min_confirm_weight,
                    ),
                });
            }
        }
        if e.state == ElementState::Validated && e.kind != ElementKind::Goal && e.definition.is_none()
        {
            let best = e
                .definition_candidates
                .iter()
                .map(|c| c.record.effective_confirm(policy.naming_unit))
                .fold(0.0, f64::max);
            report.definition_gaps.push(GapEntry {
                item: GapItem::DefinitionGap { element: e.id },
                progress: progress(best, policy.common_name_min_weight),
            });
        }
    }

    if phase == Phase::Structure {
        for (parent, children) in crate::catalog::sibling_groups(tree) {
            if children.len() >= 3
                && children
                    .iter()
                    .any(|&c| tree.get(c).is_some_and(|e| e.state == ElementState::Candidate))
            {
                let validated_share = children.iter().filter(|&&c| validated(tree, c)).count()
                    as f64
                    / children.len() as f64;
                report.rankable_groups.push(GapEntry {
                    item: GapItem::RankableGroup { parent },
                    progress: validated_share,
                });
            }
            let checked: Vec<ElementId> =
                children.iter().copied().filter(|&c| validated(tree, c)).collect();
            for key in sibling_pairs(&checked) {
                let stats = pairs.get(&key);
                if stats.is_some_and(|s| s.resolved) {
                    continue;
                }
                if stats.is_some_and(|s| s.proposed) {
                    let best = stats
                        .map(|s| {
                            s.name_candidates
                                .iter()
                                .map(|c| c.record.effective_confirm(policy.naming_unit))
                                .fold(0.0, f64::max)
                        })
                        .unwrap_or(0.0);
                    report.pending_merges.push(GapEntry {
                        item: GapItem::PendingMerge { a: key.a, b: key.b },
                        progress: progress(best, policy.common_name_min_weight),
                    });
                } else {
                    let total = stats.map_or(0.0, |s| s.total());
                    report.unchecked_pairs.push(GapEntry {
                        item: GapItem::UncheckedPair { a: key.a, b: key.b },
                        progress: progress(total, policy.min_duplicate_answers),
                    });
                }
            }
        }
    }

    if phase == Phase::Weighting {
        for (parent, members) in milestone_groups(tree) {
            for key in sibling_pairs(&members) {
                let weight = pairwise_weight(judgments, key);
                if !crate::aggregator::at_least(weight, policy.min_pairwise_weight) {
                    report.pending_pairwise.push(GapEntry {
                        item: GapItem::PendingPairwise {
                            parent,
                            a: key.a,
                            b: key.b,
                        },
                        progress: progress(weight, policy.min_pairwise_weight),
                    });
                }
            }
        }
    }

    for list in [
        &mut report.missing_children,
        &mut report.pending_validations,
        &mut report.rankable_groups,
        &mut report.unchecked_pairs,
        &mut report.pending_merges,
        &mut report.structure_checks,
        &mut report.pending_pairwise,
        &mut report.definition_gaps,
    ] {
        list.sort_by(|x, y| x.item.cmp(&y.item));
    }
    report
}

/// Total judgment weight recorded for a pair.
pub fn pairwise_weight(judgments: &BTreeMap<PairKey, Vec<Judgment>>, key: PairKey) -> f64 {
    judgments
        .get(&key)
        .map_or(0.0, |js| js.iter().map(|j| j.weight).sum())
}

/// Sibling groups of the latest milestone whose members are still active,
/// keyed by parent. Members are sorted by id.
pub fn milestone_groups(tree: &SooTree) -> BTreeMap<ElementId, Vec<ElementId>> {
    let mut groups: BTreeMap<ElementId, Vec<ElementId>> = BTreeMap::new();
    let Some(milestone) = tree.latest_milestone() else {
        return groups;
    };
    for e in milestone.elements() {
        if let Some(parent) = e.parent {
            if e.state == ElementState::Validated && tree.active(e.id).is_some() {
                groups.entry(parent).or_default().push(e.id);
            }
        }
    }
    for members in groups.values_mut() {
        members.sort();
    }
    groups
}

/// Base priorities per gap class. A closeness bonus below 1 is added on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GapPriorities {
    pub pending_merges: f64,
    pub pending_validations: f64,
    pub missing_children: f64,
    pub unchecked_pairs: f64,
    pub rankable_groups: f64,
    pub structure_checks: f64,
    pub definition_gaps: f64,
    pub pending_pairwise: f64,
}

impl Default for GapPriorities {
    fn default() -> Self {
        GapPriorities {
            pending_merges: 5.0,
            pending_validations: 4.0,
            missing_children: 3.0,
            unchecked_pairs: 2.0,
            rankable_groups: 2.0,
            structure_checks: 1.0,
            definition_gaps: 1.0,
            pending_pairwise: 4.0,
        }
    }
}

impl GapPriorities {
    pub fn base(&self, class: GapClass) -> f64 {
        match class {
            GapClass::MissingChildren => self.missing_children,
            GapClass::PendingValidation => self.pending_validations,
            GapClass::RankableGroup => self.rankable_groups,
            GapClass::UncheckedPair => self.unchecked_pairs,
            GapClass::PendingMerge => self.pending_merges,
            GapClass::StructureCheck => self.structure_checks,
            GapClass::PendingPairwise => self.pending_pairwise,
            GapClass::DefinitionGap => self.definition_gaps,
        }
    }
}

pub const BONUS_SCALE: f64 = 0.99;

/// Stream generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct StreamConfig {
    pub priorities: GapPriorities,
    /// Minimum competency for creative (naming) interactions.
    pub competency_gate: f64,
    pub page_default: usize,
    pub page_max: usize,
    /// Restricts interaction types to stakeholder groups. Types not listed
    /// are open to everyone.
    pub stakeholder_rules: BTreeMap<EiType, BTreeSet<StakeholderGroup>>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            priorities: GapPriorities::default(),
            competency_gate: 0.5,
            page_default: 10,
            page_max: 20,
            stakeholder_rules: BTreeMap::new(),
        }
    }
}

impl StreamConfig {
    pub fn priority(&self, entry: &GapEntry) -> f64 {
        self.priorities.base(entry.item.class()) + BONUS_SCALE * entry.progress.clamp(0.0, 1.0)
    }
}

/// Renders the question for a gap against the current tree. `None` when a
/// referenced element is gone.
pub fn draft_instance(
    tree: &SooTree,
    item: &GapItem,
    policy: &AggregationPolicy,
    config: &StreamConfig,
) -> Option<EiInstance> {
    let get = |id: ElementId| tree.active(id);
    let parent_of = |e: &Element| e.parent_id.and_then(|p| tree.get(p));
    let ei_type = item.ei_type();
    let mut cap = None;
    let (targets, prompt): (Vec<&Element>, Prompt<'_>) = match *item {
        GapItem::MissingChildren { parent, kind } => {
            let p = get(parent)?;
            (
                vec![p],
                Prompt {
                    targets: vec![p],
                    child_kind: Some(kind),
                    ..Default::default()
                },
            )
        }
        GapItem::DefinitionGap { element } | GapItem::PendingValidation { element } => {
            let e = get(element)?;
            (
                vec![e],
                Prompt {
                    targets: vec![e],
                    parent: parent_of(e),
                    ..Default::default()
                },
            )
        }
        GapItem::RankableGroup { parent } => {
            let p = get(parent)?;
            let mut kids: Vec<&Element> = tree.children_of(parent).collect();
            kids.sort_by_key(|e| e.id);
            cap = Some(policy.set_cap.min(kids.len()));
            (
                kids.clone(),
                Prompt {
                    targets: kids,
                    parent: Some(p),
                    ..Default::default()
                },
            )
        }
        GapItem::UncheckedPair { a, b }
        | GapItem::PendingMerge { a, b }
        | GapItem::PendingPairwise { a, b, .. } => {
            let (ea, eb) = (get(a)?, get(b)?);
            (
                vec![ea, eb],
                Prompt {
                    targets: vec![ea, eb],
                    parent: parent_of(ea),
                    ..Default::default()
                },
            )
        }
        GapItem::StructureCheck { element } => {
            let e = get(element)?;
            let alternatives: Vec<&Element> = parent_options(tree, e)
                .into_iter()
                .filter_map(|id| tree.get(id))
                .collect();
            (
                vec![e],
                Prompt {
                    targets: vec![e],
                    parent: parent_of(e),
                    alternatives,
                    ..Default::default()
                },
            )
        }
    };
    let (question_text, options): (String, Vec<EiOption>) =
        render_question(ei_type, &prompt, cap).ok()?;
    let stakeholder_tags = config
        .stakeholder_rules
        .get(&ei_type)
        .map(|groups| groups.iter().copied().collect())
        .unwrap_or_default();
    Some(EiInstance {
        id: EiId(0),
        ei_type,
        targets: targets.iter().map(|e| e.id).collect(),
        cap,
        question_text,
        options,
        gap: *item,
        stakeholder_tags,
        created_at_seq: 0,
    })
}

/// Same question, ignoring identity and issue time.
pub fn same_question(a: &EiInstance, b: &EiInstance) -> bool {
    a.ei_type == b.ei_type
        && a.targets == b.targets
        && a.cap == b.cap
        && a.question_text == b.question_text
        && a.options == b.options
        && a.gap == b.gap
        && a.stakeholder_tags == b.stakeholder_tags
}

/// New instances for every gap not covered by an open instance. `open` maps
/// each gap to the instance most recently issued for it; ids are assigned
/// from `next_id` upwards.
pub fn generate_instances(
    report: &GapReport,
    tree: &SooTree,
    policy: &AggregationPolicy,
    config: &StreamConfig,
    open: &BTreeMap<GapItem, EiInstance>,
    next_id: EiId,
    seq: Seq,
) -> Vec<(EiInstance, f64)> {
    let mut out = Vec::new();
    let mut id = next_id.0;
    for entry in report.entries() {
        let Some(mut draft) = draft_instance(tree, &entry.item, policy, config) else {
            continue;
        };
        if open.get(&entry.item).is_some_and(|o| same_question(o, &draft)) {
            continue;
        }
        draft.id = EiId(id);
        draft.created_at_seq = seq;
        id += 1;
        out.push((draft, config.priority(entry)));
    }
    out
}

/// Open instances for the gaps in `report`, with their current priority.
pub fn open_instances<'a>(
    report: &GapReport,
    tree: &SooTree,
    policy: &AggregationPolicy,
    config: &StreamConfig,
    open: &'a BTreeMap<GapItem, EiInstance>,
) -> Vec<(&'a EiInstance, f64)> {
    report
        .entries()
        .filter_map(|entry| {
            let issued = open.get(&entry.item)?;
            let draft = draft_instance(tree, &entry.item, policy, config)?;
            same_question(issued, &draft).then(|| (issued, config.priority(entry)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StreamRequest {
    pub participant_id: crate::model::ParticipantId,
    pub count: usize,
    pub seed: u64,
}

/// Whether `participant` may receive `instance` at all.
pub fn eligible(instance: &EiInstance, participant: &Participant, config: &StreamConfig) -> bool {
    if instance.ei_type.is_creative()
        && (participant.competency < config.competency_gate
            || participant.self_estimation == SelfEstimation::EndUser)
    {
        return false;
    }
    instance.stakeholder_tags.is_empty()
        || instance.stakeholder_tags.contains(&participant.stakeholder_group)
}

/// Generator for one participant's stream request.
pub fn stream_rng(seed: u64, participant: crate::model::ParticipantId) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&participant.0.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Drops answered and ineligible instances, then samples without
/// replacement with probability proportional to priority.
pub fn select_stream(
    candidates: &[(&EiInstance, f64)],
    participant: &Participant,
    history: &BTreeSet<EiId>,
    req: &StreamRequest,
    config: &StreamConfig,
) -> Vec<EiInstance> {
    let count = req.count.min(config.page_max);
    let mut rng = stream_rng(req.seed, req.participant_id);
    // Weighted sampling without replacement: the largest keys u^(1/w) win.
    let mut keyed: Vec<(f64, EiId, &EiInstance)> = candidates
        .iter()
        .filter(|(i, p)| *p > 0.0 && !history.contains(&i.id) && eligible(i, participant, config))
        .map(|&(i, p)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / p, i.id, i)
        })
        .collect();
    keyed.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    keyed
        .into_iter()
        .take(count)
        .map(|(_, _, i)| i.clone())
        .collect()
}
