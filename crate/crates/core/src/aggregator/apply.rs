//! Decisions: which derived events follow from an answer, and which
//! follow-up events (merges, milestones, weights) are due.

use std::collections::BTreeMap;

use super::{
    borda_scores, build_pairwise_matrix, consistency_ratio, derive_weights, detect_milestone,
    plan_merge, propose_merge, resolve_parent, resolve_text_candidate, resolve_validation,
    ParentDecision, PairKey, Resolution,
};
use crate::catalog::{Answer, AnswerPayload, Choice, EiInstance, ParentChoice};
use crate::events::{EventPayload, ReputationChange, ValidityTarget};
use crate::model::{
    competing_record, normalize_name, support_text, ElementId, ElementKind, ElementState,
    Insertion, Milestone, ParticipantId, Phase, Seq, ValidityRecord, WeightSet,
};
use crate::participants::{update_reputation, Outcome};
use crate::state::PlatformState;
use crate::stream::{analyze_gaps, milestone_groups, GapItem};

struct Decider<'a> {
    state: &'a PlatformState,
    /// Reputation values already changed by earlier events of this batch.
    reputations: BTreeMap<ParticipantId, f64>,
    out: Vec<EventPayload>,
}

impl<'a> Decider<'a> {
    fn new(state: &'a PlatformState) -> Self {
        Decider {
            state,
            reputations: BTreeMap::new(),
            out: Vec::new(),
        }
    }

    /// Reputation updates for everyone who voted; `Yes` agrees iff
    /// `yes_won`. Abstentions are left alone.
    fn reputation(&mut self, votes: &[(ParticipantId, Choice)], yes_won: bool) -> Vec<ReputationChange> {
        let mut changes = Vec::new();
        for &(pid, choice) in votes {
            let outcome = match (choice, yes_won) {
                (Choice::DontKnow, _) => continue,
                (Choice::Yes, true) | (Choice::No, false) => Outcome::Agreed,
                _ => Outcome::Disagreed,
            };
            let Some(current) = self
                .reputations
                .get(&pid)
                .copied()
                .or_else(|| self.state.participants.get(&pid).map(|p| p.reputation))
            else {
                continue;
            };
            let reputation = update_reputation(current, outcome);
            self.reputations.insert(pid, reputation);
            changes.push(ReputationChange {
                participant_id: pid,
                outcome,
                reputation,
            });
        }
        changes
    }

    fn update_element(&mut self, id: ElementId, record: ValidityRecord) {
        let candidate = self
            .state
            .tree
            .get(id)
            .is_some_and(|e| e.state == ElementState::Candidate);
        let resolution = resolve_validation(&record, &self.state.policy);
        self.out.push(EventPayload::ValidityUpdated {
            target: ValidityTarget::Element { id, record },
        });
        if !candidate {
            return;
        }
        let votes = self
            .state
            .confirm_votes
            .get(&id)
            .cloned()
            .unwrap_or_default();
        match resolution {
            Resolution::Validated => {
                let reputation = self.reputation(&votes, true);
                self.out.push(EventPayload::ElementValidated {
                    element: id,
                    reputation,
                });
            }
            Resolution::Removed => {
                let reputation = self.reputation(&votes, false);
                self.out.push(EventPayload::ElementRemoved {
                    element: id,
                    reputation,
                });
            }
            Resolution::Pending => {}
        }
    }

    fn insert(&mut self, answer: &Answer, kind: ElementKind, text: &str, parent: Option<ElementId>, weight: f64) {
        let seq = answer.at_seq;
        match self.state.tree.plan_insert(
            kind,
            text,
            parent,
            Some(answer.participant_id),
            weight,
            seq,
        ) {
            Ok(Insertion::Created(element)) => {
                let id = element.id;
                let record = element.validity.clone();
                let validates = resolve_validation(&record, &self.state.policy) == Resolution::Validated;
                self.out.push(EventPayload::ElementCreated { element });
                if validates {
                    let reputation = Vec::new();
                    self.out.push(EventPayload::ElementValidated {
                        element: id,
                        reputation,
                    });
                }
            }
            Ok(Insertion::Named { id, record }) => self.update_element(id, record),
            Err(e) => self.audit(answer, e.to_string()),
        }
    }

    fn audit(&mut self, answer: &Answer, reason: String) {
        self.out.push(EventPayload::StaleAnswerAudited {
            ei_id: answer.ei_id,
            participant_id: answer.participant_id,
            reason,
        });
    }
}

fn pair_of(instance: &EiInstance) -> Option<PairKey> {
    match instance.targets[..] {
        [a, b] => Some(PairKey::new(a, b)),
        _ => None,
    }
}

/// Derived events for an answer whose `AnswerSubmitted` event has already
/// been folded into `state`. `weight` is the answer's weight.
pub fn apply_answer(state: &PlatformState, answer: &Answer, weight: f64) -> Vec<EventPayload> {
    let mut d = Decider::new(state);
    let Some(instance) = state.instances.get(&answer.ei_id) else {
        d.audit(answer, "unknown instance".into());
        return d.out;
    };
    let tree = &state.tree;
    let policy = &state.policy;
    let seq = answer.at_seq;

    if let Some(gone) = instance.targets.iter().find(|&&t| tree.active(t).is_none()) {
        d.audit(answer, format!("target {gone} is no longer active"));
        return d.out;
    }
    let definition = matches!(instance.gap, GapItem::DefinitionGap { .. });
    let frozen = tree.phase() != Phase::Structure;
    if frozen && !definition && instance.ei_type != crate::catalog::EiType::PrioritizePairwise {
        d.audit(answer, "structure is frozen by a milestone".into());
        return d.out;
    }

    match (&answer.payload, instance.gap) {
        (AnswerPayload::Name { text }, GapItem::MissingChildren { parent, kind }) => {
            d.insert(answer, kind, text, Some(parent), weight);
        }
        (AnswerPayload::Name { text }, GapItem::DefinitionGap { element }) => {
            let e = tree.get(element).expect("target checked active");
            let mut candidates = e.definition_candidates.clone();
            let i = support_text(&mut candidates, text, weight, seq);
            let adopted = e.definition.is_none()
                && resolve_text_candidate(&competing_record(&candidates, i), policy)
                    == Resolution::Validated;
            let chosen = candidates[i].text.clone();
            d.out.push(EventPayload::ValidityUpdated {
                target: ValidityTarget::Definitions {
                    element,
                    candidates,
                },
            });
            if adopted {
                d.out.push(EventPayload::DefinitionAdopted {
                    element,
                    text: chosen,
                });
            }
        }
        (AnswerPayload::Confirm { choice }, _) => {
            let id = instance.targets[0];
            let mut record = tree.get(id).expect("target checked active").validity.clone();
            match choice {
                Choice::Yes => record.confirm_weight += weight,
                Choice::No => record.reject_weight += weight,
                Choice::DontKnow => record.dont_know_count += 1,
            }
            record.last_affecting_seq = seq;
            d.update_element(id, record);
        }
        (AnswerPayload::PrioritizePairwise { .. }, _) => {
            // The judgment itself is part of the folded answer.
        }
        (AnswerPayload::ChooseSetBased { chosen }, _) => {
            for (id, score) in borda_scores(chosen, &instance.targets) {
                if score <= 0.0 {
                    continue;
                }
                let mut record = tree.get(id).expect("target checked active").validity.clone();
                record.confirm_weight += score * weight;
                record.last_affecting_seq = seq;
                d.update_element(id, record);
            }
        }
        (AnswerPayload::IdentifyDuplicates { answer: a }, _) => {
            let Some(key) = pair_of(instance) else {
                d.audit(answer, "duplicate question without a pair".into());
                return d.out;
            };
            let mut stats = state.pairs.get(&key).cloned().unwrap_or_default();
            match a.binarized() {
                Choice::Yes => stats.yes_weight += weight,
                Choice::No => stats.no_weight += weight,
                Choice::DontKnow => stats.dont_know_count += 1,
            }
            let open = !stats.proposed && !stats.resolved;
            let propose = open && propose_merge(&stats, policy);
            if open && !propose && super::at_least(stats.total(), policy.min_duplicate_answers) {
                // Enough answers and not similar enough: judged distinct.
                stats.resolved = true;
            }
            d.out.push(EventPayload::ValidityUpdated {
                target: ValidityTarget::Pair { pair: key, stats },
            });
            if propose {
                d.out.push(EventPayload::MergeProposed { pair: key });
            }
        }
        (AnswerPayload::DetermineCommonName { text }, _) => {
            let Some(key) = pair_of(instance) else {
                d.audit(answer, "common-name question without a pair".into());
                return d.out;
            };
            let mut stats = state.pairs.get(&key).cloned().unwrap_or_default();
            support_text(&mut stats.name_candidates, text, weight, seq);
            d.out.push(EventPayload::ValidityUpdated {
                target: ValidityTarget::Pair { pair: key, stats },
            });
        }
        (AnswerPayload::SelectParentElement { choice }, _) => {
            let id = instance.targets[0];
            let e = tree.get(id).expect("target checked active");
            match choice {
                ParentChoice::Existing(p) => {
                    let mut record = e.validity.clone();
                    if Some(*p) == e.parent_id {
                        record.structure_confirm_weight += weight;
                    } else {
                        *record.structure_relocate_weight.entry(*p).or_default() += weight;
                    }
                    record.last_affecting_seq = seq;
                    let decision = resolve_parent(&record, policy);
                    match decision {
                        ParentDecision::Relocate(to) if Some(to) != e.parent_id => {
                            let key = normalize_name(&e.name);
                            let fits = tree.active(to).is_some_and(|p| {
                                Some(p.kind) == e.kind.parent_kind()
                                    && p.state == ElementState::Validated
                            });
                            let collides =
                                tree.children_of(to).any(|c| normalize_name(&c.name) == key);
                            if fits && !collides {
                                d.out.push(EventPayload::ValidityUpdated {
                                    target: ValidityTarget::Element { id, record },
                                });
                                d.out.push(EventPayload::ParentReassigned {
                                    element: id,
                                    from: e.parent_id.expect("non-goal element"),
                                    to,
                                });
                            } else {
                                record.reset_structure();
                                d.out.push(EventPayload::ValidityUpdated {
                                    target: ValidityTarget::Element { id, record },
                                });
                            }
                        }
                        _ => d.out.push(EventPayload::ValidityUpdated {
                            target: ValidityTarget::Element { id, record },
                        }),
                    }
                }
                ParentChoice::Alternative(text) => {
                    // A new superordinate element goes through the naming path
                    // one level up.
                    let parent_kind = e.kind.parent_kind();
                    let grandparent = e
                        .parent_id
                        .and_then(|p| tree.get(p))
                        .and_then(|p| p.parent_id);
                    match (parent_kind, grandparent) {
                        (Some(kind), Some(gp)) => d.insert(answer, kind, text, Some(gp), weight),
                        _ => d.audit(answer, "no level above the current parent".into()),
                    }
                }
            }
        }
        (payload, gap) => {
            d.audit(
                answer,
                format!("{} answer does not fit gap {gap:?}", payload.ei_type()),
            );
        }
    }
    d.out
}

/// Any structural gap (naming, validation, duplicate checks, merges) still
/// open.
pub fn structural_gaps_open(state: &PlatformState) -> bool {
    analyze_gaps(&state.gap_inputs()).structure_open()
}

/// The milestone rule plus closed structural gaps.
pub fn milestone_due(state: &PlatformState) -> bool {
    if state.tree.phase() != Phase::Structure {
        return false;
    }
    let gaps = analyze_gaps(&state.gap_inputs());
    if gaps.structure_open() {
        return false;
    }
    // With nothing left to ask no further answer can arrive, so waiting out
    // the quiet window would stall forever.
    let quiet = if gaps.is_empty() {
        u64::MAX
    } else {
        state.answers_since_structural
    };
    detect_milestone(&state.tree, &state.policy, quiet)
}

/// Milestone of the current active tree, to be recorded at `at_seq`.
pub fn milestone_of(state: &PlatformState, at_seq: Seq) -> Milestone {
    let (bytes, snapshot_hash) = state.tree.snapshot();
    Milestone {
        id: state.next_milestone_id(),
        at_seq,
        snapshot: String::from_utf8(bytes).expect("canonical JSON is UTF-8"),
        snapshot_hash,
        weights: None,
    }
}

/// Weights for every sibling group of the latest milestone.
pub fn compute_weights(state: &PlatformState) -> WeightSet {
    let mut set = WeightSet::default();
    for (parent, members) in milestone_groups(&state.tree) {
        let matrix = build_pairwise_matrix(&state.judgments, &members);
        for (id, w) in members.iter().zip(derive_weights(&matrix)) {
            set.weights.insert(*id, w);
        }
        set.consistency_ratios.insert(parent, consistency_ratio(&matrix));
    }
    set
}

/// A proposed pair whose common name is validated, with that name.
pub fn pending_merge(state: &PlatformState) -> Option<(PairKey, String)> {
    state.pairs.iter().find_map(|(key, stats)| {
        if !stats.proposed || stats.resolved {
            return None;
        }
        if state.tree.active(key.a).is_none() || state.tree.active(key.b).is_none() {
            return None;
        }
        (0..stats.name_candidates.len())
            .find(|&i| {
                resolve_text_candidate(&competing_record(&stats.name_candidates, i), &state.policy)
                    == Resolution::Validated
            })
            .map(|i| (*key, stats.name_candidates[i].text.clone()))
    })
}

/// The next event the aggregator owes without further input: a merge, a
/// milestone or a weight set. `None` once everything is settled.
pub fn next_followup(state: &PlatformState) -> Option<EventPayload> {
    let next_seq = state.seq + 1;
    if state.tree.phase() == Phase::Structure {
        if let Some((key, name)) = pending_merge(state) {
            let mut d = Decider::new(state);
            return Some(match plan_merge(&state.tree, &[key.a, key.b], &name, next_seq) {
                Ok(plan) => {
                    let votes = state.pair_votes.get(&key).cloned().unwrap_or_default();
                    let reputation = d.reputation(&votes, true);
                    EventPayload::ElementsMerged { plan, reputation }
                }
                Err(_) => {
                    // No longer mergeable (e.g. one side moved): settle as is.
                    let mut stats = state.pairs[&key].clone();
                    stats.resolved = true;
                    EventPayload::ValidityUpdated {
                        target: ValidityTarget::Pair { pair: key, stats },
                    }
                }
            });
        }
        if milestone_due(state) {
            return Some(EventPayload::MilestoneCreated {
                milestone: milestone_of(state, next_seq),
                forced: false,
            });
        }
    }
    if state.tree.phase() == Phase::Weighting
        && analyze_gaps(&state.gap_inputs()).pending_pairwise.is_empty()
    {
        let milestone = state.tree.latest_milestone()?;
        return Some(EventPayload::WeightsComputed {
            milestone_id: milestone.id,
            weights: compute_weights(state),
        });
    }
    None
}
