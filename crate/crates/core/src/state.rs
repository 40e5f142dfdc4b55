//! Platform state as a deterministic fold over the event log.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::aggregator::{AggregationPolicy, Judgment, PairKey, PairStats};
use crate::catalog::{AnswerPayload, Choice, EiInstance};
use crate::events::{DiscussionPost, Event, EventPayload, ReputationChange, ValidityTarget};
use crate::model::{EiId, ElementId, ElementState, ParticipantId, Seq, SooTree};
use crate::participants::Participant;
use crate::stream::{GapInputs, GapItem};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalInfo {
    pub title: String,
    pub description: String,
    pub system_boundaries: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FoldError {
    #[error("expected seq {expected}, found {found}")]
    SeqGap { expected: Seq, found: Seq },
    #[error("event {seq} does not fit the state: {reason}")]
    Inconsistent { seq: Seq, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlatformState {
    pub seq: Seq,
    pub policy: AggregationPolicy,
    pub goal_info: Option<GoalInfo>,
    pub tree: SooTree,
    pub pairs: BTreeMap<PairKey, PairStats>,
    pub participants: BTreeMap<ParticipantId, Participant>,
    pub instances: BTreeMap<EiId, EiInstance>,
    /// Latest instance issued per gap.
    pub open: BTreeMap<GapItem, EiInstance>,
    pub history: BTreeMap<ParticipantId, BTreeSet<EiId>>,
    pub naming_counts: BTreeMap<ElementId, u64>,
    pub judgments: BTreeMap<PairKey, Vec<Judgment>>,
    pub confirm_votes: BTreeMap<ElementId, Vec<(ParticipantId, Choice)>>,
    pub pair_votes: BTreeMap<PairKey, Vec<(ParticipantId, Choice)>>,
    pub answers_since_structural: u64,
    pub answer_count: u64,
    pub answer_times: Vec<DateTime<Utc>>,
    pub discussions: Vec<DiscussionPost>,
    pub next_ei_id: u64,
}

impl PlatformState {
    pub fn new() -> Self {
        PlatformState {
            next_ei_id: 1,
            ..Default::default()
        }
    }

    /// Folds a whole log, stopping at the first event that does not apply.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, FoldError> {
        let mut state = PlatformState::new();
        for e in events {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn gap_inputs(&self) -> GapInputs<'_> {
        GapInputs {
            tree: &self.tree,
            pairs: &self.pairs,
            naming_counts: &self.naming_counts,
            judgments: &self.judgments,
            policy: &self.policy,
        }
    }

    pub fn history_of(&self, participant: ParticipantId) -> BTreeSet<EiId> {
        self.history.get(&participant).cloned().unwrap_or_default()
    }

    pub fn has_answered(&self, participant: ParticipantId, ei: EiId) -> bool {
        self.history
            .get(&participant)
            .is_some_and(|h| h.contains(&ei))
    }

    pub fn next_discussion_id(&self) -> u64 {
        self.discussions.len() as u64 + 1
    }

    pub fn next_milestone_id(&self) -> u64 {
        self.tree.milestones().len() as u64 + 1
    }

    fn inconsistent(&self, seq: Seq, reason: impl Into<String>) -> FoldError {
        FoldError::Inconsistent {
            seq,
            reason: reason.into(),
        }
    }

    fn apply_reputation(&mut self, changes: &[ReputationChange]) {
        for c in changes {
            if let Some(p) = self.participants.get_mut(&c.participant_id) {
                p.reputation = c.reputation;
            }
        }
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), FoldError> {
        let seq = event.seq;
        if seq != self.seq + 1 {
            return Err(FoldError::SeqGap {
                expected: self.seq + 1,
                found: seq,
            });
        }
        match &event.event {
            EventPayload::GoalDefined {
                goal,
                title,
                description,
                system_boundaries,
            } => {
                if self.tree.goal().is_some() {
                    return Err(self.inconsistent(seq, "goal defined twice"));
                }
                self.tree.add_element(goal.clone());
                self.goal_info = Some(GoalInfo {
                    title: title.clone(),
                    description: description.clone(),
                    system_boundaries: system_boundaries.clone(),
                });
            }
            EventPayload::PolicySet { policy } => self.policy = policy.clone(),
            EventPayload::ParticipantRegistered { participant } => {
                self.participants.insert(participant.id, participant.clone());
            }
            EventPayload::IntroTestScored {
                participant_id,
                competency,
            } => match self.participants.get_mut(participant_id) {
                Some(p) => p.competency = *competency,
                None => return Err(self.inconsistent(seq, "unknown participant")),
            },
            EventPayload::EiIssued { instance } => {
                self.next_ei_id = self.next_ei_id.max(instance.id.0 + 1);
                self.open.insert(instance.gap, instance.clone());
                self.instances.insert(instance.id, instance.clone());
            }
            EventPayload::AnswerSubmitted { answer, weight } => {
                let Some(instance) = self.instances.get(&answer.ei_id) else {
                    return Err(self.inconsistent(seq, "answer to unknown instance"));
                };
                let pid = answer.participant_id;
                match (&answer.payload, instance.gap) {
                    (AnswerPayload::Name { .. }, GapItem::MissingChildren { parent, .. }) => {
                        *self.naming_counts.entry(parent).or_default() += 1;
                    }
                    (AnswerPayload::Confirm { choice }, _) => {
                        if let Some(&target) = instance.targets.first() {
                            self.confirm_votes.entry(target).or_default().push((pid, *choice));
                        }
                    }
                    (AnswerPayload::PrioritizePairwise { intensity }, _) => {
                        if let [first, second] = instance.targets[..] {
                            let key = PairKey::new(first, second);
                            let oriented = if key.a == first { *intensity } else { -intensity };
                            self.judgments.entry(key).or_default().push(Judgment {
                                intensity: oriented,
                                weight: *weight,
                            });
                        }
                    }
                    (AnswerPayload::IdentifyDuplicates { answer: a }, _) => {
                        if let [first, second] = instance.targets[..] {
                            self.pair_votes
                                .entry(PairKey::new(first, second))
                                .or_default()
                                .push((pid, a.binarized()));
                        }
                    }
                    _ => {}
                }
                let Some(p) = self.participants.get_mut(&pid) else {
                    return Err(self.inconsistent(seq, "answer from unknown participant"));
                };
                p.answered_count += 1;
                self.history.entry(pid).or_default().insert(answer.ei_id);
                self.answer_count += 1;
                self.answers_since_structural += 1;
                self.answer_times.push(event.ts);
            }
            EventPayload::ElementCreated { element } => {
                if self.tree.get(element.id).is_some() {
                    return Err(self.inconsistent(seq, "element id reused"));
                }
                self.tree.add_element(element.clone());
            }
            EventPayload::ValidityUpdated { target } => match target {
                ValidityTarget::Element { id, record } => {
                    if self.tree.set_validity(*id, record.clone()).is_err() {
                        return Err(self.inconsistent(seq, "validity for unknown element"));
                    }
                }
                ValidityTarget::Pair { pair, stats } => {
                    self.pairs.insert(*pair, stats.clone());
                }
                ValidityTarget::Definitions {
                    element,
                    candidates,
                } => match self.tree.get_mut(*element) {
                    Some(e) => e.definition_candidates = candidates.clone(),
                    None => return Err(self.inconsistent(seq, "definition for unknown element")),
                },
            },
            EventPayload::ElementValidated {
                element,
                reputation,
            } => {
                if !self.tree.set_state(*element, ElementState::Validated) {
                    return Err(self.inconsistent(seq, "element cannot be validated"));
                }
                self.apply_reputation(reputation);
            }
            EventPayload::ElementRemoved {
                element,
                reputation,
            } => {
                if !self.tree.set_state(*element, ElementState::Removed) {
                    return Err(self.inconsistent(seq, "element cannot be removed"));
                }
                self.apply_reputation(reputation);
            }
            EventPayload::MergeProposed { pair } => {
                self.pairs.entry(*pair).or_default().proposed = true;
            }
            EventPayload::ElementsMerged { plan, reputation } => {
                if plan.members.iter().any(|&m| self.tree.active(m).is_none()) {
                    return Err(self.inconsistent(seq, "merge of inactive element"));
                }
                self.tree.apply_merge(plan);
                let retired: BTreeSet<ElementId> = plan.retired().collect();
                for (key, stats) in self.pairs.iter_mut() {
                    if retired.contains(&key.a) || retired.contains(&key.b) {
                        stats.resolved = true;
                    }
                }
                self.apply_reputation(reputation);
            }
            EventPayload::ParentReassigned { element, to, .. } => {
                if self.tree.reparent(*element, *to).is_err() {
                    return Err(self.inconsistent(seq, "invalid relocation"));
                }
                if let Some(e) = self.tree.get_mut(*element) {
                    e.validity.reset_structure();
                    e.validity.last_affecting_seq = seq;
                }
            }
            EventPayload::DefinitionAdopted { element, text } => match self.tree.get_mut(*element) {
                Some(e) => e.definition = Some(text.clone()),
                None => return Err(self.inconsistent(seq, "definition for unknown element")),
            },
            EventPayload::WeightsComputed {
                milestone_id,
                weights,
            } => {
                if !self.tree.attach_weights(*milestone_id, weights.clone()) {
                    return Err(self.inconsistent(seq, "weights for unknown milestone"));
                }
            }
            EventPayload::MilestoneCreated { milestone, .. } => {
                self.tree.push_milestone(milestone.clone());
            }
            EventPayload::DiscussionPosted { post } => self.discussions.push(post.clone()),
            EventPayload::StaleAnswerAudited { .. } => {}
        }
        if event.event.is_structural() {
            self.answers_since_structural = 0;
        }
        self.seq = seq;
        Ok(())
    }
}
