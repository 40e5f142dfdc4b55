//! The single writer: validates commands, appends their events durably and
//! folds them into the in-memory state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use soo_core::aggregator::{apply_answer, assess_alternatives, milestone_of, next_followup, AssessError};
use soo_core::catalog::{validate_answer_payload, Answer, AnswerPayload, EiInstance};
use soo_core::events::DiscussionPost;
use soo_core::model::{EiId, ElementId, ElementKind, ParticipantId, Phase, Seq};
use soo_core::participants::{
    answer_weight, register, score_intro_test, SelfEstimation, StakeholderGroup,
};
use soo_core::stream::{analyze_gaps, eligible, generate_instances, open_instances, select_stream, StreamRequest};
use soo_core::{Event, EventPayload, PlatformState};
use thiserror::Error;

use crate::clock::Clock;
use crate::config::PlatformConfig;
use crate::replay::{replay, ReplayError};
use crate::store::{EventStore, StoreError};

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Forbidden(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

pub type Result<T, E = PlatformError> = std::result::Result<T, E>;

/// Intro test as shown to a participant: no answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntroTestView {
    pub questions: Vec<IntroQuestionView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntroQuestionView {
    pub question: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Alternative {
    pub name: String,
    pub indicator_values: BTreeMap<ElementId, f64>,
}

pub struct Platform {
    state: PlatformState,
    store: Box<dyn EventStore>,
    clock: Box<dyn Clock>,
    config: PlatformConfig,
}

/// Derived events of one command should never come close to this.
const FOLLOWUP_LIMIT: usize = 100_000;

impl Platform {
    /// Rebuilds state from whatever the store already holds. A fresh log
    /// starts with the configured policy.
    pub fn open(
        store: Box<dyn EventStore>,
        clock: Box<dyn Clock>,
        config: PlatformConfig,
    ) -> Result<Self> {
        let events = store.events()?;
        let state = replay(&events)?;
        let mut platform = Platform {
            state,
            store,
            clock,
            config,
        };
        if platform.state.seq == 0 {
            let policy = platform.config.policy.clone();
            platform.emit(EventPayload::PolicySet { policy })?;
        }
        Ok(platform)
    }

    pub fn state(&self) -> &PlatformState {
        &self.state
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn events(&self) -> Result<Vec<Event>> {
        Ok(self.store.events()?)
    }

    /// Stamps, persists, then folds one event.
    fn emit(&mut self, payload: EventPayload) -> Result<Seq> {
        let event = Event {
            seq: self.state.seq + 1,
            ts: self.clock.now(),
            event: payload,
        };
        self.store.append(&event)?;
        self.state.apply(&event).map_err(|e| {
            // The decider and the fold disagree; the log now holds an event
            // that cannot be replayed.
            PlatformError::Replay(ReplayError::CorruptLog {
                seq: event.seq,
                reason: e.to_string(),
            })
        })?;
        Ok(event.seq)
    }

    /// Emits merges, milestones and weights until nothing more is owed.
    fn settle(&mut self) -> Result<()> {
        for _ in 0..FOLLOWUP_LIMIT {
            match next_followup(&self.state) {
                Some(payload) => {
                    self.emit(payload)?;
                }
                None => return Ok(()),
            }
        }
        Err(PlatformError::Conflict("aggregation did not settle".into()))
    }

    fn require_goal(&self) -> Result<()> {
        if self.state.tree.goal().is_none() {
            return Err(PlatformError::Conflict("no goal defined yet".into()));
        }
        Ok(())
    }

    pub fn define_goal(&mut self, title: &str, description: &str, boundaries: &str) -> Result<ElementId> {
        if self.state.tree.goal().is_some() {
            return Err(PlatformError::Conflict("goal already defined".into()));
        }
        let seq = self.state.seq + 1;
        let mut goal = match self
            .state
            .tree
            .plan_insert(ElementKind::Goal, title, None, None, 0.0, seq)
        {
            Ok(soo_core::model::Insertion::Created(e)) => e,
            Ok(_) => unreachable!("a goal is always created"),
            Err(e) => return Err(PlatformError::BadRequest(e.to_string())),
        };
        let description = description.trim();
        if !description.is_empty() {
            goal.definition = Some(description.to_string());
        }
        let id = goal.id;
        self.emit(EventPayload::GoalDefined {
            goal,
            title: title.trim().to_string(),
            description: description.to_string(),
            system_boundaries: boundaries.trim().to_string(),
        })?;
        Ok(id)
    }

    pub fn set_policy(&mut self, policy: soo_core::aggregator::AggregationPolicy) -> Result<Seq> {
        policy
            .validate()
            .map_err(|e| PlatformError::BadRequest(e.to_string()))?;
        let seq = self.emit(EventPayload::PolicySet { policy })?;
        self.settle()?;
        Ok(seq)
    }

    pub fn register(
        &mut self,
        name: &str,
        group: StakeholderGroup,
        self_estimation: SelfEstimation,
    ) -> Result<(ParticipantId, IntroTestView)> {
        let id = ParticipantId(self.state.participants.len() as u64 + 1);
        let participant = register(id, name, group, self_estimation, self.state.seq + 1)
            .map_err(|e| PlatformError::BadRequest(e.to_string()))?;
        self.emit(EventPayload::ParticipantRegistered { participant })?;
        let test = IntroTestView {
            questions: self
                .config
                .intro_test
                .questions
                .iter()
                .map(|q| IntroQuestionView {
                    question: q.question.clone(),
                    options: q.options.clone(),
                })
                .collect(),
        };
        Ok((id, test))
    }

    /// Scores the intro test. Self-declared end-users keep competency 0.
    pub fn submit_intro_test(&mut self, participant: ParticipantId, choices: &[usize]) -> Result<f64> {
        let p = self.participant(participant)?;
        let end_user = p.self_estimation == SelfEstimation::EndUser;
        let score = score_intro_test(choices, &self.config.intro_test)
            .map_err(|e| PlatformError::BadRequest(e.to_string()))?;
        let competency = if end_user { 0.0 } else { score };
        self.emit(EventPayload::IntroTestScored {
            participant_id: participant,
            competency,
        })?;
        Ok(competency)
    }

    fn participant(&self, id: ParticipantId) -> Result<&soo_core::participants::Participant> {
        self.state
            .participants
            .get(&id)
            .ok_or_else(|| PlatformError::NotFound(format!("participant {id} not found")))
    }

    /// Issues instances for uncovered gaps, then samples a page for the
    /// participant. `count` defaults to the configured page size.
    pub fn stream(&mut self, participant: ParticipantId, count: Option<usize>, seed: u64) -> Result<Vec<EiInstance>> {
        self.participant(participant)?;
        self.require_goal()?;
        let report = analyze_gaps(&self.state.gap_inputs());
        let fresh = generate_instances(
            &report,
            &self.state.tree,
            &self.state.policy,
            &self.config.stream,
            &self.state.open,
            EiId(self.state.next_ei_id),
            self.state.seq + 1,
        );
        for (mut instance, _) in fresh {
            instance.id = EiId(self.state.next_ei_id);
            instance.created_at_seq = self.state.seq + 1;
            self.emit(EventPayload::EiIssued { instance })?;
        }
        let candidates = open_instances(
            &report,
            &self.state.tree,
            &self.state.policy,
            &self.config.stream,
            &self.state.open,
        );
        let req = StreamRequest {
            participant_id: participant,
            count: count.unwrap_or(self.config.stream.page_default),
            seed,
        };
        let p = self.participant(participant)?;
        let history = self.state.history.get(&participant).cloned().unwrap_or_default();
        Ok(select_stream(&candidates, p, &history, &req, &self.config.stream))
    }

    /// Records an answer and everything it decides. Returns the seq of the
    /// `AnswerSubmitted` event.
    pub fn submit_answer(&mut self, ei_id: EiId, participant: ParticipantId, payload: AnswerPayload) -> Result<Seq> {
        let p = self.participant(participant)?;
        let instance = self
            .state
            .instances
            .get(&ei_id)
            .ok_or_else(|| PlatformError::NotFound(format!("instance {ei_id} not found")))?;
        if self.state.has_answered(participant, ei_id) {
            return Err(PlatformError::Conflict(format!(
                "participant {participant} already answered {ei_id}"
            )));
        }
        if !eligible(instance, p, &self.config.stream) {
            return Err(PlatformError::Forbidden(format!(
                "instance {ei_id} is not offered to participant {participant}"
            )));
        }
        validate_answer_payload(instance, &payload)
            .map_err(|e| PlatformError::BadRequest(e.to_string()))?;
        let weight = answer_weight(p) * self.state.policy.weight_scale;
        let answer = Answer {
            ei_id,
            participant_id: participant,
            payload,
            at_seq: self.state.seq + 1,
        };
        let seq = self.emit(EventPayload::AnswerSubmitted {
            answer: answer.clone(),
            weight,
        })?;
        for derived in apply_answer(&self.state, &answer, weight) {
            self.emit(derived)?;
        }
        self.settle()?;
        Ok(seq)
    }

    pub fn post_discussion(
        &mut self,
        element: ElementId,
        participant: Option<ParticipantId>,
        text: &str,
    ) -> Result<DiscussionPost> {
        if self.state.tree.get(element).is_none() {
            return Err(PlatformError::NotFound(format!("element {element} not found")));
        }
        if let Some(pid) = participant {
            self.participant(pid)?;
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(PlatformError::BadRequest("discussion text is empty".into()));
        }
        let post = DiscussionPost {
            id: self.state.next_discussion_id(),
            element_id: element,
            participant_id: participant,
            text: text.to_string(),
            at_seq: self.state.seq + 1,
        };
        self.emit(EventPayload::DiscussionPosted { post: post.clone() })?;
        Ok(post)
    }

    pub fn discussion(&self, element: ElementId) -> Result<Vec<DiscussionPost>> {
        if self.state.tree.get(element).is_none() {
            return Err(PlatformError::NotFound(format!("element {element} not found")));
        }
        Ok(self
            .state
            .discussions
            .iter()
            .filter(|p| p.element_id == element)
            .cloned()
            .collect())
    }

    /// Initiator override: freezes the current tree as a milestone.
    pub fn force_milestone(&mut self) -> Result<u64> {
        self.require_goal()?;
        if self.state.tree.phase() != Phase::Structure {
            return Err(PlatformError::Conflict(
                "a milestone exists already; the structure is frozen".into(),
            ));
        }
        let milestone = milestone_of(&self.state, self.state.seq + 1);
        let id = milestone.id;
        self.emit(EventPayload::MilestoneCreated {
            milestone,
            forced: true,
        })?;
        self.settle()?;
        Ok(id)
    }

    /// Ranks alternatives once the latest milestone carries weights.
    pub fn assess(&self, alternatives: &[Alternative]) -> Result<Vec<(String, f64)>> {
        let milestone = self
            .state
            .tree
            .latest_milestone()
            .ok_or_else(|| PlatformError::Conflict("no milestone yet".into()))?;
        let weights = milestone
            .weights
            .as_ref()
            .ok_or_else(|| PlatformError::Conflict("weights not computed yet".into()))?;
        let mut values = BTreeMap::new();
        for a in alternatives {
            if values
                .insert(a.name.clone(), a.indicator_values.clone())
                .is_some()
            {
                return Err(PlatformError::BadRequest(format!(
                    "alternative {:?} given twice",
                    a.name
                )));
            }
        }
        assess_alternatives(milestone, weights, &values, &BTreeMap::new()).map_err(|e| match e {
            AssessError::NoWeights => PlatformError::Conflict(e.to_string()),
            AssessError::MissingIndicatorValue { .. } => PlatformError::BadRequest(e.to_string()),
        })
    }

    pub fn now(&mut self) -> chrono::DateTime<chrono::Utc> {
        self.clock.now()
    }
}
