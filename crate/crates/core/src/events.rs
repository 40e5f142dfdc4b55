//! The append-only event vocabulary. Derived events carry absolute values so
//! folding them never recomputes a decision.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::aggregator::{AggregationPolicy, MergePlan, PairKey, PairStats};
use crate::catalog::{Answer, EiInstance};
use crate::model::{
    EiId, Element, ElementId, Milestone, ParticipantId, Seq, TextCandidate, ValidityRecord,
    WeightSet,
};
use crate::participants::{Outcome, Participant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscussionPost {
    pub id: u64,
    pub element_id: ElementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<ParticipantId>,
    pub text: String,
    pub at_seq: Seq,
}

/// A participant's reputation after one resolution they took part in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReputationChange {
    pub participant_id: ParticipantId,
    pub outcome: Outcome,
    pub reputation: f64,
}

/// Full replacement value for some tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ValidityTarget {
    Element {
        id: ElementId,
        record: ValidityRecord,
    },
    Pair {
        pair: PairKey,
        stats: PairStats,
    },
    Definitions {
        element: ElementId,
        candidates: Vec<TextCandidate>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all_fields = "camelCase")]
pub enum EventPayload {
    GoalDefined {
        goal: Element,
        title: String,
        description: String,
        system_boundaries: String,
    },
    PolicySet {
        policy: AggregationPolicy,
    },
    ParticipantRegistered {
        participant: Participant,
    },
    IntroTestScored {
        participant_id: ParticipantId,
        competency: f64,
    },
    EiIssued {
        instance: EiInstance,
    },
    AnswerSubmitted {
        answer: Answer,
        weight: f64,
    },
    ElementCreated {
        element: Element,
    },
    ValidityUpdated {
        target: ValidityTarget,
    },
    ElementValidated {
        element: ElementId,
        reputation: Vec<ReputationChange>,
    },
    ElementRemoved {
        element: ElementId,
        reputation: Vec<ReputationChange>,
    },
    MergeProposed {
        pair: PairKey,
    },
    ElementsMerged {
        plan: MergePlan,
        reputation: Vec<ReputationChange>,
    },
    ParentReassigned {
        element: ElementId,
        from: ElementId,
        to: ElementId,
    },
    DefinitionAdopted {
        element: ElementId,
        text: String,
    },
    WeightsComputed {
        milestone_id: u64,
        weights: WeightSet,
    },
    MilestoneCreated {
        milestone: Milestone,
        forced: bool,
    },
    DiscussionPosted {
        post: DiscussionPost,
    },
    StaleAnswerAudited {
        ei_id: EiId,
        participant_id: ParticipantId,
        reason: String,
    },
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::GoalDefined { .. } => "GoalDefined",
            EventPayload::PolicySet { .. } => "PolicySet",
            EventPayload::ParticipantRegistered { .. } => "ParticipantRegistered",
            EventPayload::IntroTestScored { .. } => "IntroTestScored",
            EventPayload::EiIssued { .. } => "EiIssued",
            EventPayload::AnswerSubmitted { .. } => "AnswerSubmitted",
            EventPayload::ElementCreated { .. } => "ElementCreated",
            EventPayload::ValidityUpdated { .. } => "ValidityUpdated",
            EventPayload::ElementValidated { .. } => "ElementValidated",
            EventPayload::ElementRemoved { .. } => "ElementRemoved",
            EventPayload::MergeProposed { .. } => "MergeProposed",
            EventPayload::ElementsMerged { .. } => "ElementsMerged",
            EventPayload::ParentReassigned { .. } => "ParentReassigned",
            EventPayload::DefinitionAdopted { .. } => "DefinitionAdopted",
            EventPayload::WeightsComputed { .. } => "WeightsComputed",
            EventPayload::MilestoneCreated { .. } => "MilestoneCreated",
            EventPayload::DiscussionPosted { .. } => "DiscussionPosted",
            EventPayload::StaleAnswerAudited { .. } => "StaleAnswerAudited",
        }
    }

    /// Changes the shape of the tree: creation, validation, removal, merge
    /// or relocation.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            EventPayload::ElementCreated { .. }
                | EventPayload::ElementValidated { .. }
                | EventPayload::ElementRemoved { .. }
                | EventPayload::ElementsMerged { .. }
                | EventPayload::ParentReassigned { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: Seq,
    /// Informational only.
    pub ts: DateTime<Utc>,
    pub event: EventPayload,
}

impl Event {
    /// One JSON line, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }

    pub fn from_line(line: &str) -> Result<Event, serde_json::Error> {
        serde_json::from_str(line)
    }
}
