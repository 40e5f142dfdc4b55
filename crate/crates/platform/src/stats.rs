use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use soo_core::model::{ParticipantId, Phase};
use soo_core::PlatformState;

/// Platform-wide counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub per_participant_answer_count: BTreeMap<ParticipantId, u64>,
    pub platform_answers_last24h: u64,
    /// kind -> state -> count, active elements only.
    pub active_element_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub phase: Phase,
    pub milestone_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParticipantStats {
    pub participant_id: ParticipantId,
    pub answer_count: u64,
    pub platform_answers_last24h: u64,
    pub competency: f64,
    pub reputation: f64,
    pub phase: Phase,
    pub milestone_count: usize,
}

/// Answers stamped within the 24 hours before `now`.
pub fn answers_last_24h(state: &PlatformState, now: DateTime<Utc>) -> u64 {
    let since = now - Duration::hours(24);
    state
        .answer_times
        .iter()
        .filter(|&&t| t > since && t <= now)
        .count() as u64
}

pub fn stats(state: &PlatformState, now: DateTime<Utc>) -> StatsReport {
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for e in state.tree.active_elements() {
        *counts
            .entry(format!("{:?}", e.kind))
            .or_default()
            .entry(e.state.label().to_string())
            .or_default() += 1;
    }
    StatsReport {
        per_participant_answer_count: state
            .participants
            .values()
            .map(|p| (p.id, p.answered_count))
            .collect(),
        platform_answers_last24h: answers_last_24h(state, now),
        active_element_counts: counts,
        phase: state.tree.phase(),
        milestone_count: state.tree.milestones().len(),
    }
}

pub fn participant_stats(state: &PlatformState, id: ParticipantId, now: DateTime<Utc>) -> Option<ParticipantStats> {
    let p = state.participants.get(&id)?;
    Some(ParticipantStats {
        participant_id: id,
        answer_count: p.answered_count,
        platform_answers_last24h: answers_last_24h(state, now),
        competency: p.competency,
        reputation: p.reputation,
        phase: state.tree.phase(),
        milestone_count: state.tree.milestones().len(),
    })
}
