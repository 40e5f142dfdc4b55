//! Driving a whole platform run with a synthetic crowd.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use soo_core::aggregator::AggregationPolicy;
use soo_core::model::{ParticipantId, Phase, Seq};
use soo_core::participants::{SelfEstimation, StakeholderGroup};
use soo_core::Event;
use soo_platform::{MemoryStore, Platform, PlatformConfig, PlatformError, StepClock};
use thiserror::Error;

use crate::agent::{agent_answer, answer_intro_test, AgentProfile, ProfileError};
use crate::eval::{evaluate_structure, evaluate_weights};
use crate::truth::{GroundTruthSoo, TruthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attrition {
    /// Last round in which everyone takes part.
    pub after_round: u32,
    /// Agents (the first ones) still active afterwards.
    pub active: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Schedule {
    /// Every active agent answers a batch per round, in shuffled order.
    Rounds {
        rounds: u32,
        answers_per_participant_per_round: AnswerRange,
        #[serde(default)]
        attrition: Option<Attrition>,
    },
    /// A random agent answers one question at a time.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub truth: GroundTruthSoo,
    pub agents: Vec<AgentProfile>,
    #[serde(default)]
    pub policy: AggregationPolicy,
    pub schedule: Schedule,
    pub seed: u64,
    pub max_answers: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario has no agents")]
    NoAgents,
    #[error(transparent)]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("platform rejected a simulated command: {0}")]
    Platform(#[from] PlatformError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub total_answers: u64,
    pub rounds: u32,
    pub milestone_seq: Option<Seq>,
    pub weights_seq: Option<Seq>,
    pub structure_precision: f64,
    pub structure_recall: f64,
    pub structure_f1: f64,
    pub weight_rmse: Option<f64>,
    pub weight_unmatched: usize,
    pub repeat_deliveries: u64,
    pub stale_audits: u64,
    pub event_count: u64,
    pub final_snapshot_hash: String,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// The report minus timing, for determinism comparisons.
    pub fn untimed(&self) -> RunReport {
        RunReport {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |s| s.to_string());
        writeln!(f, "{:<22}{}", "answers", self.total_answers)?;
        writeln!(f, "{:<22}{}", "rounds", self.rounds)?;
        writeln!(f, "{:<22}{}", "milestone seq", opt(self.milestone_seq))?;
        writeln!(f, "{:<22}{}", "weights seq", opt(self.weights_seq))?;
        writeln!(f, "{:<22}{:.3}", "precision", self.structure_precision)?;
        writeln!(f, "{:<22}{:.3}", "recall", self.structure_recall)?;
        writeln!(f, "{:<22}{:.3}", "F1", self.structure_f1)?;
        let rmse = self
            .weight_rmse
            .map_or_else(|| "-".to_string(), |r| format!("{r:.6}"));
        writeln!(f, "{:<22}{}", "weight RMSE", rmse)?;
        writeln!(f, "{:<22}{}", "repeat deliveries", self.repeat_deliveries)?;
        writeln!(f, "{:<22}{}", "stale answers", self.stale_audits)?;
        writeln!(f, "{:<22}{}", "events", self.event_count)?;
        writeln!(f, "{:<22}{}", "snapshot", self.final_snapshot_hash)?;
        write!(f, "{:<22}{:.3}s", "wall clock", self.wall_clock_seconds)
    }
}

/// Hash of the live tree right after each milestone, and at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seq: Seq,
    pub snapshot_hash: String,
}

pub struct SimRun {
    pub report: RunReport,
    pub events: Vec<Event>,
    pub checkpoints: Vec<Checkpoint>,
    pub platform: Platform,
}

struct Driver<'a> {
    scenario: &'a Scenario,
    platform: Platform,
    rng: ChaCha8Rng,
    ids: Vec<ParticipantId>,
    total: u64,
    repeats: u64,
    checkpoints: Vec<Checkpoint>,
}

impl Driver<'_> {
    fn done(&self) -> bool {
        self.total >= self.scenario.max_answers || self.platform.state().tree.phase() == Phase::Assessed
    }

    /// Fetches and answers up to `quota` questions for agent `i`. Returns
    /// how many were answered.
    fn serve(&mut self, i: usize, quota: u64) -> Result<u64, SimError> {
        let pid = self.ids[i];
        let agent = &self.scenario.agents[i];
        let mut answered = 0;
        while answered < quota && !self.done() {
            let seed = self.rng.random::<u64>();
            let page = self.platform.stream(pid, Some((quota - answered) as usize), seed)?;
            if page.is_empty() {
                break;
            }
            for instance in page {
                if answered >= quota || self.done() {
                    break;
                }
                if self.platform.state().has_answered(pid, instance.id) {
                    self.repeats += 1;
                    continue;
                }
                let payload = agent_answer(
                    agent,
                    &instance,
                    &self.platform.state().tree,
                    &self.scenario.truth,
                    &mut self.rng,
                );
                let milestones = self.platform.state().tree.milestones().len();
                match self.platform.submit_answer(instance.id, pid, payload) {
                    Ok(_) => {}
                    Err(PlatformError::Conflict(_)) => {
                        self.repeats += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
                self.total += 1;
                answered += 1;
                for m in &self.platform.state().tree.milestones()[milestones..] {
                    self.checkpoints.push(Checkpoint {
                        seq: m.at_seq,
                        snapshot_hash: m.snapshot_hash.clone(),
                    });
                }
            }
        }
        Ok(answered)
    }
}

fn group_for(i: usize) -> StakeholderGroup {
    const GROUPS: [StakeholderGroup; 4] = [
        StakeholderGroup::Expert,
        StakeholderGroup::Planner,
        StakeholderGroup::DecisionMaker,
        StakeholderGroup::InterestGroup,
    ];
    GROUPS[i % GROUPS.len()]
}

/// Runs a scenario to weights, `max_answers`, or the end of its schedule.
/// Deterministic given the scenario.
pub fn simulate(scenario: &Scenario) -> Result<SimRun, SimError> {
    let started = Instant::now();
    if scenario.agents.is_empty() {
        return Err(SimError::NoAgents);
    }
    scenario.truth.validate()?;
    for a in &scenario.agents {
        a.validate()?;
    }
    scenario
        .policy
        .validate()
        .map_err(|e| SimError::Policy(e.to_string()))?;

    let config = PlatformConfig {
        policy: scenario.policy.clone(),
        ..PlatformConfig::default()
    };
    let mut platform = Platform::open(
        Box::new(MemoryStore::new()),
        Box::new(StepClock::deterministic()),
        config,
    )?;
    platform.define_goal(&scenario.truth.goal, "", "")?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut ids = Vec::new();
    for (i, agent) in scenario.agents.iter().enumerate() {
        let (id, _) = platform.register(
            &format!("agent {}", i + 1),
            agent.stakeholder_group,
            agent.self_estimation,
        )?;
        let choices = answer_intro_test(agent, &platform.config().intro_test, &mut rng);
        platform.submit_intro_test(id, &choices)?;
        ids.push(id);
    }

    let mut d = Driver {
        scenario,
        platform,
        rng,
        ids,
        total: 0,
        repeats: 0,
        checkpoints: Vec::new(),
    };
    let mut rounds_run = 0;
    match scenario.schedule {
        Schedule::Rounds {
            rounds,
            answers_per_participant_per_round: range,
            attrition,
        } => {
            for round in 1..=rounds {
                if d.done() {
                    break;
                }
                rounds_run = round;
                let active = match attrition {
                    Some(a) if round > a.after_round => a.active.min(d.ids.len()),
                    _ => d.ids.len(),
                };
                let mut order: Vec<usize> = (0..active).collect();
                order.shuffle(&mut d.rng);
                for i in order {
                    let quota = d.rng.random_range(range.min..=range.max.max(range.min));
                    d.serve(i, quota as u64)?;
                }
            }
        }
        Schedule::Continuous => {
            // Stop once every agent in a row found nothing to answer.
            let mut idle = 0;
            while !d.done() && idle < 3 * d.ids.len() {
                let i = d.rng.random_range(0..d.ids.len());
                if d.serve(i, 1)? == 0 {
                    idle += 1;
                } else {
                    idle = 0;
                }
            }
        }
    }

    let state = d.platform.state();
    let structure = evaluate_structure(&state.tree, &scenario.truth);
    let weights = evaluate_weights(&state.tree, &scenario.truth).ok();
    let events = d.platform.events()?;
    let stale_audits = events
        .iter()
        .filter(|e| e.event.type_name() == "StaleAnswerAudited")
        .count() as u64;
    let weights_seq = events
        .iter()
        .find(|e| e.event.type_name() == "WeightsComputed")
        .map(|e| e.seq);
    let (_, final_snapshot_hash) = state.tree.snapshot();
    d.checkpoints.push(Checkpoint {
        seq: state.seq,
        snapshot_hash: final_snapshot_hash.clone(),
    });
    let report = RunReport {
        total_answers: d.total,
        rounds: rounds_run,
        milestone_seq: state.tree.milestones().first().map(|m| m.at_seq),
        weights_seq,
        structure_precision: structure.precision,
        structure_recall: structure.recall,
        structure_f1: structure.f1,
        weight_rmse: weights.as_ref().and_then(|w| w.rmse),
        weight_unmatched: weights.as_ref().map_or(0, |w| w.unmatched.len()),
        repeat_deliveries: d.repeats,
        stale_audits,
        event_count: events.len() as u64,
        final_snapshot_hash,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(SimRun {
        report,
        events,
        checkpoints: d.checkpoints,
        platform: d.platform,
    })
}

/// Mixed-reliability crowd for the pilot-scale scenario.
pub fn pilot_agents(count: usize, seed: u64) -> Vec<AgentProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a9e7);
    (0..count)
        .map(|i| AgentProfile {
            reliability: rng.random_range(0.7..=0.95),
            competency: rng.random_range(0.6..=1.0),
            stakeholder_group: group_for(i),
            self_estimation: if i % 3 == 0 {
                SelfEstimation::Expert
            } else {
                SelfEstimation::Knowledgeable
            },
            synonym_bias: 0.1,
            pairwise_noise_sigma: 0.3,
            dont_know_rate: 0.05,
        })
        .collect()
}

impl Scenario {
    /// 26 agents, 12 rounds of 8 to 10 answers, 18 agents after round 6.
    pub fn pilot(seed: u64) -> Self {
        Scenario {
            truth: GroundTruthSoo::pilot(),
            agents: pilot_agents(26, seed),
            policy: AggregationPolicy::default(),
            schedule: Schedule::Rounds {
                rounds: 12,
                answers_per_participant_per_round: AnswerRange { min: 8, max: 10 },
                attrition: Some(Attrition {
                    after_round: 6,
                    active: 18,
                }),
            },
            seed,
            max_answers: 10_000,
        }
    }

    /// Perfect agents on the pilot truth, given enough rounds to finish.
    pub fn noiseless(seed: u64, agents: usize) -> Self {
        Scenario {
            truth: GroundTruthSoo::pilot(),
            agents: vec![AgentProfile::perfect(); agents],
            policy: AggregationPolicy::default(),
            schedule: Schedule::Rounds {
                rounds: 200,
                answers_per_participant_per_round: AnswerRange { min: 8, max: 10 },
                attrition: None,
            },
            seed,
            max_answers: 50_000,
        }
    }

    /// A criterion that half the crowd calls by its synonym.
    pub fn synonyms(seed: u64) -> Self {
        let agent = AgentProfile {
            synonym_bias: 0.5,
            ..AgentProfile::perfect()
        };
        Scenario {
            truth: GroundTruthSoo::merge_case(),
            agents: vec![agent; 12],
            policy: AggregationPolicy::default(),
            schedule: Schedule::Rounds {
                rounds: 200,
                answers_per_participant_per_round: AnswerRange { min: 8, max: 10 },
                attrition: None,
            },
            seed,
            max_answers: 50_000,
        }
    }
}
