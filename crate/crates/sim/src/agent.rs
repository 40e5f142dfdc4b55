//! Synthetic participants and how they answer.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use soo_core::aggregator::intensity_ratio;
use soo_core::catalog::{
    AnswerPayload, Choice, DuplicateAnswer, EiInstance, EiType, ParentChoice, MAX_INTENSITY,
};
use soo_core::model::{normalize_name, ElementId, SooTree};
use soo_core::participants::{IntroTest, SelfEstimation, StakeholderGroup};
use soo_core::stream::GapItem;
use thiserror::Error;

use crate::eval::ConceptMap;
use crate::truth::{GroundTruthSoo, Node};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AgentProfile {
    /// Probability of answering correctly.
    pub reliability: f64,
    /// Probability of getting each intro test question right.
    pub competency: f64,
    pub stakeholder_group: StakeholderGroup,
    pub self_estimation: SelfEstimation,
    /// Probability of naming a concept by a synonym.
    pub synonym_bias: f64,
    /// Log-normal spread of pairwise ratio judgments.
    pub pairwise_noise_sigma: f64,
    pub dont_know_rate: f64,
}

impl Default for AgentProfile {
    fn default() -> Self {
        AgentProfile::perfect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("agent profile field {0} is out of range")]
pub struct ProfileError(pub &'static str);

impl AgentProfile {
    /// Always right, never abstains, no synonyms.
    pub fn perfect() -> Self {
        AgentProfile {
            reliability: 1.0,
            competency: 1.0,
            stakeholder_group: StakeholderGroup::Expert,
            self_estimation: SelfEstimation::Expert,
            synonym_bias: 0.0,
            pairwise_noise_sigma: 0.0,
            dont_know_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.reliability) {
            return Err(ProfileError("reliability"));
        }
        if !unit(self.competency) {
            return Err(ProfileError("competency"));
        }
        if !unit(self.synonym_bias) {
            return Err(ProfileError("synonymBias"));
        }
        if !(0.0..1.0).contains(&self.dont_know_rate) {
            return Err(ProfileError("dontKnowRate"));
        }
        if !(self.pairwise_noise_sigma >= 0.0 && self.pairwise_noise_sigma.is_finite()) {
            return Err(ProfileError("pairwiseNoiseSigma"));
        }
        Ok(())
    }
}

/// Picks the keyed option with probability `competency`, else another one.
pub fn answer_intro_test(agent: &AgentProfile, test: &IntroTest, rng: &mut ChaCha8Rng) -> Vec<usize> {
    test.questions
        .iter()
        .map(|q| {
            if rng.random_bool(agent.competency) {
                q.keyed
            } else {
                let wrong: Vec<usize> = (0..q.options.len()).filter(|&i| i != q.keyed).collect();
                *wrong.choose(rng).unwrap_or(&q.keyed)
            }
        })
        .collect()
}

/// Scale level whose ratio is nearest to `ratio` on a log scale.
pub fn nearest_intensity(ratio: f64) -> i8 {
    let target = ratio.ln();
    (-MAX_INTENSITY..=MAX_INTENSITY)
        .min_by(|&a, &b| {
            let da = (intensity_ratio(a).ln() - target).abs();
            let db = (intensity_ratio(b).ln() - target).abs();
            da.total_cmp(&db).then(a.abs().cmp(&b.abs()))
        })
        .expect("scale is not empty")
}

struct Ctx<'a> {
    agent: &'a AgentProfile,
    tree: &'a SooTree,
    truth: &'a GroundTruthSoo,
    map: ConceptMap,
}

impl Ctx<'_> {
    fn right(&self, rng: &mut ChaCha8Rng) -> bool {
        rng.random_bool(self.agent.reliability)
    }

    /// Concept an element stands for, if it is a true one in its true place.
    fn placed(&self, id: ElementId) -> Option<usize> {
        self.map.placed(self.tree, self.truth, id)
    }

    fn spoken_name(&self, concept: usize, rng: &mut ChaCha8Rng) -> String {
        let c = &self.truth.concepts[concept];
        if !c.synonyms.is_empty() && rng.random_bool(self.agent.synonym_bias) {
            c.synonyms.choose(rng).expect("not empty").clone()
        } else {
            c.name.clone()
        }
    }

    fn distractor(&self, rng: &mut ChaCha8Rng) -> String {
        self.truth
            .distractors
            .choose(rng)
            .cloned()
            .unwrap_or_else(|| "Something else".into())
    }

    fn true_weight(&self, id: ElementId) -> Option<f64> {
        self.placed(id).map(|c| self.truth.concepts[c].weight)
    }

    fn name_child(&self, parent: ElementId, rng: &mut ChaCha8Rng) -> String {
        let node = match self.map.node_of(self.tree, self.truth, parent) {
            Some(n) if self.map.is_placed(self.tree, self.truth, parent) => n,
            _ => return self.distractor(rng),
        };
        if !self.right(rng) {
            return self.distractor(rng);
        }
        // The agent only recognizes a concept under the name it would use
        // itself, which is how synonym duplicates arise.
        let present: Vec<String> = self
            .tree
            .children_of(parent)
            .map(|e| normalize_name(&e.name))
            .collect();
        let spoken: Vec<String> = self
            .truth
            .children(node)
            .into_iter()
            .map(|c| self.spoken_name(c, rng))
            .collect();
        let missing: Vec<&String> = spoken
            .iter()
            .filter(|s| !present.contains(&normalize_name(s)))
            .collect();
        // Nothing missing: naming an existing concept again is support.
        let pool: Vec<&String> = if missing.is_empty() {
            spoken.iter().collect()
        } else {
            missing
        };
        match pool.choose(rng) {
            Some(&s) => s.clone(),
            None => self.distractor(rng),
        }
    }

    fn define(&self, element: ElementId) -> String {
        let name = match self.placed(element) {
            Some(c) => self.truth.concepts[c].name.clone(),
            None => self
                .tree
                .get(element)
                .map(|e| e.name.clone())
                .unwrap_or_default(),
        };
        format!("How well the region does on {name}")
    }
}

/// The agent's answer to one instance, given the tree it sees.
pub fn agent_answer(
    agent: &AgentProfile,
    instance: &EiInstance,
    tree: &SooTree,
    truth: &GroundTruthSoo,
    rng: &mut ChaCha8Rng,
) -> AnswerPayload {
    let ctx = Ctx {
        agent,
        tree,
        truth,
        map: ConceptMap,
    };
    let targets = &instance.targets;
    match instance.ei_type {
        EiType::Name => {
            let text = match instance.gap {
                GapItem::MissingChildren { parent, .. } => ctx.name_child(parent, rng),
                _ => ctx.define(targets[0]),
            };
            AnswerPayload::Name { text }
        }
        EiType::Confirm => {
            let choice = if rng.random_bool(agent.dont_know_rate) {
                Choice::DontKnow
            } else {
                let truly = ctx.placed(targets[0]).is_some();
                if truly == ctx.right(rng) {
                    Choice::Yes
                } else {
                    Choice::No
                }
            };
            AnswerPayload::Confirm { choice }
        }
        EiType::IdentifyDuplicates => {
            let same = match (ctx.placed(targets[0]), ctx.placed(targets[1])) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            };
            let answer = if same == ctx.right(rng) {
                DuplicateAnswer::Yes
            } else {
                DuplicateAnswer::No
            };
            AnswerPayload::IdentifyDuplicates { answer }
        }
        EiType::PrioritizePairwise => {
            let ratio = match (ctx.true_weight(targets[0]), ctx.true_weight(targets[1])) {
                (Some(a), Some(b)) => a / b,
                (Some(_), None) => intensity_ratio(MAX_INTENSITY),
                (None, Some(_)) => intensity_ratio(-MAX_INTENSITY),
                (None, None) => 1.0,
            };
            let noise = if agent.pairwise_noise_sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                (agent.pairwise_noise_sigma * z).exp()
            } else {
                1.0
            };
            AnswerPayload::PrioritizePairwise {
                intensity: nearest_intensity(ratio * noise),
            }
        }
        EiType::ChooseSetBased => {
            let cap = instance.cap.unwrap_or(targets.len());
            let mut scored: Vec<(f64, ElementId)> = targets
                .iter()
                .filter_map(|&id| {
                    let w = ctx.true_weight(id)?;
                    let noise: f64 = if ctx.right(rng) { 1.0 } else { rng.random_range(0.2..5.0) };
                    Some((w * noise, id))
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            AnswerPayload::ChooseSetBased {
                chosen: scored.into_iter().take(cap).map(|(_, id)| id).collect(),
            }
        }
        EiType::DetermineCommonName => {
            let text = match ctx.placed(targets[0]).or_else(|| ctx.placed(targets[1])) {
                Some(c) if ctx.right(rng) => truth.concepts[c].name.clone(),
                _ => tree
                    .get(targets[0])
                    .map(|e| e.name.clone())
                    .unwrap_or_default(),
            };
            AnswerPayload::DetermineCommonName { text }
        }
        EiType::SelectParentElement => {
            let options: Vec<ElementId> = instance.options.iter().filter_map(|o| o.element).collect();
            let current = tree.get(targets[0]).and_then(|e| e.parent_id);
            let true_parent = ctx
                .map
                .node_of(tree, truth, targets[0])
                .and_then(|n| match n {
                    Node::Concept(c) => truth.parent_node(c),
                    Node::Root => None,
                });
            let correct = options.iter().copied().find(|&o| {
                true_parent.is_some()
                    && ctx.map.node_of(tree, truth, o) == true_parent
                    && ctx.map.is_placed(tree, truth, o)
            });
            let choice = match (correct, true_parent) {
                (Some(c), _) if ctx.right(rng) => ParentChoice::Existing(c),
                (Some(c), _) => {
                    let others: Vec<ElementId> = options.iter().copied().filter(|&o| o != c).collect();
                    ParentChoice::Existing(*others.choose(rng).unwrap_or(&c))
                }
                (None, Some(Node::Concept(p))) if ctx.right(rng) => {
                    ParentChoice::Alternative(truth.concepts[p].name.clone())
                }
                _ => match current.filter(|c| options.contains(c)).or(options.first().copied()) {
                    Some(o) => ParentChoice::Existing(o),
                    None => ParentChoice::Alternative(ctx.distractor(rng)),
                },
            };
            AnswerPayload::SelectParentElement { choice }
        }
    }
}
