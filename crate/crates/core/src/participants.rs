//! Participant manager: registration, introductory test, reputation and the
//! answer weight fed to the aggregator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ParticipantId, Seq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StakeholderGroup {
    DecisionMaker,
    InterestGroup,
    Expert,
    Planner,
    EndUser,
    Initiator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SelfEstimation {
    EndUser,
    Knowledgeable,
    Expert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Participant {
    pub id: ParticipantId,
    pub display_name: String,
    pub stakeholder_group: StakeholderGroup,
    pub self_estimation: SelfEstimation,
    pub competency: f64,
    pub reputation: f64,
    pub answered_count: u64,
    pub registered_at_seq: Seq,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestQuestion {
    pub question: String,
    pub options: Vec<String>,
    pub keyed: usize,
}

/// Multiple-choice test supplied by the initiators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntroTest {
    pub questions: Vec<TestQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParticipantError {
    #[error("display name is empty")]
    EmptyName,
    #[error("{answers} answers for {questions} questions")]
    LengthMismatch { answers: usize, questions: usize },
    #[error("intro test question {0} is malformed")]
    MalformedTest(usize),
}

impl IntroTest {
    pub fn validate(&self) -> Result<(), ParticipantError> {
        if self.questions.is_empty() {
            return Err(ParticipantError::MalformedTest(0));
        }
        for (i, q) in self.questions.iter().enumerate() {
            if q.options.len() < 2 || q.keyed >= q.options.len() {
                return Err(ParticipantError::MalformedTest(i));
            }
        }
        Ok(())
    }
}

pub const INITIAL_REPUTATION: f64 = 1.0;

pub fn register(
    id: ParticipantId,
    name: &str,
    stakeholder_group: StakeholderGroup,
    self_estimation: SelfEstimation,
    seq: Seq,
) -> Result<Participant, ParticipantError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(ParticipantError::EmptyName);
    }
    Ok(Participant {
        id,
        display_name: name.to_string(),
        stakeholder_group,
        self_estimation,
        competency: 0.0,
        reputation: INITIAL_REPUTATION,
        answered_count: 0,
        registered_at_seq: seq,
    })
}

/// Fraction of keyed answers chosen.
pub fn score_intro_test(answers: &[usize], test: &IntroTest) -> Result<f64, ParticipantError> {
    if answers.len() != test.questions.len() {
        return Err(ParticipantError::LengthMismatch {
            answers: answers.len(),
            questions: test.questions.len(),
        });
    }
    if answers.is_empty() {
        return Ok(0.0);
    }
    let correct = answers
        .iter()
        .zip(&test.questions)
        .filter(|(a, q)| **a == q.keyed)
        .count();
    Ok(correct as f64 / answers.len() as f64)
}

pub const REPUTATION_WEIGHT_FLOOR: f64 = 0.5;
pub const REPUTATION_WEIGHT_CAP: f64 = 1.5;

/// Influence of one answer: `(0.5 + 0.5 c) * clamp(reputation, 0.5, 1.5)`,
/// always within [0.25, 1.5].
pub fn answer_weight(p: &Participant) -> f64 {
    let competency = p.competency.clamp(0.0, 1.0);
    (0.5 + 0.5 * competency) * p.reputation.clamp(REPUTATION_WEIGHT_FLOOR, REPUTATION_WEIGHT_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Agreed,
    Disagreed,
}

pub const REPUTATION_MIN: f64 = 0.1;
pub const REPUTATION_MAX: f64 = 3.0;

pub fn update_reputation(reputation: f64, outcome: Outcome) -> f64 {
    let factor = match outcome {
        Outcome::Agreed => 1.05,
        Outcome::Disagreed => 0.95,
    };
    (reputation * factor).clamp(REPUTATION_MIN, REPUTATION_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn person(competency: f64, reputation: f64) -> Participant {
        let mut p = register(
            ParticipantId(1),
            "Ada",
            StakeholderGroup::Expert,
            SelfEstimation::Expert,
            1,
        )
        .unwrap();
        p.competency = competency;
        p.reputation = reputation;
        p
    }

    fn test_of(n: usize) -> IntroTest {
        IntroTest {
            questions: (0..n)
                .map(|i| TestQuestion {
                    question: format!("q{i}"),
                    options: vec!["a".into(), "b".into()],
                    keyed: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn registration() {
        let p = person(0.0, 1.0);
        assert_eq!(p.competency, 0.0);
        assert_eq!(p.reputation, 1.0);
        assert_eq!(
            register(ParticipantId(2), " ", StakeholderGroup::EndUser, SelfEstimation::EndUser, 1),
            Err(ParticipantError::EmptyName)
        );
    }

    #[test]
    fn intro_test_scoring() {
        let t = test_of(10);
        assert_eq!(score_intro_test(&[0; 10], &t), Ok(1.0));
        assert_eq!(score_intro_test(&[1; 10], &t), Ok(0.0));
        let seven: Vec<usize> = (0..10).map(|i| usize::from(i >= 7)).collect();
        assert_eq!(score_intro_test(&seven, &t), Ok(0.7));
        assert_eq!(
            score_intro_test(&[0; 3], &t),
            Err(ParticipantError::LengthMismatch {
                answers: 3,
                questions: 10
            })
        );
        assert!(test_of(0).validate().is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(answer_weight(&person(0.0, 1.0)), 0.5);
        assert_eq!(answer_weight(&person(1.0, 1.0)), 1.0);
        assert_eq!(answer_weight(&person(1.0, 2.7)), 1.5);
        assert_eq!(answer_weight(&person(0.0, 0.1)), 0.25);
    }

    #[test]
    fn reputation_updates() {
        assert!((update_reputation(1.0, Outcome::Agreed) - 1.05).abs() < 1e-15);
        assert!((update_reputation(1.0, Outcome::Disagreed) - 0.95).abs() < 1e-15);
        assert_eq!(update_reputation(3.0, Outcome::Agreed), 3.0);
        assert_eq!(update_reputation(0.1, Outcome::Disagreed), 0.1);
    }

    proptest! {
        #[test]
        fn weight_bounded_and_monotone(c1 in 0.0f64..=1.0, c2 in 0.0f64..=1.0, r1 in 0.0f64..4.0, r2 in 0.0f64..4.0) {
            let w = answer_weight(&person(c1, r1));
            prop_assert!((0.25..=1.5).contains(&w));
            let (clo, chi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let (rlo, rhi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(answer_weight(&person(clo, rlo)) <= answer_weight(&person(chi, rlo)));
            prop_assert!(answer_weight(&person(clo, rlo)) <= answer_weight(&person(clo, rhi)));
        }

        #[test]
        fn reputation_commutes_below_clamp(outcomes in proptest::collection::vec(any::<bool>(), 0..12), seed in any::<u64>()) {
            // 12 updates from 1.0 stay inside [0.1, 3.0], so order must not matter.
            let apply = |seq: &[bool]| seq.iter().fold(1.0, |r, &agreed| {
                update_reputation(r, if agreed { Outcome::Agreed } else { Outcome::Disagreed })
            });
            let mut shuffled = outcomes.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.reverse();
            }
            prop_assert!((apply(&outcomes) - apply(&shuffled)).abs() < 1e-12);
        }
    }
}
