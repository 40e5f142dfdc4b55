mod common;

use common::{element, instance, tree_of};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soo_core::catalog::{AnswerPayload, Choice, DuplicateAnswer, EiType};
use soo_core::model::{ElementId, ElementKind, Phase, SooTree};
use soo_core::stream::GapItem;
use soo_sim::agent::nearest_intensity;
use soo_sim::truth::TruthError;
use soo_sim::{agent_answer, AgentProfile, GroundTruthSoo};

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

#[test]
fn builtin_truths_are_valid() {
    for truth in [GroundTruthSoo::tiny(), GroundTruthSoo::pilot(), GroundTruthSoo::merge_case()] {
        truth.validate().unwrap();
    }
    let pilot = GroundTruthSoo::pilot();
    let count = |k| pilot.concepts.iter().filter(|c| c.kind == k).count();
    assert_eq!(
        (count(ElementKind::Objective), count(ElementKind::Criterion), count(ElementKind::Indicator)),
        (3, 8, 12)
    );
}

#[test]
fn truth_validation_catches_bad_input() {
    let mut t = GroundTruthSoo::tiny();
    t.concepts[1].parent = Some("nope".into());
    assert_eq!(t.validate(), Err(TruthError::UnknownParent("c1".into())));

    let mut t = GroundTruthSoo::tiny();
    t.concepts[2].parent = None;
    assert_eq!(t.validate(), Err(TruthError::KindMismatch("i1".into())));

    let mut t = GroundTruthSoo::merge_case();
    t.concepts[2].name = "expenses".into();
    assert_eq!(t.validate(), Err(TruthError::DuplicateName("eco".into())));

    let mut t = GroundTruthSoo::merge_case();
    t.concepts[1].weight = 0.5;
    assert!(matches!(t.validate(), Err(TruthError::WeightSum { .. })));

    let mut t = GroundTruthSoo::tiny();
    t.concepts[0].id = "c1".into();
    assert_eq!(t.validate(), Err(TruthError::DuplicateId("c1".into())));
}

#[test]
fn lookup_knows_synonyms() {
    let t = GroundTruthSoo::merge_case();
    assert_eq!(t.lookup(ElementKind::Criterion, "  EXPENSES "), vec![1]);
    assert!(t.lookup(ElementKind::Indicator, "Expenses").is_empty());
}

#[test]
fn nearest_intensity_snaps_in_log_space() {
    assert_eq!(nearest_intensity(1.0), 0);
    assert_eq!(nearest_intensity(3.0), 1);
    assert_eq!(nearest_intensity(1.0 / 9.0), -4);
    assert_eq!(nearest_intensity(100.0), 4);
    // sqrt(15) sits halfway between 3 and 5 in log space; ties go to the milder level.
    assert_eq!(nearest_intensity(15f64.sqrt()), 1);
}

#[test]
fn perfect_agent_tells_the_truth() {
    let truth = GroundTruthSoo::pilot();
    let tree = tree_of(&truth);
    let agent = AgentProfile::perfect();
    let mut rng = rng();

    let eco = 2;
    let env = 3;
    let confirm = instance(EiType::Confirm, &[eco], GapItem::PendingValidation { element: ElementId(eco) });
    assert_eq!(
        agent_answer(&agent, &confirm, &tree, &truth, &mut rng),
        AnswerPayload::Confirm { choice: Choice::Yes }
    );

    let pair = instance(
        EiType::PrioritizePairwise,
        &[eco, env],
        GapItem::PendingPairwise { parent: ElementId(1), a: ElementId(eco), b: ElementId(env) },
    );
    // 0.6 / 0.2
    assert_eq!(
        agent_answer(&agent, &pair, &tree, &truth, &mut rng),
        AnswerPayload::PrioritizePairwise { intensity: 1 }
    );

    let dup = instance(
        EiType::IdentifyDuplicates,
        &[eco, env],
        GapItem::UncheckedPair { a: ElementId(eco), b: ElementId(env) },
    );
    assert_eq!(
        agent_answer(&agent, &dup, &tree, &truth, &mut rng),
        AnswerPayload::IdentifyDuplicates { answer: DuplicateAnswer::No }
    );
}

#[test]
fn perfect_agent_names_what_is_missing() {
    let truth = GroundTruthSoo::tiny();
    let tree = SooTree::from_elements_unchecked(
        vec![element(1, ElementKind::Goal, &truth.goal, None)],
        Phase::Structure,
    );
    let name = instance(
        EiType::Name,
        &[1],
        GapItem::MissingChildren { parent: ElementId(1), kind: ElementKind::Objective },
    );
    let answer = agent_answer(&AgentProfile::perfect(), &name, &tree, &truth, &mut rng());
    assert_eq!(answer, AnswerPayload::Name { text: "Economy".into() });
}

#[test]
fn unreliable_agent_rejects_true_elements() {
    let truth = GroundTruthSoo::pilot();
    let tree = tree_of(&truth);
    let agent = AgentProfile { reliability: 0.0, ..AgentProfile::perfect() };
    let confirm = instance(EiType::Confirm, &[2], GapItem::PendingValidation { element: ElementId(2) });
    let mut rng = rng();
    for _ in 0..20 {
        assert_eq!(
            agent_answer(&agent, &confirm, &tree, &truth, &mut rng),
            AnswerPayload::Confirm { choice: Choice::No }
        );
    }
}

#[test]
fn misplaced_element_is_not_confirmed() {
    let truth = GroundTruthSoo::tiny();
    // Costs hanging straight under the goal.
    let tree = SooTree::from_elements_unchecked(
        vec![
            element(1, ElementKind::Goal, &truth.goal, None),
            element(2, ElementKind::Objective, "Economy", Some(1)),
            element(3, ElementKind::Criterion, "Costs", Some(1)),
        ],
        Phase::Structure,
    );
    let confirm = instance(EiType::Confirm, &[3], GapItem::PendingValidation { element: ElementId(3) });
    assert_eq!(
        agent_answer(&AgentProfile::perfect(), &confirm, &tree, &truth, &mut rng()),
        AnswerPayload::Confirm { choice: Choice::No }
    );
}

#[test]
fn profile_validation() {
    assert!(AgentProfile::perfect().validate().is_ok());
    let bad = AgentProfile { reliability: 1.5, ..AgentProfile::perfect() };
    assert!(bad.validate().is_err());
    let bad = AgentProfile { dont_know_rate: 1.0, ..AgentProfile::perfect() };
    assert!(bad.validate().is_err());
    let bad = AgentProfile { pairwise_noise_sigma: f64::NAN, ..AgentProfile::perfect() };
    assert!(bad.validate().is_err());
}

proptest! {
    #[test]
    fn answers_are_reproducible(seed in any::<u64>(), r in 0.0f64..=1.0) {
        let truth = GroundTruthSoo::pilot();
        let tree = tree_of(&truth);
        let agent = AgentProfile { reliability: r, pairwise_noise_sigma: 0.5, ..AgentProfile::perfect() };
        let pair = instance(
            EiType::PrioritizePairwise,
            &[2, 4],
            GapItem::PendingPairwise { parent: ElementId(1), a: ElementId(2), b: ElementId(4) },
        );
        let a = agent_answer(&agent, &pair, &tree, &truth, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = agent_answer(&agent, &pair, &tree, &truth, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
    }
}
