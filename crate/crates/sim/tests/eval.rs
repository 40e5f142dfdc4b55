mod common;

use std::collections::BTreeMap;

use common::{element, tree_of};
use soo_core::model::{ElementId, ElementKind, Phase, SooTree, WeightSet};
use soo_sim::eval::EvalError;
use soo_sim::truth::Concept;
use soo_sim::{evaluate_structure, evaluate_weights, weight_rmse, GroundTruthSoo};

#[test]
fn identical_tree_scores_one() {
    let truth = GroundTruthSoo::pilot();
    let s = evaluate_structure(&tree_of(&truth), &truth);
    assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    assert_eq!(s.matched, 23);
}

#[test]
fn goal_only_scores_zero() {
    let truth = GroundTruthSoo::pilot();
    let tree = SooTree::from_elements_unchecked(
        vec![element(1, ElementKind::Goal, &truth.goal, None)],
        Phase::Structure,
    );
    let s = evaluate_structure(&tree, &truth);
    assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
}

#[test]
fn distractor_lowers_precision_only() {
    let truth = GroundTruthSoo::pilot();
    let mut elements: Vec<_> = tree_of(&truth).active_elements().cloned().collect();
    elements.push(element(99, ElementKind::Objective, "Weather", Some(1)));
    let tree = SooTree::from_elements_unchecked(elements, Phase::Structure);
    let s = evaluate_structure(&tree, &truth);
    assert_eq!(s.precision, 23.0 / 24.0);
    assert_eq!(s.recall, 1.0);
}

#[test]
fn synonym_duplicate_counts_once() {
    let truth = GroundTruthSoo::merge_case();
    let mut elements: Vec<_> = tree_of(&truth).active_elements().cloned().collect();
    elements.push(element(50, ElementKind::Criterion, "Expenses", Some(2)));
    let tree = SooTree::from_elements_unchecked(elements, Phase::Structure);
    let s = evaluate_structure(&tree, &truth);
    assert_eq!((s.matched, s.validated), (6, 7));
}

fn three_objectives() -> GroundTruthSoo {
    let concept = |id: &str, name: &str, weight| Concept {
        id: id.into(),
        kind: ElementKind::Objective,
        name: name.into(),
        synonyms: Vec::new(),
        parent: None,
        weight,
    };
    GroundTruthSoo {
        goal: "G".into(),
        concepts: vec![concept("a", "A", 0.5), concept("b", "B", 0.3), concept("c", "C", 0.2)],
        distractors: Vec::new(),
    }
}

#[test]
fn uniform_weights_against_known_truth() {
    let truth = three_objectives();
    truth.validate().unwrap();
    let tree = tree_of(&truth);
    let weights = WeightSet {
        weights: (2..=4).map(|i| (ElementId(i), 1.0 / 3.0)).collect(),
        consistency_ratios: BTreeMap::new(),
    };
    let score = weight_rmse(&weights, &tree, &truth);
    // Errors -1/6, 1/30, 2/15: mean square 7/450.
    let expected = (7.0f64 / 450.0).sqrt();
    assert!((score.rmse.unwrap() - expected).abs() < 1e-12);
    assert_eq!(score.matched, 3);
}

#[test]
fn unmatched_weights_are_listed_not_scored() {
    let truth = three_objectives();
    let tree = SooTree::from_elements_unchecked(
        vec![
            element(1, ElementKind::Goal, "G", None),
            element(2, ElementKind::Objective, "Weather", Some(1)),
        ],
        Phase::Structure,
    );
    let weights = WeightSet {
        weights: [(ElementId(2), 1.0)].into(),
        consistency_ratios: BTreeMap::new(),
    };
    let score = weight_rmse(&weights, &tree, &truth);
    assert_eq!(score.rmse, None);
    assert_eq!(score.unmatched, vec![ElementId(2)]);
}

#[test]
fn weights_need_a_milestone() {
    let truth = three_objectives();
    assert_eq!(evaluate_weights(&tree_of(&truth), &truth), Err(EvalError::NoMilestone));
}
