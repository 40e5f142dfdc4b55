use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Direction, ElementId, ElementKind, Milestone, TransferFunction, WeightSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssessError {
    #[error("alternative {alternative} has no value for indicator {indicator}")]
    MissingIndicatorValue {
        alternative: String,
        indicator: ElementId,
    },
    #[error("the milestone has no weights yet")]
    NoWeights,
}

/// Product of sibling weights from `id` up to (excluding) the goal.
pub fn global_weight(
    parents: &BTreeMap<ElementId, Option<ElementId>>,
    weights: &WeightSet,
    id: ElementId,
) -> f64 {
    let mut w = 1.0;
    let mut cur = Some(id);
    while let Some(c) = cur {
        let parent = parents.get(&c).copied().flatten();
        if parent.is_none() {
            break;
        }
        w *= weights.weights.get(&c).copied().unwrap_or(0.0);
        cur = parent;
    }
    w
}

/// Scores every alternative as the globally weighted sum of normalized
/// indicator values and ranks them, best first, ties by name.
/// Indicators without a transfer function are treated as benefits.
pub fn assess_alternatives(
    milestone: &Milestone,
    weights: &WeightSet,
    values: &BTreeMap<String, BTreeMap<ElementId, f64>>,
    transfer: &BTreeMap<ElementId, TransferFunction>,
) -> Result<Vec<(String, f64)>, AssessError> {
    let elements = milestone.elements();
    let parents: BTreeMap<ElementId, Option<ElementId>> =
        elements.iter().map(|e| (e.id, e.parent)).collect();
    let indicators: Vec<ElementId> = elements
        .iter()
        .filter(|e| e.kind == ElementKind::Indicator && weights.weights.contains_key(&e.id))
        .map(|e| e.id)
        .collect();

    for (alternative, row) in values {
        if let Some(&indicator) = indicators.iter().find(|i| !row.contains_key(i)) {
            return Err(AssessError::MissingIndicatorValue {
                alternative: alternative.clone(),
                indicator,
            });
        }
    }

    let mut scores: Vec<(String, f64)> = values
        .keys()
        .map(|name| (name.clone(), 0.0))
        .collect();
    for &indicator in &indicators {
        let tf = transfer.get(&indicator).copied().unwrap_or_else(|| {
            TransferFunction::fit(Direction::Benefit, values.values().map(|row| row[&indicator]))
        });
        let g = global_weight(&parents, weights, indicator);
        for (name, score) in scores.iter_mut() {
            *score += g * tf.normalize(values[name][&indicator]);
        }
    }
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical_with_hash, ElementState, SnapshotElement};

    fn milestone(elements: Vec<SnapshotElement>) -> Milestone {
        let (bytes, hash) = canonical_with_hash(&elements);
        Milestone {
            id: 1,
            at_seq: 1,
            snapshot: String::from_utf8(bytes).unwrap(),
            snapshot_hash: hash,
            weights: None,
        }
    }

    fn se(id: u64, kind: ElementKind, parent: Option<u64>) -> SnapshotElement {
        SnapshotElement {
            id: ElementId(id),
            kind,
            name: format!("e{id}"),
            definition: None,
            parent: parent.map(ElementId),
            state: ElementState::Validated,
        }
    }

    fn values(rows: &[(&str, &[(u64, f64)])]) -> BTreeMap<String, BTreeMap<ElementId, f64>> {
        rows.iter()
            .map(|(n, vs)| {
                (
                    n.to_string(),
                    vs.iter().map(|&(i, v)| (ElementId(i), v)).collect(),
                )
            })
            .collect()
    }

    fn chain() -> (Milestone, WeightSet) {
        let m = milestone(vec![
            se(1, ElementKind::Goal, None),
            se(2, ElementKind::Objective, Some(1)),
            se(3, ElementKind::Criterion, Some(2)),
            se(4, ElementKind::Indicator, Some(3)),
        ]);
        let mut w = WeightSet::default();
        for i in 2..=4 {
            w.weights.insert(ElementId(i), 1.0);
        }
        (m, w)
    }

    #[test]
    fn single_indicator_endpoints() {
        let (m, w) = chain();
        let v = values(&[("A", &[(4, 10.0)]), ("B", &[(4, 5.0)])]);
        let ranking = assess_alternatives(&m, &w, &v, &BTreeMap::new()).unwrap();
        assert_eq!(ranking, vec![("A".to_string(), 1.0), ("B".to_string(), 0.0)]);
    }

    #[test]
    fn ties_rank_by_name() {
        let (m, w) = chain();
        let v = values(&[("Zeta", &[(4, 3.0)]), ("Alpha", &[(4, 3.0)])]);
        let ranking = assess_alternatives(&m, &w, &v, &BTreeMap::new()).unwrap();
        assert_eq!(ranking[0].0, "Alpha");
        assert_eq!(ranking[0].1, ranking[1].1);
    }

    #[test]
    fn missing_value_is_reported() {
        let (m, w) = chain();
        let v = values(&[("A", &[(4, 1.0)]), ("B", &[])]);
        assert_eq!(
            assess_alternatives(&m, &w, &v, &BTreeMap::new()),
            Err(AssessError::MissingIndicatorValue {
                alternative: "B".into(),
                indicator: ElementId(4)
            })
        );
    }

    #[test]
    fn two_objectives_match_hand_sum() {
        // goal 1; objectives 2, 3 (0.5 each); criteria 4 under 2, 5 under 3;
        // indicator 6 (benefit) under 4, indicator 7 (cost) under 5.
        let m = milestone(vec![
            se(1, ElementKind::Goal, None),
            se(2, ElementKind::Objective, Some(1)),
            se(3, ElementKind::Objective, Some(1)),
            se(4, ElementKind::Criterion, Some(2)),
            se(5, ElementKind::Criterion, Some(3)),
            se(6, ElementKind::Indicator, Some(4)),
            se(7, ElementKind::Indicator, Some(5)),
        ]);
        let mut w = WeightSet::default();
        for (i, x) in [(2, 0.5), (3, 0.5), (4, 1.0), (5, 1.0), (6, 1.0), (7, 1.0)] {
            w.weights.insert(ElementId(i), x);
        }
        let v = values(&[
            ("A", &[(6, 10.0), (7, 40.0)]),
            ("B", &[(6, 20.0), (7, 10.0)]),
            ("C", &[(6, 15.0), (7, 20.0)]),
        ]);
        let transfer = BTreeMap::from([(
            ElementId(7),
            TransferFunction::fit(Direction::Cost, [40.0, 10.0, 20.0]),
        )]);
        let ranking = assess_alternatives(&m, &w, &v, &transfer).unwrap();
        // Indicator 6 normalizes to A 0, B 1, C 0.5; indicator 7 (cost) to
        // A 0, B 1, C 2/3. Scores: A 0, B 1, C 0.25 + 1/3.
        let expected = [("B", 1.0), ("C", 0.25 + 1.0 / 3.0), ("A", 0.0)];
        for ((name, score), (en, es)) in ranking.iter().zip(expected) {
            assert_eq!(name, en);
            assert!((score - es).abs() < 1e-12);
        }
    }
}
