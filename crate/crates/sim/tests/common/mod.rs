#![allow(dead_code)]

use soo_core::catalog::{EiInstance, EiType};
use soo_core::model::{
    EiId, Element, ElementId, ElementKind, ElementState, Phase, SooTree, ValidityRecord,
};
use soo_core::stream::GapItem;
use soo_sim::GroundTruthSoo;

pub fn element(id: u64, kind: ElementKind, name: &str, parent: Option<u64>) -> Element {
    Element {
        id: ElementId(id),
        kind,
        name: name.into(),
        definition: None,
        definition_candidates: Vec::new(),
        parent_id: parent.map(ElementId),
        state: ElementState::Validated,
        validity: ValidityRecord::default(),
        created_by: None,
        created_at_seq: 0,
    }
}

/// The truth as a validated tree: goal is 1, concept `i` is `i + 2`.
pub fn tree_of(truth: &GroundTruthSoo) -> SooTree {
    let mut elements = vec![element(1, ElementKind::Goal, &truth.goal, None)];
    for (i, c) in truth.concepts.iter().enumerate() {
        let parent = match &c.parent {
            None => 1,
            Some(p) => truth.concepts.iter().position(|o| &o.id == p).unwrap() as u64 + 2,
        };
        elements.push(element(i as u64 + 2, c.kind, &c.name, Some(parent)));
    }
    SooTree::from_elements_unchecked(elements, Phase::Structure)
}

pub fn instance(ei_type: EiType, targets: &[u64], gap: GapItem) -> EiInstance {
    EiInstance {
        id: EiId(1),
        ei_type,
        targets: targets.iter().copied().map(ElementId).collect(),
        cap: None,
        question_text: String::new(),
        options: Vec::new(),
        gap,
        stakeholder_tags: Vec::new(),
        created_at_seq: 0,
    }
}
