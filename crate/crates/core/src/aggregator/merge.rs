use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{resolve_text_candidate, AggregationPolicy, Resolution};
use crate::model::{
    clean_name, normalize_name, Element, ElementId, ElementState, Seq, SooTree, ValidityRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("merge members must be at least two active siblings")]
    NotSiblings,
    #[error("the common name has not been validated")]
    NameNotValidated,
    #[error("common name is empty")]
    EmptyName,
}

/// Everything a merge changes, computed up front so it can be logged and
/// replayed verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MergePlan {
    pub members: Vec<ElementId>,
    pub merged: Element,
    /// Children moved to a new parent, in application order.
    pub reparented: Vec<(ElementId, ElementId)>,
    /// Re-parented children that collided by name with a child already
    /// under the target: (absorbed, survivor, survivor's combined record).
    pub absorbed: Vec<(ElementId, ElementId, ValidityRecord)>,
}

impl MergePlan {
    /// Every element that ends up as `MergedInto` something.
    pub fn retired(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.members
            .iter()
            .copied()
            .chain(self.absorbed.iter().map(|(a, _, _)| *a))
    }
}

struct Planner<'a> {
    tree: &'a SooTree,
    /// Active children per parent by normalized name, as the plan sees them.
    index: BTreeMap<ElementId, BTreeMap<String, ElementId>>,
    records: BTreeMap<ElementId, ValidityRecord>,
    reparented: Vec<(ElementId, ElementId)>,
    absorbed: Vec<(ElementId, ElementId)>,
}

impl Planner<'_> {
    fn children_index(&mut self, parent: ElementId) -> &mut BTreeMap<String, ElementId> {
        let tree = self.tree;
        self.index.entry(parent).or_insert_with(|| {
            tree.children_of(parent)
                .map(|c| (normalize_name(&c.name), c.id))
                .collect()
        })
    }

    /// Moves the active children of `sources` under `target`, folding name
    /// collisions into the child already there.
    fn move_children(&mut self, sources: &[ElementId], target: ElementId) {
        let mut children: Vec<&Element> = sources
            .iter()
            .flat_map(|&s| self.tree.children_of(s))
            .collect();
        children.sort_by_key(|c| (c.state != ElementState::Validated, c.id));
        for child in children {
            let key = normalize_name(&child.name);
            let existing = self.children_index(target).get(&key).copied();
            match existing {
                Some(survivor) => {
                    self.absorbed.push((child.id, survivor));
                    let tree = self.tree;
                    self.records
                        .entry(survivor)
                        .or_insert_with(|| tree.get(survivor).expect("indexed").validity.clone())
                        .absorb(&child.validity);
                    self.move_children(&[child.id], survivor);
                }
                None => {
                    self.reparented.push((child.id, target));
                    self.children_index(target).insert(key, child.id);
                }
            }
        }
    }
}

/// Plans merging `members` into one new validated element named
/// `common_name` under their shared parent.
pub fn plan_merge(
    tree: &SooTree,
    members: &[ElementId],
    common_name: &str,
    seq: Seq,
) -> Result<MergePlan, MergeError> {
    let name = clean_name(common_name);
    if name.is_empty() {
        return Err(MergeError::EmptyName);
    }
    let mut sorted = members.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(MergeError::NotSiblings);
    }
    let elements: Vec<&Element> = sorted
        .iter()
        .map(|&id| tree.active(id).ok_or(MergeError::NotSiblings))
        .collect::<Result<_, _>>()?;
    let parent = elements[0].parent_id;
    let kind = elements[0].kind;
    if parent.is_none() || elements.iter().any(|e| e.parent_id != parent || e.kind != kind) {
        return Err(MergeError::NotSiblings);
    }
    // A sibling already carrying the common name stands for the same
    // concept, so it joins the merge instead of clashing with the result.
    let key = normalize_name(&name);
    let mut elements = elements;
    for sibling in tree.children_of(parent.expect("checked above")) {
        if sibling.kind == kind && normalize_name(&sibling.name) == key && !sorted.contains(&sibling.id) {
            sorted.push(sibling.id);
            elements.push(sibling);
        }
    }
    sorted.sort();

    let mut record = ValidityRecord::default();
    for e in &elements {
        record.absorb(&e.validity);
    }
    // Structure votes were about the old elements' placement.
    record.reset_structure();
    record.last_affecting_seq = seq;
    let definition = elements.iter().find_map(|e| e.definition.clone());
    let merged = Element {
        id: tree.next_id(),
        kind,
        name,
        definition,
        definition_candidates: Vec::new(),
        parent_id: parent,
        state: ElementState::Validated,
        validity: record,
        created_by: None,
        created_at_seq: seq,
    };

    let mut planner = Planner {
        tree,
        index: BTreeMap::new(),
        records: BTreeMap::new(),
        reparented: Vec::new(),
        absorbed: Vec::new(),
    };
    planner.index.insert(merged.id, BTreeMap::new());
    planner.move_children(&sorted, merged.id);

    let absorbed = planner
        .absorbed
        .iter()
        .map(|&(a, s)| (a, s, planner.records[&s].clone()))
        .collect();
    Ok(MergePlan {
        members: sorted,
        merged,
        reparented: planner.reparented,
        absorbed,
    })
}

impl SooTree {
    /// Applies a merge plan produced against this tree.
    pub fn apply_merge(&mut self, plan: &MergePlan) {
        for &m in &plan.members {
            self.set_state(m, ElementState::MergedInto(plan.merged.id));
        }
        self.add_element(plan.merged.clone());
        for &(absorbed, survivor, _) in &plan.absorbed {
            self.set_state(absorbed, ElementState::MergedInto(survivor));
        }
        for (_, survivor, record) in &plan.absorbed {
            if let Some(e) = self.get_mut(*survivor) {
                e.validity = record.clone();
            }
        }
        for &(child, parent) in &plan.reparented {
            if let Some(e) = self.get_mut(child) {
                e.parent_id = Some(parent);
            }
        }
    }
}

/// Merges `members` under a validated common name and returns the new id.
/// `name_record` is the common name's support against competing proposals.
pub fn execute_merge(
    tree: &mut SooTree,
    members: &[ElementId],
    common_name: &str,
    name_record: &ValidityRecord,
    policy: &AggregationPolicy,
    seq: Seq,
) -> Result<ElementId, MergeError> {
    if resolve_text_candidate(name_record, policy) != Resolution::Validated {
        return Err(MergeError::NameNotValidated);
    }
    let plan = plan_merge(tree, members, common_name, seq)?;
    tree.apply_merge(&plan);
    Ok(plan.merged.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ElementKind;
    use std::collections::BTreeSet;

    fn validated_name() -> ValidityRecord {
        ValidityRecord {
            naming_weight: 10.0,
            ..Default::default()
        }
    }

    fn base() -> (SooTree, ElementId, ElementId, ElementId) {
        let mut t = SooTree::new();
        let g = t
            .insert_candidate(ElementKind::Goal, "Water", None, None, 1.0, 1)
            .unwrap();
        let o = t
            .insert_candidate(ElementKind::Objective, "Economy", Some(g), None, 1.0, 2)
            .unwrap();
        t.set_state(o, ElementState::Validated);
        let a = t
            .insert_candidate(ElementKind::Criterion, "Direct Costs", Some(o), None, 1.0, 3)
            .unwrap();
        let b = t
            .insert_candidate(ElementKind::Criterion, "Indirect Costs", Some(o), None, 2.0, 4)
            .unwrap();
        t.set_state(a, ElementState::Validated);
        t.set_state(b, ElementState::Validated);
        (t, o, a, b)
    }

    #[test]
    fn merges_two_criteria() {
        let (mut t, o, a, b) = base();
        let policy = AggregationPolicy::default();
        let m = execute_merge(&mut t, &[a, b], "Costs", &validated_name(), &policy, 9).unwrap();
        let merged = t.get(m).unwrap();
        assert_eq!(merged.name, "Costs");
        assert_eq!(merged.state, ElementState::Validated);
        assert_eq!(merged.parent_id, Some(o));
        assert_eq!(merged.validity.naming_weight, 3.0);
        assert_eq!(t.get(a).unwrap().state, ElementState::MergedInto(m));
        assert_eq!(t.get(b).unwrap().state, ElementState::MergedInto(m));
        assert_eq!(t.resolve_merged(a), m);
        assert!(t.check_structure().is_empty());
    }

    #[test]
    fn common_name_of_a_sibling_pulls_it_in() {
        let (mut t, o, a, b) = base();
        let c = t
            .insert_candidate(ElementKind::Criterion, "Costs", Some(o), None, 1.0, 5)
            .unwrap();
        let policy = AggregationPolicy::default();
        let m = execute_merge(&mut t, &[a, b], "costs", &validated_name(), &policy, 9).unwrap();
        assert_eq!(t.get(c).unwrap().state, ElementState::MergedInto(m));
        assert_eq!(t.get(m).unwrap().validity.naming_weight, 4.0);
        assert!(t.check_structure().is_empty());
    }

    #[test]
    fn merge_errors() {
        let (mut t, _, a, b) = base();
        let policy = AggregationPolicy::default();
        assert_eq!(
            execute_merge(&mut t, &[a], "Costs", &validated_name(), &policy, 9),
            Err(MergeError::NotSiblings)
        );
        assert_eq!(
            execute_merge(&mut t, &[a, b], "Costs", &ValidityRecord::default(), &policy, 9),
            Err(MergeError::NameNotValidated)
        );
    }

    #[test]
    fn children_follow_and_collisions_fold() {
        let (mut t, _, a, b) = base();
        let add = |t: &mut SooTree, parent, name: &str| {
            let id = t
                .insert_candidate(ElementKind::Indicator, name, Some(parent), None, 1.0, 5)
                .unwrap();
            t.set_state(id, ElementState::Validated);
            id
        };
        let a1 = add(&mut t, a, "Euro per year");
        let a2 = add(&mut t, a, "Capex");
        let b1 = add(&mut t, b, "euro  per year");
        let b2 = add(&mut t, b, "Opex");
        let active_before: BTreeSet<String> = [a1, a2, b1, b2]
            .iter()
            .map(|&i| normalize_name(&t.get(i).unwrap().name))
            .collect();

        let plan = plan_merge(&t, &[a, b], "Costs", 9).unwrap();
        assert_eq!(plan.absorbed.len(), 1);
        assert_eq!(plan.absorbed[0].0, b1);
        assert_eq!(plan.absorbed[0].1, a1);
        assert_eq!(plan.absorbed[0].2.naming_weight, 2.0);
        t.apply_merge(&plan);

        let m = plan.merged.id;
        assert!(t.check_structure().is_empty(), "{:?}", t.check_structure());
        let kids: BTreeSet<String> = t
            .children_of(m)
            .map(|c| normalize_name(&c.name))
            .collect();
        assert_eq!(kids, active_before);
        assert_eq!(t.get(b1).unwrap().state, ElementState::MergedInto(a1));
    }
}
