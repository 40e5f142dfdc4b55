use std::collections::BTreeMap;

use soo_core::aggregator::{element_validity, global_weight};
use soo_core::model::ElementId;
use soo_core::PlatformState;

/// One row per active element. `weight` is the share among siblings and
/// `global_weight` the product up to the goal; both stay blank until the
/// latest milestone has weights, and for elements created after it.
pub fn export_soo_csv(state: &PlatformState) -> Vec<u8> {
    let weighted = state
        .tree
        .latest_milestone()
        .and_then(|m| m.weights.as_ref().map(|w| (m, w)));
    let parents: BTreeMap<ElementId, Option<ElementId>> = weighted
        .map(|(m, _)| m.elements().iter().map(|e| (e.id, e.parent)).collect())
        .unwrap_or_default();

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "id",
        "kind",
        "name",
        "parent_id",
        "state",
        "validity_rate",
        "weight",
        "global_weight",
    ])
    .expect("writing to memory");
    for e in state.tree.active_elements() {
        let (local, global) = match weighted {
            Some((_, w)) if parents.contains_key(&e.id) => (
                w.weights.get(&e.id).map(f64::to_string).unwrap_or_default(),
                global_weight(&parents, w, e.id).to_string(),
            ),
            _ => (String::new(), String::new()),
        };
        out.write_record([
            e.id.0.to_string(),
            format!("{:?}", e.kind),
            e.name.clone(),
            e.parent_id.map(|p| p.0.to_string()).unwrap_or_default(),
            e.state.label().to_string(),
            element_validity(&e.validity, &state.policy).to_string(),
            local,
            global,
        ])
        .expect("writing to memory");
    }
    out.into_inner().expect("in-memory writer flushes")
}
