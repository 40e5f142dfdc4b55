//! The tree a synthetic crowd "knows": canonical names, synonyms, parents
//! and sibling weights.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use soo_core::model::{normalize_name, ElementKind};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Concept {
    /// Unique key within the truth; names may repeat under other parents.
    pub id: String,
    pub kind: ElementKind,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    /// `None` hangs the concept under the goal.
    #[serde(default)]
    pub parent: Option<String>,
    /// Share among its true siblings.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroundTruthSoo {
    pub goal: String,
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub distractors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TruthError {
    #[error("concept id {0} used twice")]
    DuplicateId(String),
    #[error("concept {0} has an unknown parent")]
    UnknownParent(String),
    #[error("concept {0} does not fit under its parent's kind")]
    KindMismatch(String),
    #[error("siblings under {0} share a name or synonym")]
    DuplicateName(String),
    #[error("weights under {parent} sum to {sum}")]
    WeightSum { parent: String, sum: f64 },
    #[error("concept {0} has a non-positive weight")]
    BadWeight(String),
}

/// Index of a concept in `GroundTruthSoo::concepts`; `Root` is the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Root,
    Concept(usize),
}

impl GroundTruthSoo {
    pub fn validate(&self) -> Result<(), TruthError> {
        let mut ids = BTreeSet::new();
        for c in &self.concepts {
            if !ids.insert(c.id.as_str()) {
                return Err(TruthError::DuplicateId(c.id.clone()));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(TruthError::BadWeight(c.id.clone()));
            }
        }
        let mut groups: BTreeMap<Node, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.concepts.iter().enumerate() {
            let parent = self
                .parent_node(i)
                .ok_or_else(|| TruthError::UnknownParent(c.id.clone()))?;
            let parent_kind = match parent {
                Node::Root => ElementKind::Goal,
                Node::Concept(p) => self.concepts[p].kind,
            };
            if c.kind.parent_kind() != Some(parent_kind) {
                return Err(TruthError::KindMismatch(c.id.clone()));
            }
            groups.entry(parent).or_default().push(i);
        }
        for (parent, members) in groups {
            let label = self.label(parent);
            let mut names = BTreeSet::new();
            for &m in &members {
                for n in self.names_of(m) {
                    if !names.insert(normalize_name(n)) {
                        return Err(TruthError::DuplicateName(label));
                    }
                }
            }
            let sum: f64 = members.iter().map(|&m| self.concepts[m].weight).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TruthError::WeightSum { parent: label, sum });
            }
        }
        Ok(())
    }

    fn label(&self, node: Node) -> String {
        match node {
            Node::Root => self.goal.clone(),
            Node::Concept(i) => self.concepts[i].id.clone(),
        }
    }

    pub fn parent_node(&self, index: usize) -> Option<Node> {
        match &self.concepts[index].parent {
            None => Some(Node::Root),
            Some(p) => self
                .concepts
                .iter()
                .position(|c| &c.id == p)
                .map(Node::Concept),
        }
    }

    /// Canonical name first, then synonyms.
    pub fn names_of(&self, index: usize) -> impl Iterator<Item = &str> {
        let c = &self.concepts[index];
        std::iter::once(c.name.as_str()).chain(c.synonyms.iter().map(String::as_str))
    }

    pub fn children(&self, node: Node) -> Vec<usize> {
        (0..self.concepts.len())
            .filter(|&i| self.parent_node(i) == Some(node))
            .collect()
    }

    /// Concepts of `kind` answering to `name` under any parent.
    pub fn lookup(&self, kind: ElementKind, name: &str) -> Vec<usize> {
        let key = normalize_name(name);
        (0..self.concepts.len())
            .filter(|&i| {
                self.concepts[i].kind == kind && self.names_of(i).any(|n| normalize_name(n) == key)
            })
            .collect()
    }

    /// Number of true elements below the goal.
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// One objective, one criterion, one indicator.
    pub fn tiny() -> Self {
        GroundTruthSoo {
            goal: "Reliable water supply".into(),
            concepts: vec![
                concept("o1", ElementKind::Objective, "Economy", &[], None, 1.0),
                concept("c1", ElementKind::Criterion, "Costs", &[], Some("o1"), 1.0),
                concept("i1", ElementKind::Indicator, "Euro per year", &[], Some("c1"), 1.0),
            ],
            distractors: default_distractors(),
        }
    }

    /// 3 objectives, 8 criteria, 12 indicators. Every true sibling ratio is
    /// one of 1, 3, 5, 7, 9, so exact judgments reproduce the weights.
    pub fn pilot() -> Self {
        use ElementKind::*;
        GroundTruthSoo {
            goal: "Sustainable water supply for the region".into(),
            concepts: vec![
                concept("eco", Objective, "Economy", &["Economic efficiency"], None, 0.6),
                concept("env", Objective, "Environment", &["Ecology"], None, 0.2),
                concept("soc", Objective, "Society", &["Social acceptance"], None, 0.2),
                concept("inv", Criterion, "Investment costs", &["Capital costs"], Some("eco"), 0.6),
                concept("ops", Criterion, "Operating costs", &["Running costs"], Some("eco"), 0.2),
                concept("emp", Criterion, "Employment", &["Jobs"], Some("eco"), 0.2),
                concept("wat", Criterion, "Water quality", &["Quality of water"], Some("env"), 0.6),
                concept("bio", Criterion, "Biodiversity", &["Species diversity"], Some("env"), 0.2),
                concept("ene", Criterion, "Energy use", &["Energy consumption"], Some("env"), 0.2),
                concept("hlt", Criterion, "Public health", &["Health"], Some("soc"), 0.75),
                concept("acc", Criterion, "Access", &["Accessibility"], Some("soc"), 0.25),
                concept("i-inv", Indicator, "Euro per capita", &["EUR per inhabitant"], Some("inv"), 1.0),
                concept("i-ops1", Indicator, "Euro per cubic metre", &["EUR per m3"], Some("ops"), 0.75),
                concept("i-ops2", Indicator, "Maintenance hours", &["Service hours"], Some("ops"), 0.25),
                concept("i-wat1", Indicator, "Nitrate level", &["Nitrate concentration"], Some("wat"), 0.5),
                concept("i-wat2", Indicator, "Germ count", &["Bacteria count"], Some("wat"), 0.5),
                concept("i-bio", Indicator, "Species count", &["Number of species"], Some("bio"), 1.0),
                concept("i-ene1", Indicator, "Kilowatt hours per cubic metre", &["kWh per m3"], Some("ene"), 0.75),
                concept("i-ene2", Indicator, "Share of renewables", &["Renewable share"], Some("ene"), 0.25),
                concept("i-hlt1", Indicator, "Infections per year", &["Yearly infections"], Some("hlt"), 0.75),
                concept("i-hlt2", Indicator, "Hospital visits", &["Hospital admissions"], Some("hlt"), 0.25),
                concept("i-acc", Indicator, "Households connected", &["Connection rate"], Some("acc"), 1.0),
                concept("i-emp", Indicator, "Jobs created", &["New jobs"], Some("emp"), 1.0),
            ],
            distractors: default_distractors(),
        }
    }

    /// Like `tiny`, but the objective has two criteria so duplicates of a
    /// criterion have a sibling to be told apart from.
    pub fn merge_case() -> Self {
        use ElementKind::*;
        GroundTruthSoo {
            goal: "Reliable water supply".into(),
            concepts: vec![
                concept("eco", Objective, "Economy", &[], None, 1.0),
                concept("cost", Criterion, "Costs", &["Expenses"], Some("eco"), 0.75),
                concept("rev", Criterion, "Revenue", &[], Some("eco"), 0.25),
                concept("i-cost1", Indicator, "Euro per year", &[], Some("cost"), 0.75),
                concept("i-cost2", Indicator, "Staff hours", &[], Some("cost"), 0.25),
                concept("i-rev", Indicator, "Fees collected", &[], Some("rev"), 1.0),
            ],
            distractors: default_distractors(),
        }
    }
}

fn concept(
    id: &str,
    kind: ElementKind,
    name: &str,
    synonyms: &[&str],
    parent: Option<&str>,
    weight: f64,
) -> Concept {
    Concept {
        id: id.into(),
        kind,
        name: name.into(),
        synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
        parent: parent.map(str::to_string),
        weight,
    }
}

fn default_distractors() -> Vec<String> {
    [
        "Weather", "Tourism", "Traffic", "Color of pipes", "Political mood", "Noise",
        "Local pride", "Lunch quality",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
