//! The seven elementary interactions: schema, prerequisites, question
//! rendering and answer payload validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregator::{PairKey, PairStats};
use crate::model::{EiId, Element, ElementId, ElementKind, ElementState, ParticipantId, Phase, Seq, SooTree};
use crate::participants::StakeholderGroup;
use crate::stream::GapItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EiType {
    Name,
    Confirm,
    PrioritizePairwise,
    ChooseSetBased,
    IdentifyDuplicates,
    DetermineCommonName,
    SelectParentElement,
}

impl EiType {
    pub const ALL: [EiType; 7] = [
        EiType::Name,
        EiType::Confirm,
        EiType::PrioritizePairwise,
        EiType::ChooseSetBased,
        EiType::IdentifyDuplicates,
        EiType::DetermineCommonName,
        EiType::SelectParentElement,
    ];

    pub fn id(self) -> u8 {
        match self {
            EiType::Name => 1,
            EiType::Confirm => 2,
            EiType::PrioritizePairwise => 3,
            EiType::ChooseSetBased => 4,
            EiType::IdentifyDuplicates => 5,
            EiType::DetermineCommonName => 6,
            EiType::SelectParentElement => 7,
        }
    }

    pub fn from_id(id: u8) -> Option<EiType> {
        EiType::ALL.into_iter().find(|t| t.id() == id)
    }

    /// Interactions that ask participants to invent names.
    pub fn is_creative(self) -> bool {
        matches!(self, EiType::Name | EiType::DetermineCommonName)
    }

    pub fn schema(self) -> EiSchema {
        use Category::*;
        use ElementKind::{Criterion, Indicator, Objective};
        let all = vec![Objective, Criterion, Indicator];
        let (description, category, elements, impact, sample, interaction) = match self {
            EiType::Name => (
                "Used to add new elements to the model. Therefore, it requires the explicit naming of such an element.",
                vec![Create],
                all,
                "Adds a new element of the given type to the model.",
                "Please name a criterion, which is important to assess the objective time.",
                "Typing in a name",
            ),
            EiType::Confirm => (
                "This EI is used to validate an element of a model by asking a user for confirmation.",
                vec![Validate],
                all,
                "Increases the validity.",
                "Is Direct Costs a valid criterion to assess the objective Economy?",
                "Choosing confirmation or rejection",
            ),
            EiType::PrioritizePairwise => (
                "This EI is used to prioritize an element of a model over another by asking a user.",
                vec![Validate, Weigh],
                all,
                "Weighs, Increases the validity.",
                "Which criterion is more important to describe the objective Economic Objective? Direct Costs or Indirect Costs?",
                "Choosing one of two choices.",
            ),
            EiType::ChooseSetBased => (
                "This EI is used to select the most relevant elements of a set. Depending on a customization, the selection may be ordered or unordered. It preferably should be implemented via Drag and Drop in a graphical user interface (GUI).",
                vec![Validate, Weigh],
                all,
                "Increases the validity.",
                "Which five of the following criteria are the most important Criteria for measuring Economic Objectives of a Travel Type? [Select in order of importance]",
                "Choosing up to five of the given set of elements.",
            ),
            EiType::IdentifyDuplicates => (
                "This EI identifies duplicate elements, which may differ in names, but probably have the same meaning.",
                vec![Validate, Restructure],
                all,
                "Increases the validity.",
                "Do you think, \"Indirect Costs\" and \"Direct Costs\" are the same criterion? [To which extent do the criteria \"Indirect Costs\" and \"Direct Costs overlap?]",
                "Answering with Yes or No. A variant of this EI could ask for the grade of identity on a scale from 0 to 100%.",
            ),
            EiType::DetermineCommonName => (
                "This EI asks the user for a common name for two or more elements.",
                vec![Name],
                all,
                "Determines the validity of an element resp. restructures the model, if a threshold validity has been reached.",
                "What is a common name for the criteria \"Direct Costs\" and \"Indirect Costs\"?",
                "Entering a name.",
            ),
            EiType::SelectParentElement => (
                "This EI asks the user for the appropriate parent element. It offers all available parents of the hierarchy level of its parent and lets the user choose the most appropriate parent element.",
                vec![Validate, Restructure],
                vec![Criterion, Indicator],
                "Determines the validity of an element resp. restructures the model, if a threshold validity has been reached.",
                "What is the most appropriate objective for the criterion \"Direct Costs\": Economical Objectives, Environmental Objectives or Social Objectives? [Provide an alternative objective, if no suggestion fits really well.]",
                "Choosing one of multiple choices [or entering the name of an alternative].",
            ),
        };
        EiSchema {
            id: self.id(),
            description: description.to_string(),
            category: category.into_iter().collect(),
            elements_affected: elements.into_iter().collect(),
            impact: impact.to_string(),
            sample_question: sample.to_string(),
            interaction: interaction.to_string(),
        }
    }
}

impl fmt::Display for EiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Create,
    Validate,
    Weigh,
    Restructure,
    Name,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EiSchema {
    pub id: u8,
    pub description: String,
    pub category: BTreeSet<Category>,
    pub elements_affected: BTreeSet<ElementKind>,
    pub impact: String,
    pub sample_question: String,
    pub interaction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EiOption {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementId>,
}

impl EiOption {
    fn text(label: &str) -> Self {
        EiOption {
            label: label.to_string(),
            element: None,
        }
    }

    fn element(e: &Element) -> Self {
        EiOption {
            label: e.name.clone(),
            element: Some(e.id),
        }
    }
}

pub const YES: &str = "Yes";
pub const NO: &str = "No";
pub const DONT_KNOW: &str = "I don't know";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EiInstance {
    pub id: EiId,
    #[serde(rename = "type")]
    pub ei_type: EiType,
    pub targets: Vec<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    pub question_text: String,
    pub options: Vec<EiOption>,
    /// The information gap this instance was generated for.
    pub gap: GapItem,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stakeholder_tags: Vec<StakeholderGroup>,
    pub created_at_seq: Seq,
}

impl EiInstance {
    pub fn offers(&self, id: ElementId) -> bool {
        self.options.iter().any(|o| o.element == Some(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Choice {
    Yes,
    No,
    DontKnow,
}

/// Answer to a duplicate question: the yes/no form, or overlap on a
/// 7-point scale which is binarized at 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DuplicateAnswer {
    Yes,
    No,
    DontKnow,
    Overlap(u8),
}

pub const OVERLAP_YES_LEVEL: u8 = 5;

impl DuplicateAnswer {
    pub fn binarized(self) -> Choice {
        match self {
            DuplicateAnswer::Yes => Choice::Yes,
            DuplicateAnswer::No => Choice::No,
            DuplicateAnswer::DontKnow => Choice::DontKnow,
            DuplicateAnswer::Overlap(level) if level >= OVERLAP_YES_LEVEL => Choice::Yes,
            DuplicateAnswer::Overlap(_) => Choice::No,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ParentChoice {
    Existing(ElementId),
    Alternative(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum AnswerPayload {
    Name { text: String },
    Confirm { choice: Choice },
    /// Positive intensity favours the first target.
    PrioritizePairwise { intensity: i8 },
    ChooseSetBased { chosen: Vec<ElementId> },
    IdentifyDuplicates { answer: DuplicateAnswer },
    DetermineCommonName { text: String },
    SelectParentElement { choice: ParentChoice },
}

impl AnswerPayload {
    pub fn ei_type(&self) -> EiType {
        match self {
            AnswerPayload::Name { .. } => EiType::Name,
            AnswerPayload::Confirm { .. } => EiType::Confirm,
            AnswerPayload::PrioritizePairwise { .. } => EiType::PrioritizePairwise,
            AnswerPayload::ChooseSetBased { .. } => EiType::ChooseSetBased,
            AnswerPayload::IdentifyDuplicates { .. } => EiType::IdentifyDuplicates,
            AnswerPayload::DetermineCommonName { .. } => EiType::DetermineCommonName,
            AnswerPayload::SelectParentElement { .. } => EiType::SelectParentElement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub ei_id: EiId,
    pub participant_id: ParticipantId,
    pub payload: AnswerPayload,
    pub at_seq: Seq,
}

pub const MAX_INTENSITY: i8 = 4;
pub const MAX_OVERLAP: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("payload for {got} does not fit a {expected} interaction")]
    VariantMismatch { expected: EiType, got: EiType },
    #[error("element {0} is not among the offered options")]
    UnknownOption(ElementId),
    #[error("{chosen} elements chosen but at most {cap} allowed")]
    OverCap { chosen: usize, cap: usize },
    #[error("element {0} chosen more than once")]
    DuplicateChoice(ElementId),
    #[error("text answer is empty")]
    EmptyText,
    #[error("intensity {0} outside -4..=4")]
    IntensityOutOfRange(i8),
    #[error("overlap level {0} outside 1..=7")]
    OverlapOutOfRange(u8),
}

pub fn validate_answer_payload(
    instance: &EiInstance,
    payload: &AnswerPayload,
) -> Result<(), PayloadError> {
    if payload.ei_type() != instance.ei_type {
        return Err(PayloadError::VariantMismatch {
            expected: instance.ei_type,
            got: payload.ei_type(),
        });
    }
    match payload {
        AnswerPayload::Name { text } | AnswerPayload::DetermineCommonName { text } => {
            if text.trim().is_empty() {
                return Err(PayloadError::EmptyText);
            }
        }
        AnswerPayload::Confirm { .. } => {}
        AnswerPayload::PrioritizePairwise { intensity } => {
            if intensity.abs() > MAX_INTENSITY {
                return Err(PayloadError::IntensityOutOfRange(*intensity));
            }
        }
        AnswerPayload::ChooseSetBased { chosen } => {
            let cap = instance.cap.unwrap_or(usize::MAX);
            if chosen.len() > cap {
                return Err(PayloadError::OverCap {
                    chosen: chosen.len(),
                    cap,
                });
            }
            let mut seen = BTreeSet::new();
            for id in chosen {
                if !instance.offers(*id) {
                    return Err(PayloadError::UnknownOption(*id));
                }
                if !seen.insert(*id) {
                    return Err(PayloadError::DuplicateChoice(*id));
                }
            }
        }
        AnswerPayload::IdentifyDuplicates { answer } => {
            if let DuplicateAnswer::Overlap(level) = answer {
                if !(1..=MAX_OVERLAP).contains(level) {
                    return Err(PayloadError::OverlapOutOfRange(*level));
                }
            }
        }
        AnswerPayload::SelectParentElement { choice } => match choice {
            ParentChoice::Existing(id) => {
                if !instance.offers(*id) {
                    return Err(PayloadError::UnknownOption(*id));
                }
            }
            ParentChoice::Alternative(text) => {
                if text.trim().is_empty() {
                    return Err(PayloadError::EmptyText);
                }
            }
        },
    }
    Ok(())
}

/// What an applicable interaction would be about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "camelCase")]
pub enum Target {
    Child { parent: ElementId, kind: ElementKind },
    Definition { element: ElementId },
    Element { element: ElementId },
    Pair { a: ElementId, b: ElementId },
    Group { parent: ElementId },
}

/// Validated elements of `kind`'s parent kind that could host `element`.
pub fn possible_parents(tree: &SooTree, element: &Element) -> Vec<ElementId> {
    let Some(parent_kind) = element.kind.parent_kind() else {
        return Vec::new();
    };
    tree.active_elements()
        .filter(|e| e.kind == parent_kind && e.state == ElementState::Validated)
        .map(|e| e.id)
        .collect()
}

/// Sibling groups of active elements, keyed by parent.
pub fn sibling_groups(tree: &SooTree) -> BTreeMap<ElementId, Vec<ElementId>> {
    let mut groups: BTreeMap<ElementId, Vec<ElementId>> = BTreeMap::new();
    for e in tree.active_elements() {
        if let Some(p) = e.parent_id {
            groups.entry(p).or_default().push(e.id);
        }
    }
    groups
}

fn pairs_of(ids: &[ElementId]) -> impl Iterator<Item = PairKey> + '_ {
    ids.iter()
        .enumerate()
        .flat_map(move |(i, &a)| ids[i + 1..].iter().map(move |&b| PairKey::new(a, b)))
}

/// Every (type, target) combination whose prerequisites currently hold.
pub fn applicable_ei_types(
    tree: &SooTree,
    pairs: &BTreeMap<PairKey, PairStats>,
    phase: Phase,
) -> BTreeSet<(EiType, Target)> {
    let mut out = BTreeSet::new();
    for e in tree.active_elements() {
        if e.state == ElementState::Validated {
            if let Some(kind) = e.kind.child_kind() {
                out.insert((EiType::Name, Target::Child { parent: e.id, kind }));
            }
            if e.kind != ElementKind::Goal {
                if e.definition.is_none() {
                    out.insert((EiType::Name, Target::Definition { element: e.id }));
                }
                if possible_parents(tree, e).len() >= 2 {
                    out.insert((EiType::SelectParentElement, Target::Element { element: e.id }));
                }
            }
        }
        if e.state == ElementState::Candidate {
            out.insert((EiType::Confirm, Target::Element { element: e.id }));
        }
    }

    for (parent, children) in sibling_groups(tree) {
        if children.len() >= 3 {
            out.insert((EiType::ChooseSetBased, Target::Group { parent }));
        }
        for key in pairs_of(&children) {
            let stats = pairs.get(&key);
            let resolved = stats.is_some_and(|s| s.resolved);
            if !resolved {
                out.insert((EiType::IdentifyDuplicates, Target::Pair { a: key.a, b: key.b }));
            }
            if stats.is_some_and(|s| s.proposed && !s.resolved) {
                out.insert((EiType::DetermineCommonName, Target::Pair { a: key.a, b: key.b }));
            }
        }
        if phase == Phase::Weighting {
            let validated: Vec<ElementId> = children
                .iter()
                .copied()
                .filter(|&c| tree.get(c).is_some_and(|e| e.state == ElementState::Validated))
                .collect();
            for key in pairs_of(&validated) {
                out.insert((EiType::PrioritizePairwise, Target::Pair { a: key.a, b: key.b }));
            }
        }
    }
    out
}

/// Elements a question is about, already resolved from the tree.
#[derive(Debug, Clone, Default)]
pub struct Prompt<'a> {
    pub targets: Vec<&'a Element>,
    /// Parent of the targets, where the wording needs it.
    pub parent: Option<&'a Element>,
    /// Candidate parents for `SelectParentElement`.
    pub alternatives: Vec<&'a Element>,
    /// Kind to be named for child-naming questions; `None` asks for a
    /// definition of the single target.
    pub child_kind: Option<ElementKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("{ei_type} needs {expected} targets, got {got}")]
    ArityMismatch {
        ei_type: EiType,
        expected: &'static str,
        got: usize,
    },
    #[error("{0} needs the parent of its targets")]
    MissingContext(EiType),
}

fn number_word(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

fn join_or(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {}", init.join(", "), last),
    }
}

fn join_and_quoted(names: &[&Element]) -> String {
    let quoted: Vec<String> = names.iter().map(|e| format!("\"{}\"", e.name)).collect();
    match quoted.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn arity(ei_type: EiType, prompt: &Prompt<'_>, ok: bool, expected: &'static str) -> Result<(), CatalogError> {
    if ok {
        Ok(())
    } else {
        Err(CatalogError::ArityMismatch {
            ei_type,
            expected,
            got: prompt.targets.len(),
        })
    }
}

/// Question text and answer options for one interaction. Pure: the same
/// prompt always renders to the same bytes.
pub fn render_question(
    ei_type: EiType,
    prompt: &Prompt<'_>,
    cap: Option<usize>,
) -> Result<(String, Vec<EiOption>), CatalogError> {
    let n = prompt.targets.len();
    let yes_no = || vec![EiOption::text(YES), EiOption::text(NO), EiOption::text(DONT_KNOW)];
    let parent = || prompt.parent.ok_or(CatalogError::MissingContext(ei_type));
    match ei_type {
        EiType::Name => {
            arity(ei_type, prompt, n == 1, "1")?;
            let subject = prompt.targets[0];
            let text = match prompt.child_kind {
                Some(kind) => format!(
                    "Please name {}, which is important to assess the {} {}.",
                    kind.with_article(),
                    subject.kind,
                    subject.name
                ),
                None => format!(
                    "Please give a short definition of the {} {}.",
                    subject.kind, subject.name
                ),
            };
            Ok((text, Vec::new()))
        }
        EiType::Confirm => {
            arity(ei_type, prompt, n == 1, "1")?;
            let e = prompt.targets[0];
            let p = parent()?;
            Ok((
                format!(
                    "Is {} a valid {} to assess the {} {}?",
                    e.name, e.kind, p.kind, p.name
                ),
                yes_no(),
            ))
        }
        EiType::PrioritizePairwise => {
            arity(ei_type, prompt, n == 2, "2")?;
            let (a, b) = (prompt.targets[0], prompt.targets[1]);
            let p = parent()?;
            Ok((
                format!(
                    "Which {} is more important to describe the {} {}? {} or {}?",
                    a.kind, p.kind, p.name, a.name, b.name
                ),
                vec![EiOption::element(a), EiOption::element(b)],
            ))
        }
        EiType::ChooseSetBased => {
            arity(ei_type, prompt, n >= 2, "at least 2")?;
            let p = parent()?;
            let kind = prompt.targets[0].kind;
            let k = cap.unwrap_or(n).min(n);
            Ok((
                format!(
                    "Which {} of the following {} are the most important {} for measuring the {} {}? [Select in order of importance]",
                    number_word(k),
                    kind.plural(),
                    kind.plural(),
                    p.kind,
                    p.name
                ),
                prompt.targets.iter().map(|e| EiOption::element(e)).collect(),
            ))
        }
        EiType::IdentifyDuplicates => {
            arity(ei_type, prompt, n == 2, "2")?;
            let (a, b) = (prompt.targets[0], prompt.targets[1]);
            Ok((
                format!(
                    "Do you think, \"{}\" and \"{}\" are the same {}?",
                    a.name, b.name, a.kind
                ),
                yes_no(),
            ))
        }
        EiType::DetermineCommonName => {
            arity(ei_type, prompt, n >= 2, "at least 2")?;
            let kind = prompt.targets[0].kind;
            Ok((
                format!(
                    "What is a common name for the {} {}?",
                    kind.plural(),
                    join_and_quoted(&prompt.targets)
                ),
                Vec::new(),
            ))
        }
        EiType::SelectParentElement => {
            arity(ei_type, prompt, n == 1, "1")?;
            let e = prompt.targets[0];
            let parent_kind = e.kind.parent_kind().ok_or(CatalogError::MissingContext(ei_type))?;
            let names: Vec<String> = prompt.alternatives.iter().map(|a| a.name.clone()).collect();
            Ok((
                format!(
                    "What is the most appropriate {} for the {} \"{}\": {}? [Provide an alternative {}, if no suggestion fits really well.]",
                    parent_kind,
                    e.kind,
                    e.name,
                    join_or(&names),
                    parent_kind
                ),
                prompt.alternatives.iter().map(|a| EiOption::element(a)).collect(),
            ))
        }
    }
}
