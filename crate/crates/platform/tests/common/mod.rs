#![allow(dead_code)]

use soo_core::catalog::{AnswerPayload, Choice, DuplicateAnswer, EiInstance, EiType, ParentChoice};
use soo_core::model::{ElementKind, ParticipantId};
use soo_core::participants::{SelfEstimation, StakeholderGroup};
use soo_platform::{MemoryStore, Platform, PlatformConfig, StepClock};

pub fn platform() -> Platform {
    Platform::open(
        Box::new(MemoryStore::new()),
        Box::new(StepClock::deterministic()),
        PlatformConfig::default(),
    )
    .unwrap()
}

/// Goal plus `n` experts who aced the intro test.
pub fn seeded(n: usize) -> (Platform, Vec<ParticipantId>) {
    let mut p = platform();
    p.define_goal("Sustainable water supply", "Pick a supply option", "One city")
        .unwrap();
    let keys: Vec<usize> = p
        .config()
        .intro_test
        .questions
        .iter()
        .map(|q| q.keyed)
        .collect();
    let ids = (0..n)
        .map(|i| {
            let (id, _) = p
                .register(&format!("expert {i}"), StakeholderGroup::Expert, SelfEstimation::Expert)
                .unwrap();
            p.submit_intro_test(id, &keys).unwrap();
            id
        })
        .collect();
    (p, ids)
}

/// A cooperative but naive answer: fixed names per level, always agreeing.
pub fn naive_answer(p: &Platform, instance: &EiInstance) -> AnswerPayload {
    let tree = &p.state().tree;
    match instance.ei_type {
        EiType::Name => {
            let target = tree.get(instance.targets[0]).unwrap();
            let text = match target.kind {
                ElementKind::Goal => "Economy",
                ElementKind::Objective => "Cost",
                _ => "Euro per year",
            };
            let text = if target.kind == ElementKind::Criterion
                || instance.question_text.to_lowercase().contains("defin")
            {
                format!("{text} of {}", target.name)
            } else {
                text.to_string()
            };
            AnswerPayload::Name { text }
        }
        EiType::Confirm => AnswerPayload::Confirm { choice: Choice::Yes },
        EiType::PrioritizePairwise => AnswerPayload::PrioritizePairwise { intensity: 1 },
        EiType::ChooseSetBased => AnswerPayload::ChooseSetBased {
            chosen: vec![instance.targets[0]],
        },
        EiType::IdentifyDuplicates => AnswerPayload::IdentifyDuplicates {
            answer: DuplicateAnswer::No,
        },
        EiType::DetermineCommonName => AnswerPayload::DetermineCommonName {
            text: tree.get(instance.targets[0]).unwrap().name.clone(),
        },
        EiType::SelectParentElement => AnswerPayload::SelectParentElement {
            choice: ParentChoice::Existing(
                tree.get(instance.targets[0]).unwrap().parent_id.unwrap(),
            ),
        },
    }
}

/// Rounds of everyone answering their whole page.
pub fn run_rounds(p: &mut Platform, ids: &[ParticipantId], rounds: u64) -> u64 {
    let mut answers = 0;
    for round in 0..rounds {
        for &id in ids {
            let page = p.stream(id, Some(10), round * 1000 + id.0).unwrap();
            for instance in page {
                if p.state().has_answered(id, instance.id) {
                    continue;
                }
                let payload = naive_answer(p, &instance);
                if p.submit_answer(instance.id, id, payload).is_ok() {
                    answers += 1;
                }
            }
        }
    }
    answers
}
