//! A crowd answering at random, with low thresholds so that creation,
//! validation, removal, merges and relocation all happen, checked after
//! every answer.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use soo_core::aggregator::{element_validity, AggregationPolicy};
use soo_core::catalog::{
    AnswerPayload, Choice, DuplicateAnswer, EiInstance, EiType, ParentChoice,
};
use soo_core::model::{normalize_name, ElementId, Seq, WEIGHT_SUM_TOLERANCE};
use soo_core::participants::{SelfEstimation, StakeholderGroup};
use soo_core::{Event, EventPayload};
use soo_platform::replay::replay;
use soo_platform::store::StoreError;
use soo_platform::{
    EventStore, MemoryStore, Platform, PlatformConfig, PlatformError, StepClock,
};

const NAMES: &[&str] = &["Economy", "economy ", "Ecology", "Costs", "Cost", "Jobs", "Water"];

fn loose_policy() -> AggregationPolicy {
    AggregationPolicy {
        min_confirm_weight: 2.0,
        min_reject_weight: 2.0,
        min_duplicate_answers: 2.0,
        min_structure_weight: 2.0,
        common_name_min_weight: 2.0,
        min_pairwise_weight: 1.0,
        stability_window: 3,
        naming_quota: 3,
        ..AggregationPolicy::default()
    }
}

/// Draws from a fixed list of numbers, cycling.
struct Dice {
    rolls: Vec<u32>,
    at: usize,
}

impl Dice {
    fn roll(&mut self, n: usize) -> usize {
        let v = self.rolls[self.at % self.rolls.len()];
        self.at += 1;
        v as usize % n.max(1)
    }
}

fn random_payload(instance: &EiInstance, dice: &mut Dice) -> AnswerPayload {
    let offered: Vec<ElementId> = instance.options.iter().filter_map(|o| o.element).collect();
    let name = |dice: &mut Dice| NAMES[dice.roll(NAMES.len())].to_string();
    match instance.ei_type {
        EiType::Name => AnswerPayload::Name { text: name(dice) },
        EiType::Confirm => AnswerPayload::Confirm {
            choice: [Choice::Yes, Choice::Yes, Choice::No, Choice::DontKnow][dice.roll(4)],
        },
        EiType::PrioritizePairwise => AnswerPayload::PrioritizePairwise {
            intensity: dice.roll(9) as i8 - 4,
        },
        EiType::ChooseSetBased => {
            let cap = instance.cap.unwrap_or(offered.len()).min(offered.len());
            let mut pool = offered.clone();
            let mut chosen = Vec::new();
            for _ in 0..dice.roll(cap + 1) {
                chosen.push(pool.remove(dice.roll(pool.len())));
            }
            AnswerPayload::ChooseSetBased { chosen }
        }
        EiType::IdentifyDuplicates => AnswerPayload::IdentifyDuplicates {
            answer: match dice.roll(5) {
                0 | 1 => DuplicateAnswer::Yes,
                2 => DuplicateAnswer::No,
                3 => DuplicateAnswer::DontKnow,
                _ => DuplicateAnswer::Overlap(dice.roll(7) as u8 + 1),
            },
        },
        EiType::DetermineCommonName => AnswerPayload::DetermineCommonName { text: name(dice) },
        EiType::SelectParentElement => AnswerPayload::SelectParentElement {
            choice: if offered.is_empty() || dice.roll(4) == 0 {
                ParentChoice::Alternative(name(dice))
            } else {
                ParentChoice::Existing(offered[dice.roll(offered.len())])
            },
        },
    }
}

fn crowd_platform() -> Platform {
    let config = PlatformConfig {
        policy: loose_policy(),
        ..PlatformConfig::default()
    };
    let mut p = Platform::open(
        Box::new(MemoryStore::new()),
        Box::new(StepClock::deterministic()),
        config,
    )
    .unwrap();
    p.define_goal("Water", "", "").unwrap();
    let keys: Vec<usize> = p.config().intro_test.questions.iter().map(|q| q.keyed).collect();
    for i in 0..6 {
        let (id, _) = p
            .register(&format!("p{i}"), StakeholderGroup::Expert, SelfEstimation::Expert)
            .unwrap();
        p.submit_intro_test(id, &keys).unwrap();
    }
    p
}

fn check_tree(p: &Platform) -> Result<(), TestCaseError> {
    let tree = &p.state().tree;
    prop_assert_eq!(tree.check_structure(), vec![]);
    let mut seen = BTreeSet::new();
    for e in tree.active_elements() {
        prop_assert!(
            seen.insert((e.parent_id, normalize_name(&e.name))),
            "sibling name clash on {:?}",
            e.name
        );
    }
    Ok(())
}

/// Runs `steps` random answers, checking invariants as it goes. Returns the
/// platform for comparison.
fn crowd_run(rolls: Vec<u32>, steps: usize) -> Result<Platform, TestCaseError> {
    let mut p = crowd_platform();
    let mut dice = Dice { rolls, at: 0 };
    let participants: Vec<_> = p.state().participants.keys().copied().collect();
    let mut ever_created = BTreeSet::new();
    for _ in 0..steps {
        let pid = participants[dice.roll(participants.len())];
        let page = p.stream(pid, Some(3), dice.roll(1000) as u64).unwrap();
        let Some(instance) = page.first().cloned() else {
            continue;
        };
        let payload = random_payload(&instance, &mut dice);
        let target = instance.targets.first().copied();
        let before = target
            .and_then(|t| p.state().tree.get(t))
            .map(|e| element_validity(&e.validity, &p.state().policy));
        let active_before = p.state().tree.active_elements().count();
        let last = p.state().seq;
        p.submit_answer(instance.id, pid, payload.clone()).unwrap();
        let fresh: Vec<Event> = p.events().unwrap().into_iter().filter(|e| e.seq > last).collect();

        check_tree(&p)?;
        for e in &fresh {
            match &e.event {
                EventPayload::ElementCreated { element } => {
                    ever_created.insert(element.id);
                }
                EventPayload::ElementsMerged { plan, .. } => {
                    ever_created.insert(plan.merged.id);
                }
                EventPayload::StaleAnswerAudited { reason, .. } => {
                    prop_assert!(!reason.contains("does not fit"), "unhandled answer: {}", reason);
                }
                EventPayload::WeightsComputed { weights, .. } => {
                    let mut sums: BTreeMap<Option<ElementId>, f64> = BTreeMap::new();
                    for (id, w) in &weights.weights {
                        *sums.entry(p.state().tree.get(*id).unwrap().parent_id).or_default() += w;
                    }
                    for s in sums.values() {
                        prop_assert!((s - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
                    }
                }
                _ => {}
            }
        }
        for id in &ever_created {
            prop_assert!(p.state().tree.get(*id).is_some(), "element {} vanished", id.0);
        }
        let shrank = p.state().tree.active_elements().count() < active_before;
        let retiring = fresh.iter().any(|e| {
            matches!(e.event, EventPayload::ElementRemoved { .. } | EventPayload::ElementsMerged { .. })
        });
        prop_assert!(!shrank || retiring, "active count fell without a removal or merge");

        // Confirmations push validity one way only.
        if let (Some(t), Some(before), AnswerPayload::Confirm { choice }) = (target, before, &payload) {
            let after = element_validity(&p.state().tree.get(t).unwrap().validity, &p.state().policy);
            match choice {
                Choice::Yes => prop_assert!(after >= before - 1e-12),
                Choice::No => prop_assert!(after <= before + 1e-12),
                Choice::DontKnow => prop_assert!((after - before).abs() <= 1e-12),
            }
        }
    }
    Ok(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_crowds_keep_the_tree_sound_and_replayable(
        rolls in proptest::collection::vec(any::<u32>(), 64..256),
    ) {
        let a = crowd_run(rolls.clone(), 120)?;
        let events = a.events().unwrap();
        prop_assert_eq!(&replay(&events).unwrap(), a.state());

        let b = crowd_run(rolls, 120)?;
        let payloads = |p: &Platform| -> Vec<EventPayload> {
            p.events().unwrap().into_iter().map(|e| e.event).collect()
        };
        prop_assert_eq!(payloads(&a), payloads(&b));
        prop_assert_eq!(a.state().tree.snapshot(), b.state().tree.snapshot());
    }
}

/// Fails every append after the first `ok` ones.
struct FlakyStore {
    inner: MemoryStore,
    ok: usize,
}

impl EventStore for FlakyStore {
    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        if self.inner.last_seq() as usize >= self.ok {
            return Err(StoreError::Io(std::io::Error::other("disk full")));
        }
        self.inner.append(event)
    }

    fn events(&self) -> Result<Vec<Event>, StoreError> {
        self.inner.events()
    }

    fn last_seq(&self) -> Seq {
        self.inner.last_seq()
    }
}

#[test]
fn nothing_is_acknowledged_before_it_is_stored() {
    let store = FlakyStore {
        inner: MemoryStore::new(),
        ok: 2,
    };
    let mut p = Platform::open(
        Box::new(store),
        Box::new(StepClock::deterministic()),
        PlatformConfig::default(),
    )
    .unwrap();
    p.define_goal("Water", "", "").unwrap();
    let err = p
        .register("Ada", StakeholderGroup::Expert, SelfEstimation::Expert)
        .unwrap_err();
    assert!(matches!(err, PlatformError::Storage(_)));
    assert!(p.state().participants.is_empty());
    assert_eq!(p.state().seq, 2);
    assert_eq!(p.events().unwrap().len(), 2);
}
