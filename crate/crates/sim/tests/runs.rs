use soo_core::model::Phase;
use soo_sim::run::{AnswerRange, SimError};
use soo_sim::{simulate, AgentProfile, GroundTruthSoo, Scenario, Schedule};

fn tiny(seed: u64) -> Scenario {
    Scenario {
        truth: GroundTruthSoo::tiny(),
        ..Scenario::noiseless(seed, 10)
    }
}

#[test]
fn zero_budget_runs_nothing() {
    let mut s = tiny(1);
    s.max_answers = 0;
    let run = simulate(&s).unwrap();
    assert_eq!(run.report.total_answers, 0);
    assert_eq!(run.report.milestone_seq, None);
    assert_eq!(run.report.structure_f1, 0.0);
}

#[test]
fn tiny_truth_is_recovered_exactly() {
    let run = simulate(&tiny(3)).unwrap();
    let r = &run.report;
    assert_eq!(run.platform.state().tree.phase(), Phase::Assessed);
    assert_eq!(r.structure_f1, 1.0);
    assert!(r.weight_rmse.unwrap() <= 1e-12);
    assert_eq!(r.repeat_deliveries, 0);
    assert!(r.milestone_seq.unwrap() < r.weights_seq.unwrap());
}

#[test]
fn same_scenario_same_run() {
    let s = Scenario::pilot(11);
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    assert_eq!(a.report.untimed(), b.report.untimed());
    let lines = |r: &soo_sim::SimRun| {
        r.events
            .iter()
            .map(|e| serde_json::to_string(&e.event).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(lines(&a), lines(&b));
    let c = simulate(&Scenario::pilot(12)).unwrap();
    assert_ne!(a.report.final_snapshot_hash, c.report.final_snapshot_hash);
}

#[test]
fn continuous_schedule_finishes() {
    let s = Scenario {
        schedule: Schedule::Continuous,
        ..tiny(5)
    };
    let run = simulate(&s).unwrap();
    assert_eq!(run.report.structure_f1, 1.0);
    assert_eq!(run.platform.state().tree.phase(), Phase::Assessed);
}

#[test]
fn bad_scenarios_are_rejected() {
    let mut s = tiny(1);
    s.agents.clear();
    assert!(matches!(simulate(&s), Err(SimError::NoAgents)));

    let mut s = tiny(1);
    s.agents[0] = AgentProfile { competency: 2.0, ..AgentProfile::perfect() };
    assert!(matches!(simulate(&s), Err(SimError::Profile(_))));

    let mut s = tiny(1);
    s.truth.concepts[0].weight = 0.3;
    assert!(matches!(simulate(&s), Err(SimError::Truth(_))));

    let mut s = tiny(1);
    s.policy.validate_rate = 0.0;
    assert!(matches!(simulate(&s), Err(SimError::Policy(_))));
}

#[test]
fn scenario_round_trips_as_json() {
    let s = Scenario::pilot(4);
    let text = serde_json::to_string(&s).unwrap();
    assert!(text.contains("\"mode\":\"rounds\""));
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    match back.schedule {
        Schedule::Rounds { answers_per_participant_per_round, .. } => {
            assert_eq!(answers_per_participant_per_round, AnswerRange { min: 8, max: 10 })
        }
        Schedule::Continuous => panic!("wrong mode"),
    }
}

/// Reliability should not make structure recovery worse.
#[test]
fn more_reliable_crowds_do_no_worse() {
    let mean_f1 = |r: f64| {
        (1..=20)
            .map(|seed| {
                let mut s = Scenario::pilot(seed);
                for a in &mut s.agents {
                    a.reliability = r;
                }
                simulate(&s).unwrap().report.structure_f1
            })
            .sum::<f64>()
            / 20.0
    };
    let (good, poor) = (mean_f1(0.9), mean_f1(0.6));
    assert!(good >= poor, "F1 {good} at r=0.9 vs {poor} at r=0.6");
}
