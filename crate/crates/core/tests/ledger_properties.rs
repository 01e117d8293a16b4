use pact_core::LedgerState;
use pact_testkit::ledger_oracle::{check_conservation, EventLedger};
use pact_testkit::workload::{self, OperatorModel};
use proptest::prelude::*;

/// Applies a workload op by op, checking every invariant after each step.
fn run_checked(seed: u64, steps: usize) -> LedgerState {
    let w = workload::generate(seed, steps);
    let mut state = LedgerState::from_genesis(&w.genesis).unwrap();
    let mut operators = OperatorModel::default();
    for op in w.ops {
        let before = state.state_hash();
        let events_before = state.event_log().len();
        match state.apply(op.clone()) {
            Ok(_) => operators.apply(&op),
            Err(_) => {
                assert_eq!(state.state_hash(), before, "rejected op changed state");
                assert_eq!(state.event_log().len(), events_before, "rejected op emitted events");
            }
        }
        check_conservation(&state).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        state.audit().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        EventLedger::from_events(state.event_log())
            .and_then(|l| l.check_against(&state))
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(operators.matches(&state), "seed {seed}: operator set diverged");
    }
    state
}

#[test]
fn workloads_conserve_tokens() {
    let mut applied = 0;
    for seed in 0..200 {
        applied += run_checked(seed, 80).op_log().len();
    }
    // most generated ops should be valid
    assert!(applied > 200 * 60, "only {applied} ops applied");
}

#[test]
fn workloads_touch_every_event_kind() {
    let mut tags = std::collections::BTreeSet::new();
    for seed in 0..20 {
        let state = run_checked(seed, 150);
        tags.extend(state.event_log().iter().map(|e| e.event.tag()));
    }
    for tag in [
        "MINT",
        "TRANSFER",
        "RETIRE",
        "OPERATOR_UPDATE",
        "ORACLE_ROTATED",
        "METADATA_UPDATED",
        "POOL_DEPOSIT",
        "POOL_REDEEM",
        "POOL_RETIRE",
        "ENTITY_REGISTERED",
        "DEPOSIT_ATTRIBUTED",
        "INTERNAL_TRANSFER",
        "EXTERNAL_TRANSFER",
        "CUSTODIAL_RETIRE",
    ] {
        assert!(tags.contains(tag), "no {tag} event generated");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_reproduces_state_hash(seed in any::<u64>(), steps in 1usize..120) {
        let w = workload::generate(seed, steps);
        let mut live = LedgerState::from_genesis(&w.genesis).unwrap();
        for op in w.ops {
            let _ = live.apply(op);
        }
        let logged: Vec<_> = live.op_log().iter().map(|l| l.op.clone()).collect();
        let replayed = LedgerState::replay(&w.genesis, logged.iter()).unwrap();
        prop_assert_eq!(replayed.state_hash(), live.state_hash());
        prop_assert_eq!(replayed.event_log(), live.event_log());
        prop_assert_eq!(replayed.op_log(), live.op_log());
    }

    #[test]
    fn supply_never_decreases_retired_never_decreases(seed in any::<u64>()) {
        let w = workload::generate(seed, 100);
        let mut state = LedgerState::from_genesis(&w.genesis).unwrap();
        let reg = workload::registry();
        let mut last = (std::collections::BTreeMap::new(), std::collections::BTreeMap::new());
        for op in w.ops {
            let _ = state.apply(op);
            let r = state.registry(&reg).unwrap();
            for (t, v) in &r.total_minted {
                prop_assert!(*v >= last.0.get(t).copied().unwrap_or(0));
            }
            for (t, v) in &r.total_retired {
                prop_assert!(*v >= last.1.get(t).copied().unwrap_or(0));
            }
            last = (r.total_minted.clone(), r.total_retired.clone());
        }
    }
}
