//! State-aware random operation sequences covering every contract.
//!
//! Each step looks at the current ledger state to pick plausible amounts, so
//! most generated ops succeed; a small share is deliberately invalid to
//! exercise rejection.

use std::collections::BTreeSet;

use pact_core::custodian::{CustodianCall, KycEntity};
use pact_core::ledger::Genesis;
use pact_core::pool::{PoolCall, PoolFactoryCall, PoolSpec, POOLED_TOKEN_ID};
use pact_core::registry::{
    Duration, OperatorKey, OperatorUpdate, Rating, RegistryCall, TokenClass, TransferBatch, TransferItem,
};
use pact_core::{Address, ContentHash, ContractId, LedgerState, Operation, RetirementClaim, TokenId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WALLETS: [&str; 4] = ["alice", "bob", "carol", "dave"];
pub const ENTITIES: [&str; 3] = ["ent-acme", "ent-birch", "ent-cobalt"];
const ORACLES: [&str; 2] = ["oracle", "oracle-2"];

pub fn addr(s: &str) -> Address {
    Address::parse_any(s).expect("valid address")
}

pub fn cid(s: &str) -> ContractId {
    ContractId::new(s).expect("valid id")
}

pub fn registry() -> ContractId {
    cid("registry")
}

pub fn custodian() -> ContractId {
    cid("custodian")
}

pub fn pool() -> ContractId {
    cid("pool-0")
}

pub fn genesis() -> Genesis {
    Genesis::standard(addr(ORACLES[0]), addr("manager"))
}

fn class(token_id: TokenId, jurisdiction: &str, ratings: [Rating; 3]) -> TokenClass {
    TokenClass {
        token_id,
        project_name: format!("project-{token_id}"),
        jurisdiction: jurisdiction.into(),
        duration: Duration {
            start_year: 2012,
            end_year: 2042,
        },
        biodiversity: ratings[0],
        livelihood: ratings[1],
        justice: ratings[2],
        manifest_hash: ContentHash::of(format!("evaluation-{token_id}").as_bytes()),
        funding_source: "workload".into(),
    }
}

/// Token classes, one pool and three custodial entities.
pub fn setup_ops() -> Vec<Operation> {
    use Rating::*;
    let oracle = addr(ORACLES[0]);
    let mut ops: Vec<Operation> = [
        class(1, "SL", [A, A, B]),
        class(2, "LR", [B, B, B]),
        class(3, "GH", [A, A, A]),
        class(4, "SL", [C, A, A]),
    ]
    .into_iter()
    .map(|c| Operation::from_call(oracle.clone(), registry(), &RegistryCall::CreateToken(c)))
    .collect();
    ops.push(Operation::from_call(
        addr("pool-admin"),
        cid("pools"),
        &PoolFactoryCall::CreatePool(PoolSpec {
            min_biodiversity: B,
            min_livelihood: B,
            min_justice: C,
            allowed_jurisdictions: ["SL".to_string(), "LR".to_string()].into(),
            registry: registry(),
        }),
    ));
    for e in ENTITIES {
        ops.push(Operation::from_call(
            addr("manager"),
            custodian(),
            &CustodianCall::RegisterEntity(KycEntity {
                entity_id: e.into(),
                kyc_metadata: [("country".to_string(), "GB".to_string())].into(),
            }),
        ));
    }
    ops
}

fn claim(rng: &mut impl Rng) -> RetirementClaim {
    RetirementClaim {
        beneficiary: ["Acme Ltd", "Birch plc", "Cobalt Inc"].choose(rng).unwrap().to_string(),
        claim_metadata: format!("FY{}", rng.random_range(2020..2026)),
        on_behalf_of: None,
    }
}

fn amount_up_to(rng: &mut impl Rng, max: u64) -> u64 {
    if rng.random_bool(0.2) {
        max
    } else {
        rng.random_range(1..=max)
    }
}

/// Wallet holdings of registry tokens, (owner, token, balance).
fn wallet_holdings(state: &LedgerState) -> Vec<(Address, TokenId, u64)> {
    state
        .registry(&registry())
        .map(|r| {
            r.balances
                .iter()
                .filter(|((a, _), _)| !a.is_contract())
                .map(|((a, t), v)| (a.clone(), *t, *v))
                .collect()
        })
        .unwrap_or_default()
}

fn pooled_holdings(state: &LedgerState) -> Vec<(Address, u64)> {
    state
        .pool(&pool())
        .map(|p| {
            p.pool_balances
                .iter()
                .filter(|(a, _)| !a.is_contract())
                .map(|(a, v)| (a.clone(), *v))
                .collect()
        })
        .unwrap_or_default()
}

/// (contract, token, unattributed amount held by the custodian)
fn unattributed(state: &LedgerState) -> Vec<(ContractId, TokenId, u64)> {
    let me = custodian().address();
    let Some(c) = state.custodian(&custodian()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if let Some(r) = state.registry(&registry()) {
        for &t in r.token_classes.keys() {
            let held = r.balance_of(&me, t).unwrap_or(0);
            let free = held - c.attributed(&registry(), t).min(held);
            if free > 0 {
                out.push((registry(), t, free));
            }
        }
    }
    if let Some(p) = state.pool(&pool()) {
        let held = p.balance_of(&me);
        let free = held - c.attributed(&pool(), POOLED_TOKEN_ID).min(held);
        if free > 0 {
            out.push((pool(), POOLED_TOKEN_ID, free));
        }
    }
    out
}

fn entity_holdings(state: &LedgerState) -> Vec<(String, ContractId, TokenId, u64)> {
    state
        .custodian(&custodian())
        .map(|c| {
            c.internal_balances
                .iter()
                .map(|((e, k, t), v)| (e.clone(), k.clone(), *t, *v))
                .collect()
        })
        .unwrap_or_default()
}

fn mint(rng: &mut impl Rng, state: &LedgerState) -> Operation {
    let oracle = state
        .registry(&registry())
        .map(|r| r.oracle.clone())
        .unwrap_or_else(|| addr(ORACLES[0]));
    let owner = if rng.random_bool(0.15) {
        custodian().address()
    } else {
        addr(WALLETS.choose(rng).unwrap())
    };
    Operation::from_call(
        oracle,
        registry(),
        &RegistryCall::Mint {
            token_id: rng.random_range(1..=4),
            owner,
            amount: rng.random_range(1..=5_000),
            manifest_hash: ContentHash::of(b"workload evaluation"),
        },
    )
}

fn operator_key(owner: Address, operator: Address, token_id: TokenId) -> OperatorKey {
    OperatorKey {
        owner,
        operator,
        token_id,
    }
}

/// The next operation for `state`.
pub fn random_op(rng: &mut impl Rng, state: &LedgerState) -> Operation {
    let holdings = wallet_holdings(state);
    let roll = rng.random_range(0..100);
    if holdings.is_empty() && roll < 72 {
        return mint(rng, state);
    }
    let reg = state.registry(&registry());
    match roll {
        0..=11 => mint(rng, state),
        12..=26 => {
            let (from, token_id, bal) = holdings.choose(rng).unwrap().clone();
            let mut txs = vec![];
            let mut left = bal;
            for _ in 0..rng.random_range(1..=2) {
                if left == 0 {
                    break;
                }
                let to = if rng.random_bool(0.3) {
                    custodian().address()
                } else {
                    addr(WALLETS.choose(rng).unwrap())
                };
                let amount = amount_up_to(rng, left);
                left -= amount;
                txs.push(TransferItem { to, token_id, amount });
            }
            Operation::from_call(
                from.clone(),
                registry(),
                &RegistryCall::Transfer(vec![TransferBatch { from, txs }]),
            )
        }
        27..=32 => {
            let owner = addr(WALLETS.choose(rng).unwrap());
            let operator = if rng.random_bool(0.4) {
                pool().address()
            } else {
                addr(WALLETS.choose(rng).unwrap())
            };
            let key = operator_key(owner.clone(), operator, rng.random_range(1..=4));
            let update = if rng.random_bool(0.7) {
                OperatorUpdate::AddOperator(key)
            } else {
                OperatorUpdate::RemoveOperator(key)
            };
            Operation::from_call(owner, registry(), &RegistryCall::UpdateOperators(vec![update]))
        }
        33..=39 => {
            // operator-initiated transfer, if any wallet operator can act
            let ops: Vec<&OperatorKey> = reg
                .map(|r| {
                    r.operators
                        .iter()
                        .filter(|k| !k.operator.is_contract() && r.balance_of(&k.owner, k.token_id).unwrap_or(0) > 0)
                        .collect()
                })
                .unwrap_or_default();
            let Some(key) = ops.choose(rng) else {
                return mint(rng, state);
            };
            let bal = reg.unwrap().balance_of(&key.owner, key.token_id).unwrap();
            Operation::from_call(
                key.operator.clone(),
                registry(),
                &RegistryCall::Transfer(vec![TransferBatch {
                    from: key.owner.clone(),
                    txs: vec![TransferItem {
                        to: key.operator.clone(),
                        token_id: key.token_id,
                        amount: amount_up_to(rng, bal),
                    }],
                }]),
            )
        }
        40..=47 => {
            let (owner, token_id, bal) = holdings.choose(rng).unwrap().clone();
            Operation::from_call(
                owner,
                registry(),
                &RegistryCall::Retire {
                    owner: None,
                    token_id,
                    amount: amount_up_to(rng, bal),
                    claim: claim(rng),
                },
            )
        }
        48..=57 => {
            let (owner, token_id, bal) = holdings.choose(rng).unwrap().clone();
            let approved = reg.is_some_and(|r| r.is_operator(&owner, &pool().address(), token_id));
            if !approved {
                let key = operator_key(owner.clone(), pool().address(), token_id);
                return Operation::from_call(
                    owner,
                    registry(),
                    &RegistryCall::UpdateOperators(vec![OperatorUpdate::AddOperator(key)]),
                );
            }
            Operation::from_call(
                owner,
                pool(),
                &PoolCall::Deposit {
                    token_id,
                    amount: amount_up_to(rng, bal),
                },
            )
        }
        58..=62 => {
            let Some((owner, bal)) = pooled_holdings(state).choose(rng).cloned() else {
                return mint(rng, state);
            };
            let held: Vec<(TokenId, u64)> = state
                .pool(&pool())
                .map(|p| p.holdings.iter().map(|(t, v)| (*t, *v)).collect())
                .unwrap_or_default();
            let (token_id, in_pool) = *held.choose(rng).unwrap();
            Operation::from_call(
                owner,
                pool(),
                &PoolCall::Redeem {
                    token_id,
                    amount: amount_up_to(rng, bal.min(in_pool)),
                },
            )
        }
        63..=67 => {
            let Some((owner, bal)) = pooled_holdings(state).choose(rng).cloned() else {
                return mint(rng, state);
            };
            Operation::from_call(
                owner,
                pool(),
                &PoolCall::RetirePooled {
                    amount: amount_up_to(rng, bal),
                    claim: claim(rng),
                },
            )
        }
        68..=71 => {
            let Some((from, bal)) = pooled_holdings(state).choose(rng).cloned() else {
                return mint(rng, state);
            };
            let to = if rng.random_bool(0.5) {
                custodian().address()
            } else {
                addr(WALLETS.choose(rng).unwrap())
            };
            Operation::from_call(
                from.clone(),
                pool(),
                &PoolCall::Transfer(vec![TransferBatch {
                    from,
                    txs: vec![TransferItem {
                        to,
                        token_id: POOLED_TOKEN_ID,
                        amount: amount_up_to(rng, bal),
                    }],
                }]),
            )
        }
        72..=79 => {
            let Some((contract, token_id, free)) = unattributed(state).choose(rng).cloned() else {
                return mint(rng, state);
            };
            Operation::from_call(
                addr("manager"),
                custodian(),
                &CustodianCall::AttributeDeposit {
                    entity_id: ENTITIES.choose(rng).unwrap().to_string(),
                    contract,
                    token_id,
                    amount: amount_up_to(rng, free),
                },
            )
        }
        80..=93 => {
            let Some((entity, contract, token_id, bal)) = entity_holdings(state).choose(rng).cloned() else {
                return mint(rng, state);
            };
            let amount = amount_up_to(rng, bal);
            let call = match roll {
                80..=84 => CustodianCall::InternalTransfer {
                    from_entity: entity,
                    to_entity: ENTITIES.choose(rng).unwrap().to_string(),
                    contract,
                    token_id,
                    amount,
                },
                85..=88 => CustodianCall::ExternalTransfer {
                    from_entity: entity,
                    to: addr(WALLETS.choose(rng).unwrap()),
                    contract,
                    token_id,
                    amount,
                },
                _ => CustodianCall::RetireFor {
                    entity_id: entity,
                    contract,
                    token_id,
                    amount,
                    claim: claim(rng),
                },
            };
            Operation::from_call(addr("manager"), custodian(), &call)
        }
        94..=95 => {
            let current = reg.map(|r| r.oracle.clone()).unwrap_or_else(|| addr(ORACLES[0]));
            if rng.random_bool(0.5) {
                let next = ORACLES.iter().map(|s| addr(s)).find(|a| *a != current).unwrap();
                Operation::from_call(current, registry(), &RegistryCall::SetOracle { new_oracle: next })
            } else {
                Operation::from_call(
                    current,
                    registry(),
                    &RegistryCall::UpdateMetadata {
                        token_id: rng.random_range(1..=4),
                        manifest_hash: ContentHash::of(&rng.random::<[u8; 8]>()),
                    },
                )
            }
        }
        _ => invalid_op(rng, state),
    }
}

/// An op that must be rejected by the contracts.
pub fn invalid_op(rng: &mut impl Rng, state: &LedgerState) -> Operation {
    let wallet = addr(WALLETS.choose(rng).unwrap());
    match rng.random_range(0..5) {
        0 => Operation::from_call(
            wallet.clone(),
            registry(),
            &RegistryCall::Mint {
                token_id: 1,
                owner: wallet,
                amount: 10,
                manifest_hash: ContentHash::of(b"forged"),
            },
        ),
        1 => {
            let bal = state
                .registry(&registry())
                .and_then(|r| r.balance_of(&wallet, 1).ok())
                .unwrap_or(0);
            Operation::from_call(
                wallet.clone(),
                registry(),
                &RegistryCall::Retire {
                    owner: None,
                    token_id: 1,
                    amount: bal + 1,
                    claim: RetirementClaim::default(),
                },
            )
        }
        2 => Operation::from_call(wallet, pool(), &PoolCall::Deposit { token_id: 3, amount: 1 }),
        3 => Operation::from_call(
            wallet,
            custodian(),
            &CustodianCall::RegisterEntity(KycEntity {
                entity_id: "ent-rogue".into(),
                kyc_metadata: Default::default(),
            }),
        ),
        _ => Operation::new(wallet, registry(), "burn_everything", serde_json::json!({})),
    }
}

pub struct Workload {
    pub genesis: Genesis,
    /// Every attempted op, including rejected ones.
    pub ops: Vec<Operation>,
}

/// `steps` random ops after the fixed setup prefix, generated against a
/// scratch ledger.
pub fn generate(seed: u64, steps: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genesis = genesis();
    let mut state = LedgerState::from_genesis(&genesis).expect("genesis is valid");
    let mut ops = Vec::with_capacity(steps + 8);
    for op in setup_ops() {
        state.apply(op.clone()).expect("setup ops succeed");
        ops.push(op);
    }
    for _ in 0..steps {
        let op = random_op(&mut rng, &state);
        let _ = state.apply(op.clone());
        ops.push(op);
    }
    Workload { genesis, ops }
}

/// Set model of operator approvals, driven by the successful
/// `update_operators` ops in an op log.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct OperatorModel {
    pub approvals: BTreeSet<(String, String, TokenId)>,
}

impl OperatorModel {
    pub fn apply(&mut self, op: &Operation) {
        if op.entrypoint != "update_operators" || op.target != registry() {
            return;
        }
        for update in op.payload.as_array().expect("update list") {
            let (added, key) = match (update.get("add_operator"), update.get("remove_operator")) {
                (Some(k), None) => (true, k),
                (None, Some(k)) => (false, k),
                _ => panic!("unexpected operator update shape: {update}"),
            };
            let entry = (
                key["owner"].as_str().unwrap().to_string(),
                key["operator"].as_str().unwrap().to_string(),
                key["token_id"].as_u64().unwrap(),
            );
            if added {
                self.approvals.insert(entry);
            } else {
                self.approvals.remove(&entry);
            }
        }
    }

    pub fn matches(&self, state: &LedgerState) -> bool {
        let actual: BTreeSet<(String, String, TokenId)> = state
            .registry(&registry())
            .map(|r| {
                r.operators
                    .iter()
                    .map(|k| (k.owner.to_string(), k.operator.to_string(), k.token_id))
                    .collect()
            })
            .unwrap_or_default();
        actual == self.approvals
    }
}
