//! Deterministic single-chain simulation kernel.
//!
//! Operations are applied one at a time. Each application either commits
//! fully or leaves the state untouched. Events go to an append-only log that
//! is kept apart from contract storage, and the state hash covers contract
//! storage only.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::address::{Address, ContractId, TokenId};
use crate::canonical::{encode_tag, Canonical, ContentHash};
use crate::custodian::{CustodianCall, CustodianError, CustodianState, TokenCallError, TokenLedger};
use crate::event::{EmittedEvent, Event, RetirementClaim};
use crate::pool::{
    Emitted, PoolCall, PoolError, PoolFactoryCall, PoolFactoryState, PoolSpec, PoolState, POOLED_TOKEN_ID,
};
use crate::registry::{RegistryCall, RegistryError, RegistryState, TokenClass, TransferBatch, TransferItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum Contract {
    Registry(RegistryState),
    PoolFactory(PoolFactoryState),
    Pool(PoolState),
    Custodian(CustodianState),
}

impl Contract {
    pub fn kind(&self) -> &'static str {
        match self {
            Contract::Registry(_) => "registry",
            Contract::PoolFactory(_) => "pool_factory",
            Contract::Pool(_) => "pool",
            Contract::Custodian(_) => "custodian",
        }
    }
}

impl Canonical for Contract {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Contract::Registry(s) => {
                encode_tag(0, out);
                s.encode(out);
            }
            Contract::PoolFactory(s) => {
                encode_tag(1, out);
                s.encode(out);
            }
            Contract::Pool(s) => {
                encode_tag(2, out);
                s.encode(out);
            }
            Contract::Custodian(s) => {
                encode_tag(3, out);
                s.encode(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("pool: {0}")]
    Pool(#[from] PoolError),
    #[error("custodian: {0}")]
    Custodian(#[from] CustodianError),
    #[error("contract id {0} is already taken")]
    DuplicateContract(ContractId),
}

/// All deployed contracts, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractSet(BTreeMap<ContractId, Contract>);

impl Canonical for ContractSet {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
    }
}

impl ContractSet {
    pub fn get(&self, id: &ContractId) -> Option<&Contract> {
        self.0.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ContractId, &Contract)> {
        self.0.iter()
    }

    pub fn registry(&self, id: &ContractId) -> Option<&RegistryState> {
        match self.0.get(id) {
            Some(Contract::Registry(r)) => Some(r),
            _ => None,
        }
    }

    pub fn pool(&self, id: &ContractId) -> Option<&PoolState> {
        match self.0.get(id) {
            Some(Contract::Pool(p)) => Some(p),
            _ => None,
        }
    }

    pub fn custodian(&self, id: &ContractId) -> Option<&CustodianState> {
        match self.0.get(id) {
            Some(Contract::Custodian(c)) => Some(c),
            _ => None,
        }
    }

    fn registry_mut(&mut self, id: &ContractId) -> Option<&mut RegistryState> {
        match self.0.get_mut(id) {
            Some(Contract::Registry(r)) => Some(r),
            _ => None,
        }
    }

    fn insert_new(&mut self, id: ContractId, contract: Contract) -> Result<(), ContractError> {
        if self.0.contains_key(&id) {
            return Err(ContractError::DuplicateContract(id));
        }
        self.0.insert(id, contract);
        Ok(())
    }

    /// Runs `f` with the pool detached from the set, so the pool and its
    /// registry can be borrowed mutably at the same time.
    fn with_pool<R>(&mut self, id: &ContractId, f: impl FnOnce(&mut PoolState, &mut ContractSet) -> R) -> Option<R> {
        let Some(Contract::Pool(mut pool)) = self.0.remove(id) else {
            return None;
        };
        let out = f(&mut pool, self);
        self.0.insert(id.clone(), Contract::Pool(pool));
        Some(out)
    }

    fn pool_with_registry(
        &mut self,
        pool_id: &ContractId,
        f: impl FnOnce(&mut PoolState, &mut RegistryState) -> Result<(), PoolError>,
    ) -> Result<(), PoolError> {
        self.with_pool(pool_id, |pool, rest| {
            let registry_id = pool.spec.registry.clone();
            let registry = rest
                .registry_mut(&registry_id)
                .ok_or(PoolError::UnknownRegistry(registry_id))?;
            f(pool, registry)
        })
        .expect("caller checked the pool exists")
    }
}

impl TokenLedger for ContractSet {
    fn balance(&self, contract: &ContractId, holder: &Address, token_id: TokenId) -> Result<u64, TokenCallError> {
        match self.0.get(contract) {
            Some(Contract::Registry(r)) => Ok(r.balance_of(holder, token_id)?),
            Some(Contract::Pool(p)) => {
                if token_id != POOLED_TOKEN_ID {
                    return Err(PoolError::UnknownToken(token_id).into());
                }
                Ok(p.balance_of(holder))
            }
            Some(_) => Err(TokenCallError::NotTokenContract(contract.clone())),
            None => Err(TokenCallError::UnknownContract(contract.clone())),
        }
    }

    fn transfer(
        &mut self,
        contract: &ContractId,
        from: &Address,
        to: &Address,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), TokenCallError> {
        let batch = [TransferBatch {
            from: from.clone(),
            txs: vec![TransferItem {
                to: to.clone(),
                token_id,
                amount,
            }],
        }];
        match self.0.get_mut(contract) {
            Some(Contract::Registry(r)) => {
                let events = r.transfer(from, &batch)?;
                emitted.extend(events.into_iter().map(|e| (contract.clone(), e)));
                Ok(())
            }
            Some(Contract::Pool(p)) => Ok(p.transfer(contract, from, &batch, emitted)?),
            Some(_) => Err(TokenCallError::NotTokenContract(contract.clone())),
            None => Err(TokenCallError::UnknownContract(contract.clone())),
        }
    }

    fn retire(
        &mut self,
        contract: &ContractId,
        owner: &Address,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
        emitted: &mut Emitted,
    ) -> Result<(), TokenCallError> {
        match self.0.get_mut(contract) {
            Some(Contract::Registry(r)) => {
                let events = r.retire(owner, owner, token_id, amount, claim)?;
                emitted.extend(events.into_iter().map(|e| (contract.clone(), e)));
                Ok(())
            }
            Some(Contract::Pool(_)) => {
                if token_id != POOLED_TOKEN_ID {
                    return Err(PoolError::UnknownToken(token_id).into());
                }
                Ok(self.pool_with_registry(contract, |pool, registry| {
                    pool.retire_pooled(contract, registry, owner, amount, claim, emitted)
                })?)
            }
            Some(_) => Err(TokenCallError::NotTokenContract(contract.clone())),
            None => Err(TokenCallError::UnknownContract(contract.clone())),
        }
    }
}

/// A submitted operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub source: Address,
    pub target: ContractId,
    pub entrypoint: String,
    pub payload: Value,
}

impl Operation {
    pub fn new(source: Address, target: ContractId, entrypoint: &str, payload: Value) -> Self {
        Operation {
            source,
            target,
            entrypoint: entrypoint.to_string(),
            payload,
        }
    }

    /// Builds an operation from a typed call (`{"entrypoint", "payload"}` shape).
    pub fn from_call<C: Serialize>(source: Address, target: ContractId, call: &C) -> Self {
        let mut value = serde_json::to_value(call).expect("calls serialize");
        let entrypoint = value["entrypoint"]
            .as_str()
            .expect("calls are tagged with their entrypoint")
            .to_string();
        let payload = value
            .as_object_mut()
            .and_then(|o| o.remove("payload"))
            .unwrap_or(Value::Null);
        Operation {
            source,
            target,
            entrypoint,
            payload,
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        serde_json::to_vec(&self.payload).expect("json value serializes").len() as u64
    }
}

/// An applied operation as recorded in the op log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedOp {
    pub index: u64,
    pub payload_bytes: u64,
    #[serde(flatten)]
    pub op: Operation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("operations cannot originate from contract address {0}")]
    ContractSource(Address),
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("contract {contract} has no entrypoint {entrypoint:?}")]
    UnknownEntrypoint { contract: ContractId, entrypoint: String },
    #[error("malformed payload for {entrypoint}: {reason}")]
    MalformedPayload { entrypoint: String, reason: String },
    #[error("{0}")]
    Contract(#[from] ContractError),
}

enum Call {
    Registry(RegistryCall),
    Factory(PoolFactoryCall),
    Pool(PoolCall),
    Custodian(CustodianCall),
}

fn decode<T: DeserializeOwned>(
    entrypoints: &[&str],
    contract: &ContractId,
    entrypoint: &str,
    payload: &Value,
) -> Result<T, LedgerError> {
    if !entrypoints.contains(&entrypoint) {
        return Err(LedgerError::UnknownEntrypoint {
            contract: contract.clone(),
            entrypoint: entrypoint.to_string(),
        });
    }
    let tagged = serde_json::json!({ "entrypoint": entrypoint, "payload": payload });
    serde_json::from_value(tagged).map_err(|e| LedgerError::MalformedPayload {
        entrypoint: entrypoint.to_string(),
        reason: e.to_string(),
    })
}

impl ContractSet {
    fn decode_call(&self, op: &Operation) -> Result<Call, LedgerError> {
        let contract = self
            .0
            .get(&op.target)
            .ok_or_else(|| LedgerError::UnknownContract(op.target.clone()))?;
        let (t, e, p) = (&op.target, op.entrypoint.as_str(), &op.payload);
        Ok(match contract {
            Contract::Registry(_) => Call::Registry(decode(RegistryCall::ENTRYPOINTS, t, e, p)?),
            Contract::PoolFactory(_) => Call::Factory(decode(PoolFactoryCall::ENTRYPOINTS, t, e, p)?),
            Contract::Pool(_) => Call::Pool(decode(PoolCall::ENTRYPOINTS, t, e, p)?),
            Contract::Custodian(_) => Call::Custodian(decode(CustodianCall::ENTRYPOINTS, t, e, p)?),
        })
    }

    fn execute(
        &mut self,
        target: &ContractId,
        source: &Address,
        call: Call,
        emitted: &mut Emitted,
    ) -> Result<(), ContractError> {
        match call {
            Call::Registry(call) => {
                let registry = self.registry_mut(target).expect("decoded against this kind");
                let events = registry.execute(source, call)?;
                emitted.extend(events.into_iter().map(|e| (target.clone(), e)));
                Ok(())
            }
            Call::Factory(PoolFactoryCall::CreatePool(spec)) => self.create_pool(target, spec),
            Call::Pool(call) => {
                let result =
                    match call {
                        PoolCall::Deposit { token_id, amount } => self
                            .pool_with_registry(target, |p, r| p.deposit(target, r, source, token_id, amount, emitted)),
                        PoolCall::Redeem { token_id, amount } => self
                            .pool_with_registry(target, |p, r| p.redeem(target, r, source, token_id, amount, emitted)),
                        PoolCall::RetirePooled { amount, claim } => self.pool_with_registry(target, |p, r| {
                            p.retire_pooled(target, r, source, amount, claim, emitted)
                        }),
                        PoolCall::Transfer(batch) => match self.0.get_mut(target) {
                            Some(Contract::Pool(p)) => p.transfer(target, source, &batch, emitted),
                            _ => unreachable!("decoded against this kind"),
                        },
                    };
                Ok(result?)
            }
            Call::Custodian(call) => {
                let Some(Contract::Custodian(mut custodian)) = self.0.remove(target) else {
                    unreachable!("decoded against this kind");
                };
                let result = self.execute_custodian(&mut custodian, target, source, call, emitted);
                self.0.insert(target.clone(), Contract::Custodian(custodian));
                Ok(result?)
            }
        }
    }

    fn execute_custodian(
        &mut self,
        custodian: &mut CustodianState,
        me: &ContractId,
        source: &Address,
        call: CustodianCall,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        match call {
            CustodianCall::RegisterEntity(entity) => custodian.register_entity(me, source, entity, emitted),
            CustodianCall::AttributeDeposit {
                entity_id,
                contract,
                token_id,
                amount,
            } => custodian.attribute_deposit(me, self, source, &entity_id, &contract, token_id, amount, emitted),
            CustodianCall::InternalTransfer {
                from_entity,
                to_entity,
                contract,
                token_id,
                amount,
            } => custodian.internal_transfer(
                me,
                source,
                &from_entity,
                &to_entity,
                &contract,
                token_id,
                amount,
                emitted,
            ),
            CustodianCall::ExternalTransfer {
                from_entity,
                to,
                contract,
                token_id,
                amount,
            } => custodian.external_transfer(
                me,
                self,
                source,
                &from_entity,
                &to,
                &contract,
                token_id,
                amount,
                emitted,
            ),
            CustodianCall::RetireFor {
                entity_id,
                contract,
                token_id,
                amount,
                claim,
            } => custodian.retire_for(
                me, self, source, &entity_id, &contract, token_id, amount, claim, emitted,
            ),
        }
    }

    fn create_pool(&mut self, factory_id: &ContractId, spec: PoolSpec) -> Result<(), ContractError> {
        if self.registry(&spec.registry).is_none() {
            return Err(PoolError::UnknownRegistry(spec.registry).into());
        }
        let Some(Contract::PoolFactory(factory)) = self.0.get_mut(factory_id) else {
            unreachable!("decoded against this kind");
        };
        let pool_id = factory.next_pool_id();
        factory.created += 1;
        self.insert_new(pool_id, Contract::Pool(PoolState::new(spec)))
    }

    /// Checks conservation, pool backing and custody consistency.
    pub fn audit(&self) -> Result<(), String> {
        for (id, contract) in &self.0 {
            match contract {
                Contract::Registry(r) => {
                    for &token_id in r.token_classes.keys() {
                        let minted = r.total_minted(token_id);
                        let held = r.circulating(token_id);
                        let retired = r.total_retired(token_id);
                        if minted != held + retired {
                            return Err(format!(
                                "{id}/{token_id}: minted {minted} != balances {held} + retired {retired}"
                            ));
                        }
                    }
                }
                Contract::Pool(p) => {
                    let registry = self
                        .registry(&p.spec.registry)
                        .ok_or_else(|| format!("{id}: registry {} missing", p.spec.registry))?;
                    p.check_invariants(registry).map_err(|e| format!("{id}: {e}"))?;
                    for (&token_id, &held) in &p.holdings {
                        let on_chain = registry.balance_of(&id.address(), token_id).unwrap_or(0);
                        if on_chain < held {
                            return Err(format!(
                                "{id}: holds {held} of {token_id} but registry shows {on_chain}"
                            ));
                        }
                    }
                }
                Contract::Custodian(c) => c.check_consistency(id, self)?,
                Contract::PoolFactory(_) => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub owner: Address,
    pub token_id: TokenId,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractInit {
    Registry {
        oracle: Address,
        #[serde(default)]
        tokens: Vec<TokenClass>,
        /// Funded balances at genesis, recorded as op-0 MINT events.
        #[serde(default)]
        allocations: Vec<Allocation>,
    },
    PoolFactory,
    Pool {
        spec: PoolSpec,
    },
    Custodian {
        manager: Address,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisContract {
    pub id: ContractId,
    #[serde(flatten)]
    pub init: ContractInit,
}

/// Initial contract instantiations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Genesis {
    pub contracts: Vec<GenesisContract>,
}

impl Genesis {
    /// Registry `registry`, factory `pools` and custodian `custodian`.
    pub fn standard(oracle: Address, custodian_manager: Address) -> Self {
        let id = |s: &str| ContractId::new(s).expect("static id");
        Genesis {
            contracts: vec![
                GenesisContract {
                    id: id("registry"),
                    init: ContractInit::Registry {
                        oracle,
                        tokens: Vec::new(),
                        allocations: Vec::new(),
                    },
                },
                GenesisContract {
                    id: id("pools"),
                    init: ContractInit::PoolFactory,
                },
                GenesisContract {
                    id: id("custodian"),
                    init: ContractInit::Custodian {
                        manager: custodian_manager,
                    },
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenesisError {
    #[error("genesis: {0}")]
    Contract(#[from] ContractError),
    #[error("genesis pool references missing registry {0}")]
    UnknownRegistry(ContractId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error("op {index}: {error}")]
    Op { index: u64, error: LedgerError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerState {
    contracts: ContractSet,
    op_log: Vec<LoggedOp>,
    event_log: Vec<EmittedEvent>,
}

impl LedgerState {
    pub fn from_genesis(genesis: &Genesis) -> Result<Self, GenesisError> {
        let mut contracts = ContractSet::default();
        let mut events = Vec::new();
        // registries first so pools can reference any of them
        let mut ordered: Vec<&GenesisContract> = genesis.contracts.iter().collect();
        ordered.sort_by_key(|c| !matches!(c.init, ContractInit::Registry { .. }));
        for entry in ordered {
            let contract = match &entry.init {
                ContractInit::Registry {
                    oracle,
                    tokens,
                    allocations,
                } => {
                    let mut registry = RegistryState::new(oracle.clone());
                    for class in tokens {
                        registry
                            .create_token(oracle, class.clone())
                            .map_err(ContractError::from)?;
                    }
                    for a in allocations {
                        registry
                            .credit(a.token_id, &a.owner, a.amount)
                            .map_err(ContractError::from)?;
                        let manifest_hash = registry
                            .token_class(a.token_id)
                            .ok_or(ContractError::Registry(RegistryError::UnknownToken(a.token_id)))?
                            .manifest_hash;
                        events.push(EmittedEvent {
                            op_index: 0,
                            contract: entry.id.clone(),
                            event: Event::Mint {
                                token_id: a.token_id,
                                owner: a.owner.clone(),
                                amount: a.amount,
                                manifest_hash,
                            },
                        });
                    }
                    Contract::Registry(registry)
                }
                ContractInit::PoolFactory => Contract::PoolFactory(PoolFactoryState::default()),
                ContractInit::Pool { spec } => {
                    if contracts.registry(&spec.registry).is_none() {
                        return Err(GenesisError::UnknownRegistry(spec.registry.clone()));
                    }
                    Contract::Pool(PoolState::new(spec.clone()))
                }
                ContractInit::Custodian { manager } => Contract::Custodian(CustodianState::new(manager.clone())),
            };
            contracts.insert_new(entry.id.clone(), contract)?;
        }
        Ok(LedgerState {
            contracts,
            op_log: Vec::new(),
            event_log: events,
        })
    }

    /// Applies one operation atomically and returns the events it emitted.
    pub fn apply(&mut self, op: Operation) -> Result<Vec<EmittedEvent>, LedgerError> {
        if op.source.is_contract() {
            return Err(LedgerError::ContractSource(op.source));
        }
        let call = self.contracts.decode_call(&op)?;
        let mut working = self.contracts.clone();
        let mut emitted = Vec::new();
        working.execute(&op.target, &op.source, call, &mut emitted)?;

        self.contracts = working;
        let index = self.op_log.len() as u64 + 1;
        let events: Vec<EmittedEvent> = emitted
            .into_iter()
            .map(|(contract, event)| EmittedEvent {
                op_index: index,
                contract,
                event,
            })
            .collect();
        self.event_log.extend(events.iter().cloned());
        self.op_log.push(LoggedOp {
            index,
            payload_bytes: op.payload_bytes(),
            op,
        });
        Ok(events)
    }

    /// Rebuilds a ledger from genesis and a log of previously applied ops.
    pub fn replay<'a>(genesis: &Genesis, ops: impl IntoIterator<Item = &'a Operation>) -> Result<Self, ReplayError> {
        let mut state = LedgerState::from_genesis(genesis)?;
        for (i, op) in ops.into_iter().enumerate() {
            state.apply(op.clone()).map_err(|error| ReplayError::Op {
                index: i as u64 + 1,
                error,
            })?;
        }
        Ok(state)
    }

    /// SHA-256 of the canonical encoding of every contract's storage.
    pub fn state_hash(&self) -> ContentHash {
        self.contracts.canonical_hash()
    }

    pub fn contracts(&self) -> &ContractSet {
        &self.contracts
    }

    pub fn op_log(&self) -> &[LoggedOp] {
        &self.op_log
    }

    pub fn event_log(&self) -> &[EmittedEvent] {
        &self.event_log
    }

    /// Drops the event log. Contract state, and so the state hash, is unaffected.
    pub fn clear_events(&mut self) {
        self.event_log.clear();
    }

    pub fn registry(&self, id: &ContractId) -> Option<&RegistryState> {
        self.contracts.registry(id)
    }

    pub fn pool(&self, id: &ContractId) -> Option<&PoolState> {
        self.contracts.pool(id)
    }

    pub fn custodian(&self, id: &ContractId) -> Option<&CustodianState> {
        self.contracts.custodian(id)
    }

    pub fn audit(&self) -> Result<(), String> {
        self.contracts.audit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{Duration, Rating};
    use serde_json::json;

    fn addr(s: &str) -> Address {
        Address::new(s).unwrap()
    }

    fn id(s: &str) -> ContractId {
        ContractId::new(s).unwrap()
    }

    fn funded_genesis() -> Genesis {
        let mut g = Genesis::standard(addr("oracle"), addr("manager"));
        if let ContractInit::Registry {
            tokens, allocations, ..
        } = &mut g.contracts[0].init
        {
            tokens.push(TokenClass {
                token_id: 0,
                project_name: "demo".into(),
                jurisdiction: "SL".into(),
                duration: Duration {
                    start_year: 2012,
                    end_year: 2042,
                },
                biodiversity: Rating::A,
                livelihood: Rating::A,
                justice: Rating::A,
                manifest_hash: ContentHash::of(b"m"),
                funding_source: String::new(),
            });
            allocations.push(Allocation {
                owner: addr("alice"),
                token_id: 0,
                amount: 100,
            });
            allocations.push(Allocation {
                owner: addr("bob"),
                token_id: 0,
                amount: 50,
            });
        }
        g
    }

    fn transfer_op(from: &str, to: &str, amount: u64) -> Operation {
        Operation::new(
            addr(from),
            id("registry"),
            "transfer",
            json!([{ "from": from, "txs": [{ "to": to, "token_id": 0, "amount": amount }] }]),
        )
    }

    #[test]
    fn genesis_allocations_emit_mint_events() {
        let ledger = LedgerState::from_genesis(&funded_genesis()).unwrap();
        assert_eq!(ledger.event_log().len(), 2);
        assert!(ledger.event_log().iter().all(|e| e.op_index == 0));
        let r = ledger.registry(&id("registry")).unwrap();
        assert_eq!(r.total_minted(0), 150);
        ledger.audit().unwrap();
    }

    #[test]
    fn zero_transfer_between_funded_addresses() {
        let mut ledger = LedgerState::from_genesis(&funded_genesis()).unwrap();
        let before = ledger.state_hash();
        ledger.apply(transfer_op("alice", "bob", 0)).unwrap();
        assert_eq!(ledger.state_hash(), before);
        assert_eq!(ledger.op_log().len(), 1);
    }

    #[test]
    fn rejections_leave_state_intact() {
        let mut ledger = LedgerState::from_genesis(&funded_genesis()).unwrap();
        let before = ledger.state_hash();
        let mut op = transfer_op("alice", "bob", 1);
        op.target = id("x");
        assert_eq!(ledger.apply(op), Err(LedgerError::UnknownContract(id("x"))));

        let mut op = transfer_op("alice", "bob", 1);
        op.entrypoint = "steal".into();
        assert!(matches!(ledger.apply(op), Err(LedgerError::UnknownEntrypoint { .. })));

        let op = Operation::new(addr("alice"), id("registry"), "transfer", json!({"nope": 1}));
        assert!(matches!(ledger.apply(op), Err(LedgerError::MalformedPayload { .. })));

        assert!(matches!(
            ledger.apply(transfer_op("alice", "bob", 101)),
            Err(LedgerError::Contract(ContractError::Registry(
                RegistryError::InsufficientBalance { .. }
            )))
        ));

        let mut op = transfer_op("alice", "bob", 1);
        op.source = id("custodian").address();
        assert!(matches!(ledger.apply(op), Err(LedgerError::ContractSource(_))));

        assert_eq!(ledger.state_hash(), before);
        assert!(ledger.op_log().is_empty());
        assert_eq!(ledger.event_log().len(), 2);
    }

    #[test]
    fn balance_change_changes_hash_and_events_do_not() {
        let mut ledger = LedgerState::from_genesis(&funded_genesis()).unwrap();
        let h0 = ledger.state_hash();
        ledger.apply(transfer_op("alice", "bob", 10)).unwrap();
        let h1 = ledger.state_hash();
        assert_ne!(h0, h1);
        ledger.clear_events();
        assert_eq!(ledger.state_hash(), h1);
    }

    #[test]
    fn replay_matches_incremental() {
        let genesis = funded_genesis();
        let mut ledger = LedgerState::from_genesis(&genesis).unwrap();
        ledger.apply(transfer_op("alice", "bob", 10)).unwrap();
        ledger.apply(transfer_op("bob", "carol", 30)).unwrap();
        let ops: Vec<Operation> = ledger.op_log().iter().map(|l| l.op.clone()).collect();
        let replayed = LedgerState::replay(&genesis, &ops).unwrap();
        assert_eq!(replayed.state_hash(), ledger.state_hash());
        assert_eq!(replayed.event_log(), ledger.event_log());
    }

    #[test]
    fn factory_creates_sequential_pools() {
        let mut ledger = LedgerState::from_genesis(&funded_genesis()).unwrap();
        let spec = json!({
            "min_biodiversity": "A", "min_livelihood": "A", "min_justice": "A",
            "registry": "registry"
        });
        ledger
            .apply(Operation::new(addr("anyone"), id("pools"), "create_pool", spec.clone()))
            .unwrap();
        ledger
            .apply(Operation::new(addr("anyone"), id("pools"), "create_pool", spec))
            .unwrap();
        assert!(ledger.pool(&id("pool-0")).is_some());
        assert!(ledger.pool(&id("pool-1")).is_some());
        let bad = json!({
            "min_biodiversity": "A", "min_livelihood": "A", "min_justice": "A",
            "registry": "nope"
        });
        assert!(matches!(
            ledger.apply(Operation::new(addr("anyone"), id("pools"), "create_pool", bad)),
            Err(LedgerError::Contract(ContractError::Pool(PoolError::UnknownRegistry(
                _
            ))))
        ));
    }

    #[test]
    fn from_call_uses_entrypoint_tag() {
        let op = Operation::from_call(
            addr("oracle"),
            id("registry"),
            &RegistryCall::SetOracle {
                new_oracle: addr("next"),
            },
        );
        assert_eq!(op.entrypoint, "set_oracle");
        assert_eq!(op.payload, json!({"new_oracle": "next"}));
    }
}
