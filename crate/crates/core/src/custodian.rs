//! Custodian contract: holds registry or pooled tokens on behalf of
//! off-chain entities and keeps a sub-ledger of who owns what.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::address::{entries, Address, ContractId, TokenId};
use crate::canonical::Canonical;
use crate::event::{Event, RetirementClaim};
use crate::pool::{Emitted, PoolError};
use crate::registry::RegistryError;

/// Access to the token contracts a custodian holds balances in.
pub trait TokenLedger {
    fn balance(&self, contract: &ContractId, holder: &Address, token_id: TokenId) -> Result<u64, TokenCallError>;

    fn transfer(
        &mut self,
        contract: &ContractId,
        from: &Address,
        to: &Address,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), TokenCallError>;

    fn retire(
        &mut self,
        contract: &ContractId,
        owner: &Address,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
        emitted: &mut Emitted,
    ) -> Result<(), TokenCallError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenCallError {
    #[error("contract {0} does not exist")]
    UnknownContract(ContractId),
    #[error("contract {0} is not a token contract")]
    NotTokenContract(ContractId),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KycEntity {
    pub entity_id: String,
    #[serde(default)]
    pub kyc_metadata: BTreeMap<String, String>,
}

impl Canonical for KycEntity {
    fn encode(&self, out: &mut Vec<u8>) {
        self.entity_id.encode(out);
        self.kyc_metadata.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CustodianError {
    #[error("caller {0} is not the custodian manager")]
    NotManager(Address),
    #[error("entity {0:?} is already registered")]
    DuplicateEntity(String),
    #[error("entity id must be non-empty printable text")]
    InvalidEntity,
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("amount must be greater than zero")]
    ZeroAmount,
    #[error("only {available} kg unattributed, {requested} kg requested")]
    UnattributedShortfall { available: u64, requested: u64 },
    #[error("entity {entity_id:?} holds {balance} kg, {requested} kg requested")]
    InsufficientEntityBalance {
        entity_id: String,
        balance: u64,
        requested: u64,
    },
    #[error("amount overflow")]
    Overflow,
    #[error("token call failed: {0}")]
    Token(#[from] TokenCallError),
}

type SubKey = (String, ContractId, TokenId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustodianState {
    pub manager: Address,
    pub entities: BTreeMap<String, KycEntity>,
    /// Non-zero entries only.
    #[serde(with = "entries")]
    pub internal_balances: BTreeMap<SubKey, u64>,
}

impl Canonical for CustodianState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.manager.encode(out);
        self.entities.encode(out);
        self.internal_balances.encode(out);
    }
}

fn put_nonzero(map: &mut BTreeMap<SubKey, u64>, key: SubKey, value: u64) {
    if value == 0 {
        map.remove(&key);
    } else {
        map.insert(key, value);
    }
}

impl CustodianState {
    pub fn new(manager: Address) -> Self {
        CustodianState {
            manager,
            entities: BTreeMap::new(),
            internal_balances: BTreeMap::new(),
        }
    }

    fn require_manager(&self, caller: &Address) -> Result<(), CustodianError> {
        if caller != &self.manager {
            return Err(CustodianError::NotManager(caller.clone()));
        }
        Ok(())
    }

    fn require_entity(&self, entity_id: &str) -> Result<(), CustodianError> {
        if !self.entities.contains_key(entity_id) {
            return Err(CustodianError::UnknownEntity(entity_id.to_string()));
        }
        Ok(())
    }

    pub fn entity_balance(&self, entity_id: &str, contract: &ContractId, token_id: TokenId) -> u64 {
        self.internal_balances
            .get(&(entity_id.to_string(), contract.clone(), token_id))
            .copied()
            .unwrap_or(0)
    }

    /// Σ internal balances for one (contract, token).
    pub fn attributed(&self, contract: &ContractId, token_id: TokenId) -> u64 {
        self.internal_balances
            .iter()
            .filter(|((_, c, t), _)| c == contract && *t == token_id)
            .map(|(_, v)| *v)
            .sum()
    }

    fn debit_entity(
        &mut self,
        entity_id: &str,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
    ) -> Result<(), CustodianError> {
        let balance = self.entity_balance(entity_id, contract, token_id);
        if balance < amount {
            return Err(CustodianError::InsufficientEntityBalance {
                entity_id: entity_id.to_string(),
                balance,
                requested: amount,
            });
        }
        put_nonzero(
            &mut self.internal_balances,
            (entity_id.to_string(), contract.clone(), token_id),
            balance - amount,
        );
        Ok(())
    }

    fn credit_entity(
        &mut self,
        entity_id: &str,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
    ) -> Result<(), CustodianError> {
        let balance = self
            .entity_balance(entity_id, contract, token_id)
            .checked_add(amount)
            .ok_or(CustodianError::Overflow)?;
        put_nonzero(
            &mut self.internal_balances,
            (entity_id.to_string(), contract.clone(), token_id),
            balance,
        );
        Ok(())
    }

    pub fn register_entity(
        &mut self,
        me: &ContractId,
        caller: &Address,
        entity: KycEntity,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        self.require_manager(caller)?;
        if entity.entity_id.is_empty() || entity.entity_id.chars().any(|c| c.is_control()) {
            return Err(CustodianError::InvalidEntity);
        }
        if self.entities.contains_key(&entity.entity_id) {
            return Err(CustodianError::DuplicateEntity(entity.entity_id));
        }
        emitted.push((
            me.clone(),
            Event::EntityRegistered {
                entity_id: entity.entity_id.clone(),
            },
        ));
        self.entities.insert(entity.entity_id.clone(), entity);
        Ok(())
    }

    /// Assigns tokens already sitting at the custodian's address to an entity.
    #[allow(clippy::too_many_arguments)]
    pub fn attribute_deposit(
        &mut self,
        me: &ContractId,
        tokens: &impl TokenLedger,
        caller: &Address,
        entity_id: &str,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        self.require_manager(caller)?;
        self.require_entity(entity_id)?;
        if amount == 0 {
            return Err(CustodianError::ZeroAmount);
        }
        let on_chain = tokens.balance(contract, &me.address(), token_id)?;
        let available = on_chain.saturating_sub(self.attributed(contract, token_id));
        if available < amount {
            return Err(CustodianError::UnattributedShortfall {
                available,
                requested: amount,
            });
        }
        self.credit_entity(entity_id, contract, token_id, amount)?;
        emitted.push((
            me.clone(),
            Event::DepositAttributed {
                entity_id: entity_id.to_string(),
                contract: contract.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Records an off-chain trade between two entities.
    #[allow(clippy::too_many_arguments)]
    pub fn internal_transfer(
        &mut self,
        me: &ContractId,
        caller: &Address,
        from_entity: &str,
        to_entity: &str,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        self.require_manager(caller)?;
        self.require_entity(from_entity)?;
        self.require_entity(to_entity)?;
        self.debit_entity(from_entity, contract, token_id, amount)?;
        self.credit_entity(to_entity, contract, token_id, amount)?;
        emitted.push((
            me.clone(),
            Event::InternalTransfer {
                from_entity: from_entity.to_string(),
                to_entity: to_entity.to_string(),
                contract: contract.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Moves an entity's tokens out of custody to an on-chain address.
    #[allow(clippy::too_many_arguments)]
    pub fn external_transfer(
        &mut self,
        me: &ContractId,
        tokens: &mut impl TokenLedger,
        caller: &Address,
        from_entity: &str,
        to: &Address,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        self.require_manager(caller)?;
        self.require_entity(from_entity)?;
        self.debit_entity(from_entity, contract, token_id, amount)?;
        tokens.transfer(contract, &me.address(), to, token_id, amount, emitted)?;
        emitted.push((
            me.clone(),
            Event::ExternalTransfer {
                from_entity: from_entity.to_string(),
                to: to.clone(),
                contract: contract.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Retires tokens held for an entity; the RETIRE record names the entity.
    #[allow(clippy::too_many_arguments)]
    pub fn retire_for(
        &mut self,
        me: &ContractId,
        tokens: &mut impl TokenLedger,
        caller: &Address,
        entity_id: &str,
        contract: &ContractId,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
        emitted: &mut Emitted,
    ) -> Result<(), CustodianError> {
        self.require_manager(caller)?;
        self.require_entity(entity_id)?;
        if amount == 0 {
            return Err(CustodianError::ZeroAmount);
        }
        self.debit_entity(entity_id, contract, token_id, amount)?;
        let claim = RetirementClaim {
            on_behalf_of: Some(entity_id.to_string()),
            ..claim
        };
        tokens.retire(contract, &me.address(), token_id, amount, claim, emitted)?;
        emitted.push((
            me.clone(),
            Event::CustodialRetire {
                entity_id: entity_id.to_string(),
                contract: contract.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Checks that no (contract, token) is attributed beyond what the
    /// custodian actually holds.
    pub fn check_consistency(&self, me: &ContractId, tokens: &impl TokenLedger) -> Result<(), String> {
        let mut attributed: BTreeMap<(ContractId, TokenId), u64> = BTreeMap::new();
        for ((_, contract, token_id), amount) in &self.internal_balances {
            *attributed.entry((contract.clone(), *token_id)).or_default() += amount;
        }
        for ((contract, token_id), sum) in attributed {
            let on_chain = tokens
                .balance(&contract, &me.address(), token_id)
                .map_err(|e| e.to_string())?;
            if sum > on_chain {
                return Err(format!(
                    "custodian {me} attributes {sum} kg of {contract}/{token_id} but holds {on_chain}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entrypoint", content = "payload", rename_all = "snake_case")]
pub enum CustodianCall {
    RegisterEntity(KycEntity),
    AttributeDeposit {
        entity_id: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    InternalTransfer {
        from_entity: String,
        to_entity: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    ExternalTransfer {
        from_entity: String,
        to: Address,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    RetireFor {
        entity_id: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
    },
}

impl CustodianCall {
    pub const ENTRYPOINTS: &'static [&'static str] = &[
        "register_entity",
        "attribute_deposit",
        "internal_transfer",
        "external_transfer",
        "retire_for",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-contract stand-in: one token contract "registry" with plain balances.
    #[derive(Default)]
    struct FakeTokens {
        balances: BTreeMap<(Address, TokenId), u64>,
        retired: u64,
    }

    fn registry() -> ContractId {
        ContractId::new("registry").unwrap()
    }

    impl TokenLedger for FakeTokens {
        fn balance(&self, contract: &ContractId, holder: &Address, token_id: TokenId) -> Result<u64, TokenCallError> {
            if contract != &registry() {
                return Err(TokenCallError::UnknownContract(contract.clone()));
            }
            Ok(self.balances.get(&(holder.clone(), token_id)).copied().unwrap_or(0))
        }

        fn transfer(
            &mut self,
            contract: &ContractId,
            from: &Address,
            to: &Address,
            token_id: TokenId,
            amount: u64,
            _emitted: &mut Emitted,
        ) -> Result<(), TokenCallError> {
            let b = self.balance(contract, from, token_id)?;
            self.balances.insert((from.clone(), token_id), b - amount);
            *self.balances.entry((to.clone(), token_id)).or_default() += amount;
            Ok(())
        }

        fn retire(
            &mut self,
            contract: &ContractId,
            owner: &Address,
            token_id: TokenId,
            amount: u64,
            _claim: RetirementClaim,
            _emitted: &mut Emitted,
        ) -> Result<(), TokenCallError> {
            let b = self.balance(contract, owner, token_id)?;
            self.balances.insert((owner.clone(), token_id), b - amount);
            self.retired += amount;
            Ok(())
        }
    }

    fn addr(s: &str) -> Address {
        Address::new(s).unwrap()
    }

    fn me() -> ContractId {
        ContractId::new("custodian").unwrap()
    }

    fn entity(id: &str) -> KycEntity {
        KycEntity {
            entity_id: id.into(),
            kyc_metadata: BTreeMap::new(),
        }
    }

    fn setup() -> (CustodianState, FakeTokens) {
        let mut c = CustodianState::new(addr("manager"));
        let mut ev = Vec::new();
        c.register_entity(&me(), &addr("manager"), entity("acme"), &mut ev)
            .unwrap();
        c.register_entity(&me(), &addr("manager"), entity("beta"), &mut ev)
            .unwrap();
        let mut tokens = FakeTokens::default();
        tokens.balances.insert((me().address(), 0), 500);
        c.attribute_deposit(&me(), &tokens, &addr("manager"), "acme", &registry(), 0, 500, &mut ev)
            .unwrap();
        (c, tokens)
    }

    #[test]
    fn registration_rules() {
        let (mut c, _) = setup();
        assert_eq!(c.entity_balance("beta", &registry(), 0), 0);
        assert_eq!(
            c.register_entity(&me(), &addr("manager"), entity("acme"), &mut Vec::new()),
            Err(CustodianError::DuplicateEntity("acme".into()))
        );
        assert_eq!(
            c.register_entity(&me(), &addr("x"), entity("gamma"), &mut Vec::new()),
            Err(CustodianError::NotManager(addr("x")))
        );
    }

    #[test]
    fn attribution_cannot_exceed_unattributed_custody() {
        let (mut c, mut tokens) = setup();
        assert_eq!(
            c.attribute_deposit(
                &me(),
                &tokens,
                &addr("manager"),
                "beta",
                &registry(),
                0,
                1,
                &mut Vec::new()
            ),
            Err(CustodianError::UnattributedShortfall {
                available: 0,
                requested: 1
            })
        );
        tokens.balances.insert((me().address(), 0), 1000);
        assert_eq!(
            c.attribute_deposit(
                &me(),
                &tokens,
                &addr("manager"),
                "beta",
                &registry(),
                0,
                600,
                &mut Vec::new()
            ),
            Err(CustodianError::UnattributedShortfall {
                available: 500,
                requested: 600
            })
        );
    }

    #[test]
    fn internal_transfer_moves_sub_ledger_only() {
        let (mut c, tokens) = setup();
        c.internal_transfer(
            &me(),
            &addr("manager"),
            "acme",
            "beta",
            &registry(),
            0,
            200,
            &mut Vec::new(),
        )
        .unwrap();
        assert_eq!(c.entity_balance("acme", &registry(), 0), 300);
        assert_eq!(c.entity_balance("beta", &registry(), 0), 200);
        assert_eq!(tokens.balance(&registry(), &me().address(), 0), Ok(500));
        assert!(matches!(
            c.internal_transfer(
                &me(),
                &addr("manager"),
                "beta",
                "acme",
                &registry(),
                0,
                201,
                &mut Vec::new()
            ),
            Err(CustodianError::InsufficientEntityBalance {
                balance: 200,
                requested: 201,
                ..
            })
        ));
        assert_eq!(
            c.internal_transfer(
                &me(),
                &addr("manager"),
                "acme",
                "ghost",
                &registry(),
                0,
                1,
                &mut Vec::new()
            ),
            Err(CustodianError::UnknownEntity("ghost".into()))
        );
    }

    #[test]
    fn external_transfer_and_retire() {
        let (mut c, mut tokens) = setup();
        c.external_transfer(
            &me(),
            &mut tokens,
            &addr("manager"),
            "acme",
            &addr("W"),
            &registry(),
            0,
            100,
            &mut Vec::new(),
        )
        .unwrap();
        assert_eq!(tokens.balance(&registry(), &addr("W"), 0), Ok(100));
        assert_eq!(c.entity_balance("acme", &registry(), 0), 400);
        c.retire_for(
            &me(),
            &mut tokens,
            &addr("manager"),
            "acme",
            &registry(),
            0,
            250,
            RetirementClaim::default(),
            &mut Vec::new(),
        )
        .unwrap();
        assert_eq!(tokens.retired, 250);
        assert_eq!(c.entity_balance("acme", &registry(), 0), 150);
        c.check_consistency(&me(), &tokens).unwrap();
        assert_eq!(
            c.retire_for(
                &me(),
                &mut tokens,
                &addr("manager"),
                "nobody",
                &registry(),
                0,
                1,
                RetirementClaim::default(),
                &mut Vec::new()
            ),
            Err(CustodianError::UnknownEntity("nobody".into()))
        );
    }
}
