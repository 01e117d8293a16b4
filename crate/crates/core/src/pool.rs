//! Pooling contract.
//!
//! A pool accepts registry tokens whose class meets a co-benefit floor and
//! jurisdiction filter, and mints pooled tokens 1:1 (kg for kg) against
//! them. Pooled tokens use the single token id [`POOLED_TOKEN_ID`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::address::{Address, ContractId, TokenId};
use crate::canonical::Canonical;
use crate::event::{Event, RetirementClaim, Tranche};
use crate::registry::{Rating, RegistryError, RegistryState, TokenClass, TransferBatch, TransferItem};

pub const POOLED_TOKEN_ID: TokenId = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub min_biodiversity: Rating,
    pub min_livelihood: Rating,
    pub min_justice: Rating,
    /// Empty means any jurisdiction.
    #[serde(default)]
    pub allowed_jurisdictions: BTreeSet<String>,
    pub registry: ContractId,
}

/// The acceptance rule a token class failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Biodiversity,
    Livelihood,
    Justice,
    Jurisdiction,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::Biodiversity => "biodiversity",
            Criterion::Livelihood => "livelihood",
            Criterion::Justice => "justice",
            Criterion::Jurisdiction => "jurisdiction",
        };
        f.write_str(s)
    }
}

impl PoolSpec {
    /// Returns the first criterion `class` fails, if any.
    pub fn check(&self, class: &TokenClass) -> Result<(), Criterion> {
        if class.biodiversity < self.min_biodiversity {
            return Err(Criterion::Biodiversity);
        }
        if class.livelihood < self.min_livelihood {
            return Err(Criterion::Livelihood);
        }
        if class.justice < self.min_justice {
            return Err(Criterion::Justice);
        }
        if !self.allowed_jurisdictions.is_empty() && !self.allowed_jurisdictions.contains(&class.jurisdiction) {
            return Err(Criterion::Jurisdiction);
        }
        Ok(())
    }
}

impl Canonical for PoolSpec {
    fn encode(&self, out: &mut Vec<u8>) {
        self.min_biodiversity.encode(out);
        self.min_livelihood.encode(out);
        self.min_justice.encode(out);
        self.allowed_jurisdictions.encode(out);
        self.registry.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("amount must be greater than zero")]
    ZeroAmount,
    #[error("token class fails the pool's {0} criterion")]
    SpecMismatch(Criterion),
    #[error("{owner} holds {balance} pooled kg, {requested} kg requested")]
    InsufficientPoolBalance {
        owner: Address,
        balance: u64,
        requested: u64,
    },
    #[error("pool holds {held} kg of token {token_id}, {requested} kg requested")]
    InsufficientHoldings {
        token_id: TokenId,
        held: u64,
        requested: u64,
    },
    #[error("pools issue a single token id {POOLED_TOKEN_ID}, got {0}")]
    UnknownToken(TokenId),
    #[error("{caller} may not move pooled tokens owned by {owner}")]
    NotOperator { owner: Address, caller: Address },
    #[error("registry contract {0} does not exist")]
    UnknownRegistry(ContractId),
    #[error("amount overflow")]
    Overflow,
    #[error("registry call failed: {0}")]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub spec: PoolSpec,
    /// Registry kg held per underlying token id (non-zero only).
    pub holdings: BTreeMap<TokenId, u64>,
    /// Deposits in arrival order with the part not yet redeemed or retired.
    pub deposit_queue: VecDeque<(TokenId, u64)>,
    /// Pooled-token balances (non-zero only).
    pub pool_balances: BTreeMap<Address, u64>,
    pub pool_total: u64,
}

impl Canonical for PoolState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.spec.encode(out);
        self.holdings.encode(out);
        self.deposit_queue.encode(out);
        self.pool_balances.encode(out);
        self.pool_total.encode(out);
    }
}

/// Events emitted during a pool call, tagged with the emitting contract.
pub type Emitted = Vec<(ContractId, Event)>;

fn put_nonzero<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, value: u64) {
    if value == 0 {
        map.remove(&key);
    } else {
        map.insert(key, value);
    }
}

impl PoolState {
    pub fn new(spec: PoolSpec) -> Self {
        PoolState {
            spec,
            holdings: BTreeMap::new(),
            deposit_queue: VecDeque::new(),
            pool_balances: BTreeMap::new(),
            pool_total: 0,
        }
    }

    pub fn balance_of(&self, owner: &Address) -> u64 {
        self.pool_balances.get(owner).copied().unwrap_or(0)
    }

    pub fn held(&self, token_id: TokenId) -> u64 {
        self.holdings.get(&token_id).copied().unwrap_or(0)
    }

    fn require_pool_balance(&self, owner: &Address, amount: u64) -> Result<u64, PoolError> {
        let balance = self.balance_of(owner);
        if balance < amount {
            return Err(PoolError::InsufficientPoolBalance {
                owner: owner.clone(),
                balance,
                requested: amount,
            });
        }
        Ok(balance)
    }

    /// Moves `amount` of `token_id` from the caller into the pool and mints
    /// the same number of pooled kg to the caller. The caller must have made
    /// the pool an operator for that token at the registry.
    pub fn deposit(
        &mut self,
        me: &ContractId,
        registry: &mut RegistryState,
        caller: &Address,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), PoolError> {
        if amount == 0 {
            return Err(PoolError::ZeroAmount);
        }
        let class = registry
            .token_class(token_id)
            .ok_or(RegistryError::UnknownToken(token_id))?;
        self.spec.check(class).map_err(PoolError::SpecMismatch)?;
        let held = self.held(token_id).checked_add(amount).ok_or(PoolError::Overflow)?;
        let total = self.pool_total.checked_add(amount).ok_or(PoolError::Overflow)?;
        let balance = self.balance_of(caller).checked_add(amount).ok_or(PoolError::Overflow)?;

        let pool_address = me.address();
        let events = registry.transfer(
            &pool_address,
            &[TransferBatch {
                from: caller.clone(),
                txs: vec![TransferItem {
                    to: pool_address.clone(),
                    token_id,
                    amount,
                }],
            }],
        )?;
        emitted.extend(events.into_iter().map(|e| (self.spec.registry.clone(), e)));

        self.holdings.insert(token_id, held);
        self.deposit_queue.push_back((token_id, amount));
        self.pool_balances.insert(caller.clone(), balance);
        self.pool_total = total;
        emitted.push((
            me.clone(),
            Event::PoolDeposit {
                owner: caller.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Burns pooled kg and returns the same amount of the chosen underlying
    /// token to the caller.
    pub fn redeem(
        &mut self,
        me: &ContractId,
        registry: &mut RegistryState,
        caller: &Address,
        token_id: TokenId,
        amount: u64,
        emitted: &mut Emitted,
    ) -> Result<(), PoolError> {
        if amount == 0 {
            return Err(PoolError::ZeroAmount);
        }
        let balance = self.require_pool_balance(caller, amount)?;
        let held = self.held(token_id);
        if held < amount {
            return Err(PoolError::InsufficientHoldings {
                token_id,
                held,
                requested: amount,
            });
        }
        let pool_address = me.address();
        let events = registry.transfer(
            &pool_address,
            &[TransferBatch {
                from: pool_address.clone(),
                txs: vec![TransferItem {
                    to: caller.clone(),
                    token_id,
                    amount,
                }],
            }],
        )?;
        emitted.extend(events.into_iter().map(|e| (self.spec.registry.clone(), e)));

        self.consume_token_from_queue(token_id, amount);
        put_nonzero(&mut self.holdings, token_id, held - amount);
        put_nonzero(&mut self.pool_balances, caller.clone(), balance - amount);
        self.pool_total -= amount;
        emitted.push((
            me.clone(),
            Event::PoolRedeem {
                owner: caller.clone(),
                token_id,
                amount,
            },
        ));
        Ok(())
    }

    /// Oldest-first decrement of queue entries for one token id.
    fn consume_token_from_queue(&mut self, token_id: TokenId, mut amount: u64) {
        for entry in self.deposit_queue.iter_mut().filter(|(t, _)| *t == token_id) {
            if amount == 0 {
                break;
            }
            let take = entry.1.min(amount);
            entry.1 -= take;
            amount -= take;
        }
        debug_assert_eq!(amount, 0, "queue out of sync with holdings");
        self.deposit_queue.retain(|(_, remaining)| *remaining > 0);
    }

    /// The FIFO tranches that retiring `amount` would consume.
    pub fn plan_retirement(&self, amount: u64) -> Vec<Tranche> {
        let mut left = amount;
        let mut tranches: Vec<Tranche> = Vec::new();
        for &(token_id, remaining) in &self.deposit_queue {
            if left == 0 {
                break;
            }
            let take = remaining.min(left);
            left -= take;
            match tranches.last_mut() {
                Some(last) if last.token_id == token_id => last.amount += take,
                _ => tranches.push(Tranche { token_id, amount: take }),
            }
        }
        tranches
    }

    /// Burns pooled kg and retires the same quantity of underlying registry
    /// tokens, consuming deposits in arrival order.
    pub fn retire_pooled(
        &mut self,
        me: &ContractId,
        registry: &mut RegistryState,
        caller: &Address,
        amount: u64,
        claim: RetirementClaim,
        emitted: &mut Emitted,
    ) -> Result<(), PoolError> {
        if amount == 0 {
            return Err(PoolError::ZeroAmount);
        }
        let balance = self.require_pool_balance(caller, amount)?;
        let tranches = self.plan_retirement(amount);
        let pool_address = me.address();
        let claim = RetirementClaim {
            on_behalf_of: claim.on_behalf_of.or_else(|| Some(caller.to_string())),
            ..claim
        };
        for tranche in &tranches {
            let events = registry.retire(
                &pool_address,
                &pool_address,
                tranche.token_id,
                tranche.amount,
                claim.clone(),
            )?;
            emitted.extend(events.into_iter().map(|e| (self.spec.registry.clone(), e)));
        }

        let mut left = amount;
        while left > 0 {
            let front = self
                .deposit_queue
                .front_mut()
                .expect("pool_total backs every pooled kg");
            let take = front.1.min(left);
            front.1 -= take;
            left -= take;
            let token_id = front.0;
            if front.1 == 0 {
                self.deposit_queue.pop_front();
            }
            let held = self.held(token_id);
            put_nonzero(&mut self.holdings, token_id, held - take);
        }
        put_nonzero(&mut self.pool_balances, caller.clone(), balance - amount);
        self.pool_total -= amount;
        emitted.push((
            me.clone(),
            Event::PoolRetire {
                owner: caller.clone(),
                amount,
                tranches,
            },
        ));
        Ok(())
    }

    /// Pooled-token transfer, mirroring the registry's batch shape.
    pub fn transfer(
        &mut self,
        me: &ContractId,
        caller: &Address,
        batch: &[TransferBatch],
        emitted: &mut Emitted,
    ) -> Result<(), PoolError> {
        let mut staged: BTreeMap<Address, u64> = BTreeMap::new();
        let mut events = Vec::new();
        for group in batch {
            if &group.from != caller {
                return Err(PoolError::NotOperator {
                    owner: group.from.clone(),
                    caller: caller.clone(),
                });
            }
            for tx in &group.txs {
                if tx.token_id != POOLED_TOKEN_ID {
                    return Err(PoolError::UnknownToken(tx.token_id));
                }
                let from_balance = staged
                    .get(&group.from)
                    .copied()
                    .unwrap_or_else(|| self.balance_of(&group.from));
                if from_balance < tx.amount {
                    return Err(PoolError::InsufficientPoolBalance {
                        owner: group.from.clone(),
                        balance: from_balance,
                        requested: tx.amount,
                    });
                }
                staged.insert(group.from.clone(), from_balance - tx.amount);
                let to_balance = staged
                    .get(&tx.to)
                    .copied()
                    .unwrap_or_else(|| self.balance_of(&tx.to))
                    .checked_add(tx.amount)
                    .ok_or(PoolError::Overflow)?;
                staged.insert(tx.to.clone(), to_balance);
                events.push((
                    me.clone(),
                    Event::Transfer {
                        from: group.from.clone(),
                        to: tx.to.clone(),
                        token_id: POOLED_TOKEN_ID,
                        amount: tx.amount,
                    },
                ));
            }
        }
        for (owner, value) in staged {
            put_nonzero(&mut self.pool_balances, owner, value);
        }
        emitted.extend(events);
        Ok(())
    }

    /// Checks backing and filter soundness against the registry.
    pub fn check_invariants(&self, registry: &RegistryState) -> Result<(), String> {
        let held: u64 = self.holdings.values().sum();
        let balances: u64 = self.pool_balances.values().sum();
        let queued: u64 = self.deposit_queue.iter().map(|(_, r)| r).sum();
        if held != self.pool_total || balances != self.pool_total || queued != self.pool_total {
            return Err(format!(
                "backing broken: total {} holdings {held} balances {balances} queue {queued}",
                self.pool_total
            ));
        }
        for (&token_id, &amount) in &self.holdings {
            let queued: u64 = self
                .deposit_queue
                .iter()
                .filter(|(t, _)| *t == token_id)
                .map(|(_, r)| r)
                .sum();
            if queued != amount {
                return Err(format!("queue holds {queued} of token {token_id}, holdings {amount}"));
            }
            let class = registry
                .token_class(token_id)
                .ok_or_else(|| format!("held token {token_id} unknown to registry"))?;
            if let Err(c) = self.spec.check(class) {
                return Err(format!("held token {token_id} violates {c}"));
            }
        }
        Ok(())
    }
}

/// Decoded pool entrypoint call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entrypoint", content = "payload", rename_all = "snake_case")]
pub enum PoolCall {
    Deposit { token_id: TokenId, amount: u64 },
    Redeem { token_id: TokenId, amount: u64 },
    RetirePooled { amount: u64, claim: RetirementClaim },
    Transfer(Vec<TransferBatch>),
}

impl PoolCall {
    pub const ENTRYPOINTS: &'static [&'static str] = &["deposit", "redeem", "retire_pooled", "transfer"];
}

/// Deploys pools with sequential ids `pool-<n>`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolFactoryState {
    pub created: u64,
}

impl PoolFactoryState {
    pub fn next_pool_id(&self) -> ContractId {
        ContractId::new(format!("pool-{}", self.created)).expect("generated id is valid")
    }
}

impl Canonical for PoolFactoryState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.created.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entrypoint", content = "payload", rename_all = "snake_case")]
pub enum PoolFactoryCall {
    CreatePool(PoolSpec),
}

impl PoolFactoryCall {
    pub const ENTRYPOINTS: &'static [&'static str] = &["create_pool"];
}
