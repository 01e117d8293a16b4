//! Balance reconstruction from the event log and a from-scratch
//! conservation check over contract state.

use std::collections::BTreeMap;

use pact_core::ledger::Contract;
use pact_core::pool::POOLED_TOKEN_ID;
use pact_core::{ContractId, EmittedEvent, Event, LedgerState, TokenId};

type Key = (ContractId, String, TokenId);

/// Figures rebuilt purely from events.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct EventLedger {
    /// (token contract, holder, token) -> balance
    pub balances: BTreeMap<Key, u64>,
    pub minted: BTreeMap<(ContractId, TokenId), u64>,
    pub retired: BTreeMap<(ContractId, TokenId), u64>,
    /// pooled tokens burned on redemption
    pub redeemed: BTreeMap<ContractId, u64>,
    /// (custodian, entity, token contract, token) -> balance
    pub custody: BTreeMap<(ContractId, String, ContractId, TokenId), u64>,
}

fn add<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, amount: u64) {
    *map.entry(key).or_default() += amount;
}

fn sub<K: Ord + std::fmt::Debug>(map: &mut BTreeMap<K, u64>, key: K, amount: u64) -> Result<(), String> {
    let slot = map.entry(key).or_default();
    if *slot < amount {
        return Err(format!("event debits {amount} from a balance of {slot}"));
    }
    *slot -= amount;
    Ok(())
}

impl EventLedger {
    pub fn from_events(events: &[EmittedEvent]) -> Result<Self, String> {
        let mut l = EventLedger::default();
        for e in events {
            let c = e.contract.clone();
            match &e.event {
                Event::Mint {
                    token_id,
                    owner,
                    amount,
                    ..
                } => {
                    add(&mut l.balances, (c.clone(), owner.to_string(), *token_id), *amount);
                    add(&mut l.minted, (c, *token_id), *amount);
                }
                Event::Transfer {
                    from,
                    to,
                    token_id,
                    amount,
                } => {
                    sub(&mut l.balances, (c.clone(), from.to_string(), *token_id), *amount)?;
                    add(&mut l.balances, (c, to.to_string(), *token_id), *amount);
                }
                Event::Retire { record } => {
                    sub(
                        &mut l.balances,
                        (c.clone(), record.owner.to_string(), record.token_id),
                        record.amount,
                    )?;
                    add(&mut l.retired, (c, record.token_id), record.amount);
                }
                Event::PoolDeposit { owner, amount, .. } => {
                    add(
                        &mut l.balances,
                        (c.clone(), owner.to_string(), POOLED_TOKEN_ID),
                        *amount,
                    );
                    add(&mut l.minted, (c, POOLED_TOKEN_ID), *amount);
                }
                Event::PoolRedeem { owner, amount, .. } => {
                    sub(
                        &mut l.balances,
                        (c.clone(), owner.to_string(), POOLED_TOKEN_ID),
                        *amount,
                    )?;
                    add(&mut l.redeemed, c, *amount);
                }
                Event::PoolRetire {
                    owner,
                    amount,
                    tranches,
                } => {
                    let sum: u64 = tranches.iter().map(|t| t.amount).sum();
                    if sum != *amount {
                        return Err(format!("pool retire of {amount} has tranches summing to {sum}"));
                    }
                    sub(
                        &mut l.balances,
                        (c.clone(), owner.to_string(), POOLED_TOKEN_ID),
                        *amount,
                    )?;
                    add(&mut l.retired, (c, POOLED_TOKEN_ID), *amount);
                }
                Event::DepositAttributed {
                    entity_id,
                    contract,
                    token_id,
                    amount,
                } => {
                    add(
                        &mut l.custody,
                        (c, entity_id.clone(), contract.clone(), *token_id),
                        *amount,
                    );
                }
                Event::InternalTransfer {
                    from_entity,
                    to_entity,
                    contract,
                    token_id,
                    amount,
                } => {
                    sub(
                        &mut l.custody,
                        (c.clone(), from_entity.clone(), contract.clone(), *token_id),
                        *amount,
                    )?;
                    add(
                        &mut l.custody,
                        (c, to_entity.clone(), contract.clone(), *token_id),
                        *amount,
                    );
                }
                Event::ExternalTransfer {
                    from_entity,
                    contract,
                    token_id,
                    amount,
                    ..
                }
                | Event::CustodialRetire {
                    entity_id: from_entity,
                    contract,
                    token_id,
                    amount,
                } => {
                    sub(
                        &mut l.custody,
                        (c, from_entity.clone(), contract.clone(), *token_id),
                        *amount,
                    )?;
                }
                Event::OperatorUpdate { .. }
                | Event::OracleRotated { .. }
                | Event::MetadataUpdated { .. }
                | Event::EntityRegistered { .. } => {}
            }
        }
        l.balances.retain(|_, v| *v > 0);
        l.custody.retain(|_, v| *v > 0);
        Ok(l)
    }

    /// Compares every overlapping figure with contract state.
    pub fn check_against(&self, state: &LedgerState) -> Result<(), String> {
        let mut balances = BTreeMap::new();
        let mut minted = BTreeMap::new();
        let mut retired = BTreeMap::new();
        let mut custody = BTreeMap::new();
        for (id, contract) in state.contracts().iter() {
            match contract {
                Contract::Registry(r) => {
                    for ((owner, token), v) in &r.balances {
                        balances.insert((id.clone(), owner.to_string(), *token), *v);
                    }
                    for (t, v) in &r.total_minted {
                        minted.insert((id.clone(), *t), *v);
                    }
                    for (t, v) in &r.total_retired {
                        retired.insert((id.clone(), *t), *v);
                    }
                }
                Contract::Pool(p) => {
                    for (owner, v) in &p.pool_balances {
                        balances.insert((id.clone(), owner.to_string(), POOLED_TOKEN_ID), *v);
                    }
                }
                Contract::Custodian(c) => {
                    for ((e, k, t), v) in &c.internal_balances {
                        custody.insert((id.clone(), e.clone(), k.clone(), *t), *v);
                    }
                }
                Contract::PoolFactory(_) => {}
            }
        }
        if balances != self.balances {
            return Err(diff("balances", &self.balances, &balances));
        }
        if custody != self.custody {
            return Err(diff("custody", &self.custody, &custody));
        }
        let registry_only = |m: &BTreeMap<(ContractId, TokenId), u64>| -> BTreeMap<(ContractId, TokenId), u64> {
            m.iter()
                .filter(|((c, _), v)| state.registry(c).is_some() && **v > 0)
                .map(|(k, v)| (k.clone(), *v))
                .collect()
        };
        let strip = |m: BTreeMap<(ContractId, TokenId), u64>| -> BTreeMap<(ContractId, TokenId), u64> {
            m.into_iter().filter(|(_, v)| *v > 0).collect()
        };
        if registry_only(&self.minted) != strip(minted.clone()) {
            return Err(diff("minted", &registry_only(&self.minted), &minted));
        }
        if registry_only(&self.retired) != strip(retired.clone()) {
            return Err(diff("retired", &registry_only(&self.retired), &retired));
        }
        // pooled supply: deposits = outstanding + redeemed + retired
        for (id, contract) in state.contracts().iter() {
            if let Contract::Pool(p) = contract {
                let minted = self.minted.get(&(id.clone(), POOLED_TOKEN_ID)).copied().unwrap_or(0);
                let redeemed = self.redeemed.get(id).copied().unwrap_or(0);
                let retired = self.retired.get(&(id.clone(), POOLED_TOKEN_ID)).copied().unwrap_or(0);
                if minted != p.pool_total + redeemed + retired {
                    return Err(format!(
                        "{id}: pooled minted {minted} != outstanding {} + redeemed {redeemed} + retired {retired}",
                        p.pool_total
                    ));
                }
            }
        }
        Ok(())
    }
}

fn diff<K: Ord + std::fmt::Debug>(what: &str, events: &BTreeMap<K, u64>, state: &BTreeMap<K, u64>) -> String {
    let mut lines = vec![format!("{what} differ (events vs state):")];
    for k in events.keys().chain(state.keys()) {
        let (a, b) = (events.get(k), state.get(k));
        if a != b {
            lines.push(format!("  {k:?}: {a:?} vs {b:?}"));
        }
    }
    lines.join("\n")
}

/// Conservation and backing checks computed directly from contract fields.
pub fn check_conservation(state: &LedgerState) -> Result<(), String> {
    for (id, contract) in state.contracts().iter() {
        match contract {
            Contract::Registry(r) => {
                for &token in r.token_classes.keys() {
                    let held: u64 = r
                        .balances
                        .iter()
                        .filter(|((_, t), _)| *t == token)
                        .map(|(_, v)| *v)
                        .sum();
                    let minted = r.total_minted.get(&token).copied().unwrap_or(0);
                    let retired = r.total_retired.get(&token).copied().unwrap_or(0);
                    if minted != held + retired {
                        return Err(format!(
                            "{id} token {token}: minted {minted} != held {held} + retired {retired}"
                        ));
                    }
                }
            }
            Contract::Pool(p) => {
                let outstanding: u64 = p.pool_balances.values().sum();
                let backing: u64 = p.holdings.values().sum();
                let queued: u64 = p.deposit_queue.iter().map(|(_, a)| *a).sum();
                if outstanding != p.pool_total || backing != p.pool_total || queued != p.pool_total {
                    return Err(format!(
                        "{id}: total {} outstanding {outstanding} backing {backing} queued {queued}",
                        p.pool_total
                    ));
                }
                let r = state.registry(&p.spec.registry).ok_or("pool registry missing")?;
                for (token, held) in &p.holdings {
                    let on_chain = r.balances.get(&(id.address(), *token)).copied().unwrap_or(0);
                    if on_chain < *held {
                        return Err(format!(
                            "{id}: holds {held} of token {token}, registry shows {on_chain}"
                        ));
                    }
                    let class = r.token_classes.get(token).ok_or("pooled token has no class")?;
                    if p.spec.check(class).is_err() {
                        return Err(format!("{id}: holds token {token} that fails its filter"));
                    }
                }
            }
            Contract::Custodian(c) => {
                let mut attributed: BTreeMap<(ContractId, TokenId), u64> = BTreeMap::new();
                for ((_, k, t), v) in &c.internal_balances {
                    *attributed.entry((k.clone(), *t)).or_default() += v;
                }
                for ((k, t), sum) in attributed {
                    let held = match state.contracts().get(&k) {
                        Some(Contract::Registry(r)) => r.balances.get(&(id.address(), t)).copied().unwrap_or(0),
                        Some(Contract::Pool(p)) => p.pool_balances.get(&id.address()).copied().unwrap_or(0),
                        _ => return Err(format!("{id}: attributes unknown token contract {k}")),
                    };
                    if sum > held {
                        return Err(format!("{id}: attributes {sum} of {k}/{t} but holds {held}"));
                    }
                }
            }
            Contract::PoolFactory(_) => {}
        }
    }
    Ok(())
}
