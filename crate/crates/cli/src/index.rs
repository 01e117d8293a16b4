//! Global-progress report rebuilt from the event log.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pact_core::ledger::Contract;
use pact_core::{ContractId, EmittedEvent, Event, LedgerState, TokenId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFigures {
    pub registry: ContractId,
    pub token_id: TokenId,
    /// kg CO2e
    pub total_minted: u64,
    pub outstanding: u64,
    pub total_retired: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolFigures {
    pub pool: ContractId,
    pub pool_total: u64,
    /// underlying token id -> kg held
    pub holdings: BTreeMap<TokenId, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexReport {
    pub tokens: Vec<TokenFigures>,
    /// beneficiary -> kg retired in their name
    pub beneficiaries: BTreeMap<String, u64>,
    pub pools: Vec<PoolFigures>,
    pub event_count: u64,
    /// Σ JSON payload sizes, a proxy for archival storage
    pub payload_bytes: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("event {index} ({tag}) takes {contract} below zero")]
    NegativeBalance {
        index: usize,
        tag: &'static str,
        contract: ContractId,
    },
    #[error("report state mismatch: {0}")]
    ReportStateMismatch(String),
}

fn debit(value: &mut u64, amount: u64, index: usize, e: &EmittedEvent) -> Result<(), IndexError> {
    *value = value.checked_sub(amount).ok_or(IndexError::NegativeBalance {
        index,
        tag: e.event.tag(),
        contract: e.contract.clone(),
    })?;
    Ok(())
}

fn token_entry<'a>(
    tokens: &'a mut BTreeMap<(ContractId, TokenId), TokenFigures>,
    registry: &ContractId,
    token_id: TokenId,
) -> &'a mut TokenFigures {
    tokens
        .entry((registry.clone(), token_id))
        .or_insert_with(|| TokenFigures {
            registry: registry.clone(),
            token_id,
            total_minted: 0,
            outstanding: 0,
            total_retired: 0,
        })
}

fn pool_entry<'a>(pools: &'a mut BTreeMap<ContractId, PoolFigures>, pool: &ContractId) -> &'a mut PoolFigures {
    pools.entry(pool.clone()).or_insert_with(|| PoolFigures {
        pool: pool.clone(),
        pool_total: 0,
        holdings: BTreeMap::new(),
    })
}

impl IndexReport {
    /// Builds the report from events alone.
    pub fn from_events(events: &[EmittedEvent]) -> Result<Self, IndexError> {
        let mut tokens: BTreeMap<(ContractId, TokenId), TokenFigures> = BTreeMap::new();
        let mut pools: BTreeMap<ContractId, PoolFigures> = BTreeMap::new();
        let mut beneficiaries = BTreeMap::new();
        let mut payload_bytes = 0;
        for (index, e) in events.iter().enumerate() {
            payload_bytes += e.payload_bytes();
            let c = &e.contract;
            match &e.event {
                Event::Mint { token_id, amount, .. } => {
                    let t = token_entry(&mut tokens, c, *token_id);
                    t.total_minted += amount;
                    t.outstanding += amount;
                }
                Event::Retire { record } => {
                    let t = token_entry(&mut tokens, c, record.token_id);
                    debit(&mut t.outstanding, record.amount, index, e)?;
                    t.total_retired += record.amount;
                    *beneficiaries.entry(record.beneficiary.clone()).or_insert(0) += record.amount;
                }
                Event::PoolDeposit { token_id, amount, .. } => {
                    let p = pool_entry(&mut pools, c);
                    p.pool_total += amount;
                    *p.holdings.entry(*token_id).or_insert(0) += amount;
                }
                Event::PoolRedeem { token_id, amount, .. } => {
                    let p = pool_entry(&mut pools, c);
                    debit(&mut p.pool_total, *amount, index, e)?;
                    debit(p.holdings.entry(*token_id).or_insert(0), *amount, index, e)?;
                }
                Event::PoolRetire { amount, tranches, .. } => {
                    let p = pool_entry(&mut pools, c);
                    debit(&mut p.pool_total, *amount, index, e)?;
                    for t in tranches {
                        debit(p.holdings.entry(t.token_id).or_insert(0), t.amount, index, e)?;
                    }
                }
                _ => {}
            }
        }
        let mut report = IndexReport {
            tokens: tokens.into_values().collect(),
            beneficiaries,
            pools: pools.into_values().collect(),
            event_count: events.len() as u64,
            payload_bytes,
        };
        report.normalize();
        Ok(report)
    }

    /// Figures read straight from contract storage. Beneficiary totals and
    /// event statistics are not held in state and are left empty.
    pub fn from_state(state: &LedgerState) -> Self {
        let mut report = IndexReport::default();
        for (id, contract) in state.contracts().iter() {
            match contract {
                Contract::Registry(r) => {
                    for &token_id in r.token_classes.keys() {
                        report.tokens.push(TokenFigures {
                            registry: id.clone(),
                            token_id,
                            total_minted: r.total_minted(token_id),
                            outstanding: r.circulating(token_id),
                            total_retired: r.total_retired(token_id),
                        });
                    }
                }
                Contract::Pool(p) => report.pools.push(PoolFigures {
                    pool: id.clone(),
                    pool_total: p.pool_total,
                    holdings: p.holdings.clone(),
                }),
                _ => {}
            }
        }
        report.normalize();
        report
    }

    /// Drops all-zero entries so that event- and state-derived reports
    /// compare equal for tokens or pools that never saw activity.
    fn normalize(&mut self) {
        self.tokens
            .retain(|t| t.total_minted != 0 || t.outstanding != 0 || t.total_retired != 0);
        self.tokens
            .sort_by(|a, b| (&a.registry, a.token_id).cmp(&(&b.registry, b.token_id)));
        for p in &mut self.pools {
            p.holdings.retain(|_, v| *v != 0);
        }
        self.pools.retain(|p| p.pool_total != 0 || !p.holdings.is_empty());
        self.pools.sort_by(|a, b| a.pool.cmp(&b.pool));
    }

    /// Event-derived report, checked against state wherever they overlap.
    pub fn build(state: &LedgerState) -> Result<Self, IndexError> {
        let report = IndexReport::from_events(state.event_log())?;
        let direct = IndexReport::from_state(state);
        if report.tokens != direct.tokens {
            return Err(IndexError::ReportStateMismatch(format!(
                "token figures from events {:?} != state {:?}",
                report.tokens, direct.tokens
            )));
        }
        if report.pools != direct.pools {
            return Err(IndexError::ReportStateMismatch(format!(
                "pool figures from events {:?} != state {:?}",
                report.pools, direct.pools
            )));
        }
        Ok(report)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "events {} payload_bytes {}", self.event_count, self.payload_bytes);
        let _ = writeln!(out, "tokens");
        if self.tokens.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for t in &self.tokens {
            let _ = writeln!(
                out,
                "  {}/{} minted {} outstanding {} retired {}",
                t.registry, t.token_id, t.total_minted, t.outstanding, t.total_retired
            );
        }
        let _ = writeln!(out, "beneficiaries");
        if self.beneficiaries.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for (b, kg) in &self.beneficiaries {
            let _ = writeln!(out, "  {b:?} retired {kg}");
        }
        let _ = writeln!(out, "pools");
        if self.pools.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for p in &self.pools {
            let holdings: Vec<String> = p.holdings.iter().map(|(t, v)| format!("{t}:{v}")).collect();
            let _ = writeln!(
                out,
                "  {} total {} holdings {}",
                p.pool,
                p.pool_total,
                holdings.join(",")
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
