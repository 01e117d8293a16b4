//! Central registry contract: issuance, ownership and retirement of credits.
//!
//! Amounts are integer kilograms of CO2e. For every token id the registry
//! maintains `total_minted == Σ balances + total_retired`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::address::{entries, Address, TokenId};
use crate::canonical::{encode_tag, Canonical, ContentHash};
use crate::event::{Event, RetirementClaim, RetirementRecord};

/// Expert co-benefit rating. Ordered `A > B > C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rating {
    C,
    B,
    A,
}

impl Rating {
    pub fn letter(self) -> char {
        match self {
            Rating::A => 'A',
            Rating::B => 'B',
            Rating::C => 'C',
        }
    }
}

impl std::str::FromStr for Rating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Rating::A),
            "B" => Ok(Rating::B),
            "C" => Ok(Rating::C),
            other => Err(format!("unknown rating {other:?}, expected A, B or C")),
        }
    }
}

impl Canonical for Rating {
    fn encode(&self, out: &mut Vec<u8>) {
        (self.letter() as u8).encode(out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duration {
    pub start_year: i32,
    pub end_year: i32,
}

/// Per-token-id metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenClass {
    pub token_id: TokenId,
    pub project_name: String,
    /// Country code of the project's jurisdiction.
    pub jurisdiction: String,
    pub duration: Duration,
    pub biodiversity: Rating,
    pub livelihood: Rating,
    pub justice: Rating,
    /// Artifact-store manifest of the evaluation backing this class.
    pub manifest_hash: ContentHash,
    #[serde(default)]
    pub funding_source: String,
}

impl Canonical for TokenClass {
    fn encode(&self, out: &mut Vec<u8>) {
        self.token_id.encode(out);
        self.project_name.encode(out);
        self.jurisdiction.encode(out);
        self.duration.start_year.encode(out);
        self.duration.end_year.encode(out);
        self.biodiversity.encode(out);
        self.livelihood.encode(out);
        self.justice.encode(out);
        self.manifest_hash.encode(out);
        self.funding_source.encode(out);
    }
}

/// `operator` may move `owner`'s balance of `token_id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OperatorKey {
    pub owner: Address,
    pub operator: Address,
    pub token_id: TokenId,
}

impl Canonical for OperatorKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.owner.encode(out);
        self.operator.encode(out);
        self.token_id.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorUpdate {
    AddOperator(OperatorKey),
    RemoveOperator(OperatorKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferItem {
    pub to: Address,
    pub token_id: TokenId,
    pub amount: u64,
}

/// All transfers out of one `from` address within a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferBatch {
    pub from: Address,
    pub txs: Vec<TransferItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("caller {0} is not the oracle")]
    NotOracle(Address),
    #[error("token id {0} already exists")]
    DuplicateTokenId(TokenId),
    #[error("unknown token id {0}")]
    UnknownToken(TokenId),
    #[error("amount must be greater than zero")]
    ZeroAmount,
    #[error("{owner} holds {balance} kg of token {token_id}, {requested} kg requested")]
    InsufficientBalance {
        owner: Address,
        token_id: TokenId,
        balance: u64,
        requested: u64,
    },
    #[error("{caller} is not an operator for {owner} on token {token_id}")]
    NotOperator {
        owner: Address,
        caller: Address,
        token_id: TokenId,
    },
    #[error("{caller} cannot update operators owned by {owner}")]
    NotOwner { owner: Address, caller: Address },
    #[error("amount overflow")]
    Overflow,
    #[error("invalid token class: {0}")]
    InvalidTokenClass(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryState {
    pub oracle: Address,
    pub token_classes: BTreeMap<TokenId, TokenClass>,
    /// Non-zero balances only.
    #[serde(with = "entries")]
    pub balances: BTreeMap<(Address, TokenId), u64>,
    pub operators: BTreeSet<OperatorKey>,
    pub total_minted: BTreeMap<TokenId, u64>,
    pub total_retired: BTreeMap<TokenId, u64>,
}

impl Canonical for RegistryState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.oracle.encode(out);
        self.token_classes.encode(out);
        self.balances.encode(out);
        self.operators.encode(out);
        self.total_minted.encode(out);
        self.total_retired.encode(out);
    }
}

fn set_balance(map: &mut BTreeMap<(Address, TokenId), u64>, key: (Address, TokenId), value: u64) {
    if value == 0 {
        map.remove(&key);
    } else {
        map.insert(key, value);
    }
}

impl RegistryState {
    pub fn new(oracle: Address) -> Self {
        RegistryState {
            oracle,
            token_classes: BTreeMap::new(),
            balances: BTreeMap::new(),
            operators: BTreeSet::new(),
            total_minted: BTreeMap::new(),
            total_retired: BTreeMap::new(),
        }
    }

    fn require_oracle(&self, caller: &Address) -> Result<(), RegistryError> {
        if caller != &self.oracle {
            return Err(RegistryError::NotOracle(caller.clone()));
        }
        Ok(())
    }

    fn require_token(&self, token_id: TokenId) -> Result<&TokenClass, RegistryError> {
        self.token_classes
            .get(&token_id)
            .ok_or(RegistryError::UnknownToken(token_id))
    }

    fn may_move(&self, caller: &Address, owner: &Address, token_id: TokenId) -> bool {
        caller == owner
            || self.operators.contains(&OperatorKey {
                owner: owner.clone(),
                operator: caller.clone(),
                token_id,
            })
    }

    pub fn token_class(&self, token_id: TokenId) -> Option<&TokenClass> {
        self.token_classes.get(&token_id)
    }

    pub fn balance_of(&self, owner: &Address, token_id: TokenId) -> Result<u64, RegistryError> {
        self.require_token(token_id)?;
        Ok(self.raw_balance(owner, token_id))
    }

    fn raw_balance(&self, owner: &Address, token_id: TokenId) -> u64 {
        self.balances.get(&(owner.clone(), token_id)).copied().unwrap_or(0)
    }

    pub fn total_minted(&self, token_id: TokenId) -> u64 {
        self.total_minted.get(&token_id).copied().unwrap_or(0)
    }

    pub fn total_retired(&self, token_id: TokenId) -> u64 {
        self.total_retired.get(&token_id).copied().unwrap_or(0)
    }

    /// Σ balances for one token id.
    pub fn circulating(&self, token_id: TokenId) -> u64 {
        self.balances
            .iter()
            .filter(|((_, t), _)| *t == token_id)
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn is_operator(&self, owner: &Address, operator: &Address, token_id: TokenId) -> bool {
        self.operators.contains(&OperatorKey {
            owner: owner.clone(),
            operator: operator.clone(),
            token_id,
        })
    }

    pub fn create_token(&mut self, caller: &Address, class: TokenClass) -> Result<Vec<Event>, RegistryError> {
        self.require_oracle(caller)?;
        if self.token_classes.contains_key(&class.token_id) {
            return Err(RegistryError::DuplicateTokenId(class.token_id));
        }
        if class.duration.end_year < class.duration.start_year {
            return Err(RegistryError::InvalidTokenClass(format!(
                "end year {} precedes start year {}",
                class.duration.end_year, class.duration.start_year
            )));
        }
        if class.jurisdiction.is_empty() {
            return Err(RegistryError::InvalidTokenClass("empty jurisdiction".into()));
        }
        let id = class.token_id;
        self.token_classes.insert(id, class);
        self.total_minted.insert(id, 0);
        self.total_retired.insert(id, 0);
        Ok(Vec::new())
    }

    pub fn mint(
        &mut self,
        caller: &Address,
        token_id: TokenId,
        owner: &Address,
        amount: u64,
        manifest_hash: ContentHash,
    ) -> Result<Vec<Event>, RegistryError> {
        self.require_oracle(caller)?;
        self.require_token(token_id)?;
        self.credit(token_id, owner, amount)?;
        Ok(vec![Event::Mint {
            token_id,
            owner: owner.clone(),
            amount,
            manifest_hash,
        }])
    }

    /// Mint without the oracle check; used for genesis allocations.
    pub(crate) fn credit(&mut self, token_id: TokenId, owner: &Address, amount: u64) -> Result<(), RegistryError> {
        if amount == 0 {
            return Err(RegistryError::ZeroAmount);
        }
        let minted = self
            .total_minted(token_id)
            .checked_add(amount)
            .ok_or(RegistryError::Overflow)?;
        let balance = self
            .raw_balance(owner, token_id)
            .checked_add(amount)
            .ok_or(RegistryError::Overflow)?;
        self.total_minted.insert(token_id, minted);
        set_balance(&mut self.balances, (owner.clone(), token_id), balance);
        Ok(())
    }

    /// Applies a nested transfer batch. Either every item applies or none do.
    pub fn transfer(&mut self, caller: &Address, batch: &[TransferBatch]) -> Result<Vec<Event>, RegistryError> {
        let mut staged: BTreeMap<(Address, TokenId), u64> = BTreeMap::new();
        let mut events = Vec::new();
        for group in batch {
            for tx in &group.txs {
                self.require_token(tx.token_id)?;
                if !self.may_move(caller, &group.from, tx.token_id) {
                    return Err(RegistryError::NotOperator {
                        owner: group.from.clone(),
                        caller: caller.clone(),
                        token_id: tx.token_id,
                    });
                }
                let from_key = (group.from.clone(), tx.token_id);
                let from_balance = staged
                    .get(&from_key)
                    .copied()
                    .unwrap_or_else(|| self.raw_balance(&group.from, tx.token_id));
                if from_balance < tx.amount {
                    return Err(RegistryError::InsufficientBalance {
                        owner: group.from.clone(),
                        token_id: tx.token_id,
                        balance: from_balance,
                        requested: tx.amount,
                    });
                }
                staged.insert(from_key, from_balance - tx.amount);
                let to_key = (tx.to.clone(), tx.token_id);
                let to_balance = staged
                    .get(&to_key)
                    .copied()
                    .unwrap_or_else(|| self.raw_balance(&tx.to, tx.token_id));
                let to_balance = to_balance.checked_add(tx.amount).ok_or(RegistryError::Overflow)?;
                staged.insert(to_key, to_balance);
                events.push(Event::Transfer {
                    from: group.from.clone(),
                    to: tx.to.clone(),
                    token_id: tx.token_id,
                    amount: tx.amount,
                });
            }
        }
        for (key, value) in staged {
            set_balance(&mut self.balances, key, value);
        }
        Ok(events)
    }

    /// Adds and removes operators in order. Every entry must be owned by the caller.
    pub fn update_operators(
        &mut self,
        caller: &Address,
        updates: &[OperatorUpdate],
    ) -> Result<Vec<Event>, RegistryError> {
        for update in updates {
            let key = match update {
                OperatorUpdate::AddOperator(k) | OperatorUpdate::RemoveOperator(k) => k,
            };
            if &key.owner != caller {
                return Err(RegistryError::NotOwner {
                    owner: key.owner.clone(),
                    caller: caller.clone(),
                });
            }
        }
        let mut events = Vec::with_capacity(updates.len());
        for update in updates {
            let (key, added) = match update {
                OperatorUpdate::AddOperator(k) => {
                    self.operators.insert(k.clone());
                    (k, true)
                }
                OperatorUpdate::RemoveOperator(k) => {
                    self.operators.remove(k);
                    (k, false)
                }
            };
            events.push(Event::OperatorUpdate {
                owner: key.owner.clone(),
                operator: key.operator.clone(),
                token_id: key.token_id,
                added,
            });
        }
        Ok(events)
    }

    /// Burns `amount` from `owner`'s balance. The claim travels in the
    /// emitted RETIRE event only.
    pub fn retire(
        &mut self,
        caller: &Address,
        owner: &Address,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
    ) -> Result<Vec<Event>, RegistryError> {
        self.require_token(token_id)?;
        if amount == 0 {
            return Err(RegistryError::ZeroAmount);
        }
        if !self.may_move(caller, owner, token_id) {
            return Err(RegistryError::NotOperator {
                owner: owner.clone(),
                caller: caller.clone(),
                token_id,
            });
        }
        let balance = self.raw_balance(owner, token_id);
        if balance < amount {
            return Err(RegistryError::InsufficientBalance {
                owner: owner.clone(),
                token_id,
                balance,
                requested: amount,
            });
        }
        let retired = self
            .total_retired(token_id)
            .checked_add(amount)
            .ok_or(RegistryError::Overflow)?;
        set_balance(&mut self.balances, (owner.clone(), token_id), balance - amount);
        self.total_retired.insert(token_id, retired);
        Ok(vec![Event::Retire {
            record: RetirementRecord {
                token_id,
                amount,
                owner: owner.clone(),
                on_behalf_of: claim.on_behalf_of,
                beneficiary: claim.beneficiary,
                claim_metadata: claim.claim_metadata,
            },
        }])
    }

    pub fn set_oracle(&mut self, caller: &Address, new_oracle: Address) -> Result<Vec<Event>, RegistryError> {
        self.require_oracle(caller)?;
        let previous = std::mem::replace(&mut self.oracle, new_oracle.clone());
        Ok(vec![Event::OracleRotated {
            previous,
            current: new_oracle,
        }])
    }

    /// Replaces a token class's manifest hash after a re-evaluation.
    pub fn update_metadata(
        &mut self,
        caller: &Address,
        token_id: TokenId,
        manifest_hash: ContentHash,
    ) -> Result<Vec<Event>, RegistryError> {
        self.require_oracle(caller)?;
        let class = self
            .token_classes
            .get_mut(&token_id)
            .ok_or(RegistryError::UnknownToken(token_id))?;
        class.manifest_hash = manifest_hash;
        Ok(vec![Event::MetadataUpdated {
            token_id,
            manifest_hash,
        }])
    }
}

/// Decoded registry entrypoint call.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "entrypoint", content = "payload", rename_all = "snake_case")]
pub enum RegistryCall {
    CreateToken(TokenClass),
    Mint {
        token_id: TokenId,
        owner: Address,
        amount: u64,
        manifest_hash: ContentHash,
    },
    Transfer(Vec<TransferBatch>),
    UpdateOperators(Vec<OperatorUpdate>),
    Retire {
        /// Defaults to the caller.
        #[serde(default)]
        owner: Option<Address>,
        token_id: TokenId,
        amount: u64,
        claim: RetirementClaim,
    },
    SetOracle {
        new_oracle: Address,
    },
    UpdateMetadata {
        token_id: TokenId,
        manifest_hash: ContentHash,
    },
}

impl RegistryCall {
    pub const ENTRYPOINTS: &'static [&'static str] = &[
        "create_token",
        "mint",
        "transfer",
        "update_operators",
        "retire",
        "set_oracle",
        "update_metadata",
    ];
}

impl RegistryState {
    pub fn execute(&mut self, caller: &Address, call: RegistryCall) -> Result<Vec<Event>, RegistryError> {
        match call {
            RegistryCall::CreateToken(class) => self.create_token(caller, class),
            RegistryCall::Mint {
                token_id,
                owner,
                amount,
                manifest_hash,
            } => self.mint(caller, token_id, &owner, amount, manifest_hash),
            RegistryCall::Transfer(batch) => self.transfer(caller, &batch),
            RegistryCall::UpdateOperators(updates) => self.update_operators(caller, &updates),
            RegistryCall::Retire {
                owner,
                token_id,
                amount,
                claim,
            } => {
                let owner = owner.unwrap_or_else(|| caller.clone());
                self.retire(caller, &owner, token_id, amount, claim)
            }
            RegistryCall::SetOracle { new_oracle } => self.set_oracle(caller, new_oracle),
            RegistryCall::UpdateMetadata {
                token_id,
                manifest_hash,
            } => self.update_metadata(caller, token_id, manifest_hash),
        }
    }
}

impl Canonical for OperatorUpdate {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            OperatorUpdate::AddOperator(k) => {
                encode_tag(0, out);
                k.encode(out);
            }
            OperatorUpdate::RemoveOperator(k) => {
                encode_tag(1, out);
                k.encode(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> Address {
        Address::new(s).unwrap()
    }

    pub(crate) fn class(token_id: TokenId, ratings: [Rating; 3], jurisdiction: &str) -> TokenClass {
        TokenClass {
            token_id,
            project_name: format!("project-{token_id}"),
            jurisdiction: jurisdiction.to_string(),
            duration: Duration {
                start_year: 2012,
                end_year: 2042,
            },
            biodiversity: ratings[0],
            livelihood: ratings[1],
            justice: ratings[2],
            manifest_hash: ContentHash::of(b"manifest"),
            funding_source: String::new(),
        }
    }

    fn registry_with_token() -> RegistryState {
        let mut r = RegistryState::new(addr("oracle"));
        r.create_token(&addr("oracle"), class(0, [Rating::A; 3], "SL")).unwrap();
        r
    }

    fn claim() -> RetirementClaim {
        RetirementClaim {
            beneficiary: "acme".into(),
            claim_metadata: "flight LHR-JFK".into(),
            on_behalf_of: None,
        }
    }

    fn xfer(from: &str, to: &str, token_id: TokenId, amount: u64) -> TransferBatch {
        TransferBatch {
            from: addr(from),
            txs: vec![TransferItem {
                to: addr(to),
                token_id,
                amount,
            }],
        }
    }

    #[test]
    fn ratings_are_ordered_a_over_c() {
        assert!(Rating::A > Rating::B && Rating::B > Rating::C);
        assert_eq!("B".parse::<Rating>().unwrap(), Rating::B);
        assert!("D".parse::<Rating>().is_err());
    }

    #[test]
    fn create_token_rules() {
        let mut r = registry_with_token();
        assert_eq!(r.total_minted(0), 0);
        assert_eq!(r.circulating(0), 0);
        assert_eq!(
            r.create_token(&addr("mallory"), class(1, [Rating::A; 3], "SL")),
            Err(RegistryError::NotOracle(addr("mallory")))
        );
        assert_eq!(
            r.create_token(&addr("oracle"), class(0, [Rating::A; 3], "SL")),
            Err(RegistryError::DuplicateTokenId(0))
        );
    }

    #[test]
    fn mint_and_balance() {
        let mut r = registry_with_token();
        let events = r
            .mint(&addr("oracle"), 0, &addr("P"), 1000, ContentHash::of(b"m"))
            .unwrap();
        assert_eq!(r.balance_of(&addr("P"), 0), Ok(1000));
        assert_eq!(r.total_minted(0), 1000);
        assert!(matches!(&events[0], Event::Mint { manifest_hash, .. } if *manifest_hash == ContentHash::of(b"m")));
        assert_eq!(
            r.mint(&addr("P"), 0, &addr("P"), 1, ContentHash::default()),
            Err(RegistryError::NotOracle(addr("P")))
        );
        assert_eq!(
            r.mint(&addr("oracle"), 0, &addr("P"), 0, ContentHash::default()),
            Err(RegistryError::ZeroAmount)
        );
        assert_eq!(
            r.mint(&addr("oracle"), 9, &addr("P"), 1, ContentHash::default()),
            Err(RegistryError::UnknownToken(9))
        );
        assert_eq!(r.balance_of(&addr("nobody"), 0), Ok(0));
        assert_eq!(r.balance_of(&addr("nobody"), 5), Err(RegistryError::UnknownToken(5)));
    }

    #[test]
    fn transfer_moves_balance() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("a"), 1000, ContentHash::default())
            .unwrap();
        r.transfer(&addr("a"), &[xfer("a", "b", 0, 300)]).unwrap();
        assert_eq!(r.balance_of(&addr("a"), 0), Ok(700));
        assert_eq!(r.balance_of(&addr("b"), 0), Ok(300));
    }

    #[test]
    fn zero_transfer_is_a_no_op() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("a"), 10, ContentHash::default())
            .unwrap();
        let before = r.clone();
        r.transfer(&addr("a"), &[xfer("a", "b", 0, 0)]).unwrap();
        assert_eq!(r, before);
    }

    #[test]
    fn overdrafting_batch_is_rejected_whole() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("a"), 1000, ContentHash::default())
            .unwrap();
        let before = r.clone();
        let batch = TransferBatch {
            from: addr("a"),
            txs: vec![
                TransferItem {
                    to: addr("b"),
                    token_id: 0,
                    amount: 600,
                },
                TransferItem {
                    to: addr("c"),
                    token_id: 0,
                    amount: 600,
                },
            ],
        };
        let err = r.transfer(&addr("a"), &[batch]).unwrap_err();
        assert!(matches!(
            err,
            RegistryError::InsufficientBalance {
                balance: 400,
                requested: 600,
                ..
            }
        ));
        assert_eq!(r, before);
    }

    #[test]
    fn self_transfer_within_batch_uses_staged_balances() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("a"), 100, ContentHash::default())
            .unwrap();
        r.transfer(&addr("a"), &[xfer("a", "a", 0, 100), xfer("a", "b", 0, 100)])
            .unwrap();
        assert_eq!(r.balance_of(&addr("a"), 0), Ok(0));
        assert_eq!(r.balance_of(&addr("b"), 0), Ok(100));
    }

    #[test]
    fn operators_grant_and_revoke() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("owner"), 100, ContentHash::default())
            .unwrap();
        let key = OperatorKey {
            owner: addr("owner"),
            operator: addr("op"),
            token_id: 0,
        };
        assert!(matches!(
            r.transfer(&addr("op"), &[xfer("owner", "x", 0, 10)]),
            Err(RegistryError::NotOperator { .. })
        ));
        r.update_operators(&addr("owner"), &[OperatorUpdate::AddOperator(key.clone())])
            .unwrap();
        r.transfer(&addr("op"), &[xfer("owner", "x", 0, 10)]).unwrap();
        r.update_operators(&addr("owner"), &[OperatorUpdate::RemoveOperator(key.clone())])
            .unwrap();
        assert!(matches!(
            r.transfer(&addr("op"), &[xfer("owner", "x", 0, 10)]),
            Err(RegistryError::NotOperator { .. })
        ));
        // removing an absent entry is fine
        r.update_operators(&addr("owner"), &[OperatorUpdate::RemoveOperator(key.clone())])
            .unwrap();
        assert_eq!(
            r.update_operators(&addr("op"), &[OperatorUpdate::AddOperator(key)]),
            Err(RegistryError::NotOwner {
                owner: addr("owner"),
                caller: addr("op")
            })
        );
    }

    #[test]
    fn operator_on_other_token_does_not_authorize() {
        let mut r = registry_with_token();
        r.create_token(&addr("oracle"), class(1, [Rating::A; 3], "SL")).unwrap();
        r.mint(&addr("oracle"), 0, &addr("owner"), 100, ContentHash::default())
            .unwrap();
        r.update_operators(
            &addr("owner"),
            &[OperatorUpdate::AddOperator(OperatorKey {
                owner: addr("owner"),
                operator: addr("op"),
                token_id: 1,
            })],
        )
        .unwrap();
        assert!(r.transfer(&addr("op"), &[xfer("owner", "x", 0, 10)]).is_err());
    }

    #[test]
    fn retire_burns_and_emits_record() {
        let mut r = registry_with_token();
        r.mint(&addr("oracle"), 0, &addr("a"), 1000, ContentHash::default())
            .unwrap();
        let events = r.retire(&addr("a"), &addr("a"), 0, 400, claim()).unwrap();
        assert_eq!(r.balance_of(&addr("a"), 0), Ok(600));
        assert_eq!(r.total_retired(0), 400);
        match &events[0] {
            Event::Retire { record } => {
                assert_eq!(record.amount, 400);
                assert_eq!(record.beneficiary, "acme");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            r.retire(&addr("a"), &addr("a"), 0, 700, claim()),
            Err(RegistryError::InsufficientBalance {
                balance: 600,
                requested: 700,
                ..
            })
        ));
        assert_eq!(
            r.retire(&addr("a"), &addr("a"), 0, 0, claim()),
            Err(RegistryError::ZeroAmount)
        );
        assert!(matches!(
            r.retire(&addr("b"), &addr("a"), 0, 1, claim()),
            Err(RegistryError::NotOperator { .. })
        ));
        assert_eq!(r.total_minted(0), r.circulating(0) + r.total_retired(0));
    }

    #[test]
    fn oracle_rotation() {
        let mut r = registry_with_token();
        r.set_oracle(&addr("oracle"), addr("oracle")).unwrap();
        assert_eq!(r.oracle, addr("oracle"));
        r.set_oracle(&addr("oracle"), addr("b")).unwrap();
        assert_eq!(
            r.mint(&addr("oracle"), 0, &addr("x"), 1, ContentHash::default()),
            Err(RegistryError::NotOracle(addr("oracle")))
        );
        r.mint(&addr("b"), 0, &addr("x"), 1, ContentHash::default()).unwrap();
    }

    #[test]
    fn metadata_update_is_oracle_only() {
        let mut r = registry_with_token();
        let h = ContentHash::of(b"re-evaluation");
        assert!(r.update_metadata(&addr("x"), 0, h).is_err());
        r.update_metadata(&addr("oracle"), 0, h).unwrap();
        assert_eq!(r.token_class(0).unwrap().manifest_hash, h);
    }

    #[test]
    fn call_decoding_round_trip() {
        let call = RegistryCall::Retire {
            owner: None,
            token_id: 0,
            amount: 5,
            claim: claim(),
        };
        let json = serde_json::to_value(&call).unwrap();
        assert_eq!(json["entrypoint"], "retire");
        let back: RegistryCall = serde_json::from_value(json).unwrap();
        assert_eq!(back, call);
    }
}
