//! Events emitted by contract entrypoints.
//!
//! Events go to the ledger's event log only. They are never part of
//! contract storage and never contribute to the state hash.

use serde::{Deserialize, Serialize};

use crate::address::{Address, ContractId, TokenId};
use crate::canonical::ContentHash;

/// Metadata binding a burn to an offsetting claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetirementRecord {
    pub token_id: TokenId,
    /// kgCO2e
    pub amount: u64,
    /// Holder whose registry balance was debited.
    pub owner: Address,
    /// Pooled holder or custodial entity the retirement was made for, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_behalf_of: Option<String>,
    pub beneficiary: String,
    pub claim_metadata: String,
}

/// Caller-supplied part of a retirement: who benefits and why.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RetirementClaim {
    pub beneficiary: String,
    #[serde(default)]
    pub claim_metadata: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_behalf_of: Option<String>,
}

/// One slice of a pooled retirement drawn from a single underlying token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tranche {
    pub token_id: TokenId,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "payload")]
pub enum Event {
    #[serde(rename = "MINT")]
    Mint {
        token_id: TokenId,
        owner: Address,
        amount: u64,
        manifest_hash: ContentHash,
    },
    #[serde(rename = "TRANSFER")]
    Transfer {
        from: Address,
        to: Address,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "RETIRE")]
    Retire { record: RetirementRecord },
    #[serde(rename = "OPERATOR_UPDATE")]
    OperatorUpdate {
        owner: Address,
        operator: Address,
        token_id: TokenId,
        added: bool,
    },
    #[serde(rename = "ORACLE_ROTATED")]
    OracleRotated { previous: Address, current: Address },
    #[serde(rename = "METADATA_UPDATED")]
    MetadataUpdated {
        token_id: TokenId,
        manifest_hash: ContentHash,
    },
    #[serde(rename = "POOL_DEPOSIT")]
    PoolDeposit {
        owner: Address,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "POOL_REDEEM")]
    PoolRedeem {
        owner: Address,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "POOL_RETIRE")]
    PoolRetire {
        owner: Address,
        amount: u64,
        tranches: Vec<Tranche>,
    },
    #[serde(rename = "ENTITY_REGISTERED")]
    EntityRegistered { entity_id: String },
    #[serde(rename = "DEPOSIT_ATTRIBUTED")]
    DepositAttributed {
        entity_id: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "INTERNAL_TRANSFER")]
    InternalTransfer {
        from_entity: String,
        to_entity: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "EXTERNAL_TRANSFER")]
    ExternalTransfer {
        from_entity: String,
        to: Address,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
    #[serde(rename = "CUSTODIAL_RETIRE")]
    CustodialRetire {
        entity_id: String,
        contract: ContractId,
        token_id: TokenId,
        amount: u64,
    },
}

impl Event {
    pub fn tag(&self) -> &'static str {
        match self {
            Event::Mint { .. } => "MINT",
            Event::Transfer { .. } => "TRANSFER",
            Event::Retire { .. } => "RETIRE",
            Event::OperatorUpdate { .. } => "OPERATOR_UPDATE",
            Event::OracleRotated { .. } => "ORACLE_ROTATED",
            Event::MetadataUpdated { .. } => "METADATA_UPDATED",
            Event::PoolDeposit { .. } => "POOL_DEPOSIT",
            Event::PoolRedeem { .. } => "POOL_REDEEM",
            Event::PoolRetire { .. } => "POOL_RETIRE",
            Event::EntityRegistered { .. } => "ENTITY_REGISTERED",
            Event::DepositAttributed { .. } => "DEPOSIT_ATTRIBUTED",
            Event::InternalTransfer { .. } => "INTERNAL_TRANSFER",
            Event::ExternalTransfer { .. } => "EXTERNAL_TRANSFER",
            Event::CustodialRetire { .. } => "CUSTODIAL_RETIRE",
        }
    }
}

/// An event as recorded in the ledger's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedEvent {
    /// Index of the op that emitted it; 0 for genesis allocations.
    pub op_index: u64,
    pub contract: ContractId,
    #[serde(flatten)]
    pub event: Event,
}

impl EmittedEvent {
    /// Size in bytes of the JSON-encoded payload, a proxy for the storage an
    /// archival node spends on it.
    pub fn payload_bytes(&self) -> u64 {
        let value = serde_json::to_value(&self.event).expect("events always serialize");
        value
            .get("payload")
            .map(|p| serde_json::to_vec(p).expect("json value serializes").len() as u64)
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape_is_tag_plus_payload() {
        let e = EmittedEvent {
            op_index: 3,
            contract: ContractId::new("registry").unwrap(),
            event: Event::OracleRotated {
                previous: Address::new("a").unwrap(),
                current: Address::new("b").unwrap(),
            },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"op_index":3,"contract":"registry","tag":"ORACLE_ROTATED","payload":{"previous":"a","current":"b"}}"#
        );
        let back: EmittedEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.event.tag(), "ORACLE_ROTATED");
        assert_eq!(e.payload_bytes(), r#"{"previous":"a","current":"b"}"#.len() as u64);
    }
}
