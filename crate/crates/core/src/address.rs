//! Account addresses, contract identifiers and token ids.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::Canonical;

pub type TokenId = u64;

/// Maximum length of an address string.
pub const MAX_ADDRESS_LEN: usize = 64;

/// Prefix reserved for the on-chain address of a contract.
const CONTRACT_PREFIX: char = '@';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AddressError {
    #[error("address is empty")]
    Empty,
    #[error("address {0:?} is longer than {MAX_ADDRESS_LEN} characters")]
    TooLong(String),
    #[error("address {0:?} contains non-printable or whitespace characters")]
    NotPrintable(String),
    #[error("address {0:?} uses the reserved contract prefix '@'")]
    ReservedPrefix(String),
}

fn check_printable(s: &str, max: usize) -> Result<(), AddressError> {
    if s.is_empty() {
        return Err(AddressError::Empty);
    }
    if s.len() > max {
        return Err(AddressError::TooLong(s.to_string()));
    }
    if !s.bytes().all(|b| b.is_ascii_graphic()) {
        return Err(AddressError::NotPrintable(s.to_string()));
    }
    Ok(())
}

/// Identifier of a deployed contract instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractId(String);

impl ContractId {
    pub fn new(id: impl Into<String>) -> Result<Self, AddressError> {
        let id = id.into();
        // the contract's address is the id plus a one-character prefix
        check_printable(&id, MAX_ADDRESS_LEN - 1)?;
        if id.starts_with(CONTRACT_PREFIX) {
            return Err(AddressError::ReservedPrefix(id));
        }
        Ok(ContractId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The address under which this contract holds tokens in other contracts.
    pub fn address(&self) -> Address {
        Address(format!("{CONTRACT_PREFIX}{}", self.0))
    }
}

impl std::str::FromStr for ContractId {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContractId::new(s)
    }
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An account address. Implicit (wallet) addresses never begin with `@`;
/// contract addresses are `@<contract id>`, so the two can never collide.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(String);

impl Address {
    /// Parses a wallet address. Contract addresses are rejected.
    pub fn new(value: impl Into<String>) -> Result<Self, AddressError> {
        let value = value.into();
        check_printable(&value, MAX_ADDRESS_LEN)?;
        if value.starts_with(CONTRACT_PREFIX) {
            return Err(AddressError::ReservedPrefix(value));
        }
        Ok(Address(value))
    }

    /// Parses either a wallet address or a contract address.
    pub fn parse_any(value: impl Into<String>) -> Result<Self, AddressError> {
        let value = value.into();
        match value.strip_prefix(CONTRACT_PREFIX) {
            Some(id) => Ok(ContractId::new(id)?.address()),
            None => Address::new(value),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_contract(&self) -> bool {
        self.0.starts_with(CONTRACT_PREFIX)
    }

    pub fn contract_id(&self) -> Option<ContractId> {
        self.0
            .strip_prefix(CONTRACT_PREFIX)
            .map(|id| ContractId(id.to_string()))
    }
}

/// Accepts wallet and contract addresses alike.
impl std::str::FromStr for Address {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Address::parse_any(s)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Address::parse_any(String::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

impl Serialize for ContractId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ContractId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        ContractId::new(String::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

impl Canonical for Address {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
    }
}

impl Canonical for ContractId {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
    }
}

/// Serde adapter writing maps with composite keys as `[[key, value], ...]`.
pub(crate) mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, serializer: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        serializer.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(deserializer: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(deserializer)?.into_iter().collect())
    }
}
