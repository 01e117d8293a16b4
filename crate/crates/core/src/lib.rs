//! PACT carbon credits: a reproducible evaluation pipeline that turns raster
//! land-use data into Permanent Additional Carbon Tonnes, and a simulated
//! ledger whose registry, pool and custodian contracts issue, trade, pool and
//! retire the resulting tokens.

pub mod address;
pub mod artifact_store;
pub mod canonical;
pub mod custodian;
pub mod evaluation;
pub mod event;
pub mod ledger;
pub mod pool;
pub mod registry;

pub use address::{Address, ContractId, TokenId};
pub use canonical::{Canonical, ContentHash};
pub use event::{EmittedEvent, Event, RetirementClaim, RetirementRecord};
pub use ledger::{Genesis, LedgerError, LedgerState, Operation};
