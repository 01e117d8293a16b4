//! Test-only oracles and generators for pact-core.
//!
//! Everything here is written independently of the code it checks: the
//! oracles scan exhaustively or recompute from first principles instead of
//! reusing library helpers.

pub mod did_oracle;
pub mod ledger_oracle;
pub mod match_oracle;
pub mod scenario;
pub mod workload;
pub mod worlds;
