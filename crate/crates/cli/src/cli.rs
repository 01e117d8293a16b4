//! Command definitions and their execution.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pact_core::artifact_store::ArtifactStore;
use pact_core::custodian::{CustodianCall, KycEntity};
use pact_core::evaluation::synthetic::{demo_carbon_table, generate_world, SyntheticSpec};
use pact_core::evaluation::{evaluate_project, load_project, World};
use pact_core::pool::{PoolCall, PoolFactoryCall, PoolSpec, POOLED_TOKEN_ID};
use pact_core::registry::{
    Duration, OperatorKey, OperatorUpdate, Rating, RegistryCall, TokenClass, TransferBatch, TransferItem,
};
use pact_core::{
    Address, ContentHash, ContractId, EmittedEvent, Event, Genesis, LedgerState, Operation, RetirementClaim, TokenId,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chain::ChainDir;
use crate::index::IndexReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "pact", version, about = "Evaluate carbon projects and drive the PACT ledger")]
pub struct Cli {
    /// Chain directory (op log, events, state snapshot)
    #[arg(long, global = true, default_value = "chain")]
    pub chain_dir: PathBuf,
    /// Content-addressed artifact store
    #[arg(long, global = true, default_value = "store")]
    pub store_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the evaluation pipeline and write result.json, manifest.txt and mint.json
    Evaluate {
        /// Project config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// World file (CSV)
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic world file
    GenerateWorld {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid side length in pixels
        #[arg(long)]
        size: Option<u32>,
        /// Also write the matching carbon density table here
        #[arg(long)]
        carbon_out: Option<PathBuf>,
    },
    /// Submit operations to the ledger
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
    /// Global-progress report rebuilt from the event log
    Report,
    /// Check artifacts behind one manifest, or behind every mint on the chain
    Verify {
        /// Manifest digest; omit to check the whole chain
        #[arg(long)]
        manifest: Option<ContentHash>,
    },
}

#[derive(Debug, Args)]
pub struct Source {
    /// Address submitting the operation
    #[arg(long)]
    pub source: Address,
}

#[derive(Debug, Args)]
pub struct Claim {
    #[arg(long)]
    pub beneficiary: String,
    #[arg(long, default_value = "")]
    pub claim: String,
}

impl Claim {
    fn into_claim(self) -> RetirementClaim {
        RetirementClaim {
            beneficiary: self.beneficiary,
            claim_metadata: self.claim,
            on_behalf_of: None,
        }
    }
}

/// Mint-ready payload written next to an evaluation result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintReady {
    pub amount: u64,
    pub manifest_hash: ContentHash,
}

#[derive(Debug, Subcommand)]
pub enum ChainCommand {
    /// Create the chain with registry, pool factory and custodian
    Init {
        #[arg(long, default_value = "oracle")]
        oracle: Address,
        #[arg(long, default_value = "custodian-manager")]
        manager: Address,
        /// Use this genesis file instead of the standard deployment
        #[arg(long, conflicts_with_all = ["oracle", "manager"])]
        genesis: Option<PathBuf>,
    },
    /// Submit a raw operation
    Apply {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        target: ContractId,
        #[arg(long)]
        entrypoint: String,
        /// JSON payload, or @path to read it from a file
        #[arg(long)]
        payload: String,
    },
    /// Register a token class (oracle only)
    CreateToken {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        project_name: String,
        #[arg(long)]
        jurisdiction: String,
        #[arg(long)]
        start_year: i32,
        #[arg(long)]
        end_year: i32,
        #[arg(long)]
        biodiversity: Rating,
        #[arg(long)]
        livelihood: Rating,
        #[arg(long)]
        justice: Rating,
        #[arg(long, default_value = "")]
        funding_source: String,
        /// Manifest digest backing the class
        #[arg(long, required_unless_present = "evaluation")]
        manifest: Option<ContentHash>,
        /// Evaluation output directory to take the manifest from
        #[arg(long)]
        evaluation: Option<PathBuf>,
    },
    /// Mint credits against a verified manifest (oracle only)
    Mint {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        owner: Address,
        /// Evaluation output directory holding mint.json
        #[arg(long, conflicts_with_all = ["amount", "manifest"])]
        evaluation: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        amount: Option<u64>,
        #[arg(long, requires = "amount")]
        manifest: Option<ContentHash>,
        /// Mint even if the manifest cannot be verified in the store
        #[arg(long)]
        skip_verify: bool,
    },
    /// Move registry or pooled tokens
    Transfer {
        #[command(flatten)]
        source: Source,
        /// Registry or pool
        #[arg(long, default_value = "registry")]
        contract: ContractId,
        /// Defaults to the source
        #[arg(long)]
        from: Option<Address>,
        #[arg(long)]
        to: Address,
        /// Ignored for pools
        #[arg(long, default_value_t = 0)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Grant or revoke operators
    UpdateOperators {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        /// owner:operator:token_id
        #[arg(long)]
        add: Vec<String>,
        /// owner:operator:token_id
        #[arg(long)]
        remove: Vec<String>,
    },
    /// Burn credits with a retirement claim
    Retire {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        /// Holder to debit; defaults to the source
        #[arg(long)]
        owner: Option<Address>,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
        #[command(flatten)]
        claim: Claim,
    },
    /// Hand the oracle role to another address
    SetOracle {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        #[arg(long)]
        new_oracle: Address,
    },
    /// Point a token class at a new manifest
    UpdateMetadata {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        manifest: ContentHash,
    },
    /// Deploy a pool through the factory
    PoolCreate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "pools")]
        factory: ContractId,
        #[arg(long, default_value = "registry")]
        registry: ContractId,
        #[arg(long, default_value = "C")]
        min_biodiversity: Rating,
        #[arg(long, default_value = "C")]
        min_livelihood: Rating,
        #[arg(long, default_value = "C")]
        min_justice: Rating,
        /// Allowed jurisdiction; repeat for several, omit for any
        #[arg(long)]
        jurisdiction: Vec<String>,
    },
    /// Swap registry tokens for pooled tokens 1:1
    PoolDeposit {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        pool: ContractId,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Swap pooled tokens back for a chosen registry token
    PoolRedeem {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        pool: ContractId,
        #[arg(long)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Retire pooled tokens, oldest deposits first
    PoolRetire {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        pool: ContractId,
        #[arg(long)]
        amount: u64,
        #[command(flatten)]
        claim: Claim,
    },
    /// Register an off-chain entity (manager only)
    CustodianRegister {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "custodian")]
        custodian: ContractId,
        #[arg(long)]
        entity: String,
        /// key=value identity metadata; repeatable
        #[arg(long)]
        kyc: Vec<String>,
    },
    /// Credit tokens already held by the custodian to an entity
    CustodianAttribute {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "custodian")]
        custodian: ContractId,
        #[arg(long)]
        entity: String,
        /// Token contract (registry or pool)
        #[arg(long, default_value = "registry")]
        contract: ContractId,
        #[arg(long, default_value_t = 0)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Move an attributed balance between two entities
    CustodianTransfer {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "custodian")]
        custodian: ContractId,
        #[arg(long)]
        from_entity: String,
        #[arg(long)]
        to_entity: String,
        #[arg(long, default_value = "registry")]
        contract: ContractId,
        #[arg(long, default_value_t = 0)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Send an entity's tokens to an on-chain address
    CustodianWithdraw {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "custodian")]
        custodian: ContractId,
        #[arg(long)]
        from_entity: String,
        #[arg(long)]
        to: Address,
        #[arg(long, default_value = "registry")]
        contract: ContractId,
        #[arg(long, default_value_t = 0)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
    },
    /// Retire from an entity's balance
    CustodianRetire {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "custodian")]
        custodian: ContractId,
        #[arg(long)]
        entity: String,
        #[arg(long, default_value = "registry")]
        contract: ContractId,
        #[arg(long, default_value_t = 0)]
        token_id: TokenId,
        #[arg(long)]
        amount: u64,
        #[command(flatten)]
        claim: Claim,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Evaluate {
            config,
            world,
            out: dir,
        } => cmd_evaluate(&config, &world, &dir, &cli.store_dir, cli.format, out),
        Command::GenerateWorld {
            out: path,
            seed,
            size,
            carbon_out,
        } => {
            let mut spec = SyntheticSpec::demo();
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(size) = size {
                if size < 8 {
                    bail!("--size must be at least 8");
                }
                spec.width = size;
                spec.height = size;
            }
            let world = generate_world(&spec);
            fs::write(&path, world.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "wrote {} pixels to {}", world.pixels.len(), path.display())?;
            if let Some(table_path) = carbon_out {
                fs::write(&table_path, demo_carbon_table().to_csv())
                    .with_context(|| format!("writing {}", table_path.display()))?;
                writeln!(out, "wrote carbon table to {}", table_path.display())?;
            }
            Ok(())
        }
        Command::Chain { command } => {
            cmd_chain(&ChainDir::new(&cli.chain_dir), &cli.store_dir, command, cli.format, out)
        }
        Command::Report => {
            let state = ChainDir::new(&cli.chain_dir).load()?;
            let report = IndexReport::build(&state)?;
            match cli.format {
                Format::Text => out.write_all(report.to_text().as_bytes())?,
                Format::Machine => out.write_all(report.to_json().as_bytes())?,
            }
            Ok(())
        }
        Command::Verify { manifest } => cmd_verify(&cli.chain_dir, &cli.store_dir, manifest, out),
    }
}

fn cmd_evaluate(
    config: &Path,
    world_path: &Path,
    dir: &Path,
    store_dir: &Path,
    format: Format,
    out: &mut dyn Write,
) -> Result<()> {
    let project = load_project(config)?;
    let file = fs::File::open(world_path).with_context(|| format!("opening {}", world_path.display()))?;
    let world = World::from_csv(file).with_context(|| format!("{}", world_path.display()))?;
    let store = ArtifactStore::open(store_dir)?;
    let result = evaluate_project(&world, &project.config, &project.table, &project.schedule, &store)?;

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write("result.json", &result.to_json())?;
    write("manifest.txt", &result.manifest.to_text())?;
    let mint = MintReady {
        amount: result.pact_kg,
        manifest_hash: result.manifest_digest,
    };
    write("mint.json", &(serde_json::to_string_pretty(&mint)? + "\n"))?;

    match format {
        Format::Machine => out.write_all(result.to_json().as_bytes())?,
        Format::Text => {
            writeln!(out, "project {}", result.project)?;
            writeln!(
                out,
                "pixels project {} (matched {}) buffer {} (matched {}) unmatched {}",
                result.project_pixels,
                result.matched_project,
                result.buffer_pixels,
                result.matched_buffer,
                result.unmatched_count
            )?;
            writeln!(out, "additionality_t {:.3}", result.additionality_final)?;
            writeln!(out, "leakage_t {:.3}", result.leakage_final)?;
            writeln!(out, "ep {:.6}", result.ep)?;
            writeln!(out, "pact_kg {}", result.pact_kg)?;
            if let Some(adj) = result.al_adj {
                writeln!(out, "al_adj {adj:.4}")?;
            }
            if let Some(price) = result.price_pact {
                writeln!(out, "price_pact {price}")?;
            }
            writeln!(out, "manifest {}", result.manifest_digest)?;
        }
    }
    Ok(())
}

fn parse_operator(spec: &str) -> Result<OperatorKey> {
    let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
    let [token, operator, owner] = parts.as_slice() else {
        bail!("operator spec {spec:?} must be owner:operator:token_id");
    };
    Ok(OperatorKey {
        owner: Address::parse_any(*owner)?,
        operator: Address::parse_any(*operator)?,
        token_id: token.parse().with_context(|| format!("bad token id in {spec:?}"))?,
    })
}

fn read_mint_ready(dir: &Path) -> Result<MintReady> {
    let path = dir.join("mint.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn require_verified(store_dir: &Path, digest: &ContentHash) -> Result<()> {
    let store = ArtifactStore::open(store_dir)?;
    let report = store
        .verify(digest)
        .with_context(|| format!("manifest {digest} is not verifiable in {}", store_dir.display()))?;
    if !report.is_ok() {
        bail!("manifest {digest} failed verification: {:?}", report.problems);
    }
    Ok(())
}

/// Builds the operation a chain subcommand stands for. `Init` is handled
/// by the caller.
fn build_op(store_dir: &Path, state: &LedgerState, command: ChainCommand) -> Result<Operation> {
    Ok(match command {
        ChainCommand::Init { .. } => unreachable!("init has no operation"),
        ChainCommand::Apply {
            source,
            target,
            entrypoint,
            payload,
        } => {
            let text = match payload.strip_prefix('@') {
                Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
                None => payload,
            };
            let payload: Value = serde_json::from_str(&text).context("payload is not valid JSON")?;
            Operation::new(source.source, target, &entrypoint, payload)
        }
        ChainCommand::CreateToken {
            source,
            registry,
            token_id,
            project_name,
            jurisdiction,
            start_year,
            end_year,
            biodiversity,
            livelihood,
            justice,
            funding_source,
            manifest,
            evaluation,
        } => {
            let manifest_hash = match (manifest, evaluation) {
                (Some(m), _) => m,
                (None, Some(dir)) => read_mint_ready(&dir)?.manifest_hash,
                (None, None) => bail!("--manifest or --evaluation is required"),
            };
            Operation::from_call(
                source.source,
                registry,
                &RegistryCall::CreateToken(TokenClass {
                    token_id,
                    project_name,
                    jurisdiction,
                    duration: Duration { start_year, end_year },
                    biodiversity,
                    livelihood,
                    justice,
                    manifest_hash,
                    funding_source,
                }),
            )
        }
        ChainCommand::Mint {
            source,
            registry,
            token_id,
            owner,
            evaluation,
            amount,
            manifest,
            skip_verify,
        } => {
            let ready = match (evaluation, amount, manifest) {
                (Some(dir), _, _) => read_mint_ready(&dir)?,
                (None, Some(amount), Some(manifest_hash)) => MintReady { amount, manifest_hash },
                _ => bail!("give --evaluation, or both --amount and --manifest"),
            };
            if !skip_verify {
                require_verified(store_dir, &ready.manifest_hash)?;
            }
            Operation::from_call(
                source.source,
                registry,
                &RegistryCall::Mint {
                    token_id,
                    owner,
                    amount: ready.amount,
                    manifest_hash: ready.manifest_hash,
                },
            )
        }
        ChainCommand::Transfer {
            source,
            contract,
            from,
            to,
            token_id,
            amount,
        } => {
            let from = from.unwrap_or_else(|| source.source.clone());
            let is_pool = state.pool(&contract).is_some();
            let batch = vec![TransferBatch {
                from,
                txs: vec![TransferItem {
                    to,
                    token_id: if is_pool { POOLED_TOKEN_ID } else { token_id },
                    amount,
                }],
            }];
            if is_pool {
                Operation::from_call(source.source, contract, &PoolCall::Transfer(batch))
            } else {
                Operation::from_call(source.source, contract, &RegistryCall::Transfer(batch))
            }
        }
        ChainCommand::UpdateOperators {
            source,
            registry,
            add,
            remove,
        } => {
            let mut updates = Vec::new();
            for spec in &add {
                updates.push(OperatorUpdate::AddOperator(parse_operator(spec)?));
            }
            for spec in &remove {
                updates.push(OperatorUpdate::RemoveOperator(parse_operator(spec)?));
            }
            if updates.is_empty() {
                bail!("give at least one --add or --remove");
            }
            Operation::from_call(source.source, registry, &RegistryCall::UpdateOperators(updates))
        }
        ChainCommand::Retire {
            source,
            registry,
            owner,
            token_id,
            amount,
            claim,
        } => Operation::from_call(
            source.source,
            registry,
            &RegistryCall::Retire {
                owner,
                token_id,
                amount,
                claim: claim.into_claim(),
            },
        ),
        ChainCommand::SetOracle {
            source,
            registry,
            new_oracle,
        } => Operation::from_call(source.source, registry, &RegistryCall::SetOracle { new_oracle }),
        ChainCommand::UpdateMetadata {
            source,
            registry,
            token_id,
            manifest,
        } => Operation::from_call(
            source.source,
            registry,
            &RegistryCall::UpdateMetadata {
                token_id,
                manifest_hash: manifest,
            },
        ),
        ChainCommand::PoolCreate {
            source,
            factory,
            registry,
            min_biodiversity,
            min_livelihood,
            min_justice,
            jurisdiction,
        } => Operation::from_call(
            source.source,
            factory,
            &PoolFactoryCall::CreatePool(PoolSpec {
                min_biodiversity,
                min_livelihood,
                min_justice,
                allowed_jurisdictions: jurisdiction.into_iter().collect(),
                registry,
            }),
        ),
        ChainCommand::PoolDeposit {
            source,
            pool,
            token_id,
            amount,
        } => Operation::from_call(source.source, pool, &PoolCall::Deposit { token_id, amount }),
        ChainCommand::PoolRedeem {
            source,
            pool,
            token_id,
            amount,
        } => Operation::from_call(source.source, pool, &PoolCall::Redeem { token_id, amount }),
        ChainCommand::PoolRetire {
            source,
            pool,
            amount,
            claim,
        } => Operation::from_call(
            source.source,
            pool,
            &PoolCall::RetirePooled {
                amount,
                claim: claim.into_claim(),
            },
        ),
        ChainCommand::CustodianRegister {
            source,
            custodian,
            entity,
            kyc,
        } => {
            let mut kyc_metadata = BTreeMap::new();
            for kv in kyc {
                let Some((k, v)) = kv.split_once('=') else {
                    bail!("--kyc {kv:?} must be key=value");
                };
                kyc_metadata.insert(k.to_string(), v.to_string());
            }
            Operation::from_call(
                source.source,
                custodian,
                &CustodianCall::RegisterEntity(KycEntity {
                    entity_id: entity,
                    kyc_metadata,
                }),
            )
        }
        ChainCommand::CustodianAttribute {
            source,
            custodian,
            entity,
            contract,
            token_id,
            amount,
        } => Operation::from_call(
            source.source,
            custodian,
            &CustodianCall::AttributeDeposit {
                entity_id: entity,
                contract,
                token_id,
                amount,
            },
        ),
        ChainCommand::CustodianTransfer {
            source,
            custodian,
            from_entity,
            to_entity,
            contract,
            token_id,
            amount,
        } => Operation::from_call(
            source.source,
            custodian,
            &CustodianCall::InternalTransfer {
                from_entity,
                to_entity,
                contract,
                token_id,
                amount,
            },
        ),
        ChainCommand::CustodianWithdraw {
            source,
            custodian,
            from_entity,
            to,
            contract,
            token_id,
            amount,
        } => Operation::from_call(
            source.source,
            custodian,
            &CustodianCall::ExternalTransfer {
                from_entity,
                to,
                contract,
                token_id,
                amount,
            },
        ),
        ChainCommand::CustodianRetire {
            source,
            custodian,
            entity,
            contract,
            token_id,
            amount,
            claim,
        } => Operation::from_call(
            source.source,
            custodian,
            &CustodianCall::RetireFor {
                entity_id: entity,
                contract,
                token_id,
                amount,
                claim: claim.into_claim(),
            },
        ),
    })
}

#[derive(Serialize)]
struct Applied<'a> {
    op_index: u64,
    events: &'a [EmittedEvent],
    state_hash: ContentHash,
}

fn cmd_chain(
    chain: &ChainDir,
    store_dir: &Path,
    command: ChainCommand,
    format: Format,
    out: &mut dyn Write,
) -> Result<()> {
    let lock = chain.lock()?;
    if let ChainCommand::Init {
        oracle,
        manager,
        genesis,
    } = command
    {
        let genesis = match genesis {
            Some(path) => {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Genesis::standard(oracle, manager),
        };
        let state = chain.init(&genesis, &lock)?;
        let ids: Vec<String> = state
            .contracts()
            .iter()
            .map(|(id, c)| format!("{id} ({})", c.kind()))
            .collect();
        writeln!(out, "initialized {}: {}", chain.root().display(), ids.join(", "))?;
        writeln!(out, "state {}", state.state_hash())?;
        return Ok(());
    }
    let mut state = chain.load()?;
    let before: Vec<ContractId> = state.contracts().iter().map(|(id, _)| id.clone()).collect();
    let op = build_op(store_dir, &state, command)?;
    let events = chain.apply(&mut state, op, &lock)?;
    let op_index = state.op_log().len() as u64;
    match format {
        Format::Machine => {
            let applied = Applied {
                op_index,
                events: &events,
                state_hash: state.state_hash(),
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&applied)?)?;
        }
        Format::Text => {
            writeln!(out, "op {op_index} applied")?;
            for (id, c) in state.contracts().iter() {
                if !before.contains(id) {
                    writeln!(out, "  deployed {id} ({})", c.kind())?;
                }
            }
            for e in &events {
                writeln!(out, "  {} {} {}", e.contract, e.event.tag(), describe(&e.event))?;
            }
            writeln!(out, "state {}", state.state_hash())?;
        }
    }
    Ok(())
}

fn describe(event: &Event) -> String {
    let value = serde_json::to_value(event).expect("events serialize");
    value.get("payload").map(Value::to_string).unwrap_or_default()
}

fn cmd_verify(chain_dir: &Path, store_dir: &Path, manifest: Option<ContentHash>, out: &mut dyn Write) -> Result<()> {
    let store = ArtifactStore::open(store_dir)?;
    if let Some(digest) = manifest {
        let report = store.verify(&digest)?;
        for (kind, d) in report.manifest.references() {
            writeln!(out, "{kind} {d}")?;
        }
        if !report.is_ok() {
            for p in &report.problems {
                writeln!(out, "problem {p}")?;
            }
            bail!("manifest {digest} failed verification");
        }
        writeln!(out, "ok {digest}")?;
        return Ok(());
    }

    let state = ChainDir::new(chain_dir).load()?;
    let mut minted: BTreeMap<(ContractId, TokenId), Vec<ContentHash>> = BTreeMap::new();
    for e in state.event_log() {
        if let Event::Mint {
            token_id,
            manifest_hash,
            ..
        } = &e.event
        {
            minted
                .entry((e.contract.clone(), *token_id))
                .or_default()
                .push(*manifest_hash);
        }
    }
    let mut failures = 0;
    let mut checked = BTreeMap::new();
    for digests in minted.values() {
        for d in digests {
            if checked.contains_key(d) {
                continue;
            }
            let ok = matches!(store.verify(d), Ok(r) if r.is_ok());
            checked.insert(*d, ok);
            writeln!(out, "{} manifest {d}", if ok { "ok" } else { "FAILED" })?;
            failures += usize::from(!ok);
        }
    }
    let mut retires = 0;
    for e in state.event_log() {
        if let Event::Retire { record } = &e.event {
            retires += 1;
            let backed = minted
                .get(&(e.contract.clone(), record.token_id))
                .is_some_and(|ds| ds.iter().any(|d| checked[d]));
            if !backed {
                failures += 1;
                writeln!(
                    out,
                    "FAILED retire at op {} of {}/{} has no verifiable mint",
                    e.op_index, e.contract, record.token_id
                )?;
            }
        }
    }
    writeln!(out, "{} manifests, {retires} retirements checked", checked.len())?;
    if failures > 0 {
        bail!("{failures} verification failures");
    }
    Ok(())
}
