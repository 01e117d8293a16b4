//! A ledger persisted as plain files in one directory.
//!
//! ```text
//! genesis.json   initial contracts
//! ops.jsonl      applied ops, one JSON object per line, indexed from 1
//! events.jsonl   emitted events, one per line
//! state.json     contract storage snapshot
//! state.hash     hex state hash of the snapshot
//! LOCK           present while a command is writing
//! ```
//!
//! Loading replays `ops.jsonl` from genesis and refuses to continue if the
//! result disagrees with `state.hash` or `events.jsonl`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pact_core::ledger::{LedgerError, LoggedOp, ReplayError};
use pact_core::{EmittedEvent, Genesis, LedgerState, Operation};

#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0} is already initialized")]
    AlreadyInitialized(PathBuf),
    #[error("{0} is not an initialized chain directory (run `pact chain init`)")]
    NotInitialized(PathBuf),
    #[error("{0} exists: another command holds the chain lock (remove it if no command is running)")]
    Locked(PathBuf),
    #[error("genesis: {0}")]
    Genesis(String),
    #[error("replay failed: {0}")]
    Replay(#[from] ReplayError),
    #[error("chain files disagree: {0}")]
    Inconsistent(String),
    #[error("operation rejected: {0}")]
    Rejected(#[from] LedgerError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ChainError + '_ {
    move |source| ChainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Held for the duration of a writing command.
pub struct ChainLock {
    path: PathBuf,
}

impl Drop for ChainLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct ChainDir {
    root: PathBuf,
}

const GENESIS: &str = "genesis.json";
const OPS: &str = "ops.jsonl";
const EVENTS: &str = "events.jsonl";
const STATE: &str = "state.json";
const STATE_HASH: &str = "state.hash";
const LOCK: &str = "LOCK";

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ChainError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("chain records serialize");
    s.push('\n');
    s
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ChainError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ChainError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

impl ChainDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ChainDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn is_initialized(&self) -> bool {
        self.path(GENESIS).is_file()
    }

    pub fn lock(&self) -> Result<ChainLock, ChainError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.path(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(ChainLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(ChainError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Writes genesis and the initial snapshot.
    pub fn init(&self, genesis: &Genesis, _lock: &ChainLock) -> Result<LedgerState, ChainError> {
        if self.is_initialized() {
            return Err(ChainError::AlreadyInitialized(self.root.clone()));
        }
        let state = LedgerState::from_genesis(genesis).map_err(|e| ChainError::Genesis(e.to_string()))?;
        let mut genesis_json = serde_json::to_string_pretty(genesis).expect("genesis serializes");
        genesis_json.push('\n');
        write_atomic(&self.path(OPS), b"")?;
        let events: String = state.event_log().iter().map(json_line).collect();
        write_atomic(&self.path(EVENTS), events.as_bytes())?;
        self.write_snapshot(&state)?;
        // genesis last: its presence marks a complete directory
        write_atomic(&self.path(GENESIS), genesis_json.as_bytes())?;
        Ok(state)
    }

    pub fn genesis(&self) -> Result<Genesis, ChainError> {
        if !self.is_initialized() {
            return Err(ChainError::NotInitialized(self.root.clone()));
        }
        let path = self.path(GENESIS);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| ChainError::Corrupt {
            path,
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Rebuilds the ledger by replaying the op log, then checks it against
    /// the stored events and state hash.
    pub fn load(&self) -> Result<LedgerState, ChainError> {
        let genesis = self.genesis()?;
        let logged: Vec<LoggedOp> = read_jsonl(&self.path(OPS))?;
        for (i, l) in logged.iter().enumerate() {
            if l.index != i as u64 + 1 {
                return Err(ChainError::Corrupt {
                    path: self.path(OPS),
                    line: i + 1,
                    message: format!("expected op index {}, found {}", i + 1, l.index),
                });
            }
        }
        let state = LedgerState::replay(&genesis, logged.iter().map(|l| &l.op))?;
        if state.op_log() != logged.as_slice() {
            return Err(ChainError::Inconsistent("op log metadata differs from replay".into()));
        }
        let events: Vec<EmittedEvent> = read_jsonl(&self.path(EVENTS))?;
        if events != state.event_log() {
            return Err(ChainError::Inconsistent(format!(
                "{} does not match the events produced by replay",
                EVENTS
            )));
        }
        let hash_path = self.path(STATE_HASH);
        let stored = fs::read_to_string(&hash_path).map_err(io_err(&hash_path))?;
        if stored.trim() != state.state_hash().to_hex() {
            return Err(ChainError::Inconsistent(format!(
                "{STATE_HASH} {} but replay gives {}",
                stored.trim(),
                state.state_hash()
            )));
        }
        Ok(state)
    }

    /// Applies one op and persists it. Rejected ops leave every file as it was.
    pub fn apply(
        &self,
        state: &mut LedgerState,
        op: Operation,
        _lock: &ChainLock,
    ) -> Result<Vec<EmittedEvent>, ChainError> {
        let events = state.apply(op)?;
        let logged = state.op_log().last().expect("just applied");
        self.append(OPS, &json_line(logged))?;
        let lines: String = events.iter().map(json_line).collect();
        self.append(EVENTS, &lines)?;
        self.write_snapshot(state)?;
        Ok(events)
    }

    fn append(&self, name: &str, text: &str) -> Result<(), ChainError> {
        let path = self.path(name);
        let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(text.as_bytes()).map_err(io_err(&path))
    }

    fn write_snapshot(&self, state: &LedgerState) -> Result<(), ChainError> {
        let mut json = serde_json::to_string_pretty(state.contracts()).expect("state serializes");
        json.push('\n');
        write_atomic(&self.path(STATE), json.as_bytes())?;
        write_atomic(&self.path(STATE_HASH), format!("{}\n", state.state_hash()).as_bytes())
    }
}
