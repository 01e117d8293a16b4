//! Local content-addressed artifact store.
//!
//! Artifacts live one per file, named by the lowercase hex SHA-256 of their
//! bytes. The digest is the raw SHA-256 (no multihash framing).
//!
//! A manifest ties together the three artifacts behind an evaluation. Its
//! serialization is line-oriented UTF-8 text with `\n` endings and no
//! trailing whitespace, exactly:
//!
//! ```text
//! pact-manifest v1
//! ground_truth <64 hex>
//! counterfactual <64 hex>
//! schedule <64 hex>
//! pipeline_version <printable ASCII, no newline>
//! created_at <decimal u64>
//! ```
//!
//! The manifest digest is the SHA-256 of those bytes, and the manifest is
//! itself stored under that digest.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canonical::ContentHash;

const MANIFEST_HEADER: &str = "pact-manifest v1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("artifact store I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown manifest {0}")]
    UnknownManifest(ContentHash),
    #[error("manifest {digest} is malformed: {reason}")]
    MalformedManifest { digest: ContentHash, reason: String },
    #[error("pipeline version must be printable ASCII without newlines")]
    InvalidVersion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub ground_truth_hash: ContentHash,
    pub counterfactual_hash: ContentHash,
    pub schedule_hash: ContentHash,
    pub pipeline_version: String,
    /// Logical run counter, never wall-clock time.
    pub created_at: u64,
}

impl ArtifactManifest {
    pub fn to_text(&self) -> String {
        format!(
            "{MANIFEST_HEADER}\nground_truth {}\ncounterfactual {}\nschedule {}\npipeline_version {}\ncreated_at {}\n",
            self.ground_truth_hash,
            self.counterfactual_hash,
            self.schedule_hash,
            self.pipeline_version,
            self.created_at
        )
    }

    pub fn digest(&self) -> ContentHash {
        ContentHash::of(self.to_text().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.split('\n');
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err("missing header line".into());
        }
        let mut field = |name: &str| -> Result<String, String> {
            let line = lines.next().ok_or_else(|| format!("missing {name}"))?;
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| format!("expected {name}, found {line:?}"))
        };
        let hash = |s: String| s.parse::<ContentHash>().map_err(|e| e.to_string());
        let manifest = ArtifactManifest {
            ground_truth_hash: hash(field("ground_truth")?)?,
            counterfactual_hash: hash(field("counterfactual")?)?,
            schedule_hash: hash(field("schedule")?)?,
            pipeline_version: field("pipeline_version")?,
            created_at: field("created_at")?.parse().map_err(|e| format!("created_at: {e}"))?,
        };
        if manifest.to_text() != text {
            return Err("not in canonical form".into());
        }
        Ok(manifest)
    }

    pub fn references(&self) -> [(ArtifactKind, ContentHash); 3] {
        [
            (ArtifactKind::GroundTruth, self.ground_truth_hash),
            (ArtifactKind::Counterfactual, self.counterfactual_hash),
            (ArtifactKind::Schedule, self.schedule_hash),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    GroundTruth,
    Counterfactual,
    Schedule,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::GroundTruth => "ground_truth",
            ArtifactKind::Counterfactual => "counterfactual",
            ArtifactKind::Schedule => "schedule",
        })
    }
}

/// A problem found while verifying a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum VerifyProblem {
    Missing {
        kind: ArtifactKind,
        digest: ContentHash,
    },
    Mismatched {
        kind: ArtifactKind,
        digest: ContentHash,
        actual: ContentHash,
    },
}

impl fmt::Display for VerifyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyProblem::Missing { kind, digest } => write!(f, "{kind} artifact {digest} is missing"),
            VerifyProblem::Mismatched { kind, digest, actual } => {
                write!(f, "{kind} artifact {digest} hashes to {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub manifest: ArtifactManifest,
    pub problems: Vec<VerifyProblem>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Directory-backed store; single writer, any number of readers.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(ArtifactStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, digest: &ContentHash) -> PathBuf {
        self.root.join(digest.to_hex())
    }

    /// Stores `content` and returns its digest. Storing the same bytes again
    /// is a no-op.
    pub fn put(&self, content: &[u8]) -> Result<ContentHash, StoreError> {
        let digest = ContentHash::of(content);
        let path = self.path_of(&digest);
        if path.exists() {
            return Ok(digest);
        }
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let tmp = self.root.join(format!(".{}.tmp", digest.to_hex()));
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(content).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
        fs::rename(&tmp, &path).map_err(io_err)?;
        Ok(digest)
    }

    /// Raw stored bytes, without re-hashing.
    pub fn get(&self, digest: &ContentHash) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.path_of(digest);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(StoreError::Io { path, source }),
        }
    }

    pub fn contains(&self, digest: &ContentHash) -> bool {
        self.path_of(digest).is_file()
    }

    /// Stores the three artifacts and their manifest; returns the manifest
    /// and its digest.
    pub fn build_manifest(
        &self,
        ground_truth: &[u8],
        counterfactual: &[u8],
        schedule: &[u8],
        pipeline_version: &str,
        created_at: u64,
    ) -> Result<(ArtifactManifest, ContentHash), StoreError> {
        if pipeline_version.is_empty() || !pipeline_version.bytes().all(|b| (0x20..0x7f).contains(&b)) {
            return Err(StoreError::InvalidVersion);
        }
        let manifest = ArtifactManifest {
            ground_truth_hash: self.put(ground_truth)?,
            counterfactual_hash: self.put(counterfactual)?,
            schedule_hash: self.put(schedule)?,
            pipeline_version: pipeline_version.to_string(),
            created_at,
        };
        let digest = self.put(manifest.to_text().as_bytes())?;
        Ok((manifest, digest))
    }

    /// Loads a manifest, checking the manifest bytes against its digest.
    pub fn load_manifest(&self, digest: &ContentHash) -> Result<ArtifactManifest, StoreError> {
        let bytes = self.get(digest)?.ok_or(StoreError::UnknownManifest(*digest))?;
        if ContentHash::of(&bytes) != *digest {
            return Err(StoreError::MalformedManifest {
                digest: *digest,
                reason: "manifest bytes do not match their digest".into(),
            });
        }
        let text = String::from_utf8(bytes).map_err(|_| StoreError::MalformedManifest {
            digest: *digest,
            reason: "not UTF-8".into(),
        })?;
        ArtifactManifest::parse(&text).map_err(|reason| StoreError::MalformedManifest {
            digest: *digest,
            reason,
        })
    }

    /// Re-hashes every artifact the manifest references.
    pub fn verify(&self, digest: &ContentHash) -> Result<VerifyReport, StoreError> {
        let manifest = self.load_manifest(digest)?;
        let mut problems = Vec::new();
        for (kind, expected) in manifest.references() {
            match self.get(&expected)? {
                None => problems.push(VerifyProblem::Missing { kind, digest: expected }),
                Some(bytes) => {
                    let actual = ContentHash::of(&bytes);
                    if actual != expected {
                        problems.push(VerifyProblem::Mismatched {
                            kind,
                            digest: expected,
                            actual,
                        });
                    }
                }
            }
        }
        Ok(VerifyReport { manifest, problems })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, ArtifactStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path().join("store")).unwrap();
        (dir, store)
    }

    #[test]
    fn empty_put_has_well_known_digest() {
        let (_d, s) = store();
        let d = s.put(b"").unwrap();
        assert!(d.to_hex().starts_with("e3b0c442"));
        assert_eq!(s.get(&d).unwrap(), Some(Vec::new()));
    }

    #[test]
    fn put_is_idempotent() {
        let (_d, s) = store();
        let a = s.put(b"hello").unwrap();
        let b = s.put(b"hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read_dir(s.root()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_determinism_and_sensitivity() {
        let (_d, s) = store();
        let (m1, d1) = s.build_manifest(b"gt", b"cf", b"sched", "v1", 0).unwrap();
        let (_, d2) = s.build_manifest(b"gt", b"cf", b"sched", "v1", 0).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(m1.digest(), d1);
        let (_, d3) = s.build_manifest(b"gt", b"cf", b"schee", "v1", 0).unwrap();
        assert_ne!(d1, d3);
        assert!(s.verify(&d1).unwrap().is_ok());
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = ArtifactManifest {
            ground_truth_hash: ContentHash::of(b"a"),
            counterfactual_hash: ContentHash::of(b"b"),
            schedule_hash: ContentHash::of(b"c"),
            pipeline_version: "pact-core 0.1.0".into(),
            created_at: 7,
        };
        assert_eq!(ArtifactManifest::parse(&m.to_text()).unwrap(), m);
        assert!(ArtifactManifest::parse(&m.to_text().replace('\n', "\r\n")).is_err());
        assert!(ArtifactManifest::parse(&format!("{} ", m.to_text())).is_err());
    }

    #[test]
    fn truncated_artifact_is_reported() {
        let (_d, s) = store();
        let (m, d) = s.build_manifest(b"ground truth", b"cf", b"sched", "v1", 0).unwrap();
        fs::write(s.path_of(&m.ground_truth_hash), b"ground").unwrap();
        let report = s.verify(&d).unwrap();
        assert_eq!(report.problems.len(), 1);
        assert!(matches!(
            report.problems[0],
            VerifyProblem::Mismatched {
                kind: ArtifactKind::GroundTruth,
                ..
            }
        ));
        fs::remove_file(s.path_of(&m.schedule_hash)).unwrap();
        let report = s.verify(&d).unwrap();
        assert_eq!(report.problems.len(), 2);
    }

    #[test]
    fn unknown_manifest() {
        let (_d, s) = store();
        assert!(matches!(
            s.verify(&ContentHash::of(b"nothing")),
            Err(StoreError::UnknownManifest(_))
        ));
        let not_manifest = s.put(b"just bytes").unwrap();
        assert!(matches!(
            s.verify(&not_manifest),
            Err(StoreError::MalformedManifest { .. })
        ));
    }
}
