use std::fs;

use pact_core::artifact_store::{ArtifactStore, VerifyProblem};
use pact_core::evaluation::synthetic::{generate_world, SyntheticSpec};
use pact_core::ContentHash;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn store() -> (tempfile::TempDir, ArtifactStore) {
    let dir = tempfile::tempdir().unwrap();
    let s = ArtifactStore::open(dir.path().join("store")).unwrap();
    (dir, s)
}

#[test]
fn world_file_round_trips() {
    let (_d, s) = store();
    let world = generate_world(&SyntheticSpec {
        width: 10,
        height: 10,
        ..SyntheticSpec::demo()
    });
    let csv = world.to_csv();
    let digest = s.put(csv.as_bytes()).unwrap();
    assert_eq!(s.get(&digest).unwrap().unwrap(), csv.as_bytes());
    assert_eq!(digest, ContentHash::of(csv.as_bytes()));
}

#[test]
fn every_corruption_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    for round in 0..200 {
        let (_d, s) = store();
        let parts: Vec<Vec<u8>> = (0..3)
            .map(|_| (0..rng.random_range(1..300)).map(|_| rng.random()).collect())
            .collect();
        let (manifest, digest) = s
            .build_manifest(&parts[0], &parts[1], &parts[2], "fuzz", round)
            .unwrap();
        assert!(s.verify(&digest).unwrap().is_ok());

        let refs = manifest.references();
        let (kind, target) = refs[rng.random_range(0..3)];
        let path = s.path_of(&target);
        let mut bytes = fs::read(&path).unwrap();
        match rng.random_range(0..4) {
            0 => {
                let i = rng.random_range(0..bytes.len());
                bytes[i] ^= 1 << rng.random_range(0..8);
            }
            1 => bytes.truncate(rng.random_range(0..bytes.len())),
            2 => bytes.push(rng.random()),
            _ => {
                fs::remove_file(&path).unwrap();
                let report = s.verify(&digest).unwrap();
                assert!(report
                    .problems
                    .iter()
                    .any(|p| matches!(p, VerifyProblem::Missing { kind: k, .. } if *k == kind)));
                continue;
            }
        }
        fs::write(&path, &bytes).unwrap();
        let report = s.verify(&digest).unwrap();
        assert!(!report.is_ok(), "round {round}: corruption of {kind} went unnoticed");
        assert!(report
            .problems
            .iter()
            .any(|p| matches!(p, VerifyProblem::Mismatched { digest, .. } if *digest == target)));
    }
}

#[test]
fn corrupted_manifest_is_rejected() {
    let (_d, s) = store();
    let (_, digest) = s.build_manifest(b"a", b"b", b"c", "v", 1).unwrap();
    let path = s.path_of(&digest);
    let mut text = fs::read(&path).unwrap();
    text[0] ^= 0x20;
    fs::write(&path, text).unwrap();
    assert!(s.verify(&digest).is_err());
}

proptest! {
    #[test]
    fn put_get_round_trip(content in prop::collection::vec(any::<u8>(), 0..2048)) {
        let (_d, s) = store();
        let a = s.put(&content).unwrap();
        let b = s.put(&content).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(s.get(&a).unwrap().unwrap(), content);
    }
}
