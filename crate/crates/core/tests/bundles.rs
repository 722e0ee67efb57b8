mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use common::corpus::corpus;
use sdoh_core::systems::{SystemOptions, SystemRegistry};
use sdoh_core::Schema;

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn opts() -> SystemOptions {
    SystemOptions {
        seed: Some(5),
        epochs: Some(4),
        ..Default::default()
    }
}

#[test]
fn bundles_reload_and_predict_identically() {
    let schema = Schema::default_schema();
    let train = corpus(5, 40);
    let test = corpus(6, 10);
    let registry = SystemRegistry::with_defaults();
    for name in ["s1", "s3"] {
        let system = registry.get(name).unwrap();
        let (model, _) = system.train(&train, &schema, &opts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let loaded = system.load(dir.path(), &SystemOptions::default()).unwrap();
        for d in &test {
            assert_eq!(model.extract(d.document()), loaded.extract(d.document()), "{name} {}", d.doc_id());
        }
        let again = tempfile::tempdir().unwrap();
        loaded.save(again.path()).unwrap();
        assert_eq!(tree(dir.path()), tree(again.path()), "{name}");
    }
}

#[test]
fn retraining_gives_identical_bytes() {
    let schema = Schema::default_schema();
    let train = corpus(8, 30);
    let registry = SystemRegistry::with_defaults();
    for name in ["s1", "s3"] {
        let system = registry.get(name).unwrap();
        let dirs: Vec<_> = (0..2)
            .map(|_| {
                let d = tempfile::tempdir().unwrap();
                system.train(&train, &schema, &opts()).unwrap().0.save(d.path()).unwrap();
                d
            })
            .collect();
        let a = tree(dirs[0].path());
        assert!(a.contains_key("manifest.json"));
        assert_eq!(a, tree(dirs[1].path()), "{name}");
    }
}

#[test]
fn damaged_bundles_are_rejected() {
    let schema = Schema::default_schema();
    let registry = SystemRegistry::with_defaults();
    let train = corpus(9, 15);
    for name in ["s1", "s3"] {
        let system = registry.get(name).unwrap();
        let empty = tempfile::tempdir().unwrap();
        assert!(system.load(empty.path(), &SystemOptions::default()).is_err());

        let dir = tempfile::tempdir().unwrap();
        system.train(&train, &schema, &opts()).unwrap().0.save(dir.path()).unwrap();
        let manifest = dir.path().join("manifest.json");
        let text = fs::read_to_string(&manifest).unwrap();
        assert!(text.contains("\"format_version\":1"));
        fs::write(&manifest, text.replacen("\"format_version\":1", "\"format_version\":99", 1)).unwrap();
        assert!(system.load(dir.path(), &SystemOptions::default()).is_err(), "{name}");
    }
    // The other system's bundle does not load.
    let dir = tempfile::tempdir().unwrap();
    let (s1, _) = registry.get("s1").unwrap().train(&train, &schema, &opts()).unwrap();
    s1.save(dir.path()).unwrap();
    assert!(registry.get("s3").unwrap().load(dir.path(), &SystemOptions::default()).is_err());
}
