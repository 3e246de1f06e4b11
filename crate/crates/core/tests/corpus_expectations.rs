//! Every fixture yields exactly the reports listed in the corpus manifest,
//! and reports satisfy the verification and property-graph invariants.

mod common;

use std::collections::BTreeSet;

use castlint_core::graph::build_property_graph;
use castlint_core::scan::scan_document;
use castlint_core::verify::{verify_detailed, Outcome};
use castlint_core::{
    detect, parse_package, BugKind, EvidenceKind, PackageResult, ScanConfig, Status, TraitMap, VerifyOptions,
};
use common::corpus;
use serde_json::Value;

type Row = (String, String, String, Option<(u64, u64)>);

fn manifest() -> Vec<Value> {
    let text = std::fs::read_to_string(corpus().join("manifest.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    v["fixtures"].as_array().unwrap().clone()
}

fn scan(file: &str, interprocedural: bool) -> PackageResult {
    let path = corpus().join("fixtures").join(file);
    let text = std::fs::read_to_string(&path).unwrap();
    let cfg = ScanConfig { interprocedural, ..ScanConfig::default() };
    scan_document(file, &text, &cfg)
}

fn expected_rows(entry: &Value, mode: &str) -> Vec<Row> {
    let mut rows: Vec<Row> = entry["expected"][mode]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let site = r.get("conversion_site").map(|s| (s["block"].as_u64().unwrap(), s["statement"].as_u64().unwrap()));
            (
                r["function"].as_str().unwrap().to_string(),
                r["bug_type"].as_str().unwrap().to_string(),
                r["rule_id"].as_str().unwrap().to_string(),
                site,
            )
        })
        .collect();
    rows.sort();
    rows
}

fn actual_rows(result: &PackageResult, with_sites: &[Row]) -> Vec<Row> {
    let mut rows: Vec<Row> = result
        .reports
        .iter()
        .map(|r| {
            let f = &r.finding;
            let key = (f.pair.function.clone(), f.kind.numeral().to_string(), f.rule_id.clone());
            // Only compare sites the manifest pins down.
            let pinned = with_sites.iter().any(|e| (&e.0, &e.1, &e.2) == (&key.0, &key.1, &key.2) && e.3.is_some());
            let site = pinned.then_some((f.pair.site.block as u64, f.pair.site.statement as u64));
            (key.0, key.1, key.2, site)
        })
        .collect();
    rows.sort();
    rows
}

#[test]
fn manifest_expectations_hold_in_both_modes() {
    let entries = manifest();
    assert!(entries.len() >= 20);
    let mut failures = Vec::new();
    for entry in &entries {
        let file = entry["file"].as_str().unwrap();
        for (mode, ipa) in [("interprocedural", true), ("no_interprocedural", false)] {
            let result = scan(file, ipa);
            assert_eq!(result.status, Status::Ok, "{file}: {:?}", result.error);
            let expected = expected_rows(entry, mode);
            let actual = actual_rows(&result, &expected);
            if actual != expected {
                failures.push(format!("{file} [{mode}]\n  expected {expected:?}\n  actual   {actual:?}"));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn manifest_lists_every_fixture_and_the_known_false_positive() {
    let listed: BTreeSet<String> = manifest().iter().map(|e| e["file"].as_str().unwrap().to_string()).collect();
    let on_disk: BTreeSet<String> = common::fixture_paths()
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(listed, on_disk);
    let fps: Vec<_> = manifest().into_iter().filter(|e| e["expected_fp"] == Value::Bool(true)).collect();
    assert_eq!(fps.len(), 1);
    assert_eq!(fps[0]["file"], "xous_string_to_str.json");
}

#[test]
fn reports_respect_verification_invariants() {
    for entry in manifest() {
        let file = entry["file"].as_str().unwrap();
        let with = scan(file, true);
        let without = scan(file, false);
        // Interprocedural analysis only removes reports.
        let keys = |r: &PackageResult| -> BTreeSet<_> {
            r.reports.iter().map(|b| (b.finding.pair.function.clone(), b.finding.pair.site, b.finding.kind)).collect()
        };
        assert!(keys(&with).is_subset(&keys(&without)), "{file}");
        for r in with.reports.iter().chain(&without.reports) {
            let f = &r.finding;
            assert!(r.suppressions_considered.iter().all(|s| !s.applied), "{file}: applied check on a report");
            match r.evidence.kind {
                EvidenceKind::ReturnedAsReference => assert!(f.pair.dst_decl.is_reference() || r.evidence.aliased_local == 0),
                _ => {
                    assert_eq!(r.evidence.function, f.pair.function);
                    assert!(r.evidence.site > f.pair.site, "{file}: evidence precedes the conversion");
                }
            }
            assert!(f.rule_id.starts_with(match f.kind {
                BugKind::Misalignment => "T1-",
                BugKind::InconsistentLayout => "T2-",
                BugKind::MismatchedScope => "T3-",
            }));
            assert!(f.rule_id.contains(&format!("-{}-", f.pair.scenario)));
            if f.kind == BugKind::Misalignment {
                assert!(!f.arches.is_empty());
            }
        }
    }
}

#[test]
fn outcomes_partition_findings() {
    for path in common::fixture_paths() {
        let text = std::fs::read_to_string(&path).unwrap();
        let pkg = parse_package(&text).unwrap();
        let pg = build_property_graph(&pkg, TraitMap::for_package(&pkg, &[])).unwrap();
        let findings = detect(&pg, &pkg, &BugKind::ALL.into_iter().collect(), &castlint_core::ArchWidth::ALL);
        for ipa in [true, false] {
            let opts = VerifyOptions::new(ipa);
            for f in &findings {
                let v = verify_detailed(f.clone(), &pg, &pkg, &opts);
                match v.outcome {
                    Outcome::Reported => assert!(v.evidence.is_some()),
                    Outcome::NoAccess => assert!(v.evidence.is_none()),
                    Outcome::Refined => assert!(ipa, "refinement without interprocedural analysis"),
                    Outcome::Suppressed => assert!(v.suppressions.iter().any(|s| s.applied)),
                }
                // Determinism.
                assert_eq!(v, verify_detailed(f.clone(), &pg, &pkg, &opts));
            }
        }
    }
}

#[test]
fn property_graph_invariants() {
    for path in common::fixture_paths() {
        let text = std::fs::read_to_string(&path).unwrap();
        let pkg = parse_package(&text).unwrap();
        let pg = build_property_graph(&pkg, TraitMap::for_package(&pkg, &[])).unwrap();
        assert_eq!(pg.records.len(), pkg.functions.len());
        for (caller, callee) in &pg.call_edges {
            assert!(pg.records.contains_key(caller));
            assert!(pg.callers_of(callee).contains(caller));
            assert!(pg.callees_of(caller).contains(callee));
        }
        for func in &pkg.functions {
            let record = pg.record(&func.name).unwrap();
            assert_eq!(record.marked_unsafe, func.contains_unsafe);
            assert!(record.conversion_pairs.len() <= castlint_core::graph::count_conversions(func));
            for pair in &record.conversion_pairs {
                assert_eq!(pair.function, func.name);
                assert!(record.alias_graph.contains(pair.dst_local));
            }
            for ctor in pg.find_constructors(&func.return_type) {
                assert_eq!(pkg.function(&ctor).unwrap().return_type, func.return_type);
            }
        }
        assert_eq!(pg.to_json(), build_property_graph(&pkg, TraitMap::for_package(&pkg, &[])).unwrap().to_json());
    }
}
