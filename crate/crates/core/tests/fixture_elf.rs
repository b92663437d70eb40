use std::collections::BTreeSet;
use std::path::PathBuf;

use firmod_core::arm::{extract_calls, extract_data_refs, recover_functions};
use firmod_core::binary::{build_name_address_map, load_elf, BinaryError};
use firmod_core::Addr;
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Deserialize)]
struct Listing {
    sections: Vec<ListedSection>,
    functions: Vec<ListedFunction>,
    calls: Vec<ListedCall>,
    data_refs: Vec<ListedRef>,
}

#[derive(Deserialize)]
struct ListedSection {
    name: String,
    vaddr: u64,
    size: u64,
}

#[derive(Deserialize)]
struct ListedFunction {
    name: String,
    entry: u64,
}

#[derive(Deserialize)]
struct ListedCall {
    caller: u64,
    callee: u64,
    site: u64,
}

#[derive(Deserialize)]
struct ListedRef {
    function: u64,
    data_addr: u64,
}

fn listing() -> Listing {
    let text = std::fs::read_to_string(fixture("tiny_arm.listing.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn sections_match_listing() {
    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    for s in listing().sections {
        let got = img.sections.iter().find(|x| x.name == s.name).unwrap();
        assert_eq!((got.vaddr.0, got.size), (s.vaddr, s.size), "{}", s.name);
    }
    assert_eq!(img.entry_point, Addr(0x0800_02c5));
}

#[test]
fn name_map_covers_every_function() {
    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    let map = build_name_address_map(&img).unwrap();
    let l = listing();
    assert_eq!(map.len(), l.functions.len());
    for f in &l.functions {
        assert_eq!(map.name_of(Addr(f.entry)), Some(f.name.as_str()));
    }
    assert_eq!(map.addresses_of("main"), vec![Addr(0x0800_01bc)]);
}

#[test]
fn stripped_image_has_no_names() {
    let img = load_elf(fixture("tiny_arm_stripped.elf")).unwrap();
    assert!(matches!(build_name_address_map(&img), Err(BinaryError::NoSymbolInformation)));
}

#[test]
fn recovered_functions_equal_symbol_table() {
    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    let fs = recover_functions(&img, &[]).unwrap();
    let got: BTreeSet<u64> = fs.iter().map(|f| f.entry.0).collect();
    let want: BTreeSet<u64> = listing().functions.iter().map(|f| f.entry).collect();
    assert_eq!(got, want);
    assert!(fs.iter().all(|f| f.thumb && f.entry < f.end));
}

#[test]
fn call_sites_equal_listing() {
    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    let fs = recover_functions(&img, &[]).unwrap();
    let calls = extract_calls(&img, &fs);
    let got: BTreeSet<(u64, u64, u64)> = calls.sites.iter().map(|c| (c.caller.0, c.callee.0, c.site.0)).collect();
    let want: BTreeSet<(u64, u64, u64)> = listing().calls.iter().map(|c| (c.caller, c.callee, c.site)).collect();
    assert_eq!(got, want);
    assert_eq!(calls.sites.len(), want.len());
}

#[test]
fn data_refs_equal_listing() {
    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    let fs = recover_functions(&img, &[]).unwrap();
    let got: BTreeSet<(u64, u64)> =
        extract_data_refs(&img, &fs).iter().map(|r| (r.function.0, r.data_addr.0)).collect();
    let want: BTreeSet<(u64, u64)> = listing().data_refs.iter().map(|r| (r.function, r.data_addr)).collect();
    assert_eq!(got, want);
}

#[test]
fn stripped_recovery_finds_most_entries() {
    let img = load_elf(fixture("tiny_arm_stripped.elf")).unwrap();
    let fs = recover_functions(&img, &[]).unwrap();
    let got: BTreeSet<u64> = fs.iter().map(|f| f.entry.0).collect();
    let want: Vec<u64> = listing().functions.iter().map(|f| f.entry).collect();
    let hit = want.iter().filter(|e| got.contains(e)).count();
    assert!(hit * 10 >= want.len() * 9, "recovered {hit}/{} entries: {got:x?}", want.len());
}

#[test]
fn fixture_decomposes_along_source_files() {
    use firmod_core::graph::{DrgWeighting, GraphWeights};
    use firmod_core::pipeline::decompose;

    let img = load_elf(fixture("tiny_arm.elf")).unwrap();
    let d = decompose(&img, &[], GraphWeights::default(), DrgWeighting::Count).unwrap();
    assert_eq!(d.combined.nodes().len(), 15);
    let names = build_name_address_map(&img).unwrap();
    let clusters: Vec<Vec<&str>> =
        d.run.partition.clusters().iter().map(|c| c.iter().map(|a| names.name_of(*a).unwrap()).collect()).collect();
    assert_eq!(clusters.len(), 3);
    assert!(clusters.contains(&vec!["uart_putc", "uart_puts", "uart_init", "uart_flush"]));
    assert!(d.run.q > 0.0);
}
