#![no_main]

use appnet::netdata::{load_network_edge_list, parse_edge_records, NetworkKind, Symmetrize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_edge_records(data) else {
        return;
    };
    // ids past 63 exercise the range check
    for symmetrize in [Symmetrize::Sum, Symmetrize::Max, Symmetrize::Strict] {
        if let Ok(g) = load_network_edge_list(data, "g", 64, NetworkKind::Weighted, symmetrize) {
            assert!(records.iter().all(|r| r.src < 64 && r.dst < 64));
            for r in &records {
                assert_eq!(g.weight(r.src, r.dst), g.weight(r.dst, r.src));
            }
        }
    }
});
