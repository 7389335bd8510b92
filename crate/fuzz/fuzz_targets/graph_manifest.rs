#![no_main]

use libfuzzer_sys::fuzz_target;
use tundra_graph::{weights_file_of, ComputationGraph};

// Layout: little-endian u16 manifest length, manifest text, weight blob.
fuzz_target!(|data: &[u8]| {
    let _ = weights_file_of(data);
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    let (manifest, weights) = rest.split_at(n.min(rest.len()));
    if let Ok(g) = ComputationGraph::from_bytes(manifest, weights) {
        let text = g.manifest_text("w.tgw");
        let blob = g.weight_blob();
        let again = ComputationGraph::from_bytes(text.as_bytes(), &blob).unwrap();
        assert_eq!(again.manifest_text("w.tgw"), text);
        assert_eq!(again.weight_blob(), blob);
    }
});
