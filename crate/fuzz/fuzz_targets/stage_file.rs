#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use tundra_core::pipeline::{decode_stage, encode_stage, Registry};

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(tundra_ml::registry)
}

fuzz_target!(|data: &[u8]| {
    if let Ok(stage) = decode_stage(data, registry()) {
        let bytes = encode_stage(&stage);
        let again = decode_stage(&bytes, registry()).unwrap();
        assert_eq!(encode_stage(&again), bytes);
    }
});
