#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use tundra_core::pipeline::{pipeline_spec_json, Registry};

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(tundra_ml::registry)
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pipeline) = registry().pipeline_from_spec(text) {
        let spec = pipeline_spec_json(pipeline.stages());
        let again = registry().pipeline_from_spec(&spec).unwrap();
        assert_eq!(pipeline_spec_json(again.stages()), spec);
    }
});
