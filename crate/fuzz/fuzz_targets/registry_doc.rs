#![no_main]

use libfuzzer_sys::fuzz_target;
use tundra_core::pipeline::RegistryDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = RegistryDocument::parse(text) {
        let _ = doc.descriptors();
    }
});
