#![no_main]

use libfuzzer_sys::fuzz_target;
use tundra_core::interchange::{rows_from_str, rows_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((schema, rows)) = rows_from_str(text) else { return };
    let written = rows_to_string(&schema, &rows).unwrap();
    let (schema2, rows2) = rows_from_str(&written).unwrap();
    assert_eq!(schema2, schema);
    assert_eq!(rows_to_string(&schema2, &rows2).unwrap(), written);
});
