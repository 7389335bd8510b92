#![no_main]

use std::sync::{Arc, OnceLock};

use libfuzzer_sys::fuzz_target;
use serde_json::Value;
use tundra_cli::rpc::Server;
use tundra_core::Engine;

fn engine() -> Arc<Engine> {
    static ENGINE: OnceLock<Arc<Engine>> = OnceLock::new();
    ENGINE.get_or_init(|| Engine::with_workers(1).unwrap()).clone()
}

// Methods that touch the filesystem are not exercised.
const SKIPPED: [&str; 3] = ["readImages", "readRows", "savePipeline"];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut server = Server::new(engine());
    for line in text.lines() {
        if let Ok(req) = serde_json::from_str::<Value>(line) {
            if req.get("method").and_then(Value::as_str).is_some_and(|m| SKIPPED.contains(&m)) {
                continue;
            }
        }
        let (resp, stop) = server.handle_line(line);
        let resp: Value = serde_json::from_str(&resp).unwrap();
        assert!(resp["ok"].is_boolean());
        if stop {
            break;
        }
    }
});
