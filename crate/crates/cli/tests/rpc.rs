use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use serde_json::{json, Value as Json};
use tundra_cli::rpc::{serve, Server};
use tundra_core::interchange::read_rows;
use tundra_core::pipeline::RegistryDocument;
use tundra_core::Engine;

fn server() -> Server {
    Server::new(Engine::with_workers(2).unwrap())
}

fn call(s: &mut Server, id: i64, method: &str, params: Json) -> Json {
    let line = json!({"id": id, "method": method, "params": params}).to_string();
    let (resp, _) = s.handle_line(&line);
    let resp: Json = serde_json::from_str(&resp).unwrap();
    assert_eq!(resp["id"], json!(id));
    resp
}

fn ok(s: &mut Server, method: &str, params: Json) -> Json {
    let resp = call(s, 1, method, params);
    assert_eq!(resp["ok"], json!(true), "{resp}");
    resp["result"].clone()
}

fn error_code(s: &mut Server, method: &str, params: Json) -> i64 {
    let resp = call(s, 9, method, params);
    assert_eq!(resp["ok"], json!(false), "{resp}");
    assert!(resp["error"]["message"]
        .as_str()
        .is_some_and(|m| !m.is_empty()));
    resp["error"]["code"].as_i64().unwrap()
}

fn corpus(dir: &Path) {
    let cfg = tundra_image::synth::CorpusConfig {
        cameras: 10,
        bursts_per_camera: 2,
        leopard_frac: 0.4,
        seed: 8,
        ..Default::default()
    };
    tundra_image::synth::write_corpus(dir, &tundra_image::synth::generate(&cfg)).unwrap();
}

#[test]
fn malformed_requests_are_protocol_errors() {
    let mut s = server();
    for line in [
        "{",
        "[]",
        r#"{"method":"getParams"}"#,
        r#"{"id":"a","method":"x"}"#,
        r#"{"id":1,"method":"x","params":3}"#,
    ] {
        let (resp, stop) = s.handle_line(line);
        let resp: Json = serde_json::from_str(&resp).unwrap();
        assert_eq!(resp["ok"], json!(false), "{line}");
        assert_eq!(resp["error"]["code"], json!(1), "{line}");
        assert!(!stop);
    }
    assert_eq!(error_code(&mut s, "frobnicate", json!({})), 1);
}

#[test]
fn stage_params_round_trip() {
    let mut s = server();
    let doc = ok(&mut s, "describeStages", json!({}));
    let parsed = RegistryDocument::parse(&doc.to_string()).unwrap();
    assert_eq!(
        doc.to_string(),
        tundra_ml::registry()
            .document_json()
            .parse::<Json>()
            .unwrap()
            .to_string()
    );
    assert!(parsed
        .descriptors()
        .unwrap()
        .iter()
        .any(|d| d.name == "LogisticRegression"));

    let h = ok(
        &mut s,
        "createStage",
        json!({"stageName": "LogisticRegression", "params": {"epochs": 7}}),
    );
    let h = h.as_str().unwrap().to_string();
    let params = ok(&mut s, "getParams", json!({"handle": h}));
    assert_eq!(params["epochs"], json!(7));
    assert_eq!(params["learningRate"], json!(0.1));
    let updated = ok(
        &mut s,
        "setParams",
        json!({"handle": h, "params": {"learningRate": 0.25}}),
    );
    assert_eq!(updated["epochs"], json!(7));
    assert_eq!(updated["learningRate"], json!(0.25));
    assert_eq!(ok(&mut s, "getParams", json!({"handle": h})), updated);

    assert_eq!(
        error_code(
            &mut s,
            "setParams",
            json!({"handle": h, "params": {"epochs": "many"}})
        ),
        2
    );
    assert_eq!(ok(&mut s, "getParams", json!({"handle": h})), updated);
    assert_eq!(
        error_code(
            &mut s,
            "setParams",
            json!({"handle": h, "params": {"bogus": 1}})
        ),
        2
    );
    assert_eq!(
        error_code(&mut s, "createStage", json!({"stageName": "Nope"})),
        2
    );
    assert_eq!(
        error_code(&mut s, "createStage", json!({"stageName": "NetworkModel"})),
        2
    );
    assert_eq!(
        error_code(&mut s, "getParams", json!({"handle": "stage-99"})),
        2
    );
    assert_eq!(
        error_code(&mut s, "collect", json!({"dataHandle": "data-99"})),
        2
    );
    assert_eq!(
        error_code(&mut s, "readImages", json!({"dir": "/no/such/dir"})),
        3
    );
}

#[test]
fn fit_transform_and_save_match_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    corpus(&data);
    let mut o = Vec::new();
    let mut e = Vec::new();
    let models = dir.path().join("models");
    assert_eq!(
        tundra_cli::run(
            ["tundra", "gen-model", "--out", models.to_str().unwrap()],
            &mut o,
            &mut e
        ),
        0
    );
    let model = models.join("reference.tgraph");
    let model = model.to_str().unwrap();

    let mut s = server();
    let d = ok(&mut s, "readImages", json!({"dir": data, "partitions": 4}));
    let feat = ok(
        &mut s,
        "createStage",
        json!({"stageName": "ImageFeaturizer",
        "params": {"modelPath": model, "outputNode": "feat64"}}),
    );
    let lr = ok(
        &mut s,
        "createStage",
        json!({"stageName": "LogisticRegression", "params": {"epochs": 15}}),
    );
    let sel = ok(
        &mut s,
        "createStage",
        json!({"stageName": "SelectColumns", "params": {"cols": ["path", "score"]}}),
    );

    assert_eq!(
        error_code(&mut s, "transform", json!({"handle": lr, "dataHandle": d})),
        2
    );
    let feat_fitted = ok(&mut s, "fit", json!({"handle": feat, "dataHandle": d}));
    let f = ok(
        &mut s,
        "transform",
        json!({"handle": feat_fitted, "dataHandle": d}),
    );
    let lr_model = ok(&mut s, "fit", json!({"handle": lr, "dataHandle": f}));
    assert_eq!(
        error_code(
            &mut s,
            "setParams",
            json!({"handle": lr_model, "params": {"epochs": 1}})
        ),
        2
    );
    let scored = ok(
        &mut s,
        "transform",
        json!({"handle": lr_model, "dataHandle": f}),
    );
    let out = ok(
        &mut s,
        "transform",
        json!({"handle": sel, "dataHandle": scored}),
    );
    let collected = ok(&mut s, "collect", json!({"dataHandle": out}));
    assert_eq!(collected["count"], json!(80));
    let limited = ok(&mut s, "collect", json!({"dataHandle": out, "limit": 3}));
    assert_eq!(limited["count"], json!(80));
    let (_, few) = read_rows(limited["text"].as_str().unwrap().as_bytes()).unwrap();
    assert_eq!(few.len(), 3);

    let saved = dir.path().join("saved");
    let files = ok(
        &mut s,
        "savePipeline",
        json!({"handles": [feat, lr, sel], "dir": saved}),
    );
    assert_eq!(files["files"].as_array().unwrap().len(), 1);
    let cli_out = dir.path().join("cli");
    let code = tundra_cli::run(
        [
            "tundra",
            "run",
            "--pipeline",
            saved.join("pipeline.json").to_str().unwrap(),
            "--input",
            data.to_str().unwrap(),
            "--output",
            cli_out.to_str().unwrap(),
            "--partitions",
            "4",
            "--workers",
            "2",
        ],
        &mut o,
        &mut e,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&e));
    assert_eq!(
        std::fs::read_to_string(cli_out.join("output.rows")).unwrap(),
        collected["text"].as_str().unwrap()
    );

    let fitted_dir = dir.path().join("fitted");
    let files = ok(
        &mut s,
        "savePipeline",
        json!({"handles": [feat_fitted, lr_model, sel], "dir": fitted_dir}),
    );
    assert_eq!(files["files"].as_array().unwrap().len(), 4);
    let reloaded =
        tundra_core::pipeline::PipelineModel::load(&fitted_dir, &tundra_ml::registry()).unwrap();
    let engine = Engine::with_workers(1).unwrap();
    let ds = tundra_ml::corpus::read_corpus(&engine, &data, 4).unwrap();
    let rows = reloaded.transform(&ds).unwrap();
    let text =
        tundra_core::interchange::rows_to_string(rows.schema(), &rows.collect().unwrap()).unwrap();
    assert_eq!(text, collected["text"].as_str().unwrap());
    assert_eq!(
        error_code(
            &mut s,
            "savePipeline",
            json!({"handles": [], "dir": fitted_dir})
        ),
        2
    );
}

#[test]
fn responses_follow_request_order_and_stop_at_shutdown() {
    let input = [
        r#"{"id":1,"method":"createStage","params":{"stageName":"VectorAssembler","params":{"inputCols":["a"]}}}"#,
        "",
        r#"{"id":2,"method":"getParams","params":{"handle":"stage-1"}}"#,
        r#"{"id":3,"method":"nope"}"#,
        r#"{"id":4,"method":"shutdown"}"#,
        r#"{"id":5,"method":"describeStages"}"#,
    ]
    .join("\n");
    let mut out = Vec::new();
    serve(Engine::with_workers(1).unwrap(), input.as_bytes(), &mut out).unwrap();
    let lines: Vec<Json> = String::from_utf8(out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<i64> = lines.iter().map(|l| l["id"].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![1, 2, 3, 4]);
    assert_eq!(lines[0]["result"], json!("stage-1"));
    assert_eq!(lines[1]["result"]["inputCols"], json!(["a"]));
    assert_eq!(lines[2]["error"]["code"], json!(1));
    assert_eq!(lines[3]["result"], Json::Null);
}

#[test]
fn serve_rpc_over_stdio() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tundra"))
        .args(["serve-rpc", "--workers", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    writeln!(
        stdin,
        r#"{{"id":7,"method":"createStage","params":{{"stageName":"CacheStage"}}}}"#
    )
    .unwrap();
    writeln!(stdin, r#"{{"id":8,"method":"shutdown"}}"#).unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            r#"{"id":7,"ok":true,"result":"stage-1"}"#,
            r#"{"id":8,"ok":true,"result":null}"#
        ]
    );
}

proptest::proptest! {
    #[test]
    fn every_line_gets_one_well_formed_response(line in "\\PC{0,80}", id in proptest::prelude::any::<i32>(), method in "[a-zA-Z]{0,12}") {
        let mut s = server();
        for req in [line, json!({"id": id, "method": method, "params": {}}).to_string()] {
            let (resp, _) = s.handle_line(&req);
            let resp: Json = serde_json::from_str(&resp).unwrap();
            let ok = resp["ok"].as_bool().unwrap();
            proptest::prop_assert_eq!(ok, resp.get("result").is_some());
            if !ok {
                proptest::prop_assert!([1, 2, 3].contains(&resp["error"]["code"].as_i64().unwrap()));
            }
        }
    }
}
