//! Stage files: a magic line, a one-line JSON manifest, then the raw state
//! blob if the stage has learned state.
//!
//! ```text
//! TSTAGE1
//! {"stageName":"LogisticRegressionModel","params":{..},"state":{"bytes":812,"sha256":".."}}
//! <812 bytes>
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use super::{Registry, Stage};
use crate::Error;

pub const STAGE_MAGIC: &str = "TSTAGE1";

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Manifest {
    stage_name: String,
    params: Json,
    state: Option<StateInfo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateInfo {
    bytes: usize,
    sha256: String,
}

pub fn encode_stage(stage: &Stage) -> Vec<u8> {
    let state = stage.state();
    let manifest = Manifest {
        stage_name: stage.name().to_string(),
        params: stage.params().to_json(),
        state: state.as_ref().map(|s| StateInfo {
            bytes: s.len(),
            sha256: hex::encode(Sha256::digest(s)),
        }),
    };
    let mut out = format!(
        "{STAGE_MAGIC}\n{}\n",
        serde_json::to_string(&manifest).expect("manifest serializes")
    )
    .into_bytes();
    if let Some(s) = state {
        out.extend_from_slice(&s);
    }
    out
}

pub fn decode_stage(bytes: &[u8], registry: &Registry) -> Result<Stage, Error> {
    let corrupt = |m: &str| Error::CorruptStageFile(m.to_string());
    let rest = bytes
        .strip_prefix(STAGE_MAGIC.as_bytes())
        .and_then(|r| r.strip_prefix(b"\n"))
        .ok_or_else(|| corrupt("missing magic"))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("unterminated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(&rest[..nl])
        .map_err(|e| Error::CorruptStageFile(format!("bad manifest: {e}")))?;
    let blob = &rest[nl + 1..];
    let state = match &manifest.state {
        None if blob.is_empty() => None,
        None => return Err(corrupt("trailing bytes after a stateless manifest")),
        Some(info) => {
            if blob.len() != info.bytes {
                return Err(Error::CorruptStageFile(format!(
                    "state is {} bytes, manifest says {}",
                    blob.len(),
                    info.bytes
                )));
            }
            if hex::encode(Sha256::digest(blob)) != info.sha256 {
                return Err(corrupt("state checksum mismatch"));
            }
            Some(blob)
        }
    };
    registry.restore(&manifest.stage_name, &manifest.params, state)
}

pub fn save_stage(stage: &Stage, path: &Path) -> Result<(), Error> {
    std::fs::write(path, encode_stage(stage))?;
    Ok(())
}

pub fn load_stage(path: &Path, registry: &Registry) -> Result<Stage, Error> {
    decode_stage(&std::fs::read(path)?, registry)
}
