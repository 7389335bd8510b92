//! A client for a repository of pretrained model artifacts.
//!
//! A manifest names each artifact with its source URI, SHA-256 and size. A
//! fetch copies the artifact into a local cache at
//! `<cache>/<first 16 hex of sha256>/<name>` and verifies it; later fetches
//! re-hash the cached copy and only go back to the source if it no longer
//! matches.

mod error;
mod manifest;
mod repository;

pub use error::RepoError;
pub use manifest::{is_sha256_hex, Manifest, ManifestEntry};
pub use repository::{
    cache_dir_from_env, sha256_file, verify, FetchOutcome, Repository, CACHE_ENV,
};
