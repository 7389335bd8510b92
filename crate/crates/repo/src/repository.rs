use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::{Manifest, ManifestEntry, RepoError};

pub const CACHE_ENV: &str = "TUNDRA_CACHE";

const CHUNK: usize = 64 * 1024;

/// `$TUNDRA_CACHE` if set, else `default`.
pub fn cache_dir_from_env(default: &Path) -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| default.to_path_buf())
}

/// Streams `reader` into `sink`, returning the hex SHA-256 and byte count.
fn hash_copy(mut reader: impl Read, mut sink: impl Write) -> std::io::Result<(String, u64)> {
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; CHUNK];
    let mut total = 0u64;
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        sink.write_all(&buf[..n])?;
        total += n as u64;
    }
    sink.flush()?;
    Ok((hex::encode(hasher.finalize()), total))
}

pub fn sha256_file(path: &Path) -> Result<String, RepoError> {
    Ok(hash_copy(File::open(path)?, std::io::sink())?.0)
}

/// Whether the file at `path` hashes to `sha256` (hex, any case).
pub fn verify(path: &Path, sha256: &str) -> Result<bool, RepoError> {
    Ok(sha256_file(path)? == sha256.to_ascii_lowercase())
}

#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub path: PathBuf,
    /// Downloads performed by this call.
    pub source_reads: u64,
    /// The checksum failure of a corrupt cache entry that this call replaced.
    pub repaired: Option<RepoError>,
}

pub struct Repository {
    manifest: Manifest,
    cache_dir: PathBuf,
    source_reads: AtomicU64,
    backoff: Vec<Duration>,
}

impl Repository {
    pub fn new(manifest: Manifest, cache_dir: impl Into<PathBuf>) -> Repository {
        Repository {
            manifest,
            cache_dir: cache_dir.into(),
            source_reads: AtomicU64::new(0),
            backoff: vec![Duration::from_millis(250), Duration::from_secs(1)],
        }
    }

    pub fn open(
        manifest_path: &Path,
        cache_dir: impl Into<PathBuf>,
    ) -> Result<Repository, RepoError> {
        Ok(Repository::new(Manifest::load(manifest_path)?, cache_dir))
    }

    /// Delays between HTTP attempts; one retry per entry.
    pub fn with_backoff(mut self, backoff: Vec<Duration>) -> Repository {
        self.backoff = backoff;
        self
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    /// Downloads performed by this client so far.
    pub fn source_reads(&self) -> u64 {
        self.source_reads.load(Ordering::SeqCst)
    }

    pub fn cache_path(&self, name: &str) -> Result<PathBuf, RepoError> {
        Ok(self
            .cache_dir
            .join(self.manifest.get(name)?.cache_relative()))
    }

    /// Returns a verified local copy of `name`. A cached copy is re-hashed; if
    /// it no longer matches it is quarantined and fetched again, once.
    pub fn fetch(&self, name: &str) -> Result<FetchOutcome, RepoError> {
        let entry = self.manifest.get(name)?;
        let path = self.cache_dir.join(entry.cache_relative());
        let dir = path.parent().expect("cache paths have a directory");
        std::fs::create_dir_all(dir)?;
        let lock = File::create(dir.join(format!("{name}.lock")))?;
        lock.lock()?;

        let mut repaired = None;
        if path.exists() {
            let actual = sha256_file(&path)?;
            if actual == entry.sha256 {
                return Ok(FetchOutcome {
                    path,
                    source_reads: 0,
                    repaired: None,
                });
            }
            std::fs::rename(&path, dir.join(format!("{name}.quarantined")))?;
            repaired = Some(RepoError::ChecksumMismatch {
                name: name.to_string(),
                expected: entry.sha256.clone(),
                actual,
            });
        }

        let tmp = dir.join(format!("{name}.partial"));
        let attempts = if repaired.is_some() { 1 } else { 2 };
        let mut last = None;
        for reads in 1..=attempts {
            self.source_reads.fetch_add(1, Ordering::SeqCst);
            let (actual, size) = self.download(entry, &tmp)?;
            if actual == entry.sha256 && size == entry.size_bytes {
                std::fs::rename(&tmp, &path)?;
                return Ok(FetchOutcome {
                    path,
                    source_reads: reads,
                    repaired,
                });
            }
            last = Some(RepoError::ChecksumMismatch {
                name: name.to_string(),
                expected: entry.sha256.clone(),
                actual,
            });
        }
        let _ = std::fs::remove_file(&tmp);
        Err(last.expect("at least one attempt"))
    }

    fn download(&self, entry: &ManifestEntry, dest: &Path) -> Result<(String, u64), RepoError> {
        let unavailable = |reason: String| RepoError::SourceUnavailable {
            uri: entry.uri.clone(),
            reason,
        };
        if let Some(src) = self.manifest.resolve_file(&entry.uri) {
            let reader = File::open(&src).map_err(|e| unavailable(e.to_string()))?;
            return Ok(hash_copy(reader, File::create(dest)?)?);
        }
        let mut failure = String::new();
        for attempt in 0..=self.backoff.len() {
            if attempt > 0 {
                std::thread::sleep(self.backoff[attempt - 1]);
            }
            match ureq::get(&entry.uri).call() {
                Ok(mut response) => {
                    let reader = response.body_mut().as_reader();
                    match hash_copy(reader, File::create(dest)?) {
                        Ok(done) => return Ok(done),
                        Err(e) => failure = e.to_string(),
                    }
                }
                Err(e) => failure = e.to_string(),
            }
        }
        Err(unavailable(failure))
    }
}
