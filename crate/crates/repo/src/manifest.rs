use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::RepoError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub uri: String,
    pub sha256: String,
    pub size_bytes: u64,
}

impl ManifestEntry {
    /// Cache location relative to the cache root.
    pub fn cache_relative(&self) -> PathBuf {
        Path::new(&self.sha256[..16]).join(&self.name)
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.name, self.uri, self.sha256, self.size_bytes
        )
    }
}

/// Entries keyed by unique name. Lines are `name<TAB>uri<TAB>sha256<TAB>size`;
/// blank lines and `#` comments are skipped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    entries: BTreeMap<String, ManifestEntry>,
    base: Option<PathBuf>,
}

pub fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, RepoError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |reason: String| RepoError::MalformedManifest { line, reason };
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            let [name, uri, sha, size] = fields[..] else {
                return Err(bad(format!(
                    "expected 4 tab-separated fields, got {}",
                    fields.len()
                )));
            };
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(bad(format!("invalid name `{name}`")));
            }
            if !(uri.starts_with("file://")
                || uri.starts_with("http://")
                || uri.starts_with("https://"))
            {
                return Err(bad(format!("unsupported uri `{uri}`")));
            }
            if !is_sha256_hex(sha) {
                return Err(bad("sha256 must be 64 lowercase hex characters".into()));
            }
            let size_bytes = size
                .parse()
                .map_err(|_| bad(format!("bad size `{size}`")))?;
            let entry = ManifestEntry {
                name: name.to_string(),
                uri: uri.to_string(),
                sha256: sha.to_string(),
                size_bytes,
            };
            if entries.insert(name.to_string(), entry).is_some() {
                return Err(bad(format!("duplicate name `{name}`")));
            }
        }
        Ok(Manifest {
            entries,
            base: None,
        })
    }

    /// Reads a manifest file. Relative `file://` URIs resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Manifest, RepoError> {
        let mut m = Manifest::parse(&std::fs::read_to_string(path)?)?;
        m.base = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    /// Entries sorted by name.
    pub fn entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&ManifestEntry, RepoError> {
        self.entries
            .get(name)
            .ok_or_else(|| RepoError::UnknownModel(name.to_string()))
    }

    pub fn to_text(&self) -> String {
        self.entries().map(|e| e.to_line() + "\n").collect()
    }

    pub(crate) fn resolve_file(&self, uri: &str) -> Option<PathBuf> {
        let path = Path::new(uri.strip_prefix("file://")?);
        Some(match &self.base {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        })
    }
}
