//! Download and integrity checking for the IDX caches.
//!
//! Layout: `<cache>/<source>/<file>.gz` plus `<cache>/<source>/checksums.txt`
//! holding `<sha256>  <file>` lines. Fresh downloads are checked against the
//! MD5 digests published for the original archives before their SHA-256 is
//! recorded.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use md5::Md5;
use sha2::{Digest, Sha256};

use super::Source;
use crate::error::{Error, Result};

pub const CHECKSUM_FILE: &str = "checksums.txt";
pub const MIRROR_ENV: &str = "EQAS_MIRROR";

pub struct RemoteFile {
    pub name: &'static str,
    pub md5: &'static str,
}

const MNIST_FILES: [RemoteFile; 4] = [
    RemoteFile {
        name: "train-images-idx3-ubyte.gz",
        md5: "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    },
    RemoteFile {
        name: "train-labels-idx1-ubyte.gz",
        md5: "d53e105ee54ea40749a09fcbcd1e9432",
    },
    RemoteFile {
        name: "t10k-images-idx3-ubyte.gz",
        md5: "9fb629c4189551a2d022fa330f9573f3",
    },
    RemoteFile {
        name: "t10k-labels-idx1-ubyte.gz",
        md5: "ec29112dd5afa0611ce80d1b7f02629c",
    },
];

const FASHION_FILES: [RemoteFile; 4] = [
    RemoteFile {
        name: "train-images-idx3-ubyte.gz",
        md5: "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
    },
    RemoteFile {
        name: "train-labels-idx1-ubyte.gz",
        md5: "25c81989df183df01b3e8a0aad5dffbe",
    },
    RemoteFile {
        name: "t10k-images-idx3-ubyte.gz",
        md5: "bef4ecab320f06d8554ea6380940ec79",
    },
    RemoteFile {
        name: "t10k-labels-idx1-ubyte.gz",
        md5: "bb300cfdad3c16e7a12a480ee83cd310",
    },
];

pub fn remote_files(source: Source) -> &'static [RemoteFile] {
    match source {
        Source::Iris => &[],
        Source::Mnist => &MNIST_FILES,
        Source::Fashion => &FASHION_FILES,
    }
}

pub fn base_url(source: Source) -> &'static str {
    match source {
        Source::Iris => "",
        Source::Mnist => "https://ossci-datasets.s3.amazonaws.com/mnist/",
        Source::Fashion => "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileStatus {
    Cached,
    Downloaded,
    /// Present, unrecorded, and matching the published digest; now recorded.
    Adopted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Bundled,
    Files(Vec<(String, FileStatus)>),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn md5_hex(bytes: &[u8]) -> String {
    hex::encode(Md5::digest(bytes))
}

pub fn source_dir(cache_dir: &Path, source: Source) -> PathBuf {
    cache_dir.join(source.name())
}

pub fn read_checksums(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join(CHECKSUM_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut out = BTreeMap::new();
    for (n, line) in fs::read_to_string(&path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(digest), Some(name), None) => {
                out.insert(name.to_string(), digest.to_ascii_lowercase());
            }
            _ => {
                return Err(Error::Data(format!(
                    "{}:{}: expected `<sha256>  <file>`",
                    path.display(),
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}

fn write_checksums(dir: &Path, sums: &BTreeMap<String, String>) -> Result<()> {
    let body: String = sums
        .iter()
        .map(|(name, digest)| format!("{digest}  {name}\n"))
        .collect();
    fs::write(dir.join(CHECKSUM_FILE), body)?;
    Ok(())
}

/// Checks every file recorded in `checksums.txt` for `source`.
pub fn verify_cache(cache_dir: &Path, source: Source) -> Result<()> {
    let dir = source_dir(cache_dir, source);
    let sums = read_checksums(&dir)?;
    for file in remote_files(source) {
        let path = dir.join(file.name);
        if let (Some(expected), true) = (sums.get(file.name), path.exists()) {
            let actual = sha256_hex(&fs::read(&path)?);
            if &actual != expected {
                return Err(Error::Checksum {
                    path,
                    expected: expected.clone(),
                    actual,
                });
            }
        }
    }
    Ok(())
}

fn download(url: &str) -> Result<Vec<u8>> {
    let agent = ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(15))
        .timeout(Duration::from_secs(300))
        .build();
    let network_err = |reason: String| Error::Network {
        url: url.to_string(),
        reason,
    };
    let response = agent.get(url).call().map_err(|e| network_err(e.to_string()))?;
    let mut bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| network_err(e.to_string()))?;
    Ok(bytes)
}

/// Makes the cache for `source` complete and verified. Idempotent: files
/// already recorded in `checksums.txt` are verified and never re-downloaded.
///
/// Setting `EQAS_MIRROR` replaces the published hosts with
/// `$EQAS_MIRROR/<source>/`.
pub fn fetch(source: Source, cache_dir: &Path) -> Result<FetchStatus> {
    let base = match std::env::var(MIRROR_ENV) {
        Ok(mirror) if !mirror.is_empty() => format!("{}/{}/", mirror.trim_end_matches('/'), source.name()),
        _ => base_url(source).to_string(),
    };
    fetch_with(source, cache_dir, &base, download)
}

/// [`fetch`] with an injectable downloader.
pub fn fetch_with<D>(source: Source, cache_dir: &Path, base: &str, downloader: D) -> Result<FetchStatus>
where
    D: Fn(&str) -> Result<Vec<u8>>,
{
    if source == Source::Iris {
        return Ok(FetchStatus::Bundled);
    }
    let dir = source_dir(cache_dir, source);
    fs::create_dir_all(&dir)?;
    let mut sums = read_checksums(&dir)?;
    let mut statuses = Vec::new();
    for file in remote_files(source) {
        let path = dir.join(file.name);
        let status = if path.exists() {
            let bytes = fs::read(&path)?;
            let actual = sha256_hex(&bytes);
            match sums.get(file.name) {
                Some(expected) if *expected == actual => FileStatus::Cached,
                Some(expected) => {
                    return Err(Error::Checksum {
                        path,
                        expected: expected.clone(),
                        actual,
                    })
                }
                None => {
                    let md5 = md5_hex(&bytes);
                    if md5 != file.md5 {
                        return Err(Error::Checksum {
                            path,
                            expected: format!("md5:{}", file.md5),
                            actual: format!("md5:{md5}"),
                        });
                    }
                    sums.insert(file.name.to_string(), actual);
                    FileStatus::Adopted
                }
            }
        } else {
            let url = format!("{base}{}", file.name);
            let bytes = downloader(&url).map_err(|e| {
                e.context(format!(
                    "download failed; to work offline place {} in {} (or pass --cache-dir pointing at a populated cache)",
                    file.name,
                    dir.display()
                ))
            })?;
            let md5 = md5_hex(&bytes);
            if md5 != file.md5 {
                return Err(Error::Checksum {
                    path,
                    expected: format!("md5:{}", file.md5),
                    actual: format!("md5:{md5}"),
                });
            }
            fs::write(&path, &bytes)?;
            sums.insert(file.name.to_string(), sha256_hex(&bytes));
            FileStatus::Downloaded
        };
        statuses.push((file.name.to_string(), status));
    }
    write_checksums(&dir, &sums)?;
    Ok(FetchStatus::Files(statuses))
}
