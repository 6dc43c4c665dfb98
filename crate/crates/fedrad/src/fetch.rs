//! Downloading and verifying the MNIST IDX files.
//!
//! Files are stored decompressed. Verification uses SHA-256 of the
//! decompressed bytes, so any mirror serving either raw or gzipped copies
//! of the canonical files is accepted.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::idx::read_maybe_gz;

/// Canonical file name and SHA-256 of its decompressed contents.
pub const MNIST_FILES: [(&str, &str); 4] = [
    (
        "train-images-idx3-ubyte",
        "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    ),
    (
        "train-labels-idx1-ubyte",
        "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    ),
    (
        "t10k-images-idx3-ubyte",
        "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    ),
    (
        "t10k-labels-idx1-ubyte",
        "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
    ),
];

/// Mirrors tried in order; each serves `<name>.gz`.
pub const DEFAULT_MIRRORS: [&str; 2] = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
];

/// Where `fetch_mnist` gets files it does not already have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchSource {
    /// Base URLs; `<base><name>.gz` is requested from each in turn.
    Mirrors(Vec<String>),
    /// A local directory holding the files, raw or with a `.gz` suffix.
    LocalDir(PathBuf),
}

impl Default for FetchSource {
    fn default() -> Self {
        FetchSource::Mirrors(DEFAULT_MIRRORS.iter().map(|s| s.to_string()).collect())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn verify(name: &str, expected: &str, bytes: &[u8]) -> Result<()> {
    let actual = sha256_hex(bytes);
    if actual == expected {
        Ok(())
    } else {
        Err(Error::Checksum {
            file: name.to_string(),
            expected: expected.to_string(),
            actual,
        })
    }
}

fn decompress(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Download(format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn download(url: &str) -> Result<Vec<u8>> {
    let response = ureq::get(url)
        .call()
        .map_err(|e| Error::Download(format!("{url}: {e}")))?;
    let mut bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Download(format!("{url}: {e}")))?;
    Ok(bytes)
}

fn obtain(name: &str, expected: &str, source: &FetchSource) -> Result<Vec<u8>> {
    match source {
        FetchSource::LocalDir(dir) => {
            let raw = dir.join(name);
            let gz = dir.join(format!("{name}.gz"));
            let path = if raw.exists() { raw } else { gz };
            let bytes = read_maybe_gz(&path)?;
            verify(name, expected, &bytes)?;
            Ok(bytes)
        }
        FetchSource::Mirrors(bases) => {
            let mut last = Error::Download(format!("{name}: no mirrors configured"));
            for base in bases {
                let url = format!("{}/{name}.gz", base.trim_end_matches('/'));
                info!("downloading {url}");
                match download(&url).and_then(decompress).and_then(|b| verify(name, expected, &b).map(|_| b)) {
                    Ok(bytes) => return Ok(bytes),
                    Err(e) => {
                        warn!("{e}");
                        last = e;
                    }
                }
            }
            Err(last)
        }
    }
}

/// Ensure all four MNIST files exist in `dir` with the expected checksums.
///
/// Files already present and valid are left alone. Returns the paths.
pub fn fetch_mnist(dir: &Path, source: &FetchSource) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (name, expected) in MNIST_FILES {
        let path = dir.join(name);
        let present = path.exists() && read_maybe_gz(&path).is_ok_and(|b| sha256_hex(&b) == expected);
        if present {
            info!("{name}: already present and verified");
        } else {
            let bytes = obtain(name, expected, source)?;
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            info!("{name}: written and verified");
        }
        paths.push(path);
    }
    Ok(paths)
}
