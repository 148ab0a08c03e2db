//! Model, dataset, and report files on disk. Every write goes to a temp
//! sibling in the destination directory and then renames into place, so a
//! failed command never leaves a partial file at the destination.

use std::fs;
use std::path::{Path, PathBuf};

use gpnd_core::dataset::SyntheticCorpus;
use gpnd_core::detector::DetectorModel;
use gpnd_core::persist;
use serde::Serialize;

use crate::error::{io_err, Error, Result};

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".tmp");
    path.with_file_name(name)
}

/// Atomic write: temp sibling plus rename. The temp file is removed on
/// failure.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

pub fn save_model(path: &Path, model: &DetectorModel) -> Result<()> {
    write_atomic(path, &persist::encode_model(model))
}

pub fn load_model(path: &Path) -> Result<DetectorModel> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    persist::decode_model(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn save_dataset(path: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    write_atomic(path, &persist::encode_dataset(corpus))
}

pub fn load_dataset(path: &Path) -> Result<SyntheticCorpus> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    persist::decode_dataset(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Pretty-printed JSON plus a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Manifest path for a generated dataset: the dataset file name plus a
/// `.manifest.json` suffix.
pub fn manifest_path(dataset_path: &Path) -> PathBuf {
    let mut name = dataset_path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "dataset".into());
    name.push(".manifest.json");
    dataset_path.with_file_name(name)
}
