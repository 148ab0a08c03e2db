//! IDX image/label ingestion with transparent gzip decompression chosen by
//! file extension. Pixel bytes scale to [0,1] by division by 255; images
//! flatten row-major. Parsing is strict: wrong magic, truncation, trailing
//! bytes, and image/label count mismatches are all errors.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use gpnd_core::dataset::Dataset;
use gpnd_core::linalg::Mat;

use crate::error::{io_err, Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| io_err(path, e))?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| io_err(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct BeReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> BeReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Data(format!("{}: truncated {what}", self.name)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Data(format!(
                "{}: trailing bytes after the declared content",
                self.name
            )));
        }
        Ok(())
    }
}

/// Parses an IDX image payload into (count, flattened dimension, pixels).
fn parse_images(bytes: &[u8], name: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = BeReader { bytes, pos: 0, name };
    let magic = r.u32("image header")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Data(format!(
            "{name}: bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = r.u32("image header")? as usize;
    let rows = r.u32("image header")? as usize;
    let cols = r.u32("image header")? as usize;
    let dim = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Data(format!("{name}: image dimensions overflow")))?;
    let total = count
        .checked_mul(dim)
        .ok_or_else(|| Error::Data(format!("{name}: image payload size overflows")))?;
    let data = r.take(total, "image data")?;
    r.finish()?;
    Ok((count, dim, data.iter().map(|&b| b as f64 / 255.0).collect()))
}

fn parse_labels(bytes: &[u8], name: &str) -> Result<Vec<u32>> {
    let mut r = BeReader { bytes, pos: 0, name };
    let magic = r.u32("label header")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Data(format!(
            "{name}: bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = r.u32("label header")? as usize;
    let data = r.take(count, "label data")?;
    r.finish()?;
    Ok(data.iter().map(|&b| b as u32).collect())
}

/// Loads an IDX image/label file pair into a dataset. Either file may be
/// gzip-compressed (extension `gz`).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images_name = images_path.display().to_string();
    let (count, dim, pixels) = parse_images(&read_maybe_gz(images_path)?, &images_name)?;
    let labels_name = labels_path.display().to_string();
    let labels = parse_labels(&read_maybe_gz(labels_path)?, &labels_name)?;
    if labels.len() != count {
        return Err(Error::Data(format!(
            "{images_name}: {count} images but {} labels in {labels_name}",
            labels.len()
        )));
    }
    let samples = Mat::from_vec(count, dim, pixels)?;
    Ok(Dataset::new(samples, labels)?)
}
