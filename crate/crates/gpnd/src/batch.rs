//! Multi-threaded batch scoring with deterministic output order. The sample
//! matrix splits into contiguous chunks, one worker scores each chunk, and
//! the results concatenate in chunk order, so the output never depends on
//! thread scheduling.

use gpnd_core::density::NoveltyScore;
use gpnd_core::detector::{score, DetectorModel};
use gpnd_core::linalg::Mat;

use crate::error::Result;

/// Scores every row of `samples`. `threads` caps the worker count; 0 and 1
/// both mean sequential.
pub fn score_batch(model: &DetectorModel, samples: &Mat, threads: usize) -> Result<Vec<NoveltyScore>> {
    let rows = samples.rows();
    let workers = threads.max(1).min(rows.max(1));
    if workers == 1 {
        let mut out = Vec::with_capacity(rows);
        for i in 0..rows {
            out.push(score(model, samples.row(i))?);
        }
        return Ok(out);
    }
    let base = rows / workers;
    let extra = rows % workers;
    let mut bounds = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let len = base + usize::from(w < extra);
        bounds.push((start, start + len));
        start += len;
    }
    let parts: Vec<gpnd_core::Result<Vec<NoveltyScore>>> = std::thread::scope(|s| {
        let handles: Vec<_> = bounds
            .iter()
            .map(|&(a, b)| {
                s.spawn(move || {
                    let mut part = Vec::with_capacity(b - a);
                    for i in a..b {
                        part.push(score(model, samples.row(i))?);
                    }
                    Ok(part)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(rows);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
