//! Line-delimited JSON detection files.
//!
//! One object per frame: `{"frame": "<path>", "boxes": [[x1,y1,x2,y2], ...]}`.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectionsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed detections on line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame: String,
    pub boxes: Vec<[f64; 4]>,
}

pub fn parse_detections(text: &str) -> Result<Vec<FrameDetections>, DetectionsError> {
    let mut frames = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame = serde_json::from_str(line).map_err(|source| DetectionsError::Malformed {
            line: idx + 1,
            source,
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn read_detections(path: &Path) -> Result<Vec<FrameDetections>, DetectionsError> {
    parse_detections(&fs::read_to_string(path)?)
}
