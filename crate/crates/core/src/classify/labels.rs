//! Label files: one JSON object per line with `defect_id`, `annotator`, `ai`,
//! `severity`, `impacts`, `provenance` and `rationale`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::ClassificationLabel;

#[derive(Debug, Error)]
pub enum LabelFileError {
    #[error("reading label file: {0}")]
    Io(#[from] io::Error),
    #[error("label file line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn parse_labels(text: &str) -> Result<Vec<ClassificationLabel>, LabelFileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LabelFileError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<ClassificationLabel>, LabelFileError> {
    parse_labels(&fs::read_to_string(path)?)
}

pub fn write_labels<W: Write>(labels: &[ClassificationLabel], mut w: W) -> io::Result<()> {
    for l in labels {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_labels_string(labels: &[ClassificationLabel]) -> String {
    let mut buf = Vec::new();
    write_labels(labels, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
