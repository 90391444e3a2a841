//! Line-delimited JSON helpers used by every on-disk format in the pipeline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{PipelineError, Result};

/// Read a JSONL file, failing on the first malformed line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Read a JSONL file, collecting malformed lines as `(line_no, message)`
/// instead of failing.
pub fn read_jsonl_lenient<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Vec<(usize, T)>, Vec<(usize, String)>)> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    let mut malformed = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(item) => items.push((idx + 1, item)),
            Err(e) => malformed.push((idx + 1, e.to_string())),
        }
    }
    Ok((items, malformed))
}

/// Write items as one JSON object per line. Output is byte-deterministic for
/// a fixed item sequence.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&item)
            .map_err(|e| PipelineError::Validation(format!("serialize failed: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| PipelineError::io(path, e))?;
    }
    writer.flush().map_err(|e| PipelineError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        k: String,
        n: u32,
    }

    #[test]
    fn roundtrip_and_lenient_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![
            Row { k: "a".into(), n: 1 },
            Row { k: "b".into(), n: 2 },
        ];
        write_jsonl(&path, &rows).unwrap();
        let back: Vec<Row> = read_jsonl(&path).unwrap();
        assert_eq!(back, rows);

        std::fs::write(&path, "{\"k\":\"a\",\"n\":1}\nnot json\n\n{\"k\":\"c\",\"n\":3}\n").unwrap();
        let (ok, bad) = read_jsonl_lenient::<Row>(&path).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, 2);
    }
}
