use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{DatasetCard, DatasetError, Split, SplitManifest, TrainingSample};

/// File name per split, in read order.
pub const SPLIT_FILES: [(Split, &str); 3] =
    [(Split::Train, "train.jsonl"), (Split::Val, "val.jsonl"), (Split::Test, "test.jsonl")];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never see a partial file.
pub(crate) fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), DatasetError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out).map_err(io_err(path))?;
        out.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| DatasetError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

/// Writes one JSON value per line, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[&T]) -> Result<(), DatasetError> {
    write_atomic(path, |out| {
        for item in items {
            serde_json::to_writer(&mut *out, item)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Routes samples to `train.jsonl`, `val.jsonl` and `test.jsonl` by their
/// fingerprint's split, and writes the manifest and dataset card alongside.
pub fn write_dataset(
    samples: &[TrainingSample],
    manifest: &SplitManifest,
    dir: impl AsRef<Path>,
) -> Result<DatasetCard, DatasetError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut routed: Vec<TrainingSample> = Vec::with_capacity(samples.len());
    for s in samples {
        if s.meta.fingerprint.trim().is_empty() {
            return Err(DatasetError::MissingFingerprint);
        }
        let split =
            manifest.get(&s.meta.fingerprint).ok_or_else(|| DatasetError::Unassigned(s.meta.fingerprint.clone()))?;
        let mut s = s.clone();
        s.meta.split = Some(split);
        routed.push(s);
    }
    for (split, name) in SPLIT_FILES {
        let items: Vec<&TrainingSample> = routed.iter().filter(|s| s.meta.split == Some(split)).collect();
        write_jsonl(&dir.join(name), &items)?;
    }
    let manifest_path = dir.join("split_manifest.json");
    write_atomic(&manifest_path, |out| Ok(serde_json::to_writer_pretty(out, manifest)?))?;

    let card = DatasetCard::from_samples(&routed);
    let card_json = dir.join("dataset_card.json");
    write_atomic(&card_json, |out| Ok(serde_json::to_writer_pretty(out, &card)?))?;
    let md = card.to_markdown();
    write_atomic(&dir.join("dataset_card.md"), |out| out.write_all(md.as_bytes()))?;
    Ok(card)
}

/// All samples of a dataset directory, train then validation then test.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<TrainingSample>, DatasetError> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for (_, name) in SPLIT_FILES {
        out.extend(read_jsonl::<TrainingSample>(dir.join(name))?);
    }
    Ok(out)
}
