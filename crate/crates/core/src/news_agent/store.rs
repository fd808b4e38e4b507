//! Line-delimited JSON stores for summaries and embeddings.
//!
//! Files are always rewritten whole, sorted by year, through a temporary file
//! and a rename, so the bytes depend only on the records held.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{EmbeddingVector, NewsSummary};
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct SummaryStore {
    path: Option<PathBuf>,
    records: Mutex<BTreeMap<i32, NewsSummary>>,
}

impl SummaryStore {
    pub fn in_memory() -> Self {
        Self { path: None, records: Mutex::new(BTreeMap::new()) }
    }

    /// Opens the store at `path`, loading existing records if the file exists.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let records = if path.exists() {
            read_jsonl::<NewsSummary>(&path)?
                .into_iter()
                .map(|s| (s.year, s))
                .collect()
        } else {
            BTreeMap::new()
        };
        Ok(Self { path: Some(path), records: Mutex::new(records) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, year: i32) -> Option<NewsSummary> {
        self.records.lock().unwrap().get(&year).cloned()
    }

    pub fn snapshot(&self) -> BTreeMap<i32, NewsSummary> {
        self.records.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inserts or replaces the record for `summary.year` and persists the store.
    pub fn put(&self, summary: NewsSummary) -> Result<()> {
        let mut records = self.records.lock().unwrap();
        records.insert(summary.year, summary);
        if let Some(path) = &self.path {
            write_jsonl(path, records.values())?;
        }
        Ok(())
    }

    /// Writes the current contents even if no record changed.
    pub fn flush(&self) -> Result<()> {
        let records = self.records.lock().unwrap();
        if let Some(path) = &self.path {
            write_jsonl(path, records.values())?;
        }
        Ok(())
    }
}

pub fn read_summaries(path: &Path) -> Result<Vec<NewsSummary>> {
    read_jsonl(path)
}

pub fn write_embeddings(path: &Path, embeddings: &[EmbeddingVector]) -> Result<()> {
    let mut sorted: Vec<&EmbeddingVector> = embeddings.iter().collect();
    sorted.sort_by_key(|e| e.year);
    write_jsonl(path, sorted.into_iter())
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingVector>> {
    let rows: Vec<EmbeddingVector> = read_jsonl(path)?;
    for e in &rows {
        e.validate()?;
    }
    if let Some(first) = rows.first() {
        if let Some(bad) = rows.iter().find(|e| e.dim != first.dim) {
            return Err(Error::Contract(format!(
                "embedding store mixes dims {} and {} (year {})",
                first.dim, bad.dim, bad.year
            )));
        }
    }
    Ok(rows)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

fn write_jsonl<'a, T: serde::Serialize + 'a>(
    path: &Path,
    rows: impl Iterator<Item = &'a T>,
) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
        .map_err(|e| Error::Store(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
