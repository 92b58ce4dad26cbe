//! Append-only store of finished conversation records.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use persuasion_core::corpus::{load_corpus, AnnotatedConversation};
use persuasion_core::orchestrator::append_record;

pub struct RecordStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl RecordStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), lock: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &AnnotatedConversation) -> Result<()> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        append_record(&self.path, record).with_context(|| format!("appending to {}", self.path.display()))
    }

    pub fn load_all(&self) -> Result<Vec<AnnotatedConversation>> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        Ok(load_corpus(&self.path)?.conversations)
    }

    pub fn find(&self, id: &str) -> Result<Option<AnnotatedConversation>> {
        Ok(self.load_all()?.into_iter().rev().find(|c| c.id == id))
    }
}
