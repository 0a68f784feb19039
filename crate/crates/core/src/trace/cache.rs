//! Step cache keyed on the full agent context.
//!
//! The store is an append-only file of `{"key": .., "step": ..}` lines with
//! an in-memory index. Readers share the index; appends are serialized.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde_json::json;

use super::sha256_hex;
use crate::agent::{Agent, AgentContext};
use crate::error::AgentError;
use crate::nfi::AgentStep;

pub const DEFAULT_CACHE_FILE: &str = ".njrcache";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cache store {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cache store {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Default)]
pub struct CacheStore {
    path: Option<PathBuf>,
    index: RwLock<HashMap<String, AgentStep>>,
    file: Mutex<Option<File>>,
}

impl CacheStore {
    /// A store that lives only as long as the process.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a store file and loads its index.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut index = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| StoreError::Corrupt {
                    path: path.clone(),
                    line: i + 1,
                    message,
                };
                let j: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                let key = j
                    .get("key")
                    .and_then(|k| k.as_str())
                    .ok_or_else(|| corrupt("missing key".into()))?;
                let step = AgentStep::from_json(j.get("step").unwrap_or(&serde_json::Value::Null))
                    .map_err(|e| corrupt(e.to_string()))?;
                index.insert(key.to_string(), step);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(CacheStore {
            path: Some(path),
            index: RwLock::new(index),
            file: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<AgentStep> {
        self.index
            .read()
            .expect("cache index lock")
            .get(key)
            .cloned()
    }

    pub fn put(&self, key: &str, step: &AgentStep) -> Result<(), StoreError> {
        let mut file = self.file.lock().expect("cache file lock");
        if self
            .index
            .read()
            .expect("cache index lock")
            .contains_key(key)
        {
            return Ok(());
        }
        if let Some(f) = file.as_mut() {
            let line = json!({"key": key, "step": step.to_json()}).to_string();
            writeln!(f, "{line}").map_err(|source| StoreError::Io {
                path: self.path.clone().unwrap_or_default(),
                source,
            })?;
        }
        self.index
            .write()
            .expect("cache index lock")
            .insert(key.to_string(), step.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cache key: digest of the agent fingerprint and the canonical context.
pub fn cache_key(fingerprint: &str, ctx: &AgentContext) -> String {
    let ctx_json = serde_json::to_string(ctx).expect("contexts serialize");
    sha256_hex(format!("{fingerprint}\n{ctx_json}").as_bytes())
}

/// Answers from the store when possible and records the inner agent's
/// steps otherwise.
pub struct CachingAgent<'s, A> {
    inner: A,
    store: &'s CacheStore,
    fingerprint: String,
    pub inner_calls: usize,
    pub hits: usize,
}

impl<'s, A: Agent> CachingAgent<'s, A> {
    pub fn new(inner: A, store: &'s CacheStore) -> Self {
        let fingerprint = inner.fingerprint();
        CachingAgent {
            inner,
            store,
            fingerprint,
            inner_calls: 0,
            hits: 0,
        }
    }

    pub fn into_inner(self) -> A {
        self.inner
    }
}

impl<A: Agent> Agent for CachingAgent<'_, A> {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        let key = cache_key(&self.fingerprint, ctx);
        if let Some(step) = self.store.get(&key) {
            self.hits += 1;
            return Ok(step);
        }
        self.inner_calls += 1;
        let step = self.inner.next_step(ctx)?;
        self.store
            .put(&key, &step)
            .map_err(|e| AgentError::Store(e.to_string()))?;
        Ok(step)
    }

    fn begin_session(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.inner.begin_session(ctx)
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}
