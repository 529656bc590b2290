//! Pooled-descriptor cache for one bank.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ztm_core::{PoolingKind, PreparedBank, TemplateBank};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Gem(u64),
    Mean,
    Max,
}

impl From<PoolingKind> for Key {
    fn from(kind: PoolingKind) -> Self {
        match kind {
            PoolingKind::Gem(e) => Key::Gem(e.to_bits()),
            PoolingKind::Mean => Key::Mean,
            PoolingKind::Max => Key::Max,
        }
    }
}

/// Prepared (pooled) copies of one bank, keyed by pooling.
///
/// Safe to share between workers: readers never block each other, and when
/// two workers race on a missing key the first insert wins, so every caller
/// sees the same `Arc`.
#[derive(Debug)]
pub struct DescriptorCache<'a> {
    bank: &'a TemplateBank,
    entries: RwLock<HashMap<Key, Arc<PreparedBank>>>,
}

impl<'a> DescriptorCache<'a> {
    pub fn new(bank: &'a TemplateBank) -> Self {
        Self { bank, entries: RwLock::new(HashMap::new()) }
    }

    pub fn get(&self, pooling: PoolingKind) -> Result<Arc<PreparedBank>> {
        let key = Key::from(pooling);
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let prepared = Arc::new(PreparedBank::new(self.bank, pooling)?);
        let mut entries = self.entries.write().expect("cache lock poisoned");
        Ok(Arc::clone(entries.entry(key).or_insert(prepared)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
