//! Per-object storage of memory embeddings over time.
//!
//! Frame 0 is pinned (it carries the only ground-truth mask); later frames
//! are kept on a fixed stride, and a capacity bound evicts the oldest
//! non-first entry.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{AttentionMap, FeatureGrid};
use crate::reader::MemoryEmbedding;

/// When to store a frame and how many entries to keep per object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MemoryPolicy {
    /// Store frames whose index is a multiple of this stride (frame 0 always).
    pub every_n: usize,
    /// Maximum stored entries per object; `None` is unbounded.
    pub max_entries: Option<usize>,
}

impl Default for MemoryPolicy {
    fn default() -> Self {
        Self { every_n: 5, max_entries: None }
    }
}

impl MemoryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.every_n == 0 {
            return Err(Error::InvalidConfig("memory every_n must be >= 1".into()));
        }
        if self.max_entries == Some(0) {
            return Err(Error::InvalidConfig("memory max_entries must be >= 1".into()));
        }
        Ok(())
    }
}

/// One stored memory frame for one object.
#[derive(Debug, Clone)]
pub struct BankEntry {
    pub frame_index: usize,
    pub key: FeatureGrid,
    pub value: FeatureGrid,
    pub attention: AttentionMap,
}

/// Time-indexed store of memory entries per object id.
#[derive(Debug, Clone, Default)]
pub struct MemoryBank {
    objects: BTreeMap<u32, Vec<BankEntry>>,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.objects.keys().copied().collect()
    }

    pub fn len(&self, object_id: u32) -> usize {
        self.objects.get(&object_id).map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn entries(&self, object_id: u32) -> Option<&[BankEntry]> {
        self.objects.get(&object_id).map(Vec::as_slice)
    }

    /// Applies the storage policy to one frame. Returns whether the entry
    /// was stored. Frame 0 is always stored and never evicted.
    pub fn append(
        &mut self,
        object_id: u32,
        entry: BankEntry,
        policy: &MemoryPolicy,
    ) -> Result<bool> {
        policy.validate()?;
        let entries = self.objects.entry(object_id).or_default();
        if let Some(last) = entries.last() {
            if entry.frame_index <= last.frame_index {
                return Err(Error::InvalidInput(format!(
                    "frame indices must be strictly increasing per object (got {} after {})",
                    entry.frame_index, last.frame_index
                )));
            }
            let first = &entries[0];
            let same = first.key.height() == entry.key.height()
                && first.key.width() == entry.key.width()
                && first.key.channels() == entry.key.channels()
                && first.value.channels() == entry.value.channels();
            if !same {
                return Err(Error::DimensionMismatch {
                    context: "bank entry vs existing entries",
                    left_h: entry.key.height(),
                    left_w: entry.key.width(),
                    right_h: first.key.height(),
                    right_w: first.key.width(),
                });
            }
        }
        let store = entry.frame_index == 0 || entry.frame_index % policy.every_n == 0;
        if !store {
            return Ok(false);
        }
        entries.push(entry);
        if let Some(cap) = policy.max_entries {
            while entries.len() > cap && entries.len() > 1 {
                // evict the oldest entry that is not frame 0
                entries.remove(1);
            }
        }
        Ok(true)
    }

    /// Stacks an object's stored entries, time-ordered, into an embedding.
    pub fn assemble(&self, object_id: u32) -> Result<MemoryEmbedding> {
        let entries =
            self.objects.get(&object_id).ok_or(Error::UnknownObject(object_id))?;
        if entries.is_empty() {
            return Err(Error::UnknownObject(object_id));
        }
        MemoryEmbedding::new(
            entries.iter().map(|e| e.key.clone()).collect(),
            entries.iter().map(|e| e.value.clone()).collect(),
            entries.iter().map(|e| e.attention.clone()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(frame_index: usize) -> BankEntry {
        BankEntry {
            frame_index,
            key: FeatureGrid::zeros(2, 2, 3),
            value: FeatureGrid::zeros(2, 2, 4),
            attention: AttentionMap::ones(2, 2),
        }
    }

    fn stored_frames(bank: &MemoryBank, id: u32) -> Vec<usize> {
        bank.entries(id).unwrap().iter().map(|e| e.frame_index).collect()
    }

    #[test]
    fn stride_policy_keeps_multiples() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 5, max_entries: None };
        for f in 0..=12 {
            bank.append(1, entry(f), &policy).unwrap();
        }
        assert_eq!(stored_frames(&bank, 1), vec![0, 5, 10]);
    }

    #[test]
    fn stride_one_unbounded_stores_everything() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 1, max_entries: None };
        for f in 0..6 {
            assert!(bank.append(1, entry(f), &policy).unwrap());
        }
        assert_eq!(stored_frames(&bank, 1), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn capacity_evicts_oldest_non_first() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 5, max_entries: Some(2) };
        for f in [0, 5, 10] {
            bank.append(1, entry(f), &policy).unwrap();
        }
        assert_eq!(stored_frames(&bank, 1), vec![0, 10]);
    }

    #[test]
    fn frame_zero_survives_any_capacity() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 1, max_entries: Some(3) };
        for f in 0..20 {
            bank.append(1, entry(f), &policy).unwrap();
        }
        let frames = stored_frames(&bank, 1);
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[0], 0);
        assert_eq!(frames[1..], [18, 19]);
    }

    #[test]
    fn assemble_orders_by_frame() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 5, max_entries: None };
        for f in [0, 5, 10] {
            bank.append(3, entry(f), &policy).unwrap();
        }
        let emb = bank.assemble(3).unwrap();
        assert_eq!(emb.frames(), 3);
    }

    #[test]
    fn assemble_unknown_object_errors() {
        let bank = MemoryBank::new();
        assert!(matches!(bank.assemble(7), Err(Error::UnknownObject(7))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy::default();
        bank.append(1, entry(0), &policy).unwrap();
        let bad = BankEntry {
            frame_index: 5,
            key: FeatureGrid::zeros(3, 2, 3),
            value: FeatureGrid::zeros(3, 2, 4),
            attention: AttentionMap::ones(3, 2),
        };
        assert!(bank.append(1, bad, &policy).is_err());
    }

    #[test]
    fn non_increasing_frames_rejected() {
        let mut bank = MemoryBank::new();
        let policy = MemoryPolicy { every_n: 1, max_entries: None };
        bank.append(1, entry(4), &policy).unwrap();
        assert!(bank.append(1, entry(4), &policy).is_err());
    }
}
