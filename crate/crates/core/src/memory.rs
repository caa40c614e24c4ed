//! Byte accounting for the tree, processing, R and BS regions.
//!
//! Allocations are charged explicitly when they are made and released when
//! the returned [`Charge`] drops, so a run can report its peak footprint.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

#[derive(Debug, Default)]
pub struct MemoryTracker {
    current: AtomicU64,
    peak: AtomicU64,
}

impl MemoryTracker {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn charge(self: &Arc<Self>, bytes: u64) -> Charge {
        let now = self.current.fetch_add(bytes, Ordering::Relaxed) + bytes;
        self.peak.fetch_max(now, Ordering::Relaxed);
        Charge { tracker: Some(Arc::clone(self)), bytes }
    }

    pub fn current(&self) -> u64 {
        self.current.load(Ordering::Relaxed)
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::Relaxed)
    }
}

/// A live allocation charged against a [`MemoryTracker`].
#[derive(Debug, Default)]
pub struct Charge {
    tracker: Option<Arc<MemoryTracker>>,
    bytes: u64,
}

impl Charge {
    /// A charge that is not attached to any tracker.
    pub fn none() -> Self {
        Charge::default()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    /// Adjusts the charge to `bytes`, e.g. after a buffer was resized.
    pub fn resize(&mut self, bytes: u64) {
        if let Some(t) = &self.tracker {
            if bytes > self.bytes {
                let now = t.current.fetch_add(bytes - self.bytes, Ordering::Relaxed) + (bytes - self.bytes);
                t.peak.fetch_max(now, Ordering::Relaxed);
            } else {
                t.current.fetch_sub(self.bytes - bytes, Ordering::Relaxed);
            }
        }
        self.bytes = bytes;
    }
}

impl Drop for Charge {
    fn drop(&mut self) {
        if let Some(t) = &self.tracker {
            t.current.fetch_sub(self.bytes, Ordering::Relaxed);
        }
    }
}

pub(crate) fn charge_opt(tracker: Option<&Arc<MemoryTracker>>, bytes: u64) -> Charge {
    match tracker {
        Some(t) => t.charge(bytes),
        None => Charge::none(),
    }
}
