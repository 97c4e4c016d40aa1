use std::sync::atomic::{AtomicU64, Ordering};

/// Floating-point operation tally for one computation context.
///
/// Kernels take a `&FlopCounter` and add their exact operation counts; the
/// counter is owned by the caller, never global.
#[derive(Debug, Default)]
pub struct FlopCounter(AtomicU64);

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&self, flops: u64) {
        self.0.fetch_add(flops, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }

    /// Current count, then reset.
    pub fn take(&self) -> u64 {
        self.0.swap(0, Ordering::Relaxed)
    }
}

impl Clone for FlopCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}
