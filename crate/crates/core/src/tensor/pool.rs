//! Per-thread recycling of large tensor buffers.
//!
//! A training step allocates and frees the same few dozen multi-megabyte
//! buffers every batch. Handing them back to the allocator lets it return
//! the pages to the OS, and the next batch pays for faulting them in again.

use std::cell::RefCell;

/// Buffers shorter than this (in elements) bypass the pool.
const MIN_LEN: usize = 1 << 14;
const MAX_BUFFERS: usize = 64;

thread_local! {
    static FREE: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// An empty vector with capacity for at least `len` elements.
pub(crate) fn take(len: usize) -> Vec<f64> {
    if len < MIN_LEN {
        return Vec::with_capacity(len);
    }
    let reused = FREE
        .try_with(|free| {
            let mut free = free.try_borrow_mut().ok()?;
            let (i, _) = free
                .iter()
                .enumerate()
                .filter(|(_, v)| v.capacity() >= len && v.capacity() <= 4 * len)
                .min_by_key(|(_, v)| v.capacity())?;
            Some(free.swap_remove(i))
        })
        .ok()
        .flatten();
    match reused {
        Some(mut v) => {
            v.clear();
            v
        }
        None => Vec::with_capacity(len),
    }
}

pub(crate) fn give(v: Vec<f64>) {
    if v.capacity() < MIN_LEN {
        return;
    }
    let _ = FREE.try_with(|free| {
        if let Ok(mut free) = free.try_borrow_mut() {
            if free.len() < MAX_BUFFERS {
                free.push(v);
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_buffers_are_reused() {
        let v = take(MIN_LEN * 2);
        let ptr = v.as_ptr();
        give(v);
        let again = take(MIN_LEN * 2 - 5);
        assert_eq!(again.as_ptr(), ptr);
        assert!(again.is_empty());
        give(again);
        let big = take(MIN_LEN * 8);
        let big_ptr = big.as_ptr();
        give(big);
        // far smaller requests do not grab an oversized buffer
        let small = take(MIN_LEN);
        assert_ne!(small.as_ptr(), big_ptr);
    }
}
