//! Thin data-parallel layer. With the `parallel` feature the helpers fan out
//! over rayon; without it, or while [`deterministic`] mode is on, they run
//! sequentially. Every helper partitions work into disjoint outputs, so
//! results are bit-identical across both paths.

use std::sync::atomic::{AtomicBool, Ordering};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force strictly single-threaded execution for the rest of the process.
pub fn set_deterministic(on: bool) {
    SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn deterministic() -> bool {
    SEQUENTIAL.load(Ordering::Relaxed)
}

/// Configure the global rayon pool size. Returns false if the pool was
/// already initialised or the crate was built without `parallel`.
pub fn init_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

/// Calls `f(index, chunk)` for each `chunk_len`-sized chunk of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        if !deterministic() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
    }
    for (i, c) in data.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

/// Elementwise map into a fresh vector.
pub fn map<T, U, F>(src: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if !deterministic() && src.len() >= 1 << 15 {
            use rayon::prelude::*;
            return src.par_iter().map(f).collect();
        }
    }
    src.iter().map(f).collect()
}

/// Ordered parallel map over an index range.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if !deterministic() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}
