//! Chunked fan-out used by batch scoring.
//!
//! Every helper returns per-chunk results in chunk order. Callers reduce that
//! vector sequentially, which keeps floating-point sums independent of the
//! thread count and of whether rayon is compiled in at all.

/// How chunked work is scheduled.
///
/// `Parallel` silently degrades to sequential execution when the crate is
/// built without the `parallel` feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to consecutive chunks of `items` of length `chunk_len` (the
/// last one may be shorter). `f` receives the chunk index.
pub fn map_chunks<T, R, F>(items: &[T], chunk_len: usize, exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync + Send,
{
    assert!(chunk_len > 0, "chunk length must be positive");
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_chunks(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
    }
    let _ = exec;
    items
        .chunks(chunk_len)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect()
}

/// Applies `f` to every chunk index in `0..n_chunks`.
pub fn map_indices<R, F>(n_chunks: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n_chunks).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n_chunks).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_results_keep_order() {
        let data: Vec<u32> = (0..103).collect();
        let seq = map_chunks(&data, 10, Execution::Sequential, |i, c| (i, c.iter().sum::<u32>()));
        let par = map_chunks(&data, 10, Execution::Parallel, |i, c| (i, c.iter().sum::<u32>()));
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 11);
        assert_eq!(seq[10], (10, 100 + 101 + 102));
    }

    #[test]
    fn empty_input_gives_no_chunks() {
        let data: Vec<u8> = Vec::new();
        assert!(map_chunks(&data, 4, Execution::Parallel, |_, c| c.len()).is_empty());
        assert!(map_indices(0, Execution::Parallel, |i| i).is_empty());
    }
}
