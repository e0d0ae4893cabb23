//! Execution policy for the data-parallel loops.
//!
//! Every parallel path splits work into fixed, index-ordered pieces and
//! merges them in index order, so both policies produce bit-identical
//! results regardless of the thread count.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive chunks of `len` items (last chunk may be
/// shorter) and returns one result per chunk, in order.
pub fn map_chunks<T, F>(exec: Execution, len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    assert!(chunk > 0);
    let n_chunks = len.div_ceil(chunk);
    map_indexed(exec, n_chunks, |i| {
        let start = i * chunk;
        f(start..(start + chunk).min(len))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(Execution::Sequential, 1000, f);
        let b = map_indexed(Execution::Parallel, 1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn chunk_ranges_cover_input() {
        let r = map_chunks(Execution::Parallel, 10, 4, |r| r);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(map_chunks(Execution::Sequential, 0, 4, |r| r).is_empty());
    }
}
