//! Data-parallel execution helper.
//!
//! Worker closures are pure functions of the index, so the parallel and
//! sequential builds produce identical output vectors; only wall-clock
//! time differs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order. Runs on the
/// rayon pool when the `parallel` feature is enabled, sequentially
/// otherwise.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(1000, |i| i * i);
        assert_eq!(out.len(), 1000);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let out: Vec<u8> = map_indexed(0, |_| unreachable!());
        assert!(out.is_empty());
    }
}
