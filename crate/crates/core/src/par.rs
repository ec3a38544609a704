//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the current rayon pool; without it the same closures run sequentially.
//! Callers always reduce the returned `Vec` in index order, which keeps
//! floating-point sums identical for any worker count.

/// Default number of samples handled by one task (and one random stream).
pub const CHUNK: usize = 2048;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference implementation of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Split `total` items into `(chunk_index, start, len)` blocks of `chunk`.
pub fn chunk_layout(total: usize, chunk: usize) -> Vec<(usize, usize, usize)> {
    let chunk = chunk.max(1);
    let n = total.div_ceil(chunk);
    (0..n)
        .map(|i| {
            let start = i * chunk;
            (i, start, chunk.min(total - start))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_everything_once() {
        let l = chunk_layout(10, 4);
        assert_eq!(l, vec![(0, 0, 4), (1, 4, 4), (2, 8, 2)]);
        assert!(chunk_layout(0, 4).is_empty());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(1000, |i| (i as f64).sqrt());
        let b = map_indexed_seq(1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }
}
