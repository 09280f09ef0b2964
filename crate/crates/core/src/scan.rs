//! Chunked associative reductions and inclusive scans.
//!
//! Chunk boundaries depend only on the input length and the chunk size, never
//! on the number of worker threads, so results are identical for any pool.

use rayon::prelude::*;

/// Default chunk length for parallel composition.
pub const DEFAULT_CHUNK: usize = 128;

/// Left-to-right fold `x_0 ∘ x_1 ∘ … ∘ x_{n-1}`; `None` for empty input.
pub fn fold_sequential<T, F>(items: &[T], combine: F) -> Option<T>
where
    T: Clone,
    F: Fn(&T, &T) -> T,
{
    let (first, rest) = items.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, x| combine(&acc, x)))
}

/// Reduces each chunk independently in parallel, then combines the chunk totals in order.
pub fn reduce_chunked<T, F>(items: &[T], chunk: usize, combine: F) -> Option<T>
where
    T: Clone + Send + Sync,
    F: Fn(&T, &T) -> T + Sync,
{
    let chunk = chunk.max(1);
    let partials: Vec<T> = items
        .par_chunks(chunk)
        .map(|c| fold_sequential(c, &combine).expect("chunks are nonempty"))
        .collect();
    fold_sequential(&partials, &combine)
}

/// Inclusive scan `out[i] = x_0 ∘ … ∘ x_i`, sequentially.
pub fn scan_sequential<T, F>(items: &[T], combine: F) -> Vec<T>
where
    T: Clone,
    F: Fn(&T, &T) -> T,
{
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for x in items {
        let next = match out.last() {
            Some(prev) => combine(prev, x),
            None => x.clone(),
        };
        out.push(next);
    }
    out
}

/// Inclusive scan in three phases: per-chunk scans in parallel, a sequential
/// scan of chunk totals, then the carried prefix is folded into every chunk in parallel.
pub fn scan_chunked<T, F>(items: &[T], chunk: usize, combine: F) -> Vec<T>
where
    T: Clone + Send + Sync,
    F: Fn(&T, &T) -> T + Sync,
{
    let chunk = chunk.max(1);
    let local: Vec<Vec<T>> = items
        .par_chunks(chunk)
        .map(|c| scan_sequential(c, &combine))
        .collect();
    let totals: Vec<T> = local
        .iter()
        .map(|c| c.last().expect("chunks are nonempty").clone())
        .collect();
    let carried = scan_sequential(&totals, &combine);
    local
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(k, c)| {
            let prefix = if k == 0 { None } else { Some(carried[k - 1].clone()) };
            let combine = &combine;
            c.into_iter().map(move |x| match &prefix {
                Some(p) => combine(p, &x),
                None => x,
            })
        })
        .collect()
}
