//! Data-parallel helpers. With the `parallel` feature these dispatch to
//! rayon; without it (or with [`Exec::Serial`]) they run sequentially.
//!
//! Every helper returns results in index order, so reductions performed
//! by callers over the returned vectors are deterministic regardless of
//! the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Execution mode for a requested thread count. `Some(1)` runs serially;
/// larger counts size the global pool, which can only happen once per
/// process (later calls keep the first size).
pub fn exec_for_threads(threads: Option<usize>) -> Exec {
    match threads {
        Some(0) | Some(1) => Exec::Serial,
        Some(_n) => {
            #[cfg(feature = "parallel")]
            let _ = rayon::ThreadPoolBuilder::new().num_threads(_n).build_global();
            Exec::Parallel
        }
        None => Exec::Parallel,
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(exec: Exec, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Applies `f(row_index, row)` to each `width`-sized chunk of `data`.
pub fn for_each_row<T, F>(exec: Exec, data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Sum of `f(i)` for `i in 0..n`, accumulated in index order.
pub fn sum_range<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_range(exec, n, f).into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let f = |i: usize| (i as f64).sqrt().sin() * 1e-3;
        let a = sum_range(Exec::Serial, 10_000, f);
        let b = sum_range(Exec::Parallel, 10_000, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rows_are_visited_in_place() {
        let mut data = vec![0usize; 12];
        for_each_row(Exec::Parallel, &mut data, 3, |i, row| {
            for x in row {
                *x = i;
            }
        });
        assert_eq!(data, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }
}
