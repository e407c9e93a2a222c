//! Node-parallel evaluation.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it, or with [`Exec::Sequential`], everything runs on the calling
//! thread. Results always come back in index order, and every reduction in
//! this crate is done sequentially over that order, so outputs are bit-identical
//! between the two modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `0..len` and returns the results in order.
pub fn map_indexed<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Like [`map_indexed`] but stops at the first error (by index order).
pub fn try_map_indexed<T, E, F>(exec: Exec, len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(exec, len, f).into_iter().collect()
}

/// Maps `f` over a slice of independent jobs, preserving order.
pub fn map_slice<A, T, F>(exec: Exec, items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    map_indexed(exec, items.len(), |k| f(&items[k]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |k: usize| ((k as f64) * 0.37).sin() / (1.0 + k as f64);
        let a: f64 = map_indexed(Exec::Parallel, 10_000, f).iter().sum();
        let b: f64 = map_indexed(Exec::Sequential, 10_000, f).iter().sum();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(Exec::Parallel, 100, |k| if k % 30 == 29 { Err(k) } else { Ok(k) });
        assert_eq!(r, Err(29));
    }
}
