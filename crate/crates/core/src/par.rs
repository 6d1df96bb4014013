//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction goes through [`tree_sum`], a fixed pairwise tree over the
//! items in index order, so results are bit-identical for any thread count and
//! with or without the `parallel` feature.

/// Execution strategy for the data-parallel kernels.
///
/// Without the `parallel` feature `Parallel` silently runs sequentially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Evaluates `f(0), .., f(n - 1)` and returns the results in index order.
pub fn map_indexed<R, F>(n: usize, exec: Exec, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`map_indexed`] over a slice.
pub fn map_slice<T, R, F>(items: &[T], exec: Exec, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(items.len(), exec, |i| f(&items[i]))
}

/// Pairwise (balanced tree) summation in index order.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            tree_sum(lo) + tree_sum(hi)
        }
    }
}

/// Pairwise reduction with an arbitrary associative operation.
pub fn tree_reduce<T: Clone>(values: &[T], identity: T, op: &impl Fn(T, T) -> T) -> T {
    match values.len() {
        0 => identity,
        1 => values[0].clone(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            op(tree_reduce(lo, identity.clone(), op), tree_reduce(hi, identity, op))
        }
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
