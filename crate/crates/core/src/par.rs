//! Data-parallel helpers with a sequential fallback.
//!
//! Every data-parallel loop in the crate goes through [`map`]. With the
//! `parallel` feature the work is spread over rayon's global pool; without
//! it, or when [`Exec::Sequential`] is requested, a plain iterator is used.
//! Results are always returned in input order, so both paths are
//! bit-for-bit identical.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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

/// True when rayon is compiled in.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Parallel map over an index range.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let a = map(Exec::Sequential, &xs, |x| x.sin());
        let b = map(Exec::Parallel, &xs, |x| x.sin());
        assert_eq!(a, b);
        let c = map_range(Exec::Parallel, 17, |i| i * i);
        assert_eq!(c[16], 256);
    }
}
