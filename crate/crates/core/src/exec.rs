//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature (default) `Execution::Parallel` maps over
//! rayon's global pool; without it every policy runs sequentially. Results
//! are always collected in index order, so outputs never depend on the
//! policy or the thread count.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `(0..n).map(f).collect()` under the given policy.
pub fn map_range<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fills `out[i] = f(i)` under the given policy.
pub fn fill_indexed<T, F>(out: &mut [T], exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        }
        _ => out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_range(1000, Execution::Sequential, f);
        let b = map_range(1000, Execution::Parallel, f);
        assert_eq!(a, b);
        let mut c = vec![0.0; 1000];
        fill_indexed(&mut c, Execution::Parallel, f);
        assert_eq!(a, c);
    }
}
