//! Execution strategy for the embarrassingly parallel loops (node
//! regressions, replications, subsamples).
//!
//! With the `parallel` feature the work is spread over the current rayon pool;
//! without it, or with [`Execution::Sequential`], items run in order on the
//! calling thread. Results are always returned in input order, so outputs do
//! not depend on the strategy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.map(&idx, |&i| f(i))
    }
}

/// Independent ChaCha8 stream `stream` under `seed`.
///
/// Every randomized task draws from its own stream, so results are identical
/// for any degree of parallelism.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn strategies_agree() {
        let items: Vec<u64> = (0..200).collect();
        let f = |&i: &u64| task_rng(9, i).random::<u64>();
        assert_eq!(
            Execution::Sequential.map(&items, f),
            Execution::Parallel.map(&items, f)
        );
    }

    #[test]
    fn streams_differ() {
        let a: u64 = task_rng(1, 0).random();
        let b: u64 = task_rng(1, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, task_rng(1, 0).random::<u64>());
    }
}
