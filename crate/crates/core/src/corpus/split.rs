use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Holds out the final `floor(fraction * n)` samples as a dev set.
pub fn split_dev<T: Clone>(samples: &[T], fraction: f64) -> (Vec<T>, Vec<T>) {
    let n = samples.len();
    // the epsilon keeps products like 0.2 * 100 from flooring to 19
    let dev = ((fraction * n as f64) + 1e-9).floor() as usize;
    let dev = dev.min(n);
    (samples[..n - dev].to_vec(), samples[n - dev..].to_vec())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SubsampleMode {
    /// Contiguous block starting at `round(run * len / runs)`, wrapping.
    #[default]
    Blocks,
    /// Block taken from a seeded permutation of the data.
    Shuffle { seed: u64 },
}

/// Deterministically selects `n` samples for run `run_index` of `total_runs`.
pub fn subsample<T: Clone>(train: &[T], n: usize, run_index: usize, total_runs: usize) -> Result<Vec<T>> {
    subsample_with(train, n, run_index, total_runs, SubsampleMode::Blocks)
}

pub fn subsample_with<T: Clone>(
    train: &[T],
    n: usize,
    run_index: usize,
    total_runs: usize,
    mode: SubsampleMode,
) -> Result<Vec<T>> {
    let len = train.len();
    if n > len {
        return Err(Error::InsufficientData {
            requested: n,
            available: len,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let runs = total_runs.max(1);
    let offset = ((run_index as f64 * len as f64 / runs as f64).round() as usize) % len;
    let order: Vec<usize> = match mode {
        SubsampleMode::Blocks => (0..len).collect(),
        SubsampleMode::Shuffle { seed } => {
            let mut idx: Vec<usize> = (0..len).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx
        }
    };
    Ok((0..n)
        .map(|i| train[order[(offset + i) % len]].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dev_split_sizes() {
        let v: Vec<usize> = (0..100).collect();
        let (tr, dev) = split_dev(&v, 0.2);
        assert_eq!((tr.len(), dev.len()), (80, 20));
        assert_eq!(dev[0], 80);
        let (tr, dev) = split_dev(&v[..5], 0.2);
        assert_eq!((tr.len(), dev.len()), (4, 1));
        let (tr, dev) = split_dev::<usize>(&[], 0.2);
        assert_eq!((tr.len(), dev.len()), (0, 0));
    }

    #[test]
    fn block_offsets() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(subsample(&v, 10, 0, 10).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(subsample(&v, 10, 1, 10).unwrap(), (10..20).collect::<Vec<_>>());
        assert!(subsample(&v, 0, 3, 10).unwrap().is_empty());
        assert_eq!(subsample(&v, 100, 7, 10).unwrap().len(), 100);
        assert_eq!(subsample(&v, 100, 0, 10).unwrap(), v);
        assert!(matches!(
            subsample(&v, 101, 0, 10),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn blocks_wrap_around() {
        let v: Vec<usize> = (0..10).collect();
        assert_eq!(subsample(&v, 4, 9, 10).unwrap(), vec![9, 0, 1, 2]);
    }

    #[test]
    fn shuffle_mode_is_seeded() {
        let v: Vec<usize> = (0..50).collect();
        let m = SubsampleMode::Shuffle { seed: 4 };
        let a = subsample_with(&v, 10, 2, 10, m).unwrap();
        let b = subsample_with(&v, 10, 2, 10, m).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, subsample(&v, 10, 2, 10).unwrap());
    }

    proptest! {
        #[test]
        fn distinct_runs_differ(len in 2usize..200, n_frac in 0.0f64..0.5, runs in 2usize..12) {
            let n = ((len as f64 * n_frac) as usize).max(1);
            prop_assume!(len >= 2 * n);
            let v: Vec<usize> = (0..len).collect();
            let subsets: Vec<Vec<usize>> = (0..runs).map(|r| subsample(&v, n, r, runs).unwrap()).collect();
            prop_assert!(subsets.iter().any(|s| s != &subsets[0]));
        }

        #[test]
        fn same_run_is_reproducible(len in 1usize..100, run in 0usize..10) {
            let v: Vec<usize> = (0..len).collect();
            let n = len / 2;
            prop_assert_eq!(subsample(&v, n, run, 10).unwrap(), subsample(&v, n, run, 10).unwrap());
        }
    }
}
