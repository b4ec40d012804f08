use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_FOLDS: usize = 4;

/// Screen indices partitioned into near-equal folds after a seeded shuffle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub seed: u64,
    /// Ascending screen indices per fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("{k} folds; need at least 2")));
        }
        if n < k {
            return Err(Error::InsufficientData(format!("{n} screens cannot fill {k} folds")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        SeededRng::derive(seed, &[0x464f_4c44]).shuffle(&mut order);
        let (base, extra) = (n / k, n % k);
        let mut folds = Vec::with_capacity(k);
        let mut at = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            let mut fold = order[at..at + size].to_vec();
            fold.sort_unstable();
            folds.push(fold);
            at += size;
        }
        Ok(Self { seed, folds })
    }

    /// Indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eight_screens_give_pairs() {
        let s = FoldSplit::new(8, 4, 1).unwrap();
        assert!(s.folds.iter().all(|f| f.len() == 2));
        assert_eq!(s, FoldSplit::new(8, 4, 1).unwrap());
        assert!(FoldSplit::new(3, 4, 1).is_err());
    }

    proptest! {
        #[test]
        fn partition(n in 4usize..300, seed in any::<u64>()) {
            let s = FoldSplit::new(n, 4, seed).unwrap();
            let mut all: Vec<usize> = s.folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = s.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in 0..4 {
                prop_assert_eq!(s.train_indices(f).len() + s.folds[f].len(), n);
            }
        }
    }
}
