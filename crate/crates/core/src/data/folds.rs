use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Each tile is tested in exactly one fold and trains in all the others.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: usize,
    /// Fold index per tile id.
    pub tile_fold: Vec<usize>,
}

/// Seeded shuffle of tile ids split into `k` near-equal test groups.
pub fn assign_folds(tiles: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || k > tiles {
        return Err(Error::invalid("assign_folds", format!("{k} folds for {tiles} tiles")));
    }
    let mut ids: Vec<usize> = (0..tiles).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tile_fold = vec![0; tiles];
    let (base, extra) = (tiles / k, tiles % k);
    let mut it = ids.into_iter();
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for t in it.by_ref().take(size) {
            tile_fold[t] = f;
        }
    }
    Ok(FoldPlan { folds: k, tile_fold })
}

impl FoldPlan {
    pub fn test_tiles(&self, fold: usize) -> Vec<usize> {
        (0..self.tile_fold.len()).filter(|&t| self.tile_fold[t] == fold).collect()
    }

    pub fn train_tiles(&self, fold: usize) -> Vec<usize> {
        (0..self.tile_fold.len()).filter(|&t| self.tile_fold[t] != fold).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixty_tiles_six_folds() {
        let p = assign_folds(60, 6, 3).unwrap();
        let mut seen = vec![0; 60];
        for f in 0..6 {
            let t = p.test_tiles(f);
            assert_eq!(t.len(), 10);
            assert_eq!(p.train_tiles(f).len(), 50);
            t.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(p, assign_folds(60, 6, 3).unwrap());
        assert!(assign_folds(4, 6, 0).is_err());
    }
}
