//! Uniform negative sampling over items a user has not interacted with.

use super::SplitLog;
use crate::error::HgnError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Draws items uniformly from the complement of a user's train-set
/// positives, by rejection. Validation and test items are deliberately
/// not excluded: excluding them would leak the held-out sets into
/// training.
pub struct UniformNegativeSampler {
    positives: Vec<Vec<u32>>, // sorted distinct train items per user
    num_items: u32,
    rng: ChaCha8Rng,
}

impl UniformNegativeSampler {
    pub fn from_split(split: &SplitLog, rng: ChaCha8Rng) -> Self {
        let positives = (0..split.num_users())
            .map(|u| {
                let mut items: Vec<u32> = split.train(u).to_vec();
                items.sort_unstable();
                items.dedup();
                items
            })
            .collect();
        UniformNegativeSampler {
            positives,
            num_items: split.num_items() as u32,
            rng,
        }
    }

    /// Build from explicit positive sets, mostly for tests.
    pub fn from_positives(positives: Vec<Vec<u32>>, num_items: u32, rng: ChaCha8Rng) -> Self {
        let positives = positives
            .into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        UniformNegativeSampler {
            positives,
            num_items,
            rng,
        }
    }

    pub fn num_items(&self) -> u32 {
        self.num_items
    }

    pub fn positives(&self, user: u32) -> &[u32] {
        &self.positives[user as usize]
    }

    /// Draw one negative for `user` using the sampler's own stream.
    pub fn draw(&mut self, user: u32) -> Result<u32, HgnError> {
        // Split borrows: the rng and the positive list are separate fields.
        let positives = &self.positives[user as usize];
        draw_with(positives, self.num_items, &mut self.rng)
    }

    /// Draw using an external generator (per-worker streams).
    pub fn draw_with(&self, user: u32, rng: &mut impl Rng) -> Result<u32, HgnError> {
        draw_with(&self.positives[user as usize], self.num_items, rng)
    }
}

fn draw_with(positives: &[u32], num_items: u32, rng: &mut impl Rng) -> Result<u32, HgnError> {
    if positives.len() as u32 >= num_items {
        return Err(HgnError::Sampling(format!(
            "user has interacted with all {num_items} items; no negative exists"
        )));
    }
    loop {
        let candidate = rng.random_range(0..num_items);
        if positives.binary_search(&candidate).is_err() {
            return Ok(candidate);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, STREAM_NEGATIVE};

    fn sampler(positives: Vec<Vec<u32>>, num_items: u32, seed: u64) -> UniformNegativeSampler {
        UniformNegativeSampler::from_positives(
            positives,
            num_items,
            stream_rng(seed, STREAM_NEGATIVE),
        )
    }

    #[test]
    fn single_candidate_is_forced() {
        let mut s = sampler(vec![vec![0, 1]], 3, 1);
        for _ in 0..20 {
            assert_eq!(s.draw(0).unwrap(), 2);
        }
    }

    #[test]
    fn covered_item_set_is_an_error() {
        let mut s = sampler(vec![vec![0, 1, 2]], 3, 1);
        assert!(matches!(s.draw(0), Err(HgnError::Sampling(_))));
    }

    #[test]
    fn draws_are_uniform_over_non_positives() {
        // 100 items, positives {0..9}: 90 candidates, 1e5 draws. Each
        // candidate's count is Binomial(1e5, 1/90); mean 1111.1, sigma
        // sqrt(n p (1-p)) ~ 33.1. Check every count within 3 sigma is too
        // strict jointly (90 trials), so allow 4 sigma per item and check
        // that at least 85 of 90 are within 3 sigma.
        let mut s = sampler(vec![(0..10).collect()], 100, 7);
        let n = 100_000usize;
        let mut counts = vec![0usize; 100];
        for _ in 0..n {
            counts[s.draw(0).unwrap() as usize] += 1;
        }
        assert!(counts[..10].iter().all(|&c| c == 0), "positive was drawn");

        let p = 1.0 / 90.0;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let mut within3 = 0;
        for &c in &counts[10..] {
            let dev = (c as f64 - mean).abs();
            assert!(dev < 4.0 * sigma, "count {c} deviates more than 4 sigma");
            if dev < 3.0 * sigma {
                within3 += 1;
            }
        }
        assert!(within3 >= 85, "only {within3} of 90 counts within 3 sigma");
    }

    #[test]
    fn same_seed_gives_identical_draw_sequence() {
        let mut a = sampler(vec![(0..10).collect()], 50, 99);
        let mut b = sampler(vec![(0..10).collect()], 50, 99);
        let da: Vec<u32> = (0..100).map(|_| a.draw(0).unwrap()).collect();
        let db: Vec<u32> = (0..100).map(|_| b.draw(0).unwrap()).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn negative_is_never_a_positive() {
        let positives: Vec<u32> = (0..40).filter(|i| i % 3 == 0).collect();
        let mut s = sampler(vec![positives.clone()], 40, 3);
        for _ in 0..5_000 {
            let neg = s.draw(0).unwrap();
            assert!(!positives.contains(&neg));
        }
    }
}
