use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// Splits `total` items into parts proportional to `weights` (summing to
/// 1), rounding by largest remainder; ties go to the earlier part.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    // The nudge keeps products like 0.7 * 50 from flooring to 34.
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64 + 1e-9).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total.saturating_sub(counts.iter().sum());
    if !weights.iter().any(|w| *w > 0.0) {
        return counts;
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// Stratified train/val/test assignment for samples with the given labels.
/// Within each class the samples are shuffled with a stream of `seed`
/// keyed by the class label, then cut by largest-remainder counts.
pub fn split_dataset(labels: &[u32], ratios: [f64; 3], seed: u64) -> Result<Vec<Split>> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios must be non-negative and sum to 1, got {ratios:?}")));
    }
    let needed = ratios.iter().filter(|r| **r > 0.0).count();
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut out = vec![Split::Train; labels.len()];
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < needed {
            return Err(Error::Split(format!(
                "class {class} has {} samples, fewer than the {needed} non-empty splits",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        let counts = largest_remainder(members.len(), &ratios);
        let mut it = members.into_iter();
        for (split, n) in Split::ALL.iter().zip(counts) {
            for i in it.by_ref().take(n) {
                out[i] = *split;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(assign: &[Split], labels: &[u32], class: u32, split: Split) -> usize {
        assign.iter().zip(labels).filter(|(s, l)| **s == split && **l == class).count()
    }

    #[test]
    fn balanced_seventy_fifteen_fifteen() {
        let labels: Vec<u32> = (0..100).map(|i| (i % 2) as u32).collect();
        let a = split_dataset(&labels, [0.7, 0.15, 0.15], 3).unwrap();
        assert_eq!(a.len(), 100);
        for class in 0..2 {
            assert_eq!(count(&a, &labels, class, Split::Train), 35);
            let v = count(&a, &labels, class, Split::Val);
            let t = count(&a, &labels, class, Split::Test);
            assert!((7..=8).contains(&v) && (7..=8).contains(&t) && v + t == 15);
        }
        assert_eq!(a, split_dataset(&labels, [0.7, 0.15, 0.15], 3).unwrap());
        assert_ne!(a, split_dataset(&labels, [0.7, 0.15, 0.15], 4).unwrap());
    }

    #[test]
    fn all_train_and_too_small_classes() {
        let labels = vec![0, 0, 1];
        assert!(split_dataset(&labels, [1.0, 0.0, 0.0], 0).unwrap().iter().all(|s| *s == Split::Train));
        assert!(split_dataset(&labels, [0.5, 0.25, 0.25], 0).is_err());
        assert!(split_dataset(&labels, [0.5, 0.5, 0.5], 0).is_err());
    }

    #[test]
    fn remainder_counts_are_exhaustive() {
        assert_eq!(largest_remainder(10, &[0.7, 0.15, 0.15]), vec![7, 2, 1]);
        assert_eq!(largest_remainder(3, &[0.5, 0.5]), vec![2, 1]);
        assert_eq!(largest_remainder(5, &[1.0, 0.0]), vec![5, 0]);
    }
}
