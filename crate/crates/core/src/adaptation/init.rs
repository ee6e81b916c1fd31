use nalgebra::DVector;
use rand::{Rng, RngExt};

/// k-means++ seeding: the first center uniformly, each further center with
/// probability proportional to its squared distance to the nearest chosen
/// center. Returns indices into `samples`.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = samples.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|s| (s - &samples[chosen[0]]).norm_squared())
        .collect();
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, s) in samples.iter().enumerate() {
            d2[i] = d2[i].min((s - &samples[next]).norm_squared());
        }
    }
    chosen
}

/// Index of the nearest center for every sample.
pub(crate) fn nearest_center(samples: &[DVector<f64>], centers: &[DVector<f64>]) -> Vec<usize> {
    samples
        .iter()
        .map(|s| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = (s - c).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_distinct_clusters() {
        let mut samples = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 0.01;
            samples.push(DVector::from_vec(vec![-100.0 + e, 0.0]));
            samples.push(DVector::from_vec(vec![100.0 + e, 0.0]));
        }
        for seed in 0..20 {
            let idx = kmeans_plus_plus(&samples, 2, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(idx.len(), 2);
            assert!(samples[idx[0]][0].signum() != samples[idx[1]][0].signum());
        }
    }

    #[test]
    fn identical_points_do_not_hang() {
        let samples = vec![DVector::from_vec(vec![1.0]); 5];
        let idx = kmeans_plus_plus(&samples, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(idx.len(), 3);
    }
}
