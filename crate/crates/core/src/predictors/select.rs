use rand::seq::index;
use rand::Rng;

use super::{Modality, PredictionRecord};

/// Reduces a record to at most `k` candidates.
///
/// Probabilistic records keep the `k` most likely candidates in descending
/// probability (ties go to the lower index). Stochastic records keep `k`
/// distinct candidates drawn uniformly with `rng`, in their original order.
/// Deterministic records and records with `k` or fewer candidates are
/// returned unchanged. Probabilities are not renormalized.
pub fn select_top_k<R: Rng + ?Sized>(mut record: PredictionRecord, k: usize, rng: &mut R) -> PredictionRecord {
    let k = k.max(1);
    let n = record.candidates.len();
    if n <= k || record.modality == Modality::Deterministic {
        return record;
    }
    let keep: Vec<usize> = match record.modality {
        Modality::Probabilistic => {
            let mut order: Vec<usize> = (0..n).collect();
            let prob = |i: usize| record.candidates[i].probability.unwrap_or(0.0);
            order.sort_by(|&a, &b| prob(b).total_cmp(&prob(a)).then(a.cmp(&b)));
            order.truncate(k);
            order
        }
        _ => {
            let mut picked = index::sample(rng, n, k).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    let mut slots: Vec<Option<_>> = record.candidates.drain(..).map(Some).collect();
    record.candidates = keep.into_iter().filter_map(|i| slots[i].take()).collect();
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::predictors::CandidateTrajectory;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::time::Duration;

    fn record(modality: Modality, probs: &[Option<f64>]) -> PredictionRecord {
        PredictionRecord {
            agent_id: "a".into(),
            issue_tick: 0,
            candidates: probs
                .iter()
                .enumerate()
                .map(|(i, &p)| CandidateTrajectory {
                    points: vec![Vec2::new(i as f64, 0.0)],
                    probability: p,
                })
                .collect(),
            inference_elapsed: Duration::ZERO,
            modality,
        }
    }

    fn xs(r: &PredictionRecord) -> Vec<usize> {
        r.candidates.iter().map(|c| c.points[0].x as usize).collect()
    }

    #[test]
    fn most_likely_first() {
        let r = record(Modality::Probabilistic, &[Some(0.5), Some(0.3), Some(0.2)]);
        let out = select_top_k(r, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(xs(&out), vec![0, 1]);
        let r = record(Modality::Probabilistic, &[Some(0.2), Some(0.5), Some(0.3)]);
        let out = select_top_k(r, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(xs(&out), vec![1, 2]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let r = record(Modality::Probabilistic, &[Some(0.25); 4]);
        let out = select_top_k(r, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(xs(&out), vec![0, 1, 2]);
    }

    #[test]
    fn stochastic_identity_and_determinism() {
        let r = record(Modality::Stochastic, &[None; 20]);
        assert_eq!(select_top_k(r.clone(), 20, &mut ChaCha8Rng::seed_from_u64(1)), r);
        let a = select_top_k(r.clone(), 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = select_top_k(r, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(xs(&a), xs(&b));
        assert_eq!(a.candidates.len(), 5);
    }

    #[test]
    fn deterministic_unchanged() {
        let r = record(Modality::Deterministic, &[None]);
        assert_eq!(select_top_k(r.clone(), 3, &mut ChaCha8Rng::seed_from_u64(0)), r);
    }

    proptest! {
        #[test]
        fn subsets_and_argmax_nesting(
            raw in prop::collection::vec(0u32..10, 1..30),
            k in 1usize..30,
            k2 in 1usize..30,
            seed in any::<u64>(),
        ) {
            let total: f64 = raw.iter().map(|&v| v as f64 + 1.0).sum();
            let probs: Vec<Option<f64>> = raw.iter().map(|&v| Some((v as f64 + 1.0) / total)).collect();
            let (k, k2) = (k.max(k2), k.min(k2));
            let r = record(Modality::Probabilistic, &probs);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let once = select_top_k(r.clone(), k, &mut rng);
            let twice = select_top_k(once.clone(), k2, &mut rng);
            let direct = select_top_k(r.clone(), k2, &mut rng);
            prop_assert_eq!(&twice, &direct);
            prop_assert!(once.candidates.len() <= k);

            let s = record(Modality::Stochastic, &vec![None; raw.len()]);
            let picked = xs(&select_top_k(s, k, &mut rng));
            prop_assert_eq!(picked.len(), k.min(raw.len()));
            prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(picked.iter().all(|&i| i < raw.len()));
        }
    }
}
