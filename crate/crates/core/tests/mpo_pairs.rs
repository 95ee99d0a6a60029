use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_forge::dataset::load_records;
use reward_forge::mpo::*;
use reward_forge::scoring::{ScoreError, ScoreRequest};

/// Ground truth used as the scorer: a fixed function of the response text.
fn truth(r: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
    Ok(r.response.bytes().map(|b| (b as f64 - 100.0) * 0.1).sum())
}

fn random_set(rng: &mut ChaCha8Rng, i: usize) -> CandidateSet {
    let n = rng.gen_range(2..7);
    let mut responses: Vec<String> = Vec::new();
    while responses.len() < n {
        let len = rng.gen_range(1..8);
        let r: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        if !responses.contains(&r) {
            responses.push(r);
        }
    }
    CandidateSet {
        id: Some(format!("s{i}")),
        prompt: format!("prompt {i}"),
        image_ref: (i % 2 == 0).then(|| format!("img/{i}.imgf")),
        candidates: responses.into_iter().map(|response| Candidate { response, generator: None }).collect(),
    }
}

fn score_of(s: &str) -> f64 {
    truth(&ScoreRequest { prompt: "", image_ref: None, response: s }).unwrap()
}

#[test]
fn chosen_responses_are_ground_truth_argmaxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sets: Vec<CandidateSet> = (0..100).map(|i| random_set(&mut rng, i)).collect();
    let mut emitted = 0;
    for set in &sets {
        let scores: Vec<f64> = set.candidates.iter().map(|c| score_of(&c.response)).collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let worst = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let first_best = scores.iter().position(|&s| s == best).unwrap();
        match select_pair(&truth, set, 1e-9).unwrap() {
            Some(p) => {
                emitted += 1;
                assert_eq!(p.chosen, set.candidates[first_best].response);
                assert_eq!(p.s_chosen, best);
                assert_eq!(p.s_rejected, worst);
                assert!(p.gap >= 1e-9 && p.s_chosen >= p.s_rejected);
            }
            None => assert!(best - worst < 1e-9),
        }
    }
    assert!(emitted > 90);
}

#[test]
fn export_round_trips_through_dataset_loader() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sets: Vec<CandidateSet> = (0..30).map(|i| random_set(&mut rng, i)).collect();
    let (pairs, summary) = generate_pairs(&truth, &sets, 0.5).unwrap();
    assert_eq!(summary.pairs, pairs.len());
    assert_eq!(summary.pairs + summary.below_delta + summary.too_few_candidates, 30);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    export_pairs(&pairs, &path).unwrap();
    let records = load_records(&path).unwrap();
    assert_eq!(records.len(), pairs.len());
    for (r, p) in records.iter().zip(&pairs) {
        assert_eq!((&r.chosen, &r.rejected, &r.prompt, &r.image_ref), (&p.chosen, &p.rejected, &p.prompt, &p.image_ref));
        assert_eq!(r.judgment.judge, "reward-model");
        assert_eq!(r.judgment.confidence, reward_forge::numeric::sigmoid(p.gap));
        assert!(p.gap > 0.0);
    }
}

#[test]
fn all_below_delta_gives_zero_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sets: Vec<CandidateSet> = (0..10).map(|i| random_set(&mut rng, i)).collect();
    let (pairs, summary) = generate_pairs(&truth, &sets, 1e9).unwrap();
    assert!(pairs.is_empty());
    assert_eq!(summary.below_delta, 10);
}

proptest! {
    #[test]
    fn raising_delta_never_adds_pairs(seed in any::<u64>(), d1 in 0.01f64..5.0, extra in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets: Vec<CandidateSet> = (0..20).map(|i| random_set(&mut rng, i)).collect();
        let low = generate_pairs(&truth, &sets, d1).unwrap().0.len();
        let high = generate_pairs(&truth, &sets, d1 + extra).unwrap().0.len();
        prop_assert!(high <= low);
    }

    #[test]
    fn selection_scores_are_permutation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_set(&mut rng, 0);
        let mut shuffled = set.clone();
        shuffled.candidates.reverse();
        let a = select_pair(&truth, &set, 0.01).unwrap();
        let b = select_pair(&truth, &shuffled, 0.01).unwrap();
        prop_assert_eq!(a.as_ref().map(|p| (p.s_chosen, p.s_rejected)), b.as_ref().map(|p| (p.s_chosen, p.s_rejected)));
    }
}
