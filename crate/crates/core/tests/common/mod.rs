#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_forge::dataset::{FeatureStore, ImageFeatures, PreferenceRecord};
use reward_forge::evaluation::{BenchmarkItem, Preferred};
use reward_forge::model::{encode_input, forward, init_parameters, EncodedInput, ModelConfig, Parameters};
use reward_forge::scoring::{ScoreEntry, ScoreTable};
use reward_forge::synthetic::{generate, SyntheticSpec};
use reward_forge::training::{pairs_from_records, PreferencePair, TrainingSet};

pub fn tiny_config(d_model: usize, n_layers: usize, n_heads: usize) -> ModelConfig {
    ModelConfig {
        d_model,
        n_layers,
        n_heads,
        d_ff: 2 * d_model,
        max_seq_len: 32,
        d_img: 4,
        k_visual: 2,
        rng_seed: 11,
        ..Default::default()
    }
}

/// Parameters with every tensor (head and norms included) randomized, so no
/// part of the graph is trivially zero.
pub fn random_parameters(config: &ModelConfig, seed: u64) -> Parameters {
    let mut p = init_parameters(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    p.for_each_mut(|name, t| {
        let (center, spread) = if name.ends_with("gain") { (1.0, 0.2) } else { (0.0, 0.3) };
        t.data.iter_mut().for_each(|v| *v = center + rng.gen_range(-spread..spread));
    });
    p
}

pub fn random_text(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| rng.gen_range(b'a'..=b'h') as char).collect()
}

pub fn random_features(rng: &mut ChaCha8Rng, m: usize, d_img: usize) -> ImageFeatures {
    ImageFeatures::new(m, d_img, (0..m * d_img).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

pub fn random_input(config: &ModelConfig, rng: &mut ChaCha8Rng, with_image: bool) -> EncodedInput {
    let f = with_image.then(|| random_features(rng, 5, config.d_img));
    let prompt = random_text(rng, 1, 4);
    let response = random_text(rng, 1, 4);
    encode_input(config, &prompt, &response, f.as_ref()).unwrap()
}

pub fn random_pairs(config: &ModelConfig, n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let image = (i % 2 == 0).then(|| random_features(&mut rng, 5, config.d_img));
            let prompt = random_text(&mut rng, 1, 4);
            let a = random_text(&mut rng, 1, 4);
            let b = random_text(&mut rng, 1, 4);
            PreferencePair {
                chosen: encode_input(config, &prompt, &a, image.as_ref()).unwrap(),
                rejected: encode_input(config, &prompt, &b, image.as_ref()).unwrap(),
            }
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

pub fn synthetic_set(config: &ModelConfig, pairs: usize, seed: u64) -> TrainingSet {
    let corpus = generate(&SyntheticSpec { pairs, d_img: config.d_img, seed, ..Default::default() });
    let store = FeatureStore::new("/nonexistent");
    for (r, f) in &corpus.features {
        store.insert(r, f.clone());
    }
    pairs_from_records(&corpus.records, config, &store).unwrap()
}

pub fn pairwise_accuracy(params: &Parameters, pairs: &[PreferencePair]) -> f64 {
    let ok = pairs
        .iter()
        .filter(|p| forward(params, &p.chosen).unwrap() > forward(params, &p.rejected).unwrap())
        .count();
    ok as f64 / pairs.len() as f64
}

pub fn planted_scores(records: &[PreferenceRecord], seed: u64) -> (ScoreTable, Vec<(f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut scores = Vec::new();
    for (i, r) in records.iter().enumerate() {
        // Distinct chosen scores; a quarter of the pairs get a narrow gap.
        let c = i as f64 * 0.01 + rng.gen_range(0.0..0.001);
        let gap = if rng.gen_bool(0.25) { rng.gen_range(-1.0..0.45) } else { rng.gen_range(0.55..3.0) };
        let rej = c - gap;
        entries.push(ScoreEntry { prompt: Some(r.prompt.clone()), response: r.chosen.clone(), score: c });
        entries.push(ScoreEntry { prompt: Some(r.prompt.clone()), response: r.rejected.clone(), score: rej });
        scores.push((c, rej));
    }
    (ScoreTable::new(entries), scores)
}


pub fn item(id: &str, category: &str, a: &str, b: &str, preferred: Preferred) -> BenchmarkItem {
    BenchmarkItem {
        id: id.into(),
        category: category.into(),
        prompt: format!("prompt {id}"),
        image_ref: None,
        response_a: a.into(),
        response_b: b.into(),
        preferred,
    }
}

/// Ten items: six "general" (five judged correctly) and four "reasoning"
/// (three judged correctly) under the planted scores below.
pub fn crafted() -> (Vec<BenchmarkItem>, ScoreTable) {
    use Preferred::*;
    let items = vec![
        item("g1", "general", "good", "bad", A),
        item("g2", "general", "bad", "good", B),
        item("g3", "general", "great", "bad", A),
        item("g4", "general", "good", "awful", A),
        item("g5", "general", "awful", "great", B),
        item("g6", "general", "good", "great", A), // wrong: great > good
        item("r1", "reasoning", "great", "awful", A),
        item("r2", "reasoning", "bad", "good", B),
        item("r3", "reasoning", "good", "meh", A), // tie: good == meh
        item("r4", "reasoning", "awful", "good", B),
    ];
    let scores = [("great", 3.0), ("good", 2.0), ("meh", 2.0), ("bad", 1.0), ("awful", 0.0)];
    let table = ScoreTable::new(scores.iter().map(|(r, s)| ScoreEntry { prompt: None, response: r.to_string(), score: *s }));
    (items, table)
}
