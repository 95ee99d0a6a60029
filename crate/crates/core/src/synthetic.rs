//! Generated preference corpora whose ground-truth reward is a known linear
//! function of letter counts in the response. Used to check that training
//! can actually learn, and to produce fixtures for end-to-end runs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    write_records, DatasetError, ImageFeatures, JudgmentMeta, PreferenceLabel, PreferenceRecord, Source,
};

/// Alphabet responses are drawn from, and the reward weight of each letter.
pub const ALPHABET: &[u8; 8] = b"abcdefgh";
pub const LETTER_WEIGHTS: [f64; 8] = [1.0, 0.6, 0.2, 0.0, -0.2, -0.6, -1.0, 0.4];

/// Planted reward: sum of letter weights over the response. Characters
/// outside [`ALPHABET`] contribute nothing.
pub fn planted_reward(response: &str) -> f64 {
    response
        .bytes()
        .filter_map(|b| ALPHABET.iter().position(|&a| a == b))
        .map(|i| LETTER_WEIGHTS[i])
        .sum()
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub pairs: usize,
    /// Fraction of pairs that carry image features.
    pub multimodal_fraction: f64,
    pub response_len: usize,
    /// Minimum planted-reward gap between chosen and rejected.
    pub min_margin: f64,
    /// Fraction of pairs stored with `second_better` orientation.
    pub swapped_fraction: f64,
    pub feature_rows: usize,
    pub d_img: usize,
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pairs: 2000,
            multimodal_fraction: 0.7,
            response_len: 8,
            min_margin: 1.0,
            swapped_fraction: 0.0,
            feature_rows: 8,
            d_img: 16,
            id_prefix: "syn".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticCorpus {
    pub records: Vec<PreferenceRecord>,
    /// Features keyed by the `image_ref` used in `records`.
    pub features: BTreeMap<String, ImageFeatures>,
}

impl SyntheticCorpus {
    /// Writes `records.jsonl` and one feature file per image under `dir`.
    /// Image refs are relative to `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        for (r, f) in &self.features {
            let path = dir.join(r);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
            }
            f.write(&path)?;
        }
        write_records(&self.records, &dir.join("records.jsonl"))
    }
}

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect()
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut corpus = SyntheticCorpus::default();
    let mut i = 0;
    while corpus.records.len() < spec.pairs {
        let a = random_word(&mut rng, spec.response_len);
        let b = random_word(&mut rng, spec.response_len);
        let gap = planted_reward(&a) - planted_reward(&b);
        if gap.abs() < spec.min_margin {
            continue;
        }
        let (better, worse) = if gap > 0.0 { (a, b) } else { (b, a) };
        let prompt_words = rng.gen_range(1..=3);
        let prompt = (0..prompt_words)
            .map(|_| {
                let len = rng.gen_range(2..=5);
                random_word(&mut rng, len)
            })
            .collect::<Vec<_>>()
            .join(" ");
        let image_ref = if rng.gen_bool(spec.multimodal_fraction) {
            let r = format!("features/{}-{i:05}.imgf", spec.id_prefix);
            let data = (0..spec.feature_rows * spec.d_img).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let f = ImageFeatures::new(spec.feature_rows, spec.d_img, data).expect("valid feature shape");
            corpus.features.insert(r.clone(), f);
            Some(r)
        } else {
            None
        };
        let swapped = rng.gen_bool(spec.swapped_fraction);
        let (chosen, rejected, label) = if swapped {
            (worse, better, PreferenceLabel::SecondBetter)
        } else {
            (better, worse, PreferenceLabel::FirstBetter)
        };
        corpus.records.push(PreferenceRecord {
            id: format!("{}-{i:05}", spec.id_prefix),
            source: Source::Synthetic,
            domain_tag: None,
            route: None,
            prompt,
            image_ref,
            chosen,
            rejected,
            judgment: JudgmentMeta { label, confidence: 1.0, judge: "planted".into() },
        });
        i += 1;
    }
    corpus
}

/// Composition of a planted curation corpus. Every derived record follows
/// its original in file order; derived records and the label/confidence
/// plants use disjoint originals, so each stage-1 filter removes exactly
/// its planted count.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationPlan {
    pub total: usize,
    pub exact_duplicates: usize,
    pub near_duplicates: usize,
    pub equal_labels: usize,
    pub low_confidence: usize,
    /// Clean records stored with `second_better` orientation.
    pub second_better: usize,
    pub words_per_text: usize,
    pub seed: u64,
}

impl Default for CurationPlan {
    fn default() -> Self {
        Self {
            total: 1000,
            exact_duplicates: 50,
            near_duplicates: 30,
            equal_labels: 40,
            low_confidence: 25,
            second_better: 60,
            words_per_text: 40,
            seed: 0,
        }
    }
}

impl CurationPlan {
    pub fn stage1_survivors(&self) -> usize {
        self.total - self.exact_duplicates - self.near_duplicates - self.equal_labels - self.low_confidence
    }
}

fn word(rng: &mut ChaCha8Rng) -> String {
    (0..6).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn sentence(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

/// Builds a corpus following `plan`. Near-duplicates drop the last word of
/// the original's chosen response, which keeps their shingle Jaccard with
/// the original well above 0.9 for the default text length.
pub fn planted_curation_corpus(plan: &CurationPlan) -> Vec<PreferenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let derived = plan.exact_duplicates + plan.near_duplicates;
    let n_base = plan.total - derived;
    let planted = plan.equal_labels + plan.low_confidence + derived + plan.second_better;
    assert!(planted <= n_base, "plan needs {planted} distinct base records but has {n_base}");
    let sources = [Source::LlavaCritic, Source::SkyworkText, Source::RlaifV, Source::Inhouse];

    let mut bases = Vec::with_capacity(n_base);
    for i in 0..n_base {
        bases.push(PreferenceRecord {
            id: format!("r{i:05}"),
            source: sources[rng.gen_range(0..sources.len())],
            domain_tag: None,
            route: None,
            prompt: sentence(&mut rng, plan.words_per_text),
            image_ref: rng.gen_bool(0.7).then(|| format!("img/{i:05}.imgf")),
            chosen: sentence(&mut rng, plan.words_per_text),
            rejected: sentence(&mut rng, plan.words_per_text),
            judgment: JudgmentMeta {
                label: PreferenceLabel::FirstBetter,
                confidence: rng.gen_range(0.6..=1.0),
                judge: "gpt-4o".into(),
            },
        });
    }

    // Disjoint base indices: first the label plants, then the originals of
    // derived records, then reoriented records.
    let mut order: Vec<usize> = (0..n_base).collect();
    order.shuffle(&mut rng);
    let mut take = |n: usize| order.drain(..n).collect::<Vec<_>>();
    let equal = take(plan.equal_labels);
    let low = take(plan.low_confidence);
    let originals = take(derived);
    let swapped = take(plan.second_better);
    for i in equal {
        bases[i].judgment.label = PreferenceLabel::Equal;
    }
    for i in low {
        bases[i].judgment.confidence = rng.gen_range(0.0..0.45);
    }
    for i in swapped {
        let b = &mut bases[i];
        std::mem::swap(&mut b.chosen, &mut b.rejected);
        b.judgment.label = PreferenceLabel::SecondBetter;
    }

    let mut keyed: Vec<(f64, PreferenceRecord)> =
        bases.iter().cloned().enumerate().map(|(i, r)| (i as f64, r)).collect();
    for (k, &orig) in originals.iter().enumerate() {
        let mut r = bases[orig].clone();
        r.id = format!("d{k:05}");
        if k < plan.exact_duplicates {
            let other: Vec<Source> = sources.iter().copied().filter(|s| *s != r.source).collect();
            r.source = other[rng.gen_range(0..other.len())];
        } else {
            let text = &mut r.chosen;
            let cut = text.rfind(' ').expect("multi-word text");
            text.truncate(cut);
        }
        let key = orig as f64 + 0.5 + rng.gen_range(0.0..(n_base - orig) as f64);
        keyed.push((key, r));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, r)| r).collect()
}
