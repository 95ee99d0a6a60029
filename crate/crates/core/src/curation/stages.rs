use rayon::prelude::*;
use std::collections::HashMap;

use super::audit::{AuditEvent, AuditReason, CurationAudit, CurationStage};
use super::minhash::{MinHasher, Signature};
use super::{CurationConfig, CurationError};
use crate::clients::{GenerationClient, GenerationRequest};
use crate::dataset::{canonicalize, fingerprint, PreferenceLabel, PreferenceRecord};
use crate::numeric::{derive_seed, percentile};
use crate::scoring::{ScoreRequest, Scorer};

fn event(id: &str, stage: CurationStage, reason: AuditReason) -> AuditEvent {
    AuditEvent { id: id.to_string(), stage, reason }
}

/// Drops every record whose content fingerprint was already seen, keeping
/// the earliest occurrence.
pub fn stage1_dedup(records: Vec<PreferenceRecord>) -> (Vec<PreferenceRecord>, CurationAudit) {
    let mut audit = CurationAudit::for_count(records.len());
    let digests: Vec<_> = records.par_iter().map(fingerprint).collect();
    let mut first_seen: HashMap<_, usize> = HashMap::with_capacity(records.len());
    let mut keep = vec![true; records.len()];
    for (i, d) in digests.iter().enumerate() {
        if let Some(&j) = first_seen.get(d) {
            keep[i] = false;
            audit.events.push(event(
                &records[i].id,
                CurationStage::Dedup,
                AuditReason::Duplicate { of: records[j].id.clone() },
            ));
        } else {
            first_seen.insert(*d, i);
        }
    }
    let out: Vec<_> = records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    audit.removed_dedup = audit.input - out.len();
    audit.output = out.len();
    (out, audit)
}

pub(crate) fn similarity_text(r: &PreferenceRecord) -> String {
    format!("{} {}", r.prompt, r.chosen)
}

/// Drops records whose estimated shingle Jaccard (over prompt and chosen
/// response) with an earlier surviving record reaches the threshold.
pub fn stage1_similarity_filter(
    records: Vec<PreferenceRecord>,
    config: &CurationConfig,
) -> (Vec<PreferenceRecord>, CurationAudit) {
    let mut audit = CurationAudit::for_count(records.len());
    let hasher = MinHasher::new(
        config.minhash_permutations,
        derive_seed(config.rng_seed, "minhash"),
    );
    let sigs: Vec<Signature> = records
        .par_iter()
        .map(|r| hasher.text_signature(&similarity_text(r), config.shingle_size))
        .collect();

    // Candidate matches depend only on signatures, so they can be found in
    // parallel; survival is then resolved in input order.
    let matches: Vec<Vec<(usize, f64)>> = (0..sigs.len())
        .into_par_iter()
        .map(|i| {
            (0..i)
                .filter_map(|j| {
                    let s = sigs[i].similarity(&sigs[j]);
                    (s >= config.similarity_threshold).then_some((j, s))
                })
                .collect()
        })
        .collect();

    let mut keep = vec![true; records.len()];
    for (i, cands) in matches.iter().enumerate() {
        if let Some(&(j, s)) = cands.iter().find(|(j, _)| keep[*j]) {
            keep[i] = false;
            audit.events.push(event(
                &records[i].id,
                CurationStage::Similarity,
                AuditReason::Similar { of: records[j].id.clone(), estimate: s },
            ));
        }
    }
    let out: Vec<_> = records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    audit.removed_similar = audit.input - out.len();
    audit.output = out.len();
    (out, audit)
}

/// Drops ambiguous (`equal`) and low-confidence judgments, and orients the
/// survivors so that `chosen` is always the preferred response.
pub fn stage1_judgment_filter(
    records: Vec<PreferenceRecord>,
    config: &CurationConfig,
) -> (Vec<PreferenceRecord>, CurationAudit) {
    let mut audit = CurationAudit::for_count(records.len());
    let mut out = Vec::with_capacity(records.len());
    for mut r in records {
        if r.judgment.label == PreferenceLabel::Equal {
            audit.events.push(event(&r.id, CurationStage::Judgment, AuditReason::EqualLabel));
            continue;
        }
        if r.judgment.confidence < config.judgment_confidence_min {
            audit.events.push(event(
                &r.id,
                CurationStage::Judgment,
                AuditReason::LowConfidence { confidence: r.judgment.confidence },
            ));
            continue;
        }
        if r.judgment.label == PreferenceLabel::SecondBetter {
            std::mem::swap(&mut r.chosen, &mut r.rejected);
            r.judgment.label = PreferenceLabel::FirstBetter;
            audit.events.push(event(&r.id, CurationStage::Judgment, AuditReason::Reoriented));
        }
        out.push(r);
    }
    audit.removed_judgment = audit.input - out.len();
    audit.output = out.len();
    (out, audit)
}

/// The three stage-1 filters in order.
pub fn stage1(
    records: Vec<PreferenceRecord>,
    config: &CurationConfig,
) -> (Vec<PreferenceRecord>, CurationAudit) {
    let (records, a) = stage1_dedup(records);
    let (records, b) = stage1_similarity_filter(records, config);
    let (records, c) = stage1_judgment_filter(records, config);
    (records, a.then(b).then(c))
}

/// Which regeneration triggers fired for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefineTriggers {
    pub low_score: bool,
    pub min_gap: bool,
}

impl RefineTriggers {
    pub fn any(self) -> bool {
        self.low_score || self.min_gap
    }
}

/// Evaluates both regeneration triggers over a score table. Returns the
/// low-score threshold (percentile of chosen scores) and per-record triggers.
pub fn refine_triggers(
    scores: &[(f64, f64)],
    config: &CurationConfig,
) -> (Option<f64>, Vec<RefineTriggers>) {
    let chosen: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let tau_low = percentile(&chosen, config.tau_low_percentile);
    let triggers = scores
        .iter()
        .map(|&(c, r)| RefineTriggers {
            low_score: tau_low.is_some_and(|t| c < t),
            min_gap: c - r < config.tau_gap,
        })
        .collect();
    (tau_low, triggers)
}

/// Scores every pair with the surrogate scorer and regenerates the chosen
/// response of pairs that score low or are barely separated. Never drops a
/// record and never touches `rejected`. A failed generation leaves the
/// record unchanged and is logged; a scoring failure aborts.
pub fn stage2_refine(
    mut records: Vec<PreferenceRecord>,
    scorer: &dyn Scorer,
    generator: &dyn GenerationClient,
    config: &CurationConfig,
) -> Result<(Vec<PreferenceRecord>, CurationAudit), CurationError> {
    let mut audit = CurationAudit::for_count(records.len());
    let scores: Vec<(f64, f64)> = records
        .par_iter()
        .map(|r| {
            let req = |response| ScoreRequest {
                prompt: &r.prompt,
                image_ref: r.image_ref.as_deref(),
                response,
            };
            Ok((scorer.score(&req(&r.chosen))?, scorer.score(&req(&r.rejected))?))
        })
        .collect::<Result<_, crate::scoring::ScoreError>>()
        .map_err(|e| CurationError::Score { source: e, audit: Box::new(audit.clone()) })?;

    let (tau_low, triggers) = refine_triggers(&scores, config);
    audit.tau_low = tau_low;

    let generated: Vec<Option<Result<String, String>>> = records
        .par_iter()
        .zip(&triggers)
        .map(|(r, t)| {
            t.any().then(|| {
                generator
                    .generate(&GenerationRequest::new(r.prompt.clone(), r.image_ref.as_deref()))
                    .map_err(|e| e.to_string())
                    .and_then(|text| {
                        if canonicalize(&text) == canonicalize(&r.rejected) {
                            Err("regenerated response equals the rejected response".into())
                        } else {
                            Ok(text)
                        }
                    })
            })
        })
        .collect();

    for ((r, (t, gen)), &(c, rej)) in records.iter_mut().zip(triggers.iter().zip(generated)).zip(&scores) {
        let Some(gen) = gen else { continue };
        if t.low_score {
            audit.regenerated_low_score += 1;
        }
        if t.min_gap {
            audit.regenerated_min_gap += 1;
        }
        match gen {
            Ok(text) => {
                r.chosen = text;
                audit.regenerated += 1;
                if t.low_score {
                    audit.events.push(event(&r.id, CurationStage::Refine, AuditReason::RegeneratedLowScore { score: c }));
                }
                if t.min_gap {
                    audit.events.push(event(&r.id, CurationStage::Refine, AuditReason::RegeneratedMinGap { gap: c - rej }));
                }
            }
            Err(message) => {
                log::warn!("record {}: regeneration failed: {message}", r.id);
                audit.generation_failures += 1;
                audit.events.push(event(&r.id, CurationStage::Refine, AuditReason::GenerationFailed { message }));
            }
        }
    }
    Ok((records, audit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::MockClient;
    use crate::dataset::sample_record;
    use crate::scoring::ScoreError;

    fn rec(id: &str, prompt: &str, chosen: &str, rejected: &str) -> PreferenceRecord {
        let mut r = sample_record(id);
        r.prompt = prompt.into();
        r.chosen = chosen.into();
        r.rejected = rejected.into();
        r.image_ref = None;
        r
    }

    #[test]
    fn dedup_keeps_earliest() {
        let a = rec("a", "p", "good", "bad");
        let mut b = rec("b", "p", "good ", "bad");
        b.source = crate::dataset::Source::SkyworkText;
        let c = rec("c", "q", "x", "y");
        let (out, audit) = stage1_dedup(vec![a, b, c]);
        assert_eq!(out.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(audit.removed_dedup, 1);
        assert!(audit.is_balanced());
    }

    #[test]
    fn disjoint_records_both_survive_similarity() {
        let cfg = CurationConfig::default();
        let a = rec("a", "one two three four five six", "seven eight nine ten", "z");
        let b = rec("b", "alpha beta gamma delta epsilon", "zeta eta theta iota", "z");
        let (out, audit) = stage1_similarity_filter(vec![a, b], &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(audit.removed_similar, 0);
    }

    #[test]
    fn judgment_rules() {
        let cfg = CurationConfig::default();
        let mut eq = rec("eq", "p", "a", "b");
        eq.judgment.label = PreferenceLabel::Equal;
        let mut sec = rec("sec", "p", "worse", "better");
        sec.judgment.label = PreferenceLabel::SecondBetter;
        sec.judgment.confidence = 0.9;
        let mut low = rec("low", "p", "a", "b");
        low.judgment.confidence = 0.3;
        let (out, audit) = stage1_judgment_filter(vec![eq, sec, low], &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].chosen, "better");
        assert_eq!(out[0].rejected, "worse");
        assert_eq!(out[0].judgment.label, PreferenceLabel::FirstBetter);
        assert_eq!(audit.removed_judgment, 2);
    }

    fn table_scorer(
        table: Vec<(&'static str, f64)>,
    ) -> impl Fn(&ScoreRequest<'_>) -> Result<f64, ScoreError> + Send + Sync {
        move |req: &ScoreRequest<'_>| {
            table
                .iter()
                .find(|(k, _)| *k == req.response)
                .map(|(_, v)| *v)
                .ok_or_else(|| ScoreError(req.response.to_string()))
        }
    }

    #[test]
    fn refine_untouched_when_no_trigger() {
        let cfg = CurationConfig { tau_low_percentile: 0.0, ..Default::default() };
        let scorer = table_scorer(vec![("c", 4.0), ("r", 1.0)]);
        let gen = MockClient::echo("gpt");
        let (out, audit) = stage2_refine(vec![rec("a", "p", "c", "r")], &scorer, &gen, &cfg).unwrap();
        assert_eq!(out[0].chosen, "c");
        assert_eq!(audit.regenerated, 0);
        assert!(gen.calls().is_empty());
    }

    #[test]
    fn refine_min_gap_calls_generator_once() {
        let cfg = CurationConfig { tau_low_percentile: 0.0, ..Default::default() };
        let scorer = table_scorer(vec![("c", 1.1), ("r", 1.0), ("c2", 5.0), ("r2", 0.0)]);
        let gen = MockClient::echo("gpt");
        let recs = vec![rec("a", "p", "c", "r"), rec("b", "q", "c2", "r2")];
        let (out, audit) = stage2_refine(recs, &scorer, &gen, &cfg).unwrap();
        assert_eq!(gen.calls().len(), 1);
        assert_eq!(out[0].chosen, "gpt: p");
        assert_eq!(out[0].rejected, "r");
        assert_eq!(out[1].chosen, "c2");
        assert_eq!(audit.regenerated_min_gap, 1);
        assert_eq!(audit.output, 2);
    }

    #[test]
    fn refine_generation_failure_passes_through() {
        let cfg = CurationConfig::default();
        let scorer = table_scorer(vec![("c", 0.0), ("r", 0.0)]);
        let gen = MockClient::failing("gpt");
        let (out, audit) = stage2_refine(vec![rec("a", "p", "c", "r")], &scorer, &gen, &cfg).unwrap();
        assert_eq!(out[0].chosen, "c");
        assert_eq!(audit.generation_failures, 1);
        assert_eq!(audit.regenerated, 0);
    }

    #[test]
    fn refine_scorer_failure_aborts() {
        let cfg = CurationConfig::default();
        let scorer = table_scorer(vec![]);
        let gen = MockClient::echo("gpt");
        assert!(stage2_refine(vec![rec("a", "p", "c", "r")], &scorer, &gen, &cfg).is_err());
    }
}
