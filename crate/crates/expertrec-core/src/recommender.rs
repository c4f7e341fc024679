//! Serving by similarity lookup: match the live user against the expert
//! state dataset on interest distance and corpus-embedding distance, then
//! realize the matched record's policy action against the user's corpus,
//! drawing only on expert-evaluated items. Steps that match nothing, or
//! whose matched action cannot be filled from evaluated items, fall back to
//! a uniform random slate and are not counted as guided.

use rand::seq::index::sample;
use rand_chacha::rand_core::RngCore;

use crate::config::{ClassifierConfig, DescriptorConfig, ExperimentConfig};
use crate::dataset::{corpus_descriptor_items, ExpertStateRecord};
use crate::domain::{Topic, VideoId};
use crate::error::{Error, Result};
use crate::irl::abstraction::{Discretizer, ScoredItem};
use crate::irl::value_iteration::argmax;
use crate::user_env::{Agent, CorpusItem, Observation, Recommendation};

fn distance2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_layout(record: &ExpertStateRecord, interests: &[f64], corpus: &[f64]) -> Result<()> {
    if record.e_s.len() != interests.len() || record.e_c.len() != corpus.len() {
        return Err(Error::invalid(format!(
            "query layout ({}, {}) does not match dataset record layout ({}, {})",
            interests.len(),
            corpus.len(),
            record.e_s.len(),
            record.e_c.len()
        )));
    }
    Ok(())
}

/// Scans the dataset in stored order and returns the index of the first
/// record within both margins: interest distance <= th1 and corpus distance
/// <= th2 (compared as squared distances). With `nearest_neighbor` set it
/// instead returns the within-margin record minimizing the summed squared
/// distance, earliest on ties. `None` when nothing qualifies.
pub fn classify(
    interests: &[f64],
    corpus: &[f64],
    records: &[ExpertStateRecord],
    cfg: &ClassifierConfig,
) -> Result<Option<usize>> {
    let th1_sq = cfg.th1 * cfg.th1;
    let th2_sq = cfg.th2 * cfg.th2;
    let mut best: Option<(usize, f64)> = None;
    for (index, record) in records.iter().enumerate() {
        check_layout(record, interests, corpus)?;
        let interest_d2 = distance2(interests, &record.e_s);
        if interest_d2 > th1_sq {
            continue;
        }
        let corpus_d2 = distance2(corpus, &record.e_c);
        if corpus_d2 > th2_sq {
            continue;
        }
        if !cfg.nearest_neighbor {
            return Ok(Some(index));
        }
        let total = interest_d2 + corpus_d2;
        if best.map_or(true, |(_, b)| total < b) {
            best = Some((index, total));
        }
    }
    Ok(best.map(|(index, _)| index))
}

/// Scan accelerator exploiting dataset layout: records arrive grouped by
/// trajectory, and every step of a trajectory shares the expert's interest
/// vector, so the interest distance is computed once per run instead of once
/// per record. Classification results are identical to [`classify`].
#[derive(Debug, Clone)]
pub struct ClassifierIndex<'a> {
    records: &'a [ExpertStateRecord],
    /// Half-open [start, end) runs of records with bit-identical e_s.
    blocks: Vec<(usize, usize)>,
}

impl<'a> ClassifierIndex<'a> {
    pub fn new(records: &'a [ExpertStateRecord]) -> Result<Self> {
        if let Some(first) = records.first() {
            for r in records {
                check_layout(r, &first.e_s, &first.e_c)?;
            }
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..records.len() {
            if records[i].e_s != records[start].e_s {
                blocks.push((start, i));
                start = i;
            }
        }
        if start < records.len() {
            blocks.push((start, records.len()));
        }
        Ok(ClassifierIndex { records, blocks })
    }

    pub fn records(&self) -> &'a [ExpertStateRecord] {
        self.records
    }

    pub fn classify(
        &self,
        interests: &[f64],
        corpus: &[f64],
        cfg: &ClassifierConfig,
    ) -> Result<Option<usize>> {
        if let Some(first) = self.records.first() {
            check_layout(first, interests, corpus)?;
        }
        let th1_sq = cfg.th1 * cfg.th1;
        let th2_sq = cfg.th2 * cfg.th2;
        let mut best: Option<(usize, f64)> = None;
        for &(start, end) in &self.blocks {
            let interest_d2 = distance2(interests, &self.records[start].e_s);
            if interest_d2 > th1_sq {
                continue;
            }
            for index in start..end {
                let corpus_d2 = distance2(corpus, &self.records[index].e_c);
                if corpus_d2 > th2_sq {
                    continue;
                }
                if !cfg.nearest_neighbor {
                    return Ok(Some(index));
                }
                let total = interest_d2 + corpus_d2;
                if best.map_or(true, |(_, b)| total < b) {
                    best = Some((index, total));
                }
            }
        }
        Ok(best.map(|(index, _)| index))
    }
}

/// Uniform random slate of min(k, corpus size) distinct corpus items.
pub fn random_slate(
    corpus: &[CorpusItem],
    slate_size: usize,
    rng: &mut dyn RngCore,
) -> Vec<crate::domain::VideoId> {
    let k = slate_size.min(corpus.len());
    sample(rng, corpus.len(), k)
        .into_iter()
        .map(|i| corpus[i].id)
        .collect()
}

/// Grounds a matched record's action in expert-validated content only. Per
/// descriptor, in the action's sorted order, the best remaining *evaluated*
/// corpus item with the required topic relation wins, ranked by closeness
/// of its published score to the descriptor's bin center (earliest corpus
/// position on ties). Returns `None` when any descriptor has no remaining
/// evaluated candidate on the right topic side: the endorsement cannot be
/// honored on this corpus, and the caller serves an unguided slate instead
/// of padding with unvetted items whose score is mere predicted appeal.
fn realize_action_evaluated(
    discretizer: &Discretizer,
    action: usize,
    corpus: &[ScoredItem],
    dominant_topic: Topic,
) -> Option<Vec<VideoId>> {
    let mut used = vec![false; corpus.len()];
    let mut slate = Vec::with_capacity(discretizer.slate_size);
    for descriptor in discretizer.action_descriptors(action) {
        let center = discretizer.quality_bin_center(descriptor.quality_bin);
        let mut best: Option<(usize, f64)> = None; // (index, key)
        for (i, item) in corpus.iter().enumerate() {
            if used[i] || !item.evaluated {
                continue;
            }
            if (item.topic == dominant_topic) != descriptor.on_dominant {
                continue;
            }
            let key = (item.score - center).abs();
            if best.map_or(true, |(_, bk)| key < bk) {
                best = Some((i, key));
            }
        }
        let (index, _) = best?;
        used[index] = true;
        slate.push(corpus[index].id);
    }
    Some(slate)
}

/// The flagship serving agent: expert-dataset lookup with a random fallback.
pub struct ExpertGuidedAgent<'a> {
    index: ClassifierIndex<'a>,
    discretizer: &'a Discretizer,
    classifier: ClassifierConfig,
    descriptor: DescriptorConfig,
    n_topics: usize,
    length_ref: f64,
    slate_size: usize,
}

impl<'a> ExpertGuidedAgent<'a> {
    pub fn new(
        records: &'a [ExpertStateRecord],
        discretizer: &'a Discretizer,
        cfg: &ExperimentConfig,
    ) -> Result<Self> {
        for r in records {
            if r.e_s.len() != cfg.domain.n_topics {
                return Err(Error::invalid(format!(
                    "dataset interest vectors have {} entries, domain has {} topics",
                    r.e_s.len(),
                    cfg.domain.n_topics
                )));
            }
            if r.e_c.len() != 3 * cfg.domain.corpus_size {
                return Err(Error::invalid(format!(
                    "dataset corpus embeddings have {} entries, expected {}",
                    r.e_c.len(),
                    3 * cfg.domain.corpus_size
                )));
            }
            if r.policy_action >= discretizer.n_actions() {
                return Err(Error::invalid(format!(
                    "dataset policy action {} outside the discretizer's {} actions",
                    r.policy_action,
                    discretizer.n_actions()
                )));
            }
        }
        Ok(ExpertGuidedAgent {
            index: ClassifierIndex::new(records)?,
            discretizer,
            classifier: cfg.classifier.clone(),
            descriptor: cfg.descriptor.clone(),
            n_topics: cfg.domain.n_topics,
            length_ref: cfg.domain.video_length,
            slate_size: cfg.domain.slate_size,
        })
    }
}

impl Agent for ExpertGuidedAgent<'_> {
    fn name(&self) -> &'static str {
        "expert"
    }

    fn recommend(&mut self, obs: &Observation<'_>, rng: &mut dyn RngCore) -> Recommendation {
        let matched = if obs.corpus.len() >= self.slate_size {
            let corpus_embedding =
                corpus_descriptor_items(obs.corpus, self.n_topics, self.length_ref, &self.descriptor);
            self.index
                .classify(obs.interests, &corpus_embedding, &self.classifier)
                .expect("dataset layout validated at construction")
        } else {
            None
        };
        let guided = matched.and_then(|index| {
            let record = &self.index.records()[index];
            let dominant = Topic(argmax(&record.e_s) as u16);
            let scored: Vec<ScoredItem> = obs.corpus.iter().map(CorpusItem::scored).collect();
            realize_action_evaluated(self.discretizer, record.policy_action, &scored, dominant)
        });
        match guided {
            Some(slate) => Recommendation {
                slate,
                expert_guided: true,
            },
            None => Recommendation {
                slate: random_slate(obs.corpus, self.slate_size, rng),
                expert_guided: false,
            },
        }
    }
}
