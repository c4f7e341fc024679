//! Finite abstraction of the recommendation session MDP.
//!
//! States summarize the most recent click as (topic, quality bin,
//! engagement bin); state 0 means no click has happened yet. Actions are
//! slates reduced to an unordered multiset of descriptors, each descriptor
//! recording whether the item sits on the profile's dominant topic and
//! which quality bin its platform score falls in.

use std::collections::HashMap;

use crate::domain::{platform_score, Topic, Video, VideoId};

/// Dense state index, 0..n_states.
pub type AbstractState = usize;
/// Dense action index, 0..n_actions.
pub type AbstractAction = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Descriptor {
    pub on_dominant: bool,
    pub quality_bin: usize,
}

#[derive(Debug, Clone)]
pub struct Discretizer {
    pub n_topics: usize,
    pub quality_bins: usize,
    pub engagement_bins: usize,
    pub slate_size: usize,
    actions: Vec<Vec<u8>>,
    action_index: HashMap<Vec<u8>, usize>,
}

impl Discretizer {
    pub fn new(n_topics: usize, quality_bins: usize, engagement_bins: usize, slate_size: usize) -> Self {
        assert!(n_topics > 0 && quality_bins > 0 && engagement_bins > 0 && slate_size > 0);
        let kinds = 2 * quality_bins;
        assert!(kinds <= u8::MAX as usize, "descriptor ids must fit in u8");
        let mut actions = Vec::new();
        let mut tuple = vec![0u8; slate_size];
        enumerate_multisets(kinds as u8, &mut tuple, 0, 0, &mut actions);
        let action_index = actions
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            n_topics,
            quality_bins,
            engagement_bins,
            slate_size,
            actions,
            action_index,
        }
    }

    pub fn n_states(&self) -> usize {
        1 + self.n_topics * self.quality_bins * self.engagement_bins
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub const NO_CLICK_STATE: AbstractState = 0;

    /// Bin for a quality score in [-1, 1]. Out-of-range inputs clamp to the
    /// edge bins.
    pub fn quality_bin(&self, quality: f64) -> usize {
        let scaled = (quality + 1.0) / 2.0 * self.quality_bins as f64;
        (scaled.floor() as i64).clamp(0, self.quality_bins as i64 - 1) as usize
    }

    /// Bin for an engagement rate in [0, 1].
    pub fn engagement_bin(&self, engagement: f64) -> usize {
        let scaled = engagement * self.engagement_bins as f64;
        (scaled.floor() as i64).clamp(0, self.engagement_bins as i64 - 1) as usize
    }

    /// Midpoint of a quality bin, back on the [-1, 1] scale.
    pub fn quality_bin_center(&self, bin: usize) -> f64 {
        debug_assert!(bin < self.quality_bins);
        -1.0 + (bin as f64 + 0.5) * 2.0 / self.quality_bins as f64
    }

    pub fn state_from_bins(&self, topic: Topic, quality_bin: usize, engagement_bin: usize) -> AbstractState {
        debug_assert!(topic.index() < self.n_topics);
        debug_assert!(quality_bin < self.quality_bins);
        debug_assert!(engagement_bin < self.engagement_bins);
        1 + (topic.index() * self.quality_bins + quality_bin) * self.engagement_bins + engagement_bin
    }

    /// State after a click on a `topic` video with observed quality and
    /// engagement rate.
    pub fn state_after_click(&self, topic: Topic, quality: f64, engagement: f64) -> AbstractState {
        self.state_from_bins(topic, self.quality_bin(quality), self.engagement_bin(engagement))
    }

    /// Inverse of `state_from_bins`; `None` for the no-click state.
    pub fn decode_state(&self, state: AbstractState) -> Option<(Topic, usize, usize)> {
        if state == Self::NO_CLICK_STATE {
            return None;
        }
        let raw = state - 1;
        debug_assert!(raw < self.n_states() - 1);
        let engagement_bin = raw % self.engagement_bins;
        let rest = raw / self.engagement_bins;
        let quality_bin = rest % self.quality_bins;
        let topic = rest / self.quality_bins;
        Some((Topic(topic as u16), quality_bin, engagement_bin))
    }

    pub fn descriptor_id(&self, d: Descriptor) -> usize {
        debug_assert!(d.quality_bin < self.quality_bins);
        usize::from(d.on_dominant) * self.quality_bins + d.quality_bin
    }

    pub fn decode_descriptor(&self, id: usize) -> Descriptor {
        debug_assert!(id < 2 * self.quality_bins);
        Descriptor {
            on_dominant: id >= self.quality_bins,
            quality_bin: id % self.quality_bins,
        }
    }

    pub fn describe_video(&self, video: &Video, dominant_topic: Topic) -> Descriptor {
        Descriptor {
            on_dominant: video.topic == dominant_topic,
            quality_bin: self.quality_bin(platform_score(video)),
        }
    }

    /// Action index of a multiset of descriptors (any order, must have
    /// exactly `slate_size` entries).
    pub fn action_from_descriptors(&self, descriptors: &[Descriptor]) -> AbstractAction {
        assert_eq!(descriptors.len(), self.slate_size);
        let mut ids: Vec<u8> = descriptors
            .iter()
            .map(|&d| self.descriptor_id(d) as u8)
            .collect();
        ids.sort_unstable();
        self.action_index[&ids]
    }

    /// Descriptors of an action, in sorted descriptor-id order.
    pub fn action_descriptors(&self, action: AbstractAction) -> Vec<Descriptor> {
        self.actions[action]
            .iter()
            .map(|&id| self.decode_descriptor(id as usize))
            .collect()
    }

    /// Abstract view of a concrete slate relative to a dominant topic.
    pub fn abstract_slate(&self, slate: &[&Video], dominant_topic: Topic) -> AbstractAction {
        let descriptors: Vec<Descriptor> = slate
            .iter()
            .map(|v| self.describe_video(v, dominant_topic))
            .collect();
        self.action_from_descriptors(&descriptors)
    }

    /// Picks concrete corpus videos for an abstract action. Per descriptor,
    /// in the action's sorted order, the best remaining candidate is:
    ///
    /// 1. topic matches, already evaluated, platform score in the target
    ///    bin; closest score to the bin center wins;
    /// 2. topic matches, platform score in the target bin (unevaluated);
    ///    closest to the bin center wins;
    /// 3. otherwise the highest remaining platform score in the corpus.
    ///
    /// Ties break toward the lowest corpus position. Panics if the corpus
    /// has fewer videos than the slate needs.
    pub fn realize_action(&self, action: AbstractAction, corpus: &[Video], dominant_topic: Topic) -> Vec<VideoId> {
        let items: Vec<ScoredItem> = corpus.iter().map(ScoredItem::from).collect();
        self.realize_action_scored(action, &items, dominant_topic)
    }

    /// `realize_action` over pre-extracted platform-visible facts; serving
    /// agents use this form since they never see full videos.
    pub fn realize_action_scored(
        &self,
        action: AbstractAction,
        corpus: &[ScoredItem],
        dominant_topic: Topic,
    ) -> Vec<VideoId> {
        assert!(corpus.len() >= self.slate_size, "corpus smaller than slate");
        let mut used = vec![false; corpus.len()];
        let mut slate = Vec::with_capacity(self.slate_size);
        for descriptor in self.action_descriptors(action) {
            let center = self.quality_bin_center(descriptor.quality_bin);
            let mut best: Option<(usize, usize, f64)> = None; // (tier, index, key)
            for (i, item) in corpus.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let topic_ok = (item.topic == dominant_topic) == descriptor.on_dominant;
                let in_bin = self.quality_bin(item.score) == descriptor.quality_bin;
                let (tier, key) = if topic_ok && in_bin && item.evaluated {
                    (0, (item.score - center).abs())
                } else if topic_ok && in_bin {
                    (1, (item.score - center).abs())
                } else {
                    (2, -item.score)
                };
                let better = match best {
                    None => true,
                    Some((bt, _, bk)) => tier < bt || (tier == bt && key < bk),
                };
                if better {
                    best = Some((tier, i, key));
                }
            }
            let (_, index, _) = best.expect("corpus exhausted");
            used[index] = true;
            slate.push(corpus[index].id);
        }
        slate
    }
}

/// Platform-visible facts about one candidate video: everything an agent is
/// allowed to rank on. Latent quality deliberately has no representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub id: VideoId,
    pub topic: Topic,
    /// Platform score: published quality if evaluated, appeal otherwise.
    pub score: f64,
    pub evaluated: bool,
}

impl From<&Video> for ScoredItem {
    fn from(v: &Video) -> Self {
        ScoredItem {
            id: v.id,
            topic: v.topic,
            score: platform_score(v),
            evaluated: v.evaluated,
        }
    }
}

fn enumerate_multisets(kinds: u8, tuple: &mut [u8], pos: usize, floor: u8, out: &mut Vec<Vec<u8>>) {
    if pos == tuple.len() {
        out.push(tuple.to_vec());
        return;
    }
    for kind in floor..kinds {
        tuple[pos] = kind;
        enumerate_multisets(kinds, tuple, pos + 1, kind, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_discretizer() -> Discretizer {
        Discretizer::new(8, 4, 2, 2)
    }

    fn video(id: u32, topic: u16, latent: f64, appeal: f64, evaluated: Option<f64>) -> Video {
        Video {
            id: VideoId(id),
            topic: Topic(topic),
            length: 4.0,
            latent_quality: latent,
            appeal,
            evaluated: evaluated.is_some(),
            evaluated_quality: evaluated,
        }
    }

    #[test]
    fn state_counts_match_dimensions() {
        let d = paper_discretizer();
        assert_eq!(d.n_states(), 65);
        assert_eq!(d.n_actions(), 36);
    }

    #[test]
    fn click_on_topic_three_maps_to_state_32() {
        let d = paper_discretizer();
        assert_eq!(d.state_after_click(Topic(3), 0.6, 0.9), 32);
    }

    #[test]
    fn quality_bins_partition_the_range() {
        let d = paper_discretizer();
        assert_eq!(d.quality_bin(-1.0), 0);
        assert_eq!(d.quality_bin(-0.51), 0);
        assert_eq!(d.quality_bin(-0.49), 1);
        assert_eq!(d.quality_bin(0.0), 2);
        assert_eq!(d.quality_bin(0.49), 2);
        assert_eq!(d.quality_bin(0.51), 3);
        assert_eq!(d.quality_bin(1.0), 3);
        assert_eq!(d.quality_bin(1.7), 3);
        assert_eq!(d.quality_bin(-2.0), 0);
    }

    #[test]
    fn engagement_bins_partition_the_range() {
        let d = paper_discretizer();
        assert_eq!(d.engagement_bin(0.0), 0);
        assert_eq!(d.engagement_bin(0.49), 0);
        assert_eq!(d.engagement_bin(0.51), 1);
        assert_eq!(d.engagement_bin(1.0), 1);
    }

    #[test]
    fn bin_centers_sit_at_midpoints() {
        let d = paper_discretizer();
        assert!((d.quality_bin_center(0) - (-0.75)).abs() < 1e-12);
        assert!((d.quality_bin_center(1) - (-0.25)).abs() < 1e-12);
        assert!((d.quality_bin_center(2) - 0.25).abs() < 1e-12);
        assert!((d.quality_bin_center(3) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn state_encoding_is_a_bijection() {
        let d = paper_discretizer();
        let mut seen = vec![false; d.n_states()];
        seen[Discretizer::NO_CLICK_STATE] = true;
        assert_eq!(d.decode_state(Discretizer::NO_CLICK_STATE), None);
        for topic in 0..8u16 {
            for qb in 0..4 {
                for eb in 0..2 {
                    let s = d.state_from_bins(Topic(topic), qb, eb);
                    assert!(!seen[s], "state {s} hit twice");
                    seen[s] = true;
                    assert_eq!(d.decode_state(s), Some((Topic(topic), qb, eb)));
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn action_encoding_is_a_bijection() {
        let d = paper_discretizer();
        for action in 0..d.n_actions() {
            let descriptors = d.action_descriptors(action);
            assert_eq!(descriptors.len(), 2);
            assert_eq!(d.action_from_descriptors(&descriptors), action);
            // Order of the input multiset must not matter.
            let reversed: Vec<Descriptor> = descriptors.iter().rev().copied().collect();
            assert_eq!(d.action_from_descriptors(&reversed), action);
        }
    }

    #[test]
    fn greedy_descriptor_pair_is_the_last_action() {
        let d = paper_discretizer();
        let top = Descriptor { on_dominant: true, quality_bin: 3 };
        assert_eq!(d.action_from_descriptors(&[top, top]), d.n_actions() - 1);
    }

    #[test]
    fn abstract_slate_reads_platform_scores() {
        let d = paper_discretizer();
        // Evaluated video: bin from evaluated quality. Unevaluated: from
        // appeal, never from the latent quality.
        let a = video(0, 3, -0.9, 0.2, Some(0.8));
        let b = video(1, 5, 0.9, -0.6, None);
        let action = d.abstract_slate(&[&a, &b], Topic(3));
        let expect = d.action_from_descriptors(&[
            Descriptor { on_dominant: true, quality_bin: 3 },
            Descriptor { on_dominant: false, quality_bin: 0 },
        ]);
        assert_eq!(action, expect);
    }

    #[test]
    fn realize_prefers_evaluated_in_bin_videos() {
        let d = paper_discretizer();
        let corpus = vec![
            video(10, 3, 0.0, 0.8, None),       // unevaluated, in bin 3 by appeal
            video(11, 3, 0.0, 0.1, Some(0.7)),  // evaluated, in bin 3
            video(12, 3, 0.0, 0.9, None),       // unevaluated, in bin 3, higher appeal
        ];
        let action = d.action_from_descriptors(&[
            Descriptor { on_dominant: true, quality_bin: 3 },
            Descriptor { on_dominant: true, quality_bin: 3 },
        ]);
        let slate = d.realize_action(action, &corpus, Topic(3));
        // Evaluated video first despite lower score, then the unevaluated
        // one closest to the bin center (0.75).
        assert_eq!(slate, vec![VideoId(11), VideoId(10)]);
    }

    #[test]
    fn realize_falls_back_to_highest_platform_score() {
        let d = paper_discretizer();
        let corpus = vec![
            video(20, 1, 0.0, -0.2, None),
            video(21, 1, 0.0, 0.3, None),
            video(22, 2, 0.0, 0.6, None),
        ];
        // Asks for dominant-topic bin-3 videos; none exist on topic 5.
        let action = d.action_from_descriptors(&[
            Descriptor { on_dominant: true, quality_bin: 3 },
            Descriptor { on_dominant: true, quality_bin: 3 },
        ]);
        let slate = d.realize_action(action, &corpus, Topic(5));
        assert_eq!(slate, vec![VideoId(22), VideoId(21)]);
    }

    #[test]
    fn realize_never_repeats_a_video() {
        let d = paper_discretizer();
        let corpus = vec![
            video(30, 3, 0.0, 0.8, Some(0.8)),
            video(31, 3, 0.0, 0.79, None),
        ];
        let action = d.action_from_descriptors(&[
            Descriptor { on_dominant: true, quality_bin: 3 },
            Descriptor { on_dominant: true, quality_bin: 3 },
        ]);
        let slate = d.realize_action(action, &corpus, Topic(3));
        assert_eq!(slate.len(), 2);
        assert_ne!(slate[0], slate[1]);
    }

    proptest! {
        #[test]
        fn all_states_round_trip(topic in 0u16..8, qb in 0usize..4, eb in 0usize..2) {
            let d = paper_discretizer();
            let s = d.state_from_bins(Topic(topic), qb, eb);
            prop_assert!(s > 0 && s < d.n_states());
            prop_assert_eq!(d.decode_state(s), Some((Topic(topic), qb, eb)));
        }

        #[test]
        fn every_slate_maps_to_a_valid_action(
            topics in proptest::collection::vec(0u16..8, 2),
            scores in proptest::collection::vec(-1.0f64..1.0, 2),
        ) {
            let d = paper_discretizer();
            let videos: Vec<Video> = topics
                .iter()
                .zip(&scores)
                .enumerate()
                .map(|(i, (&t, &s))| video(i as u32, t, 0.0, s, None))
                .collect();
            let refs: Vec<&Video> = videos.iter().collect();
            let action = d.abstract_slate(&refs, Topic(0));
            prop_assert!(action < d.n_actions());
        }

        #[test]
        fn realized_slates_have_distinct_members(
            action in 0usize..36,
            appeals in proptest::collection::vec(-1.0f64..1.0, 5),
            topics in proptest::collection::vec(0u16..8, 5),
        ) {
            let d = paper_discretizer();
            let corpus: Vec<Video> = appeals
                .iter()
                .zip(&topics)
                .enumerate()
                .map(|(i, (&a, &t))| video(i as u32, t, 0.0, a, None))
                .collect();
            let slate = d.realize_action(action, &corpus, Topic(topics[0]));
            prop_assert_eq!(slate.len(), 2);
            prop_assert_ne!(slate[0], slate[1]);
        }
    }
}
