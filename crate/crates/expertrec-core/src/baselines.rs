//! The four comparison agents: tabular Q-learning over the abstract MDP,
//! myopic click-probability ranking, a UCB1 topic bandit, and a naive
//! high-rating sampler. All of them see exactly the same observation
//! interface as the flagship agent.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::config::{BaselineConfig, UserConfig};
use crate::domain::{Topic, Video, VideoId};
use crate::irl::abstraction::{Discretizer, ScoredItem};
use crate::irl::value_iteration::{argmax, QTable};
use crate::recommender::random_slate;
use crate::user_env::{Agent, CorpusItem, Observation, Recommendation, StepFeedback};

/// One tabular Q-learning backup.
pub fn q_learning_update(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    learning_rate: f64,
    gamma: f64,
) {
    let next_best = q
        .row(next_state)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let old = q.get(state, action);
    q.set(
        state,
        action,
        old + learning_rate * (reward + gamma * next_best - old),
    );
}

/// Epsilon-greedy tabular Q-learning over the abstract state/action space,
/// rewarded with watch time plus eta times experienced quality. The learned
/// table persists across sessions; per-session state resets.
pub struct FsqAgent<'a> {
    discretizer: &'a Discretizer,
    q: QTable,
    learning_rate: f64,
    epsilon: f64,
    epsilon_decay: f64,
    eta: f64,
    gamma: f64,
    state: usize,
    last_action: Option<usize>,
}

impl<'a> FsqAgent<'a> {
    pub fn new(discretizer: &'a Discretizer, cfg: &BaselineConfig, gamma: f64) -> Self {
        FsqAgent {
            discretizer,
            q: QTable::zeros(discretizer.n_states(), discretizer.n_actions()),
            learning_rate: cfg.fsq_learning_rate,
            epsilon: cfg.fsq_epsilon,
            epsilon_decay: cfg.fsq_epsilon_decay,
            eta: cfg.fsq_eta,
            gamma,
            state: Discretizer::NO_CLICK_STATE,
            last_action: None,
        }
    }

    pub fn q_table(&self) -> &QTable {
        &self.q
    }

    /// Dominant topic for realizing abstract actions: the topic component of
    /// the current abstract state, topic 0 before any click.
    fn dominant_topic(&self) -> Topic {
        self.discretizer
            .decode_state(self.state)
            .map(|(topic, _, _)| topic)
            .unwrap_or(Topic(0))
    }
}

impl Agent for FsqAgent<'_> {
    fn name(&self) -> &'static str {
        "fsq"
    }

    fn begin_session(&mut self) {
        self.state = Discretizer::NO_CLICK_STATE;
        self.last_action = None;
    }

    fn recommend(&mut self, obs: &Observation<'_>, rng: &mut dyn RngCore) -> Recommendation {
        let action = if rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..self.discretizer.n_actions())
        } else {
            self.q.greedy_action(self.state)
        };
        self.last_action = Some(action);
        let scored: Vec<ScoredItem> = obs.corpus.iter().map(CorpusItem::scored).collect();
        Recommendation {
            slate: self
                .discretizer
                .realize_action_scored(action, &scored, self.dominant_topic()),
            expert_guided: false,
        }
    }

    fn observe(&mut self, feedback: &StepFeedback) {
        let next_state = match feedback.clicked_topic {
            Some(topic) => self.discretizer.state_after_click(
                topic,
                feedback.quality,
                feedback.engagement_rate,
            ),
            None => self.state,
        };
        if let Some(action) = self.last_action.take() {
            let reward = feedback.watch_time + self.eta * feedback.quality;
            q_learning_update(
                &mut self.q,
                self.state,
                action,
                reward,
                next_state,
                self.learning_rate,
                self.gamma,
            );
            self.epsilon *= self.epsilon_decay;
        }
        self.state = next_state;
    }
}

/// Myopic ranker with oracle access to the user's click model: the top-k
/// corpus items by pre-click utility, lowest video id on ties.
#[derive(Clone)]
pub struct PctrAgent {
    beta_interest: f64,
    quality_sensitivity: f64,
    slate_size: usize,
}

impl PctrAgent {
    pub fn new(user: &UserConfig, slate_size: usize) -> Self {
        PctrAgent {
            beta_interest: user.beta_interest,
            quality_sensitivity: user.quality_sensitivity,
            slate_size,
        }
    }
}

impl Agent for PctrAgent {
    fn name(&self) -> &'static str {
        "pctr"
    }

    fn recommend(&mut self, obs: &Observation<'_>, _rng: &mut dyn RngCore) -> Recommendation {
        let mut order: Vec<usize> = (0..obs.corpus.len()).collect();
        let utility = |c: &CorpusItem| {
            (self.beta_interest * obs.interests[c.topic.index()]
                + self.quality_sensitivity * c.appeal)
                .exp()
        };
        order.sort_by(|&a, &b| {
            utility(&obs.corpus[b])
                .total_cmp(&utility(&obs.corpus[a]))
                .then(obs.corpus[a].id.0.cmp(&obs.corpus[b].id.0))
        });
        Recommendation {
            slate: order
                .into_iter()
                .take(self.slate_size)
                .map(|i| obs.corpus[i].id)
                .collect(),
            expert_guided: false,
        }
    }
}

/// UCB1 over topics, persisted across sessions. The slate is the corpus
/// top-k by platform score within the chosen topic, padded with the best
/// remaining items when the topic is underrepresented.
pub struct BanditAgent {
    counts: Vec<u64>,
    sums: Vec<f64>,
    exploration: f64,
    slate_size: usize,
    last_topic: Option<usize>,
}

impl BanditAgent {
    pub fn new(n_topics: usize, cfg: &BaselineConfig, slate_size: usize) -> Self {
        BanditAgent {
            counts: vec![0; n_topics],
            sums: vec![0.0; n_topics],
            exploration: cfg.bandit_exploration,
            slate_size,
            last_topic: None,
        }
    }

    /// UCB1 arm choice: any unpulled topic first (lowest id), otherwise the
    /// highest upper confidence bound, lowest id on ties.
    pub fn choose_topic(&self) -> usize {
        if let Some(unpulled) = self.counts.iter().position(|&c| c == 0) {
            return unpulled;
        }
        let total: u64 = self.counts.iter().sum();
        let scores: Vec<f64> = self
            .counts
            .iter()
            .zip(&self.sums)
            .map(|(&n, &s)| {
                s / n as f64 + self.exploration * ((total as f64).ln() / n as f64).sqrt()
            })
            .collect();
        argmax(&scores)
    }

    pub fn pulls(&self) -> &[u64] {
        &self.counts
    }
}

impl Agent for BanditAgent {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn recommend(&mut self, obs: &Observation<'_>, _rng: &mut dyn RngCore) -> Recommendation {
        let topic = self.choose_topic();
        self.last_topic = Some(topic);
        let mut order: Vec<usize> = (0..obs.corpus.len()).collect();
        // On-topic items first, then by platform score, then stable by id.
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&obs.corpus[a], &obs.corpus[b]);
            let on_a = ca.topic.index() == topic;
            let on_b = cb.topic.index() == topic;
            on_b.cmp(&on_a)
                .then(cb.platform_score().total_cmp(&ca.platform_score()))
                .then(ca.id.0.cmp(&cb.id.0))
        });
        Recommendation {
            slate: order
                .into_iter()
                .take(self.slate_size)
                .map(|i| obs.corpus[i].id)
                .collect(),
            expert_guided: false,
        }
    }

    fn observe(&mut self, feedback: &StepFeedback) {
        if let Some(topic) = self.last_topic.take() {
            self.counts[topic] += 1;
            self.sums[topic] += feedback.engagement_rate;
        }
    }
}

/// Serves random highly-rated on-interest videos: candidates are corpus
/// members of the precomputed high-rating pool whose topic the user likes;
/// if fewer than a slate's worth qualify, the whole slate is a uniform
/// random corpus sample.
#[derive(Clone)]
pub struct NaiveAgent {
    /// Catalog videos with published quality above the threshold.
    pool: Vec<bool>,
    slate_size: usize,
}

impl NaiveAgent {
    pub fn new(catalog: &[Video], cfg: &BaselineConfig, slate_size: usize) -> Self {
        let pool = catalog
            .iter()
            .map(|v| v.evaluated && v.evaluated_quality.is_some_and(|q| q > cfg.naive_threshold))
            .collect();
        NaiveAgent { pool, slate_size }
    }

    pub fn pool_size(&self) -> usize {
        self.pool.iter().filter(|&&x| x).count()
    }
}

impl Agent for NaiveAgent {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn recommend(&mut self, obs: &Observation<'_>, rng: &mut dyn RngCore) -> Recommendation {
        let qualifying: Vec<VideoId> = obs
            .corpus
            .iter()
            .filter(|c| {
                self.pool.get(c.id.index()).copied().unwrap_or(false)
                    && obs.interests[c.topic.index()] > 0.0
            })
            .map(|c| c.id)
            .collect();
        let slate = if qualifying.len() >= self.slate_size {
            sample(rng, qualifying.len(), self.slate_size)
                .into_iter()
                .map(|i| qualifying[i])
                .collect()
        } else {
            random_slate(obs.corpus, self.slate_size, rng)
        };
        Recommendation {
            slate,
            expert_guided: false,
        }
    }
}
