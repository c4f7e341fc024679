//! The serving-side user environment: noisy-archetype user profiles, the
//! platform-visible observation handed to agents, click/watch/drift/budget
//! dynamics, and full-session simulation against any recommendation agent.
//!
//! Visibility rule: agents see `CorpusItem` (no latent quality field). The
//! environment itself resolves videos against the real catalog, because the
//! simulated viewer does perceive true quality once they watch.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::choice::{choice_probabilities, sample_choice};
use crate::config::{DomainConfig, UserConfig};
use crate::domain::{clamp_unit, sample_corpus, video_score, Response, Slate, Topic, Video, VideoId};
use crate::error::{Error, Result};
use crate::expert_env::archetype_interests;
use crate::io_util::{CsvWriter, OptF64, OptU32, F64};
use crate::irl::abstraction::ScoredItem;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    /// Interest per topic, in [-1,1]; drifts during a session.
    pub interests: Vec<f64>,
    /// Remaining session time budget in minutes.
    pub time_budget: f64,
    /// Interest drift step applied toward (or away from) a watched topic.
    pub interest_step: f64,
    /// Weight of experienced video quality in watch time (lambda).
    pub quality_sensitivity: f64,
}

/// Users are noisy copies of the expert interest archetypes (that overlap is
/// what interest-distance matching exploits), with a configured fraction of
/// uniform-interest users mixed in. Profiles depend only on (seed, index),
/// never on the agent arm, so arms see bit-identical user sequences.
pub fn generate_user_profiles(
    domain: &DomainConfig,
    cfg: &UserConfig,
    n_archetypes: usize,
    seed: u64,
    count: usize,
) -> Vec<UserProfile> {
    assert!(n_archetypes > 0, "need at least one archetype");
    (0..count)
        .map(|i| {
            let mut rng = rng::stream(seed, rng::STREAM_USER_PROFILE, i as u64);
            let interests = if rng.gen::<f64>() < cfg.uniform_user_fraction {
                (0..domain.n_topics).map(|_| rng.gen_range(-1.0..1.0)).collect()
            } else {
                let archetype = rng.gen_range(0..n_archetypes);
                archetype_interests(archetype, domain.n_topics)
                    .into_iter()
                    .map(|x| clamp_unit(x + rng.gen_range(-cfg.archetype_noise..=cfg.archetype_noise)))
                    .collect()
            };
            UserProfile {
                interests,
                time_budget: cfg.time_budget,
                interest_step: cfg.interest_step,
                quality_sensitivity: cfg.quality_sensitivity,
            }
        })
        .collect()
}

/// Order-sensitive fingerprint of a profile sequence; the harness asserts it
/// is identical across arms (paired seeding).
pub fn profile_fingerprint(profiles: &[UserProfile]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |bits: u64| {
        hash ^= bits;
        hash = hash.wrapping_mul(0x100000001b3);
    };
    for p in profiles {
        for &x in &p.interests {
            eat(x.to_bits());
        }
        eat(p.time_budget.to_bits());
        eat(p.interest_step.to_bits());
        eat(p.quality_sensitivity.to_bits());
    }
    hash
}

/// Platform-visible facts about one candidate video. Latent quality has no
/// field here by design: this is the entire interface agents rank on.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: VideoId,
    pub topic: Topic,
    pub length: f64,
    pub appeal: f64,
    pub evaluated_quality: Option<f64>,
}

impl CorpusItem {
    pub fn from_video(v: &Video) -> Self {
        CorpusItem {
            id: v.id,
            topic: v.topic,
            length: v.length,
            appeal: v.appeal,
            evaluated_quality: v.evaluated_quality.filter(|_| v.evaluated),
        }
    }

    /// Published quality when evaluated, appeal otherwise.
    pub fn platform_score(&self) -> f64 {
        self.evaluated_quality.unwrap_or(self.appeal)
    }

    pub fn scored(&self) -> ScoredItem {
        ScoredItem {
            id: self.id,
            topic: self.topic,
            score: self.platform_score(),
            evaluated: self.evaluated_quality.is_some(),
        }
    }
}

/// What an agent sees when asked for a slate.
#[derive(Debug)]
pub struct Observation<'a> {
    /// The platform's model of the current user's interests.
    pub interests: &'a [f64],
    /// The retrieved candidate corpus.
    pub corpus: &'a [CorpusItem],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub slate: Vec<VideoId>,
    /// True when the slate realizes a matched expert policy action.
    pub expert_guided: bool,
}

/// Post-step feedback the environment reports back to the agent: the
/// platform-observable outcome plus the environment's quality signal q(s_t)
/// (the engagement-quality reward the tabular baseline trains on).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeedback {
    pub clicked: Option<VideoId>,
    pub clicked_topic: Option<Topic>,
    pub watch_time: f64,
    /// Watch time over length; 0 when nothing was clicked.
    pub engagement_rate: f64,
    /// q(s_t): experienced quality of the clicked video, 0 on no-click.
    pub quality: f64,
}

pub trait Agent {
    /// Short name used in reports and file names.
    fn name(&self) -> &'static str;

    fn recommend(&mut self, obs: &Observation<'_>, rng: &mut dyn RngCore) -> Recommendation;

    /// Called once per step after the user responds. Learning agents update
    /// here; stateless agents keep the default no-op.
    fn observe(&mut self, _feedback: &StepFeedback) {}

    /// Called before each session. Learning agents reset per-session state
    /// here (not their learned tables).
    fn begin_session(&mut self) {}
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Click weight per slate item: exp(beta_u * interest + lambda * appeal).
/// Appeal, not quality: pre-watch the viewer only sees presentation. True
/// quality enters after the click, through watch time and drift.
pub fn user_utilities(slate: &[&Video], profile: &UserProfile, cfg: &UserConfig) -> Vec<f64> {
    slate
        .iter()
        .map(|v| {
            (cfg.beta_interest * profile.interests[v.topic.index()]
                + profile.quality_sensitivity * v.appeal)
                .exp()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub response: Response,
    /// q(s_t): experienced quality of the clicked video, 0.0 on no-click.
    pub quality: f64,
}

/// One user step: conditional-logit choice over the slate plus no-click,
/// then watch/drift/budget updates.
///
/// On a click with experienced quality s = video_score:
///   watch_time = length * sigmoid(2 * (interest + lambda * s))
///   interest[topic] += interest_step * sign(s)   (clamped to [-1,1])
///   budget += bonus * max(s, 0) * watch_time - watch_time - browse_cost
/// On no-click the budget drops by browse_cost only.
pub fn step(
    profile: &mut UserProfile,
    slate: &[&Video],
    cfg: &UserConfig,
    rng: &mut dyn RngCore,
) -> Result<StepOutcome> {
    if profile.time_budget <= 0.0 {
        return Err(Error::invalid("session budget exhausted"));
    }
    let utilities = user_utilities(slate, profile, cfg);
    let probabilities = choice_probabilities(&utilities, cfg.no_click_mass)?;
    match sample_choice(&probabilities, rng)? {
        Some(j) => {
            let v = slate[j];
            let score = video_score(v);
            let interest = profile.interests[v.topic.index()];
            let watch_time =
                v.length * sigmoid(2.0 * (interest + profile.quality_sensitivity * score));
            let engagement_rate = if v.length > 0.0 { watch_time / v.length } else { 0.0 };
            let drift = if score > 0.0 {
                profile.interest_step
            } else if score < 0.0 {
                -profile.interest_step
            } else {
                0.0
            };
            profile.interests[v.topic.index()] = clamp_unit(interest + drift);
            profile.time_budget +=
                cfg.budget_bonus * score.max(0.0) * watch_time - watch_time - cfg.browse_cost;
            Ok(StepOutcome {
                response: Response {
                    clicked: Some(v.id),
                    watch_time,
                    engagement_rate,
                    evaluation: None,
                    observed_quality: score,
                },
                quality: score,
            })
        }
        None => {
            profile.time_budget -= cfg.browse_cost;
            Ok(StepOutcome {
                response: Response::no_click(),
                quality: 0.0,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionStep {
    pub corpus: Vec<CorpusItem>,
    pub slate: Slate,
    pub expert_guided: bool,
    pub response: Response,
    /// q(s_t) of this step, 0.0 on no-click.
    pub quality: f64,
    pub budget_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    BudgetExhausted,
    /// Hit the hard safety cap; unreachable under default dynamics, which
    /// shrink the budget every step.
    SafetyCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub steps: Vec<SessionStep>,
    pub terminal: TerminalReason,
}

impl SessionLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_watch_time(&self) -> f64 {
        self.steps.iter().map(|s| s.response.watch_time).sum()
    }
}

const SESSION_SAFETY_CAP: usize = 100_000;

/// Simulates one full session: retrieve corpus, ask the agent, resolve the
/// user's response, feed the outcome back to the agent, repeat until the
/// budget runs out. An empty slate is legal and simply never gets clicked.
///
/// The environment and the agent draw from separate rng streams so that
/// agent-side randomness (exploration, random fallbacks) never desyncs the
/// user-side draw sequence paired across comparison arms.
pub fn run_user_session(
    mut profile: UserProfile,
    agent: &mut dyn Agent,
    catalog: &[Video],
    domain: &DomainConfig,
    cfg: &UserConfig,
    env_rng: &mut dyn RngCore,
    agent_rng: &mut dyn RngCore,
    scratch: &mut Vec<(f64, u32)>,
) -> Result<SessionLog> {
    agent.begin_session();
    let mut steps = Vec::new();
    let mut terminal = TerminalReason::BudgetExhausted;
    while profile.time_budget > 0.0 {
        if steps.len() >= SESSION_SAFETY_CAP {
            terminal = TerminalReason::SafetyCap;
            break;
        }
        let corpus_indices = sample_corpus(
            catalog,
            &profile.interests,
            domain.corpus_size,
            domain.corpus_noise,
            env_rng,
            scratch,
        )?;
        let corpus: Vec<CorpusItem> = corpus_indices
            .iter()
            .map(|&i| CorpusItem::from_video(&catalog[i]))
            .collect();
        let recommendation = agent.recommend(
            &Observation {
                interests: &profile.interests,
                corpus: &corpus,
            },
            agent_rng,
        );
        let slate_videos: Vec<&Video> = recommendation
            .slate
            .iter()
            .map(|id| {
                catalog
                    .get(id.index())
                    .ok_or_else(|| Error::invalid(format!("slate video {} not in catalog", id.0)))
            })
            .collect::<Result<_>>()?;
        let outcome = step(&mut profile, &slate_videos, cfg, env_rng)?;
        let clicked_topic = outcome
            .response
            .clicked
            .map(|id| catalog[id.index()].topic);
        agent.observe(&StepFeedback {
            clicked: outcome.response.clicked,
            clicked_topic,
            watch_time: outcome.response.watch_time,
            engagement_rate: outcome.response.engagement_rate,
            quality: outcome.quality,
        });
        steps.push(SessionStep {
            corpus,
            slate: Slate::new(recommendation.slate),
            expert_guided: recommendation.expert_guided,
            response: outcome.response,
            quality: outcome.quality,
            budget_after: profile.time_budget,
        });
    }
    Ok(SessionLog { steps, terminal })
}

pub const SESSION_HEADER: &str =
    "session_id,step,expert_guided,clicked,topic,score,watch_time,budget_after";

/// Writes one arm's session logs as flat per-step rows.
pub fn save_session_logs(path: &Path, logs: &[SessionLog], comment: &str) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(comment), SESSION_HEADER)?;
    for (session_id, log) in logs.iter().enumerate() {
        for (step, s) in log.steps.iter().enumerate() {
            let clicked = s.response.clicked.map(|id| id.0);
            let topic = s.response.clicked.map(|id| {
                // The clicked video is on the slate, whose items came from
                // the corpus snapshot.
                u32::from(
                    s.corpus
                        .iter()
                        .find(|c| c.id.0 == id.0)
                        .map(|c| c.topic.0)
                        .unwrap_or(0),
                )
            });
            let score = s.response.clicked.map(|_| s.quality);
            w.row(&[
                &session_id,
                &step,
                &u8::from(s.expert_guided),
                &OptU32(clicked),
                &OptU32(topic),
                &OptF64(score),
                &F64(s.response.watch_time),
                &F64(s.budget_after),
            ])?;
        }
    }
    w.finish()
}
