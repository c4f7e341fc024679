//! Expert-side simulation: archetypal profiles, video evaluation, budgeted
//! consumption sessions, and demonstration generation.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::RngCore;
use rand_distr::{Distribution, Normal};

use crate::choice::{choice_probabilities, sample_choice};
use crate::config::{DomainConfig, ExpertConfig};
use crate::domain::{
    clamp_unit, sample_corpus, EvaluationFeatures, Response, Slate, Topic, Video, VideoId,
};
use crate::error::{Error, Result};
use crate::io_util::{fmt_f64, read_csv, CsvWriter, OptF64, OptU32, Row, F64};
use crate::irl::abstraction::Discretizer;
use crate::irl::value_iteration::{argmax, Policy};
use crate::irl::AbstractTrajectory;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertProfile {
    pub id: usize,
    /// Interest per topic, in [-1,1].
    pub interests: Vec<f64>,
    /// Topics the expert is credentialed in; nonempty.
    pub expertise_topics: Vec<Topic>,
    /// f in [0,1]: how strongly this expert's judgment moves a video's
    /// published quality, and how precise her feature readings are.
    pub quality_factor: f64,
    /// Session time budget in minutes.
    pub session_budget: f64,
}

impl ExpertProfile {
    pub fn dominant_topic(&self) -> Topic {
        Topic(argmax(&self.interests) as u16)
    }
}

/// Interest archetype i: one dominant topic (i mod n_topics) at 0.9, the
/// next topic mildly liked at 0.3, everything else disliked at -0.5.
/// Users are later drawn as noisy copies of these same vectors, which is
/// what makes interest-distance matching meaningful.
pub fn archetype_interests(index: usize, n_topics: usize) -> Vec<f64> {
    let mut interests = vec![-0.5; n_topics];
    let dominant = index % n_topics;
    interests[dominant] = 0.9;
    if n_topics > 1 {
        interests[(dominant + 1) % n_topics] = 0.3;
    }
    interests
}

pub fn generate_expert_profiles(
    domain: &DomainConfig,
    expert: &ExpertConfig,
    seed: u64,
) -> Vec<ExpertProfile> {
    (0..expert.n_experts)
        .map(|id| {
            let mut rng = rng::stream(seed, rng::STREAM_EXPERT_PROFILE, id as u64);
            let interests = archetype_interests(id, domain.n_topics);
            let dominant = Topic((id % domain.n_topics) as u16);
            let quality_factor =
                rng.gen_range(expert.min_quality_factor..=expert.max_quality_factor);
            ExpertProfile {
                id,
                interests,
                expertise_topics: vec![dominant],
                quality_factor,
                session_budget: expert.session_budget,
            }
        })
        .collect()
}

/// Publishes an evaluation: the four feature readings average to s_v, and
/// the published quality moves from the latent one by s_v * f, clamped.
pub fn apply_evaluation(video: &Video, features: &EvaluationFeatures, quality_factor: f64) -> Video {
    let s_v = features.mean();
    let mut updated = video.clone();
    updated.evaluated = true;
    updated.evaluated_quality = Some(clamp_unit(
        video.latent_quality + s_v * quality_factor,
    ));
    updated
}

/// Samples the expert's four feature readings around the latent quality
/// with noise sigma_eval * (1 - f) per axis, then publishes the update.
/// Re-evaluating simply overwrites the previous published value.
pub fn evaluate_video(
    video: &Video,
    profile: &ExpertProfile,
    sigma_eval: f64,
    rng: &mut dyn RngCore,
) -> Result<(EvaluationFeatures, Video)> {
    let sd = sigma_eval * (1.0 - profile.quality_factor);
    if sd < 0.0 || !sd.is_finite() {
        return Err(Error::invalid("evaluation noise must be finite and non-negative"));
    }
    let normal =
        Normal::new(0.0, sd).map_err(|e| Error::invalid(format!("evaluation noise: {e}")))?;
    let mut rng = rng;
    let mut reading = || clamp_unit(video.latent_quality + normal.sample(&mut rng));
    let features = EvaluationFeatures {
        pedagogy: reading(),
        accuracy: reading(),
        importance: reading(),
        entertainment: reading(),
    };
    let updated = apply_evaluation(video, &features, profile.quality_factor);
    Ok((features, updated))
}

/// Click weight per slate item: exp(beta_q * latent + beta_t * interest +
/// beta_e * on-expertise). Experts judge real quality from titles and
/// descriptions; this is the one place latent quality enters a choice.
pub fn expert_utilities(slate: &[&Video], profile: &ExpertProfile, cfg: &ExpertConfig) -> Vec<f64> {
    slate
        .iter()
        .map(|v| {
            let on_expertise = profile.expertise_topics.contains(&v.topic);
            (cfg.beta_quality * v.latent_quality
                + cfg.beta_topic * profile.interests[v.topic.index()]
                + cfg.beta_expertise * f64::from(on_expertise))
            .exp()
        })
        .collect()
}

/// Hand-coded preference of the demonstrating expert for an abstract
/// action: descriptors on the dominant topic and in high quality bins are
/// worth more.
pub fn behavior_action_utility(
    discretizer: &Discretizer,
    action: usize,
    cfg: &ExpertConfig,
) -> f64 {
    discretizer
        .action_descriptors(action)
        .iter()
        .map(|d| {
            cfg.behavior_quality_weight * discretizer.quality_bin_center(d.quality_bin)
                + cfg.behavior_topic_weight * f64::from(d.on_dominant)
        })
        .sum()
}

/// The demonstration policy: state-independent epsilon-soft greedy over
/// `behavior_action_utility`. Near-optimal but stochastic, so the
/// demonstrations are imperfect in a controlled way.
pub fn behavior_policy(discretizer: &Discretizer, cfg: &ExpertConfig) -> Policy {
    let utilities: Vec<f64> = (0..discretizer.n_actions())
        .map(|a| behavior_action_utility(discretizer, a, cfg))
        .collect();
    let greedy = argmax(&utilities);
    let n = discretizer.n_actions();
    let mut row = vec![cfg.behavior_epsilon / n as f64; n];
    row[greedy] += 1.0 - cfg.behavior_epsilon;
    Policy::stationary(discretizer.n_states(), &row).expect("epsilon-soft row is stochastic")
}

/// One step of an expert session: everything logged about it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Expert interest snapshot (static across a session, logged per step).
    pub interests: Vec<f64>,
    /// Corpus snapshot the slate was drawn from.
    pub corpus: Vec<Video>,
    pub slate: Slate,
    pub response: Response,
    /// Abstract state *before* the action.
    pub abstract_state: usize,
    pub abstract_action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub expert_id: usize,
    pub steps: Vec<TrajectoryStep>,
    /// Abstract state after the final step.
    pub end_state: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn abstract_seq(&self) -> AbstractTrajectory {
        AbstractTrajectory::new(
            self.steps.iter().map(|s| s.abstract_state).collect(),
            self.steps.iter().map(|s| s.abstract_action).collect(),
            self.end_state,
        )
    }
}

/// Runs one budgeted session. The first step always runs (a zero-budget
/// session still produces one step); afterwards the session ends when the
/// budget is spent or `max_steps` is reached. Clicked videos are watched
/// to completion, evaluated, and the evaluation is published into the
/// catalog immediately.
#[allow(clippy::too_many_arguments)]
pub fn run_expert_session(
    profile: &ExpertProfile,
    catalog: &mut [Video],
    behavior: &Policy,
    discretizer: &Discretizer,
    domain: &DomainConfig,
    cfg: &ExpertConfig,
    rng: &mut dyn RngCore,
    scratch: &mut Vec<(f64, u32)>,
) -> Result<Trajectory> {
    if catalog.is_empty() {
        return Err(Error::invalid("catalog must be nonempty"));
    }
    let dominant = profile.dominant_topic();
    let mut budget = profile.session_budget;
    let mut state = Discretizer::NO_CLICK_STATE;
    let mut steps = Vec::new();
    loop {
        let corpus_indices = sample_corpus(
            catalog,
            &profile.interests,
            domain.corpus_size,
            domain.corpus_noise,
            rng,
            scratch,
        )?;
        let corpus: Vec<Video> = corpus_indices.iter().map(|&i| catalog[i].clone()).collect();
        let action = behavior.sample_action(state, rng);
        let slate_ids = discretizer.realize_action(action, &corpus, dominant);
        let slate_videos: Vec<&Video> = slate_ids
            .iter()
            .map(|id| {
                corpus
                    .iter()
                    .find(|v| v.id == *id)
                    .expect("realized ids come from the corpus")
            })
            .collect();
        let utilities = expert_utilities(&slate_videos, profile, cfg);
        let probabilities = choice_probabilities(&utilities, cfg.no_click_mass)?;
        let choice = sample_choice(&probabilities, rng)?;

        let state_before = state;
        let response = match choice {
            Some(j) => {
                let video = slate_videos[j];
                // Published ratings are permanent: a re-clicked video keeps
                // its first evaluation instead of re-drawing rating noise.
                let (features, observed, updated) = if video.evaluated {
                    let observed = video
                        .evaluated_quality
                        .expect("evaluated videos carry a published rating");
                    (None, observed, None)
                } else {
                    let (features, updated) =
                        evaluate_video(video, profile, cfg.sigma_eval, rng)?;
                    let observed = updated
                        .evaluated_quality
                        .expect("evaluate_video always publishes");
                    (Some(features), observed, Some(updated))
                };
                budget -= video.length + cfg.browse_cost;
                state = discretizer.state_after_click(video.topic, observed, 1.0);
                let response = Response {
                    clicked: Some(video.id),
                    watch_time: video.length,
                    engagement_rate: 1.0,
                    evaluation: features,
                    observed_quality: observed,
                };
                if let Some(updated) = updated {
                    let slot = updated.id.index();
                    catalog[slot] = updated;
                }
                response
            }
            None => {
                budget -= cfg.browse_cost;
                Response::no_click()
            }
        };
        steps.push(TrajectoryStep {
            interests: profile.interests.clone(),
            corpus,
            slate: Slate::new(slate_ids),
            response,
            abstract_state: state_before,
            abstract_action: action,
        });
        if budget <= 0.0 || steps.len() >= cfg.max_steps {
            break;
        }
    }
    Ok(Trajectory {
        expert_id: profile.id,
        steps,
        end_state: state,
    })
}

/// Generates `per_expert` sessions for every profile, sequentially, so
/// evaluations published by earlier sessions are visible to later ones.
/// Each session draws from its own seed-derived stream: the output is a
/// pure function of (profiles, catalog, seed).
#[allow(clippy::too_many_arguments)]
pub fn generate_demonstrations(
    profiles: &[ExpertProfile],
    per_expert: usize,
    catalog: &mut [Video],
    behavior: &Policy,
    discretizer: &Discretizer,
    domain: &DomainConfig,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if per_expert == 0 {
        return Err(Error::invalid("per_expert must be at least 1"));
    }
    let mut scratch = Vec::new();
    let mut out = Vec::with_capacity(profiles.len() * per_expert);
    for (expert_index, profile) in profiles.iter().enumerate() {
        for t in 0..per_expert {
            let mut rng = rng::stream(
                seed,
                rng::STREAM_TRAJECTORY,
                (expert_index * per_expert + t) as u64,
            );
            out.push(run_expert_session(
                profile,
                catalog,
                behavior,
                discretizer,
                domain,
                cfg,
                &mut rng,
                &mut scratch,
            )?);
        }
    }
    Ok(out)
}

pub const TRAJECTORY_HEADER: &str = "expert_id,traj_id,step,abstract_state,abstract_action,clicked_video,watch_time,s_v,evaluated_quality,corpus_video_ids";
pub const EXPERT_HEADER: &str =
    "expert_id,quality_factor,session_budget,interests,expertise_topics";

pub fn save_trajectories(path: &Path, trajectories: &[Trajectory], comment: &str) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(comment), TRAJECTORY_HEADER)?;
    for (traj_id, t) in trajectories.iter().enumerate() {
        for (step, s) in t.steps.iter().enumerate() {
            let ids: Vec<String> = s.corpus.iter().map(|v| v.id.0.to_string()).collect();
            let s_v = s.response.evaluation.as_ref().map(|e| e.mean());
            let evaluated_quality = s.response.clicked.map(|_| s.response.observed_quality);
            w.row(&[
                &t.expert_id,
                &traj_id,
                &step,
                &s.abstract_state,
                &s.abstract_action,
                &OptU32(s.response.clicked.map(|id| id.0)),
                &F64(s.response.watch_time),
                &OptF64(s_v),
                &OptF64(evaluated_quality),
                &ids.join(";"),
            ])?;
        }
    }
    w.finish()
}

/// One trajectory step as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStep {
    pub expert_id: usize,
    pub traj_id: usize,
    pub step: usize,
    pub abstract_state: usize,
    pub abstract_action: usize,
    pub clicked_video: Option<VideoId>,
    pub watch_time: f64,
    pub s_v: Option<f64>,
    pub evaluated_quality: Option<f64>,
    pub corpus_video_ids: Vec<VideoId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrajectory {
    pub expert_id: usize,
    pub traj_id: usize,
    pub steps: Vec<LoadedStep>,
}

pub fn load_trajectories(path: &Path) -> Result<Vec<LoadedTrajectory>> {
    let file = read_csv(path, TRAJECTORY_HEADER, "gen-trajectories")?;
    let mut out: Vec<LoadedTrajectory> = Vec::new();
    for (line, text) in &file.rows {
        let row = Row::split(path, *line, text, 10)?;
        let step = LoadedStep {
            expert_id: row.usize(0, "expert_id")?,
            traj_id: row.usize(1, "traj_id")?,
            step: row.usize(2, "step")?,
            abstract_state: row.usize(3, "abstract_state")?,
            abstract_action: row.usize(4, "abstract_action")?,
            clicked_video: row.opt_u32(5, "clicked_video")?.map(VideoId),
            watch_time: row.f64(6, "watch_time")?,
            s_v: row.opt_f64(7, "s_v")?,
            evaluated_quality: row.opt_f64(8, "evaluated_quality")?,
            corpus_video_ids: {
                let field = row.str(9);
                if field.is_empty() {
                    return Err(Error::parse(path, row.line(), "empty corpus_video_ids"));
                }
                field
                    .split(';')
                    .map(|part| {
                        part.parse::<u32>().map(VideoId).map_err(|_| {
                            Error::parse(path, row.line(), format!("bad corpus id `{part}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            },
        };
        match out.last_mut() {
            Some(current) if current.traj_id == step.traj_id => {
                if step.step != current.steps.len() || step.expert_id != current.expert_id {
                    return Err(Error::parse(path, row.line(), "steps out of order"));
                }
                current.steps.push(step);
            }
            _ => {
                if step.step != 0 || out.iter().any(|t| t.traj_id == step.traj_id) {
                    return Err(Error::parse(path, row.line(), "trajectory rows out of order"));
                }
                out.push(LoadedTrajectory {
                    expert_id: step.expert_id,
                    traj_id: step.traj_id,
                    steps: vec![step],
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "no trajectory rows"));
    }
    Ok(out)
}

/// Rebuilds the abstract state/action sequence of a stored trajectory.
/// The end state is recomputed from the final step's click outcome, which
/// needs the catalog for the clicked video's topic.
pub fn abstract_from_loaded(
    trajectory: &LoadedTrajectory,
    catalog: &[Video],
    discretizer: &Discretizer,
) -> Result<AbstractTrajectory> {
    let states: Vec<usize> = trajectory.steps.iter().map(|s| s.abstract_state).collect();
    let actions: Vec<usize> = trajectory.steps.iter().map(|s| s.abstract_action).collect();
    let last = trajectory
        .steps
        .last()
        .ok_or_else(|| Error::invalid("stored trajectory has no steps"))?;
    let end_state = match (last.clicked_video, last.evaluated_quality) {
        (Some(id), Some(q)) => {
            let video = catalog
                .get(id.index())
                .ok_or_else(|| Error::invalid(format!("clicked video {} not in catalog", id.0)))?;
            let engagement = if video.length > 0.0 {
                last.watch_time / video.length
            } else {
                0.0
            };
            discretizer.state_after_click(video.topic, q, engagement)
        }
        _ => last.abstract_state,
    };
    Ok(AbstractTrajectory::new(states, actions, end_state))
}

pub fn save_experts(path: &Path, profiles: &[ExpertProfile], comment: &str) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(comment), EXPERT_HEADER)?;
    for p in profiles {
        let interests: Vec<String> = p.interests.iter().map(|&x| fmt_f64(x)).collect();
        let topics: Vec<String> = p.expertise_topics.iter().map(|t| t.0.to_string()).collect();
        w.row(&[
            &p.id,
            &F64(p.quality_factor),
            &F64(p.session_budget),
            &interests.join(";"),
            &topics.join(";"),
        ])?;
    }
    w.finish()
}

pub fn load_experts(path: &Path) -> Result<Vec<ExpertProfile>> {
    let file = read_csv(path, EXPERT_HEADER, "gen-trajectories")?;
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, text) in &file.rows {
        let row = Row::split(path, *line, text, 5)?;
        let interests = row
            .str(3)
            .split(';')
            .map(|part| {
                part.parse::<f64>()
                    .map_err(|_| Error::parse(path, row.line(), format!("bad interest `{part}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let expertise_topics = row
            .str(4)
            .split(';')
            .map(|part| {
                part.parse::<u16>().map(Topic).map_err(|_| {
                    Error::parse(path, row.line(), format!("bad expertise topic `{part}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ExpertProfile {
            id: row.usize(0, "expert_id")?,
            interests,
            expertise_topics,
            quality_factor: row.f64(1, "quality_factor")?,
            session_budget: row.f64(2, "session_budget")?,
        });
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "no expert rows"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use tempfile::tempdir;

    fn test_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::paper();
        cfg.domain.catalog_size = 500;
        cfg
    }

    fn test_catalog(cfg: &ExperimentConfig, seed: u64) -> Vec<Video> {
        crate::domain::sample_catalog(
            seed,
            cfg.domain.catalog_size,
            cfg.domain.n_topics,
            cfg.domain.video_length,
        )
        .unwrap()
    }

    fn discretizer(cfg: &ExperimentConfig) -> Discretizer {
        Discretizer::new(
            cfg.domain.n_topics,
            cfg.discretizer.quality_bins,
            cfg.discretizer.engagement_bins,
            cfg.domain.slate_size,
        )
    }

    fn plain_video(latent: f64) -> Video {
        Video {
            id: VideoId(0),
            topic: Topic(0),
            length: 4.0,
            latent_quality: latent,
            appeal: 0.0,
            evaluated: false,
            evaluated_quality: None,
        }
    }

    #[test]
    fn archetypes_have_one_dominant_topic() {
        let a = archetype_interests(2, 8);
        assert_eq!(a[2], 0.9);
        assert_eq!(a[3], 0.3);
        assert_eq!(a.iter().filter(|&&x| x == -0.5).count(), 6);
        // Round-robin wraps.
        let b = archetype_interests(9, 8);
        assert_eq!(b[1], 0.9);
        assert_eq!(b[2], 0.3);
        // Wrap of the secondary topic.
        let c = archetype_interests(7, 8);
        assert_eq!(c[7], 0.9);
        assert_eq!(c[0], 0.3);
    }

    #[test]
    fn profiles_are_deterministic_and_in_range() {
        let cfg = test_config();
        let a = generate_expert_profiles(&cfg.domain, &cfg.expert, 42);
        let b = generate_expert_profiles(&cfg.domain, &cfg.expert, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        for p in &a {
            assert!(p.quality_factor >= 0.5 && p.quality_factor <= 1.0);
            assert!(!p.expertise_topics.is_empty());
            assert_eq!(p.dominant_topic(), Topic((p.id % 8) as u16));
        }
        let c = generate_expert_profiles(&cfg.domain, &cfg.expert, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn perfect_features_saturate_the_update() {
        let v = plain_video(0.2);
        let features = EvaluationFeatures {
            pedagogy: 1.0,
            accuracy: 1.0,
            importance: 1.0,
            entertainment: 1.0,
        };
        let updated = apply_evaluation(&v, &features, 1.0);
        assert_eq!(features.mean(), 1.0);
        assert_eq!(updated.evaluated_quality, Some(1.0));
        assert!(updated.evaluated);
    }

    #[test]
    fn zero_features_leave_quality_at_latent() {
        let v = plain_video(0.37);
        let features = EvaluationFeatures {
            pedagogy: 0.0,
            accuracy: 0.0,
            importance: 0.0,
            entertainment: 0.0,
        };
        for f in [0.0, 0.4, 1.0] {
            let updated = apply_evaluation(&v, &features, f);
            assert_eq!(updated.evaluated_quality, Some(0.37));
        }
    }

    #[test]
    fn zero_factor_experts_publish_the_latent_quality() {
        let cfg = test_config();
        let mut profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 1)[0].clone();
        profile.quality_factor = 0.0;
        let v = plain_video(-0.42);
        let mut rng = rng::stream(9, rng::STREAM_TRAJECTORY, 0);
        let (_, updated) = evaluate_video(&v, &profile, 0.3, &mut rng).unwrap();
        // The update term is s_v * 0; noise only touches the features.
        assert_eq!(updated.evaluated_quality, Some(-0.42));
    }

    #[test]
    fn full_factor_experts_double_the_latent_quality() {
        let cfg = test_config();
        let mut profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 1)[0].clone();
        profile.quality_factor = 1.0;
        let mut rng = rng::stream(9, rng::STREAM_TRAJECTORY, 1);
        let mut last = f64::NEG_INFINITY;
        for latent in [-0.9, -0.5, -0.1, 0.0, 0.3, 0.45, 0.7] {
            // f=1 zeroes the feature noise: each reading equals the latent
            // quality, so the published value is clamp(2 * latent).
            let (features, updated) = evaluate_video(&plain_video(latent), &profile, 0.3, &mut rng).unwrap();
            assert_eq!(features.mean(), latent);
            let q = updated.evaluated_quality.unwrap();
            assert_eq!(q, clamp_unit(2.0 * latent));
            assert!(q >= last, "monotone in latent");
            last = q;
        }
    }

    #[test]
    fn identical_videos_get_identical_utilities() {
        let cfg = test_config();
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 1)[0].clone();
        let v = plain_video(0.5);
        let u = expert_utilities(&[&v, &v], &profile, &cfg.expert);
        assert_eq!(u[0], u[1]);
        assert!(u[0] > 0.0);
    }

    #[test]
    fn quality_gap_produces_the_exponential_ratio() {
        let mut cfg = test_config();
        cfg.expert.beta_quality = 2.0;
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 1)[0].clone();
        let mut high = plain_video(0.5);
        let low = plain_video(0.0);
        high.topic = low.topic;
        // beta_q = 2, gap 0.5, topic and expertise terms equal: ratio e^1.
        let u = expert_utilities(&[&high, &low], &profile, &cfg.expert);
        assert!((u[0] / u[1] - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn zero_betas_flatten_utilities_to_one() {
        let mut cfg = test_config();
        cfg.expert.beta_quality = 0.0;
        cfg.expert.beta_topic = 0.0;
        cfg.expert.beta_expertise = 0.0;
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 1)[0].clone();
        let a = plain_video(0.9);
        let mut b = plain_video(-0.7);
        b.topic = Topic(5);
        let u = expert_utilities(&[&a, &b], &profile, &cfg.expert);
        assert_eq!(u, vec![1.0, 1.0]);
    }

    #[test]
    fn behavior_policy_prefers_top_bin_dominant_actions() {
        let cfg = test_config();
        let d = discretizer(&cfg);
        let policy = behavior_policy(&d, &cfg.expert);
        // Greedy action: both descriptors on-dominant in the top bin.
        assert_eq!(policy.greedy_action(0), d.n_actions() - 1);
        let base = cfg.expert.behavior_epsilon / d.n_actions() as f64;
        assert!((policy.prob(0, d.n_actions() - 1) - (0.9 + base)).abs() < 1e-12);
        assert!((policy.prob(0, 0) - base).abs() < 1e-12);
        // State-independent.
        for s in 0..d.n_states() {
            assert_eq!(policy.row(s), policy.row(0));
        }
    }

    #[test]
    fn always_click_sessions_spend_the_budget_in_twelve_steps() {
        let mut cfg = test_config();
        cfg.expert.no_click_mass = 0.0; // every step clicks
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let mut catalog = test_catalog(&cfg, 7);
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[0].clone();
        let mut rng = rng::stream(42, rng::STREAM_TRAJECTORY, 0);
        let mut scratch = Vec::new();
        let t = run_expert_session(
            &profile, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, &mut rng, &mut scratch,
        )
        .unwrap();
        // budget 60 / (4 watch + 1 browse) = 12 steps.
        assert_eq!(t.len(), 12);
        for s in &t.steps {
            assert_eq!(s.response.watch_time, 4.0);
            assert_eq!(s.response.engagement_rate, 1.0);
            assert!(s.response.clicked.is_some());
        }
    }

    #[test]
    fn zero_budget_sessions_still_take_one_step() {
        let mut cfg = test_config();
        cfg.expert.session_budget = 0.0;
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let mut catalog = test_catalog(&cfg, 7);
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[0].clone();
        let mut rng = rng::stream(42, rng::STREAM_TRAJECTORY, 0);
        let mut scratch = Vec::new();
        let t = run_expert_session(
            &profile, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, &mut rng, &mut scratch,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn huge_budgets_stop_at_max_steps() {
        let mut cfg = test_config();
        cfg.expert.session_budget = 1e6;
        cfg.expert.no_click_mass = 0.0;
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let mut catalog = test_catalog(&cfg, 7);
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[0].clone();
        let mut rng = rng::stream(42, rng::STREAM_TRAJECTORY, 0);
        let mut scratch = Vec::new();
        let t = run_expert_session(
            &profile, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, &mut rng, &mut scratch,
        )
        .unwrap();
        assert_eq!(t.len(), 20);
    }

    #[test]
    fn clicked_videos_are_published_into_the_catalog() {
        let mut cfg = test_config();
        cfg.expert.no_click_mass = 0.0;
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let mut catalog = test_catalog(&cfg, 7);
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[0].clone();
        let mut rng = rng::stream(42, rng::STREAM_TRAJECTORY, 0);
        let mut scratch = Vec::new();
        let t = run_expert_session(
            &profile, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, &mut rng, &mut scratch,
        )
        .unwrap();
        for s in &t.steps {
            let id = s.response.clicked.unwrap();
            let v = &catalog[id.index()];
            assert!(v.evaluated);
            assert_eq!(v.evaluated_quality, Some(s.response.observed_quality));
        }
    }

    #[test]
    fn no_click_steps_carry_the_state_forward() {
        let mut cfg = test_config();
        // Make no-click overwhelmingly likely.
        cfg.expert.no_click_mass = 1e9;
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let mut catalog = test_catalog(&cfg, 7);
        let profile = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[0].clone();
        let mut rng = rng::stream(42, rng::STREAM_TRAJECTORY, 0);
        let mut scratch = Vec::new();
        let t = run_expert_session(
            &profile, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, &mut rng, &mut scratch,
        )
        .unwrap();
        // Budget only shrinks by browse cost per step: 60 steps needed, so
        // max_steps (20) binds.
        assert_eq!(t.len(), 20);
        for s in &t.steps {
            assert_eq!(s.abstract_state, Discretizer::NO_CLICK_STATE);
            assert!(s.response.clicked.is_none());
        }
        assert_eq!(t.end_state, Discretizer::NO_CLICK_STATE);
    }

    #[test]
    fn experts_click_better_videos_than_they_skip() {
        let mut cfg = test_config();
        cfg.domain.catalog_size = 2000;
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let profiles = generate_expert_profiles(&cfg.domain, &cfg.expert, 11);
        let mut catalog = test_catalog(&cfg, 11);
        let trajectories = generate_demonstrations(
            &profiles, 90, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, 11,
        )
        .unwrap();
        let mut clicked = Vec::new();
        let mut skipped = Vec::new();
        for t in &trajectories {
            for s in &t.steps {
                for &id in &s.slate.items {
                    let latent = s
                        .corpus
                        .iter()
                        .find(|v| v.id == id)
                        .unwrap()
                        .latent_quality;
                    if s.response.clicked == Some(id) {
                        clicked.push(latent);
                    } else {
                        skipped.push(latent);
                    }
                }
            }
        }
        assert!(clicked.len() + skipped.len() >= 10_000, "need enough choices");
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&clicked) > mean(&skipped) + 0.05,
            "clicked {} vs skipped {}",
            mean(&clicked),
            mean(&skipped)
        );
    }

    #[test]
    fn demonstration_counts_and_determinism() {
        let cfg = test_config();
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let profiles = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[..2].to_vec();

        let base = test_catalog(&cfg, 7);
        let mut catalog_a = base.clone();
        let a = generate_demonstrations(
            &profiles, 3, &mut catalog_a, &behavior, &d, &cfg.domain, &cfg.expert, 42,
        )
        .unwrap();
        assert_eq!(a.len(), 6);

        let mut catalog_b = base.clone();
        let b = generate_demonstrations(
            &profiles, 3, &mut catalog_b, &behavior, &d, &cfg.domain, &cfg.expert, 42,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(catalog_a, catalog_b);

        assert!(
            generate_demonstrations(
                &profiles, 0, &mut catalog_a, &behavior, &d, &cfg.domain, &cfg.expert, 42
            )
            .is_err()
        );
    }

    #[test]
    fn exhausted_sessions_actually_spent_the_budget() {
        let cfg = test_config();
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let profiles = generate_expert_profiles(&cfg.domain, &cfg.expert, 42);
        let mut catalog = test_catalog(&cfg, 7);
        let trajectories = generate_demonstrations(
            &profiles, 5, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, 42,
        )
        .unwrap();
        for t in &trajectories {
            assert!(t.len() <= cfg.expert.max_steps);
            assert!(!t.is_empty());
            if t.len() < cfg.expert.max_steps {
                let spent: f64 = t
                    .steps
                    .iter()
                    .map(|s| s.response.watch_time + cfg.expert.browse_cost)
                    .sum();
                assert!(
                    spent >= cfg.expert.session_budget,
                    "short trajectory must have exhausted its budget"
                );
            }
        }
    }

    #[test]
    fn trajectories_round_trip_through_disk() {
        let cfg = test_config();
        let d = discretizer(&cfg);
        let behavior = behavior_policy(&d, &cfg.expert);
        let profiles = generate_expert_profiles(&cfg.domain, &cfg.expert, 42)[..2].to_vec();
        let mut catalog = test_catalog(&cfg, 7);
        let trajectories = generate_demonstrations(
            &profiles, 3, &mut catalog, &behavior, &d, &cfg.domain, &cfg.expert, 42,
        )
        .unwrap();

        let dir = tempdir().unwrap();
        let path = dir.path().join("trajectories.csv");
        save_trajectories(&path, &trajectories, "# config test").unwrap();
        let loaded = load_trajectories(&path).unwrap();
        assert_eq!(loaded.len(), trajectories.len());
        for (l, t) in loaded.iter().zip(&trajectories) {
            assert_eq!(l.expert_id, t.expert_id);
            assert_eq!(l.steps.len(), t.len());
            let rebuilt = abstract_from_loaded(l, &catalog, &d).unwrap();
            assert_eq!(rebuilt, t.abstract_seq());
            for (ls, ts) in l.steps.iter().zip(&t.steps) {
                assert_eq!(ls.clicked_video, ts.response.clicked);
                assert_eq!(
                    ls.corpus_video_ids,
                    ts.corpus.iter().map(|v| v.id).collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn missing_trajectory_file_names_the_stage() {
        let dir = tempdir().unwrap();
        let err = load_trajectories(&dir.path().join("none.csv")).unwrap_err();
        match err {
            Error::MissingArtifact { hint, .. } => assert_eq!(hint, "gen-trajectories"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn experts_round_trip_through_disk() {
        let cfg = test_config();
        let profiles = generate_expert_profiles(&cfg.domain, &cfg.expert, 42);
        let dir = tempdir().unwrap();
        let path = dir.path().join("experts.csv");
        save_experts(&path, &profiles, "# config test").unwrap();
        let loaded = load_experts(&path).unwrap();
        assert_eq!(loaded.len(), profiles.len());
        for (l, p) in loaded.iter().zip(&profiles) {
            assert_eq!(l.id, p.id);
            assert_eq!(l.expertise_topics, p.expertise_topics);
            assert!((l.quality_factor - p.quality_factor).abs() < 1e-9);
            for (a, b) in l.interests.iter().zip(&p.interests) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
