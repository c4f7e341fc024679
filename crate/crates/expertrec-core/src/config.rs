//! Experiment configuration: one structured file supplies every constant.
//!
//! Precedence: profile defaults (`paper` or `desk`), then the TOML file
//! overlay, then CLI flags. The `desk` profile shrinks only scale knobs
//! (catalog size, training iterations, session count) so a full pipeline
//! fits on a laptop; all behavioral constants are shared.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::config(format!(
                "unknown profile `{other}` (expected `desk` or `paper`)"
            ))),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Paper => write!(f, "paper"),
            Profile::Desk => write!(f, "desk"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Number of content topics.
    pub n_topics: usize,
    /// Global catalog size.
    pub catalog_size: usize,
    /// Candidate corpus size m retrieved per step.
    pub corpus_size: usize,
    /// Slate size k shown to the viewer.
    pub slate_size: usize,
    /// Fixed video length in minutes.
    pub video_length: f64,
    /// Std-dev of the retrieval noise added to interest keys when sampling a corpus.
    pub corpus_noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertConfig {
    pub n_experts: usize,
    pub trajectories_per_expert: usize,
    /// Hard cap on steps per expert session.
    pub max_steps: usize,
    /// Session time budget in minutes.
    pub session_budget: f64,
    /// Browsing cost charged per step on top of watch time.
    pub browse_cost: f64,
    /// Weight of perceived latent quality in the expert's click utility.
    /// High by default: experts click far more selectively than users, so
    /// the published-rating pool skews toward genuinely good videos.
    pub beta_quality: f64,
    /// Weight of topic interest in the expert's click utility.
    pub beta_topic: f64,
    /// Weight of the on-expertise indicator in the expert's click utility.
    pub beta_expertise: f64,
    /// Evaluation feature noise scale; actual noise is sigma_eval * (1 - quality_factor).
    pub sigma_eval: f64,
    /// No-click mass in the expert's conditional logit. Large values let
    /// the expert walk away from slates with nothing worth rating.
    pub no_click_mass: f64,
    /// Epsilon of the epsilon-soft hand-coded demonstration policy.
    pub behavior_epsilon: f64,
    /// Hand-coded policy: weight for on-dominant-topic descriptors.
    pub behavior_topic_weight: f64,
    /// Hand-coded policy: weight for a descriptor's quality-bin center.
    pub behavior_quality_weight: f64,
    /// Expert quality factor f is drawn uniformly from this range.
    pub min_quality_factor: f64,
    pub max_quality_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizerConfig {
    pub quality_bins: usize,
    pub engagement_bins: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrlConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Exponential decay applied to the learning rate each gradient step.
    pub lr_decay: f64,
    /// Bellman residual tolerance for value iteration.
    pub vi_tolerance: f64,
    pub vi_max_sweeps: usize,
    /// Epsilon-greedy softening of the argmax policy used inside training.
    pub policy_epsilon: f64,
    /// "onehot" or "factored".
    pub feature_map: String,
    /// Additive smoothing for transition estimation.
    pub transition_smoothing: f64,
    /// Gradient norm above which training aborts with a divergence error.
    pub divergence_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Interest-distance margin.
    pub th1: f64,
    /// Corpus-descriptor-distance margin.
    pub th2: f64,
    /// Return the nearest record instead of the first within both margins.
    pub nearest_neighbor: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorConfig {
    /// Weight of the normalized topic id per corpus video.
    pub topic_weight: f64,
    /// Weight of the normalized length per corpus video.
    pub length_weight: f64,
    /// Weight of the platform score per corpus video.
    pub score_weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub sessions: usize,
    /// Session time budget in minutes.
    pub time_budget: f64,
    pub browse_cost: f64,
    /// Interest drift step alpha applied toward a watched video's topic.
    pub interest_step: f64,
    /// Lambda: weight of platform appeal in the click utility.
    pub quality_sensitivity: f64,
    /// Weight of topic interest in the click utility.
    pub beta_interest: f64,
    /// Kappa: budget bonus per positively-experienced watch minute.
    pub budget_bonus: f64,
    pub no_click_mass: f64,
    /// Users are noisy copies of expert interest archetypes with this noise.
    pub archetype_noise: f64,
    /// Fraction of users drawn uniformly instead of from archetypes.
    pub uniform_user_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub fsq_learning_rate: f64,
    pub fsq_epsilon: f64,
    /// Multiplicative epsilon decay applied per update.
    pub fsq_epsilon_decay: f64,
    /// Weight of observed quality in the tabular agent's reward.
    pub fsq_eta: f64,
    /// UCB exploration constant.
    pub bandit_exploration: f64,
    /// Evaluated-quality threshold for the naive agent's qualifying pool.
    pub naive_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Count no-click steps as q = 0 in Q_T instead of averaging clicked steps only.
    pub count_no_click_as_zero: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Number of quantile grid points in CDF outputs.
    pub cdf_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub expert: ExpertConfig,
    pub discretizer: DiscretizerConfig,
    pub irl: IrlConfig,
    pub classifier: ClassifierConfig,
    pub descriptor: DescriptorConfig,
    pub user: UserConfig,
    pub baselines: BaselineConfig,
    pub metrics: MetricsConfig,
    pub report: ReportConfig,
}

impl ExperimentConfig {
    /// Full-scale defaults.
    pub fn paper() -> Self {
        ExperimentConfig {
            domain: DomainConfig {
                n_topics: 8,
                catalog_size: 100_000,
                corpus_size: 5,
                slate_size: 2,
                video_length: 4.0,
                corpus_noise: 0.1,
            },
            expert: ExpertConfig {
                n_experts: 10,
                trajectories_per_expert: 1000,
                max_steps: 20,
                session_budget: 60.0,
                browse_cost: 1.0,
                beta_quality: 6.0,
                beta_topic: 1.0,
                beta_expertise: 1.0,
                sigma_eval: 0.3,
                no_click_mass: 5.0,
                behavior_epsilon: 0.1,
                behavior_topic_weight: 1.0,
                behavior_quality_weight: 2.0,
                min_quality_factor: 0.5,
                max_quality_factor: 1.0,
            },
            discretizer: DiscretizerConfig {
                quality_bins: 4,
                engagement_bins: 2,
            },
            irl: IrlConfig {
                gamma: 0.5,
                iterations: 10_000,
                learning_rate: 0.01,
                lr_decay: 0.999,
                vi_tolerance: 1e-6,
                vi_max_sweeps: 10_000,
                policy_epsilon: 0.1,
                feature_map: "onehot".to_string(),
                transition_smoothing: 0.05,
                divergence_threshold: 1e6,
            },
            classifier: ClassifierConfig {
                th1: 0.5,
                th2: 0.1,
                nearest_neighbor: false,
            },
            descriptor: DescriptorConfig {
                topic_weight: 1.0,
                length_weight: 0.05,
                score_weight: 0.22,
            },
            user: UserConfig {
                sessions: 3000,
                time_budget: 200.0,
                browse_cost: 1.0,
                interest_step: 0.05,
                quality_sensitivity: 1.0,
                beta_interest: 2.0,
                budget_bonus: 0.2,
                no_click_mass: 1.0,
                archetype_noise: 0.15,
                uniform_user_fraction: 0.03,
            },
            baselines: BaselineConfig {
                fsq_learning_rate: 0.1,
                fsq_epsilon: 0.1,
                fsq_epsilon_decay: 0.9999,
                fsq_eta: 1.0,
                bandit_exploration: std::f64::consts::SQRT_2,
                naive_threshold: 0.5,
            },
            metrics: MetricsConfig {
                count_no_click_as_zero: false,
            },
            report: ReportConfig { cdf_points: 101 },
        }
    }

    /// Laptop-scale defaults: smaller catalog, fewer training iterations,
    /// fewer sessions. Behavioral constants are identical to `paper`.
    pub fn desk() -> Self {
        let mut cfg = ExperimentConfig::paper();
        cfg.domain.catalog_size = 10_000;
        cfg.expert.trajectories_per_expert = 400;
        cfg.irl.iterations = 2000;
        cfg.user.sessions = 500;
        cfg
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => ExperimentConfig::paper(),
            Profile::Desk => ExperimentConfig::desk(),
        }
    }

    /// Profile defaults overlaid with the TOML file at `path` (file keys win).
    pub fn load(profile: Profile, path: Option<&Path>) -> Result<Self> {
        let base = ExperimentConfig::for_profile(profile);
        let Some(path) = path else {
            base.validate()?;
            return Ok(base);
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let overlay: toml::Value = text
            .parse()
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut tree = toml::Value::try_from(&base)
            .map_err(|e| Error::config(format!("internal config serialization: {e}")))?;
        merge_value(&mut tree, overlay);
        let cfg: ExperimentConfig = tree
            .try_into()
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Abstract state count implied by the discretizer settings.
    pub fn n_states(&self) -> usize {
        1 + self.domain.n_topics * self.discretizer.quality_bins * self.discretizer.engagement_bins
    }

    /// Abstract action count: multisets of slate_size descriptors over
    /// 2 * quality_bins descriptor kinds.
    pub fn n_actions(&self) -> usize {
        multiset_count(2 * self.discretizer.quality_bins, self.domain.slate_size)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if d.n_topics == 0 {
            return Err(Error::config("domain.n_topics must be positive"));
        }
        if d.catalog_size == 0 {
            return Err(Error::config("domain.catalog_size must be positive"));
        }
        if d.slate_size == 0 {
            return Err(Error::config("domain.slate_size must be positive"));
        }
        if d.corpus_size < d.slate_size {
            return Err(Error::config(
                "domain.corpus_size must be at least domain.slate_size",
            ));
        }
        if d.video_length <= 0.0 {
            return Err(Error::config("domain.video_length must be positive"));
        }
        if d.corpus_noise < 0.0 {
            return Err(Error::config("domain.corpus_noise must be non-negative"));
        }
        if self.expert.n_experts == 0 {
            return Err(Error::config("expert.n_experts must be positive"));
        }
        if self.expert.max_steps == 0 {
            return Err(Error::config("expert.max_steps must be positive"));
        }
        if !(0.0..=1.0).contains(&self.expert.behavior_epsilon) {
            return Err(Error::config("expert.behavior_epsilon must lie in [0,1]"));
        }
        if self.expert.min_quality_factor < 0.0
            || self.expert.max_quality_factor > 1.0
            || self.expert.min_quality_factor > self.expert.max_quality_factor
        {
            return Err(Error::config(
                "expert quality factor range must satisfy 0 <= min <= max <= 1",
            ));
        }
        if self.discretizer.quality_bins == 0 || self.discretizer.engagement_bins == 0 {
            return Err(Error::config("discretizer bins must be positive"));
        }
        if !(0.0..1.0).contains(&self.irl.gamma) {
            return Err(Error::config("irl.gamma must lie in [0,1)"));
        }
        if self.irl.vi_tolerance <= 0.0 {
            return Err(Error::config("irl.vi_tolerance must be positive"));
        }
        if self.irl.vi_max_sweeps == 0 {
            return Err(Error::config("irl.vi_max_sweeps must be positive"));
        }
        if !(0.0..=1.0).contains(&self.irl.policy_epsilon) {
            return Err(Error::config("irl.policy_epsilon must lie in [0,1]"));
        }
        if self.irl.feature_map != "onehot" && self.irl.feature_map != "factored" {
            return Err(Error::config(format!(
                "irl.feature_map must be `onehot` or `factored`, got `{}`",
                self.irl.feature_map
            )));
        }
        if self.irl.transition_smoothing < 0.0 {
            return Err(Error::config("irl.transition_smoothing must be non-negative"));
        }
        if self.classifier.th1 < 0.0 || self.classifier.th2 < 0.0 {
            return Err(Error::config("classifier margins must be non-negative"));
        }
        if self.user.sessions == 0 {
            return Err(Error::config("user.sessions must be positive"));
        }
        if self.user.time_budget <= 0.0 {
            return Err(Error::config("user.time_budget must be positive"));
        }
        if self.user.browse_cost <= 0.0 {
            return Err(Error::config("user.browse_cost must be positive"));
        }
        if !(0.0..=1.0).contains(&self.user.uniform_user_fraction) {
            return Err(Error::config("user.uniform_user_fraction must lie in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.baselines.fsq_epsilon) {
            return Err(Error::config("baselines.fsq_epsilon must lie in [0,1]"));
        }
        if self.report.cdf_points < 2 {
            return Err(Error::config("report.cdf_points must be at least 2"));
        }
        if self.expert.no_click_mass < 0.0 || self.user.no_click_mass < 0.0 {
            return Err(Error::config("no_click_mass must be non-negative"));
        }
        Ok(())
    }

    /// One-line echo of the load-bearing constants, embedded as a leading
    /// comment in every output file and checked on reload.
    pub fn echo_line(&self, profile: Profile, seed: u64) -> String {
        format!(
            "# config profile={} seed={} n_topics={} catalog={} corpus={} slate={} n_states={} n_actions={} features={}",
            profile,
            seed,
            self.domain.n_topics,
            self.domain.catalog_size,
            self.domain.corpus_size,
            self.domain.slate_size,
            self.n_states(),
            self.n_actions(),
            self.irl.feature_map,
        )
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::paper()
    }
}

/// Number of multisets of size `k` over `n` kinds: C(n + k - 1, k).
pub fn multiset_count(n: usize, k: usize) -> usize {
    binomial(n + k - 1, k)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn merge_value(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(base_table), toml::Value::Table(overlay_table)) => {
            for (key, value) in overlay_table {
                match base_table.get_mut(&key) {
                    Some(slot) => merge_value(slot, value),
                    None => {
                        // Unknown section or key: keep it so deserialization
                        // reports it instead of silently dropping a typo.
                        base_table.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
