//! The five-arm comparison driver. Every arm serves the same user
//! population (asserted by fingerprint) with per-session paired environment
//! rng streams; agent randomness draws from separate per-arm streams.
//! Stateless agents run sessions in parallel; learners run sequentially so
//! their tables evolve in session order.

use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{BanditAgent, FsqAgent, NaiveAgent, PctrAgent};
use crate::config::ExperimentConfig;
use crate::dataset::ExpertStateRecord;
use crate::domain::Video;
use crate::error::{Error, Result};
use crate::harness::metrics::{compute_metrics, save_metrics, MetricsRow};
use crate::irl::abstraction::Discretizer;
use crate::recommender::ExpertGuidedAgent;
use crate::rng;
use crate::user_env::{
    generate_user_profiles, profile_fingerprint, run_user_session, save_session_logs, Agent,
    SessionLog, UserProfile,
};

/// Arm order is fixed; reports and file names follow it.
pub const ARMS: [&str; 5] = ["expert", "fsq", "pctr", "bandit", "naive"];

/// Everything serving needs from the earlier pipeline stages.
pub struct ExperimentInputs<'a> {
    /// The evaluated catalog (after expert demonstrations wrote ratings).
    pub catalog: &'a [Video],
    /// The expert state dataset driving the flagship agent.
    pub dataset: &'a [ExpertStateRecord],
    pub discretizer: &'a Discretizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: &'static str,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// One entry per arm, in [`ARMS`] order.
    pub arms: Vec<ArmResult>,
    pub profile_fingerprint: u64,
}

fn run_parallel<A, F>(
    profiles: &[UserProfile],
    make_agent: F,
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
    arm_index: usize,
) -> Result<(Vec<MetricsRow>, Vec<SessionLog>)>
where
    A: Agent,
    F: Fn() -> Result<A> + Sync,
{
    let mut pairs: Vec<(MetricsRow, SessionLog)> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, profile)| {
            let mut agent = make_agent()?;
            let mut env_rng = rng::stream(seed, rng::STREAM_SESSION, i as u64);
            let mut agent_rng =
                rng::stream(seed, rng::STREAM_AGENT, rng::arm_session_index(arm_index, i));
            let mut scratch = Vec::new();
            let log = run_user_session(
                profile.clone(),
                &mut agent,
                inputs.catalog,
                &cfg.domain,
                &cfg.user,
                &mut env_rng,
                &mut agent_rng,
                &mut scratch,
            )?;
            Ok((compute_metrics(i, &log, &cfg.metrics), log))
        })
        .collect::<Result<_>>()?;
    pairs.sort_by_key(|(row, _)| row.session_id);
    Ok(pairs.into_iter().unzip())
}

fn run_sequential<A: Agent>(
    agent: &mut A,
    profiles: &[UserProfile],
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
    arm_index: usize,
) -> Result<(Vec<MetricsRow>, Vec<SessionLog>)> {
    let mut agent_rng =
        rng::stream(seed, rng::STREAM_AGENT, rng::arm_session_index(arm_index, 0));
    let mut scratch = Vec::new();
    let mut rows = Vec::with_capacity(profiles.len());
    let mut logs = Vec::with_capacity(profiles.len());
    for (i, profile) in profiles.iter().enumerate() {
        let mut env_rng = rng::stream(seed, rng::STREAM_SESSION, i as u64);
        let log = run_user_session(
            profile.clone(),
            agent,
            inputs.catalog,
            &cfg.domain,
            &cfg.user,
            &mut env_rng,
            &mut agent_rng,
            &mut scratch,
        )?;
        rows.push(compute_metrics(i, &log, &cfg.metrics));
        logs.push(log);
    }
    Ok((rows, logs))
}

/// Runs one arm over the supplied population.
pub fn run_arm(
    arm: &str,
    arm_index: usize,
    profiles: &[UserProfile],
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<MetricsRow>, Vec<SessionLog>)> {
    match arm {
        "expert" => run_parallel(
            profiles,
            || ExpertGuidedAgent::new(inputs.dataset, inputs.discretizer, cfg),
            inputs,
            cfg,
            seed,
            arm_index,
        ),
        "fsq" => {
            let mut agent = FsqAgent::new(inputs.discretizer, &cfg.baselines, cfg.irl.gamma);
            run_sequential(&mut agent, profiles, inputs, cfg, seed, arm_index)
        }
        "pctr" => {
            let template = PctrAgent::new(&cfg.user, cfg.domain.slate_size);
            run_parallel(
                profiles,
                || Ok(template.clone()),
                inputs,
                cfg,
                seed,
                arm_index,
            )
        }
        "bandit" => {
            let mut agent =
                BanditAgent::new(cfg.domain.n_topics, &cfg.baselines, cfg.domain.slate_size);
            run_sequential(&mut agent, profiles, inputs, cfg, seed, arm_index)
        }
        "naive" => {
            let template = NaiveAgent::new(inputs.catalog, &cfg.baselines, cfg.domain.slate_size);
            run_parallel(
                profiles,
                || Ok(template.clone()),
                inputs,
                cfg,
                seed,
                arm_index,
            )
        }
        other => Err(Error::invalid(format!("unknown arm {other}"))),
    }
}

/// Runs all five arms over one paired user population. When `out_dir` is
/// given, writes `sessions_<arm>.csv` and `metrics_<arm>.csv` per arm.
pub fn run_experiment(
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    let n_archetypes = cfg.expert.n_experts;
    let profiles =
        generate_user_profiles(&cfg.domain, &cfg.user, n_archetypes, seed, cfg.user.sessions);
    let fingerprint = profile_fingerprint(&profiles);
    let mut arms = Vec::with_capacity(ARMS.len());
    for (arm_index, &arm) in ARMS.iter().enumerate() {
        // Regenerate per arm and verify the population truly is paired:
        // profile streams must never depend on the arm.
        let arm_profiles =
            generate_user_profiles(&cfg.domain, &cfg.user, n_archetypes, seed, cfg.user.sessions);
        if profile_fingerprint(&arm_profiles) != fingerprint {
            return Err(Error::invalid("user population diverged across arms"));
        }
        let (rows, logs) = run_arm(arm, arm_index, &arm_profiles, inputs, cfg, seed)?;
        if let Some(dir) = out_dir {
            let comment = format!("# arm={arm} seed={seed} sessions={}", cfg.user.sessions);
            save_session_logs(&dir.join(format!("sessions_{arm}.csv")), &logs, &comment)?;
            save_metrics(&dir.join(format!("metrics_{arm}.csv")), &rows, &comment)?;
        }
        arms.push(ArmResult { arm, rows });
    }
    Ok(ExperimentOutput {
        arms,
        profile_fingerprint: fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::sample_catalog;

    fn small_setup() -> (ExperimentConfig, Vec<Video>, Discretizer) {
        let mut cfg = ExperimentConfig::paper();
        cfg.domain.catalog_size = 400;
        cfg.user.sessions = 4;
        cfg.user.time_budget = 30.0;
        let catalog = sample_catalog(21, 400, cfg.domain.n_topics, cfg.domain.video_length).unwrap();
        let d = Discretizer::new(
            cfg.domain.n_topics,
            cfg.discretizer.quality_bins,
            cfg.discretizer.engagement_bins,
            cfg.domain.slate_size,
        );
        (cfg, catalog, d)
    }

    #[test]
    fn experiment_produces_five_paired_arms() {
        let (cfg, catalog, d) = small_setup();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            dataset: &[],
            discretizer: &d,
        };
        let out = run_experiment(&inputs, &cfg, 42, None).unwrap();
        assert_eq!(out.arms.len(), 5);
        for (result, &name) in out.arms.iter().zip(ARMS.iter()) {
            assert_eq!(result.arm, name);
            assert_eq!(result.rows.len(), 4, "one row per session");
            for (i, row) in result.rows.iter().enumerate() {
                assert_eq!(row.session_id, i);
                assert!(row.length >= row.guided_steps);
            }
        }
        // With an empty dataset the flagship arm never guides.
        assert!(out.arms[0].rows.iter().all(|r| r.guided_steps == 0));
    }

    #[test]
    fn experiments_are_reproducible() {
        let (cfg, catalog, d) = small_setup();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            dataset: &[],
            discretizer: &d,
        };
        let a = run_experiment(&inputs, &cfg, 7, None).unwrap();
        let b = run_experiment(&inputs, &cfg, 7, None).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&inputs, &cfg, 8, None).unwrap();
        assert_ne!(a.profile_fingerprint, c.profile_fingerprint);
    }

    #[test]
    fn output_directory_gets_per_arm_files() {
        let (cfg, catalog, d) = small_setup();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            dataset: &[],
            discretizer: &d,
        };
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&inputs, &cfg, 42, Some(dir.path())).unwrap();
        for arm in ARMS {
            assert!(dir.path().join(format!("sessions_{arm}.csv")).exists());
            assert!(dir.path().join(format!("metrics_{arm}.csv")).exists());
        }
        let loaded =
            crate::harness::metrics::load_metrics(&dir.path().join("metrics_pctr.csv")).unwrap();
        assert_eq!(loaded.len(), 4);
    }
}
