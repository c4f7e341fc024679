//! Pipeline driver. Every verb reads and writes CSV artifacts under
//! `--out-dir` so stages can be rerun and inspected independently;
//! `compare` chains all of them and finishes with the report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing upstream
//! artifact, 4 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use expertrec_core::config::Profile;
use expertrec_core::dataset::{build_dataset_from_loaded, load_dataset, save_dataset};
use expertrec_core::domain::{load_catalog, sample_catalog, save_catalog};
use expertrec_core::expert_env::{
    abstract_from_loaded, behavior_policy, generate_demonstrations, generate_expert_profiles,
    load_experts, load_trajectories, save_experts, save_trajectories,
};
use expertrec_core::harness::{
    emit_report, load_metrics, run_arm, run_experiment, save_metrics, summarize_arm, ArmResult,
    ExperimentInputs, ARMS,
};
use expertrec_core::irl::model_io::save_trace;
use expertrec_core::irl::{
    estimate_transitions, maxent_irl, AbstractTrajectory, FeatureKind, FeatureMap, MaxEntParams,
};
use expertrec_core::user_env::{generate_user_profiles, save_session_logs};
use expertrec_core::{
    DatasetShape, Discretizer, Error, ExperimentConfig, LearnedModel, Result, Video,
};

const CATALOG: &str = "catalog.csv";
const CATALOG_EVALUATED: &str = "catalog_evaluated.csv";
const EXPERTS: &str = "experts.csv";
const TRAJECTORIES: &str = "trajectories.csv";
const MODEL: &str = "model.csv";
const TRACE: &str = "trace.csv";
const DATASET: &str = "dataset.csv";

#[derive(Parser)]
#[command(name = "expertrec", version, about = "Expert-guided recommendation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed for every random stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory artifacts are written to and read from.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Scale preset: `desk` or `paper`.
    #[arg(long, default_value = "desk")]
    profile: String,
    /// TOML file overlaying the profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a fresh content catalog.
    GenCatalog(Common),
    /// Run expert demonstration sessions against the catalog.
    GenTrajectories(Common),
    /// Learn reward weights and a policy from the demonstrations.
    TrainIrl(Common),
    /// Assemble the expert state dataset that drives serving.
    BuildDataset(Common),
    /// Serve one agent arm against simulated user sessions.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// One of: expert, fsq, pctr, bandit, naive.
        #[arg(long)]
        agent: String,
    },
    /// Run the whole pipeline plus all five arms and write the report.
    Compare(Common),
    /// Rebuild the report files from existing per-arm metrics.
    Report(Common),
}

struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
    out_dir: PathBuf,
    /// '#'-prefixed config echo written into every artifact.
    echo: String,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let profile = Profile::from_str(&common.profile)?;
        let cfg = ExperimentConfig::load(profile, common.config.as_deref())?;
        let echo = cfg.echo_line(profile, common.seed);
        std::fs::create_dir_all(&common.out_dir)?;
        Ok(Ctx {
            cfg,
            seed: common.seed,
            out_dir: common.out_dir.clone(),
            echo,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn discretizer(&self) -> Discretizer {
        Discretizer::new(
            self.cfg.domain.n_topics,
            self.cfg.discretizer.quality_bins,
            self.cfg.discretizer.engagement_bins,
            self.cfg.domain.slate_size,
        )
    }

    fn dataset_shape(&self) -> DatasetShape {
        DatasetShape {
            n_topics: self.cfg.domain.n_topics,
            corpus_size: self.cfg.domain.corpus_size,
            n_states: self.cfg.n_states(),
            n_actions: self.cfg.n_actions(),
        }
    }

    /// Loads a catalog and rejects one generated under different domain
    /// settings before it can cause an out-of-range topic index downstream.
    fn load_catalog_checked(&self, name: &str, hint: &str) -> Result<Vec<Video>> {
        let catalog = load_catalog(&self.path(name), hint)?;
        if catalog.len() != self.cfg.domain.catalog_size {
            return Err(Error::ConfigMismatch(format!(
                "catalog {} holds {} videos, current config expects {}",
                self.path(name).display(),
                catalog.len(),
                self.cfg.domain.catalog_size
            )));
        }
        if let Some(v) = catalog
            .iter()
            .find(|v| usize::from(v.topic.0) >= self.cfg.domain.n_topics)
        {
            return Err(Error::ConfigMismatch(format!(
                "catalog {} contains topic {} but current config has n_topics={}",
                self.path(name).display(),
                v.topic.0,
                self.cfg.domain.n_topics
            )));
        }
        Ok(catalog)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ConfigMismatch(_) => 2,
        Error::MissingArtifact { .. } => 3,
        _ => 4,
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::GenCatalog(c) => gen_catalog(&Ctx::new(c)?),
        Command::GenTrajectories(c) => gen_trajectories(&Ctx::new(c)?),
        Command::TrainIrl(c) => train_irl(&Ctx::new(c)?),
        Command::BuildDataset(c) => build_dataset(&Ctx::new(c)?),
        Command::Simulate { common, agent } => simulate(&Ctx::new(common)?, agent),
        Command::Compare(c) => compare(&Ctx::new(c)?),
        Command::Report(c) => report(&Ctx::new(c)?),
    }
}

fn gen_catalog(ctx: &Ctx) -> Result<()> {
    println!("{}", ctx.echo);
    let d = &ctx.cfg.domain;
    let catalog = sample_catalog(ctx.seed, d.catalog_size, d.n_topics, d.video_length)?;
    save_catalog(&ctx.path(CATALOG), &catalog, &ctx.echo)?;
    println!("wrote {} ({} videos)", ctx.path(CATALOG).display(), catalog.len());
    Ok(())
}

fn gen_trajectories(ctx: &Ctx) -> Result<()> {
    println!("{}", ctx.echo);
    let mut catalog = ctx.load_catalog_checked(CATALOG, "gen-catalog")?;
    let discretizer = ctx.discretizer();
    let profiles = generate_expert_profiles(&ctx.cfg.domain, &ctx.cfg.expert, ctx.seed);
    let behavior = behavior_policy(&discretizer, &ctx.cfg.expert);
    let trajectories = generate_demonstrations(
        &profiles,
        ctx.cfg.expert.trajectories_per_expert,
        &mut catalog,
        &behavior,
        &discretizer,
        &ctx.cfg.domain,
        &ctx.cfg.expert,
        ctx.seed,
    )?;
    let steps: usize = trajectories.iter().map(|t| t.len()).sum();
    save_trajectories(&ctx.path(TRAJECTORIES), &trajectories, &ctx.echo)?;
    save_experts(&ctx.path(EXPERTS), &profiles, &ctx.echo)?;
    save_catalog(&ctx.path(CATALOG_EVALUATED), &catalog, &ctx.echo)?;
    let evaluated = catalog.iter().filter(|v| v.evaluated).count();
    println!(
        "wrote {} ({} trajectories, {} steps)",
        ctx.path(TRAJECTORIES).display(),
        trajectories.len(),
        steps
    );
    println!("wrote {} ({} experts)", ctx.path(EXPERTS).display(), profiles.len());
    println!(
        "wrote {} ({} evaluated videos)",
        ctx.path(CATALOG_EVALUATED).display(),
        evaluated
    );
    Ok(())
}

fn load_abstract_trajectories(
    ctx: &Ctx,
    catalog: &[Video],
    discretizer: &Discretizer,
) -> Result<Vec<AbstractTrajectory>> {
    let loaded = load_trajectories(&ctx.path(TRAJECTORIES))?;
    loaded
        .iter()
        .map(|t| abstract_from_loaded(t, catalog, discretizer))
        .collect()
}

fn train_irl(ctx: &Ctx) -> Result<()> {
    println!("{}", ctx.echo);
    let started = Instant::now();
    let catalog = ctx.load_catalog_checked(CATALOG_EVALUATED, "gen-trajectories")?;
    let discretizer = ctx.discretizer();
    let abstracted = load_abstract_trajectories(ctx, &catalog, &discretizer)?;
    let transitions = estimate_transitions(
        &abstracted,
        ctx.cfg.n_states(),
        ctx.cfg.n_actions(),
        ctx.cfg.irl.transition_smoothing,
    )?;
    let kind = FeatureKind::from_str(&ctx.cfg.irl.feature_map)?;
    let map = FeatureMap::for_domain(kind, &discretizer);
    let outcome = maxent_irl(&abstracted, &transitions, &map, &MaxEntParams::from(&ctx.cfg.irl))?;
    let model = LearnedModel::from_outcome(&outcome, ctx.cfg.irl.gamma);
    model.save(&ctx.path(MODEL), &ctx.echo)?;
    save_trace(&ctx.path(TRACE), &outcome.trace, &ctx.echo)?;
    let last = outcome.trace.last().expect("training always traces");
    println!(
        "wrote {} (residual {:.6}, grad norm {:.6}, {} iterations, {:.1} s)",
        ctx.path(MODEL).display(),
        last.residual,
        last.grad_norm,
        ctx.cfg.irl.iterations,
        started.elapsed().as_secs_f64()
    );
    println!("wrote {}", ctx.path(TRACE).display());
    Ok(())
}

fn build_dataset(ctx: &Ctx) -> Result<()> {
    println!("{}", ctx.echo);
    let catalog = ctx.load_catalog_checked(CATALOG_EVALUATED, "gen-trajectories")?;
    let experts = load_experts(&ctx.path(EXPERTS))?;
    let loaded = load_trajectories(&ctx.path(TRAJECTORIES))?;
    let model = LearnedModel::load(&ctx.path(MODEL))?;
    if model.policy.n_states != ctx.cfg.n_states() || model.policy.n_actions != ctx.cfg.n_actions()
    {
        return Err(Error::ConfigMismatch(format!(
            "model at {} was trained over {} states x {} actions, current config implies {} x {}",
            ctx.path(MODEL).display(),
            model.policy.n_states,
            model.policy.n_actions,
            ctx.cfg.n_states(),
            ctx.cfg.n_actions()
        )));
    }
    let records = build_dataset_from_loaded(
        &loaded,
        &experts,
        &model.policy,
        &catalog,
        &ctx.cfg.domain,
        &ctx.cfg.descriptor,
    )?;
    save_dataset(&ctx.path(DATASET), &records, ctx.dataset_shape())?;
    println!("wrote {} ({} records)", ctx.path(DATASET).display(), records.len());
    Ok(())
}

fn simulate(ctx: &Ctx, agent: &str) -> Result<()> {
    let arm_index = ARMS
        .iter()
        .position(|a| *a == agent)
        .ok_or_else(|| {
            Error::config(format!(
                "unknown agent `{agent}` (expected one of: {})",
                ARMS.join(", ")
            ))
        })?;
    let arm = ARMS[arm_index];
    println!("{}", ctx.echo);
    let catalog = ctx.load_catalog_checked(CATALOG_EVALUATED, "gen-trajectories")?;
    // Baselines never consult the dataset; only the flagship arm needs it.
    let dataset = if arm == "expert" {
        load_dataset(&ctx.path(DATASET), ctx.dataset_shape())?
    } else {
        Vec::new()
    };
    let discretizer = ctx.discretizer();
    let inputs = ExperimentInputs {
        catalog: &catalog,
        dataset: &dataset,
        discretizer: &discretizer,
    };
    let profiles = generate_user_profiles(
        &ctx.cfg.domain,
        &ctx.cfg.user,
        ctx.cfg.expert.n_experts,
        ctx.seed,
        ctx.cfg.user.sessions,
    );
    let (rows, logs) = run_arm(arm, arm_index, &profiles, &inputs, &ctx.cfg, ctx.seed)?;
    let comment = format!("# arm={arm} seed={} sessions={}", ctx.seed, ctx.cfg.user.sessions);
    save_session_logs(&ctx.path(&format!("sessions_{arm}.csv")), &logs, &comment)?;
    save_metrics(&ctx.path(&format!("metrics_{arm}.csv")), &rows, &comment)?;
    let s = summarize_arm(arm, &rows);
    println!(
        "wrote {} ({} sessions: mean Q_e {:.4}, mean Q_T {:.4}, mean W_T {:.2}, guided {:.3})",
        ctx.path(&format!("metrics_{arm}.csv")).display(),
        s.sessions,
        s.mean_q_e,
        s.mean_q_t,
        s.mean_w_t,
        s.guided_fraction
    );
    Ok(())
}

fn compare(ctx: &Ctx) -> Result<()> {
    let started = Instant::now();
    gen_catalog(ctx)?;
    gen_trajectories(ctx)?;
    train_irl(ctx)?;
    build_dataset(ctx)?;
    let catalog = ctx.load_catalog_checked(CATALOG_EVALUATED, "gen-trajectories")?;
    let dataset = load_dataset(&ctx.path(DATASET), ctx.dataset_shape())?;
    let discretizer = ctx.discretizer();
    let inputs = ExperimentInputs {
        catalog: &catalog,
        dataset: &dataset,
        discretizer: &discretizer,
    };
    let output = run_experiment(&inputs, &ctx.cfg, ctx.seed, Some(&ctx.out_dir))?;
    emit_report(&output.arms, &ctx.cfg.report, &ctx.out_dir)?;
    print!("{}", std::fs::read_to_string(ctx.path("summary.txt"))?);
    println!("compare finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn report(ctx: &Ctx) -> Result<()> {
    println!("{}", ctx.echo);
    let mut arms = Vec::with_capacity(ARMS.len());
    for &arm in ARMS.iter() {
        let rows = load_metrics(&ctx.path(&format!("metrics_{arm}.csv")))?;
        arms.push(ArmResult { arm, rows });
    }
    emit_report(&arms, &ctx.cfg.report, &ctx.out_dir)?;
    print!("{}", std::fs::read_to_string(ctx.path("summary.txt"))?);
    Ok(())
}
