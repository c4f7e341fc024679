//! The state dataset: one record per expert demonstration step, pairing the
//! expert's latent state (interests plus a corpus embedding) with the action
//! the learned policy prescribes at that step's abstract state.

use std::path::Path;

use crate::config::{DescriptorConfig, DomainConfig};
use crate::domain::{platform_score, Topic, Video, VideoId};
use crate::error::{Error, Result};
use crate::expert_env::{ExpertProfile, LoadedTrajectory, Trajectory};
use crate::io_util::{fmt_f64, read_csv, CsvWriter, OptF64, Row, F64};
use crate::irl::value_iteration::Policy;
use crate::user_env::CorpusItem;

/// What the expert's click looked like at this step.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSummary {
    pub clicked_topic: Option<Topic>,
    pub watch_time: f64,
    pub s_v: Option<f64>,
    pub engagement_rate: f64,
    pub evaluated_quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertStateRecord {
    pub expert_id: usize,
    /// Expert interest vector, length n_topics.
    pub e_s: Vec<f64>,
    /// Flattened corpus embedding, length 3 * corpus_size.
    pub e_c: Vec<f64>,
    pub response: ResponseSummary,
    pub abstract_state: usize,
    pub policy_action: usize,
}

/// Dimensions a dataset file was built under. Matching on load guards
/// against serving with a dataset from an incompatible configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetShape {
    pub n_topics: usize,
    pub corpus_size: usize,
    pub n_states: usize,
    pub n_actions: usize,
}

/// Embeds a corpus as one flat vector: per video (topic, length, score),
/// sorted by (topic, score) so retrieval order does not move the point.
/// `score` is the platform-visible score. The weights set how much each
/// coordinate contributes to the Euclidean matching distance.
pub fn corpus_descriptor(
    videos: &[&Video],
    n_topics: usize,
    length_ref: f64,
    cfg: &DescriptorConfig,
) -> Vec<f64> {
    descriptor_from_parts(
        videos
            .iter()
            .map(|v| (v.topic.0, platform_score(v), v.length))
            .collect(),
        n_topics,
        length_ref,
        cfg,
    )
}

/// Same embedding computed from the platform-visible corpus view, so serving
/// agents place an observed corpus in exactly the space the dataset uses.
pub fn corpus_descriptor_items(
    items: &[CorpusItem],
    n_topics: usize,
    length_ref: f64,
    cfg: &DescriptorConfig,
) -> Vec<f64> {
    descriptor_from_parts(
        items
            .iter()
            .map(|c| (c.topic.0, c.platform_score(), c.length))
            .collect(),
        n_topics,
        length_ref,
        cfg,
    )
}

fn descriptor_from_parts(
    mut items: Vec<(u16, f64, f64)>,
    n_topics: usize,
    length_ref: f64,
    cfg: &DescriptorConfig,
) -> Vec<f64> {
    items.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut out = Vec::with_capacity(items.len() * 3);
    for (topic, score, length) in items {
        out.push(cfg.topic_weight * f64::from(topic) / n_topics as f64);
        out.push(cfg.length_weight * length / length_ref);
        out.push(cfg.score_weight * score);
    }
    out
}

struct StepView<'a> {
    expert_id: usize,
    corpus_ids: &'a [VideoId],
    clicked: Option<VideoId>,
    watch_time: f64,
    s_v: Option<f64>,
    engagement_rate: f64,
    evaluated_quality: Option<f64>,
    abstract_state: usize,
}

fn record_for_step(
    step: StepView<'_>,
    experts: &[ExpertProfile],
    policy: &Policy,
    catalog: &[Video],
    domain: &DomainConfig,
    descriptor: &DescriptorConfig,
) -> Result<ExpertStateRecord> {
    let profile = experts
        .iter()
        .find(|p| p.id == step.expert_id)
        .ok_or_else(|| Error::invalid(format!("unknown expert id {}", step.expert_id)))?;
    if step.abstract_state >= policy.n_states {
        return Err(Error::invalid(format!(
            "abstract state {} outside the policy's {} states",
            step.abstract_state, policy.n_states
        )));
    }
    let corpus: Vec<&Video> = step
        .corpus_ids
        .iter()
        .map(|id| {
            catalog
                .get(id.index())
                .ok_or_else(|| Error::invalid(format!("corpus video {} not in catalog", id.0)))
        })
        .collect::<Result<_>>()?;
    let clicked_topic = match step.clicked {
        Some(id) => Some(
            catalog
                .get(id.index())
                .ok_or_else(|| Error::invalid(format!("clicked video {} not in catalog", id.0)))?
                .topic,
        ),
        None => None,
    };
    Ok(ExpertStateRecord {
        expert_id: step.expert_id,
        e_s: profile.interests.clone(),
        e_c: corpus_descriptor(&corpus, domain.n_topics, domain.video_length, descriptor),
        response: ResponseSummary {
            clicked_topic,
            watch_time: step.watch_time,
            s_v: step.s_v,
            engagement_rate: step.engagement_rate,
            evaluated_quality: step.evaluated_quality,
        },
        abstract_state: step.abstract_state,
        policy_action: policy.greedy_action(step.abstract_state),
    })
}

/// One record per trajectory step. Corpus scores come from `catalog`, the
/// post-demonstration evaluated catalog, not from the step-time snapshots:
/// serving-time matching sees the same final scores.
pub fn build_dataset(
    trajectories: &[Trajectory],
    experts: &[ExpertProfile],
    policy: &Policy,
    catalog: &[Video],
    domain: &DomainConfig,
    descriptor: &DescriptorConfig,
) -> Result<Vec<ExpertStateRecord>> {
    let mut out = Vec::with_capacity(trajectories.iter().map(Trajectory::len).sum());
    for t in trajectories {
        for s in &t.steps {
            let corpus_ids: Vec<VideoId> = s.corpus.iter().map(|v| v.id).collect();
            out.push(record_for_step(
                StepView {
                    expert_id: t.expert_id,
                    corpus_ids: &corpus_ids,
                    clicked: s.response.clicked,
                    watch_time: s.response.watch_time,
                    s_v: s.response.evaluation.as_ref().map(|e| e.mean()),
                    engagement_rate: s.response.engagement_rate,
                    evaluated_quality: s.response.clicked.map(|_| s.response.observed_quality),
                    abstract_state: s.abstract_state,
                },
                experts,
                policy,
                catalog,
                domain,
                descriptor,
            )?);
        }
    }
    Ok(out)
}

/// Same as `build_dataset` but from trajectories read back off disk.
pub fn build_dataset_from_loaded(
    trajectories: &[LoadedTrajectory],
    experts: &[ExpertProfile],
    policy: &Policy,
    catalog: &[Video],
    domain: &DomainConfig,
    descriptor: &DescriptorConfig,
) -> Result<Vec<ExpertStateRecord>> {
    let mut out = Vec::with_capacity(trajectories.iter().map(|t| t.steps.len()).sum());
    for t in trajectories {
        for s in &t.steps {
            let engagement_rate = match s.clicked_video {
                Some(id) => {
                    let v = catalog.get(id.index()).ok_or_else(|| {
                        Error::invalid(format!("clicked video {} not in catalog", id.0))
                    })?;
                    if v.length > 0.0 {
                        s.watch_time / v.length
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            };
            out.push(record_for_step(
                StepView {
                    expert_id: s.expert_id,
                    corpus_ids: &s.corpus_video_ids,
                    clicked: s.clicked_video,
                    watch_time: s.watch_time,
                    s_v: s.s_v,
                    engagement_rate,
                    evaluated_quality: s.evaluated_quality,
                    abstract_state: s.abstract_state,
                },
                experts,
                policy,
                catalog,
                domain,
                descriptor,
            )?);
        }
    }
    Ok(out)
}

pub const DATASET_HEADER: &str = "expert_id,abstract_state,policy_action,clicked_topic,watch_time,s_v,engagement_rate,evaluated_quality,e_s,e_c";

fn shape_comment(shape: DatasetShape) -> String {
    format!(
        "# dataset n_topics={} corpus_size={} n_states={} n_actions={}",
        shape.n_topics, shape.corpus_size, shape.n_states, shape.n_actions
    )
}

fn parse_shape_comment(path: &Path, comment: Option<&str>) -> Result<DatasetShape> {
    let comment = comment
        .ok_or_else(|| Error::parse(path, 1, "missing `# dataset ...` config echo"))?;
    let mut fields = [None; 4];
    const KEYS: [&str; 4] = ["n_topics", "corpus_size", "n_states", "n_actions"];
    for part in comment.trim_start_matches('#').split_whitespace() {
        if let Some((key, value)) = part.split_once('=') {
            if let Some(slot) = KEYS.iter().position(|k| *k == key) {
                fields[slot] = value.parse::<usize>().ok();
            }
        }
    }
    match fields {
        [Some(n_topics), Some(corpus_size), Some(n_states), Some(n_actions)] => Ok(DatasetShape {
            n_topics,
            corpus_size,
            n_states,
            n_actions,
        }),
        _ => Err(Error::parse(path, 1, "malformed dataset config echo")),
    }
}

pub fn save_dataset(path: &Path, records: &[ExpertStateRecord], shape: DatasetShape) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(&shape_comment(shape)), DATASET_HEADER)?;
    for r in records {
        if r.e_s.len() != shape.n_topics || r.e_c.len() != 3 * shape.corpus_size {
            return Err(Error::invalid("record vector lengths disagree with the dataset shape"));
        }
        let e_s: Vec<String> = r.e_s.iter().map(|&x| fmt_f64(x)).collect();
        let e_c: Vec<String> = r.e_c.iter().map(|&x| fmt_f64(x)).collect();
        let clicked_topic = r.response.clicked_topic.map(|t| u32::from(t.0));
        w.row(&[
            &r.expert_id,
            &r.abstract_state,
            &r.policy_action,
            &crate::io_util::OptU32(clicked_topic),
            &F64(r.response.watch_time),
            &OptF64(r.response.s_v),
            &F64(r.response.engagement_rate),
            &OptF64(r.response.evaluated_quality),
            &e_s.join(";"),
            &e_c.join(";"),
        ])?;
    }
    w.finish()
}

fn parse_vector(path: &Path, line: usize, field: &str, expected: usize, name: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = field
        .split(';')
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {name} entry `{p}`")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != expected {
        return Err(Error::parse(
            path,
            line,
            format!("{name} has {} entries, expected {expected}", parts.len()),
        ));
    }
    Ok(parts)
}

/// Loads a dataset and verifies it was built under `expected` dimensions.
pub fn load_dataset(path: &Path, expected: DatasetShape) -> Result<Vec<ExpertStateRecord>> {
    let file = read_csv(path, DATASET_HEADER, "build-dataset")?;
    let stored = parse_shape_comment(path, file.comment.as_deref())?;
    if stored != expected {
        return Err(Error::ConfigMismatch(format!(
            "dataset at {} was built with n_topics={} corpus_size={} n_states={} n_actions={}, \
             current config implies n_topics={} corpus_size={} n_states={} n_actions={}",
            path.display(),
            stored.n_topics,
            stored.corpus_size,
            stored.n_states,
            stored.n_actions,
            expected.n_topics,
            expected.corpus_size,
            expected.n_states,
            expected.n_actions,
        )));
    }
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, text) in &file.rows {
        let row = Row::split(path, *line, text, 10)?;
        let abstract_state = row.usize(1, "abstract_state")?;
        let policy_action = row.usize(2, "policy_action")?;
        if abstract_state >= stored.n_states {
            return Err(Error::parse(path, row.line(), "abstract_state out of range"));
        }
        if policy_action >= stored.n_actions {
            return Err(Error::parse(path, row.line(), "policy_action out of range"));
        }
        let clicked_topic = row.opt_u32(3, "clicked_topic")?.map(|t| Topic(t as u16));
        out.push(ExpertStateRecord {
            expert_id: row.usize(0, "expert_id")?,
            abstract_state,
            policy_action,
            response: ResponseSummary {
                clicked_topic,
                watch_time: row.f64(4, "watch_time")?,
                s_v: row.opt_f64(5, "s_v")?,
                engagement_rate: row.f64(6, "engagement_rate")?,
                evaluated_quality: row.opt_f64(7, "evaluated_quality")?,
            },
            e_s: parse_vector(path, row.line(), row.str(8), stored.n_topics, "e_s")?,
            e_c: parse_vector(path, row.line(), row.str(9), 3 * stored.corpus_size, "e_c")?,
        });
    }
    Ok(out)
}
