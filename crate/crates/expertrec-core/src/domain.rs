//! Shared content-domain types: topics, videos, slates, evaluation features,
//! and viewer responses, plus catalog generation and corpus retrieval.
//!
//! A video carries two independent scalars in [-1,1]:
//!
//! * `latent_quality` is the ground-truth beneficial quality. It is hidden
//!   from every recommendation agent; it drives expert perception, expert
//!   evaluations, and the viewer's post-click experience.
//! * `appeal` is the platform-visible attractiveness signal (the score a
//!   quality-agnostic ranker would use).
//!
//! Expert evaluation publishes `evaluated_quality`, the platform's only
//! trustworthy estimate of beneficial quality.

use rand::Rng;
use rand_chacha::rand_core::RngCore;
use rand_distr::{Distribution, Normal};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::{read_csv, CsvWriter, OptF64, Row, F64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topic(pub u16);

impl Topic {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VideoId(pub u32);

impl VideoId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: VideoId,
    pub topic: Topic,
    /// Length in minutes.
    pub length: f64,
    /// Ground-truth beneficial quality in [-1,1]; hidden from agents.
    pub latent_quality: f64,
    /// Platform-visible attractiveness in [-1,1], independent of quality.
    pub appeal: f64,
    pub evaluated: bool,
    pub evaluated_quality: Option<f64>,
}

/// The measured quality of a consumed video: the published expert evaluation
/// when one exists, the ground-truth latent quality otherwise.
pub fn video_score(v: &Video) -> f64 {
    match (v.evaluated, v.evaluated_quality) {
        (true, Some(q)) => q,
        _ => v.latent_quality,
    }
}

/// What a recommendation agent may rank by: the published evaluation when one
/// exists, the attractiveness signal otherwise. Never the latent quality.
pub fn platform_score(v: &Video) -> f64 {
    match (v.evaluated, v.evaluated_quality) {
        (true, Some(q)) => q,
        _ => v.appeal,
    }
}

pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// An ordered recommendation of distinct videos.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slate {
    pub items: Vec<VideoId>,
}

impl Slate {
    pub fn new(items: Vec<VideoId>) -> Self {
        debug_assert!(
            {
                let mut seen = items.clone();
                seen.sort();
                seen.dedup();
                seen.len() == items.len()
            },
            "slate items must be distinct"
        );
        Slate { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// The four evaluation axes an expert scores, each in [-1,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationFeatures {
    pub pedagogy: f64,
    pub accuracy: f64,
    pub importance: f64,
    pub entertainment: f64,
}

impl EvaluationFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.pedagogy,
            self.accuracy,
            self.importance,
            self.entertainment,
        ]
    }

    /// s_v: the evaluation summary used for the quality update.
    pub fn mean(&self) -> f64 {
        let a = self.as_array();
        a.iter().sum::<f64>() / a.len() as f64
    }
}

/// Outcome of showing a slate: at most one click, its watch time, and the
/// observer-side quality reading. `watch_time` is zero exactly when nothing
/// was clicked; `engagement_rate` is watch time over length.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub clicked: Option<VideoId>,
    pub watch_time: f64,
    pub engagement_rate: f64,
    pub evaluation: Option<EvaluationFeatures>,
    pub observed_quality: f64,
}

impl Response {
    pub fn no_click() -> Self {
        Response {
            clicked: None,
            watch_time: 0.0,
            engagement_rate: 0.0,
            evaluation: None,
            observed_quality: 0.0,
        }
    }
}

/// Samples a fresh catalog: topics uniform, latent quality and appeal
/// independent U(-1,1), nothing evaluated.
pub fn sample_catalog(
    seed: u64,
    size: usize,
    n_topics: usize,
    video_length: f64,
) -> Result<Vec<Video>> {
    if size == 0 {
        return Err(Error::invalid("catalog size must be positive"));
    }
    if n_topics == 0 || n_topics > u16::MAX as usize {
        return Err(Error::invalid("n_topics must lie in [1, 65535]"));
    }
    if size > u32::MAX as usize {
        return Err(Error::invalid("catalog size exceeds the id space"));
    }
    let mut rng = crate::rng::stream(seed, crate::rng::STREAM_CATALOG, 0);
    let mut catalog = Vec::with_capacity(size);
    for id in 0..size {
        let topic = Topic(rng.gen_range(0..n_topics as u16));
        let latent_quality = rng.gen_range(-1.0..=1.0);
        let appeal = rng.gen_range(-1.0..=1.0);
        catalog.push(Video {
            id: VideoId(id as u32),
            topic,
            length: video_length,
            latent_quality,
            appeal,
            evaluated: false,
            evaluated_quality: None,
        });
    }
    Ok(catalog)
}

/// Retrieves the m catalog indices with the highest interest-biased keys
/// `interests[topic] + Normal(0, noise)`, mimicking a candidate-retrieval
/// stage. Deterministic given the RNG state: ties break on the lower index.
pub fn sample_corpus(
    catalog: &[Video],
    interests: &[f64],
    m: usize,
    noise_sd: f64,
    rng: &mut dyn RngCore,
    scratch: &mut Vec<(f64, u32)>,
) -> Result<Vec<usize>> {
    if m == 0 || m > catalog.len() {
        return Err(Error::invalid(format!(
            "corpus size {m} must lie in [1, {}]",
            catalog.len()
        )));
    }
    let normal = Normal::new(0.0, noise_sd.max(0.0))
        .map_err(|e| Error::invalid(format!("corpus noise: {e}")))?;
    scratch.clear();
    scratch.reserve(catalog.len());
    let mut rng = rng;
    for v in catalog {
        let topic = v.topic.index();
        if topic >= interests.len() {
            return Err(Error::invalid(format!(
                "video {} has topic {} outside the interest vector",
                v.id.0, topic
            )));
        }
        let key = interests[topic] + normal.sample(&mut rng);
        scratch.push((key, v.id.0));
    }
    let cmp = |a: &(f64, u32), b: &(f64, u32)| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    let n = scratch.len();
    if m < n {
        scratch.select_nth_unstable_by(m - 1, cmp);
        scratch.truncate(m);
    }
    scratch.sort_unstable_by(cmp);
    Ok(scratch.iter().map(|&(_, id)| id as usize).collect())
}

const CATALOG_HEADER: &str = "id,topic,length,latent_quality,evaluated,evaluated_quality,appeal";

pub fn save_catalog(path: &Path, catalog: &[Video], config_echo: &str) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(config_echo), CATALOG_HEADER)?;
    for v in catalog {
        w.row(&[
            &v.id.0,
            &v.topic.0,
            &F64(v.length),
            &F64(v.latent_quality),
            &(v.evaluated as u8),
            &OptF64(v.evaluated_quality),
            &F64(v.appeal),
        ])?;
    }
    w.finish()
}

/// Loads a catalog written by `save_catalog`. `missing_hint` names the
/// pipeline stage that produces the file.
pub fn load_catalog(path: &Path, missing_hint: &str) -> Result<Vec<Video>> {
    let file = read_csv(path, CATALOG_HEADER, missing_hint)?;
    let mut catalog = Vec::with_capacity(file.rows.len());
    for (line, text) in &file.rows {
        let row = Row::split(path, *line, text, 7)?;
        let id = row.u32(0, "id")?;
        if id as usize != catalog.len() {
            return Err(Error::parse(
                path,
                row.line(),
                format!("ids must be dense and ordered; expected {}, found {id}", catalog.len()),
            ));
        }
        let evaluated = row.bool01(4, "evaluated")?;
        let evaluated_quality = row.opt_f64(5, "evaluated_quality")?;
        if evaluated && evaluated_quality.is_none() {
            return Err(Error::parse(
                path,
                row.line(),
                "evaluated videos must carry evaluated_quality",
            ));
        }
        catalog.push(Video {
            id: VideoId(id),
            topic: Topic(row.u16(1, "topic")?),
            length: row.f64(2, "length")?,
            latent_quality: row.f64(3, "latent_quality")?,
            appeal: row.f64(6, "appeal")?,
            evaluated,
            evaluated_quality: if evaluated { evaluated_quality } else { None },
        });
    }
    if catalog.is_empty() {
        return Err(Error::parse(path, 1, "catalog has no rows"));
    }
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn video(latent: f64, evaluated: Option<f64>, appeal: f64) -> Video {
        Video {
            id: VideoId(0),
            topic: Topic(0),
            length: 4.0,
            latent_quality: latent,
            appeal,
            evaluated: evaluated.is_some(),
            evaluated_quality: evaluated,
        }
    }

    #[test]
    fn score_passes_latent_through_when_unevaluated() {
        assert_eq!(video_score(&video(0.3, None, -0.9)), 0.3);
    }

    #[test]
    fn score_prefers_published_evaluation() {
        assert_eq!(video_score(&video(0.3, Some(0.8), -0.9)), 0.8);
    }

    #[test]
    fn score_boundaries_survive() {
        assert_eq!(video_score(&video(-1.0, None, 0.0)), -1.0);
        assert_eq!(video_score(&video(0.0, Some(1.0), 0.0)), 1.0);
    }

    #[test]
    fn platform_score_never_reads_latent() {
        assert_eq!(platform_score(&video(0.3, None, -0.9)), -0.9);
        assert_eq!(platform_score(&video(0.3, Some(0.8), -0.9)), 0.8);
    }

    #[test]
    fn catalog_is_deterministic_in_the_seed() {
        let a = sample_catalog(7, 500, 8, 4.0).unwrap();
        let b = sample_catalog(7, 500, 8, 4.0).unwrap();
        assert_eq!(a, b);
        let c = sample_catalog(8, 500, 8, 4.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn catalog_statistics_match_the_generating_distributions() {
        let n = 10_000usize;
        let topics = 8usize;
        let catalog = sample_catalog(42, n, topics, 4.0).unwrap();

        // Topic counts: binomial(n, 1/8); 5 sigma band.
        let expected = n as f64 / topics as f64;
        let sigma = (n as f64 * (1.0 / topics as f64) * (1.0 - 1.0 / topics as f64)).sqrt();
        let mut counts = vec![0usize; topics];
        for v in &catalog {
            counts[v.topic.index()] += 1;
        }
        for &c in &counts {
            assert!(
                (c as f64 - expected).abs() < 5.0 * sigma,
                "topic count {c} outside 5 sigma of {expected}"
            );
        }

        let mean_latent: f64 =
            catalog.iter().map(|v| v.latent_quality).sum::<f64>() / n as f64;
        assert!(mean_latent.abs() < 0.05, "mean latent {mean_latent}");
        let mean_appeal: f64 = catalog.iter().map(|v| v.appeal).sum::<f64>() / n as f64;
        assert!(mean_appeal.abs() < 0.05, "mean appeal {mean_appeal}");
        assert!(catalog.iter().all(|v| !v.evaluated));
    }

    #[test]
    fn empty_catalog_is_rejected() {
        assert!(sample_catalog(1, 0, 8, 4.0).is_err());
    }

    #[test]
    fn corpus_prefers_high_interest_topics() {
        let catalog = sample_catalog(3, 4000, 4, 4.0).unwrap();
        let mut interests = vec![-0.5; 4];
        interests[2] = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scratch = Vec::new();
        let mut hits = 0usize;
        let mut total = 0usize;
        for _ in 0..200 {
            let corpus =
                sample_corpus(&catalog, &interests, 5, 0.1, &mut rng, &mut scratch).unwrap();
            for idx in corpus {
                total += 1;
                if catalog[idx].topic == Topic(2) {
                    hits += 1;
                }
            }
        }
        assert!(
            hits as f64 / total as f64 > 0.95,
            "dominant-topic share {}",
            hits as f64 / total as f64
        );
    }

    #[test]
    fn corpus_is_deterministic_and_bounded() {
        let catalog = sample_catalog(3, 100, 4, 4.0).unwrap();
        let interests = vec![0.1; 4];
        let mut scratch = Vec::new();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let a = sample_corpus(&catalog, &interests, 5, 0.1, &mut r1, &mut scratch).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let b = sample_corpus(&catalog, &interests, 5, 0.1, &mut r2, &mut scratch).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(sample_corpus(&catalog, &interests, 101, 0.1, &mut r1, &mut scratch).is_err());
    }

    #[test]
    fn catalog_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.csv");
        let mut catalog = sample_catalog(11, 50, 4, 4.0).unwrap();
        catalog[3].evaluated = true;
        catalog[3].evaluated_quality = Some(0.25);
        save_catalog(&path, &catalog, "# config test").unwrap();
        let loaded = load_catalog(&path, "gen-catalog").unwrap();
        assert_eq!(loaded.len(), catalog.len());
        for (a, b) in catalog.iter().zip(&loaded) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.topic, b.topic);
            assert_eq!(a.evaluated, b.evaluated);
            assert!((a.latent_quality - b.latent_quality).abs() < 1e-9);
            assert!((a.appeal - b.appeal).abs() < 1e-9);
            match (a.evaluated_quality, b.evaluated_quality) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                (None, None) => {}
                other => panic!("evaluation mismatch: {other:?}"),
            }
        }
    }
}
