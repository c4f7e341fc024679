//! Flat-file persistence for trained models and training traces.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::{fmt_f64, read_csv, CsvWriter, Row};
use crate::irl::features::FeatureKind;
use crate::irl::maxent::{MaxEntOutcome, TraceRow};
use crate::irl::value_iteration::Policy;

const MODEL_VERSION: u32 = 1;
pub const TRACE_HEADER: &str = "iteration,grad_norm,residual_inf";

/// A trained reward/policy pair with enough metadata to audit it. The
/// serving side only needs the policy table; theta is kept for inspection
/// and reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub feature_kind: FeatureKind,
    pub gamma: f64,
    pub horizon: usize,
    pub theta: Vec<f64>,
    pub policy: Policy,
}

impl LearnedModel {
    pub fn from_outcome(outcome: &MaxEntOutcome, gamma: f64) -> Self {
        Self {
            feature_kind: outcome.reward.map.kind(),
            gamma,
            horizon: outcome.horizon,
            theta: outcome.reward.theta.clone(),
            policy: outcome.policy.clone(),
        }
    }

    /// `comment` must be a literal comment line starting with '#', the same
    /// convention the CSV writers use.
    pub fn save(&self, path: &Path, comment: &str) -> Result<()> {
        assert!(comment.starts_with('#'), "comments must start with '#'");
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{comment}")?;
        writeln!(file, "model-version,{MODEL_VERSION}")?;
        writeln!(file, "states,{}", self.policy.n_states)?;
        writeln!(file, "actions,{}", self.policy.n_actions)?;
        writeln!(file, "features,{}", self.theta.len())?;
        writeln!(file, "gamma,{}", fmt_f64(self.gamma))?;
        writeln!(file, "feature_map,{}", self.feature_kind)?;
        writeln!(file, "horizon,{}", self.horizon)?;
        writeln!(file, "theta")?;
        for t in &self.theta {
            writeln!(file, "{}", fmt_f64(*t))?;
        }
        writeln!(file, "policy")?;
        for s in 0..self.policy.n_states {
            let row: Vec<String> = self.policy.row(s).iter().map(|&p| fmt_f64(p)).collect();
            writeln!(file, "{}", row.join(","))?;
        }
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingArtifact {
                    what: format!("learned model {}", path.display()),
                    hint: "train-irl".into(),
                }
            } else {
                Error::Io(e)
            }
        })?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut reader = ModelReader {
            path,
            lines: &mut lines,
        };

        let version: u32 = reader.keyed("model-version")?;
        if version != MODEL_VERSION {
            return Err(Error::config(format!(
                "unsupported model version {version} in {}",
                path.display()
            )));
        }
        let n_states: usize = reader.keyed("states")?;
        let n_actions: usize = reader.keyed("actions")?;
        let n_features: usize = reader.keyed("features")?;
        let gamma: f64 = reader.keyed("gamma")?;
        let feature_kind: FeatureKind = reader.keyed("feature_map")?;
        let horizon: usize = reader.keyed("horizon")?;

        reader.section("theta")?;
        let mut theta = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            theta.push(reader.scalar()?);
        }
        reader.section("policy")?;
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let (line_no, line) = reader.next_line()?;
            for field in line.split(',') {
                probs.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::parse(path, line_no, format!("bad policy entry `{field}`"))
                })?);
            }
        }
        let policy = Policy::from_probs(n_states, n_actions, probs)
            .map_err(|e| Error::config(format!("{} holds a broken policy: {e}", path.display())))?;
        Ok(Self {
            feature_kind,
            gamma,
            horizon,
            theta,
            policy,
        })
    }
}

struct ModelReader<'a> {
    path: &'a Path,
    lines: &'a mut dyn Iterator<Item = (usize, &'a str)>,
}

impl<'a> ModelReader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .ok_or_else(|| Error::parse(self.path, 0, "file ended early"))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line_no, line) = self.next_line()?;
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(self.path, line_no, format!("expected `{key},<value>`")))?;
        if k != key {
            return Err(Error::parse(
                self.path,
                line_no,
                format!("expected key `{key}`, found `{k}`"),
            ));
        }
        v.trim()
            .parse::<T>()
            .map_err(|_| Error::parse(self.path, line_no, format!("bad value for `{key}`: `{v}`")))
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let (line_no, line) = self.next_line()?;
        if line != name {
            return Err(Error::parse(
                self.path,
                line_no,
                format!("expected section `{name}`, found `{line}`"),
            ));
        }
        Ok(())
    }

    fn scalar<T: std::str::FromStr>(&mut self) -> Result<T> {
        let (line_no, line) = self.next_line()?;
        line.parse::<T>()
            .map_err(|_| Error::parse(self.path, line_no, format!("bad number `{line}`")))
    }
}

pub fn save_trace(path: &Path, trace: &[TraceRow], comment: &str) -> Result<()> {
    let mut csv = CsvWriter::create(path, Some(comment), TRACE_HEADER)?;
    for row in trace {
        csv.row(&[&row.iteration, &fmt_f64(row.grad_norm), &fmt_f64(row.residual)])?;
    }
    csv.finish()
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = read_csv(path, TRACE_HEADER, "train-irl")?;
    file.rows
        .iter()
        .map(|(line_no, text)| {
            let row = Row::split(path, *line_no, text, 3)?;
            Ok(TraceRow {
                iteration: row.usize(0, "iteration")?,
                grad_norm: row.f64(1, "grad_norm")?,
                residual: row.f64(2, "residual_inf")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn model() -> LearnedModel {
        LearnedModel {
            feature_kind: FeatureKind::OneHot,
            gamma: 0.5,
            horizon: 6,
            theta: vec![0.25, -1.5, 0.0],
            policy: Policy::from_probs(3, 2, vec![0.9, 0.1, 0.3, 0.7, 0.5, 0.5]).unwrap(),
        }
    }

    #[test]
    fn model_round_trips_through_disk() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let m = model();
        m.save(&path, "# config test").unwrap();
        let loaded = LearnedModel::load(&path).unwrap();
        assert_eq!(loaded.feature_kind, m.feature_kind);
        assert_eq!(loaded.gamma, m.gamma);
        assert_eq!(loaded.horizon, m.horizon);
        for (a, b) in loaded.theta.iter().zip(&m.theta) {
            assert!((a - b).abs() < 1e-9);
        }
        for s in 0..3 {
            assert_eq!(loaded.policy.greedy_action(s), m.policy.greedy_action(s));
            for (a, b) in loaded.policy.row(s).iter().zip(m.policy.row(s)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn missing_model_names_the_producing_step() {
        let dir = tempdir().unwrap();
        let err = LearnedModel::load(&dir.path().join("nope.txt")).unwrap_err();
        match err {
            Error::MissingArtifact { hint, .. } => assert_eq!(hint, "train-irl"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn corrupted_models_report_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "model-version,1\nstates,oops\n").unwrap();
        let err = LearnedModel::load(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn trace_round_trips_through_disk() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = vec![
            TraceRow { iteration: 0, grad_norm: 1.25, residual: 0.5 },
            TraceRow { iteration: 1, grad_norm: 0.75, residual: 0.25 },
        ];
        save_trace(&path, &trace, "# config test").unwrap();
        let loaded = load_trace(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].iteration, 0);
        assert!((loaded[1].grad_norm - 0.75).abs() < 1e-9);
        assert!((loaded[1].residual - 0.25).abs() < 1e-9);
    }
}
