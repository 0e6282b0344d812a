//! Precomputed item features (for example an SVD embedding of a ratings
//! matrix) used as a bandit environment.
//!
//! Format: UTF-8 CSV. The first line is a header `d=<int>,reward=<col|fitted>`.
//! Every following non-blank line is one item: `d` comma-separated floats
//! followed by one more float, the item's reward value.
//!
//! - `reward=col`: the last column is the item's mean reward.
//! - `reward=fitted`: the last column is a regression target; a parameter is
//!   fitted by least squares over the whole file once and the mean reward of
//!   an item is its inner product with that parameter.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use super::{ContextSet, Round, SparseParameter};
use crate::error::{Error, Result};
use crate::solver::GramSystem;
use crate::support::SupportSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSource {
    Column,
    Fitted,
}

#[derive(Debug, Clone)]
pub struct FeatureDataset {
    dim: usize,
    features: Vec<f64>,
    means: Vec<f64>,
    source: RewardSource,
    theta: Option<SparseParameter>,
}

impl FeatureDataset {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> usize {
        self.means.len()
    }

    pub fn source(&self) -> RewardSource {
        self.source
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean_reward(&self, i: usize) -> f64 {
        self.means[i]
    }

    /// The fitted parameter for `reward=fitted` files.
    pub fn theta(&self) -> Option<&SparseParameter> {
        self.theta.as_ref()
    }

    /// `k` distinct items sampled uniformly.
    pub fn draw_round(&self, k: usize, rng: &mut impl Rng) -> Round {
        let picked = index::sample(rng, self.items(), k);
        let mut data = Vec::with_capacity(k * self.dim);
        let mut means = Vec::with_capacity(k);
        for i in picked.iter() {
            data.extend_from_slice(self.item(i));
            means.push(self.means[i]);
        }
        Round {
            contexts: ContextSet::new(k, self.dim, data).expect("item rows are validated on load"),
            means,
        }
    }
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, path)
}

/// Parses feature-file text; `path` is only used in error messages.
pub fn parse_features(text: &str, path: &Path) -> Result<FeatureDataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;

    let mut dim = None;
    let mut source = None;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(1, format!("header field `{}` is not key=value", field.trim())))?;
        match key.trim() {
            "d" => {
                let d: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| err(1, format!("bad dimension `{}`", value.trim())))?;
                if d == 0 {
                    return Err(err(1, "dimension must be >= 1".into()));
                }
                dim = Some(d);
            }
            "reward" => {
                source = Some(match value.trim() {
                    "col" => RewardSource::Column,
                    "fitted" => RewardSource::Fitted,
                    other => return Err(err(1, format!("unknown reward convention `{other}`"))),
                })
            }
            other => return Err(err(1, format!("unknown header key `{other}`"))),
        }
    }
    let dim = dim.ok_or_else(|| err(1, "header lacks d=<int>".into()))?;
    let source = source.ok_or_else(|| err(1, "header lacks reward=<col|fitted>".into()))?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(err(
                line_no,
                format!(
                    "expected {} fields (d = {dim} plus reward), found {}",
                    dim + 1,
                    fields.len()
                ),
            ));
        }
        for (col, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                err(
                    line_no,
                    format!("column {}: `{}` is not a number", col + 1, f.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(err(line_no, format!("column {}: non-finite value", col + 1)));
            }
            if col < dim {
                features.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    if targets.is_empty() {
        return Err(err(1, "file has no item rows".into()));
    }

    let (means, theta) = match source {
        RewardSource::Column => (targets, None),
        RewardSource::Fitted => {
            let theta = least_squares(dim, &features, &targets)?;
            let means = features
                .chunks_exact(dim)
                .map(|row| super::dot(row, &theta))
                .collect();
            let support = SupportSet::above_threshold(&theta, 0.0);
            (means, Some(SparseParameter { theta, support }))
        }
    };
    Ok(FeatureDataset {
        dim,
        features,
        means,
        source,
        theta,
    })
}

fn least_squares(dim: usize, features: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    let mut sys = GramSystem::new(dim);
    for (row, &y) in features.chunks_exact(dim).zip(targets) {
        sys.push(row, y)?;
    }
    let gram = DMatrix::from_fn(dim, dim, |r, c| sys.gram(r, c));
    let rhs = DVector::from_column_slice(sys.xty());
    // A vanishing ridge keeps rank-deficient files solvable.
    let jitter = 1e-10 * (gram.trace() / dim as f64).max(1e-300);
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => (gram + DMatrix::identity(dim, dim) * jitter)
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("feature Gram matrix is not positive semidefinite".into()))?,
    };
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{stream_rng, Stream};
    use std::fmt::Write;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    fn synthetic_file(items: usize, dim: usize, source: &str) -> String {
        let mut s = format!("d={dim},reward={source}\n");
        for i in 0..items {
            let row: Vec<String> = (0..dim)
                .map(|j| format!("{}", ((i * 31 + j * 7) % 13) as f64 / 13.0 - 0.5))
                .collect();
            writeln!(s, "{},{}", row.join(","), i as f64 * 0.01).unwrap();
        }
        s
    }

    #[test]
    fn round_shape_matches_header() {
        let ds = parse_features(&synthetic_file(100, 70, "col"), p()).unwrap();
        assert_eq!((ds.dim(), ds.items()), (70, 100));
        let mut rng = stream_rng(1, Stream::Contexts(0));
        let round = ds.draw_round(30, &mut rng);
        assert_eq!((round.contexts.k(), round.contexts.d()), (30, 70));
        assert_eq!(round.means.len(), 30);
    }

    #[test]
    fn sampling_is_without_replacement_and_deterministic() {
        let ds = parse_features(&synthetic_file(40, 3, "col"), p()).unwrap();
        let mut a = stream_rng(2, Stream::Contexts(0));
        let mut b = stream_rng(2, Stream::Contexts(0));
        for _ in 0..20 {
            let ra = ds.draw_round(40, &mut a);
            let rb = ds.draw_round(40, &mut b);
            assert_eq!(ra.contexts, rb.contexts);
            let mut m = ra.means.clone();
            m.sort_by(f64::total_cmp);
            m.dedup();
            assert_eq!(m.len(), 40);
        }
    }

    #[test]
    fn wrong_arity_names_line() {
        let mut text = synthetic_file(10, 4, "col");
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[6] = "1.0,2.0,3.0".into();
        text = lines.join("\n");
        match parse_features(&text, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_names_line() {
        let text = "d=2,reward=col\n1,2,3\n1,x,3\n";
        let e = parse_features(text, p()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(e.to_string().contains("line 3"));
    }

    #[test]
    fn bad_headers() {
        for h in [
            "",
            "d=2",
            "reward=col",
            "d=0,reward=col",
            "d=2,reward=rating",
            "d=2,reward=col,x=1",
            "nonsense",
        ] {
            let text = format!("{h}\n1,2,3\n");
            assert!(
                matches!(parse_features(&text, p()), Err(Error::Parse { line: 1, .. })),
                "{h}"
            );
        }
        assert!(parse_features("d=2,reward=col\n\n", p()).is_err());
    }

    #[test]
    fn fitted_rewards_recover_linear_model() {
        let theta = [0.5, -1.0, 2.0];
        let mut s = String::from("d=3,reward=fitted\n");
        for i in 0..20 {
            let x = [i as f64 * 0.1, ((i * 7) % 5) as f64, ((i * 3) % 4) as f64 - 1.0];
            let y: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            writeln!(s, "{},{},{},{}", x[0], x[1], x[2], y).unwrap();
        }
        let ds = parse_features(&s, p()).unwrap();
        assert_eq!(ds.source(), RewardSource::Fitted);
        let fitted = ds.theta().unwrap();
        for (a, b) in fitted.theta.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(fitted.support, SupportSet::full(3));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_feature_file("/nonexistent/features.csv"),
            Err(Error::Io { .. })
        ));
    }
}
