//! Contextual embeddings: per-class landmarks fitted on training rows and each
//! node's distance or similarity to them.

pub mod pca;

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::split::{Role, SplitAssignment};
use crate::table::NodeTable;

pub use pca::{pca_reduce, EigenMethod, PcaModel};

/// Default presence threshold for selective binary landmarks.
pub const SELECTIVE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LandmarkKind {
    /// Mean of the class's training rows.
    Centroid,
    /// 1 where any training member has the attribute.
    InclusiveBinary,
    /// 1 where at least `threshold` of training members have the attribute.
    SelectiveBinary { threshold: f64 },
}

impl LandmarkKind {
    pub fn label(&self) -> String {
        match self {
            LandmarkKind::Centroid => "centroid".into(),
            LandmarkKind::InclusiveBinary => "inclusive".into(),
            LandmarkKind::SelectiveBinary { threshold } => format!("selective-{threshold}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Euclidean,
    Cosine,
    CommonCount,
    Jaccard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    DistanceLike,
    SimilarityLike,
    /// Projected raw features; neither a distance nor a similarity.
    Raw,
}

impl Measure {
    pub fn semantics(self) -> Semantics {
        match self {
            Measure::Euclidean => Semantics::DistanceLike,
            Measure::Cosine | Measure::CommonCount | Measure::Jaccard => Semantics::SimilarityLike,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Euclidean => "euclidean",
            Measure::Cosine => "cosine",
            Measure::CommonCount => "common",
            Measure::Jaccard => "jaccard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub class: usize,
    pub kind: LandmarkKind,
    pub measure: Measure,
    pub vector: Vec<f64>,
}

fn present(x: f64) -> bool {
    x != 0.0
}

/// One landmark per class, using Train-role rows only.
pub fn compute_landmarks(
    nt: &NodeTable,
    split: &SplitAssignment,
    kind: LandmarkKind,
    measure: Measure,
) -> Result<Vec<Landmark>> {
    if split.roles.len() != nt.node_count() {
        return Err(CcError::Argument(format!(
            "split covers {} nodes, table has {}",
            split.roles.len(),
            nt.node_count()
        )));
    }
    if let LandmarkKind::SelectiveBinary { threshold } = kind {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(CcError::Argument(format!(
                "selective landmark threshold {threshold} outside (0, 1]"
            )));
        }
    }
    let n = nt.feature_dim();
    let classes = nt.class_count();
    let mut sums = vec![vec![0.0; n]; classes];
    let mut sizes = vec![0usize; classes];
    for (u, &role) in split.roles.iter().enumerate() {
        if role != Role::Train {
            continue;
        }
        let c = nt.labels()[u];
        sizes[c] += 1;
        let row = nt.feature_row(u);
        for (acc, &x) in sums[c].iter_mut().zip(row.iter()) {
            *acc += match kind {
                LandmarkKind::Centroid => x,
                _ => f64::from(u8::from(present(x))),
            };
        }
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(CcError::Data(format!(
            "class `{}` has no training members; cannot fit its landmark",
            nt.class_names()[empty]
        )));
    }
    Ok(sums
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(class, (sum, size))| {
            let size_f = size as f64;
            let vector = match kind {
                LandmarkKind::Centroid => sum.iter().map(|s| s / size_f).collect(),
                LandmarkKind::InclusiveBinary => sum.iter().map(|&s| f64::from(u8::from(s > 0.0))).collect(),
                LandmarkKind::SelectiveBinary { threshold } => sum
                    .iter()
                    // Small slack so 0.10 * 20 = 2 counts as reaching the threshold.
                    .map(|&s| f64::from(u8::from(s >= threshold * size_f - 1e-9)))
                    .collect(),
            };
            Landmark {
                class,
                kind,
                measure,
                vector,
            }
        })
        .collect())
}

/// Value of `measure` between `x` and `y`; the flag is set when cosine meets a zero vector.
pub fn measure_value(x: ArrayView1<'_, f64>, y: &[f64], measure: Measure) -> (f64, bool) {
    match measure {
        Measure::Euclidean => (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), false),
        Measure::Cosine => {
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for (a, b) in x.iter().zip(y) {
                dot += a * b;
                nx += a * a;
                ny += b * b;
            }
            if nx == 0.0 || ny == 0.0 {
                (0.0, true)
            } else {
                (dot / (nx.sqrt() * ny.sqrt()), false)
            }
        }
        Measure::CommonCount => (
            x.iter().zip(y).filter(|(a, b)| present(**a) && present(**b)).count() as f64,
            false,
        ),
        Measure::Jaccard => {
            let (mut inter, mut union) = (0usize, 0usize);
            for (a, b) in x.iter().zip(y) {
                let (pa, pb) = (present(*a), present(*b));
                inter += usize::from(pa && pb);
                union += usize::from(pa || pb);
            }
            if union == 0 {
                (0.0, false)
            } else {
                (inter as f64 / union as f64, false)
            }
        }
    }
}

/// Entry j is the measure between `x` and landmark j. Every landmark must use the same measure.
pub fn contextual_vector(x: ArrayView1<'_, f64>, landmarks: &[Landmark]) -> Result<Vec<f64>> {
    let Some(first) = landmarks.first() else {
        return Ok(Vec::new());
    };
    if landmarks.iter().any(|l| l.measure != first.measure) {
        return Err(CcError::Argument("landmarks use mixed measures".into()));
    }
    if let Some(l) = landmarks.iter().find(|l| l.vector.len() != x.len()) {
        return Err(CcError::Argument(format!(
            "feature row has {} entries, landmark for class {} has {}",
            x.len(),
            l.class,
            l.vector.len()
        )));
    }
    let mut flagged = false;
    let out = landmarks
        .iter()
        .map(|l| {
            let (v, f) = measure_value(x, &l.vector, l.measure);
            flagged |= f;
            v
        })
        .collect();
    if flagged {
        log::debug!("cosine similarity against a zero vector treated as 0");
    }
    Ok(out)
}

/// One contextual row of a recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum ContextualRowSpec {
    Landmarks { landmark: LandmarkKind, measure: Measure },
    /// Principal-component projection of the raw features.
    Projection { dim: usize },
}

impl ContextualRowSpec {
    pub fn width(&self, class_count: usize) -> usize {
        match self {
            ContextualRowSpec::Landmarks { .. } => class_count,
            ContextualRowSpec::Projection { dim } => *dim,
        }
    }

    pub fn semantics(&self) -> Semantics {
        match self {
            ContextualRowSpec::Landmarks { measure, .. } => measure.semantics(),
            ContextualRowSpec::Projection { .. } => Semantics::Raw,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ContextualRowSpec::Landmarks { landmark, measure } => {
                format!("context-{}-{}", landmark.label(), measure.as_str())
            }
            ContextualRowSpec::Projection { dim } => format!("context-pca{dim}"),
        }
    }
}

/// Fitted state behind a contextual row, kept for inspection and leak checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedRow {
    Landmarks(Vec<Landmark>),
    Projection(PcaModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualBlock {
    pub rows: Vec<ContextualRowSpec>,
    pub widths: Vec<usize>,
    pub fitted: Vec<FittedRow>,
    pub values: Array2<f64>,
    /// Nodes whose cosine entries hit a zero vector.
    pub zero_norm_nodes: usize,
}

impl ContextualBlock {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, r: usize) -> ArrayView2<'_, f64> {
        let start: usize = self.widths[..r].iter().sum();
        self.values.slice(s![.., start..start + self.widths[r]])
    }

    pub fn semantics(&self, r: usize) -> Semantics {
        self.rows[r].semantics()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for (spec, &w) in self.rows.iter().zip(&self.widths) {
            names.extend((0..w).map(|j| format!("{}[{j}]", spec.label())));
        }
        names
    }

    pub fn empty(node_count: usize) -> Self {
        ContextualBlock {
            rows: Vec::new(),
            widths: Vec::new(),
            fitted: Vec::new(),
            values: Array2::zeros((node_count, 0)),
            zero_norm_nodes: 0,
        }
    }
}

/// Fit every row on Train rows and evaluate it for all nodes.
pub fn build_contextual_block(
    nt: &NodeTable,
    split: &SplitAssignment,
    rows: &[ContextualRowSpec],
) -> Result<ContextualBlock> {
    let n_nodes = nt.node_count();
    let widths: Vec<usize> = rows.iter().map(|r| r.width(nt.class_count())).collect();
    let mut values = Array2::zeros((n_nodes, widths.iter().sum()));
    let mut fitted = Vec::with_capacity(rows.len());
    let mut zero_norm = vec![false; n_nodes];
    let mut start = 0;
    for (spec, &w) in rows.iter().zip(&widths) {
        let mut dst = values.slice_mut(s![.., start..start + w]);
        match *spec {
            ContextualRowSpec::Landmarks { landmark, measure } => {
                let lms = compute_landmarks(nt, split, landmark, measure)?;
                for u in 0..n_nodes {
                    let x = nt.feature_row(u);
                    for (j, l) in lms.iter().enumerate() {
                        let (v, flag) = measure_value(x, &l.vector, measure);
                        dst[[u, j]] = v;
                        zero_norm[u] |= flag;
                    }
                }
                fitted.push(FittedRow::Landmarks(lms));
            }
            ContextualRowSpec::Projection { dim } => {
                let train = split.nodes_with(Role::Train);
                let (z, model) = pca_reduce(nt.features().view(), &train, dim)?;
                dst.assign(&z);
                fitted.push(FittedRow::Projection(model));
            }
        }
        start += w;
    }
    let zero_norm_nodes = zero_norm.iter().filter(|&&z| z).count();
    if zero_norm_nodes > 0 {
        log::warn!("{zero_norm_nodes} nodes have a zero feature vector under cosine; entries set to 0");
    }
    Ok(ContextualBlock {
        rows: rows.to_vec(),
        widths,
        fitted,
        values,
        zero_norm_nodes,
    })
}
