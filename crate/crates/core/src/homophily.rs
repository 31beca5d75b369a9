//! Class-interaction homophily matrices, classical node/edge homophily,
//! 2-hop and contextual homophily, and checks of the identities linking them.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::contextual::Semantics;
use crate::error::{CcError, Result};
use crate::graph::{Direction, Graph, NodeId};
use crate::spatial::{build_spatial_block, SpatialRowSpec, VisibleLabels};

/// Row-normalized class-interaction matrix. Undefined rows hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct HomophilyMatrix {
    pub name: String,
    pub values: Array2<f64>,
    /// Nodes per class that contributed (positive mass).
    pub included: Vec<usize>,
    pub excluded_nodes: usize,
    /// Set when a distance-like row was converted before averaging.
    pub conversion: Option<String>,
}

impl HomophilyMatrix {
    pub fn class_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn ratio(&self) -> f64 {
        alpha_homophily_ratio(self)
    }
}

fn check_labels(rows: usize, labels: &[usize]) -> Result<usize> {
    if rows != labels.len() {
        return Err(CcError::Argument(format!(
            "{} embedding rows for {} labels",
            rows,
            labels.len()
        )));
    }
    Ok(labels.iter().copied().max().map_or(0, |m| m + 1))
}

/// `M[i][j]` is the mean over class-`i` nodes of `values[v][j] / |values[v]|_1`.
/// Nodes with zero mass are skipped; a class with no usable node gets a NaN row.
pub fn homophily_matrix(
    name: &str,
    values: ArrayView2<'_, f64>,
    labels: &[usize],
    class_count: usize,
) -> Result<HomophilyMatrix> {
    let max_label = check_labels(values.nrows(), labels)?;
    if max_label > class_count || values.ncols() != class_count {
        return Err(CcError::Argument(format!(
            "homophily matrix needs {class_count} columns and labels below {class_count}; got {} columns, max label {}",
            values.ncols(),
            max_label.saturating_sub(1)
        )));
    }
    if values.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(CcError::Argument(format!(
            "homophily matrix `{name}` needs finite non-negative entries"
        )));
    }
    let mut sums = Array2::<f64>::zeros((class_count, class_count));
    let mut included = vec![0usize; class_count];
    let mut excluded = 0;
    for (row, &c) in values.rows().into_iter().zip(labels) {
        let mass: f64 = row.sum();
        if mass <= 0.0 {
            excluded += 1;
            continue;
        }
        included[c] += 1;
        for (acc, &x) in sums.row_mut(c).iter_mut().zip(row.iter()) {
            *acc += x / mass;
        }
    }
    for (c, &count) in included.iter().enumerate() {
        if count == 0 {
            log::warn!("homophily matrix `{name}`: class {c} has no node with positive mass; row undefined");
            sums.row_mut(c).fill(f64::NAN);
        } else {
            sums.row_mut(c).mapv_inplace(|x| x / count as f64);
        }
    }
    Ok(HomophilyMatrix {
        name: name.to_string(),
        values: sums,
        included,
        excluded_nodes: excluded,
        conversion: None,
    })
}

/// Map a contextual row onto non-negative similarities: distance-like entries
/// become `1 / (1 + x)`, similarity-like rows pass through.
pub fn as_similarity(values: ArrayView2<'_, f64>, semantics: Semantics) -> Result<(Array2<f64>, Option<String>)> {
    match semantics {
        Semantics::SimilarityLike => Ok((values.to_owned(), None)),
        Semantics::DistanceLike => Ok((values.mapv(|x| 1.0 / (1.0 + x)), Some("1/(1+x)".to_string()))),
        Semantics::Raw => Err(CcError::Config(
            "projected feature rows have no class orientation; no homophily matrix".into(),
        )),
    }
}

/// Mean of the diagonal; NaN if any diagonal entry is undefined.
pub fn alpha_homophily_ratio(m: &HomophilyMatrix) -> f64 {
    let n = m.class_count();
    if n == 0 {
        return f64::NAN;
    }
    (0..n).map(|i| m.values[[i, i]]).sum::<f64>() / n as f64
}

/// Mean over nodes with at least one neighbor of the same-class neighbor fraction.
/// Orientation is ignored. NaN when no node has a neighbor.
pub fn node_homophily(g: &Graph, labels: &[usize]) -> Result<f64> {
    check_labels(g.node_count(), labels)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for u in 0..g.node_count() {
        let ns = g.simple_neighbors(u);
        if ns.is_empty() {
            continue;
        }
        let same = ns.iter().filter(|&&v| labels[v] == labels[u]).count();
        total += same as f64 / ns.len() as f64;
        counted += 1;
    }
    Ok(if counted == 0 { f64::NAN } else { total / counted as f64 })
}

/// Share of adjacent unordered pairs whose endpoints share a class.
pub fn edge_homophily(g: &Graph, labels: &[usize]) -> Result<f64> {
    check_labels(g.node_count(), labels)?;
    let pairs = g.undirected_pairs();
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let same = pairs.iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / pairs.len() as f64)
}

/// Like [`node_homophily`] over the inclusive 2-hop neighborhood.
pub fn higher_homophily(g: &Graph, labels: &[usize]) -> Result<f64> {
    check_labels(g.node_count(), labels)?;
    let mut scratch = crate::graph::NeighborhoodScratch::new(g.node_count());
    let mut buf = Vec::new();
    let mut total = 0.0;
    let mut counted = 0usize;
    for u in 0..g.node_count() {
        buf.clear();
        scratch.visit(g, u, 2, Direction::Any, &mut buf);
        if buf.is_empty() {
            continue;
        }
        let same = buf.iter().filter(|&&(v, _)| labels[v] == labels[u]).count();
        total += same as f64 / buf.len() as f64;
        counted += 1;
    }
    Ok(if counted == 0 { f64::NAN } else { total / counted as f64 })
}

/// `1 - mean(|beta_hat|_1 / |beta|_1)` where `beta_hat` zeroes the own-class
/// entry. Zero-mass rows are skipped.
pub fn contextual_homophily(beta: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let classes = check_labels(beta.nrows(), labels)?;
    if classes > beta.ncols() {
        return Err(CcError::Argument(format!(
            "labels reach class {} but beta has {} columns",
            classes - 1,
            beta.ncols()
        )));
    }
    if beta.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(CcError::Argument("contextual homophily needs finite non-negative entries".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for (row, &c) in beta.rows().into_iter().zip(labels) {
        let mass = row.sum();
        if mass <= 0.0 {
            skipped += 1;
            continue;
        }
        total += (mass - row[c]) / mass;
        counted += 1;
    }
    if skipped > 0 {
        log::warn!("contextual homophily: skipped {skipped} zero-mass rows");
    }
    Ok(if counted == 0 { f64::NAN } else { 1.0 - total / counted as f64 })
}

/// Mean of `|alpha_hat_k(v)|_1 / |alpha_k(v)|_1` over nodes with a non-empty k-hop neighborhood.
fn off_class_share(g: &Graph, labels: &[usize], k: usize) -> Result<f64> {
    let classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    let visible = VisibleLabels::new(labels.iter().map(|&c| Some(c)).collect(), classes)?;
    let block = build_spatial_block(g, &visible, &[SpatialRowSpec::counts(k, Direction::Any, false)], None)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (u, row) in block.values.rows().into_iter().enumerate() {
        let mass = row.sum();
        if mass > 0.0 {
            total += (mass - row[labels[u as NodeId]]) / mass;
            counted += 1;
        }
    }
    Ok(if counted == 0 { f64::NAN } else { total / counted as f64 })
}

fn residual(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() && rhs.is_nan() {
        0.0
    } else {
        (lhs - rhs).abs()
    }
}

/// `|(1 - H_node) - mean(|alpha_hat_1|/|alpha_1|)|`, computed along two independent paths.
pub fn verify_theorem1(g: &Graph, labels: &[usize]) -> Result<f64> {
    let h = node_homophily(g, labels)?;
    Ok(residual(1.0 - h, off_class_share(g, labels, 1)?))
}

/// The 2-hop analogue of [`verify_theorem1`].
pub fn verify_theorem_b2(g: &Graph, labels: &[usize]) -> Result<f64> {
    let h = higher_homophily(g, labels)?;
    Ok(residual(1.0 - h, off_class_share(g, labels, 2)?))
}

/// Serialized form of one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub matrix_name: String,
    pub class_order: Vec<String>,
    /// `null` marks an undefined entry.
    pub values: Vec<Vec<Option<f64>>>,
    pub ratio: Option<f64>,
    pub excluded_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conversion: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl MatrixReport {
    pub fn new(m: &HomophilyMatrix, class_order: &[String]) -> Self {
        MatrixReport {
            matrix_name: m.name.clone(),
            class_order: class_order.to_vec(),
            values: m
                .values
                .rows()
                .into_iter()
                .map(|r| r.iter().copied().map(finite).collect())
                .collect(),
            ratio: finite(m.ratio()),
            excluded_nodes: m.excluded_nodes,
            conversion: m.conversion.clone(),
        }
    }
}

/// Whole-graph scalars reported alongside the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarReport {
    pub node_homophily: Option<f64>,
    pub edge_homophily: Option<f64>,
    pub higher_homophily: Option<f64>,
    pub contextual_homophily: Option<f64>,
    pub contextual_source: Option<String>,
    pub theorem1_residual: f64,
    pub theorem_b2_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub dataset: String,
    pub matrices: Vec<MatrixReport>,
    pub scalars: ScalarReport,
}

impl ScalarReport {
    pub fn compute(g: &Graph, labels: &[usize], contextual: Option<(&str, ArrayView2<'_, f64>)>) -> Result<Self> {
        let (contextual_homophily, contextual_source) = match contextual {
            Some((name, beta)) => (finite(contextual_homophily(beta, labels)?), Some(name.to_string())),
            None => (None, None),
        };
        Ok(ScalarReport {
            node_homophily: finite(node_homophily(g, labels)?),
            edge_homophily: finite(edge_homophily(g, labels)?),
            higher_homophily: finite(higher_homophily(g, labels)?),
            contextual_homophily,
            contextual_source,
            theorem1_residual: verify_theorem1(g, labels)?,
            theorem_b2_residual: verify_theorem_b2(g, labels)?,
        })
    }
}
