//! Spatial embeddings: per-node class counts over k-hop neighborhoods.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::graph::{check_hops, Direction, Graph, HopMode, NeighborhoodScratch, NodeId};
use crate::split::{Role, SplitAssignment};
use crate::table::NodeTable;

/// Labels the spatial counter may read. `None` marks a hidden label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibleLabels {
    labels: Vec<Option<usize>>,
    class_count: usize,
}

impl VisibleLabels {
    pub fn new(labels: Vec<Option<usize>>, class_count: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= class_count) {
            return Err(CcError::Argument(format!(
                "visible label {bad} outside [0, {class_count})"
            )));
        }
        Ok(VisibleLabels { labels, class_count })
    }

    /// Every label visible.
    pub fn all(nt: &NodeTable) -> Self {
        VisibleLabels {
            labels: nt.labels().iter().map(|&c| Some(c)).collect(),
            class_count: nt.class_count(),
        }
    }

    /// Train labels always visible; Val labels visible when `show_val`; Test hidden.
    pub fn from_split(nt: &NodeTable, split: &SplitAssignment, show_val: bool) -> Self {
        let labels = nt
            .labels()
            .iter()
            .zip(&split.roles)
            .map(|(&c, &role)| match role {
                Role::Train => Some(c),
                Role::Val if show_val => Some(c),
                _ => None,
            })
            .collect();
        VisibleLabels {
            labels,
            class_count: nt.class_count(),
        }
    }

    /// Fill every hidden label from `predictions` (indexed by node).
    pub fn filled(&self, predictions: &[usize]) -> Result<Self> {
        if predictions.len() != self.labels.len() {
            return Err(CcError::Argument(format!(
                "prediction map covers {} nodes, graph has {}",
                predictions.len(),
                self.labels.len()
            )));
        }
        let labels = self
            .labels
            .iter()
            .zip(predictions)
            .map(|(l, &p)| Some(l.unwrap_or(p)))
            .collect();
        VisibleLabels::new(labels, self.class_count)
    }

    pub fn get(&self, u: NodeId) -> Option<usize> {
        self.labels[u]
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hidden_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// How a neighbor contributes to its class entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Count,
    SumWeights,
    SumReciprocals,
}

/// One spatial row: which neighborhood to count over and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialRowSpec {
    pub hops: usize,
    pub direction: Direction,
    #[serde(default)]
    pub hop_mode: HopMode,
    /// Append a final column counting neighbors whose label is hidden.
    pub transductive: bool,
    #[serde(default)]
    pub weighting: Weighting,
}

impl SpatialRowSpec {
    pub fn counts(hops: usize, direction: Direction, transductive: bool) -> Self {
        SpatialRowSpec {
            hops,
            direction,
            hop_mode: HopMode::Inclusive,
            transductive,
            weighting: Weighting::Count,
        }
    }

    pub fn width(&self, class_count: usize, unknown_column: bool) -> usize {
        class_count + usize::from(self.transductive && unknown_column)
    }

    pub fn label(&self) -> String {
        let mut s = format!("spatial-{}-{}", self.hops, self.direction.as_str());
        if self.hop_mode == HopMode::Exact {
            s.push_str("-exact");
        }
        match self.weighting {
            Weighting::Count => {}
            Weighting::SumWeights => s.push_str("-w"),
            Weighting::SumReciprocals => s.push_str("-rw"),
        }
        s
    }
}

/// Per-neighbor contribution for weighted rows: the weight of the first edge
/// on the lightest among the hop-shortest paths from `u`. Ties on total
/// weight go to the lowest first-hop node id.
struct WeightedScratch {
    depth: Vec<usize>,
    total: Vec<f64>,
    first: Vec<(NodeId, f64)>,
    touched: Vec<NodeId>,
}

impl WeightedScratch {
    fn new(n: usize) -> Self {
        WeightedScratch {
            depth: vec![usize::MAX; n],
            total: vec![0.0; n],
            first: vec![(0, 0.0); n],
            touched: Vec::new(),
        }
    }

    fn visit(&mut self, g: &Graph, u: NodeId, k: usize, direction: Direction, out: &mut Vec<(NodeId, usize, f64)>) {
        for &t in &self.touched {
            self.depth[t] = usize::MAX;
        }
        self.touched.clear();
        self.depth[u] = 0;
        self.total[u] = 0.0;
        self.touched.push(u);
        let mut frontier = vec![u];
        for d in 1..=k {
            let mut next = Vec::new();
            for &x in &frontier {
                for (y, w) in g.adjacent(x, direction) {
                    let cand_total = self.total[x] + w;
                    let cand_first = if d == 1 { (y, w) } else { self.first[x] };
                    if self.depth[y] == usize::MAX {
                        self.depth[y] = d;
                        self.total[y] = cand_total;
                        self.first[y] = cand_first;
                        self.touched.push(y);
                        next.push(y);
                    } else if self.depth[y] == d {
                        let better = cand_total < self.total[y]
                            || (cand_total == self.total[y] && cand_first.0 < self.first[y].0);
                        if better {
                            self.total[y] = cand_total;
                            self.first[y] = cand_first;
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_unstable();
            for &y in &next {
                out.push((y, d, self.first[y].1));
            }
            frontier = next;
        }
    }
}

enum Scratch {
    Plain(NeighborhoodScratch, Vec<(NodeId, usize)>),
    Weighted(WeightedScratch, Vec<(NodeId, usize, f64)>),
}

/// Fill `row` for node `u`. `row` must have width N (+1 when `unknown_column`).
fn fill_row(
    g: &Graph,
    visible: &VisibleLabels,
    u: NodeId,
    spec: &SpatialRowSpec,
    unknown_column: bool,
    scratch: &mut Scratch,
    row: &mut [f64],
) {
    row.iter_mut().for_each(|x| *x = 0.0);
    let n_classes = visible.class_count();
    let unknown_column = unknown_column && spec.transductive;
    let mut add = |v: NodeId, amount: f64| match visible.get(v) {
        Some(c) => row[c] += amount,
        None if unknown_column => row[n_classes] += amount,
        None => {}
    };
    let k = spec.hops;
    let keep = |d: usize| spec.hop_mode == HopMode::Inclusive || d == k;
    match scratch {
        Scratch::Plain(s, buf) => {
            buf.clear();
            s.visit(g, u, k, spec.direction, buf);
            for &(v, d) in buf.iter() {
                if keep(d) {
                    add(v, 1.0);
                }
            }
        }
        Scratch::Weighted(s, buf) => {
            buf.clear();
            s.visit(g, u, k, spec.direction, buf);
            for &(v, d, w) in buf.iter() {
                if keep(d) {
                    let amount = match spec.weighting {
                        Weighting::SumReciprocals => 1.0 / w,
                        _ => w,
                    };
                    add(v, amount);
                }
            }
        }
    }
}

fn scratch_for(g: &Graph, spec: &SpatialRowSpec) -> Scratch {
    match spec.weighting {
        Weighting::Count => Scratch::Plain(NeighborhoodScratch::new(g.node_count()), Vec::new()),
        _ => Scratch::Weighted(WeightedScratch::new(g.node_count()), Vec::new()),
    }
}

fn check_spec(g: &Graph, spec: &SpatialRowSpec) -> Result<()> {
    check_hops(spec.hops)?;
    if !g.is_directed() && spec.direction != Direction::Any {
        return Err(CcError::Config(format!(
            "row `{}` is directional but the graph is undirected",
            spec.label()
        )));
    }
    if spec.weighting != Weighting::Count && !g.is_weighted() {
        return Err(CcError::Config(format!(
            "row `{}` needs edge weights but the graph is unweighted",
            spec.label()
        )));
    }
    Ok(())
}

/// Class counts over the inclusive `k`-hop neighborhood of `u`. In
/// transductive mode a final entry counts neighbors with hidden labels.
pub fn spatial_counts(
    g: &Graph,
    visible: &VisibleLabels,
    u: NodeId,
    k: usize,
    direction: Direction,
    transductive: bool,
) -> Result<Vec<f64>> {
    g.check_node(u)?;
    check_hops(k)?;
    let spec = SpatialRowSpec::counts(k, direction, transductive);
    let mut row = vec![0.0; spec.width(visible.class_count(), true)];
    let mut scratch = scratch_for(g, &spec);
    fill_row(g, visible, u, &spec, true, &mut scratch, &mut row);
    Ok(row)
}

/// Weighted class sums over the inclusive `k`-hop neighborhood of `u`.
pub fn spatial_counts_weighted(
    g: &Graph,
    visible: &VisibleLabels,
    u: NodeId,
    k: usize,
    direction: Direction,
    weighting: Weighting,
) -> Result<Vec<f64>> {
    g.check_node(u)?;
    check_hops(k)?;
    if !g.is_weighted() {
        return Err(CcError::Argument("weighted spatial counts need a weighted graph".into()));
    }
    let spec = SpatialRowSpec {
        hops: k,
        direction,
        hop_mode: HopMode::Inclusive,
        transductive: false,
        weighting,
    };
    let mut row = vec![0.0; visible.class_count()];
    let mut scratch = scratch_for(g, &spec);
    fill_row(g, visible, u, &spec, false, &mut scratch, &mut row);
    Ok(row)
}

/// Spatial rows for every node, laid out side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialBlock {
    pub rows: Vec<SpatialRowSpec>,
    pub widths: Vec<usize>,
    /// True when transductive rows carry the hidden-label column.
    pub unknown_column: bool,
    pub values: Array2<f64>,
}

impl SpatialBlock {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    /// Values of row `r` for every node.
    pub fn row(&self, r: usize) -> ArrayView2<'_, f64> {
        let start: usize = self.widths[..r].iter().sum();
        self.values.slice(s![.., start..start + self.widths[r]])
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for (spec, &w) in self.rows.iter().zip(&self.widths) {
            names.extend((0..w).map(|j| format!("{}[{j}]", spec.label())));
        }
        names
    }
}

/// Build every row in `rows` for all nodes.
///
/// Without a prediction map, transductive rows are N+1 wide with the hidden
/// count last. With one, hidden nodes are counted under their predicted class
/// and every row is N wide.
pub fn build_spatial_block(
    g: &Graph,
    visible: &VisibleLabels,
    rows: &[SpatialRowSpec],
    prediction_map: Option<&[usize]>,
) -> Result<SpatialBlock> {
    if visible.len() != g.node_count() {
        return Err(CcError::Argument(format!(
            "label view covers {} nodes, graph has {}",
            visible.len(),
            g.node_count()
        )));
    }
    for spec in rows {
        check_spec(g, spec)?;
    }
    let filled;
    let (labels, unknown_column) = match prediction_map {
        Some(p) => {
            filled = visible.filled(p)?;
            (&filled, false)
        }
        None => (visible, true),
    };
    let n_classes = labels.class_count();
    let widths: Vec<usize> = rows.iter().map(|r| r.width(n_classes, unknown_column)).collect();
    let mut values = Array2::zeros((g.node_count(), widths.iter().sum()));
    let mut start = 0;
    for (spec, &w) in rows.iter().zip(&widths) {
        let mut scratch = scratch_for(g, spec);
        let mut buf = vec![0.0; w];
        for u in 0..g.node_count() {
            fill_row(g, labels, u, spec, unknown_column, &mut scratch, &mut buf);
            values
                .slice_mut(s![u, start..start + w])
                .iter_mut()
                .zip(&buf)
                .for_each(|(dst, &x)| *dst = x);
        }
        start += w;
    }
    Ok(SpatialBlock {
        rows: rows.to_vec(),
        widths,
        unknown_column,
        values,
    })
}
