//! Dataset loaders, link-prediction edge splits and CSV exporters.

mod export;
mod generic;
mod geom;
mod linksplit;
mod planetoid;
mod pubmed;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{CcError, Result};
use crate::graph::{BuildStats, Graph, NodeId};
use crate::table::NodeTable;

pub use export::{export_generic_csv, write_embeddings_csv};
pub use generic::{load_generic_csv, CsvOptions};
pub use geom::load_geom_gcn;
pub use linksplit::{make_link_split, LinkSplit, MIN_LINK_EDGES};
pub use planetoid::load_content_cites;
pub use pubmed::load_pubmed_tab;

/// A loaded graph plus its node table and a summary of what the loader discarded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub table: NodeTable,
    pub report: LoadReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Edge rows naming an id absent from the node file.
    pub unknown_endpoint_edges: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Non-empty edge rows read from disk, before any filtering.
    pub raw_edge_rows: usize,
}

impl LoadReport {
    fn absorb(&mut self, stats: BuildStats) {
        self.self_loops = stats.self_loops;
        self.duplicates = stats.duplicates;
    }
}

/// On-disk layouts understood by [`load_dataset_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetLayout {
    ContentCites { content: PathBuf, cites: PathBuf },
    GeomGcn { nodes: PathBuf, edges: PathBuf },
    PubmedTab { nodes: PathBuf, cites: PathBuf },
    GenericCsv { nodes: PathBuf, edges: PathBuf },
}

fn single_with_suffix(dir: &Path, suffix: &str) -> Result<Option<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CcError::io(dir, e))?;
    let mut hits = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CcError::io(dir, e))?.path();
        if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(suffix))
        {
            hits.push(path);
        }
    }
    hits.sort();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(hits.pop()),
        _ => Err(CcError::Data(format!(
            "{} contains several `*{suffix}` files: {hits:?}",
            dir.display()
        ))),
    }
}

/// Work out which layout a dataset directory uses.
pub fn detect_layout(dir: &Path) -> Result<DatasetLayout> {
    if !dir.is_dir() {
        return Err(CcError::Data(format!("dataset directory {} does not exist", dir.display())));
    }
    if let (Some(content), Some(cites)) = (
        single_with_suffix(dir, ".content")?,
        single_with_suffix(dir, ".cites")?,
    ) {
        return Ok(DatasetLayout::ContentCites { content, cites });
    }
    let geom_nodes = dir.join("out1_node_feature_label.txt");
    let geom_edges = dir.join("out1_graph_edges.txt");
    if geom_nodes.is_file() && geom_edges.is_file() {
        return Ok(DatasetLayout::GeomGcn {
            nodes: geom_nodes,
            edges: geom_edges,
        });
    }
    if let (Some(nodes), Some(cites)) = (
        single_with_suffix(dir, ".NODE.paper.tab")?,
        single_with_suffix(dir, ".DIRECTED.cites.tab")?,
    ) {
        return Ok(DatasetLayout::PubmedTab { nodes, cites });
    }
    let nodes = dir.join("nodes.csv");
    let edges = dir.join("edges.csv");
    if nodes.is_file() && edges.is_file() {
        return Ok(DatasetLayout::GenericCsv { nodes, edges });
    }
    Err(CcError::Data(format!(
        "no recognised dataset files in {} (expected *.content/*.cites, out1_*.txt, \
         *.NODE.paper.tab/*.DIRECTED.cites.tab or nodes.csv/edges.csv)",
        dir.display()
    )))
}

/// Load whatever dataset lives in `dir`. `directed` applies to layouts that do
/// not fix orientation themselves (geom-gcn and generic CSV).
pub fn load_dataset_dir(dir: &Path, directed: bool) -> Result<Dataset> {
    match detect_layout(dir)? {
        DatasetLayout::ContentCites { content, cites } => load_content_cites(&content, &cites),
        DatasetLayout::GeomGcn { nodes, edges } => load_geom_gcn(&nodes, &edges, directed),
        DatasetLayout::PubmedTab { nodes, cites } => load_pubmed_tab(&nodes, &cites),
        DatasetLayout::GenericCsv { nodes, edges } => load_generic_csv(
            &nodes,
            &edges,
            CsvOptions {
                directed,
                ..CsvOptions::default()
            },
        ),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CcError::io(path, e))
}

/// Intermediate form shared by all loaders: string ids, string labels, dense
/// feature rows and raw string-keyed arcs.
struct RawNodes {
    ids: Vec<String>,
    labels: Vec<String>,
    features: Vec<Vec<f64>>,
}

impl RawNodes {
    fn new() -> Self {
        RawNodes {
            ids: Vec::new(),
            labels: Vec::new(),
            features: Vec::new(),
        }
    }

    fn push(&mut self, id: String, label: String, features: Vec<f64>) {
        self.ids.push(id);
        self.labels.push(label);
        self.features.push(features);
    }

    fn index(&self, path: &Path) -> Result<HashMap<String, NodeId>> {
        let mut index = HashMap::with_capacity(self.ids.len());
        for (i, id) in self.ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(CcError::Data(format!(
                    "duplicate node id `{id}` in {}",
                    path.display()
                )));
            }
        }
        Ok(index)
    }

    /// Class indices follow lexicographic order of the label strings.
    fn into_table(self, path: &Path) -> Result<NodeTable> {
        let width = self.features.first().map_or(0, Vec::len);
        if let Some(bad) = self.features.iter().position(|f| f.len() != width) {
            return Err(CcError::Data(format!(
                "node `{}` in {} has {} features, expected {width}",
                self.ids[bad],
                path.display(),
                self.features[bad].len()
            )));
        }
        let class_names: Vec<String> = self
            .labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let class_of: HashMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let labels = self.labels.iter().map(|l| class_of[l.as_str()]).collect();
        let n = self.ids.len();
        let flat: Vec<f64> = self.features.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((n, width), flat)
            .map_err(|e| CcError::Data(format!("feature matrix: {e}")))?;
        NodeTable::new(self.ids, features, labels, class_names)
    }
}

/// Resolve string-keyed arcs against the node index and build the graph.
fn assemble(
    nodes: RawNodes,
    node_path: &Path,
    arcs: Vec<(String, String, f64)>,
    directed: bool,
    weighted: bool,
) -> Result<Dataset> {
    let index = nodes.index(node_path)?;
    let mut report = LoadReport {
        raw_edge_rows: arcs.len(),
        ..LoadReport::default()
    };
    let mut edges = Vec::with_capacity(arcs.len());
    for (src, dst, w) in arcs {
        match (index.get(&src), index.get(&dst)) {
            (Some(&u), Some(&v)) => edges.push((u, v, w)),
            _ => report.unknown_endpoint_edges += 1,
        }
    }
    if report.unknown_endpoint_edges > 0 {
        log::warn!(
            "dropped {} edge rows referencing unknown node ids",
            report.unknown_endpoint_edges
        );
    }
    let (graph, stats) = Graph::from_edges(index.len(), directed, weighted, edges)?;
    report.absorb(stats);
    let table = nodes.into_table(node_path)?;
    Ok(Dataset { graph, table, report })
}

fn parse_f64(path: &Path, line: usize, column: usize, cell: &str) -> Result<f64> {
    let x: f64 = cell
        .trim()
        .parse()
        .map_err(|_| CcError::parse(path, line, column, format!("`{cell}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CcError::parse(path, line, column, format!("`{cell}` is not finite")))
    }
}
