use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{CcError, Result};
use crate::graph::Graph;
use crate::table::NodeTable;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| to_io(path, e))
}

fn to_io(path: &Path, e: csv::Error) -> CcError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CcError::io(path, io),
        other => CcError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Write `nodes.csv` and `edges.csv` into `dir` in the generic layout. Floats
/// use the shortest representation that parses back to the same value.
pub fn export_generic_csv(dir: &Path, g: &Graph, nt: &NodeTable) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CcError::io(dir, e))?;
    let path = dir.join("nodes.csv");
    let mut w = writer(&path)?;
    let mut head = vec!["id".to_string(), "label".to_string()];
    head.extend((0..nt.feature_dim()).map(|j| format!("f{j}")));
    w.write_record(&head).map_err(|e| to_io(&path, e))?;
    for u in 0..nt.node_count() {
        let mut row = vec![
            nt.node_ids()[u].clone(),
            nt.class_names()[nt.labels()[u]].clone(),
        ];
        row.extend(nt.feature_row(u).iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(|e| to_io(&path, e))?;
    }
    w.flush().map_err(|e| CcError::io(&path, e))?;

    let path = dir.join("edges.csv");
    let mut w = writer(&path)?;
    if g.is_weighted() {
        w.write_record(["src", "dst", "weight"]).map_err(|e| to_io(&path, e))?;
    } else {
        w.write_record(["src", "dst"]).map_err(|e| to_io(&path, e))?;
    }
    for (u, v, weight) in g.edges() {
        let mut row = vec![nt.node_ids()[u].clone(), nt.node_ids()[v].clone()];
        if g.is_weighted() {
            row.push(weight.to_string());
        }
        w.write_record(&row).map_err(|e| to_io(&path, e))?;
    }
    w.flush().map_err(|e| CcError::io(&path, e))
}

/// One row per node: `id,dim0,dim1,..`.
pub fn write_embeddings_csv(path: &Path, ids: &[String], embeddings: ArrayView2<'_, f64>) -> Result<()> {
    if ids.len() != embeddings.nrows() {
        return Err(CcError::Argument(format!(
            "{} ids for {} embedding rows",
            ids.len(),
            embeddings.nrows()
        )));
    }
    let mut w = writer(path)?;
    let mut head = vec!["id".to_string()];
    head.extend((0..embeddings.ncols()).map(|j| format!("dim{j}")));
    w.write_record(&head).map_err(|e| to_io(path, e))?;
    for (id, row) in ids.iter().zip(embeddings.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| CcError::io(path, e))
}
