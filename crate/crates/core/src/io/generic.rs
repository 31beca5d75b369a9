use std::path::Path;

use super::{assemble, parse_f64, Dataset, RawNodes};
use crate::error::{CcError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// When false each `src,dst` row is an undirected edge.
    pub directed: bool,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CcError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CcError::io(path, io),
        other => CcError::parse(path, line, 0, format!("{other:?}")),
    }
}

fn header(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

/// Load `nodes.csv` (`id,label,f0,..`) and `edges.csv` (`src,dst[,weight]`).
/// A `weight` column makes the graph weighted.
pub fn load_generic_csv(nodes_path: &Path, edges_path: &Path, options: CsvOptions) -> Result<Dataset> {
    let mut rdr = reader(nodes_path)?;
    let head = header(nodes_path, &mut rdr)?;
    if head.len() < 2 || head[0] != "id" || head[1] != "label" {
        return Err(CcError::parse(nodes_path, 1, 1, "header must start with `id,label`"));
    }
    let mut nodes = RawNodes::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(nodes_path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let features = record
            .iter()
            .enumerate()
            .skip(2)
            .map(|(j, cell)| parse_f64(nodes_path, line, j + 1, cell))
            .collect::<Result<Vec<_>>>()?;
        nodes.push(record[0].to_string(), record[1].to_string(), features);
    }

    let mut rdr = reader(edges_path)?;
    let head = header(edges_path, &mut rdr)?;
    let weighted = match head.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["src", "dst"] => false,
        ["src", "dst", "weight"] => true,
        _ => {
            return Err(CcError::parse(
                edges_path,
                1,
                1,
                "header must be `src,dst` or `src,dst,weight`",
            ))
        }
    };
    let mut arcs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(edges_path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let w = if weighted {
            parse_f64(edges_path, line, 3, &record[2])?
        } else {
            1.0
        };
        arcs.push((record[0].to_string(), record[1].to_string(), w));
    }
    assemble(nodes, nodes_path, arcs, options.directed, weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, nodes: &str, edges: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let n = dir.join("nodes.csv");
        let e = dir.join("edges.csv");
        fs::write(&n, nodes).unwrap();
        fs::write(&e, edges).unwrap();
        (n, e)
    }

    #[test]
    fn triangle_is_three_undirected_edges() {
        let dir = tempfile::tempdir().unwrap();
        let (n, e) = write(
            dir.path(),
            "id,label,f0\na,x,1\nb,x,0\nc,y,1\n",
            "src,dst\na,b\nb,c\nc,a\n",
        );
        let ds = load_generic_csv(&n, &e, CsvOptions::default()).unwrap();
        assert_eq!(ds.graph.edge_count(), 3);
        assert!(!ds.graph.is_directed());
        for u in 0..3 {
            assert_eq!(ds.graph.degree(u), 2);
        }
    }

    #[test]
    fn weight_mirrors_on_undirected() {
        let dir = tempfile::tempdir().unwrap();
        let (n, e) = write(dir.path(), "id,label\n0,a\n1,b\n", "src,dst,weight\n0,1,2.5\n");
        let ds = load_generic_csv(&n, &e, CsvOptions::default()).unwrap();
        assert!(ds.graph.is_weighted());
        assert_eq!(ds.graph.out_neighbors(0), &[(1, 2.5)]);
        assert_eq!(ds.graph.out_neighbors(1), &[(0, 2.5)]);
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let (n, e) = write(dir.path(), "id,label,f0,f1\na,x,1,0\nb,y,0,oops\n", "src,dst\n");
        match load_generic_csv(&n, &e, CsvOptions::default()) {
            Err(CcError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
