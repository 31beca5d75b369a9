use std::path::Path;

use super::{assemble, parse_f64, read_text, Dataset, RawNodes};
use crate::error::{CcError, Result};

fn is_header(line: &str) -> bool {
    line.starts_with("node_id")
}

/// Load the tab-separated layout used by the WebKB and Wikipedia benchmark
/// exports: `out1_node_feature_label.txt` (`id<TAB>f1,f2,..<TAB>label`) and
/// `out1_graph_edges.txt` (`src<TAB>dst`). Each header line is optional.
pub fn load_geom_gcn(nodes_path: &Path, edges_path: &Path, directed: bool) -> Result<Dataset> {
    let text = read_text(nodes_path)?;
    let mut nodes = RawNodes::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && is_header(line)) {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 3 {
            return Err(CcError::parse(
                nodes_path,
                i + 1,
                1,
                format!("expected 3 tab-separated fields, found {}", cells.len()),
            ));
        }
        let features = if cells[1].trim().is_empty() {
            Vec::new()
        } else {
            cells[1]
                .split(',')
                .enumerate()
                .map(|(j, c)| parse_f64(nodes_path, i + 1, j + 2, c))
                .collect::<Result<Vec<_>>>()?
        };
        nodes.push(cells[0].trim().to_string(), cells[2].trim().to_string(), features);
    }

    let text = read_text(edges_path)?;
    let mut arcs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && is_header(line)) {
            continue;
        }
        let cells: Vec<&str> = line.split_whitespace().collect();
        match cells.as_slice() {
            [src, dst] => arcs.push((src.to_string(), dst.to_string(), 1.0)),
            _ => {
                return Err(CcError::parse(
                    edges_path,
                    i + 1,
                    1,
                    format!("expected `src dst`, found {} fields", cells.len()),
                ))
            }
        }
    }
    assemble(nodes, nodes_path, arcs, directed, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn parses_with_headers() {
        let dir = tempfile::tempdir().unwrap();
        let n = dir.path().join("out1_node_feature_label.txt");
        let e = dir.path().join("out1_graph_edges.txt");
        fs::write(&n, "node_id\tfeature\tlabel\n0\t1,0,1\t2\n1\t0,0,1\t0\n2\t1,1,1\t2\n").unwrap();
        fs::write(&e, "node_id\tnode_id\n0\t1\n1\t2\n2\t1\n").unwrap();
        let ds = load_geom_gcn(&n, &e, true).unwrap();
        assert_eq!(ds.graph.edge_count(), 3);
        assert_eq!(ds.table.feature_dim(), 3);
        assert_eq!(ds.table.labels(), [1, 0, 1]);
        let ds = load_geom_gcn(&n, &e, false).unwrap();
        assert_eq!(ds.graph.edge_count(), 2);
        assert_eq!(ds.report.duplicates, 1);
    }
}
