use std::path::Path;

use super::{assemble, parse_f64, read_text, Dataset, RawNodes};
use crate::error::{CcError, Result};

/// Load a whitespace-separated `.content` / `.cites` pair.
///
/// Content rows are `id f_1 .. f_n label`. Cites rows are `cited citing` and
/// become the arc `citing -> cited`. The result is always directed.
pub fn load_content_cites(content_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let content = read_text(content_path)?;
    let mut nodes = RawNodes::new();
    for (i, line) in content.lines().enumerate() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.is_empty() {
            continue;
        }
        if cells.len() < 2 {
            return Err(CcError::parse(content_path, i + 1, 1, "expected `id [features..] label`"));
        }
        let last = cells.len() - 1;
        let features = cells[1..last]
            .iter()
            .enumerate()
            .map(|(j, c)| parse_f64(content_path, i + 1, j + 2, c))
            .collect::<Result<Vec<_>>>()?;
        nodes.push(cells[0].to_string(), cells[last].to_string(), features);
    }

    let cites = read_text(cites_path)?;
    let mut arcs = Vec::new();
    for (i, line) in cites.lines().enumerate() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        match cells.as_slice() {
            [] => continue,
            [cited, citing] => arcs.push((citing.to_string(), cited.to_string(), 1.0)),
            _ => {
                return Err(CcError::parse(
                    cites_path,
                    i + 1,
                    1,
                    format!("expected two ids, found {} fields", cells.len()),
                ))
            }
        }
    }
    assemble(nodes, content_path, arcs, true, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn two_node_toy() {
        let dir = tempfile::tempdir().unwrap();
        let content = dir.path().join("toy.content");
        let cites = dir.path().join("toy.cites");
        fs::write(&content, "p1\t1\t0\tTheory\np2\t0\t1\tAI\n").unwrap();
        fs::write(&cites, "p1\tp2\np1\tghost\n").unwrap();
        let ds = load_content_cites(&content, &cites).unwrap();
        assert_eq!(ds.graph.node_count(), 2);
        assert_eq!(ds.graph.edge_count(), 1);
        assert!(ds.graph.is_directed());
        // p2 cites p1
        assert!(ds.graph.has_arc(1, 0));
        assert!(!ds.graph.has_arc(0, 1));
        assert_eq!(ds.report.unknown_endpoint_edges, 1);
        assert_eq!(ds.table.class_names(), ["AI", "Theory"]);
        assert_eq!(ds.table.labels(), [1, 0]);
        assert_eq!(ds.table.feature_dim(), 2);
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let content = dir.path().join("d.content");
        let cites = dir.path().join("d.cites");
        fs::write(&content, "a 1 X\na 0 Y\n").unwrap();
        fs::write(&cites, "").unwrap();
        assert!(matches!(load_content_cites(&content, &cites), Err(CcError::Data(_))));
    }

    #[test]
    fn bad_feature_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let content = dir.path().join("d.content");
        let cites = dir.path().join("d.cites");
        fs::write(&content, "a 1 X\nb 0 q Y\n").unwrap();
        fs::write(&cites, "").unwrap();
        match load_content_cites(&content, &cites) {
            Err(CcError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
