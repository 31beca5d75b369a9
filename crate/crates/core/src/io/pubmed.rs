use std::collections::HashMap;
use std::path::Path;

use super::{assemble, parse_f64, read_text, Dataset, RawNodes};
use crate::error::{CcError, Result};

/// Load the Pubmed-Diabetes tab files.
///
/// The node file carries a banner line, then a line declaring every feature
/// as `numeric:<name>:0.0`, then rows `id<TAB>label=<c><TAB><name>=<value>..`
/// with absent words implicitly zero. Cite rows are
/// `<rowid><TAB>paper:<a><TAB>|<TAB>paper:<b>`, read as `a` cites `b`.
pub fn load_pubmed_tab(nodes_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let text = read_text(nodes_path)?;
    let mut lines = text.lines().enumerate();
    lines.next();
    let (_, decl) = lines
        .next()
        .ok_or_else(|| CcError::parse(nodes_path, 2, 1, "missing feature declaration line"))?;
    let mut column_of = HashMap::new();
    for cell in decl.split('\t') {
        let mut parts = cell.split(':');
        if let (Some("numeric"), Some(name)) = (parts.next(), parts.next()) {
            if name != "label" {
                let next = column_of.len();
                column_of.entry(name.to_string()).or_insert(next);
            }
        }
    }
    let width = column_of.len();
    let mut nodes = RawNodes::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() < 2 || cells[0].trim().is_empty() {
            continue;
        }
        let mut features = vec![0.0; width];
        let mut label = None;
        for (j, cell) in cells.iter().enumerate().skip(1) {
            let Some((key, value)) = cell.split_once('=') else {
                continue;
            };
            if key == "label" {
                label = Some(value.trim().to_string());
            } else if let Some(&c) = column_of.get(key) {
                features[c] = parse_f64(nodes_path, i + 1, j + 1, value)?;
            }
        }
        let label = label.ok_or_else(|| CcError::parse(nodes_path, i + 1, 2, "row has no `label=` field"))?;
        nodes.push(cells[0].trim().to_string(), label, features);
    }

    let text = read_text(cites_path)?;
    let mut arcs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 4 {
            continue;
        }
        let strip = |c: &str, col: usize| {
            c.trim()
                .strip_prefix("paper:")
                .map(str::to_string)
                .ok_or_else(|| CcError::parse(cites_path, i + 1, col, format!("expected `paper:<id>`, found `{c}`")))
        };
        arcs.push((strip(cells[1], 2)?, strip(cells[3], 4)?, 1.0));
    }
    assemble(nodes, nodes_path, arcs, true, false)
}
