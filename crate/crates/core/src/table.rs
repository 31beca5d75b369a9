use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    BinaryBagOfWords,
    RealValued,
}

/// Per-node attributes and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    node_ids: Vec<String>,
    features: Array2<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_kind: FeatureKind,
}

impl NodeTable {
    /// `labels[i]` indexes into `class_names`. Every class must occur at least once.
    pub fn new(
        node_ids: Vec<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if features.nrows() != n || node_ids.len() != n {
            return Err(CcError::Data(format!(
                "node table shape mismatch: {} ids, {} feature rows, {} labels",
                node_ids.len(),
                features.nrows(),
                n
            )));
        }
        let class_count = class_names.len();
        let mut seen = vec![false; class_count];
        for (i, &c) in labels.iter().enumerate() {
            if c >= class_count {
                return Err(CcError::Data(format!(
                    "node {i} has class index {c} but only {class_count} classes exist"
                )));
            }
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CcError::Data(format!(
                "class `{}` has no members",
                class_names[missing]
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(CcError::Data("feature matrix contains non-finite values".into()));
        }
        let feature_kind = if features.iter().all(|&x| x == 0.0 || x == 1.0) {
            FeatureKind::BinaryBagOfWords
        } else {
            FeatureKind::RealValued
        };
        Ok(NodeTable {
            node_ids,
            features,
            labels,
            class_names,
            feature_kind,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_row(&self, u: NodeId) -> ArrayView1<'_, f64> {
        self.features.row(u)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count()];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }

    /// Copy with some rows' features and labels overwritten. Used to show that
    /// hidden rows never influence fitted state.
    pub fn with_rows_blanked(&self, rows: &[NodeId], label: usize) -> Result<Self> {
        let mut features = self.features.clone();
        let mut labels = self.labels.clone();
        for &r in rows {
            features.row_mut(r).fill(0.0);
            labels[r] = label;
        }
        NodeTable::new(
            self.node_ids.clone(),
            features,
            labels,
            self.class_names.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn detects_feature_kind() {
        let ids = vec!["a".into(), "b".into()];
        let names = vec!["x".to_string(), "y".to_string()];
        let t = NodeTable::new(ids.clone(), array![[0.0, 1.0], [1.0, 1.0]], vec![0, 1], names.clone()).unwrap();
        assert_eq!(t.feature_kind(), FeatureKind::BinaryBagOfWords);
        let t = NodeTable::new(ids, array![[0.5, 1.0], [1.0, 1.0]], vec![0, 1], names).unwrap();
        assert_eq!(t.feature_kind(), FeatureKind::RealValued);
    }

    #[test]
    fn empty_class_is_rejected() {
        let r = NodeTable::new(
            vec!["a".into()],
            array![[1.0]],
            vec![0],
            vec!["x".into(), "y".into()],
        );
        assert!(matches!(r, Err(CcError::Data(_))));
    }
}
