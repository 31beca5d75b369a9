//! Per-class stratified train/validation/test assignment.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::graph::NodeId;
use crate::rng::stage_rng;
use crate::table::NodeTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const NODE_DEFAULT: SplitFractions = SplitFractions {
        train: 0.48,
        val: 0.32,
        test: 0.20,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(CcError::Argument(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CcError::Argument(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Split `total` items into parts proportional to `fractions` so that the
/// parts sum to `total` exactly (largest-remainder rounding; ties go to the
/// earlier part).
pub fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    // Guard against 0.48 * 100 = 47.999999... style representation error.
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub roles: Vec<Role>,
    pub seed: u64,
    /// Classes with fewer than three members; all their nodes were put in Train.
    pub undersized_classes: Vec<usize>,
}

impl SplitAssignment {
    /// Every node in Train. Used where labels are fully observed (link prediction, homophily reports).
    pub fn all_train(node_count: usize) -> Self {
        SplitAssignment {
            roles: vec![Role::Train; node_count],
            seed: 0,
            undersized_classes: Vec::new(),
        }
    }

    pub fn role(&self, u: NodeId) -> Role {
        self.roles[u]
    }

    pub fn nodes_with(&self, role: Role) -> Vec<NodeId> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

pub fn stratified_split(nt: &NodeTable, fractions: SplitFractions, seed: u64) -> Result<SplitAssignment> {
    fractions.validate()?;
    let mut rng = stage_rng(seed, "split");
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); nt.class_count()];
    for (u, &c) in nt.labels().iter().enumerate() {
        members[c].push(u);
    }
    let mut roles = vec![Role::Train; nt.node_count()];
    let mut undersized = Vec::new();
    for (class, mut nodes) in members.into_iter().enumerate() {
        if nodes.len() < 3 {
            log::warn!(
                "class `{}` has {} member(s); all assigned to Train",
                nt.class_names()[class],
                nodes.len()
            );
            undersized.push(class);
            continue;
        }
        nodes.shuffle(&mut rng);
        let counts = largest_remainder(nodes.len(), &[fractions.train, fractions.val, fractions.test]);
        for (i, &u) in nodes.iter().enumerate() {
            roles[u] = if i < counts[0] {
                Role::Train
            } else if i < counts[0] + counts[1] {
                Role::Val
            } else {
                Role::Test
            };
        }
    }
    Ok(SplitAssignment {
        roles,
        seed,
        undersized_classes: undersized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn table(labels: Vec<usize>, classes: usize) -> NodeTable {
        let n = labels.len();
        NodeTable::new(
            (0..n).map(|i| i.to_string()).collect(),
            Array2::zeros((n, 1)),
            labels,
            (0..classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_class_exact_fractions() {
        let nt = table(vec![0; 100], 1);
        for seed in [0, 1, 99] {
            let s = stratified_split(&nt, SplitFractions::NODE_DEFAULT, seed).unwrap();
            assert_eq!(
                (s.count(Role::Train), s.count(Role::Val), s.count(Role::Test)),
                (48, 32, 20)
            );
        }
    }

    #[test]
    fn two_classes_split_per_class() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let nt = table(labels.clone(), 2);
        let s = stratified_split(&nt, SplitFractions::NODE_DEFAULT, 3).unwrap();
        for c in 0..2 {
            let count = |r| (0..100).filter(|&u| labels[u] == c && s.role(u) == r).count();
            assert_eq!((count(Role::Train), count(Role::Val), count(Role::Test)), (24, 16, 10));
        }
    }

    #[test]
    fn same_seed_same_assignment() {
        let labels: Vec<usize> = (0..257).map(|i| i % 5).collect();
        let nt = table(labels, 5);
        let a = stratified_split(&nt, SplitFractions::NODE_DEFAULT, 7).unwrap();
        let b = stratified_split(&nt, SplitFractions::NODE_DEFAULT, 7).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        let c = stratified_split(&nt, SplitFractions::NODE_DEFAULT, 8).unwrap();
        assert_ne!(a.roles, c.roles);
    }

    #[test]
    fn tiny_class_goes_to_train() {
        let mut labels = vec![0; 20];
        labels[5] = 1;
        labels[6] = 1;
        let nt = table(labels, 2);
        let s = stratified_split(&nt, SplitFractions::NODE_DEFAULT, 0).unwrap();
        assert_eq!(s.undersized_classes, vec![1]);
        assert_eq!(s.role(5), Role::Train);
        assert_eq!(s.role(6), Role::Train);
    }

    #[test]
    fn bad_fractions_rejected() {
        let nt = table(vec![0; 10], 1);
        let bad = SplitFractions { train: 0.5, val: 0.5, test: 0.5 };
        assert!(stratified_split(&nt, bad, 0).is_err());
        let neg = SplitFractions { train: 1.2, val: -0.1, test: -0.1 };
        assert!(stratified_split(&nt, neg, 0).is_err());
    }

    #[test]
    fn largest_remainder_sums_exactly() {
        for total in 0..300 {
            let c = largest_remainder(total, &[0.48, 0.32, 0.20]);
            assert_eq!(c.iter().sum::<usize>(), total);
            for (ci, f) in c.iter().zip([0.48, 0.32, 0.20]) {
                assert!((*ci as f64 - f * total as f64).abs() <= 1.0);
            }
        }
        assert_eq!(largest_remainder(100, &[0.85, 0.05, 0.10]), vec![85, 5, 10]);
    }
}
