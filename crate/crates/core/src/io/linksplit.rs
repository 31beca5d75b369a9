use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::stage_rng;
use crate::split::{largest_remainder, SplitFractions};

pub const MIN_LINK_EDGES: usize = 20;

/// Pair count up to which negatives are drawn from an explicit list of all
/// non-adjacent pairs; above it, rejection sampling is used.
const ENUMERATION_LIMIT: usize = 2_000_000;

pub type Pair = (NodeId, NodeId);

/// Positive and negative node pairs for link prediction. Every pair is
/// unordered and stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub train_pos: Vec<Pair>,
    pub val_pos: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub train_neg: Vec<Pair>,
    pub val_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
    pub seed: u64,
}

impl LinkSplit {
    /// The graph restricted to training positives: keeps every original arc
    /// whose endpoint pair is in `train_pos`.
    pub fn training_graph(&self, g: &Graph) -> Graph {
        let keep: HashSet<Pair> = self.train_pos.iter().copied().collect();
        g.filter_edges(|u, v| keep.contains(&(u.min(v), u.max(v))))
    }
}

/// Partition the adjacent pairs of `g` into train/val/test and draw an equal
/// number of non-adjacent pairs for each part.
pub fn make_link_split(g: &Graph, fractions: SplitFractions, seed: u64) -> Result<LinkSplit> {
    fractions.validate()?;
    let mut positives = g.undirected_pairs();
    if positives.len() < MIN_LINK_EDGES {
        return Err(CcError::Argument(format!(
            "link split needs at least {MIN_LINK_EDGES} edges, graph has {}",
            positives.len()
        )));
    }
    let mut rng = stage_rng(seed, "link-split");
    positives.shuffle(&mut rng);
    let counts = largest_remainder(positives.len(), &[fractions.train, fractions.val, fractions.test]);

    let n = g.node_count();
    let all_pairs = n * n.saturating_sub(1) / 2;
    let available = all_pairs - positives.len();
    let needed = positives.len();
    if needed > available {
        return Err(CcError::Data(format!(
            "graph too dense for negative sampling: need {needed} non-adjacent pairs, \
             only {available} exist (short by {})",
            needed - available
        )));
    }

    let mut neg_rng = stage_rng(seed, "link-negatives");
    let negatives: Vec<Pair> = if all_pairs <= ENUMERATION_LIMIT {
        let mut pool: Vec<Pair> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.is_adjacent(u, v))
            .collect();
        let (chosen, _) = pool.partial_shuffle(&mut neg_rng, needed);
        chosen.to_vec()
    } else {
        let mut seen = HashSet::with_capacity(needed);
        let mut out = Vec::with_capacity(needed);
        while out.len() < needed {
            let u = neg_rng.random_range(0..n);
            let v = neg_rng.random_range(0..n);
            if u == v {
                continue;
            }
            let pair = (u.min(v), u.max(v));
            if !g.is_adjacent(pair.0, pair.1) && seen.insert(pair) {
                out.push(pair);
            }
        }
        out
    };

    let (a, b) = (counts[0], counts[0] + counts[1]);
    Ok(LinkSplit {
        train_pos: positives[..a].to_vec(),
        val_pos: positives[a..b].to_vec(),
        test_pos: positives[b..].to_vec(),
        train_neg: negatives[..a].to_vec(),
        val_neg: negatives[a..b].to_vec(),
        test_neg: negatives[b..].to_vec(),
        seed,
    })
}
