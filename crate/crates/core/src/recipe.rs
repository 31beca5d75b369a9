//! Bundled per-dataset embedding recipes.

use serde::Serialize;

use crate::contextual::{ContextualRowSpec, LandmarkKind, Measure, SELECTIVE_THRESHOLD};
use crate::error::{CcError, Result};
use crate::graph::Direction;
use crate::spatial::SpatialRowSpec;

/// Which embedding blocks a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    SpatialOnly,
    ContextOnly,
    Both,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [AblationMode::SpatialOnly, AblationMode::ContextOnly, AblationMode::Both];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "spatial" | "spatial-only" => Ok(AblationMode::SpatialOnly),
            "context" | "context-only" | "contextual" => Ok(AblationMode::ContextOnly),
            "both" => Ok(AblationMode::Both),
            other => Err(CcError::Config(format!(
                "unknown mode `{other}` (expected spatial-only, context-only or both)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::SpatialOnly => "spatial-only",
            AblationMode::ContextOnly => "context-only",
            AblationMode::Both => "both",
        }
    }

    pub fn uses_spatial(self) -> bool {
        self != AblationMode::ContextOnly
    }

    pub fn uses_context(self) -> bool {
        self != AblationMode::SpatialOnly
    }
}

/// How to embed one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRecipe {
    pub name: String,
    pub directed: bool,
    pub spatial: Vec<SpatialRowSpec>,
    pub contextual: Vec<ContextualRowSpec>,
    /// First iteration whose embedding includes the contextual block.
    pub contextual_from_iteration: usize,
    /// Class count the expected dimensions were written for.
    pub class_count: Option<usize>,
    /// Full embedding width at iteration 0 and at every later iteration.
    pub expected_dims: Option<[usize; 2]>,
}

fn directional_rows() -> Vec<SpatialRowSpec> {
    vec![
        SpatialRowSpec::counts(1, Direction::Incoming, true),
        SpatialRowSpec::counts(1, Direction::Outgoing, true),
        SpatialRowSpec::counts(2, Direction::Incoming, true),
        SpatialRowSpec::counts(2, Direction::Outgoing, true),
    ]
}

fn undirected_rows() -> Vec<SpatialRowSpec> {
    vec![
        SpatialRowSpec::counts(1, Direction::Any, true),
        SpatialRowSpec::counts(2, Direction::Any, true),
    ]
}

fn binary_landmarks() -> Vec<ContextualRowSpec> {
    vec![
        ContextualRowSpec::Landmarks {
            landmark: LandmarkKind::InclusiveBinary,
            measure: Measure::CommonCount,
        },
        ContextualRowSpec::Landmarks {
            landmark: LandmarkKind::SelectiveBinary {
                threshold: SELECTIVE_THRESHOLD,
            },
            measure: Measure::CommonCount,
        },
    ]
}

fn centroid_landmarks() -> Vec<ContextualRowSpec> {
    vec![ContextualRowSpec::Landmarks {
        landmark: LandmarkKind::Centroid,
        measure: Measure::Euclidean,
    }]
}

pub const BUNDLED: [&str; 10] = [
    "cora",
    "citeseer",
    "pubmed",
    "texas",
    "cornell",
    "wisconsin",
    "chameleon",
    "squirrel",
    "generic-directed",
    "generic-undirected",
];

impl DatasetRecipe {
    /// Look up a bundled recipe by (case-insensitive) name.
    pub fn bundled(name: &str) -> Result<Self> {
        let key = name.to_ascii_lowercase();
        let r = |directed, spatial, contextual, from, classes: Option<usize>, dims: Option<[usize; 2]>| DatasetRecipe {
            name: key.clone(),
            directed,
            spatial,
            contextual,
            contextual_from_iteration: from,
            class_count: classes,
            expected_dims: dims,
        };
        Ok(match key.as_str() {
            "cora" => r(true, directional_rows(), binary_landmarks(), 0, Some(7), Some([46, 42])),
            "citeseer" => r(true, directional_rows(), binary_landmarks(), 0, Some(6), Some([40, 36])),
            "pubmed" => r(
                true,
                directional_rows(),
                vec![ContextualRowSpec::Projection { dim: 100 }],
                1,
                Some(3),
                Some([16, 112]),
            ),
            "texas" | "cornell" | "wisconsin" => {
                r(true, directional_rows(), binary_landmarks(), 0, Some(5), Some([34, 30]))
            }
            "chameleon" | "squirrel" => r(false, undirected_rows(), binary_landmarks(), 0, Some(5), Some([22, 20])),
            "generic-directed" => r(true, directional_rows(), centroid_landmarks(), 0, None, None),
            "generic-undirected" => r(false, undirected_rows(), centroid_landmarks(), 0, None, None),
            _ => {
                return Err(CcError::Config(format!(
                    "unknown recipe `{name}` (bundled: {})",
                    BUNDLED.join(", ")
                )))
            }
        })
    }

    pub fn spatial_width(&self, class_count: usize, iteration: usize) -> usize {
        let unknown = iteration == 0;
        self.spatial.iter().map(|r| r.width(class_count, unknown)).sum()
    }

    pub fn contextual_width(&self, class_count: usize, iteration: usize) -> usize {
        if iteration < self.contextual_from_iteration {
            return 0;
        }
        self.contextual.iter().map(|r| r.width(class_count)).sum()
    }

    /// Embedding width implied by the configured rows.
    pub fn width(&self, class_count: usize, iteration: usize, mode: AblationMode) -> usize {
        let s = if mode.uses_spatial() { self.spatial_width(class_count, iteration) } else { 0 };
        let c = if self.context_active(iteration, mode) {
            self.contextual.iter().map(|r| r.width(class_count)).sum()
        } else {
            0
        };
        s + c
    }

    /// Declared width for a full (`Both`) embedding, when the recipe fixes one.
    pub fn expected_dim(&self, iteration: usize) -> Option<usize> {
        self.expected_dims.map(|d| d[usize::from(iteration > 0)])
    }

    /// Whether the contextual block takes part at `iteration` under `mode`.
    /// Context-only runs always include it.
    pub fn context_active(&self, iteration: usize, mode: AblationMode) -> bool {
        match mode {
            AblationMode::SpatialOnly => false,
            AblationMode::ContextOnly => true,
            AblationMode::Both => iteration >= self.contextual_from_iteration,
        }
    }

    /// The same recipe with every spatial row made non-transductive, for runs
    /// where every label is visible.
    pub fn fully_labeled(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.spatial {
            row.transductive = false;
        }
        r
    }

    pub fn check_graph(&self, directed: bool) -> Result<()> {
        if self.spatial.iter().any(|r| r.direction != Direction::Any) && !directed {
            return Err(CcError::Config(format!(
                "recipe `{}` uses directional rows but the graph is undirected",
                self.name
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_dimensions_match_declared() {
        for name in BUNDLED {
            let r = DatasetRecipe::bundled(name).unwrap();
            let (Some(n), Some(dims)) = (r.class_count, r.expected_dims) else {
                assert!(name.starts_with("generic"));
                continue;
            };
            for it in 0..4 {
                assert_eq!(r.width(n, it, AblationMode::Both), dims[usize::from(it > 0)], "{name} iteration {it}");
                assert_eq!(r.expected_dim(it), Some(dims[usize::from(it > 0)]));
            }
        }
    }

    #[test]
    fn split_of_spatial_and_context() {
        let cora = DatasetRecipe::bundled("CORA").unwrap();
        assert_eq!(cora.spatial_width(7, 0), 32);
        assert_eq!(cora.spatial_width(7, 1), 28);
        assert_eq!(cora.contextual_width(7, 0), 14);
        let pubmed = DatasetRecipe::bundled("pubmed").unwrap();
        assert_eq!((pubmed.spatial_width(3, 1), pubmed.contextual_width(3, 1)), (12, 100));
        assert_eq!(pubmed.width(3, 0, AblationMode::Both), 16);
        assert!(pubmed.context_active(0, AblationMode::ContextOnly));
        assert_eq!(pubmed.width(3, 0, AblationMode::ContextOnly), 100);
        assert_eq!(DatasetRecipe::bundled("squirrel").unwrap().width(5, 1, AblationMode::SpatialOnly), 10);
    }

    #[test]
    fn unknown_recipe_and_direction_mismatch() {
        assert!(matches!(DatasetRecipe::bundled("ogbn-arxiv"), Err(CcError::Config(_))));
        assert!(DatasetRecipe::bundled("cora").unwrap().check_graph(false).is_err());
        assert!(DatasetRecipe::bundled("chameleon").unwrap().check_graph(true).is_ok());
    }

    #[test]
    fn fully_labeled_drops_unknown_column() {
        let r = DatasetRecipe::bundled("texas").unwrap().fully_labeled();
        assert!(r.spatial.iter().all(|s| !s.transductive));
        assert_eq!(AblationMode::parse("Context_Only").unwrap(), AblationMode::ContextOnly);
        assert!(AblationMode::parse("all").is_err());
    }
}
