//! End-to-end runs: transductive node classification with iterated spatial
//! refinement, link prediction, ablation and homophily reports.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use serde::Serialize;

pub use config::{parse_hidden, parse_seeds, ConfigOverrides, PipelineConfig, DEFAULT_ITERATIONS};

use crate::contextual::{build_contextual_block, ContextualBlock, Semantics};
use crate::error::{CcError, Result};
use crate::graph::{Direction, Graph};
use crate::homophily::{as_similarity, homophily_matrix, HomophilyReport, MatrixReport, ScalarReport};
use crate::io::{load_dataset_dir, make_link_split, write_embeddings_csv, Dataset};
use crate::mlp::{
    accuracy, auc, link_scores, mean_std, predict_classes, train_link_predictor, train_node_classifier, MlpModel,
};
use crate::recipe::{AblationMode, DatasetRecipe};
use crate::spatial::{build_spatial_block, SpatialBlock, SpatialRowSpec, VisibleLabels};
use crate::split::{stratified_split, Role, SplitAssignment, SplitFractions};
use crate::table::NodeTable;

pub const LINK_FRACTIONS: SplitFractions = SplitFractions {
    train: 0.85,
    val: 0.05,
    test: 0.10,
};

trait StageExt<T> {
    fn stage(self, stage: &'static str, seed: u64) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str, seed: u64) -> Result<T> {
        self.map_err(|e| e.at_stage(stage, seed))
    }
}

/// Load the dataset directory named in `cfg` with its recipe.
pub fn load_for(cfg: &PipelineConfig) -> Result<(Dataset, DatasetRecipe)> {
    let recipe = DatasetRecipe::bundled(&cfg.recipe)?;
    let ds = load_dataset_dir(&cfg.dataset, recipe.directed)?;
    recipe.check_graph(ds.graph.is_directed())?;
    log::info!(
        "{}: {} nodes, {} edges, {} classes, {} features",
        cfg.dataset.display(),
        ds.graph.node_count(),
        ds.graph.edge_count(),
        ds.table.class_count(),
        ds.table.feature_dim()
    );
    Ok((ds, recipe))
}

pub fn dataset_name(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string()
}

/// Concatenate the blocks selected by `mode`, spatial first. `expected`, when
/// given, must equal the resulting width.
pub fn assemble_embedding(
    spatial: &SpatialBlock,
    contextual: &ContextualBlock,
    mode: AblationMode,
    expected: Option<usize>,
) -> Result<Array2<f64>> {
    if spatial.values.nrows() != contextual.values.nrows() {
        return Err(CcError::Argument(format!(
            "spatial block covers {} nodes, contextual block {}",
            spatial.values.nrows(),
            contextual.values.nrows()
        )));
    }
    let mut parts = Vec::new();
    if mode.uses_spatial() {
        parts.push(spatial.values.view());
    }
    if mode.uses_context() {
        parts.push(contextual.values.view());
    }
    let x = if parts.is_empty() {
        Array2::zeros((spatial.values.nrows(), 0))
    } else {
        concatenate(Axis(1), &parts).expect("row counts checked")
    };
    if let Some(e) = expected {
        if x.ncols() != e {
            return Err(CcError::Config(format!(
                "assembled embedding has {} dimensions, recipe expects {e}",
                x.ncols()
            )));
        }
    }
    Ok(x)
}

/// Width a recipe prescribes for `nt` at `iteration`. Declared dimensions are
/// used for full embeddings when the class count matches the recipe's.
fn expected_width(recipe: &DatasetRecipe, classes: usize, iteration: usize, mode: AblationMode) -> usize {
    match (mode, recipe.class_count, recipe.expected_dim(iteration)) {
        (AblationMode::Both, Some(n), Some(d)) if n == classes => d,
        _ => recipe.width(classes, iteration, mode),
    }
}

/// Outcome of one seed: one entry per iteration (one in total for link runs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub val: Vec<f64>,
    pub test: Vec<f64>,
    pub best_epoch: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub dims: usize,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Per-seed results and their summary for one task and mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    pub dataset: String,
    pub recipe: String,
    pub mode: AblationMode,
    pub iterations: usize,
    pub per_seed: Vec<SeedResult>,
    pub summary: Vec<IterationSummary>,
    /// Iteration whose mean test score is headlined: the better of P1/P2 when
    /// iterations ran, otherwise P0.
    pub selected_iteration: usize,
    pub selected_mean: f64,
    pub selected_std: f64,
}

impl EvalReport {
    fn build(task: &str, metric: &str, dataset: &str, recipe: &str, mode: AblationMode, seeds: Vec<SeedResult>) -> Self {
        let iterations = seeds.first().map_or(0, |s| s.test.len().saturating_sub(1));
        let summary: Vec<IterationSummary> = (0..=iterations)
            .map(|t| {
                let val: Vec<f64> = seeds.iter().map(|s| s.val[t]).collect();
                let test: Vec<f64> = seeds.iter().map(|s| s.test[t]).collect();
                let (val_mean, val_std) = mean_std(&val);
                let (test_mean, test_std) = mean_std(&test);
                IterationSummary {
                    iteration: t,
                    dims: seeds.first().map_or(0, |s| s.dims[t]),
                    val_mean,
                    val_std,
                    test_mean,
                    test_std,
                }
            })
            .collect();
        let candidates = if iterations == 0 { 0..=0 } else { 1..=iterations.min(2) };
        let mut selected = *candidates.start();
        for t in candidates {
            if summary[t].test_mean > summary[selected].test_mean {
                selected = t;
            }
        }
        EvalReport {
            task: task.into(),
            metric: metric.into(),
            dataset: dataset.into(),
            recipe: recipe.into(),
            mode,
            iterations,
            selected_iteration: selected,
            selected_mean: summary[selected].test_mean,
            selected_std: summary[selected].test_std,
            per_seed: seeds,
            summary,
        }
    }

    /// Headline score for each seed at the selected iteration.
    pub fn selected_per_seed(&self) -> Vec<f64> {
        self.per_seed.iter().map(|s| s.test[self.selected_iteration]).collect()
    }
}

/// Everything produced for one seed of a transductive run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub split: SplitAssignment,
    pub context: ContextualBlock,
    pub embeddings: Vec<Array2<f64>>,
    pub models: Vec<MlpModel>,
    pub predictions: Vec<Vec<usize>>,
    pub result: SeedResult,
}

/// Run every seed, `jobs` at a time, keeping seed order in the output.
fn for_each_seed<T: Send>(seeds: &[u64], jobs: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let slots: Vec<Mutex<Option<Result<T>>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let out = f(seeds[i]);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every seed ran"))
        .collect()
}

fn write_embeddings(out: Option<&Path>, nt: &NodeTable, seed: u64, iteration: usize, x: &Array2<f64>) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CcError::Config(format!("cannot create {}: {e}", dir.display())))?;
        write_embeddings_csv(&dir.join(format!("embeddings_{seed}_{iteration}.csv")), nt.node_ids(), x.view())?;
    }
    Ok(())
}

/// Iteration-0 embedding for one seed: Test labels hidden, Val labels shown.
pub fn initial_embedding(
    g: &Graph,
    nt: &NodeTable,
    recipe: &DatasetRecipe,
    mode: AblationMode,
    split: &SplitAssignment,
) -> Result<Array2<f64>> {
    let visible = VisibleLabels::from_split(nt, split, true);
    let spatial = build_spatial_block(g, &visible, if mode.uses_spatial() { &recipe.spatial } else { &[] }, None)?;
    let context = if recipe.context_active(0, mode) {
        build_contextual_block(nt, split, &recipe.contextual)?
    } else {
        ContextualBlock::empty(nt.node_count())
    };
    assemble_embedding(&spatial, &context, mode, Some(expected_width(recipe, nt.class_count(), 0, mode)))
}

/// One seed of the transductive protocol on a fixed split. `truth` is read
/// only to score Test predictions; every other stage sees `nt` alone.
pub fn run_seed(
    g: &Graph,
    nt: &NodeTable,
    truth: &[usize],
    recipe: &DatasetRecipe,
    cfg: &PipelineConfig,
    seed: u64,
    split: SplitAssignment,
) -> Result<SeedRun> {
    let n = nt.node_count();
    let classes = nt.class_count();
    let mode = cfg.mode;
    let train_cfg = cfg.node_train_config(seed);
    let test_nodes = split.nodes_with(Role::Test);
    let val_nodes = split.nodes_with(Role::Val);
    let mut train_labels = nt.labels().to_vec();
    for &u in &test_nodes {
        train_labels[u] = 0;
    }
    let visible = VisibleLabels::from_split(nt, &split, true);
    let context = if mode.uses_context() {
        build_contextual_block(nt, &split, &recipe.contextual).stage("contextual", seed)?
    } else {
        ContextualBlock::empty(n)
    };
    let no_context = ContextualBlock::empty(n);
    let spatial_rows: &[SpatialRowSpec] = if mode.uses_spatial() { &recipe.spatial } else { &[] };

    let mut run = SeedRun {
        split: split.clone(),
        context: ContextualBlock::empty(n),
        embeddings: Vec::new(),
        models: Vec::new(),
        predictions: Vec::new(),
        result: SeedResult {
            seed,
            dims: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            best_epoch: Vec::new(),
        },
    };
    for t in 0..=cfg.iterations {
        // Without spatial rows every iteration sees the same input.
        if t > 0 && !mode.uses_spatial() {
            let r = &mut run.result;
            r.dims.push(r.dims[0]);
            r.val.push(r.val[0]);
            r.test.push(r.test[0]);
            r.best_epoch.push(r.best_epoch[0]);
            run.embeddings.push(run.embeddings[0].clone());
            run.models.push(run.models[0].clone());
            run.predictions.push(run.predictions[0].clone());
            continue;
        }
        let previous = run.predictions.last().map(Vec::as_slice);
        let spatial = build_spatial_block(g, &visible, spatial_rows, previous).stage("spatial", seed)?;
        let ctx = if recipe.context_active(t, mode) { &context } else { &no_context };
        let x = assemble_embedding(&spatial, ctx, mode, Some(expected_width(recipe, classes, t, mode)))
            .stage("assemble", seed)?;
        write_embeddings(cfg.out.as_deref(), nt, seed, t, &x).stage("write-embeddings", seed)?;
        let (model, history) =
            train_node_classifier(x.view(), &train_labels, classes, &split, &train_cfg).stage("train", seed)?;
        let (pred, _) = predict_classes(&model, x.view());
        let pick = |nodes: &[usize], labels: &[usize]| -> (Vec<usize>, Vec<usize>) {
            (nodes.iter().map(|&u| pred[u]).collect(), nodes.iter().map(|&u| labels[u]).collect())
        };
        let (vp, vt) = pick(&val_nodes, nt.labels());
        let (tp, tt) = pick(&test_nodes, truth);
        let r = &mut run.result;
        r.dims.push(x.ncols());
        r.val.push(accuracy(&vp, &vt));
        r.test.push(accuracy(&tp, &tt));
        r.best_epoch.push(history.best_epoch);
        log::debug!(
            "seed {seed} P{t}: {} dims, val {:.4}, test {:.4}",
            x.ncols(),
            r.val[t],
            r.test[t]
        );
        run.embeddings.push(x);
        run.models.push(model);
        run.predictions.push(pred);
    }
    run.context = context;
    Ok(run)
}

/// Transductive node classification over every configured seed.
pub fn run_transductive(ds: &Dataset, recipe: &DatasetRecipe, cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let started = Instant::now();
    let seeds = for_each_seed(&cfg.seeds, cfg.worker_count(), |seed| {
        let split = stratified_split(&ds.table, SplitFractions::NODE_DEFAULT, seed).stage("split", seed)?;
        Ok(run_seed(&ds.graph, &ds.table, ds.table.labels(), recipe, cfg, seed, split)?.result)
    })?;
    let report = EvalReport::build(
        "node-classification",
        "accuracy",
        &dataset_name(&cfg.dataset),
        &recipe.name,
        cfg.mode,
        seeds,
    );
    log::info!(
        "{} {}: P{} test accuracy {:.4} ± {:.4} in {:.1?}",
        report.dataset,
        cfg.mode.as_str(),
        report.selected_iteration,
        report.selected_mean,
        report.selected_std,
        started.elapsed()
    );
    Ok(report)
}

/// Link prediction for one seed. Spatial rows count every label but only on
/// the graph of training edges.
pub fn link_seed(g: &Graph, nt: &NodeTable, recipe: &DatasetRecipe, cfg: &PipelineConfig, seed: u64) -> Result<SeedResult> {
    let split = make_link_split(g, LINK_FRACTIONS, seed).stage("link-split", seed)?;
    let train_graph = split.training_graph(g);
    let full = recipe.fully_labeled();
    let visible = VisibleLabels::all(nt);
    let rows: &[SpatialRowSpec] = if cfg.mode.uses_spatial() { &full.spatial } else { &[] };
    let spatial = build_spatial_block(&train_graph, &visible, rows, None).stage("spatial", seed)?;
    let context = if cfg.mode.uses_context() {
        build_contextual_block(nt, &SplitAssignment::all_train(nt.node_count()), &full.contextual)
            .stage("contextual", seed)?
    } else {
        ContextualBlock::empty(nt.node_count())
    };
    // Every label is visible, so the widths are those of a refined iteration.
    let x = assemble_embedding(
        &spatial,
        &context,
        cfg.mode,
        Some(expected_width(recipe, nt.class_count(), 1, cfg.mode)),
    )
    .stage("assemble", seed)?;
    let (model, history) = train_link_predictor(x.view(), &split, &cfg.link_train_config(seed)).stage("train", seed)?;
    let score = |pos: &[(usize, usize)], neg: &[(usize, usize)]| -> Result<f64> {
        let mut pairs = pos.to_vec();
        pairs.extend_from_slice(neg);
        let labels: Vec<bool> = (0..pairs.len()).map(|i| i < pos.len()).collect();
        auc(&link_scores(&model, x.view(), &pairs), &labels)
    };
    let val = score(&split.val_pos, &split.val_neg).unwrap_or(f64::NAN);
    let test = score(&split.test_pos, &split.test_neg).stage("evaluate", seed)?;
    Ok(SeedResult {
        seed,
        dims: vec![x.ncols()],
        val: vec![val],
        test: vec![test],
        best_epoch: vec![history.best_epoch],
    })
}

pub fn run_link_prediction(ds: &Dataset, recipe: &DatasetRecipe, cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let started = Instant::now();
    let seeds = for_each_seed(&cfg.seeds, cfg.worker_count(), |seed| {
        link_seed(&ds.graph, &ds.table, recipe, cfg, seed)
    })?;
    let report = EvalReport::build(
        "link-prediction",
        "auc",
        &dataset_name(&cfg.dataset),
        &recipe.name,
        cfg.mode,
        seeds,
    );
    log::info!(
        "{} link AUC {:.4} ± {:.4} in {:.1?}",
        report.dataset,
        report.selected_mean,
        report.selected_std,
        started.elapsed()
    );
    Ok(report)
}

/// One transductive report per ablation mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub dataset: String,
    pub recipe: String,
    pub reports: Vec<EvalReport>,
}

impl AblationReport {
    pub fn get(&self, mode: AblationMode) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.mode == mode)
    }
}

pub fn run_ablation(ds: &Dataset, recipe: &DatasetRecipe, cfg: &PipelineConfig) -> Result<AblationReport> {
    let reports = AblationMode::ALL
        .iter()
        .map(|&mode| {
            let c = PipelineConfig { mode, ..cfg.clone() };
            run_transductive(ds, recipe, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        dataset: dataset_name(&cfg.dataset),
        recipe: recipe.name.clone(),
        reports,
    })
}

/// Matrices for the undirected 1- and 2-hop rows, every recipe spatial row
/// and every class-oriented contextual row, all with every label visible.
pub fn run_homophily_report(ds: &Dataset, recipe: &DatasetRecipe, name: &str) -> Result<HomophilyReport> {
    let g = &ds.graph;
    let nt = &ds.table;
    let classes = nt.class_count();
    let labels = nt.labels();
    let mut rows = vec![
        SpatialRowSpec::counts(1, Direction::Any, false),
        SpatialRowSpec::counts(2, Direction::Any, false),
    ];
    for r in recipe.fully_labeled().spatial {
        if !rows.contains(&r) && (g.is_directed() || r.direction == Direction::Any) {
            rows.push(r);
        }
    }
    let visible = VisibleLabels::all(nt);
    let spatial = build_spatial_block(g, &visible, &rows, None)?;
    let mut matrices = Vec::new();
    for (i, spec) in rows.iter().enumerate() {
        let m = homophily_matrix(&spec.label(), spatial.row(i), labels, classes)?;
        matrices.push(MatrixReport::new(&m, nt.class_names()));
    }

    let context = build_contextual_block(nt, &SplitAssignment::all_train(nt.node_count()), &recipe.contextual)?;
    let mut start = 0;
    let mut scalar_source: Option<(String, Array2<f64>)> = None;
    for (spec, &w) in context.rows.iter().zip(&context.widths) {
        let block = context.values.slice(ndarray::s![.., start..start + w]);
        start += w;
        if spec.semantics() == Semantics::Raw {
            continue;
        }
        let (sim, conversion) = as_similarity(block, spec.semantics())?;
        let mut m = homophily_matrix(&spec.label(), sim.view(), labels, classes)?;
        m.conversion = conversion;
        matrices.push(MatrixReport::new(&m, nt.class_names()));
        if scalar_source.is_none() {
            scalar_source = Some((spec.label(), sim));
        }
    }
    let scalars = ScalarReport::compute(
        g,
        labels,
        scalar_source.as_ref().map(|(n, v)| (n.as_str(), v.view())),
    )?;
    Ok(HomophilyReport {
        dataset: name.to_string(),
        matrices,
        scalars,
    })
}

/// Iteration-0 embeddings for every seed, written as CSV. Returns the paths.
pub fn run_embed(ds: &Dataset, recipe: &DatasetRecipe, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| CcError::Config("embed needs an output directory (--out)".into()))?;
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let split = stratified_split(&ds.table, SplitFractions::NODE_DEFAULT, seed).stage("split", seed)?;
        let x = initial_embedding(&ds.graph, &ds.table, recipe, cfg.mode, &split).stage("embed", seed)?;
        write_embeddings(Some(out), &ds.table, seed, 0, &x).stage("write-embeddings", seed)?;
        written.push(out.join(format!("embeddings_{seed}_0.csv")));
    }
    Ok(written)
}

/// Pretty JSON plus trailing newline; identical inputs give identical bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CcError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CcError::Data(format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CcError::Config(format!("cannot write {}: {e}", path.display())))
}
