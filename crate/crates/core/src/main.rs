use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use classcontrast::pipeline::{
    dataset_name, load_for, parse_hidden, parse_seeds, run_ablation, run_embed, run_homophily_report,
    run_link_prediction, run_transductive, write_json, ConfigOverrides, EvalReport, PipelineConfig,
};
use classcontrast::recipe::AblationMode;
use classcontrast::Result;

#[derive(Parser)]
#[command(name = "classcontrast", version, about = "Class-contrast graph embeddings and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write iteration-0 embeddings for each seed.
    Embed(RunArgs),
    /// Transductive node classification with iterated refinement.
    Classify(RunArgs),
    /// Link prediction (85/5/10 edge split).
    Linkpred(RunArgs),
    /// Class-interaction homophily matrices and scalar measures.
    Homophily(RunArgs),
    /// Node classification under spatial-only, context-only and both.
    Ablation(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Bundled recipe name; defaults to the dataset directory name.
    #[arg(long)]
    recipe: Option<String>,
    /// Seeds, e.g. `0-9` or `0,3,5`.
    #[arg(long)]
    seeds: Option<String>,
    /// Refinement iterations after the initial prediction.
    #[arg(long)]
    iterations: Option<usize>,
    /// spatial-only, context-only or both.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file with the same keys as these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node classifier epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Node classifier hidden widths, e.g. `700` or `256,128`.
    #[arg(long)]
    hidden: Option<String>,
    /// Link predictor epochs.
    #[arg(long)]
    link_epochs: Option<usize>,
    /// Seeds run concurrently (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            dataset: self.dataset.clone(),
            recipe: self.recipe.clone(),
            seeds: self.seeds.as_deref().map(parse_seeds).transpose()?,
            iterations: self.iterations,
            mode: self.mode.as_deref().map(AblationMode::parse).transpose()?,
            out: self.out.clone(),
            epochs: self.epochs,
            hidden: self.hidden.as_deref().map(parse_hidden).transpose()?,
            link_epochs: self.link_epochs,
            jobs: self.jobs,
        };
        file.merge(flags).resolve()
    }
}

fn print_report(r: &EvalReport) {
    println!("{} {} ({}, {} seeds)", r.dataset, r.task, r.mode.as_str(), r.per_seed.len());
    for s in &r.summary {
        let tag = if r.task == "node-classification" { format!("P{}", s.iteration) } else { "test".into() };
        println!(
            "  {tag:>4}  dims {:>4}  val {:.4} ± {:.4}  test {:.4} ± {:.4}",
            s.dims, s.val_mean, s.val_std, s.test_mean, s.test_std
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let (args, kind) = match &cli.command {
        Command::Embed(a) => (a, "embed"),
        Command::Classify(a) => (a, "classify"),
        Command::Linkpred(a) => (a, "linkpred"),
        Command::Homophily(a) => (a, "homophily"),
        Command::Ablation(a) => (a, "ablation"),
    };
    let cfg = args.resolve()?;
    let (ds, recipe) = load_for(&cfg)?;
    let out = cfg.out.clone();
    match kind {
        "embed" => {
            let files = run_embed(&ds, &recipe, &cfg)?;
            println!("wrote {} embedding files", files.len());
        }
        "classify" | "linkpred" => {
            let report = if kind == "classify" {
                run_transductive(&ds, &recipe, &cfg)?
            } else {
                run_link_prediction(&ds, &recipe, &cfg)?
            };
            print_report(&report);
            if let Some(dir) = out {
                write_json(&dir.join("metrics.json"), &report)?;
            }
        }
        "homophily" => {
            let report = run_homophily_report(&ds, &recipe, &dataset_name(&cfg.dataset))?;
            for m in &report.matrices {
                match m.ratio {
                    Some(r) => println!("{:<40} ratio {r:.4}", m.matrix_name),
                    None => println!("{:<40} ratio undefined", m.matrix_name),
                }
            }
            let fmt = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.4}"));
            println!("node homophily   {}", fmt(report.scalars.node_homophily));
            println!("edge homophily   {}", fmt(report.scalars.edge_homophily));
            println!("higher homophily {}", fmt(report.scalars.higher_homophily));
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            write_json(&dir.join("homophily.json"), &report)?;
        }
        _ => {
            let report = run_ablation(&ds, &recipe, &cfg)?;
            for r in &report.reports {
                print_report(r);
            }
            if let Some(dir) = out {
                write_json(&dir.join("metrics.json"), &report)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
