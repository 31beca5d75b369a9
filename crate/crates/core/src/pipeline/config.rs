//! Run configuration: command-line flags and a `key = value` file with the same keys.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CcError, Result};
use crate::mlp::TrainConfig;
use crate::recipe::{AblationMode, DatasetRecipe, BUNDLED};

pub const DEFAULT_ITERATIONS: usize = 2;

/// Everything a run needs besides the loaded data.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub recipe: String,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub mode: AblationMode,
    pub out: Option<PathBuf>,
    /// Overrides for the node classifier.
    pub epochs: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    /// Overrides for the link predictor.
    pub link_epochs: Option<usize>,
    /// Seeds processed concurrently; 0 picks the available core count.
    pub jobs: usize,
}

impl PipelineConfig {
    /// Config with defaults for everything but the data location and recipe.
    pub fn new(dataset: impl Into<PathBuf>, recipe: &str) -> Self {
        PipelineConfig {
            dataset: dataset.into(),
            recipe: recipe.to_string(),
            seeds: (0..10).collect(),
            iterations: DEFAULT_ITERATIONS,
            mode: AblationMode::Both,
            out: None,
            epochs: None,
            hidden: None,
            link_epochs: None,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CcError::Config("seed list is empty".into()));
        }
        DatasetRecipe::bundled(&self.recipe)?;
        self.node_train_config(0).validate()?;
        self.link_train_config(0).validate()
    }

    pub fn node_train_config(&self, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::node_default(seed);
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(h) = &self.hidden {
            c.hidden = h.clone();
        }
        c
    }

    pub fn link_train_config(&self, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::link_default(seed);
        if let Some(e) = self.link_epochs {
            c.epochs = e;
        }
        c
    }

    pub fn worker_count(&self) -> usize {
        let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
        let jobs = if self.jobs == 0 { auto } else { self.jobs };
        jobs.clamp(1, self.seeds.len().max(1))
    }
}

/// Partially specified config, from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub dataset: Option<PathBuf>,
    pub recipe: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub iterations: Option<usize>,
    pub mode: Option<AblationMode>,
    pub out: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub link_epochs: Option<usize>,
    pub jobs: Option<usize>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CcError::Config(format!("`{key}` expects a non-negative integer, got `{value}`")))
}

/// `"0-9"`, `"0,1,5"` or a mix such as `"0-3,7"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (parse_num("seeds", a)?, parse_num("seeds", b)?);
                if b < a {
                    return Err(CcError::Config(format!("empty seed range `{part}`")));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(parse_num("seeds", part)?),
        }
    }
    if seeds.is_empty() {
        return Err(CcError::Config(format!("no seeds in `{s}`")));
    }
    Ok(seeds)
}

/// `"700"` or `"16,16"`.
pub fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    let widths = s
        .split(',')
        .map(|p| parse_num::<usize>("hidden", p))
        .collect::<Result<Vec<_>>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(CcError::Config(format!("bad hidden widths `{s}`")));
    }
    Ok(widths)
}

impl ConfigOverrides {
    /// Set one key; `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        match key {
            "dataset" => self.dataset = Some(path(value)),
            "recipe" => self.recipe = Some(value.to_string()),
            "seeds" => self.seeds = Some(parse_seeds(value)?),
            "iterations" => self.iterations = Some(parse_num(key, value)?),
            "mode" => self.mode = Some(AblationMode::parse(value)?),
            "out" => self.out = Some(path(value)),
            "epochs" => self.epochs = Some(parse_num(key, value)?),
            "hidden" => self.hidden = Some(parse_hidden(value)?),
            "link-epochs" | "link_epochs" => self.link_epochs = Some(parse_num(key, value)?),
            "jobs" => self.jobs = Some(parse_num(key, value)?),
            _ => return Err(CcError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines. `#` starts a comment. Relative paths are
    /// taken relative to the file's directory.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let base = origin.parent();
        let mut out = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CcError::Config(format!("{}:{}: expected `key = value`", origin.display(), i + 1))
            })?;
            out.set(key.trim(), value.trim(), base)
                .map_err(|e| CcError::Config(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CcError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> Self {
        ConfigOverrides {
            dataset: other.dataset.or(self.dataset),
            recipe: other.recipe.or(self.recipe),
            seeds: other.seeds.or(self.seeds),
            iterations: other.iterations.or(self.iterations),
            mode: other.mode.or(self.mode),
            out: other.out.or(self.out),
            epochs: other.epochs.or(self.epochs),
            hidden: other.hidden.or(self.hidden),
            link_epochs: other.link_epochs.or(self.link_epochs),
            jobs: other.jobs.or(self.jobs),
        }
    }

    /// Fill defaults. Without an explicit recipe the dataset directory name is
    /// used when it names a bundled recipe.
    pub fn resolve(self) -> Result<PipelineConfig> {
        let dataset = self
            .dataset
            .ok_or_else(|| CcError::Config("no dataset given (--dataset or `dataset =`)".into()))?;
        let recipe = match self.recipe {
            Some(r) => r,
            None => {
                let stem = dataset
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(str::to_ascii_lowercase)
                    .unwrap_or_default();
                if BUNDLED.contains(&stem.as_str()) {
                    stem
                } else {
                    return Err(CcError::Config(format!(
                        "no recipe given and `{stem}` is not a bundled recipe name"
                    )));
                }
            }
        };
        let mut cfg = PipelineConfig::new(dataset, &recipe);
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if let Some(t) = self.iterations {
            cfg.iterations = t;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        cfg.out = self.out;
        cfg.epochs = self.epochs;
        cfg.hidden = self.hidden;
        cfg.link_epochs = self.link_epochs;
        cfg.jobs = self.jobs.unwrap_or(0);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("0-9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("0,1, 2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("1-2,7").unwrap(), vec![1, 2, 7]);
        assert!(parse_seeds("5-3").is_err());
        assert!(parse_seeds("a").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn file_and_flags_merge() {
        let text = "# run\ndataset = data/cora\nseeds = 0-2\nmode = spatial-only\niterations=1 # short\nhidden = 64,32\n";
        let file = ConfigOverrides::parse(text, Path::new("/etc/cc/run.conf")).unwrap();
        assert_eq!(file.dataset.as_deref(), Some(Path::new("/etc/cc/data/cora")));
        let flags = ConfigOverrides {
            seeds: Some(vec![4]),
            ..Default::default()
        };
        let cfg = file.merge(flags).resolve().unwrap();
        assert_eq!(cfg.recipe, "cora");
        assert_eq!(cfg.seeds, vec![4]);
        assert_eq!(cfg.iterations, 1);
        assert_eq!(cfg.mode, AblationMode::SpatialOnly);
        assert_eq!(cfg.node_train_config(3).hidden, vec![64, 32]);
    }

    #[test]
    fn config_errors() {
        let p = Path::new("x.conf");
        for bad in ["nonsense", "colour = red", "iterations = -1", "mode = all"] {
            let e = ConfigOverrides::parse(bad, p).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
        let anon = ConfigOverrides {
            dataset: Some("somewhere/mystery".into()),
            ..Default::default()
        };
        assert_eq!(anon.resolve().unwrap_err().exit_code(), 2);
        assert_eq!(ConfigOverrides::default().resolve().unwrap_err().exit_code(), 2);
    }
}
