use std::path::{Path, PathBuf};

use hdbo::benchmarks::BenchmarkSpec;
use hdbo::engine::{MethodConfig, MethodPreset};
use serde::{Deserialize, Serialize};

/// Either `"griewank:100"` or an inline `{ kind = "...", ... }` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkRef {
    Id(String),
    Spec(BenchmarkSpec),
}

impl BenchmarkRef {
    pub fn resolve(&self) -> hdbo::Result<BenchmarkSpec> {
        match self {
            BenchmarkRef::Id(s) => BenchmarkSpec::parse(s),
            BenchmarkRef::Spec(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    /// Also write a CSV export next to every JSONL trace.
    pub csv: bool,
    /// Also run uniform random search for every seed.
    pub random_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkRef,
    #[serde(default)]
    pub presets: Vec<MethodPreset>,
    /// Fully explicit methods, run in addition to `presets`.
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    pub budget: usize,
    #[serde(default = "default_doe")]
    pub doe_size: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub diagnostics: Toggles,
}

fn default_doe() -> usize {
    10
}

/// One planned run.
#[derive(Debug, Clone)]
pub struct Job {
    pub spec: BenchmarkSpec,
    /// `None` means random search.
    pub method: Option<MethodConfig>,
    pub label: String,
    pub seed: u64,
    pub path: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.check().map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        let spec = self.benchmark.resolve().map_err(|e| e.to_string())?;
        if self.presets.is_empty() && self.methods.is_empty() && !self.diagnostics.random_search {
            return Err("no presets, methods or random search to run".into());
        }
        if self.seeds.is_empty() {
            return Err("seed list is empty".into());
        }
        if self.doe_size == 0 || self.budget <= self.doe_size {
            return Err(format!("need budget > doe_size >= 1, got budget {}, doe_size {}", self.budget, self.doe_size));
        }
        for m in &self.methods {
            m.validate().map_err(|e| format!("method `{}`: {e}", m.name))?;
        }
        let mut names: Vec<String> = self.resolved_methods(spec.dim()).into_iter().map(|m| m.name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("method name `{}` appears twice", w[0]));
        }
        Ok(())
    }

    pub fn resolved_methods(&self, dim: usize) -> Vec<MethodConfig> {
        self.presets.iter().map(|p| p.method(dim)).chain(self.methods.iter().cloned()).collect()
    }

    pub fn jobs(&self, out_dir: &Path) -> hdbo::Result<Vec<Job>> {
        let spec = self.benchmark.resolve()?;
        let id = spec.id();
        let mut methods: Vec<(String, Option<MethodConfig>)> =
            self.resolved_methods(spec.dim()).into_iter().map(|m| (m.name.clone(), Some(m))).collect();
        if self.diagnostics.random_search {
            methods.push(("random".into(), None));
        }
        let mut jobs = Vec::new();
        for &seed in &self.seeds {
            for (label, method) in &methods {
                jobs.push(Job {
                    spec: spec.clone(),
                    method: method.clone(),
                    label: label.clone(),
                    seed,
                    path: out_dir.join(format!("{id}_{label}_seed{seed}.jsonl")),
                });
            }
        }
        Ok(jobs)
    }
}
