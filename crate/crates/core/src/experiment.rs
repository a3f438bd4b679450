//! Experiment manifests: a TOML description of a batch of Monte Carlo tasks,
//! run into a directory of plain files.
//!
//! ```toml
//! schema_version = 1
//! id = "d2-tail"
//!
//! [simulation]
//! dim = 2
//! seed = 42
//! episodes = 100000
//! max_generation = 16384
//! offspring = { family = "binary" }
//!
//! [[tasks]]
//! kind = "tail"
//! thresholds = [16, 32, 64, 128, 256, 512, 1024]
//! fit = { model = "power", range = [16.0, 1024.0] }
//!
//! [[tasks]]
//! kind = "survival"
//! r_values = [1, 2, 4, 8, 16, 32, 64, 128, 256]
//! kolmogorov_tolerance = 0.1
//! ```
//!
//! A run writes `manifest.toml` (with hash and version filled in),
//! `results.jsonl` (one record per task), `summary.csv` and, for tails,
//! two-column plot files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{fit_exp, fit_power, fit_stretched, kolmogorov_check, FitResult, KolmogorovReport, ModelComparison};
use crate::error::{LabError, Result};
use crate::offspring::{make_distribution, OffspringSpec};
use crate::simulator::{
    estimate_block_mean, estimate_generation_means, estimate_joint_moments, estimate_survival, estimate_tail,
    BlockMean, EpisodeConfig, GenerationMeans, MomentEstimate, SurvivalTable, TailEstimate,
    DEFAULT_BOOTSTRAP_RESAMPLES, Z95,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

fn default_max_particles() -> u64 {
    1 << 32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub dim: usize,
    pub offspring: OffspringSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<i64>>,
    pub max_generation: u32,
    #[serde(default = "default_max_particles")]
    pub max_particles: u64,
    pub seed: u64,
    pub episodes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Power,
    Exp,
    /// Stretched exponential against exponential and power law.
    Compare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub model: FitKind,
    pub range: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Tail {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<Vec<i64>>,
        thresholds: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit: Option<FitRequest>,
    },
    Survival {
        r_values: Vec<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kolmogorov_tolerance: Option<f64>,
    },
    BlockMean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<Vec<i64>>,
        r_values: Vec<u32>,
    },
    JointMoments {
        points: Vec<Vec<i64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resamples: Option<usize>,
    },
    GenerationMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub id: String,
    pub simulation: SimulationSpec,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let manifest: ExperimentManifest =
            toml::from_str(text).map_err(|e| LabError::Config(format!("manifest: {e}")))?;
        manifest.check()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(format!("manifest: {e}")))
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "manifest schema {} is not the supported {MANIFEST_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(LabError::Config("manifest id must be nonempty [A-Za-z0-9_-]".into()));
        }
        if self.simulation.episodes == 0 {
            return Err(LabError::Config("episodes must be positive".into()));
        }
        if self.tasks.is_empty() {
            return Err(LabError::Config("a manifest needs at least one task".into()));
        }
        if let Some(stored) = &self.config_hash {
            let actual = self.hash()?;
            if *stored != actual {
                return Err(LabError::Validation(format!(
                    "manifest hash {stored} does not match its contents ({actual})"
                )));
            }
        }
        self.episode_config()?.validate()
    }

    /// SHA-256 over every field that affects results: the schema version,
    /// the simulation block and the task list.
    pub fn hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            schema_version: u32,
            simulation: &'a SimulationSpec,
            tasks: &'a [Task],
        }
        let bytes = serde_json::to_vec(&Hashed {
            schema_version: self.schema_version,
            simulation: &self.simulation,
            tasks: &self.tasks,
        })?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }

    pub fn episode_config(&self) -> Result<EpisodeConfig> {
        let sim = &self.simulation;
        let mut cfg = EpisodeConfig::new(sim.dim, make_distribution(&sim.offspring)?, sim.max_generation, sim.seed);
        if let Some(start) = &sim.start {
            cfg.start = start.clone();
        }
        cfg.max_particles = sim.max_particles;
        cfg.tracked = vec![cfg.start.clone()];
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum FitOutput {
    Single(FitResult),
    Comparison(ModelComparison),
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskOutcome {
    Tail {
        estimate: TailEstimate,
        #[serde(skip_serializing_if = "Option::is_none")]
        fit: Option<FitOutput>,
    },
    Survival {
        table: SurvivalTable,
        #[serde(skip_serializing_if = "Option::is_none")]
        kolmogorov: Option<KolmogorovReport>,
    },
    BlockMean {
        means: Vec<BlockMean>,
    },
    JointMoments {
        estimate: MomentEstimate,
    },
    GenerationMeans {
        means: GenerationMeans,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub schema_version: u32,
    pub manifest_id: String,
    pub manifest_hash: String,
    pub task_index: usize,
    pub task: Task,
    pub outcome: TaskOutcome,
}

pub fn run_task(cfg: &EpisodeConfig, episodes: u64, task: &Task) -> Result<TaskOutcome> {
    let mut cfg = cfg.clone();
    Ok(match task {
        Task::Tail { site, thresholds, fit } => {
            if let Some(s) = site {
                cfg.tracked = vec![s.clone()];
            }
            let estimate = estimate_tail(&cfg, thresholds, episodes)?;
            let fit = match fit {
                None => None,
                Some(req) => {
                    let range = (req.range[0], req.range[1]);
                    Some(match req.model {
                        FitKind::Power => FitOutput::Single(fit_power(&estimate, range)?),
                        FitKind::Exp => FitOutput::Single(fit_exp(&estimate, range)?),
                        FitKind::Compare => FitOutput::Comparison(fit_stretched(&estimate, range)?),
                    })
                }
            };
            TaskOutcome::Tail { estimate, fit }
        }
        Task::Survival { r_values, kolmogorov_tolerance } => {
            let table = estimate_survival(&cfg, r_values, episodes)?;
            let kolmogorov = match kolmogorov_tolerance {
                Some(tol) => Some(kolmogorov_check(&table, cfg.offspring.variance(), *tol)?),
                None => None,
            };
            TaskOutcome::Survival { table, kolmogorov }
        }
        Task::BlockMean { site, r_values } => {
            if let Some(s) = site {
                cfg.tracked = vec![s.clone()];
            }
            let means = r_values.iter().map(|&r| estimate_block_mean(&cfg, r, episodes)).collect::<Result<_>>()?;
            TaskOutcome::BlockMean { means }
        }
        Task::JointMoments { points, resamples } => TaskOutcome::JointMoments {
            estimate: estimate_joint_moments(
                &cfg,
                points,
                episodes,
                resamples.unwrap_or(DEFAULT_BOOTSTRAP_RESAMPLES),
            )?,
        },
        Task::GenerationMeans => TaskOutcome::GenerationMeans { means: estimate_generation_means(&cfg, episodes)? },
    })
}

fn site_key(p: &[i64]) -> String {
    p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")
}

fn summary_rows(index: usize, outcome: &TaskOutcome, out: &mut String) {
    let mut row = |kind: &str, key: String, value: f64, half: f64| {
        let _ = writeln!(out, "{index},{kind},{key},{value:e},{half:e}");
    };
    match outcome {
        TaskOutcome::Tail { estimate, .. } => {
            for (n, p) in estimate.thresholds.iter().zip(&estimate.probabilities) {
                row("tail", n.to_string(), p.estimate, p.half_width());
            }
        }
        TaskOutcome::Survival { table, .. } => {
            for r in &table.rows {
                row("survival", r.r.to_string(), r.probability.estimate, r.probability.half_width());
            }
        }
        TaskOutcome::BlockMean { means } => {
            for m in means {
                row("block_mean", m.r.to_string(), m.mean.unwrap_or(f64::NAN), m.half_width.unwrap_or(f64::NAN));
            }
        }
        TaskOutcome::JointMoments { estimate } => {
            let key = estimate.points.iter().map(|p| site_key(p)).collect::<Vec<_>>().join("|");
            row("joint_moment", key, estimate.mean, Z95 * estimate.std_error);
        }
        TaskOutcome::GenerationMeans { means } => {
            for (r, (m, se)) in means.means.iter().zip(&means.std_errors).enumerate() {
                row("generation_mean", r.to_string(), *m, Z95 * se);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub hash: String,
    pub records: Vec<TaskRecord>,
}

/// Run every task and write the run directory `out_root/<id>-<hash prefix>`.
pub fn run_manifest(manifest: &ExperimentManifest, out_root: &Path, version: &str) -> Result<RunSummary> {
    manifest.check()?;
    let hash = manifest.hash()?;
    let run_dir = out_root.join(format!("{}-{}", manifest.id, &hash[..12]));
    fs::create_dir_all(&run_dir)?;

    let mut stored = manifest.clone();
    stored.config_hash = Some(hash.clone());
    stored.version = Some(version.to_string());
    if stored.created_unix.is_none() {
        stored.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    fs::write(run_dir.join("manifest.toml"), stored.to_toml()?)?;

    let cfg = manifest.episode_config()?;
    let mut jsonl = String::new();
    let mut csv = String::from("task,kind,key,value,half_width\n");
    let mut records = Vec::new();
    for (task_index, task) in manifest.tasks.iter().enumerate() {
        let outcome = run_task(&cfg, manifest.simulation.episodes, task)?;
        if let TaskOutcome::Tail { estimate, .. } = &outcome {
            let mut log_n = String::new();
            let mut sqrt_n = String::new();
            for (n, p) in estimate.thresholds.iter().zip(estimate.estimates()) {
                if p > 0.0 {
                    let _ = writeln!(log_n, "{} {}", (*n as f64).ln(), p.ln());
                    let _ = writeln!(sqrt_n, "{} {}", (*n as f64).sqrt(), p.ln());
                }
            }
            fs::write(run_dir.join(format!("tail_{task_index}_logn.dat")), log_n)?;
            fs::write(run_dir.join(format!("tail_{task_index}_sqrtn.dat")), sqrt_n)?;
        }
        summary_rows(task_index, &outcome, &mut csv);
        let record = TaskRecord {
            schema_version: MANIFEST_SCHEMA_VERSION,
            manifest_id: manifest.id.clone(),
            manifest_hash: hash.clone(),
            task_index,
            task: task.clone(),
            outcome,
        };
        jsonl.push_str(&serde_json::to_string(&record)?);
        jsonl.push('\n');
        records.push(record);
    }
    fs::write(run_dir.join("results.jsonl"), jsonl)?;
    let _ = writeln!(csv, "# manifest {hash}");
    fs::write(run_dir.join("summary.csv"), csv)?;
    Ok(RunSummary { run_dir, hash, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
schema_version = 1
id = "small"

[simulation]
dim = 1
seed = 5
episodes = 500
max_generation = 64
offspring = { family = "binary" }

[[tasks]]
kind = "tail"
thresholds = [1, 2, 4, 8, 16]

[[tasks]]
kind = "survival"
r_values = [1, 2, 4]
"#;

    #[test]
    fn hash_ignores_identity_fields() {
        let a = ExperimentManifest::from_toml(EXAMPLE).unwrap();
        let mut b = a.clone();
        b.id = "other".into();
        b.created_unix = Some(1);
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.simulation.seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn tampered_hash_is_rejected() {
        let mut m = ExperimentManifest::from_toml(EXAMPLE).unwrap();
        m.config_hash = Some("00".into());
        let text = m.to_toml().unwrap();
        assert!(matches!(ExperimentManifest::from_toml(&text), Err(LabError::Validation(_))));
    }

    #[test]
    fn runs_replay_identically() {
        let dir = tempfile::tempdir().unwrap();
        let m = ExperimentManifest::from_toml(EXAMPLE).unwrap();
        let first = run_manifest(&m, dir.path(), "test").unwrap();
        let jsonl = fs::read(first.run_dir.join("results.jsonl")).unwrap();
        let csv = fs::read(first.run_dir.join("summary.csv")).unwrap();
        let stored = ExperimentManifest::load(&first.run_dir.join("manifest.toml")).unwrap();
        let second = run_manifest(&stored, dir.path(), "test").unwrap();
        assert_eq!(first.run_dir, second.run_dir);
        assert_eq!(jsonl, fs::read(second.run_dir.join("results.jsonl")).unwrap());
        assert_eq!(csv, fs::read(second.run_dir.join("summary.csv")).unwrap());
        assert!(String::from_utf8(jsonl).unwrap().contains(&first.hash));
    }
}
