use std::path::{Path, PathBuf};
use std::time::Duration;

use drskit::metrics::Smoothing;
use drskit::plausibility::{CutoffMode, Normalization, ScorerKind, ScorerSpec};
use drskit::recombine::{IterationMix, RecombineConfig};
use drskit::split::{DistanceKind, GroupOrder, Method, Ratio, SplitPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Everything a run depends on besides its input files. Written into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub split: SplitSection,
    pub recombine: RecombineSection,
    pub scorer: ScorerSection,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            corpus: None,
            assignment: None,
            out: PathBuf::from("out"),
            workers: 0,
            split: SplitSection::default(),
            recombine: RecombineSection::default(),
            scorer: ScorerSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub method: Method,
    pub group_size: usize,
    pub ratio: Ratio,
    pub distance: DistanceKind,
    pub order: GroupOrder,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            method: Method::Systematic,
            group_size: 10,
            ratio: Ratio::EIGHT_ONE_ONE,
            distance: DistanceKind::CharLevenshtein,
            order: GroupOrder::Ascending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecombineSection {
    pub substitution_weight: u32,
    pub extension_weight: u32,
    pub iterations: Vec<IterationMix>,
    pub target: usize,
    pub max_rounds: usize,
    pub patience: usize,
    pub splice: bool,
    /// Share of the pool kept after plausibility ranking.
    pub fraction: f64,
    pub cutoff: CutoffMode,
}

impl Default for RecombineSection {
    fn default() -> Self {
        let base = RecombineConfig::default();
        RecombineSection {
            substitution_weight: base.substitution_weight,
            extension_weight: base.extension_weight,
            iterations: base.iterations,
            target: base.target,
            max_rounds: base.max_rounds,
            patience: base.patience,
            splice: base.splice,
            fraction: 0.05,
            cutoff: CutoffMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerChoice {
    Ngram,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub kind: ScorerChoice,
    pub order: usize,
    pub alpha: f64,
    pub command: Option<String>,
    pub normalization: Normalization,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            kind: ScorerChoice::Ngram,
            order: 3,
            alpha: 0.1,
            command: None,
            normalization: Normalization::PerToken,
            timeout_secs: 60,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub restarts: usize,
    pub bleu_max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            restarts: 4,
            bleu_max_n: 4,
            smoothing: Smoothing::None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub method: Option<Method>,
    pub ratio: Option<Ratio>,
    pub group_size: Option<usize>,
    pub fraction: Option<f64>,
    pub target: Option<usize>,
    pub scorer: Option<ScorerChoice>,
    pub scorer_cmd: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(anyhow::anyhow!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(anyhow::anyhow!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(self.seed, o.seed);
        set!(self.workers, o.workers);
        set!(self.out, o.out);
        set!(self.split.method, o.method);
        set!(self.split.ratio, o.ratio);
        set!(self.split.group_size, o.group_size);
        set!(self.recombine.fraction, o.fraction);
        set!(self.recombine.target, o.target);
        set!(self.scorer.kind, o.scorer);
        if o.corpus.is_some() {
            self.corpus = o.corpus.clone();
        }
        if o.assignment.is_some() {
            self.assignment = o.assignment.clone();
        }
        if o.scorer_cmd.is_some() {
            self.scorer.command = o.scorer_cmd.clone();
        }
    }

    /// Canonical JSON form; field order follows the struct definitions.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn split_policy(&self) -> SplitPolicy {
        SplitPolicy {
            group_size: self.split.group_size,
            ratio: self.split.ratio,
            seed: self.seed,
            distance: self.split.distance,
            order: self.split.order,
        }
    }

    pub fn recombine_config(&self) -> RecombineConfig {
        let r = &self.recombine;
        RecombineConfig {
            substitution_weight: r.substitution_weight,
            extension_weight: r.extension_weight,
            iterations: r.iterations.clone(),
            target: r.target,
            seed: self.seed,
            max_rounds: r.max_rounds,
            patience: r.patience,
            splice: r.splice,
        }
    }

    pub fn scorer_spec(&self) -> CliResult<ScorerSpec> {
        let s = &self.scorer;
        let kind = match s.kind {
            ScorerChoice::Ngram => ScorerKind::ReferenceNgram {
                order: s.order,
                alpha: s.alpha,
            },
            ScorerChoice::External => match &s.command {
                Some(command) => ScorerKind::External {
                    command: command.clone(),
                },
                None => {
                    return Err(CliError::usage(anyhow::anyhow!(
                        "--scorer external needs --scorer-cmd or scorer.command"
                    )))
                }
            },
        };
        let spec = ScorerSpec {
            kind,
            normalization: s.normalization,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scorer_timeout(&self) -> Duration {
        Duration::from_secs(self.scorer.timeout_secs.max(1))
    }

    /// Checks everything that can be checked before touching input files.
    pub fn validate(&self) -> CliResult<()> {
        self.split_policy().validate()?;
        self.recombine_config().validate()?;
        self.scorer_spec()?;
        let f = self.recombine.fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(CliError::usage(anyhow::anyhow!("fraction must lie in (0, 1], got {f}")));
        }
        if self.metrics.restarts == 0 {
            return Err(CliError::usage(anyhow::anyhow!("metrics.restarts must be at least 1")));
        }
        if self.metrics.bleu_max_n == 0 {
            return Err(CliError::usage(anyhow::anyhow!(
                "metrics.bleu_max_n must be at least 1"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::from_toml("seed = 3\n[split]\nratio = \"4:3:3\"\ngroup_size = 10\n").unwrap();
        assert_eq!(c.split.ratio, Ratio::FOUR_THREE_THREE);
        c.apply(&Overrides {
            seed: Some(9),
            ..Overrides::default()
        });
        assert_eq!(c.seed, 9);
        assert_eq!(c.split.ratio, Ratio::FOUR_THREE_THREE);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.scorer.command = Some("python3 scorer.py".into());
        c.corpus = Some("data/en.jsonl".into());
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}
