//! Stage helpers shared by the command-line tool and the test suites.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::EvalConfig;
use crate::gcm::{GbtLearner, Learner, OlsLearner, DEFAULT_DRAWS};
use crate::rng::RNG_ALGORITHM;
use crate::synth::SimConfig;
use crate::features::{attach_hmm_features, feature_row, FeatureRow};
use crate::fit::{fit, FitConfig, FitResult, HmmDataset};
use crate::hmm::{decode_plays, DecodedPlay};
use crate::tracking::{assemble_plays, parse_plays, parse_tracking, FilterConfig, IngestReport, PlaySeries};

/// Parse, filter and standardize a tracking file and its play table.
pub fn ingest(
    tracking: impl AsRef<Path>,
    plays: impl AsRef<Path>,
    cfg: &FilterConfig,
) -> Result<(Vec<PlaySeries>, IngestReport, usize)> {
    let parsed = parse_tracking(tracking)?;
    for r in &parsed.rejected {
        tracing::warn!(line = r.0, reason = %r.1, "tracking row rejected");
    }
    let ctx = parse_plays(plays)?;
    let (series, report) = assemble_plays(&parsed.frames, &ctx, cfg);
    Ok((series, report, parsed.rejected.len()))
}

/// Fit the mixed-effects HMM at `cfg.lag`.
pub fn fit_plays(series: &[PlaySeries], cfg: &FitConfig) -> Result<FitResult> {
    let data = HmmDataset::from_plays(series, cfg.lag, cfg.boundary, cfg.init_alpha)?;
    fit(&data, cfg)
}

/// Posteriors for every play under the fitted model.
pub fn decode(series: &[PlaySeries], fit: &FitResult) -> Result<Vec<DecodedPlay>> {
    decode_plays(series, &fit.emission_spec(), &fit.transition_spec())
}

/// Pre-motion and naive features, plus the HMM features when posteriors
/// and a fit are given.
pub fn extract_features(
    series: &[PlaySeries],
    hmm: Option<(&FitResult, &[DecodedPlay])>,
) -> Result<Vec<FeatureRow>> {
    let mut rows: Vec<FeatureRow> = series.par_iter().map(feature_row).collect::<Result<_>>()?;
    if let Some((f, d)) = hmm {
        attach_hmm_features(&mut rows, &f.w_hat, d)?;
    }
    Ok(rows)
}

/// Fit, decode and extract all features.
pub fn features_from_series(series: &[PlaySeries], cfg: &FitConfig) -> Result<(FitResult, Vec<FeatureRow>)> {
    let f = fit_plays(series, cfg)?;
    let d = decode(series, &f)?;
    let rows = extract_features(series, Some((&f, &d)))?;
    Ok((f, rows))
}

/// Learner used for the conditional-mean regressions of the GCM tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    #[default]
    Gbt,
    Ols,
}

impl LearnerKind {
    pub fn learner(self) -> Box<dyn Learner> {
        match self {
            Self::Gbt => Box::new(GbtLearner::default()),
            Self::Ols => Box::new(OlsLearner),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcmConfig {
    pub draws: usize,
    pub learner: LearnerKind,
}

impl Default for GcmConfig {
    fn default() -> Self {
        Self { draws: DEFAULT_DRAWS, learner: LearnerKind::Gbt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub fit_hmm: bool,
    pub evaluate: bool,
    pub gcm: bool,
    pub team_analysis: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self { fit_hmm: true, evaluate: true, gcm: true, team_analysis: true }
    }
}

/// Everything a run depends on besides the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub tracking: Option<PathBuf>,
    pub plays: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
    pub filter: FilterConfig,
    pub fit: FitConfig,
    /// Candidate lags for lag selection.
    pub lags: Vec<usize>,
    pub simulate: SimConfig,
    pub eval: EvalConfig,
    pub repeats: usize,
    pub gcm: GcmConfig,
    pub stages: StageToggles,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tracking: None,
            plays: None,
            workdir: None,
            filter: FilterConfig::default(),
            fit: FitConfig::default(),
            lags: (1..=5).collect(),
            simulate: SimConfig::default(),
            eval: EvalConfig::default(),
            repeats: 50,
            gcm: GcmConfig::default(),
            stages: StageToggles::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    sha2::Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the compact JSON encoding.
pub fn hash_json(value: &impl Serialize) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

/// Origin of an artifact: tool version, configuration hash, seed and RNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub config_sha256: String,
    pub seed: u64,
    pub rng: String,
}

impl Provenance {
    pub fn new(config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            tool: format!("coverscope {}", env!("CARGO_PKG_VERSION")),
            config_sha256: hash_json(config)?,
            seed,
            rng: RNG_ALGORITHM.to_string(),
        })
    }

    /// Single-line form used as a leading `#` comment.
    pub fn line(&self) -> String {
        format!("{} config_sha256={} seed={} rng={}", self.tool, self.config_sha256, self.seed, self.rng)
    }

    /// Write `body` as pretty JSON with a `provenance` member added.
    pub fn write_json(&self, path: impl AsRef<Path>, body: &impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(body)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("provenance".into(), serde_json::to_value(self)?);
            }
            None => v = serde_json::json!({ "provenance": self, "value": v }),
        }
        std::fs::write(path, serde_json::to_string_pretty(&v)?)?;
        Ok(())
    }

    /// Insert the `#` line at the top of an existing text file.
    pub fn prepend(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = std::fs::read(path)?;
        let mut out = format!("# {}\n", self.line()).into_bytes();
        out.extend_from_slice(&body);
        std::fs::write(path, out)?;
        Ok(())
    }
}
