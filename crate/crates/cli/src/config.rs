//! The single pipeline configuration file (TOML). Relative paths resolve
//! against the directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use wai_core::archive::UrlLengthMode;
use wai_core::classify::ModelParams;
use wai_core::econpanel::{Dependent, PanelOptions, Quarter, RegressionSpec};
use wai_core::extract::MatchMode;
use wai_core::indicator::{FilterMode, RegionLevel, SampleThresholds, TagDenominator};
use wai_core::validate::{StringencyReduction, WaiMeasure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub archive: ArchiveSettings,
    #[serde(default)]
    pub extract: ExtractSettings,
    #[serde(default)]
    pub classify: ClassifySettings,
    #[serde(default)]
    pub aggregate: AggregateSettings,
    #[serde(default)]
    pub correlate: CorrelateSettings,
    #[serde(default)]
    pub panel: PanelOptions,
    #[serde(default)]
    pub regress: RegressSettings,
    #[serde(default)]
    pub report: ReportSettings,
}

/// Input files and the output directory. Optional tables fall back to the
/// built-in copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub firms: PathBuf,
    /// Snapshot registry (TSV); the built-in 24 crawls when absent.
    pub registry: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub umbrellas: Option<PathBuf>,
    /// Per-country coverage table for the sample filter.
    pub coverage: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub financials: Option<PathBuf>,
    pub fx: Option<PathBuf>,
    pub concordance: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    /// Archive index service, or a directory holding `<snapshot>-index.jsonl`.
    pub index: Option<String>,
    /// Archive file service, or a directory holding the archive files.
    pub data: Option<String>,
    /// Completion endpoint of the remote model backend.
    pub model: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Score at or above which a firm counts as severely affected.
    pub severity: u8,
    pub apply_sample_filter: bool,
    pub filter_mode: FilterMode,
    pub sample: SampleThresholds,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            severity: 3,
            apply_sample_filter: true,
            filter_mode: FilterMode::Standard,
            sample: SampleThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub ingest: bool,
    pub extract: bool,
    pub classify: bool,
    pub aggregate: bool,
    pub correlate: bool,
    pub panel: bool,
    pub regress: bool,
    pub report: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            ingest: true,
            extract: true,
            classify: true,
            aggregate: true,
            correlate: true,
            panel: true,
            regress: true,
            report: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchiveSettings {
    pub shortest: usize,
    pub length_mode: UrlLengthMode,
    pub concurrency: usize,
    pub index_rps: u32,
    pub data_rps: u32,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for ArchiveSettings {
    fn default() -> Self {
        Self {
            shortest: 50,
            length_mode: UrlLengthMode::FullUrl,
            concurrency: 8,
            index_rps: 2,
            data_rps: 10,
            timeout_secs: 60,
            max_attempts: 5,
            base_delay_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSettings {
    pub match_mode: MatchMode,
    pub max_chars: usize,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        Self {
            match_mode: MatchMode::WordBoundary,
            max_chars: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySettings {
    pub concurrency: usize,
    pub rps: u32,
    pub timeout_secs: u64,
    pub max_attempts: u32,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            concurrency: 4,
            rps: 5,
            timeout_secs: 120,
            max_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateSettings {
    pub region_level: RegionLevel,
    pub tag_denominator: TagDenominator,
}

impl Default for AggregateSettings {
    fn default() -> Self {
        Self {
            region_level: RegionLevel::Country,
            tag_denominator: TagDenominator::MentioningFirms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateSettings {
    /// Level of both the WAI series and the policy rows.
    pub level: RegionLevel,
    pub reduction: StringencyReduction,
    pub measure: WaiMeasure,
    pub min_snapshots: usize,
}

impl Default for CorrelateSettings {
    fn default() -> Self {
        Self {
            level: RegionLevel::Country,
            reduction: StringencyReduction::WindowMean,
            measure: WaiMeasure::ShareSevere,
            min_snapshots: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Eq1,
    Eq2,
    Eq3,
}

/// Which specifications to estimate. Every preset is run for every
/// dependent variable; the variant settings apply to all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressSettings {
    pub presets: Vec<Preset>,
    pub dependents: Vec<Dependent>,
    pub window: Option<(Quarter, Quarter)>,
    pub sectors: Option<(u8, u8)>,
    pub lagged_dependent: bool,
    pub winsorize_pct: Option<f64>,
}

impl Default for RegressSettings {
    fn default() -> Self {
        Self {
            presets: vec![Preset::Eq1, Preset::Eq2, Preset::Eq3],
            dependents: vec![Dependent::SalesGrowth, Dependent::StockReturn],
            window: None,
            sectors: None,
            lagged_dependent: false,
            winsorize_pct: None,
        }
    }
}

impl RegressSettings {
    /// Specifications in table-column order: dependents outer, presets inner.
    pub fn specs(&self) -> Vec<RegressionSpec> {
        let mut out = Vec::new();
        for &dep in &self.dependents {
            for p in &self.presets {
                let mut s = match p {
                    Preset::Eq1 => RegressionSpec::eq1(dep),
                    Preset::Eq2 => RegressionSpec::eq2(dep),
                    Preset::Eq3 => RegressionSpec::eq3(dep),
                };
                if let Some((a, b)) = self.window {
                    s = s.with_window(a, b);
                }
                if let Some((lo, hi)) = self.sectors {
                    s = s.with_sectors(lo, hi);
                }
                if self.lagged_dependent {
                    s = s.with_lagged_dependent();
                }
                s.winsorize_pct = self.winsorize_pct;
                out.push(s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
    SvgLines,
}

impl std::str::FromStr for ReportFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg-lines" => Ok(Self::SvgLines),
            other => bail!("unknown report format {other:?} (expected csv, json or svg-lines)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub formats: Vec<ReportFormat>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            formats: vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::SvgLines],
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        abs(&mut p.firms);
        abs(&mut p.output);
        for opt in [
            &mut p.registry,
            &mut p.keywords,
            &mut p.umbrellas,
            &mut p.coverage,
            &mut p.policy,
            &mut p.financials,
            &mut p.fx,
            &mut p.concordance,
        ]
        .into_iter()
        .flatten()
        {
            abs(opt);
        }
        // local endpoints are paths too
        for raw in [&mut self.endpoints.index, &mut self.endpoints.data].into_iter().flatten() {
            if !raw.contains("://") && Path::new(raw.as_str()).is_relative() {
                *raw = base.join(raw.as_str()).display().to_string();
            }
        }
    }

    /// Structural checks that do not depend on which stages run.
    pub fn validate(&self) -> Result<()> {
        if self.backend == BackendKind::Remote && self.endpoints.model.is_none() && self.model.endpoint.is_none() {
            bail!("backend = \"remote\" needs endpoints.model");
        }
        if !(1..=3).contains(&self.thresholds.severity) {
            bail!("thresholds.severity must be 1..3, got {}", self.thresholds.severity);
        }
        for s in self.regress.specs() {
            s.validate().map_err(|e| anyhow::anyhow!("regress: {e}"))?;
        }
        std::fs::create_dir_all(&self.paths.output)
            .with_context(|| format!("creating output directory {}", self.paths.output.display()))?;
        let probe = self.paths.output.join(".write-test");
        std::fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", self.paths.output.display()))?;
        let _ = std::fs::remove_file(probe);
        Ok(())
    }

    /// Fail unless `path` exists, naming the config key.
    pub fn require(key: &str, path: Option<&Path>) -> Result<PathBuf> {
        let path = path.with_context(|| format!("paths.{key} is not configured"))?;
        if !path.is_file() {
            bail!("paths.{key}: {} does not exist", path.display());
        }
        Ok(path.to_path_buf())
    }
}
