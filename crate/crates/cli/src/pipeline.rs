//! Stage runners. Every stage reads its declared files from the output
//! directory (or an override) and writes line-delimited JSON back into it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use wai_core::archive::{
    load_firms, load_snapshot_registry, ArchiveClient, ArchiveClientConfig, FirmRecord, PageCapture,
    SelectionOptions, SnapshotRegistry,
};
use wai_core::classify::{
    aggregate_indicators, Backend, ClassificationRecord, FirmPeriodIndicator, ModelParams, RemoteBackend,
    StubBackend,
};
use wai_core::econpanel::{
    build_panel, load_financials, nickell_bound, panel_to_csv, run_spec, Concordance, FxTable, PanelInputs,
    PanelObservation, Quarter, RegressionResult, LAGGED_DEPENDENT,
};
use wai_core::extract::{paragraphs_from_capture, ExtractOptions, KeywordTable, Paragraph};
use wai_core::indicator::{
    builtin_coverage, filter_sample, industry_shares, load_coverage, region_series, tag_country_shares,
    ExclusionReport, RegionLevel, UmbrellaTable,
};
use wai_core::jsonl;
use wai_core::net::{Endpoint, RetryPolicy};
use wai_core::validate::{correlation_report, load_policy_series, CorrelationOptions, PolicySeries};

use crate::config::{BackendKind, PipelineConfig, ReportFormat};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Extract,
    Classify,
    Aggregate,
    Correlate,
    Panel,
    Regress,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Extract,
        Stage::Classify,
        Stage::Aggregate,
        Stage::Correlate,
        Stage::Panel,
        Stage::Regress,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Classify => "classify",
            Stage::Aggregate => "aggregate",
            Stage::Correlate => "correlate",
            Stage::Panel => "panel",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }

    fn enabled(self, cfg: &PipelineConfig) -> bool {
        let s = &cfg.stages;
        match self {
            Stage::Ingest => s.ingest,
            Stage::Extract => s.extract,
            Stage::Classify => s.classify,
            Stage::Aggregate => s.aggregate,
            Stage::Correlate => s.correlate,
            Stage::Panel => s.panel,
            Stage::Regress => s.regress,
            Stage::Report => s.report,
        }
    }
}

/// Stage-file names inside the output directory.
pub mod files {
    pub const SAMPLE_EXCLUSIONS: &str = "sample_exclusions.json";
    pub const CAPTURES: &str = "captures.jsonl";
    pub const PARAGRAPHS: &str = "paragraphs.jsonl";
    pub const CLASSIFICATIONS: &str = "classifications.jsonl";
    pub const INDICATORS: &str = "indicators.jsonl";
    pub const REGION_SERIES: &str = "region_series.jsonl";
    pub const INDUSTRY_SHARES: &str = "industry_shares.jsonl";
    pub const TAG_SHARES: &str = "tag_shares.jsonl";
    pub const CORRELATION: &str = "correlation.jsonl";
    pub const PAIRED_SERIES: &str = "paired_series.jsonl";
    pub const PANEL: &str = "panel.jsonl";
    pub const PANEL_CSV: &str = "panel.csv";
    pub const REGRESSIONS: &str = "regressions.jsonl";
    pub const DIAGNOSTICS: &str = "regression_diagnostics.txt";
    pub const MANIFEST: &str = "manifest.json";
    pub const REPORT_DIR: &str = "report";
}

/// Per-command overrides of the primary input and output file.
#[derive(Debug, Clone, Default)]
pub struct StageIo {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    pub duration_ms: u64,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub key: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub backend: String,
    pub config_sha256: String,
    pub inputs: Vec<InputRecord>,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Default)]
struct StageOutput {
    outputs: Vec<(PathBuf, usize)>,
    warnings: Vec<String>,
}

impl StageOutput {
    fn wrote(&mut self, path: PathBuf, rows: usize) {
        self.outputs.push((path, rows));
    }
}

pub struct Pipeline {
    cfg: PipelineConfig,
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<usize> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(jsonl::write(path, rows.iter())?)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.is_file() {
        bail!("{} does not exist; run the producing stage first", path.display());
    }
    Ok(jsonl::read(path)?)
}

/// The keys a capture contributes to the observed set.
#[derive(Deserialize)]
struct CaptureKey {
    firm_id: String,
    snapshot: String,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.output.join(name)
    }

    fn registry(&self) -> Result<SnapshotRegistry> {
        match &self.cfg.paths.registry {
            Some(p) => Ok(load_snapshot_registry(&PipelineConfig::require("registry", Some(p))?)?),
            None => Ok(SnapshotRegistry::builtin()),
        }
    }

    fn keywords(&self) -> Result<KeywordTable> {
        match &self.cfg.paths.keywords {
            Some(p) => Ok(KeywordTable::load(&PipelineConfig::require("keywords", Some(p))?)?),
            None => Ok(KeywordTable::builtin()),
        }
    }

    fn umbrellas(&self) -> Result<UmbrellaTable> {
        match &self.cfg.paths.umbrellas {
            Some(p) => Ok(UmbrellaTable::load(&PipelineConfig::require("umbrellas", Some(p))?)?),
            None => Ok(UmbrellaTable::builtin()),
        }
    }

    /// Firms that pass the sample rules, sorted by id.
    fn sample(&self, firms_path: Option<&Path>) -> Result<(Vec<FirmRecord>, ExclusionReport)> {
        let path = PipelineConfig::require("firms", Some(firms_path.unwrap_or(&self.cfg.paths.firms)))?;
        let mut firms = load_firms(&path)?;
        firms.sort_by(|a, b| a.firm_id.cmp(&b.firm_id));
        if !self.cfg.thresholds.apply_sample_filter {
            return Ok((firms, ExclusionReport::default()));
        }
        let coverage = match &self.cfg.paths.coverage {
            Some(p) => load_coverage(&PipelineConfig::require("coverage", Some(p))?)?,
            None => builtin_coverage(),
        };
        let t = &self.cfg.thresholds;
        Ok(filter_sample(&firms, &coverage, t.filter_mode, &t.sample))
    }

    fn policy(&self, level: RegionLevel) -> Result<Vec<PolicySeries>> {
        let path = PipelineConfig::require("policy", self.cfg.paths.policy.as_deref())?;
        Ok(load_policy_series(&path, level)?)
    }

    fn ingest(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let (firms, exclusions) = self.sample(io.input.as_deref())?;
        let excl_path = self.out(files::SAMPLE_EXCLUSIONS);
        std::fs::write(&excl_path, serde_json::to_string_pretty(&exclusions)? + "\n")?;
        so.wrote(excl_path, exclusions.firms.len());
        for (firm, reason) in &exclusions.firms {
            so.warnings.push(format!("firm {firm} excluded: {reason}"));
        }

        let registry = self.registry()?;
        let keywords = self.keywords()?;
        let ep = |key: &str, v: &Option<String>| -> Result<Endpoint> {
            let raw = v.as_deref().with_context(|| format!("endpoints.{key} is not configured"))?;
            Endpoint::parse(raw).map_err(|e| anyhow!("endpoints.{key}: {e}"))
        };
        let a = &self.cfg.archive;
        let mut client_cfg = ArchiveClientConfig::new(
            ep("index", &self.cfg.endpoints.index)?,
            ep("data", &self.cfg.endpoints.data)?,
        );
        client_cfg.concurrency = a.concurrency;
        client_cfg.index_rps = a.index_rps;
        client_cfg.data_rps = a.data_rps;
        client_cfg.timeout = Duration::from_secs(a.timeout_secs);
        client_cfg.retry = RetryPolicy {
            max_attempts: a.max_attempts.max(1),
            base_delay: Duration::from_millis(a.base_delay_ms),
            ..RetryPolicy::default()
        };
        let client = ArchiveClient::new(client_cfg);
        let selection = SelectionOptions {
            shortest: a.shortest,
            length_mode: a.length_mode,
        };

        let mut captures: Vec<PageCapture> = Vec::new();
        runtime()?.block_on(async {
            for firm in &firms {
                for snap in registry.snapshots() {
                    let got = client
                        .collect_firm_snapshot(firm, snap, &keywords, &selection)
                        .await
                        .with_context(|| format!("firm {} snapshot {}", firm.firm_id, snap.id))?;
                    if got.malformed_index_lines > 0 {
                        so.warnings.push(format!(
                            "{} {}: {} malformed index lines skipped",
                            firm.firm_id, snap.id, got.malformed_index_lines
                        ));
                    }
                    so.warnings.extend(got.warnings);
                    captures.extend(got.captures);
                }
            }
            anyhow::Ok(())
        })?;
        let path = io.output.clone().unwrap_or_else(|| self.out(files::CAPTURES));
        let n = write_jsonl(&path, &captures)?;
        info!(captures = n, firms = firms.len(), "ingest done");
        so.wrote(path, n);
        Ok(so)
    }

    fn extract(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let table = self.keywords()?;
        let input = io.input.clone().unwrap_or_else(|| self.out(files::CAPTURES));
        let captures: Vec<PageCapture> = read_jsonl(&input)?;
        let opts = ExtractOptions {
            mode: self.cfg.extract.match_mode,
            max_chars: self.cfg.extract.max_chars,
        };
        let paragraphs: Vec<Paragraph> = captures
            .iter()
            .flat_map(|c| paragraphs_from_capture(c, &table, &opts))
            .collect();
        let path = io.output.clone().unwrap_or_else(|| self.out(files::PARAGRAPHS));
        let n = write_jsonl(&path, &paragraphs)?;
        so.wrote(path, n);
        Ok(so)
    }

    fn backend(&self) -> Result<Backend> {
        match self.cfg.backend {
            BackendKind::Stub => Ok(Backend::Stub(StubBackend::new())),
            BackendKind::Remote => {
                let c = &self.cfg.classify;
                let params = ModelParams {
                    endpoint: self.cfg.endpoints.model.clone().or_else(|| self.cfg.model.endpoint.clone()),
                    ..self.cfg.model.clone()
                };
                let retry = RetryPolicy {
                    max_attempts: c.max_attempts.max(1),
                    ..RetryPolicy::default()
                };
                Ok(Backend::Remote(Box::new(RemoteBackend::new(
                    params,
                    retry,
                    c.rps,
                    Duration::from_secs(c.timeout_secs),
                )?)))
            }
        }
    }

    fn classify(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let input = io.input.clone().unwrap_or_else(|| self.out(files::PARAGRAPHS));
        let paragraphs: Vec<Paragraph> = read_jsonl(&input)?;
        let backend = self.backend()?;
        so.warnings.extend(self.cfg.model.overrides());

        let mut position: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
        let indexed: Vec<(usize, &Paragraph)> = paragraphs
            .iter()
            .map(|p| {
                let k = position.entry((&p.firm_id, &p.snapshot, &p.url)).or_insert(0);
                *k += 1;
                (*k - 1, p)
            })
            .collect();
        let concurrency = self.cfg.classify.concurrency.max(1);
        let records: Vec<ClassificationRecord> = runtime()?.block_on(
            stream::iter(indexed)
                .map(|(i, p)| {
                    let backend = &backend;
                    async move {
                        let res = backend.classify(&p.text).await;
                        let (classification, error) = match res {
                            Ok(c) => (Some(c.normalized()), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        ClassificationRecord {
                            firm_id: p.firm_id.clone(),
                            snapshot: p.snapshot.clone(),
                            url: p.url.clone(),
                            passage_index: i,
                            text: p.text.clone(),
                            classification,
                            error,
                        }
                    }
                })
                .buffered(concurrency)
                .collect(),
        );
        for r in records.iter().filter(|r| r.error.is_some()) {
            so.warnings.push(format!(
                "{} {} {} #{}: {}",
                r.firm_id,
                r.snapshot,
                r.url,
                r.passage_index,
                r.error.as_deref().unwrap_or_default()
            ));
        }
        let path = io.output.clone().unwrap_or_else(|| self.out(files::CLASSIFICATIONS));
        let n = write_jsonl(&path, &records)?;
        so.wrote(path, n);
        Ok(so)
    }

    fn aggregate(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let input = io.input.clone().unwrap_or_else(|| self.out(files::CLASSIFICATIONS));
        let records: Vec<ClassificationRecord> = read_jsonl(&input)?;
        let captures_path = self.out(files::CAPTURES);
        let observed: BTreeSet<(String, String)> = if captures_path.is_file() {
            read_jsonl::<CaptureKey>(&captures_path)?
                .into_iter()
                .map(|k| (k.firm_id, k.snapshot))
                .collect()
        } else {
            so.warnings
                .push("no capture file: only firm-snapshots with classified passages are observed".into());
            BTreeSet::new()
        };
        let indicators = aggregate_indicators(&records, &observed);
        let path = io.output.clone().unwrap_or_else(|| self.out(files::INDICATORS));
        let n = write_jsonl(&path, &indicators)?;
        so.wrote(path, n);

        let (firms, _) = self.sample(None)?;
        let registry = self.registry()?;
        let severity = self.cfg.thresholds.severity;
        let a = &self.cfg.aggregate;
        let series = region_series(&indicators, &firms, a.region_level, severity, &registry)?;
        let p = self.out(files::REGION_SERIES);
        let n = write_jsonl(&p, &series)?;
        so.wrote(p, n);
        let industry = industry_shares(&indicators, &firms, severity);
        for f in &industry.unmapped {
            so.warnings.push(format!("firm {f}: NACE division maps to no industry group"));
        }
        let p = self.out(files::INDUSTRY_SHARES);
        let n = write_jsonl(&p, &industry.shares)?;
        so.wrote(p, n);
        let tags = tag_country_shares(&indicators, &firms, &self.umbrellas()?, a.tag_denominator);
        let p = self.out(files::TAG_SHARES);
        let n = write_jsonl(&p, &tags)?;
        so.wrote(p, n);
        Ok(so)
    }

    fn correlate(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let input = io.input.clone().unwrap_or_else(|| self.out(files::INDICATORS));
        let indicators: Vec<FirmPeriodIndicator> = read_jsonl(&input)?;
        let (firms, _) = self.sample(None)?;
        let registry = self.registry()?;
        let c = &self.cfg.correlate;
        let series = region_series(&indicators, &firms, c.level, self.cfg.thresholds.severity, &registry)?;
        let policy = self.policy(c.level)?;
        let opts = CorrelationOptions {
            reduction: c.reduction,
            measure: c.measure,
            min_snapshots: c.min_snapshots,
        };
        let (rows, paired) = correlation_report(&series, &policy, &registry, &opts);
        let with_r: BTreeSet<&str> = rows.iter().map(|r| r.region.as_str()).collect();
        for s in &series {
            if !with_r.contains(s.region.as_str()) {
                so.warnings.push(format!("region {}: no correlation (too few aligned snapshots or no policy data)", s.region));
            }
        }
        let path = io.output.clone().unwrap_or_else(|| self.out(files::CORRELATION));
        let n = write_jsonl(&path, &rows)?;
        so.wrote(path, n);
        let p = self.out(files::PAIRED_SERIES);
        let n = write_jsonl(&p, &paired)?;
        so.wrote(p, n);
        Ok(so)
    }

    fn panel(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let paths = &self.cfg.paths;
        let financials = load_financials(&PipelineConfig::require("financials", paths.financials.as_deref())?)?;
        let fx = match &paths.fx {
            Some(p) => FxTable::load(&PipelineConfig::require("fx", Some(p))?)?,
            None => FxTable::default(),
        };
        let concordance = match &paths.concordance {
            Some(p) => Some(Concordance::load(&PipelineConfig::require("concordance", Some(p))?)?),
            None => None,
        };
        let policy = match &paths.policy {
            Some(_) => self.policy(RegionLevel::Country)?,
            None => {
                so.warnings.push("no policy file: pandemic-quarter controls are absent".into());
                Vec::new()
            }
        };
        let input = io.input.clone().unwrap_or_else(|| self.out(files::INDICATORS));
        let indicators: Vec<FirmPeriodIndicator> = read_jsonl(&input)?;
        let (firms, _) = self.sample(None)?;
        let registry = self.registry()?;
        let built = build_panel(
            &PanelInputs {
                financials: &financials,
                fx: &fx,
                indicators: &indicators,
                firms: &firms,
                registry: &registry,
                policy: &policy,
                concordance: concordance.as_ref(),
            },
            &self.cfg.panel,
        )?;
        so.warnings.extend(built.warnings);
        let path = io.output.clone().unwrap_or_else(|| self.out(files::PANEL));
        let n = write_jsonl(&path, &built.observations)?;
        so.wrote(path, n);
        let csv_path = self.out(files::PANEL_CSV);
        std::fs::write(&csv_path, panel_to_csv(&built.observations))?;
        so.wrote(csv_path, n);
        Ok(so)
    }

    fn regress(&self, io: &StageIo) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let input = io.input.clone().unwrap_or_else(|| self.out(files::PANEL));
        let panel: Vec<PanelObservation> = read_jsonl(&input)?;
        let mut results = Vec::new();
        for (i, spec) in self.cfg.regress.specs().iter().enumerate() {
            let r = run_spec(&panel, spec).with_context(|| format!("column ({})", i + 1))?;
            for d in &r.residual_diagnostics.dropped_collinear {
                so.warnings.push(format!("column ({}): {d} dropped as collinear", i + 1));
            }
            results.push(r);
        }
        let path = io.output.clone().unwrap_or_else(|| self.out(files::REGRESSIONS));
        let n = write_jsonl(&path, &results)?;
        so.wrote(path, n);
        let diag = self.out(files::DIAGNOSTICS);
        let text = diagnostics_text(&results)?;
        std::fs::write(&diag, &text)?;
        so.wrote(diag, text.lines().count());
        Ok(so)
    }

    fn report(&self, io: &StageIo, formats: &[ReportFormat]) -> Result<StageOutput> {
        let mut so = StageOutput::default();
        let dir = io.output.clone().unwrap_or_else(|| self.out(files::REPORT_DIR));
        let src = io.input.clone().unwrap_or_else(|| self.cfg.paths.output.clone());
        for (path, rows) in report::emit_report(&src, &dir, formats)? {
            so.wrote(path, rows);
        }
        Ok(so)
    }

    fn run_stage(&self, stage: Stage, io: &StageIo, formats: &[ReportFormat]) -> Result<StageOutput> {
        match stage {
            Stage::Ingest => self.ingest(io),
            Stage::Extract => self.extract(io),
            Stage::Classify => self.classify(io),
            Stage::Aggregate => self.aggregate(io),
            Stage::Correlate => self.correlate(io),
            Stage::Panel => self.panel(io),
            Stage::Regress => self.regress(io),
            Stage::Report => self.report(io, formats),
        }
    }

    fn inputs(&self) -> Result<Vec<InputRecord>> {
        let p = &self.cfg.paths;
        let mut out = Vec::new();
        let candidates: [(&str, Option<&Path>); 9] = [
            ("firms", Some(p.firms.as_path())),
            ("registry", p.registry.as_deref()),
            ("keywords", p.keywords.as_deref()),
            ("umbrellas", p.umbrellas.as_deref()),
            ("coverage", p.coverage.as_deref()),
            ("policy", p.policy.as_deref()),
            ("financials", p.financials.as_deref()),
            ("fx", p.fx.as_deref()),
            ("concordance", p.concordance.as_deref()),
        ];
        for (key, path) in candidates {
            if let Some(path) = path.filter(|p| p.is_file()) {
                out.push(InputRecord {
                    key: key.to_string(),
                    file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
                    sha256: file_digest(path)?,
                });
            }
        }
        Ok(out)
    }

    fn config_digest(&self) -> Result<String> {
        // paths are machine-specific; digest everything else
        let mut v = serde_json::to_value(&self.cfg)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("paths");
            if let Some(ep) = o.get_mut("endpoints").and_then(|e| e.as_object_mut()) {
                ep.remove("index");
                ep.remove("data");
            }
        }
        Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
    }

    /// Run `stages` in pipeline order, updating the manifest after each.
    /// The first failing stage aborts the run and is named in the error.
    pub fn run(&self, stages: &[Stage], io: &StageIo, formats: Option<&[ReportFormat]>) -> Result<Manifest> {
        let manifest_path = self.out(files::MANIFEST);
        let mut records: BTreeMap<Stage, StageRecord> = BTreeMap::new();
        if let Ok(text) = std::fs::read_to_string(&manifest_path) {
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                for r in old.stages {
                    if let Some(s) = Stage::ALL.iter().find(|s| s.name() == r.name) {
                        records.insert(*s, r);
                    }
                }
            }
        }
        let formats = formats.unwrap_or(&self.cfg.report.formats).to_vec();
        let mut failure = None;
        let mut ordered: Vec<Stage> = stages.to_vec();
        ordered.sort();
        ordered.dedup();
        for stage in ordered {
            let started = Instant::now();
            info!(stage = stage.name(), "stage started");
            let res = self.run_stage(stage, io, &formats);
            let duration_ms = started.elapsed().as_millis() as u64;
            match res {
                Ok(so) => {
                    for w in &so.warnings {
                        warn!(stage = stage.name(), "{w}");
                    }
                    let mut outputs = Vec::new();
                    for (path, rows) in &so.outputs {
                        outputs.push(OutputRecord {
                            file: self.display_name(path),
                            rows: *rows,
                            sha256: file_digest(path)?,
                        });
                    }
                    records.insert(
                        stage,
                        StageRecord {
                            name: stage.name().into(),
                            status: "ok".into(),
                            duration_ms,
                            outputs,
                            warnings: so.warnings,
                        },
                    );
                }
                Err(e) => {
                    records.insert(
                        stage,
                        StageRecord {
                            name: stage.name().into(),
                            status: "failed".into(),
                            duration_ms,
                            outputs: Vec::new(),
                            warnings: vec![format!("{e:#}")],
                        },
                    );
                    failure = Some(e.context(format!("stage {} failed", stage.name())));
                    break;
                }
            }
        }
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            backend: match self.cfg.backend {
                BackendKind::Stub => "stub".into(),
                BackendKind::Remote => "remote".into(),
            },
            config_sha256: self.config_digest()?,
            inputs: self.inputs()?,
            stages: records.into_values().collect(),
        };
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        match failure {
            Some(e) => Err(e),
            None => Ok(manifest),
        }
    }

    /// Every enabled stage.
    pub fn run_all(&self) -> Result<Manifest> {
        let stages: Vec<Stage> = Stage::ALL.into_iter().filter(|s| s.enabled(&self.cfg)).collect();
        self.run(&stages, &StageIo::default(), None)
    }

    fn display_name(&self, path: &Path) -> String {
        path.strip_prefix(&self.cfg.paths.output)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

/// Plain-text notes accompanying the regression table, including the
/// dynamic-panel bias bound for lagged-dependent specifications.
pub fn diagnostics_text(results: &[RegressionResult]) -> Result<String> {
    let mut out = String::new();
    for (i, r) in results.iter().enumerate() {
        let d = &r.residual_diagnostics;
        out.push_str(&format!(
            "({}) {}: n_obs={} n_firms={} r2_within={:.6} fe_sweeps={} last_change={:e} residual_mean={:e} residual_sd={:.6} dropped_listwise={}\n",
            i + 1,
            r.spec.dependent.label(),
            r.n_obs,
            r.n_firms,
            r.r2_within,
            r.fe_iterations,
            d.absorb_max_change,
            d.mean,
            d.std_dev,
            d.n_dropped_listwise,
        ));
        if !d.dropped_collinear.is_empty() {
            out.push_str(&format!("    collinear and dropped: {}\n", d.dropped_collinear.join(", ")));
        }
        if let Some(b) = r.coefficients.get(LAGGED_DEPENDENT) {
            let (start, end) = r.spec.sample_window;
            let t = Quarter::range(start, end).count() as u32;
            out.push_str(&format!(
                "    Nickell bound -(1 + b)/(T - 1) with b = {b:.4}, T = {t}: {:.6}\n",
                nickell_bound(*b, t)?
            ));
        }
    }
    let reference = nickell_bound(-0.306, 24)?;
    out.push_str(&format!(
        "Nickell bound reference: b = -0.306, T = 24 gives {reference:.6}. An approximation of \
         roughly -0.06 for sales growth does not follow from this formula with these inputs; the \
         discrepancy is unresolved.\n"
    ));
    Ok(out)
}
