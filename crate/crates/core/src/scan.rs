//! Multi-package scanning with per-package deadlines.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::detect::{detect, BugKind};
use crate::graph::build_property_graph;
use crate::ir::{parse_package, TraitDef};
use crate::types::{ArchWidth, TraitMap};
use crate::verify::{verify_detailed, BugReport, CheckCatalog, Outcome, VerifyOptions};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid overlay `{path}`: {source}")]
    Overlay { path: PathBuf, source: serde_json::Error },
    #[error("jobs must be at least 1")]
    NoJobs,
    #[error("timeout must be positive")]
    ZeroTimeout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dumps {
    pub alias_dot: bool,
    pub property_graph: bool,
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub inputs: Vec<PathBuf>,
    pub detectors: BTreeSet<BugKind>,
    pub arches: Vec<ArchWidth>,
    pub interprocedural: bool,
    pub jobs: usize,
    pub timeout: Duration,
    pub dumps: Dumps,
    pub trait_overlay: Vec<TraitDef>,
    pub check_overlay: Option<CheckCatalog>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            inputs: Vec::new(),
            detectors: BugKind::ALL.into_iter().collect(),
            arches: ArchWidth::ALL.to_vec(),
            interprocedural: true,
            jobs: 1,
            timeout: DEFAULT_TIMEOUT,
            dumps: Dumps::default(),
            trait_overlay: Vec::new(),
            check_overlay: None,
        }
    }
}

impl ScanConfig {
    pub fn with_inputs(inputs: impl IntoIterator<Item = impl Into<PathBuf>>) -> ScanConfig {
        ScanConfig { inputs: inputs.into_iter().map(Into::into).collect(), ..ScanConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.jobs == 0 {
            return Err(ConfigError::NoJobs);
        }
        if self.timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let mut opts = VerifyOptions::new(self.interprocedural);
        if let Some(overlay) = &self.check_overlay {
            opts.checks.merge(overlay.clone());
        }
        opts
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

/// Reads a JSON array of trait definitions.
pub fn load_trait_overlay(path: &Path) -> Result<Vec<TraitDef>, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|source| ConfigError::Overlay { path: path.to_path_buf(), source })
}

/// Reads a JSON object mapping callee paths to `{detector: "pre"|"post"}`.
pub fn load_check_overlay(path: &Path) -> Result<CheckCatalog, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|source| ConfigError::Overlay { path: path.to_path_buf(), source })
}

/// Files to scan: plain paths as given, directories expanded to their
/// `*.json` entries in name order.
pub fn expand_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(input)
                .into_iter()
                .flatten()
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Timeout,
    ParseError,
}

#[derive(Debug, Clone, Serialize)]
pub struct PackageResult {
    pub path: String,
    pub package: Option<String>,
    pub status: Status,
    pub error: Option<String>,
    pub reports: Vec<BugReport>,
    /// Findings dropped by refinement or suppressed by a developer check.
    pub suppressed: usize,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub alias_dot: Option<String>,
    #[serde(skip)]
    pub property_graph: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScanSummary {
    pub packages: Vec<PackageResult>,
    pub totals: BTreeMap<BugKind, usize>,
}

impl ScanSummary {
    pub fn from_packages(packages: Vec<PackageResult>) -> ScanSummary {
        let mut totals: BTreeMap<BugKind, usize> = BugKind::ALL.into_iter().map(|k| (k, 0)).collect();
        for r in packages.iter().flat_map(|p| &p.reports) {
            *totals.entry(r.finding.kind).or_default() += 1;
        }
        ScanSummary { packages, totals }
    }

    pub fn report_count(&self) -> usize {
        self.packages.iter().map(|p| p.reports.len()).sum()
    }

    /// All reports ordered by package, function, conversion site and bug type.
    pub fn sorted_reports(&self) -> Vec<&BugReport> {
        let mut all: Vec<&BugReport> = self.packages.iter().flat_map(|p| &p.reports).collect();
        all.sort_by(|a, b| report_key(a).cmp(&report_key(b)));
        all
    }

    /// 2 on any parse error, otherwise 1 when anything was reported, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.packages.iter().any(|p| p.status == Status::ParseError) {
            2
        } else if self.report_count() > 0 {
            1
        } else {
            0
        }
    }
}

fn report_key(r: &BugReport) -> (&str, &str, crate::ir::Location, BugKind, &str) {
    (&r.package, &r.finding.pair.function, r.finding.pair.site, r.finding.kind, &r.finding.rule_id)
}

struct Deadline(Instant);

impl Deadline {
    fn expired(&self) -> bool {
        Instant::now() >= self.0
    }
}

fn timed_out(path: &str, package: Option<String>, start: Instant) -> PackageResult {
    PackageResult {
        path: path.to_string(),
        package,
        status: Status::Timeout,
        error: None,
        reports: Vec::new(),
        suppressed: 0,
        elapsed: start.elapsed(),
        alias_dot: None,
        property_graph: None,
    }
}

/// Analyzes one package document. The deadline is checked between stages
/// and between findings; on expiry all partial results are dropped.
pub fn scan_document(path: &str, document: &str, cfg: &ScanConfig) -> PackageResult {
    let start = Instant::now();
    let deadline = Deadline(start + cfg.timeout);
    let fail = |msg: String| PackageResult {
        path: path.to_string(),
        package: None,
        status: Status::ParseError,
        error: Some(msg),
        reports: Vec::new(),
        suppressed: 0,
        elapsed: start.elapsed(),
        alias_dot: None,
        property_graph: None,
    };
    let pkg = match parse_package(document) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    if deadline.expired() {
        return timed_out(path, Some(pkg.name), start);
    }
    let trait_map = TraitMap::for_package(&pkg, &cfg.trait_overlay);
    let pg = match build_property_graph(&pkg, trait_map) {
        Ok(g) => g,
        Err(v) => return fail(v.first().map(ToString::to_string).unwrap_or_default()),
    };
    if deadline.expired() {
        return timed_out(path, Some(pkg.name), start);
    }
    let findings = detect(&pg, &pkg, &cfg.detectors, &cfg.arches);
    let opts = cfg.verify_options();
    let mut reports = Vec::new();
    let mut suppressed = 0;
    for f in findings {
        if deadline.expired() {
            return timed_out(path, Some(pkg.name), start);
        }
        let v = verify_detailed(f, &pg, &pkg, &opts);
        match (v.outcome, v.evidence) {
            (Outcome::Reported, Some(evidence)) => reports.push(BugReport {
                package: pkg.name.clone(),
                finding: v.finding,
                evidence,
                suppressions_considered: v.suppressions,
            }),
            (Outcome::Refined | Outcome::Suppressed, _) => suppressed += 1,
            _ => {}
        }
    }
    if deadline.expired() {
        return timed_out(path, Some(pkg.name), start);
    }
    reports.sort_by(|a, b| report_key(a).cmp(&report_key(b)));
    let alias_dot = cfg.dumps.alias_dot.then(|| {
        pg.records
            .values()
            .map(|r| r.alias_graph.to_dot(&format!("{}::{}", pkg.name, r.name)))
            .collect::<String>()
    });
    let property_graph = cfg.dumps.property_graph.then(|| pg.to_json());
    PackageResult {
        path: path.to_string(),
        package: Some(pkg.name),
        status: Status::Ok,
        error: None,
        reports,
        suppressed,
        elapsed: start.elapsed(),
        alias_dot,
        property_graph,
    }
}

fn scan_path(path: &Path, cfg: &ScanConfig) -> PackageResult {
    let shown = path.display().to_string();
    match fs::read_to_string(path) {
        Ok(text) => scan_document(&shown, &text, cfg),
        Err(e) => PackageResult {
            path: shown,
            package: None,
            status: Status::ParseError,
            error: Some(e.to_string()),
            reports: Vec::new(),
            suppressed: 0,
            elapsed: Duration::ZERO,
            alias_dot: None,
            property_graph: None,
        },
    }
}

/// Scans every input on a pool of `cfg.jobs` workers. Results keep input
/// order, so output does not depend on the worker count.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanSummary, ConfigError> {
    cfg.validate()?;
    let files = expand_inputs(&cfg.inputs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .expect("thread pool construction");
    let packages = pool.install(|| files.par_iter().map(|p| scan_path(p, cfg)).collect());
    Ok(ScanSummary::from_packages(packages))
}
