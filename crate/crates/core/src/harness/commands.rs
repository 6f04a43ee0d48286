use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{LoadedConfig, RunConfig, ScenarioSection, SCHEMA_VERSION};
use super::output::{
    csv_with_header, deliveries_csv, ensure_dir, mark_complete, mark_incomplete, observations_csv, plans_csv,
    record_failure, write_json, write_scenario_fields, FileSet, ScenarioManifest, MANIFEST, SCENARIO_MANIFEST,
};
use super::HarnessError;
use crate::evaluation::{compare_runs, predictor_error_curve, run_metrics, write_comparison_csv, Comparison, ErrorCurve, RunMetrics};
use crate::executive::{self, audit_access, audit_additivity, audit_causality, AuditReport, Mission, Mode};
use crate::network::latency_stats;
use crate::scenario::Scenario;

/// Relative tolerance used when listing error-curve increases.
const CURVE_TOLERANCE: f64 = 0.05;

/// Everything needed to reproduce a run directory bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub label: String,
    pub seed: u64,
    /// sha256 of the config file as given.
    pub config_sha256: String,
    /// Self-contained config with the scenario inlined and the seed applied.
    pub resolved_config: String,
    pub scenario_param_hash: String,
    pub scenario_hash: String,
    pub files: BTreeMap<String, String>,
}

impl LoadedConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.config.seed = seed;
    }

    /// The config with its scenario written out inline.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.config.clone();
        let p = &self.scenario.params;
        c.scenario = ScenarioSection {
            from: None,
            regions: self.scenario.regions.clone(),
            horizon_s: Some(p.horizon_s),
            watersheds_per_region: Some(p.watersheds_per_region),
            truth: Some(p.truth.clone()),
            perturbation: Some(p.perturbation.clone()),
            breakpoints: Some(p.breakpoints.clone()),
        };
        c
    }

    fn resolved_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(&self.resolved()).map_err(|e| HarnessError::config("resolved config", e))
    }

    fn scenario(&self) -> Result<(Scenario, String), HarnessError> {
        let scn = self.scenario.generate(self.config.seed)?;
        let hash = scn.content_hash();
        if let Some(expected) = &self.expected_scenario_hash {
            if expected != &hash {
                return Err(HarnessError::Mismatch(format!(
                    "generated scenario {hash} differs from referenced scenario {expected}"
                )));
            }
        }
        Ok((scn, hash))
    }

    fn manifest(&self, command: &str, scenario_hash: &str, files: FileSet) -> Result<RunManifest, HarnessError> {
        Ok(RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            label: self.label(),
            seed: self.config.seed,
            config_sha256: self.config_sha256(),
            resolved_config: self.resolved_toml()?,
            scenario_param_hash: self.scenario.param_hash(self.config.seed),
            scenario_hash: scenario_hash.to_string(),
            files: files.digests,
        })
    }
}

/// Runs `body` between the incomplete marker going up and coming down.
fn guarded<T>(dir: &Path, what: &str, body: impl FnOnce() -> Result<T, HarnessError>) -> Result<T, HarnessError> {
    ensure_dir(dir)?;
    mark_incomplete(dir, what)?;
    match body() {
        Ok(v) => {
            mark_complete(dir)?;
            Ok(v)
        }
        Err(e) => {
            record_failure(dir, &e);
            Err(e)
        }
    }
}

pub fn generate_scenario(cfg: &LoadedConfig, out: &Path) -> Result<ScenarioManifest, HarnessError> {
    guarded(out, "generate-scenario", || {
        let (scn, hash) = cfg.scenario()?;
        let mut files = FileSet::new(out);
        write_scenario_fields(&mut files, &scn)?;
        let manifest = ScenarioManifest {
            schema_version: SCHEMA_VERSION,
            seed: cfg.config.seed,
            param_hash: cfg.scenario.param_hash(cfg.config.seed),
            scenario_hash: hash,
            n_gp: scn.geography.n_gp(),
            n_watersheds: scn.geography.n_ws(),
            n_slots: scn.n_slots(),
            slot_s: scn.slot_s,
            ratios: scn.ratios.clone(),
            definition: cfg.scenario.clone(),
            files: files.digests,
        };
        write_json(&out.join(SCENARIO_MANIFEST), &manifest)?;
        Ok(manifest)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audits {
    pub causality: AuditReport,
    pub additivity: AuditReport,
    pub access: AuditReport,
}

impl Audits {
    pub fn is_clean(&self) -> bool {
        self.causality.is_clean() && self.additivity.is_clean() && self.access.is_clean()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub metrics: RunMetrics,
    pub audits: Audits,
    pub manifest: RunManifest,
}

pub fn run(cfg: &LoadedConfig, out: &Path) -> Result<RunOutcome, HarnessError> {
    guarded(out, "run", || {
        let started = Instant::now();
        let (scn, hash) = cfg.scenario()?;
        let c = &cfg.config;
        let mission = Mission::build(&scn, cfg.constellation.clone(), c.mission.clone())?;
        let output = executive::run(&mission, &c.executive)?;
        let audits = Audits {
            causality: audit_causality(&output),
            additivity: audit_additivity(&output),
            access: audit_access(&output, &mission.geometry),
        };
        if !audits.is_clean() {
            warn!("{}: post-run audit found violations, see audit.json", cfg.label());
        }
        let latency = latency_stats(&output.deliveries, &mission.gaps).ok();
        let horizon = match c.executive.mode {
            Mode::Onboard => c.executive.plan_horizon_s,
            Mode::Ground => c.executive.gs_contact_cadence_s.unwrap_or(c.executive.plan_horizon_s),
        };
        let mut metrics =
            run_metrics(&cfg.label(), &hash, &scn.true_flood, &output, horizon, latency, &c.evaluation.options());
        metrics.agile = c.mission.nadir_footprint_km.is_none();

        let mut files = FileSet::new(out);
        files.put("observations.csv", &observations_csv(&output.observations)?)?;
        files.put("plans.csv", &plans_csv(&output.plans)?)?;
        files.put("deliveries.csv", &deliveries_csv(&output.deliveries)?)?;
        files.put_json("metrics.json", &metrics)?;
        files.put_json("audit.json", &audits)?;
        let manifest = cfg.manifest("run", &hash, files)?;
        write_json(&out.join(MANIFEST), &manifest)?;
        // wall time goes to the log only; outputs stay byte-reproducible
        info!(
            "{}: {} observations, total {:.3}, {:.1} s wall",
            cfg.label(),
            metrics.n_observations,
            metrics.total_flood,
            started.elapsed().as_secs_f64()
        );
        Ok(RunOutcome { dir: out.to_path_buf(), metrics, audits, manifest })
    })
}

#[derive(Serialize)]
struct LongRow<'a> {
    label: &'a str,
    metric: &'static str,
    value: f64,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub comparison: Comparison,
    pub runs: Vec<RunOutcome>,
    /// Console table with a `*` on the best row.
    pub summary: String,
}

/// Runs every config on one shared scenario into `out/<label>` and writes
/// the side-by-side table.
pub fn compare(cfgs: &[LoadedConfig], out: &Path) -> Result<CompareOutcome, HarnessError> {
    if cfgs.len() < 2 {
        return Err(crate::evaluation::EvaluationError::TooFewRuns(cfgs.len()).into());
    }
    let mut labels = BTreeSet::new();
    for c in cfgs {
        if !labels.insert(c.label()) {
            return Err(HarnessError::config("compare", format!("duplicate run label {:?}", c.label())));
        }
    }
    let first = cfgs[0].scenario.param_hash(cfgs[0].config.seed);
    for c in &cfgs[1..] {
        let h = c.scenario.param_hash(c.config.seed);
        if h != first {
            return Err(HarnessError::Mismatch(format!("{} and {} use different scenarios", cfgs[0].label(), c.label())));
        }
    }
    guarded(out, "compare", || {
        let mut runs = Vec::with_capacity(cfgs.len());
        for c in cfgs {
            runs.push(run(c, &out.join(c.label()))?);
        }
        let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
        let comparison = compare_runs(&metrics)?;
        let mut files = FileSet::new(out);
        let mut table = Vec::new();
        write_comparison_csv(&comparison, &mut table)?;
        files.put("comparison.csv", &table)?;
        files.put_json("comparison.json", &comparison)?;
        let long = metrics.iter().flat_map(|m| {
            [
                ("total_flood", m.total_flood),
                ("per_observation", m.per_observation),
                ("n_observations", m.n_observations as f64),
                ("n_unique", m.n_unique as f64),
                ("action", m.categories.action as f64),
                ("minor", m.categories.minor as f64),
                ("moderate", m.categories.moderate as f64),
                ("max_runtime_s", m.max_runtime_s),
                ("runtime_fraction", m.runtime_fraction),
            ]
            .into_iter()
            .map(|(metric, value)| LongRow { label: &m.label, metric, value })
        });
        files.put("comparison_long.csv", &csv_with_header(&["label", "metric", "value"], long)?)?;
        let manifest = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": "compare",
            "runs": runs.iter().map(|r| &r.manifest.label).collect::<Vec<_>>(),
            "files": files.digests,
        });
        write_json(&out.join(MANIFEST), &manifest)?;
        let summary = summarize(&comparison);
        Ok(CompareOutcome { comparison, runs, summary })
    })
}

fn summarize(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "  {:<16} {:>8} {:>6} {:>12} {:>10} {:>8} {:>10}", "label", "mode", "agile", "total", "per_obs", "delta%", "max_rt_s");
    for r in &c.rows {
        let mode = match r.mode {
            Mode::Onboard => "onboard",
            Mode::Ground => "ground",
        };
        let _ = writeln!(
            s,
            "{} {:<16} {:>8} {:>6} {:>12.3} {:>10.4} {:>8.2} {:>10.3}",
            if r.best { "*" } else { " " },
            r.label,
            mode,
            r.agile,
            r.total_flood,
            r.per_observation,
            r.delta_pct,
            r.max_runtime_s
        );
    }
    if let Some(a) = c.agility_ratio {
        let _ = writeln!(s, "agility ratio (agile / nadir-fixed): {a:.3}");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub scenario_hash: String,
    pub seed: u64,
    pub tolerance: f64,
    pub curve: ErrorCurve,
    pub increases: Vec<String>,
}

/// Predictor error over the configured grid of hypothetical schedules.
pub fn evaluate(cfg: &LoadedConfig, out: &Path) -> Result<CurveReport, HarnessError> {
    guarded(out, "evaluate", || {
        let (scn, hash) = cfg.scenario()?;
        let c = &cfg.config;
        let curve = predictor_error_curve(&scn, &c.mission.predictor, &c.evaluation.error_grid, c.seed)?;
        let report = CurveReport {
            scenario_hash: hash.clone(),
            seed: c.seed,
            tolerance: CURVE_TOLERANCE,
            increases: curve.increases(CURVE_TOLERANCE),
            curve,
        };
        let mut files = FileSet::new(out);
        files.put(
            "error_curve.csv",
            &csv_with_header(&["n_updates", "frequency", "n_gps", "n_samples", "error"], &report.curve.cells)?,
        )?;
        files.put_json("error_curve.json", &report)?;
        let manifest = cfg.manifest("evaluate", &hash, files)?;
        write_json(&out.join(MANIFEST), &manifest)?;
        Ok(report)
    })
}
