use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::evaluation::{CategoryThresholds, ErrorGrid, EvalOptions};
use crate::executive::{ExecutiveConfig, MissionSpec};
use crate::orbits::{OrbitalElements, RegionSpec, WalkerSpec};
use crate::scenario::{Breakpoints, PerturbationSpec, Scenario, ScenarioParams, TruthParams};
use crate::types::Time;

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario definition inline, or a reference to a directory written by
/// `generate-scenario` whose manifest is replayed and hash-checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<PathBuf>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
    #[serde(default)]
    pub horizon_s: Option<Time>,
    #[serde(default)]
    pub watersheds_per_region: Option<usize>,
    #[serde(default)]
    pub truth: Option<TruthParams>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub breakpoints: Option<Breakpoints>,
}

/// Fully resolved scenario inputs; together with the seed they regenerate
/// the scenario bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub regions: Vec<RegionSpec>,
    pub params: ScenarioParams,
}

impl ScenarioDef {
    pub fn generate(&self, seed: u64) -> Result<Scenario, HarnessError> {
        Scenario::generate(&self.regions, &self.params, seed).map_err(|e| HarnessError::config("scenario", e))
    }

    /// sha256 of the canonical JSON form plus the seed.
    pub fn param_hash(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("scenario definition serializes"));
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub thresholds: CategoryThresholds,
    pub error_grid: ErrorGrid,
}

impl EvaluationSection {
    pub fn options(&self) -> EvalOptions {
        EvalOptions { thresholds: self.thresholds.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub label: Option<String>,
    pub scenario: ScenarioSection,
    pub constellation: WalkerSpec,
    #[serde(default)]
    pub mission: MissionSpec,
    #[serde(default)]
    pub executive: ExecutiveConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

/// Parses TOML, reporting the dotted path of the offending field.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, HarnessError> {
    let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::config(origin, e.message()))?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::config(format!("{origin}: {path}"), e.into_inner().message())
    })?;
    Ok(cfg)
}

#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub path: Option<PathBuf>,
    pub text: String,
    pub config: RunConfig,
    pub scenario: ScenarioDef,
    /// Set when the scenario comes from a generated directory.
    pub expected_scenario_hash: Option<String>,
    pub constellation: Vec<OrbitalElements>,
}

impl LoadedConfig {
    pub fn label(&self) -> String {
        if let Some(l) = &self.config.label {
            return l.clone();
        }
        self.path
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_string())
    }

    pub fn config_sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, HarnessError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::config(&origin, e))?;
    resolve(text, Some(path.to_path_buf()))
}

/// Validates a parsed config and resolves its scenario reference. Relative
/// `scenario.from` paths are taken against the config file's directory.
pub fn resolve(text: String, path: Option<PathBuf>) -> Result<LoadedConfig, HarnessError> {
    let origin = path.as_ref().map_or("<config>".to_string(), |p| p.display().to_string());
    let config = parse_config(&text, &origin)?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::config(
            "schema_version",
            format!("unsupported schema version {}, expected {SCHEMA_VERSION}", config.schema_version),
        ));
    }
    config.executive.validate().map_err(|e| HarnessError::config("executive", e))?;
    config.mission.slew.validate().map_err(|e| HarnessError::config("mission.slew", e))?;
    let constellation = config.constellation.build().map_err(|e| HarnessError::config("constellation", e))?;
    let base = path.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf).unwrap_or_default();
    let (scenario, expected_scenario_hash) = scenario_def(&config.scenario, &base)?;
    scenario.params.truth.validate().map_err(|e| HarnessError::config("scenario.truth", e))?;
    if scenario.params.horizon_s <= 0 {
        return Err(HarnessError::config("scenario.horizon_s", "must be positive"));
    }
    Ok(LoadedConfig { path, text, config, scenario, expected_scenario_hash, constellation })
}

fn scenario_def(s: &ScenarioSection, base: &Path) -> Result<(ScenarioDef, Option<String>), HarnessError> {
    match &s.from {
        Some(dir) => {
            let inline = !s.regions.is_empty()
                || s.horizon_s.is_some()
                || s.watersheds_per_region.is_some()
                || s.truth.is_some()
                || s.perturbation.is_some()
                || s.breakpoints.is_some();
            if inline {
                return Err(HarnessError::config("scenario", "`from` excludes inline scenario fields"));
            }
            let dir = base.join(dir);
            let manifest = super::output::read_scenario_manifest(&dir)?;
            Ok((manifest.definition, Some(manifest.scenario_hash)))
        }
        None => {
            if s.regions.is_empty() {
                return Err(HarnessError::config("scenario.regions", "at least one region is required"));
            }
            let d = ScenarioParams::default();
            let def = ScenarioDef {
                regions: s.regions.clone(),
                params: ScenarioParams {
                    horizon_s: s.horizon_s.unwrap_or(d.horizon_s),
                    watersheds_per_region: s.watersheds_per_region.unwrap_or(d.watersheds_per_region),
                    truth: s.truth.clone().unwrap_or(d.truth),
                    perturbation: s.perturbation.clone().unwrap_or(d.perturbation),
                    breakpoints: s.breakpoints.clone().unwrap_or(d.breakpoints),
                },
            };
            Ok((def, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
schema_version = 1
seed = 4

[scenario]
horizon_s = 3600
[[scenario.regions]]
name = "r"
lat_deg = 10.0
lon_deg = 20.0

[constellation]
n_sats = 2
n_planes = 1
altitude_km = 700.0
inclination_deg = 98.0
phasing = 0
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = resolve(MINI.to_string(), None).unwrap();
        assert_eq!(c.config.seed, 4);
        assert_eq!(c.scenario.params.horizon_s, 3600);
        assert_eq!(c.scenario.params.truth, TruthParams::default());
        assert_eq!(c.constellation.len(), 2);
        assert_eq!(c.label(), "run");
    }

    #[test]
    fn unknown_key_reports_field_path() {
        let text = MINI.replace("phasing = 0", "phasing = 0\nphasng = 1");
        let e = resolve(text, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("constellation") && msg.contains("phasng"), "{msg}");
        let text = MINI.replace("seed = 4", "seed = 4\n[executive]\nmode = \"orbit\"");
        let msg = resolve(text, None).unwrap_err().to_string();
        assert!(msg.contains("executive.mode"), "{msg}");
    }

    #[test]
    fn seed_and_version_are_mandatory() {
        assert!(resolve(MINI.replace("seed = 4", ""), None).is_err());
        let e = resolve(MINI.replace("schema_version = 1", "schema_version = 2"), None).unwrap_err();
        assert!(e.to_string().contains("schema_version"));
    }

    #[test]
    fn semantic_validation_runs_before_any_work() {
        let text = MINI.replace("seed = 4", "seed = 4\n[executive]\nmode = \"ground\"");
        assert_eq!(resolve(text, None).unwrap_err().exit_code(), 2);
        let text = MINI.replace("n_planes = 1", "n_planes = 3");
        assert_eq!(resolve(text, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_scenario_reference_is_a_config_error() {
        let text = MINI.replace("horizon_s = 3600", "from = \"/nonexistent/scn\"").replace(
            "[[scenario.regions]]\nname = \"r\"\nlat_deg = 10.0\nlon_deg = 20.0\n",
            "",
        );
        let e = resolve(text, None).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }
}
