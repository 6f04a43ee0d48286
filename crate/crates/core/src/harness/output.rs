use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ScenarioDef, SCHEMA_VERSION};
use super::HarnessError;
use crate::executive::{ObservationRecord, PlanRecord};
use crate::network::{DeliveryRecord, DeliveryStatus};
use crate::scenario::Scenario;
use crate::types::{GpId, Time, WatershedId};

pub const INCOMPLETE_MARKER: &str = "RUN_INCOMPLETE";
pub const MANIFEST: &str = "manifest.json";
pub const SCENARIO_MANIFEST: &str = "scenario.json";

/// Environment variable that relocates the default output root.
pub const OUT_ROOT_ENV: &str = "AGILESIM_OUT_ROOT";

/// `explicit` if given, else `<root>/<name>` with the root taken from the
/// environment or `runs`.
pub fn output_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
            root.join(name)
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// Headers are written even for empty tables.
pub fn csv_with_header<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files and their digests for the manifest.
#[derive(Debug, Default)]
pub struct FileSet {
    dir: PathBuf,
    pub digests: BTreeMap<String, String>,
}

impl FileSet {
    pub fn new(dir: &Path) -> Self {
        FileSet { dir: dir.to_path_buf(), digests: BTreeMap::new() }
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        write_bytes(&self.dir.join(name), bytes)?;
        self.digests.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }
}

/// Written first and removed last; its presence marks a run that failed or
/// was interrupted.
pub fn mark_incomplete(dir: &Path, what: &str) -> Result<(), HarnessError> {
    write_bytes(&dir.join(INCOMPLETE_MARKER), format!("{what} started\n").as_bytes())
}

pub fn record_failure(dir: &Path, err: &HarnessError) {
    let path = dir.join(INCOMPLETE_MARKER);
    if path.exists() {
        let _ = fs::write(&path, format!("failed: {err}\n"));
    }
}

pub fn mark_complete(dir: &Path) -> Result<(), HarnessError> {
    let path = dir.join(INCOMPLETE_MARKER);
    match fs::remove_file(&path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(&path)(e)),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct DeliveryRow {
    bundle: u64,
    src: u32,
    dst: u32,
    region: u32,
    priority: u32,
    created_at: Time,
    ttl: Time,
    status: &'static str,
    resolved_at: Option<Time>,
    hops: Option<u32>,
    latency_s: Option<Time>,
}

pub const OBSERVATION_HEADER: &[&str] = &["sat", "gp", "t", "slot", "region", "watershed", "precip", "flood"];
pub const PLAN_HEADER: &[&str] = &[
    "sat",
    "t_plan",
    "window_start",
    "window_end",
    "nodes",
    "value_total",
    "evaluations",
    "modeled_runtime_s",
    "skipped",
    "fallback",
];
pub const DELIVERY_HEADER: &[&str] =
    &["bundle", "src", "dst", "region", "priority", "created_at", "ttl", "status", "resolved_at", "hops", "latency_s"];

pub fn observations_csv(rows: &[ObservationRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_with_header(OBSERVATION_HEADER, rows)
}

pub fn plans_csv(rows: &[PlanRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_with_header(PLAN_HEADER, rows)
}

pub fn deliveries_csv(rows: &[DeliveryRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_with_header(
        DELIVERY_HEADER,
        rows.iter().map(|d| {
            let (status, resolved_at, hops) = match d.status {
                DeliveryStatus::Delivered { at, hops } => ("delivered", Some(at), Some(hops)),
                DeliveryStatus::Dropped { at } => ("dropped", Some(at), None),
                DeliveryStatus::InFlight => ("in_flight", None, None),
            };
            DeliveryRow {
                bundle: d.bundle,
                src: d.src.0,
                dst: d.dst.0,
                region: d.region.0,
                priority: d.priority,
                created_at: d.created_at,
                ttl: d.ttl,
                status,
                resolved_at,
                hops,
                latency_s: d.latency(),
            }
        }),
    )
}

/// Written by `generate-scenario`; enough to regenerate the scenario and
/// check that the regeneration matches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub param_hash: String,
    pub scenario_hash: String,
    pub n_gp: usize,
    pub n_watersheds: usize,
    pub n_slots: usize,
    pub slot_s: Time,
    /// Estimate-to-truth precipitation ratio per region.
    pub ratios: Vec<f64>,
    pub definition: ScenarioDef,
    pub files: BTreeMap<String, String>,
}

pub fn read_scenario_manifest(dir: &Path) -> Result<ScenarioManifest, HarnessError> {
    let path = dir.join(SCENARIO_MANIFEST);
    let at = path.display().to_string();
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::config(&at, e))?;
    let m: ScenarioManifest = serde_json::from_str(&text).map_err(|e| HarnessError::config(&at, e))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::config(&at, format!("unsupported schema version {}", m.schema_version)));
    }
    Ok(m)
}

#[derive(Serialize)]
struct GridRow {
    gp: u32,
    region: u32,
    watershed: u32,
    lat_deg: f64,
    lon_deg: f64,
}

#[derive(Serialize)]
struct PrecipRow {
    gp: u32,
    slot: usize,
    truth_mm: f64,
    estimate_mm: f64,
}

#[derive(Serialize)]
struct FloodRow {
    watershed: u32,
    slot: usize,
    true_q: f64,
    initial_q: f64,
    initial_value: u8,
}

/// grid.csv, precip.csv and flood.csv for a generated scenario.
pub fn write_scenario_fields(files: &mut FileSet, scn: &Scenario) -> Result<(), HarnessError> {
    let grid = scn.geography.points.iter().map(|p| GridRow {
        gp: p.id.0,
        region: p.region.0,
        watershed: p.watershed.0,
        lat_deg: p.lat_deg,
        lon_deg: p.lon_deg,
    });
    files.put("grid.csv", &csv_with_header(&["gp", "region", "watershed", "lat_deg", "lon_deg"], grid)?)?;
    let n_slots = scn.n_slots();
    let precip = (0..scn.geography.n_gp() as u32).flat_map(|gp| {
        (0..n_slots).map(move |y| PrecipRow {
            gp,
            slot: y,
            truth_mm: scn.truth_precip.get(GpId(gp), y),
            estimate_mm: scn.est_precip.get(GpId(gp), y),
        })
    });
    files.put("precip.csv", &csv_with_header(&["gp", "slot", "truth_mm", "estimate_mm"], precip)?)?;
    let flood = (0..scn.geography.n_ws() as u32).flat_map(|w| {
        (0..n_slots).map(move |y| FloodRow {
            watershed: w,
            slot: y,
            true_q: scn.true_flood.get_ws(WatershedId(w), y),
            initial_q: scn.flood_init.get_ws(WatershedId(w), y),
            initial_value: scn.value_init.get_ws(WatershedId(w), y),
        })
    });
    files.put(
        "flood.csv",
        &csv_with_header(&["watershed", "slot", "true_q", "initial_q", "initial_value"], flood)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{RegionId, SatId};

    #[test]
    fn empty_tables_keep_headers() {
        let b = observations_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "sat,gp,t,slot,region,watershed,precip,flood\n");
        let b = deliveries_csv(&[]).unwrap();
        assert!(String::from_utf8(b).unwrap().starts_with("bundle,src,dst"));
    }

    #[test]
    fn delivery_rows_flatten_status() {
        let rec = |status| DeliveryRecord {
            bundle: 3,
            src: SatId(0),
            dst: SatId(1),
            region: RegionId(0),
            priority: 1,
            created_at: 10,
            ttl: 60,
            status,
        };
        let b = deliveries_csv(&[
            rec(DeliveryStatus::Delivered { at: 14, hops: 2 }),
            rec(DeliveryStatus::Dropped { at: 70 }),
            rec(DeliveryStatus::InFlight),
        ])
        .unwrap();
        let text = String::from_utf8(b).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "3,0,1,0,1,10,60,delivered,14,2,4");
        assert_eq!(lines[2], "3,0,1,0,1,10,60,dropped,70,,");
        assert_eq!(lines[3], "3,0,1,0,1,10,60,in_flight,,,");
    }

    #[test]
    fn output_dir_prefers_explicit_path() {
        let p = output_dir(Some(Path::new("/tmp/x")), "label");
        assert_eq!(p, PathBuf::from("/tmp/x"));
        assert!(output_dir(None, "label").ends_with("label"));
    }

    #[test]
    fn marker_lifecycle() {
        let d = tempfile::tempdir().unwrap();
        mark_incomplete(d.path(), "run").unwrap();
        assert!(d.path().join(INCOMPLETE_MARKER).exists());
        record_failure(d.path(), &HarnessError::Mismatch("x".into()));
        let text = fs::read_to_string(d.path().join(INCOMPLETE_MARKER)).unwrap();
        assert!(text.contains("failed"));
        mark_complete(d.path()).unwrap();
        assert!(!d.path().join(INCOMPLETE_MARKER).exists());
        mark_complete(d.path()).unwrap();
    }
}
