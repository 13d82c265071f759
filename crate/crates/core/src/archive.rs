//! On-disk result archive: config snapshot, manifest, and plain CSV tables.
//!
//! ```text
//! out/
//!   config.toml
//!   manifest.json
//!   summary.csv
//!   trajectories/<freq>hz_<algorithm>.csv
//!   filters/<freq>hz_<algorithm>.csv
//!   fields/<freq>hz_<algorithm>_it<iteration>.csv
//! ```
//!
//! Numbers are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ConfigFile;
use crate::control::Algorithm;
use crate::error::Result;
use crate::experiment::{AlgorithmRun, FieldSnapshot, FrequencyRun, RunResult};
use crate::scene::SceneConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Full-precision float formatting for tables.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// File-name stem for a frequency, e.g. `400hz` or `412.5hz`.
pub fn frequency_tag(f: f64) -> String {
    format!("{f}hz")
}

#[derive(Debug, Serialize)]
pub struct TableEntry {
    pub path: String,
    pub kind: &'static str,
    pub frequency_hz: Option<f64>,
    pub algorithm: Option<Algorithm>,
}

#[derive(Debug, Serialize)]
pub struct FrequencyEntry {
    pub frequency_hz: f64,
    pub status: &'static str,
    pub error: Option<String>,
    pub cond_a_yy: Option<f64>,
    pub fixed_filter_solver: Option<String>,
    pub stationarity_residual: Option<f64>,
    pub kernel_lambda: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub package: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub sound_speed_m_per_s: f64,
    pub iterations: usize,
    pub snr_db: f64,
    pub algorithms: Vec<Algorithm>,
    pub decisions: BTreeMap<&'static str, String>,
    pub frequencies: Vec<FrequencyEntry>,
    pub tables: Vec<TableEntry>,
}

fn decisions(result: &RunResult) -> BTreeMap<&'static str, String> {
    let c = &result.config;
    BTreeMap::from([
        ("time_convention", format!("{:?}", c.scene.convention).to_lowercase()),
        ("primary_signal", "unit amplitude, zero phase at every frame".into()),
        ("noise", "circular complex Gaussian, variance = mean clean power of each array x 10^(-snr/10)".into()),
        ("rng_stream", "ChaCha8 seeded with `seed`, stream = bits of the frequency value".into()),
        ("kernel_regularization", format!("{:?}", c.kernel.regularization)),
        ("kernel_beta", num(c.kernel.beta)),
        ("kernel_eta", format!("{:?}", c.kernel.eta)),
        ("quadrature_grid", format!("{:?}", c.grid)),
        ("metric_grid", format!("{:?}", c.eval_grid.unwrap_or(c.grid))),
        ("map_grid", format!("{:?}", c.map_grid)),
        ("fixed_filter", "Cholesky with refinement when cond(A_yy) < 1e12, else pseudo-inverse with cutoff 1e-10 sigma_max".into()),
        ("nlms_init", format!("{:?}", c.nlms_init).to_lowercase()),
        ("secondary_path_for_control", "true secondary path including scattering".into()),
        ("p_red_floor_db", "-200".into()),
    ])
}

fn write_table(dir: &Path, rel: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = String::with_capacity(4096);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn trajectory_rows(run: &AlgorithmRun) -> impl Iterator<Item = String> + '_ {
    run.trajectory.iter().enumerate().map(|(i, p)| format!("{i},{}", num(*p)))
}

fn filter_rows(run: &AlgorithmRun) -> Vec<String> {
    let w = &run.final_w;
    let mut rows = Vec::with_capacity(w.len());
    for l in 0..w.nrows() {
        for r in 0..w.ncols() {
            rows.push(format!("{l},{r},{},{}", num(w[(l, r)].re), num(w[(l, r)].im)));
        }
    }
    rows
}

fn snapshot_rows(snap: &FieldSnapshot) -> Vec<String> {
    let norm = snap.normalized_power_db();
    (0..snap.total.points.len())
        .map(|j| {
            let p = snap.total.points[j];
            let (a, b, c) = (snap.primary.values[j], snap.secondary.values[j], snap.total.values[j]);
            format!(
                "{},{},{},{},{},{},{},{},{}",
                num(p.x),
                num(p.y),
                num(a.re),
                num(a.im),
                num(b.re),
                num(b.im),
                num(c.re),
                num(c.im),
                num(norm[j])
            )
        })
        .collect()
}

const SNAPSHOT_HEADER: &str =
    "x_m,y_m,primary_re_pa,primary_im_pa,secondary_re_pa,secondary_im_pa,total_re_pa,total_im_pa,normalized_power_db";

fn summary_rows(result: &RunResult) -> (String, Vec<String>) {
    let algs = &result.config.algorithms;
    let mut header = String::from("frequency_hz,wavenumber_rad_per_m");
    for a in algs {
        let _ = write!(header, ",{a}_final_p_red_db");
    }
    header.push_str(",cond_a_yy,stationarity_residual,kernel_lambda,status");
    let rows = result
        .outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(r) => {
                let mut row = format!("{},{}", num(r.frequency), num(r.diagnostics.wavenumber));
                for a in algs {
                    let v = r.run_for(*a).map(|x| x.final_reduction_db());
                    let _ = write!(row, ",{}", opt_num(v));
                }
                let d = &r.diagnostics;
                let _ = write!(row, ",{},{},{},ok", opt_num(d.cond_a_yy), opt_num(d.stationarity_residual), opt_num(d.lambda));
                row
            }
            Err(_) => {
                let mut row = format!("{},", num(o.frequency));
                for _ in algs {
                    row.push(',');
                }
                row.push_str(",,,failed");
                row
            }
        })
        .collect();
    (header, rows)
}

fn frequency_entry(f: f64, r: std::result::Result<&FrequencyRun, &String>) -> FrequencyEntry {
    match r {
        Ok(r) => {
            let d = &r.diagnostics;
            FrequencyEntry {
                frequency_hz: f,
                status: "ok",
                error: None,
                cond_a_yy: d.cond_a_yy,
                fixed_filter_solver: d.solve_path.map(|p| format!("{p:?}").to_lowercase()),
                stationarity_residual: d.stationarity_residual,
                kernel_lambda: d.lambda,
                grid_points: Some(d.grid_points),
            }
        }
        Err(e) => FrequencyEntry {
            frequency_hz: f,
            status: "failed",
            error: Some(e.clone()),
            cond_a_yy: None,
            fixed_filter_solver: None,
            stationarity_residual: None,
            kernel_lambda: None,
            grid_points: None,
        },
    }
}

/// Write the whole archive for `result` into `dir`. Returns the manifest.
pub fn write_archive(dir: &Path, config: &ConfigFile, result: &RunResult) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config.to_toml()?)?;
    let mut tables = Vec::new();
    let (header, rows) = summary_rows(result);
    write_table(dir, SUMMARY_FILE, &header, rows)?;
    tables.push(TableEntry {
        path: SUMMARY_FILE.into(),
        kind: "summary",
        frequency_hz: None,
        algorithm: None,
    });
    for r in result.succeeded() {
        let tag = frequency_tag(r.frequency);
        for run in &r.runs {
            let a = run.algorithm;
            let rel = format!("trajectories/{tag}_{a}.csv");
            write_table(dir, &rel, "iteration,p_red_db", trajectory_rows(run))?;
            tables.push(TableEntry {
                path: rel,
                kind: "trajectory",
                frequency_hz: Some(r.frequency),
                algorithm: Some(a),
            });
            let rel = format!("filters/{tag}_{a}.csv");
            write_table(dir, &rel, "loudspeaker,reference_mic,w_re,w_im", filter_rows(run))?;
            tables.push(TableEntry {
                path: rel,
                kind: "filter",
                frequency_hz: Some(r.frequency),
                algorithm: Some(a),
            });
            for snap in &run.snapshots {
                let rel = format!("fields/{tag}_{a}_it{}.csv", snap.iteration);
                write_table(dir, &rel, SNAPSHOT_HEADER, snapshot_rows(snap))?;
                tables.push(TableEntry {
                    path: rel,
                    kind: "field",
                    frequency_hz: Some(r.frequency),
                    algorithm: Some(a),
                });
            }
        }
    }
    let c = &result.config;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: c.seed,
        sound_speed_m_per_s: c.scene.sound_speed,
        iterations: c.iterations,
        snr_db: c.snr_db,
        algorithms: c.algorithms.clone(),
        decisions: decisions(result),
        frequencies: result
            .outcomes
            .iter()
            .map(|o| frequency_entry(o.frequency, o.result.as_ref()))
            .collect(),
        tables,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| std::io::Error::other(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Normalized power map with marker rows for the error microphones, the
/// scatterer and the region boundary. Returns the written path.
pub fn write_fieldmap(dir: &Path, name: &str, scene: &SceneConfig, snap: &FieldSnapshot) -> Result<PathBuf> {
    let norm = snap.normalized_power_db();
    let mut rows: Vec<String> = snap
        .total
        .points
        .iter()
        .zip(&norm)
        .map(|(p, v)| format!("grid,{},{},,{}", num(p.x), num(p.y), num(*v)))
        .collect();
    for m in &scene.error_mics {
        rows.push(format!("error_mic,{},{},,", num(m.x), num(m.y)));
    }
    if let Some(s) = &scene.scatterer {
        rows.push(format!("scatterer,{},{},{},", num(s.center.x), num(s.center.y), num(s.radius)));
    }
    let t = &scene.target_region;
    rows.push(format!("region_boundary,{},{},{},", num(t.center.x), num(t.center.y), num(t.radius)));
    write_table(dir, name, "kind,x_m,y_m,radius_m,normalized_power_db", rows)?;
    Ok(dir.join(name))
}
