//! Plot-ready CSV/JSON writers and the run manifest.
//!
//! Every numeric column header carries its unit suffix. Runs are
//! deterministic: fixed-precision float formatting, ordered JSON maps, and a
//! manifest listing every produced file with its SHA-256 content hash.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use grasp_statics::compliance::ComplianceEllipse;
use grasp_statics::equilibrium::EquilibriumSolution;
use grasp_statics::grasp::{EnergyWell, ForceExcursionCurve, GraspStiffness, StiffnessBlock};
use grasp_statics::stiffness_id::{ConditioningReport, StiffnessFit};

use crate::error::CliError;

/// Collects files of one run directory and writes its manifest.
pub struct RunWriter {
    dir: PathBuf,
    files: Vec<(String, usize, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.files
            .push((name.to_string(), body.len(), sha256_hex(body.as_bytes())));
        Ok(())
    }

    /// Writes manifest.json listing every produced file with content hashes.
    pub fn finish(mut self, command: &str, seed: u64) -> Result<PathBuf, CliError> {
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        let files: Vec<serde_json::Value> = self
            .files
            .iter()
            .map(|(name, bytes, sha)| {
                serde_json::json!({ "path": name, "bytes": bytes, "sha256": sha })
            })
            .collect();
        let manifest = serde_json::json!({
            "command": command,
            "seed": seed,
            "files": files,
        });
        let path = self.dir.join("manifest.json");
        let body = format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap());
        fs::write(&path, body)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn fmt(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v }; // normalize −0.0
    format!("{v:.9}")
}

/// `excursion_mm,force_N,phase` with the knee excursion annotated up front.
pub fn curve_csv(curve: &ForceExcursionCurve) -> String {
    let mut out = String::new();
    match curve.knee_excursion {
        Some(k) => out.push_str(&format!("# knee_excursion_mm = {}\n", fmt(k))),
        None => out.push_str("# knee_excursion_mm = none\n"),
    }
    out.push_str("excursion_mm,force_N,phase\n");
    for s in &curve.samples {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(s.excursion),
            fmt(s.internal_force),
            s.phase.label()
        ));
    }
    out
}

/// Free-closing trajectory: joint angles, tension, energy and phase per
/// excursion sample.
pub fn trajectory_csv(samples: &[f64], solutions: &[EquilibriumSolution]) -> String {
    let mut out = String::from(
        "excursion_mm,theta_proximal_rad,theta_distal_rad,tendon_tension_N,energy_Nmm,phase\n",
    );
    for (e, s) in samples.iter().zip(solutions) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(*e),
            fmt(s.state.theta_proximal),
            fmt(s.state.theta_distal),
            fmt(s.state.tendon_tension),
            fmt(s.energy),
            s.state.phase.label()
        ));
    }
    out
}

/// `point_mm,axis1_x,axis1_y,c1_mm_per_N,c2_mm_per_N` along the distal link.
pub fn field_csv(field: &[ComplianceEllipse]) -> String {
    let mut out = String::from("point_mm,axis1_x,axis1_y,c1_mm_per_N,c2_mm_per_N\n");
    for e in field {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(e.arc_position),
            fmt(e.axes[0].x),
            fmt(e.axes[0].y),
            fmt(e.compliances[0]),
            fmt(e.compliances[1]),
        ));
    }
    out
}

/// `excursion_mm,angle_deg` between fingertip motion and the principal
/// compliance direction.
pub fn alignment_csv(samples: &[f64], angles: &[f64]) -> String {
    let mut out = String::from("excursion_mm,angle_deg\n");
    for (e, a) in samples.iter().zip(angles) {
        out.push_str(&format!("{},{}\n", fmt(*e), fmt(*a)));
    }
    out
}

fn matrix_json(rows: usize, entries: &[f64]) -> serde_json::Value {
    serde_json::json!({
        "rows": rows,
        "row_major": entries.iter().map(|v| serde_json::json!(v)).collect::<Vec<_>>(),
        "units": "N/mm",
    })
}

pub fn stiffness_json(k: &GraspStiffness) -> serde_json::Value {
    let (rows, entries) = match &k.matrix {
        StiffnessBlock::Planar(_) => (2, k.matrix.row_major()),
        StiffnessBlock::Spatial(_) => (3, k.matrix.row_major()),
    };
    serde_json::json!({
        "matrix": matrix_json(rows, &entries),
        "eigenvalues_N_per_mm": k.matrix.eigenvalues(),
        "condition_number": k.matrix.condition_number(),
        "positive_definite": k.matrix.is_positive_definite(),
    })
}

pub fn fit_json(fit: &StiffnessFit, seed: Option<u64>) -> serde_json::Value {
    let n = fit.matrix.nrows();
    let row_major: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| fit.matrix[(i, j)])
        .collect();
    let se: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| fit.standard_errors[(i, j)])
        .collect();
    let report = fit.conditioning();
    serde_json::json!({
        "matrix": matrix_json(n, &row_major),
        "standard_errors": matrix_json(n, &se),
        "hysteresis_N": fit.hysteresis,
        "residual_rms_N": fit.residual_rms,
        "conditioning": conditioning_json(&report),
        "seed": seed,
    })
}

pub fn conditioning_json(report: &ConditioningReport) -> serde_json::Value {
    let n = report.eigenvalues.len();
    let axes: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| report.principal_axes[(i, j)])
        .collect();
    serde_json::json!({
        "eigenvalues_N_per_mm": report.eigenvalues,
        "condition_number": report.condition_number,
        "well_conditioned": report.well_conditioned,
        "threshold": report.threshold,
        "principal_axes_row_major": axes,
    })
}

pub fn well_json(well: &EnergyWell) -> serde_json::Value {
    let probes: Vec<serde_json::Value> = well
        .probes
        .iter()
        .map(|p| {
            serde_json::json!({
                "direction": [p.direction.x, p.direction.y, p.direction.z],
                "escape_work_Nmm": p.escape_work,
                "break_displacement_mm": p.break_displacement,
                "capped": p.capped,
            })
        })
        .collect();
    serde_json::json!({
        "equilibrium_pose_mm": [
            well.equilibrium_pose.x,
            well.equilibrium_pose.y,
            well.equilibrium_pose.z,
        ],
        "hessian": stiffness_json(&well.hessian),
        "probes": probes,
        "min_escape_work_Nmm": well.min_escape_work,
    })
}

pub fn json_body(value: &serde_json::Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(value).unwrap())
}
