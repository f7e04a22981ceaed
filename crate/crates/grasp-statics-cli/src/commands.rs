//! Command implementations: each runs one experiment into a run directory
//! and records every produced file in the manifest.

use std::path::Path;

use grasp_statics::compliance::{compliance_field, principal_direction_alignment};
use grasp_statics::equilibrium::{closing_trajectory, solve_free_closing, EquilibriumProblem};
use grasp_statics::finger::{FingerParams, FingerState};
use grasp_statics::grasp::{
    default_probe_directions, energy_well, simulate_pinch_grasp, simulate_power_grasp,
    GraspScenario, GraspType,
};
use grasp_statics::stiffness_id::{
    conditioning_report, fit_stiffness, read_cycles_csv, synthesize_cycles, write_cycles_csv,
};

use crate::doc::{FitDoc, Resolved};
use crate::error::CliError;
use crate::outputs::{
    alignment_csv, conditioning_json, curve_csv, field_csv, fit_json, json_body, trajectory_csv,
    well_json, RunWriter,
};
use crate::reference;

pub fn run_simulate(resolved: &Resolved, writer: &mut RunWriter) -> Result<String, CliError> {
    match resolved {
        Resolved::Grasp(scenario, _) => {
            let curve = match scenario.grasp_type {
                GraspType::PowerCylinder => simulate_power_grasp(scenario)?,
                _ => simulate_pinch_grasp(scenario)?,
            };
            writer.write("curve.csv", &curve_csv(&curve))?;
            Ok(format!(
                "curve.csv: {} samples, knee at {}",
                curve.samples.len(),
                curve
                    .knee_excursion
                    .map(|k| format!("{k:.3} mm"))
                    .unwrap_or_else(|| "none".into())
            ))
        }
        Resolved::FreeFinger(run) => {
            let problem = EquilibriumProblem {
                params: run.params.clone(),
                tendon_excursion: 0.0,
                obstacles: Vec::new(),
                solver_tolerance: 1e-8,
                max_iterations: 500,
            };
            let solutions = closing_trajectory(&problem, &run.schedule)?;
            writer.write("trajectory.csv", &trajectory_csv(&run.schedule, &solutions))?;
            Ok(format!("trajectory.csv: {} samples", solutions.len()))
        }
    }
}

pub fn run_compliance_field(
    resolved: &Resolved,
    writer: &mut RunWriter,
) -> Result<String, CliError> {
    let Resolved::FreeFinger(run) = resolved else {
        return Err(CliError::validation(
            "grasp_type: compliance-field runs on a free_closing scenario",
        ));
    };
    let problem = EquilibriumProblem {
        params: run.params.clone(),
        tendon_excursion: run.analysis_excursion,
        obstacles: Vec::new(),
        solver_tolerance: 1e-8,
        max_iterations: 500,
    };
    let state = solve_free_closing(&problem)?.state;
    let arcs: Vec<f64> = (0..run.field.count)
        .map(|i| {
            run.field.start
                + (run.field.stop - run.field.start) * i as f64
                    / (run.field.count.max(2) - 1) as f64
        })
        .collect();
    let field = compliance_field(&run.params, &state, &arcs)?;
    writer.write("field.csv", &field_csv(&field))?;
    Ok(format!("field.csv: {} sample points", field.len()))
}

pub fn run_alignment(resolved: &Resolved, writer: &mut RunWriter) -> Result<String, CliError> {
    let Resolved::FreeFinger(run) = resolved else {
        return Err(CliError::validation(
            "grasp_type: alignment runs on a free_closing scenario",
        ));
    };
    let problem = EquilibriumProblem {
        params: run.params.clone(),
        tendon_excursion: 0.0,
        obstacles: Vec::new(),
        solver_tolerance: 1e-8,
        max_iterations: 500,
    };
    let trajectory = closing_trajectory(&problem, &run.schedule)?;
    let angles = principal_direction_alignment(&run.params, &trajectory)?;
    writer.write("alignment.csv", &alignment_csv(&run.schedule, &angles))?;
    let max = angles.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "alignment.csv: {} samples, max angle {max:.2}°",
        angles.len()
    ))
}

pub fn run_well(
    resolved: &Resolved,
    analysis_excursion: Option<f64>,
    cap: f64,
    writer: &mut RunWriter,
) -> Result<String, CliError> {
    let Resolved::Grasp(scenario, _) = resolved else {
        return Err(CliError::validation(
            "grasp_type: well runs on a pinch scenario",
        ));
    };
    let excursion = analysis_excursion.ok_or_else(|| {
        CliError::validation("analysis_excursion: required for the well command")
    })?;
    let probes = default_probe_directions(scenario);
    let well = energy_well(scenario, excursion, &probes, cap)?;
    writer.write("well.json", &json_body(&well_json(&well)))?;
    Ok(format!(
        "well.json: {} probes, min escape work {:.4} N·mm",
        well.probes.len(),
        well.min_escape_work
    ))
}

pub fn run_fit(
    doc: &FitDoc,
    config_dir: &Path,
    seed: u64,
    writer: &mut RunWriter,
) -> Result<String, CliError> {
    let (data, synthesized) = if let Some(rel) = &doc.data {
        let path = config_dir.join(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        (read_cycles_csv(&text)?, false)
    } else {
        let synth = doc.synthesize.as_ref().expect("validated fit doc");
        let n = synth.matrix.len();
        if synth.matrix.iter().any(|row| row.len() != n) {
            return Err(CliError::validation("synthesize.matrix: must be square"));
        }
        let flat: Vec<f64> = synth.matrix.iter().flatten().cloned().collect();
        let k = nalgebra::DMatrix::from_row_slice(n, n, &flat);
        (
            synthesize_cycles(
                &k,
                synth.hysteresis,
                synth.noise_sigma,
                synth.cycles,
                synth.amplitude,
                seed,
            )?,
            true,
        )
    };
    if synthesized {
        writer.write("cycles.csv", &write_cycles_csv(&data))?;
    }
    let fit = fit_stiffness(&data)?;
    writer.write(
        "fit.json",
        &json_body(&fit_json(&fit, synthesized.then_some(seed))),
    )?;
    Ok(format!(
        "fit.json: {}×{} matrix, residual RMS {:.3e} N",
        fit.matrix.nrows(),
        fit.matrix.ncols(),
        fit.residual_rms
    ))
}

/// Built-in reproduction suite: the bundled scenarios and reference
/// matrices, emitted as six plot-ready artifacts.
pub fn run_repro(seed: u64, writer: &mut RunWriter) -> Result<String, CliError> {
    // Power-grasp force–excursion curve on the 65 mm cylinder.
    let power = GraspScenario::demo_power_cylinder();
    let curve = simulate_power_grasp(&power)?;
    writer.write("fig11.csv", &curve_csv(&curve))?;

    // Compliance-ellipse field along the distal link of the tuned finger,
    // unloaded configuration. The tuned moment arms place the center of
    // compliance 60 mm past the distal joint.
    let tuned = FingerParams {
        r_proximal: 13.0,
        ..FingerParams::default()
    };
    let state = FingerState::rest(&tuned);
    let arcs: Vec<f64> = (0..41).map(|i| 3.0 * i as f64).collect();
    let field = compliance_field(&tuned, &state, &arcs)?;
    writer.write("fig13.csv", &field_csv(&field))?;

    // Fingertip motion vs principal compliance direction over the default
    // finger's closing range.
    let default_params = FingerParams::default();
    let problem = EquilibriumProblem {
        params: default_params.clone(),
        tendon_excursion: 0.0,
        obstacles: Vec::new(),
        solver_tolerance: 1e-8,
        max_iterations: 500,
    };
    let schedule: Vec<f64> = (1..=50).map(|i| 20.0 * i as f64 / 50.0).collect();
    let trajectory = closing_trajectory(&problem, &schedule)?;
    let angles = principal_direction_alignment(&default_params, &trajectory)?;
    writer.write("fig14.csv", &alignment_csv(&schedule, &angles))?;

    // Pinch force–excursion curve on the 65 mm cylinder.
    let pinch = GraspScenario::demo_opposed_pinch();
    let curve = simulate_pinch_grasp(&pinch)?;
    writer.write("fig17.csv", &curve_csv(&curve))?;

    // Identification round trip: plant the planar reference matrix in
    // noisy hysteretic cycles and fit it back.
    let planted = reference::planar_reference();
    let cycles = synthesize_cycles(&planted, 0.1, 0.02, 16, 2.0, seed)?;
    let fit = fit_stiffness(&cycles)?;
    let mut fit_value = fit_json(&fit, Some(seed));
    fit_value["planted"] = serde_json::json!({
        "row_major": reference::PLANAR_PINCH_STIFFNESS.concat(),
        "units": "N/mm",
    });
    writer.write("eq5_fit.json", &json_body(&fit_value))?;

    // Conditioning report of the spatial reference matrix.
    let report = conditioning_report(&reference::spatial_reference());
    writer.write("eq6_report.json", &json_body(&conditioning_json(&report)))?;

    Ok("fig11.csv fig13.csv fig14.csv fig17.csv eq5_fit.json eq6_report.json".into())
}
