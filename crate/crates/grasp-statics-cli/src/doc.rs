//! Scenario document schema: the strict JSON interface of the CLI.
//!
//! A scenario file describes one experiment. Unknown keys are rejected so a
//! typo cannot silently change an experiment. Finger parameters use the
//! library's radian/millimetre fields directly; the placement azimuth is in
//! degrees for readability.

use serde::{Deserialize, Serialize};

use grasp_statics::finger::FingerParams;
use grasp_statics::grasp::{
    FingerPlacement, GraspScenario, GraspType, ObjectKind, ObjectSpec, SolverSettings,
};

use crate::error::CliError;

/// What a scenario file asks the toolkit to run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocGraspType {
    OpposedPinch,
    SphericalPinch,
    PowerCylinder,
    /// A single free-closing finger (no object): closing trajectories,
    /// compliance fields and alignment analyses.
    FreeClosing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerDoc {
    /// Orientation of the finger's motion plane about the grasp axis, deg.
    #[serde(default)]
    pub azimuth_deg: f64,
    /// Distance from the grasp axis to the finger base, mm.
    pub base_offset: f64,
    #[serde(default)]
    pub params: FingerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDoc {
    pub kind: ObjectKind,
    pub width: f64,
    pub center_height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_stiffness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinch_latitude_deg: Option<f64>,
}

/// Either an explicit list of excursions or a uniform range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleDoc {
    Range { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl ScheduleDoc {
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        match self {
            ScheduleDoc::List(v) => Ok(v.clone()),
            ScheduleDoc::Range { start, stop, count } => {
                if *count < 2 {
                    return Err(CliError::validation(
                        "excursion_schedule.count: must be ≥ 2",
                    ));
                }
                Ok((0..*count)
                    .map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64)
                    .collect())
            }
        }
    }
}

/// Sampling of the compliance field along the distal link axis, mm from the
/// distal joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Default for FieldDoc {
    fn default() -> Self {
        FieldDoc {
            start: 0.0,
            stop: 120.0,
            count: 41,
        }
    }
}

/// Energy-well probing controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeDoc {
    /// Displacement cap per probe, mm.
    pub displacement_cap: f64,
}

impl Default for ProbeDoc {
    fn default() -> Self {
        ProbeDoc {
            displacement_cap: 8.0,
        }
    }
}

/// One experiment: a grasp scenario or a single free-closing finger, plus
/// analysis controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub grasp_type: DocGraspType,
    pub fingers: Vec<FingerDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectDoc>,
    pub excursion_schedule: ScheduleDoc,
    #[serde(default)]
    pub solver: SolverSettings,
    /// compliance-field sampling (optional; defaults cover the distal axis).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_arcs: Option<FieldDoc>,
    /// Excursion at which stiffness/well analyses evaluate the grasp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_excursion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeDoc>,
}

/// Validated single-finger analysis setup.
pub struct FreeFingerRun {
    pub params: FingerParams,
    pub schedule: Vec<f64>,
    pub field: FieldDoc,
    /// Excursion at which the compliance field is evaluated (0 = unloaded).
    pub analysis_excursion: f64,
}

/// What a scenario document resolves to.
pub enum Resolved {
    Grasp(Box<GraspScenario>, ScenarioDoc),
    FreeFinger(Box<FreeFingerRun>),
}

/// Parses scenario text: JSON syntax errors are parse errors, schema or
/// invariant violations are validation errors naming the offending field.
pub fn parse_scenario(text: &str) -> Result<Resolved, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::parse(format!("invalid JSON: {e}")))?;
    resolve_value(value)
}

pub fn resolve_value(value: serde_json::Value) -> Result<Resolved, CliError> {
    let doc: ScenarioDoc = serde_json::from_value(value)
        .map_err(|e| CliError::validation(format!("scenario schema: {e}")))?;
    resolve_doc(doc)
}

pub fn resolve_doc(doc: ScenarioDoc) -> Result<Resolved, CliError> {
    let schedule = doc.excursion_schedule.expand()?;
    match doc.grasp_type {
        DocGraspType::FreeClosing => {
            if doc.fingers.len() != 1 {
                return Err(CliError::validation(
                    "fingers: free_closing uses exactly one finger",
                ));
            }
            if doc.object.is_some() {
                return Err(CliError::validation(
                    "object: free_closing takes no object",
                ));
            }
            let params = doc.fingers[0].params.clone();
            params
                .validate()
                .map_err(|e| CliError::validation(format!("fingers.0.params.{e}")))?;
            Ok(Resolved::FreeFinger(Box::new(FreeFingerRun {
                params,
                schedule,
                field: doc.field_arcs.clone().unwrap_or_default(),
                analysis_excursion: doc.analysis_excursion.unwrap_or(0.0),
            })))
        }
        _ => {
            let grasp_type = match doc.grasp_type {
                DocGraspType::OpposedPinch => GraspType::OpposedPinch,
                DocGraspType::SphericalPinch => GraspType::SphericalPinch,
                DocGraspType::PowerCylinder => GraspType::PowerCylinder,
                DocGraspType::FreeClosing => unreachable!(),
            };
            let object = doc
                .object
                .clone()
                .ok_or_else(|| CliError::validation("object: required for grasp scenarios"))?;
            let scenario = GraspScenario {
                grasp_type,
                fingers: doc
                    .fingers
                    .iter()
                    .map(|f| FingerPlacement {
                        azimuth: f.azimuth_deg.to_radians(),
                        base_offset: f.base_offset,
                        params: f.params.clone(),
                    })
                    .collect(),
                object: ObjectSpec {
                    kind: object.kind,
                    width: object.width,
                    center_height: object.center_height,
                    surface_stiffness: object.surface_stiffness,
                    pinch_latitude_deg: object.pinch_latitude_deg.unwrap_or(15.0),
                },
                excursion_schedule: schedule,
                solver: doc.solver.clone(),
            };
            scenario
                .validate()
                .map_err(|e| CliError::validation(e.to_string()))?;
            Ok(Resolved::Grasp(Box::new(scenario), doc))
        }
    }
}

/// Applies `--set key=value` overrides to the raw JSON document. Keys are
/// dot paths (`object.width`, `fingers.0.params.k_proximal`); values parse
/// as JSON scalars, falling back to strings.
pub fn apply_override(
    value: &mut serde_json::Value,
    key: &str,
    raw: &str,
) -> Result<(), CliError> {
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Ok(index) = part.parse::<usize>() {
            let arr = cursor
                .as_array_mut()
                .ok_or_else(|| CliError::validation(format!("override {key}: {part} is not an array index here")))?;
            if index >= arr.len() {
                return Err(CliError::validation(format!(
                    "override {key}: index {index} out of bounds"
                )));
            }
            if last {
                arr[index] = parsed;
                return Ok(());
            }
            cursor = &mut arr[index];
        } else {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                CliError::validation(format!("override {key}: {part} is not an object field here"))
            })?;
            if last {
                obj.insert((*part).to_string(), parsed);
                return Ok(());
            }
            cursor = obj
                .get_mut(*part)
                .ok_or_else(|| CliError::validation(format!("override {key}: no field {part}")))?;
        }
    }
    Ok(())
}

/// Configuration for the `fit` command: read a cycle CSV or synthesize one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDoc {
    /// Path to a cycle CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesize: Option<SynthesizeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeDoc {
    /// Row-major symmetric stiffness matrix, N/mm (2×2 or 3×3).
    pub matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub hysteresis: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub cycles: usize,
    pub amplitude: f64,
}

pub fn parse_fit_doc(text: &str) -> Result<FitDoc, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::parse(format!("invalid JSON: {e}")))?;
    let doc: FitDoc = serde_json::from_value(value)
        .map_err(|e| CliError::validation(format!("fit config schema: {e}")))?;
    match (&doc.data, &doc.synthesize) {
        (Some(_), None) | (None, Some(_)) => Ok(doc),
        _ => Err(CliError::validation(
            "fit config: exactly one of `data` or `synthesize` is required",
        )),
    }
}
