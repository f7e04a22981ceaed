//! Grasp scenarios: fingers composed around an object.
//!
//! Every finger occupies a vertical plane through the central (z) axis at
//! some azimuth. In-plane coordinates are (u, v): u points from the axis
//! outward to the finger base, v is the world z. Fingers stand at
//! (base_offset, 0) pointing up and curl toward the axis, and the grasped
//! object — a cylinder section or a sphere — is centered on the axis, so
//! every finger sees a planar problem with a circular obstacle. Opposed
//! grasps put two fingers at azimuths π apart (their shared plane is the
//! grasp plane); spherical pinches use three fingers 120° apart.
//!
//! Quantities reported about the object use world coordinates; planar grasp
//! matrices are expressed in the grasp plane with x along the grasp axis and
//! y vertical.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::{preloaded_free_compliance, ComplianceError};
use crate::equilibrium::{
    solve_warm, EquilibriumProblem, EquilibriumSolution, Obstacle, ObstacleGeometry, SolveError,
    Surface, TrajectoryError,
};
use crate::finger::{ContactLink, FingerParams, FingerState, GraspPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspType {
    OpposedPinch,
    SphericalPinch,
    PowerCylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cylinder,
    Sphere,
}

fn default_pinch_latitude() -> f64 {
    15.0
}

/// Grasped object: a cylinder (axis normal to the grasp plane) or a sphere,
/// centered on the grasp axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    /// Diameter, mm.
    pub width: f64,
    /// Height of the object center above the finger-base plane, mm.
    pub center_height: f64,
    /// Surface (pad) stiffness in N/mm of penetration; omit for a rigid
    /// surface. Power grasps need a finite value: once both links wrap the
    /// object the mechanism is fully constrained and further excursion is
    /// carried by surface compression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_stiffness: Option<f64>,
    /// Pinch grasps press the fingertips on the object's tangent face at
    /// this latitude above the equator, degrees. Power grasps wrap the full
    /// circular section and ignore it.
    #[serde(default = "default_pinch_latitude")]
    pub pinch_latitude_deg: f64,
}

impl ObjectSpec {
    fn surface(&self) -> Surface {
        match self.surface_stiffness {
            Some(stiffness) => Surface::Elastic { stiffness },
            None => Surface::Rigid,
        }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.width
    }
}

/// One finger of the grasp: the azimuth of its motion plane about the grasp
/// axis, the base distance from the axis, and its mechanism parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerPlacement {
    /// rad about the grasp axis.
    pub azimuth: f64,
    /// mm from the grasp axis to the finger base.
    pub base_offset: f64,
    pub params: FingerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspScenario {
    pub grasp_type: GraspType,
    pub fingers: Vec<FingerPlacement>,
    pub object: ObjectSpec,
    /// mm, strictly increasing.
    pub excursion_schedule: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, Error)]
pub enum GraspError {
    #[error("scenario.{field}: {message}")]
    InvalidScenario { field: String, message: String },
    #[error("finger {finger}: {source}")]
    Solver {
        finger: usize,
        #[source]
        source: SolveError,
    },
    #[error("finger {finger}: {source}")]
    Trajectory {
        finger: usize,
        #[source]
        source: TrajectoryError,
    },
    #[error("finger {finger}: {source}")]
    Compliance {
        finger: usize,
        #[source]
        source: ComplianceError,
    },
    #[error("finger {finger} is not in fingertip contact at the requested excursion")]
    NoFingertipContact { finger: usize },
    #[error("unstable grasp equilibrium: stiffness eigenvalue {min_eigenvalue:.3e} N/mm ≤ 0")]
    UnstableEquilibrium { min_eigenvalue: f64 },
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x < 0.0 {
        x += two_pi;
    }
    x
}

impl GraspScenario {
    pub fn validate(&self) -> Result<(), GraspError> {
        let invalid = |field: &str, message: &str| GraspError::InvalidScenario {
            field: field.into(),
            message: message.into(),
        };
        if !(self.object.width > 0.0) {
            return Err(invalid("object.width", "must be > 0"));
        }
        if let Some(k) = self.object.surface_stiffness {
            if !(k > 0.0) {
                return Err(invalid("object.surface_stiffness", "must be > 0"));
            }
        }
        if !(0.0..=60.0).contains(&self.object.pinch_latitude_deg) {
            return Err(invalid(
                "object.pinch_latitude_deg",
                "must be within [0, 60] degrees",
            ));
        }
        if self.fingers.len() < 2 {
            return Err(invalid("fingers", "a grasp needs at least 2 fingers"));
        }
        for (i, f) in self.fingers.iter().enumerate() {
            f.params
                .validate()
                .map_err(|e| invalid(&format!("fingers.{i}.params.{}", e.field), e.constraint))?;
            if !(f.base_offset > self.object.radius()) {
                return Err(invalid(
                    &format!("fingers.{i}.base_offset"),
                    "finger base must lie outside the object",
                ));
            }
        }
        if self.excursion_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("excursion_schedule", "must be strictly increasing"));
        }
        if self.excursion_schedule.iter().any(|e| *e < 0.0) {
            return Err(invalid("excursion_schedule", "must be non-negative"));
        }
        match self.grasp_type {
            GraspType::OpposedPinch | GraspType::PowerCylinder => {
                if self.fingers.len() != 2 {
                    return Err(invalid("fingers", "opposed grasps use exactly 2 fingers"));
                }
                let gap = wrap_angle(self.fingers[1].azimuth - self.fingers[0].azimuth);
                if (gap - std::f64::consts::PI).abs() > 1e-9 {
                    return Err(invalid(
                        "fingers.azimuth",
                        "opposed grasps need coplanar fingers (azimuths π apart)",
                    ));
                }
            }
            GraspType::SphericalPinch => {
                if self.fingers.len() != 3 {
                    return Err(invalid(
                        "fingers",
                        "a spherical pinch uses exactly 3 fingers",
                    ));
                }
                let mut gaps: Vec<f64> = (0..3)
                    .map(|i| {
                        wrap_angle(self.fingers[(i + 1) % 3].azimuth - self.fingers[i].azimuth)
                    })
                    .collect();
                gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let third = std::f64::consts::TAU / 3.0;
                if gaps.iter().any(|g| (g - third).abs() > 1e-9) {
                    return Err(invalid(
                        "fingers.azimuth",
                        "a spherical pinch needs fingers 120° apart",
                    ));
                }
            }
        }
        if self.grasp_type == GraspType::PowerCylinder {
            if self.object.kind != ObjectKind::Cylinder {
                return Err(invalid("object.kind", "power grasps expect a cylinder"));
            }
            for (i, f) in self.fingers.iter().enumerate() {
                if !f.params.is_power_grasp_capable() {
                    return Err(invalid(
                        &format!("fingers.{i}.params"),
                        "power grasps need k_distal_bend/r_distal² > k_proximal/r_proximal²",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Unit vector from the grasp axis towards finger `i`'s base, world frame.
    fn radial(&self, i: usize) -> Vector3<f64> {
        let a = self.fingers[i].azimuth;
        Vector3::new(a.cos(), a.sin(), 0.0)
    }

    /// Finger-local coordinates of the object-section circle center.
    fn object_center_local(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.object.center_height, self.fingers[i].base_offset)
    }

    /// Maps a finger-local in-plane direction to the world frame
    /// (local x = up = world z; local y = towards the axis = −radial).
    fn local_dir_to_world(&self, i: usize, d: Vector2<f64>) -> Vector3<f64> {
        let u = self.radial(i);
        -d.y * u + d.x * Vector3::z()
    }

    fn problem(&self, i: usize, excursion: f64, links: &[ContactLink]) -> EquilibriumProblem {
        let center = self.object_center_local(i);
        let obstacles = links
            .iter()
            .map(|&link| {
                let geometry = match link {
                    // Pinch contacts press the object's tangent face at the
                    // configured latitude; the fixed face normal is the
                    // linearized local surface the fingertip lands on.
                    ContactLink::Fingertip => {
                        let g = self.object.pinch_latitude_deg.to_radians();
                        let normal = [g.sin(), -g.cos()];
                        let offset = normal[0] * center.x + normal[1] * center.y
                            + self.object.radius();
                        ObstacleGeometry::HalfPlane { normal, offset }
                    }
                    _ => ObstacleGeometry::Circle {
                        center: [center.x, center.y],
                        radius: self.object.radius(),
                    },
                };
                Obstacle {
                    geometry,
                    link,
                    surface: self.object.surface(),
                }
            })
            .collect();
        EquilibriumProblem {
            params: self.fingers[i].params.clone(),
            tendon_excursion: excursion,
            obstacles,
            solver_tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
        }
    }

    fn contact_links(&self) -> &'static [ContactLink] {
        match self.grasp_type {
            GraspType::PowerCylinder => &[ContactLink::Proximal, ContactLink::Distal],
            GraspType::OpposedPinch | GraspType::SphericalPinch => &[ContactLink::Fingertip],
        }
    }
}

impl GraspScenario {
    /// Two opposed fingers power-grasping a 65 mm cylinder sitting low
    /// between the bases. The pad layer carries the post-knee force rise.
    pub fn demo_power_cylinder() -> Self {
        let params = FingerParams::default();
        GraspScenario {
            grasp_type: GraspType::PowerCylinder,
            fingers: vec![
                FingerPlacement {
                    azimuth: 0.0,
                    base_offset: 42.0,
                    params: params.clone(),
                },
                FingerPlacement {
                    azimuth: std::f64::consts::PI,
                    base_offset: 42.0,
                    params,
                },
            ],
            object: ObjectSpec {
                kind: ObjectKind::Cylinder,
                width: 65.0,
                center_height: 50.0,
                surface_stiffness: Some(30.0),
                pinch_latitude_deg: default_pinch_latitude(),
            },
            excursion_schedule: (0..=64).map(|i| 8.0 * i as f64 / 64.0).collect(),
            solver: SolverSettings::default(),
        }
    }

    fn pinch_finger(azimuth: f64) -> FingerPlacement {
        FingerPlacement {
            azimuth,
            base_offset: 52.0,
            params: FingerParams {
                // Swept back and pre-curled so the fingertips meet the
                // object above its equator.
                rest_angles: [-0.35, 0.95],
                ..FingerParams::default()
            },
        }
    }

    /// Two opposed fingertips pinching a 65 mm cylinder held high between
    /// the tips.
    pub fn demo_opposed_pinch() -> Self {
        GraspScenario {
            grasp_type: GraspType::OpposedPinch,
            fingers: vec![
                Self::pinch_finger(0.0),
                Self::pinch_finger(std::f64::consts::PI),
            ],
            object: ObjectSpec {
                kind: ObjectKind::Cylinder,
                width: 65.0,
                center_height: 90.0,
                surface_stiffness: Some(4.0),
                pinch_latitude_deg: 15.0,
            },
            excursion_schedule: (0..=100).map(|i| 4.0 * i as f64 / 100.0).collect(),
            solver: SolverSettings::default(),
        }
    }

    /// Three fingers 120° apart pinching a 65 mm sphere.
    pub fn demo_spherical_pinch() -> Self {
        let third = std::f64::consts::TAU / 3.0;
        GraspScenario {
            grasp_type: GraspType::SphericalPinch,
            fingers: (0..3).map(|i| Self::pinch_finger(i as f64 * third)).collect(),
            object: ObjectSpec {
                kind: ObjectKind::Sphere,
                width: 65.0,
                center_height: 90.0,
                surface_stiffness: Some(4.0),
                pinch_latitude_deg: 15.0,
            },
            excursion_schedule: (0..=100).map(|i| 4.0 * i as f64 / 100.0).collect(),
            solver: SolverSettings::default(),
        }
    }
}

/// One sample of a force–excursion curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub excursion: f64,
    /// Compressive force transmitted by one finger along its squeeze
    /// direction (for opposed grasps, the component crossing the split
    /// plane), N.
    pub internal_force: f64,
    pub phase: GraspPhase,
}

/// Force–excursion record of a closing grasp. The knee marks the transition
/// to the Closed phase: the distal links reaching the object in a power
/// grasp, or the distal travel limit in a pinch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceExcursionCurve {
    pub samples: Vec<CurveSample>,
    pub knee_excursion: Option<f64>,
}

impl ForceExcursionCurve {
    fn from_samples(samples: Vec<CurveSample>) -> Self {
        let knee_excursion = samples
            .iter()
            .find(|s| s.phase == GraspPhase::Closed)
            .map(|s| s.excursion);
        ForceExcursionCurve {
            samples,
            knee_excursion,
        }
    }
}

/// Squeeze-direction force transmitted to the object by one finger: the sum
/// of contact-force components towards the grasp axis.
fn squeeze_force(state: &FingerState) -> f64 {
    state
        .contacts
        .iter()
        .map(|c| c.normal_force * (-c.normal.y))
        .sum()
}

fn finger_trajectory(
    scenario: &GraspScenario,
    finger: usize,
    links: &[ContactLink],
) -> Result<Vec<EquilibriumSolution>, GraspError> {
    let problem = scenario.problem(finger, 0.0, links);
    crate::equilibrium::closing_trajectory(&problem, &scenario.excursion_schedule)
        .map_err(|source| GraspError::Trajectory { finger, source })
}

fn simulate(scenario: &GraspScenario) -> Result<ForceExcursionCurve, GraspError> {
    scenario.validate()?;
    let links = scenario.contact_links();
    let trajectories: Vec<Vec<EquilibriumSolution>> = (0..scenario.fingers.len())
        .map(|i| finger_trajectory(scenario, i, links))
        .collect::<Result<_, _>>()?;
    let samples = scenario
        .excursion_schedule
        .iter()
        .enumerate()
        .map(|(k, &excursion)| {
            // The curve reports finger 0's squeeze force; the phase is the
            // most advanced phase over the hand.
            let phase = trajectories
                .iter()
                .map(|t| t[k].state.phase)
                .max()
                .unwrap_or(GraspPhase::Sweep);
            CurveSample {
                excursion,
                internal_force: squeeze_force(&trajectories[0][k].state),
                phase,
            }
        })
        .collect();
    Ok(ForceExcursionCurve::from_samples(samples))
}

/// Closes a power grasp on the object and reports the internal force carried
/// across the object's split plane. The proximal links sweep in, cage the
/// object, and the knee appears when the distal links engage, after which
/// the added constraints stiffen the whole mechanism.
pub fn simulate_power_grasp(scenario: &GraspScenario) -> Result<ForceExcursionCurve, GraspError> {
    if scenario.grasp_type != GraspType::PowerCylinder {
        return Err(GraspError::InvalidScenario {
            field: "grasp_type".into(),
            message: "simulate_power_grasp expects a power_cylinder scenario".into(),
        });
    }
    simulate(scenario)
}

/// Closes a fingertip pinch on the object. The force grows linearly with
/// excursion while the fingertip acts as a series-elastic element, and
/// stiffens onto a second linear segment once the distal link reaches its
/// travel limit.
pub fn simulate_pinch_grasp(scenario: &GraspScenario) -> Result<ForceExcursionCurve, GraspError> {
    if scenario.grasp_type == GraspType::PowerCylinder {
        return Err(GraspError::InvalidScenario {
            field: "grasp_type".into(),
            message: "simulate_pinch_grasp expects a pinch scenario".into(),
        });
    }
    simulate(scenario)
}

/// Grasp equilibrium of every finger at one excursion (cold-started, which
/// ramps internally from rest along the closing branch).
pub fn grasp_equilibrium(
    scenario: &GraspScenario,
    excursion: f64,
) -> Result<Vec<EquilibriumSolution>, GraspError> {
    scenario.validate()?;
    let links = scenario.contact_links();
    (0..scenario.fingers.len())
        .map(|i| {
            let problem = scenario.problem(i, excursion, links);
            solve_warm(&problem, None).map_err(|source| GraspError::Solver { finger: i, source })
        })
        .collect()
}

/// Cartesian stiffness block of a grasp.
#[derive(Debug, Clone, PartialEq)]
pub enum StiffnessBlock {
    /// Grasp-plane matrix, axes (grasp axis, vertical), N/mm.
    Planar(Matrix2<f64>),
    /// World-frame matrix, N/mm.
    Spatial(Matrix3<f64>),
}

impl StiffnessBlock {
    /// Eigenvalues sorted ascending, N/mm.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = match self {
            StiffnessBlock::Planar(m) => m.symmetric_eigenvalues().iter().cloned().collect(),
            StiffnessBlock::Spatial(m) => m.symmetric_eigenvalues().iter().cloned().collect(),
        };
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn is_positive_definite(&self) -> bool {
        let eig = self.eigenvalues();
        let scale = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
        eig.iter().all(|&l| l > 1e-12 * scale.max(1e-300))
    }

    /// λmax/λmin, the well-conditionedness metric.
    pub fn condition_number(&self) -> f64 {
        let eig = self.eigenvalues();
        eig[eig.len() - 1] / eig[0]
    }

    pub fn dimension(&self) -> usize {
        match self {
            StiffnessBlock::Planar(_) => 2,
            StiffnessBlock::Spatial(_) => 3,
        }
    }

    pub fn row_major(&self) -> Vec<f64> {
        match self {
            StiffnessBlock::Planar(m) => vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]],
            StiffnessBlock::Spatial(m) => (0..3)
                .flat_map(|i| (0..3).map(move |j| m[(i, j)]))
                .collect(),
        }
    }
}

/// Cartesian stiffness of the grasped object about its equilibrium pose.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspStiffness {
    pub matrix: StiffnessBlock,
    pub grasp_type: GraspType,
}

/// Per-finger fingertip contribution to the object stiffness: the preloaded,
/// tendon-constrained fingertip compliance projected onto the contact
/// normal and inverted.
#[derive(Debug, Clone)]
pub struct FingerContribution {
    pub world_normal: Vector3<f64>,
    /// N/mm along the contact normal.
    pub normal_stiffness: f64,
    /// Contact preload, N.
    pub contact_force: f64,
}

/// The per-finger normal-projected stiffness of a pinch equilibrium.
pub fn fingertip_contributions(
    scenario: &GraspScenario,
    excursion: f64,
) -> Result<Vec<FingerContribution>, GraspError> {
    let solutions = grasp_equilibrium(scenario, excursion)?;
    solutions
        .iter()
        .enumerate()
        .map(|(i, sol)| fingertip_contribution(scenario, i, sol))
        .collect()
}

fn fingertip_contribution(
    scenario: &GraspScenario,
    finger: usize,
    solution: &EquilibriumSolution,
) -> Result<FingerContribution, GraspError> {
    let state = &solution.state;
    let rec = state
        .contacts
        .iter()
        .find(|c| c.link == ContactLink::Fingertip && c.normal_force > 0.0)
        .ok_or(GraspError::NoFingertipContact { finger })?;
    let params = &scenario.fingers[finger].params;
    let tip2 = crate::finger::planar_tip_position(params, state.theta_proximal, state.theta_distal);
    let tip = Vector3::new(tip2.x, tip2.y, 0.0);
    let c = preloaded_free_compliance(params, state, tip)
        .map_err(|source| GraspError::Compliance { finger, source })?;
    let n3 = rec.normal;
    let mut c_n = (n3.transpose() * c.cartesian_block() * n3)[(0, 0)];
    // An elastic object surface acts in series with the finger.
    if let Some(k_pad) = scenario.object.surface_stiffness {
        c_n += 1.0 / k_pad;
    }
    if !(c_n > 1e-12) {
        return Err(GraspError::Compliance {
            finger,
            source: ComplianceError::SingularConfiguration {
                reason: "fingertip compliance vanishes along the contact normal".into(),
            },
        });
    }
    Ok(FingerContribution {
        world_normal: scenario.local_dir_to_world(finger, Vector2::new(n3.x, n3.y)),
        normal_stiffness: 1.0 / c_n,
        contact_force: rec.normal_force,
    })
}

/// Assembles the object's Cartesian stiffness at a pinch equilibrium by
/// summing, over fingers, the inverse of the fingertip's compliance
/// projected onto its contact normal. Planar for opposed grasps, spatial
/// for spherical ones.
pub fn grasp_stiffness(
    scenario: &GraspScenario,
    excursion: f64,
) -> Result<GraspStiffness, GraspError> {
    let contributions = fingertip_contributions(scenario, excursion)?;
    let mut k3 = Matrix3::zeros();
    for c in &contributions {
        let n = c.world_normal;
        k3 += c.normal_stiffness * n * n.transpose();
    }
    let matrix = match scenario.grasp_type {
        GraspType::SphericalPinch => StiffnessBlock::Spatial(k3),
        GraspType::OpposedPinch | GraspType::PowerCylinder => {
            let u = scenario.radial(0);
            let z = Vector3::z();
            let k_uu = (u.transpose() * k3 * u)[(0, 0)];
            let k_uz = (u.transpose() * k3 * z)[(0, 0)];
            let k_zz = (z.transpose() * k3 * z)[(0, 0)];
            StiffnessBlock::Planar(Matrix2::new(k_uu, k_uz, k_uz, k_zz))
        }
    };
    Ok(GraspStiffness {
        matrix,
        grasp_type: scenario.grasp_type,
    })
}

struct DisplacedFinger {
    solution: EquilibriumSolution,
    /// Normal force at the (linearized) fingertip contact, 0 if separated.
    contact_force: f64,
}

fn displaced_fingers(
    scenario: &GraspScenario,
    displacement: Vector3<f64>,
    base: &[EquilibriumSolution],
) -> Result<Vec<DisplacedFinger>, GraspError> {
    base.iter()
        .enumerate()
        .map(|(i, sol)| displace_one(scenario, i, sol, displacement))
        .collect()
}

fn displace_one(
    scenario: &GraspScenario,
    finger: usize,
    base: &EquilibriumSolution,
    displacement: Vector3<f64>,
) -> Result<DisplacedFinger, GraspError> {
    let state = &base.state;
    if !state
        .contacts
        .iter()
        .any(|c| c.link == ContactLink::Fingertip && c.normal_force > 0.0)
    {
        return Err(GraspError::NoFingertipContact { finger });
    }
    let q = [state.theta_proximal, state.theta_distal];
    // The pinch face translates rigidly with the object: its offset grows by
    // the normal component of the displacement. Everything else about the
    // finger's problem (pad stiffness included) is unchanged.
    let mut problem = scenario.problem(finger, state.tendon_excursion, &[ContactLink::Fingertip]);
    let ObstacleGeometry::HalfPlane { normal, offset } = &mut problem.obstacles[0].geometry
    else {
        unreachable!("pinch obstacles are tangent faces");
    };
    let n_world = scenario.local_dir_to_world(finger, Vector2::new(normal[0], normal[1]));
    *offset += n_world.dot(&displacement);
    let solution =
        solve_warm(&problem, Some(q)).map_err(|source| GraspError::Solver { finger, source })?;
    let contact_force = solution
        .state
        .contacts
        .first()
        .map(|c| c.normal_force)
        .unwrap_or(0.0);
    Ok(DisplacedFinger {
        solution,
        contact_force,
    })
}

/// Total elastic energy stored in all fingers when the object is displaced
/// by `displacement` (world frame) from its scenario pose, with every
/// fingertip contact linearized as a tangent plane through its equilibrium
/// contact point moving rigidly with the object.
///
/// Contacts are unilateral: a finger whose contact separates relaxes to its
/// free tendon-constrained equilibrium and its energy stops changing.
pub fn grasp_total_energy(
    scenario: &GraspScenario,
    excursion: f64,
    displacement: Vector3<f64>,
) -> Result<f64, GraspError> {
    let base = grasp_equilibrium(scenario, excursion)?;
    let displaced = displaced_fingers(scenario, displacement, &base)?;
    Ok(displaced.iter().map(|d| d.solution.energy).sum())
}

/// Escape work along one probe direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub direction: Vector3<f64>,
    /// N·mm of work stored between the equilibrium and the grasp break (or
    /// the displacement cap).
    pub escape_work: f64,
    /// Displacement at which the first contact separated, mm.
    pub break_displacement: f64,
    /// True when the displacement cap was reached before any contact broke.
    pub capped: bool,
}

/// Elastic potential well around a grasp equilibrium.
#[derive(Debug, Clone)]
pub struct EnergyWell {
    /// World-frame object center at equilibrium.
    pub equilibrium_pose: Vector3<f64>,
    /// Hessian of the well at equilibrium: the grasp stiffness matrix.
    pub hessian: GraspStiffness,
    pub probes: Vec<ProbeResult>,
    pub min_escape_work: f64,
}

/// Default probe set: 16 directions uniformly spaced in the grasp plane
/// (spanned by finger 0's radial direction and the vertical for opposed
/// grasps, the palm plane for spherical ones), plus ±z along the grasp axis
/// for spherical grasps.
pub fn default_probe_directions(scenario: &GraspScenario) -> Vec<Vector3<f64>> {
    let mut probes = Vec::new();
    match scenario.grasp_type {
        GraspType::OpposedPinch | GraspType::PowerCylinder => {
            let u = scenario.radial(0);
            for i in 0..16 {
                let a = std::f64::consts::TAU * i as f64 / 16.0;
                probes.push(a.cos() * u + a.sin() * Vector3::z());
            }
        }
        GraspType::SphericalPinch => {
            for i in 0..16 {
                let a = std::f64::consts::TAU * i as f64 / 16.0;
                probes.push(Vector3::new(a.cos(), a.sin(), 0.0));
            }
            probes.push(Vector3::z());
            probes.push(-Vector3::z());
        }
    }
    probes
}

/// Quasi-statically displaces the object along each probe direction until
/// any fingertip contact force reaches zero (the frictionless grasp breaks)
/// or the displacement cap, and reports the stored work.
pub fn energy_well(
    scenario: &GraspScenario,
    excursion: f64,
    probe_directions: &[Vector3<f64>],
    displacement_cap: f64,
) -> Result<EnergyWell, GraspError> {
    if !(displacement_cap > 0.0) {
        return Err(GraspError::InvalidScenario {
            field: "displacement_cap".into(),
            message: "must be > 0".into(),
        });
    }
    let hessian = grasp_stiffness(scenario, excursion)?;
    let eig = hessian.matrix.eigenvalues();
    if !hessian.matrix.is_positive_definite() {
        return Err(GraspError::UnstableEquilibrium {
            min_eigenvalue: eig[0],
        });
    }
    let base = grasp_equilibrium(scenario, excursion)?;
    let e0: f64 = base.iter().map(|s| s.energy).sum();
    // Net contact load on the object at the scenario pose. The pose is held
    // by a constant support (fixture or gravity); the escape work is the
    // work done against the grasp net of that support.
    let mut support = Vector3::zeros();
    for (i, sol) in base.iter().enumerate() {
        for rec in &sol.state.contacts {
            let n_world =
                scenario.local_dir_to_world(i, Vector2::new(rec.normal.x, rec.normal.y));
            support += rec.normal_force * n_world;
        }
    }

    let mut probes = Vec::with_capacity(probe_directions.len());
    for dir in probe_directions {
        let d = dir.normalize();
        let bias = support.dot(&d);
        let energy_and_broken = |t: f64| -> Result<(f64, bool), GraspError> {
            let fingers = displaced_fingers(scenario, t * d, &base)?;
            let energy: f64 =
                fingers.iter().map(|f| f.solution.energy).sum::<f64>() - t * bias;
            let broken = fingers.iter().any(|f| f.contact_force <= 1e-9);
            Ok((energy, broken))
        };
        let steps = 100;
        let mut t_prev = 0.0;
        let mut result: Option<ProbeResult> = None;
        for k in 1..=steps {
            let t = displacement_cap * k as f64 / steps as f64;
            let (_, broken) = energy_and_broken(t)?;
            if broken {
                let (mut lo, mut hi) = (t_prev, t);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if energy_and_broken(mid)?.1 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let t_break = 0.5 * (lo + hi);
                let (e_break, _) = energy_and_broken(t_break)?;
                result = Some(ProbeResult {
                    direction: d,
                    escape_work: (e_break - e0).max(0.0),
                    break_displacement: t_break,
                    capped: false,
                });
                break;
            }
            t_prev = t;
        }
        let probe = match result {
            Some(p) => p,
            None => {
                let (e_cap, _) = energy_and_broken(displacement_cap)?;
                ProbeResult {
                    direction: d,
                    escape_work: (e_cap - e0).max(0.0),
                    break_displacement: displacement_cap,
                    capped: true,
                }
            }
        };
        probes.push(probe);
    }
    let min_escape_work = probes
        .iter()
        .map(|p| p.escape_work)
        .fold(f64::INFINITY, f64::min);
    Ok(EnergyWell {
        equilibrium_pose: Vector3::new(0.0, 0.0, scenario.object.center_height),
        hessian,
        probes,
        min_escape_work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let mean = sy / n;
        let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - slope * x - intercept).powi(2))
            .sum();
        (slope, 1.0 - ss_res / ss_tot.max(1e-300))
    }

    fn segment_indices(curve: &ForceExcursionCurve) -> (usize, usize) {
        let first_contact = curve
            .samples
            .iter()
            .position(|s| s.internal_force > 1e-9)
            .expect("contact within schedule");
        let knee = curve
            .samples
            .iter()
            .position(|s| s.phase == GraspPhase::Closed)
            .expect("knee within schedule");
        (first_contact, knee)
    }

    #[test]
    fn power_grasp_caging_stays_soft_then_stiffens() {
        let scenario = GraspScenario::demo_power_cylinder();
        let curve = simulate_power_grasp(&scenario).unwrap();
        assert!(curve.knee_excursion.is_some());
        let (c0, knee) = segment_indices(&curve);
        assert!(knee > c0 + 5);
        // Pre-knee force stays below 3 N.
        for s in &curve.samples[..knee] {
            assert!(s.internal_force < 3.0, "pre-knee force {}", s.internal_force);
        }
        // Piecewise slopes: the closed phase is at least twice as stiff.
        let xs1: Vec<f64> = curve.samples[c0..knee].iter().map(|s| s.excursion).collect();
        let ys1: Vec<f64> = curve.samples[c0..knee]
            .iter()
            .map(|s| s.internal_force)
            .collect();
        let (pre, _) = line_fit(&xs1, &ys1);
        let xs2: Vec<f64> = curve.samples[knee..].iter().map(|s| s.excursion).collect();
        let ys2: Vec<f64> = curve.samples[knee..]
            .iter()
            .map(|s| s.internal_force)
            .collect();
        let (post, _) = line_fit(&xs2, &ys2);
        assert!(post / pre >= 2.0, "slope ratio {}", post / pre);
        // Phase sequence contains all three phases, monotonically.
        let phases: Vec<GraspPhase> = curve.samples.iter().map(|s| s.phase).collect();
        assert!(phases.contains(&GraspPhase::Sweep));
        assert!(phases.contains(&GraspPhase::Cage));
        assert!(phases.contains(&GraspPhase::Closed));
        assert!(phases.windows(2).all(|w| w[0] <= w[1]));
        // Internal force is continuous across the phase transition: the new
        // contact's force grows from zero, so the handoff step is small.
        let knee_step =
            (curve.samples[knee].internal_force - curve.samples[knee - 1].internal_force).abs();
        assert!(knee_step < 0.5, "force step across the knee {knee_step}");
        // Globally the steps stay bounded by the stiffest slope seen.
        let max_step = curve
            .samples
            .windows(2)
            .map(|w| (w[1].internal_force - w[0].internal_force).abs())
            .fold(0.0, f64::max);
        assert!(max_step < 8.0, "largest inter-sample jump {max_step}");
        assert!(curve.samples.iter().all(|s| s.internal_force >= -1e-9));
    }

    #[test]
    fn power_grasp_short_schedule_has_no_knee() {
        let mut scenario = GraspScenario::demo_power_cylinder();
        scenario.excursion_schedule = vec![0.0, 0.5, 1.0, 1.5];
        let curve = simulate_power_grasp(&scenario).unwrap();
        assert!(curve.knee_excursion.is_none());
        assert!(curve.samples.iter().all(|s| s.internal_force.abs() < 1e-9));
    }

    #[test]
    fn power_slope_ratio_exceeds_one_across_parameter_variations() {
        // Added active constraints can only stiffen a quadratic energy
        // system, so the post-knee slope always exceeds the caging slope.
        for (kp, kd) in [(20.0, 120.0), (30.0, 160.0), (15.0, 90.0)] {
            let mut scenario = GraspScenario::demo_power_cylinder();
            for f in &mut scenario.fingers {
                f.params.k_proximal = kp;
                f.params.k_distal_bend = kd;
            }
            let curve = simulate_power_grasp(&scenario).unwrap();
            let (c0, knee) = segment_indices(&curve);
            let xs1: Vec<f64> = curve.samples[c0..knee].iter().map(|s| s.excursion).collect();
            let ys1: Vec<f64> = curve.samples[c0..knee]
                .iter()
                .map(|s| s.internal_force)
                .collect();
            let xs2: Vec<f64> = curve.samples[knee..].iter().map(|s| s.excursion).collect();
            let ys2: Vec<f64> = curve.samples[knee..]
                .iter()
                .map(|s| s.internal_force)
                .collect();
            let (pre, _) = line_fit(&xs1, &ys1);
            let (post, _) = line_fit(&xs2, &ys2);
            assert!(post / pre > 1.0, "kp={kp} kd={kd}: ratio {}", post / pre);
        }
    }

    #[test]
    fn pinch_force_is_linear_then_stiffens_at_travel_limit() {
        let scenario = GraspScenario::demo_opposed_pinch();
        let curve = simulate_pinch_grasp(&scenario).unwrap();
        let (c0, knee) = segment_indices(&curve);
        // Zero force up to first touch.
        assert!(curve.samples[..c0]
            .iter()
            .all(|s| s.internal_force.abs() < 1e-9));
        let xs1: Vec<f64> = curve.samples[c0 + 2..knee]
            .iter()
            .map(|s| s.excursion)
            .collect();
        let ys1: Vec<f64> = curve.samples[c0 + 2..knee]
            .iter()
            .map(|s| s.internal_force)
            .collect();
        let (s1, r2) = line_fit(&xs1, &ys1);
        assert!(r2 >= 0.999, "pre-limit R² {r2:.6}");
        let xs2: Vec<f64> = curve.samples[knee + 2..]
            .iter()
            .map(|s| s.excursion)
            .collect();
        let ys2: Vec<f64> = curve.samples[knee + 2..]
            .iter()
            .map(|s| s.internal_force)
            .collect();
        let (s2, r22) = line_fit(&xs2, &ys2);
        assert!(s2 > s1, "second segment must be stiffer: {s1} vs {s2}");
        assert!(r22 >= 0.99, "post-limit R² {r22:.6}");
        assert_eq!(
            curve.knee_excursion,
            Some(curve.samples[knee].excursion)
        );
    }

    #[test]
    fn pinch_slope_matches_series_stiffness_prediction() {
        // Dual route: the measured force–excursion slope against the
        // series combination of the fingertip compliances (finger plus pad)
        // with the free-closing moment-arm gearing, all taken from the
        // compliance module.
        let scenario = GraspScenario::demo_opposed_pinch();
        let curve = simulate_pinch_grasp(&scenario).unwrap();
        let (_, knee) = segment_indices(&curve);
        let mid = (knee * 3) / 4;
        let e_mid = curve.samples[mid].excursion;
        let local_slope = (curve.samples[mid + 1].internal_force
            - curve.samples[mid - 1].internal_force)
            / (curve.samples[mid + 1].excursion - curve.samples[mid - 1].excursion);

        let solutions = grasp_equilibrium(&scenario, e_mid).unwrap();
        let mut series_compliance = 0.0;
        let mut projection = 0.0;
        let mut gearing = 0.0;
        for (i, sol) in solutions.iter().enumerate() {
            let params = &scenario.fingers[i].params;
            let state = &sol.state;
            let rec = &state.contacts[0];
            let tip2 = crate::finger::planar_tip_position(
                params,
                state.theta_proximal,
                state.theta_distal,
            );
            let c = crate::compliance::preloaded_free_compliance(
                params,
                state,
                Vector3::new(tip2.x, tip2.y, 0.0),
            )
            .unwrap();
            let n3 = rec.normal;
            series_compliance += (n3.transpose() * c.cartesian_block() * n3)[(0, 0)]
                + 1.0 / scenario.object.surface_stiffness.unwrap();
            let (w, _) = crate::compliance::free_closing_tip_tangent(params, state);
            gearing += n3.xy().dot(&w);
            projection = -rec.normal.y; // squeeze-direction component
        }
        // Both fingers advance together, so the face gaps close at the sum
        // of the free-tip speeds projected against the outward normals.
        let predicted = projection * (-gearing) / series_compliance;
        let rel = (local_slope - predicted).abs() / predicted.abs();
        assert!(
            rel < 0.02,
            "measured {local_slope:.4} vs predicted {predicted:.4} ({:.2}%)",
            100.0 * rel
        );
    }

    #[test]
    fn opposed_stiffness_is_mirror_symmetric_and_positive_definite() {
        let scenario = GraspScenario::demo_opposed_pinch();
        let k = grasp_stiffness(&scenario, 2.2).unwrap();
        let StiffnessBlock::Planar(m) = &k.matrix else {
            panic!("opposed pinch must report a planar matrix");
        };
        // Mirror-symmetric fingers contribute equal diagonals; the
        // off-diagonal cancels.
        let contributions = fingertip_contributions(&scenario, 2.2).unwrap();
        assert_eq!(contributions.len(), 2);
        let k0 = contributions[0].normal_stiffness;
        let k1 = contributions[1].normal_stiffness;
        assert!((k0 - k1).abs() / k0 < 1e-9);
        assert!(m[(0, 1)].abs() < 1e-9 * m[(0, 0)], "off-diagonal {}", m[(0, 1)]);
        assert!(k.matrix.is_positive_definite());
        // Tilted tangent faces split the normal stiffness between the grasp
        // axis and the vertical.
        let g = scenario.object.pinch_latitude_deg.to_radians();
        assert!((m[(0, 0)] - (k0 + k1) * g.cos().powi(2)).abs() < 1e-9 * m[(0, 0)]);
        assert!((m[(1, 1)] - (k0 + k1) * g.sin().powi(2)).abs() < 1e-9 * m[(0, 0)]);
    }

    #[test]
    fn asymmetric_moment_arms_break_mirror_symmetry() {
        let mut scenario = GraspScenario::demo_opposed_pinch();
        scenario.fingers[1].params.r_proximal = 12.0; // stiffer gearing on one side
        let k = grasp_stiffness(&scenario, 2.2).unwrap();
        let StiffnessBlock::Planar(m) = &k.matrix else {
            panic!();
        };
        let contributions = fingertip_contributions(&scenario, 2.2).unwrap();
        let expected_sign = (contributions[0].normal_stiffness
            - contributions[1].normal_stiffness)
            .signum();
        assert!(m[(0, 1)].abs() > 1e-6);
        // Finger 0 presses along +x with an up-tilt, finger 1 along −x, so
        // the residual coupling carries the sign of their difference.
        assert_eq!(m[(0, 1)].signum(), expected_sign);
    }

    #[test]
    fn spherical_stiffness_is_isotropic_in_palm_plane() {
        let scenario = GraspScenario::demo_spherical_pinch();
        let k = grasp_stiffness(&scenario, 2.2).unwrap();
        let StiffnessBlock::Spatial(m) = &k.matrix else {
            panic!("spherical pinch must report a spatial matrix");
        };
        assert!(k.matrix.is_positive_definite());
        // Rotation-average oracle: three identical rank-one contributions at
        // 120° give (3/2)·k·cos²γ in the palm plane and 3·k·sin²γ axially.
        let contributions = fingertip_contributions(&scenario, 2.2).unwrap();
        let kn = contributions[0].normal_stiffness;
        let g = scenario.object.pinch_latitude_deg.to_radians();
        let palm = 1.5 * kn * g.cos().powi(2);
        let axial = 3.0 * kn * g.sin().powi(2);
        assert!((m[(0, 0)] - palm).abs() / palm < 1e-9);
        assert!((m[(1, 1)] - palm).abs() / palm < 1e-9);
        assert!(m[(0, 1)].abs() < 1e-9 * palm);
        assert!((m[(2, 2)] - axial).abs() / axial < 1e-9);
    }

    #[test]
    fn stiffness_scales_exactly_with_joint_stiffness() {
        // Quadratic energy homogeneity on a rigid-faced pinch: scaling every
        // spring by s scales the object stiffness by s exactly.
        let mut scenario = GraspScenario::demo_opposed_pinch();
        scenario.object.surface_stiffness = None;
        let base = grasp_stiffness(&scenario, 2.2).unwrap();
        let s = 3.5;
        for f in &mut scenario.fingers {
            f.params.k_proximal *= s;
            f.params.k_distal_bend *= s;
            f.params.k_distal_twist *= s;
            f.params.k_proximal_twist *= s;
            f.params.travel_limit_stiffness *= s;
        }
        let scaled = grasp_stiffness(&scenario, 2.2).unwrap();
        let (StiffnessBlock::Planar(a), StiffnessBlock::Planar(b)) =
            (&base.matrix, &scaled.matrix)
        else {
            panic!();
        };
        assert!(((b - s * a).norm()) / (s * a).norm() < 1e-9);
    }

    #[test]
    fn grasp_stiffness_matches_energy_hessian() {
        // Central-difference Hessian of the total elastic energy over object
        // displacement against the assembled stiffness.
        let scenario = GraspScenario::demo_opposed_pinch();
        let excursion = 2.2;
        let k = grasp_stiffness(&scenario, excursion).unwrap();
        let StiffnessBlock::Planar(m) = &k.matrix else {
            panic!();
        };
        let h = 0.02;
        let dirs = [Vector3::x(), Vector3::z()];
        let e = |d: Vector3<f64>| grasp_total_energy(&scenario, excursion, d).unwrap();
        let e0 = e(Vector3::zeros());
        let mut fd = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                if i == j {
                    fd[(i, i)] = (e(h * dirs[i]) - 2.0 * e0 + e(-h * dirs[i])) / (h * h);
                } else {
                    fd[(i, j)] = (e(h * (dirs[i] + dirs[j])) - e(h * (dirs[i] - dirs[j]))
                        - e(h * (dirs[j] - dirs[i]))
                        + e(-h * (dirs[i] + dirs[j])))
                        / (4.0 * h * h);
                }
            }
        }
        let err = (fd - m).norm() / m.norm();
        assert!(err < 0.01, "relative Frobenius error {err:.4}");
    }

    #[test]
    fn energy_well_quadratic_regime_and_break() {
        let scenario = GraspScenario::demo_spherical_pinch();
        let excursion = 2.2;
        let well = energy_well(
            &scenario,
            excursion,
            &default_probe_directions(&scenario),
            8.0,
        )
        .unwrap();
        assert_eq!(well.probes.len(), 18);
        assert!(well.probes.iter().all(|p| p.escape_work >= 0.0));
        let min = well
            .probes
            .iter()
            .map(|p| p.escape_work)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, well.min_escape_work);

        // Quadratic regime: stored work ≈ ½δᵀKδ within 5% for ‖δ‖ ≤ 0.5 mm.
        let StiffnessBlock::Spatial(m) = &well.hessian.matrix else {
            panic!();
        };
        let e0 = grasp_total_energy(&scenario, excursion, Vector3::zeros()).unwrap();
        // Net contact load held by the support at the scenario pose.
        let mut support = Vector3::zeros();
        for (i, sol) in grasp_equilibrium(&scenario, excursion).unwrap().iter().enumerate() {
            for rec in &sol.state.contacts {
                support += rec.normal_force
                    * scenario
                        .local_dir_to_world(i, nalgebra::Vector2::new(rec.normal.x, rec.normal.y));
            }
        }
        for dir in [
            Vector3::x(),
            Vector3::z(),
            Vector3::new(0.6, 0.8, 0.0),
            Vector3::new(0.0, -0.707, 0.707),
        ] {
            let d = 0.5 * dir.normalize();
            let work =
                grasp_total_energy(&scenario, excursion, d).unwrap() - e0 - support.dot(&d);
            let quad = 0.5 * (d.transpose() * m * d)[(0, 0)];
            assert!(
                (work - quad).abs() / quad < 0.05,
                "dir {dir:?}: work {work:.5} vs quadratic {quad:.5}"
            );
        }
    }

    #[test]
    fn energy_well_cap_semantics() {
        // A tiny displacement cap is reached before any contact breaks; the
        // probe reports the capped energy.
        let scenario = GraspScenario::demo_spherical_pinch();
        let well = energy_well(&scenario, 2.2, &[Vector3::x()], 0.05).unwrap();
        assert!(well.probes[0].capped);
        assert!(well.probes[0].escape_work > 0.0);
        assert_eq!(well.probes[0].break_displacement, 0.05);
    }

    #[test]
    fn rotating_the_whole_grasp_leaves_planar_results_unchanged() {
        // A pair at azimuths 90°/270° spans the y–z plane; the planar
        // stiffness and well must match the x–z pair exactly.
        let base = GraspScenario::demo_opposed_pinch();
        let mut rotated = base.clone();
        for f in &mut rotated.fingers {
            f.azimuth += std::f64::consts::FRAC_PI_2;
        }
        let ka = grasp_stiffness(&base, 2.2).unwrap();
        let kb = grasp_stiffness(&rotated, 2.2).unwrap();
        let (StiffnessBlock::Planar(a), StiffnessBlock::Planar(b)) = (&ka.matrix, &kb.matrix)
        else {
            panic!();
        };
        assert!((a - b).norm() < 1e-9 * a.norm());
        let wa = energy_well(&base, 2.2, &default_probe_directions(&base), 6.0).unwrap();
        let wb = energy_well(&rotated, 2.2, &default_probe_directions(&rotated), 6.0).unwrap();
        assert!((wa.min_escape_work - wb.min_escape_work).abs() < 1e-6);
    }

    #[test]
    fn opposed_pinch_well_breaks_on_pull_and_holds_on_push() {
        let scenario = GraspScenario::demo_opposed_pinch();
        let well = energy_well(
            &scenario,
            2.2,
            &default_probe_directions(&scenario),
            8.0,
        )
        .unwrap();
        assert_eq!(well.probes.len(), 16);
        assert!(well.hessian.matrix.is_positive_definite());
        assert!(well.probes.iter().all(|p| p.escape_work >= 0.0));
        // Pulling the object out of the pinch (along −z, downward out of the
        // tilted faces) must break a contact before the cap.
        let down = well
            .probes
            .iter()
            .find(|p| p.direction.z < -0.9)
            .expect("a −z probe");
        assert!(!down.capped, "downward pull must break the grasp");
        assert!(down.escape_work > 0.0);
        assert!(well.min_escape_work <= down.escape_work);
    }

    #[test]
    fn spherical_pinch_curve_mirrors_opposed_behaviour() {
        let scenario = GraspScenario::demo_spherical_pinch();
        let curve = simulate_pinch_grasp(&scenario).unwrap();
        assert!(curve.knee_excursion.is_some());
        let max_force = curve
            .samples
            .iter()
            .map(|s| s.internal_force)
            .fold(0.0, f64::max);
        assert!(max_force > 1.0);
        // All three fingers see the same planar problem, so the per-finger
        // squeeze force matches the opposed scenario's.
        let opposed = simulate_pinch_grasp(&GraspScenario::demo_opposed_pinch()).unwrap();
        for (a, b) in curve.samples.iter().zip(&opposed.samples) {
            assert!((a.internal_force - b.internal_force).abs() < 1e-9);
        }
    }

    #[test]
    fn validation_names_offending_fields() {
        let mut scenario = GraspScenario::demo_opposed_pinch();
        scenario.object.width = -5.0;
        let err = scenario.validate().unwrap_err();
        assert!(matches!(
            &err,
            GraspError::InvalidScenario { field, .. } if field == "object.width"
        ));

        let mut scenario = GraspScenario::demo_opposed_pinch();
        scenario.fingers[1].azimuth = 1.0;
        let err = scenario.validate().unwrap_err();
        assert!(matches!(
            &err,
            GraspError::InvalidScenario { field, .. } if field == "fingers.azimuth"
        ));

        let mut scenario = GraspScenario::demo_power_cylinder();
        scenario.fingers[0].params.r_distal = 40.0; // not power capable
        let err = scenario.validate().unwrap_err();
        assert!(matches!(
            &err,
            GraspError::InvalidScenario { field, .. } if field == "fingers.0.params"
        ));
    }
}
