//! Two-link underactuated finger model: geometry, elastic joints, tendon routing.
//!
//! The finger is a serial chain of two rigid links. The proximal joint is a
//! spring-loaded pin joint, the distal joint a lumped elastic flexure with an
//! in-plane bending stiffness and an out-of-plane deflection stiffness. A
//! single flexor tendon runs over both joints with constant moment arms, so a
//! tendon excursion couples the two joint angles through one scalar
//! constraint. All units are N, mm, rad (energies in N·mm, stiffnesses in
//! N·mm/rad, translational stiffness in N/mm).

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometry, joint stiffnesses, tendon moment arms and travel limits of one
/// two-link finger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FingerParams {
    /// Proximal link length, mm.
    pub proximal_length: f64,
    /// Distance from the distal joint to the fingertip contact point, mm.
    pub distal_length: f64,
    /// Proximal pin-joint torsion spring, N·mm/rad.
    pub k_proximal: f64,
    /// Distal flexure in-plane bending stiffness, N·mm/rad.
    pub k_distal_bend: f64,
    /// Distal flexure out-of-plane deflection stiffness, N·mm/rad.
    pub k_distal_twist: f64,
    /// Proximal joint out-of-plane stiffness, N·mm/rad. Large for a pin joint.
    pub k_proximal_twist: f64,
    /// Tendon moment arm at the proximal joint, mm.
    pub r_proximal: f64,
    /// Tendon moment arm at the distal joint, mm.
    pub r_distal: f64,
    /// Unloaded joint angles (proximal, distal), rad.
    pub rest_angles: [f64; 2],
    /// Distal flexion angle at which the distal link contacts the proximal
    /// link, rad.
    pub travel_limit_distal: f64,
    /// Post-limit stiffening constant, N·mm/rad. The travel limit is a smooth
    /// quadratic penalty spring, not a hard stop.
    pub travel_limit_stiffness: f64,
}

impl Default for FingerParams {
    /// Demonstration defaults. The sweep phase stays straight
    /// (k_distal_bend/r_distal² ≫ k_proximal/r_proximal²) and the distal link
    /// is shorter than its center-of-compliance offset.
    fn default() -> Self {
        let k_distal_bend = 120.0;
        FingerParams {
            proximal_length: 70.0,
            distal_length: 50.0,
            k_proximal: 20.0,
            k_distal_bend,
            k_distal_twist: 60.0,
            k_proximal_twist: 3000.0,
            r_proximal: 10.0,
            r_distal: 6.0,
            rest_angles: [0.0, 0.0],
            travel_limit_distal: 1.3,
            travel_limit_stiffness: 50.0 * k_distal_bend,
        }
    }
}

/// Invalid finger parameters.
#[derive(Debug, Clone, Error)]
#[error("params.{field}: {constraint}")]
pub struct ParamsError {
    pub field: &'static str,
    pub constraint: &'static str,
}

impl FingerParams {
    /// Checks the positivity invariants on lengths, stiffnesses and moment
    /// arms.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive: [(&'static str, f64); 9] = [
            ("proximal_length", self.proximal_length),
            ("distal_length", self.distal_length),
            ("k_proximal", self.k_proximal),
            ("k_distal_bend", self.k_distal_bend),
            ("k_distal_twist", self.k_distal_twist),
            ("k_proximal_twist", self.k_proximal_twist),
            ("r_proximal", self.r_proximal),
            ("r_distal", self.r_distal),
            ("travel_limit_distal", self.travel_limit_distal),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamsError {
                    field,
                    constraint: "must be strictly positive and finite",
                });
            }
        }
        if !(self.travel_limit_stiffness >= 0.0) || !self.travel_limit_stiffness.is_finite() {
            return Err(ParamsError {
                field: "travel_limit_stiffness",
                constraint: "must be non-negative and finite",
            });
        }
        if !self.rest_angles.iter().all(|a| a.is_finite()) {
            return Err(ParamsError {
                field: "rest_angles",
                constraint: "must be finite",
            });
        }
        Ok(())
    }

    /// Whether the distal joint is stiff enough, relative to its gearing, for
    /// the proximal link to sweep first: k_d/r_d² > k_p/r_p².
    pub fn is_power_grasp_capable(&self) -> bool {
        self.k_distal_bend / (self.r_distal * self.r_distal)
            > self.k_proximal / (self.r_proximal * self.r_proximal)
    }

    /// Joint deflections from rest.
    pub fn deflections(&self, state: &FingerState) -> [f64; 2] {
        [
            state.theta_proximal - self.rest_angles[0],
            state.theta_distal - self.rest_angles[1],
        ]
    }
}

/// Grasp acquisition phase of a closing finger.
///
/// `Sweep` = no contact, `Cage` = one link (or the fingertip) constrained,
/// `Closed` = two links constrained or the distal travel limit engaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraspPhase {
    Sweep,
    Cage,
    Closed,
}

impl GraspPhase {
    pub fn label(&self) -> &'static str {
        match self {
            GraspPhase::Sweep => "sweep",
            GraspPhase::Cage => "cage",
            GraspPhase::Closed => "closed",
        }
    }
}

/// Which part of the finger a contact acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactLink {
    Proximal,
    Distal,
    Fingertip,
}

/// One point contact on a link: location along the link from its joint,
/// outward unit normal (pointing from the obstacle towards the finger) and
/// the compressive normal force.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRecord {
    pub link: ContactLink,
    /// mm along the link, measured from the link's joint.
    pub location: f64,
    /// Unit normal in the finger plane (z = 0 for planar problems).
    pub normal: Vector3<f64>,
    /// N, ≥ 0 (frictionless contacts only push).
    pub normal_force: f64,
}

/// Configuration and tendon condition of one finger.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerState {
    pub theta_proximal: f64,
    pub theta_distal: f64,
    /// Out-of-plane deflection of the distal link, rad.
    pub twist_distal: f64,
    /// Tendon length taken up by the actuator, mm.
    pub tendon_excursion: f64,
    /// N, ≥ 0 (tendons only pull).
    pub tendon_tension: f64,
    pub phase: GraspPhase,
    pub contacts: Vec<ContactRecord>,
}

impl FingerState {
    /// Unloaded state at the rest angles.
    pub fn rest(params: &FingerParams) -> Self {
        FingerState {
            theta_proximal: params.rest_angles[0],
            theta_distal: params.rest_angles[1],
            twist_distal: 0.0,
            tendon_excursion: 0.0,
            tendon_tension: 0.0,
            phase: GraspPhase::Sweep,
            contacts: Vec::new(),
        }
    }

    /// Tendon constraint residual r_p·Δθp + r_d·Δθd − excursion, mm.
    /// Zero whenever the tendon is taut.
    pub fn tendon_residual(&self, params: &FingerParams) -> f64 {
        let [dp, dd] = params.deflections(self);
        params.r_proximal * dp + params.r_distal * dd - self.tendon_excursion
    }
}

/// Elastic energy stored in the finger joints, N·mm.
///
/// Quadratic in each joint deflection plus a one-sided quadratic penalty once
/// the distal angle passes its travel limit. Contacts do not enter the
/// energy. Zero exactly at the rest angles with no out-of-plane deflection
/// and the travel limit disengaged.
pub fn elastic_energy(params: &FingerParams, state: &FingerState) -> f64 {
    let [dp, dd] = params.deflections(state);
    let over = (state.theta_distal - params.travel_limit_distal).max(0.0);
    0.5 * params.k_proximal * dp * dp
        + 0.5 * params.k_distal_bend * dd * dd
        + 0.5 * params.k_distal_twist * state.twist_distal * state.twist_distal
        + 0.5 * params.travel_limit_stiffness * over * over
}

/// Gradient of [`elastic_energy`] with respect to
/// (theta_proximal, theta_distal, twist_distal), N·mm/rad.
pub fn elastic_energy_gradient(params: &FingerParams, state: &FingerState) -> [f64; 3] {
    let [dp, dd] = params.deflections(state);
    let over = (state.theta_distal - params.travel_limit_distal).max(0.0);
    [
        params.k_proximal * dp,
        params.k_distal_bend * dd + params.travel_limit_stiffness * over,
        params.k_distal_twist * state.twist_distal,
    ]
}

/// A link-attached coordinate frame: origin and orthonormal basis columns in
/// the finger base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkFrame {
    pub origin: Vector3<f64>,
    pub basis: Matrix3<f64>,
}

/// Forward kinematics result: fingertip pose plus both link frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerKinematics {
    pub tip_position: Vector3<f64>,
    /// In-plane fingertip orientation θp + θd, rad.
    pub tip_orientation: f64,
    pub proximal_frame: LinkFrame,
    pub distal_frame: LinkFrame,
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Serial-chain forward kinematics in the finger base frame.
///
/// x lies along the proximal link at θp = 0, z points out of the finger
/// plane. The distal out-of-plane deflection is a rotation about the distal
/// joint's in-plane transverse axis, so a positive `twist_distal` lifts the
/// fingertip towards +z.
pub fn forward_kinematics(params: &FingerParams, state: &FingerState) -> FingerKinematics {
    let r1 = rot_z(state.theta_proximal);
    let proximal_frame = LinkFrame {
        origin: Vector3::zeros(),
        basis: r1,
    };
    let distal_origin = r1 * Vector3::new(params.proximal_length, 0.0, 0.0);
    let r2 = rot_z(state.theta_proximal + state.theta_distal) * rot_y(-state.twist_distal);
    let distal_frame = LinkFrame {
        origin: distal_origin,
        basis: r2,
    };
    let tip_position = distal_origin + r2 * Vector3::new(params.distal_length, 0.0, 0.0);
    FingerKinematics {
        tip_position,
        tip_orientation: state.theta_proximal + state.theta_distal,
        proximal_frame,
        distal_frame,
    }
}

/// In-plane position of the distal joint for planar joint angles.
pub fn distal_joint_position(params: &FingerParams, theta_proximal: f64) -> Vector2<f64> {
    let (s, c) = theta_proximal.sin_cos();
    Vector2::new(params.proximal_length * c, params.proximal_length * s)
}

/// In-plane fingertip position for planar joint angles.
pub fn planar_tip_position(params: &FingerParams, theta_p: f64, theta_d: f64) -> Vector2<f64> {
    let j = distal_joint_position(params, theta_p);
    let (s, c) = (theta_p + theta_d).sin_cos();
    j + Vector2::new(params.distal_length * c, params.distal_length * s)
}

/// Tendon moment-arm row vector (r_proximal, r_distal), mm.
///
/// Under tension T the differential transmission exerts joint torques
/// (T·r_proximal, T·r_distal).
pub fn tendon_jacobian(params: &FingerParams) -> [f64; 2] {
    [params.r_proximal, params.r_distal]
}

fn unit(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

fn unit_perp(a: f64) -> Vector2<f64> {
    Vector2::new(-a.sin(), a.cos())
}

/// In-plane position of a material point at arc length `arc` along `link`,
/// for planar joint angles q = (θp, θd).
pub(crate) fn planar_link_point(
    params: &FingerParams,
    q: [f64; 2],
    link: ContactLink,
    arc: f64,
) -> Vector2<f64> {
    match link {
        ContactLink::Proximal => arc * unit(q[0]),
        ContactLink::Distal | ContactLink::Fingertip => {
            params.proximal_length * unit(q[0]) + arc * unit(q[0] + q[1])
        }
    }
}

/// Columns (∂P/∂θp, ∂P/∂θd) for the same material point.
pub(crate) fn planar_link_point_jacobian(
    params: &FingerParams,
    q: [f64; 2],
    link: ContactLink,
    arc: f64,
) -> [Vector2<f64>; 2] {
    match link {
        ContactLink::Proximal => [arc * unit_perp(q[0]), Vector2::zeros()],
        ContactLink::Distal | ContactLink::Fingertip => {
            let wp = unit_perp(q[0] + q[1]);
            [
                params.proximal_length * unit_perp(q[0]) + arc * wp,
                arc * wp,
            ]
        }
    }
}

/// dir·∂²P/∂qᵢ∂qⱼ for the same material point, the curvature of its position
/// along a fixed direction.
pub(crate) fn planar_link_point_hessian(
    params: &FingerParams,
    q: [f64; 2],
    link: ContactLink,
    arc: f64,
    dir: Vector2<f64>,
) -> nalgebra::Matrix2<f64> {
    match link {
        ContactLink::Proximal => {
            let h = dir.dot(&(-arc * unit(q[0])));
            nalgebra::Matrix2::new(h, 0.0, 0.0, 0.0)
        }
        ContactLink::Distal | ContactLink::Fingertip => {
            let w = unit(q[0] + q[1]);
            let hpp = dir.dot(&(-params.proximal_length * unit(q[0]) - arc * w));
            let hxx = dir.dot(&(-arc * w));
            nalgebra::Matrix2::new(hpp, hxx, hxx, hxx)
        }
    }
}
