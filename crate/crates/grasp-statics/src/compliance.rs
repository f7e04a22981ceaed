//! Compliance algebra for points on the finger's rigid links.
//!
//! A 6×6 compliance matrix maps a small wrench (force, torque) applied at a
//! reference point to the small twist (displacement, rotation) of that point.
//! The block structure separates Cartesian, coupling and rotational parts.
//! Because one matrix characterizes every point of a rigid body, an adjoint
//! congruence transform relocates the reference point; the Cartesian block
//! picked up at an offset grows with the square of the lever arm times the
//! rotational compliance.
//!
//! Compliance of the finger itself is assembled on the constraint manifold:
//! generalized coordinates are the two planar joint angles plus one
//! out-of-plane rotation per joint, the held tendon excursion removes one
//! in-plane direction, and active contacts remove more. What remains is the
//! passive mobility of the underactuated mechanism, so the in-plane block at
//! a fingertip of a tendon-locked free finger has rank one.

use nalgebra::{Matrix2, Matrix3, Matrix6, SMatrix, Vector2, Vector3};
use thiserror::Error;

use crate::equilibrium::EquilibriumSolution;
use crate::finger::{
    planar_link_point, planar_link_point_hessian, planar_link_point_jacobian, ContactLink,
    FingerParams, FingerState,
};

/// Identifier of the frame a compliance matrix is expressed in.
pub const FINGER_BASE_FRAME: &str = "finger_base";

#[derive(Debug, Clone, Error)]
pub enum ComplianceError {
    #[error("singular configuration: {reason}")]
    SingularConfiguration { reason: String },
    #[error("matrix violates compliance invariants: {reason}")]
    InvalidMatrix { reason: String },
}

/// Symmetric positive-semidefinite 6×6 map from wrench to twist at a
/// reference point.
///
/// Row/column order is (x, y, z, θx, θy, θz). Blocks: Cartesian C_xx (mm/N),
/// coupling C_xθ (rad/N ≡ mm/(N·mm)) and rotational C_θθ (rad/(N·mm)); the
/// lower-left block is the coupling transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceMatrix {
    matrix: Matrix6<f64>,
    pub reference_point: Vector3<f64>,
    pub frame: &'static str,
}

impl ComplianceMatrix {
    /// Validates symmetry (1e-12 relative) and positive semidefiniteness
    /// (eigenvalues ≥ −1e-10·‖C‖).
    pub fn new(
        matrix: Matrix6<f64>,
        reference_point: Vector3<f64>,
        frame: &'static str,
    ) -> Result<Self, ComplianceError> {
        let scale = matrix.norm();
        let asym = (matrix - matrix.transpose()).norm();
        if scale > 0.0 && asym > 1e-12 * scale {
            return Err(ComplianceError::InvalidMatrix {
                reason: format!("asymmetry {asym:.3e} exceeds 1e-12 relative"),
            });
        }
        let sym = 0.5 * (matrix + matrix.transpose());
        let eig = sym.symmetric_eigenvalues();
        if eig.iter().any(|&l| l < -1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return Err(ComplianceError::InvalidMatrix {
                reason: format!("negative eigenvalue {:.3e}", eig.min()),
            });
        }
        Ok(ComplianceMatrix {
            matrix: sym,
            reference_point,
            frame,
        })
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.matrix
    }

    /// Cartesian block C_xx, mm/N.
    pub fn cartesian_block(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Coupling block C_xθ.
    pub fn coupling_block(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 3).into_owned()
    }

    /// Rotational block C_θθ, rad/(N·mm).
    pub fn rotational_block(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(3, 3).into_owned()
    }

    /// In-plane 2×2 Cartesian sub-block (x, y).
    pub fn in_plane_block(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Out-of-plane Cartesian compliance C_zz, mm/N.
    pub fn out_of_plane(&self) -> f64 {
        self.matrix[(2, 2)]
    }
}

/// Rigid-body adjoint relocating twists between two points: the 6×6 matrix
/// [[I, d×], [0, I]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointMap {
    pub offset: Vector3<f64>,
}

pub(crate) fn skew(d: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -d.z, d.y, d.z, 0.0, -d.x, -d.y, d.x, 0.0)
}

impl AdjointMap {
    pub fn new(offset: Vector3<f64>) -> Self {
        AdjointMap { offset }
    }

    pub fn matrix(&self) -> Matrix6<f64> {
        let mut j = Matrix6::identity();
        j.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(self.offset));
        j
    }

    pub fn inverse(&self) -> AdjointMap {
        AdjointMap {
            offset: -self.offset,
        }
    }
}

/// Relocates a compliance matrix along its rigid body: C' = J·C·Jᵀ with
/// J = [[I, d×], [0, I]].
///
/// Under this adjoint convention the result describes the body point at
/// `reference_point − d`; symmetry and positive semidefiniteness are
/// preserved (congruence), and transports compose: transporting by d₁ then
/// d₂ equals transporting by d₁ + d₂.
pub fn transport(c: &ComplianceMatrix, d: Vector3<f64>) -> ComplianceMatrix {
    let j = AdjointMap::new(d).matrix();
    let m = j * c.matrix * j.transpose();
    ComplianceMatrix {
        matrix: 0.5 * (m + m.transpose()),
        reference_point: c.reference_point - d,
        frame: c.frame,
    }
}

/// Compliance of the body point at `point` (same frame), with the adjoint
/// offset sign handled internally.
pub fn compliance_at_point(c: &ComplianceMatrix, point: Vector3<f64>) -> ComplianceMatrix {
    transport(c, c.reference_point - point)
}

/// Cartesian block picked up at an offset:
/// C_xx + d×·C_xθᵀ + C_xθ·d×ᵀ + d×·C_θθ·d×ᵀ.
///
/// Equals the Cartesian block of [`transport`] with the same `d` exactly.
/// The lever-squared term d×·C_θθ·d×ᵀ makes the Cartesian compliance
/// contributed by a joint's rotational compliance grow with the square of
/// the distance to that joint.
pub fn offset_cartesian_compliance(c: &ComplianceMatrix, d: Vector3<f64>) -> Matrix3<f64> {
    let s = skew(d);
    let cxx = c.cartesian_block();
    let cxt = c.coupling_block();
    let ctt = c.rotational_block();
    cxx + s * cxt.transpose() + cxt * s.transpose() + s * ctt * s.transpose()
}

fn twist_column(axis: Vector3<f64>, origin: Vector3<f64>, point: Vector3<f64>) -> [f64; 6] {
    let v = axis.cross(&(point - origin));
    [v.x, v.y, v.z, axis.x, axis.y, axis.z]
}

/// Generalized-coordinate model for compliance assembly: (θp, θd, φp, φd)
/// where the φ are out-of-plane rotations at each joint about the in-plane
/// axis transverse to the link.
struct AssemblyBasis {
    /// 6×4 Jacobian from coordinate rates to the twist of the query point.
    g: SMatrix<f64, 6, 4>,
    /// 4×4 joint-space stiffness, including travel-limit stiffening and
    /// contact-preload curvature.
    k: SMatrix<f64, 4, 4>,
    /// Constraint rows (tendon first, then active contacts).
    rows: Vec<[f64; 4]>,
}

fn assembly_basis(
    params: &FingerParams,
    state: &FingerState,
    point: Vector3<f64>,
    constrain_contacts: bool,
) -> AssemblyBasis {
    let q = [state.theta_proximal, state.theta_distal];
    let o_p = Vector3::zeros();
    let o_d = {
        let j = crate::finger::distal_joint_position(params, q[0]);
        Vector3::new(j.x, j.y, 0.0)
    };
    let z = Vector3::z();
    let transverse = |a: f64| Vector3::new(-(a.sin()), a.cos(), 0.0);
    let a_p = transverse(q[0]);
    let a_d = transverse(q[0] + q[1]);

    let cols = [
        twist_column(z, o_p, point),
        twist_column(z, o_d, point),
        twist_column(a_p, o_p, point),
        twist_column(a_d, o_d, point),
    ];
    let mut g = SMatrix::<f64, 6, 4>::zeros();
    for (j, col) in cols.iter().enumerate() {
        for i in 0..6 {
            g[(i, j)] = col[i];
        }
    }

    let k_d_eff = if state.theta_distal >= params.travel_limit_distal {
        params.k_distal_bend + params.travel_limit_stiffness
    } else {
        params.k_distal_bend
    };
    let mut k = SMatrix::<f64, 4, 4>::zeros();
    k[(0, 0)] = params.k_proximal;
    k[(1, 1)] = k_d_eff;
    k[(2, 2)] = params.k_proximal_twist;
    k[(3, 3)] = params.k_distal_twist;

    // Held tendon excursion: the actuator is non-backdrivable, so the
    // excursion is a boundary condition and removes one in-plane direction.
    let mut rows = vec![[params.r_proximal, params.r_distal, 0.0, 0.0]];

    // Active contacts constrain the normal motion of their material points.
    // The surface is linearized at the recorded contact (fixed normal), and
    // the contact preload enters the reduced stiffness through the curvature
    // of the contact-point position.
    for rec in &state.contacts {
        let n2 = Vector2::new(rec.normal.x, rec.normal.y);
        if constrain_contacts {
            let jac = planar_link_point_jacobian(params, q, rec.link, rec.location);
            rows.push([n2.dot(&jac[0]), n2.dot(&jac[1]), 0.0, 0.0]);
        }
        let h = planar_link_point_hessian(params, q, rec.link, rec.location, n2);
        for i in 0..2 {
            for jj in 0..2 {
                k[(i, jj)] -= rec.normal_force * h[(i, jj)];
            }
        }
    }

    AssemblyBasis { g, k, rows }
}

/// Orthonormal basis of the null space of the stacked constraint rows, by
/// Gram–Schmidt completion of the row space.
fn null_space(rows: &[[f64; 4]]) -> nalgebra::DMatrix<f64> {
    type V4 = nalgebra::SVector<f64, 4>;
    let mut row_basis: Vec<V4> = Vec::new();
    for r in rows {
        let mut v = V4::from_column_slice(r);
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        v /= scale;
        for b in &row_basis {
            v -= b.dot(&v) * b;
        }
        if v.norm() > 1e-10 {
            row_basis.push(v.normalize());
        }
    }
    let mut null_basis: Vec<V4> = Vec::new();
    for i in 0..4 {
        let mut v = V4::zeros();
        v[i] = 1.0;
        for b in row_basis.iter().chain(null_basis.iter()) {
            v -= b.dot(&v) * b;
        }
        if v.norm() > 1e-10 {
            null_basis.push(v.normalize());
        }
    }
    let mut n = nalgebra::DMatrix::<f64>::zeros(4, null_basis.len());
    for (j, v) in null_basis.iter().enumerate() {
        for i in 0..4 {
            n[(i, j)] = v[i];
        }
    }
    n
}

/// Assembles the 6×6 compliance of a point rigidly attached to the distal
/// link, on the manifold defined by the held tendon excursion and the active
/// contacts: C = (G·N)·(Nᵀ·K·N)⁻¹·(G·N)ᵀ.
pub fn joint_space_compliance(
    params: &FingerParams,
    state: &FingerState,
    point: Vector3<f64>,
) -> Result<ComplianceMatrix, ComplianceError> {
    assemble_compliance(params, state, point, true)
}

/// Compliance when the recorded contacts press on the finger — their preload
/// stiffens the mechanism through the curvature of the contact-point
/// positions — but remain free to separate, so only the tendon constrains
/// the manifold. This is the operand for contact-normal-projected grasp
/// stiffness.
pub fn preloaded_free_compliance(
    params: &FingerParams,
    state: &FingerState,
    point: Vector3<f64>,
) -> Result<ComplianceMatrix, ComplianceError> {
    assemble_compliance(params, state, point, false)
}

fn assemble_compliance(
    params: &FingerParams,
    state: &FingerState,
    point: Vector3<f64>,
    constrain_contacts: bool,
) -> Result<ComplianceMatrix, ComplianceError> {
    let basis = assembly_basis(params, state, point, constrain_contacts);
    let n = null_space(&basis.rows);
    if n.ncols() == 0 {
        // Fully constrained: the point is rigid.
        return ComplianceMatrix::new(Matrix6::zeros(), point, FINGER_BASE_FRAME);
    }
    let mut kd = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            kd[(i, j)] = basis.k[(i, j)];
        }
    }
    let reduced = n.transpose() * &kd * &n;
    let chol = reduced
        .cholesky()
        .ok_or_else(|| ComplianceError::SingularConfiguration {
            reason: "reduced stiffness on the constraint manifold is not positive definite"
                .into(),
        })?;
    let inv = chol.inverse();
    let mut gd = nalgebra::DMatrix::<f64>::zeros(6, 4);
    for i in 0..6 {
        for j in 0..4 {
            gd[(i, j)] = basis.g[(i, j)];
        }
    }
    let gn = gd * n;
    let c = &gn * inv * gn.transpose();
    let mut m = Matrix6::zeros();
    for i in 0..6 {
        for j in 0..6 {
            m[(i, j)] = c[(i, j)];
        }
    }
    ComplianceMatrix::new(0.5 * (m + m.transpose()), point, FINGER_BASE_FRAME)
}

/// In-plane compliance ellipse at a point: orthonormal principal axes and
/// the principal compliances sorted descending.
#[derive(Debug, Clone)]
pub struct ComplianceEllipse {
    pub point: Vector3<f64>,
    /// Arc position of the evaluation point along the distal link axis,
    /// measured from the distal joint, mm.
    pub arc_position: f64,
    pub axes: [Vector2<f64>; 2],
    pub compliances: [f64; 2],
}

fn in_plane_ellipse(c: &ComplianceMatrix, arc_position: f64) -> ComplianceEllipse {
    let block = c.in_plane_block();
    let eig = nalgebra::SymmetricEigen::new(block);
    let (vals, vecs) = (eig.eigenvalues, eig.eigenvectors);
    let order: [usize; 2] = if vals[0] >= vals[1] { [0, 1] } else { [1, 0] };
    ComplianceEllipse {
        point: c.reference_point,
        arc_position,
        axes: [
            Vector2::new(vecs[(0, order[0])], vecs[(1, order[0])]),
            Vector2::new(vecs[(0, order[1])], vecs[(1, order[1])]),
        ],
        // Eigensolver roundoff can leave a tiny negative second value.
        compliances: [vals[order[0]].max(0.0), vals[order[1]].max(0.0)],
    }
}

/// Point on the (extended) distal link axis at arc position `arc` from the
/// distal joint.
pub fn distal_axis_point(params: &FingerParams, state: &FingerState, arc: f64) -> Vector3<f64> {
    let q = [state.theta_proximal, state.theta_distal];
    let p = planar_link_point(params, q, ContactLink::Distal, arc);
    Vector3::new(p.x, p.y, 0.0)
}

/// In-plane compliance ellipses at sample points along the distal link axis
/// (arc positions in mm from the distal joint; points past the fingertip are
/// rigid extensions of the link).
pub fn compliance_field(
    params: &FingerParams,
    state: &FingerState,
    sample_arcs: &[f64],
) -> Result<Vec<ComplianceEllipse>, ComplianceError> {
    sample_arcs
        .iter()
        .map(|&arc| {
            let point = distal_axis_point(params, state, arc);
            let c = joint_space_compliance(params, state, point)?;
            Ok(in_plane_ellipse(&c, arc))
        })
        .collect()
}

/// Locates the center of compliance: the arc position along the distal link
/// axis minimizing the largest in-plane principal compliance. Golden-section
/// search to 0.01 mm; the field has a unique interior minimum because the
/// passive-mode speed of an axis point is a convex quadratic in the arc
/// position.
pub fn center_of_compliance(
    params: &FingerParams,
    state: &FingerState,
    bracket: (f64, f64),
) -> Result<(f64, f64), ComplianceError> {
    let value = |arc: f64| -> Result<f64, ComplianceError> {
        let point = distal_axis_point(params, state, arc);
        let c = joint_space_compliance(params, state, point)?;
        Ok(in_plane_ellipse(&c, arc).compliances[0])
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = bracket;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = value(x1)?;
    let mut f2 = value(x2)?;
    while (b - a).abs() > 0.01 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = value(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = value(x2)?;
        }
    }
    let arc = 0.5 * (a + b);
    Ok((arc, value(arc)?))
}

/// Analytic fingertip velocity per unit excursion along the free closing
/// path: dq/de = K⁻¹r/(rᵀK⁻¹r) mapped through the tip Jacobian, plus the
/// joint-rate vector itself.
pub(crate) fn free_closing_tip_tangent(
    params: &FingerParams,
    state: &FingerState,
) -> (Vector2<f64>, [f64; 2]) {
    let q = [state.theta_proximal, state.theta_distal];
    let k_d_eff = if state.theta_distal >= params.travel_limit_distal {
        params.k_distal_bend + params.travel_limit_stiffness
    } else {
        params.k_distal_bend
    };
    let kinvr = Vector2::new(
        params.r_proximal / params.k_proximal,
        params.r_distal / k_d_eff,
    );
    let denom = params.r_proximal * kinvr.x + params.r_distal * kinvr.y;
    let dq = kinvr / denom;
    let jac = planar_link_point_jacobian(params, q, ContactLink::Fingertip, params.distal_length);
    (jac[0] * dq.x + jac[1] * dq.y, [dq.x, dq.y])
}

/// Angle, in degrees within [0°, 90°], between the fingertip's direction of
/// motion under increasing excursion and the largest-compliance principal
/// direction at the fingertip, for each configuration of a free closing
/// trajectory.
pub fn principal_direction_alignment(
    params: &FingerParams,
    trajectory: &[EquilibriumSolution],
) -> Result<Vec<f64>, ComplianceError> {
    trajectory
        .iter()
        .map(|sol| {
            let state = &sol.state;
            let (motion, _) = free_closing_tip_tangent(params, state);
            if motion.norm() < 1e-12 {
                return Err(ComplianceError::SingularConfiguration {
                    reason: "fingertip motion direction vanishes".into(),
                });
            }
            let tip = distal_axis_point(params, state, params.distal_length);
            let c = joint_space_compliance(params, state, tip)?;
            let ell = in_plane_ellipse(&c, params.distal_length);
            if ell.compliances[0] <= 0.0 {
                return Err(ComplianceError::SingularConfiguration {
                    reason: "in-plane compliance vanishes at the fingertip".into(),
                });
            }
            let dir = ell.axes[0];
            let cosang = (motion.normalize().dot(&dir)).abs().min(1.0);
            Ok(cosang.acos().to_degrees())
        })
        .collect()
}
