//! Quasi-static simulation and analysis of underactuated, tendon-driven,
//! elastically jointed robot fingers.
//!
//! The crate models a two-link finger closed by a single flexor tendon over
//! spring-loaded joints. Equilibrium configurations come from constrained
//! elastic-energy minimization; 6×6 compliance matrices are assembled on the
//! constraint manifold and transported between body points; grasp scenarios
//! compose fingers into force–excursion curves, object stiffness matrices and
//! energy-well stability scores; and a least-squares pipeline identifies
//! symmetric stiffness matrices from cyclic displacement–force data.
//!
//! All quantities use a fixed unit system: N, mm, rad, N·mm, N/mm.

pub mod compliance;
pub mod equilibrium;
pub mod finger;
pub mod grasp;
pub mod stiffness_id;

pub use compliance::{
    compliance_field, joint_space_compliance, offset_cartesian_compliance,
    principal_direction_alignment, transport, AdjointMap, ComplianceEllipse, ComplianceMatrix,
};
pub use equilibrium::{
    closing_trajectory, solve_contact_equilibrium, solve_free_closing, EquilibriumProblem,
    EquilibriumSolution, Obstacle, ObstacleGeometry, SolveError, Surface,
};
pub use finger::{
    elastic_energy, forward_kinematics, tendon_jacobian, ContactLink, ContactRecord,
    FingerParams, FingerState, GraspPhase,
};
pub use grasp::{
    energy_well, grasp_stiffness, simulate_pinch_grasp, simulate_power_grasp, EnergyWell,
    ForceExcursionCurve, GraspScenario, GraspStiffness, GraspType,
};
pub use stiffness_id::{
    conditioning_report, fit_stiffness, synthesize_cycles, ConditioningReport, CycleDataset,
    StiffnessFit,
};
