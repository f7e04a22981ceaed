//! Measured reference stiffness matrices used by the reproduction suite:
//! a planar two-finger pinch and a spatial three-finger pinch, N/mm.

/// Planar opposed-pinch stiffness reference, row-major 2×2.
pub const PLANAR_PINCH_STIFFNESS: [[f64; 2]; 2] = [[0.445, 0.0543], [0.0543, 0.409]];

/// Spatial spherical-pinch stiffness reference, row-major 3×3.
pub const SPATIAL_PINCH_STIFFNESS: [[f64; 3]; 3] = [
    [0.569, 0.0553, 0.0323],
    [0.0553, 0.696, 0.0755],
    [0.0323, 0.0755, 0.809],
];

pub fn planar_reference() -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(2, 2, &PLANAR_PINCH_STIFFNESS.concat())
}

pub fn spatial_reference() -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(3, 3, &SPATIAL_PINCH_STIFFNESS.concat())
}
