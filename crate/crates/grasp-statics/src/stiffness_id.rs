//! Symmetric stiffness identification from cyclic displacement–force data.
//!
//! A test object held in a grasp is displaced in back-and-forth cycles and
//! the restoring force recorded. Friction and viscoelasticity offset the
//! force depending on the direction of motion, so the model fitted by linear
//! least squares is f = K·δx + h·dir with a symmetric K (parameterized by
//! its upper triangle, so symmetry is structural) and a per-axis constant
//! hysteresis offset h that flips sign with the direction flag. Averaging
//! over both directions of motion cancels h out of K.

use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use thiserror::Error;

/// One displacement–force sample of a disturbance cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSample {
    /// mm; unused trailing components are zero.
    pub displacement: [f64; 3],
    /// N.
    pub force: [f64; 3],
    pub cycle: u32,
    /// +1 forward, −1 backward along the cycle's motion direction.
    pub direction: i8,
}

/// A set of cyclic samples of one fixed dimension (2 planar or 3 spatial).
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDataset {
    pub dimension: usize,
    pub samples: Vec<CycleSample>,
}

#[derive(Debug, Clone, Error)]
pub enum FitError {
    #[error("invalid dataset: {message}")]
    InvalidData { message: String },
    #[error(
        "rank-deficient data: displacements do not span the space (null direction {null_direction:?})"
    )]
    RankDeficientData { null_direction: Vec<f64> },
}

impl CycleDataset {
    pub fn new(dimension: usize, samples: Vec<CycleSample>) -> Result<Self, FitError> {
        if dimension != 2 && dimension != 3 {
            return Err(FitError::InvalidData {
                message: format!("dimension must be 2 or 3, got {dimension}"),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            if s.direction != 1 && s.direction != -1 {
                return Err(FitError::InvalidData {
                    message: format!("samples[{i}].direction must be ±1"),
                });
            }
            let finite = s
                .displacement
                .iter()
                .chain(s.force.iter())
                .all(|v| v.is_finite());
            if !finite {
                return Err(FitError::InvalidData {
                    message: format!("samples[{i}] contains non-finite values"),
                });
            }
        }
        Ok(CycleDataset { dimension, samples })
    }

    /// Number of free parameters of the fit: upper triangle plus per-axis
    /// hysteresis offsets.
    pub fn parameter_count(&self) -> usize {
        let n = self.dimension;
        n * (n + 1) / 2 + n
    }
}

/// Result of a symmetric stiffness fit.
#[derive(Debug, Clone)]
pub struct StiffnessFit {
    /// n×n symmetric, N/mm. Symmetry is structural: only the upper triangle
    /// was estimated.
    pub matrix: DMatrix<f64>,
    /// RMS force residual over all sample components, N.
    pub residual_rms: f64,
    /// Standard error of each matrix entry, N/mm.
    pub standard_errors: DMatrix<f64>,
    /// Estimated per-axis direction-flip force offset, N.
    pub hysteresis: Vec<f64>,
}

/// Index of (a, b) with a ≤ b in the packed upper triangle.
fn tri_index(n: usize, a: usize, b: usize) -> usize {
    // Row-major upper triangle: (0,0), (0,1), …, (0,n−1), (1,1), …
    a * n - a * (a + 1) / 2 + b
}

/// Fits a symmetric stiffness matrix and per-axis hysteresis offsets to
/// cyclic data by linear least squares over
/// Σ‖f_i − K·δx_i − h·dir_i‖².
pub fn fit_stiffness(data: &CycleDataset) -> Result<StiffnessFit, FitError> {
    let n = data.dimension;
    let p_k = n * (n + 1) / 2;
    let p = p_k + n;
    let m = data.samples.len() * n;
    if data.samples.len() < 2 * p {
        return Err(FitError::InvalidData {
            message: format!(
                "need at least {} samples spanning the space, got {}",
                2 * p,
                data.samples.len()
            ),
        });
    }

    // Rank condition on the displacements alone.
    let mut disp = DMatrix::zeros(data.samples.len(), n);
    for (i, s) in data.samples.iter().enumerate() {
        for j in 0..n {
            disp[(i, j)] = s.displacement[j];
        }
    }
    let svd = disp.clone().svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10)
        .count();
    if rank < n {
        let vt = svd.v_t.expect("svd with v_t");
        let null_direction = (0..n).map(|j| vt[(vt.nrows() - 1, j)]).collect();
        return Err(FitError::RankDeficientData { null_direction });
    }

    // Design matrix: rows are (sample, axis) pairs. K_ab (a ≤ b) multiplies
    // δx_b in row-axis a and δx_a in row-axis b; h_j multiplies dir in
    // row-axis j.
    let mut x = DMatrix::zeros(m, p);
    let mut y = DVector::zeros(m);
    for (i, s) in data.samples.iter().enumerate() {
        for axis in 0..n {
            let row = i * n + axis;
            y[row] = s.force[axis];
            for b in 0..n {
                let (lo, hi) = if axis <= b { (axis, b) } else { (b, axis) };
                x[(row, tri_index(n, lo, hi))] += s.displacement[b];
            }
            x[(row, p_k + axis)] = f64::from(s.direction);
        }
    }

    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let chol = xtx.clone().cholesky().ok_or_else(|| FitError::InvalidData {
        message: "normal equations are singular".into(),
    })?;
    let theta = chol.solve(&xty);

    let residual = &y - &x * &theta;
    let ssr: f64 = residual.iter().map(|r| r * r).sum();
    let residual_rms = (ssr / m as f64).sqrt();
    // Unbiased noise variance estimate for the standard errors.
    let dof = (m - p).max(1);
    let sigma2 = ssr / dof as f64;
    let cov = chol.inverse() * sigma2;

    let mut matrix = DMatrix::zeros(n, n);
    let mut standard_errors = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let idx = tri_index(n, a, b);
            matrix[(a, b)] = theta[idx];
            matrix[(b, a)] = theta[idx];
            let se = cov[(idx, idx)].max(0.0).sqrt();
            standard_errors[(a, b)] = se;
            standard_errors[(b, a)] = se;
        }
    }
    let hysteresis = (0..n).map(|j| theta[p_k + j]).collect();
    Ok(StiffnessFit {
        matrix,
        residual_rms,
        standard_errors,
        hysteresis,
    })
}

fn uniform(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box–Muller; deterministic for a fixed rng state.
fn standard_normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let u1 = uniform(rng).max(f64::MIN_POSITIVE);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Synthesizes triangle-wave disturbance cycles along each axis and the axis
/// diagonals: force = K·δx + dir·hysteresis (on every axis) + Gaussian
/// noise. Deterministic for a fixed seed.
pub fn synthesize_cycles(
    k_true: &DMatrix<f64>,
    hysteresis: f64,
    noise_sigma: f64,
    n_cycles: usize,
    amplitude: f64,
    seed: u64,
) -> Result<CycleDataset, FitError> {
    let n = k_true.nrows();
    if k_true.ncols() != n || (n != 2 && n != 3) {
        return Err(FitError::InvalidData {
            message: "k_true must be 2×2 or 3×3".into(),
        });
    }
    let asym = (k_true - k_true.transpose()).norm();
    if asym > 1e-12 * k_true.norm().max(f64::MIN_POSITIVE) {
        return Err(FitError::InvalidData {
            message: "k_true must be symmetric".into(),
        });
    }
    if !(amplitude > 0.0) {
        return Err(FitError::InvalidData {
            message: "amplitude must be > 0".into(),
        });
    }
    let mut directions: Vec<DVector<f64>> = Vec::new();
    for a in 0..n {
        let mut d = DVector::zeros(n);
        d[a] = 1.0;
        directions.push(d);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let mut d = DVector::zeros(n);
            d[a] = std::f64::consts::FRAC_1_SQRT_2;
            d[b] = std::f64::consts::FRAC_1_SQRT_2;
            directions.push(d);
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    // Triangle wave 0 → +A → −A → 0: six samples per quarter leg.
    let quarter = 6usize;
    let legs: [(f64, f64); 3] = [(0.0, 1.0), (1.0, -1.0), (-1.0, 0.0)];
    for cycle in 0..n_cycles {
        let dir_vec = &directions[cycle % directions.len()];
        for (leg_idx, &(from, to)) in legs.iter().enumerate() {
            let moving_sign = if to > from { 1i8 } else { -1i8 };
            for step in 1..=quarter * if leg_idx == 1 { 2 } else { 1 } {
                let count = quarter * if leg_idx == 1 { 2 } else { 1 };
                let s = from + (to - from) * step as f64 / count as f64;
                let delta = dir_vec * (s * amplitude);
                let mut force = k_true * &delta;
                for j in 0..n {
                    force[j] += f64::from(moving_sign) * hysteresis
                        + noise_sigma * standard_normal(&mut rng);
                }
                let mut displacement = [0.0; 3];
                let mut f = [0.0; 3];
                for j in 0..n {
                    displacement[j] = delta[j];
                    f[j] = force[j];
                }
                samples.push(CycleSample {
                    displacement,
                    force: f,
                    cycle: cycle as u32,
                    direction: moving_sign,
                });
            }
        }
    }
    CycleDataset::new(n, samples)
}

/// Eigenstructure report of a stiffness matrix with a declared
/// well-conditionedness threshold on λmax/λmin.
#[derive(Debug, Clone)]
pub struct ConditioningReport {
    /// Ascending, N/mm.
    pub eigenvalues: Vec<f64>,
    pub condition_number: f64,
    /// Principal axes as columns, matching the eigenvalue order.
    pub principal_axes: DMatrix<f64>,
    pub well_conditioned: bool,
    pub threshold: f64,
}

/// Condition-number threshold below which a grasp stiffness matrix is
/// flagged well-conditioned (no dominant diagonal terms, no direction of
/// atypically high or low compliance).
pub const WELL_CONDITIONED_THRESHOLD: f64 = 3.0;

/// Eigen-decomposition of a symmetric stiffness matrix with the
/// well-conditioned flag.
pub fn conditioning_report(matrix: &DMatrix<f64>) -> ConditioningReport {
    let sym = 0.5 * (matrix + matrix.transpose());
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = eigenvalues.len();
    let mut principal_axes = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            principal_axes[(r, dst)] = eig.eigenvectors[(r, src)];
        }
    }
    let condition_number = eigenvalues[n - 1] / eigenvalues[0];
    ConditioningReport {
        condition_number,
        well_conditioned: condition_number < WELL_CONDITIONED_THRESHOLD
            && eigenvalues[0] > 0.0,
        eigenvalues,
        principal_axes,
        threshold: WELL_CONDITIONED_THRESHOLD,
    }
}

impl StiffnessFit {
    pub fn conditioning(&self) -> ConditioningReport {
        conditioning_report(&self.matrix)
    }
}

/// Writes a dataset as CSV with header
/// `dx_mm,dy_mm[,dz_mm],fx_N,fy_N[,fz_N],cycle,direction`.
pub fn write_cycles_csv(data: &CycleDataset) -> String {
    let n = data.dimension;
    let mut out = String::new();
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = (0..n).map(|j| format!("d{}_mm", axes[j])).collect();
    header.extend((0..n).map(|j| format!("f{}_N", axes[j])));
    header.push("cycle".into());
    header.push("direction".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for s in &data.samples {
        let mut fields: Vec<String> = (0..n).map(|j| format!("{:.9}", s.displacement[j])).collect();
        fields.extend((0..n).map(|j| format!("{:.9}", s.force[j])));
        fields.push(s.cycle.to_string());
        fields.push(s.direction.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses the CSV format written by [`write_cycles_csv`]; the dimension is
/// inferred from the header.
pub fn read_cycles_csv(text: &str) -> Result<CycleDataset, FitError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| FitError::InvalidData {
        message: "empty CSV".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let dimension = match cols.len() {
        6 => 2,
        8 => 3,
        other => {
            return Err(FitError::InvalidData {
                message: format!("expected 6 or 8 columns, found {other}"),
            })
        }
    };
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(FitError::InvalidData {
                message: format!("line {}: wrong field count", lineno + 2),
            });
        }
        let num = |i: usize| -> Result<f64, FitError> {
            fields[i].parse().map_err(|_| FitError::InvalidData {
                message: format!("line {}: bad number {:?}", lineno + 2, fields[i]),
            })
        };
        let mut displacement = [0.0; 3];
        let mut force = [0.0; 3];
        for j in 0..dimension {
            displacement[j] = num(j)?;
            force[j] = num(dimension + j)?;
        }
        let cycle: u32 = fields[2 * dimension].parse().map_err(|_| FitError::InvalidData {
            message: format!("line {}: bad cycle index", lineno + 2),
        })?;
        let direction: i8 = fields[2 * dimension + 1]
            .parse()
            .map_err(|_| FitError::InvalidData {
                message: format!("line {}: bad direction flag", lineno + 2),
            })?;
        samples.push(CycleSample {
            displacement,
            force,
            cycle,
            direction,
        });
    }
    CycleDataset::new(dimension, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq5_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.445, 0.0543, 0.0543, 0.409])
    }

    fn eq6_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                0.569, 0.0553, 0.0323, 0.0553, 0.696, 0.0755, 0.0323, 0.0755, 0.809,
            ],
        )
    }

    #[test]
    fn noiseless_synthetic_data_lies_on_the_plane() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.0, 0.0, 8, 2.0, 7).unwrap();
        for s in &data.samples {
            for axis in 0..2 {
                let predicted: f64 =
                    (0..2).map(|j| k[(axis, j)] * s.displacement[j]).sum();
                assert!((s.force[axis] - predicted).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_dataset() {
        let k = eq5_matrix();
        let a = synthesize_cycles(&k, 0.1, 0.02, 12, 2.0, 42).unwrap();
        let b = synthesize_cycles(&k, 0.1, 0.02, 12, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let c = synthesize_cycles(&k, 0.1, 0.02, 12, 2.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_fit_recovers_planted_matrix_to_machine_precision() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.0, 0.0, 10, 2.0, 3).unwrap();
        let fit = fit_stiffness(&data).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (fit.matrix[(i, j)] - k[(i, j)]).abs() < 1e-10,
                    "entry ({i},{j})"
                );
            }
        }
        assert!(fit.residual_rms < 1e-10);
        assert!(fit.hysteresis.iter().all(|h| h.abs() < 1e-10));
    }

    /// Independent oracle: solve the same least-squares problem by stacking
    /// the design matrix and using an SVD pseudo-inverse instead of the
    /// normal equations inside `fit_stiffness`.
    fn svd_oracle(data: &CycleDataset) -> DMatrix<f64> {
        let n = data.dimension;
        let p_k = n * (n + 1) / 2;
        let p = p_k + n;
        let m = data.samples.len() * n;
        let mut x = DMatrix::zeros(m, p);
        let mut y = DVector::zeros(m);
        for (i, s) in data.samples.iter().enumerate() {
            for axis in 0..n {
                let row = i * n + axis;
                y[row] = s.force[axis];
                for b in 0..n {
                    let (lo, hi) = if axis <= b { (axis, b) } else { (b, axis) };
                    x[(row, tri_index(n, lo, hi))] += s.displacement[b];
                }
                x[(row, p_k + axis)] = f64::from(s.direction);
            }
        }
        let theta = x.svd(true, true).solve(&y, 1e-12).unwrap();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                out[(a, b)] = theta[tri_index(n, a, b)];
                out[(b, a)] = theta[tri_index(n, a, b)];
            }
        }
        out
    }

    #[test]
    fn fit_agrees_with_svd_oracle_on_noisy_data() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.1, 0.02, 16, 2.0, 11).unwrap();
        let fit = fit_stiffness(&data).unwrap();
        let oracle = svd_oracle(&data);
        assert!((&fit.matrix - &oracle).norm() < 1e-9);
    }

    #[test]
    fn hysteresis_offset_is_estimated_and_cancelled() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.1, 0.0, 12, 2.0, 5).unwrap();
        let fit = fit_stiffness(&data).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((fit.matrix[(i, j)] - k[(i, j)]).abs() < 1e-10);
            }
        }
        for h in &fit.hysteresis {
            assert!((h - 0.1).abs() < 1e-10, "hysteresis {h}");
        }
    }

    #[test]
    fn noisy_fit_recovers_entries_within_three_standard_errors() {
        let k = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        // ~400 samples: 16 cycles × 24 samples.
        let data = synthesize_cycles(&k, 0.0, 0.02, 16, 2.0, 99).unwrap();
        assert!(data.samples.len() >= 380);
        let fit = fit_stiffness(&data).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let err = (fit.matrix[(i, j)] - k[(i, j)]).abs();
                assert!(
                    err <= 3.0 * fit.standard_errors[(i, j)],
                    "entry ({i},{j}): err {err:.2e} vs 3σ {:.2e}",
                    3.0 * fit.standard_errors[(i, j)]
                );
            }
        }
    }

    #[test]
    fn one_axis_loop_forms_a_parallelogram_of_height_twice_hysteresis() {
        let k = eq5_matrix();
        let hysteresis = 0.1;
        let data = synthesize_cycles(&k, hysteresis, 0.0, 1, 2.0, 1).unwrap();
        // Cycle 0 runs along x. At matching displacements the forward and
        // backward branches differ by exactly 2·hysteresis in force.
        let going: Vec<&CycleSample> =
            data.samples.iter().filter(|s| s.direction == 1).collect();
        let coming: Vec<&CycleSample> =
            data.samples.iter().filter(|s| s.direction == -1).collect();
        let mut matched = 0;
        for g in &going {
            for c in &coming {
                if (g.displacement[0] - c.displacement[0]).abs() < 1e-9 {
                    let gap = g.force[0] - c.force[0];
                    assert!(
                        (gap - 2.0 * hysteresis).abs() < 1e-12,
                        "branch separation {gap}"
                    );
                    matched += 1;
                }
            }
        }
        assert!(matched >= 4, "loop must revisit displacements");
    }

    #[test]
    fn fit_is_invariant_under_sample_reordering() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.1, 0.02, 12, 2.0, 21).unwrap();
        let mut reversed = data.clone();
        reversed.samples.reverse();
        let a = fit_stiffness(&data).unwrap();
        let b = fit_stiffness(&reversed).unwrap();
        assert!((&a.matrix - &b.matrix).norm() < 1e-10);
    }

    #[test]
    fn fit_scales_linearly_with_force_and_inversely_with_displacement() {
        let k = eq5_matrix();
        let data = synthesize_cycles(&k, 0.05, 0.01, 12, 2.0, 31).unwrap();
        let base = fit_stiffness(&data).unwrap();
        let s = 2.5;
        let mut forces = data.clone();
        for smp in &mut forces.samples {
            for f in &mut smp.force {
                *f *= s;
            }
        }
        let scaled_f = fit_stiffness(&forces).unwrap();
        assert!((&scaled_f.matrix - &(s * &base.matrix)).norm() < 1e-10);
        let mut disps = data.clone();
        for smp in &mut disps.samples {
            for d in &mut smp.displacement {
                *d *= s;
            }
        }
        let scaled_d = fit_stiffness(&disps).unwrap();
        assert!((&scaled_d.matrix - &(&base.matrix / s)).norm() < 1e-10);
    }

    #[test]
    fn symmetry_is_structural() {
        let k = eq6_matrix();
        let data = synthesize_cycles(&k, 0.1, 0.05, 24, 2.5, 17).unwrap();
        let fit = fit_stiffness(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                // Bit-identical, not merely close: one parameter serves both.
                assert_eq!(fit.matrix[(i, j)], fit.matrix[(j, i)]);
            }
        }
    }

    #[test]
    fn rank_deficient_displacements_are_reported_with_null_direction() {
        // All displacements along x only.
        let samples: Vec<CycleSample> = (0..40)
            .map(|i| {
                let x = (i as f64 - 20.0) / 10.0;
                CycleSample {
                    displacement: [x, 0.0, 0.0],
                    force: [0.5 * x, 0.0, 0.0],
                    cycle: (i / 10) as u32,
                    direction: if i % 2 == 0 { 1 } else { -1 },
                }
            })
            .collect();
        let data = CycleDataset::new(2, samples).unwrap();
        match fit_stiffness(&data) {
            Err(FitError::RankDeficientData { null_direction }) => {
                // The unspanned direction is y.
                assert!(null_direction[1].abs() > 0.99);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn conditioning_of_planar_reference_matrix() {
        let report = conditioning_report(&eq5_matrix());
        // Closed-form 2×2 oracle: λ = mean ± hypot(diff/2, off-diagonal).
        let mean = (0.445 + 0.409) / 2.0;
        let r = ((0.445f64 - 0.409) / 2.0).hypot(0.0543);
        let oracle = [mean - r, mean + r];
        assert!((report.eigenvalues[0] - oracle[0]).abs() < 1e-12);
        assert!((report.eigenvalues[1] - oracle[1]).abs() < 1e-12);
        assert!((report.condition_number - oracle[1] / oracle[0]).abs() < 1e-6);
        assert!((report.condition_number - 1.3094).abs() < 1e-4);
        assert!(report.well_conditioned);
    }

    #[test]
    fn conditioning_of_spatial_reference_matrix() {
        let report = conditioning_report(&eq6_matrix());
        assert!(report
            .eigenvalues
            .iter()
            .all(|l| (0.5..=0.9).contains(l)));
        assert!(report.well_conditioned);
        assert!(report.condition_number < 3.0);
        // Principal axes are orthonormal.
        let q = &report.principal_axes;
        let qtq = q.transpose() * q;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-9);
    }

    #[test]
    fn dominant_diagonal_is_flagged_ill_conditioned() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.01]);
        let report = conditioning_report(&m);
        assert!((report.condition_number - 100.0).abs() < 1e-9);
        assert!(!report.well_conditioned);
    }

    #[test]
    fn csv_round_trip_preserves_the_dataset() {
        for (k, dim) in [(eq5_matrix(), 2usize), (eq6_matrix(), 3)] {
            let data = synthesize_cycles(&k, 0.1, 0.02, 8, 2.0, 13).unwrap();
            assert_eq!(data.dimension, dim);
            let text = write_cycles_csv(&data);
            let back = read_cycles_csv(&text).unwrap();
            assert_eq!(back.dimension, data.dimension);
            assert_eq!(back.samples.len(), data.samples.len());
            for (a, b) in data.samples.iter().zip(&back.samples) {
                for j in 0..dim {
                    assert!((a.displacement[j] - b.displacement[j]).abs() < 1e-8);
                    assert!((a.force[j] - b.force[j]).abs() < 1e-8);
                }
                assert_eq!(a.cycle, b.cycle);
                assert_eq!(a.direction, b.direction);
            }
        }
    }
}
