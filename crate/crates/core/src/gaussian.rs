//! Gaussian sources with affine-plus-noise encoders.
//!
//! For zero-mean jointly Gaussian `(X, Y)` the encoders are `T1 = A X + ζ1`
//! and `T2 = B X + ζ2` with independent Gaussian noise. The solver iterates
//! closed-form updates of `(Σ_ζ1⁻¹, A, Σ_ζ2⁻¹, B)`; every information term is
//! an exact log-determinant difference.
//!
//! Notation used by the cached covariances:
//!
//! | name | definition |
//! |------|------------|
//! | `theta` | `Σ_YX Σ_X⁻¹`, the regression of `Y` on `X` |
//! | `xi1` | `B Σ_X Aᵀ Σ_T1⁻¹`, the regression of `T2` on `T1` |
//! | `xi2` | `A Σ_X Bᵀ Σ_T2⁻¹`, the regression of `T1` on `T2` |
//! | `psi1`, `psi2` | `E[Y | T1, T2] = psi1 T1 + psi2 T2` |

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::discrete::{LagrangeParams, SolveOptions, SolverWarning, MONOTONE_SLACK};
use crate::error::{DpflError, Result};
use crate::linalg::{ln_det_spd, symmetrize, SpdFactor};
use crate::report::InfoReport;
use crate::seed::restart_seed;

/// Symmetry tolerance for user-supplied covariance blocks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Largest accepted condition number of `Σ_X`.
pub const MAX_CONDITION: f64 = 1e12;

/// Scale of the seeded initial coupling matrices.
pub const INIT_SCALE: f64 = 0.1;

/// Zero-mean jointly Gaussian `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    sigma_x: DMatrix<f64>,
    sigma_y: DMatrix<f64>,
    sigma_yx: DMatrix<f64>,
    theta: DMatrix<f64>,
    sigma_y_given_x: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(DpflError::InvalidModel(format!(
            "{name} is {}x{}, expected a square matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(DpflError::InvalidModel(format!("{name}[{i}][{j}] is {v}")));
            }
            if j > i && (v - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * (1.0 + v.abs()) {
                return Err(DpflError::InvalidModel(format!(
                    "{name} is not symmetric: [{i}][{j}] = {v} but [{j}][{i}] = {}",
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

impl GaussianModel {
    pub fn new(sigma_x: DMatrix<f64>, sigma_y: DMatrix<f64>, sigma_yx: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&sigma_x, "sigma_x")?;
        check_symmetric(&sigma_y, "sigma_y")?;
        if sigma_x.nrows() == 0 || sigma_y.nrows() == 0 {
            return Err(DpflError::InvalidModel("dimensions must be at least 1".into()));
        }
        if sigma_yx.nrows() != sigma_y.nrows() || sigma_yx.ncols() != sigma_x.nrows() {
            return Err(DpflError::InvalidModel(format!(
                "sigma_yx is {}x{}, expected {}x{}",
                sigma_yx.nrows(),
                sigma_yx.ncols(),
                sigma_y.nrows(),
                sigma_x.nrows()
            )));
        }
        if let Some((k, v)) = sigma_yx.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (i, j) = (k % sigma_yx.nrows(), k / sigma_yx.nrows());
            return Err(DpflError::InvalidModel(format!("sigma_yx[{i}][{j}] is {v}")));
        }
        let sigma_x = symmetrize(&sigma_x);
        let sigma_y = symmetrize(&sigma_y);
        for (m, name) in [(&sigma_x, "sigma_x"), (&sigma_y, "sigma_y")] {
            let min = m.symmetric_eigenvalues().min();
            if !(min > 0.0) {
                return Err(DpflError::InvalidModel(format!(
                    "{name} is not positive definite (smallest eigenvalue {min})"
                )));
            }
        }

        let mut model = Self {
            theta: DMatrix::zeros(sigma_y.nrows(), sigma_x.nrows()),
            sigma_y_given_x: sigma_y.clone(),
            sigma_x,
            sigma_y,
            sigma_yx,
        };
        let joint = model.joint_covariance();
        let eig = joint.symmetric_eigenvalues();
        let scale = eig.amax().max(1.0);
        if eig.min() < -SYMMETRY_TOLERANCE * scale {
            return Err(DpflError::InvalidModel(format!(
                "joint covariance is not positive semidefinite (smallest eigenvalue {})",
                eig.min()
            )));
        }
        model.theta = compute_theta(&model)?;
        model.sigma_y_given_x =
            symmetrize(&(&model.sigma_y - &model.theta * model.sigma_yx.transpose()));
        Ok(model)
    }

    pub fn n_x(&self) -> usize {
        self.sigma_x.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.sigma_y.nrows()
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    pub fn sigma_y(&self) -> &DMatrix<f64> {
        &self.sigma_y
    }

    pub fn sigma_yx(&self) -> &DMatrix<f64> {
        &self.sigma_yx
    }

    /// `Σ_YX Σ_X⁻¹`.
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// `Σ_Y - Θ Σ_YXᵀ`.
    pub fn sigma_y_given_x(&self) -> &DMatrix<f64> {
        &self.sigma_y_given_x
    }

    /// `[[Σ_X, Σ_YXᵀ], [Σ_YX, Σ_Y]]`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let (nx, ny) = (self.n_x(), self.n_y());
        let mut joint = DMatrix::zeros(nx + ny, nx + ny);
        joint.view_mut((0, 0), (nx, nx)).copy_from(&self.sigma_x);
        joint.view_mut((nx, nx), (ny, ny)).copy_from(&self.sigma_y);
        joint.view_mut((nx, 0), (ny, nx)).copy_from(&self.sigma_yx);
        joint.view_mut((0, nx), (nx, ny)).copy_from(&self.sigma_yx.transpose());
        joint
    }

    /// `I(X;Y) = ½[ln det Σ_Y - ln det Σ_Y|X]`.
    pub fn mutual_information(&self) -> Result<f64> {
        Ok(0.5
            * (ln_det_spd(&self.sigma_y, "sigma_y")?
                - ln_det_spd(&self.sigma_y_given_x, "sigma_y_given_x")?))
    }
}

/// `Θ = Σ_YX Σ_X⁻¹` by a Cholesky solve of `Σ_X Θᵀ = Σ_YXᵀ`.
pub fn compute_theta(model: &GaussianModel) -> Result<DMatrix<f64>> {
    let eig = model.sigma_x.symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(DpflError::SingularCovariance(format!(
            "sigma_x has condition number {:e}",
            max / min
        )));
    }
    let factor = SpdFactor::new(&model.sigma_x, "sigma_x")?;
    Ok(factor.solve_right(&model.sigma_yx))
}

/// Covariances induced by a choice of `(A, B, Σ_ζ1, Σ_ζ2)`.
#[derive(Debug, Clone)]
pub struct InducedCovariances {
    pub sigma_t1: DMatrix<f64>,
    pub sigma_t2: DMatrix<f64>,
    pub xi1: DMatrix<f64>,
    pub xi2: DMatrix<f64>,
    pub psi1: DMatrix<f64>,
    pub psi2: DMatrix<f64>,
    pub sigma_x_given_t1: DMatrix<f64>,
    pub sigma_x_given_t2: DMatrix<f64>,
    pub sigma_t2_given_t1: DMatrix<f64>,
    pub sigma_t1_given_t2: DMatrix<f64>,
    pub sigma_x_given_t1t2: DMatrix<f64>,
    pub sigma_y_given_t1t2: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct Factors {
    t1: SpdFactor,
    t2: SpdFactor,
    t2_given_t1: SpdFactor,
    t1_given_t2: SpdFactor,
    y_given_t1t2: SpdFactor,
    z1: SpdFactor,
    z2: SpdFactor,
}

/// Encoder parameters with their induced covariances.
#[derive(Debug, Clone)]
pub struct GaussianState {
    a_mat: DMatrix<f64>,
    b_mat: DMatrix<f64>,
    sigma_z1: DMatrix<f64>,
    sigma_z2: DMatrix<f64>,
    cov: InducedCovariances,
    factors: Factors,
    iteration: usize,
}

impl GaussianState {
    /// Builds a refreshed state from `A` (d1×N_X), `B` (d2×N_X) and the noise covariances.
    pub fn new(
        model: &GaussianModel,
        a_mat: DMatrix<f64>,
        b_mat: DMatrix<f64>,
        sigma_z1: DMatrix<f64>,
        sigma_z2: DMatrix<f64>,
    ) -> Result<Self> {
        let n = model.n_x();
        if a_mat.ncols() != n || b_mat.ncols() != n {
            return Err(DpflError::DimensionMismatch {
                expected: n,
                found: if a_mat.ncols() != n { a_mat.ncols() } else { b_mat.ncols() },
            });
        }
        if sigma_z1.shape() != (a_mat.nrows(), a_mat.nrows())
            || sigma_z2.shape() != (b_mat.nrows(), b_mat.nrows())
        {
            return Err(DpflError::InvalidParams(
                "noise covariances must match the representation dimensions".into(),
            ));
        }
        let (cov, factors) = induced(model, &a_mat, &b_mat, &sigma_z1, &sigma_z2)?;
        Ok(Self {
            a_mat,
            b_mat,
            sigma_z1,
            sigma_z2,
            cov,
            factors,
            iteration: 0,
        })
    }

    pub fn a_mat(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    pub fn b_mat(&self) -> &DMatrix<f64> {
        &self.b_mat
    }

    pub fn sigma_z1(&self) -> &DMatrix<f64> {
        &self.sigma_z1
    }

    pub fn sigma_z2(&self) -> &DMatrix<f64> {
        &self.sigma_z2
    }

    pub fn covariances(&self) -> &InducedCovariances {
        &self.cov
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn d1(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn d2(&self) -> usize {
        self.b_mat.nrows()
    }
}

/// Recomputes every cached covariance of `state` from its encoder parameters.
pub fn refresh_covariances(state: &mut GaussianState, model: &GaussianModel) -> Result<()> {
    let (cov, factors) = induced(model, &state.a_mat, &state.b_mat, &state.sigma_z1, &state.sigma_z2)?;
    state.cov = cov;
    state.factors = factors;
    Ok(())
}

fn induced(
    model: &GaussianModel,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma_z1: &DMatrix<f64>,
    sigma_z2: &DMatrix<f64>,
) -> Result<(InducedCovariances, Factors)> {
    let sx = &model.sigma_x;
    let theta = &model.theta;
    let z1 = SpdFactor::new(sigma_z1, "sigma_z1")?;
    let z2 = SpdFactor::new(sigma_z2, "sigma_z2")?;

    // Σ_X Aᵀ and Σ_X Bᵀ.
    let sxa = sx * a.transpose();
    let sxb = sx * b.transpose();
    let sigma_t1 = symmetrize(&(a * &sxa + sigma_z1));
    let sigma_t2 = symmetrize(&(b * &sxb + sigma_z2));
    let t1 = SpdFactor::new(&sigma_t1, "sigma_t1")?;
    let t2 = SpdFactor::new(&sigma_t2, "sigma_t2")?;

    let sigma_x_given_t1 = symmetrize(&(sx - &sxa * t1.solve(&sxa.transpose())));
    let sigma_x_given_t2 = symmetrize(&(sx - &sxb * t2.solve(&sxb.transpose())));
    let sigma_t2_given_t1 = symmetrize(&(b * &sigma_x_given_t1 * b.transpose() + sigma_z2));
    let sigma_t1_given_t2 = symmetrize(&(a * &sigma_x_given_t2 * a.transpose() + sigma_z1));
    let t2_given_t1 = SpdFactor::new(&sigma_t2_given_t1, "sigma_t2_given_t1")?;
    let t1_given_t2 = SpdFactor::new(&sigma_t1_given_t2, "sigma_t1_given_t2")?;

    let xi1 = t1.solve_right(&(b * &sxa));
    let xi2 = t2.solve_right(&(a * &sxb));

    // Σ_X Aᵀ Σ_T1|T2⁻¹ and Σ_X Bᵀ Σ_T2|T1⁻¹.
    let sxa_c = t1_given_t2.solve_right(&sxa);
    let sxb_c = t2_given_t1.solve_right(&sxb);
    // Σ_X Aᵀ Σ_T1⁻¹ and Σ_X Bᵀ Σ_T2⁻¹.
    let sxa_m = t1.solve_right(&sxa);
    let sxb_m = t2.solve_right(&sxb);
    let psi1 = theta * (&sxa_c - &sxb_c * b * &sxa_m);
    let psi2 = theta * (&sxb_c - &sxa_c * a * &sxb_m);

    let a_sx = a * sx;
    let b_sx = b * sx;
    let sigma_x_given_t1t2 = symmetrize(
        &(sx - &sxa_c * &a_sx + &sxa_c * a * &sxb_m * &b_sx + &sxb_c * b * &sxa_m * &a_sx
            - &sxb_c * &b_sx),
    );
    let sigma_y_given_t1t2 =
        symmetrize(&(theta * &sigma_x_given_t1t2 * theta.transpose() + &model.sigma_y_given_x));
    let y_given_t1t2 = SpdFactor::new(&sigma_y_given_t1t2, "sigma_y_given_t1t2")?;

    Ok((
        InducedCovariances {
            sigma_t1,
            sigma_t2,
            xi1,
            xi2,
            psi1,
            psi2,
            sigma_x_given_t1,
            sigma_x_given_t2,
            sigma_t2_given_t1,
            sigma_t1_given_t2,
            sigma_x_given_t1t2,
            sigma_y_given_t1t2,
        },
        Factors {
            t1,
            t2,
            t2_given_t1,
            t1_given_t2,
            y_given_t1t2,
            z1,
            z2,
        },
    ))
}

/// `Σ_X|T1` through the matrix inversion lemma, `(Σ_X⁻¹ + Aᵀ Σ_ζ1⁻¹ A)⁻¹`.
pub fn sigma_x_given_t1_lemma(state: &GaussianState, model: &GaussianModel) -> Result<DMatrix<f64>> {
    let sx_inv = SpdFactor::new(&model.sigma_x, "sigma_x")?.inverse();
    let precision = symmetrize(&(sx_inv + state.a_mat.transpose() * state.factors.z1.solve(&state.a_mat)));
    Ok(SpdFactor::new(&precision, "posterior precision of X given T1")?.inverse())
}

/// `I(T1;T2)` from the joint covariance of `(T1, T2)`:
/// `½[ln det Σ_T1 + ln det Σ_T2 - ln det Σ_(T1,T2)]`.
pub fn mutual_information_t1t2_joint(state: &GaussianState, model: &GaussianModel) -> Result<f64> {
    let (d1, d2) = (state.d1(), state.d2());
    let cov = &state.cov;
    let mut joint = DMatrix::zeros(d1 + d2, d1 + d2);
    joint.view_mut((0, 0), (d1, d1)).copy_from(&cov.sigma_t1);
    joint.view_mut((d1, d1), (d2, d2)).copy_from(&cov.sigma_t2);
    // Cov(T2, T1) = B Σ_X Aᵀ.
    let cross = &state.b_mat * &model.sigma_x * state.a_mat.transpose();
    joint.view_mut((d1, 0), (d2, d1)).copy_from(&cross);
    joint.view_mut((0, d1), (d1, d2)).copy_from(&cross.transpose());
    Ok(0.5
        * (ln_det_spd(&cov.sigma_t1, "sigma_t1")? + ln_det_spd(&cov.sigma_t2, "sigma_t2")?
            - ln_det_spd(&symmetrize(&joint), "joint covariance of T1, T2")?))
}

/// Exact information terms and the Lagrangian value of a refreshed state.
pub fn gaussian_info(
    state: &GaussianState,
    model: &GaussianModel,
    params: &LagrangeParams,
) -> Result<InfoReport> {
    let f = &state.factors;
    let i_x_t1 = 0.5 * (f.t1.ln_det() - f.z1.ln_det());
    let i_x_t2 = 0.5 * (f.t2.ln_det() - f.z2.ln_det());
    let i_t1_t2 = 0.5 * (f.t2.ln_det() - f.t2_given_t1.ln_det());
    let i_y_t1t2 =
        0.5 * (ln_det_spd(&model.sigma_y, "sigma_y")? - f.y_given_t1t2.ln_det());
    for (v, name) in [
        (i_x_t1, "I(X;T1)"),
        (i_x_t2, "I(X;T2)"),
        (i_t1_t2, "I(T1;T2)"),
        (i_y_t1t2, "I(Y;T1,T2)"),
    ] {
        if !v.is_finite() {
            return Err(DpflError::SingularCovariance(format!("{name} is not finite")));
        }
    }
    Ok(InfoReport::from_terms(i_x_t1, i_x_t2, i_t1_t2, i_y_t1t2, params))
}

/// One pass of the coupled updates.
///
/// In order: the noise precision of `T1` and then `A` from iteration-`t`
/// quantities (with `B` at `t`); the noise precision of `T2` from
/// iteration-`t` quantities; `B` with the freshly updated `A`. The caches
/// are refreshed once at the end.
pub fn update_step(
    state: &mut GaussianState,
    model: &GaussianModel,
    params: &LagrangeParams,
) -> Result<()> {
    let cov = &state.cov;
    let f = &state.factors;
    let theta = &model.theta;
    let (beta, lambda, gamma) = (params.beta, params.lambda, params.gamma);

    let inv_t1 = f.t1.inverse();
    let inv_t2 = f.t2.inverse();
    // Σ_Y|T1,T2⁻¹ ψ1 and Σ_Y|T1,T2⁻¹ ψ2.
    let y_psi1 = f.y_given_t1t2.solve(&cov.psi1);
    let y_psi2 = f.y_given_t1t2.solve(&cov.psi2);
    // Σ_T2|T1⁻¹ ξ1 and Σ_T1|T2⁻¹ ξ2.
    let c21_xi1 = f.t2_given_t1.solve(&cov.xi1);
    let c12_xi2 = f.t1_given_t2.solve(&cov.xi2);

    let precision1 = symmetrize(
        &(inv_t1 - (cov.xi1.transpose() * &c21_xi1) * (gamma / beta)
            + (cov.psi1.transpose() * &y_psi1) / beta),
    );
    let p1 = SpdFactor::new(&precision1, "noise precision of T1")?;
    let rhs1 = -(c21_xi1.transpose() * &state.b_mat) * (gamma / beta)
        + y_psi1.transpose() * (theta - &cov.psi2 * &state.b_mat) / beta;
    let a_next = p1.solve(&rhs1);
    let sigma_z1_next = p1.inverse();

    let precision2 = symmetrize(
        &(inv_t2 - (cov.xi2.transpose() * &c12_xi2) * (gamma / lambda)
            + (cov.psi2.transpose() * &y_psi2) / lambda),
    );
    let p2 = SpdFactor::new(&precision2, "noise precision of T2")?;
    let rhs2 = -(c12_xi2.transpose() * &a_next) * (gamma / lambda)
        + y_psi2.transpose() * (theta - &cov.psi1 * &a_next) / lambda;
    let b_next = p2.solve(&rhs2);
    let sigma_z2_next = p2.inverse();

    let (cov, factors) = induced(model, &a_next, &b_next, &sigma_z1_next, &sigma_z2_next)?;
    state.a_mat = a_next;
    state.b_mat = b_next;
    state.sigma_z1 = sigma_z1_next;
    state.sigma_z2 = sigma_z2_next;
    state.cov = cov;
    state.factors = factors;
    state.iteration += 1;
    Ok(())
}

/// Seeded start: `A`, `B` with independent `N(0, 0.1²)` entries, unit noise.
pub fn init_gaussian_state(
    model: &GaussianModel,
    d1: usize,
    d2: usize,
    seed: u64,
) -> Result<GaussianState> {
    if d1 == 0 || d2 == 0 {
        return Err(DpflError::InvalidParams(
            "representation dimensions must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| {
        DMatrix::from_fn(rows, model.n_x(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            INIT_SCALE * z
        })
    };
    let a = draw(d1);
    let b = draw(d2);
    GaussianState::new(model, a, b, DMatrix::identity(d1, d1), DMatrix::identity(d2, d2))
}

/// Result of one Gaussian solve.
#[derive(Debug, Clone)]
pub struct GaussianSolution {
    pub state: GaussianState,
    pub report: InfoReport,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub warnings: Vec<SolverWarning>,
}

/// Iterates [`update_step`] until the functional changes by less than `options.tol`.
///
/// A rise of the functional is recorded as a warning and never stops the run.
pub fn solve_gaussian(
    model: &GaussianModel,
    d1: usize,
    d2: usize,
    params: &LagrangeParams,
    options: &SolveOptions,
) -> Result<GaussianSolution> {
    params.validate()?;
    options.validate()?;
    let mut state = init_gaussian_state(model, d1, d2, options.seed)?;
    let mut report = gaussian_info(&state, model, params)?;
    let mut trace = vec![report.functional_value];
    let mut warnings = Vec::new();
    let mut converged = false;

    for iteration in 1..=options.max_iter {
        update_step(&mut state, model, params)?;
        let previous = report.functional_value;
        report = gaussian_info(&state, model, params)?;
        trace.push(report.functional_value);
        let delta = report.functional_value - previous;
        if delta > MONOTONE_SLACK {
            warnings.push(SolverWarning::NonMonotone {
                iteration,
                increase: delta,
            });
        }
        if delta.abs() < options.tol {
            converged = true;
            break;
        }
    }

    Ok(GaussianSolution {
        iterations: state.iteration,
        state,
        report,
        trace,
        converged,
        seed: options.seed,
        warnings,
    })
}

/// Best of `options.restarts` seeded solves by functional value.
pub fn solve_gaussian_best_of(
    model: &GaussianModel,
    d1: usize,
    d2: usize,
    params: &LagrangeParams,
    options: &SolveOptions,
) -> Result<GaussianSolution> {
    options.validate()?;
    let mut best: Option<GaussianSolution> = None;
    let mut last_err = None;
    for restart in 0..options.restarts {
        let run = SolveOptions {
            seed: restart_seed(options.seed, restart),
            ..*options
        };
        match solve_gaussian(model, d1, d2, params, &run) {
            Ok(solution) => {
                if best
                    .as_ref()
                    .is_none_or(|b| solution.report.functional_value < b.report.functional_value)
                {
                    best = Some(solution);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart"))
}

/// Central-difference gradient of the functional with respect to every
/// entry of `A`, `B` and the lower Cholesky factors of `Σ_ζ1`, `Σ_ζ2`.
pub fn functional_gradient(
    state: &GaussianState,
    model: &GaussianModel,
    params: &LagrangeParams,
    h: f64,
) -> Result<Vec<f64>> {
    let l1 = state.factors.z1.lower();
    let l2 = state.factors.z2.lower();
    let eval = |a: &DMatrix<f64>, b: &DMatrix<f64>, l1: &DMatrix<f64>, l2: &DMatrix<f64>| {
        let s = GaussianState::new(
            model,
            a.clone(),
            b.clone(),
            l1 * l1.transpose(),
            l2 * l2.transpose(),
        )?;
        Ok::<f64, DpflError>(gaussian_info(&s, model, params)?.functional_value)
    };

    let mut grad = Vec::new();
    let mut central = |bump: &dyn Fn(f64) -> Result<f64>| -> Result<()> {
        grad.push((bump(h)? - bump(-h)?) / (2.0 * h));
        Ok(())
    };
    for k in 0..state.a_mat.len() {
        central(&|s| {
            let mut a = state.a_mat.clone();
            a[k] += s;
            eval(&a, &state.b_mat, &l1, &l2)
        })?;
    }
    for k in 0..state.b_mat.len() {
        central(&|s| {
            let mut b = state.b_mat.clone();
            b[k] += s;
            eval(&state.a_mat, &b, &l1, &l2)
        })?;
    }
    for (which, l) in [(0, &l1), (1, &l2)] {
        for j in 0..l.ncols() {
            for i in j..l.nrows() {
                central(&|s| {
                    let mut lp = l.clone();
                    lp[(i, j)] += s;
                    if which == 0 {
                        eval(&state.a_mat, &state.b_mat, &lp, &l2)
                    } else {
                        eval(&state.a_mat, &state.b_mat, &l1, &lp)
                    }
                })?;
            }
        }
    }
    Ok(grad)
}
