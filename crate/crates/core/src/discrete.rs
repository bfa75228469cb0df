//! Alternating fixed-point solver for discrete alphabets.
//!
//! Two stochastic encoders `p(T1|X)` and `p(T2|X)` are updated in turn with
//! exponential-family rules, Blahut–Arimoto style. Between the two encoder
//! updates every induced table (marginals, cross conditionals, the Bayes
//! posterior `p(X|T1,T2)` and the decoder `p(Y|T1,T2)`) is recomputed from the
//! fresh encoders.
//!
//! The decoder table is indexed by the flattened cell `t1 * |T2| + t2`.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpflError, Result};
use crate::prob::{
    bayes_invert_floored, kl_divergence_floored, mutual_information, normalize_rows_floored,
    ConditionalTable, Distribution, JointSource, PROB_FLOOR,
};
use crate::report::InfoReport;
use crate::seed::restart_seed;

/// Half-width of the multiplicative perturbation applied to uniform initial encoders.
pub const INIT_PERTURBATION: f64 = 0.1;

/// Slack allowed before a functional increase is reported as non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Lagrange multipliers of the relaxed problem plus optional advisory targets.
///
/// The solver only consumes `beta`, `lambda` and `gamma`. The targets are
/// carried along so frontier queries can be answered after a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeParams {
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl LagrangeParams {
    pub fn new(beta: f64, lambda: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            beta,
            lambda,
            gamma,
            r1: None,
            r2: None,
            epsilon: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(DpflError::InvalidParams(format!("{name} must be positive, got {v}")))
            }
        };
        positive("beta", self.beta)?;
        positive("lambda", self.lambda)?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(DpflError::InvalidParams(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        for (name, target) in [("r1", self.r1), ("r2", self.r2), ("epsilon", self.epsilon)] {
            if let Some(v) = target {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(DpflError::InvalidParams(format!(
                        "{name} must be nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Encoders and every table induced by them.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    enc1: ConditionalTable,
    enc2: ConditionalTable,
    marg1: Distribution,
    marg2: Distribution,
    cond_21: ConditionalTable,
    cond_12: ConditionalTable,
    posterior: ConditionalTable,
    decoder: ConditionalTable,
    iteration: usize,
}

impl SolverState {
    /// Builds a refreshed state from two encoders `p(T1|X)`, `p(T2|X)`.
    pub fn from_encoders(
        source: &JointSource,
        enc1: ConditionalTable,
        enc2: ConditionalTable,
    ) -> Result<Self> {
        for enc in [&enc1, &enc2] {
            if enc.row_size() != source.card_x() {
                return Err(DpflError::DimensionMismatch {
                    expected: source.card_x(),
                    found: enc.row_size(),
                });
            }
        }
        let (c1, c2) = (enc1.col_size(), enc2.col_size());
        let mut state = Self {
            marg1: Distribution::uniform(c1),
            marg2: Distribution::uniform(c2),
            cond_21: ConditionalTable::from_raw(DMatrix::zeros(c1, c2)),
            cond_12: ConditionalTable::from_raw(DMatrix::zeros(c2, c1)),
            posterior: ConditionalTable::from_raw(DMatrix::zeros(c1 * c2, source.card_x())),
            decoder: ConditionalTable::from_raw(DMatrix::zeros(c1 * c2, source.card_y())),
            enc1,
            enc2,
            iteration: 0,
        };
        refresh_induced(&mut state, source);
        Ok(state)
    }

    pub fn card_t1(&self) -> usize {
        self.enc1.col_size()
    }

    pub fn card_t2(&self) -> usize {
        self.enc2.col_size()
    }

    /// `p(T1|X)`, one row per `x`.
    pub fn enc1(&self) -> &ConditionalTable {
        &self.enc1
    }

    /// `p(T2|X)`, one row per `x`.
    pub fn enc2(&self) -> &ConditionalTable {
        &self.enc2
    }

    pub fn marg1(&self) -> &Distribution {
        &self.marg1
    }

    pub fn marg2(&self) -> &Distribution {
        &self.marg2
    }

    /// `p(T2|T1)`, one row per `t1`.
    pub fn cond_21(&self) -> &ConditionalTable {
        &self.cond_21
    }

    /// `p(T1|T2)`, one row per `t2`.
    pub fn cond_12(&self) -> &ConditionalTable {
        &self.cond_12
    }

    /// `p(X|T1,T2)`, one row per cell `t1 * |T2| + t2`.
    pub fn posterior(&self) -> &ConditionalTable {
        &self.posterior
    }

    /// `p(Y|T1,T2)`, one row per cell `t1 * |T2| + t2`.
    pub fn decoder(&self) -> &ConditionalTable {
        &self.decoder
    }

    pub fn cell(&self, t1: usize, t2: usize) -> usize {
        t1 * self.card_t2() + t2
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Replaces `p(T1|X)` and recomputes the induced tables.
    pub fn set_enc1(&mut self, enc1: ConditionalTable, source: &JointSource) {
        debug_assert_eq!(enc1.col_size(), self.card_t1());
        self.enc1 = enc1;
        refresh_induced(self, source);
    }

    /// Replaces `p(T2|X)` and recomputes the induced tables.
    pub fn set_enc2(&mut self, enc2: ConditionalTable, source: &JointSource) {
        debug_assert_eq!(enc2.col_size(), self.card_t2());
        self.enc2 = enc2;
        refresh_induced(self, source);
    }
}

/// Seeded starting point: uniform encoder rows perturbed by independent
/// factors drawn from `[1 - 0.1, 1 + 0.1]`, then renormalized.
pub fn init_state(
    source: &JointSource,
    card_t1: usize,
    card_t2: usize,
    seed: u64,
) -> Result<SolverState> {
    if card_t1 == 0 || card_t2 == 0 {
        return Err(DpflError::InvalidParams(
            "representation cardinalities must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = |cols: usize| {
        let weights = DMatrix::from_fn(source.card_x(), cols, |_, _| {
            rng.random_range(1.0 - INIT_PERTURBATION..=1.0 + INIT_PERTURBATION) / cols as f64
        });
        ConditionalTable::from_raw(normalize_rows_floored(weights))
    };
    let enc1 = perturbed(card_t1);
    let enc2 = perturbed(card_t2);
    SolverState::from_encoders(source, enc1, enc2)
}

/// Recomputes the marginals, the cross conditionals `p(T2|T1)`, `p(T1|T2)`,
/// the Bayes posterior `p(X|T1,T2) ∝ p(X) p(T1|X) p(T2|X)` and the decoder
/// `p(Y|T1,T2) = Σ_x p(Y|x) p(x|T1,T2)`.
///
/// Zero-mass conditioning events get a uniform posterior (entries floored at
/// [`PROB_FLOOR`] and renormalized); they carry no probability, so the choice
/// never changes an information term.
pub fn refresh_induced(state: &mut SolverState, source: &JointSource) {
    let p_x = source.p_x();
    state.marg1 = state.enc1.push_forward(p_x);
    state.marg2 = state.enc2.push_forward(p_x);

    let x_given_t1 = bayes_invert_floored(&state.enc1, p_x);
    let x_given_t2 = bayes_invert_floored(&state.enc2, p_x);
    state.cond_21 = ConditionalTable::from_raw(x_given_t1.matrix() * state.enc2.matrix());
    state.cond_12 = ConditionalTable::from_raw(x_given_t2.matrix() * state.enc1.matrix());

    let (c1, c2) = (state.card_t1(), state.card_t2());
    let card_x = source.card_x();
    let weights = DMatrix::from_fn(c1 * c2, card_x, |cell, x| {
        let (t1, t2) = (cell / c2, cell % c2);
        p_x[x] * state.enc1[(x, t1)] * state.enc2[(x, t2)]
    });
    let posterior = normalize_rows_floored(weights);
    state.decoder = ConditionalTable::from_raw(&posterior * source.p_y_given_x().matrix());
    state.posterior = ConditionalTable::from_raw(posterior);
}

fn rows_of(table: &ConditionalTable) -> Vec<Vec<f64>> {
    (0..table.row_size()).map(|i| table.row(i)).collect()
}

/// Normalizes a row of log-weights in place, subtracting the row maximum first.
fn softmax_row(logits: &mut [f64], row: usize) -> Result<()> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || logits.iter().any(|v| v.is_nan()) {
        return Err(DpflError::NonFiniteExponent { row });
    }
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
    Ok(())
}

/// Which of the two agents an encoder update targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Agent {
    First,
    Second,
}

fn update_encoder(
    state: &SolverState,
    source: &JointSource,
    params: &LagrangeParams,
    agent: Agent,
) -> Result<ConditionalTable> {
    let (own, other, marg, cross, weight) = match agent {
        Agent::First => (
            state.card_t1(),
            &state.enc2,
            &state.marg1,
            &state.cond_21,
            params.beta,
        ),
        Agent::Second => (
            state.card_t2(),
            &state.enc1,
            &state.marg2,
            &state.cond_12,
            params.lambda,
        ),
    };
    let other_card = other.col_size();
    let cross_rows = rows_of(cross);
    let decoder_rows = rows_of(&state.decoder);
    let y_rows = rows_of(source.p_y_given_x());
    let cell = |t: usize, u: usize| match agent {
        Agent::First => state.cell(t, u),
        Agent::Second => state.cell(u, t),
    };

    let mut out = DMatrix::zeros(source.card_x(), own);
    let mut logits = vec![0.0; own];
    for x in 0..source.card_x() {
        let other_row = other.row(x);
        for (t, logit) in logits.iter_mut().enumerate() {
            if marg[t] <= 0.0 {
                *logit = f64::NEG_INFINITY;
                continue;
            }
            let leakage = kl_divergence_floored(&other_row, &cross_rows[t], PROB_FLOOR);
            let distortion: f64 = (0..other_card)
                .filter(|&u| other_row[u] > 0.0)
                .map(|u| {
                    other_row[u]
                        * kl_divergence_floored(&y_rows[x], &decoder_rows[cell(t, u)], PROB_FLOOR)
                })
                .sum();
            *logit = marg[t].ln() + (params.gamma / weight) * leakage - distortion / weight;
        }
        softmax_row(&mut logits, x)?;
        for (t, &v) in logits.iter().enumerate() {
            out[(x, t)] = v;
        }
    }
    Ok(ConditionalTable::from_raw(out))
}

/// Self-consistent update of `p(T1|X)`:
///
/// `p(t1|x) ∝ p(t1) exp{ (γ/β) D[p(T2|x) ‖ p(T2|t1)] - (1/β) Σ_t2 p(t2|x) D[p(Y|x) ‖ p(Y|t1,t2)] }`
pub fn update_encoder_1(
    state: &SolverState,
    source: &JointSource,
    params: &LagrangeParams,
) -> Result<ConditionalTable> {
    update_encoder(state, source, params, Agent::First)
}

/// Mirror of [`update_encoder_1`] for `p(T2|X)` with `λ` in place of `β`.
pub fn update_encoder_2(
    state: &SolverState,
    source: &JointSource,
    params: &LagrangeParams,
) -> Result<ConditionalTable> {
    update_encoder(state, source, params, Agent::Second)
}

/// `I(X;T1)`, `I(X;T2)`, `I(T1;T2)`, `I(Y;T1,T2)` and the Lagrangian value,
/// each computed from its exact joint table.
pub fn evaluate_functional(
    state: &SolverState,
    source: &JointSource,
    params: &LagrangeParams,
) -> InfoReport {
    let p_x = source.p_x();
    let (c1, c2) = (state.card_t1(), state.card_t2());
    let i_x_t1 = mutual_information(&state.enc1.joint_with(p_x));
    let i_x_t2 = mutual_information(&state.enc2.joint_with(p_x));

    let t1t2 = state.enc1.joint_with(p_x).transpose() * state.enc2.matrix();
    let i_t1_t2 = mutual_information(&t1t2);

    let joint = source.joint();
    let cell_y = DMatrix::from_fn(c1 * c2, source.card_y(), |cell, y| {
        let (t1, t2) = (cell / c2, cell % c2);
        (0..source.card_x())
            .map(|x| joint[(x, y)] * state.enc1[(x, t1)] * state.enc2[(x, t2)])
            .sum()
    });
    let i_y_t1t2 = mutual_information(&cell_y);
    InfoReport::from_terms(i_x_t1, i_x_t2, i_t1_t2, i_y_t1t2, params)
}

/// Both sides of `-I(Y;T1,T2) = -I(X;Y) + E_x E_{t1|x} E_{t2|x} D[p(Y|x) ‖ p(Y|t1,t2)]`,
/// the right side using the state's decoder table.
pub fn prediction_decomposition(state: &SolverState, source: &JointSource) -> (f64, f64) {
    let lhs = -evaluate_functional(state, source, &LagrangeParams::new(1.0, 1.0, 0.0).unwrap())
        .i_y_t1t2;
    let decoder_rows = rows_of(&state.decoder);
    let y_rows = rows_of(source.p_y_given_x());
    let mut expected_kl = 0.0;
    for x in 0..source.card_x() {
        for t1 in 0..state.card_t1() {
            for t2 in 0..state.card_t2() {
                let w = source.p_x()[x] * state.enc1[(x, t1)] * state.enc2[(x, t2)];
                if w > 0.0 {
                    expected_kl += w
                        * kl_divergence_floored(
                            &y_rows[x],
                            &decoder_rows[state.cell(t1, t2)],
                            PROB_FLOOR,
                        );
                }
            }
        }
    }
    (lhs, -source.mutual_information() + expected_kl)
}

/// How an encoder proposal from the self-consistent update is accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Always take the proposal. The functional can rise when `gamma > 0`.
    Plain,
    /// Take the proposal when it does not raise the functional, otherwise
    /// backtrack along the segment towards the previous encoder by halving.
    /// Fixed points are unchanged: a stationary encoder maps to itself.
    #[default]
    Safeguarded,
}

/// Convergence controls shared by the discrete and Gaussian solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Discrete solver only.
    #[serde(default)]
    pub step_rule: StepRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            seed: 0,
            restarts: 1,
            step_rule: StepRule::Safeguarded,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(DpflError::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(DpflError::InvalidParams("max_iter must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(DpflError::InvalidParams("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Non-fatal observations made while iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverWarning {
    /// The functional rose by `increase` at `iteration`.
    NonMonotone { iteration: usize, increase: f64 },
}

/// Result of one discrete solve.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub state: SolverState,
    pub report: InfoReport,
    /// Functional value before the first iteration and after each one.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub warnings: Vec<SolverWarning>,
}

/// Halvings tried before a safeguarded step gives up and keeps the old encoder.
const MAX_BACKTRACK: usize = 40;

/// Largest L1 distance between corresponding rows of two tables.
pub fn max_row_change(a: &ConditionalTable, b: &ConditionalTable) -> f64 {
    (0..a.row_size())
        .map(|i| {
            (0..a.col_size())
                .map(|j| (a[(i, j)] - b[(i, j)]).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Installs `proposal` as the encoder of `agent` according to `rule`.
/// Returns the new functional value and the accepted step fraction.
fn apply_step(
    state: &mut SolverState,
    source: &JointSource,
    params: &LagrangeParams,
    agent: Agent,
    proposal: ConditionalTable,
    current: f64,
    rule: StepRule,
) -> (f64, f64) {
    let install = |s: &mut SolverState, enc: ConditionalTable| match agent {
        Agent::First => s.set_enc1(enc, source),
        Agent::Second => s.set_enc2(enc, source),
    };
    let previous = match agent {
        Agent::First => state.enc1.clone(),
        Agent::Second => state.enc2.clone(),
    };
    let mut candidate = state.clone();
    install(&mut candidate, proposal.clone());
    let value = evaluate_functional(&candidate, source, params).functional_value;
    if rule == StepRule::Plain || value <= current {
        *state = candidate;
        return (value, 1.0);
    }

    let mut alpha = 0.5;
    for _ in 0..MAX_BACKTRACK {
        let mixed = previous.matrix() * (1.0 - alpha) + proposal.matrix() * alpha;
        install(&mut candidate, ConditionalTable::from_raw(mixed));
        let value = evaluate_functional(&candidate, source, params).functional_value;
        if value <= current {
            *state = candidate;
            return (value, alpha);
        }
        alpha *= 0.5;
    }
    (current, 0.0)
}

/// Runs the alternating updates from one seeded start.
///
/// Each iteration updates `p(T1|X)`, refreshes the induced tables, updates
/// `p(T2|X)`, refreshes again and evaluates the functional. Iteration stops
/// once the functional changes by less than `options.tol` and no encoder row
/// moved by more than `options.tol` in L1.
pub fn solve(
    source: &JointSource,
    card_t1: usize,
    card_t2: usize,
    params: &LagrangeParams,
    options: &SolveOptions,
) -> Result<DiscreteSolution> {
    params.validate()?;
    options.validate()?;
    let mut state = init_state(source, card_t1, card_t2, options.seed)?;
    let mut value = evaluate_functional(&state, source, params).functional_value;
    let mut trace = vec![value];
    let mut warnings = Vec::new();
    let mut converged = false;

    for iteration in 1..=options.max_iter {
        let (old1, old2) = (state.enc1.clone(), state.enc2.clone());
        let previous = value;

        let proposal = update_encoder_1(&state, source, params)?;
        let (mid, _) = apply_step(
            &mut state,
            source,
            params,
            Agent::First,
            proposal,
            value,
            options.step_rule,
        );
        let proposal = update_encoder_2(&state, source, params)?;
        (value, _) = apply_step(
            &mut state,
            source,
            params,
            Agent::Second,
            proposal,
            mid,
            options.step_rule,
        );
        state.iteration = iteration;
        trace.push(value);

        let delta = value - previous;
        if delta > MONOTONE_SLACK {
            warnings.push(SolverWarning::NonMonotone {
                iteration,
                increase: delta,
            });
        }
        let moved = max_row_change(&old1, &state.enc1).max(max_row_change(&old2, &state.enc2));
        if delta.abs() < options.tol && moved < options.tol {
            converged = true;
            break;
        }
    }

    let report = evaluate_functional(&state, source, params);
    Ok(DiscreteSolution {
        iterations: state.iteration,
        state,
        report,
        trace,
        converged,
        seed: options.seed,
        warnings,
    })
}

/// Runs `options.restarts` seeded solves and keeps the lowest functional.
pub fn solve_best_of(
    source: &JointSource,
    card_t1: usize,
    card_t2: usize,
    params: &LagrangeParams,
    options: &SolveOptions,
) -> Result<DiscreteSolution> {
    options.validate()?;
    let mut best: Option<DiscreteSolution> = None;
    for restart in 0..options.restarts {
        let run = SolveOptions {
            seed: restart_seed(options.seed, restart),
            ..*options
        };
        let solution = solve(source, card_t1, card_t2, params, &run)?;
        let better = best
            .as_ref()
            .is_none_or(|b| solution.report.functional_value < b.report.functional_value);
        if better {
            best = Some(solution);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Finite-difference agreement of the analytic encoder derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    /// Largest relative discrepancy over every checked term and direction.
    pub max_rel_error: f64,
    pub i_t1_t2: f64,
    pub i_x_t1: f64,
    pub i_y_t1t2: f64,
    pub functional: f64,
    /// Largest finite-difference change of `I(X;T2)`, which must vanish.
    pub i_x_t2_abs: f64,
    pub directions: usize,
}

/// Relative errors are measured against `max(|analytic|, |numeric|, this)`.
pub const DERIVATIVE_ABS_FLOOR: f64 = 1e-6;

/// Analytic derivatives of the information terms with respect to `p(t1|x)`,
/// up to terms that depend on `x` only (those vanish on the simplex tangent).
struct AnalyticGradient {
    i_t1_t2: DMatrix<f64>,
    i_x_t1: DMatrix<f64>,
    i_y_t1t2: DMatrix<f64>,
}

fn analytic_gradient(state: &SolverState, source: &JointSource) -> AnalyticGradient {
    let (card_x, c1) = (source.card_x(), state.card_t1());
    let p_x = source.p_x();
    let marg2 = state.marg2.probs().to_vec();
    let cross_rows = rows_of(&state.cond_21);
    let decoder_rows = rows_of(&state.decoder);
    let y_rows = rows_of(source.p_y_given_x());
    // p(Y|t2) for the x-only term of the prediction derivative.
    let y_given_t2 = bayes_invert_floored(&state.enc2, p_x).matrix() * source.p_y_given_x().matrix();
    let y_given_t2: Vec<Vec<f64>> = (0..state.card_t2())
        .map(|t| y_given_t2.row(t).iter().copied().collect())
        .collect();

    let mut g12 = DMatrix::zeros(card_x, c1);
    let mut g1 = DMatrix::zeros(card_x, c1);
    let mut gy = DMatrix::zeros(card_x, c1);
    for x in 0..card_x {
        let row2 = state.enc2.row(x);
        let to_marginal = kl_divergence_floored(&row2, &marg2, PROB_FLOOR);
        let via_t2: f64 = (0..state.card_t2())
            .map(|t2| row2[t2] * kl_divergence_floored(&y_rows[x], &y_given_t2[t2], PROB_FLOOR))
            .sum();
        for t1 in 0..c1 {
            g12[(x, t1)] = p_x[x]
                * (to_marginal - kl_divergence_floored(&row2, &cross_rows[t1], PROB_FLOOR));
            let ratio = state.enc1[(x, t1)] / state.marg1[t1].max(PROB_FLOOR);
            g1[(x, t1)] = p_x[x] * ratio.max(PROB_FLOOR).ln();
            let expected: f64 = (0..state.card_t2())
                .map(|t2| {
                    row2[t2]
                        * kl_divergence_floored(
                            &y_rows[x],
                            &decoder_rows[state.cell(t1, t2)],
                            PROB_FLOOR,
                        )
                })
                .sum();
            gy[(x, t1)] = p_x[x] * (via_t2 - expected);
        }
    }
    AnalyticGradient {
        i_t1_t2: g12,
        i_x_t1: g1,
        i_y_t1t2: gy,
    }
}

/// Compares the analytic derivatives of `I(T1;T2)`, `I(T1;X)` and
/// `I(Y;T1,T2)` with respect to `p(T1|X)` against central differences.
///
/// Every direction is `e_a - e_b` inside one encoder row, which stays on the
/// probability simplex; directions that would leave it are skipped.
pub fn check_derivative_identities(
    state: &SolverState,
    source: &JointSource,
    params: &LagrangeParams,
    h: f64,
) -> Result<DerivativeCheck> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(DpflError::InvalidParams(format!(
            "finite-difference step must lie in [1e-7, 1e-4], got {h}"
        )));
    }
    params.validate()?;
    let grad = analytic_gradient(state, source);
    let perturbed = |x: usize, a: usize, b: usize, step: f64| {
        let mut m = state.enc1.matrix().clone();
        m[(x, a)] += step;
        m[(x, b)] -= step;
        let mut s = state.clone();
        s.set_enc1(ConditionalTable::from_raw(m), source);
        evaluate_functional(&s, source, params)
    };
    let rel = |analytic: f64, numeric: f64| {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DERIVATIVE_ABS_FLOOR)
    };

    let mut check = DerivativeCheck {
        max_rel_error: 0.0,
        i_t1_t2: 0.0,
        i_x_t1: 0.0,
        i_y_t1t2: 0.0,
        functional: 0.0,
        i_x_t2_abs: 0.0,
        directions: 0,
    };
    let c1 = state.card_t1();
    for x in 0..source.card_x() {
        for a in 0..c1 {
            for b in (a + 1)..c1 {
                if state.enc1[(x, a)] < 2.0 * h || state.enc1[(x, b)] < 2.0 * h {
                    continue;
                }
                let plus = perturbed(x, a, b, h);
                let minus = perturbed(x, a, b, -h);
                let fd = |f: fn(&InfoReport) -> f64| (f(&plus) - f(&minus)) / (2.0 * h);
                let dir = |g: &DMatrix<f64>| g[(x, a)] - g[(x, b)];

                let d12 = dir(&grad.i_t1_t2);
                let d1 = dir(&grad.i_x_t1);
                let dy = dir(&grad.i_y_t1t2);
                let df = -dy + params.beta * d1 + params.gamma * d12;

                check.i_t1_t2 = check.i_t1_t2.max(rel(d12, fd(|r| r.i_t1_t2)));
                check.i_x_t1 = check.i_x_t1.max(rel(d1, fd(|r| r.i_x_t1)));
                check.i_y_t1t2 = check.i_y_t1t2.max(rel(dy, fd(|r| r.i_y_t1t2)));
                check.functional = check.functional.max(rel(df, fd(|r| r.functional_value)));
                check.i_x_t2_abs = check.i_x_t2_abs.max(fd(|r| r.i_x_t2).abs());
                check.directions += 1;
            }
        }
    }
    check.max_rel_error = check
        .i_t1_t2
        .max(check.i_x_t1)
        .max(check.i_y_t1t2)
        .max(check.functional);
    Ok(check)
}
