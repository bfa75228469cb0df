//! Discrete probability containers and information measures.
//!
//! Everything here is measured in nats. `0 ln 0` is taken to be `0`
//! throughout, so degenerate distributions need no special casing by callers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DpflError, Result};

/// Tolerance on `Σ p = 1` for user-facing containers.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Floor substituted for zero denominators inside solver loops.
pub const PROB_FLOOR: f64 = 1e-12;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(DpflError::InvalidDistribution("empty support".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(DpflError::InvalidDistribution(format!(
                    "entry {i} is {p}, expected a finite nonnegative value"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(DpflError::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(DpflError::InvalidDistribution(format!(
                "weights must be nonnegative with positive finite total, got total {total}"
            )));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs a nonempty support");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    // Skips validation; used for marginals of tables that are already valid.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Row-stochastic table: entry `(i, j)` is `p(column j | row i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    table: DMatrix<f64>,
}

impl ConditionalTable {
    pub fn new(table: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(table, SUM_TOLERANCE)
    }

    pub fn with_tolerance(table: DMatrix<f64>, tol: f64) -> Result<Self> {
        if table.nrows() == 0 || table.ncols() == 0 {
            return Err(DpflError::InvalidDistribution("empty conditional table".into()));
        }
        for i in 0..table.nrows() {
            let mut total = 0.0;
            for j in 0..table.ncols() {
                let v = table[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(DpflError::InvalidDistribution(format!(
                        "cell ({i}, {j}) is {v}, expected a finite nonnegative value"
                    )));
                }
                total += v;
            }
            if (total - 1.0).abs() > tol {
                return Err(DpflError::InvalidDistribution(format!(
                    "row {i} sums to {total}, expected 1"
                )));
            }
        }
        Ok(Self { table })
    }

    /// Normalizes each row of a nonnegative weight matrix.
    pub fn from_weights(mut table: DMatrix<f64>) -> Result<Self> {
        for i in 0..table.nrows() {
            let total: f64 = table.row(i).sum();
            if !(total.is_finite() && total > 0.0) {
                return Err(DpflError::InvalidDistribution(format!(
                    "row {i} has total weight {total}"
                )));
            }
            table.row_mut(i).unscale_mut(total);
        }
        Self::new(table)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            table: DMatrix::identity(n, n),
        }
    }

    pub(crate) fn from_raw(table: DMatrix<f64>) -> Self {
        Self { table }
    }

    pub fn row_size(&self) -> usize {
        self.table.nrows()
    }

    pub fn col_size(&self) -> usize {
        self.table.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.table
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.table
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.table.row(i).iter().copied().collect()
    }

    /// Joint table `p(row, col) = prior(row) · p(col | row)`.
    pub fn joint_with(&self, prior: &Distribution) -> DMatrix<f64> {
        let mut joint = self.table.clone();
        for i in 0..joint.nrows() {
            joint.row_mut(i).scale_mut(prior[i]);
        }
        joint
    }

    /// Marginal of the column variable under `prior` on rows.
    pub fn push_forward(&self, prior: &Distribution) -> Distribution {
        let mut out = vec![0.0; self.col_size()];
        for i in 0..self.row_size() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += prior[i] * self.table[(i, j)];
            }
        }
        Distribution::from_raw(out)
    }

    pub fn max_row_error(&self) -> f64 {
        (0..self.table.nrows())
            .map(|i| (self.table.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ConditionalTable {
    type Output = f64;

    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.table[ij]
    }
}

/// Which variable of a joint table to keep when marginalizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// The row variable: sum across each row.
    Rows,
    /// The column variable: sum down each column.
    Cols,
}

pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `D(p ‖ q)` in nats. Errors when `q` vanishes where `p` does not.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(DpflError::DimensionMismatch {
            expected: p.support_size(),
            found: q.support_size(),
        });
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(DpflError::AbsoluteContinuityViolation { index: i });
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total.max(0.0))
}

/// `D(p ‖ q)` with `q` clamped below at `floor`; finite for any input.
pub fn kl_divergence_floored(p: &[f64], q: &[f64], floor: f64) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(floor)).ln())
        .sum()
}

/// `I(row; col)` of a joint table, in nats.
pub fn mutual_information(joint: &DMatrix<f64>) -> f64 {
    let rows: Vec<f64> = (0..joint.nrows()).map(|i| joint.row(i).sum()).collect();
    let cols: Vec<f64> = (0..joint.ncols()).map(|j| joint.column(j).sum()).collect();
    let mut total = 0.0;
    for i in 0..joint.nrows() {
        for j in 0..joint.ncols() {
            let p = joint[(i, j)];
            if p > 0.0 {
                total += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    total.max(0.0)
}

pub fn marginalize(joint: &DMatrix<f64>, axis: Axis) -> Distribution {
    let probs = match axis {
        Axis::Rows => (0..joint.nrows()).map(|i| joint.row(i).sum()).collect(),
        Axis::Cols => (0..joint.ncols()).map(|j| joint.column(j).sum()).collect(),
    };
    Distribution::from_raw(probs)
}

/// Reverses a channel: returns `p(row | col)` laid out with one row per column
/// value of `cond`.
pub fn bayes_invert(cond: &ConditionalTable, prior: &Distribution) -> Result<ConditionalTable> {
    if cond.row_size() != prior.support_size() {
        return Err(DpflError::DimensionMismatch {
            expected: cond.row_size(),
            found: prior.support_size(),
        });
    }
    let joint = cond.joint_with(prior);
    let mut inv = joint.transpose();
    for j in 0..inv.nrows() {
        let evidence: f64 = inv.row(j).sum();
        if evidence <= 0.0 {
            return Err(DpflError::ZeroEvidence { column: j });
        }
        inv.row_mut(j).unscale_mut(evidence);
    }
    Ok(ConditionalTable::from_raw(inv))
}

/// Like [`bayes_invert`], but a column with zero evidence yields the uniform
/// distribution (every entry floored at [`PROB_FLOOR`], then renormalized).
pub fn bayes_invert_floored(cond: &ConditionalTable, prior: &Distribution) -> ConditionalTable {
    let joint = cond.joint_with(prior);
    ConditionalTable::from_raw(normalize_rows_floored(joint.transpose()))
}

pub(crate) fn normalize_rows_floored(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..m.nrows() {
        let evidence: f64 = m.row(j).sum();
        if evidence > 0.0 {
            m.row_mut(j).unscale_mut(evidence);
        } else {
            m.row_mut(j).fill(PROB_FLOOR);
            let total: f64 = m.row(j).sum();
            m.row_mut(j).unscale_mut(total);
        }
    }
    m
}

/// Source joint `p(X, Y)` with rows indexed by `x` and columns by `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    joint: DMatrix<f64>,
    p_x: Distribution,
    p_y: Distribution,
    p_y_given_x: ConditionalTable,
}

impl JointSource {
    pub fn new(joint: DMatrix<f64>) -> Result<Self> {
        if joint.nrows() == 0 || joint.ncols() == 0 {
            return Err(DpflError::InvalidJoint("joint table is empty".into()));
        }
        for i in 0..joint.nrows() {
            for j in 0..joint.ncols() {
                let v = joint[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(DpflError::InvalidJoint(format!(
                        "cell [{i}][{j}] is {v}, expected a finite nonnegative value"
                    )));
                }
            }
        }
        let row_sums: Vec<f64> = (0..joint.nrows()).map(|i| joint.row(i).sum()).collect();
        let total: f64 = row_sums.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            let detail: Vec<String> = row_sums
                .iter()
                .enumerate()
                .map(|(i, s)| format!("row {i} sums to {s}"))
                .collect();
            return Err(DpflError::InvalidJoint(format!(
                "entries sum to {total}, expected 1 ({})",
                detail.join(", ")
            )));
        }
        if let Some(i) = row_sums.iter().position(|&s| s <= 0.0) {
            return Err(DpflError::InvalidJoint(format!(
                "row {i} has zero mass; every x needs p(x) > 0"
            )));
        }
        let p_x = Distribution::from_raw(row_sums);
        let p_y = marginalize(&joint, Axis::Cols);
        let mut cond = joint.clone();
        for i in 0..cond.nrows() {
            cond.row_mut(i).unscale_mut(p_x[i]);
        }
        Ok(Self {
            joint,
            p_x,
            p_y,
            p_y_given_x: ConditionalTable::from_raw(cond),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let card_y = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != card_y) {
            return Err(DpflError::InvalidJoint(format!(
                "row {i} has {} entries, expected {card_y}",
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), card_y, |i, j| rows[i][j]))
    }

    /// Builds `p(x) p(y|x)`.
    pub fn from_channel(p_x: &Distribution, p_y_given_x: &ConditionalTable) -> Result<Self> {
        Self::new(p_y_given_x.joint_with(p_x))
    }

    pub fn card_x(&self) -> usize {
        self.joint.nrows()
    }

    pub fn card_y(&self) -> usize {
        self.joint.ncols()
    }

    pub fn joint(&self) -> &DMatrix<f64> {
        &self.joint
    }

    pub fn p_x(&self) -> &Distribution {
        &self.p_x
    }

    pub fn p_y(&self) -> &Distribution {
        &self.p_y
    }

    pub fn p_y_given_x(&self) -> &ConditionalTable {
        &self.p_y_given_x
    }

    /// `I(X;Y)` in nats.
    pub fn mutual_information(&self) -> f64 {
        mutual_information(&self.joint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&d(&[0.5, 0.5])), LN_2, epsilon = 1e-15);
        assert_eq!(entropy(&d(&[1.0, 0.0, 0.0])), 0.0);
        // mpmath at 40 digits: 0.56233514461880835028...
        assert_abs_diff_eq!(entropy(&d(&[0.25, 0.75])), 0.562_335_144_618_808_4, epsilon = 1e-15);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&d(&[0.3, 0.7]), &d(&[0.3, 0.7])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap(),
            LN_2,
            epsilon = 1e-15
        );
        assert_eq!(
            kl_divergence(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])),
            Err(DpflError::AbsoluteContinuityViolation { index: 1 })
        );
        assert!(matches!(
            kl_divergence(&d(&[1.0]), &d(&[0.5, 0.5])),
            Err(DpflError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn floored_kl_is_finite() {
        let v = kl_divergence_floored(&[0.5, 0.5], &[1.0, 0.0], PROB_FLOOR);
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, 0.5 * 0.5f64.ln() + 0.5 * (0.5 / PROB_FLOOR).ln(), epsilon = 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let indep = DMatrix::from_row_slice(2, 2, &[0.15, 0.35, 0.15, 0.35]);
        assert_abs_diff_eq!(mutual_information(&indep), 0.0, epsilon = 1e-15);
        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert_abs_diff_eq!(mutual_information(&diag), LN_2, epsilon = 1e-15);
    }

    #[test]
    fn marginalize_examples() {
        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(marginalize(&diag, Axis::Rows).probs(), &[0.5, 0.5]);
        let outer = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.0, 0.0]);
        assert_eq!(marginalize(&outer, Axis::Rows).probs(), &[1.0, 0.0]);
        let cols = marginalize(&outer, Axis::Cols);
        assert_abs_diff_eq!(cols.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bayes_invert_identity_and_constant() {
        let inv = bayes_invert(&ConditionalTable::identity(3), &Distribution::uniform(3)).unwrap();
        assert_eq!(inv.matrix(), &DMatrix::<f64>::identity(3, 3));

        let constant = ConditionalTable::new(DMatrix::from_row_slice(
            3,
            2,
            &[0.4, 0.6, 0.4, 0.6, 0.4, 0.6],
        ))
        .unwrap();
        let prior = d(&[0.2, 0.3, 0.5]);
        let inv = bayes_invert(&constant, &prior).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                assert_abs_diff_eq!(inv[(j, i)], prior[i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn bayes_invert_zero_evidence() {
        let cond = ConditionalTable::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0])).unwrap();
        let prior = d(&[0.5, 0.5]);
        assert_eq!(bayes_invert(&cond, &prior), Err(DpflError::ZeroEvidence { column: 1 }));
        let floored = bayes_invert_floored(&cond, &prior);
        assert_eq!(floored.row(1), vec![0.5, 0.5]);
    }

    #[test]
    fn joint_source_validation() {
        let err = JointSource::from_rows(&[vec![0.2, 0.25], vec![0.25, 0.2]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0") && msg.contains("row 1"), "{msg}");

        let err = JointSource::from_rows(&[vec![0.5, 0.5], vec![0.0, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("row 1"));

        let err = JointSource::from_rows(&[vec![0.5, -0.1], vec![0.3, 0.3]]).unwrap_err();
        assert!(err.to_string().contains("[0][1]"));

        let src = JointSource::from_rows(&[vec![0.1, 0.4], vec![0.3, 0.2]]).unwrap();
        assert_eq!(src.card_x(), 2);
        assert_abs_diff_eq!(src.p_y_given_x()[(0, 1)], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(src.p_y()[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        let w = Distribution::from_weights(vec![1.0, 3.0]).unwrap();
        assert_eq!(w.probs(), &[0.25, 0.75]);
    }
}
