use dpfl::discrete::{evaluate_functional, prediction_decomposition, SolverState};
use dpfl::prob::{
    bayes_invert, entropy, kl_divergence, marginalize, mutual_information, Axis, ConditionalTable,
    Distribution,
};
use dpfl::{JointSource, LagrangeParams};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

fn table(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    weights(rows * cols).prop_map(move |w| DMatrix::from_vec(rows, cols, w))
}

proptest! {
    #[test]
    fn entropy_is_bounded(w in (1usize..8).prop_flat_map(weights)) {
        let n = w.len();
        let p = Distribution::from_weights(w).unwrap();
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (n as f64).ln() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(pair in (1usize..8).prop_flat_map(|n| (weights(n), weights(n)))) {
        let p = Distribution::from_weights(pair.0).unwrap();
        let q = Distribution::from_weights(pair.1).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-15);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mutual_information_is_symmetric_and_bounded(m in table(3, 4)) {
        let joint = &m / m.sum();
        let i = mutual_information(&joint);
        prop_assert!(i >= -1e-15);
        prop_assert!((i - mutual_information(&joint.transpose())).abs() < 1e-12);
        let hx = entropy(&marginalize(&joint, Axis::Rows));
        let hy = entropy(&marginalize(&joint, Axis::Cols));
        prop_assert!(i <= hx.min(hy) + 1e-12);
    }

    #[test]
    fn bayes_inversion_is_row_stochastic(m in table(4, 3), w in weights(4)) {
        let cond = ConditionalTable::from_weights(m).unwrap();
        let prior = Distribution::from_weights(w).unwrap();
        let inv = bayes_invert(&cond, &prior).unwrap();
        prop_assert!(inv.max_row_error() < 1e-12);
        // Round trip: inverting twice with the pushed-forward prior gives the original.
        let back = bayes_invert(&inv, &cond.push_forward(&prior)).unwrap();
        prop_assert!((back.matrix() - cond.matrix()).amax() < 1e-10);
    }

    #[test]
    fn functional_respects_the_lower_bound(
        j in table(3, 3),
        e1 in table(3, 2),
        e2 in table(3, 3),
        beta in 0.01f64..5.0,
        lambda in 0.01f64..5.0,
        gamma in 0.0f64..2.0,
    ) {
        let source = JointSource::new(&j / j.sum()).unwrap();
        let state = SolverState::from_encoders(
            &source,
            ConditionalTable::from_weights(e1).unwrap(),
            ConditionalTable::from_weights(e2).unwrap(),
        ).unwrap();
        let params = LagrangeParams::new(beta, lambda, gamma).unwrap();
        let r = evaluate_functional(&state, &source, &params);
        let ixy = source.mutual_information();
        prop_assert!(r.functional_value >= -ixy - 1e-12);
        prop_assert!(r.i_y_t1t2 <= ixy + 1e-12);
        for v in [r.i_x_t1, r.i_x_t2, r.i_t1_t2, r.i_y_t1t2] {
            prop_assert!(v >= -1e-12);
        }
        prop_assert!(state.decoder().max_row_error() < 1e-10);
        let (lhs, rhs) = prediction_decomposition(&state, &source);
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}
