mod common;

use common::{dot, norm, oracle_cross, oracle_scaled_cosine};
use greed::crossprod::{
    cross3, cross_n, cross_n_jacobian, cross_n_vjp, scaled_cosine, scaled_cosine_grad,
    ConstantFrame,
};
use greed::EPS;
use proptest::prelude::*;

fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
}

/// `dim` in `3..=max_dim` and `dim - 1` operands of that length.
fn operands_upto(max_dim: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (3..=max_dim).prop_flat_map(|dim| (Just(dim), prop::collection::vec(unit_vec(dim), dim - 1)))
}

fn operands() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    operands_upto(8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_laplace_oracle((_, ops) in operands()) {
        let got = cross_n(&ops).unwrap();
        let want = oracle_cross(&ops);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn swapping_operands_negates((dim, ops) in operands(), i in 0usize..7, j in 0usize..7) {
        let (i, j) = (i % (dim - 1), j % (dim - 1));
        prop_assume!(i != j);
        let mut swapped = ops.clone();
        swapped.swap(i, j);
        let a = cross_n(&ops).unwrap();
        let b = cross_n(&swapped).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + y).abs() <= 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn orthogonal_to_every_operand((_, ops) in operands()) {
        let c = cross_n(&ops).unwrap();
        let scale: f64 = ops.iter().map(|o| norm(o)).product();
        for o in &ops {
            prop_assert!(dot(&c, o).abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn dim3_equals_cross3(a in unit_vec(3), b in unit_vec(3)) {
        let n = cross_n(&[a.clone(), b.clone()]).unwrap();
        let c = cross3(&[a[0], a[1], a[2]], &[b[0], b[1], b[2]]);
        prop_assert_eq!(n, c.to_vec());
    }

    #[test]
    fn jacobian_columns_are_finite_differences((dim, ops) in operands_upto(6), idx in 0usize..7) {
        let idx = idx % (dim - 1);
        let jac = cross_n_jacobian(&ops, idx).unwrap();
        let h = 1e-6;
        for j in 0..dim {
            let mut plus = ops.clone();
            let mut minus = ops.clone();
            plus[idx][j] += h;
            minus[idx][j] -= h;
            let fp = oracle_cross(&plus);
            let fm = oracle_cross(&minus);
            for i in 0..dim {
                let numeric = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((jac[i * dim + j] - numeric).abs() <= 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn vjp_is_jacobian_transpose((dim, ops) in operands(), idx in 0usize..7, g in unit_vec(8)) {
        let idx = idx % (dim - 1);
        let g = &g[..dim];
        let jac = cross_n_jacobian(&ops, idx).unwrap();
        let vjp = cross_n_vjp(&ops, idx, g).unwrap();
        for j in 0..dim {
            let want: f64 = (0..dim).map(|i| jac[i * dim + j] * g[i]).sum();
            prop_assert!((vjp[j] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn reversed_pair_sums_to_one(a in unit_vec(3), b in unit_vec(3), d in unit_vec(3)) {
        prop_assume!(norm(&d) > 1e-3);
        let st = cross_n(&[a.clone(), b.clone()]).unwrap();
        let ts = cross_n(&[b, a]).unwrap();
        let sum = scaled_cosine(&st, &d, EPS).unwrap() + scaled_cosine(&ts, &d, EPS).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "{sum}");
    }

    #[test]
    fn scaled_cosine_matches_oracle(r in unit_vec(5), d in unit_vec(5)) {
        prop_assume!(norm(&d) > 1e-3);
        let got = scaled_cosine(&r, &d, EPS).unwrap();
        prop_assert!((got - oracle_scaled_cosine(&r, &d)).abs() <= 1e-12);
    }

    #[test]
    fn scaled_cosine_gradient_is_scale_free(r in unit_vec(4), d in unit_vec(4)) {
        prop_assume!(norm(&d) > 1e-3 && norm(&r) > 1e-3);
        let g = scaled_cosine_grad(&r, &d, EPS).unwrap();
        prop_assert!(dot(&g, &r).abs() <= 1e-12 * norm(&g).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scaled_cosine_gradient_matches_differences(r in unit_vec(3), d in unit_vec(3)) {
        prop_assume!(norm(&d) > 0.1 && norm(&r) > 0.1);
        let c = dot(&r, &d) / (norm(&r) * norm(&d));
        // Away from cos = +-1, where the clamp makes the function non-smooth.
        prop_assume!(c.abs() < 0.999);
        let g = scaled_cosine_grad(&r, &d, EPS).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut p = r.clone();
            let mut m = r.clone();
            p[i] += h;
            m[i] -= h;
            let numeric = (oracle_scaled_cosine(&p, &d) - oracle_scaled_cosine(&m, &d)) / (2.0 * h);
            let err = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-4);
            prop_assert!(err < 1e-5, "component {i}: {} vs {numeric}", g[i]);
        }
    }
}

#[test]
fn degenerate_output_is_neutral() {
    let d = [1.0, 1.0, 1.0];
    assert_eq!(scaled_cosine(&[0.0; 3], &d, EPS).unwrap(), 0.5);
    assert_eq!(
        scaled_cosine_grad(&[0.0; 3], &d, EPS).unwrap(),
        vec![0.0; 3]
    );
    let a = [0.3, -0.2, 0.9];
    assert_eq!(cross3(&a, &a), [0.0; 3]);
}

#[test]
fn frame_operands_put_source_and_target_first() {
    let frame = ConstantFrame::new(5, 42).unwrap();
    let s = [1.0, 0.0, 0.0, 0.0, 0.0];
    let t = [0.0, 1.0, 0.0, 0.0, 0.0];
    let ops = frame.operands(&s, &t);
    assert_eq!(ops.len(), 4);
    assert_eq!(ops[0], &s);
    assert_eq!(ops[1], &t);
    assert_eq!(ops[2], frame.vectors()[0].as_slice());
}
