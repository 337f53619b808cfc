use proptest::prelude::*;

use finsler::expr::Expression;
use finsler::jets::{lift, MultiIndex};
use finsler::metrics::{zoo, MetricSpec, TangentPoint};
use finsler::tensors::PointTensors;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (1u8..=2).prop_map(|i| format!("x{i}")),
        (1u8..=2).prop_map(|i| format!("y{i}")),
        (-50i32..50).prop_map(|c| format!("{}", c as f64 / 10.0)),
    ]
}

fn expression() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), 1u8..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.prop_map(|a| format!("exp(0.1*{a})")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_stable(src in expression()) {
        let e = Expression::parse(&src, 2).unwrap();
        let printed = e.to_string();
        let again = Expression::parse(&printed, 2).unwrap();
        prop_assert_eq!(&printed, &again.to_string());
        prop_assert_eq!(e.root(), again.root());
    }

    #[test]
    fn jet_value_matches_evaluation(src in expression(), at in point()) {
        let e = Expression::parse(&src, 2).unwrap();
        let v = e.evaluate(&at).unwrap();
        let j = lift(&e, &at, 3).unwrap();
        prop_assert!((j.value() - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn product_rule(a in expression(), b in expression(), at in point(), slot in 0usize..4) {
        let ea = Expression::parse(&a, 2).unwrap();
        let eb = Expression::parse(&b, 2).unwrap();
        let ep = Expression::parse(&format!("({a}) * ({b})"), 2).unwrap();
        let d = MultiIndex::from_slots(4, &[slot]);
        let ja = lift(&ea, &at, 2).unwrap();
        let jb = lift(&eb, &at, 2).unwrap();
        let jp = lift(&ep, &at, 2).unwrap();
        let expected = ja.partial(&d).unwrap() * jb.value() + ja.value() * jb.partial(&d).unwrap();
        let got = jp.partial(&d).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn derivative_commutes(src in expression(), at in point(), i in 0usize..4, j in 0usize..4) {
        let e = Expression::parse(&src, 2).unwrap();
        let jet = lift(&e, &at, 3).unwrap();
        let ij = jet.derivative(i).derivative(j).value();
        let ji = jet.derivative(j).derivative(i).value();
        let direct = jet.partial(&MultiIndex::from_slots(4, &[i, j])).unwrap();
        prop_assert!((ij - ji).abs() <= 1e-9 * ij.abs().max(1.0));
        prop_assert!((ij - direct).abs() <= 1e-9 * ij.abs().max(1.0));
    }

    #[test]
    fn tensors_scale_with_their_degree(member in 0usize..7, t in 0.0f64..1.0, angle in 0.0f64..std::f64::consts::TAU, lambda in 0.3f64..4.0) {
        let spec: MetricSpec = zoo().swap_remove(member);
        let x: Vec<f64> = spec.chart.iter().map(|(lo, hi)| lo + (hi - lo) * (0.2 + 0.6 * t)).collect();
        let y = vec![angle.cos(), angle.sin()];
        let p = TangentPoint::new(&spec, x.clone(), y.clone()).unwrap();
        let q = TangentPoint::new(&spec, x, y.iter().map(|v| v * lambda).collect()).unwrap();
        let a = PointTensors::compute(&spec, &p).unwrap();
        let b = PointTensors::compute(&spec, &q).unwrap();
        // (tensor at λy) = λ^k (tensor at y)
        let pairs = [
            (&a.g, &b.g, 0),
            (&a.cartan, &b.cartan, -1),
            (&a.spray, &b.spray, 2),
            (&a.connection, &b.connection, 1),
            (&a.berwald, &b.berwald, -1),
            (&a.landsberg, &b.landsberg, 0),
            (&a.riemann, &b.riemann, 2),
        ];
        for (u, v, k) in pairs {
            let s = lambda.powi(k);
            let scale = u.max_abs().max(1.0);
            for (cu, cv) in u.components.iter().zip(&v.components) {
                prop_assert!((cu * s - cv).abs() <= 1e-9 * scale * s.max(1.0));
            }
        }
        prop_assert!((b.f - lambda * a.f).abs() <= 1e-12 * b.f);
    }
}
