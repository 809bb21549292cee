use measure_transport::measure::linear_combine;
use measure_transport::{BLFunction, ParticleMeasure};
use proptest::prelude::*;

fn signed_measure(max_atoms: usize) -> impl Strategy<Value = ParticleMeasure> {
    prop::collection::vec((0.0f64..=1.0, -2.0f64..2.0), 0..=max_atoms)
        .prop_map(|pairs| ParticleMeasure::new(pairs).unwrap())
}

fn bounded_phi() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0f64..1.0, 0.5f64..20.0, 0.0f64..6.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn push_forward_duality(mu in signed_measure(32), (amp, freq, shift) in bounded_phi(), c in 0.0f64..1.0) {
        let map = |x: f64| (c + 0.5 * x * x).fract();
        let phi = |y: f64| amp * (freq * y + shift).sin();
        let pushed = mu.push_forward(map).unwrap();
        let lhs = pushed.pair(phi);
        let rhs = mu.pair(|x| phi(map(x)));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + mu.tv_norm()));
    }

    #[test]
    fn push_forward_contracts_tv(mu in signed_measure(32), c in 0.0f64..1.0, bins in 1u32..8) {
        let collapse = move |x: f64| ((x * bins as f64).floor() / bins as f64 + c / bins as f64).min(1.0);
        prop_assert!(mu.push_forward(collapse).unwrap().tv_norm() <= mu.tv_norm() + 1e-12);
        let injective = move |x: f64| 0.5 * x + 0.5 * c;
        let pushed = mu.push_forward(injective).unwrap();
        prop_assert!((pushed.tv_norm() - mu.tv_norm()).abs() <= 1e-12 * (1.0 + mu.tv_norm()));
    }

    #[test]
    fn tv_is_a_norm(mu in signed_measure(24), nu in signed_measure(24), s in -3.0f64..3.0) {
        let sum = linear_combine(1.0, &mu, 1.0, &nu);
        prop_assert!(sum.tv_norm() <= mu.tv_norm() + nu.tv_norm() + 1e-12);
        let scaled = mu.scale(s).tv_norm();
        prop_assert!((scaled - s.abs() * mu.tv_norm()).abs() <= 1e-12 * (1.0 + mu.tv_norm()));
        prop_assert!(mu.tv_norm() >= 0.0);
    }

    #[test]
    fn pairing_bounded_by_tv(mu in signed_measure(32), (amp, freq, shift) in bounded_phi()) {
        let phi = |x: f64| amp * (freq * x + shift).cos();
        prop_assert!(mu.pair(phi).abs() <= amp.abs() * mu.tv_norm() + 1e-12);
    }

    #[test]
    fn csv_and_json_round_trip(mu in signed_measure(32)) {
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        prop_assert_eq!(ParticleMeasure::read_csv(buf.as_slice()).unwrap().to_pairs(), mu.to_pairs());
        prop_assert_eq!(ParticleMeasure::from_json(&mu.to_json()).unwrap().to_pairs(), mu.to_pairs());
    }
}

#[test]
fn builtin_functions_respect_certified_bounds() {
    let funcs = [
        BLFunction::constant(-0.7),
        BLFunction::affine(0.6, -0.4),
        BLFunction::piecewise_linear(vec![(0.0, 0.0), (0.3, 1.0), (0.31, -1.0), (1.0, 0.5)]).unwrap(),
        BLFunction::boundary_layer(8).unwrap(),
        BLFunction::boundary_layer(32).unwrap(),
    ];
    for f in &funcs {
        assert!(f.spot_check(10_000).is_empty(), "{f}: {:?}", f.spot_check(10_000));
    }
}

#[test]
fn boundary_layer_family_shape() {
    for n in [4u32, 5, 8, 16, 33, 64] {
        let f = BLFunction::boundary_layer(n).unwrap();
        assert_eq!(f.eval(0.0), -1.0);
        assert_eq!(f.eval(1.0), -1.0);
        let (lo, hi) = (2.0 / n as f64, 1.0 - 2.0 / n as f64);
        for j in 0..=1000 {
            let x = lo + (hi - lo) * j as f64 / 1000.0;
            assert_eq!(f.eval(x), 0.0, "n = {n}, x = {x}");
        }
    }
}
