use measure_transport::{flow_map, semigroup_defect, BLFunction, IntegratorConfig};
use proptest::prelude::*;

fn smooth_velocity() -> impl Strategy<Value = BLFunction> {
    (-1.5f64..1.5, -2.0f64..2.0, -1.0f64..1.0).prop_map(|(a, b, c)| {
        BLFunction::custom("smooth", a.abs() + b.abs() + c.abs(), b.abs() + 6.0 * c.abs(), move |x| {
            a + b * x + c * (6.0 * x).sin()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positions_stay_in_domain(v in smooth_velocity(), x0 in 0.0f64..=1.0, t in 0.0f64..3.0) {
        let r = flow_map(x0, t, &v, &IntegratorConfig::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.position));
        prop_assert_eq!(r.stopped, r.hit_time.is_some());
    }

    #[test]
    fn flow_is_monotone(v in smooth_velocity(), x0 in 0.0f64..1.0, gap in 1e-4f64..0.5, t in 0.0f64..2.0) {
        let x1 = (x0 + gap).min(1.0);
        let cfg = IntegratorConfig::default();
        let a = flow_map(x0, t, &v, &cfg).unwrap().position;
        let b = flow_map(x1, t, &v, &cfg).unwrap().position;
        prop_assert!(a <= b + 1e-12, "{a} > {b}");
    }

    #[test]
    fn stopping_is_absorbing(v in smooth_velocity(), x0 in 0.0f64..=1.0, t in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let cfg = IntegratorConfig::default();
        let r = flow_map(x0, t, &v, &cfg).unwrap();
        if r.stopped {
            let later = flow_map(x0, t + extra, &v, &cfg).unwrap();
            prop_assert!(later.stopped);
            prop_assert_eq!(later.position, r.position);
            prop_assert_eq!(later.hit_time, r.hit_time);
        }
    }
}

#[test]
fn semigroup_defect_is_fourth_order() {
    // v = 0.3 + 0.2 sin(3x) carries 0.05 well inside the domain up to t = 1.3;
    // single (s, t) pairs mix two step alignments, so the sup over a fixed set scales cleanly
    let v = BLFunction::custom("sin", 0.5, 0.6, |x| 0.3 + 0.2 * (3.0 * x).sin());
    let pairs: Vec<(f64, f64)> = (0..64)
        .map(|j| {
            let j = j as f64;
            (0.2 + 0.5 * ((j * 0.618_033_988_7) % 1.0), 0.1 + 0.5 * ((j * 0.414_213_562_3) % 1.0))
        })
        .collect();
    let sup_defect = |h: f64| {
        let cfg = IntegratorConfig::with_substep(h).unwrap();
        pairs
            .iter()
            .map(|&(s, t)| semigroup_defect(0.05, s, t, &v, &cfg).unwrap())
            .fold(0.0, f64::max)
    };
    let ds: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h| sup_defect(h)).collect();
    for w in ds.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "sup defects {ds:?}");
    }
}
