use proptest::prelude::*;

use oms_core::linalg::{dist, dot, norm};
use oms_core::measure::geodesic_distance;
use oms_core::recovery::{FeasibleCap, ORIGIN_TOL};
use oms_core::{BitVector, Ensemble};

fn signs(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), len)
}

fn unit(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("nonzero", |v| norm(v) > 1e-3)
        .prop_map(|v| {
            let n = norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
}

/// A cap in R^4 over the span of e1 (and e2 when `plane`), shifted along e4.
fn cap(plane: bool, shift: f64, tilt: f64) -> FeasibleCap {
    let mut basis = vec![1.0, 0.0, 0.0, 0.0];
    if plane {
        basis.extend([0.0, 1.0, 0.0, 0.0]);
    }
    FeasibleCap::from_affine(&[tilt, 0.0, 0.0, shift], &basis, 4, ORIGIN_TOL).unwrap()
}

proptest! {
    #[test]
    fn hamming_is_a_metric(a in signs(130), b in signs(130), c in signs(130)) {
        let (a, b, c) = (
            BitVector::from_signs(&a).unwrap(),
            BitVector::from_signs(&b).unwrap(),
            BitVector::from_signs(&c).unwrap(),
        );
        prop_assert_eq!(a.hamming(&a).unwrap(), 0);
        prop_assert_eq!(a.hamming(&b).unwrap(), b.hamming(&a).unwrap());
        prop_assert!(a.hamming(&c).unwrap() <= a.hamming(&b).unwrap() + b.hamming(&c).unwrap());
    }

    #[test]
    fn text_round_trip(a in signs(77)) {
        let bits = BitVector::from_signs(&a).unwrap();
        prop_assert_eq!(BitVector::parse_text(&bits.to_text()).unwrap(), bits);
    }

    #[test]
    fn quantization_ignores_positive_scale(x in unit(6), scale in 1e-6f64..1e6, seed in 0u64..1000) {
        let ens = Ensemble::gaussian(40, 6, seed).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        prop_assert_eq!(ens.quantize(&x).unwrap(), ens.quantize(&scaled).unwrap());
    }

    #[test]
    fn geodesic_sandwich(u in unit(5), v in unit(5)) {
        let dg = geodesic_distance(&u, &v).unwrap();
        prop_assert!((0.0..=1.0).contains(&dg));
        prop_assert!(dg <= dist(&u, &v) + 1e-12);
        prop_assert!(dist(&u, &v) <= std::f64::consts::PI * dg + 1e-12);
    }

    #[test]
    fn projection_lands_in_cap(plane in any::<bool>(), shift in 0.0f64..1.9, tilt in -1.0f64..1.0,
                               z in prop::collection::vec(-3.0f64..3.0, 4)) {
        let cap = cap(plane, shift, tilt);
        let p = cap.project(&z);
        prop_assert!(cap.contains(&p, 1e-9));
        // idempotent on its image
        prop_assert!(dist(&cap.project(&p), &p) < 1e-9);
        if cap.contains(&z, 0.0) {
            prop_assert!(dist(&p, &z) < 1e-12);
        }
    }

    #[test]
    fn linear_minimizer_beats_feasible_points(plane in any::<bool>(), shift in 0.0f64..1.9, tilt in -1.0f64..1.0,
                                              w in prop::collection::vec(-2.0f64..2.0, 4),
                                              probes in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 16)) {
        let cap = cap(plane, shift, tilt);
        let z = cap.minimize_linear(&w).unwrap();
        prop_assert!(cap.contains(&z, 1e-9));
        let best = dot(&w, &z);
        for q in probes {
            let p = cap.project(&q);
            prop_assert!(best <= dot(&w, &p) + 1e-9);
        }
    }
}
