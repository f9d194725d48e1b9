mod common;

use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewlab::monotone::{
    find_jumps, fixed_point_set, pbb_search, pbb_verify, q, random_monotone, total_variation, Interval, IntervalSet,
    MonotoneStepFunction, PiecewiseAffine, Q,
};

fn max_abs_slope(f: &PiecewiseAffine) -> Q {
    (0..f.pieces()).map(|k| f.slope(k).abs()).max().unwrap_or_else(Q::zero)
}

fn setup(seed: u64, n: usize, jumps: usize) -> (MonotoneStepFunction, MonotoneStepFunction) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_monotone(&mut rng, n, jumps), random_monotone(&mut rng, n, jumps))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variation_matches_fine_partition(seed in any::<u64>(), n in 1usize..12, j in 0usize..6) {
        let (g1, g2) = setup(seed, n, j);
        let f = g1.sub(&g2).unwrap();
        let (a, b) = f.domain();
        let eta = q(1, 1 << 20);
        let v = total_variation(&f, a, b).unwrap().value;
        let p = common::partition_variation(&f, a, b, &eta);
        // the partition sum can only lose slope contributions inside 2η around each node
        let slack = q(4, 1) * &eta * max_abs_slope(&f) * q(f.nodes().len() as i64, 1);
        prop_assert!(p <= v.clone());
        prop_assert!(&v - &p <= slack);
    }

    #[test]
    fn monotone_variation_is_total_rise(seed in any::<u64>(), n in 1usize..12, j in 0usize..6) {
        let (g, _) = setup(seed, n, j);
        let (a, b) = g.domain();
        let v = total_variation(&g, a, b).unwrap().value;
        prop_assert_eq!(v, g.eval(b).unwrap() - g.eval(a).unwrap());
    }

    #[test]
    fn image_and_preimage_agree(seed in any::<u64>(), n in 1usize..10, j in 0usize..5, c0 in -90i64..90, w in 1i64..60) {
        let (g, _) = setup(seed, n, j);
        let set = IntervalSet::from_intervals(vec![Interval::closed(q(c0, 96), q((c0 + w).min(96), 96))]);
        let pre = g.preimage(&set);
        // every point of the preimage lands in the set; its image is inside the set
        prop_assert!(g.image(&pre).intersect(&set) == g.image(&pre));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..32 {
            let x = q(rng.gen_range(-96..=96), 96);
            prop_assert_eq!(pre.contains(&x), set.contains(&g.eval(&x).unwrap()));
        }
    }

    #[test]
    fn fixed_point_set_is_exact(seed in any::<u64>(), n in 1usize..10, j in 0usize..5, t in -20i64..20) {
        let (g, _) = setup(seed, n, j);
        let t = q(t, 96);
        let fix = fixed_point_set(&g, &t);
        for x in (-96..=96).map(|k| q(k, 96)) {
            prop_assert_eq!(fix.contains(&x), g.eval(&x).unwrap() + &t == x);
        }
    }

    #[test]
    fn pbb_certificates_survive_the_oracle(seed in any::<u64>(), n in 1usize..10, j in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = random_monotone(&mut rng, n, j);
        let l2 = random_monotone(&mut rng, n, j);
        let phi = random_monotone(&mut rng, n, j).rescaled_into(&q(-1, 1), &q(1, 1));
        let eps = q(1, 20);
        let c = pbb_search(&l1, &l2, &phi, &eps, 4).unwrap();
        prop_assert!(c.s.abs() <= eps && c.t.abs() <= eps);
        prop_assert!(!common::pbb_conflict(&l1, &l2, &phi, &c.s, &c.t));
        // the oracle and the library agree on arbitrary shifts too
        for _ in 0..8 {
            let (s, t) = (q(rng.gen_range(-8..=8), 96), q(rng.gen_range(-8..=8), 96));
            prop_assert_eq!(pbb_verify(&l1, &l2, &phi, &s, &t), !common::pbb_conflict(&l1, &l2, &phi, &s, &t));
        }
    }

    #[test]
    fn large_jumps_are_few(seed in any::<u64>(), n in 1usize..16, j in 0usize..12, e in 1i64..40) {
        let (g1, g2) = setup(seed, n, j);
        let f = g1.sub(&g2).unwrap();
        let (a, b) = f.domain();
        let eps = q(e, 96);
        let v = total_variation(&f, a, b).unwrap().value;
        let jumps = find_jumps(&f, &eps).unwrap();
        prop_assert!(q(jumps.len() as i64, 1) * &eps <= v);
    }
}

#[test]
fn identity_triple_needs_a_nonzero_shift() {
    let id = MonotoneStepFunction::identity(q(-1, 1), q(1, 1));
    let eps = q(1, 10);
    assert!(!pbb_verify(&id, &id, &id, &Q::zero(), &Q::zero()));
    let c = pbb_search(&id, &id, &id, &eps, 8).unwrap();
    assert!(!c.s.is_zero() || !c.t.is_zero());
    assert!(!common::pbb_conflict(&id, &id, &id, &c.s, &c.t));
}
