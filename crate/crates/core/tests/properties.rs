use proptest::prelude::*;

use factorial_neyman::finite_population::{
    boundary_condition, population_effects, s2_effect_closed_form, s2_effect_direct,
    sharp_lower_bound, unclipped_lower_bound, BoundaryCondition, PotentialOutcomeTable,
};
use factorial_neyman::neymanian::{
    estimate_effects, improved_variance, variance_classic, ObservedData,
};
use factorial_neyman::oracle::verify_contrast_inequality;
use factorial_neyman::{Exact, ModelMatrix};

fn table_strategy() -> impl Strategy<Value = (u32, PotentialOutcomeTable)> {
    (1u32..=3).prop_flat_map(|k| {
        let arms = 1usize << k;
        let pattern = 0u32..(1u32 << arms);
        (Just(k), prop::collection::vec(pattern, 2..=20)).prop_map(move |(k, rows)| {
            (
                k,
                PotentialOutcomeTable::from_patterns(arms, &rows).unwrap(),
            )
        })
    })
}

fn observed_strategy() -> impl Strategy<Value = (u32, ObservedData)> {
    (1u32..=3).prop_flat_map(|k| {
        let arms = 1usize << k;
        prop::collection::vec((2u64..=80).prop_flat_map(|n| (Just(n), 0..=n)), arms).prop_map(
            move |cells| {
                let (sizes, successes) = cells.into_iter().unzip();
                (k, ObservedData::new(sizes, successes).unwrap())
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn closed_form_matches_direct_variance((k, t) in table_strategy()) {
        let m = ModelMatrix::new(k).unwrap();
        for l in 1..m.arms() {
            prop_assert_eq!(s2_effect_direct(&t, &m, l).unwrap(), s2_effect_closed_form(&t, &m, l).unwrap());
        }
    }

    #[test]
    fn contrast_inequality_and_tightness((k, t) in table_strategy()) {
        let m = ModelMatrix::new(k).unwrap();
        for l in 1..m.arms() {
            let r = verify_contrast_inequality(&t, &m, l).unwrap();
            prop_assert!(r.holds);
            prop_assert!(r.consistent(), "{:?}", r);
        }
    }

    #[test]
    fn variance_dominates_bound((k, t) in table_strategy()) {
        let m = ModelMatrix::new(k).unwrap();
        let effects = population_effects(&t, &m).unwrap();
        for l in 1..m.arms() {
            let s2 = s2_effect_direct(&t, &m, l).unwrap();
            let tau = effects.average(l);
            prop_assert!(s2 >= sharp_lower_bound(tau, k, t.units()));
            let unclipped = unclipped_lower_bound(tau, k, t.units());
            let holds = boundary_condition(&t, &m, l).unwrap().holds();
            prop_assert_eq!(s2 == unclipped, holds);
        }
    }

    #[test]
    fn unit_order_is_irrelevant((k, t) in table_strategy(), seed in any::<u64>()) {
        let m = ModelMatrix::new(k).unwrap();
        let mut order: Vec<usize> = (0..t.units()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p = t.permute_units(&order).unwrap();
        let (a, b) = (population_effects(&t, &m).unwrap(), population_effects(&p, &m).unwrap());
        prop_assert_eq!(a.averages(), b.averages());
        for l in 1..m.arms() {
            prop_assert_eq!(s2_effect_direct(&t, &m, l).unwrap(), s2_effect_direct(&p, &m, l).unwrap());
            prop_assert_eq!(boundary_condition(&t, &m, l).unwrap(), boundary_condition(&p, &m, l).unwrap());
        }
    }

    #[test]
    fn improved_never_exceeds_classic((k, obs) in observed_strategy()) {
        let m = ModelMatrix::new(k).unwrap();
        let classic = variance_classic(&obs, k).unwrap();
        for tau in estimate_effects(&obs, &m).unwrap() {
            let iv = improved_variance(classic, tau, k, obs.units());
            prop_assert!(iv.correction >= 0.0);
            prop_assert!(iv.var_improved <= classic);
            prop_assert!(iv.var_improved >= 0.0);
            if !iv.clamped {
                prop_assert!(((classic - iv.var_improved) - iv.correction).abs() <= 1e-15 * classic.max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn single_factor_monotone_tables_attain_bound(rows in prop::collection::vec(0u32..3, 2..=20), increasing in any::<bool>()) {
        let m = ModelMatrix::new(1).unwrap();
        // bit 0 = Y(-1), bit 1 = Y(+1)
        let patterns: Vec<u32> = rows
            .iter()
            .map(|&r| match (r, increasing) {
                (0, _) => 0b00,
                (1, true) => 0b10,
                (1, false) => 0b01,
                _ => 0b11,
            })
            .collect();
        let t = PotentialOutcomeTable::from_patterns(2, &patterns).unwrap();
        let tau = population_effects(&t, &m).unwrap().average(1);
        prop_assert_eq!(s2_effect_direct(&t, &m, 1).unwrap(), sharp_lower_bound(tau, 1, t.units()));
        let cond = boundary_condition(&t, &m, 1).unwrap();
        let want = if increasing { BoundaryCondition::Increasing } else { BoundaryCondition::Decreasing };
        prop_assert!(cond == want || cond == BoundaryCondition::Both);
        prop_assert!(factorial_neyman::rational::abs(&tau) <= Exact::from_integer(1));
    }
}
