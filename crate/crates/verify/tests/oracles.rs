use std::collections::BTreeSet;

use metabasin::filtration::scoppola_filtration;
use metabasin::landscape::{gen_random_landscape, Landscape};
use metabasin::saddles::{activation_energy, saddle_table};
use metabasin::valleys::decompose_all;
use metabasin_verify::acceptance::level_invariants;
use metabasin_verify::oracles::{brute_activation, brute_filtration, BruteSaddles, BruteValleys};
use proptest::prelude::*;

fn landscape(max_n: usize) -> impl Strategy<Value = Landscape> {
    (2usize..=max_n, 2usize..=4, any::<u64>()).prop_map(|(n, d, seed)| gen_random_landscape(n, d, 0.1, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn table_matches_enumeration(l in landscape(9)) {
        let t = saddle_table(&l);
        let b = BruteSaddles::new(&l);
        for r in l.states() {
            for s in l.states() {
                prop_assert_eq!(t.saddle(r, s), b.saddle[r][s]);
            }
        }
    }

    #[test]
    fn activation_matches_enumeration(l in landscape(8)) {
        for s in l.states() {
            for m in l.states().filter(|&m| m != s) {
                prop_assert!((activation_energy(&l, s, m).unwrap() - brute_activation(&l, s, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn valleys_match_definitions(l in landscape(8)) {
        let f = scoppola_filtration(&l);
        let (order, costs) = brute_filtration(&l);
        prop_assert_eq!(&f.deletion_order, &order);
        prop_assert_eq!(&f.deletion_costs, &costs);
        let levels = decompose_all(&l, &f);
        let brute = BruteValleys::new(&l, order).levels();
        let table = saddle_table(&l);
        for (i, (d, b)) in levels.iter().zip(&brute).enumerate() {
            prop_assert_eq!(d.nonassigned.iter().copied().collect::<BTreeSet<_>>(), b.nonassigned.clone());
            for (m, v) in &b.valleys {
                let got: BTreeSet<usize> = d.valley_of(*m).unwrap().iter().copied().collect();
                prop_assert_eq!(&got, v);
            }
            prop_assert!(level_invariants(&l, &table, &levels, i + 1).is_ok());
        }
    }
}
