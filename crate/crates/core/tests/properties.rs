use metabasin::aggregation::{asymptotic_jump_chain, metastate_space, project_trajectory, ExactAggregate};
use metabasin::chain::{build_metropolis, hitting_probability, stationary, HittingQuery};
use metabasin::filtration::{local_minima, scoppola_filtration};
use metabasin::landscape::{gen_random_landscape, Landscape};
use metabasin::saddles::{activation_energy, essential_saddle, saddle_table};
use metabasin::simulate::{path_dependent_mb, path_dependent_mb_naive, run_metropolis};
use metabasin::valleys::{decompose_all, outer_boundary};
use proptest::prelude::*;

fn landscape() -> impl Strategy<Value = Landscape> {
    (2usize..=10, 2usize..=4, any::<u64>()).prop_map(|(n, d, seed)| gen_random_landscape(n, d, 0.1, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detailed_balance_and_stationarity(l in landscape(), beta in 0.1f64..8.0) {
        let m = build_metropolis(&l, beta).unwrap();
        prop_assert!(m.detailed_balance_residual() < 1e-12);
        let pi = stationary(&m);
        let moved = m.kernel.push_forward(&pi);
        for (a, b) in pi.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for r in l.states() {
            let row: f64 = l.states().map(|s| m.prob(r, s)).sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saddles_symmetric_and_ultrametric(l in landscape()) {
        let t = saddle_table(&l);
        for r in l.states() {
            prop_assert_eq!(t.saddle(r, r), r);
            for s in l.states() {
                prop_assert_eq!(t.saddle(r, s), t.saddle(s, r));
                if r != s {
                    prop_assert_eq!(essential_saddle(&l, r, s).unwrap().0, t.saddle(r, s));
                }
                prop_assert!(t.energy(r, s) >= l.energy(r).max(l.energy(s)));
                for u in l.states() {
                    prop_assert!(t.energy(r, u) <= t.energy(r, s).max(t.energy(s, u)));
                }
            }
        }
    }

    #[test]
    fn activation_below_barrier(l in landscape()) {
        let t = saddle_table(&l);
        for s in l.states() {
            for m in l.states().filter(|&m| m != s) {
                let i = activation_energy(&l, s, m).unwrap();
                prop_assert!(i >= t.energy(s, m) - l.energy(s) - 1e-12);
            }
        }
    }

    #[test]
    fn filtration_deletes_every_minimum_once(l in landscape()) {
        let f = scoppola_filtration(&l);
        let mut order = f.deletion_order.clone();
        order.sort_unstable();
        prop_assert_eq!(order, local_minima(&l));
        prop_assert_eq!(f.deletion_costs.len() + 1, f.levels);
        for i in 1..=f.levels {
            prop_assert_eq!(f.minima(i).len(), f.levels - i + 1);
        }
    }

    #[test]
    fn valleys_partition_with_nonassigned_boundaries(l in landscape()) {
        let f = scoppola_filtration(&l);
        let t = saddle_table(&l);
        for d in decompose_all(&l, &f) {
            let mut seen = vec![0usize; l.n()];
            let all = d.valley.iter().map(|(&m, v)| (m, v.clone())).chain(d.pending.iter().map(|(&m, p)| (m, p.valley.clone())));
            for (m, v) in all {
                prop_assert!(v.contains(&m));
                for &s in &v {
                    seen[s] += 1;
                }
                for s in outer_boundary(&l, &v) {
                    prop_assert!(d.nonassigned.contains(&s));
                    prop_assert_eq!(t.energy(s, m), l.energy(s));
                }
            }
            for s in l.states() {
                prop_assert_eq!(seen[s] + d.nonassigned.contains(&s) as usize, 1);
            }
        }
    }

    #[test]
    fn jump_chain_rows_are_stochastic(l in landscape()) {
        let f = scoppola_filtration(&l);
        for d in decompose_all(&l, &f).iter().filter(|d| d.minima.len() > 1) {
            let ms = metastate_space(d, l.n());
            let jc = asymptotic_jump_chain(&l, &ms).unwrap();
            for row in &jc.phat {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let model = build_metropolis(&l, 2.0).unwrap();
            let ex = ExactAggregate::new(&model, &ms).unwrap();
            for &m in &ms.metastates {
                let p = ex.aac_step(m);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p[ms.index(m).unwrap()].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aac_never_repeats(l in landscape(), seed in any::<u64>()) {
        let f = scoppola_filtration(&l);
        let d = &decompose_all(&l, &f)[0];
        let ms = metastate_space(d, l.n());
        let model = build_metropolis(&l, 1.0).unwrap();
        let traj = run_metropolis(&model, 0, 300, seed);
        let p = project_trajectory(&traj.states, &ms);
        prop_assert!(p.aac.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn incremental_pdmb_matches_naive(xs in prop::collection::vec(0usize..6, 1..80), frac in 0.0f64..1.0) {
        let t = ((xs.len() - 1) as f64 * frac) as usize;
        prop_assert_eq!(path_dependent_mb(&xs, t), path_dependent_mb_naive(&xs, t));
    }

    #[test]
    fn hitting_probability_in_unit_interval(l in landscape(), beta in 0.1f64..6.0, a in 0usize..10, b in 0usize..10, x in 0usize..10) {
        let n = l.n();
        let (a, b, x) = (a % n, b % n, x % n);
        prop_assume!(a != b);
        let m = build_metropolis(&l, beta).unwrap();
        let p = hitting_probability(&m, &HittingQuery::new(x, &[a], &[b])).unwrap();
        let q = hitting_probability(&m, &HittingQuery::new(x, &[b], &[a])).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() < 1e-10);
    }
}
