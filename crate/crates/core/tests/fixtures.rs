use metabasin::aggregation::{find_metabasins, metastate_space};
use metabasin::filtration::scoppola_filtration;
use metabasin::landscape::{canonical, load_landscape, Landscape, CANONICAL_NAMES};
use metabasin::valleys::{connectivity_params, decompose_all};

fn labels(l: &Landscape, s: &[usize]) -> Vec<i64> {
    let mut v: Vec<i64> = s.iter().map(|&x| l.label(x)).collect();
    v.sort_unstable();
    v
}

#[test]
fn fixture_files_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in CANONICAL_NAMES {
        let l = load_landscape(&dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(l, canonical(name).unwrap());
        assert_eq!(Landscape::from_json(&l.to_json()).unwrap(), l);
    }
}

#[test]
fn l14x_metabasins() {
    let l = canonical("L14X").unwrap();
    let r = find_metabasins(&l, 1.0).unwrap();
    assert_eq!(r.level, Some(5));
    let d = &decompose_all(&l, &scoppola_filtration(&l))[4];
    let ms = metastate_space(d, l.n());
    assert_eq!(labels(&l, ms.metastable()), vec![4, 6, 10, 14]);
    assert_eq!(labels(&l, ms.valley(l.index_of(4).unwrap())), vec![1, 2, 3, 4]);
    assert_eq!(labels(&l, ms.valley(l.index_of(10).unwrap())), vec![8, 9, 10]);
    assert_eq!(labels(&l, ms.valley(l.index_of(14).unwrap())), vec![12, 13, 14]);
    assert_eq!(labels(&l, ms.valley(l.index_of(6).unwrap())), vec![6]);
    assert_eq!(labels(&l, ms.nonassigned()), vec![5, 7, 11]);
    let eta = connectivity_params(&l, d, 1.0).unwrap();
    assert_eq!((eta.eta1, eta.eta2, eta.eta3), (Some(3), Some(2), Some(4)));
}

#[test]
fn l6_has_no_metabasin_at_half() {
    let l = canonical("L6").unwrap();
    assert_eq!(find_metabasins(&l, 0.5).unwrap().level, None);
}
