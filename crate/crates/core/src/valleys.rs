//! Strict basins, attraction, nested valleys, non-assigned states, the valley
//! tree and connectivity parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::Filtration;
use crate::landscape::{Landscape, State};
use crate::linalg::mask;
use crate::saddles::{saddle_table, sublevel_connected, SaddleTable};

/// `V_<(m)` relative to the minima set `minima`.
pub fn strict_basin(l: &Landscape, table: &SaddleTable, minima: &[State], m: State) -> Vec<State> {
    debug_assert!(minima.contains(&m));
    l.states()
        .filter(|&s| {
            s == m
                || minima
                    .iter()
                    .filter(|&&o| o != m)
                    .all(|&o| table.energy(s, m) < table.energy(s, o))
        })
        .collect()
}

/// `s ⇝ m` given the strict basin of `m` as a mask.
///
/// Every minimal path from `s` to a tied `m'` runs inside the sublevel set at the
/// common barrier, so it avoids `V_<(m)` exactly when `s` and `m'` stay connected
/// there after removing `V_<(m)`.
pub fn attracted_with(
    l: &Landscape,
    table: &SaddleTable,
    s: State,
    m: State,
    minima: &[State],
    strict_m: &[bool],
) -> bool {
    let e = table.energy(s, m);
    for &o in minima {
        if o == m {
            continue;
        }
        let eo = table.energy(s, o);
        if eo < e || (eo == e && sublevel_connected(l, s, o, eo, strict_m)) {
            return false;
        }
    }
    true
}

pub fn attracted(l: &Landscape, table: &SaddleTable, s: State, m: State, minima: &[State]) -> bool {
    let strict = mask(l.n(), &strict_basin(l, table, minima, m));
    attracted_with(l, table, s, m, minima, &strict)
}

/// Outer boundary `∂⁺V`: states outside `v` with a neighbor inside.
pub fn outer_boundary(l: &Landscape, v: &[State]) -> Vec<State> {
    let inside = mask(l.n(), v);
    l.states().filter(|&s| !inside[s] && l.neighbors(s).iter().any(|&t| inside[t])).collect()
}

fn gate(l: &Landscape, v: &[State]) -> Option<State> {
    outer_boundary(l, v).into_iter().min_by(|&a, &b| l.energy(a).total_cmp(&l.energy(b)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PendingValley {
    /// `j` with `m^(j)` the owning minimum.
    pub index: usize,
    /// `V^(j)(m^(j))`, frozen at the minimum's last level.
    pub valley: Vec<State>,
    /// `V_<^(j)(m^(j))`.
    pub strict: Vec<State>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Attraction {
    pub target: State,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValleyDecomposition {
    pub level: usize,
    pub minima: Vec<State>,
    pub strict: BTreeMap<State, Vec<State>>,
    pub valley: BTreeMap<State, Vec<State>>,
    /// Minima deleted before this level and not yet absorbed: `l(j) > level`.
    pub pending: BTreeMap<State, PendingValley>,
    pub nonassigned: Vec<State>,
    /// First assignment of every non-minimum state assigned by this level.
    pub attracted_at: BTreeMap<State, Attraction>,
    /// Absorption of deleted minima into surviving ones, up to this level.
    pub merged_into: BTreeMap<State, Attraction>,
    /// `j ↦ l(j)`; `None` is the terminal minimum's `∞`.
    pub merge_level: BTreeMap<usize, Option<usize>>,
    /// `s_m` for every metastable metastate; absent at the terminal level.
    pub exit_gate: BTreeMap<State, State>,
}

impl ValleyDecomposition {
    /// `S^(i) \ N^(i)`: surviving minima plus pending ones.
    pub fn metastable(&self) -> Vec<State> {
        let mut out: Vec<State> = self.minima.iter().chain(self.pending.keys()).copied().collect();
        out.sort_unstable();
        out
    }

    /// Valley of a metastable metastate (frozen one for pending minima).
    pub fn valley_of(&self, m: State) -> Option<&[State]> {
        self.valley
            .get(&m)
            .map(Vec::as_slice)
            .or_else(|| self.pending.get(&m).map(|p| p.valley.as_slice()))
    }

    pub fn strict_of(&self, m: State) -> Option<&[State]> {
        self.strict
            .get(&m)
            .map(Vec::as_slice)
            .or_else(|| self.pending.get(&m).map(|p| p.strict.as_slice()))
    }

    pub fn is_nonassigned(&self, s: State) -> bool {
        self.nonassigned.binary_search(&s).is_ok()
    }

    /// Owner of every state: the metastable metastate whose valley holds it, or
    /// the state itself when non-assigned.
    pub fn owner_map(&self, n: usize) -> Vec<State> {
        let mut owner: Vec<State> = (0..n).collect();
        for m in self.metastable() {
            for &s in self.valley_of(m).unwrap() {
                owner[s] = m;
            }
        }
        owner
    }
}

/// All levels `1..=𝔫`, in order.
pub fn decompose_all(l: &Landscape, f: &Filtration) -> Vec<ValleyDecomposition> {
    let table = saddle_table(l);
    decompose_all_with(l, &table, f)
}

pub fn decompose_all_with(l: &Landscape, table: &SaddleTable, f: &Filtration) -> Vec<ValleyDecomposition> {
    let n = l.n();
    let mut out: Vec<ValleyDecomposition> = Vec::with_capacity(f.levels);
    let mut pending: BTreeMap<State, PendingValley> = BTreeMap::new();
    let mut attracted_at = BTreeMap::new();
    let mut merged_into = BTreeMap::new();
    let mut merge_level: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    for i in 1..=f.levels {
        let minima = f.minima(i);
        let strict: BTreeMap<State, Vec<State>> =
            minima.iter().map(|&m| (m, strict_basin(l, table, &minima, m))).collect();
        let masks: BTreeMap<State, Vec<bool>> =
            strict.iter().map(|(&m, v)| (m, mask(n, v))).collect();
        let is_min = mask(n, &minima);
        let mut valley: BTreeMap<State, Vec<State>> = BTreeMap::new();
        let mut claimed: Vec<Option<State>> = vec![None; n];
        let claim = |s: State, m: State, claimed: &mut Vec<Option<State>>| {
            if let Some(o) = claimed[s] {
                panic!("state {s} attracted by both {o} and {m} at level {i}");
            }
            claimed[s] = Some(m);
        };
        let candidates: Vec<State> = if i == 1 {
            l.states().collect()
        } else {
            out[i - 2].nonassigned.clone()
        };
        for &m in &minima {
            let mut v = if i == 1 { Vec::new() } else { out[i - 2].valley[&m].clone() };
            for &s in &candidates {
                if (s == m || !is_min[s]) && attracted_with(l, table, s, m, &minima, &masks[&m]) {
                    claim(s, m, &mut claimed);
                    v.push(s);
                    if s != m {
                        attracted_at.insert(s, Attraction { target: m, level: i });
                    }
                }
            }
            valley.insert(m, v);
        }
        let mut absorbed = Vec::new();
        for (&p, pv) in &pending {
            for &m in &minima {
                if attracted_with(l, table, p, m, &minima, &masks[&m]) {
                    claim(p, m, &mut claimed);
                    absorbed.push((p, m, pv.index));
                }
            }
        }
        for (p, m, j) in absorbed {
            let pv = pending.remove(&p).unwrap();
            valley.get_mut(&m).unwrap().extend_from_slice(&pv.valley);
            merged_into.insert(p, Attraction { target: m, level: i });
            merge_level.insert(j, Some(i));
        }
        for v in valley.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let mut covered = vec![false; n];
        for v in valley.values().chain(pending.values().map(|p| &p.valley)) {
            for &s in v {
                assert!(!covered[s], "valleys overlap at state {s}, level {i}");
                covered[s] = true;
            }
        }
        let nonassigned: Vec<State> = l.states().filter(|&s| !covered[s]).collect();
        let mut exit_gate = BTreeMap::new();
        for (&m, v) in valley.iter() {
            if let Some(g) = gate(l, v) {
                exit_gate.insert(m, g);
            }
        }
        for (&m, pv) in &pending {
            exit_gate.insert(m, gate(l, &pv.valley).expect("pending valley is proper"));
        }
        let d = ValleyDecomposition {
            level: i,
            minima: minima.clone(),
            strict: strict.clone(),
            valley,
            pending: pending.clone(),
            nonassigned,
            attracted_at: attracted_at.clone(),
            merged_into: merged_into.clone(),
            merge_level: BTreeMap::new(),
            exit_gate,
        };
        if i < f.levels {
            let leaving = f.minimum(i);
            pending.insert(
                leaving,
                PendingValley {
                    index: i,
                    valley: d.valley[&leaving].clone(),
                    strict: strict[&leaving].clone(),
                },
            );
        }
        out.push(d);
    }
    assert!(pending.is_empty(), "every deleted minimum merges by the terminal level");
    merge_level.insert(f.levels, None);
    for d in &mut out {
        d.merge_level = merge_level.clone();
    }
    out
}

pub fn decompose(l: &Landscape, f: &Filtration, i: usize) -> Result<ValleyDecomposition> {
    if i == 0 || i > f.levels {
        return Err(Error::LevelOutOfRange { level: i, max: f.levels });
    }
    Ok(decompose_all(l, f).swap_remove(i - 1))
}

/// `(η₁, η₂, η₃)`; `None` marks a minimum over an empty index set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConnectivityParams {
    pub eta1: Option<usize>,
    pub eta2: Option<usize>,
    pub eta3: Option<usize>,
}

pub fn connectivity_params(l: &Landscape, d: &ValleyDecomposition, eps: f64) -> Result<ConnectivityParams> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let n = l.n();
    let metastable = d.metastable();
    let mut metastates: Vec<(State, Vec<State>)> =
        metastable.iter().map(|&m| (m, d.valley_of(m).unwrap().to_vec())).collect();
    metastates.extend(d.nonassigned.iter().map(|&s| (s, vec![s])));
    let mut eta1: Option<usize> = None;
    let mut eta3: Option<usize> = None;
    for &x in &d.nonassigned {
        let cut = l.energy(x) + eps;
        let nb = l.neighbors(x);
        let mut reachable = 0;
        for (_, v) in &metastates {
            let inside = mask(n, v);
            if nb.iter().any(|&s| inside[s]) {
                let c = nb.iter().filter(|&&s| !inside[s] && l.energy(s) <= cut).count();
                eta1 = Some(eta1.map_or(c, |e| e.min(c)));
            }
            if nb.iter().any(|&s| inside[s] && l.energy(s) <= cut) {
                reachable += 1;
            }
        }
        eta3 = Some(eta3.map_or(reachable, |e| e.min(reachable)));
    }
    let mut eta2: Option<usize> = None;
    for &m in &metastable {
        let Some(&g) = d.exit_gate.get(&m) else { continue };
        let cut = l.energy(g) + eps;
        let c = outer_boundary(l, d.valley_of(m).unwrap()).iter().filter(|&&s| l.energy(s) <= cut).count();
        eta2 = Some(eta2.map_or(c, |e| e.min(c)));
    }
    Ok(ConnectivityParams { eta1, eta2, eta3 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValleyTree {
    pub root: State,
    /// Layer `g` (0-based here) holds `M^(𝔫-g-1) ∪ N^(𝔫-g-1)`.
    pub generations: Vec<Vec<State>>,
    /// `parents[g][k]`: parent of `generations[g][k]`; layer 0 hangs off the root.
    pub parents: Vec<Vec<State>>,
}

pub fn build_tree(l: &Landscape, f: &Filtration, levels: &[ValleyDecomposition]) -> ValleyTree {
    let table = saddle_table(l);
    let top = f.levels;
    let layer = |i: usize| -> Vec<State> {
        if i == 0 {
            return l.states().collect();
        }
        let d = &levels[i - 1];
        let mut v: Vec<State> = d.minima.iter().chain(&d.nonassigned).copied().collect();
        v.sort_unstable();
        v
    };
    let mut generations = Vec::new();
    let mut parents = Vec::new();
    for g in 1..=top {
        let i = top - g;
        let nodes = layer(i);
        let ps: Vec<State> = if g == 1 {
            vec![f.survivor(); nodes.len()]
        } else {
            let prev = layer(i + 1);
            let d = &levels[i];
            nodes
                .iter()
                .map(|&x| {
                    if prev.contains(&x) {
                        return x;
                    }
                    if let Some((&m, _)) = d.valley.iter().find(|(_, v)| v.contains(&x)) {
                        return m;
                    }
                    *prev
                        .iter()
                        .min_by(|&&a, &&b| {
                            table
                                .energy(x, a)
                                .total_cmp(&table.energy(x, b))
                                .then(l.energy(b).total_cmp(&l.energy(a)))
                        })
                        .unwrap()
                })
                .collect()
        };
        generations.push(nodes);
        parents.push(ps);
    }
    ValleyTree { root: f.survivor(), generations, parents }
}

impl ValleyTree {
    pub fn to_dot(&self, l: &Landscape) -> String {
        let mut s = String::from("digraph valley_tree {\n  rankdir=TB;\n  root [label=\"root\"];\n");
        for (g, nodes) in self.generations.iter().enumerate() {
            for &x in nodes {
                let _ = writeln!(s, "  g{}_{} [label=\"{}\"];", g + 1, x, l.label(x));
            }
        }
        for (g, nodes) in self.generations.iter().enumerate() {
            for (k, &x) in nodes.iter().enumerate() {
                let parent = if g == 0 { "root".to_string() } else { format!("g{}_{}", g, self.parents[g][k]) };
                let _ = writeln!(s, "  {} -> g{}_{};", parent, g + 1, x);
            }
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::scoppola_filtration;
    use crate::landscape::canonical;

    fn l6_levels() -> (Landscape, Filtration, Vec<ValleyDecomposition>) {
        let l = canonical("L6").unwrap();
        let f = scoppola_filtration(&l);
        let d = decompose_all(&l, &f);
        (l, f, d)
    }

    #[test]
    fn l6_strict_basins() {
        let l = canonical("L6").unwrap();
        let t = saddle_table(&l);
        assert_eq!(strict_basin(&l, &t, &[0, 2, 4], 4), vec![4, 5]);
        assert_eq!(strict_basin(&l, &t, &[0, 2, 4], 0), vec![0]);
        assert_eq!(strict_basin(&l, &t, &[0, 4], 0), vec![0, 1, 2]);
    }

    #[test]
    fn l6_attraction() {
        let l = canonical("L6").unwrap();
        let t = saddle_table(&l);
        assert!(!attracted(&l, &t, 1, 0, &[0, 2, 4]));
        assert!(!attracted(&l, &t, 1, 2, &[0, 2, 4]));
        assert!(attracted(&l, &t, 1, 0, &[0, 4]));
        assert!(!attracted(&l, &t, 3, 0, &[0, 4]));
        assert!(!attracted(&l, &t, 3, 4, &[0, 4]));
    }

    #[test]
    fn l6_levels_by_hand() {
        let (_, _, d) = l6_levels();
        assert_eq!(d[0].valley[&0], vec![0]);
        assert_eq!(d[0].valley[&2], vec![2]);
        assert_eq!(d[0].valley[&4], vec![4, 5]);
        assert_eq!(d[0].nonassigned, vec![1, 3]);
        assert_eq!(d[1].valley[&0], vec![0, 1, 2]);
        assert_eq!(d[1].valley[&4], vec![4, 5]);
        assert_eq!(d[1].nonassigned, vec![3]);
        assert_eq!(d[2].valley[&4], vec![0, 1, 2, 3, 4, 5]);
        assert!(d[2].nonassigned.is_empty());
        // l(1) = 2 for m^(1) = 2, l(2) = 3 for m^(2) = 0, l(3) = ∞
        let ml = &d[0].merge_level;
        assert_eq!(ml[&1], Some(2));
        assert_eq!(ml[&2], Some(3));
        assert_eq!(ml[&3], None);
        assert_eq!(d[0].exit_gate[&2], 1);
        assert_eq!(d[1].exit_gate[&0], 3);
        assert!(d[2].exit_gate.is_empty());
        assert!(d[0].pending.is_empty());
        assert!(d[1].pending.is_empty());
    }

    #[test]
    fn level_out_of_range() {
        let (l, f, _) = l6_levels();
        assert!(matches!(decompose(&l, &f, 0), Err(Error::LevelOutOfRange { .. })));
        assert!(matches!(decompose(&l, &f, 4), Err(Error::LevelOutOfRange { .. })));
        assert_eq!(decompose(&l, &f, 2).unwrap().nonassigned, vec![3]);
    }

    #[test]
    fn l6_connectivity() {
        let (l, _, d) = l6_levels();
        let c = connectivity_params(&l, &d[1], 0.5).unwrap();
        assert_eq!((c.eta1, c.eta2, c.eta3), (Some(1), Some(1), Some(2)));
        let c = connectivity_params(&l, &d[0], 1e9).unwrap();
        assert_eq!(c.eta2, Some(1));
        assert!(connectivity_params(&l, &d[0], 0.0).is_err());
    }

    #[test]
    fn l6_tree() {
        let (l, f, d) = l6_levels();
        let t = build_tree(&l, &f, &d);
        assert_eq!(t.generations[0], vec![0, 3, 4]);
        assert_eq!(t.parents[0], vec![4, 4, 4]);
        assert_eq!(t.generations[1], vec![0, 1, 2, 3, 4]);
        assert_eq!(t.parents[1], vec![0, 0, 0, 3, 4]);
        assert_eq!(t.generations[2], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(t.parents[2], vec![0, 1, 2, 3, 4, 4]);
        let dot = t.to_dot(&l);
        assert!(!dot.contains("g2_0 -> g3_5"));
        assert!(dot.contains("g2_4 -> g3_5"));
    }

    #[test]
    fn one_minimum_star() {
        let l = Landscape::path(0, vec![0.0, 1.0, 2.0]).unwrap();
        let f = scoppola_filtration(&l);
        let d = decompose_all(&l, &f);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].valley[&0], vec![0, 1, 2]);
        let t = build_tree(&l, &f, &d);
        assert_eq!(t.generations, vec![vec![0, 1, 2]]);
        assert!(t.parents[0].iter().all(|&p| p == 0));
    }
}
