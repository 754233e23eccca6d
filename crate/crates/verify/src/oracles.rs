//! Exhaustive reference implementations over enumerated self-avoiding paths.

use std::collections::{BTreeMap, BTreeSet};

use metabasin::{Landscape, State};

/// Calls `visit` on every self-avoiding path starting at `from`, including `(from)`.
pub fn for_each_path(l: &Landscape, from: State, mut visit: impl FnMut(&[State])) {
    let mut path = vec![from];
    let mut on = vec![false; l.n()];
    on[from] = true;
    fn go(l: &Landscape, path: &mut Vec<State>, on: &mut [bool], visit: &mut dyn FnMut(&[State])) {
        visit(path);
        let u = *path.last().unwrap();
        for &w in l.neighbors(u) {
            if !on[w] {
                on[w] = true;
                path.push(w);
                go(l, path, on, visit);
                path.pop();
                on[w] = false;
            }
        }
    }
    go(l, &mut path, &mut on, &mut visit);
}

/// All self-avoiding paths from `from` to `to`.
pub fn paths_between(l: &Landscape, from: State, to: State) -> Vec<Vec<State>> {
    let mut out = Vec::new();
    for_each_path(l, from, |p| {
        if p.len() > 1 && *p.last().unwrap() == to {
            out.push(p.to_vec());
        }
    });
    out
}

fn peak(l: &Landscape, p: &[State]) -> State {
    *p.iter().max_by(|&&a, &&b| l.energy(a).total_cmp(&l.energy(b))).unwrap()
}

/// Minimax saddles over all self-avoiding paths, endpoints included; `z(s,s) = s`.
pub struct BruteSaddles {
    pub saddle: Vec<Vec<State>>,
}

impl BruteSaddles {
    pub fn new(l: &Landscape) -> Self {
        let n = l.n();
        let mut saddle: Vec<Vec<State>> = (0..n).map(|r| vec![r; n]).collect();
        for r in 0..n {
            let mut best = vec![f64::INFINITY; n];
            best[r] = l.energy(r);
            for_each_path(l, r, |p| {
                let t = *p.last().unwrap();
                let z = peak(l, p);
                if l.energy(z) < best[t] {
                    best[t] = l.energy(z);
                    saddle[r][t] = z;
                }
            });
        }
        Self { saddle }
    }

    pub fn energy(&self, l: &Landscape, r: State, s: State) -> f64 {
        l.energy(self.saddle[r][s])
    }
}

/// Least cumulative climb over self-avoiding paths.
pub fn brute_activation(l: &Landscape, s: State, m: State) -> f64 {
    let mut best = f64::INFINITY;
    for p in paths_between(l, s, m) {
        let c: f64 = p.windows(2).map(|w| (l.energy(w[1]) - l.energy(w[0])).max(0.0)).sum();
        best = best.min(c);
    }
    best
}

pub fn brute_local_minima(l: &Landscape) -> Vec<State> {
    l.states().filter(|&s| l.neighbors(s).iter().all(|&r| l.energy(r) > l.energy(s))).collect()
}

/// Deletion order `m^(1), ..., m^(𝔫)`; ties within `1e-9` go to the higher minimum.
pub fn brute_filtration(l: &Landscape) -> (Vec<State>, Vec<f64>) {
    let mut alive = brute_local_minima(l);
    let mut order = Vec::new();
    let mut costs = Vec::new();
    while alive.len() > 1 {
        let scored: Vec<(State, f64)> = alive
            .iter()
            .map(|&a| {
                let c = alive.iter().filter(|&&b| b != a).map(|&b| brute_activation(l, a, b)).fold(f64::INFINITY, f64::min);
                (a, c)
            })
            .collect();
        let low = scored.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let (pick, cost) = scored
            .iter()
            .filter(|x| (x.1 - low).abs() <= 1e-9 * (1.0 + low.abs()))
            .max_by(|a, b| l.energy(a.0).total_cmp(&l.energy(b.0)))
            .copied()
            .unwrap();
        order.push(pick);
        costs.push(cost);
        alive.retain(|&a| a != pick);
    }
    order.push(alive[0]);
    (order, costs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteLevel {
    pub strict: BTreeMap<State, BTreeSet<State>>,
    /// Valleys of `M^(i)` together with the frozen valleys of deleted minima.
    pub valleys: BTreeMap<State, BTreeSet<State>>,
    pub nonassigned: BTreeSet<State>,
}

/// Valleys at every level straight from the definitions.
pub struct BruteValleys<'a> {
    l: &'a Landscape,
    z: BruteSaddles,
    order: Vec<State>,
}

impl<'a> BruteValleys<'a> {
    pub fn new(l: &'a Landscape, order: Vec<State>) -> Self {
        Self { l, z: BruteSaddles::new(l), order }
    }

    fn e(&self, a: State, b: State) -> f64 {
        self.z.energy(self.l, a, b)
    }

    fn minima(&self, i: usize) -> &[State] {
        &self.order[i - 1..]
    }

    pub fn strict(&self, i: usize, m: State) -> BTreeSet<State> {
        let others: Vec<State> = self.minima(i).iter().copied().filter(|&x| x != m).collect();
        self.l
            .states()
            .filter(|&s| s == m || others.iter().all(|&o| self.e(s, m) < self.e(s, o)))
            .collect()
    }

    pub fn attracted(&self, i: usize, s: State, m: State) -> bool {
        let ms = self.minima(i);
        let low = ms.iter().map(|&n| self.e(s, n)).fold(f64::INFINITY, f64::min);
        if self.e(s, m) != low {
            return false;
        }
        let core = self.strict(i, m);
        ms.iter().filter(|&&o| o != m && self.e(s, o) == low).all(|&o| {
            paths_between(self.l, s, o)
                .iter()
                .filter(|p| self.l.energy(peak(self.l, p)) == low)
                .all(|p| p[1..].iter().any(|x| core.contains(x)))
        })
    }

    fn merge_level(&self, j: usize) -> Option<usize> {
        let mj = self.order[j - 1];
        (j + 1..=self.order.len()).find(|&k| self.minima(k).iter().any(|&m| self.attracted(k, mj, m)))
    }

    pub fn levels(&self) -> Vec<BruteLevel> {
        let l = self.l;
        let big_n = self.order.len();
        let merge: Vec<Option<usize>> = (1..=big_n).map(|j| self.merge_level(j)).collect();
        // frozen[j-1] = V^(j)(m^(j)) once level j is built
        let mut frozen: Vec<BTreeSet<State>> = vec![BTreeSet::new(); big_n];
        let mut current: BTreeMap<State, BTreeSet<State>> = BTreeMap::new();
        let mut nonassigned: BTreeSet<State> = BTreeSet::new();
        let mut out = Vec::new();
        for i in 1..=big_n {
            let mut next = BTreeMap::new();
            for &m in self.minima(i) {
                let mut v: BTreeSet<State> = if i == 1 {
                    l.states().filter(|&s| self.attracted(1, s, m)).collect()
                } else {
                    let mut v = current[&m].clone();
                    v.extend(nonassigned.iter().copied().filter(|&s| self.attracted(i, s, m)));
                    for j in 1..i {
                        if merge[j - 1] == Some(i) && self.attracted(i, self.order[j - 1], m) {
                            v.extend(frozen[j - 1].iter().copied());
                        }
                    }
                    v
                };
                v.insert(m);
                next.insert(m, v);
            }
            frozen[i - 1] = next[&self.order[i - 1]].clone();
            let mut valleys = next.clone();
            for j in 1..i {
                if merge[j - 1].is_none_or(|lj| lj > i) {
                    valleys.insert(self.order[j - 1], frozen[j - 1].clone());
                }
            }
            let covered: BTreeSet<State> = valleys.values().flatten().copied().collect();
            nonassigned = l.states().filter(|s| !covered.contains(s)).collect();
            let strict = self.minima(i).iter().map(|&m| (m, self.strict(i, m))).collect();
            out.push(BruteLevel { strict, valleys, nonassigned: nonassigned.clone() });
            current = next;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use metabasin::landscape::canonical;

    #[test]
    fn l6_by_enumeration() {
        let l = canonical("L6").unwrap();
        let z = BruteSaddles::new(&l);
        assert_eq!(z.saddle[0][4], 3);
        assert_eq!(z.saddle[5][4], 5);
        assert_eq!(z.energy(&l, 0, 2), 5.0);
        assert_eq!(brute_activation(&l, 2, 0), 3.0);
        assert_eq!(brute_activation(&l, 0, 4), 8.0);
        let (order, costs) = brute_filtration(&l);
        assert_eq!(order, vec![2, 0, 4]);
        assert_eq!(costs, vec![3.0, 8.0]);
        let levels = BruteValleys::new(&l, order).levels();
        let set = |v: &[State]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(levels[0].nonassigned, set(&[1, 3]));
        assert_eq!(levels[1].valleys[&0], set(&[0, 1, 2]));
        assert_eq!(levels[1].valleys[&4], set(&[4, 5]));
        assert_eq!(levels[1].nonassigned, set(&[3]));
        assert_eq!(levels[2].valleys.len(), 1);
        assert!(levels[2].nonassigned.is_empty());
    }

    #[test]
    fn path_counts_on_a_cycle() {
        let l = Landscape::new(vec![0, 1, 2, 3], vec![0.0, 1.0, 2.0, 3.0], &[(0, 1), (1, 2), (2, 3), (3, 0)], None).unwrap();
        assert_eq!(paths_between(&l, 0, 2).len(), 2);
        let mut count = 0;
        for_each_path(&l, 0, |_| count += 1);
        assert_eq!(count, 7);
    }
}
