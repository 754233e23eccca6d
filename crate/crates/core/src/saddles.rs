//! Essential saddles, activation energies and sublevel-set path predicates.
//!
//! Saddles are endpoint-inclusive: the barrier of a path is the largest energy
//! among all of its states, both ends included, and `z*(s, s) = s`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::{Landscape, State};

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleTable {
    n: usize,
    state: Vec<State>,
    energy: Vec<f64>,
}

impl SaddleTable {
    pub fn saddle(&self, r: State, s: State) -> State {
        self.state[r * self.n + s]
    }

    pub fn energy(&self, r: State, s: State) -> f64 {
        self.energy[r * self.n + s]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub states: Vec<State>,
    pub max_energy: f64,
    pub activation: f64,
}

impl PathRecord {
    pub fn from_states(l: &Landscape, states: Vec<State>) -> Self {
        let max_energy = states.iter().map(|&s| l.energy(s)).fold(f64::NEG_INFINITY, f64::max);
        let activation =
            states.windows(2).map(|w| (l.energy(w[1]) - l.energy(w[0])).max(0.0)).sum();
        Self { states, max_energy, activation }
    }
}

struct UnionFind {
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), members: (0..n).map(|i| vec![i]).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`, returning the absorbed member list.
    fn union(&mut self, a: usize, b: usize) -> (usize, Vec<usize>) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, gone) =
            if self.members[ra].len() >= self.members[rb].len() { (ra, rb) } else { (rb, ra) };
        self.parent[gone] = keep;
        let moved = std::mem::take(&mut self.members[gone]);
        self.members[keep].extend_from_slice(&moved);
        (keep, moved)
    }
}

fn energy_order(l: &Landscape) -> Vec<State> {
    let mut order: Vec<State> = l.states().collect();
    order.sort_by(|&a, &b| l.energy(a).total_cmp(&l.energy(b)));
    order
}

/// Single-pair saddle by an incremental sublevel sweep.
pub fn essential_saddle(l: &Landscape, r: State, s: State) -> Result<(State, f64)> {
    if r == s {
        return Err(Error::InvalidArgument(format!("essential saddle of state {r} with itself")));
    }
    let mut uf = UnionFind::new(l.n());
    let mut inserted = vec![false; l.n()];
    for v in energy_order(l) {
        inserted[v] = true;
        for &u in l.neighbors(v) {
            if inserted[u] && uf.find(u) != uf.find(v) {
                uf.union(u, v);
            }
        }
        if inserted[r] && inserted[s] && uf.find(r) == uf.find(s) {
            return Ok((v, l.energy(v)));
        }
    }
    Err(Error::Disconnected)
}

/// All-pairs saddles from one sweep: when a state is inserted, every pair it
/// joins for the first time gets it as saddle.
pub fn saddle_table(l: &Landscape) -> SaddleTable {
    let n = l.n();
    let mut state = vec![usize::MAX; n * n];
    for s in 0..n {
        state[s * n + s] = s;
    }
    let mut uf = UnionFind::new(n);
    let mut inserted = vec![false; n];
    for v in energy_order(l) {
        inserted[v] = true;
        for &u in l.neighbors(v) {
            if !inserted[u] {
                continue;
            }
            let (ru, rv) = (uf.find(u), uf.find(v));
            if ru == rv {
                continue;
            }
            let left = uf.members[ru].clone();
            let right = uf.members[rv].clone();
            for &a in &left {
                for &b in &right {
                    state[a * n + b] = v;
                    state[b * n + a] = v;
                }
            }
            uf.union(u, v);
        }
    }
    assert!(state.iter().all(|&z| z != usize::MAX), "landscape must be connected");
    let energy = state.iter().map(|&z| l.energy(z)).collect();
    SaddleTable { n, state, energy }
}

/// Minimax path by bottleneck Dijkstra (minimize the largest energy seen).
pub fn minimax_path(l: &Landscape, r: State, s: State) -> PathRecord {
    let n = l.n();
    let mut best = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    best[r] = l.energy(r);
    heap.push(Reverse((Key(best[r]), r)));
    while let Some(Reverse((Key(b), u))) = heap.pop() {
        if b > best[u] {
            continue;
        }
        if u == s {
            break;
        }
        for &v in l.neighbors(u) {
            let nb = b.max(l.energy(v));
            if nb < best[v] {
                best[v] = nb;
                prev[v] = u;
                heap.push(Reverse((Key(nb), v)));
            }
        }
    }
    let mut states = vec![s];
    while *states.last().unwrap() != r {
        let p = prev[*states.last().unwrap()];
        assert!(p != usize::MAX, "landscape must be connected");
        states.push(p);
    }
    states.reverse();
    PathRecord::from_states(l, states)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Activation energies `I(s, ·)` from `s` to every state (Dijkstra with step
/// weight `(E(t) - E(u))⁺`).
pub fn activation_from(l: &Landscape, s: State) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; l.n()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((Key(0.0), s)));
    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in l.neighbors(u) {
            let nd = d + (l.energy(v) - l.energy(u)).max(0.0);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Key(nd), v)));
            }
        }
    }
    dist
}

pub fn activation_energy(l: &Landscape, s: State, m: State) -> Result<f64> {
    if s == m {
        return Err(Error::InvalidArgument(format!("activation energy of state {s} with itself")));
    }
    let d = activation_from(l, s)[m];
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Disconnected)
    }
}

/// Whether `s` and `t` are joined inside `{x : E(x) ≤ barrier} \ avoid`.
/// Endpoints outside that set are never connected.
pub fn sublevel_connected(l: &Landscape, s: State, t: State, barrier: f64, avoid: &[bool]) -> bool {
    let allowed = |x: State| l.energy(x) <= barrier && !avoid[x];
    if !allowed(s) || !allowed(t) {
        return false;
    }
    if s == t {
        return true;
    }
    let mut seen = vec![false; l.n()];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in l.neighbors(u) {
            if !seen[v] && allowed(v) {
                if v == t {
                    return true;
                }
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// A self-avoiding path from `from` strictly uphill to `z*(from, to)` and then
/// strictly downhill to `to`, touching no state of `avoid`.
pub fn uphill_downhill_path(
    l: &Landscape,
    table: &SaddleTable,
    from: State,
    to: State,
    avoid: &[bool],
) -> Option<PathRecord> {
    if from == to || avoid[from] || avoid[to] {
        return None;
    }
    let peak = table.saddle(from, to);
    let mut visited = vec![false; l.n()];
    let mut path = vec![from];
    visited[from] = true;
    if udh_search(l, peak, to, avoid, &mut visited, &mut path, from == peak) {
        Some(PathRecord::from_states(l, path))
    } else {
        None
    }
}

fn udh_search(
    l: &Landscape,
    peak: State,
    to: State,
    avoid: &[bool],
    visited: &mut [bool],
    path: &mut Vec<State>,
    descending: bool,
) -> bool {
    let u = *path.last().unwrap();
    if descending && u == to {
        return true;
    }
    for &v in l.neighbors(u) {
        if visited[v] || avoid[v] {
            continue;
        }
        let ok = if descending {
            l.energy(v) < l.energy(u)
        } else {
            l.energy(v) > l.energy(u) && l.energy(v) <= l.energy(peak)
        };
        if !ok {
            continue;
        }
        visited[v] = true;
        path.push(v);
        if udh_search(l, peak, to, avoid, visited, path, descending || v == peak) {
            return true;
        }
        path.pop();
        visited[v] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{canonical, gen_random_landscape};

    #[test]
    fn l6_saddles() {
        let l = canonical("L6").unwrap();
        assert_eq!(essential_saddle(&l, 0, 4).unwrap(), (3, 6.0));
        assert_eq!(essential_saddle(&l, 5, 4).unwrap(), (5, 4.0));
        assert!(essential_saddle(&l, 2, 2).is_err());
        let t = saddle_table(&l);
        assert_eq!(t.energy(0, 2), 5.0);
        assert_eq!(t.energy(2, 4), 6.0);
        assert_eq!(t.energy(0, 4), 6.0);
        assert_eq!(t.saddle(4, 5), 5);
    }

    #[test]
    fn l6_activation() {
        let l = canonical("L6").unwrap();
        assert_eq!(activation_energy(&l, 2, 0).unwrap(), 3.0);
        assert_eq!(activation_energy(&l, 0, 4).unwrap(), 8.0);
        assert_eq!(activation_energy(&l, 3, 4).unwrap(), 0.0);
    }

    #[test]
    fn l6_sublevel() {
        let l = canonical("L6").unwrap();
        let avoid0 = crate::linalg::mask(6, &[0]);
        assert!(sublevel_connected(&l, 1, 2, 5.0, &avoid0));
        assert!(sublevel_connected(&l, 3, 4, 6.0, &crate::linalg::mask(6, &[0, 1, 2])));
        assert!(!sublevel_connected(&l, 1, 4, 5.0, &[false; 6]));
    }

    #[test]
    fn l6_uphill_downhill() {
        let l = canonical("L6").unwrap();
        let t = saddle_table(&l);
        let p = uphill_downhill_path(&l, &t, 3, 4, &[false; 6]).unwrap();
        assert_eq!(p.states, vec![3, 4]);
        assert!(uphill_downhill_path(&l, &t, 1, 4, &crate::linalg::mask(6, &[0])).is_none());
        let p = uphill_downhill_path(&l, &t, 2, 4, &[false; 6]).unwrap();
        assert_eq!(p.states, vec![2, 3, 4]);
        assert_eq!(p.activation, 4.0);
    }

    #[test]
    fn table_matches_single_pair_and_minimax() {
        for seed in 0..30 {
            let l = gen_random_landscape(10, 4, 0.1, seed).unwrap();
            let t = saddle_table(&l);
            for r in l.states() {
                for s in l.states() {
                    assert_eq!(t.saddle(r, s), t.saddle(s, r));
                    if r != s {
                        assert_eq!(essential_saddle(&l, r, s).unwrap().0, t.saddle(r, s));
                        let p = minimax_path(&l, r, s);
                        assert_eq!(p.max_energy, t.energy(r, s));
                    }
                }
            }
        }
    }
}
