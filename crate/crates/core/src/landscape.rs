//! Finite energy landscapes: states, energies, a symmetric neighbor relation
//! and optional embedding coordinates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense internal state index, `0..n`.
pub type State = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    labels: Vec<i64>,
    energy: Vec<f64>,
    adjacency: Vec<Vec<State>>,
    coords: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub connected: bool,
    pub symmetric: bool,
    pub nondegenerate: bool,
    /// Smallest positive difference between two energies; `+inf` for one state.
    pub min_energy_gap: f64,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.connected && self.symmetric && self.nondegenerate
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRecord {
    id: i64,
    energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coord: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neighbors: Option<Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LandscapeFile {
    states: Vec<StateRecord>,
    #[serde(default)]
    edges: Vec<[i64; 2]>,
}

impl Landscape {
    /// Builds a landscape from external labels, energies, undirected edges (by
    /// label, each listed once) and optional coordinates.
    ///
    /// Structural problems (duplicate ids, duplicate or dangling edges, self loops)
    /// are errors. Connectivity and energy degeneracy are not checked here; see
    /// [`Landscape::new`] and [`validate`].
    pub fn from_parts(
        labels: Vec<i64>,
        energy: Vec<f64>,
        edges: &[(i64, i64)],
        coords: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        if labels.len() != energy.len() {
            return Err(Error::InvalidArgument("labels and energies differ in length".into()));
        }
        if let Some(c) = &coords {
            if c.len() != labels.len() {
                return Err(Error::InvalidArgument("coordinate count differs from state count".into()));
            }
        }
        if let Some(&bad) = energy.iter().find(|e| !e.is_finite()) {
            return Err(Error::Parse(format!("non-finite energy {bad}")));
        }
        let mut index = BTreeMap::new();
        for (i, &lab) in labels.iter().enumerate() {
            if index.insert(lab, i).is_some() {
                return Err(Error::DuplicateState(lab));
            }
        }
        let n = labels.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(a, b) in edges {
            let ia = *index.get(&a).ok_or(Error::UnknownState(a))?;
            let ib = *index.get(&b).ok_or(Error::UnknownState(b))?;
            if ia == ib {
                return Err(Error::SelfLoop(a));
            }
            if !seen.insert((ia.min(ib), ia.max(ib))) {
                return Err(Error::DuplicateEdge(a, b));
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { labels, energy, adjacency, coords })
    }

    /// [`Landscape::from_parts`] followed by full validation.
    pub fn new(
        labels: Vec<i64>,
        energy: Vec<f64>,
        edges: &[(i64, i64)],
        coords: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let l = Self::from_parts(labels, energy, edges, coords)?;
        l.require_valid()?;
        Ok(l)
    }

    /// Path graph over labels `first..first+n` with coordinates equal to the index.
    pub fn path(first: i64, energy: Vec<f64>) -> Result<Self> {
        let n = energy.len() as i64;
        let labels: Vec<i64> = (first..first + n).collect();
        let edges: Vec<(i64, i64)> = (first..first + n - 1).map(|a| (a, a + 1)).collect();
        let coords = Some((0..n).map(|i| vec![i as f64]).collect());
        Self::new(labels, energy, &edges, coords)
    }

    fn require_valid(&self) -> Result<()> {
        let mut order: Vec<State> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.energy[a].total_cmp(&self.energy[b]));
        for w in order.windows(2) {
            if self.energy[w[0]] == self.energy[w[1]] {
                return Err(Error::DegenerateEnergies(
                    self.labels[w[0]],
                    self.labels[w[1]],
                    self.energy[w[0]],
                ));
            }
        }
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn states(&self) -> std::ops::Range<State> {
        0..self.n()
    }

    pub fn energy(&self, s: State) -> f64 {
        self.energy[s]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energy
    }

    pub fn neighbors(&self, s: State) -> &[State] {
        &self.adjacency[s]
    }

    pub fn degree(&self, s: State) -> usize {
        self.adjacency[s].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_adjacent(&self, a: State, b: State) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> Vec<(State, State)> {
        let mut out = Vec::new();
        for a in self.states() {
            for &b in &self.adjacency[a] {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn label(&self, s: State) -> i64 {
        self.labels[s]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn index_of(&self, label: i64) -> Option<State> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Internal indices for a list of labels; panics on unknown labels.
    pub fn indices(&self, labels: &[i64]) -> Vec<State> {
        labels
            .iter()
            .map(|&l| self.index_of(l).unwrap_or_else(|| panic!("unknown label {l}")))
            .collect()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Euclidean distance between embedded states.
    pub fn distance(&self, a: State, b: State) -> Result<f64> {
        let c = self.coords.as_ref().ok_or(Error::MissingCoordinates)?;
        Ok(c[a].iter().zip(&c[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Adds undirected edges between existing states (by label).
    pub fn with_extra_edges(&self, extra: &[(i64, i64)]) -> Result<Self> {
        let mut edges: Vec<(i64, i64)> =
            self.edges().into_iter().map(|(a, b)| (self.labels[a], self.labels[b])).collect();
        edges.extend_from_slice(extra);
        Self::new(self.labels.clone(), self.energy.clone(), &edges, self.coords.clone())
    }

    /// Serializes to the landscape JSON schema (edges listed once).
    pub fn to_json(&self) -> String {
        let file = LandscapeFile {
            states: self
                .states()
                .map(|s| StateRecord {
                    id: self.labels[s],
                    energy: self.energy[s],
                    coord: self.coords.as_ref().map(|c| c[s].clone()),
                    neighbors: None,
                })
                .collect(),
            edges: self.edges().into_iter().map(|(a, b)| [self.labels[a], self.labels[b]]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("landscape serializes")
    }

    /// Parses the landscape JSON schema and validates the result.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LandscapeFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let labels: Vec<i64> = file.states.iter().map(|s| s.id).collect();
        let energy: Vec<f64> = file.states.iter().map(|s| s.energy).collect();
        let mut edges: Vec<(i64, i64)> = file.edges.iter().map(|e| (e[0], e[1])).collect();

        // Optional per-state neighbor lists must describe a symmetric relation.
        let lists: BTreeMap<i64, BTreeSet<i64>> = file
            .states
            .iter()
            .filter_map(|s| s.neighbors.as_ref().map(|n| (s.id, n.iter().copied().collect())))
            .collect();
        for (&a, ns) in &lists {
            for &b in ns {
                let back = lists.get(&b).is_some_and(|m| m.contains(&a));
                if !back {
                    return Err(Error::AsymmetricAdjacency(a, b));
                }
                if a < b {
                    edges.push((a, b));
                }
            }
        }

        let coords = match file.states.iter().filter(|s| s.coord.is_some()).count() {
            0 => None,
            k if k == file.states.len() => {
                Some(file.states.iter().map(|s| s.coord.clone().unwrap()).collect())
            }
            _ => return Err(Error::Parse("coordinates given for some states only".into())),
        };
        Self::new(labels, energy, &edges, coords)
    }
}

/// Reads and validates a landscape file.
pub fn load_landscape(path: &Path) -> Result<Landscape> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Landscape::from_json(&text)
}

pub fn validate(l: &Landscape) -> ValidationReport {
    let symmetric = l.states().all(|a| {
        l.neighbors(a).iter().all(|&b| b != a && l.neighbors(b).binary_search(&a).is_ok())
    });
    let mut sorted = l.energies().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut min_gap = f64::INFINITY;
    let mut nondegenerate = true;
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            nondegenerate = false;
        } else {
            min_gap = min_gap.min(gap);
        }
    }
    ValidationReport { connected: l.is_connected(), symmetric, nondegenerate, min_energy_gap: min_gap }
}

const L6_JSON: &str = include_str!("../fixtures/L6.json");
const L14_JSON: &str = include_str!("../fixtures/L14.json");
const L14X_JSON: &str = include_str!("../fixtures/L14X.json");

/// The fixture landscapes `L6`, `L14` and `L14X`.
pub fn canonical(name: &str) -> Result<Landscape> {
    let text = match name {
        "L6" => L6_JSON,
        "L14" => L14_JSON,
        "L14X" => L14X_JSON,
        other => return Err(Error::UnknownCanonical(other.to_string())),
    };
    Landscape::from_json(text)
}

pub const CANONICAL_NAMES: [&str; 3] = ["L6", "L14", "L14X"];

/// Random connected landscape with at most `max_degree` neighbors per state and
/// energies pairwise at least `min_gap` apart.
pub fn gen_random_landscape(n: usize, max_degree: usize, min_gap: f64, seed: u64) -> Result<Landscape> {
    if n < 2 {
        return Err(Error::Infeasible(format!("n = {n} < 2")));
    }
    if !(min_gap > 0.0) {
        return Err(Error::Infeasible(format!("min_gap = {min_gap} must be positive")));
    }
    if max_degree < 1 || (max_degree < 2 && n > 2) {
        return Err(Error::Infeasible(format!("max_degree = {max_degree} cannot connect {n} states")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| degree[u] < max_degree).collect();
        let u = *open.choose(&mut rng).expect("a path always leaves an open endpoint");
        edges.insert((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && degree[a] < max_degree && degree[b] < max_degree && edges.insert(key) {
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    let mut level = 0.0;
    let mut energies = Vec::with_capacity(n);
    for _ in 0..n {
        energies.push(level);
        level += min_gap * (1.0 + 2.0 * rng.gen::<f64>());
    }
    energies.shuffle(&mut rng);
    let labels: Vec<i64> = (0..n as i64).collect();
    let edge_list: Vec<(i64, i64)> = edges.into_iter().map(|(a, b)| (a as i64, b as i64)).collect();
    let coords = Some((0..n).map(|i| vec![i as f64]).collect());
    Landscape::new(labels, energies, &edge_list, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l6_shape() {
        let l = canonical("L6").unwrap();
        assert_eq!(l.n(), 6);
        assert_eq!(l.edges().len(), 5);
        assert_eq!(l.energies(), &[1.0, 5.0, 2.0, 6.0, 0.0, 4.0]);
        let r = validate(&l);
        assert!(r.all_ok());
        assert_eq!(r.min_energy_gap, 1.0);
    }

    #[test]
    fn json_round_trip() {
        for name in CANONICAL_NAMES {
            let l = canonical(name).unwrap();
            assert_eq!(Landscape::from_json(&l.to_json()).unwrap(), l);
        }
    }

    #[test]
    fn degenerate_energies_rejected() {
        let text = r#"{"states":[{"id":0,"energy":1.0},{"id":1,"energy":1.0}],"edges":[[0,1]]}"#;
        let err = Landscape::from_json(text).unwrap_err();
        assert!(err.to_string().contains("degenerate energies"), "{err}");
    }

    #[test]
    fn asymmetric_neighbor_lists_rejected() {
        let text = r#"{"states":[
            {"id":2,"energy":1.0,"neighbors":[3]},
            {"id":3,"energy":2.0,"neighbors":[]}]}"#;
        let err = Landscape::from_json(text).unwrap_err();
        assert!(err.to_string().contains("asymmetric adjacency"), "{err}");
    }

    #[test]
    fn symmetric_neighbor_lists_accepted() {
        let text = r#"{"states":[
            {"id":2,"energy":1.0,"neighbors":[3]},
            {"id":3,"energy":2.0,"neighbors":[2]}]}"#;
        let l = Landscape::from_json(text).unwrap();
        assert!(l.is_adjacent(0, 1));
    }

    #[test]
    fn duplicate_ids_and_edges_rejected() {
        let dup = r#"{"states":[{"id":0,"energy":1.0},{"id":0,"energy":2.0}],"edges":[]}"#;
        assert!(matches!(Landscape::from_json(dup), Err(Error::DuplicateState(0))));
        let twice = r#"{"states":[{"id":0,"energy":1.0},{"id":1,"energy":2.0}],"edges":[[0,1],[1,0]]}"#;
        assert!(matches!(Landscape::from_json(twice), Err(Error::DuplicateEdge(1, 0))));
        assert!(matches!(Landscape::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn single_state_gap_is_infinite() {
        let l = Landscape::new(vec![0], vec![3.0], &[], None).unwrap();
        let r = validate(&l);
        assert!(r.connected);
        assert_eq!(r.min_energy_gap, f64::INFINITY);
    }

    #[test]
    fn disconnected_reported() {
        let l = Landscape::from_parts(vec![0, 1, 2, 3], vec![0.0, 1.0, 2.0, 3.0], &[(0, 1), (2, 3)], None)
            .unwrap();
        assert!(!validate(&l).connected);
        assert!(matches!(
            Landscape::new(vec![0, 1, 2, 3], vec![0.0, 1.0, 2.0, 3.0], &[(0, 1), (2, 3)], None),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn generator_contract() {
        let a = gen_random_landscape(8, 3, 0.1, 7).unwrap();
        let b = gen_random_landscape(8, 3, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let r = validate(&a);
        assert!(r.all_ok());
        assert!(r.min_energy_gap >= 0.1 - 1e-12);
        assert!(a.max_degree() <= 3);
        for seed in 0..100 {
            assert!(validate(&gen_random_landscape(10, 3, 0.1, seed).unwrap()).all_ok());
        }
        assert!(matches!(gen_random_landscape(5, 1, 0.1, 0), Err(Error::Infeasible(_))));
        assert!(matches!(gen_random_landscape(1, 3, 0.1, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unknown_canonical() {
        assert!(matches!(canonical("L7"), Err(Error::UnknownCanonical(_))));
    }

    #[test]
    fn missing_coordinates() {
        let l = Landscape::new(vec![0, 1], vec![0.0, 1.0], &[(0, 1)], None).unwrap();
        assert!(matches!(l.distance(0, 1), Err(Error::MissingCoordinates)));
    }
}
