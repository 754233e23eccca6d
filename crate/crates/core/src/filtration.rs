//! Successive deletion of the least stable local minimum.

use serde::Serialize;

use crate::landscape::{Landscape, State};
use crate::saddles::activation_from;

/// Relative tolerance under which two deletion costs count as tied.
pub const COST_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Filtration {
    /// `m^(1), ..., m^(𝔫)`; the last entry is the sole survivor.
    pub deletion_order: Vec<State>,
    pub levels: usize,
    /// Minimal activation energy paid by each deleted minimum.
    pub deletion_costs: Vec<f64>,
    n_states: usize,
}

impl Filtration {
    /// `M^(i)`; level 0 is the whole state space.
    pub fn minima(&self, i: usize) -> Vec<State> {
        assert!(i <= self.levels, "level {i} beyond {}", self.levels);
        if i == 0 {
            return (0..self.n_states).collect();
        }
        let mut m = self.deletion_order[i - 1..].to_vec();
        m.sort_unstable();
        m
    }

    /// `m^(j)`, 1-based.
    pub fn minimum(&self, j: usize) -> State {
        self.deletion_order[j - 1]
    }

    /// The 1-based index `j` with `m^(j) = m`.
    pub fn index_of(&self, m: State) -> Option<usize> {
        self.deletion_order.iter().position(|&x| x == m).map(|p| p + 1)
    }

    pub fn survivor(&self) -> State {
        *self.deletion_order.last().unwrap()
    }
}

pub fn local_minima(l: &Landscape) -> Vec<State> {
    l.states().filter(|&s| l.neighbors(s).iter().all(|&r| l.energy(s) < l.energy(r))).collect()
}

pub fn scoppola_filtration(l: &Landscape) -> Filtration {
    let minima = local_minima(l);
    let act: Vec<Vec<f64>> = minima.iter().map(|&m| activation_from(l, m)).collect();
    let mut alive: Vec<usize> = (0..minima.len()).collect();
    let mut order = Vec::new();
    let mut costs = Vec::new();
    while alive.len() > 1 {
        let cost = |a: usize| {
            alive
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| act[a][minima[b]])
                .fold(f64::INFINITY, f64::min)
        };
        let mut pick = alive[0];
        let mut best = cost(pick);
        for &a in &alive[1..] {
            let c = cost(a);
            let tol = COST_TIE_TOL * (1.0 + c.abs().max(best.abs()));
            let tied = (c - best).abs() <= tol;
            if (!tied && c < best) || (tied && l.energy(minima[a]) > l.energy(minima[pick])) {
                pick = a;
                best = c;
            }
        }
        order.push(minima[pick]);
        costs.push(best);
        alive.retain(|&a| a != pick);
    }
    order.push(minima[alive[0]]);
    Filtration { levels: order.len(), deletion_order: order, deletion_costs: costs, n_states: l.n() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{canonical, Landscape};

    #[test]
    fn l6_filtration() {
        let l = canonical("L6").unwrap();
        assert_eq!(local_minima(&l), vec![0, 2, 4]);
        let f = scoppola_filtration(&l);
        assert_eq!(f.deletion_order, vec![2, 0, 4]);
        assert_eq!(f.deletion_costs, vec![3.0, 8.0]);
        assert_eq!(f.levels, 3);
        assert_eq!(f.minima(1), vec![0, 2, 4]);
        assert_eq!(f.minima(2), vec![0, 4]);
        assert_eq!(f.minima(3), vec![4]);
        assert_eq!(f.minima(0).len(), 6);
    }

    #[test]
    fn single_minimum() {
        let l = Landscape::path(0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(local_minima(&l), vec![0]);
        let f = scoppola_filtration(&l);
        assert_eq!(f.levels, 1);
        assert!(f.deletion_costs.is_empty());
    }

    #[test]
    fn tie_deletes_higher_minimum() {
        // minima 0, 2, 4, 6; states 2 and 6 both pay 2.0 to leave
        let l = Landscape::path(0, vec![0.0, 3.0, 1.0, 10.0, 0.5, 3.5, 1.5]).unwrap();
        let f = scoppola_filtration(&l);
        assert_eq!(f.deletion_order[0], 6);
        assert_eq!(f.deletion_costs[0], 2.0);
    }

    #[test]
    fn higher_of_two_minima_always_goes_first() {
        let l = Landscape::path(0, vec![0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(scoppola_filtration(&l).deletion_order, vec![2, 0]);
    }
}
