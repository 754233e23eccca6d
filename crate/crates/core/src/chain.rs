//! Metropolis transition model and exact hitting/exit solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::landscape::{Landscape, State};
use crate::linalg::{mask, Absorbing, Kernel};

#[derive(Clone, Debug)]
pub struct TransitionModel {
    pub landscape: Landscape,
    pub beta: f64,
    /// C(r) = |N(r)| + 1.
    pub degree_plus: Vec<usize>,
    pub kernel: Kernel,
    pub p: DMatrix<f64>,
    pub gamma_beta: f64,
    pub pi: Vec<f64>,
    pub p_star: DMatrix<f64>,
}

/// `P_start(τ_target < τ_competitor)` with `τ_A = inf{n ≥ 1 : X_n ∈ A}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingQuery {
    pub start: State,
    pub target: Vec<State>,
    pub competitor: Vec<State>,
}

impl HittingQuery {
    pub fn new(start: State, target: &[State], competitor: &[State]) -> Self {
        Self { start, target: target.to_vec(), competitor: competitor.to_vec() }
    }
}

pub fn gamma_beta(l: &Landscape, beta: f64) -> f64 {
    let max_ln_c = l.states().map(|r| ((l.degree(r) + 1) as f64).ln()).fold(0.0, f64::max);
    l.n() as f64 * max_ln_c / (beta + 1.0).sqrt()
}

/// Entrywise β → ∞ limit of the Metropolis matrix.
pub fn limit_matrix(l: &Landscape) -> DMatrix<f64> {
    let n = l.n();
    let mut m = DMatrix::zeros(n, n);
    for r in l.states() {
        let c = (l.degree(r) + 1) as f64;
        let mut off = 0.0;
        for &s in l.neighbors(r) {
            if l.energy(r) >= l.energy(s) {
                m[(r, s)] = 1.0 / c;
                off += 1.0 / c;
            }
        }
        m[(r, r)] = 1.0 - off;
    }
    m
}

pub fn build_metropolis(l: &Landscape, beta: f64) -> Result<TransitionModel> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be positive and finite")));
    }
    let n = l.n();
    let degree_plus: Vec<usize> = l.states().map(|r| l.degree(r) + 1).collect();
    let rows = l
        .states()
        .map(|r| {
            let c = degree_plus[r] as f64;
            l.neighbors(r)
                .iter()
                .map(|&s| (s, (-beta * (l.energy(s) - l.energy(r)).max(0.0)).exp() / c))
                .collect()
        })
        .collect();
    let kernel = Kernel::new(rows);
    let mut p = DMatrix::zeros(n, n);
    for r in 0..n {
        for &(s, v) in kernel.row(r) {
            p[(r, s)] = v;
        }
        p[(r, r)] = kernel.stay(r);
    }
    let e_min = l.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> =
        l.states().map(|r| degree_plus[r] as f64 * (-beta * (l.energy(r) - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let pi = weights.iter().map(|w| w / z).collect();
    Ok(TransitionModel {
        landscape: l.clone(),
        beta,
        degree_plus,
        kernel,
        p,
        gamma_beta: gamma_beta(l, beta),
        pi,
        p_star: limit_matrix(l),
    })
}

impl TransitionModel {
    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn prob(&self, r: State, s: State) -> f64 {
        self.kernel.prob(r, s)
    }

    /// Largest detailed-balance violation over all pairs.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n() {
            for &(s, p) in self.kernel.row(r) {
                worst = worst.max((self.pi[r] * p - self.pi[s] * self.kernel.off(s, r)).abs());
            }
        }
        worst
    }
}

pub fn stationary(m: &TransitionModel) -> Vec<f64> {
    m.pi.clone()
}

pub fn hitting_probability(m: &TransitionModel, q: &HittingQuery) -> Result<f64> {
    hitting_probability_kernel(&m.kernel, q)
}

/// [`hitting_probability`] for an arbitrary kernel (restricted chains etc.).
pub fn hitting_probability_kernel(k: &Kernel, q: &HittingQuery) -> Result<f64> {
    let n = k.n();
    if q.target.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let target = mask(n, &q.target);
    let competitor = mask(n, &q.competitor);
    if (0..n).any(|s| target[s] && competitor[s]) {
        return Err(Error::InvalidArgument("target and competitor sets intersect".into()));
    }
    let transient: Vec<bool> = (0..n).map(|s| !target[s] && !competitor[s]).collect();
    let abs = Absorbing::new(k, &transient)?;
    let h = abs.solve_global(&abs.one_step_into(k, &target));
    if transient[q.start] {
        return Ok(h[q.start]);
    }
    Ok(first_step(k, q.start, |t| if target[t] { 1.0 } else if competitor[t] { 0.0 } else { h[t] }))
}

fn first_step(k: &Kernel, start: State, value: impl Fn(State) -> f64) -> f64 {
    let stay = k.stay(start) * value(start);
    stay + k.row(start).iter().map(|&(t, p)| p * value(t)).sum::<f64>()
}

pub fn expected_hitting_time(m: &TransitionModel, start: State, a: &[State]) -> Result<f64> {
    expected_hitting_time_kernel(&m.kernel, start, a)
}

pub fn expected_hitting_time_kernel(k: &Kernel, start: State, a: &[State]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let n = k.n();
    let target = mask(n, a);
    let transient: Vec<bool> = target.iter().map(|&t| !t).collect();
    let abs = Absorbing::new(k, &transient)?;
    let t = abs.solve_global(&vec![1.0; abs.transient().len()]);
    if transient[start] {
        return Ok(t[start]);
    }
    Ok(1.0 + first_step(k, start, |s| if target[s] { 0.0 } else { t[s] }))
}

pub fn occupation_distribution(m: &TransitionModel, mu0: &[f64], n: usize) -> Vec<f64> {
    let mut mu = mu0.to_vec();
    for _ in 0..n {
        mu = m.kernel.push_forward(&mu);
    }
    mu
}

/// Exit law of a region: for every start in the region, the distribution of the
/// first state outside it. Also carries the factorization for further solves.
#[derive(Clone, Debug)]
pub struct RegionExit {
    pub region: Vec<State>,
    pub exits: Vec<State>,
    /// `prob[e][k]`: probability that the walk from `region[k]` leaves at `exits[e]`.
    pub prob: Vec<Vec<f64>>,
    solver: Absorbing,
}

impl RegionExit {
    pub fn new(k: &Kernel, region: &[State]) -> Result<Self> {
        let n = k.n();
        let inside = mask(n, region);
        let solver = Absorbing::new(k, &inside)?;
        let mut exits: Vec<State> = solver
            .transient()
            .iter()
            .flat_map(|&s| k.row(s).iter().map(|&(t, _)| t))
            .filter(|&t| !inside[t])
            .collect();
        exits.sort_unstable();
        exits.dedup();
        let prob = exits
            .iter()
            .map(|&e| solver.solve(&solver.one_step_into(k, &mask(n, &[e]))))
            .collect();
        Ok(Self { region: solver.transient().to_vec(), exits, prob, solver })
    }

    pub fn exit_prob(&self, from: State, exit: State) -> f64 {
        let Some(k) = self.solver.local(from) else { return 0.0 };
        match self.exits.binary_search(&exit) {
            Ok(e) => self.prob[e][k],
            Err(_) => 0.0,
        }
    }

    /// `E_from[τ · 1{X_τ = exit}]` with τ the exit time of the region.
    pub fn exit_time_moment(&self, from: State, exit: State) -> f64 {
        let Some(k) = self.solver.local(from) else { return 0.0 };
        match self.exits.binary_search(&exit) {
            Ok(e) => self.solver.solve(&self.prob[e])[k],
            Err(_) => 0.0,
        }
    }

    /// Mean exit time from `from`.
    pub fn mean_exit_time(&self, from: State) -> f64 {
        let Some(k) = self.solver.local(from) else { return 0.0 };
        self.solver.solve(&vec![1.0; self.region.len()])[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{canonical, gen_random_landscape};

    fn l6() -> Landscape {
        canonical("L6").unwrap()
    }

    #[test]
    fn l6_entries() {
        for beta in [0.5, 1.0, 7.0] {
            let m = build_metropolis(&l6(), beta).unwrap();
            for s in [0, 1, 2] {
                assert!((m.prob(1, s) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let m = build_metropolis(&l6(), 1.0).unwrap();
        assert!((m.prob(0, 1) - (-4.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((m.prob(0, 1) - 0.009158).abs() < 1e-6);
    }

    #[test]
    fn rows_sum_to_one_and_balance() {
        for seed in 0..20 {
            let l = gen_random_landscape(9, 4, 0.2, seed).unwrap();
            let m = build_metropolis(&l, 2.0).unwrap();
            for r in 0..m.n() {
                let s: f64 = m.p.row(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(m.p[(r, r)] > 0.0);
            }
            assert!(m.detailed_balance_residual() <= 1e-12);
            let pi = nalgebra::RowDVector::from_vec(m.pi.clone());
            let moved = &pi * &m.p;
            for r in 0..m.n() {
                assert!((moved[r] - m.pi[r]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stationary_ratio_closed_form() {
        let m = build_metropolis(&l6(), 1.0).unwrap();
        let pi = stationary(&m);
        assert!((pi[4] / pi[0] - 1.5 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn small_beta_limit_direction() {
        let l = l6();
        let m = build_metropolis(&l, 1e-9).unwrap();
        let c: Vec<f64> = l.states().map(|r| (l.degree(r) + 1) as f64).collect();
        let total: f64 = c.iter().sum();
        for r in l.states() {
            assert!((m.pi[r] - c[r] / total).abs() < 1e-8);
        }
    }

    #[test]
    fn limit_matrix_shape() {
        let m = build_metropolis(&l6(), 3.0).unwrap();
        assert_eq!(m.p_star[(3, 2)], 1.0 / 3.0);
        assert_eq!(m.p_star[(3, 4)], 1.0 / 3.0);
        assert!((m.p_star[(3, 3)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.p_star[(0, 1)], 0.0);
        assert_eq!(m.p_star[(0, 0)], 1.0);
    }

    #[test]
    fn l6_hitting_examples() {
        for beta in [0.5, 2.0, 9.0] {
            let m = build_metropolis(&l6(), beta).unwrap();
            let p = hitting_probability(&m, &HittingQuery::new(1, &[0], &[2])).unwrap();
            assert!((p - 0.5).abs() < 1e-14);
            let p = hitting_probability(&m, &HittingQuery::new(5, &[4], &[3])).unwrap();
            assert!((p - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hitting_rejects_bad_sets() {
        let m = build_metropolis(&l6(), 1.0).unwrap();
        assert!(hitting_probability(&m, &HittingQuery::new(1, &[], &[2])).is_err());
        assert!(hitting_probability(&m, &HittingQuery::new(1, &[2], &[2])).is_err());
    }

    #[test]
    fn return_probability_uses_first_step() {
        let m = build_metropolis(&l6(), 1.0).unwrap();
        // from 5 the walk either stays (returns at n = 1) or steps to 4
        let p = hitting_probability(&m, &HittingQuery::new(5, &[5], &[4])).unwrap();
        assert!((p - m.prob(5, 5)).abs() < 1e-15);
    }

    #[test]
    fn expected_time_examples() {
        let m = build_metropolis(&l6(), 8.0).unwrap();
        let t = expected_hitting_time(&m, 4, &[3]).unwrap();
        let slope = t.ln() / 8.0;
        assert!((5.8..=6.2).contains(&slope), "{slope}");
        let b = (-32.0f64).exp() / 3.0;
        let a = (-48.0f64).exp() / 3.0;
        assert!((t / ((1.0 + 2.0 * b) / a) - 1.0).abs() < 1e-10);
        // start in A with every neighbor in A
        let t = expected_hitting_time(&m, 5, &[4, 5]).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        // two-state chain
        let k = Kernel::new(vec![vec![(1, 0.125)], vec![(0, 0.5)]]);
        assert!((expected_hitting_time_kernel(&k, 0, &[1]).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn occupation_examples() {
        let m = build_metropolis(&l6(), 1.0).unwrap();
        let mut d0 = vec![0.0; 6];
        d0[0] = 1.0;
        assert_eq!(occupation_distribution(&m, &d0, 0), d0);
        let one = occupation_distribution(&m, &d0, 1);
        for s in 0..6 {
            assert!((one[s] - m.p[(0, s)]).abs() < 1e-15);
        }
        let pi = occupation_distribution(&m, &m.pi, 25);
        for s in 0..6 {
            assert!((pi[s] - m.pi[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn region_exit_consistency() {
        let m = build_metropolis(&l6(), 4.0).unwrap();
        let ex = RegionExit::new(&m.kernel, &[4, 5]).unwrap();
        assert_eq!(ex.exits, vec![3]);
        assert!((ex.exit_prob(5, 3) - 1.0).abs() < 1e-14);
        let t = expected_hitting_time(&m, 4, &[3]).unwrap();
        assert!((ex.mean_exit_time(4) / t - 1.0).abs() < 1e-12);
        assert!((ex.exit_time_moment(4, 3) / t - 1.0).abs() < 1e-12);
    }
}
