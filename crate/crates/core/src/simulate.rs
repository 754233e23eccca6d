//! Metropolis sampling, Monte-Carlo estimators and path-dependent metabasins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{ExactAggregate, MetastateSpace};
use crate::chain::TransitionModel;
use crate::error::{Error, Result};
use crate::landscape::State;
use crate::linalg::{mask, Kernel};

/// Independent stream for replica `replica` of run `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub beta: f64,
    pub seed: u64,
    pub start: State,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,state\n");
        for (n, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{n},{s}\n"));
        }
        out
    }
}

/// One step drawn from row `s` of the kernel, self-loop included.
pub fn step(k: &Kernel, s: State, rng: &mut impl Rng) -> State {
    let mut u: f64 = rng.gen();
    for &(t, p) in k.row(s) {
        if u < p {
            return t;
        }
        u -= p;
    }
    s
}

pub fn run_metropolis(model: &TransitionModel, start: State, steps: usize, seed: u64) -> Trajectory {
    let mut rng = replica_rng(seed, 0);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start);
    let mut s = start;
    for _ in 0..steps {
        s = step(&model.kernel, s, &mut rng);
        states.push(s);
    }
    Trajectory { states, beta: model.beta, seed, start }
}

/// Holding time `G ≥ 1` with `P(G > n) = (1 − leave)ⁿ`.
pub fn holding_time(leave: f64, rng: &mut impl Rng) -> u64 {
    if leave >= 1.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    let g = 1.0 + (u.ln() / (-leave).ln_1p()).floor();
    if g >= u64::MAX as f64 { u64::MAX } else { g as u64 }
}

/// Next distinct state, drawn proportionally to the off-diagonal row.
pub fn jump_target(k: &Kernel, s: State, rng: &mut impl Rng) -> State {
    let row = k.row(s);
    let mut u = rng.gen::<f64>() * k.leave(s);
    for &(t, p) in row {
        if u < p {
            return t;
        }
        u -= p;
    }
    row.last().expect("state without neighbours").0
}

/// Self-loop-free skeleton of a trajectory: `states[k]` entered at `times[k]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct JumpPath {
    pub states: Vec<State>,
    pub times: Vec<u64>,
}

impl JumpPath {
    /// Lazy trajectory `X_0, ..., X_horizon`.
    pub fn expand(&self, horizon: u64) -> Vec<State> {
        let mut out = Vec::with_capacity(horizon as usize + 1);
        for (k, &s) in self.states.iter().enumerate() {
            let end = self.times.get(k + 1).map_or(horizon + 1, |&t| t.min(horizon + 1));
            for _ in self.times[k]..end {
                out.push(s);
            }
        }
        out
    }
}

/// Rejection-free simulation until `stop` accepts the newest state or `max_jumps` is hit.
pub fn run_jumps(
    k: &Kernel,
    start: State,
    rng: &mut impl Rng,
    max_jumps: usize,
    mut stop: impl FnMut(&JumpPath) -> bool,
) -> Result<JumpPath> {
    let mut path = JumpPath { states: vec![start], times: vec![0] };
    let mut s = start;
    let mut t = 0u64;
    while !stop(&path) {
        if path.states.len() > max_jumps {
            return Err(Error::NoConvergence(format!("no stop within {max_jumps} jumps")));
        }
        t = t.saturating_add(holding_time(k.leave(s), rng));
        s = jump_target(k, s, rng);
        path.states.push(s);
        path.times.push(t);
    }
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathDependentMB {
    /// `χ₀ = 0 < χ₁ < ... < χ_υ`.
    pub chi: Vec<usize>,
    /// `𝒱₀, ..., 𝒱_υ`, each sorted.
    pub blocks: Vec<Vec<State>>,
    pub upsilon: usize,
}

impl PathDependentMB {
    /// Index of the block containing `x`.
    pub fn block_of(&self, x: State) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&x).is_ok())
    }

    pub fn block_containing(&self, x: State) -> &[State] {
        self.block_of(x).map_or(&[], |k| &self.blocks[k])
    }
}

fn close_blocks(states: &[State], chi: Vec<usize>, t: usize) -> PathDependentMB {
    let mut blocks = Vec::with_capacity(chi.len());
    for (n, &c) in chi.iter().enumerate() {
        let end = chi.get(n + 1).copied().unwrap_or(t + 1);
        let mut b = states[c..end].to_vec();
        b.sort_unstable();
        b.dedup();
        blocks.push(b);
    }
    PathDependentMB { upsilon: chi.len() - 1, chi, blocks }
}

/// Path-dependent metabasins of `X_0, ..., X_T`, from last-occurrence indices.
pub fn path_dependent_mb(states: &[State], t: usize) -> PathDependentMB {
    assert!(t < states.len(), "T = {t} beyond trajectory of length {}", states.len());
    let window = &states[..=t];
    let mut last = std::collections::HashMap::new();
    for (k, &s) in window.iter().enumerate() {
        last.insert(s, k);
    }
    let mut chi = vec![0];
    let mut reach = 0;
    for k in 1..=t {
        reach = reach.max(last[&window[k - 1]]);
        if reach < k {
            chi.push(k);
        }
    }
    close_blocks(window, chi, t)
}

/// Literal recursion with explicit set intersections.
pub fn path_dependent_mb_naive(states: &[State], t: usize) -> PathDependentMB {
    let window = &states[..=t];
    let mut chi = vec![0];
    loop {
        let c = *chi.last().unwrap();
        let next = (c + 1..=t).find(|&k| window[k..].iter().all(|s| !window[c..k].contains(s)));
        match next {
            Some(k) => chi.push(k),
            None => break,
        }
    }
    close_blocks(window, chi, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, stderr: (var / n).sqrt(), reps: xs.len() }
    }

    /// `|mean − exact| ≤ k·stderr`; a zero stderr requires equality.
    pub fn agrees(&self, exact: f64, k: f64) -> bool {
        let d = (self.mean - exact).abs();
        d <= k * self.stderr || d <= 1e-12 * exact.abs().max(1.0)
    }
}

const MAX_JUMPS: usize = 1 << 32;

pub fn estimate_hitting(
    model: &TransitionModel,
    x: State,
    a: &[State],
    b: &[State],
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let n = model.n();
    let in_a = mask(n, a);
    let in_b = mask(n, b);
    if (0..n).any(|s| in_a[s] && in_b[s]) {
        return Err(Error::InvalidArgument("target and competitor sets intersect".into()));
    }
    let k = &model.kernel;
    let samples = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let mut s = step(k, x, &mut rng);
            while !in_a[s] && !in_b[s] {
                s = jump_target(k, s, &mut rng);
            }
            if in_a[s] { 1.0 } else { 0.0 }
        })
        .collect::<Vec<f64>>();
    Ok(Estimate::from_samples(&samples))
}

/// Monte-Carlo `E_r ζ₀`.
pub fn estimate_exit_time(model: &TransitionModel, ms: &MetastateSpace, r: State, reps: usize, seed: u64) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if ms.nonassigned().is_empty() {
        return Err(Error::Precondition(format!("level {} has no non-assigned states", ms.level)));
    }
    let in_n: Vec<bool> = (0..model.n()).map(|s| ms.is_nonassigned(ms.rep_of[s])).collect();
    let k = &model.kernel;
    let samples = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep);
            let mut s = r;
            let mut t = 0u64;
            let mut xi = None;
            loop {
                let g = holding_time(k.leave(s), &mut rng);
                match xi {
                    Some(_) if in_n[s] => return t as f64,
                    None if !in_n[s] && t + g > 1 => xi = Some(t.max(1)),
                    _ => {}
                }
                t += g;
                s = jump_target(k, s, &mut rng);
            }
        })
        .collect::<Vec<f64>>();
    Ok(Estimate::from_samples(&samples))
}

/// Exact sampler of the accelerated aggregated chain, driven by entry states.
pub struct AacSampler<'a> {
    ms: &'a MetastateSpace,
    /// Cumulative law of the next entry state.
    next: Vec<Vec<(State, f64)>>,
}

impl<'a> AacSampler<'a> {
    pub fn new(model: &TransitionModel, ms: &'a MetastateSpace) -> Result<Self> {
        let ex = ExactAggregate::new(model, ms)?;
        let k = &model.kernel;
        let next = (0..model.n())
            .map(|x| {
                let a = ms.owner_index(x);
                let law: Vec<(State, f64)> = if a < ms.n_metastable {
                    let re = ex.valley_exit(ms.metastates[a]);
                    re.exits.iter().map(|&e| (e, re.exit_prob(x, e))).collect()
                } else {
                    k.row(x).iter().map(|&(t, p)| (t, p / k.leave(x))).collect()
                };
                let mut acc = 0.0;
                law.into_iter()
                    .map(|(s, p)| {
                        acc += p;
                        (s, acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { ms, next })
    }

    fn draw(&self, x: State, rng: &mut impl Rng) -> State {
        let law = &self.next[x];
        let u = rng.gen::<f64>() * law.last().unwrap().1;
        law.iter().find(|&&(_, c)| u < c).unwrap_or(law.last().unwrap()).0
    }

    /// `Y_0, ..., Y_steps` started from state `x`.
    pub fn run(&self, x: State, steps: usize, rng: &mut impl Rng) -> Vec<State> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(self.ms.rep_of[x]);
        let mut e = x;
        for _ in 0..steps {
            e = self.draw(e, rng);
            out.push(self.ms.rep_of[e]);
        }
        out
    }
}

/// `(returns, triples)` over `(Y_{n−1}, Y_n, Y_{n+1})` with metastable `Y_{n−1}`.
pub fn immediate_returns(ys: &[State], ms: &MetastateSpace) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for w in ys.windows(3) {
        if !ms.is_nonassigned(w[0]) {
            total += 1;
            if w[2] == w[0] {
                hits += 1;
            }
        }
    }
    (hits, total)
}

pub fn immediate_return_frequency(model: &TransitionModel, ms: &MetastateSpace, start: State, steps: usize, seed: u64) -> Result<f64> {
    let sampler = AacSampler::new(model, ms)?;
    let ys = sampler.run(start, steps, &mut replica_rng(seed, 0));
    let (h, t) = immediate_returns(&ys, ms);
    if t == 0 {
        return Err(Error::Precondition("no metastable visits in the sample".into()));
    }
    Ok(h as f64 / t as f64)
}

/// Events of the comparison theorem on one replica.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MbComparison {
    /// `V_<(Y_k) ⊆ 𝒱(Y_k)`, `k = 0..K`.
    pub a: Vec<bool>,
    /// `𝒱(Y_j) ⊆ V(Y_j)` for all `j < k`, `k = 0..K`.
    pub b: Vec<bool>,
    /// `𝒱(Y_j) ⊆ V(Y_j)` for all `j ≤ K − 1`.
    pub c: bool,
    pub aac: Vec<State>,
    pub pdmb: PathDependentMB,
}

fn subset(a: &[State], b: &[State]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Compare on `X_0, ..., X_T` with `T = σ_K`; `states` may be self-loop free.
pub fn compare_mb(states: &[State], ms: &MetastateSpace, horizon: usize) -> Result<MbComparison> {
    let mut sigma = vec![0];
    for n in 1..states.len() {
        if ms.rep_of[states[n]] != ms.rep_of[states[n - 1]] {
            sigma.push(n);
            if sigma.len() == horizon + 1 {
                break;
            }
        }
    }
    if sigma.len() < horizon + 1 {
        return Err(Error::InvalidArgument(format!("trajectory has fewer than {horizon} aggregated jumps")));
    }
    let t = sigma[horizon];
    let pdmb = path_dependent_mb(states, t);
    let aac: Vec<State> = sigma.iter().map(|&n| ms.rep_of[states[n]]).collect();
    let single = |y: State| -> Vec<State> { vec![y] };
    let strict = |y: State| if ms.is_nonassigned(y) { single(y) } else { ms.strict[ms.index(y).unwrap()].clone() };
    let valley = |y: State| if ms.is_nonassigned(y) { single(y) } else { ms.valley(y).to_vec() };
    let a: Vec<bool> = (0..horizon).map(|k| subset(&strict(aac[k]), pdmb.block_containing(aac[k]))).collect();
    let inside: Vec<bool> = (0..horizon).map(|j| subset(pdmb.block_containing(aac[j]), &valley(aac[j]))).collect();
    let b: Vec<bool> = (0..horizon).map(|k| inside[..k].iter().all(|&x| x)).collect();
    let c = inside.iter().all(|&x| x);
    Ok(MbComparison { a, b, c, aac, pdmb })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareStats {
    pub reps: usize,
    pub horizon: usize,
    pub freq_a: Vec<f64>,
    pub freq_b: Vec<f64>,
    pub freq_c: f64,
    /// Empirical law of `Y_1` over metastate indices.
    pub first_jump: Vec<f64>,
    pub max_jumps: usize,
}

/// Replicas from `m0` up to `σ_K`, simulated rejection-free.
pub fn sample_compare_mb(
    model: &TransitionModel,
    ms: &MetastateSpace,
    m0: State,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<CompareStats> {
    if reps == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("reps and horizon must be at least 1".into()));
    }
    let k = &model.kernel;
    let runs = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let mut jumps = 0;
            let path = run_jumps(k, m0, &mut rng, MAX_JUMPS, |p| {
                let n = p.states.len();
                if n >= 2 && ms.rep_of[p.states[n - 1]] != ms.rep_of[p.states[n - 2]] {
                    jumps += 1;
                }
                jumps == horizon
            })?;
            let cmp = compare_mb(&path.states, ms, horizon)?;
            Ok((cmp, path.states.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = reps as f64;
    let freq = |f: &dyn Fn(&MbComparison) -> bool| runs.iter().filter(|(c, _)| f(c)).count() as f64 / n;
    let mut first_jump = vec![0.0; ms.len()];
    for (c, _) in &runs {
        first_jump[ms.index(c.aac[1]).unwrap()] += 1.0 / n;
    }
    Ok(CompareStats {
        reps,
        horizon,
        freq_a: (0..horizon).map(|j| freq(&|c| c.a[j])).collect(),
        freq_b: (0..horizon).map(|j| freq(&|c| c.b[j])).collect(),
        freq_c: freq(&|c| c.c),
        first_jump,
        max_jumps: runs.iter().map(|(_, l)| *l).max().unwrap_or(0),
    })
}
