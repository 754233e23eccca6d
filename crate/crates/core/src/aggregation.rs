//! Metastates, the aggregated chain and its accelerated version, the asymptotic
//! jump chain, transition exponents and metabasin detection.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{limit_matrix, RegionExit, TransitionModel};
use crate::error::{Error, Result};
use crate::filtration::scoppola_filtration;
use crate::landscape::{Landscape, State};
use crate::linalg::{mask, Absorbing, Kernel};
use crate::saddles::{saddle_table, uphill_downhill_path, SaddleTable};
use crate::valleys::{decompose_all_with, ValleyDecomposition};

/// Enumeration cap of the reciprocating-jump search.
pub const MAX_RECIPROCATING_METASTATES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetastateSpace {
    pub level: usize,
    /// Metastable metastates (sorted) followed by non-assigned states (sorted).
    pub metastates: Vec<State>,
    pub n_metastable: usize,
    /// Owner metastate of every state.
    pub rep_of: Vec<State>,
    pub valleys: Vec<Vec<State>>,
    /// `V_<` of metastable metastates, `{s}` for non-assigned ones.
    pub strict: Vec<Vec<State>>,
    pub exit_gate: Vec<Option<State>>,
    index: Vec<Option<usize>>,
}

impl MetastateSpace {
    pub fn len(&self) -> usize {
        self.metastates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metastates.is_empty()
    }

    pub fn index(&self, m: State) -> Option<usize> {
        self.index.get(m).copied().flatten()
    }

    pub fn metastable(&self) -> &[State] {
        &self.metastates[..self.n_metastable]
    }

    pub fn nonassigned(&self) -> &[State] {
        &self.metastates[self.n_metastable..]
    }

    pub fn is_nonassigned(&self, m: State) -> bool {
        self.index(m).is_some_and(|k| k >= self.n_metastable)
    }

    pub fn valley(&self, m: State) -> &[State] {
        &self.valleys[self.index(m).expect("metastate")]
    }

    pub fn gate(&self, m: State) -> Option<State> {
        self.exit_gate[self.index(m).expect("metastate")]
    }

    /// Metastate index of the owner of every state.
    pub fn owner_index(&self, s: State) -> usize {
        self.index(self.rep_of[s]).unwrap()
    }
}

pub fn metastate_space(d: &ValleyDecomposition, n: usize) -> MetastateSpace {
    let metastable = d.metastable();
    let n_metastable = metastable.len();
    let mut metastates = metastable.clone();
    metastates.extend_from_slice(&d.nonassigned);
    let mut index = vec![None; n];
    for (k, &m) in metastates.iter().enumerate() {
        index[m] = Some(k);
    }
    let valleys: Vec<Vec<State>> = metastates
        .iter()
        .map(|&m| d.valley_of(m).map_or_else(|| vec![m], <[State]>::to_vec))
        .collect();
    let strict = metastates
        .iter()
        .map(|&m| d.strict_of(m).map_or_else(|| vec![m], <[State]>::to_vec))
        .collect();
    let exit_gate = metastates.iter().map(|m| d.exit_gate.get(m).copied()).collect();
    MetastateSpace {
        level: d.level,
        metastates,
        n_metastable,
        rep_of: d.owner_map(n),
        valleys,
        strict,
        exit_gate,
        index,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StoppingTimes {
    pub xi: Vec<usize>,
    pub zeta: Vec<usize>,
    pub sigma: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    /// `Ȳ_n`.
    pub ac: Vec<State>,
    /// `Y_n`.
    pub aac: Vec<State>,
    pub times: StoppingTimes,
}

pub fn project_trajectory(states: &[State], ms: &MetastateSpace) -> Projection {
    let ac: Vec<State> = states.iter().map(|&s| ms.rep_of[s]).collect();
    let mut sigma = Vec::new();
    let mut aac = Vec::new();
    for (n, &y) in ac.iter().enumerate() {
        if n == 0 || y != ac[n - 1] {
            sigma.push(n);
            aac.push(y);
        }
    }
    let in_n = |s: State| ms.is_nonassigned(ms.rep_of[s]);
    let mut xi = Vec::new();
    let mut zeta = Vec::new();
    let mut k = 1;
    loop {
        while k < states.len() && in_n(states[k]) {
            k += 1;
        }
        if k >= states.len() {
            break;
        }
        xi.push(k);
        while k < states.len() && !in_n(states[k]) {
            k += 1;
        }
        if k >= states.len() {
            break;
        }
        zeta.push(k);
    }
    Projection { ac, aac, times: StoppingTimes { xi, zeta, sigma } }
}

/// `p̂` over the metastates, row-stochastic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpChainLimit {
    pub metastates: Vec<State>,
    pub phat: Vec<Vec<f64>>,
}

impl JumpChainLimit {
    pub fn get(&self, ms: &MetastateSpace, r: State, s: State) -> f64 {
        self.phat[ms.index(r).unwrap()][ms.index(s).unwrap()]
    }
}

pub fn asymptotic_jump_chain(l: &Landscape, ms: &MetastateSpace) -> Result<JumpChainLimit> {
    let pstar = limit_matrix(l);
    asymptotic_jump_chain_with(l, &pstar, ms)
}

pub fn asymptotic_jump_chain_with(l: &Landscape, pstar: &DMatrix<f64>, ms: &MetastateSpace) -> Result<JumpChainLimit> {
    let k = ms.len();
    let mut phat = vec![vec![0.0; k]; k];
    for (a, &r) in ms.metastates.iter().enumerate() {
        if a < ms.n_metastable {
            let g = ms.exit_gate[a].ok_or_else(|| {
                Error::Precondition(format!("level {} has no exit gates", ms.level))
            })?;
            phat[a][ms.index(g).unwrap()] = 1.0;
        } else {
            let leave = 1.0 - pstar[(r, r)];
            for &t in l.neighbors(r) {
                phat[a][ms.owner_index(t)] += pstar[(r, t)] / leave;
            }
        }
    }
    Ok(JumpChainLimit { metastates: ms.metastates.clone(), phat })
}

/// `lim P_m(X_{ξ₁} ∈ V(m'))` for metastable `m, m'`, by absorbing the p̂-chain
/// restricted to the non-assigned states in the valleys.
pub fn valley_transition_limits(ms: &MetastateSpace, jc: &JumpChainLimit) -> Result<Vec<Vec<f64>>> {
    let k = ms.len();
    let q = ms.n_metastable;
    let kernel = Kernel::new(
        (0..k)
            .map(|a| (0..k).filter(|&b| b != a).map(|b| (b, jc.phat[a][b])).collect())
            .collect(),
    );
    let transient: Vec<bool> = (0..k).map(|a| a >= q).collect();
    let abs = Absorbing::new(&kernel, &transient)?;
    let absorb: Vec<Vec<f64>> = (0..q)
        .map(|b| {
            let mut target = vec![false; k];
            target[b] = true;
            abs.solve_global(&abs.one_step_into(&kernel, &target))
        })
        .collect();
    Ok((0..q)
        .map(|a| {
            let g = ms.index(ms.exit_gate[a].unwrap()).unwrap();
            (0..q).map(|b| absorb[b][g]).collect()
        })
        .collect())
}

/// Exact finite-β laws of the aggregated chains.
pub struct ExactAggregate<'a> {
    model: &'a TransitionModel,
    ms: &'a MetastateSpace,
    n_exit: Option<RegionExit>,
    valley_exit: Vec<RegionExit>,
}

impl<'a> ExactAggregate<'a> {
    pub fn new(model: &'a TransitionModel, ms: &'a MetastateSpace) -> Result<Self> {
        let k = &model.kernel;
        let n_exit = if ms.nonassigned().is_empty() { None } else { Some(RegionExit::new(k, ms.nonassigned())?) };
        let valley_exit = (0..ms.n_metastable)
            .map(|a| RegionExit::new(k, &ms.valleys[a]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, ms, n_exit, valley_exit })
    }

    pub fn valley_exit(&self, m: State) -> &RegionExit {
        &self.valley_exit[self.ms.index(m).expect("metastable")]
    }

    /// `P_r(Y₁ = ·)` over metastate indices.
    pub fn aac_step(&self, r: State) -> Vec<f64> {
        let ms = self.ms;
        let mut out = vec![0.0; ms.len()];
        let a = ms.index(r).expect("metastate");
        if a < ms.n_metastable {
            let ex = &self.valley_exit[a];
            for &e in &ex.exits {
                out[ms.owner_index(e)] += ex.exit_prob(r, e);
            }
        } else {
            let k = &self.model.kernel;
            let leave = k.leave(r);
            for &(t, p) in k.row(r) {
                out[ms.owner_index(t)] += p / leave;
            }
        }
        out
    }

    /// `P_x(Y₁ = ·)` for an arbitrary entry state `x` of its owner's valley.
    pub fn aac_step_from_entry(&self, x: State) -> Vec<f64> {
        let ms = self.ms;
        let a = ms.owner_index(x);
        if a >= ms.n_metastable {
            return self.aac_step(x);
        }
        let mut out = vec![0.0; ms.len()];
        let ex = &self.valley_exit[a];
        for &e in &ex.exits {
            out[ms.owner_index(e)] += ex.exit_prob(x, e);
        }
        out
    }

    /// `E_r ζ₀`, via `ξ₀` and the valley exit times.
    pub fn mean_zeta0(&self, r: State) -> Result<f64> {
        let ms = self.ms;
        let ex = self
            .n_exit
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("level {} has no non-assigned states", ms.level)))?;
        let k = &self.model.kernel;
        let n = self.model.n();
        let mut mean = 1.0;
        let mut entry = vec![0.0; n];
        let mut step = |t: State, p: f64| {
            if ms.is_nonassigned(ms.rep_of[t]) {
                mean += p * ex.mean_exit_time(t);
                for &x in &ex.exits {
                    entry[x] += p * ex.exit_prob(t, x);
                }
            } else {
                entry[t] += p;
            }
        };
        step(r, k.stay(r));
        for &(t, p) in k.row(r) {
            step(t, p);
        }
        for x in 0..n {
            if entry[x] > 0.0 {
                mean += entry[x] * self.valley_exit[ms.owner_index(x)].mean_exit_time(x);
            }
        }
        Ok(mean)
    }

    fn spread_to_valleys(&self, t: State, w: f64, out: &mut [f64]) {
        if !self.ms.is_nonassigned(self.ms.rep_of[t]) {
            out[t] += w;
            return;
        }
        let ex = self.n_exit.as_ref().unwrap();
        for &x in &ex.exits {
            out[x] += w * ex.exit_prob(t, x);
        }
    }

    /// `P_m(X_{ξ₁} ∈ V(m'))` over metastable indices.
    pub fn valley_transition(&self, m: State) -> Result<Vec<f64>> {
        let ms = self.ms;
        if self.n_exit.is_none() {
            return Err(Error::Precondition(format!("level {} has no non-assigned states", ms.level)));
        }
        let n = self.model.n();
        let k = &self.model.kernel;
        let mut mu0 = vec![0.0; n];
        self.spread_to_valleys(m, k.stay(m), &mut mu0);
        for &(t, p) in k.row(m) {
            self.spread_to_valleys(t, p, &mut mu0);
        }
        let mut mu1 = vec![0.0; n];
        for x in 0..n {
            if mu0[x] == 0.0 {
                continue;
            }
            let ex = &self.valley_exit[ms.owner_index(x)];
            for &e in &ex.exits {
                mu1[e] += mu0[x] * ex.exit_prob(x, e);
            }
        }
        let mut mu2 = vec![0.0; n];
        for y in 0..n {
            if mu1[y] > 0.0 {
                self.spread_to_valleys(y, mu1[y], &mut mu2);
            }
        }
        let mut out = vec![0.0; ms.n_metastable];
        for x in 0..n {
            if mu2[x] > 0.0 {
                out[ms.owner_index(x)] += mu2[x];
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairExponent {
    pub from: State,
    pub to: State,
    /// `E(z*(m,m')) − E(s_m)`.
    pub d: f64,
    pub udh: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryExponent {
    pub valley: State,
    pub state: State,
    /// `E(s) − E(s_m)`.
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentMatrix {
    pub level: usize,
    pub metastable: Vec<State>,
    pub pairs: Vec<PairExponent>,
    pub boundary: Vec<BoundaryExponent>,
}

impl ExponentMatrix {
    pub fn pair(&self, from: State, to: State) -> Option<&PairExponent> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }

    pub fn d(&self, from: State, to: State) -> f64 {
        self.pair(from, to).expect("metastable pair").d
    }

    pub fn udh(&self, from: State, to: State) -> bool {
        self.pair(from, to).is_some_and(|p| p.udh)
    }

    pub fn boundary_exp(&self, valley: State, state: State) -> Option<f64> {
        self.boundary.iter().find(|b| b.valley == valley && b.state == state).map(|b| b.exponent)
    }
}

/// Whether a minimal uphill-downhill path runs from `s_m` to `target` through no
/// valley but the target's.
pub fn udh_witness(l: &Landscape, table: &SaddleTable, ms: &MetastateSpace, m: State, target: State) -> bool {
    let Some(g) = ms.gate(m) else { return false };
    let mut avoid = vec![false; l.n()];
    for (a, v) in ms.valleys[..ms.n_metastable].iter().enumerate() {
        if ms.metastates[a] != target {
            for &s in v {
                avoid[s] = true;
            }
        }
    }
    uphill_downhill_path(l, table, g, target, &avoid).is_some()
}

pub fn transition_exponents(l: &Landscape, d: &ValleyDecomposition) -> Result<ExponentMatrix> {
    transition_exponents_with(l, &saddle_table(l), &metastate_space(d, l.n()))
}

pub fn transition_exponents_with(l: &Landscape, table: &SaddleTable, ms: &MetastateSpace) -> Result<ExponentMatrix> {
    let mut pairs = Vec::new();
    let mut boundary = Vec::new();
    for &m in ms.metastable() {
        let g = ms.gate(m).ok_or_else(|| Error::Precondition(format!("level {} has no exit gates", ms.level)))?;
        let eg = l.energy(g);
        for &t in ms.metastable() {
            if t != m {
                pairs.push(PairExponent {
                    from: m,
                    to: t,
                    d: table.energy(m, t) - eg,
                    udh: udh_witness(l, table, ms, m, t),
                });
            }
        }
        for s in crate::valleys::outer_boundary(l, ms.valley(m)) {
            boundary.push(BoundaryExponent { valley: m, state: s, exponent: l.energy(s) - eg });
        }
    }
    Ok(ExponentMatrix { level: ms.level, metastable: ms.metastable().to_vec(), pairs, boundary })
}

/// Interval `[lower, upper]` for `lim β⁻¹ ln P_m(X_{ξ₁} ∈ V(m'))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ExponentBounds {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Asymptotic exponents of the valley-to-valley transition law.
///
/// `reachable[a][b]` marks pairs with positive probability at every β; a positive
/// p̂-limit gives exponent 0, an uphill-downhill witness gives `−D`, otherwise only
/// the upper bound `−D` is known.
pub fn valley_exponent_bounds(
    ms: &MetastateSpace,
    exps: &ExponentMatrix,
    limits: &[Vec<f64>],
    reachable: &[Vec<bool>],
) -> Vec<Vec<ExponentBounds>> {
    let q = ms.n_metastable;
    (0..q)
        .map(|a| {
            (0..q)
                .map(|b| {
                    let (m, t) = (ms.metastates[a], ms.metastates[b]);
                    if !reachable[a][b] {
                        ExponentBounds { lower: f64::NEG_INFINITY, upper: f64::NEG_INFINITY }
                    } else if limits[a][b] > 0.0 {
                        ExponentBounds { lower: 0.0, upper: 0.0 }
                    } else if a == b {
                        ExponentBounds { lower: f64::NEG_INFINITY, upper: 0.0 }
                    } else if exps.udh(m, t) {
                        let d = exps.d(m, t);
                        ExponentBounds { lower: -d, upper: -d }
                    } else {
                        ExponentBounds { lower: f64::NEG_INFINITY, upper: -exps.d(m, t) }
                    }
                })
                .collect()
        })
        .collect()
}

/// Pairs `(m, m')` with `P_m(X_{ξ₁} ∈ V(m')) > 0`, read off an exact solve at β = 1
/// (the elimination never cancels, so zeros are structural).
pub fn structural_reachability(l: &Landscape, ms: &MetastateSpace) -> Result<Vec<Vec<bool>>> {
    let model = crate::chain::build_metropolis(l, 1.0)?;
    let ex = ExactAggregate::new(&model, ms)?;
    ms.metastable()
        .iter()
        .map(|&m| Ok(ex.valley_transition(m)?.into_iter().map(|p| p > 0.0).collect()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReciprocatingResult {
    pub witness: Option<Vec<State>>,
    /// Metastable states whose certifying partner rests on a one-sided exponent.
    pub flagged: Vec<State>,
}

/// Smallest (by size, then lexicographic) subset `A` of metastable metastates
/// whose members each have a partner in `A` beating every outside valley by at
/// least `eps` in exponent.
pub fn reciprocating_order_test(
    ms: &MetastateSpace,
    bounds: &[Vec<ExponentBounds>],
    eps: f64,
) -> Result<ReciprocatingResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let q = ms.n_metastable;
    if q > MAX_RECIPROCATING_METASTATES {
        return Err(Error::TooManyMetastates(q));
    }
    let certified = |a: usize, b: usize, c: usize| bounds[a][b].lower - bounds[a][c].upper >= eps;
    let mut flagged: Vec<State> = Vec::new();
    for size in 1..q {
        for subset in combinations(q, size) {
            let inside = {
                let mut v = vec![false; q];
                for &a in &subset {
                    v[a] = true;
                }
                v
            };
            let ok = subset.iter().all(|&a| {
                subset.iter().any(|&b| (0..q).filter(|&c| !inside[c]).all(|c| certified(a, b, c)))
            });
            if ok {
                return Ok(ReciprocatingResult {
                    witness: Some(subset.iter().map(|&a| ms.metastates[a]).collect()),
                    flagged,
                });
            }
        }
    }
    for a in 0..q {
        if (0..q).any(|b| b != a && !bounds[a][b].is_exact() && bounds[a][b].upper > f64::NEG_INFINITY) {
            flagged.push(ms.metastates[a]);
        }
    }
    Ok(ReciprocatingResult { witness: None, flagged })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Everything needed at one level, built once.
pub struct LevelContext {
    pub decomposition: ValleyDecomposition,
    pub space: MetastateSpace,
    pub jump_chain: Option<JumpChainLimit>,
    pub exponents: Option<ExponentMatrix>,
}

pub fn level_contexts(l: &Landscape) -> (SaddleTable, Vec<LevelContext>) {
    let table = saddle_table(l);
    let f = scoppola_filtration(l);
    let pstar = limit_matrix(l);
    let levels = decompose_all_with(l, &table, &f)
        .into_iter()
        .map(|d| {
            let space = metastate_space(&d, l.n());
            let jump_chain = asymptotic_jump_chain_with(l, &pstar, &space).ok();
            let exponents = transition_exponents_with(l, &table, &space).ok();
            LevelContext { decomposition: d, space, jump_chain, exponents }
        })
        .collect();
    (table, levels)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelScan {
    pub level: usize,
    /// `sup_{m'} E(z*(m,m')) − E(s_m)` per metastable state.
    pub mb1_margin: BTreeMap<State, f64>,
    pub mb2_witnesses: BTreeMap<State, Vec<State>>,
    pub qualifies: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MBReport {
    pub order: f64,
    pub level: Option<usize>,
    /// Valleys of the metastable metastates, then singleton non-assigned ones.
    pub partition: Vec<Vec<State>>,
    pub mb1_margin: BTreeMap<State, f64>,
    pub mb2_witnesses: BTreeMap<State, Vec<State>>,
    pub scans: Vec<LevelScan>,
}

pub fn scan_level(l: &Landscape, table: &SaddleTable, ms: &MetastateSpace, eps: f64) -> LevelScan {
    let mut mb1_margin = BTreeMap::new();
    let mut mb2_witnesses = BTreeMap::new();
    let mut qualifies = !ms.metastable().is_empty();
    for &m in ms.metastable() {
        let Some(g) = ms.gate(m) else {
            qualifies = false;
            continue;
        };
        let others: Vec<State> = ms.metastable().iter().copied().filter(|&t| t != m).collect();
        let margin = others.iter().map(|&t| table.energy(m, t) - l.energy(g)).fold(f64::NEG_INFINITY, f64::max);
        let witnesses: Vec<State> = others.into_iter().filter(|&t| udh_witness(l, table, ms, m, t)).collect();
        qualifies &= margin <= eps && witnesses.len() >= 2;
        mb1_margin.insert(m, margin);
        mb2_witnesses.insert(m, witnesses);
    }
    LevelScan { level: ms.level, mb1_margin, mb2_witnesses, qualifies }
}

pub fn find_metabasins(l: &Landscape, eps: f64) -> Result<MBReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let (table, levels) = level_contexts(l);
    let top = levels.len();
    let mut scans = Vec::new();
    for ctx in levels.iter().take(top.saturating_sub(2)) {
        scans.push(scan_level(l, &table, &ctx.space, eps));
    }
    let hit = scans.iter().position(|s| s.qualifies);
    let (partition, mb1_margin, mb2_witnesses) = match hit {
        Some(k) => (levels[k].space.valleys.clone(), scans[k].mb1_margin.clone(), scans[k].mb2_witnesses.clone()),
        None => (Vec::new(), BTreeMap::new(), BTreeMap::new()),
    };
    Ok(MBReport { order: eps, level: hit.map(|k| k + 1), partition, mb1_margin, mb2_witnesses, scans })
}

/// Conditional law of the sojourn `σ_{n+1} − σ_n` given `(Y_{n−1}, Y_n, Y_{n+1}) = (x, y, z)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum HoldingLaw {
    /// `Geom(success)` on `{1, 2, ...}`.
    Geometric { success: f64 },
    /// Exit time of `V(y)` conditioned on leaving at `exit`, mixed over entries.
    ValleyExit {
        valley: State,
        exit: State,
        /// `(s, P_x(X_{σ₁} = s) P_s(Y₁ = z))`, unnormalized.
        entries: Vec<(State, f64)>,
        norm: f64,
        mean: f64,
    },
}

impl HoldingLaw {
    pub fn mean(&self) -> f64 {
        match self {
            HoldingLaw::Geometric { success } => 1.0 / success,
            HoldingLaw::ValleyExit { mean, .. } => *mean,
        }
    }

    /// `P(σ = t)` for `t = 1..=n_max` (index 0 unused, always 0).
    pub fn pmf(&self, model: &TransitionModel, ms: &MetastateSpace, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max + 1];
        match self {
            HoldingLaw::Geometric { success } => {
                let mut surv = 1.0;
                for slot in out.iter_mut().skip(1) {
                    *slot = surv * success;
                    surv *= 1.0 - success;
                }
            }
            HoldingLaw::ValleyExit { valley, exit, entries, norm, .. } => {
                let k = &model.kernel;
                let inside = mask(model.n(), ms.valley(*valley));
                let mut rho = vec![0.0; model.n()];
                for &(s, w) in entries {
                    let a = RegionExit::new(k, ms.valley(*valley)).unwrap().exit_prob(s, *exit);
                    if a > 0.0 {
                        rho[s] += w / a;
                    }
                }
                for slot in out.iter_mut().skip(1) {
                    let mut next = vec![0.0; model.n()];
                    let mut hit = 0.0;
                    for u in 0..model.n() {
                        if rho[u] == 0.0 {
                            continue;
                        }
                        next[u] += rho[u] * k.stay(u);
                        for &(v, p) in k.row(u) {
                            if inside[v] {
                                next[v] += rho[u] * p;
                            } else if v == *exit {
                                hit += rho[u] * p;
                            }
                        }
                    }
                    *slot = hit / norm;
                    rho = next;
                }
            }
        }
        out
    }
}

pub fn semi_markov_kernel(
    model: &TransitionModel,
    ms: &MetastateSpace,
    x: State,
    y: State,
    z: State,
) -> Result<HoldingLaw> {
    let infeasible = || Error::Infeasible(format!("transition {x} -> {y} -> {z} has probability zero"));
    for s in [x, y, z] {
        if ms.index(s).is_none() {
            return Err(Error::InvalidArgument(format!("state {s} is not a metastate")));
        }
    }
    let ex = ExactAggregate::new(model, ms)?;
    let (ix, iy, iz) = (ms.index(x).unwrap(), ms.index(y).unwrap(), ms.index(z).unwrap());
    if ix == iy || iy == iz || ex.aac_step(x)[iy] == 0.0 || ex.aac_step(y)[iz] == 0.0 {
        return Err(infeasible());
    }
    if ms.is_nonassigned(y) {
        return Ok(HoldingLaw::Geometric { success: model.kernel.leave(y) });
    }
    if !ms.is_nonassigned(x) || !ms.is_nonassigned(z) {
        return Err(infeasible());
    }
    let k = &model.kernel;
    let valley = mask(model.n(), ms.valley(y));
    let region = ex.valley_exit(y);
    let leave = k.leave(x);
    let mut entries = Vec::new();
    let mut norm = 0.0;
    let mut moment = 0.0;
    for &(s, p) in k.row(x) {
        if !valley[s] {
            continue;
        }
        let w = p / leave;
        let a = region.exit_prob(s, z);
        entries.push((s, w * a));
        norm += w * a;
        moment += w * region.exit_time_moment(s, z);
    }
    if !(norm > 0.0) {
        return Err(infeasible());
    }
    Ok(HoldingLaw::ValleyExit { valley: y, exit: z, entries, norm, mean: moment / norm })
}
