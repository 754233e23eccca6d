//! Closed-form bounds, quasi-stationary spectra, scattering functions and the
//! path-dependent versus path-independent comparison bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::aggregation::MetastateSpace;
use crate::chain::{gamma_beta, hitting_probability, hitting_probability_kernel, HittingQuery, TransitionModel};
use crate::error::{Error, Result};
use crate::landscape::{Landscape, State};
use crate::linalg::mask;
use crate::saddles::SaddleTable;
use crate::valleys::{attracted_with, outer_boundary, ValleyDecomposition};

/// `min_{a≠b: E(a)>E(b)} (E(a) − E(b))`.
pub fn delta_min_gap(l: &Landscape) -> f64 {
    let mut e = l.energies().to_vec();
    e.sort_by(f64::total_cmp);
    e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

pub fn k_beta(l: &Landscape, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let n = l.n() as f64;
    let g = gamma_beta(l, beta);
    let dmin = delta_min_gap(l);
    let tail = if dmin.is_finite() { n * (-beta * (dmin - 2.0 * g)).exp() } else { 0.0 };
    Ok(n * l.max_degree() as f64 * (tail + 1.0))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta = {beta} must be positive and finite")))
    }
}

/// `K(β) e^{−β(E(z*(x,z)) − E(z*(x,y)) − 7γ_β)}` without precondition checks.
pub fn epsilon_formula(l: &Landscape, table: &SaddleTable, x: State, y: State, z: State, beta: f64) -> f64 {
    let k = k_beta(l, beta).unwrap();
    let g = gamma_beta(l, beta);
    k * (-beta * (table.energy(x, z) - table.energy(x, y) - 7.0 * g)).exp()
}

pub fn epsilon_bound(l: &Landscape, table: &SaddleTable, x: State, y: State, z: State, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if x == y || y == z || x == z {
        return Err(Error::Precondition("x, y, z must be pairwise distinct".into()));
    }
    if !(table.energy(x, z) > table.energy(x, y)) {
        return Err(Error::Precondition(format!("E(z*({x},{z})) must exceed E(z*({x},{y}))")));
    }
    if table.saddle(x, z) == x {
        return Err(Error::Precondition(format!("z*({x},{z}) equals {x}")));
    }
    Ok(epsilon_formula(l, table, x, y, z, beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsTilde {
    pub value: f64,
    /// `y ∈ B`, the single-term case.
    pub in_b: bool,
    pub terms: usize,
}

/// Bound on `P_x(τ_y < τ_m)` for `x ⇝ m` at the decomposition's level.
pub fn epsilon_tilde(
    l: &Landscape,
    table: &SaddleTable,
    d: &ValleyDecomposition,
    x: State,
    m: State,
    y: State,
    beta: f64,
) -> Result<EpsTilde> {
    check_beta(beta)?;
    let strict = d
        .strict
        .get(&m)
        .ok_or_else(|| Error::Precondition(format!("{m} is not a minimum at level {}", d.level)))?;
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    if d.valley[&m].contains(&y) {
        return Err(Error::Precondition(format!("{y} lies in the valley of {m}")));
    }
    if !attracted_with(l, table, x, m, &d.minima, &mask(l.n(), strict)) {
        return Err(Error::Precondition(format!("{x} is not attracted by {m} at level {}", d.level)));
    }
    if table.energy(x, y) > table.energy(x, m) {
        return Ok(EpsTilde { value: epsilon_formula(l, table, x, m, y, beta), in_b: true, terms: 1 });
    }
    let cut = table.energy(x, y);
    let mut value = 0.0;
    let mut terms = 0;
    for z in l.states().filter(|&z| l.energy(z) > cut) {
        value += epsilon_formula(l, table, x, y, z, beta);
        terms += 1;
    }
    for &z in strict {
        value += epsilon_formula(l, table, z, m, y, beta);
        terms += 1;
    }
    Ok(EpsTilde { value, in_b: false, terms })
}

/// `(m_{j−1}, m_j, l_j)` links from `x` up to `m` following the construction of
/// the valleys; `x = m` gives the single self-link at `level`.
pub fn attraction_chain(levels: &[ValleyDecomposition], x: State, m: State, level: usize) -> Result<Vec<(State, State, usize)>> {
    let last = levels.last().ok_or(Error::Empty)?;
    if x == m {
        return Ok(vec![(m, m, level)]);
    }
    let mut chain = Vec::new();
    let mut cur = x;
    if let Some(a) = last.attracted_at.get(&x) {
        chain.push((x, a.target, a.level));
        cur = a.target;
    }
    while cur != m {
        let a = last
            .merged_into
            .get(&cur)
            .ok_or_else(|| Error::Precondition(format!("{x} does not lie in the valley of {m}")))?;
        chain.push((cur, a.target, a.level));
        cur = a.target;
    }
    if chain.last().is_some_and(|&(_, _, lv)| lv > level) {
        return Err(Error::Precondition(format!("{x} joins the valley of {m} only above level {level}")));
    }
    Ok(chain)
}

/// Chained bound on `P_x(τ_y < τ_m)` for `x ∈ V(m)`.
pub fn epsilon_tilde_chained(
    l: &Landscape,
    table: &SaddleTable,
    levels: &[ValleyDecomposition],
    x: State,
    m: State,
    y: State,
    level: usize,
    beta: f64,
) -> Result<f64> {
    attraction_chain(levels, x, m, level)?
        .into_iter()
        .map(|(a, b, lv)| epsilon_tilde(l, table, &levels[lv - 1], a, b, y, beta).map(|e| e.value))
        .sum()
}

/// Level at which the valley of a metastable metastate was frozen.
fn home_level(ms: &MetastateSpace, levels: &[ValleyDecomposition], m: State) -> usize {
    let d = &levels[ms.level - 1];
    d.pending.get(&m).map_or(ms.level, |p| p.index)
}

/// `δ(m,β) = max_{x∈V(m)} Σ_{z∈∂⁺V(m)} ε̃(x,m,z,β)`.
pub fn delta_m(
    l: &Landscape,
    table: &SaddleTable,
    levels: &[ValleyDecomposition],
    ms: &MetastateSpace,
    m: State,
    beta: f64,
) -> Result<f64> {
    let v = ms.valley(m);
    let boundary = outer_boundary(l, v);
    let home = home_level(ms, levels, m);
    let mut worst: f64 = 0.0;
    for &x in v {
        let mut s = 0.0;
        for &z in &boundary {
            s += epsilon_tilde_chained(l, table, levels, x, m, z, home, beta)?;
        }
        worst = worst.max(s);
    }
    Ok(worst)
}

/// `T(m,β)`; `None` when the logarithm's argument is not in `(0,1)`.
pub fn t_m(ms: &MetastateSpace, m: State, leave_prob: &[f64], deltas: &[f64], delta: f64) -> Option<f64> {
    let base = ms
        .metastates
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r != m)
        .map(|(k, &r)| {
            let d = if ms.is_nonassigned(r) { 0.0 } else { deltas[k] };
            leave_prob[k] * (1.0 - d)
        })
        .fold(f64::INFINITY, f64::min);
    (base > 0.0 && base < 1.0 && delta > 0.0 && delta < 1.0).then(|| delta.ln() / base.ln())
}

/// Upper half of the escape sandwich: `P_x(τ_z < τ_x) ≤ K|S|⁻¹e^{−β(E(z*(x,z))−E(x)−2γ)}`.
pub fn escape_upper(l: &Landscape, table: &SaddleTable, x: State, z: State, beta: f64) -> Result<f64> {
    if x == z || table.saddle(x, z) == x {
        return Err(Error::Precondition(format!("need z*({x},{z}) different from {x}")));
    }
    let n = l.n() as f64;
    let g = gamma_beta(l, beta);
    Ok(k_beta(l, beta)? / n * (-beta * (table.energy(x, z) - l.energy(x) - 2.0 * g)).exp())
}

/// Lower half: `P_x(τ_y < τ_x) ≥ |S|⁻¹e^{−β(E(z*(x,y))−E(x)+5γ)}`.
pub fn escape_lower(l: &Landscape, table: &SaddleTable, x: State, y: State, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    let n = l.n() as f64;
    let g = gamma_beta(l, beta);
    Ok((-beta * (table.energy(x, y) - l.energy(x) + 5.0 * g)).exp() / n)
}

/// Reciprocal-sum formula for `P̃_{ω₀}(τ_{ω_k} < τ_{ω₀})` on a path subgraph.
pub fn one_dimensional_formula(model: &TransitionModel, path: &[State]) -> Result<f64> {
    check_path(&model.landscape, path)?;
    let pi = &model.pi;
    let s: f64 = (1..path.len())
        .map(|i| pi[path[0]] / pi[path[i]] / model.kernel.off(path[i], path[i - 1]))
        .sum();
    Ok(1.0 / s)
}

/// The same probability by a linear solve on the restricted chain.
pub fn restricted_path_escape(model: &TransitionModel, path: &[State]) -> Result<f64> {
    check_path(&model.landscape, path)?;
    let k = model.kernel.restrict_to_path(path);
    hitting_probability_kernel(&k, &HittingQuery::new(0, &[path.len() - 1], &[0]))
}

fn check_path(l: &Landscape, path: &[State]) -> Result<()> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("path needs at least two states".into()));
    }
    let mut seen = vec![false; l.n()];
    for (i, &s) in path.iter().enumerate() {
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::InvalidArgument(format!("path revisits {s}")));
        }
        if i > 0 && !l.is_adjacent(path[i - 1], s) {
            return Err(Error::InvalidArgument(format!("{} and {s} are not adjacent", path[i - 1])));
        }
    }
    Ok(())
}

/// Both sides of `P_x(τ_z<τ_I) = P_x(τ_z<τ_{I∪{x}}) / P_x(τ_{I∪{z}}<τ_x)`.
pub fn splitting_identity(model: &TransitionModel, x: State, z: State, set: &[State]) -> Result<(f64, f64)> {
    if x == z || set.contains(&x) || set.contains(&z) {
        return Err(Error::Precondition("x, z must be distinct and outside I".into()));
    }
    let lhs = hitting_probability(model, &HittingQuery::new(x, &[z], set))?;
    let mut ix = set.to_vec();
    ix.push(x);
    let num = hitting_probability(model, &HittingQuery::new(x, &[z], &ix))?;
    let mut iz = set.to_vec();
    iz.push(z);
    let den = hitting_probability(model, &HittingQuery::new(x, &iz, &[x]))?;
    Ok((lhs, num / den))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiStationary {
    pub lambda: f64,
    /// Indexed like the valley passed in.
    pub states: Vec<State>,
    pub nu: Vec<f64>,
    pub residual: f64,
}

/// Perron pair of the valley-restricted kernel, from the `π^{1/2}`-symmetrized
/// matrix followed by power-iteration polishing.
pub fn quasi_stationary(model: &TransitionModel, v: &[State]) -> Result<QuasiStationary> {
    let n = model.n();
    if v.is_empty() {
        return Err(Error::InvalidArgument("valley is empty".into()));
    }
    let mut states = v.to_vec();
    states.sort_unstable();
    states.dedup();
    let inside = mask(n, &states);
    let pos: Vec<Option<usize>> = {
        let mut p = vec![None; n];
        for (k, &s) in states.iter().enumerate() {
            p[s] = Some(k);
        }
        p
    };
    if !restricted_irreducible(&model.landscape, &states, &inside) {
        return Err(Error::Precondition("valley restriction is not irreducible".into()));
    }
    let k = states.len();
    let q = DMatrix::from_fn(k, k, |a, b| model.prob(states[a], states[b]));
    let root: Vec<f64> = states.iter().map(|&s| model.pi[s].sqrt()).collect();
    let sym = DMatrix::from_fn(k, k, |a, b| {
        let s = root[a] * q[(a, b)] / root[b];
        let t = root[b] * q[(b, a)] / root[a];
        0.5 * (s + t)
    });
    let eig = SymmetricEigen::new(sym);
    let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let mut lambda = eig.eigenvalues[top];
    let mut nu: Vec<f64> = (0..k).map(|a| (eig.eigenvectors[(a, top)] * root[a]).abs()).collect();
    normalize(&mut nu);
    let step = |nu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (a, &s) in states.iter().enumerate() {
            out[a] += nu[a] * model.kernel.stay(s);
            for &(t, p) in model.kernel.row(s) {
                if let Some(b) = pos[t] {
                    out[b] += nu[a] * p;
                }
            }
        }
        out
    };
    let mut residual = f64::INFINITY;
    for _ in 0..50 {
        let next = step(&nu);
        lambda = next.iter().sum::<f64>();
        residual = next.iter().zip(&nu).map(|(x, y)| (x - lambda * y).abs()).fold(0.0, f64::max);
        nu = next;
        normalize(&mut nu);
        if residual < 1e-14 {
            break;
        }
    }
    if residual > 1e-10 {
        return Err(Error::NoConvergence(format!("quasi-stationary residual {residual:e}")));
    }
    Ok(QuasiStationary { lambda, states, nu, residual })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v {
        *x /= s;
    }
}

fn restricted_irreducible(l: &Landscape, states: &[State], inside: &[bool]) -> bool {
    let mut seen = vec![false; l.n()];
    let mut stack = vec![states[0]];
    seen[states[0]] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in l.neighbors(u) {
            if inside[w] && !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == states.len()
}

/// `P_ν(τ_{V^c} > n)` for `n = 0..=n_max`.
pub fn qsd_survival(model: &TransitionModel, qs: &QuasiStationary, n_max: usize) -> Vec<f64> {
    let n = model.n();
    let mut mu = vec![0.0; n];
    for (a, &s) in qs.states.iter().enumerate() {
        mu[s] = qs.nu[a];
    }
    let inside = mask(n, &qs.states);
    let mut out = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        out.push(mu.iter().sum());
        if step == n_max {
            break;
        }
        let mut next = model.kernel.push_forward(&mu);
        for (s, x) in next.iter_mut().enumerate() {
            if !inside[s] {
                *x = 0.0;
            }
        }
        mu = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringCurve {
    pub q: f64,
    /// `S(q,n)` for `n = 0..=n_max`.
    pub values: Vec<f64>,
}

impl ScatteringCurve {
    /// `τ_q(ε)`: first `n` with `S(q,n) ≤ ε`.
    pub fn relaxation(&self, eps: f64) -> Option<usize> {
        self.values.iter().position(|&s| s <= eps)
    }
}

fn scattering_with(model: &TransitionModel, q: f64, n_max: usize, site: impl Fn(State) -> State) -> Result<ScatteringCurve> {
    let l = &model.landscape;
    let n = l.n();
    let mut cos = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            cos[x][y] = (q * l.distance(site(x), site(y))?).cos();
        }
    }
    let mut rows: Vec<Vec<f64>> = (0..n).map(|x| {
        let mut r = vec![0.0; n];
        r[x] = model.pi[x];
        r
    }).collect();
    let mut values = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        let s: f64 = (0..n).map(|x| (0..n).map(|y| rows[x][y] * cos[x][y]).sum::<f64>()).sum();
        values.push(s);
        if step < n_max {
            for r in rows.iter_mut() {
                *r = model.kernel.push_forward(r);
            }
        }
    }
    Ok(ScatteringCurve { q, values })
}

/// `S(q,n) = Σ π(x) Pⁿ(x,y) cos(q·|x−y|)`, exactly.
pub fn scattering(model: &TransitionModel, q: f64, n_max: usize) -> Result<ScatteringCurve> {
    scattering_with(model, q, n_max, |s| s)
}

/// Scattering of the aggregated chain, placing each state at its metastate.
pub fn scattering_ac(model: &TransitionModel, ms: &MetastateSpace, q: f64, n_max: usize) -> Result<ScatteringCurve> {
    scattering_with(model, q, n_max, |s| ms.rep_of[s])
}

/// `P_π(X_n ≠ Ȳ_n)`.
pub fn stationary_mismatch(model: &TransitionModel, ms: &MetastateSpace) -> f64 {
    (0..model.n()).filter(|&s| ms.rep_of[s] != s).map(|s| model.pi[s]).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdmbBounds {
    pub a: f64,
    pub b: f64,
    /// Bound (b) for every `k = 0..K`.
    pub b_per_k: Vec<f64>,
    pub c: f64,
    pub raw_a: f64,
    pub raw_b: Vec<f64>,
    pub raw_c: f64,
    /// `η₂ ∧ η₃ ≤ K − 1`.
    pub c_vacuous: bool,
    pub delta: f64,
    pub delta_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdmbInput {
    pub eps: f64,
    pub beta: f64,
    pub horizon: usize,
    pub eta1: usize,
    pub eta2: usize,
    pub eta3: usize,
    /// `max |V_<(m)|` over metastable metastates.
    pub max_strict: usize,
    pub delta_max: f64,
}

/// Largest `δ` the comparison theorem admits.
pub fn pdmb_delta_limit(inp: &PdmbInput) -> Result<f64> {
    let base = inp.eta1.min(inp.eta2.saturating_sub(1)) as f64 - 1.0;
    if base <= 0.0 {
        return Err(Error::Precondition(format!(
            "η₁ ∧ (η₂ − 1) − 1 = {base} leaves no admissible δ"
        )));
    }
    Ok((base * (-2.0 * inp.beta * inp.eps).exp()).powi(inp.horizon as i32))
}

/// Raw bound (a), which does not involve `δ`.
pub fn pdmb_bound_a(inp: &PdmbInput) -> f64 {
    1.0 - (inp.max_strict as f64 + 2.0) * inp.delta_max
}

/// Raw bound (c) and whether `η₂ ∧ η₃ ≤ K − 1` makes it vacuous.
pub fn pdmb_bound_c(inp: &PdmbInput) -> (f64, bool) {
    let width = inp.eta2.min(inp.eta3);
    let vacuous = width < inp.horizon;
    let falling: f64 = (0..inp.horizon).map(|j| width.saturating_sub(j) as f64).product();
    let raw = falling
        * (1.0 - inp.delta_max).max(0.0).powi(inp.horizon as i32 - 1)
        * (-2.0 * inp.horizon as f64 * inp.eps * inp.beta).exp();
    (raw, vacuous)
}

pub fn pdmb_bounds(inp: &PdmbInput, delta: Option<f64>) -> Result<PdmbBounds> {
    if inp.horizon == 0 {
        return Err(Error::InvalidArgument("horizon K must be at least 1".into()));
    }
    let limit = pdmb_delta_limit(inp)?;
    let delta = delta.unwrap_or(limit);
    if !(delta > 0.0) || delta > limit {
        return Err(Error::Precondition(format!("δ = {delta:e} outside (0, {limit:e}]")));
    }
    let dm = inp.delta_max;
    let raw_a = pdmb_bound_a(inp);
    let raw_b: Vec<f64> = (0..inp.horizon).map(|k| 1.0 - k as f64 * (dm + (1.0 - delta))).collect();
    let (raw_c, c_vacuous) = pdmb_bound_c(inp);
    let clip = |x: f64| x.clamp(0.0, 1.0);
    Ok(PdmbBounds {
        a: clip(raw_a),
        b: clip(*raw_b.last().unwrap()),
        b_per_k: raw_b.iter().map(|&x| clip(x)).collect(),
        c: if c_vacuous { 0.0 } else { clip(raw_c) },
        raw_a,
        raw_b,
        raw_c,
        c_vacuous,
        delta,
        delta_max: dm,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `lo:hi:n` grid, inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{metastate_space, ExactAggregate};
    use crate::chain::build_metropolis;
    use crate::filtration::scoppola_filtration;
    use crate::landscape::canonical;
    use crate::saddles::saddle_table;
    use crate::valleys::decompose_all;

    fn l6() -> (Landscape, SaddleTable, Vec<ValleyDecomposition>) {
        let l = canonical("L6").unwrap();
        let t = saddle_table(&l);
        let d = decompose_all(&l, &scoppola_filtration(&l));
        (l, t, d)
    }

    #[test]
    fn k_beta_limit() {
        let (l, _, _) = l6();
        let k = k_beta(&l, 400.0).unwrap();
        assert!((k - 12.0).abs() < 1e-9);
        let ks: Vec<f64> = [50.0, 100.0, 200.0].iter().map(|&b| k_beta(&l, b).unwrap()).collect();
        assert!(ks[0] >= ks[1] && ks[1] >= ks[2]);
        assert!(k_beta(&l, 0.1).unwrap() > 12.0);
    }

    #[test]
    fn epsilon_dominates_exact() {
        let (l, t, _) = l6();
        let m = build_metropolis(&l, 5.0).unwrap();
        let b = epsilon_bound(&l, &t, 2, 0, 4, 5.0).unwrap();
        let p = hitting_probability(&m, &HittingQuery::new(2, &[4], &[0])).unwrap();
        assert!(p <= b);
        assert!(epsilon_bound(&l, &t, 2, 4, 0, 5.0).is_err());
        assert!(epsilon_bound(&l, &t, 2, 2, 0, 5.0).is_err());
    }

    #[test]
    fn epsilon_tilde_cases() {
        let (l, t, d) = l6();
        let e = epsilon_tilde(&l, &t, &d[1], 1, 0, 4, 6.0).unwrap();
        assert!(e.in_b);
        assert_eq!(e.terms, 1);
        let m = build_metropolis(&l, 6.0).unwrap();
        let p = hitting_probability(&m, &HittingQuery::new(1, &[4], &[0])).unwrap();
        assert!(p <= e.value);
        assert!(epsilon_tilde(&l, &t, &d[1], 1, 0, 2, 6.0).is_err());
        assert!(epsilon_tilde(&l, &t, &d[1], 3, 0, 4, 6.0).is_err());
    }

    #[test]
    fn chains_follow_construction() {
        let (_, _, d) = l6();
        assert_eq!(attraction_chain(&d, 1, 0, 2).unwrap(), vec![(1, 0, 2)]);
        assert_eq!(attraction_chain(&d, 2, 0, 2).unwrap(), vec![(2, 0, 2)]);
        assert_eq!(attraction_chain(&d, 1, 4, 3).unwrap(), vec![(1, 0, 2), (0, 4, 3)]);
        assert_eq!(attraction_chain(&d, 5, 4, 1).unwrap(), vec![(5, 4, 1)]);
        assert!(attraction_chain(&d, 1, 4, 2).is_err());
    }

    #[test]
    fn one_dimensional_formula_matches_solve() {
        let (l, _, _) = l6();
        for beta in [0.5, 2.0, 7.0] {
            let m = build_metropolis(&l, beta).unwrap();
            for path in [vec![0, 1, 2, 3], vec![5, 4, 3], vec![2, 1]] {
                let a = one_dimensional_formula(&m, &path).unwrap();
                let b = restricted_path_escape(&m, &path).unwrap();
                assert!((a / b - 1.0).abs() < 1e-10, "{a} vs {b}");
            }
        }
        let m = build_metropolis(&l, 1.0).unwrap();
        assert!(one_dimensional_formula(&m, &[0, 2]).is_err());
    }

    #[test]
    fn splitting_identity_holds() {
        let (l, _, _) = l6();
        let m = build_metropolis(&l, 2.0).unwrap();
        let (a, b) = splitting_identity(&m, 1, 4, &[0]).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qsd_examples() {
        let (l, _, d) = l6();
        let m = build_metropolis(&l, 3.0).unwrap();
        let single = quasi_stationary(&m, &[3]).unwrap();
        assert!((single.lambda - m.prob(3, 3)).abs() < 1e-15);
        let qs = quasi_stationary(&m, &[4, 5]).unwrap();
        for (n, s) in qsd_survival(&m, &qs, 50).iter().enumerate() {
            assert!((s - qs.lambda.powi(n as i32)).abs() < 1e-8);
        }
        let lams: Vec<f64> = d.iter().map(|lv| quasi_stationary(&m, &lv.valley[&4]).unwrap().lambda).collect();
        assert!(lams[0] <= lams[1] + 1e-12 && lams[1] <= lams[2] + 1e-12);
        assert!((lams[2] - 1.0).abs() < 1e-12);
        assert!(quasi_stationary(&m, &[0, 2]).is_err());
    }

    #[test]
    fn scattering_basics() {
        let (l, _, d) = l6();
        let m = build_metropolis(&l, 2.0).unwrap();
        let s0 = scattering(&m, 0.0, 10).unwrap();
        assert!(s0.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(s0.relaxation(0.5), None);
        let s = scattering(&m, 1.0, 50).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        assert!(s.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let ms = metastate_space(&d[1], l.n());
        let sac = scattering_ac(&m, &ms, 1.0, 50).unwrap();
        let mis = stationary_mismatch(&m, &ms);
        for (a, b) in s.values.iter().zip(&sac.values) {
            assert!((a - b).abs() <= 4.0 * mis + 1e-12);
        }
    }

    #[test]
    fn pdmb_precondition_and_vacuity() {
        let inp = PdmbInput { eps: 0.5, beta: 10.0, horizon: 3, eta1: 2, eta2: 3, eta3: 2, max_strict: 3, delta_max: 0.0 };
        let b = pdmb_bounds(&inp, None).unwrap();
        assert!(b.c_vacuous && b.c == 0.0);
        assert_eq!(b.a, 1.0);
        let bad = PdmbInput { eta1: 1, ..inp.clone() };
        assert!(pdmb_bounds(&bad, None).is_err());
        let wide = PdmbInput { eta3: 5, eta2: 5, ..inp.clone() };
        let c = pdmb_bounds(&wide, None).unwrap();
        assert!(!c.c_vacuous && c.raw_c > 0.0);
        assert!(pdmb_bounds(&inp, Some(1.0)).is_err());
    }

    #[test]
    fn t_m_needs_small_deltas() {
        let (l, t, d) = l6();
        let m = build_metropolis(&l, 8.0).unwrap();
        let ms = metastate_space(&d[1], l.n());
        let ex = ExactAggregate::new(&m, &ms).unwrap();
        let leave: Vec<f64> = ms.metastates.iter().map(|&r| 1.0 - ex.aac_step(r)[ms.index(0).unwrap()]).collect();
        let deltas: Vec<f64> = ms
            .metastates
            .iter()
            .map(|&r| if ms.is_nonassigned(r) { 0.0 } else { delta_m(&l, &t, &d, &ms, r, 8.0).unwrap() })
            .collect();
        assert!(deltas[0] > 1.0, "γ_β keeps δ large at moderate β");
        assert_eq!(t_m(&ms, 0, &leave, &deltas, 0.1), None);
        let zero = vec![0.0; ms.len()];
        let tm = t_m(&ms, 0, &leave, &zero, 0.1).unwrap();
        assert!(tm > 0.0);
    }

    #[test]
    fn ols_recovers_line() {
        let xs = linear_grid(4.0, 12.0, 5);
        assert_eq!(xs, vec![4.0, 6.0, 8.0, 10.0, 12.0]);
        let ys: Vec<f64> = xs.iter().map(|x| -2.5 * x + 1.0).collect();
        let (s, c) = ols(&xs, &ys);
        assert!((s + 2.5).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }
}
