//! The twelve acceptance checks; each returns a pass flag and a one-line detail.

use std::collections::BTreeSet;

use metabasin::aggregation::{
    asymptotic_jump_chain, find_metabasins, level_contexts, metastate_space, reciprocating_order_test,
    structural_reachability, valley_exponent_bounds, valley_transition_limits, ExactAggregate, LevelContext,
};
use metabasin::analysis::{
    delta_m, delta_min_gap, epsilon_bound, epsilon_tilde, epsilon_tilde_chained, linear_grid, ols,
    one_dimensional_formula, pdmb_bound_a, pdmb_bound_c, pdmb_bounds, qsd_survival, quasi_stationary,
    restricted_path_escape, scattering, scattering_ac, splitting_identity, stationary_mismatch, PdmbInput,
};
use metabasin::chain::{build_metropolis, hitting_probability, HittingQuery};
use metabasin::filtration::scoppola_filtration;
use metabasin::landscape::{canonical, gen_random_landscape};
use metabasin::saddles::{essential_saddle, saddle_table, SaddleTable};
use metabasin::simulate::{immediate_return_frequency, sample_compare_mb};
use metabasin::valleys::{connectivity_params, decompose_all, outer_boundary, ValleyDecomposition};
use metabasin::{Error, Landscape, State};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::oracles::{brute_filtration, BruteSaddles, BruteValleys};

/// Order at which the L14X fixture has metabasins.
pub const L14X_EPS: f64 = 1.0;
/// Inverse temperatures for the L14X exponent regressions; its energy gaps are tenths.
pub const L14X_SLOPE_GRID: [f64; 5] = [20.0, 30.0, 40.0, 50.0, 60.0];

pub const CHECKS: [(usize, &str); 12] = [
    (1, "saddle-oracle"),
    (2, "valley-oracle"),
    (3, "golden-fixtures"),
    (4, "exact-identities"),
    (5, "domination"),
    (6, "exit-time"),
    (7, "spectral"),
    (8, "aac-convergence"),
    (9, "transition-exponents"),
    (10, "scattering"),
    (11, "pd-vs-pid"),
    (12, "reciprocating"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub beta_grid: Vec<f64>,
    pub seed: u64,
    pub reps: usize,
    /// Check names or numbers; empty runs everything.
    pub only: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self { beta_grid: linear_grid(4.0, 12.0, 5), seed: 20240611, reps: 1000, only: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub curves: Vec<Curve>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("{} [{:>2}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub settings: Settings,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
}

type Outcome = std::result::Result<(String, Vec<Curve>), String>;

fn fail<T>(msg: impl Into<String>) -> std::result::Result<T, String> {
    Err(msg.into())
}

fn lib<T>(r: metabasin::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e: Error| e.to_string())
}

pub fn selected(settings: &Settings, id: usize, name: &str) -> bool {
    settings.only.is_empty() || settings.only.iter().any(|o| o == name || o.parse::<usize>() == Ok(id))
}

pub fn run_check(id: usize, settings: &Settings) -> CheckResult {
    let name = CHECKS.iter().find(|c| c.0 == id).map(|c| c.1).expect("unknown check");
    let out = match id {
        1 => saddle_oracle(settings),
        2 => valley_oracle(settings),
        3 => golden_fixtures(),
        4 => exact_identities(settings),
        5 => domination(),
        6 => exit_time(settings),
        7 => spectral(),
        8 => aac_convergence(settings),
        9 => transition_exponents(settings),
        10 => scattering_check(),
        11 => pd_vs_pid(settings),
        _ => reciprocating(settings),
    };
    let (pass, detail, curves) = match out {
        Ok((d, c)) => (true, d, c),
        Err(d) => (false, d, Vec::new()),
    };
    CheckResult { id, name: name.to_string(), pass, detail, curves }
}

pub fn run(settings: &Settings) -> Report {
    let checks: Vec<CheckResult> =
        CHECKS.iter().filter(|(id, name)| selected(settings, *id, name)).map(|(id, _)| run_check(*id, settings)).collect();
    Report { settings: settings.clone(), all_pass: checks.iter().all(|c| c.pass), checks }
}

fn saddle_oracle(settings: &Settings) -> Outcome {
    let mut pairs = 0;
    for k in 0..200u64 {
        let n = 2 + (k % 9) as usize;
        let l = lib(gen_random_landscape(n, 2 + (k % 3) as usize, 0.1, settings.seed.wrapping_add(k)))?;
        let table = saddle_table(&l);
        let brute = BruteSaddles::new(&l);
        for r in l.states() {
            for s in l.states().filter(|&s| s != r) {
                let (z, e) = lib(essential_saddle(&l, r, s))?;
                if z != brute.saddle[r][s] || e != l.energy(z) || table.saddle(r, s) != z {
                    return fail(format!("landscape {k}: z*({r},{s}) = {z}, enumeration gives {}", brute.saddle[r][s]));
                }
                if table.saddle(s, r) != z {
                    return fail(format!("landscape {k}: table not symmetric at ({r},{s})"));
                }
                for t in l.states() {
                    if table.energy(r, t) > table.energy(r, s).max(table.energy(s, t)) {
                        return fail(format!("landscape {k}: ultrametric fails at ({r},{s},{t})"));
                    }
                }
                pairs += 1;
            }
        }
    }
    Ok((format!("200 landscapes, {pairs} ordered pairs, 0 mismatches"), Vec::new()))
}

fn connected(l: &Landscape, v: &[State]) -> bool {
    let inside: BTreeSet<State> = v.iter().copied().collect();
    let mut seen = BTreeSet::from([v[0]]);
    let mut stack = vec![v[0]];
    while let Some(u) = stack.pop() {
        for &w in l.neighbors(u) {
            if inside.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == inside.len()
}

/// Structural invariants of one level; `Err` names the first violation.
pub fn level_invariants(l: &Landscape, table: &SaddleTable, levels: &[ValleyDecomposition], i: usize) -> std::result::Result<(), String> {
    let d = &levels[i - 1];
    let mut all: Vec<(State, &[State])> = d.valley.iter().map(|(&m, v)| (m, v.as_slice())).collect();
    all.extend(d.pending.iter().map(|(&m, p)| (m, p.valley.as_slice())));
    let mut owner = vec![None; l.n()];
    for &(m, v) in &all {
        if !v.contains(&m) || !connected(l, v) {
            return fail(format!("level {i}: valley of {m} misses its minimum or is disconnected"));
        }
        for &s in v {
            if owner.get(s).copied().flatten().is_some() {
                return fail(format!("level {i}: state {s} in two valleys"));
            }
            owner[s] = Some(m);
        }
        for &s in &outer_boundary(l, v) {
            if !d.nonassigned.contains(&s) {
                return fail(format!("level {i}: boundary state {s} of {m} is assigned"));
            }
            if table.energy(s, m) != l.energy(s) {
                return fail(format!("level {i}: E(z*({s},{m})) differs from E({s})"));
            }
        }
    }
    for (&m, v) in &d.strict {
        if !v.iter().all(|s| d.valley[&m].contains(s)) {
            return fail(format!("level {i}: strict basin of {m} leaves its valley"));
        }
    }
    if (0..l.n()).any(|s| owner[s].is_none() != d.nonassigned.contains(&s)) {
        return fail(format!("level {i}: non-assigned set is not the complement of the valleys"));
    }
    for later in &levels[i..] {
        for (&m, v) in &d.valley {
            if let Some((_, w)) = later.valley.iter().find(|(_, w)| w.contains(&m)) {
                if !v.iter().all(|s| w.contains(s)) {
                    return fail(format!("level {i}: valley of {m} not nested at level {}", later.level));
                }
            }
        }
    }
    Ok(())
}

fn valley_oracle(settings: &Settings) -> Outcome {
    let mut levels_checked = 0;
    for k in 0..100u64 {
        let n = 3 + (k % 7) as usize;
        let l = lib(gen_random_landscape(n, 2 + (k % 3) as usize, 0.1, settings.seed.wrapping_add(1000 + k)))?;
        let f = scoppola_filtration(&l);
        let (order, _) = brute_filtration(&l);
        if order != f.deletion_order {
            return fail(format!("landscape {k}: filtration {:?} vs enumeration {order:?}", f.deletion_order));
        }
        let table = saddle_table(&l);
        let levels = decompose_all(&l, &f);
        let brute = BruteValleys::new(&l, order).levels();
        for (i, (d, b)) in levels.iter().zip(&brute).enumerate() {
            let mut got: Vec<(State, BTreeSet<State>)> =
                d.valley.iter().map(|(&m, v)| (m, v.iter().copied().collect())).collect();
            got.extend(d.pending.iter().map(|(&m, p)| (m, p.valley.iter().copied().collect())));
            got.sort();
            let want: Vec<(State, BTreeSet<State>)> = b.valleys.clone().into_iter().collect();
            if got != want {
                return fail(format!("landscape {k} level {}: valleys {got:?} vs {want:?}", i + 1));
            }
            let strict: Vec<(State, BTreeSet<State>)> =
                d.strict.iter().map(|(&m, v)| (m, v.iter().copied().collect())).collect();
            if strict != b.strict.clone().into_iter().collect::<Vec<_>>() {
                return fail(format!("landscape {k} level {}: strict basins differ", i + 1));
            }
            if d.nonassigned.iter().copied().collect::<BTreeSet<_>>() != b.nonassigned {
                return fail(format!("landscape {k} level {}: non-assigned sets differ", i + 1));
            }
            level_invariants(&l, &table, &levels, i + 1).map_err(|e| format!("landscape {k}: {e}"))?;
            levels_checked += 1;
        }
    }
    Ok((format!("100 landscapes, {levels_checked} levels equal to the definitional oracle, invariants hold"), Vec::new()))
}

fn labels(l: &Landscape, s: &[State]) -> Vec<i64> {
    let mut v: Vec<i64> = s.iter().map(|&x| l.label(x)).collect();
    v.sort_unstable();
    v
}

pub const L14_MINIMA: [&[i64]; 7] = [
    &[2, 4, 6, 8, 10, 12, 14],
    &[2, 4, 6, 10, 12, 14],
    &[2, 4, 6, 10, 14],
    &[2, 4, 10, 14],
    &[4, 10, 14],
    &[4, 14],
    &[4],
];
pub const L14_NONASSIGNED: [&[i64]; 7] =
    [&[3, 5, 7, 9, 11, 13], &[3, 5, 7, 11, 13], &[3, 5, 7, 11], &[3, 7, 11], &[7, 11], &[11], &[]];

fn golden_fixtures() -> Outcome {
    let l = lib(canonical("L6"))?;
    let f = scoppola_filtration(&l);
    if f.deletion_order != [2, 0, 4] || f.deletion_costs != [3.0, 8.0] {
        return fail(format!("L6 filtration {:?} costs {:?}", f.deletion_order, f.deletion_costs));
    }
    let d = decompose_all(&l, &f);
    if d[1].valley[&0] != [0, 1, 2] || d[1].valley[&4] != [4, 5] || d[1].nonassigned != [3] {
        return fail(format!("L6 level 2: {:?}, N = {:?}", d[1].valley, d[1].nonassigned));
    }
    let ms = metastate_space(&d[1], l.n());
    let jc = lib(asymptotic_jump_chain(&l, &ms))?;
    if jc.get(&ms, 3, 0) != 0.5 || jc.get(&ms, 3, 4) != 0.5 {
        return fail("L6 level 2: p̂(3,·) is not (1/2, 1/2)");
    }
    let l14 = lib(canonical("L14"))?;
    let f14 = scoppola_filtration(&l14);
    if f14.levels != 7 {
        return fail(format!("L14 has {} levels", f14.levels));
    }
    let d14 = decompose_all(&l14, &f14);
    for i in 1..=7 {
        if labels(&l14, &f14.minima(i)) != L14_MINIMA[i - 1] {
            return fail(format!("L14 M^({i}) = {:?}", labels(&l14, &f14.minima(i))));
        }
        if labels(&l14, &d14[i - 1].nonassigned) != L14_NONASSIGNED[i - 1] {
            return fail(format!("L14 N^({i}) = {:?}", labels(&l14, &d14[i - 1].nonassigned)));
        }
    }
    Ok(("L6 filtration, valleys and p̂ match; L14 reproduces all seven M and N sets".into(), Vec::new()))
}

fn random_path(l: &Landscape, rng: &mut impl Rng) -> Vec<State> {
    let mut path = vec![rng.gen_range(0..l.n())];
    let len = rng.gen_range(2..=l.n());
    while path.len() < len {
        let u = *path.last().unwrap();
        let open: Vec<State> = l.neighbors(u).iter().copied().filter(|w| !path.contains(w)).collect();
        match open.choose(rng) {
            Some(&w) => path.push(w),
            None => break,
        }
    }
    path
}

fn exact_identities(settings: &Settings) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut worst: f64 = 0.0;
    let mut paths = 0;
    let mut splits = 0;
    let mut k = 0u64;
    while paths < 50 || splits < 50 {
        k += 1;
        let n = rng.gen_range(3..=10);
        let l = lib(gen_random_landscape(n, 3, 0.2, settings.seed.wrapping_add(5000 + k)))?;
        let beta = rng.gen_range(0.5..5.0);
        let model = lib(build_metropolis(&l, beta))?;
        if paths < 50 {
            let path = random_path(&l, &mut rng);
            if path.len() >= 2 {
                let a = lib(one_dimensional_formula(&model, &path))?;
                let b = lib(restricted_path_escape(&model, &path))?;
                worst = worst.max((a / b - 1.0).abs());
                paths += 1;
            }
        }
        if splits < 50 {
            let mut states: Vec<State> = l.states().collect();
            states.shuffle(&mut rng);
            let (x, z) = (states[0], states[1]);
            let size = rng.gen_range(1..=n - 2);
            let set = &states[2..2 + size];
            let (lhs, rhs) = lib(splitting_identity(&model, x, z, set))?;
            worst = worst.max((lhs / rhs - 1.0).abs());
            splits += 1;
        }
    }
    if worst > 1e-10 {
        return fail(format!("worst relative error {worst:e}"));
    }
    Ok((format!("50 path formulas and 50 splitting identities, worst relative error {worst:.2e}"), Vec::new()))
}

const DOMINATION_BETAS: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];

fn domination() -> Outcome {
    let mut counts = [0usize; 3];
    let mut curve = Vec::new();
    for name in ["L6", "L14", "L14X"] {
        let l = lib(canonical(name))?;
        let table = saddle_table(&l);
        let levels = decompose_all(&l, &scoppola_filtration(&l));
        for &beta in &DOMINATION_BETAS {
            let model = lib(build_metropolis(&l, beta))?;
            let hit = |x: State, t: State, c: State| lib(hitting_probability(&model, &HittingQuery::new(x, &[t], &[c])));
            for x in l.states() {
                for y in l.states() {
                    for z in l.states() {
                        if let Ok(bound) = epsilon_bound(&l, &table, x, y, z, beta) {
                            let p = hit(x, z, y)?;
                            if p > bound {
                                return fail(format!("{name} β={beta}: P_{x}(τ_{z}<τ_{y}) = {p:e} > ε = {bound:e}"));
                            }
                            counts[0] += 1;
                        }
                    }
                }
            }
            for d in &levels {
                for (&m, v) in &d.valley {
                    for y in l.states().filter(|y| !v.contains(y)) {
                        for x in l.states().filter(|&x| x != y) {
                            if let Ok(e) = epsilon_tilde(&l, &table, d, x, m, y, beta) {
                                let p = hit(x, y, m)?;
                                if p > e.value {
                                    return fail(format!("{name} level {} β={beta}: ε̃({x},{m},{y}) below {p:e}", d.level));
                                }
                                counts[1] += 1;
                            }
                        }
                        for &x in v {
                            let bound = lib(epsilon_tilde_chained(&l, &table, &levels, x, m, y, d.level, beta))?;
                            let p = hit(x, y, m)?;
                            if p > bound {
                                return fail(format!("{name} level {} β={beta}: chained bound ({x},{m},{y}) below {p:e}", d.level));
                            }
                            counts[2] += 1;
                        }
                    }
                }
            }
            if name == "L6" {
                curve.push((hit(2, 4, 0)?, lib(epsilon_bound(&l, &table, 2, 0, 4, beta))?));
            }
        }
    }
    let curves = vec![Curve {
        name: "domination_L6_2_0_4".into(),
        x_label: "beta".into(),
        y_label: "probability".into(),
        x: DOMINATION_BETAS.to_vec(),
        series: vec![
            ("exact P_2(tau_4 < tau_0)".into(), curve.iter().map(|c| c.0).collect()),
            ("epsilon(2,0,4)".into(), curve.iter().map(|c| c.1).collect()),
        ],
    }];
    Ok((format!("{} ε triples, {} ε̃ and {} chained cases dominated", counts[0], counts[1], counts[2]), curves))
}

fn exit_time(settings: &Settings) -> Outcome {
    let l = lib(canonical("L6"))?;
    let d = decompose_all(&l, &scoppola_filtration(&l));
    let ms = metastate_space(&d[1], l.n());
    let target = l.energy(ms.gate(4).unwrap()) - l.energy(4);
    let mut series = Vec::new();
    let mut slopes = Vec::new();
    for r in [4, 5] {
        let mut ys = Vec::new();
        for &beta in &settings.beta_grid {
            let model = lib(build_metropolis(&l, beta))?;
            ys.push(lib(lib(ExactAggregate::new(&model, &ms))?.mean_zeta0(r))?.ln());
        }
        let (s, _) = ols(&settings.beta_grid, &ys);
        slopes.push(s);
        series.push((format!("ln E_{r} zeta0"), ys));
    }
    let curves = vec![Curve {
        name: "exit_time_L6".into(),
        x_label: "beta".into(),
        y_label: "ln E zeta0".into(),
        x: settings.beta_grid.clone(),
        series,
    }];
    let detail = format!("slopes {:.4}, {:.4} vs {target} over {} grid points", slopes[0], slopes[1], settings.beta_grid.len());
    if slopes.iter().any(|s| (s - target).abs() > 0.10 * target) {
        return fail(detail);
    }
    Ok((detail, curves))
}

fn spectral() -> Outcome {
    let l = lib(canonical("L6"))?;
    let d = decompose_all(&l, &scoppola_filtration(&l));
    let mut worst: f64 = 0.0;
    let mut lambdas = Vec::new();
    for beta in [1.0, 3.0] {
        let model = lib(build_metropolis(&l, beta))?;
        let mut prev = 0.0;
        for lv in &d {
            let qs = lib(quasi_stationary(&model, &lv.valley[&4]))?;
            if qs.lambda < prev - 1e-12 {
                return fail(format!("β={beta}: λ decreases at level {}", lv.level));
            }
            prev = qs.lambda;
            lambdas.push(qs.lambda);
            for (n, s) in qsd_survival(&model, &qs, 50).iter().enumerate() {
                worst = worst.max((s - qs.lambda.powi(n as i32)).abs());
            }
        }
        if (prev - 1.0).abs() > 1e-12 {
            return fail(format!("β={beta}: top-level λ = {prev}"));
        }
    }
    if worst > 1e-8 {
        return fail(format!("geometric exit deviates by {worst:e}"));
    }
    Ok((format!("λ nondecreasing {lambdas:.6?}; max |P_ν(τ>n) − λⁿ| = {worst:.1e}"), Vec::new()))
}

fn aac_convergence(settings: &Settings) -> Outcome {
    let l = lib(canonical("L6"))?;
    let (_, ctxs) = level_contexts(&l);
    let mut grid = settings.beta_grid.clone();
    grid.sort_by(f64::total_cmp);
    let models: Vec<_> = grid.iter().map(|&b| lib(build_metropolis(&l, b))).collect::<std::result::Result<_, _>>()?;
    let mut curves = Vec::new();
    let mut worst: f64 = 0.0;
    for ctx in &ctxs {
        let (ms, Some(jc)) = (&ctx.space, &ctx.jump_chain) else { continue };
        let mut series = Vec::new();
        for &m in &ms.metastates {
            let mut tvs = Vec::new();
            for model in &models {
                let p = lib(ExactAggregate::new(model, ms))?.aac_step(m);
                tvs.push(0.5 * ms.metastates.iter().enumerate().map(|(k, &s)| (p[k] - jc.get(ms, m, s)).abs()).sum::<f64>());
            }
            if tvs.windows(2).any(|w| w[1] > w[0] + 1e-12) {
                return fail(format!("level {}: TV from {m} not monotone: {tvs:?}", ms.level));
            }
            worst = worst.max(*tvs.last().unwrap());
            series.push((format!("TV from {m}"), tvs));
        }
        curves.push(Curve { name: format!("aac_tv_L6_level{}", ms.level), x_label: "beta".into(), y_label: "TV".into(), x: grid.clone(), series });
    }
    let top = grid.last().unwrap();
    if worst > 0.05 {
        return fail(format!("TV at β={top} is {worst:.4}"));
    }
    Ok((format!("TV nonincreasing on {} levels; max {worst:.2e} at β={top}", curves.len()), curves))
}

/// Worst `|slope + D| / (0.15·max(D, Δmin))` over udh pairs and boundary states.
pub fn exponent_slopes(l: &Landscape, ctx: &LevelContext, grid: &[f64]) -> std::result::Result<(f64, usize), String> {
    let ms = &ctx.space;
    let ex = ctx.exponents.as_ref().ok_or("level has no exponents")?;
    let dmin = delta_min_gap(l);
    let models: Vec<_> = grid.iter().map(|&b| lib(build_metropolis(l, b))).collect::<std::result::Result<_, _>>()?;
    let aggs: Vec<_> = models.iter().map(|m| lib(ExactAggregate::new(m, ms))).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut fit = |ys: Vec<f64>, d: f64, what: String| -> std::result::Result<(), String> {
        if ys.iter().any(|y| !y.is_finite()) {
            return fail(format!("{what}: zero probability on the grid"));
        }
        let (s, _) = ols(grid, &ys);
        worst = worst.max((s + d).abs() / (0.15 * d.max(dmin)));
        count += 1;
        Ok(())
    };
    for p in ex.pairs.iter().filter(|p| p.udh) {
        let b = ms.index(p.to).unwrap();
        let ys = aggs.iter().map(|a| lib(a.valley_transition(p.from)).map(|v| v[b].ln())).collect::<std::result::Result<Vec<_>, _>>()?;
        fit(ys, p.d, format!("pair ({},{})", p.from, p.to))?;
    }
    for bx in &ex.boundary {
        let k = ms.index(bx.state).unwrap();
        let ys = aggs.iter().map(|a| a.aac_step(bx.valley)[k].ln()).collect();
        fit(ys, bx.exponent, format!("boundary ({},{})", bx.valley, bx.state))?;
    }
    Ok((worst, count))
}

fn transition_exponents(settings: &Settings) -> Outcome {
    let mut parts = Vec::new();
    let l6 = lib(canonical("L6"))?;
    let (_, c6) = level_contexts(&l6);
    let l14x = lib(canonical("L14X"))?;
    let (_, c14) = level_contexts(&l14x);
    let mb = lib(find_metabasins(&l14x, L14X_EPS))?.level.ok_or("L14X has no metabasin level")?;
    let mut runs: Vec<(&str, &Landscape, &LevelContext, Vec<f64>)> = Vec::new();
    for ctx in c6.iter().filter(|c| c.exponents.is_some()) {
        runs.push(("L6", &l6, ctx, settings.beta_grid.clone()));
    }
    for lv in [1, mb] {
        runs.push(("L14X", &l14x, &c14[lv - 1], L14X_SLOPE_GRID.to_vec()));
    }
    let mut worst: f64 = 0.0;
    for (name, l, ctx, grid) in runs {
        let (w, n) = exponent_slopes(l, ctx, &grid)?;
        worst = worst.max(w);
        parts.push(format!("{name} level {}: {n} fits, ratio {w:.3}", ctx.space.level));
    }
    let detail = parts.join("; ");
    if worst > 1.0 {
        return fail(detail);
    }
    Ok((detail, Vec::new()))
}

fn scattering_check() -> Outcome {
    let l = lib(canonical("L6"))?;
    let d = decompose_all(&l, &scoppola_filtration(&l));
    let mut worst: f64 = 0.0;
    let mut curves = Vec::new();
    for lv in &d[..2] {
        let ms = metastate_space(lv, l.n());
        let mut mis = Vec::new();
        for beta in [2.0, 5.0] {
            let model = lib(build_metropolis(&l, beta))?;
            let mismatch = stationary_mismatch(&model, &ms);
            mis.push(mismatch);
            for q in [0.5, 1.0, 2.0] {
                let s = lib(scattering(&model, q, 200))?;
                let sac = lib(scattering_ac(&model, &ms, q, 200))?;
                for (a, b) in s.values.iter().zip(&sac.values) {
                    let gap = (a - b).abs();
                    if gap > 4.0 * mismatch + 1e-12 {
                        return fail(format!("level {} β={beta} q={q}: |S − S_AC| = {gap:e} > 4·{mismatch:e}", lv.level));
                    }
                    worst = worst.max(gap / (4.0 * mismatch));
                }
                if lv.level == 2 && beta == 2.0 && q == 1.0 {
                    curves.push(Curve {
                        name: "scattering_L6".into(),
                        x_label: "n".into(),
                        y_label: "S(q,n)".into(),
                        x: (0..=200).map(|n| n as f64).collect(),
                        series: vec![("S_X".into(), s.values.clone()), ("S_AC".into(), sac.values.clone())],
                    });
                }
            }
        }
        if !(mis[1] < mis[0]) {
            return fail(format!("level {}: mismatch {mis:?} not decreasing", lv.level));
        }
    }
    Ok((format!("levels 1-2, β∈{{2,5}}, q∈{{0.5,1,2}}: worst |S−S_AC|/(4·mismatch) = {worst:.3}"), curves))
}

const PDMB_BETA: f64 = 10.0;
const PDMB_HORIZON: usize = 3;

fn pd_vs_pid(settings: &Settings) -> Outcome {
    let l = lib(canonical("L14X"))?;
    let report = lib(find_metabasins(&l, L14X_EPS))?;
    let level = report.level.ok_or("L14X has no metabasin level")?;
    let table = saddle_table(&l);
    let levels = decompose_all(&l, &scoppola_filtration(&l));
    let d = &levels[level - 1];
    let ms = metastate_space(d, l.n());
    let model = lib(build_metropolis(&l, PDMB_BETA))?;
    let eta = lib(connectivity_params(&l, d, L14X_EPS))?;
    let mut delta_max: f64 = 0.0;
    for &m in ms.metastable() {
        delta_max = delta_max.max(lib(delta_m(&l, &table, &levels, &ms, m, PDMB_BETA))?);
    }
    let inp = PdmbInput {
        eps: L14X_EPS,
        beta: PDMB_BETA,
        horizon: PDMB_HORIZON,
        eta1: eta.eta1.unwrap_or(usize::MAX),
        eta2: eta.eta2.unwrap_or(usize::MAX),
        eta3: eta.eta3.unwrap_or(usize::MAX),
        max_strict: ms.strict[..ms.n_metastable].iter().map(Vec::len).max().unwrap_or(0),
        delta_max,
    };
    let a = pdmb_bound_a(&inp).clamp(0.0, 1.0);
    let (raw_c, vac) = pdmb_bound_c(&inp);
    let c = if vac { 0.0 } else { raw_c.clamp(0.0, 1.0) };
    let b = pdmb_bounds(&inp, None).ok().map(|x| x.b_per_k);
    let ex = lib(ExactAggregate::new(&model, &ms))?;
    let mut mc_checks = 0;
    let mut min_freq = [1.0f64; 3];
    for &m0 in &ms.metastates {
        let st = lib(sample_compare_mb(&model, &ms, m0, PDMB_HORIZON, settings.reps, settings.seed))?;
        for k in 0..PDMB_HORIZON {
            if a > 0.0 && st.freq_a[k] < a {
                return fail(format!("m0={m0}: event (a) at k={k} has frequency {} < {a}", st.freq_a[k]));
            }
            if let Some(bk) = &b {
                if bk[k] > 0.0 && st.freq_b[k] < bk[k] {
                    return fail(format!("m0={m0}: event (b) at k={k} has frequency {} < {}", st.freq_b[k], bk[k]));
                }
            }
            min_freq[0] = min_freq[0].min(st.freq_a[k]);
            min_freq[1] = min_freq[1].min(st.freq_b[k]);
        }
        if c > 0.0 && st.freq_c < c {
            return fail(format!("m0={m0}: event (c) has frequency {} < {c}", st.freq_c));
        }
        min_freq[2] = min_freq[2].min(st.freq_c);
        let exact = ex.aac_step(m0);
        for (k, &p) in exact.iter().enumerate() {
            let sd = (p * (1.0 - p) / st.reps as f64).sqrt();
            if (st.first_jump[k] - p).abs() > 3.0 * sd + 1e-12 {
                return fail(format!("m0={m0}: P(Y₁={}) estimated {} vs exact {p:.6}", ms.metastates[k], st.first_jump[k]));
            }
            mc_checks += 1;
        }
    }
    let delta_note = if delta_max.is_finite() { format!("{delta_max:.2e}") } else { "beyond f64 range".into() };
    let b_note = match &b {
        Some(v) => format!("(b) {v:.3?}"),
        None => format!("(b) no admissible δ with η={:?}", (eta.eta1, eta.eta2, eta.eta3)),
    };
    Ok((
        format!(
            "level {level}, δmax {delta_note}: bounds (a) {a:.3}, {b_note}, (c) {c:.3}; min frequencies {min_freq:.3?}; {mc_checks} Y₁ laws within 3σ"
        ),
        Vec::new(),
    ))
}

const RETURN_BETA: f64 = 8.0;
const RETURN_STEPS: usize = 100_000;

fn reciprocating(settings: &Settings) -> Outcome {
    let l = lib(canonical("L6"))?;
    let (_, ctxs) = level_contexts(&l);
    let mut found = Vec::new();
    for ctx in &ctxs[..2] {
        let ms = &ctx.space;
        let lim = lib(valley_transition_limits(ms, ctx.jump_chain.as_ref().ok_or("no jump chain")?))?;
        let reach = lib(structural_reachability(&l, ms))?;
        let bounds = valley_exponent_bounds(ms, ctx.exponents.as_ref().ok_or("no exponents")?, &lim, &reach);
        found.push(lib(reciprocating_order_test(ms, &bounds, 1.0))?.witness);
    }
    if found != [Some(vec![0, 2]), None] {
        return fail(format!("witnesses {found:?}"));
    }
    let lx = lib(canonical("L14X"))?;
    let mb = lib(find_metabasins(&lx, L14X_EPS))?.level.ok_or("L14X has no metabasin level")?;
    let (_, cx) = level_contexts(&lx);
    let model = lib(build_metropolis(&lx, RETURN_BETA))?;
    let start = cx[mb - 1].space.metastable()[0];
    let f1 = lib(immediate_return_frequency(&model, &cx[0].space, start, RETURN_STEPS, settings.seed))?;
    let fm = lib(immediate_return_frequency(&model, &cx[mb - 1].space, start, RETURN_STEPS, settings.seed))?;
    let detail = format!("L6 witnesses {found:?}; L14X immediate returns {fm:.4} at level {mb} vs {f1:.4} at level 1");
    if !(fm < f1) {
        return fail(detail);
    }
    Ok((detail, Vec::new()))
}
