use std::fs;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use metabasin::aggregation::{
    find_metabasins, level_contexts, project_trajectory, ExactAggregate, LevelContext,
};
use metabasin::analysis::ols;
use metabasin::chain::build_metropolis;
use metabasin::filtration::{scoppola_filtration, Filtration};
use metabasin::landscape::{canonical, load_landscape};
use metabasin::saddles::saddle_table;
use metabasin::simulate::{estimate_exit_time, immediate_returns, run_metropolis};
use metabasin::valleys::{build_tree, decompose_all, ValleyDecomposition};
use metabasin::Landscape;
use metabasin_verify::acceptance::{self, Settings};
use serde_json::{json, Value};

use crate::output::{self, by_label, labels, num, CurveTable};
use crate::{Format, Opts};

fn landscape(o: &Opts) -> Result<Landscape> {
    match (&o.landscape, &o.canonical) {
        (Some(p), _) => {
            if !p.exists() {
                bail!("landscape file {} not found", p.display());
            }
            load_landscape(p).with_context(|| format!("loading {}", p.display()))
        }
        (None, Some(name)) => Ok(canonical(name)?),
        (None, None) => bail!("pass --landscape FILE or --canonical NAME"),
    }
}

fn beta(o: &Opts) -> Result<f64> {
    match o.beta {
        Some(b) if b > 0.0 && b.is_finite() => Ok(b),
        Some(b) => bail!("--beta {b} must be positive"),
        None => bail!("--beta is required"),
    }
}

fn context(ctxs: &[LevelContext], level: usize) -> Result<&LevelContext> {
    if level == 0 || level > ctxs.len() {
        bail!("--level {level} outside 1..={}", ctxs.len());
    }
    Ok(&ctxs[level - 1])
}

fn wants(o: &Opts, f: Format) -> bool {
    o.format.is_none_or(|g| g == f)
}

fn filtration_json(l: &Landscape, f: &Filtration) -> Value {
    let levels: Vec<Value> = (1..=f.levels).map(|i| labels(l, &f.minima(i))).collect();
    json!({
        "deletion_order": f.deletion_order.iter().map(|&s| l.label(s)).collect::<Vec<_>>(),
        "deletion_costs": f.deletion_costs,
        "levels": f.levels,
        "minima": levels,
    })
}

pub fn level_json(l: &Landscape, d: &ValleyDecomposition) -> Value {
    json!({
        "level": d.level,
        "minima": labels(l, &d.minima),
        "valleys": by_label(l, d.valley.iter().map(|(&m, v)| (m, v)), |v| labels(l, v)),
        "strict": by_label(l, d.strict.iter().map(|(&m, v)| (m, v)), |v| labels(l, v)),
        "pending": by_label(l, d.pending.iter().map(|(&m, p)| (m, p)), |p| json!({
            "index": p.index,
            "valley": labels(l, &p.valley),
            "strict": labels(l, &p.strict),
        })),
        "nonassigned": labels(l, &d.nonassigned),
        "exit_gate": by_label(l, d.exit_gate.iter().map(|(&m, &g)| (m, g)), |g| l.label(g).into()),
    })
}

pub fn analyze(o: &Opts) -> Result<ExitCode> {
    let l = landscape(o)?;
    if o.format == Some(Format::Svg) {
        bail!("analyze writes json, csv or dot");
    }
    let f = scoppola_filtration(&l);
    let levels = decompose_all(&l, &f);
    let mut written = Vec::new();
    if wants(o, Format::Json) {
        output::write_json(&o.out.join("filtration.json"), filtration_json(&l, &f))?;
        written.push("filtration.json".to_string());
        for d in &levels {
            let name = format!("valleys_level{}.json", d.level);
            output::write_json(&o.out.join(&name), level_json(&l, d))?;
            written.push(name);
        }
    }
    if wants(o, Format::Dot) {
        output::write(&o.out.join("tree.dot"), &build_tree(&l, &f, &levels).to_dot(&l))?;
        written.push("tree.dot".into());
    }
    if wants(o, Format::Csv) {
        let t = saddle_table(&l);
        let mut s = String::from("r,s,saddle,energy\n");
        for r in l.states() {
            for q in l.states() {
                s += &format!("{},{},{},{}\n", l.label(r), l.label(q), l.label(t.saddle(r, q)), t.energy(r, q));
            }
        }
        output::write(&o.out.join("saddles.csv"), &s)?;
        written.push("saddles.csv".into());
    }
    println!("{} states, {} levels; wrote {} to {}", l.n(), f.levels, written.join(", "), o.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(o: &Opts) -> Result<ExitCode> {
    let l = landscape(o)?;
    let b = beta(o)?;
    let start = match o.start {
        Some(lab) => l.index_of(lab).with_context(|| format!("no state labelled {lab}"))?,
        None => 0,
    };
    let model = build_metropolis(&l, b)?;
    let traj = run_metropolis(&model, start, o.steps, o.seed);
    let mut counts = vec![0usize; l.n()];
    for &s in &traj.states {
        counts[s] += 1;
    }
    let total = traj.states.len() as f64;
    let mut stats = json!({
        "beta": b,
        "seed": o.seed,
        "steps": o.steps,
        "start": l.label(start),
        "occupation": by_label(&l, counts.iter().copied().enumerate(), |c| num(c as f64 / total)),
    });
    if let Some(level) = o.level {
        let (_, ctxs) = level_contexts(&l);
        let ms = &context(&ctxs, level)?.space;
        let p = project_trajectory(&traj.states, ms);
        let (hits, jumps) = immediate_returns(&p.aac, ms);
        stats["level"] = level.into();
        stats["aac"] = p.aac.iter().map(|&s| l.label(s)).collect::<Vec<_>>().into();
        stats["immediate_returns"] = json!({ "hits": hits, "total": jumps });
        if ms.metastable().contains(&start) {
            let est = estimate_exit_time(&model, ms, start, o.reps, o.seed)?;
            let exact = ExactAggregate::new(&model, ms)?.mean_zeta0(start)?;
            stats["exit_time"] = json!({ "mean": est.mean, "stderr": est.stderr, "reps": est.reps, "exact": exact });
        }
    }
    if wants(o, Format::Csv) {
        output::write(&o.out.join("trajectory.csv"), &traj_csv(&l, &traj.states))?;
    }
    if wants(o, Format::Json) {
        output::write_json(&o.out.join("simulation.json"), stats)?;
    }
    println!("{} steps at β={b} from {}; wrote {}", o.steps, l.label(start), o.out.display());
    Ok(ExitCode::SUCCESS)
}

fn traj_csv(l: &Landscape, states: &[usize]) -> String {
    let mut s = String::from("n,state\n");
    for (n, &x) in states.iter().enumerate() {
        s += &format!("{n},{}\n", l.label(x));
    }
    s
}

pub fn aggregate(o: &Opts) -> Result<ExitCode> {
    let l = landscape(o)?;
    let (_, ctxs) = level_contexts(&l);
    let level = o.level.unwrap_or(1);
    let ctx = context(&ctxs, level)?;
    let ms = &ctx.space;
    let lab = |s: usize| l.label(s);
    let mut v = json!({
        "level": level,
        "metastates": ms.metastates.iter().map(|&s| lab(s)).collect::<Vec<_>>(),
        "metastable": labels(&l, ms.metastable()),
        "nonassigned": labels(&l, ms.nonassigned()),
        "valleys": by_label(&l, ms.metastable().iter().map(|&m| (m, ms.valley(m))), |v| labels(&l, v)),
        "exit_gate": by_label(&l, ms.metastable().iter().map(|&m| (m, ms.gate(m))), |g| g.map_or(Value::Null, |g| lab(g).into())),
    });
    if let Some(jc) = &ctx.jump_chain {
        v["phat"] = by_label(&l, ms.metastates.iter().map(|&r| (r, r)), |r| {
            by_label(&l, ms.metastates.iter().map(|&s| (s, s)), |s| num(jc.get(ms, r, s)))
        });
    }
    if let Some(ex) = &ctx.exponents {
        v["exponents"] = json!({
            "pairs": ex.pairs.iter().map(|p| json!({"from": lab(p.from), "to": lab(p.to), "d": num(p.d), "udh": p.udh})).collect::<Vec<_>>(),
            "boundary": ex.boundary.iter().map(|b| json!({"valley": lab(b.valley), "state": lab(b.state), "exponent": num(b.exponent)})).collect::<Vec<_>>(),
        });
    }
    let aac = |b: f64| -> Result<Value> {
        let model = build_metropolis(&l, b)?;
        let ex = ExactAggregate::new(&model, ms)?;
        let rows = by_label(&l, ms.metastates.iter().map(|&r| (r, ex.aac_step(r))), |p| {
            by_label(&l, ms.metastates.iter().copied().zip(p), num)
        });
        let times = ms.metastable().iter().map(|&m| Ok((m, ex.mean_zeta0(m)?))).collect::<Result<Vec<_>>>()?;
        Ok(json!({ "beta": b, "aac_step": rows, "mean_exit_time": by_label(&l, times, num) }))
    };
    if o.beta.is_some() {
        v["exact"] = aac(beta(o)?)?;
    }
    if let Some(grid) = &o.beta_grid {
        let mut slopes = Vec::new();
        for &m in ms.metastable() {
            let mut ys = Vec::new();
            for &b in &grid.0 {
                let model = build_metropolis(&l, b)?;
                ys.push(ExactAggregate::new(&model, ms)?.mean_zeta0(m)?.ln());
            }
            slopes.push((m, if grid.0.len() > 1 { ols(&grid.0, &ys).0 } else { f64::NAN }));
        }
        v["exit_time_slopes"] = json!({ "grid": grid.0, "slope": by_label(&l, slopes, num) });
    }
    match o.format {
        Some(Format::Csv) => {
            let jc = ctx.jump_chain.as_ref().context("top level has no jump chain")?;
            let mut s = String::from("from,to,phat\n");
            for &r in &ms.metastates {
                for &t in &ms.metastates {
                    s += &format!("{},{},{}\n", lab(r), lab(t), jc.get(ms, r, t));
                }
            }
            output::write(&o.out.join(format!("phat_level{level}.csv")), &s)?;
        }
        None | Some(Format::Json) => output::write_json(&o.out.join(format!("aggregate_level{level}.json")), v.clone())?,
        Some(f) => bail!("aggregate writes json or csv, not {f:?}"),
    }
    print!("{}", output::to_string(v));
    Ok(ExitCode::SUCCESS)
}

pub fn mb(o: &Opts) -> Result<ExitCode> {
    let l = landscape(o)?;
    let eps = o.eps.context("--eps is required")?;
    let r = find_metabasins(&l, eps)?;
    let v = json!({
        "order": eps,
        "level": r.level,
        "partition": r.partition.iter().map(|v| labels(&l, v)).collect::<Vec<_>>(),
        "mb1_margin": by_label(&l, r.mb1_margin.clone(), num),
        "mb2_witnesses": by_label(&l, r.mb2_witnesses.clone(), |w| labels(&l, &w)),
        "scans": r.scans.iter().map(|s| json!({
            "level": s.level,
            "qualifies": s.qualifies,
            "mb1_margin": by_label(&l, s.mb1_margin.clone(), num),
            "mb2_witnesses": by_label(&l, s.mb2_witnesses.clone(), |w| labels(&l, &w)),
        })).collect::<Vec<_>>(),
    });
    output::write_json(&o.out.join("mb.json"), v)?;
    match r.level {
        None => println!("no MB level of order {eps}"),
        Some(level) => {
            println!("MB level {level} of order {eps}");
            let parts: Vec<String> = r.partition.iter().map(|v| format!("{}", labels(&l, v))).collect();
            println!("partition {}", parts.join(" "));
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(o: &Opts) -> Result<ExitCode> {
    let mut settings = Settings { seed: o.seed, reps: o.reps, only: o.only.clone(), ..Settings::default() };
    if let Some(g) = &o.beta_grid {
        if g.0.len() < 2 {
            bail!("--beta-grid needs at least two points");
        }
        settings.beta_grid = g.0.clone();
    }
    for name in &settings.only {
        if !acceptance::CHECKS.iter().any(|(id, n)| n == name || name.parse::<usize>() == Ok(*id)) {
            bail!("unknown check {name}");
        }
    }
    let report = acceptance::run(&settings);
    for c in &report.checks {
        println!("{}", c.line());
        for curve in &c.curves {
            let t = CurveTable {
                name: curve.name.clone(),
                x_label: curve.x_label.clone(),
                y_label: curve.y_label.clone(),
                x: curve.x.clone(),
                series: curve.series.clone(),
            };
            output::write(&o.out.join("curves").join(format!("{}.csv", curve.name)), &output::curve_csv(&t)?)?;
        }
    }
    let mut v = serde_json::to_value(&report)?;
    for c in v["checks"].as_array_mut().unwrap() {
        let names: Vec<Value> = c["curves"].as_array().unwrap().iter().map(|k| k["name"].clone()).collect();
        c["curves"] = names.into();
    }
    let labels_by_curve: Vec<Value> = report
        .checks
        .iter()
        .flat_map(|c| c.curves.iter().map(|k| json!({"name": k.name, "y_label": k.y_label})))
        .collect();
    v["curves"] = labels_by_curve.into();
    output::write_json(&o.out.join("verify.json"), v)?;
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} criteria pass", report.checks.len());
    Ok(if report.all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn report(o: &Opts) -> Result<ExitCode> {
    let input = o.input.clone().unwrap_or_else(|| o.out.clone());
    let dir = input.join("curves");
    if !dir.is_dir() {
        bail!("{} not found; run verify first", dir.display());
    }
    let y_labels: Vec<(String, String)> = fs::read_to_string(input.join("verify.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .and_then(|v| v["curves"].as_array().cloned())
        .unwrap_or_default()
        .iter()
        .filter_map(|c| Some((c["name"].as_str()?.to_string(), c["y_label"].as_str()?.to_string())))
        .collect();
    let mut names: Vec<_> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    for p in &names {
        let name = p.file_stem().unwrap().to_string_lossy().to_string();
        let y = y_labels.iter().find(|(n, _)| *n == name).map_or("value", |(_, y)| y.as_str());
        let table = output::read_curve_csv(&name, y, &fs::read_to_string(p)?)?;
        output::write(&o.out.join("plots").join(format!("{name}.svg")), &output::svg(&table))?;
    }
    println!("rendered {} plots into {}", names.len(), o.out.join("plots").display());
    Ok(ExitCode::SUCCESS)
}
