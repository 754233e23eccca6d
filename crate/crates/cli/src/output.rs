use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use metabasin::{Landscape, State};
use serde_json::{Map, Value};

/// Rounds to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(x.to_string());
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap();
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

/// Rounds every float in `v` to 12 significant digits.
pub fn tidy(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap()),
        Value::Array(a) => Value::Array(a.into_iter().map(tidy).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, tidy(v))).collect()),
        other => other,
    }
}

pub fn to_string(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&tidy(v)).unwrap();
    s.push('\n');
    s
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, v: Value) -> Result<()> {
    write(path, &to_string(v))
}

pub fn labels(l: &Landscape, s: &[State]) -> Value {
    let mut v: Vec<i64> = s.iter().map(|&x| l.label(x)).collect();
    v.sort_unstable();
    v.into()
}

/// Object keyed by state label.
pub fn by_label<T>(l: &Landscape, items: impl IntoIterator<Item = (State, T)>, f: impl Fn(T) -> Value) -> Value {
    let mut m = Map::new();
    for (s, t) in items {
        m.insert(l.label(s).to_string(), f(t));
    }
    Value::Object(m)
}

pub struct CurveTable {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

pub fn curve_csv(c: &CurveTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![c.x_label.clone()];
    header.extend(c.series.iter().map(|s| s.0.clone()));
    w.write_record(&header)?;
    for (i, x) in c.x.iter().enumerate() {
        let mut row = vec![format!("{x}")];
        row.extend(c.series.iter().map(|s| format!("{}", s.1[i])));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_curve_csv(name: &str, y_label: &str, text: &str) -> Result<CurveTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header.len() >= 2, "{name}: need an x column and at least one series");
    let mut x = Vec::new();
    let mut cols = vec![Vec::new(); header.len() - 1];
    for rec in r.records() {
        let rec = rec?;
        x.push(rec[0].parse::<f64>().with_context(|| format!("{name}: bad x value"))?);
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(rec[k + 1].parse::<f64>().with_context(|| format!("{name}: bad value"))?);
        }
    }
    Ok(CurveTable {
        name: name.to_string(),
        x_label: header[0].clone(),
        y_label: y_label.to_string(),
        x,
        series: header[1..].iter().cloned().zip(cols).collect(),
    })
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line chart of every series against `x`.
pub fn svg(c: &CurveTable) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 70.0, 170.0, 30.0, 50.0);
    let finite = |v: &&f64| v.is_finite();
    let xs: Vec<f64> = c.x.iter().filter(finite).copied().collect();
    let ys: Vec<f64> = c.series.iter().flat_map(|s| s.1.iter().filter(finite).copied()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (false, _) => (0.0, 1.0),
            (true, false) => (lo - 0.5, lo + 0.5),
            _ => (lo, hi),
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, (w - right + left) / 2.0, escape(&c.name)).unwrap();
    writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    )
    .unwrap();
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), h - bottom + 16.0, fmt_tick(xv)).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, py(yv) + 4.0, fmt_tick(yv)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (w - right + left) / 2.0, h - 12.0, escape(&c.x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (h - bottom + top) / 2.0,
        escape(&c.y_label)
    )
    .unwrap();
    for (k, (name, ys)) in c.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = c
            .x
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
        let ly = top + 16.0 * k as f64;
        writeln!(s, r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - right + 10.0, w - right + 30.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right + 34.0, ly + 4.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(num(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(tidy(serde_json::json!({"b": 2.0000000000001, "a": [1]})).to_string(), r#"{"a":[1],"b":2.0}"#);
    }

    #[test]
    fn csv_round_trip() {
        let c = CurveTable {
            name: "t".into(),
            x_label: "beta".into(),
            y_label: "y".into(),
            x: vec![1.0, 2.0],
            series: vec![("a".into(), vec![0.5, 0.25]), ("b".into(), vec![1.0, f64::INFINITY])],
        };
        let back = read_curve_csv("t", "y", &curve_csv(&c).unwrap()).unwrap();
        assert_eq!(back.x, c.x);
        assert_eq!(back.series, c.series);
        let pic = svg(&back);
        assert!(pic.starts_with("<svg") && pic.matches("<polyline").count() == 2);
    }
}
