//! Brute-force oracles, written independently of the library code paths.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use macroviz_core::charts::{feasible_charts, template_witnesses, Catalog, ChartError};
use macroviz_core::dataset::{parse_csv, profile_dataset, StorageKind, Value};
use macroviz_core::knowledge::{shipped_docs, FunctionIndex, FunctionRetriever};
use macroviz_core::sql::SqlSession;
use macroviz_core::{Datatype, TypedAttribute};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    let scale = want.abs().max(got.abs());
    if scale < 1e-300 {
        return true;
    }
    (got - want).abs() <= tol * scale.max(1.0e-12)
}

#[derive(Clone, Copy, Debug)]
enum Gen {
    Int { span: i64 },
    Real,
    Date,
    Text,
}

/// A generated CSV plus the typed cells it encodes (None = empty cell).
pub struct RandomTable {
    pub csv: String,
    pub names: Vec<String>,
    pub kinds: Vec<StorageKind>,
    pub columns: Vec<Vec<Option<Value>>>,
}

const WORDS: &[&str] = &["apple", "pear", "kiwi", "fig", "lime", "Plum", "date palm", "Zest", "olive", "yam"];

pub fn random_table(rng: &mut ChaCha8Rng) -> RandomTable {
    let n_rows = rng.gen_range(0..=200);
    let n_cols = rng.gen_range(1..=5);
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut columns = Vec::new();
    let mut text_columns: Vec<Vec<String>> = Vec::new();
    for c in 0..n_cols {
        let gen = match rng.gen_range(0..5) {
            0 => Gen::Int { span: 20 },
            1 => Gen::Int { span: 1_000_000 },
            2 => Gen::Real,
            3 => Gen::Date,
            _ => Gen::Text,
        };
        let null_p = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.3) };
        let mut cells = Vec::new();
        let mut texts = Vec::new();
        for _ in 0..n_rows {
            if rng.gen_bool(null_p) {
                cells.push(None);
                texts.push(String::new());
                continue;
            }
            let (v, t) = match gen {
                Gen::Int { span } => {
                    let i = rng.gen_range(-span..=span);
                    (Value::Integer(i), i.to_string())
                }
                Gen::Real => {
                    let cents: i64 = rng.gen_range(-1_000_000..=1_000_000);
                    let text = format!("{}{}.{:02}", if cents < 0 { "-" } else { "" }, cents.abs() / 100, cents.abs() % 100);
                    (Value::Real(text.parse().unwrap()), text)
                }
                Gen::Date => {
                    let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Days::new(rng.gen_range(0..2000));
                    let text = if rng.gen_bool(0.5) { d.format("%Y-%m-%d").to_string() } else { d.format("%-m/%-d/%Y").to_string() };
                    (Value::Date(d), text)
                }
                Gen::Text => {
                    let w = if rng.gen_bool(0.7) {
                        WORDS.choose(rng).unwrap().to_string()
                    } else {
                        (0..3).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
                    };
                    (Value::Text(w.clone()), w)
                }
            };
            cells.push(Some(v));
            texts.push(t);
        }
        let kind = if cells.iter().all(Option::is_none) {
            StorageKind::Text
        } else {
            match gen {
                Gen::Int { .. } => StorageKind::Integer,
                Gen::Real => StorageKind::Real,
                Gen::Date => StorageKind::Date,
                Gen::Text => StorageKind::Text,
            }
        };
        names.push(format!("col {c}"));
        kinds.push(kind);
        columns.push(cells);
        text_columns.push(texts);
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&names).unwrap();
    for r in 0..n_rows {
        w.write_record(text_columns.iter().map(|c| c[r].as_str())).unwrap();
    }
    let csv = String::from_utf8(w.into_inner().unwrap()).unwrap();
    RandomTable { csv, names, kinds, columns }
}

fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => x == y,
        _ => a == b,
    }
}

fn less(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => x < y,
        (Value::Real(x), Value::Real(y)) => x < y,
        (Value::Date(x), Value::Date(y)) => x < y,
        (Value::Text(x), Value::Text(y)) => x.as_bytes() < y.as_bytes(),
        _ => panic!("mixed kinds"),
    }
}

/// Checks every profile statistic of one random table against brute force.
pub fn check_profiles(t: &RandomTable, tol: f64) -> Result<(), String> {
    let ds = parse_csv(t.csv.as_bytes()).map_err(|e| format!("parse: {e}"))?;
    let profiles = profile_dataset(&ds);
    if profiles.len() != t.names.len() {
        return Err("profile count".into());
    }
    for ((p, cells), kind) in profiles.iter().zip(&t.columns).zip(&t.kinds) {
        let vals: Vec<&Value> = cells.iter().flatten().collect();
        let ctx = |what: &str| format!("{}: {what}", p.name);
        if p.storage_kind != *kind {
            return Err(ctx(&format!("kind {:?} != {:?}", p.storage_kind, kind)));
        }
        if p.count != vals.len() {
            return Err(ctx("count"));
        }
        // Distinct values in first-appearance order with their frequencies.
        let mut distinct: Vec<(&Value, usize)> = Vec::new();
        for v in &vals {
            match distinct.iter_mut().find(|(d, _)| value_eq(d, v)) {
                Some(e) => e.1 += 1,
                None => distinct.push((v, 1)),
            }
        }
        if p.unique_count != distinct.len() {
            return Err(ctx("unique_count"));
        }
        let mut min: Option<&Value> = None;
        let mut max: Option<&Value> = None;
        for v in &vals {
            if min.is_none() || less(v, min.unwrap()) {
                min = Some(v);
            }
            if max.is_none() || less(max.unwrap(), v) {
                max = Some(v);
            }
        }
        if p.min.as_ref() != min || p.max.as_ref() != max {
            return Err(ctx("min/max"));
        }
        let mut ranked = distinct.clone();
        ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
        let want_top: Vec<(&Value, usize)> = ranked.into_iter().take(5).collect();
        let got_top: Vec<(&Value, usize)> = p.top5.iter().map(|t| (&t.value, t.frequency)).collect();
        if want_top.len() != got_top.len()
            || want_top.iter().zip(&got_top).any(|(w, g)| w.1 != g.1 || !value_eq(w.0, g.0))
        {
            return Err(ctx(&format!("top5 {got_top:?} != {want_top:?}")));
        }
        let nums: Vec<f64> = vals
            .iter()
            .filter_map(|v| match v {
                Value::Integer(i) => Some(*i as f64),
                Value::Real(r) => Some(*r),
                _ => None,
            })
            .collect();
        if nums.is_empty() {
            if p.mean.is_some() || p.variance.is_some() || p.stddev.is_some() {
                return Err(ctx("moments on non-numeric column"));
            }
            continue;
        }
        let n = nums.len() as f64;
        let mean = nums.iter().sum::<f64>() / n;
        let var = nums.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let checks = [("mean", p.mean, mean), ("variance", p.variance, var), ("stddev", p.stddev, var.sqrt())];
        for (what, got, want) in checks {
            let got = got.ok_or_else(|| ctx(&format!("{what} missing")))?;
            let ok = if want.abs() < 1e-9 { got.abs() < 1e-9 } else { rel_close(got, want, tol) };
            if !ok {
                return Err(ctx(&format!("{what} {got} != {want}")));
            }
        }
    }
    Ok(())
}

pub fn profiler_oracle(seed: u64, datasets: usize, tol: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..datasets {
        let t = random_table(&mut rng);
        check_profiles(&t, tol).map_err(|e| format!("dataset {i}: {e}"))?;
    }
    Ok(())
}

/// corr, regr_slope and regr_intercept against closed forms evaluated in
/// exact integer arithmetic on cent-valued data.
pub fn aggregate_oracle(seed: u64, datasets: usize, tol: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..datasets {
        let n = rng.gen_range(3..=200usize);
        let xs: Vec<i128> = (0..n).map(|_| rng.gen_range(-100_000..=100_000)).collect();
        let slope_true = rng.gen_range(-3.0..3.0);
        let ys: Vec<i128> = xs
            .iter()
            .map(|&x| (slope_true * x as f64) as i128 + rng.gen_range(-50_000..=50_000))
            .collect();
        if xs.iter().collect::<BTreeSet<_>>().len() < 2 || ys.iter().collect::<BTreeSet<_>>().len() < 2 {
            continue;
        }
        let cents = |v: i128| format!("{}{}.{:02}", if v < 0 { "-" } else { "" }, v.abs() / 100, v.abs() % 100);
        let mut csv = String::from("x,y\n");
        for (x, y) in xs.iter().zip(&ys) {
            csv.push_str(&format!("{},{}\n", cents(*x), cents(*y)));
        }
        let ds = parse_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
        let session = SqlSession::load(&ds).map_err(|e| e.to_string())?;
        let out = session
            .execute("SELECT corr(y, x) AS c, regr_slope(y, x) AS s, regr_intercept(y, x) AS i FROM csv")
            .map_err(|e| e.to_string())?;
        let row = &out.rows()[0];
        let got: Vec<f64> = row.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();

        let nn = n as i128;
        let sx: i128 = xs.iter().sum();
        let sy: i128 = ys.iter().sum();
        let sxx: i128 = xs.iter().map(|x| x * x).sum();
        let syy: i128 = ys.iter().map(|y| y * y).sum();
        let sxy: i128 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let dx = nn * sxx - sx * sx;
        let dy = nn * syy - sy * sy;
        let dxy = nn * sxy - sx * sy;
        let corr = dxy as f64 / ((dx as f64).sqrt() * (dy as f64).sqrt());
        let slope = dxy as f64 / dx as f64;
        // Intercept in cents: (sy*dx - dxy*sx) / (n*dx), then to units.
        let intercept = (sy * dx - dxy * sx) as f64 / (nn * dx) as f64 / 100.0;
        for (what, g, w) in [("corr", got[0], corr), ("regr_slope", got[1], slope), ("regr_intercept", got[2], intercept)] {
            if !rel_close(g, w, tol) {
                return Err(format!("dataset {i}: {what} {g} != {w}"));
            }
        }
    }
    Ok(())
}

fn slot_ok(allowed: &[Datatype], d: Datatype) -> bool {
    allowed.contains(&d)
}

/// Feasible templates and their witnesses by enumerating every map from
/// slots to (attribute | empty).
pub fn brute_feasible(attrs: &[TypedAttribute], catalog: &Catalog) -> BTreeMap<String, BTreeSet<Vec<Option<String>>>> {
    let mut out = BTreeMap::new();
    for t in &catalog.templates {
        let k = t.slots.len();
        let choices = attrs.len() + 1;
        let mut found = BTreeSet::new();
        for code in 0..choices.pow(k as u32) {
            let mut c = code;
            let mut pick = Vec::with_capacity(k);
            for _ in 0..k {
                pick.push(c % choices);
                c /= choices;
            }
            let placed: Vec<usize> = pick.iter().filter(|&&p| p > 0).map(|p| p - 1).collect();
            let unique: BTreeSet<usize> = placed.iter().copied().collect();
            if unique.len() != placed.len() || unique.len() != attrs.len() {
                continue;
            }
            let valid = t.slots.iter().zip(&pick).all(|(s, &p)| {
                if p == 0 {
                    !s.required
                } else {
                    slot_ok(&s.allowed, attrs[p - 1].datatype)
                }
            });
            let n = attrs.len();
            if valid && n >= t.arity.min && n <= t.arity.max {
                found.insert(pick.iter().map(|&p| (p > 0).then(|| attrs[p - 1].name.clone())).collect());
            }
        }
        if !found.is_empty() {
            out.insert(t.id.clone(), found);
        }
    }
    out
}

/// Compares `feasible_charts` with brute force for every datatype tuple of
/// arity 1 to 4. Returns the number of tuples checked.
pub fn feasibility_oracle(catalog: &Catalog) -> Result<usize, String> {
    let mut tuples = 0;
    for arity in 1..=4u32 {
        for code in 0..4usize.pow(arity) {
            let mut c = code;
            let attrs: Vec<TypedAttribute> = (0..arity)
                .map(|i| {
                    let d = Datatype::ALL[c % 4];
                    c /= 4;
                    TypedAttribute { name: format!("a{i}"), datatype: d }
                })
                .collect();
            tuples += 1;
            let want = brute_feasible(&attrs, catalog);
            let got: BTreeMap<String, BTreeSet<Vec<Option<String>>>> = match feasible_charts(&attrs, catalog) {
                Ok(f) => f.into_iter().map(|c| (c.template_id, c.witnesses.into_iter().collect())).collect(),
                Err(ChartError::NoFeasibleChart) => BTreeMap::new(),
                Err(e) => return Err(format!("{attrs:?}: {e}")),
            };
            if got != want {
                return Err(format!("{attrs:?}: {:?} != {:?}", got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>()));
            }
            for t in &catalog.templates {
                let w = template_witnesses(t, &attrs);
                if w.windows(2).any(|p| p[0] >= p[1]) {
                    return Err(format!("{}: witnesses not strictly sorted", t.id));
                }
            }
        }
    }
    Ok(tuples)
}

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Top-k names by scanning every doc with floating-point cosine.
pub fn brute_top_k(query: &str, k: usize) -> Vec<String> {
    let docs = shipped_docs();
    let doc_tf: Vec<HashMap<String, f64>> = docs
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in tokens(&format!("{} {} {}", d.name, d.signature, d.description)) {
                *m.entry(t).or_insert(0.0) += 1.0;
            }
            m
        })
        .collect();
    let vocab: BTreeSet<&String> = doc_tf.iter().flat_map(|m| m.keys()).collect();
    let mut q: HashMap<String, f64> = HashMap::new();
    for t in tokens(query) {
        if vocab.contains(&t) {
            *q.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let qn = q.values().map(|c| c * c).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, &str)> = docs
        .iter()
        .zip(&doc_tf)
        .map(|(d, m)| {
            let dn = m.values().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = q.iter().map(|(t, c)| c * m.get(t).copied().unwrap_or(0.0)).sum();
            let s = if qn == 0.0 || dn == 0.0 { 0.0 } else { dot / (qn * dn) };
            ((s * 1e12).round() / 1e12, d.name.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, n)| n.to_string()).collect()
}

pub fn random_query(rng: &mut ChaCha8Rng, vocabulary: &[String]) -> String {
    let extra = ["sales", "profit", "trend", "by", "month", "the", "of", "show", "me", "ranking"];
    let n = rng.gen_range(1..=6);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.7) {
                vocabulary.choose(rng).unwrap().clone()
            } else {
                extra.choose(rng).unwrap().to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn rag_oracle(seed: u64, queries: usize, k: usize) -> Result<(), String> {
    let index = FunctionIndex::shipped();
    let vocabulary: Vec<String> = index.vocabulary().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..queries {
        let q = random_query(&mut rng, &vocabulary);
        let got: Vec<String> = index.top_k(&q, k).iter().map(|d| d.name.clone()).collect();
        let want = brute_top_k(&q, k);
        if got != want {
            return Err(format!("query {q:?}: {got:?} != {want:?}"));
        }
    }
    let first = index.top_k("correlation", 1);
    if first.first().map(|d| d.name.as_str()) != Some("corr") {
        return Err(format!("\"correlation\" ranks {:?} first", first.first().map(|d| &d.name)));
    }
    Ok(())
}
