//! Statistical aggregates missing from SQLite, registered per connection.
//!
//! Every aggregate buffers its inputs and computes with two passes (means
//! first, then centered sums). Rows with a null or non-numeric input are
//! skipped, matching the usual SQL aggregate semantics.

use rusqlite::functions::{Aggregate, Context, FunctionFlags};
use rusqlite::types::ValueRef;
use rusqlite::{Connection, Error, Result};

fn numeric(v: ValueRef<'_>) -> Option<f64> {
    match v {
        ValueRef::Integer(i) => Some(i as f64),
        ValueRef::Real(r) if r.is_finite() => Some(r),
        _ => None,
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Centered second moments of paired samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl Moments {
    pub fn of(pairs: &[(f64, f64)]) -> Option<Self> {
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len();
        let mean_y = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mean_x = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for &(y, x) in pairs {
            let (dx, dy) = (x - mean_x, y - mean_y);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        Some(Self { n, mean_x, mean_y, sxx, syy, sxy })
    }
}

#[derive(Debug, Clone, Copy)]
enum Paired {
    Corr,
    CovarPop,
    CovarSamp,
    Slope,
    Intercept,
    R2,
}

impl Paired {
    fn finish(self, m: Moments) -> Option<f64> {
        let n = m.n as f64;
        let v = match self {
            Paired::Corr if m.sxx == 0.0 || m.syy == 0.0 => return None,
            Paired::Corr => m.sxy / (m.sxx.sqrt() * m.syy.sqrt()),
            Paired::CovarPop => m.sxy / n,
            Paired::CovarSamp if m.n < 2 => return None,
            Paired::CovarSamp => m.sxy / (n - 1.0),
            Paired::Slope | Paired::Intercept | Paired::R2 if m.sxx == 0.0 => return None,
            Paired::Slope => m.sxy / m.sxx,
            Paired::Intercept => m.mean_y - (m.sxy / m.sxx) * m.mean_x,
            Paired::R2 if m.syy == 0.0 => 1.0,
            Paired::R2 => (m.sxy * m.sxy) / (m.sxx * m.syy),
        };
        finite(v)
    }
}

impl Aggregate<Vec<(f64, f64)>, Option<f64>> for Paired {
    fn init(&self, _: &mut Context<'_>) -> Result<Vec<(f64, f64)>> {
        Ok(Vec::new())
    }

    fn step(&self, ctx: &mut Context<'_>, acc: &mut Vec<(f64, f64)>) -> Result<()> {
        if let (Some(y), Some(x)) = (numeric(ctx.get_raw(0)), numeric(ctx.get_raw(1))) {
            acc.push((y, x));
        }
        Ok(())
    }

    fn finalize(&self, _: &mut Context<'_>, acc: Option<Vec<(f64, f64)>>) -> Result<Option<f64>> {
        Ok(acc.and_then(|pairs| Moments::of(&pairs)).and_then(|m| self.finish(m)))
    }
}

#[derive(Debug, Clone, Copy)]
enum Spread {
    VarSamp,
    VarPop,
    StddevSamp,
    StddevPop,
}

impl Aggregate<Vec<f64>, Option<f64>> for Spread {
    fn init(&self, _: &mut Context<'_>) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn step(&self, ctx: &mut Context<'_>, acc: &mut Vec<f64>) -> Result<()> {
        acc.extend(numeric(ctx.get_raw(0)));
        Ok(())
    }

    fn finalize(&self, _: &mut Context<'_>, acc: Option<Vec<f64>>) -> Result<Option<f64>> {
        let xs = acc.unwrap_or_default();
        let sample = matches!(self, Spread::VarSamp | Spread::StddevSamp);
        if xs.is_empty() || (sample && xs.len() < 2) {
            return Ok(None);
        }
        let m = mean(&xs);
        let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
        let var = ss / if sample { xs.len() as f64 - 1.0 } else { xs.len() as f64 };
        Ok(finite(match self {
            Spread::VarSamp | Spread::VarPop => var,
            Spread::StddevSamp | Spread::StddevPop => var.sqrt(),
        }))
    }
}

/// Linear interpolation between closest ranks; `fraction` in [0, 1].
pub fn percentile_cont(values: &mut [f64], fraction: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = fraction * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

struct Percentile {
    fixed: Option<f64>,
}

impl Aggregate<(Vec<f64>, Option<f64>), Option<f64>> for Percentile {
    fn init(&self, _: &mut Context<'_>) -> Result<(Vec<f64>, Option<f64>)> {
        Ok((Vec::new(), self.fixed))
    }

    fn step(&self, ctx: &mut Context<'_>, acc: &mut (Vec<f64>, Option<f64>)) -> Result<()> {
        if acc.1.is_none() {
            let f = numeric(ctx.get_raw(1)).filter(|f| (0.0..=1.0).contains(f)).ok_or_else(|| {
                Error::UserFunctionError("percentile_cont fraction must be between 0 and 1".into())
            })?;
            acc.1 = Some(f);
        }
        acc.0.extend(numeric(ctx.get_raw(0)));
        Ok(())
    }

    fn finalize(
        &self,
        _: &mut Context<'_>,
        acc: Option<(Vec<f64>, Option<f64>)>,
    ) -> Result<Option<f64>> {
        Ok(acc.and_then(|(mut xs, f)| percentile_cont(&mut xs, f?)))
    }
}

pub const REGISTERED: [&str; 14] = [
    "corr",
    "covar_pop",
    "covar_samp",
    "regr_slope",
    "regr_intercept",
    "regr_r2",
    "variance",
    "var_samp",
    "var_pop",
    "stddev",
    "stddev_samp",
    "stddev_pop",
    "percentile_cont",
    "median",
];

pub fn register(conn: &Connection) -> Result<()> {
    let flags = FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC;
    for (name, kind) in [
        ("corr", Paired::Corr),
        ("covar_pop", Paired::CovarPop),
        ("covar_samp", Paired::CovarSamp),
        ("regr_slope", Paired::Slope),
        ("regr_intercept", Paired::Intercept),
        ("regr_r2", Paired::R2),
    ] {
        conn.create_aggregate_function(name, 2, flags, kind)?;
    }
    for (name, kind) in [
        ("variance", Spread::VarSamp),
        ("var_samp", Spread::VarSamp),
        ("var_pop", Spread::VarPop),
        ("stddev", Spread::StddevSamp),
        ("stddev_samp", Spread::StddevSamp),
        ("stddev_pop", Spread::StddevPop),
    ] {
        conn.create_aggregate_function(name, 1, flags, kind)?;
    }
    conn.create_aggregate_function("percentile_cont", 2, flags, Percentile { fixed: None })?;
    conn.create_aggregate_function("median", 1, flags, Percentile { fixed: Some(0.5) })?;
    Ok(())
}
