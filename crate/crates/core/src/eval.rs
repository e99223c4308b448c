//! Answer scoring, accuracy-versus-K curves and their trapezoid AUC.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("EmptyGolds: no non-empty gold answer to compare against")]
    EmptyGolds,
    #[error("MissingK: accuracy curve has no point at k = {0}")]
    MissingK(u32),
    #[error("DegenerateInterval: [{0}, {1}] is empty")]
    DegenerateInterval(u32, u32),
    #[error("TooFew: need at least 2 values, got {0}")]
    TooFew(usize),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("report input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseMode {
    #[default]
    Insensitive,
    Exact,
}

fn normalize(s: &str, mode: CaseMode) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    match mode {
        CaseMode::Insensitive => collapsed.to_lowercase(),
        CaseMode::Exact => collapsed,
    }
}

/// True when some gold answer occurs inside the generated text, after
/// whitespace normalization (and lowercasing unless `mode` is exact).
pub fn answer_correct(generated: &str, golds: &[String], mode: CaseMode) -> Result<bool, EvalError> {
    let golds: Vec<String> = golds
        .iter()
        .map(|g| normalize(g, mode))
        .filter(|g| !g.is_empty())
        .collect();
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    let generated = normalize(generated, mode);
    Ok(golds.iter().any(|g| generated.contains(g.as_str())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccPoint {
    pub k: u32,
    /// Percentage in [0, 100].
    pub acc: f64,
    /// Number of scored questions; `None` for curves loaded from tables.
    pub n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccCurve {
    points: Vec<AccPoint>,
}

impl AccCurve {
    pub fn new(points: Vec<AccPoint>) -> Result<Self, EvalError> {
        for w in points.windows(2) {
            if w[1].k <= w[0].k {
                return Err(EvalError::InvalidCurve(format!(
                    "k must be strictly increasing ({} then {})",
                    w[0].k, w[1].k
                )));
            }
        }
        for p in &points {
            if !(0.0..=100.0).contains(&p.acc) {
                return Err(EvalError::InvalidCurve(format!(
                    "acc {} at k = {} is outside [0, 100]",
                    p.acc, p.k
                )));
            }
            if p.n == Some(0) {
                return Err(EvalError::InvalidCurve(format!("no samples at k = {}", p.k)));
            }
        }
        Ok(AccCurve { points })
    }

    /// Curve with consecutive k starting at `first_k`.
    pub fn from_values(first_k: u32, accs: &[f64]) -> Result<Self, EvalError> {
        Self::new(
            accs.iter()
                .enumerate()
                .map(|(i, &acc)| AccPoint {
                    k: first_k + i as u32,
                    acc,
                    n: None,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[AccPoint] {
        &self.points
    }

    pub fn get(&self, k: u32) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.acc)
    }
}

/// Per-K accuracy: `100 * correct / n` for each K present in `results`.
pub fn acc_by_k(results: &[(u32, bool)]) -> AccCurve {
    let mut tally: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for &(k, correct) in results {
        let entry = tally.entry(k).or_default();
        entry.0 += correct as u64;
        entry.1 += 1;
    }
    let points = tally
        .into_iter()
        .map(|(k, (c, n))| AccPoint {
            k,
            acc: 100.0 * c as f64 / n as f64,
            n: Some(n),
        })
        .collect();
    AccCurve { points }
}

/// Trapezoid rule over `(x, y)` samples sorted by x.
pub fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum()
}

/// Area under the accuracy curve over `[start, end]`; the curve needs a
/// point at every integer K in the interval.
pub fn auc(curve: &AccCurve, start: u32, end: u32) -> Result<f64, EvalError> {
    if start >= end {
        return Err(EvalError::DegenerateInterval(start, end));
    }
    let samples = (start..=end)
        .map(|k| {
            curve
                .get(k)
                .map(|acc| (k as f64, acc))
                .ok_or(EvalError::MissingK(k))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(trapezoid(&samples))
}

pub fn delta(auc_method: f64, auc_vanilla: f64) -> f64 {
    auc_method - auc_vanilla
}

/// Population standard deviation.
pub fn sigma(values: &[f64]) -> Result<f64, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFew(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub model: String,
    pub curve: AccCurve,
    pub auc: f64,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
}

impl EvalSummary {
    pub fn new(
        model: impl Into<String>,
        method: impl Into<String>,
        curve: AccCurve,
        interval: (u32, u32),
    ) -> Result<Self, EvalError> {
        let auc = auc(&curve, interval.0, interval.1)?;
        Ok(EvalSummary {
            method: method.into(),
            model: model.into(),
            curve,
            auc,
            delta: None,
            sigma: None,
        })
    }
}

pub const VANILLA: &str = "vanilla";

fn is_vanilla(method: &str) -> bool {
    method.eq_ignore_ascii_case(VANILLA)
}

/// Fills `delta` (versus the same model's vanilla row) and `sigma` (across
/// models, per method, when at least two models are present).
pub fn fill_comparisons(summaries: &mut [EvalSummary]) {
    let vanilla: BTreeMap<String, f64> = summaries
        .iter()
        .filter(|s| is_vanilla(&s.method))
        .map(|s| (s.model.clone(), s.auc))
        .collect();
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in summaries.iter() {
        by_method.entry(s.method.clone()).or_default().push(s.auc);
    }
    for s in summaries.iter_mut() {
        s.delta = if is_vanilla(&s.method) {
            None
        } else {
            vanilla.get(&s.model).map(|v| delta(s.auc, *v))
        };
        s.sigma = sigma(&by_method[&s.method]).ok();
    }
}

pub const MAX_K_COLUMNS: u32 = 10;

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["model".to_string(), "method".to_string()];
    h.extend((1..=MAX_K_COLUMNS).map(|k| format!("k{k}")));
    h.extend(["auc", "delta", "sigma"].map(String::from));
    h
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Writes one CSV row per summary under the fixed
/// `model,method,k1..k10,auc,delta,sigma` header.
pub fn write_csv<W: io::Write>(summaries: &[EvalSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for s in summaries {
        let mut row = vec![s.model.clone(), s.method.clone()];
        row.extend((1..=MAX_K_COLUMNS).map(|k| fmt_opt(s.curve.get(k))));
        row.push(format!("{:.4}", s.auc));
        row.push(fmt_opt(s.delta));
        row.push(fmt_opt(s.sigma));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// A row read back from a summary or accuracy CSV. `auc`, `delta` and
/// `sigma` columns are ignored; the caller recomputes them.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub model: String,
    pub method: String,
    pub curve: AccCurve,
}

pub fn read_curve_csv<R: io::Read>(input: R) -> Result<Vec<CurveRow>, EvalError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| EvalError::Input(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let model_col = col("model").ok_or_else(|| EvalError::Input("missing `model` column".into()))?;
    let method_col =
        col("method").ok_or_else(|| EvalError::Input("missing `method` column".into()))?;
    let k_cols: Vec<(u32, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| Some((h.trim().strip_prefix('k')?.parse().ok()?, i)))
        .collect();

    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| EvalError::Input(e.to_string()))?;
        let mut points = Vec::new();
        for &(k, i) in &k_cols {
            let cell = rec.get(i).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let acc = cell.parse::<f64>().map_err(|_| {
                EvalError::Input(format!("row {}: bad k{k} value `{cell}`", line + 2))
            })?;
            points.push(AccPoint { k, acc, n: None });
        }
        points.sort_by_key(|p| p.k);
        rows.push(CurveRow {
            model: rec.get(model_col).unwrap_or("").to_string(),
            method: rec.get(method_col).unwrap_or("").to_string(),
            curve: AccCurve::new(points)?,
        });
    }
    Ok(rows)
}

/// Plain-text AUC table: one row per method, one column per model, σ on the
/// right and a Δ row for every non-vanilla method.
pub fn render_table(summaries: &[EvalSummary]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for s in summaries {
        if !models.contains(&s.model.as_str()) {
            models.push(&s.model);
        }
        if !methods.contains(&s.method.as_str()) {
            methods.push(&s.method);
        }
    }
    let find = |model: &str, method: &str| {
        summaries
            .iter()
            .find(|s| s.model == model && s.method == method)
    };
    let label_w = methods
        .iter()
        .map(|m| m.len() + 2)
        .chain([6])
        .max()
        .unwrap_or(8)
        + 1;
    let col_w = models.iter().map(|m| m.len()).chain([8]).max().unwrap_or(8) + 2;

    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "method");
    for m in &models {
        let _ = write!(out, "{m:>col_w$}");
    }
    let _ = writeln!(out, "{:>7}", "sigma");
    let rule = "-".repeat(label_w + col_w * models.len() + 7);
    let _ = writeln!(out, "{rule}");

    for method in &methods {
        let _ = write!(out, "{method:<label_w$}");
        let mut sig = None;
        for model in &models {
            match find(model, method) {
                Some(s) => {
                    sig = sig.or(s.sigma);
                    let _ = write!(out, "{:>col_w$.2}", s.auc);
                }
                None => {
                    let _ = write!(out, "{:>col_w$}", "-");
                }
            }
        }
        match sig {
            Some(v) => {
                let _ = writeln!(out, "{:>7.0}", v);
            }
            None => {
                let _ = writeln!(out, "{:>7}", "-");
            }
        }
    }

    let deltas: Vec<&str> = methods
        .iter()
        .copied()
        .filter(|m| !is_vanilla(m))
        .filter(|m| models.iter().any(|model| find(model, m).and_then(|s| s.delta).is_some()))
        .collect();
    if !deltas.is_empty() {
        let _ = writeln!(out, "{rule}");
    }
    for method in deltas {
        let _ = write!(out, "{:<label_w$}", format!("Δ {method}"));
        for model in &models {
            match find(model, method).and_then(|s| s.delta) {
                Some(d) => {
                    let _ = write!(out, "{:>col_w$}", format!("{d:+.2}"));
                }
                None => {
                    let _ = write!(out, "{:>col_w$}", "-");
                }
            }
        }
        let _ = writeln!(out, "{:>7}", "-");
    }
    out
}

/// Distinct methods present, in first-seen order.
pub fn methods(summaries: &[EvalSummary]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    summaries
        .iter()
        .filter(|s| seen.insert(s.method.clone()))
        .map(|s| s.method.clone())
        .collect()
}
