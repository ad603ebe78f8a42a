//! CSV output: result rows, per-grid-point summaries and HIRO diagnostics.
//!
//! Numbers are printed with six significant digits so that files are stable
//! and diff-friendly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optimize::HiroRun;

/// `%g`-style formatting with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: u32,
    pub trial: usize,
    pub graph_model: String,
    pub k: usize,
    pub l: usize,
    pub rounds: usize,
    pub algorithm: String,
    pub min_value: f64,
    pub stderr: f64,
    pub wall_time_ms: Option<u64>,
}

const HEADER: &str = "experiment,trial,graph_model,k,l,T,algorithm,min_value,stderr";

/// Writes rows in the given order. The `wall_time_ms` column is present only
/// when `timing` is set, because wall-clock times are not reproducible.
pub fn results_csv(rows: &[ResultRow], timing: bool) -> String {
    let mut out = String::from(HEADER);
    out.push_str(if timing { ",wall_time_ms\n" } else { "\n" });
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.trial,
            r.graph_model,
            r.k,
            r.l,
            r.rounds,
            r.algorithm,
            fmt_g(r.min_value),
            fmt_g(r.stderr)
        )
        .unwrap();
        if timing {
            write!(out, ",{}", r.wall_time_ms.unwrap_or(0)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Mean and sample standard deviation of `min_value` over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: u32,
    pub graph_model: String,
    pub k: usize,
    pub l: usize,
    pub rounds: usize,
    pub algorithm: String,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u32, &str, usize, usize, usize, &str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.experiment, &r.graph_model, r.k, r.l, r.rounds, &r.algorithm))
            .or_default()
            .push(r.min_value);
    }
    groups
        .into_iter()
        .map(|((experiment, model, k, l, rounds, algorithm), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                experiment,
                graph_model: model.to_string(),
                k,
                l,
                rounds,
                algorithm: algorithm.to_string(),
                trials: v.len(),
                mean,
                std,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("experiment,graph_model,k,l,T,algorithm,trials,mean_min_value,std_min_value\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.graph_model,
            r.k,
            r.l,
            r.rounds,
            r.algorithm,
            r.trials,
            fmt_g(r.mean),
            fmt_g(r.std)
        )
        .unwrap();
    }
    out
}

/// One line per HIRO round; vectors and sets are space-separated inside a
/// field.
pub fn diagnostics_csv(run: &HiroRun) -> String {
    let join = |v: &[f64]| v.iter().map(|&x| fmt_g(x)).collect::<Vec<_>>().join(" ");
    let mut out = String::from("round,weights,seed_set,payoffs,running_min\n");
    for (t, set) in run.strategy.seed_sets().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            t + 1,
            join(run.weights[t].as_slice()),
            set,
            join(&run.payoffs[t]),
            fmt_g(run.running_min[t])
        )
        .unwrap();
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (1.75, "1.75"),
            (100.0, "100"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333"),
            (2.0 / 3.0, "0.666667"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (-42.4242424, "-42.4242"),
            (99.99996, "100"),
            (999999.6, "1e+06"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn summary_groups_trials() {
        let row = |trial, v| ResultRow {
            experiment: 3,
            trial,
            graph_model: "erdos_renyi".into(),
            k: 10,
            l: 20,
            rounds: 10,
            algorithm: "hiro".into(),
            min_value: v,
            stderr: 0.0,
            wall_time_ms: Some(5),
        };
        let rows = vec![row(0, 1.0), row(1, 3.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].trials, s[0].mean), (2, 2.0));
        assert!((s[0].std - 2f64.sqrt()).abs() < 1e-12);
        let csv = results_csv(&rows, false);
        assert!(csv.starts_with("experiment,trial,graph_model,k,l,T,algorithm,min_value,stderr\n"));
        assert!(!csv.contains("wall_time"));
        assert!(results_csv(&rows, true).lines().nth(1).unwrap().ends_with(",5"));
    }
}
