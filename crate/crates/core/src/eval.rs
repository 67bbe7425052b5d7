//! Scoring of external prediction files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, Split, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::model::{Label, PromptBundle};

/// Parsed model answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Noncompliant,
}

impl Answer {
    pub fn label(self) -> Option<Label> {
        match self {
            Answer::Yes => Some(Label::Yes),
            Answer::No => Some(Label::No),
            Answer::Noncompliant => None,
        }
    }
}

/// Parses raw model output. Leading whitespace and an optional `Answer:` tag
/// are skipped; the first token containing a letter, with surrounding
/// punctuation removed, must be `yes` or `no` in any case.
pub fn parse_answer(raw: &str) -> Answer {
    let mut s = raw.trim_start();
    if s.len() >= 7 && s[..7].eq_ignore_ascii_case("answer:") {
        s = &s[7..];
    }
    let Some(token) = s.split_whitespace().find(|t| t.chars().any(char::is_alphabetic)) else {
        return Answer::Noncompliant;
    };
    let word = token.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    match word.as_str() {
        "yes" => Answer::Yes,
        "no" => Answer::No,
        _ => Answer::Noncompliant,
    }
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation: a central rational fit for
/// `0.02425 <= p <= 0.97575` and a tail fit in `sqrt(-2 ln p)` elsewhere.
/// Relative error is below 1.15e-9 over the open unit interval.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    Ok(x)
}

fn check_n_alpha(n: u64, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("z threshold needs n >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Smallest accuracy on `n` balanced binary trials that rejects chance at
/// level `alpha` with a one-sided one-sample z-test: `0.5 + z_{1-a} * sqrt(0.25 / n)`.
pub fn z_threshold(n: u64, alpha: f64) -> Result<f64> {
    check_n_alpha(n, alpha)?;
    Ok(0.5 + normal_quantile(1.0 - alpha)? * (0.25 / n as f64).sqrt())
}

/// Two-sided variant, `z_{1-a/2}` in place of `z_{1-a}`.
pub fn z_threshold_two_sided(n: u64, alpha: f64) -> Result<f64> {
    check_n_alpha(n, alpha)?;
    Ok(0.5 + normal_quantile(1.0 - alpha / 2.0)? * (0.25 / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub bundle_id: String,
    #[serde(alias = "raw_output")]
    pub output: String,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("prediction records serialize");
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: String,
    pub split: Split,
    pub n: u64,
    pub n_correct: u64,
    pub n_compliant: u64,
    /// Bundles with no prediction; scored incorrect and noncompliant.
    pub n_missing: u64,
    pub accuracy: f64,
    pub compliance_rate: f64,
    pub alpha: f64,
    pub z_threshold: f64,
    pub z_threshold_two_sided: f64,
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_ids: Vec<String>,
}

const MAX_LISTED_IDS: usize = 20;

fn list_ids(ids: &[&str]) -> String {
    let mut s = ids.iter().take(MAX_LISTED_IDS).copied().collect::<Vec<_>>().join(", ");
    if ids.len() > MAX_LISTED_IDS {
        let _ = write!(s, " and {} more", ids.len() - MAX_LISTED_IDS);
    }
    s
}

/// Maps each bundle id to its prediction, rejecting duplicates and ids that
/// are not in `bundles`.
fn index_predictions<'a>(bundles: &[PromptBundle], preds: &'a [PredictionRecord]) -> Result<HashMap<&'a str, &'a str>> {
    let known: BTreeSet<&str> = bundles.iter().map(|b| b.bundle_id.as_str()).collect();
    let mut map = HashMap::with_capacity(preds.len());
    let mut dups = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for p in preds {
        if !known.contains(p.bundle_id.as_str()) {
            unknown.insert(p.bundle_id.as_str());
        } else if map.insert(p.bundle_id.as_str(), p.output.as_str()).is_some() {
            dups.insert(p.bundle_id.as_str());
        }
    }
    if !unknown.is_empty() {
        let ids: Vec<&str> = unknown.into_iter().collect();
        return Err(Error::Coverage(format!(
            "{} unknown bundle id(s): {}",
            ids.len(),
            list_ids(&ids)
        )));
    }
    if !dups.is_empty() {
        let ids: Vec<&str> = dups.into_iter().collect();
        return Err(Error::Coverage(format!(
            "{} duplicate bundle id(s): {}",
            ids.len(),
            list_ids(&ids)
        )));
    }
    Ok(map)
}

/// Scores `preds` against the query labels of `bundles`.
pub fn score_bundles(
    family: &str,
    split: Split,
    bundles: &[PromptBundle],
    preds: &[PredictionRecord],
    alpha: f64,
) -> Result<FamilyScore> {
    let n = bundles.len() as u64;
    let z = z_threshold(n, alpha)?;
    let z2 = z_threshold_two_sided(n, alpha)?;
    let map = index_predictions(bundles, preds)?;
    let (mut n_correct, mut n_compliant) = (0u64, 0u64);
    let mut missing_ids = Vec::new();
    for b in bundles {
        let Some(raw) = map.get(b.bundle_id.as_str()) else {
            missing_ids.push(b.bundle_id.clone());
            continue;
        };
        let answer = parse_answer(raw);
        if let Some(label) = answer.label() {
            n_compliant += 1;
            if label == b.query.label {
                n_correct += 1;
            }
        }
    }
    let accuracy = n_correct as f64 / n as f64;
    Ok(FamilyScore {
        family: family.to_string(),
        split,
        n,
        n_correct,
        n_compliant,
        n_missing: missing_ids.len() as u64,
        accuracy,
        compliance_rate: n_compliant as f64 / n as f64,
        alpha,
        z_threshold: z,
        z_threshold_two_sided: z2,
        significant: accuracy > z,
        missing_ids,
    })
}

/// Scores the `split` bundles of a generated family.
pub fn score_family(
    manifest: &DatasetManifest,
    split: Split,
    preds: &[PredictionRecord],
    alpha: f64,
) -> Result<FamilyScore> {
    let bundles = manifest.read_split(split)?;
    score_bundles(&manifest.family().id(), split, &bundles, preds, alpha)
}

/// Fraction of `bundles` whose prediction parses to Yes or No.
pub fn compliance_rate(bundles: &[PromptBundle], preds: &[PredictionRecord]) -> Result<f64> {
    if bundles.is_empty() {
        return Err(Error::InvalidArgument("no bundles to score".into()));
    }
    let map = index_predictions(bundles, preds)?;
    let ok = map
        .values()
        .filter(|raw| parse_answer(raw) != Answer::Noncompliant)
        .count();
    Ok(ok as f64 / bundles.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub alpha: f64,
    pub families: Vec<FamilyScore>,
}

impl EvalReport {
    pub fn new(alpha: f64, mut families: Vec<FamilyScore>) -> Self {
        families.sort_by(|a, b| a.family.cmp(&b.family));
        Self {
            format_version: FORMAT_VERSION,
            alpha,
            families,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: EvalReport = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: 1,
            source,
        })?;
        if report.format_version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported report format_version {}",
                path.display(),
                report.format_version
            )));
        }
        Ok(report)
    }

    pub fn render_table(&self) -> String {
        let width = self.families.iter().map(|f| f.family.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>8}  {:>10}  {:>9}  sig\n",
            "family", "n", "accuracy", "compliance", "threshold"
        );
        for f in &self.families {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>8.4}  {:>10.4}  {:>9.4}  {}",
                f.family,
                f.n,
                f.accuracy,
                f.compliance_rate,
                f.z_threshold,
                if f.significant { "*" } else { "" }
            );
        }
        let _ = writeln!(out, "alpha = {} (one-sided)", self.alpha);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub pearson_r: f64,
    pub r_squared: f64,
}

/// Pearson correlation over `(x, y)` accuracy pairs.
pub fn correlate_stage_accuracies(pairs: &[(f64, f64)]) -> Result<Correlation> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("correlation inputs must be finite".into()));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument(
            "correlation is undefined for a constant series".into(),
        ));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        n: pairs.len(),
        pearson_r: r,
        r_squared: r * r,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub accuracy: f64,
    pub n: u64,
    pub significant: bool,
    /// Accuracy minus the first run's accuracy on the same family.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: String,
    pub runs: Vec<RunCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    /// Unweighted mean of family accuracies.
    pub mean_accuracy: f64,
    /// Total correct over total bundles.
    pub pooled_accuracy: f64,
    pub n_significant: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub format_version: u32,
    pub runs: Vec<String>,
    pub families: Vec<ComparisonRow>,
    pub aggregate: Vec<RunSummary>,
}

/// Lines up several evaluation reports family by family. Deltas are taken
/// against the first run.
pub fn compare_runs(runs: &[(String, EvalReport)]) -> Result<Comparison> {
    let Some((_, first)) = runs.first() else {
        return Err(Error::InvalidArgument("nothing to compare".into()));
    };
    let index: Vec<BTreeMap<&str, &FamilyScore>> = runs
        .iter()
        .map(|(_, r)| r.families.iter().map(|f| (f.family.as_str(), f)).collect())
        .collect();
    let base: BTreeSet<&str> = index[0].keys().copied().collect();
    for ((label, _), idx) in runs.iter().zip(&index).skip(1) {
        let other: BTreeSet<&str> = idx.keys().copied().collect();
        if other != base {
            let diff: Vec<&str> = base.symmetric_difference(&other).copied().collect();
            return Err(Error::InvalidArgument(format!(
                "run {label:?} covers different families than {:?}; symmetric difference: {}",
                runs[0].0,
                diff.join(", ")
            )));
        }
    }
    if first.families.is_empty() {
        return Err(Error::InvalidArgument("reports contain no families".into()));
    }

    let families: Vec<ComparisonRow> = base
        .iter()
        .map(|fam| {
            let base_acc = index[0][fam].accuracy;
            ComparisonRow {
                family: fam.to_string(),
                runs: index
                    .iter()
                    .map(|idx| {
                        let s = idx[fam];
                        RunCell {
                            accuracy: s.accuracy,
                            n: s.n,
                            significant: s.significant,
                            delta: s.accuracy - base_acc,
                        }
                    })
                    .collect(),
            }
        })
        .collect();

    let k = families.len() as f64;
    let mut aggregate: Vec<RunSummary> = runs
        .iter()
        .enumerate()
        .map(|(i, (label, _))| {
            let cells = families.iter().map(|row| &row.runs[i]);
            let mean = cells.clone().map(|c| c.accuracy).sum::<f64>() / k;
            let total_n: u64 = cells.clone().map(|c| c.n).sum();
            let correct: f64 = cells.clone().map(|c| c.accuracy * c.n as f64).sum();
            RunSummary {
                run: label.clone(),
                mean_accuracy: mean,
                pooled_accuracy: if total_n == 0 { 0.0 } else { correct / total_n as f64 },
                n_significant: cells.filter(|c| c.significant).count(),
                delta: 0.0,
            }
        })
        .collect();
    let base_mean = aggregate[0].mean_accuracy;
    for a in &mut aggregate {
        a.delta = a.mean_accuracy - base_mean;
    }

    Ok(Comparison {
        format_version: FORMAT_VERSION,
        runs: runs.iter().map(|(l, _)| l.clone()).collect(),
        families,
        aggregate,
    })
}

impl Comparison {
    /// Plain-text table; a trailing `*` marks accuracies above the z threshold.
    pub fn render_table(&self) -> String {
        let width = self.families.iter().map(|f| f.family.len()).max().unwrap_or(6).max(6);
        let col = self.runs.iter().map(|r| r.len()).max().unwrap_or(0).max(16);
        let mut out = format!("{:<width$}", "family");
        for r in &self.runs {
            let _ = write!(out, "  {r:>col$}");
        }
        out.push('\n');
        let cell = |acc: f64, delta: f64, sig: bool, first: bool| {
            let s = if first {
                format!("{acc:.4}{}", if sig { "*" } else { " " })
            } else {
                format!("{acc:.4}{} ({delta:+.4})", if sig { "*" } else { " " })
            };
            format!("  {s:>col$}")
        };
        for row in &self.families {
            let _ = write!(out, "{:<width$}", row.family);
            for (i, c) in row.runs.iter().enumerate() {
                out.push_str(&cell(c.accuracy, c.delta, c.significant, i == 0));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", "mean");
        for (i, a) in self.aggregate.iter().enumerate() {
            out.push_str(&cell(a.mean_accuracy, a.delta, false, i == 0));
        }
        out.push('\n');
        let _ = write!(out, "{:<width$}", "significant");
        for a in &self.aggregate {
            let s = format!("{}/{}", a.n_significant, self.families.len());
            let _ = write!(out, "  {s:>col$}");
        }
        out.push('\n');
        out
    }
}
