//! Exact solver over bundle metadata.
//!
//! The hypothesis class is every axis-aligned threshold rule
//! `[s * (xi[d] - tau) > 0]` with `tau` in `[0, 1]`. For each `(d, s)` the
//! thresholds consistent with a set of demonstrations form one interval, so
//! the whole version space is `2 D` intervals. From those we can tell
//! whether a bundle is solvable and whether its demonstrations pin down the
//! query label.
//!
//! Endpoint bookkeeping for `s = +1`: a `Yes` demo at `c` needs `tau < c`
//! (open upper end), a `No` demo needs `tau >= c` (closed lower end). For
//! `s = -1` it is the mirror image: `Yes` needs `tau > c` (open lower end)
//! and `No` needs `tau <= c` (closed upper end).

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, RecordError, Split};
use crate::error::Result;
use crate::model::{DecisionBoundary, Label, Pose, PromptBundle, Sign};
use crate::prompt;
use crate::sampler::DistractorMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub const UNIT: Interval = Interval {
        lo: 0.0,
        lo_closed: true,
        hi: 1.0,
        hi_closed: true,
    };

    /// Nonempty in the measure sense: a degenerate `[c, c]` counts as empty.
    pub fn is_nonempty(&self) -> bool {
        self.lo < self.hi
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    fn raise_lo(&mut self, value: f64, closed: bool) {
        if value > self.lo {
            self.lo = value;
            self.lo_closed = closed;
        } else if value == self.lo {
            self.lo_closed &= closed;
        }
    }

    fn lower_hi(&mut self, value: f64, closed: bool) {
        if value < self.hi {
            self.hi = value;
            self.hi_closed = closed;
        } else if value == self.hi {
            self.hi_closed &= closed;
        }
    }
}

/// Feasible thresholds for one `(dim, sign)` hypothesis family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFamily {
    /// 1-based pose dimension.
    pub dim: usize,
    pub sign: Sign,
    pub interval: Interval,
}

impl HypothesisFamily {
    fn new(dim: usize, sign: Sign) -> Self {
        Self {
            dim,
            sign,
            interval: Interval::UNIT,
        }
    }

    fn constrain(&mut self, coord: f64, label: Label) {
        let iv = &mut self.interval;
        match (self.sign, label) {
            (Sign::Positive, Label::Yes) => iv.lower_hi(coord, false),
            (Sign::Positive, Label::No) => iv.raise_lo(coord, true),
            (Sign::Negative, Label::Yes) => iv.raise_lo(coord, false),
            (Sign::Negative, Label::No) => iv.lower_hi(coord, true),
        }
    }

    /// Which labels the family can give a query at coordinate `q`, and the
    /// measure of thresholds giving each: `(yes, no, yes_measure, no_measure)`.
    pub fn query_labels(&self, q: f64) -> (bool, bool, f64, f64) {
        let iv = self.interval;
        if !iv.is_nonempty() {
            return (false, false, 0.0, 0.0);
        }
        let below_q = (q.min(iv.hi) - iv.lo).max(0.0);
        let above_q = iv.width() - below_q;
        match self.sign {
            // Yes iff tau < q.
            Sign::Positive => {
                let yes = iv.lo < q;
                let no = q < iv.hi || (q == iv.hi && iv.hi_closed);
                (yes, no, below_q, above_q)
            }
            // Yes iff tau > q.
            Sign::Negative => {
                let yes = q < iv.hi;
                let no = iv.lo < q || (q == iv.lo && iv.lo_closed);
                (yes, no, above_q, below_q)
            }
        }
    }
}

/// The version space of a set of demonstrations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistentSet {
    pub families: Vec<HypothesisFamily>,
}

impl ConsistentSet {
    pub fn family(&self, dim: usize, sign: Sign) -> Option<&HypothesisFamily> {
        self.families.iter().find(|f| f.dim == dim && f.sign == sign)
    }

    pub fn nonempty_count(&self) -> usize {
        self.families.iter().filter(|f| f.interval.is_nonempty()).count()
    }

    /// True if `boundary` classifies every demonstration correctly.
    pub fn contains(&self, boundary: &DecisionBoundary) -> bool {
        self.family(boundary.dim(), boundary.sign())
            .is_some_and(|f| f.interval.is_nonempty() && f.interval.contains(boundary.tau()))
    }
}

/// Intersects the constraints of every `(target pose, label)` demonstration
/// for each of the `2 * dims` hypothesis families.
pub fn consistent_set(demos: &[(Pose, Label)], dims: usize) -> ConsistentSet {
    let mut families: Vec<HypothesisFamily> = (1..=dims)
        .flat_map(|d| Sign::BOTH.map(|s| HypothesisFamily::new(d, s)))
        .collect();
    for fam in &mut families {
        for (pose, label) in demos {
            if let Some(&c) = pose.coords().get(fam.dim - 1) {
                fam.constrain(c, *label);
            }
        }
    }
    ConsistentSet { families }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleStatus {
    /// Every consistent hypothesis gives the same query label.
    Unanimous,
    /// Consistent hypotheses disagree on the query.
    Ambiguous,
    /// No hypothesis explains the demonstrations.
    Inconsistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePrediction {
    /// Unanimous label, or the label carried by the larger threshold measure
    /// when ambiguous (ties go to `Yes`). `None` when inconsistent.
    pub label: Option<Label>,
    pub status: OracleStatus,
    pub yes_measure: f64,
    pub no_measure: f64,
}

fn demos_of(bundle: &PromptBundle) -> Vec<(Pose, Label)> {
    bundle
        .demos
        .iter()
        .filter_map(|d| d.target().map(|t| (t.xi.clone(), d.label)))
        .collect()
}

fn pose_dims(bundle: &PromptBundle) -> usize {
    bundle
        .examples()
        .flat_map(|e| e.objects.iter().map(|o| o.xi.dims()))
        .max()
        .unwrap_or(0)
}

pub fn bundle_consistent_set(bundle: &PromptBundle) -> ConsistentSet {
    consistent_set(&demos_of(bundle), pose_dims(bundle))
}

/// Predicts the query label of a bundle from its metadata alone.
pub fn oracle_predict(bundle: &PromptBundle) -> OraclePrediction {
    let set = bundle_consistent_set(bundle);
    match bundle.query.target() {
        Some(t) => predict_from(&set, &t.xi),
        None => OraclePrediction {
            label: None,
            status: OracleStatus::Inconsistent,
            yes_measure: 0.0,
            no_measure: 0.0,
        },
    }
}

pub fn predict_from(set: &ConsistentSet, query: &Pose) -> OraclePrediction {
    let (mut any_yes, mut any_no, mut yes_m, mut no_m) = (false, false, 0.0, 0.0);
    for fam in &set.families {
        let Some(&q) = query.coords().get(fam.dim - 1) else {
            continue;
        };
        let (y, n, ym, nm) = fam.query_labels(q);
        any_yes |= y;
        any_no |= n;
        yes_m += ym;
        no_m += nm;
    }
    let (label, status) = match (any_yes, any_no) {
        (false, false) => (None, OracleStatus::Inconsistent),
        (true, false) => (Some(Label::Yes), OracleStatus::Unanimous),
        (false, true) => (Some(Label::No), OracleStatus::Unanimous),
        (true, true) => (Some(Label::from_bool(yes_m >= no_m)), OracleStatus::Ambiguous),
    };
    OraclePrediction {
        label,
        status,
        yes_measure: yes_m,
        no_measure: no_m,
    }
}

/// Reference solver that tests thresholds on a fixed grid instead of
/// reasoning about interval endpoints. Slow, but independent of the exact
/// solver, so the two can be checked against each other.
pub mod grid {
    use super::*;

    pub const DEFAULT_STEP: f64 = 1e-3;

    #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
    pub struct GridComparison {
        /// Hypothesis families or query labels where the two solvers differ
        /// only because the exact feasible set is narrower than the grid step.
        pub below_resolution: usize,
        /// Genuine disagreements.
        pub mismatches: Vec<String>,
    }

    impl GridComparison {
        pub fn agrees(&self) -> bool {
            self.mismatches.is_empty()
        }
    }

    fn grid_points(step: f64) -> impl Iterator<Item = f64> {
        let n = (1.0 / step).round() as u64;
        (0..=n).map(move |k| k as f64 / n as f64)
    }

    fn rule(c: f64, tau: f64, sign: Sign) -> Label {
        Label::from_bool(sign.value() * (c - tau) > 0.0)
    }

    /// Compares [`bundle_consistent_set`] and [`oracle_predict`] against a
    /// brute-force scan of `tau` over `{0, step, 2 step, ..., 1}`.
    pub fn compare(bundle: &PromptBundle, step: f64) -> GridComparison {
        let mut out = GridComparison::default();
        let demos = demos_of(bundle);
        let set = bundle_consistent_set(bundle);
        let query = bundle.query.target().map(|t| t.xi.clone());
        let (mut grid_yes, mut grid_no) = (false, false);

        for fam in &set.families {
            let d = fam.dim - 1;
            let feasible: Vec<f64> = grid_points(step)
                .filter(|&t| demos.iter().all(|(p, l)| rule(p.coords()[d], t, fam.sign) == *l))
                .collect();
            for &t in &feasible {
                if !fam.interval.contains(t) {
                    out.mismatches.push(format!(
                        "dim {} sign {:?}: grid tau {t} not in exact set",
                        fam.dim, fam.sign
                    ));
                }
            }
            if fam.interval.is_nonempty() && feasible.is_empty() {
                if fam.interval.width() < 2.0 * step {
                    out.below_resolution += 1;
                } else {
                    out.mismatches.push(format!(
                        "dim {} sign {:?}: exact interval of width {} has no grid point",
                        fam.dim,
                        fam.sign,
                        fam.interval.width()
                    ));
                }
            }
            if let Some(q) = &query {
                let qc = q.coords()[d];
                let (ey, en, ym, nm) = fam.query_labels(qc);
                let gy = feasible.iter().any(|&t| rule(qc, t, fam.sign) == Label::Yes);
                let gn = feasible.iter().any(|&t| rule(qc, t, fam.sign) == Label::No);
                grid_yes |= gy;
                grid_no |= gn;
                for (exact, grid, measure, name) in [(ey, gy, ym, "Yes"), (en, gn, nm, "No")] {
                    if grid && !exact {
                        out.mismatches
                            .push(format!("dim {} sign {:?}: grid allows query {name}", fam.dim, fam.sign));
                    } else if exact && !grid {
                        if measure < 2.0 * step {
                            out.below_resolution += 1;
                        } else {
                            out.mismatches.push(format!(
                                "dim {} sign {:?}: grid misses query {name} with measure {measure}",
                                fam.dim, fam.sign
                            ));
                        }
                    }
                }
            }
        }

        let pred = oracle_predict(bundle);
        let grid_status = match (grid_yes, grid_no) {
            (true, true) => OracleStatus::Ambiguous,
            (false, false) => OracleStatus::Inconsistent,
            _ => OracleStatus::Unanimous,
        };
        if grid_status != pred.status && out.mismatches.is_empty() && out.below_resolution == 0 {
            out.mismatches
                .push(format!("status {:?} vs grid {grid_status:?}", pred.status));
        }
        if grid_status == OracleStatus::Unanimous && pred.status == OracleStatus::Unanimous {
            let grid_label = Label::from_bool(grid_yes);
            if pred.label != Some(grid_label) {
                out.mismatches
                    .push(format!("unanimous label {:?} vs grid {grid_label:?}", pred.label));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Dataset audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedRecord {
    pub split: Split,
    /// Bundle id, or `line <n>` when the record did not parse.
    pub record: String,
    pub issues: Vec<String>,
}

/// Mergeable per-record tallies.
#[derive(Clone, Debug, Default)]
struct Tally {
    n: u64,
    solvable: u64,
    ambiguous: u64,
    unanimous: u64,
    unanimous_correct: u64,
    balance_failures: u64,
    schema_errors: u64,
    margin_min: Option<f64>,
    flagged: Vec<FlaggedRecord>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.n += other.n;
        self.solvable += other.solvable;
        self.ambiguous += other.ambiguous;
        self.unanimous += other.unanimous;
        self.unanimous_correct += other.unanimous_correct;
        self.balance_failures += other.balance_failures;
        self.schema_errors += other.schema_errors;
        self.margin_min = match (self.margin_min, other.margin_min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.flagged.extend(other.flagged);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format_version: u32,
    pub dataset: PathBuf,
    pub family: String,
    /// Records audited, including ones that failed to parse.
    pub n: u64,
    /// Fraction of records whose true boundary explains their demonstrations.
    pub solvable_rate: f64,
    /// Fraction of records where consistent hypotheses disagree on the query.
    pub ambiguity_rate: f64,
    /// Accuracy of unanimous oracle predictions against the stored label.
    pub unanimous_accuracy: Option<f64>,
    /// Smallest threshold distance over all label-constrained objects.
    pub margin_min: Option<f64>,
    pub balance_ok: bool,
    pub schema_errors: u64,
    pub flagged: Vec<FlaggedRecord>,
    pub passed: bool,
}

/// Audits a single bundle; `check_images` resolves image paths against `dir`.
fn audit_bundle(
    bundle: &PromptBundle,
    split: Split,
    mode: DistractorMode,
    images_dir: Option<&std::path::Path>,
) -> Tally {
    let mut t = Tally {
        n: 1,
        ..Default::default()
    };
    let mut issues = bundle.structural_issues();

    let half = bundle.n_examples() / 2;
    let ones = bundle.demos.iter().filter(|d| d.label == Label::Yes).count();
    if ones != half || bundle.demos.len() - ones != half {
        t.balance_failures += 1;
    }

    let set = bundle_consistent_set(bundle);
    if set.contains(&bundle.boundary)
        && bundle.query.target().and_then(|q| bundle.boundary.classify(&q.xi).ok()) == Some(bundle.query.label)
    {
        t.solvable += 1;
    } else {
        issues.push("ground-truth boundary does not explain the labels".into());
    }

    let pred = bundle.query.target().map(|q| predict_from(&set, &q.xi));
    match pred.map(|p| p.status) {
        Some(OracleStatus::Ambiguous) => t.ambiguous += 1,
        Some(OracleStatus::Unanimous) => {
            t.unanimous += 1;
            if pred.and_then(|p| p.label) == Some(bundle.query.label) {
                t.unanimous_correct += 1;
            } else {
                issues.push("unanimous oracle prediction disagrees with the query label".into());
            }
        }
        _ => {}
    }

    for ex in bundle.examples() {
        for o in &ex.objects {
            if o.is_target || mode == DistractorMode::AlgorithmFaithful {
                if let Ok(m) = bundle.boundary.margin(&o.xi) {
                    t.margin_min = Some(t.margin_min.map_or(m, |x: f64| x.min(m)));
                    if m <= bundle.boundary.epsilon() {
                        issues.push(format!("object {:?} within the margin ({m:.4})", o.category));
                    }
                    if bundle.boundary.classify(&o.xi).ok() != Some(ex.label) {
                        issues.push(format!("object {:?} on the wrong side of the boundary", o.category));
                    }
                }
            }
        }
        if let Some(dir) = images_dir {
            if !dir.join(&ex.image).is_file() {
                issues.push(format!("missing image {}", ex.image));
            }
        }
    }

    match prompt::parse_prompt_text(&bundle.prompt_text) {
        Ok((q, labels)) => {
            let stored: Vec<Label> = bundle.demos.iter().map(|d| d.label).collect();
            if q != bundle.question || labels != stored {
                issues.push("prompt text disagrees with the stored question or labels".into());
            }
        }
        Err(e) => issues.push(e.to_string()),
    }

    if !issues.is_empty() {
        issues.dedup();
        t.flagged.push(FlaggedRecord {
            split,
            record: bundle.bundle_id.clone(),
            issues,
        });
    }
    t
}

/// Audits every split of a family directory. Malformed records are reported
/// and the audit carries on.
pub fn audit_dataset(manifest: &DatasetManifest) -> Result<AuditReport> {
    let mode = manifest.header.config.sampler.distractor_mode;
    let images_dir = manifest.header.images_rendered.then_some(manifest.dir.as_path());
    let mut total = Tally::default();
    for split in Split::ALL {
        let records = manifest.read_split_lenient(split)?;
        let tally = records
            .par_iter()
            .map(|r| match r {
                Ok(b) => {
                    let mut t = audit_bundle(b, split, mode, images_dir);
                    if &b.family != manifest.family() {
                        t.flagged.push(FlaggedRecord {
                            split,
                            record: b.bundle_id.clone(),
                            issues: vec![format!("record belongs to family {}", b.family)],
                        });
                    }
                    t
                }
                Err(RecordError { line, message, .. }) => Tally {
                    n: 1,
                    schema_errors: 1,
                    flagged: vec![FlaggedRecord {
                        split,
                        record: format!("line {line}"),
                        issues: vec![message.clone()],
                    }],
                    ..Default::default()
                },
            })
            .reduce(Tally::default, Tally::merge);
        total = total.merge(tally);
    }

    let rate = |k: u64| if total.n == 0 { 0.0 } else { k as f64 / total.n as f64 };
    let solvable_rate = rate(total.solvable);
    let balance_ok = total.balance_failures == 0;
    let passed = total.n > 0 && total.solvable == total.n && balance_ok && total.flagged.is_empty();
    Ok(AuditReport {
        format_version: crate::dataset::FORMAT_VERSION,
        dataset: manifest.dir.clone(),
        family: manifest.family().id(),
        n: total.n,
        solvable_rate,
        ambiguity_rate: rate(total.ambiguous),
        unanimous_accuracy: (total.unanimous > 0).then(|| total.unanimous_correct as f64 / total.unanimous as f64),
        margin_min: total.margin_min,
        balance_ok,
        schema_errors: total.schema_errors,
        flagged: total.flagged,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Pose {
        Pose::new(vec![x, y]).unwrap()
    }

    #[test]
    fn two_demo_example() {
        let demos = [(p(0.6, 0.5), Label::Yes), (p(0.2, 0.5), Label::No)];
        let set = consistent_set(&demos, 2);
        let pos = set.family(1, Sign::Positive).unwrap().interval;
        assert_eq!((pos.lo, pos.lo_closed, pos.hi, pos.hi_closed), (0.2, true, 0.6, false));
        assert!(pos.contains(0.2) && !pos.contains(0.6));
        assert!(!set.family(1, Sign::Negative).unwrap().interval.is_nonempty());
        // Both demos share y = 0.5, so dimension 2 cannot separate them.
        assert!(!set.family(2, Sign::Positive).unwrap().interval.is_nonempty());
        assert!(!set.family(2, Sign::Negative).unwrap().interval.is_nonempty());
        assert_eq!(set.nonempty_count(), 1);
    }

    #[test]
    fn negative_sign_endpoints() {
        let demos = [(p(0.3, 0.0), Label::Yes), (p(0.7, 0.0), Label::No)];
        let iv = consistent_set(&demos, 1).family(1, Sign::Negative).unwrap().interval;
        assert_eq!((iv.lo, iv.lo_closed, iv.hi, iv.hi_closed), (0.3, false, 0.7, true));
        let b = DecisionBoundary::new(1, 0.7, Sign::Negative, 0.05).unwrap();
        assert_eq!(b.classify(&p(0.7, 0.0)).unwrap(), Label::No);
        assert!(iv.contains(0.7) && !iv.contains(0.3));
    }

    #[test]
    fn boundary_adjacent_thresholds() {
        // A Yes demo exactly at tau is impossible under strict classify, so
        // tau = c must be excluded while tau just below c is allowed.
        let c = 0.4;
        let demos = [(p(c, 0.0), Label::Yes)];
        let iv = consistent_set(&demos, 1).family(1, Sign::Positive).unwrap().interval;
        assert!(!iv.contains(c));
        assert!(iv.contains(c - 1e-12));
        let demos = [(p(c, 0.0), Label::No)];
        let iv = consistent_set(&demos, 1).family(1, Sign::Positive).unwrap().interval;
        assert!(iv.contains(c));
        assert!(!iv.contains(c - 1e-12));
    }

    #[test]
    fn equal_endpoint_merge_keeps_the_stricter_bound() {
        let mut iv = Interval::UNIT;
        iv.lower_hi(0.5, true);
        iv.lower_hi(0.5, false);
        assert!(!iv.hi_closed);
        iv.raise_lo(0.2, false);
        iv.raise_lo(0.2, true);
        assert!(!iv.lo_closed);
    }

    #[test]
    fn query_label_votes() {
        let fam = HypothesisFamily {
            dim: 1,
            sign: Sign::Positive,
            interval: Interval {
                lo: 0.25,
                lo_closed: true,
                hi: 0.75,
                hi_closed: false,
            },
        };
        assert_eq!(fam.query_labels(0.875), (true, false, 0.5, 0.0));
        assert_eq!(fam.query_labels(0.125), (false, true, 0.0, 0.5));
        assert_eq!(fam.query_labels(0.5), (true, true, 0.25, 0.25));
        // q on the open upper end: every feasible tau is below q.
        assert_eq!(fam.query_labels(0.75), (true, false, 0.5, 0.0));
        // q on the closed lower end: tau = q gives No, larger tau too.
        assert_eq!(fam.query_labels(0.25), (false, true, 0.0, 0.5));
    }

    #[test]
    fn unanimous_when_only_true_family_survives() {
        // True rule: x > 0.5. Demos vary in y so dimension 2 is inconsistent.
        let demos = [
            (p(0.8, 0.1), Label::Yes),
            (p(0.7, 0.9), Label::Yes),
            (p(0.2, 0.2), Label::No),
            (p(0.3, 0.8), Label::No),
        ];
        let set = consistent_set(&demos, 2);
        assert_eq!(set.nonempty_count(), 1);
        let pred = predict_from(&set, &p(0.9, 0.5));
        assert_eq!(pred.status, OracleStatus::Unanimous);
        assert_eq!(pred.label, Some(Label::Yes));
    }

    #[test]
    fn ambiguous_when_families_disagree() {
        // Both "x > 0.5" and "y > 0.5" explain these demos.
        let demos = [
            (p(0.8, 0.8), Label::Yes),
            (p(0.7, 0.9), Label::Yes),
            (p(0.2, 0.2), Label::No),
            (p(0.3, 0.1), Label::No),
        ];
        let set = consistent_set(&demos, 2);
        assert_eq!(set.nonempty_count(), 2);
        let pred = predict_from(&set, &p(0.9, 0.1));
        assert_eq!(pred.status, OracleStatus::Ambiguous);
    }

    #[test]
    fn contradictory_demos_are_inconsistent() {
        let demos = [(p(0.5, 0.5), Label::Yes), (p(0.5, 0.5), Label::No)];
        let set = consistent_set(&demos, 2);
        assert_eq!(set.nonempty_count(), 0);
        assert_eq!(predict_from(&set, &p(0.1, 0.1)).status, OracleStatus::Inconsistent);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn demo() -> impl Strategy<Value = (Pose, Label)> {
            (0.0f64..=1.0, 0.0f64..=1.0, any::<bool>()).prop_map(|(x, y, l)| (p(x, y), Label::from_bool(l)))
        }

        proptest! {
            #[test]
            fn adding_a_demo_never_enlarges_an_interval(demos in proptest::collection::vec(demo(), 0..6), extra in demo()) {
                let before = consistent_set(&demos, 2);
                let mut more = demos.clone();
                more.push(extra);
                let after = consistent_set(&more, 2);
                for (a, b) in after.families.iter().zip(&before.families) {
                    prop_assert!(a.interval.lo >= b.interval.lo);
                    prop_assert!(a.interval.hi <= b.interval.hi);
                    prop_assert!(a.interval.width() <= b.interval.width());
                }
            }

            #[test]
            fn interval_members_classify_every_demo(demos in proptest::collection::vec(demo(), 1..6), t in 0.0f64..=1.0) {
                let set = consistent_set(&demos, 2);
                for fam in &set.families {
                    let consistent = demos.iter().all(|(pose, l)| {
                        let c = pose.coords()[fam.dim - 1];
                        Label::from_bool(fam.sign.value() * (c - t) > 0.0) == *l
                    });
                    prop_assert_eq!(fam.interval.contains(t), consistent);
                }
            }
        }
    }
}
