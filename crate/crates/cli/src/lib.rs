//! The `svat` command line.
//!
//! Exit codes: 0 on success, 1 on runtime failures (I/O, failed audits,
//! prediction coverage errors), 2 on usage errors (bad flags, bad config,
//! unparseable family ids, missing assets, degenerate plans).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use svat_core::assets::AssetLibrary;
use svat_core::catalog::ObjectFallback;
use svat_core::curriculum::{self, Ablation, Strategy};
use svat_core::dataset::{self, DatasetManifest, GenerateOptions, Split, SplitSpec, FAMILIES_DIR, FAMILY_MANIFEST};
use svat_core::eval::{self, EvalReport, PredictionRecord};
use svat_core::oracle;
use svat_core::render::BackgroundFallback;
use svat_core::sampler::DistractorMode;
use svat_core::{Error, GenerationConfig, Result, TaskFamilyParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "svat",
    version,
    about = "Generate, audit and score spatial visual ambiguity benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one or more task families to disk
    Generate(GenerateArgs),
    /// Print the ids of the 50 standard task families
    Grid,
    /// Write a curriculum or ablation training plan
    Plan(PlanArgs),
    /// Regenerate a family from the config snapshot in its manifest
    Regenerate(RegenerateArgs),
    /// Audit generated datasets for solvability, ambiguity and schema errors
    Validate(ValidateArgs),
    /// Score a predictions file against generated datasets
    Evaluate(EvaluateArgs),
    /// Compare evaluation reports of several runs
    Compare(CompareArgs),
    /// Pearson correlation between paired run accuracies
    Correlate(CorrelateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DistractorArg {
    AlgorithmFaithful,
    Unconstrained,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackgroundFallbackArg {
    Error,
    ProceduralClutter,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectFallbackArg {
    Error,
    ProceduralGlyph,
}

#[derive(Debug, Args)]
pub struct AssetArgs {
    /// Root directory of asset packs (`<root>/<pack>/pack.json`)
    #[arg(long, env = "SVAT_ASSET_ROOT", value_name = "DIR")]
    pub asset_root: Option<PathBuf>,
}

impl AssetArgs {
    fn library(&self) -> AssetLibrary {
        match &self.asset_root {
            Some(root) => AssetLibrary::at(root),
            None => AssetLibrary::empty(),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Family id, e.g. bg-i5_obj-hard_m3_text-guide (repeatable)
    #[arg(
        long = "family",
        value_name = "ID",
        required_unless_present = "paper_grid",
        conflicts_with = "paper_grid"
    )]
    pub families: Vec<String>,
    /// Generate all 50 standard families
    #[arg(long)]
    pub paper_grid: bool,
    /// Bundle counts as train,val,test
    #[arg(long, default_value = "1000,200,1000")]
    pub splits: String,
    /// Master seed
    #[arg(long)]
    pub seed: u64,
    /// Data root; families go to <out>/families/<id>
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML generation config; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub background_fallback: Option<BackgroundFallbackArg>,
    #[arg(long, value_enum)]
    pub object_fallback: Option<ObjectFallbackArg>,
    #[arg(long, value_enum)]
    pub distractor_mode: Option<DistractorArg>,
    /// Minimum distance between objects of one image, in pose units
    #[arg(long)]
    pub min_object_separation: Option<f64>,
    /// Write bundle metadata only, no PNGs
    #[arg(long)]
    pub no_images: bool,
    #[command(flatten)]
    pub assets: AssetArgs,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// bg, obj, m, all, direct, mix, more-epochs or more-data
    #[arg(long)]
    pub strategy: String,
    /// Target family id
    #[arg(long)]
    pub target: String,
    /// Epochs per stage (default 3; more-data defaults to 1)
    #[arg(long)]
    pub epochs: Option<u32>,
    /// Unique bundle count for more-data
    #[arg(long, default_value_t = curriculum::DEFAULT_MORE_DATA_K)]
    pub k: u64,
    /// Curriculum whose stages a mix combines
    #[arg(long, default_value = "all")]
    pub mix_source: String,
    /// Seed for the mix shuffle or the more-data generation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Data root; the plan goes to <out>/plans/
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Also build the dataset a mix or more-data plan refers to
    #[arg(long)]
    pub build: bool,
    /// TOML generation config for --build of more-data
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub no_images: bool,
    #[command(flatten)]
    pub assets: AssetArgs,
}

#[derive(Debug, Args)]
pub struct RegenerateArgs {
    /// Family directory containing family.json
    pub dataset: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub assets: AssetArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Family directories or data roots containing families/
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
    /// Write the audit reports as JSON
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Family directory or data root containing families/ (repeatable)
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<PathBuf>,
    /// Predictions JSONL, one {bundle_id, output} per line
    #[arg(long)]
    pub predictions: PathBuf,
    /// Significance level of the one-sided z-test
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Write the report as JSON
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Evaluation reports, optionally labelled as LABEL=FILE; the first is the baseline
    #[arg(required = true)]
    pub reports: Vec<String>,
    /// Write the comparison as JSON
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Accuracy pair as X,Y (repeatable)
    #[arg(long = "pair", value_name = "X,Y")]
    pub pairs: Vec<String>,
    /// File with one X,Y pair per line
    #[arg(long, value_name = "FILE")]
    pub file: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    let mut text = String::new();
    let code = match command {
        Command::Generate(a) => cmd_generate(a, &mut text)?,
        Command::Grid => {
            for f in dataset::enumerate_paper_grid() {
                let _ = writeln!(text, "{f}");
            }
            EXIT_OK
        }
        Command::Plan(a) => cmd_plan(a, &mut text)?,
        Command::Regenerate(a) => {
            let source = DatasetManifest::load(&a.dataset)?;
            let m = dataset::regenerate(&source, &a.assets.library(), &a.out, workers(a.workers)?)?;
            let _ = writeln!(text, "{}", m.dir.join(FAMILY_MANIFEST).display());
            EXIT_OK
        }
        Command::Validate(a) => cmd_validate(a, &mut text)?,
        Command::Evaluate(a) => cmd_evaluate(a, &mut text)?,
        Command::Compare(a) => cmd_compare(a, &mut text)?,
        Command::Correlate(a) => cmd_correlate(a, &mut text)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::InvalidArgument(format!("cannot write output: {e}")))?;
    Ok(code)
}

fn workers(flag: Option<usize>) -> Result<usize> {
    match flag {
        Some(0) => Err(Error::InvalidArgument("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn parse_family(s: &str) -> Result<TaskFamilyParams> {
    s.parse()
}

/// Reads a TOML config file, or the defaults when none is given.
pub fn load_config(path: Option<&Path>) -> Result<GenerationConfig> {
    let Some(path) = path else {
        return Ok(GenerationConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn generation_config(a: &GenerateArgs) -> Result<GenerationConfig> {
    let mut c = load_config(a.config.as_deref())?;
    if let Some(f) = a.background_fallback {
        c.render.background_fallback = match f {
            BackgroundFallbackArg::Error => BackgroundFallback::Error,
            BackgroundFallbackArg::ProceduralClutter => BackgroundFallback::ProceduralClutter,
        };
    }
    if let Some(f) = a.object_fallback {
        c.render.object_fallback = match f {
            ObjectFallbackArg::Error => ObjectFallback::Error,
            ObjectFallbackArg::ProceduralGlyph => ObjectFallback::ProceduralGlyph,
        };
    }
    if let Some(m) = a.distractor_mode {
        c.sampler.distractor_mode = match m {
            DistractorArg::AlgorithmFaithful => DistractorMode::AlgorithmFaithful,
            DistractorArg::Unconstrained => DistractorMode::Unconstrained,
        };
    }
    if let Some(sep) = a.min_object_separation {
        c.sampler.min_object_separation = Some(sep);
    }
    c.validate()?;
    Ok(c)
}

fn cmd_generate(a: GenerateArgs, text: &mut String) -> Result<i32> {
    let splits: SplitSpec = a.splits.parse()?;
    let config = generation_config(&a)?;
    let families = if a.paper_grid {
        dataset::enumerate_paper_grid()
    } else {
        a.families.iter().map(|s| parse_family(s)).collect::<Result<Vec<_>>>()?
    };
    let assets = a.assets.library();
    let options = GenerateOptions {
        master_seed: a.seed,
        workers: workers(a.workers)?,
        render_images: !a.no_images,
    };
    for f in &families {
        let m = dataset::generate_family(f, splits, &config, &assets, &a.out, options)?;
        let _ = writeln!(
            text,
            "{}  train {}  val {}  test {}",
            m.dir.join(FAMILY_MANIFEST).display(),
            splits.train,
            splits.val,
            splits.test
        );
    }
    let _ = writeln!(text, "{} families written", families.len());
    Ok(EXIT_OK)
}

fn cmd_plan(a: PlanArgs, text: &mut String) -> Result<i32> {
    let strategy: Strategy = a.strategy.parse()?;
    let target = parse_family(&a.target)?;
    let require_seed = |what: &str| {
        a.seed
            .ok_or_else(|| Error::InvalidArgument(format!("--seed is required for {what}")))
    };
    let plan = match strategy {
        Strategy::Bg | Strategy::Obj | Strategy::M | Strategy::All => {
            curriculum::plan_curriculum(strategy, &target, a.epochs.unwrap_or(curriculum::DEFAULT_EPOCHS))?
        }
        Strategy::Direct => curriculum::plan_direct(&target, a.epochs.unwrap_or(curriculum::DEFAULT_EPOCHS))?,
        Strategy::MoreEpochs => {
            if a.epochs.is_some_and(|e| e != curriculum::MORE_EPOCHS) {
                return Err(Error::InvalidArgument(format!(
                    "more-epochs always trains {} epochs",
                    curriculum::MORE_EPOCHS
                )));
            }
            curriculum::plan_ablation(Ablation::MoreEpochs, &target)?
        }
        Strategy::MoreData => curriculum::plan_ablation(
            Ablation::MoreData {
                k: a.k,
                epochs: a.epochs.unwrap_or(1),
            },
            &target,
        )?,
        Strategy::Mix => curriculum::plan_ablation(
            Ablation::Mix {
                source: a.mix_source.parse()?,
                seed: require_seed("mix plans")?,
                epochs: a.epochs.unwrap_or(curriculum::DEFAULT_EPOCHS),
            },
            &target,
        )?,
    };

    if a.build {
        match strategy {
            Strategy::Mix => {
                let source_strategy: Strategy = a.mix_source.parse()?;
                let source = curriculum::plan_curriculum(source_strategy, &target, curriculum::DEFAULT_EPOCHS)?;
                let (dir, header) = curriculum::build_mix(&a.out, &source, plan.seed.expect("mix plans carry a seed"))?;
                let _ = writeln!(text, "{}  {} bundles", dir.display(), header.count);
            }
            Strategy::MoreData => {
                let config = load_config(a.config.as_deref())?;
                config.validate()?;
                let options = GenerateOptions {
                    master_seed: require_seed("building more-data")?,
                    workers: workers(a.workers)?,
                    render_images: !a.no_images,
                };
                let m = curriculum::build_more_data(&a.out, &target, a.k, &config, &a.assets.library(), options)?;
                let _ = writeln!(text, "{}  {} bundles", m.dir.display(), a.k);
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "--build has nothing to build for {strategy}"
                )))
            }
        }
    }

    let path = a.out.join("plans").join(plan.file_name());
    plan.save(&path)?;
    for (i, s) in plan.stages.iter().enumerate() {
        let _ = writeln!(
            text,
            "stage {}: {}  epochs {}  init {:?}",
            i + 1,
            s.family,
            s.epochs,
            s.init_from
        );
    }
    let _ = writeln!(text, "{}", path.display());
    Ok(EXIT_OK)
}

/// Expands data roots into their family directories.
fn family_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(FAMILY_MANIFEST).is_file() {
            out.push(p.clone());
            continue;
        }
        let families = p.join(FAMILIES_DIR);
        if !families.is_dir() {
            return Err(Error::MissingDataset(p.clone()));
        }
        let mut found: Vec<PathBuf> = std::fs::read_dir(&families)
            .map_err(|e| Error::MissingDataset(families.join(e.to_string())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(FAMILY_MANIFEST).is_file())
            .collect();
        if found.is_empty() {
            return Err(Error::MissingDataset(families));
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

fn cmd_validate(a: ValidateArgs, text: &mut String) -> Result<i32> {
    let mut reports = Vec::new();
    for dir in family_dirs(&a.datasets)? {
        let report = oracle::audit_dataset(&DatasetManifest::load(&dir)?)?;
        let _ = writeln!(
            text,
            "{}  n {}  solvable {:.4}  ambiguous {:.4}  unanimous-acc {}  margin-min {}  {}",
            report.family,
            report.n,
            report.solvable_rate,
            report.ambiguity_rate,
            report.unanimous_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
            report.margin_min.map_or("-".into(), |v| format!("{v:.4}")),
            if report.passed { "ok" } else { "FAILED" }
        );
        for f in report.flagged.iter().take(10) {
            let _ = writeln!(text, "  {} {}: {}", f.split, f.record, f.issues.join("; "));
        }
        if report.flagged.len() > 10 {
            let _ = writeln!(text, "  ... {} more flagged records", report.flagged.len() - 10);
        }
        reports.push(report);
    }
    if let Some(path) = &a.report {
        dataset::write_json(path, &reports)?;
    }
    Ok(if reports.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    })
}

fn cmd_evaluate(a: EvaluateArgs, text: &mut String) -> Result<i32> {
    let split: Split = a.split.parse()?;
    eval::z_threshold(1, a.alpha)?;
    let manifests = family_dirs(&a.datasets)?
        .into_iter()
        .map(DatasetManifest::load)
        .collect::<Result<Vec<_>>>()?;
    let preds = eval::read_predictions(&a.predictions)?;

    // Route each prediction to the family whose id prefixes its bundle id.
    let mut routed: BTreeMap<usize, Vec<PredictionRecord>> = BTreeMap::new();
    let mut unknown = Vec::new();
    let prefixes: Vec<String> = manifests
        .iter()
        .map(|m| format!("{}-{}-", m.family().id(), split))
        .collect();
    for p in preds {
        match prefixes.iter().position(|pre| p.bundle_id.starts_with(pre.as_str())) {
            Some(i) => routed.entry(i).or_default().push(p),
            None => unknown.push(p.bundle_id),
        }
    }
    if !unknown.is_empty() {
        let shown: Vec<&str> = unknown.iter().take(20).map(String::as_str).collect();
        let more = unknown.len().saturating_sub(shown.len());
        return Err(Error::Coverage(format!(
            "{} prediction(s) for unknown bundle ids: {}{}",
            unknown.len(),
            shown.join(", "),
            if more > 0 {
                format!(" and {more} more")
            } else {
                String::new()
            }
        )));
    }

    let mut scores = Vec::new();
    for (i, m) in manifests.iter().enumerate() {
        let preds = routed.remove(&i).unwrap_or_default();
        scores.push(eval::score_family(m, split, &preds, a.alpha)?);
    }
    let report = EvalReport::new(a.alpha, scores);
    text.push_str(&report.render_table());
    let missing: u64 = report.families.iter().map(|f| f.n_missing).sum();
    if missing > 0 {
        let _ = writeln!(text, "{missing} bundle(s) had no prediction and were scored incorrect");
    }
    if let Some(path) = &a.report {
        dataset::write_json(path, &report)?;
    }
    Ok(EXIT_OK)
}

fn cmd_compare(a: CompareArgs, text: &mut String) -> Result<i32> {
    let mut runs = Vec::new();
    for spec in &a.reports {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) if !l.is_empty() => (l.to_string(), PathBuf::from(p)),
            _ => {
                let p = PathBuf::from(spec);
                let label = p
                    .file_stem()
                    .map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                (label, p)
            }
        };
        runs.push((label, EvalReport::load(&path)?));
    }
    let cmp = eval::compare_runs(&runs)?;
    text.push_str(&cmp.render_table());
    if let Some(path) = &a.out {
        dataset::write_json(path, &cmp)?;
    }
    Ok(EXIT_OK)
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("expected X,Y accuracy pair, got {s:?}"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_correlate(a: CorrelateArgs, text: &mut String) -> Result<i32> {
    let mut pairs = a.pairs.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
    if let Some(path) = &a.file {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        for line in body
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            pairs.push(parse_pair(line)?);
        }
    }
    let c = eval::correlate_stage_accuracies(&pairs)?;
    let _ = writeln!(
        text,
        "n {}  pearson_r {:.6}  r_squared {:.6}",
        c.n, c.pearson_r, c.r_squared
    );
    Ok(EXIT_OK)
}
