//! Curriculum and ablation training plans.
//!
//! Plans are data for an external trainer. Dataset references are paths
//! relative to the data root that holds `families/`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::assets::AssetLibrary;
use crate::config::GenerationConfig;
use crate::dataset::{self, DatasetManifest, GenerateOptions, Split, SplitSpec, FAMILIES_DIR, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::model::{BackgroundSet, ObjectSet, PromptBundle, TaskFamilyParams};
use crate::rng::rng_from_seed;

pub const DEFAULT_EPOCHS: u32 = 3;
pub const MORE_EPOCHS: u32 = 6;
pub const DEFAULT_MORE_DATA_K: u64 = 6000;
pub const MIXES_DIR: &str = "mixes";
pub const MORE_DATA_DIR: &str = "more-data";
pub const MIX_MANIFEST: &str = "mix.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Bg,
    Obj,
    M,
    All,
    Direct,
    Mix,
    MoreEpochs,
    MoreData,
}

impl Strategy {
    pub const CURRICULA: [Strategy; 4] = [Strategy::Bg, Strategy::Obj, Strategy::M, Strategy::All];
    pub const ALL_KINDS: [Strategy; 8] = [
        Strategy::Bg,
        Strategy::Obj,
        Strategy::M,
        Strategy::All,
        Strategy::Direct,
        Strategy::Mix,
        Strategy::MoreEpochs,
        Strategy::MoreData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bg => "bg",
            Strategy::Obj => "obj",
            Strategy::M => "m",
            Strategy::All => "all",
            Strategy::Direct => "direct",
            Strategy::Mix => "mix",
            Strategy::MoreEpochs => "more-epochs",
            Strategy::MoreData => "more-data",
        }
    }

    pub fn is_curriculum(self) -> bool {
        Self::CURRICULA.contains(&self)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL_KINDS.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL_KINDS.iter().map(|k| k.name()).collect();
            Error::InvalidArgument(format!("unknown strategy {s:?} (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitFrom {
    Previous,
    Fresh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub family: TaskFamilyParams,
    /// Path of the training data relative to the data root.
    pub dataset: String,
    pub epochs: u32,
    pub init_from: InitFrom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumPlan {
    pub format_version: u32,
    pub strategy: Strategy,
    pub target: TaskFamilyParams,
    pub stages: Vec<Stage>,
    /// Shuffle seed of a mix plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Unique bundle count of a more-data plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_bundles: Option<u64>,
    /// Opaque trainer settings, copied through untouched.
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Finetuning hyperparameters used for every stage in the reference setup.
pub fn default_training_metadata() -> BTreeMap<String, serde_json::Value> {
    use serde_json::json;
    [
        ("learning_rate", json!(1e-4)),
        ("batch_size", json!(16)),
        ("warmup_ratio", json!(0.05)),
        ("weight_decay", json!(0.1)),
        ("optimizer", json!("AdamW")),
        ("adam_beta1", json!(0.9)),
        ("adam_beta2", json!(0.95)),
        ("adam_epsilon", json!(1e-8)),
        ("gradient_clipping", json!(1.0)),
        ("lora_r", json!(8)),
        ("lora_alpha", json!(32)),
        ("lora_dropout", json!(0.1)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn family_ref(family: &TaskFamilyParams) -> String {
    format!("{FAMILIES_DIR}/{}", family.id())
}

pub fn mix_ref(source: Strategy, target: &TaskFamilyParams) -> String {
    format!("{MIXES_DIR}/{source}_{}", target.id())
}

pub fn more_data_ref(target: &TaskFamilyParams, k: u64) -> String {
    format!("{MORE_DATA_DIR}/{}_k{k}", target.id())
}

/// The easier family a curriculum starts from. Every component not named by
/// the strategy is taken from the target, including the text mode.
pub fn first_stage_family(strategy: Strategy, target: &TaskFamilyParams) -> Result<TaskFamilyParams> {
    let stage = match strategy {
        Strategy::Bg => target.with_background(BackgroundSet::I1),
        Strategy::Obj => target.with_objects(ObjectSet::Easy),
        Strategy::M => target.with_m(1)?,
        Strategy::All => target
            .with_background(BackgroundSet::I1)
            .with_objects(ObjectSet::Easy)
            .with_m(1)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other} is not a curriculum strategy (bg, obj, m, all)"
            )));
        }
    };
    if &stage == target {
        return Err(Error::DegeneratePlan(format!(
            "strategy {strategy} on {target} starts from the target itself"
        )));
    }
    Ok(stage)
}

fn plan(strategy: Strategy, target: &TaskFamilyParams, stages: Vec<Stage>) -> CurriculumPlan {
    CurriculumPlan {
        format_version: FORMAT_VERSION,
        strategy,
        target: target.clone(),
        stages,
        seed: None,
        unique_bundles: None,
        metadata: default_training_metadata(),
    }
}

fn check_epochs(epochs: u32) -> Result<()> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    Ok(())
}

/// Two-stage curriculum: the easier family, then the target initialised
/// from the first stage's weights.
pub fn plan_curriculum(strategy: Strategy, target: &TaskFamilyParams, epochs: u32) -> Result<CurriculumPlan> {
    check_epochs(epochs)?;
    let first = first_stage_family(strategy, target)?;
    Ok(plan(
        strategy,
        target,
        vec![
            Stage {
                dataset: family_ref(&first),
                family: first,
                epochs,
                init_from: InitFrom::Fresh,
            },
            Stage {
                family: target.clone(),
                dataset: family_ref(target),
                epochs,
                init_from: InitFrom::Previous,
            },
        ],
    ))
}

/// Plain finetuning on the target alone.
pub fn plan_direct(target: &TaskFamilyParams, epochs: u32) -> Result<CurriculumPlan> {
    check_epochs(epochs)?;
    Ok(plan(
        Strategy::Direct,
        target,
        vec![Stage {
            family: target.clone(),
            dataset: family_ref(target),
            epochs,
            init_from: InitFrom::Fresh,
        }],
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    /// One stage over the shuffled union of a curriculum's training sets.
    Mix { source: Strategy, seed: u64, epochs: u32 },
    /// One stage on the target with the epoch budget of a two-stage curriculum.
    MoreEpochs,
    /// One stage over `k` unique target bundles.
    MoreData { k: u64, epochs: u32 },
}

pub fn plan_ablation(ablation: Ablation, target: &TaskFamilyParams) -> Result<CurriculumPlan> {
    let single = |dataset: String, epochs: u32| Stage {
        family: target.clone(),
        dataset,
        epochs,
        init_from: InitFrom::Fresh,
    };
    match ablation {
        Ablation::Mix { source, seed, epochs } => {
            check_epochs(epochs)?;
            // Validates the source and rejects degenerate mixes.
            first_stage_family(source, target)?;
            let mut p = plan(Strategy::Mix, target, vec![single(mix_ref(source, target), epochs)]);
            p.seed = Some(seed);
            Ok(p)
        }
        Ablation::MoreEpochs => Ok(plan(
            Strategy::MoreEpochs,
            target,
            vec![single(family_ref(target), MORE_EPOCHS)],
        )),
        Ablation::MoreData { k, epochs } => {
            check_epochs(epochs)?;
            if k == 0 || k > dataset::SPLIT_STRIDE {
                return Err(Error::InvalidArgument(format!(
                    "unique bundle count must be in 1..={}, got {k}",
                    dataset::SPLIT_STRIDE
                )));
            }
            let mut p = plan(
                Strategy::MoreData,
                target,
                vec![single(more_data_ref(target, k), epochs)],
            );
            p.unique_bundles = Some(k);
            Ok(p)
        }
    }
}

impl CurriculumPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Error::InvalidConfig(format!("plan for {}: {why}", self.target));
        let Some(last) = self.stages.last() else {
            return Err(bad("no stages".into()));
        };
        if last.family != self.target {
            return Err(bad(format!("final stage trains {} instead of the target", last.family)));
        }
        if self.stages.iter().any(|s| s.epochs == 0) {
            return Err(bad("a stage has zero epochs".into()));
        }
        if self.stages[0].init_from == InitFrom::Previous {
            return Err(bad("first stage cannot initialise from a previous stage".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: CurriculumPlan = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: source.line(),
            source,
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        dataset::write_json(path, self)
    }

    /// Conventional file name, e.g. `plans/m_<target id>.json`.
    pub fn file_name(&self) -> String {
        match self.unique_bundles {
            Some(k) => format!("{}_{}_k{k}.json", self.strategy, self.target.id()),
            None => format!("{}_{}.json", self.strategy, self.target.id()),
        }
    }
}

/// Header written next to a mixed training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixManifest {
    pub format_version: u32,
    pub source: Strategy,
    pub target: TaskFamilyParams,
    pub seed: u64,
    pub sources: Vec<String>,
    pub count: u64,
    /// Relative to the mix directory.
    pub bundles: String,
}

/// Writes the shuffled union of the train splits of a curriculum's stages
/// to `<root>/mixes/<source>_<target>`. Image paths are rewritten relative
/// to the mix directory so the original PNGs are shared, not copied.
pub fn build_mix(root: &Path, source: &CurriculumPlan, seed: u64) -> Result<(PathBuf, MixManifest)> {
    if !source.strategy.is_curriculum() {
        return Err(Error::InvalidArgument(format!(
            "mix needs a curriculum plan, got strategy {}",
            source.strategy
        )));
    }
    let rel = mix_ref(source.strategy, &source.target);
    let out_dir = root.join(&rel);
    let mut merged: Vec<PromptBundle> = Vec::new();
    let mut sources = Vec::new();
    for stage in &source.stages {
        let dir = root.join(&stage.dataset);
        let manifest = DatasetManifest::load(&dir)?;
        let mut bundles = manifest.read_split(Split::Train)?;
        for b in &mut bundles {
            for ex in b.demos.iter_mut().chain(std::iter::once(&mut b.query)) {
                let abs = dir.join(&ex.image);
                let moved = pathdiff::diff_paths(&abs, &out_dir).ok_or_else(|| {
                    Error::Invariant(format!(
                        "cannot express {} relative to {}",
                        abs.display(),
                        out_dir.display()
                    ))
                })?;
                ex.image = moved.to_string_lossy().replace('\\', "/");
            }
        }
        merged.extend(bundles);
        sources.push(stage.dataset.clone());
    }
    merged.shuffle(&mut rng_from_seed(seed));

    let bundles_rel = format!("{}/{}", Split::Train.name(), dataset::BUNDLES_FILE);
    dataset::write_bundles(&out_dir.join(&bundles_rel), &merged)?;
    let header = MixManifest {
        format_version: FORMAT_VERSION,
        source: source.strategy,
        target: source.target.clone(),
        seed,
        sources,
        count: merged.len() as u64,
        bundles: bundles_rel,
    };
    dataset::write_json(&out_dir.join(MIX_MANIFEST), &header)?;
    Ok((out_dir, header))
}

/// Generates `k` unique target bundles into `<root>/more-data/<target>_k<k>`
/// as the train split of an ordinary family directory.
pub fn build_more_data(
    root: &Path,
    target: &TaskFamilyParams,
    k: u64,
    config: &GenerationConfig,
    assets: &AssetLibrary,
    options: GenerateOptions,
) -> Result<DatasetManifest> {
    let dir = root.join(more_data_ref(target, k));
    let splits = SplitSpec {
        train: k,
        val: 0,
        test: 0,
    };
    dataset::generate_into(target, splits, config, assets, &dir, options)
}
