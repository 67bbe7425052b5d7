//! Bundle sampling: boundary, balanced labels, margin-constrained poses and
//! target/distractor classes.
//!
//! A bundle is a pure function of `(family, config, master_seed, split,
//! bundle_index)`; all randomness comes from the bundle's own stream.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assets::AssetLibrary;
use crate::catalog;
use crate::config::GenerationConfig;
use crate::error::{Error, Result};
use crate::model::{
    DecisionBoundary, ExampleRecord, Label, ObjectInstance, Pose, PromptBundle, SeedInfo, Sign, TaskFamilyParams,
};
use crate::prompt::{self, QuestionTemplateSet};
use crate::rng;

/// Maximum number of pose draws before giving up on one object.
pub const MAX_POSE_DRAWS: u32 = 10_000;

/// How distractor poses are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistractorMode {
    /// Distractors obey the same label and margin constraint as the target.
    #[default]
    AlgorithmFaithful,
    /// Distractors are uniform over the unit square.
    Unconstrained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Examples per bundle including the query.
    pub n_examples: usize,
    pub epsilon: f64,
    /// Pose dimensionality.
    pub d: usize,
    pub distractor_mode: DistractorMode,
    /// Minimum normalized distance between objects of one image.
    pub min_object_separation: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_examples: 5,
            epsilon: 0.05,
            d: 2,
            distractor_mode: DistractorMode::AlgorithmFaithful,
            min_object_separation: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_examples < 3 {
            return Err(Error::InvalidConfig(format!("n_examples {} < 3", self.n_examples)));
        }
        if !(self.n_examples - 1).is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "n_examples {} leaves an odd number of demonstrations",
                self.n_examples
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} outside (0, 0.25)",
                self.epsilon
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("pose dimension must be at least 1".into()));
        }
        if let Some(sep) = self.min_object_separation {
            if !(sep.is_finite() && sep >= 0.0) {
                return Err(Error::InvalidConfig(format!("min_object_separation {sep} invalid")));
            }
        }
        Ok(())
    }
}

/// Draws `dim ~ U{1..D}`, `tau ~ U[2 eps, 1 - 2 eps]`, `sign ~ U{-1, +1}`.
pub fn sample_boundary<R: Rng + ?Sized>(config: &SamplerConfig, rng: &mut R) -> Result<DecisionBoundary> {
    let eps = config.epsilon;
    let dim = rng.gen_range(1..=config.d);
    let tau = rng.gen_range(2.0 * eps..=1.0 - 2.0 * eps);
    let sign = if rng.gen_bool(0.5) {
        Sign::Positive
    } else {
        Sign::Negative
    };
    DecisionBoundary::new(dim, tau, sign, eps)
}

/// Demonstration labels (a shuffle of equal numbers of 0 and 1) followed by
/// a uniformly drawn query label.
pub fn sample_label_sequence<R: Rng + ?Sized>(n_examples: usize, rng: &mut R) -> Result<Vec<Label>> {
    if n_examples < 2 || !(n_examples - 1).is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "cannot balance {} demonstrations",
            n_examples.saturating_sub(1)
        )));
    }
    let mut labels: Vec<Label> = (0..n_examples / 2).flat_map(|_| [Label::No, Label::Yes]).collect();
    labels.shuffle(rng);
    labels.push(Label::from_bool(rng.gen_bool(0.5)));
    Ok(labels)
}

fn uniform_pose<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Pose {
    Pose::new((0..d).map(|_| rng.gen::<f64>()).collect()).expect("unit draws are in range")
}

/// Rejection-samples a pose with the given label whose coordinate along the
/// boundary dimension is more than `epsilon` away from the threshold.
///
/// Returns the pose and the number of draws it took.
pub fn sample_pose<R: Rng + ?Sized>(
    rng: &mut R,
    boundary: &DecisionBoundary,
    label: Label,
    d: usize,
) -> Result<(Pose, u32)> {
    sample_pose_where(rng, d, |p| constrained_ok(boundary, label, p))
}

fn constrained_ok(boundary: &DecisionBoundary, label: Label, pose: &Pose) -> bool {
    boundary.classify(pose).ok() == Some(label) && boundary.margin(pose).is_ok_and(|m| m > boundary.epsilon())
}

fn sample_pose_where<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    mut accept: impl FnMut(&Pose) -> bool,
) -> Result<(Pose, u32)> {
    for draws in 1..=MAX_POSE_DRAWS {
        let pose = uniform_pose(d, rng);
        if accept(&pose) {
            return Ok((pose, draws));
        }
    }
    Err(Error::Invariant(format!(
        "no acceptable pose after {MAX_POSE_DRAWS} draws"
    )))
}

/// A distractor class: uniform over `categories` minus the target.
pub fn sample_distractor_class<'a, R: Rng + ?Sized>(
    rng: &mut R,
    categories: &'a [String],
    target: &str,
) -> Result<&'a String> {
    if !categories.iter().any(|c| c != target) {
        return Err(Error::InvalidConfig(
            "distractors need an object set with at least two categories".into(),
        ));
    }
    loop {
        let c = categories.choose(rng).expect("non-empty");
        if c != target {
            return Ok(c);
        }
    }
}

/// Target class and `m - 1` distractor classes.
pub fn sample_classes<R: Rng + ?Sized>(rng: &mut R, categories: &[String], m: usize) -> Result<(String, Vec<String>)> {
    if m >= 2 && categories.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "{m} objects per image need at least two categories, set has {}",
            categories.len()
        )));
    }
    let target = categories
        .choose(rng)
        .ok_or_else(|| Error::InvalidConfig("object set has no categories".into()))?
        .clone();
    let distractors = (1..m)
        .map(|_| sample_distractor_class(rng, categories, &target).cloned())
        .collect::<Result<_>>()?;
    Ok((target, distractors))
}

/// Generates bundles of one task family. Category lists and asset
/// availability are resolved once, up front.
#[derive(Debug)]
pub struct BundleGenerator {
    family: TaskFamilyParams,
    family_id: String,
    sampler: SamplerConfig,
    prompts: QuestionTemplateSet,
    categories: Vec<String>,
}

impl BundleGenerator {
    pub fn new(family: &TaskFamilyParams, config: &GenerationConfig, assets: &AssetLibrary) -> Result<Self> {
        config.validate()?;
        let categories = catalog::categories(family.objects(), assets, config.render.object_fallback)?;
        if family.m() >= 2 && categories.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "family {family} places {} objects but its object set has {} categories",
                family.m(),
                categories.len()
            )));
        }
        crate::render::check_background_available(family.background(), assets, config.render.background_fallback)?;
        Ok(Self {
            family: family.clone(),
            family_id: family.id(),
            sampler: config.sampler.clone(),
            prompts: config.prompts.clone(),
            categories,
        })
    }

    pub fn family(&self) -> &TaskFamilyParams {
        &self.family
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn bundle_id(&self, split: &str, bundle_index: u64) -> String {
        format!("{}-{split}-{bundle_index:07}", self.family_id)
    }

    /// Image path of example `k` relative to the family directory.
    pub fn image_path(split: &str, bundle_index: u64, k: usize) -> String {
        format!("{split}/images/{bundle_index:07}_{k}.png")
    }

    pub fn generate(&self, master_seed: u64, split: &str, bundle_index: u64) -> Result<PromptBundle> {
        let stream_seed = rng::stream_seed(master_seed, &self.family_id, split, bundle_index);
        let mut rng = rng::rng_from_seed(stream_seed);
        let cfg = &self.sampler;

        let boundary = sample_boundary(cfg, &mut rng)?;
        let background_seed: u64 = rng.gen();
        let target_class = self
            .categories
            .choose(&mut rng)
            .ok_or_else(|| Error::InvalidConfig("object set has no categories".into()))?
            .clone();
        let question = self
            .prompts
            .build_question(self.family.text(), &target_class, &mut rng)?;
        let labels = sample_label_sequence(cfg.n_examples, &mut rng)?;

        let m = self.family.m() as usize;
        let mut examples = Vec::with_capacity(labels.len());
        for (k, &label) in labels.iter().enumerate() {
            let example_seed: u64 = rng.gen();
            let mut objects: Vec<ObjectInstance> = Vec::with_capacity(m);
            for j in 0..m {
                let constrained = j == 0 || cfg.distractor_mode == DistractorMode::AlgorithmFaithful;
                let separated = |p: &Pose| match cfg.min_object_separation {
                    Some(sep) => objects.iter().all(|o| o.xi.distance(p) >= sep),
                    None => true,
                };
                let (xi, _) = sample_pose_where(&mut rng, cfg.d, |p| {
                    (!constrained || constrained_ok(&boundary, label, p)) && separated(p)
                })
                .map_err(|e| match cfg.min_object_separation {
                    Some(sep) => Error::InvalidConfig(format!("cannot place {m} objects {sep} apart: {e}")),
                    None => e,
                })?;
                let category = if j == 0 {
                    target_class.clone()
                } else {
                    sample_distractor_class(&mut rng, &self.categories, &target_class)?.clone()
                };
                objects.push(ObjectInstance {
                    category,
                    xi,
                    is_target: j == 0,
                    style_seed: rng.gen(),
                });
            }
            examples.push(ExampleRecord {
                label,
                objects,
                image: Self::image_path(split, bundle_index, k),
                example_seed,
            });
        }
        let query = examples.pop().expect("n_examples >= 3");
        let demo_labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
        let prompt_text = prompt::build_prompt_text(&question, &demo_labels);

        Ok(PromptBundle {
            bundle_id: self.bundle_id(split, bundle_index),
            family: self.family.clone(),
            seed: SeedInfo {
                master_seed,
                split: split.to_string(),
                bundle_index,
                stream_seed,
                background_seed,
            },
            boundary,
            target_class,
            question,
            prompt_text,
            demos: examples,
            query,
        })
    }
}

/// One-shot convenience wrapper around [`BundleGenerator`].
pub fn generate_bundle(
    family: &TaskFamilyParams,
    config: &GenerationConfig,
    assets: &AssetLibrary,
    master_seed: u64,
    split: &str,
    bundle_index: u64,
) -> Result<PromptBundle> {
    BundleGenerator::new(family, config, assets)?.generate(master_seed, split, bundle_index)
}
