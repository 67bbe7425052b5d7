//! On-disk datasets.
//!
//! ```text
//! <root>/families/<family_id>/
//!     family.json              header: family, seed, config snapshot, splits
//!     <split>/bundles.jsonl    one bundle per line
//!     <split>/images/*.png     <bundle_index>_<k>.png, k = 0..N-1 (query last)
//! ```
//!
//! Splits draw bundle indices from disjoint ranges (train from 0, val from
//! 10^6, test from 2*10^6), so no two splits ever share an RNG stream. A
//! split therefore holds at most 10^6 bundles.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets::AssetLibrary;
use crate::config::GenerationConfig;
use crate::error::{Error, Result};
use crate::model::{BackgroundSet, ObjectSet, PromptBundle, TaskFamilyParams, TextMode};
use crate::render;
use crate::sampler::BundleGenerator;

pub const FORMAT_VERSION: u32 = 1;
pub const FAMILY_MANIFEST: &str = "family.json";
pub const BUNDLES_FILE: &str = "bundles.jsonl";
pub const FAMILIES_DIR: &str = "families";
pub const SPLIT_STRIDE: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn first_index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => SPLIT_STRIDE,
            Split::Test => 2 * SPLIT_STRIDE,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?} (train, val, test)")))
    }
}

/// Bundle counts per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 1000,
            val: 200,
            test: 1000,
        }
    }
}

impl SplitSpec {
    pub fn count(&self, split: Split) -> u64 {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train + self.val + self.test == 0 {
            return Err(Error::InvalidConfig("all splits are empty".into()));
        }
        if let Some(sp) = Split::ALL.into_iter().find(|&sp| self.count(sp) > SPLIT_STRIDE) {
            return Err(Error::InvalidConfig(format!(
                "split {sp} asks for {} bundles, the limit is {SPLIT_STRIDE}",
                self.count(sp)
            )));
        }
        Ok(())
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    /// Parses `train,val,test`, e.g. `1000,200,1000`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("splits must look like 1000,200,1000, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = |p: &str| p.parse::<u64>().map_err(|_| bad());
        let spec = Self {
            train: n(parts[0])?,
            val: n(parts[1])?,
            test: n(parts[2])?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub count: u64,
    pub first_index: u64,
    /// Relative to the family directory.
    pub bundles: String,
}

/// Contents of `family.json`. Together with any asset packs it used, this
/// is enough to regenerate the family byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyManifest {
    pub format_version: u32,
    pub family: TaskFamilyParams,
    pub master_seed: u64,
    pub images_rendered: bool,
    pub config: GenerationConfig,
    pub splits: BTreeMap<Split, SplitEntry>,
}

impl FamilyManifest {
    pub fn split_spec(&self) -> SplitSpec {
        let c = |sp| self.splits.get(&sp).map_or(0, |e| e.count);
        SplitSpec {
            train: c(Split::Train),
            val: c(Split::Val),
            test: c(Split::Test),
        }
    }
}

/// A family directory on disk together with its parsed header.
#[derive(Clone, Debug)]
pub struct DatasetManifest {
    pub dir: PathBuf,
    pub header: FamilyManifest,
}

/// One line of a bundle file that failed to parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub split: Split,
    pub line: usize,
    pub message: String,
}

impl DatasetManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(FAMILY_MANIFEST);
        if !path.is_file() {
            return Err(Error::MissingDataset(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: FamilyManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.clone(),
            line: source.line(),
            source,
        })?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "{}: unsupported format_version {}",
                path.display(),
                header.format_version
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
        })
    }

    pub fn family(&self) -> &TaskFamilyParams {
        &self.header.family
    }

    pub fn bundles_path(&self, split: Split) -> Option<PathBuf> {
        self.header.splits.get(&split).map(|e| self.dir.join(&e.bundles))
    }

    /// Reads every bundle of `split`, failing on the first malformed line.
    pub fn read_split(&self, split: Split) -> Result<Vec<PromptBundle>> {
        let Some(path) = self.bundles_path(split) else {
            return Ok(Vec::new());
        };
        read_bundles(&path)
    }

    /// Reads `split`, collecting malformed lines instead of stopping.
    pub fn read_split_lenient(&self, split: Split) -> Result<Vec<std::result::Result<PromptBundle, RecordError>>> {
        let Some(path) = self.bundles_path(split) else {
            return Ok(Vec::new());
        };
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| RecordError {
                split,
                line: i + 1,
                message: e.to_string(),
            }));
        }
        Ok(out)
    }
}

pub fn read_bundles(path: &Path) -> Result<Vec<PromptBundle>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_bundles(path: &Path, bundles: &[PromptBundle]) -> Result<()> {
    let mut buf = Vec::new();
    for b in bundles {
        serde_json::to_writer(&mut buf, b).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Knobs that do not change what a bundle contains.
#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions {
    pub master_seed: u64,
    pub workers: usize,
    /// Write PNGs; when false only bundle metadata is produced.
    pub render_images: bool,
}

impl GenerateOptions {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            workers: 1,
            render_images: true,
        }
    }
}

pub fn family_dir(root: &Path, family: &TaskFamilyParams) -> PathBuf {
    root.join(FAMILIES_DIR).join(family.id())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))
}

/// Generates `family` into `<root>/families/<family_id>`.
pub fn generate_family(
    family: &TaskFamilyParams,
    splits: SplitSpec,
    config: &GenerationConfig,
    assets: &AssetLibrary,
    root: &Path,
    options: GenerateOptions,
) -> Result<DatasetManifest> {
    generate_into(family, splits, config, assets, &family_dir(root, family), options)
}

/// Generates `family` into an explicit directory.
pub fn generate_into(
    family: &TaskFamilyParams,
    splits: SplitSpec,
    config: &GenerationConfig,
    assets: &AssetLibrary,
    dir: &Path,
    options: GenerateOptions,
) -> Result<DatasetManifest> {
    splits.validate()?;
    let generator = BundleGenerator::new(family, config, assets)?;
    let pool = thread_pool(options.workers)?;
    let mut entries = BTreeMap::new();

    for split in Split::ALL {
        let count = splits.count(split);
        let split_dir = dir.join(split.name());
        if split_dir.exists() {
            fs::remove_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        }
        if count == 0 {
            continue;
        }
        let images_dir = split_dir.join("images");
        if options.render_images {
            fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
        } else {
            fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        }
        let first = split.first_index();
        let bundles: Vec<PromptBundle> = pool.install(|| {
            (first..first + count)
                .into_par_iter()
                .map(|index| {
                    let bundle = generator.generate(options.master_seed, split.name(), index)?;
                    if options.render_images {
                        write_bundle_images(&bundle, config, assets, dir)?;
                    }
                    Ok(bundle)
                })
                .collect::<Result<_>>()
        })?;
        let rel = format!("{}/{BUNDLES_FILE}", split.name());
        write_bundles(&dir.join(&rel), &bundles)?;
        entries.insert(
            split,
            SplitEntry {
                count,
                first_index: first,
                bundles: rel,
            },
        );
    }

    let header = FamilyManifest {
        format_version: FORMAT_VERSION,
        family: family.clone(),
        master_seed: options.master_seed,
        images_rendered: options.render_images,
        config: config.clone(),
        splits: entries,
    };
    write_json(&dir.join(FAMILY_MANIFEST), &header)?;
    Ok(DatasetManifest {
        dir: dir.to_path_buf(),
        header,
    })
}

fn write_bundle_images(
    bundle: &PromptBundle,
    config: &GenerationConfig,
    assets: &AssetLibrary,
    dir: &Path,
) -> Result<()> {
    let images = render::render_bundle(bundle, assets, &config.render)?;
    for (ex, img) in bundle.examples().zip(images) {
        let path = dir.join(&ex.image);
        img.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| Error::Image { path, source })?;
    }
    Ok(())
}

/// Regenerates a family from the config snapshot in its manifest.
pub fn regenerate(
    source: &DatasetManifest,
    assets: &AssetLibrary,
    out_dir: &Path,
    workers: usize,
) -> Result<DatasetManifest> {
    let h = &source.header;
    generate_into(
        &h.family,
        h.split_spec(),
        &h.config,
        assets,
        out_dir,
        GenerateOptions {
            master_seed: h.master_seed,
            workers,
            render_images: h.images_rendered,
        },
    )
}

/// The 50 families of the standard grid: every background level times every
/// object set, each once with one object and uninformative text and once
/// with three objects and guiding text.
pub fn enumerate_paper_grid() -> Vec<TaskFamilyParams> {
    let mut out = Vec::with_capacity(50);
    for bg in BackgroundSet::BUILTIN {
        for obj in ObjectSet::BUILTIN {
            for (m, text) in [(1, TextMode::None), (3, TextMode::Guide)] {
                out.push(TaskFamilyParams::new(bg.clone(), obj.clone(), m, text).expect("m >= 1"));
            }
        }
    }
    out
}
