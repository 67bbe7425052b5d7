//! Asset packs: real background photographs and object images on disk.
//!
//! A pack lives in `<root>/<name>/pack.json`:
//!
//! ```json
//! { "name": "hard", "categories": { "Heat Guns": ["heat_guns/0001.png"] } }
//! ```
//!
//! Image paths are relative to the manifest's directory. Every image is
//! decoded when the pack is loaded, so a pack that loads is fully usable.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use image::RgbaImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PACK_MANIFEST: &str = "pack.json";
pub const ASSET_ROOT_ENV: &str = "SVAT_ASSET_ROOT";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackManifest {
    pub name: String,
    pub categories: BTreeMap<String, Vec<String>>,
}

#[derive(Debug)]
pub struct AssetPack {
    pub name: String,
    pub manifest_path: PathBuf,
    /// Category name to decoded images, in manifest order.
    categories: BTreeMap<String, Vec<Arc<RgbaImage>>>,
}

impl AssetPack {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: PackManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: manifest_path.to_path_buf(),
            line: source.line(),
            source,
        })?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut categories = BTreeMap::new();
        for (category, files) in &manifest.categories {
            if category.trim().is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{}: empty category name",
                    manifest_path.display()
                )));
            }
            if files.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{}: category {category:?} lists no images",
                    manifest_path.display()
                )));
            }
            let mut images = Vec::with_capacity(files.len());
            for rel in files {
                let path = base.join(rel);
                let img = image::open(&path).map_err(|source| Error::Image { path, source })?;
                images.push(Arc::new(img.to_rgba8()));
            }
            categories.insert(category.clone(), images);
        }
        if categories.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{}: pack has no categories",
                manifest_path.display()
            )));
        }
        Ok(Self {
            name: manifest.name,
            manifest_path: manifest_path.to_path_buf(),
            categories,
        })
    }

    pub fn category_names(&self) -> Vec<String> {
        self.categories.keys().cloned().collect()
    }

    pub fn images(&self, category: &str) -> Option<&[Arc<RgbaImage>]> {
        self.categories.get(category).map(Vec::as_slice)
    }

    /// All images regardless of category, in a stable order.
    pub fn all_images(&self) -> Vec<Arc<RgbaImage>> {
        self.categories.values().flatten().cloned().collect()
    }
}

/// Lazily loaded, shared set of packs under one root directory.
#[derive(Debug, Default)]
pub struct AssetLibrary {
    root: Option<PathBuf>,
    loaded: Mutex<HashMap<String, Option<Arc<AssetPack>>>>,
}

impl AssetLibrary {
    /// A library with no packs; every pack lookup misses.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn at(root: impl Into<PathBuf>) -> Self {
        Self {
            root: Some(root.into()),
            loaded: Mutex::default(),
        }
    }

    /// Uses `SVAT_ASSET_ROOT` when set.
    pub fn from_env() -> Self {
        match std::env::var_os(ASSET_ROOT_ENV) {
            Some(root) if !root.is_empty() => Self::at(root),
            _ => Self::empty(),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    /// Returns the named pack, `None` if its manifest does not exist, or an
    /// error if it exists but fails to load.
    pub fn pack(&self, name: &str) -> Result<Option<Arc<AssetPack>>> {
        let mut loaded = self.loaded.lock().expect("asset cache poisoned");
        if let Some(hit) = loaded.get(name) {
            return Ok(hit.clone());
        }
        let pack = match &self.root {
            Some(root) => {
                let manifest = root.join(name).join(PACK_MANIFEST);
                if manifest.is_file() {
                    Some(Arc::new(AssetPack::load(&manifest)?))
                } else {
                    None
                }
            }
            None => None,
        };
        loaded.insert(name.to_string(), pack.clone());
        Ok(pack)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use image::Rgba;

    /// Writes a small pack with solid-colour images under `root/name`.
    pub fn write_pack(root: &Path, name: &str, categories: &[(&str, usize)]) {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let mut manifest = PackManifest {
            name: name.to_string(),
            categories: BTreeMap::new(),
        };
        for (ci, (cat, count)) in categories.iter().enumerate() {
            let mut files = Vec::new();
            for k in 0..*count {
                let rel = format!("c{ci}_{k}.png");
                let img = RgbaImage::from_pixel(24, 16, Rgba([40 * ci as u8, 10 * k as u8, 200, 255]));
                img.save(dir.join(&rel)).unwrap();
                files.push(rel);
            }
            manifest.categories.insert(cat.to_string(), files);
        }
        std::fs::write(
            dir.join(PACK_MANIFEST),
            serde_json::to_string_pretty(&manifest).unwrap(),
        )
        .unwrap();
    }
}
