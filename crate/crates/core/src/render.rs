//! Deterministic image synthesis: backgrounds, object sprites and
//! compositing.
//!
//! Labels live in pose space; nothing here ever recomputes a label from
//! pixels. The pose to pixel mapping is `round(xi * (extent - 1))`, which is
//! monotone in each coordinate.

use std::f64::consts::PI;
use std::sync::Arc;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assets::{AssetLibrary, AssetPack};
use crate::catalog::ObjectFallback;
use crate::error::{Error, Result};
use crate::model::{BackgroundSet, ExampleRecord, ObjectSet, Pose, PromptBundle};
use crate::rng::{self, BundleRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundFallback {
    Error,
    ProceduralClutter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Sprite side as a fraction of the shorter canvas side.
    pub sprite_fraction: f64,
    pub antialias: bool,
    pub background_fallback: BackgroundFallback,
    pub object_fallback: ObjectFallback,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 448,
            height: 448,
            sprite_fraction: 0.18,
            antialias: true,
            background_fallback: BackgroundFallback::ProceduralClutter,
            object_fallback: ObjectFallback::ProceduralGlyph,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidConfig(format!(
                "canvas {}x{} smaller than 64x64",
                self.width, self.height
            )));
        }
        if !(self.sprite_fraction > 0.0 && self.sprite_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "sprite_fraction {} outside (0, 0.5]",
                self.sprite_fraction
            )));
        }
        Ok(())
    }

    pub fn sprite_side(&self) -> u32 {
        ((self.sprite_fraction * self.width.min(self.height) as f64).round() as u32).max(1)
    }
}

// ---------------------------------------------------------------------------
// Textures
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TextureKind {
    Stripes,
    Checker,
    ValueNoise,
    Gradient,
}

impl TextureKind {
    pub const ALL: [TextureKind; 4] = [
        TextureKind::Stripes,
        TextureKind::Checker,
        TextureKind::ValueNoise,
        TextureKind::Gradient,
    ];
}

fn random_color<R: Rng + ?Sized>(rng: &mut R) -> Rgb<u8> {
    Rgb([rng.gen(), rng.gen(), rng.gen()])
}

fn lerp_color(a: Rgb<u8>, b: Rgb<u8>, t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    Rgb(std::array::from_fn(|i| {
        (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8
    }))
}

/// Parameters of one texture instance, fully drawn up front so that a
/// texture is a pure function of its parameters and the target size.
#[derive(Clone, Debug)]
struct Texture {
    kind: TextureKind,
    a: Rgb<u8>,
    b: Rgb<u8>,
    /// Period (stripes, checker) or lattice cell size (noise), in pixels.
    scale: f64,
    angle: f64,
    noise_seed: u64,
}

impl Texture {
    fn sample<R: Rng + ?Sized>(kind: TextureKind, rng: &mut R) -> Self {
        Self {
            kind,
            a: random_color(rng),
            b: random_color(rng),
            scale: rng.gen_range(6.0..48.0),
            angle: rng.gen_range(0.0..PI),
            noise_seed: rng.gen(),
        }
    }

    fn render(&self, w: u32, h: u32) -> RgbImage {
        let (sin, cos) = self.angle.sin_cos();
        let noise = (self.kind == TextureKind::ValueNoise).then(|| ValueNoise::new(self.noise_seed, w, h, self.scale));
        RgbImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            match self.kind {
                TextureKind::Stripes => {
                    let u = fx * cos + fy * sin;
                    if (u / self.scale).floor() as i64 % 2 == 0 {
                        self.a
                    } else {
                        self.b
                    }
                }
                TextureKind::Checker => {
                    let cx = (fx / self.scale).floor() as i64;
                    let cy = (fy / self.scale).floor() as i64;
                    if (cx + cy).rem_euclid(2) == 0 {
                        self.a
                    } else {
                        self.b
                    }
                }
                TextureKind::ValueNoise => {
                    lerp_color(self.a, self.b, noise.as_ref().expect("noise lattice").at(fx, fy))
                }
                TextureKind::Gradient => {
                    let span = (w as f64 * cos.abs() + h as f64 * sin).max(1.0);
                    let u = (fx - if cos < 0.0 { w as f64 } else { 0.0 }) * cos + fy * sin;
                    lerp_color(self.a, self.b, u / span)
                }
            }
        })
    }
}

/// Two-octave bilinear value noise in [0, 1].
struct ValueNoise {
    octaves: Vec<(f64, usize, Vec<f64>)>,
}

impl ValueNoise {
    fn new(seed: u64, w: u32, h: u32, cell: f64) -> Self {
        let mut rng = rng::rng_from_seed(seed);
        let octaves = [cell, cell / 2.0]
            .iter()
            .map(|&c| {
                let c = c.max(2.0);
                let cols = (w as f64 / c).ceil() as usize + 2;
                let rows = (h as f64 / c).ceil() as usize + 2;
                let values = (0..cols * rows).map(|_| rng.gen::<f64>()).collect();
                (c, cols, values)
            })
            .collect();
        Self { octaves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let weights = [0.7, 0.3];
        self.octaves
            .iter()
            .zip(weights)
            .map(|((cell, cols, v), wgt)| {
                let (gx, gy) = (x / cell, y / cell);
                let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
                let (tx, ty) = (gx - ix as f64, gy - iy as f64);
                let at = |cx: usize, cy: usize| v[cy * cols + cx];
                let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
                let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
                wgt * (top * (1.0 - ty) + bottom * ty)
            })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Backgrounds
// ---------------------------------------------------------------------------

/// How a background will be produced; decided from the seed before any
/// pixel is drawn.
#[derive(Clone, Debug)]
pub enum BackgroundPlan {
    White,
    Solid(Rgb<u8>),
    Texture(TextureKind),
    Asset { pack: String, index: usize },
    Clutter { items: usize },
}

pub(crate) fn check_background_available(
    set: &BackgroundSet,
    assets: &AssetLibrary,
    fallback: BackgroundFallback,
) -> Result<()> {
    let Some(pack) = set.pack_name() else {
        return Ok(());
    };
    if assets.pack(pack)?.is_some() || fallback == BackgroundFallback::ProceduralClutter {
        return Ok(());
    }
    Err(Error::MissingAsset {
        pack: pack.to_string(),
        reason: "background pack not installed and procedural clutter disabled".into(),
    })
}

fn clutter_items(set: &BackgroundSet, rng: &mut BundleRng) -> usize {
    match set {
        BackgroundSet::I4 => rng.gen_range(3..=6),
        _ => rng.gen_range(25..=45),
    }
}

pub fn plan_background(
    set: &BackgroundSet,
    seed: u64,
    assets: &AssetLibrary,
    config: &RenderConfig,
) -> Result<BackgroundPlan> {
    let mut rng = rng::rng_from_seed(seed);
    Ok(match set {
        BackgroundSet::I1 => BackgroundPlan::White,
        BackgroundSet::I2 => BackgroundPlan::Solid(random_color(&mut rng)),
        BackgroundSet::I3 => BackgroundPlan::Texture(*TextureKind::ALL.choose(&mut rng).expect("non-empty")),
        BackgroundSet::I4 | BackgroundSet::I5 | BackgroundSet::Pack(_) => {
            let name = set.pack_name().expect("pack-backed set");
            match assets.pack(name)? {
                Some(pack) => BackgroundPlan::Asset {
                    pack: name.to_string(),
                    index: rng.gen_range(0..pack.all_images().len()),
                },
                None if config.background_fallback == BackgroundFallback::ProceduralClutter => {
                    BackgroundPlan::Clutter {
                        items: clutter_items(set, &mut rng),
                    }
                }
                None => {
                    return Err(Error::MissingAsset {
                        pack: name.to_string(),
                        reason: "background pack not installed and procedural clutter disabled".into(),
                    })
                }
            }
        }
    })
}

/// Renders the background of `set` for `seed`.
pub fn render_background(
    set: &BackgroundSet,
    seed: u64,
    assets: &AssetLibrary,
    config: &RenderConfig,
) -> Result<RgbImage> {
    let plan = plan_background(set, seed, assets, config)?;
    let (w, h) = (config.width, config.height);
    // Independent stream for pixel detail so plan decisions stay stable.
    let mut rng = rng::rng_from_seed(rng::mix64(seed ^ 0x6267_7069_7865_6c73));
    Ok(match plan {
        BackgroundPlan::White => RgbImage::from_pixel(w, h, Rgb([255, 255, 255])),
        BackgroundPlan::Solid(c) => RgbImage::from_pixel(w, h, c),
        BackgroundPlan::Texture(kind) => Texture::sample(kind, &mut rng).render(w, h),
        BackgroundPlan::Asset { pack, index } => {
            let pack = assets.pack(&pack)?.expect("planned from an installed pack");
            let img = &pack.all_images()[index];
            let scaled = imageops::resize(img.as_ref(), w, h, FilterType::Triangle);
            flatten(&scaled)
        }
        BackgroundPlan::Clutter { items } => render_clutter(items, w, h, &mut rng),
    })
}

fn flatten(img: &RgbaImage) -> RgbImage {
    let mut out = RgbImage::from_pixel(img.width(), img.height(), Rgb([255, 255, 255]));
    blend_onto(&mut out, img, 0, 0);
    out
}

fn render_clutter(items: usize, w: u32, h: u32, rng: &mut BundleRng) -> RgbImage {
    let base_kind = *TextureKind::ALL.choose(rng).expect("non-empty");
    let mut canvas = Texture::sample(base_kind, rng).render(w, h);
    let min_side = w.min(h) as f64;
    for _ in 0..items {
        let iw = (rng.gen_range(0.05..0.4) * min_side) as u32 + 1;
        let ih = (rng.gen_range(0.05..0.4) * min_side) as u32 + 1;
        let x0 = rng.gen_range(-(iw as i64) / 2..w as i64);
        let y0 = rng.gen_range(-(ih as i64) / 2..h as i64);
        let shape = if rng.gen_bool(0.5) {
            Geometry::Square
        } else {
            Geometry::Circle
        };
        let fill = if rng.gen_bool(0.4) {
            Fill::Texture(Texture::sample(*TextureKind::ALL.choose(rng).expect("non-empty"), rng))
        } else {
            Fill::Solid(random_color(rng))
        };
        let item = rasterize(shape, &fill, iw, ih, false);
        blend_onto(&mut canvas, &item, x0, y0);
    }
    canvas
}

// ---------------------------------------------------------------------------
// Sprites
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Geometry {
    Circle,
    Pentagon,
    Rectangle,
    Square,
    Triangle,
    Hexagon,
    Diamond,
    Star,
    Cross,
}

impl Geometry {
    fn from_shape_name(name: &str) -> Option<Self> {
        Some(match name {
            "circle" => Geometry::Circle,
            "pentagon" => Geometry::Pentagon,
            "rectangle" => Geometry::Rectangle,
            "square" => Geometry::Square,
            "triangle" => Geometry::Triangle,
            _ => return None,
        })
    }

    const GLYPHS: [Geometry; 9] = [
        Geometry::Circle,
        Geometry::Pentagon,
        Geometry::Rectangle,
        Geometry::Square,
        Geometry::Triangle,
        Geometry::Hexagon,
        Geometry::Diamond,
        Geometry::Star,
        Geometry::Cross,
    ];

    /// Polygon outline for the shapes tested by even-odd crossing.
    fn outline(self) -> Option<Vec<(f64, f64)>> {
        match self {
            Geometry::Triangle => Some(regular_polygon(3, 1.0)),
            Geometry::Pentagon => Some(regular_polygon(5, 1.0)),
            Geometry::Hexagon => Some(regular_polygon(6, 1.0)),
            Geometry::Star => Some(star_polygon()),
            _ => None,
        }
    }

    /// Containment test in sprite coordinates `u, v` in [-1, 1], `v` down.
    /// `outline` must be `self.outline()`.
    fn contains(self, outline: Option<&[(f64, f64)]>, u: f64, v: f64) -> bool {
        match self {
            Geometry::Circle => u * u + v * v <= 1.0,
            Geometry::Square => u.abs() <= 1.0 && v.abs() <= 1.0,
            Geometry::Rectangle => u.abs() <= 1.0 && v.abs() <= 1.0 / 1.6,
            Geometry::Diamond => u.abs() + v.abs() <= 1.0,
            Geometry::Cross => (u.abs() <= 0.3 && v.abs() <= 1.0) || (u.abs() <= 1.0 && v.abs() <= 0.3),
            Geometry::Triangle | Geometry::Pentagon | Geometry::Hexagon | Geometry::Star => {
                in_polygon(outline.expect("polygon outline"), u, v)
            }
        }
    }
}

/// Vertices of a regular polygon inscribed in radius `r`, first vertex up.
fn regular_polygon(n: usize, r: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let a = -PI / 2.0 + 2.0 * PI * k as f64 / n as f64;
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

fn star_polygon() -> Vec<(f64, f64)> {
    (0..10)
        .map(|k| {
            let r = if k % 2 == 0 { 1.0 } else { 0.45 };
            let a = -PI / 2.0 + PI * k as f64 / 5.0;
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Even-odd point in polygon.
fn in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

enum Fill {
    Solid(Rgb<u8>),
    Texture(Texture),
}

fn rasterize(shape: Geometry, fill: &Fill, w: u32, h: u32, antialias: bool) -> RgbaImage {
    let samples: &[f64] = if antialias {
        &[0.125, 0.375, 0.625, 0.875]
    } else {
        &[0.5]
    };
    let total = (samples.len() * samples.len()) as u32;
    let texture = match fill {
        Fill::Texture(t) => Some(t.render(w, h)),
        Fill::Solid(_) => None,
    };
    let outline = shape.outline();
    RgbaImage::from_fn(w, h, |x, y| {
        let hits = samples
            .iter()
            .flat_map(|sy| samples.iter().map(move |sx| (sx, sy)))
            .filter(|(sx, sy)| {
                let u = 2.0 * (x as f64 + *sx) / w as f64 - 1.0;
                let v = 2.0 * (y as f64 + *sy) / h as f64 - 1.0;
                shape.contains(outline.as_deref(), u, v)
            })
            .count() as u32;
        let alpha = ((hits * 255 + total / 2) / total) as u8;
        let c = match (&texture, fill) {
            (Some(t), _) => *t.get_pixel(x, y),
            (None, Fill::Solid(c)) => *c,
            (None, Fill::Texture(_)) => unreachable!(),
        };
        Rgba([c[0], c[1], c[2], alpha])
    })
}

/// A rendered foreground object: RGBA pixels, alpha is the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Sprite(pub RgbaImage);

impl Sprite {
    pub fn side(&self) -> u32 {
        self.0.width()
    }
}

fn glyph_sprite(category: &str, side: u32, antialias: bool) -> Sprite {
    let mut rng = rng::rng_from_seed(rng::hash_str(category));
    let shape = *Geometry::GLYPHS.choose(&mut rng).expect("non-empty");
    let kind = *TextureKind::ALL.choose(&mut rng).expect("non-empty");
    let mut texture = Texture::sample(kind, &mut rng);
    texture.scale = texture.scale.min(side as f64 / 3.0).max(3.0);
    Sprite(rasterize(shape, &Fill::Texture(texture), side, side, antialias))
}

fn asset_sprite(pack: &AssetPack, category: &str, style_seed: u64, side: u32) -> Option<Sprite> {
    let images = pack.images(category)?;
    let mut rng = rng::rng_from_seed(style_seed);
    let img: &Arc<RgbaImage> = images.choose(&mut rng)?;
    let scale = side as f64 / img.width().max(img.height()) as f64;
    let w = ((img.width() as f64 * scale).round() as u32).clamp(1, side);
    let h = ((img.height() as f64 * scale).round() as u32).clamp(1, side);
    let resized = imageops::resize(img.as_ref(), w, h, FilterType::Triangle);
    let mut canvas = RgbaImage::new(side, side);
    imageops::overlay(&mut canvas, &resized, ((side - w) / 2) as i64, ((side - h) / 2) as i64);
    Some(Sprite(canvas))
}

/// Renders one object of `category` from object set `set`.
///
/// Shapes get a random solid fill, textured shapes a random texture, pack
/// categories a pack image. Anything else becomes a glyph that depends only
/// on the category name, when glyph fallback is enabled.
pub fn render_object(
    category: &str,
    set: &ObjectSet,
    style_seed: u64,
    assets: &AssetLibrary,
    config: &RenderConfig,
) -> Result<Sprite> {
    let side = config.sprite_side();
    let mut rng = rng::rng_from_seed(style_seed);
    match set {
        ObjectSet::Shape | ObjectSet::TexturedShape => {
            if let Some(shape) = Geometry::from_shape_name(category) {
                let fill = if *set == ObjectSet::Shape {
                    Fill::Solid(random_color(&mut rng))
                } else {
                    let kind = *TextureKind::ALL.choose(&mut rng).expect("non-empty");
                    let mut t = Texture::sample(kind, &mut rng);
                    t.scale = t.scale.min(side as f64 / 3.0).max(3.0);
                    Fill::Texture(t)
                };
                return Ok(Sprite(rasterize(shape, &fill, side, side, config.antialias)));
            }
        }
        _ => {
            let pack_name = set.pack_name().expect("pack-backed set");
            if let Some(pack) = assets.pack(pack_name)? {
                if let Some(sprite) = asset_sprite(&pack, category, style_seed, side) {
                    return Ok(sprite);
                }
            }
        }
    }
    match config.object_fallback {
        ObjectFallback::ProceduralGlyph => Ok(glyph_sprite(category, side, config.antialias)),
        ObjectFallback::Error => Err(Error::InvalidConfig(format!(
            "no image for category {category:?} in object set {}",
            set.token()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Compositing
// ---------------------------------------------------------------------------

/// Pixel position of a pose's centre on a `w x h` canvas.
pub fn pose_to_pixel(pose: &Pose, w: u32, h: u32) -> (i64, i64) {
    (
        (pose.x() * (w - 1) as f64).round() as i64,
        (pose.y() * (h - 1) as f64).round() as i64,
    )
}

/// Top-left corner at which a sprite of side `side` centred on `pose` lands.
pub fn sprite_origin(pose: &Pose, side: u32, w: u32, h: u32) -> (i64, i64) {
    let (cx, cy) = pose_to_pixel(pose, w, h);
    (cx - (side / 2) as i64, cy - (side / 2) as i64)
}

fn blend_onto(canvas: &mut RgbImage, sprite: &RgbaImage, x0: i64, y0: i64) {
    let (cw, ch) = (canvas.width() as i64, canvas.height() as i64);
    for (sx, sy, px) in sprite.enumerate_pixels() {
        let (x, y) = (x0 + sx as i64, y0 + sy as i64);
        let a = px[3] as u32;
        if a == 0 || x < 0 || y < 0 || x >= cw || y >= ch {
            continue;
        }
        let dst = canvas.get_pixel_mut(x as u32, y as u32);
        for i in 0..3 {
            dst[i] = ((px[i] as u32 * a + dst[i] as u32 * (255 - a) + 127) / 255) as u8;
        }
    }
}

/// Draws sprites onto a copy of `background` in list order, so the first
/// object ends up bottom-most. Sprites may hang off the canvas edges.
pub fn compose(background: &RgbImage, objects: &[(&Sprite, &Pose)]) -> RgbImage {
    let mut canvas = background.clone();
    let (w, h) = canvas.dimensions();
    for (sprite, pose) in objects {
        let (x0, y0) = sprite_origin(pose, sprite.side(), w, h);
        blend_onto(&mut canvas, &sprite.0, x0, y0);
    }
    canvas
}

/// Renders one example image of a bundle onto a pre-rendered background.
pub fn render_example(
    bundle: &PromptBundle,
    example: &ExampleRecord,
    background: &RgbImage,
    assets: &AssetLibrary,
    config: &RenderConfig,
) -> Result<RgbImage> {
    let sprites = example
        .objects
        .iter()
        .map(|o| render_object(&o.category, bundle.family.objects(), o.style_seed, assets, config))
        .collect::<Result<Vec<_>>>()?;
    let placed: Vec<(&Sprite, &Pose)> = sprites.iter().zip(example.objects.iter().map(|o| &o.xi)).collect();
    Ok(compose(background, &placed))
}

/// Renders all example images of a bundle, demos first, query last.
pub fn render_bundle(bundle: &PromptBundle, assets: &AssetLibrary, config: &RenderConfig) -> Result<Vec<RgbImage>> {
    let background = render_background(bundle.family.background(), bundle.seed.background_seed, assets, config)?;
    bundle
        .examples()
        .map(|ex| render_example(bundle, ex, &background, assets, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cfg() -> RenderConfig {
        RenderConfig::default()
    }

    fn lib() -> AssetLibrary {
        AssetLibrary::empty()
    }

    fn pose(x: f64, y: f64) -> Pose {
        Pose::new(vec![x, y]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(RenderConfig { width: 63, ..cfg() }.validate().is_err());
        assert!(RenderConfig {
            sprite_fraction: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(RenderConfig {
            sprite_fraction: 0.51,
            ..cfg()
        }
        .validate()
        .is_err());
        assert_eq!(cfg().sprite_side(), 81);
    }

    #[test]
    fn white_background() {
        let img = render_background(&BackgroundSet::I1, 3, &lib(), &cfg()).unwrap();
        assert_eq!(img.dimensions(), (448, 448));
        assert!(img.pixels().all(|p| *p == Rgb([255, 255, 255])));
    }

    #[test]
    fn solid_background_is_uniform_and_seeded() {
        let a = render_background(&BackgroundSet::I2, 99, &lib(), &cfg()).unwrap();
        let first = *a.get_pixel(0, 0);
        assert!(a.pixels().all(|p| *p == first));
        assert_eq!(a, render_background(&BackgroundSet::I2, 99, &lib(), &cfg()).unwrap());
        assert_ne!(a, render_background(&BackgroundSet::I2, 100, &lib(), &cfg()).unwrap());
    }

    #[test]
    fn textured_backgrounds_use_every_generator() {
        let kinds: BTreeSet<TextureKind> = (0..100)
            .map(
                |seed| match plan_background(&BackgroundSet::I3, seed, &lib(), &cfg()).unwrap() {
                    BackgroundPlan::Texture(k) => k,
                    other => panic!("unexpected plan {other:?}"),
                },
            )
            .collect();
        assert!(kinds.len() >= 4);
        for kind in TextureKind::ALL {
            let img = Texture::sample(kind, &mut rng::rng_from_seed(5)).render(64, 64);
            let distinct: BTreeSet<[u8; 3]> = img.pixels().map(|p| p.0).collect();
            assert!(distinct.len() > 1, "{kind:?} rendered flat");
        }
    }

    #[test]
    fn clutter_fallback_and_error() {
        let img = render_background(&BackgroundSet::I5, 1, &lib(), &cfg()).unwrap();
        assert_eq!(img, render_background(&BackgroundSet::I5, 1, &lib(), &cfg()).unwrap());
        let strict = RenderConfig {
            background_fallback: BackgroundFallback::Error,
            ..cfg()
        };
        let err = render_background(&BackgroundSet::I4, 1, &lib(), &strict).unwrap_err();
        assert!(matches!(err, Error::MissingAsset { ref pack, .. } if pack == "i4"));
    }

    #[test]
    fn asset_backgrounds_fill_the_canvas() {
        let dir = tempfile::tempdir().unwrap();
        crate::assets::testing::write_pack(dir.path(), "i4", &[("desk", 2)]);
        let lib = AssetLibrary::at(dir.path());
        let config = RenderConfig {
            width: 64,
            height: 80,
            ..cfg()
        };
        let img = render_background(&BackgroundSet::I4, 7, &lib, &config).unwrap();
        assert_eq!(img.dimensions(), (64, 80));
        assert_eq!(img.get_pixel(10, 10)[2], 200);
    }

    #[test]
    fn square_fills_its_sprite() {
        let s = render_object("square", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        assert_eq!(s.0.dimensions(), (81, 81));
        let c = s.0.get_pixel(40, 40);
        assert!(s.0.pixels().all(|p| p[3] == 255 && p.0[..3] == c.0[..3]));
    }

    #[test]
    fn shape_geometry() {
        let circle = render_object("circle", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        assert_eq!(circle.0.get_pixel(0, 0)[3], 0);
        assert_eq!(circle.0.get_pixel(40, 40)[3], 255);
        let rect = render_object("rectangle", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        assert_eq!(rect.0.get_pixel(40, 2)[3], 0);
        assert_eq!(rect.0.get_pixel(1, 40)[3], 255);
        let tri = render_object("triangle", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        assert_eq!(tri.0.get_pixel(40, 5)[3], 255);
        assert_eq!(tri.0.get_pixel(3, 5)[3], 0);
        let penta = render_object("pentagon", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        assert_eq!(penta.0.get_pixel(40, 40)[3], 255);
        assert_eq!(penta.0.get_pixel(2, 78)[3], 0);
    }

    #[test]
    fn textured_circle_is_not_flat() {
        let s = render_object("circle", &ObjectSet::TexturedShape, 17, &lib(), &cfg()).unwrap();
        let inside: Vec<[u8; 3]> =
            s.0.pixels()
                .filter(|p| p[3] == 255)
                .map(|p| [p[0], p[1], p[2]])
                .collect();
        let mean: f64 = inside
            .iter()
            .map(|p| p[0] as f64 + p[1] as f64 + p[2] as f64)
            .sum::<f64>()
            / inside.len() as f64;
        let var: f64 = inside
            .iter()
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64 - mean).powi(2))
            .sum::<f64>()
            / inside.len() as f64;
        assert!(var > 0.0);
        assert_eq!(s.0.get_pixel(0, 0)[3], 0);
    }

    #[test]
    fn glyphs_depend_only_on_category() {
        let a = render_object("Heat Guns", &ObjectSet::Hard, 1, &lib(), &cfg()).unwrap();
        let b = render_object("Heat Guns", &ObjectSet::Hard, 2, &lib(), &cfg()).unwrap();
        assert_eq!(a, b);
        let c = render_object("Saws", &ObjectSet::Hard, 1, &lib(), &cfg()).unwrap();
        assert_ne!(a, c);
        let strict = RenderConfig {
            object_fallback: ObjectFallback::Error,
            ..cfg()
        };
        assert!(render_object("Heat Guns", &ObjectSet::Hard, 1, &lib(), &strict).is_err());
        assert!(render_object("blob", &ObjectSet::Shape, 1, &lib(), &strict).is_err());
    }

    #[test]
    fn pack_sprites_fit_the_sprite_box() {
        let dir = tempfile::tempdir().unwrap();
        crate::assets::testing::write_pack(dir.path(), "tool", &[("hammer", 3)]);
        let lib = AssetLibrary::at(dir.path());
        let s = render_object("hammer", &ObjectSet::Tool, 5, &lib, &cfg()).unwrap();
        assert_eq!(s.0.dimensions(), (81, 81));
        // 24x16 source scaled to 81x54, centred vertically.
        assert_eq!(s.0.get_pixel(40, 5)[3], 0);
        assert_eq!(s.0.get_pixel(40, 40)[3], 255);
    }

    #[test]
    fn sprite_centred_at_midpoint() {
        let bg = render_background(&BackgroundSet::I1, 0, &lib(), &cfg()).unwrap();
        let s = render_object("square", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        let p = pose(0.5, 0.5);
        let img = compose(&bg, &[(&s, &p)]);
        let (cx, cy) = pose_to_pixel(&p, 448, 448);
        assert_eq!((cx, cy), (224, 224));
        let changed: Vec<(u32, u32)> = img
            .enumerate_pixels()
            .filter(|(_, _, px)| **px != Rgb([255, 255, 255]))
            .map(|(x, y, _)| (x, y))
            .collect();
        let (minx, maxx) = (
            changed.iter().map(|c| c.0).min().unwrap(),
            changed.iter().map(|c| c.0).max().unwrap(),
        );
        let (miny, maxy) = (
            changed.iter().map(|c| c.1).min().unwrap(),
            changed.iter().map(|c| c.1).max().unwrap(),
        );
        assert_eq!((minx + maxx) / 2, 224);
        assert_eq!((miny + maxy) / 2, 224);
        assert_eq!(maxx - minx + 1, 81);
    }

    #[test]
    fn corner_sprites_clip_without_error() {
        let bg = render_background(&BackgroundSet::I1, 0, &lib(), &cfg()).unwrap();
        let s = render_object("square", &ObjectSet::Shape, 4, &lib(), &cfg()).unwrap();
        let img = compose(&bg, &[(&s, &pose(0.0, 0.0))]);
        assert_ne!(*img.get_pixel(0, 0), Rgb([255, 255, 255]));
        assert_eq!(*img.get_pixel(41, 41), Rgb([255, 255, 255]));
        assert_ne!(*img.get_pixel(40, 40), Rgb([255, 255, 255]));
        let img = compose(&bg, &[(&s, &pose(1.0, 1.0))]);
        assert_ne!(*img.get_pixel(447, 447), Rgb([255, 255, 255]));
    }

    #[test]
    fn distractors_only_touch_their_own_pixels() {
        let bg = render_background(&BackgroundSet::I3, 8, &lib(), &cfg()).unwrap();
        let target = render_object("circle", &ObjectSet::Shape, 1, &lib(), &cfg()).unwrap();
        let d1 = render_object("triangle", &ObjectSet::Shape, 2, &lib(), &cfg()).unwrap();
        let d2 = render_object("square", &ObjectSet::Shape, 3, &lib(), &cfg()).unwrap();
        let (pt, p1, p2) = (pose(0.3, 0.3), pose(0.35, 0.7), pose(0.8, 0.2));
        let one = compose(&bg, &[(&target, &pt)]);
        let three = compose(&bg, &[(&target, &pt), (&d1, &p1), (&d2, &p2)]);
        let mut distractor_mask = vec![false; (448 * 448) as usize];
        for (s, p) in [(&d1, &p1), (&d2, &p2)] {
            let (x0, y0) = sprite_origin(p, s.side(), 448, 448);
            for (sx, sy, px) in s.0.enumerate_pixels() {
                let (x, y) = (x0 + sx as i64, y0 + sy as i64);
                if px[3] > 0 && (0..448).contains(&x) && (0..448).contains(&y) {
                    distractor_mask[(y * 448 + x) as usize] = true;
                }
            }
        }
        let mut differing = 0;
        for (x, y, px) in three.enumerate_pixels() {
            if *px != *one.get_pixel(x, y) {
                assert!(
                    distractor_mask[(y * 448 + x) as usize],
                    "({x}, {y}) changed outside distractors"
                );
                differing += 1;
            }
        }
        assert!(differing > 0);
    }

    #[test]
    fn pixel_mapping_is_monotone() {
        let mut last = -1;
        for i in 0..=1000 {
            let (x, _) = pose_to_pixel(&pose(i as f64 / 1000.0, 0.5), 448, 448);
            assert!(x >= last);
            last = x;
        }
        assert_eq!(last, 447);
    }
}
