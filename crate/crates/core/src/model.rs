//! Value types for task families, decision boundaries, poses and bundles.
//!
//! Everything here is immutable once constructed. Constructors check the
//! invariants and deserialization goes through the same constructors, so a
//! value that exists has already been validated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary answer of one example. Serialized as `0` / `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    No,
    Yes,
}

impl Label {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::Yes
        } else {
            Label::No
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::No => 0,
            Label::Yes => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::No => Label::Yes,
            Label::Yes => Label::No,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::No),
            1 => Ok(Label::Yes),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// Background image set. The five built-in levels go from plain white to
/// cluttered industrial scenes; `Pack` names a user-supplied asset pack.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackgroundSet {
    I1,
    I2,
    I3,
    I4,
    I5,
    Pack(String),
}

impl BackgroundSet {
    pub const BUILTIN: [BackgroundSet; 5] = [
        BackgroundSet::I1,
        BackgroundSet::I2,
        BackgroundSet::I3,
        BackgroundSet::I4,
        BackgroundSet::I5,
    ];

    pub fn token(&self) -> String {
        match self {
            BackgroundSet::I1 => "i1".into(),
            BackgroundSet::I2 => "i2".into(),
            BackgroundSet::I3 => "i3".into(),
            BackgroundSet::I4 => "i4".into(),
            BackgroundSet::I5 => "i5".into(),
            BackgroundSet::Pack(name) => format!("pack.{name}"),
        }
    }

    /// Name of the asset pack that backs this set, if it is pack-backed.
    pub fn pack_name(&self) -> Option<&str> {
        match self {
            BackgroundSet::I4 => Some("i4"),
            BackgroundSet::I5 => Some("i5"),
            BackgroundSet::Pack(name) => Some(name),
            _ => None,
        }
    }

    fn from_token(tok: &str) -> Option<Self> {
        Some(match tok {
            "i1" => BackgroundSet::I1,
            "i2" => BackgroundSet::I2,
            "i3" => BackgroundSet::I3,
            "i4" => BackgroundSet::I4,
            "i5" => BackgroundSet::I5,
            _ => BackgroundSet::Pack(parse_pack_token(tok)?),
        })
    }
}

/// Foreground object category set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectSet {
    Easy,
    Shape,
    TexturedShape,
    Tool,
    Hard,
    Pack(String),
}

impl ObjectSet {
    pub const BUILTIN: [ObjectSet; 5] = [
        ObjectSet::Easy,
        ObjectSet::Shape,
        ObjectSet::TexturedShape,
        ObjectSet::Tool,
        ObjectSet::Hard,
    ];

    pub fn token(&self) -> String {
        match self {
            ObjectSet::Easy => "easy".into(),
            ObjectSet::Shape => "shape".into(),
            ObjectSet::TexturedShape => "tshape".into(),
            ObjectSet::Tool => "tool".into(),
            ObjectSet::Hard => "hard".into(),
            ObjectSet::Pack(name) => format!("pack.{name}"),
        }
    }

    pub fn pack_name(&self) -> Option<&str> {
        match self {
            ObjectSet::Easy => Some("easy"),
            ObjectSet::Tool => Some("tool"),
            ObjectSet::Hard => Some("hard"),
            ObjectSet::Pack(name) => Some(name),
            ObjectSet::Shape | ObjectSet::TexturedShape => None,
        }
    }

    fn from_token(tok: &str) -> Option<Self> {
        Some(match tok {
            "easy" => ObjectSet::Easy,
            "shape" => ObjectSet::Shape,
            "tshape" => ObjectSet::TexturedShape,
            "tool" => ObjectSet::Tool,
            "hard" => ObjectSet::Hard,
            _ => ObjectSet::Pack(parse_pack_token(tok)?),
        })
    }
}

fn parse_pack_token(tok: &str) -> Option<String> {
    let name = tok.strip_prefix("pack.")?;
    let ok = !name.is_empty()
        && name
            .split('.')
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));
    ok.then(|| name.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// Question uses an uninformative synonym ("marker", "beacon", ...).
    None,
    /// Question names the target object's category.
    Guide,
}

impl TextMode {
    pub fn token(self) -> &'static str {
        match self {
            TextMode::None => "none",
            TextMode::Guide => "guide",
        }
    }
}

/// Parameters indexing a task family: background set, object set, number
/// of foreground objects and text mode.
///
/// The canonical string form is `bg-<set>_obj-<set>_m<count>_text-<mode>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaskFamilyParams {
    background: BackgroundSet,
    objects: ObjectSet,
    m: u32,
    text: TextMode,
}

impl TaskFamilyParams {
    pub fn new(background: BackgroundSet, objects: ObjectSet, m: u32, text: TextMode) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("object count m must be at least 1".into()));
        }
        Ok(Self {
            background,
            objects,
            m,
            text,
        })
    }

    pub fn background(&self) -> &BackgroundSet {
        &self.background
    }

    pub fn objects(&self) -> &ObjectSet {
        &self.objects
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn text(&self) -> TextMode {
        self.text
    }

    pub fn with_background(&self, background: BackgroundSet) -> Self {
        Self {
            background,
            ..self.clone()
        }
    }

    pub fn with_objects(&self, objects: ObjectSet) -> Self {
        Self {
            objects,
            ..self.clone()
        }
    }

    pub fn with_m(&self, m: u32) -> Result<Self> {
        Self::new(self.background.clone(), self.objects.clone(), m, self.text)
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TaskFamilyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "bg-{}_obj-{}_m{}_text-{}",
            self.background.token(),
            self.objects.token(),
            self.m,
            self.text.token()
        )
    }
}

impl FromStr for TaskFamilyParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |segment: &str, reason: &str| Error::FamilyId {
            input: s.to_string(),
            segment: segment.to_string(),
            reason: reason.to_string(),
        };
        let segments: Vec<&str> = s.split('_').collect();
        if segments.len() != 4 {
            return Err(bad(s, "expected four '_'-separated segments"));
        }
        let background = segments[0]
            .strip_prefix("bg-")
            .and_then(BackgroundSet::from_token)
            .ok_or_else(|| bad(segments[0], "unknown background set"))?;
        let objects = segments[1]
            .strip_prefix("obj-")
            .and_then(ObjectSet::from_token)
            .ok_or_else(|| bad(segments[1], "unknown object set"))?;
        let m = segments[2]
            .strip_prefix('m')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) && !d.starts_with('0'))
            .and_then(|d| d.parse::<u32>().ok())
            .ok_or_else(|| bad(segments[2], "expected m<positive integer>"))?;
        let text = match segments[3] {
            "text-none" => TextMode::None,
            "text-guide" => TextMode::Guide,
            other => return Err(bad(other, "unknown text mode")),
        };
        Self::new(background, objects, m, text)
    }
}

impl From<TaskFamilyParams> for String {
    fn from(p: TaskFamilyParams) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for TaskFamilyParams {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Direction of a decision boundary. Serialized as `-1` / `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Positive, Sign::Negative];

    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Positive => Sign::Negative,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Negative => -1,
            Sign::Positive => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Sign::Negative),
            1 => Ok(Sign::Positive),
            other => Err(format!("sign must be -1 or 1, got {other}")),
        }
    }
}

/// Hidden axis-aligned threshold rule `P(xi) = [sign * (xi[dim] - tau) > 0]`.
///
/// `dim` is 1-based: 1 is the horizontal image axis, 2 the vertical one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundaryFields", into = "BoundaryFields")]
pub struct DecisionBoundary {
    dim: usize,
    tau: f64,
    sign: Sign,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundaryFields {
    dim: usize,
    tau: f64,
    sign: Sign,
    epsilon: f64,
}

impl DecisionBoundary {
    /// Builds a boundary whose threshold leaves room for an `epsilon` margin
    /// on both sides: `2 eps <= tau <= 1 - 2 eps`.
    pub fn new(dim: usize, tau: f64, sign: Sign, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("boundary dimension is 1-based".into()));
        }
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 0.25)")));
        }
        if !(tau >= 2.0 * epsilon && tau <= 1.0 - 2.0 * epsilon) {
            return Err(Error::InvalidArgument(format!(
                "tau {tau} outside [{}, {}]",
                2.0 * epsilon,
                1.0 - 2.0 * epsilon
            )));
        }
        Ok(Self {
            dim,
            tau,
            sign,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn flipped(&self) -> Self {
        Self {
            sign: self.sign.flipped(),
            ..*self
        }
    }

    fn coordinate(&self, pose: &Pose) -> Result<f64> {
        pose.coords().get(self.dim - 1).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "pose has {} dimensions but boundary uses dimension {}",
                pose.dims(),
                self.dim
            ))
        })
    }

    /// Label of `pose` under this boundary. Points exactly on the threshold
    /// are labelled 0.
    pub fn classify(&self, pose: &Pose) -> Result<Label> {
        let x = self.coordinate(pose)?;
        Ok(Label::from_bool(self.sign.value() * (x - self.tau) > 0.0))
    }

    /// Distance `|xi[dim] - tau|` of the pose from the threshold.
    pub fn margin(&self, pose: &Pose) -> Result<f64> {
        Ok((self.coordinate(pose)? - self.tau).abs())
    }
}

impl From<DecisionBoundary> for BoundaryFields {
    fn from(b: DecisionBoundary) -> Self {
        Self {
            dim: b.dim,
            tau: b.tau,
            sign: b.sign,
            epsilon: b.epsilon,
        }
    }
}

impl TryFrom<BoundaryFields> for DecisionBoundary {
    type Error = Error;

    fn try_from(f: BoundaryFields) -> Result<Self> {
        Self::new(f.dim, f.tau, f.sign, f.epsilon)
    }
}

/// Normalized object position in `[0, 1]^D`. Component 0 runs left to
/// right, component 1 top to bottom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pose(Vec<f64>);

impl Pose {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("pose needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidArgument(format!("pose coordinate {bad} outside [0, 1]")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    /// Vertical coordinate; poses of dimension 1 are drawn on the middle row.
    pub fn y(&self) -> f64 {
        self.0.get(1).copied().unwrap_or(0.5)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Pose> for Vec<f64> {
    fn from(p: Pose) -> Vec<f64> {
        p.0
    }
}

impl TryFrom<Vec<f64>> for Pose {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pose::new(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: String,
    pub xi: Pose,
    pub is_target: bool,
    pub style_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub label: Label,
    pub objects: Vec<ObjectInstance>,
    /// Image path relative to the family directory.
    pub image: String,
    pub example_seed: u64,
}

impl ExampleRecord {
    pub fn target(&self) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.is_target)
    }
}

/// Provenance needed to re-derive a bundle's RNG stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub split: String,
    pub bundle_index: u64,
    pub stream_seed: u64,
    pub background_seed: u64,
}

/// One in-context instance: N-1 labelled demonstrations and a query, all
/// sharing a background, a question and a hidden boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub bundle_id: String,
    pub family: TaskFamilyParams,
    pub seed: SeedInfo,
    pub boundary: DecisionBoundary,
    pub target_class: String,
    pub question: String,
    pub prompt_text: String,
    pub demos: Vec<ExampleRecord>,
    pub query: ExampleRecord,
}

impl PromptBundle {
    pub fn examples(&self) -> impl Iterator<Item = &ExampleRecord> {
        self.demos.iter().chain(std::iter::once(&self.query))
    }

    pub fn n_examples(&self) -> usize {
        self.demos.len() + 1
    }

    /// Checks the structural invariants every bundle must satisfy. Returns
    /// one message per violation.
    pub fn structural_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let m = self.family.m() as usize;
        let ones = self.demos.iter().filter(|d| d.label == Label::Yes).count();
        let zeros = self.demos.len() - ones;
        let half = self.n_examples() / 2;
        if ones != half || zeros != half {
            issues.push(format!("demo labels unbalanced: {ones} yes / {zeros} no"));
        }
        for (k, ex) in self.examples().enumerate() {
            if ex.objects.len() != m {
                issues.push(format!("example {k} has {} objects, expected {m}", ex.objects.len()));
            }
            let targets = ex.objects.iter().filter(|o| o.is_target).count();
            if targets != 1 {
                issues.push(format!("example {k} has {targets} target objects"));
            }
            match ex.target() {
                Some(t) if t.category != self.target_class => {
                    issues.push(format!("example {k} target category differs from bundle target"))
                }
                Some(t) => match self.boundary.classify(&t.xi) {
                    Ok(l) if l != ex.label => issues.push(format!("example {k} label disagrees with its target pose")),
                    Err(e) => issues.push(format!("example {k}: {e}")),
                    _ => {}
                },
                None => {}
            }
        }
        let placeholders = self.prompt_text.matches("<image>").count();
        if placeholders != self.n_examples() {
            issues.push(format!(
                "prompt has {placeholders} image placeholders for {} examples",
                self.n_examples()
            ));
        }
        issues
    }
}
