use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::prompt::QuestionTemplateSet;
use crate::render::RenderConfig;
use crate::sampler::SamplerConfig;

/// Everything besides the seed that determines a generated bundle and its
/// images. Stored verbatim in every family manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub sampler: SamplerConfig,
    pub render: RenderConfig,
    pub prompts: QuestionTemplateSet,
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.render.validate()?;
        self.prompts.validate()
    }
}
