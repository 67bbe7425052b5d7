//! Question sampling and the interleaved prompt layout.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, TextMode};

pub const IMAGE_PLACEHOLDER: &str = "<image>";
pub const PROMPT_HEADER: &str = "Please answer the following question based on the provided examples.";

const FIDUCIAL: &str = "{fiducial}";
const DESCRIPTION: &str = "{description}";

/// Question templates with their substitution vocabularies.
///
/// The default template list contains the `Are the ...` row twice, so it is
/// drawn twice as often as the others.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionTemplateSet {
    pub templates: Vec<String>,
    pub fiducial_synonyms: Vec<String>,
    pub descriptions: Vec<String>,
}

impl Default for QuestionTemplateSet {
    fn default() -> Self {
        let templates = [
            "Is the {fiducial} {description}?",
            "Are the {fiducial} {description}?",
            "Are the {fiducial} {description}?",
            "Can you see if the {fiducial} is {description}?",
            "Is there a problem with the {fiducial}?",
            "Look at the {fiducial}. Is it {description}?",
            "Find the {fiducial}. Is it {description}?",
            "Can you see the {fiducial}? Is it {description}?",
            "Is the {fiducial} properly positioned?",
            "Is the {fiducial} correctly aligned?",
            "Is the {fiducial} in the correct position?",
            "Can you see if the {fiducial} is in the correct position?",
            "Is the {fiducial} in the right place?",
            "Find the {fiducial}. Is it in the right place?",
            "Can you see the {fiducial}? Is it in the right place?",
            "Is the {fiducial} in the right position?",
        ];
        let synonyms = [
            "fiducial",
            "marker",
            "landmark",
            "beacon",
            "indicator",
            "reference mark",
        ];
        let descriptions = [
            "aligned",
            "in position",
            "in the right place",
            "out of place",
            "properly placed",
        ];
        Self {
            templates: templates.iter().map(|s| s.to_string()).collect(),
            fiducial_synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
            descriptions: descriptions.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl QuestionTemplateSet {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Error::InvalidConfig(format!("question {what} list is empty"));
        if self.templates.is_empty() {
            return Err(empty("template"));
        }
        if self.fiducial_synonyms.is_empty() {
            return Err(empty("fiducial synonym"));
        }
        if self.descriptions.is_empty() {
            return Err(empty("description"));
        }
        for t in &self.templates {
            let stripped = t.replace(FIDUCIAL, "").replace(DESCRIPTION, "");
            if stripped.contains('{') || stripped.contains('}') {
                return Err(Error::InvalidConfig(format!(
                    "template {t:?} has an unknown placeholder"
                )));
            }
            if t.contains('\n') || t.contains(IMAGE_PLACEHOLDER) {
                return Err(Error::InvalidConfig(format!(
                    "template {t:?} would break the prompt layout"
                )));
            }
        }
        Ok(())
    }

    /// Samples the question shared by every example of a bundle.
    ///
    /// In guide mode the fiducial slot is filled with `target_class`
    /// verbatim; otherwise with a random synonym.
    pub fn build_question<R: Rng + ?Sized>(&self, mode: TextMode, target_class: &str, rng: &mut R) -> Result<String> {
        if mode == TextMode::Guide && target_class.is_empty() {
            return Err(Error::InvalidArgument("guide mode needs a target category name".into()));
        }
        let template = self
            .templates
            .choose(rng)
            .ok_or_else(|| Error::InvalidConfig("no templates".into()))?;
        let fiducial = match mode {
            TextMode::Guide => target_class,
            TextMode::None => self
                .fiducial_synonyms
                .choose(rng)
                .ok_or_else(|| Error::InvalidConfig("no synonyms".into()))?,
        };
        // Draw the description even for templates without the slot so the
        // number of RNG draws does not depend on the template picked.
        let description = self
            .descriptions
            .choose(rng)
            .ok_or_else(|| Error::InvalidConfig("no descriptions".into()))?;
        Ok(template.replace(FIDUCIAL, fiducial).replace(DESCRIPTION, description))
    }
}

pub fn label_to_answer(label: Label) -> &'static str {
    match label {
        Label::Yes => "Yes",
        Label::No => "No",
    }
}

/// Inverse of [`label_to_answer`], ignoring case and surrounding whitespace.
pub fn answer_to_label(answer: &str) -> Option<Label> {
    let a = answer.trim();
    if a.eq_ignore_ascii_case("yes") {
        Some(Label::Yes)
    } else if a.eq_ignore_ascii_case("no") {
        Some(Label::No)
    } else {
        None
    }
}

/// Renders the full interleaved prompt: a header, one block per
/// demonstration, then the query block ending in `"Answer: "`.
pub fn build_prompt_text(question: &str, demo_labels: &[Label]) -> String {
    let mut out = String::new();
    out.push_str(PROMPT_HEADER);
    out.push_str("\n\n");
    for (k, label) in demo_labels.iter().enumerate() {
        out.push_str(&format!(
            "Example {}:\n{IMAGE_PLACEHOLDER}\nQuestion: {question}\nAnswer: {}\n\n",
            k + 1,
            label_to_answer(*label)
        ));
    }
    out.push_str(&format!("Query:\n{IMAGE_PLACEHOLDER}\nQuestion: {question}\nAnswer: "));
    out
}

/// Parses a prompt produced by [`build_prompt_text`] back into its question
/// and demonstration labels.
pub fn parse_prompt_text(text: &str) -> Result<(String, Vec<Label>)> {
    let bad = |why: &str| Error::InvalidArgument(format!("malformed prompt text: {why}"));
    let body = text
        .strip_prefix(PROMPT_HEADER)
        .and_then(|t| t.strip_prefix("\n\n"))
        .ok_or_else(|| bad("missing header"))?;
    let (blocks, query) = body.rsplit_once("Query:\n").ok_or_else(|| bad("missing query block"))?;
    let query_question = query
        .strip_prefix(&format!("{IMAGE_PLACEHOLDER}\nQuestion: "))
        .and_then(|q| q.strip_suffix("\nAnswer: "))
        .ok_or_else(|| bad("query block layout"))?;

    let mut labels = Vec::new();
    let mut rest = blocks;
    while !rest.is_empty() {
        let header = format!("Example {}:\n{IMAGE_PLACEHOLDER}\nQuestion: ", labels.len() + 1);
        let block = rest.strip_prefix(&header).ok_or_else(|| bad("example header"))?;
        let (question, after) = block.split_once("\nAnswer: ").ok_or_else(|| bad("example answer"))?;
        if question != query_question {
            return Err(bad("question differs between examples"));
        }
        let (answer, after) = after.split_once("\n\n").ok_or_else(|| bad("example terminator"))?;
        labels.push(
            answer_to_label(answer)
                .filter(|_| answer == "Yes" || answer == "No")
                .ok_or_else(|| bad("answer"))?,
        );
        rest = after;
    }
    Ok((query_question.to_string(), labels))
}
