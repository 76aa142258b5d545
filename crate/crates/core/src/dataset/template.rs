use std::collections::BTreeMap;

use super::InstructionRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("no template with id `{0}`")]
    MissingTemplate(String),
    #[error("template `{template}` uses unknown slot `{slot}`")]
    UnknownSlot { template: String, slot: String },
    #[error("template `{template}` needs slot `{slot}`, which the record leaves empty")]
    EmptySlot { template: String, slot: String },
    #[error("template `{0}` has an unbalanced brace")]
    Brace(String),
}

/// Named instruction templates with `{slot}` placeholders. Slots:
/// `instruction`, `selfies`, `task_id`, `task_group`, `source`. `{{` and
/// `}}` produce literal braces.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl TemplateSet {
    pub fn new() -> TemplateSet {
        TemplateSet::default()
    }

    /// A set holding the `identity` template (`{instruction}`).
    pub fn with_identity() -> TemplateSet {
        let mut t = TemplateSet::new();
        t.insert("identity", "{instruction}");
        t
    }

    pub fn insert(&mut self, id: &str, text: &str) {
        self.templates.insert(id.to_string(), text.to_string());
    }

    pub fn from_map(templates: BTreeMap<String, String>) -> TemplateSet {
        TemplateSet { templates }
    }
}

pub fn render_instruction(set: &TemplateSet, template_id: &str, record: &InstructionRecord) -> Result<String, TemplateError> {
    let text = set.templates.get(template_id).ok_or_else(|| TemplateError::MissingTemplate(template_id.to_string()))?;
    let brace = || TemplateError::Brace(template_id.to_string());
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                out.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                out.push('}');
            }
            '}' => return Err(brace()),
            '{' => {
                let mut slot = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) => slot.push(ch),
                        None => return Err(brace()),
                    }
                }
                let value = match slot.as_str() {
                    "instruction" => record.instruction.as_str(),
                    "task_id" => record.task_id.as_str(),
                    "task_group" => record.task_group.as_str(),
                    "source" => record.source.as_str(),
                    "selfies" => record.input_selfies.as_deref().ok_or_else(|| TemplateError::EmptySlot {
                        template: template_id.to_string(),
                        slot: slot.clone(),
                    })?,
                    _ => return Err(TemplateError::UnknownSlot { template: template_id.to_string(), slot }),
                };
                out.push_str(value);
            }
            _ => out.push(c),
        }
    }
    Ok(out)
}
