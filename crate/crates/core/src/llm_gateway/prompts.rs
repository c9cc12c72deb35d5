//! Prompt templates with `{{name}}` placeholders.
//!
//! The bundled `*.v1.txt` assets are compiled in; a directory holding files
//! with the same names replaces them at runtime.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{GatewayError, GenerationMode, GenerationRequest, SelectionRequest, SummaryRequest};

pub const SUMMARIZE: &str = "summarize.v1.txt";
pub const SELECT: &str = "select.v1.txt";
pub const NAVIGATE: &str = "navigate.v1.txt";
pub const EXPLAIN: &str = "explain.v1.txt";

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    templates: BTreeMap<&'static str, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(SUMMARIZE, include_str!("../../assets/prompts/summarize.v1.txt").to_string());
        templates.insert(SELECT, include_str!("../../assets/prompts/select.v1.txt").to_string());
        templates.insert(NAVIGATE, include_str!("../../assets/prompts/navigate.v1.txt").to_string());
        templates.insert(EXPLAIN, include_str!("../../assets/prompts/explain.v1.txt").to_string());
        PromptTemplates { templates }
    }
}

impl PromptTemplates {
    /// Bundled templates overridden by any same-named files in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, GatewayError> {
        let mut out = Self::default();
        for (name, body) in out.templates.iter_mut() {
            let path = dir.join(name);
            if path.exists() {
                *body = fs::read_to_string(&path)
                    .map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(out)
    }

    pub fn template(&self, name: &str) -> &str {
        &self.templates[name]
    }

    pub fn summarize(&self, req: &SummaryRequest) -> String {
        let children: Vec<String> = req
            .child_summaries()
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect();
        render(
            self.template(SUMMARIZE),
            &[
                ("count", req.child_summaries().len().to_string()),
                ("level", req.level().to_string()),
                ("budget", req.budget().to_string()),
                ("children", children.join("\n")),
            ],
        )
    }

    pub fn select(&self, req: &SelectionRequest) -> String {
        let candidates: Vec<String> = req
            .candidates()
            .iter()
            .map(|c| format!("[{}] {}", c.id, c.description))
            .collect();
        let none_rule = if req.allow_none() {
            "If no option fits at all, reply NONE."
        } else {
            "You must choose one of the options."
        };
        render(
            self.template(SELECT),
            &[
                ("query", req.query().to_string()),
                ("none_rule", none_rule.to_string()),
                ("candidates", candidates.join("\n")),
                ("correction", correction_text(req.correction())),
            ],
        )
    }

    pub fn generate(&self, req: &GenerationRequest) -> String {
        let chains: Vec<String> = req
            .chains()
            .iter()
            .enumerate()
            .map(|(i, c)| format!("Chain {}:\n{}", i + 1, c.rendering))
            .collect();
        let name = match req.mode() {
            GenerationMode::Navigate => NAVIGATE,
            GenerationMode::Explain => EXPLAIN,
        };
        render(
            self.template(name),
            &[
                ("query", req.query().to_string()),
                ("chains", chains.join("\n\n")),
                ("correction", correction_text(req.correction())),
            ],
        )
    }
}

fn correction_text(note: Option<&str>) -> String {
    note.map(|n| format!("Your previous reply was not usable: {n}"))
        .unwrap_or_default()
}

/// Replaces every `{{key}}`; unknown placeholders are left as-is.
pub fn render(template: &str, values: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}
