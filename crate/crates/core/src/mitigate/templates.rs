//! Prompt templates with named `{placeholder}` slots. Placeholder sets are
//! validated at load: required slots must appear, unknown slots are
//! rejected. Default templates ship embedded; files with the same names can
//! override them from a directory.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Template {
    text: String,
}

impl Template {
    /// Validate `text` against the stage's placeholder contract.
    pub fn new(text: &str, required: &[&str], optional: &[&str]) -> Result<Template> {
        let found = placeholders_in(text);
        for need in required {
            if !found.contains(*need) {
                return Err(Error::Config(format!(
                    "template is missing required placeholder {{{need}}}"
                )));
            }
        }
        let allowed: BTreeSet<&str> = required.iter().chain(optional).copied().collect();
        for name in &found {
            if !allowed.contains(name.as_str()) {
                return Err(Error::Config(format!(
                    "template has unknown placeholder {{{name}}}"
                )));
            }
        }
        Ok(Template {
            text: text.to_string(),
        })
    }

    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.clone();
        for (name, value) in values {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }
}

/// `{lowercase_identifier}` occurrences.
fn placeholders_in(text: &str) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(close) = text[i + 1..].find('}') {
                let name = &text[i + 1..i + 1 + close];
                if !name.is_empty()
                    && name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c == '_')
                {
                    found.insert(name.to_string());
                    i += close + 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

/// The four verification-pipeline stage templates.
#[derive(Debug, Clone)]
pub struct CoveTemplates {
    pub draft: Template,
    pub questions: Template,
    pub answers: Template,
    pub final_stage: Template,
}

impl CoveTemplates {
    pub fn defaults() -> CoveTemplates {
        CoveTemplates::from_texts(
            include_str!("templates/cove_draft.txt"),
            include_str!("templates/cove_questions.txt"),
            include_str!("templates/cove_answers.txt"),
            include_str!("templates/cove_final.txt"),
        )
        .expect("embedded templates are valid")
    }

    pub fn from_texts(
        draft: &str,
        questions: &str,
        answers: &str,
        final_stage: &str,
    ) -> Result<CoveTemplates> {
        Ok(CoveTemplates {
            draft: Template::new(draft, &["problem"], &[])?,
            questions: Template::new(questions, &["draft"], &["problem"])?,
            answers: Template::new(answers, &["questions"], &["problem", "draft"])?,
            final_stage: Template::new(final_stage, &["draft", "qa_pairs"], &["problem"])?,
        })
    }

    /// Load `cove_draft.txt`, `cove_questions.txt`, `cove_answers.txt`,
    /// `cove_final.txt` from a directory.
    pub fn load_dir(dir: &Path) -> Result<CoveTemplates> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name)).map_err(|e| Error::Load {
                line: None,
                message: format!("cannot read template {name}: {e}"),
            })
        };
        CoveTemplates::from_texts(
            &read("cove_draft.txt")?,
            &read("cove_questions.txt")?,
            &read("cove_answers.txt")?,
            &read("cove_final.txt")?,
        )
    }
}

/// Judge prompt templates (technique extraction, constraint checks,
/// coherence rating).
#[derive(Debug, Clone)]
pub struct JudgeTemplates {
    pub techniques: Template,
    pub constraints: Template,
    pub coherence: Template,
}

impl JudgeTemplates {
    pub fn defaults() -> JudgeTemplates {
        JudgeTemplates::from_texts(
            include_str!("templates/judge_techniques.txt"),
            include_str!("templates/judge_constraints.txt"),
            include_str!("templates/judge_coherence.txt"),
        )
        .expect("embedded templates are valid")
    }

    pub fn from_texts(techniques: &str, constraints: &str, coherence: &str) -> Result<JudgeTemplates> {
        Ok(JudgeTemplates {
            techniques: Template::new(techniques, &["output"], &[])?,
            constraints: Template::new(constraints, &["story", "constraints"], &[])?,
            coherence: Template::new(coherence, &["story", "reference"], &[])?,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<JudgeTemplates> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name)).map_err(|e| Error::Load {
                line: None,
                message: format!("cannot read template {name}: {e}"),
            })
        };
        JudgeTemplates::from_texts(
            &read("judge_techniques.txt")?,
            &read("judge_constraints.txt")?,
            &read("judge_coherence.txt")?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        CoveTemplates::defaults();
        JudgeTemplates::defaults();
    }

    #[test]
    fn missing_required_placeholder_rejected() {
        assert!(matches!(
            Template::new("no slots here", &["problem"], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        assert!(matches!(
            Template::new("{problem} and {bogus}", &["problem"], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn render_replaces_all_occurrences() {
        let t = Template::new("{a} then {a} then {b}", &["a", "b"], &[]).unwrap();
        assert_eq!(t.render(&[("a", "x"), ("b", "y")]), "x then x then y");
    }

    #[test]
    fn non_placeholder_braces_ignored() {
        let t = Template::new("code {problem} uses {X} and {1}", &["problem"], &[]).unwrap();
        assert!(t.render(&[("problem", "p")]).contains("{X}"));
    }
}
