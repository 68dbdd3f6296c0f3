//! Chain-of-verification pipeline: draft, generate verification questions,
//! answer them, produce the refined final response. Stages run strictly in
//! order; each prompt embeds all prior stage outputs.

use super::generator::Generator;
use super::templates::CoveTemplates;
use crate::error::{Error, Result};

/// How stage 3 answers the questions: one batched call (four round-trips
/// total) or one call per question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoveMode {
    #[default]
    Batched,
    PerQuestion,
}

#[derive(Debug, Clone)]
pub struct CoVeTranscript {
    pub draft: String,
    pub verification_questions: Vec<String>,
    pub verification_answers: Vec<String>,
    pub final_text: String,
    /// The four rendered prompts in stage order (per-question stage-3
    /// prompts are joined with `---`).
    pub stage_prompts: [String; 4],
}

impl CoVeTranscript {
    /// "Q: ...\nA: ..." blocks in question order.
    pub fn qa_pairs(&self) -> String {
        self.verification_questions
            .iter()
            .zip(&self.verification_answers)
            .map(|(q, a)| format!("Q: {q}\nA: {a}"))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

pub fn cove_run(
    problem_prompt: &str,
    generator: &dyn Generator,
    templates: &CoveTemplates,
    mode: CoveMode,
) -> Result<CoVeTranscript> {
    // stage 1: draft
    let p1 = templates.draft.render(&[("problem", problem_prompt)]);
    let draft = call(generator, &p1, 1)?;

    // stage 2: verification questions
    let p2 = templates
        .questions
        .render(&[("problem", problem_prompt), ("draft", &draft)]);
    let raw_questions = call(generator, &p2, 2)?;
    let questions = parse_list_items(&raw_questions).map_err(|msg| Error::Pipeline {
        stage: 2,
        message: msg,
    })?;
    if questions.is_empty() {
        return Err(Error::Pipeline {
            stage: 2,
            message: "no verification questions parsed from stage-2 reply".into(),
        });
    }

    // stage 3: answers
    let (p3, answers) = match mode {
        CoveMode::Batched => {
            let numbered = questions
                .iter()
                .enumerate()
                .map(|(i, q)| format!("{}. {q}", i + 1))
                .collect::<Vec<_>>()
                .join("\n");
            let p3 = templates.answers.render(&[
                ("problem", problem_prompt),
                ("draft", &draft),
                ("questions", &numbered),
            ]);
            let raw = call(generator, &p3, 3)?;
            let answers = parse_list_items(&raw).map_err(|msg| Error::Pipeline {
                stage: 3,
                message: msg,
            })?;
            if answers.len() != questions.len() {
                return Err(Error::Pipeline {
                    stage: 3,
                    message: format!(
                        "{} answers parsed for {} questions",
                        answers.len(),
                        questions.len()
                    ),
                });
            }
            (p3, answers)
        }
        CoveMode::PerQuestion => {
            let mut prompts = Vec::new();
            let mut answers = Vec::new();
            for q in &questions {
                let p = templates.answers.render(&[
                    ("problem", problem_prompt),
                    ("draft", &draft),
                    ("questions", q),
                ]);
                answers.push(call(generator, &p, 3)?.trim().to_string());
                prompts.push(p);
            }
            (prompts.join("\n---\n"), answers)
        }
    };

    // stage 4: refined final response
    let qa_pairs = questions
        .iter()
        .zip(&answers)
        .map(|(q, a)| format!("Q: {q}\nA: {a}"))
        .collect::<Vec<_>>()
        .join("\n\n");
    let p4 = templates.final_stage.render(&[
        ("problem", problem_prompt),
        ("draft", &draft),
        ("qa_pairs", &qa_pairs),
    ]);
    let final_text = call(generator, &p4, 4)?;

    Ok(CoVeTranscript {
        draft,
        verification_questions: questions,
        verification_answers: answers,
        final_text,
        stage_prompts: [p1, p2, p3, p4],
    })
}

fn call(generator: &dyn Generator, prompt: &str, stage: usize) -> Result<String> {
    generator.generate(prompt).map_err(|e| Error::Pipeline {
        stage,
        message: e.to_string(),
    })
}

/// Parse numbered ("1.", "2)", "3:") or bulleted ("-", "*") lines. A
/// non-blank line in any other shape is a parse failure rather than a
/// silent skip.
fn parse_list_items(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut items = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(item) = strip_list_marker(line) {
            if !item.is_empty() {
                items.push(item.to_string());
            }
        } else {
            return Err(format!(
                "line is neither numbered nor bulleted: {line:?}"
            ));
        }
    }
    Ok(items)
}

fn strip_list_marker(line: &str) -> Option<&str> {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return Some(rest.trim());
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        for sep in [".", ")", ":"] {
            if let Some(rest) = rest.strip_prefix(sep) {
                return Some(rest.trim());
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitigate::generator::ScriptedMock;

    fn templates() -> CoveTemplates {
        CoveTemplates::defaults()
    }

    #[test]
    fn four_stage_transcript_in_order() {
        let mock = ScriptedMock::new(vec![
            "the draft answer",
            "1. Q-a\n2. Q-b",
            "1. A-a\n2. A-b",
            "the final answer",
        ]);
        let t = cove_run("the problem", &mock, &templates(), CoveMode::Batched).unwrap();
        assert_eq!(t.draft, "the draft answer");
        assert_eq!(t.verification_questions, vec!["Q-a", "Q-b"]);
        assert_eq!(t.verification_answers, vec!["A-a", "A-b"]);
        assert_eq!(t.final_text, "the final answer");
        assert_eq!(mock.calls(), 4);

        // stage k's prompt embeds prior outputs
        assert!(t.stage_prompts[1].contains("the draft answer"));
        assert!(t.stage_prompts[2].contains("Q-a") && t.stage_prompts[2].contains("Q-b"));
        assert!(t.stage_prompts[3].contains("the draft answer"));
        assert!(t.stage_prompts[3].contains("Q: Q-a\nA: A-a"));
        assert!(t.stage_prompts[3].contains("Q: Q-b\nA: A-b"));
    }

    #[test]
    fn per_question_mode_makes_one_call_each() {
        let mock = ScriptedMock::new(vec![
            "draft",
            "1. Q-a\n2. Q-b\n3. Q-c",
            "A-a",
            "A-b",
            "A-c",
            "final",
        ]);
        let t = cove_run("p", &mock, &templates(), CoveMode::PerQuestion).unwrap();
        assert_eq!(t.verification_answers, vec!["A-a", "A-b", "A-c"]);
        // 3 fixed stages + one call per question
        assert_eq!(mock.calls(), 3 + 3);
    }

    #[test]
    fn bulleted_questions_accepted() {
        let mock = ScriptedMock::new(vec!["d", "- q one\n* q two", "1. a\n2. b", "f"]);
        let t = cove_run("p", &mock, &templates(), CoveMode::Batched).unwrap();
        assert_eq!(t.verification_questions, vec!["q one", "q two"]);
    }

    #[test]
    fn zero_questions_is_a_stage2_error() {
        let mock = ScriptedMock::new(vec!["d", "", "x", "y"]);
        match cove_run("p", &mock, &templates(), CoveMode::Batched) {
            Err(Error::Pipeline { stage: 2, .. }) => {}
            other => panic!("expected stage-2 pipeline error, got {other:?}"),
        }
    }

    #[test]
    fn unparseable_list_line_is_an_error() {
        let mock = ScriptedMock::new(vec!["d", "here are some questions\n1. q", "a", "f"]);
        assert!(matches!(
            cove_run("p", &mock, &templates(), CoveMode::Batched),
            Err(Error::Pipeline { stage: 2, .. })
        ));
    }

    #[test]
    fn failure_at_stage_three_carries_the_stage() {
        let mock = ScriptedMock::with_outcomes(vec![
            Ok("d".into()),
            Ok("1. q".into()),
            Err(Error::Backend("boom".into())),
        ]);
        match cove_run("p", &mock, &templates(), CoveMode::Batched) {
            Err(Error::Pipeline { stage: 3, message }) => assert!(message.contains("boom")),
            other => panic!("expected stage-3 pipeline error, got {other:?}"),
        }
    }

    #[test]
    fn answer_count_mismatch_is_a_stage3_error() {
        let mock = ScriptedMock::new(vec!["d", "1. q1\n2. q2", "1. only one answer", "f"]);
        assert!(matches!(
            cove_run("p", &mock, &templates(), CoveMode::Batched),
            Err(Error::Pipeline { stage: 3, .. })
        ));
    }
}
