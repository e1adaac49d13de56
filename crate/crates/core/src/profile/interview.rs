use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Facet;
use crate::gateway::{Field, Gateway, ModelRequest, OutputSchema, SchemaType, Task};
use crate::prompts::Template;

pub const SEED_QUESTIONS_TOML: &str = include_str!("../../data/interview_questions.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewQuestion {
    pub id: String,
    pub facet: Facet,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionList {
    pub version: String,
    #[serde(rename = "question")]
    pub questions: Vec<InterviewQuestion>,
}

#[derive(Debug, Error)]
pub enum QuestionListError {
    #[error("question list parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
    #[error("question `{0}` has empty text")]
    EmptyText(String),
    #[error("no question covers facet `{0}`")]
    Uncovered(Facet),
}

impl QuestionList {
    pub fn parse(source: &str) -> Result<Self, QuestionListError> {
        let list: QuestionList = toml::from_str(source)?;
        let mut ids = BTreeSet::new();
        for q in &list.questions {
            if !ids.insert(q.id.as_str()) {
                return Err(QuestionListError::DuplicateId(q.id.clone()));
            }
            if q.text.trim().is_empty() {
                return Err(QuestionListError::EmptyText(q.id.clone()));
            }
        }
        if let Some(f) = Facet::ALL.into_iter().find(|f| list.questions.iter().all(|q| q.facet != *f)) {
            return Err(QuestionListError::Uncovered(f));
        }
        Ok(list)
    }

    pub fn seed() -> Self {
        Self::parse(SEED_QUESTIONS_TOML).expect("seed question list is valid")
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewConfig {
    pub max_followups: u32,
}

impl Default for InterviewConfig {
    fn default() -> Self {
        InterviewConfig { max_followups: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewAnswer {
    pub answer_id: String,
    /// Id of the question as asked, e.g. `q3` or `q3.f1`.
    pub question_id: String,
    pub question_text: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup_of: Option<String>,
}

/// A question put to the parent and not yet answered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskedQuestion {
    pub question_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewState {
    pub interview_id: String,
    pub question_list: QuestionList,
    pub config: InterviewConfig,
    pub cursor: usize,
    pub followup_depth: u32,
    pub answers: Vec<InterviewAnswer>,
    pub pending: Option<AskedQuestion>,
    /// Decisions that fell back to advancing because the gateway failed.
    pub forced_advances: u32,
}

impl InterviewState {
    pub fn new(interview_id: impl Into<String>, question_list: QuestionList, config: InterviewConfig) -> Self {
        InterviewState {
            interview_id: interview_id.into(),
            question_list,
            config,
            cursor: 0,
            followup_depth: 0,
            answers: Vec::new(),
            pending: None,
            forced_advances: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.question_list.len()
    }

    fn list_question(&self) -> Option<&InterviewQuestion> {
        self.question_list.questions.get(self.cursor)
    }

    fn ask_list_question(&mut self) -> NextQuestion {
        match self.list_question() {
            Some(q) => {
                let asked = AskedQuestion {
                    question_id: q.id.clone(),
                    text: q.text.clone(),
                    followup_of: None,
                };
                self.pending = Some(asked.clone());
                NextQuestion::Ask(asked)
            }
            None => {
                self.pending = None;
                NextQuestion::Done
            }
        }
    }

    fn advance(&mut self) -> NextQuestion {
        self.cursor += 1;
        self.followup_depth = 0;
        self.ask_list_question()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NextQuestion {
    Ask(AskedQuestion),
    Done,
}

fn decision_schema() -> OutputSchema {
    OutputSchema::new(
        "interview_decision",
        SchemaType::object(vec![
            Field::required("decision", SchemaType::enumeration(["advance", "probe"])),
            Field::optional("followup", SchemaType::Text),
        ]),
    )
}

/// Records `last_answer` against the pending question and picks what to ask
/// next. Without an answer the pending question (or the first one) is
/// returned again.
pub fn next_interview_question(
    gateway: &Gateway,
    state: &mut InterviewState,
    last_answer: Option<&str>,
) -> NextQuestion {
    if state.is_done() {
        state.pending = None;
        return NextQuestion::Done;
    }
    let (Some(answer), Some(asked)) = (last_answer, state.pending.clone()) else {
        return match state.pending.clone() {
            Some(asked) => NextQuestion::Ask(asked),
            None => state.ask_list_question(),
        };
    };

    let answer_id = format!("{}/{}", state.interview_id, asked.question_id);
    state.answers.push(InterviewAnswer {
        answer_id,
        question_id: asked.question_id.clone(),
        question_text: asked.text.clone(),
        text: answer.to_string(),
        followup_of: asked.followup_of.clone(),
    });

    if state.followup_depth >= state.config.max_followups {
        return state.advance();
    }

    let list_q = state.list_question().expect("not done").clone();
    let depth = state.followup_depth.to_string();
    let words = answer.split_whitespace().count().to_string();
    let prompt = Template::InterviewDecision
        .render(&[
            ("question_id", &list_q.id),
            ("facet", list_q.facet.as_str()),
            ("question_text", &asked.text),
            ("followup_depth", &depth),
            ("answer", answer),
            ("answer_words", &words),
        ])
        .expect("interview_decision slots");
    let request_id = format!("{}/decide/{}", state.interview_id, state.answers.len());
    let request = ModelRequest::new(request_id, Task::Chat, prompt).with_schema(decision_schema());
    let response = gateway.invoke(&request);
    let Some(value) = response.structured() else {
        state.forced_advances += 1;
        return state.advance();
    };
    let followup = value["followup"].as_str().map(str::trim).unwrap_or_default();
    if value["decision"] == "probe" && !followup.is_empty() {
        state.followup_depth += 1;
        let asked = AskedQuestion {
            question_id: format!("{}.f{}", list_q.id, state.followup_depth),
            text: followup.to_string(),
            followup_of: Some(list_q.id.clone()),
        };
        state.pending = Some(asked.clone());
        NextQuestion::Ask(asked)
    } else {
        state.advance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockReply, MockRule, MockScript};
    use serde_json::json;

    fn probe_on_one_word() -> Gateway {
        Gateway::mock(
            MockScript::new(0)
                .rule(
                    MockRule::new(Task::Chat)
                        .schema("interview_decision")
                        .contains("Answer length: 1 words")
                        .reply(MockReply::json(json!({
                            "decision": "probe",
                            "followup": "Could you describe a recent moment when that happened?"
                        }))),
                )
                .rule(
                    MockRule::new(Task::Chat)
                        .schema("interview_decision")
                        .reply(MockReply::json(json!({"decision": "advance"}))),
                ),
        )
    }

    #[test]
    fn seed_list_covers_all_facets() {
        let list = QuestionList::seed();
        assert!(list.len() >= 9);
        for f in Facet::ALL {
            assert!(list.questions.iter().any(|q| q.facet == f));
        }
    }

    #[test]
    fn fresh_state_asks_q1() {
        let mut s = InterviewState::new("i", QuestionList::seed(), InterviewConfig::default());
        let gw = Gateway::mock(MockScript::new(0));
        match next_interview_question(&gw, &mut s, None) {
            NextQuestion::Ask(q) => assert_eq!(q.question_id, "q1"),
            NextQuestion::Done => panic!("expected a question"),
        }
    }

    #[test]
    fn one_word_answer_is_probed() {
        let gw = probe_on_one_word();
        let mut s = InterviewState::new("i", QuestionList::seed(), InterviewConfig::default());
        next_interview_question(&gw, &mut s, None);
        let NextQuestion::Ask(q) = next_interview_question(&gw, &mut s, Some("Sometimes")) else {
            panic!("expected follow-up");
        };
        assert_eq!(q.question_id, "q1.f1");
        assert_eq!(q.followup_of.as_deref(), Some("q1"));
        assert_eq!(s.followup_depth, 1);
    }

    #[test]
    fn cap_forces_advance() {
        let gw = probe_on_one_word();
        let mut s = InterviewState::new("i", QuestionList::seed(), InterviewConfig::default());
        next_interview_question(&gw, &mut s, None);
        next_interview_question(&gw, &mut s, Some("Yes"));
        next_interview_question(&gw, &mut s, Some("No"));
        assert_eq!(s.followup_depth, 2);
        let NextQuestion::Ask(q) = next_interview_question(&gw, &mut s, Some("Maybe")) else {
            panic!();
        };
        assert_eq!(q.question_id, "q2");
        assert_eq!(s.followup_depth, 0);
    }

    #[test]
    fn gateway_failure_advances() {
        let gw = Gateway::mock(MockScript::new(0).rule(MockRule::new(Task::Chat).reply(MockReply::fail("down"))));
        let mut s = InterviewState::new("i", QuestionList::seed(), InterviewConfig::default());
        next_interview_question(&gw, &mut s, None);
        let NextQuestion::Ask(q) = next_interview_question(&gw, &mut s, Some("ok")) else {
            panic!();
        };
        assert_eq!(q.question_id, "q2");
        assert_eq!(s.forced_advances, 1);
    }

    #[test]
    fn uncovered_facet_is_rejected() {
        let src = "version = \"x\"\n[[question]]\nid = \"a\"\nfacet = \"emotion-recognition\"\ntext = \"?\"\n";
        assert!(matches!(QuestionList::parse(src), Err(QuestionListError::Uncovered(_))));
    }
}
