//! A scripted parent interview: follow-up probing on short answers, then
//! profile extraction from every answer.
//!
//! cargo run --example parent_interview

use emocoach::gateway::{Gateway, MockScript};
use emocoach::profile::{
    extract_profile_updates, integrate_entries, next_interview_question, source_from_answer, ChildEmotionalProfile,
    InterviewConfig, InterviewState, NextQuestion, QuestionList, SimilarityRule,
};

const ANSWERS: &[&str] = &[
    "Often.",
    "Last week she cried when her tower fell, then asked for a hug.",
    "She says she is angry and stamps her feet.",
    "A hug and a quiet corner help most.",
];

fn main() {
    let gateway = Gateway::mock(MockScript::builtin());
    let mut state = InterviewState::new("interview-1", QuestionList::seed(), InterviewConfig::default());
    let mut answers = ANSWERS.iter().copied().chain(std::iter::repeat("Not that I have noticed."));

    let mut next = next_interview_question(&gateway, &mut state, None);
    while let NextQuestion::Ask(q) = next {
        let answer = answers.next().expect("endless answers");
        let tag = if q.followup_of.is_some() { "  follow-up" } else { "" };
        println!("[{}]{tag} {}\n    > {answer}", q.question_id, q.text);
        next = next_interview_question(&gateway, &mut state, Some(answer));
    }
    println!("\n{} answers recorded", state.answers.len());

    let rule = SimilarityRule::default();
    let mut profile = ChildEmotionalProfile::new("child-b");
    for a in &state.answers {
        let source = source_from_answer(&a.answer_id, &a.question_text, &a.text);
        let extraction = extract_profile_updates(&gateway, &a.answer_id, &source, &profile);
        integrate_entries(&mut profile, &extraction.entries, &rule);
    }
    for e in &profile.entries {
        println!("{} / {} ({}x): {}", e.dimension, e.facet, e.merged_count, e.statement);
    }
    println!("profile version {}", profile.version);
}
