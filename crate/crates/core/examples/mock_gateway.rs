//! Scripted model calls: rule matching, reply sequences, failures and the
//! schema check on structured output.
//!
//! cargo run --example mock_gateway

use emocoach::gateway::{
    Field, Gateway, MockReply, MockRule, MockScript, ModelRequest, OutputSchema, PromptPart, SchemaType, Task,
};
use serde_json::json;

fn ask(gateway: &Gateway, id: &str, task: Task, text: &str, schema: Option<OutputSchema>) {
    let mut request = ModelRequest::new(id, task, vec![PromptPart::user(text)]);
    if let Some(s) = schema {
        request = request.with_schema(s);
    }
    let response = gateway.invoke(&request);
    match (response.structured(), response.text()) {
        (Some(v), _) => println!("{id}: json {v}"),
        (None, Some(t)) => println!("{id}: text {t:?}"),
        _ => println!("{id}: {:?}", response.status),
    }
}

fn main() {
    let mood = OutputSchema::new(
        "mood",
        SchemaType::object(vec![Field::required("mood", SchemaType::enumeration(["calm", "upset"]))]),
    );
    let script = MockScript::new(1)
        .rule(
            MockRule::new(Task::Chat)
                .contains("knock knock")
                .replies(vec![MockReply::text("Who's there?"), MockReply::text("Again?")]),
        )
        .rule(MockRule::new(Task::Chat).contains("offline").reply(MockReply::fail("provider offline")))
        .rule(MockRule::new(Task::Chat).contains("slow").reply(MockReply::timeout()))
        .rule(MockRule::new(Task::Score).schema("mood").contains("cried").reply(MockReply::json(json!({"mood": "upset"}))))
        .rule(MockRule::new(Task::Score).schema("mood").reply(MockReply::json(json!({"mood": "sleepy"}))));
    let gateway = Gateway::mock(script);

    // a reply sequence advances per rule and then repeats its last entry
    for i in 1..=3 {
        ask(&gateway, &format!("knock-{i}"), Task::Chat, "knock knock", None);
    }
    ask(&gateway, "down", Task::Chat, "are you offline?", None);
    ask(&gateway, "late", Task::Chat, "a slow answer", None);
    ask(&gateway, "mood-1", Task::Score, "The child cried at the door.", Some(mood.clone()));
    // "sleepy" is not in the enumeration, so the response fails validation
    ask(&gateway, "mood-2", Task::Score, "The child smiled.", Some(mood));
    // nothing matches: the mock derives a reply from the request itself
    ask(&gateway, "free", Task::Chat, "Tell me a story.", None);

    println!("\nbuilt-in script ({} bytes of TOML)", MockScript::builtin().to_toml().len());
}
