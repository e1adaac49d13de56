//! Task-to-provider routing from a service config file, per-task deadlines,
//! and the errors for incomplete bindings.
//!
//! cargo run --example provider_routing

use std::path::Path;

use emocoach::engine::stage_completion_schema;
use emocoach::gateway::{route_by_task, Gateway, ModelRequest, PromptPart, Router, Task};
use emocoach::service::ServiceConfig;

const CONFIG: &str = r#"
[server]
bind = "127.0.0.1:9000"
token_env = "COACH_TOKEN"

[routing.providers.fast]
kind = "mock"

[routing.providers.hosted]
kind = "openai-compatible"
base_url = "http://127.0.0.1:9/v1"
api_key_env = "HOSTED_KEY"
model = "small-chat"
models = { score = "large-judge" }

[routing.bindings]
chat = "fast"
extract = "fast"
score = "hosted"
transcribe = "fast"
synthesize = "fast"
imagine = "fast"

[routing.deadlines]
realtime_s = 3.0
per_task = { score = 0.5 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig::parse(Path::new("example.toml"), CONFIG)?;
    for task in Task::ALL {
        println!(
            "{:<11} -> {:<7} deadline {:?}",
            task.as_str(),
            route_by_task(&config.routing, task)?,
            config.routing.deadlines.for_task(task)
        );
    }

    // nothing listens on port 9, so the scoring call fails fast and the
    // caller gets a failed response instead of an error
    let gateway = Gateway::new(Router::from_config(&config.routing)?, config.routing.deadlines.clone());
    let request = ModelRequest::new("r-1", Task::Score, vec![PromptPart::user("Score this.")])
        .with_schema(stage_completion_schema());
    let response = gateway.invoke(&request);
    println!("\nscore via hosted: {:?}", response.status);
    let request = ModelRequest::new("r-2", Task::Chat, vec![PromptPart::user("Hello")]);
    println!("chat via fast:    {:?}", gateway.invoke(&request).text());

    let mut broken = config.routing.clone();
    broken.bindings.remove(&Task::Imagine);
    println!("\nwithout an imagine binding: {}", Router::from_config(&broken).expect_err("unbound"));
    broken.bindings.insert(Task::Imagine, "missing".into());
    println!("bound to an unknown name:   {}", Router::from_config(&broken).expect_err("unknown"));
    Ok(())
}
