//! Lists the seed scenarios and shows how invalid catalog entries are
//! reported.
//!
//! cargo run --example scenario_catalog

use emocoach::domain::{seed_catalog, validate_scenario, ScenarioCatalog, ScenarioRecord};

const EXTRA: &str = r#"
[[scenario]]
id = "lost-toy"
category = "physical-discomfort"
title = "Lost Toy"
description = "A favourite toy went missing at the park."
common_emotions = ["sad", "worried"]

[[scenario]]
id = ""
category = "boredom"
title = "Rainy Day"
description = "Plans were cancelled because of rain."
"#;

fn main() {
    let seed = seed_catalog();
    println!("{} seed scenarios", seed.len());
    for s in seed.scenarios() {
        println!("  {:<22} {:<22} {}", s.id, s.category.as_str(), s.common_emotions.join(", "));
    }

    // per-record validation names every broken invariant
    let doc: toml::Value = toml::from_str(EXTRA).expect("example TOML");
    for entry in doc["scenario"].as_array().expect("scenario array") {
        let record: ScenarioRecord = entry.clone().try_into().expect("record shape");
        let v = validate_scenario(&record);
        if v.is_ok() {
            println!("{:?}: ok", record.id);
        } else {
            println!("{:?}: {}", record.id, v.names().join("; "));
        }
    }

    // loading stops at the first invalid record
    match ScenarioCatalog::parse(EXTRA) {
        Ok(c) => println!("loaded {}", c.len()),
        Err(e) => println!("catalog rejected: {e}"),
    }

    // round trip through the file format
    let again = ScenarioCatalog::parse(&seed.to_toml()).expect("seed round-trips");
    assert_eq!(again, seed);
    println!("seed catalog round-trips through TOML");
}
