use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The seed catalog shipped with the crate.
pub const SEED_CATALOG_TOML: &str = include_str!("../../data/scenarios.toml");

/// The seven kinds of situation in which young children commonly meet
/// negative emotions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioCategory {
    Separation,
    PeerConflict,
    SocialSetbacks,
    PhysicalDiscomfort,
    AutonomyViolation,
    NegativeFeedback,
    StressfulChallenges,
}

impl ScenarioCategory {
    pub const ALL: [ScenarioCategory; 7] = [
        ScenarioCategory::Separation,
        ScenarioCategory::PeerConflict,
        ScenarioCategory::SocialSetbacks,
        ScenarioCategory::PhysicalDiscomfort,
        ScenarioCategory::AutonomyViolation,
        ScenarioCategory::NegativeFeedback,
        ScenarioCategory::StressfulChallenges,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioCategory::Separation => "separation",
            ScenarioCategory::PeerConflict => "peer-conflict",
            ScenarioCategory::SocialSetbacks => "social-setbacks",
            ScenarioCategory::PhysicalDiscomfort => "physical-discomfort",
            ScenarioCategory::AutonomyViolation => "autonomy-violation",
            ScenarioCategory::NegativeFeedback => "negative-feedback",
            ScenarioCategory::StressfulChallenges => "stressful-challenges",
        }
    }
}

impl fmt::Display for ScenarioCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioCategory {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or(())
    }
}

/// A validated catalog entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub category: ScenarioCategory,
    pub title: String,
    pub description: String,
    pub common_emotions: Vec<String>,
}

/// A catalog entry as written in the file, before validation. The category
/// is kept as free text so that unknown values can be reported rather than
/// failing the parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub category: String,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub common_emotions: Vec<String>,
}

impl From<&Scenario> for ScenarioRecord {
    fn from(s: &Scenario) -> Self {
        ScenarioRecord {
            id: s.id.clone(),
            category: s.category.as_str().to_string(),
            title: s.title.clone(),
            description: s.description.clone(),
            common_emotions: s.common_emotions.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    IdNonEmpty,
    CategoryEnumeration,
    CommonEmotionsNonEmpty,
}

impl Violation {
    pub fn name(self) -> &'static str {
        match self {
            Violation::IdNonEmpty => "id non-empty",
            Violation::CategoryEnumeration => "category enumeration",
            Violation::CommonEmotionsNonEmpty => "common_emotions non-empty",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.name()).collect()
    }
}

/// Checks the per-record invariants. Catalog-level uniqueness is checked at
/// load time.
pub fn validate_scenario(record: &ScenarioRecord) -> Validation {
    let mut violations = Vec::new();
    if record.id.trim().is_empty() {
        violations.push(Violation::IdNonEmpty);
    }
    if record.category.parse::<ScenarioCategory>().is_err() {
        violations.push(Violation::CategoryEnumeration);
    }
    if record.common_emotions.is_empty() || record.common_emotions.iter().any(|e| e.trim().is_empty()) {
        violations.push(Violation::CommonEmotionsNonEmpty);
    }
    Validation { violations }
}

impl TryFrom<ScenarioRecord> for Scenario {
    type Error = Validation;

    fn try_from(record: ScenarioRecord) -> Result<Self, Self::Error> {
        let validation = validate_scenario(&record);
        if !validation.is_ok() {
            return Err(validation);
        }
        Ok(Scenario {
            category: record.category.parse().expect("validated"),
            id: record.id,
            title: record.title,
            description: record.description,
            common_emotions: record.common_emotions,
        })
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario #{index} ({id}) is invalid: {}", .violations.iter().map(|v| v.name()).collect::<Vec<_>>().join(", "))]
    Invalid {
        index: usize,
        id: String,
        violations: Vec<Violation>,
    },
    #[error("duplicate scenario id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CatalogDocument {
    #[serde(default)]
    scenario: Vec<ScenarioRecord>,
}

/// An ordered list of scenarios with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioCatalog {
    scenarios: Vec<Scenario>,
}

impl ScenarioCatalog {
    pub fn parse(source: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDocument = toml::from_str(source).map_err(|e| {
            let line = e
                .span()
                .map(|span| source[..span.start.min(source.len())].lines().count().max(1))
                .unwrap_or(0);
            CatalogError::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        Self::from_records(doc.scenario)
    }

    pub fn from_records(records: Vec<ScenarioRecord>) -> Result<Self, CatalogError> {
        let mut seen = BTreeSet::new();
        let mut scenarios = Vec::with_capacity(records.len());
        for (index, record) in records.into_iter().enumerate() {
            let id = record.id.clone();
            let scenario = Scenario::try_from(record).map_err(|v| CatalogError::Invalid {
                index,
                id: id.clone(),
                violations: v.violations,
            })?;
            if !seen.insert(scenario.id.clone()) {
                return Err(CatalogError::DuplicateId(scenario.id));
            }
            scenarios.push(scenario);
        }
        Ok(ScenarioCatalog { scenarios })
    }

    pub fn to_toml(&self) -> String {
        let doc = CatalogDocument {
            scenario: self.scenarios.iter().map(ScenarioRecord::from).collect(),
        };
        toml::to_string_pretty(&doc).expect("catalog serializes")
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn into_vec(self) -> Vec<Scenario> {
        self.scenarios
    }
}

pub fn load_scenario_catalog(source: &str) -> Result<Vec<Scenario>, CatalogError> {
    ScenarioCatalog::parse(source).map(ScenarioCatalog::into_vec)
}

pub fn seed_catalog() -> ScenarioCatalog {
    ScenarioCatalog::parse(SEED_CATALOG_TOML).expect("seed catalog is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(category: &str, emotions: &[&str]) -> ScenarioRecord {
        ScenarioRecord {
            id: "x".into(),
            category: category.into(),
            title: "X".into(),
            description: "something happened".into(),
            common_emotions: emotions.iter().map(|e| e.to_string()).collect(),
        }
    }

    #[test]
    fn seed_has_one_entry_per_category() {
        let catalog = seed_catalog();
        assert_eq!(catalog.len(), 7);
        let cats: BTreeSet<_> = catalog.scenarios().iter().map(|s| s.category).collect();
        assert_eq!(cats.len(), 7);
    }

    #[test]
    fn seed_contains_not_first_and_up_stage() {
        let catalog = seed_catalog();
        let not_first = catalog
            .scenarios()
            .iter()
            .find(|s| s.category == ScenarioCategory::AutonomyViolation)
            .unwrap();
        assert!(not_first.description.contains("not winning first place"));
        assert_eq!(not_first.common_emotions, vec!["anger", "disappointment"]);

        let up_stage = catalog
            .scenarios()
            .iter()
            .find(|s| s.category == ScenarioCategory::StressfulChallenges)
            .unwrap();
        assert!(up_stage.description.contains("performing on stage"));
        assert_eq!(up_stage.common_emotions, vec!["anxiety", "fear"]);
        assert!(validate_scenario(&ScenarioRecord::from(up_stage)).is_ok());
    }

    #[test]
    fn empty_document_is_empty_catalog() {
        assert!(load_scenario_catalog("").unwrap().is_empty());
    }

    #[test]
    fn validation_reports_named_invariants() {
        assert_eq!(
            validate_scenario(&record("separation", &[])).names(),
            vec!["common_emotions non-empty"]
        );
        assert_eq!(
            validate_scenario(&record("homework", &["boredom"])).names(),
            vec!["category enumeration"]
        );
    }

    #[test]
    fn duplicate_ids_are_named() {
        let src = format!("{}\n{}", SEED_CATALOG_TOML, "[[scenario]]\nid = \"up-stage\"\ncategory = \"separation\"\ntitle = \"t\"\ndescription = \"d\"\ncommon_emotions = [\"fear\"]\n");
        match ScenarioCatalog::parse(&src) {
            Err(CatalogError::DuplicateId(id)) => assert_eq!(id, "up-stage"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_document_reports_line() {
        let src = "[[scenario]]\nid = \"a\"\ncategory = \"separation\"\ntitle = 3\n";
        match ScenarioCatalog::parse(src) {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_record_fails_load() {
        let src = "[[scenario]]\nid = \"a\"\ncategory = \"homework\"\ntitle = \"t\"\ndescription = \"d\"\ncommon_emotions = [\"x\"]\n";
        assert!(matches!(
            ScenarioCatalog::parse(src),
            Err(CatalogError::Invalid { index: 0, .. })
        ));
    }
}
