//! Closed output schemas for structured model tasks.
//!
//! Schemas are deliberately small: objects with named fields, arrays, text,
//! bounded numbers, integers, booleans and closed string enums. The gateway
//! validates every structured payload against the request's schema before it
//! leaves the gateway.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchemaType {
    Text,
    Number { min: f64, max: f64 },
    Integer { min: i64, max: i64 },
    Bool,
    Enum { values: Vec<String> },
    Array { items: Box<SchemaType> },
    Object { fields: Vec<Field> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(flatten)]
    pub ty: SchemaType,
    #[serde(default = "required_default")]
    pub required: bool,
}

fn required_default() -> bool {
    true
}

impl Field {
    pub fn required(name: &str, ty: SchemaType) -> Field {
        Field {
            name: name.to_string(),
            ty,
            required: true,
        }
    }

    pub fn optional(name: &str, ty: SchemaType) -> Field {
        Field {
            name: name.to_string(),
            ty,
            required: false,
        }
    }
}

impl SchemaType {
    pub fn object(fields: Vec<Field>) -> SchemaType {
        SchemaType::Object { fields }
    }

    pub fn array(items: SchemaType) -> SchemaType {
        SchemaType::Array {
            items: Box::new(items),
        }
    }

    pub fn enumeration<I, S>(values: I) -> SchemaType
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SchemaType::Enum {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn unit_interval() -> SchemaType {
        SchemaType::Number { min: 0.0, max: 1.0 }
    }
}

/// A named schema attached to a model request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub name: String,
    pub root: SchemaType,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema-violation at {path}: {reason}")]
pub struct SchemaViolation {
    pub path: String,
    pub reason: String,
}

impl OutputSchema {
    pub fn new(name: impl Into<String>, root: SchemaType) -> Self {
        OutputSchema {
            name: name.into(),
            root,
        }
    }

    pub fn validate(&self, value: &Value) -> Result<(), SchemaViolation> {
        validate_at(&self.root, value, "$")
    }

    /// Builds a conforming value deterministically from `seed`. Used by the
    /// mock provider when no scripted reply exists.
    pub fn synthesize(&self, seed: &[u8]) -> Value {
        synthesize_at(&self.root, seed, "$")
    }
}

fn violation(path: &str, reason: impl Into<String>) -> SchemaViolation {
    SchemaViolation {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn validate_at(ty: &SchemaType, value: &Value, path: &str) -> Result<(), SchemaViolation> {
    match ty {
        SchemaType::Text => value
            .as_str()
            .map(|_| ())
            .ok_or_else(|| violation(path, "expected text")),
        SchemaType::Number { min, max } => {
            let n = value
                .as_f64()
                .ok_or_else(|| violation(path, "expected number"))?;
            if n < *min || n > *max {
                return Err(violation(path, format!("{n} outside [{min}, {max}]")));
            }
            Ok(())
        }
        SchemaType::Integer { min, max } => {
            let n = value
                .as_i64()
                .ok_or_else(|| violation(path, "expected integer"))?;
            if n < *min || n > *max {
                return Err(violation(path, format!("{n} outside [{min}, {max}]")));
            }
            Ok(())
        }
        SchemaType::Bool => value
            .as_bool()
            .map(|_| ())
            .ok_or_else(|| violation(path, "expected boolean")),
        SchemaType::Enum { values } => {
            let s = value
                .as_str()
                .ok_or_else(|| violation(path, "expected enum string"))?;
            if values.iter().any(|v| v == s) {
                Ok(())
            } else {
                Err(violation(path, format!("`{s}` not in closed set")))
            }
        }
        SchemaType::Array { items } => {
            let arr = value
                .as_array()
                .ok_or_else(|| violation(path, "expected array"))?;
            for (i, item) in arr.iter().enumerate() {
                validate_at(items, item, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        SchemaType::Object { fields } => {
            let obj = value
                .as_object()
                .ok_or_else(|| violation(path, "expected object"))?;
            for field in fields {
                let child = format!("{path}.{}", field.name);
                match obj.get(&field.name) {
                    Some(Value::Null) | None if field.required => {
                        return Err(violation(&child, "missing required field"))
                    }
                    Some(Value::Null) | None => {}
                    Some(v) => validate_at(&field.ty, v, &child)?,
                }
            }
            Ok(())
        }
    }
}

fn unit_from(seed: &[u8], path: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed);
    h.update(path.as_bytes());
    let digest = h.finalize();
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(buf) >> 11) as f64 / (1u64 << 53) as f64
}

fn synthesize_at(ty: &SchemaType, seed: &[u8], path: &str) -> Value {
    match ty {
        SchemaType::Text => Value::String(format!("mock {path}")),
        SchemaType::Number { min, max } => {
            let x = min + (max - min) * unit_from(seed, path);
            let rounded = (x * 100.0).round() / 100.0;
            Value::from(rounded.clamp(*min, *max))
        }
        SchemaType::Integer { min, .. } => Value::from(*min),
        SchemaType::Bool => Value::Bool(false),
        SchemaType::Enum { values } => values
            .first()
            .map(|v| Value::String(v.clone()))
            .unwrap_or(Value::Null),
        SchemaType::Array { .. } => Value::Array(Vec::new()),
        SchemaType::Object { fields } => {
            let mut map = Map::new();
            for f in fields.iter().filter(|f| f.required) {
                map.insert(
                    f.name.clone(),
                    synthesize_at(&f.ty, seed, &format!("{path}.{}", f.name)),
                );
            }
            Value::Object(map)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn extract_schema() -> OutputSchema {
        OutputSchema::new(
            "profile_extract",
            SchemaType::object(vec![Field::required(
                "entries",
                SchemaType::array(SchemaType::object(vec![
                    Field::required("dimension", SchemaType::Text),
                    Field::required("facet", SchemaType::Text),
                    Field::required("statement", SchemaType::Text),
                ])),
            )]),
        )
    }

    #[test]
    fn missing_required_field_is_a_violation() {
        let v = json!({"entries": [{"dimension": "regulation", "facet": "emotion-regulation"}]});
        let err = extract_schema().validate(&v).unwrap_err();
        assert_eq!(err.path, "$.entries[0].statement");
        assert_eq!(err.to_string(), "schema-violation at $.entries[0].statement: missing required field");
    }

    #[test]
    fn bounds_and_enums_are_closed() {
        let s = OutputSchema::new(
            "x",
            SchemaType::object(vec![
                Field::required("score", SchemaType::unit_interval()),
                Field::required("kind", SchemaType::enumeration(["a", "b"])),
            ]),
        );
        assert!(s.validate(&json!({"score": 0.5, "kind": "a"})).is_ok());
        assert!(s.validate(&json!({"score": 1.5, "kind": "a"})).is_err());
        assert!(s.validate(&json!({"score": 0.5, "kind": "c"})).is_err());
        assert!(s.validate(&json!({"score": 0.5, "kind": "a", "extra": 1})).is_ok());
    }

    #[test]
    fn synthesized_values_validate_and_are_stable() {
        let s = OutputSchema::new(
            "x",
            SchemaType::object(vec![
                Field::required("score", SchemaType::unit_interval()),
                Field::required("kind", SchemaType::enumeration(["advance", "probe"])),
                Field::optional("note", SchemaType::Text),
                Field::required("items", SchemaType::array(SchemaType::Text)),
            ]),
        );
        let a = s.synthesize(b"seed");
        assert!(s.validate(&a).is_ok());
        assert_eq!(a, s.synthesize(b"seed"));
        assert_eq!(a["kind"], "advance");
        assert!(a.get("note").is_none());
    }

    #[test]
    fn schema_round_trips_through_toml_shape() {
        let s = extract_schema();
        let text = serde_json::to_string(&s).unwrap();
        let back: OutputSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
