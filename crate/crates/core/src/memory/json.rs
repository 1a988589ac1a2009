//! Planner-facing JSON: one object keyed by landmark index.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CardinalDirections, LandmarkCategory};
use crate::geom::{Cardinal, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkEntry {
    pub index: u32,
    pub name: String,
    pub position: Point2,
    pub directions: Option<CardinalDirections>,
    pub info: Option<String>,
}

impl Serialize for CardinalDirections {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(8))?;
        for (bin, texts) in self.iter() {
            map.serialize_entry(bin.name(), texts)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CardinalDirections {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, Vec<String>>::deserialize(deserializer)?;
        if raw.len() != 8 {
            return Err(D::Error::custom("directions need exactly eight compass keys"));
        }
        let mut directions = CardinalDirections::new();
        for (key, texts) in raw {
            let bin = Cardinal::from_name(&key)
                .ok_or_else(|| D::Error::custom(format!("unknown compass key {key}")))?;
            for text in texts {
                directions.push(bin, text);
            }
        }
        Ok(directions)
    }
}

fn round_tenth(value: f64) -> f64 {
    let rounded = (value * 10.0).round() / 10.0;
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

#[derive(Serialize, Deserialize)]
struct WireEntry {
    name: String,
    position: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    directions: Option<CardinalDirections>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    info: Option<String>,
}

/// Serializes entries in ascending index order, one entry per line.
/// Positions are rounded to 0.1 m.
pub fn entries_to_json(entries: &[LandmarkEntry]) -> String {
    if entries.is_empty() {
        return "{}".to_string();
    }
    let mut sorted: Vec<&LandmarkEntry> = entries.iter().collect();
    sorted.sort_by_key(|e| e.index);
    let lines: Vec<String> = sorted
        .iter()
        .map(|e| {
            let wire = WireEntry {
                name: e.name.clone(),
                position: [round_tenth(e.position.x), round_tenth(e.position.y)],
                directions: e.directions.clone(),
                info: e.info.clone(),
            };
            format!(
                "  \"{}\": {}",
                e.index,
                serde_json::to_string(&wire).expect("entry serializes")
            )
        })
        .collect();
    format!("{{\n{}\n}}", lines.join(",\n"))
}

pub fn parse_json(text: &str) -> Result<Vec<LandmarkEntry>, serde_json::Error> {
    let raw = BTreeMap::<String, WireEntry>::deserialize(&mut serde_json::Deserializer::from_str(text))?;
    let mut entries = raw
        .into_iter()
        .map(|(key, wire)| {
            let index = key
                .parse::<u32>()
                .map_err(|_| serde_json::Error::custom(format!("landmark key {key:?} is not an index")))?;
            Ok(LandmarkEntry {
                index,
                name: wire.name,
                position: Point2::new(wire.position[0], wire.position[1]),
                directions: wire.directions,
                info: wire.info,
            })
        })
        .collect::<Result<Vec<_>, serde_json::Error>>()?;
    entries.sort_by_key(|e| e.index);
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedName {
    pub category: LandmarkCategory,
    pub visited: bool,
    pub label: Option<String>,
}

/// Splits a landmark name back into category, visited flag and label.
pub fn parse_name(name: &str) -> Option<ParsedName> {
    let (visited, rest) = match name.strip_prefix("Visited_") {
        Some(rest) => (true, rest),
        None => (false, name),
    };
    LandmarkCategory::ALL.into_iter().find_map(|category| {
        let base = category.object_name();
        if rest == base {
            Some(ParsedName {
                category,
                visited,
                label: None,
            })
        } else {
            rest.strip_prefix(base)
                .and_then(|tail| tail.strip_prefix('_'))
                .filter(|label| visited && !label.is_empty())
                .map(|label| ParsedName {
                    category,
                    visited,
                    label: Some(label.to_string()),
                })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_bank_is_empty_object() {
        assert_eq!(entries_to_json(&[]), "{}");
    }

    #[test]
    fn serialization_is_a_fixpoint() {
        let mut directions = CardinalDirections::new();
        directions.push(Cardinal::North, "Rooms 3326-3340");
        let entries = vec![
            LandmarkEntry {
                index: 10,
                name: "Visited_a directions sign".into(),
                position: Point2::new(-0.04, 12.345),
                directions: Some(directions),
                info: None,
            },
            LandmarkEntry {
                index: 2,
                name: "Visited_a door_3339".into(),
                position: Point2::new(1.0, 2.0),
                directions: None,
                info: None,
            },
        ];
        let text = entries_to_json(&entries);
        assert!(text.starts_with("{\n  \"2\": {\"name\":\"Visited_a door_3339\",\"position\":[1.0,2.0]}"));
        assert!(text.contains("\"position\":[0.0,12.3]"));
        assert!(text.contains("\"North\":[\"Rooms 3326-3340\"],\"North-East\":[]"));
        let again = entries_to_json(&parse_json(&text).unwrap());
        assert_eq!(again, text);
    }

    #[test]
    fn names_parse_back() {
        let parsed = parse_name("Visited_a door_3012").unwrap();
        assert_eq!(parsed.category, LandmarkCategory::Door);
        assert_eq!(parsed.label.as_deref(), Some("3012"));
        assert!(!parse_name("a frontier").unwrap().visited);
        assert!(parse_name("a window").is_none());
    }
}
