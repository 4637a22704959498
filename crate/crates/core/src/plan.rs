//! Final-answer travel plan and the `<think>…</think>` response envelope.
//!
//! Every string microformat ("Name, City" items, transit forms, transport
//! descriptions) is parsed and formatted here and nowhere else, so the
//! conventions can be adjusted in one place.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sandbox::TransportMode;

/// One itinerary day. All values are strings except `day`; `"-"` denotes
/// absence. Key order in serialized JSON follows declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DayEntry {
    pub day: u32,
    pub current_city: String,
    pub transportation: String,
    pub breakfast: String,
    pub lunch: String,
    pub dinner: String,
    pub attraction: String,
    pub accommodation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TravelPlan {
    pub entries: Vec<DayEntry>,
}

/// Lossless split of a model response: `"<think>" + think + "</think>" +
/// answer_raw` reconstructs the original text exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseEnvelope {
    pub think: String,
    pub answer_raw: String,
    /// Present iff `answer_raw` parses as a plan.
    pub plan: Option<TravelPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FormatFailure {
    #[error("missing open tag")]
    MissingOpenTag,
    #[error("missing close tag")]
    MissingCloseTag,
    #[error("multiple close tags")]
    MultipleCloseTags,
    #[error("empty tail")]
    EmptyTail,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid plan JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plan has no day entries")]
    Empty,
    #[error("non-consecutive days: expected day {expected}, found day {found}")]
    NonConsecutiveDays { expected: u32, found: u32 },
    #[error("day {day}, field '{field}': {value:?} does not parse as \"Name, City\"")]
    BadField {
        day: u32,
        field: &'static str,
        value: String,
    },
}

/// Splits a response into think content and answer tail.
///
/// Success requires the text to start with `<think>`, contain exactly one
/// `</think>`, and carry non-whitespace content after it.
pub fn parse_envelope(text: &str) -> Result<ResponseEnvelope, FormatFailure> {
    const CLOSE: &str = "</think>";
    let body = text
        .strip_prefix("<think>")
        .ok_or(FormatFailure::MissingOpenTag)?;
    let at = body.find(CLOSE).ok_or(FormatFailure::MissingCloseTag)?;
    let think = &body[..at];
    let tail = &body[at + CLOSE.len()..];
    if tail.contains(CLOSE) {
        return Err(FormatFailure::MultipleCloseTags);
    }
    if tail.trim().is_empty() {
        return Err(FormatFailure::EmptyTail);
    }
    Ok(ResponseEnvelope {
        think: think.to_string(),
        answer_raw: tail.to_string(),
        plan: parse_plan(tail).ok(),
    })
}

/// Parses the JSON final answer: an array of day objects with exactly the
/// `DayEntry` keys, tolerant of surrounding whitespace and one markdown code
/// fence. Meals, attractions and accommodation must be `"-"` or well-formed
/// "Name, City" strings.
pub fn parse_plan(answer_raw: &str) -> Result<TravelPlan, PlanError> {
    let entries: Vec<DayEntry> = serde_json::from_str(strip_fence(answer_raw))?;
    if entries.is_empty() {
        return Err(PlanError::Empty);
    }
    for (i, entry) in entries.iter().enumerate() {
        let expected = i as u32 + 1;
        if entry.day != expected {
            return Err(PlanError::NonConsecutiveDays {
                expected,
                found: entry.day,
            });
        }
        let name_city_fields = [
            ("breakfast", &entry.breakfast),
            ("lunch", &entry.lunch),
            ("dinner", &entry.dinner),
            ("accommodation", &entry.accommodation),
        ];
        for (field, value) in name_city_fields {
            if value != "-" && parse_name_city(value).is_none() {
                return Err(PlanError::BadField {
                    day: entry.day,
                    field,
                    value: value.clone(),
                });
            }
        }
        if entry.attraction != "-" && parse_attraction_list(&entry.attraction).is_none() {
            return Err(PlanError::BadField {
                day: entry.day,
                field: "attraction",
                value: entry.attraction.clone(),
            });
        }
    }
    Ok(TravelPlan { entries })
}

pub fn serialize_plan(plan: &TravelPlan) -> String {
    serde_json::to_string(&plan.entries).expect("plan serializes")
}

/// Strips one optional markdown code fence (with or without an info string)
/// around the payload.
fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("```") {
        if let Some(nl) = rest.find('\n') {
            if let Some(body) = rest[nl + 1..].trim_end().strip_suffix("```") {
                return body.trim();
            }
        }
    }
    t
}

/// City field of a day: either staying in one city or moving between two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DayCity {
    Single(String),
    Transit { from: String, to: String },
}

/// What a non-"-" transportation string claims: a mode, a route, and for
/// flights the flight number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportClaim {
    pub mode: TransportMode,
    pub flight_number: Option<String>,
    pub from: String,
    pub to: String,
}

/// "Name, City" split on the last ", " so names may themselves contain
/// commas.
pub fn parse_name_city(s: &str) -> Option<(String, String)> {
    let (name, city) = s.rsplit_once(", ")?;
    let (name, city) = (name.trim(), city.trim());
    if name.is_empty() || city.is_empty() {
        return None;
    }
    Some((name.to_string(), city.to_string()))
}

/// Semicolon-joined "Name, City" items, optional trailing ";".
pub fn parse_attraction_list(s: &str) -> Option<Vec<(String, String)>> {
    let t = s.trim();
    let t = t.strip_suffix(';').unwrap_or(t);
    if t.trim().is_empty() {
        return None;
    }
    let mut items = Vec::new();
    for piece in t.split(';') {
        items.push(parse_name_city(piece.trim())?);
    }
    Some(items)
}

pub fn parse_current_city(s: &str) -> Option<DayCity> {
    let t = s.trim();
    if t.is_empty() || t == "-" {
        return None;
    }
    if let Some(rest) = t.strip_prefix("from ") {
        let (from, to) = rest.split_once(" to ")?;
        let (from, to) = (from.trim(), to.trim());
        if from.is_empty() || to.is_empty() {
            return None;
        }
        return Some(DayCity::Transit {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    Some(DayCity::Single(t.to_string()))
}

pub fn parse_transportation(s: &str) -> Option<TransportClaim> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("Flight Number: ") {
        let (number, route) = rest.split_once(", from ")?;
        let (from, to) = route.split_once(" to ")?;
        let (number, from, to) = (number.trim(), from.trim(), to.trim());
        if number.is_empty() || from.is_empty() || to.is_empty() {
            return None;
        }
        return Some(TransportClaim {
            mode: TransportMode::Flight,
            flight_number: Some(number.to_string()),
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    let (mode, route) = if let Some(rest) = t.strip_prefix("Self-driving, from ") {
        (TransportMode::SelfDriving, rest)
    } else {
        let rest = t.strip_prefix("Taxi, from ")?;
        (TransportMode::Taxi, rest)
    };
    let (from, to) = route.split_once(" to ")?;
    let (from, to) = (from.trim(), to.trim());
    if from.is_empty() || to.is_empty() {
        return None;
    }
    Some(TransportClaim {
        mode,
        flight_number: None,
        from: from.to_string(),
        to: to.to_string(),
    })
}

pub fn format_name_city(name: &str, city: &str) -> String {
    format!("{name}, {city}")
}

pub fn format_attraction_list(items: &[(String, String)]) -> String {
    items
        .iter()
        .map(|(n, c)| format_name_city(n, c))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn format_transit_city(from: &str, to: &str) -> String {
    format!("from {from} to {to}")
}

pub fn format_flight(number: &str, from: &str, to: &str) -> String {
    format!("Flight Number: {number}, from {from} to {to}")
}

pub fn format_ground(mode: TransportMode, from: &str, to: &str) -> String {
    let label = match mode {
        TransportMode::SelfDriving => "Self-driving",
        TransportMode::Taxi => "Taxi",
        TransportMode::Flight => unreachable!("flights carry a flight number"),
    };
    format!("{label}, from {from} to {to}")
}
