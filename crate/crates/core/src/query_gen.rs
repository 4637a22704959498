//! Query generation: element sampling over the sandbox, duration/difficulty
//! structure, strict deduplication, reference-information construction and
//! template-based natural-language rendering.
//!
//! Durations and city counts are locked together: a 3-day query visits one
//! city, a 5-day query two, a 7-day query three. Difficulty controls how many
//! local constraints a query carries on top of its budget: easy none, medium
//! one, hard two or three. Queries are deliberately not guaranteed feasible —
//! some destinations are unreachable and some hard queries get budgets below
//! the cheapest possible plan.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sandbox::{
    window_start, Accommodation, Attraction, Restaurant, RoomType, Sandbox, TransportLink,
    TransportMode, CUISINES, WINDOW_DAYS,
};

/// House-rule needs a query may impose; an accommodation with the matching
/// "no {need}" rule is then invalid.
pub const HOUSE_RULE_NEEDS: [&str; 5] =
    ["pets", "smoking", "parties", "children under 10", "visitors"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Easy,
    Medium,
    Hard,
}

impl Level {
    pub fn label(&self) -> &'static str {
        match self {
            Level::Easy => "easy",
            Level::Medium => "medium",
            Level::Hard => "hard",
        }
    }
}

/// Transport mode a query forbids outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ForbiddenMode {
    #[serde(rename = "no flight")]
    NoFlight,
    #[serde(rename = "no self-driving")]
    NoSelfDriving,
}

impl ForbiddenMode {
    pub fn mode(&self) -> TransportMode {
        match self {
            ForbiddenMode::NoFlight => TransportMode::Flight,
            ForbiddenMode::NoSelfDriving => TransportMode::SelfDriving,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ForbiddenMode::NoFlight => "no flight",
            ForbiddenMode::NoSelfDriving => "no self-driving",
        }
    }
}

/// Per-query local constraints. All four keys are always serialized; absent
/// kinds are null.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalConstraint {
    #[serde(rename = "house rule")]
    pub house_rule: Option<String>,
    pub cuisine: Option<String>,
    #[serde(rename = "room type")]
    pub room_type: Option<RoomType>,
    pub transportation: Option<ForbiddenMode>,
}

impl LocalConstraint {
    pub fn count(&self) -> usize {
        [
            self.house_rule.is_some(),
            self.cuisine.is_some(),
            self.room_type.is_some(),
            self.transportation.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }

    /// Stable text form for dedup keys.
    fn canonical(&self) -> String {
        format!(
            "hr={};cu={};rt={};tr={}",
            self.house_rule.as_deref().unwrap_or("-"),
            self.cuisine.as_deref().unwrap_or("-"),
            self.room_type.map(|r| r.label()).unwrap_or("-"),
            self.transportation.map(|t| t.label()).unwrap_or("-"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub origin: String,
    pub destination: Vec<String>,
    pub days: u32,
    pub visiting_city_number: u32,
    pub date: Vec<NaiveDate>,
    pub people_number: u32,
    pub local_constraint: LocalConstraint,
    pub budget: f64,
    pub level: Level,
    #[serde(rename = "query")]
    pub query_text: String,
}

impl Query {
    pub fn dedup_key(&self) -> DedupKey {
        DedupKey {
            origin: self.origin.clone(),
            destination: self.destination.clone(),
            start: self.date[0],
            end: *self.date.last().expect("dates non-empty"),
            people_number: self.people_number,
            constraints: self.local_constraint.canonical(),
            budget_band: (self.budget / 500.0).floor() as i64,
        }
    }
}

/// Key information that makes two queries "the same": near-identical budgets
/// fall into the same 500-unit band.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DedupKey {
    pub origin: String,
    pub destination: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub people_number: u32,
    pub constraints: String,
    pub budget_band: i64,
}

/// Transport options for one itinerary leg on its transition date. Flight
/// entries are restricted to flights actually available on that date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSegment {
    pub from: String,
    pub to: String,
    pub date: NaiveDate,
    pub options: Vec<TransportLink>,
}

/// Everything the sandbox knows about one city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityListing {
    pub city: String,
    pub restaurants: Vec<Restaurant>,
    pub attractions: Vec<Attraction>,
    pub accommodations: Vec<Accommodation>,
}

/// Verbatim projection of sandbox records relevant to one query; covers every
/// leg of the canonical itinerary and every city in origin ∪ destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInformation {
    pub segments: Vec<TransportSegment>,
    pub cities: Vec<CityListing>,
}

#[derive(Debug, Error)]
pub enum QueryGenError {
    #[error("query slot {slot} exhausted after {attempts} attempts; sandbox cannot support this many distinct queries")]
    Exhausted { slot: usize, attempts: u32 },
    #[error("unknown city '{city}' in query")]
    UnknownCity { city: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

const MAX_ATTEMPTS_PER_SLOT: u32 = 2000;

/// Canonical itinerary legs: city changes happen on odd days, two nights per
/// city, returning to the origin on the final day.
pub fn itinerary_legs(origin: &str, destination: &[String]) -> Vec<(String, String, u32)> {
    let mut stops: Vec<&str> = vec![origin];
    stops.extend(destination.iter().map(|s| s.as_str()));
    stops.push(origin);
    stops
        .windows(2)
        .enumerate()
        .map(|(i, w)| (w[0].to_string(), w[1].to_string(), i as u32 * 2 + 1))
        .collect()
}

/// Identifier convention for JSONL rows: the query id is the line index.
pub fn query_id(index: usize) -> String {
    format!("q{index:05}")
}

pub fn generate_queries(
    sandbox: &Sandbox,
    count: usize,
    seed: u64,
    existing: &BTreeSet<DedupKey>,
) -> Result<Vec<(Query, ReferenceInformation)>, QueryGenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: [(u32, u32, Level); 9] = [
        (3, 1, Level::Easy),
        (3, 1, Level::Medium),
        (3, 1, Level::Hard),
        (5, 2, Level::Easy),
        (5, 2, Level::Medium),
        (5, 2, Level::Hard),
        (7, 3, Level::Easy),
        (7, 3, Level::Medium),
        (7, 3, Level::Hard),
    ];
    let city_names: Vec<String> = sandbox.cities.iter().map(|c| c.name.clone()).collect();
    let mut seen: BTreeSet<DedupKey> = existing.clone();
    let mut out = Vec::with_capacity(count);
    let mut hard_accepted = 0usize;

    for slot in 0..count {
        let (days, visiting, level) = grid[slot % grid.len()];
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS_PER_SLOT {
            let Some(candidate) =
                sample_query(sandbox, &city_names, days, visiting, level, hard_accepted, &mut rng)
            else {
                continue;
            };
            let key = candidate.dedup_key();
            if seen.contains(&key) {
                continue;
            }
            seen.insert(key);
            accepted = Some(candidate);
            break;
        }
        let mut query = accepted.ok_or(QueryGenError::Exhausted {
            slot,
            attempts: MAX_ATTEMPTS_PER_SLOT,
        })?;
        if query.level == Level::Hard {
            hard_accepted += 1;
        }
        query.query_text = render_query_text(&query);
        let reference = build_reference_information(sandbox, &query)?;
        out.push((query, reference));
    }
    Ok(out)
}

fn sample_query(
    sandbox: &Sandbox,
    city_names: &[String],
    days: u32,
    visiting: u32,
    level: Level,
    hard_accepted: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Query> {
    if city_names.len() < visiting as usize + 1 {
        return None;
    }
    let origin = city_names[rng.gen_range(0..city_names.len())].clone();
    let mut others: Vec<String> = city_names
        .iter()
        .filter(|c| **c != origin)
        .cloned()
        .collect();
    others.shuffle(rng);
    let destination: Vec<String> = others.into_iter().take(visiting as usize).collect();
    if destination.len() < visiting as usize {
        return None;
    }

    let start_offset = rng.gen_range(0..=(WINDOW_DAYS - days as u64));
    let start = window_start() + Days::new(start_offset);
    let date: Vec<NaiveDate> = (0..days as u64).map(|d| start + Days::new(d)).collect();
    let people_number = rng.gen_range(1..=8);

    let n_constraints = match level {
        Level::Easy => 0,
        Level::Medium => 1,
        Level::Hard => rng.gen_range(2..=3),
    };
    let mut kinds = [0usize, 1, 2, 3];
    kinds.shuffle(rng);
    let mut local_constraint = LocalConstraint::default();
    for kind in kinds.into_iter().take(n_constraints) {
        match kind {
            0 => {
                local_constraint.house_rule =
                    Some(HOUSE_RULE_NEEDS[rng.gen_range(0..HOUSE_RULE_NEEDS.len())].to_string());
            }
            1 => {
                let available: BTreeSet<&str> = destination
                    .iter()
                    .flat_map(|c| sandbox.restaurants_in(c))
                    .flat_map(|r| r.cuisines.iter().map(|s| s.as_str()))
                    .collect();
                let pool: Vec<&str> = if available.is_empty() {
                    CUISINES.to_vec()
                } else {
                    available.into_iter().collect()
                };
                local_constraint.cuisine = Some(pool[rng.gen_range(0..pool.len())].to_string());
            }
            2 => {
                let options = [
                    RoomType::EntireRoom,
                    RoomType::PrivateRoom,
                    RoomType::SharedRoom,
                    RoomType::NotSharedRoom,
                ];
                local_constraint.room_type = Some(options[rng.gen_range(0..options.len())]);
            }
            _ => {
                local_constraint.transportation = Some(if rng.gen_bool(0.5) {
                    ForbiddenMode::NoFlight
                } else {
                    ForbiddenMode::NoSelfDriving
                });
            }
        }
    }

    let lower_bound = estimate_min_cost(
        sandbox,
        &origin,
        &destination,
        &date,
        people_number,
        &local_constraint,
    );
    let budget = match lower_bound {
        Some(l) => {
            // Every fourth hard query is priced below the cheapest plan so the
            // batch contains unsolvable-by-budget instances.
            let multiplier = if level == Level::Hard && hard_accepted.is_multiple_of(4) {
                rng.gen_range(0.3..=0.8)
            } else {
                rng.gen_range(1.2..=2.5)
            };
            (l * multiplier).round()
        }
        // No transport or lodging exists at all: budget is moot, pick a
        // plausible figure.
        None => (days * people_number) as f64 * rng.gen_range(120.0..=320.0f64).round(),
    };

    Some(Query {
        origin,
        destination,
        days,
        visiting_city_number: visiting,
        date,
        people_number,
        local_constraint,
        budget,
        level,
        query_text: String::new(),
    })
}

/// Greedy lower bound on plan cost: cheapest transport per leg, cheapest
/// valid rooms for two nights per city, cheapest meal three times a day.
/// `None` means some leg or city has no valid option at any price.
pub fn estimate_min_cost(
    sandbox: &Sandbox,
    origin: &str,
    destination: &[String],
    date: &[NaiveDate],
    people_number: u32,
    constraint: &LocalConstraint,
) -> Option<f64> {
    let forbidden = constraint.transportation.map(|f| f.mode());
    let mut total = 0.0;

    for (from, to, day) in itinerary_legs(origin, destination) {
        let leg_date = date[day as usize - 1];
        let cheapest = sandbox
            .links_between(&from, &to)
            .into_iter()
            .filter(|l| Some(l.mode) != forbidden)
            .filter(|l| l.available_on(leg_date))
            .map(|l| match l.mode {
                TransportMode::Flight => l.cost * people_number as f64,
                _ => l.cost,
            })
            .fold(f64::INFINITY, f64::min);
        if !cheapest.is_finite() {
            return None;
        }
        total += cheapest;
    }

    for city in destination {
        let cheapest = sandbox
            .accommodations_in(city)
            .into_iter()
            .filter(|a| accommodation_meets(a, constraint) && a.min_nights <= 2)
            .map(|a| {
                let rooms = people_number.div_ceil(a.max_occupancy);
                a.price_per_night * rooms as f64 * 2.0
            })
            .fold(f64::INFINITY, f64::min);
        if !cheapest.is_finite() {
            return None;
        }
        total += cheapest;
    }

    let mut cities: Vec<&str> = vec![origin];
    cities.extend(destination.iter().map(|s| s.as_str()));
    let cheapest_meal = cities
        .iter()
        .flat_map(|c| sandbox.restaurants_in(c))
        .map(|r| r.avg_cost)
        .fold(f64::INFINITY, f64::min);
    if cheapest_meal.is_finite() {
        total += cheapest_meal * 3.0 * date.len() as f64 * people_number as f64;
    }

    Some(total)
}

/// True when `acc` is compatible with the query's room-type and house-rule
/// constraints. "not shared room" accepts anything except a shared room.
pub fn accommodation_meets(acc: &Accommodation, constraint: &LocalConstraint) -> bool {
    if let Some(want) = constraint.room_type {
        let ok = match want {
            RoomType::NotSharedRoom => acc.room_type != RoomType::SharedRoom,
            other => acc.room_type == other,
        };
        if !ok {
            return false;
        }
    }
    if let Some(need) = &constraint.house_rule {
        if acc.house_rules.contains(&format!("no {need}")) {
            return false;
        }
    }
    true
}

pub fn build_reference_information(
    sandbox: &Sandbox,
    query: &Query,
) -> Result<ReferenceInformation, QueryGenError> {
    for city in std::iter::once(&query.origin).chain(query.destination.iter()) {
        if sandbox.city(city).is_none() {
            return Err(QueryGenError::UnknownCity { city: city.clone() });
        }
    }
    let segments = itinerary_legs(&query.origin, &query.destination)
        .into_iter()
        .map(|(from, to, day)| {
            let date = query.date[day as usize - 1];
            let options: Vec<TransportLink> = sandbox
                .links_between(&from, &to)
                .into_iter()
                .filter(|l| l.available_on(date))
                .cloned()
                .collect();
            TransportSegment { from, to, date, options }
        })
        .collect();

    let mut cities = Vec::new();
    let mut listed = BTreeSet::new();
    for city in std::iter::once(&query.origin).chain(query.destination.iter()) {
        if !listed.insert(city.clone()) {
            continue;
        }
        cities.push(CityListing {
            city: city.clone(),
            restaurants: sandbox.restaurants_in(city).into_iter().cloned().collect(),
            attractions: sandbox.attractions_in(city).into_iter().cloned().collect(),
            accommodations: sandbox
                .accommodations_in(city)
                .into_iter()
                .cloned()
                .collect(),
        });
    }
    Ok(ReferenceInformation { segments, cities })
}

fn thousands(n: i64) -> String {
    let digits = n.abs().to_string();
    let mut grouped = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    if n < 0 {
        format!("-{grouped}")
    } else {
        grouped
    }
}

/// One deterministic sentence covering origin, destinations, dates, party
/// size, every present local constraint (in fixed order) and the budget.
pub fn render_query_text(query: &Query) -> String {
    let destinations = match query.destination.len() {
        1 => query.destination[0].clone(),
        2 => format!("{} and {}", query.destination[0], query.destination[1]),
        _ => {
            let head = query.destination[..query.destination.len() - 1].join(", ");
            format!("{} and {}", head, query.destination.last().unwrap())
        }
    };
    let people = if query.people_number == 1 {
        "1 person".to_string()
    } else {
        format!("{} people", query.people_number)
    };
    let mut phrases = String::new();
    if let Some(rule) = &query.local_constraint.house_rule {
        phrases.push_str(&format!(", in accommodation that allows {rule}"));
    }
    if let Some(cuisine) = &query.local_constraint.cuisine {
        phrases.push_str(&format!(", with at least one {cuisine} meal"));
    }
    if let Some(room) = query.local_constraint.room_type {
        phrases.push_str(&format!(", preferring a {} listing", room.label()));
    }
    if let Some(mode) = query.local_constraint.transportation {
        phrases.push_str(match mode {
            ForbiddenMode::NoFlight => ", avoiding flights",
            ForbiddenMode::NoSelfDriving => ", avoiding self-driving",
        });
    }
    format!(
        "Plan a {}-day trip departing from {} and visiting {}, from {} to {}, for {}{}, with a total budget of ${}.",
        query.days,
        query.origin,
        destinations,
        query.date[0],
        query.date.last().unwrap(),
        people,
        phrases,
        thousands(query.budget.round() as i64),
    )
}

#[derive(Serialize, Deserialize)]
struct QueryRow {
    #[serde(flatten)]
    query: Query,
    reference_information: ReferenceInformation,
}

pub fn save_queries(
    pairs: &[(Query, ReferenceInformation)],
    path: &Path,
) -> Result<(), QueryGenError> {
    let mut out = String::new();
    for (query, reference) in pairs {
        let row = QueryRow {
            query: query.clone(),
            reference_information: reference.clone(),
        };
        out.push_str(&serde_json::to_string(&row).expect("query serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| QueryGenError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_queries(path: &Path) -> Result<Vec<(Query, ReferenceInformation)>, QueryGenError> {
    let text = fs::read_to_string(path).map_err(|source| QueryGenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: QueryRow = serde_json::from_str(line).map_err(|source| QueryGenError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push((row.query, row.reference_information));
    }
    Ok(out)
}
