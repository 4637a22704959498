//! Rule-based constraint checker and metric aggregator.
//!
//! Eight commonsense checks apply to every delivered plan; five hard checks
//! apply when the query imposes them (cost always is). Failures are results,
//! never errors: a malformed response simply produces an undelivered report
//! with every check failed.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{
    parse_attraction_list, parse_current_city, parse_envelope, parse_name_city,
    parse_transportation, DayCity, ResponseEnvelope, TravelPlan,
};
use crate::query_gen::Query;
use crate::sandbox::{RoomType, Sandbox, TransportMode};

pub const COMMONSENSE_NAMES: [&str; 8] = [
    "is reasonable visiting city",
    "is valid restaurant",
    "is valid attraction",
    "is valid accommodation",
    "is valid transportation",
    "is valid information in the current city",
    "is valid information in the sandbox",
    "is not absent",
];

pub const HARD_NAMES: [&str; 5] = [
    "is valid cuisine",
    "is valid room rule",
    "is valid transportation",
    "is valid room type",
    "is valid cost",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub struct EvalOptions {
    /// When true, hard checks the query never imposed still count in the hard
    /// micro denominator (as passed items). Default: imposed-only.
    pub count_vacuous_hard: bool,
}


#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

impl ConstraintResult {
    fn pass(name: &str) -> Self {
        ConstraintResult {
            name: name.to_string(),
            applicable: true,
            passed: true,
            detail: "ok".to_string(),
        }
    }

    fn fail(name: &str, detail: String) -> Self {
        ConstraintResult {
            name: name.to_string(),
            applicable: true,
            passed: false,
            detail,
        }
    }

    /// Constraint the query never imposed: excluded from the default micro
    /// denominator but counted as satisfied.
    fn vacuous(name: &str) -> Self {
        ConstraintResult {
            name: name.to_string(),
            applicable: false,
            passed: true,
            detail: "not imposed by query".to_string(),
        }
    }

    fn undelivered(name: &str, applicable: bool) -> Self {
        ConstraintResult {
            name: name.to_string(),
            applicable,
            passed: false,
            detail: "plan not delivered".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub delivered: bool,
    pub commonsense: Vec<ConstraintResult>,
    pub hard: Vec<ConstraintResult>,
    pub commonsense_micro: f64,
    pub commonsense_macro_pass: bool,
    pub hard_micro: f64,
    pub hard_macro_pass: bool,
    pub final_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query_id: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Batch aggregates as fractions in [0, 1]; rendering to percent happens at
/// the presentation layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRates {
    pub delivery_rate: f64,
    pub commonsense_micro: f64,
    pub commonsense_macro: f64,
    pub hard_micro: f64,
    pub hard_macro: f64,
    pub final_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub per_query: Vec<QueryEval>,
    pub aggregate: AggregateRates,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot aggregate an empty batch")]
    EmptyBatch,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error for {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Parses the raw response text and evaluates it; any parse failure yields an
/// undelivered report.
pub fn evaluate_response(
    sandbox: &Sandbox,
    query: &Query,
    text: &str,
    options: EvalOptions,
) -> EvalReport {
    match parse_envelope(text) {
        Ok(envelope) => evaluate_envelope(sandbox, query, &envelope, options),
        Err(_) => undelivered_report(query, options),
    }
}

pub fn evaluate_envelope(
    sandbox: &Sandbox,
    query: &Query,
    envelope: &ResponseEnvelope,
    options: EvalOptions,
) -> EvalReport {
    match &envelope.plan {
        Some(plan) => evaluate_plan(sandbox, query, plan, options),
        None => undelivered_report(query, options),
    }
}

pub fn evaluate_plan(
    sandbox: &Sandbox,
    query: &Query,
    plan: &TravelPlan,
    options: EvalOptions,
) -> EvalReport {
    let commonsense = check_commonsense(sandbox, query, plan);
    let hard = check_hard(sandbox, query, plan);
    finish_report(true, commonsense, hard, options)
}

/// Report shape for responses that never produced a plan: every check failed,
/// hard checks applicable only where imposed.
pub fn undelivered_report(query: &Query, options: EvalOptions) -> EvalReport {
    let commonsense = COMMONSENSE_NAMES
        .iter()
        .map(|name| ConstraintResult::undelivered(name, true))
        .collect();
    let imposed = [
        query.local_constraint.cuisine.is_some(),
        query.local_constraint.house_rule.is_some(),
        query.local_constraint.transportation.is_some(),
        query.local_constraint.room_type.is_some(),
        true, // budget is always imposed
    ];
    let hard = HARD_NAMES
        .iter()
        .zip(imposed)
        .map(|(name, applicable)| ConstraintResult::undelivered(name, applicable))
        .collect();
    finish_report(false, commonsense, hard, options)
}

fn finish_report(
    delivered: bool,
    commonsense: Vec<ConstraintResult>,
    hard: Vec<ConstraintResult>,
    options: EvalOptions,
) -> EvalReport {
    let cs_passed = commonsense.iter().filter(|c| c.applicable && c.passed).count();
    let commonsense_micro = cs_passed as f64 / commonsense.len() as f64;
    let commonsense_macro_pass = commonsense.iter().all(|c| c.passed);

    let counted: Vec<&ConstraintResult> = hard
        .iter()
        .filter(|c| options.count_vacuous_hard || c.applicable)
        .collect();
    let hard_passed = counted.iter().filter(|c| c.passed).count();
    // Budget is always imposed, so the denominator is never zero.
    let hard_micro = hard_passed as f64 / counted.len() as f64;
    let hard_macro_pass = hard.iter().filter(|c| c.applicable).all(|c| c.passed) && delivered;

    let final_pass = delivered && commonsense_macro_pass && hard_macro_pass;
    EvalReport {
        delivered,
        commonsense,
        hard,
        commonsense_micro,
        commonsense_macro_pass,
        hard_micro,
        hard_macro_pass,
        final_pass,
    }
}

/// Per-day view of the plan used by several checks.
struct DayView {
    day: u32,
    /// Declared cities: one for a stay day, two for a transit day, empty when
    /// current_city did not parse.
    cities: Vec<String>,
    transit: Option<(String, String)>,
    items: Vec<CitedItem>,
    transportation: Option<String>,
    accommodation_value: Option<String>,
}

#[derive(Clone)]
struct CitedItem {
    kind: ItemKind,
    name: String,
    city: String,
}

#[derive(Clone, Copy, PartialEq)]
enum ItemKind {
    Meal,
    Attraction,
    Accommodation,
}

struct Walk {
    days: Vec<DayView>,
    /// Every current_city parsed and each day's start city matched the
    /// previous day's end city.
    continuity_ok: bool,
    /// Distinct non-origin cities entered, in order of first entry.
    visited: Vec<String>,
    ends_at_origin: bool,
}

fn walk_plan(query: &Query, plan: &TravelPlan) -> Walk {
    let mut days = Vec::new();
    let mut continuity_ok = true;
    let mut visited: Vec<String> = Vec::new();
    let mut location = query.origin.clone();

    for entry in &plan.entries {
        let parsed = parse_current_city(&entry.current_city);
        let (cities, transit) = match &parsed {
            Some(DayCity::Single(c)) => {
                if *c != location {
                    continuity_ok = false;
                }
                location = c.clone();
                (vec![c.clone()], None)
            }
            Some(DayCity::Transit { from, to }) => {
                if *from != location {
                    continuity_ok = false;
                }
                location = to.clone();
                (
                    vec![from.clone(), to.clone()],
                    Some((from.clone(), to.clone())),
                )
            }
            None => {
                continuity_ok = false;
                (Vec::new(), None)
            }
        };
        for city in &cities {
            if *city != query.origin && !visited.contains(city) {
                visited.push(city.clone());
            }
        }

        let mut items = Vec::new();
        for meal in [&entry.breakfast, &entry.lunch, &entry.dinner] {
            if meal != "-" {
                if let Some((name, city)) = parse_name_city(meal) {
                    items.push(CitedItem {
                        kind: ItemKind::Meal,
                        name,
                        city,
                    });
                }
            }
        }
        if entry.attraction != "-" {
            if let Some(list) = parse_attraction_list(&entry.attraction) {
                for (name, city) in list {
                    items.push(CitedItem {
                        kind: ItemKind::Attraction,
                        name,
                        city,
                    });
                }
            }
        }
        if entry.accommodation != "-" {
            if let Some((name, city)) = parse_name_city(&entry.accommodation) {
                items.push(CitedItem {
                    kind: ItemKind::Accommodation,
                    name,
                    city,
                });
            }
        }

        days.push(DayView {
            day: entry.day,
            cities,
            transit,
            items,
            transportation: (entry.transportation != "-")
                .then(|| entry.transportation.clone()),
            accommodation_value: (entry.accommodation != "-")
                .then(|| entry.accommodation.clone()),
        });
    }

    Walk {
        days,
        continuity_ok,
        visited,
        ends_at_origin: location == query.origin,
    }
}

pub fn check_commonsense(
    sandbox: &Sandbox,
    query: &Query,
    plan: &TravelPlan,
) -> Vec<ConstraintResult> {
    let walk = walk_plan(query, plan);
    vec![
        check_visiting_city(query, &walk),
        check_restaurants(sandbox, &walk),
        check_attractions(sandbox, &walk),
        check_accommodations(sandbox, &walk),
        check_transport_commonsense(sandbox, query, &walk),
        check_current_city(&walk),
        check_in_sandbox(sandbox, &walk),
        check_not_absent(sandbox, query, &walk),
    ]
}

fn check_visiting_city(query: &Query, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[0];
    let mut problems = Vec::new();
    if !walk.continuity_ok {
        problems.push("itinerary is not a connected walk from the origin".to_string());
    }
    if !walk.ends_at_origin {
        problems.push("trip does not return to the origin".to_string());
    }
    let visited: BTreeSet<&str> = walk.visited.iter().map(|s| s.as_str()).collect();
    let expected: BTreeSet<&str> = query.destination.iter().map(|s| s.as_str()).collect();
    if visited != expected {
        problems.push(format!(
            "visited {:?}, expected {:?}",
            walk.visited, query.destination
        ));
    }
    if walk.visited.len() != query.visiting_city_number as usize {
        problems.push(format!(
            "visited {} cities, expected {}",
            walk.visited.len(),
            query.visiting_city_number
        ));
    }
    verdict(name, problems)
}

fn check_restaurants(sandbox: &Sandbox, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[1];
    let mut problems = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for day in &walk.days {
        for item in day.items.iter().filter(|i| i.kind == ItemKind::Meal) {
            if sandbox.restaurant(&item.name, &item.city).is_none() {
                problems.push(format!(
                    "day {}: no restaurant '{}' in {}",
                    day.day, item.name, item.city
                ));
            }
            if !seen.insert((item.name.clone(), item.city.clone())) {
                problems.push(format!(
                    "day {}: restaurant '{}' repeated across meals",
                    day.day, item.name
                ));
            }
        }
    }
    verdict(name, problems)
}

fn check_attractions(sandbox: &Sandbox, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[2];
    let mut problems = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for day in &walk.days {
        for item in day.items.iter().filter(|i| i.kind == ItemKind::Attraction) {
            if sandbox.attraction(&item.name, &item.city).is_none() {
                problems.push(format!(
                    "day {}: no attraction '{}' in {}",
                    day.day, item.name, item.city
                ));
            }
            if !seen.insert((item.name.clone(), item.city.clone())) {
                problems.push(format!(
                    "day {}: attraction '{}' repeated across the trip",
                    day.day, item.name
                ));
            }
        }
    }
    verdict(name, problems)
}

fn check_accommodations(sandbox: &Sandbox, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[3];
    let mut problems = Vec::new();
    for day in &walk.days {
        for item in day.items.iter().filter(|i| i.kind == ItemKind::Accommodation) {
            if sandbox.accommodation(&item.name, &item.city).is_none() {
                problems.push(format!(
                    "day {}: no accommodation '{}' in {}",
                    day.day, item.name, item.city
                ));
            }
        }
    }
    // Stays shorter than the record's minimum-nights policy are invalid. A
    // stay is a maximal run of consecutive days declaring the same value.
    let mut idx = 0;
    while idx < walk.days.len() {
        let Some(value) = walk.days[idx].accommodation_value.clone() else {
            idx += 1;
            continue;
        };
        let start = idx;
        while idx < walk.days.len() && walk.days[idx].accommodation_value.as_ref() == Some(&value) {
            idx += 1;
        }
        let nights = (idx - start) as u32;
        if let Some((name_part, city_part)) = parse_name_city(&value) {
            if let Some(record) = sandbox.accommodation(&name_part, &city_part) {
                if nights < record.min_nights {
                    problems.push(format!(
                        "'{}' requires at least {} nights, stayed {}",
                        name_part, record.min_nights, nights
                    ));
                }
            }
        }
    }
    verdict(name, problems)
}

fn check_transport_commonsense(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[4];
    let mut problems = Vec::new();
    let mut flight_used = false;
    let mut driving_used = false;
    for day in &walk.days {
        let Some(raw) = &day.transportation else {
            continue;
        };
        let Some(claim) = parse_transportation(raw) else {
            problems.push(format!("day {}: unparseable transportation {:?}", day.day, raw));
            continue;
        };
        match claim.mode {
            TransportMode::Flight => flight_used = true,
            TransportMode::SelfDriving => driving_used = true,
            TransportMode::Taxi => {}
        }
        let Some((from, to)) = &day.transit else {
            problems.push(format!(
                "day {}: transportation declared on a non-transit day",
                day.day
            ));
            continue;
        };
        if claim.from != *from || claim.to != *to {
            problems.push(format!(
                "day {}: transportation route {} -> {} does not match the day's move {} -> {}",
                day.day, claim.from, claim.to, from, to
            ));
            continue;
        }
        match claim.mode {
            TransportMode::Flight => {
                let number = claim.flight_number.as_deref().unwrap_or("");
                match sandbox.flight_by_number(number) {
                    None => problems.push(format!(
                        "day {}: flight {} does not exist",
                        day.day, number
                    )),
                    Some(link) => {
                        if link.origin != claim.from || link.destination != claim.to {
                            problems.push(format!(
                                "day {}: flight {} flies {} -> {}, not {} -> {}",
                                day.day, number, link.origin, link.destination, claim.from, claim.to
                            ));
                        } else {
                            match query.date.get(day.day as usize - 1) {
                                Some(date) if link.available_on(*date) => {}
                                Some(date) => problems.push(format!(
                                    "day {}: flight {} not available on {}",
                                    day.day, number, date
                                )),
                                None => problems.push(format!(
                                    "day {}: no query date for this day",
                                    day.day
                                )),
                            }
                        }
                    }
                }
            }
            mode => {
                let exists = sandbox
                    .links_between(&claim.from, &claim.to)
                    .iter()
                    .any(|l| l.mode == mode);
                if !exists {
                    problems.push(format!(
                        "day {}: no {} link {} -> {}",
                        day.day,
                        mode.label(),
                        claim.from,
                        claim.to
                    ));
                }
            }
        }
    }
    if flight_used && driving_used {
        problems.push("flight and self-driving mixed in one trip".to_string());
    }
    verdict(name, problems)
}

fn check_current_city(walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[5];
    let mut problems = Vec::new();
    for day in &walk.days {
        for item in &day.items {
            if !day.cities.contains(&item.city) {
                problems.push(format!(
                    "day {}: '{}' is in {}, but the day's cities are {:?}",
                    day.day, item.name, item.city, day.cities
                ));
            }
        }
    }
    verdict(name, problems)
}

fn check_in_sandbox(sandbox: &Sandbox, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[6];
    let mut problems = Vec::new();
    for day in &walk.days {
        for city in &day.cities {
            if sandbox.city(city).is_none() {
                problems.push(format!("day {}: unknown city '{}'", day.day, city));
            }
        }
        for item in &day.items {
            let known = match item.kind {
                ItemKind::Meal => sandbox.restaurant_named(&item.name),
                ItemKind::Attraction => sandbox.attraction_named(&item.name),
                ItemKind::Accommodation => sandbox.accommodation_named(&item.name),
            };
            if !known {
                problems.push(format!(
                    "day {}: '{}' matches no sandbox record",
                    day.day, item.name
                ));
            }
            if sandbox.city(&item.city).is_none() {
                problems.push(format!("day {}: unknown city '{}'", day.day, item.city));
            }
        }
        if let Some(raw) = &day.transportation {
            if let Some(claim) = parse_transportation(raw) {
                for city in [&claim.from, &claim.to] {
                    if sandbox.city(city).is_none() {
                        problems.push(format!("day {}: unknown city '{}'", day.day, city));
                    }
                }
                if let Some(number) = &claim.flight_number {
                    if sandbox.flight_by_number(number).is_none() {
                        problems.push(format!(
                            "day {}: flight number {} matches no sandbox record",
                            day.day, number
                        ));
                    }
                }
            }
        }
    }
    verdict(name, problems)
}

fn check_not_absent(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = COMMONSENSE_NAMES[7];
    let mut problems = Vec::new();
    if walk.days.len() != query.days as usize {
        problems.push(format!(
            "plan covers {} days, query asks for {}",
            walk.days.len(),
            query.days
        ));
    }
    let last_index = walk.days.len().saturating_sub(1);
    for (i, day) in walk.days.iter().enumerate() {
        if day.transit.is_some() && day.transportation.is_none() {
            problems.push(format!("day {}: transportation missing on a transit day", day.day));
        }
        let has_restaurant = day
            .cities
            .iter()
            .any(|c| !sandbox.restaurants_in(c).is_empty());
        if has_restaurant {
            let meals = day
                .items
                .iter()
                .filter(|it| it.kind == ItemKind::Meal)
                .count();
            if meals < 3 {
                problems.push(format!(
                    "day {}: {} of 3 meals given while restaurants exist",
                    day.day, meals
                ));
            }
        }
        if i < last_index {
            let night_city = day.cities.last();
            if let Some(city) = night_city {
                if !sandbox.accommodations_in(city).is_empty() && day.accommodation_value.is_none()
                {
                    problems.push(format!(
                        "day {}: accommodation missing for the night in {}",
                        day.day, city
                    ));
                }
            }
        }
    }
    verdict(name, problems)
}

pub fn check_hard(sandbox: &Sandbox, query: &Query, plan: &TravelPlan) -> Vec<ConstraintResult> {
    let walk = walk_plan(query, plan);
    vec![
        hard_cuisine(sandbox, query, &walk),
        hard_room_rule(sandbox, query, &walk),
        hard_transportation(query, &walk),
        hard_room_type(sandbox, query, &walk),
        hard_cost(sandbox, query, &walk),
    ]
}

fn hard_cuisine(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = HARD_NAMES[0];
    let Some(want) = &query.local_constraint.cuisine else {
        return ConstraintResult::vacuous(name);
    };
    let satisfied = walk.days.iter().flat_map(|d| d.items.iter()).any(|item| {
        item.kind == ItemKind::Meal
            && sandbox
                .restaurant(&item.name, &item.city)
                .map(|r| r.cuisines.contains(want))
                .unwrap_or(false)
    });
    if satisfied {
        ConstraintResult::pass(name)
    } else {
        ConstraintResult::fail(name, format!("no meal serves {want} cuisine"))
    }
}

fn hard_room_rule(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = HARD_NAMES[1];
    let Some(need) = &query.local_constraint.house_rule else {
        return ConstraintResult::vacuous(name);
    };
    let banned = format!("no {need}");
    let mut problems = Vec::new();
    for day in &walk.days {
        for item in day.items.iter().filter(|i| i.kind == ItemKind::Accommodation) {
            if let Some(record) = sandbox.accommodation(&item.name, &item.city) {
                if record.house_rules.contains(&banned) {
                    problems.push(format!(
                        "day {}: '{}' forbids {}",
                        day.day, item.name, need
                    ));
                }
            }
        }
    }
    verdict(name, problems)
}

fn hard_transportation(query: &Query, walk: &Walk) -> ConstraintResult {
    let name = HARD_NAMES[2];
    let Some(forbidden) = query.local_constraint.transportation else {
        return ConstraintResult::vacuous(name);
    };
    let mode = forbidden.mode();
    let mut problems = Vec::new();
    for day in &walk.days {
        if let Some(raw) = &day.transportation {
            if let Some(claim) = parse_transportation(raw) {
                if claim.mode == mode {
                    problems.push(format!(
                        "day {}: uses {} despite the '{}' constraint",
                        day.day,
                        mode.label(),
                        forbidden.label()
                    ));
                }
            }
        }
    }
    verdict(name, problems)
}

fn hard_room_type(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = HARD_NAMES[3];
    let Some(want) = query.local_constraint.room_type else {
        return ConstraintResult::vacuous(name);
    };
    let mut problems = Vec::new();
    for day in &walk.days {
        for item in day.items.iter().filter(|i| i.kind == ItemKind::Accommodation) {
            if let Some(record) = sandbox.accommodation(&item.name, &item.city) {
                let ok = match want {
                    RoomType::NotSharedRoom => record.room_type != RoomType::SharedRoom,
                    other => record.room_type == other,
                };
                if !ok {
                    problems.push(format!(
                        "day {}: '{}' is a {}, wanted {}",
                        day.day,
                        item.name,
                        record.room_type.label(),
                        want.label()
                    ));
                }
            }
        }
    }
    verdict(name, problems)
}

fn hard_cost(sandbox: &Sandbox, query: &Query, walk: &Walk) -> ConstraintResult {
    let name = HARD_NAMES[4];
    let total = walk_cost(sandbox, query, walk);
    if total <= query.budget {
        ConstraintResult::pass(name)
    } else {
        ConstraintResult::fail(
            name,
            format!("total cost {:.0} exceeds budget {:.0}", total, query.budget),
        )
    }
}

/// Total plan cost: flights are per person, taxi/self-driving per group,
/// meals per person, lodging per room per night with rooms =
/// ⌈people/max_occupancy⌉. Items that do not resolve contribute nothing (they
/// already fail their validity checks).
pub fn plan_cost(sandbox: &Sandbox, query: &Query, plan: &TravelPlan) -> f64 {
    walk_cost(sandbox, query, &walk_plan(query, plan))
}

fn walk_cost(sandbox: &Sandbox, query: &Query, walk: &Walk) -> f64 {
    let people = query.people_number as f64;
    let mut total = 0.0;
    for day in &walk.days {
        if let Some(raw) = &day.transportation {
            if let Some(claim) = parse_transportation(raw) {
                match claim.mode {
                    TransportMode::Flight => {
                        if let Some(number) = &claim.flight_number {
                            if let Some(link) = sandbox.flight_by_number(number) {
                                total += link.cost * people;
                            }
                        }
                    }
                    mode => {
                        if let Some(link) = sandbox
                            .links_between(&claim.from, &claim.to)
                            .into_iter()
                            .find(|l| l.mode == mode)
                        {
                            total += link.cost;
                        }
                    }
                }
            }
        }
        for item in &day.items {
            match item.kind {
                ItemKind::Meal => {
                    if let Some(r) = sandbox.restaurant(&item.name, &item.city) {
                        total += r.avg_cost * people;
                    }
                }
                ItemKind::Accommodation => {
                    if let Some(a) = sandbox.accommodation(&item.name, &item.city) {
                        let rooms =
                            query.people_number.div_ceil(a.max_occupancy);
                        total += a.price_per_night * rooms as f64;
                    }
                }
                ItemKind::Attraction => {}
            }
        }
    }
    total
}

fn verdict(name: &str, problems: Vec<String>) -> ConstraintResult {
    if problems.is_empty() {
        ConstraintResult::pass(name)
    } else {
        ConstraintResult::fail(name, problems.join("; "))
    }
}

pub fn aggregate(reports: &[EvalReport], options: EvalOptions) -> Result<AggregateRates, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let n = reports.len() as f64;
    let delivered = reports.iter().filter(|r| r.delivered).count() as f64;

    let mut cs_num = 0usize;
    let mut cs_den = 0usize;
    let mut hard_num = 0usize;
    let mut hard_den = 0usize;
    for report in reports {
        cs_num += report
            .commonsense
            .iter()
            .filter(|c| c.applicable && c.passed)
            .count();
        cs_den += report.commonsense.len();
        for c in &report.hard {
            if options.count_vacuous_hard || c.applicable {
                hard_den += 1;
                if c.passed {
                    hard_num += 1;
                }
            }
        }
    }

    Ok(AggregateRates {
        delivery_rate: delivered / n,
        commonsense_micro: cs_num as f64 / cs_den as f64,
        commonsense_macro: reports
            .iter()
            .filter(|r| r.commonsense_macro_pass)
            .count() as f64
            / n,
        hard_micro: hard_num as f64 / hard_den as f64,
        hard_macro: reports.iter().filter(|r| r.hard_macro_pass).count() as f64 / n,
        final_pass_rate: reports.iter().filter(|r| r.final_pass).count() as f64 / n,
    })
}

pub fn batch_report(
    rows: Vec<(String, EvalReport)>,
    options: EvalOptions,
) -> Result<BatchReport, EvalError> {
    let reports: Vec<EvalReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    let aggregate = aggregate(&reports, options)?;
    Ok(BatchReport {
        per_query: rows
            .into_iter()
            .map(|(query_id, report)| QueryEval { query_id, report })
            .collect(),
        aggregate,
    })
}

/// Renders a fraction as a percentage with up to four decimal places and no
/// trailing zeros: 1.0 → "100", 0.386 → "38.6", 0.990375 → "99.0375".
pub fn percent(fraction: f64) -> String {
    let s = format!("{:.4}", fraction * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn column_slug(prefix: &str, name: &str) -> String {
    let tail = name.strip_prefix("is ").unwrap_or(name).replace(' ', "_");
    format!("{prefix}_{tail}")
}

/// One row per query, one column per check: "1" passed, "0" failed, "na" not
/// applicable.
pub fn write_batch_csv(report: &BatchReport, path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| EvalError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let mut header = vec!["query_id".to_string(), "delivered".to_string()];
    header.extend(COMMONSENSE_NAMES.iter().map(|n| column_slug("cs", n)));
    header.extend(HARD_NAMES.iter().map(|n| column_slug("hard", n)));
    header.extend(
        [
            "commonsense_micro",
            "hard_micro",
            "final_pass",
        ]
        .map(String::from),
    );
    let csv_err = |source| EvalError::Csv {
        path: path.display().to_string(),
        source,
    };
    writer.write_record(&header).map_err(csv_err)?;
    for row in &report.per_query {
        let mut record = vec![
            row.query_id.clone(),
            if row.report.delivered { "1" } else { "0" }.to_string(),
        ];
        for result in row.report.commonsense.iter().chain(row.report.hard.iter()) {
            record.push(if !result.applicable {
                "na".to_string()
            } else if result.passed {
                "1".to_string()
            } else {
                "0".to_string()
            });
        }
        record.push(format!("{}", row.report.commonsense_micro));
        record.push(format!("{}", row.report.hard_micro));
        record.push(if row.report.final_pass { "1" } else { "0" }.to_string());
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{base_query, tiny, valid_plan};

    #[test]
    fn oracle_built_plan_passes_all_commonsense() {
        let sb = tiny();
        let q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        let results = check_commonsense(&sb, &q, &plan);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        let report = evaluate_plan(&sb, &q, &plan, EvalOptions::default());
        assert!(report.delivered);
        assert!(report.final_pass, "expected final pass: {report:?}");
        assert_eq!(report.commonsense_micro, 1.0);
        assert_eq!(report.hard_micro, 1.0);
    }

    #[test]
    fn unknown_restaurant_fails_sandbox_check() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        plan.entries[1].lunch = format!("Nonexistent Grill, {}", q.destination[0]);
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[1].passed, "is valid restaurant should fail");
        assert!(!results[6].passed, "is valid information in the sandbox should fail");
    }

    #[test]
    fn visiting_extra_city_fails_reasonable_city_check() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        // Day 2 detours to a second city never requested by the query.
        let other = sb
            .cities
            .iter()
            .map(|c| c.name.clone())
            .find(|c| *c != q.origin && *c != q.destination[0])
            .unwrap();
        plan.entries[1].current_city = format!("from {} to {}", q.destination[0], other);
        plan.entries[2].current_city = format!("from {} to {}", other, q.origin);
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[0].passed);
    }

    #[test]
    fn wrong_city_item_fails_current_city_but_not_sandbox() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        // A real restaurant from a city the traveler is not in that day.
        let elsewhere = sb
            .restaurants
            .iter()
            .find(|r| r.city != q.origin && r.city != q.destination[0])
            .unwrap();
        plan.entries[1].lunch = format!("{}, {}", elsewhere.name, elsewhere.city);
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[5].passed, "current-city check should fail");
        assert!(results[6].passed, "sandbox check should still pass");
    }

    #[test]
    fn missing_meal_fails_not_absent() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        plan.entries[1].dinner = "-".to_string();
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[7].passed);
    }

    #[test]
    fn missing_transport_on_transit_day_fails_not_absent() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        plan.entries[0].transportation = "-".to_string();
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[7].passed);
    }

    #[test]
    fn short_plan_fails_not_absent() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        plan.entries.pop();
        let results = check_commonsense(&sb, &q, &plan);
        assert!(!results[7].passed);
    }

    #[test]
    fn vacuous_hard_checks_are_inapplicable_but_passed() {
        let sb = tiny();
        let q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        let results = check_hard(&sb, &q, &plan);
        for r in &results[..4] {
            assert!(!r.applicable, "{} should be vacuous", r.name);
            assert!(r.passed, "{} passes by convention", r.name);
        }
        assert!(results[4].applicable, "cost is always imposed");
        assert!(results[4].passed);
    }

    #[test]
    fn cost_boundary_is_inclusive() {
        let sb = tiny();
        let mut q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        let total = plan_cost(&sb, &q, &plan);
        q.budget = total;
        let results = check_hard(&sb, &q, &plan);
        assert!(results[4].passed, "cost equal to budget must pass");
        q.budget = total - 1.0;
        let results = check_hard(&sb, &q, &plan);
        assert!(!results[4].passed);
    }

    #[test]
    fn cuisine_constraint_fails_without_matching_meal() {
        let sb = tiny();
        let mut q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        // A cuisine no restaurant in the plan serves, if one exists; otherwise
        // fall back to asserting the pass case.
        let used: Vec<&crate::sandbox::Restaurant> = plan
            .entries
            .iter()
            .flat_map(|e| [&e.breakfast, &e.lunch, &e.dinner])
            .filter_map(|m| parse_name_city(m))
            .filter_map(|(n, c)| sb.restaurant(&n, &c))
            .collect();
        let unused_cuisine = crate::sandbox::CUISINES
            .iter()
            .find(|c| !used.iter().any(|r| r.cuisines.contains(**c)));
        if let Some(cuisine) = unused_cuisine {
            q.local_constraint.cuisine = Some(cuisine.to_string());
            let results = check_hard(&sb, &q, &plan);
            assert!(results[0].applicable);
            assert!(!results[0].passed);
        }
        let served = used[0].cuisines.iter().next().unwrap().clone();
        q.local_constraint.cuisine = Some(served);
        let results = check_hard(&sb, &q, &plan);
        assert!(results[0].passed);
    }

    #[test]
    fn forbidden_mode_fails_hard_transportation() {
        let sb = tiny();
        let mut q = base_query(&sb);
        q.local_constraint.transportation = Some(crate::query_gen::ForbiddenMode::NoSelfDriving);
        let mut plan = valid_plan(&sb, &q);
        plan.entries[0].transportation =
            format!("Self-driving, from {} to {}", q.origin, q.destination[0]);
        let results = check_hard(&sb, &q, &plan);
        assert!(results[2].applicable);
        assert!(!results[2].passed);
    }

    #[test]
    fn undelivered_report_fails_everything() {
        let sb = tiny();
        let mut q = base_query(&sb);
        q.local_constraint.cuisine = Some("Mexican".to_string());
        let report = evaluate_response(&sb, &q, "no think tags here", EvalOptions::default());
        assert!(!report.delivered);
        assert!(!report.final_pass);
        assert_eq!(report.commonsense_micro, 0.0);
        assert_eq!(report.hard_micro, 0.0);
        assert!(report.commonsense.iter().all(|c| !c.passed && c.applicable));
        // Imposed hard checks are applicable and failed; vacuous ones are not
        // applicable.
        assert!(report.hard[0].applicable && !report.hard[0].passed);
        assert!(!report.hard[1].applicable);
        assert!(report.hard[4].applicable && !report.hard[4].passed);
    }

    #[test]
    fn six_of_eight_commonsense_gives_micro_075() {
        let sb = tiny();
        let q = base_query(&sb);
        let mut plan = valid_plan(&sb, &q);
        // Break exactly the two information checks with one wrong-city item
        // plus one fabricated name.
        let elsewhere = sb
            .restaurants
            .iter()
            .find(|r| r.city != q.origin && r.city != q.destination[0])
            .unwrap();
        plan.entries[1].lunch = format!("{}, {}", elsewhere.name, elsewhere.city);
        plan.entries[1].dinner = format!("Fabricated Bistro, {}", q.destination[0]);
        let report = evaluate_plan(&sb, &q, &plan, EvalOptions::default());
        let failed: Vec<&str> = report
            .commonsense
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(
            failed,
            vec![
                "is valid restaurant",
                "is valid information in the current city",
                "is valid information in the sandbox"
            ]
        );
        assert_eq!(report.commonsense_micro, 5.0 / 8.0);
    }

    #[test]
    fn aggregate_pools_micro_rates() {
        let sb = tiny();
        let q = base_query(&sb);
        let good = evaluate_plan(&sb, &q, &valid_plan(&sb, &q), EvalOptions::default());
        let mut half = good.clone();
        for c in half.commonsense.iter_mut().take(4) {
            c.passed = false;
        }
        half.commonsense_micro = 0.5;
        half.commonsense_macro_pass = false;
        half.final_pass = false;
        let rates = aggregate(&[good, half], EvalOptions::default()).unwrap();
        assert_eq!(rates.commonsense_micro, 0.75);
        assert_eq!(rates.commonsense_macro, 0.5);
        assert_eq!(rates.delivery_rate, 1.0);
        assert_eq!(rates.final_pass_rate, 0.5);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            aggregate(&[], EvalOptions::default()),
            Err(EvalError::EmptyBatch)
        ));
    }

    #[test]
    fn count_vacuous_hard_widens_denominator() {
        let sb = tiny();
        let q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        let default = evaluate_plan(&sb, &q, &plan, EvalOptions::default());
        assert_eq!(default.hard_micro, 1.0);
        let wide = evaluate_plan(
            &sb,
            &q,
            &plan,
            EvalOptions {
                count_vacuous_hard: true,
            },
        );
        // All five count and all five pass.
        assert_eq!(wide.hard_micro, 1.0);
        let mut q_over = q.clone();
        q_over.budget = 0.0;
        let narrow = evaluate_plan(&sb, &q_over, &plan, EvalOptions::default());
        assert_eq!(narrow.hard_micro, 0.0, "only cost counts and it fails");
        let wide_over = evaluate_plan(
            &sb,
            &q_over,
            &plan,
            EvalOptions {
                count_vacuous_hard: true,
            },
        );
        assert_eq!(wide_over.hard_micro, 4.0 / 5.0);
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(percent(1.0), "100");
        assert_eq!(percent(0.386), "38.6");
        assert_eq!(percent(0.990375), "99.0375");
        assert_eq!(percent(0.0), "0");
        assert_eq!(percent(0.5), "50");
    }

    #[test]
    fn csv_rows_use_1_0_na() {
        let sb = tiny();
        let q = base_query(&sb);
        let report = evaluate_plan(&sb, &q, &valid_plan(&sb, &q), EvalOptions::default());
        let batch = batch_report(vec![("q00000".to_string(), report)], EvalOptions::default())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("per_query.csv");
        write_batch_csv(&batch, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("query_id,delivered,cs_reasonable_visiting_city"));
        assert!(header.contains("hard_valid_cost"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("q00000,1,1,"));
        assert!(row.contains("na"), "vacuous hard checks render as na: {row}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let sb = tiny();
        let q = base_query(&sb);
        let plan = valid_plan(&sb, &q);
        let a = evaluate_plan(&sb, &q, &plan, EvalOptions::default());
        let b = evaluate_plan(&sb, &q, &plan, EvalOptions::default());
        assert_eq!(a, b);
    }
}
