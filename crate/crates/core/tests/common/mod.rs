//! Shared helpers for the integration suites: an independent re-derivation
//! of every plan check (used to cross-validate the evaluator), a random plan
//! mutator, and fixture plumbing.
//!
//! The checker here is written from the documented rules, on purpose without
//! reusing the evaluator's walk or verdict code, so the two implementations
//! can disagree loudly when one of them drifts.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tripwright_core::eval::{AggregateRates, EvalOptions, EvalReport};
use tripwright_core::plan::TravelPlan;
use tripwright_core::query_gen::{generate_queries, Query, ReferenceInformation};
use tripwright_core::sandbox::{
    generate_sandbox, RoomType, Sandbox, SizeProfile, TransportLink, TransportMode,
};

pub fn fixture_sandbox() -> Sandbox {
    generate_sandbox(42, SizeProfile::Tiny)
}

pub fn fixture_queries(count: usize, seed: u64) -> Vec<(Query, ReferenceInformation)> {
    let sandbox = fixture_sandbox();
    generate_queries(&sandbox, count, seed, &BTreeSet::new()).expect("fixture queries generate")
}

/// Wall-clock guard that prints one pass line per suite entry.
pub struct Stopwatch {
    label: &'static str,
    budget: Duration,
    start: Instant,
}

impl Stopwatch {
    pub fn start(label: &'static str, budget_s: u64) -> Stopwatch {
        Stopwatch {
            label,
            budget: Duration::from_secs(budget_s),
            start: Instant::now(),
        }
    }

    pub fn finish(self) {
        let elapsed = self.start.elapsed();
        assert!(
            elapsed < self.budget,
            "{} exceeded its {}s budget: took {:.2}s",
            self.label,
            self.budget.as_secs(),
            elapsed.as_secs_f64()
        );
        println!(
            "acceptance: {} PASS ({:.2}s, budget {}s)",
            self.label,
            elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
    }
}

// ---------------------------------------------------------------------------
// Independent checker
// ---------------------------------------------------------------------------

/// Flat verdict set mirroring `EvalReport`: eight commonsense pass flags,
/// five hard (applicable, passed) pairs, and the derived aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub commonsense: [bool; 8],
    pub hard_applicable: [bool; 5],
    pub hard_passed: [bool; 5],
    pub commonsense_micro: f64,
    pub commonsense_macro_pass: bool,
    pub hard_micro: f64,
    pub hard_macro_pass: bool,
    pub final_pass: bool,
}

pub fn name_city(s: &str) -> Option<(String, String)> {
    let idx = s.rfind(", ")?;
    let name = s[..idx].trim();
    let city = s[idx + 2..].trim();
    if name.is_empty() || city.is_empty() {
        return None;
    }
    Some((name.to_string(), city.to_string()))
}

fn attraction_items(s: &str) -> Option<Vec<(String, String)>> {
    let t = s.trim();
    let t = t.strip_suffix(';').unwrap_or(t);
    if t.trim().is_empty() {
        return None;
    }
    t.split(';').map(|piece| name_city(piece.trim())).collect()
}

enum Move {
    Stay(String),
    Between(String, String),
    Unreadable,
}

fn day_move(s: &str) -> Move {
    let t = s.trim();
    if t.is_empty() || t == "-" {
        return Move::Unreadable;
    }
    if let Some(rest) = t.strip_prefix("from ") {
        return match rest.split_once(" to ") {
            Some((a, b)) => {
                let (a, b) = (a.trim(), b.trim());
                if a.is_empty() || b.is_empty() {
                    Move::Unreadable
                } else {
                    Move::Between(a.to_string(), b.to_string())
                }
            }
            None => Move::Unreadable,
        };
    }
    Move::Stay(t.to_string())
}

/// Transit route of a day's `current_city` value, if it declares one.
pub fn route_of(current_city: &str) -> Option<(String, String)> {
    match day_move(current_city) {
        Move::Between(a, b) => Some((a, b)),
        _ => None,
    }
}

struct Claim {
    mode: TransportMode,
    number: Option<String>,
    from: String,
    to: String,
}

fn transport_claim(s: &str) -> Option<Claim> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("Flight Number: ") {
        let (number, route) = rest.split_once(", from ")?;
        let (from, to) = route.split_once(" to ")?;
        let (number, from, to) = (number.trim(), from.trim(), to.trim());
        if number.is_empty() || from.is_empty() || to.is_empty() {
            return None;
        }
        return Some(Claim {
            mode: TransportMode::Flight,
            number: Some(number.to_string()),
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    let (mode, rest) = if let Some(rest) = t.strip_prefix("Self-driving, from ") {
        (TransportMode::SelfDriving, rest)
    } else {
        let rest = t.strip_prefix("Taxi, from ")?;
        (TransportMode::Taxi, rest)
    };
    let (from, to) = rest.split_once(" to ")?;
    let (from, to) = (from.trim(), to.trim());
    if from.is_empty() || to.is_empty() {
        return None;
    }
    Some(Claim {
        mode,
        number: None,
        from: from.to_string(),
        to: to.to_string(),
    })
}

struct DaySlots {
    number: u32,
    cities: Vec<String>,
    moved: Option<(String, String)>,
    meals: Vec<(String, String)>,
    sights: Vec<(String, String)>,
    lodging: Option<(String, String)>,
    lodging_raw: Option<String>,
    transport_raw: Option<String>,
}

struct WalkFacts {
    days: Vec<DaySlots>,
    connected: bool,
    visited: Vec<String>,
    back_home: bool,
}

fn derive(query: &Query, plan: &TravelPlan) -> WalkFacts {
    let mut connected = true;
    let mut here = query.origin.clone();
    let mut visited: Vec<String> = Vec::new();
    let mut days = Vec::new();
    for entry in &plan.entries {
        let (cities, moved) = match day_move(&entry.current_city) {
            Move::Stay(c) => {
                if c != here {
                    connected = false;
                }
                here = c.clone();
                (vec![c], None)
            }
            Move::Between(a, b) => {
                if a != here {
                    connected = false;
                }
                here = b.clone();
                (vec![a.clone(), b.clone()], Some((a, b)))
            }
            Move::Unreadable => {
                connected = false;
                (Vec::new(), None)
            }
        };
        for city in &cities {
            if *city != query.origin && !visited.contains(city) {
                visited.push(city.clone());
            }
        }
        let mut meals = Vec::new();
        for value in [&entry.breakfast, &entry.lunch, &entry.dinner] {
            if value != "-" {
                if let Some(pair) = name_city(value) {
                    meals.push(pair);
                }
            }
        }
        let sights = if entry.attraction != "-" {
            attraction_items(&entry.attraction).unwrap_or_default()
        } else {
            Vec::new()
        };
        days.push(DaySlots {
            number: entry.day,
            cities,
            moved,
            meals,
            sights,
            lodging: if entry.accommodation != "-" {
                name_city(&entry.accommodation)
            } else {
                None
            },
            lodging_raw: (entry.accommodation != "-").then(|| entry.accommodation.clone()),
            transport_raw: (entry.transportation != "-").then(|| entry.transportation.clone()),
        });
    }
    WalkFacts {
        days,
        connected,
        visited,
        back_home: here == query.origin,
    }
}

fn restaurant_at<'a>(
    sandbox: &'a Sandbox,
    name: &str,
    city: &str,
) -> Option<&'a tripwright_core::sandbox::Restaurant> {
    sandbox
        .restaurants
        .iter()
        .find(|r| r.name == name && r.city == city)
}

fn accommodation_at<'a>(
    sandbox: &'a Sandbox,
    name: &str,
    city: &str,
) -> Option<&'a tripwright_core::sandbox::Accommodation> {
    sandbox
        .accommodations
        .iter()
        .find(|a| a.name == name && a.city == city)
}

fn flight_numbered<'a>(sandbox: &'a Sandbox, number: &str) -> Option<&'a TransportLink> {
    sandbox
        .links
        .iter()
        .find(|l| l.flight_number.as_deref() == Some(number))
}

pub fn link_available(link: &TransportLink, date: chrono::NaiveDate) -> bool {
    match &link.date_availability {
        Some(dates) => dates.contains(&date),
        None => link.mode != TransportMode::Flight,
    }
}

fn city_known(sandbox: &Sandbox, name: &str) -> bool {
    sandbox.cities.iter().any(|c| c.name == name)
}

/// Independent re-derivation of all thirteen verdicts and the aggregates for
/// a delivered plan.
pub fn reference_check(
    sandbox: &Sandbox,
    query: &Query,
    plan: &TravelPlan,
    options: EvalOptions,
) -> CheckOutcome {
    let facts = derive(query, plan);

    // Commonsense 1: the itinerary is a connected round trip covering
    // exactly the requested cities.
    let visited: BTreeSet<&str> = facts.visited.iter().map(|s| s.as_str()).collect();
    let wanted: BTreeSet<&str> = query.destination.iter().map(|s| s.as_str()).collect();
    let cs_visiting = facts.connected
        && facts.back_home
        && visited == wanted
        && facts.visited.len() == query.visiting_city_number as usize;

    // Commonsense 2: every meal resolves and no restaurant repeats.
    let mut cs_restaurants = true;
    let mut meal_seen: BTreeSet<(String, String)> = BTreeSet::new();
    for day in &facts.days {
        for (name, city) in &day.meals {
            if restaurant_at(sandbox, name, city).is_none() {
                cs_restaurants = false;
            }
            if !meal_seen.insert((name.clone(), city.clone())) {
                cs_restaurants = false;
            }
        }
    }

    // Commonsense 3: every attraction resolves and none repeats.
    let mut cs_attractions = true;
    let mut sight_seen: BTreeSet<(String, String)> = BTreeSet::new();
    for day in &facts.days {
        for (name, city) in &day.sights {
            if !sandbox
                .attractions
                .iter()
                .any(|a| a.name == *name && a.city == *city)
            {
                cs_attractions = false;
            }
            if !sight_seen.insert((name.clone(), city.clone())) {
                cs_attractions = false;
            }
        }
    }

    // Commonsense 4: lodging resolves and every stay honors minimum nights.
    let mut cs_accommodations = true;
    for day in &facts.days {
        if let Some((name, city)) = &day.lodging {
            if accommodation_at(sandbox, name, city).is_none() {
                cs_accommodations = false;
            }
        }
    }
    let mut i = 0;
    while i < facts.days.len() {
        let Some(value) = facts.days[i].lodging_raw.clone() else {
            i += 1;
            continue;
        };
        let start = i;
        while i < facts.days.len() && facts.days[i].lodging_raw.as_ref() == Some(&value) {
            i += 1;
        }
        let nights = (i - start) as u32;
        if let Some((name, city)) = name_city(&value) {
            if let Some(record) = accommodation_at(sandbox, &name, &city) {
                if nights < record.min_nights {
                    cs_accommodations = false;
                }
            }
        }
    }

    // Commonsense 5: transport claims parse, sit on transit days, match the
    // day's route, resolve in the sandbox, and never mix flight with
    // self-driving.
    let mut cs_transport = true;
    let mut flew = false;
    let mut drove = false;
    for day in &facts.days {
        let Some(raw) = &day.transport_raw else {
            continue;
        };
        let Some(claim) = transport_claim(raw) else {
            cs_transport = false;
            continue;
        };
        match claim.mode {
            TransportMode::Flight => flew = true,
            TransportMode::SelfDriving => drove = true,
            TransportMode::Taxi => {}
        }
        let Some((from, to)) = &day.moved else {
            cs_transport = false;
            continue;
        };
        if claim.from != *from || claim.to != *to {
            cs_transport = false;
            continue;
        }
        match claim.mode {
            TransportMode::Flight => {
                let number = claim.number.as_deref().unwrap_or("");
                match flight_numbered(sandbox, number) {
                    None => cs_transport = false,
                    Some(link) => {
                        if link.origin != claim.from || link.destination != claim.to {
                            cs_transport = false;
                        } else {
                            let date = (day.number as usize)
                                .checked_sub(1)
                                .and_then(|idx| query.date.get(idx));
                            match date {
                                Some(d) if link_available(link, *d) => {}
                                _ => cs_transport = false,
                            }
                        }
                    }
                }
            }
            mode => {
                let exists = sandbox.links.iter().any(|l| {
                    l.origin == claim.from && l.destination == claim.to && l.mode == mode
                });
                if !exists {
                    cs_transport = false;
                }
            }
        }
    }
    if flew && drove {
        cs_transport = false;
    }

    // Commonsense 6: every cited item sits in one of the day's cities.
    let mut cs_current = true;
    for day in &facts.days {
        let cited = day
            .meals
            .iter()
            .chain(day.sights.iter())
            .chain(day.lodging.iter());
        for (_, city) in cited {
            if !day.cities.contains(city) {
                cs_current = false;
            }
        }
    }

    // Commonsense 7: every mentioned city, name and flight number exists
    // somewhere in the sandbox.
    let mut cs_sandbox = true;
    for day in &facts.days {
        for city in &day.cities {
            if !city_known(sandbox, city) {
                cs_sandbox = false;
            }
        }
        for (name, city) in &day.meals {
            if !sandbox.restaurants.iter().any(|r| r.name == *name) {
                cs_sandbox = false;
            }
            if !city_known(sandbox, city) {
                cs_sandbox = false;
            }
        }
        for (name, city) in &day.sights {
            if !sandbox.attractions.iter().any(|a| a.name == *name) {
                cs_sandbox = false;
            }
            if !city_known(sandbox, city) {
                cs_sandbox = false;
            }
        }
        if let Some((name, city)) = &day.lodging {
            if !sandbox.accommodations.iter().any(|a| a.name == *name) {
                cs_sandbox = false;
            }
            if !city_known(sandbox, city) {
                cs_sandbox = false;
            }
        }
        if let Some(raw) = &day.transport_raw {
            if let Some(claim) = transport_claim(raw) {
                if !city_known(sandbox, &claim.from) || !city_known(sandbox, &claim.to) {
                    cs_sandbox = false;
                }
                if let Some(number) = &claim.number {
                    if flight_numbered(sandbox, number).is_none() {
                        cs_sandbox = false;
                    }
                }
            }
        }
    }

    // Commonsense 8: nothing required is left blank — day count, transit
    // transport, three meals where restaurants exist, and a bed for every
    // night spent in a city that has accommodations.
    let mut cs_absent = facts.days.len() == query.days as usize;
    let last = facts.days.len().saturating_sub(1);
    for (idx, day) in facts.days.iter().enumerate() {
        if day.moved.is_some() && day.transport_raw.is_none() {
            cs_absent = false;
        }
        let any_restaurant = day
            .cities
            .iter()
            .any(|c| sandbox.restaurants.iter().any(|r| r.city == *c));
        if any_restaurant && day.meals.len() < 3 {
            cs_absent = false;
        }
        if idx < last {
            if let Some(city) = day.cities.last() {
                let any_lodging = sandbox.accommodations.iter().any(|a| a.city == *city);
                if any_lodging && day.lodging_raw.is_none() {
                    cs_absent = false;
                }
            }
        }
    }

    let commonsense = [
        cs_visiting,
        cs_restaurants,
        cs_attractions,
        cs_accommodations,
        cs_transport,
        cs_current,
        cs_sandbox,
        cs_absent,
    ];

    // Hard 1: some meal serves the required cuisine.
    let cuisine_imposed = query.local_constraint.cuisine.is_some();
    let hard_cuisine = match &query.local_constraint.cuisine {
        None => true,
        Some(want) => facts.days.iter().any(|day| {
            day.meals.iter().any(|(name, city)| {
                restaurant_at(sandbox, name, city)
                    .map(|r| r.cuisines.contains(want))
                    .unwrap_or(false)
            })
        }),
    };

    // Hard 2: no chosen lodging forbids the required house rule.
    let rule_imposed = query.local_constraint.house_rule.is_some();
    let hard_rule = match &query.local_constraint.house_rule {
        None => true,
        Some(need) => {
            let banned = format!("no {need}");
            !facts.days.iter().any(|day| {
                day.lodging
                    .as_ref()
                    .and_then(|(name, city)| accommodation_at(sandbox, name, city))
                    .map(|record| record.house_rules.contains(&banned))
                    .unwrap_or(false)
            })
        }
    };

    // Hard 3: the forbidden transport mode never appears.
    let mode_imposed = query.local_constraint.transportation.is_some();
    let hard_mode = match &query.local_constraint.transportation {
        None => true,
        Some(forbidden) => {
            let mode = forbidden.mode();
            !facts.days.iter().any(|day| {
                day.transport_raw
                    .as_ref()
                    .and_then(|raw| transport_claim(raw))
                    .map(|claim| claim.mode == mode)
                    .unwrap_or(false)
            })
        }
    };

    // Hard 4: every chosen lodging has the required room type.
    let room_imposed = query.local_constraint.room_type.is_some();
    let hard_room = match query.local_constraint.room_type {
        None => true,
        Some(want) => !facts.days.iter().any(|day| {
            day.lodging
                .as_ref()
                .and_then(|(name, city)| accommodation_at(sandbox, name, city))
                .map(|record| match want {
                    RoomType::NotSharedRoom => record.room_type == RoomType::SharedRoom,
                    other => record.room_type != other,
                })
                .unwrap_or(false)
        }),
    };

    // Hard 5: the trip stays within budget.
    let hard_budget = plan_total(sandbox, query, &facts) <= query.budget;

    let hard_applicable = [cuisine_imposed, rule_imposed, mode_imposed, room_imposed, true];
    let hard_passed = [hard_cuisine, hard_rule, hard_mode, hard_room, hard_budget];

    let cs_pass = commonsense.iter().filter(|p| **p).count();
    let commonsense_micro = cs_pass as f64 / 8.0;
    let commonsense_macro_pass = cs_pass == 8;

    let mut hard_num = 0usize;
    let mut hard_den = 0usize;
    for k in 0..5 {
        if options.count_vacuous_hard || hard_applicable[k] {
            hard_den += 1;
            if hard_passed[k] {
                hard_num += 1;
            }
        }
    }
    let hard_micro = hard_num as f64 / hard_den as f64;
    let hard_macro_pass = (0..5).all(|k| !hard_applicable[k] || hard_passed[k]);
    let final_pass = commonsense_macro_pass && hard_macro_pass;

    CheckOutcome {
        commonsense,
        hard_applicable,
        hard_passed,
        commonsense_micro,
        commonsense_macro_pass,
        hard_micro,
        hard_macro_pass,
        final_pass,
    }
}

fn plan_total(sandbox: &Sandbox, query: &Query, facts: &WalkFacts) -> f64 {
    let people = query.people_number as f64;
    let mut total = 0.0;
    for day in &facts.days {
        if let Some(raw) = &day.transport_raw {
            if let Some(claim) = transport_claim(raw) {
                match claim.mode {
                    TransportMode::Flight => {
                        if let Some(number) = &claim.number {
                            if let Some(link) = flight_numbered(sandbox, number) {
                                total += link.cost * people;
                            }
                        }
                    }
                    mode => {
                        if let Some(link) = sandbox.links.iter().find(|l| {
                            l.origin == claim.from && l.destination == claim.to && l.mode == mode
                        }) {
                            total += link.cost;
                        }
                    }
                }
            }
        }
        for (name, city) in &day.meals {
            if let Some(r) = restaurant_at(sandbox, name, city) {
                total += r.avg_cost * people;
            }
        }
        if let Some((name, city)) = &day.lodging {
            if let Some(a) = accommodation_at(sandbox, name, city) {
                let rooms = query.people_number.div_ceil(a.max_occupancy);
                total += a.price_per_night * rooms as f64;
            }
        }
    }
    total
}

/// True when the evaluator's report agrees with the independent outcome on
/// every verdict and every derived number.
pub fn outcome_matches(report: &EvalReport, outcome: &CheckOutcome) -> bool {
    report.delivered
        && report.commonsense.len() == 8
        && report.hard.len() == 5
        && report
            .commonsense
            .iter()
            .zip(outcome.commonsense)
            .all(|(c, passed)| c.applicable && c.passed == passed)
        && report
            .hard
            .iter()
            .enumerate()
            .all(|(k, c)| {
                c.applicable == outcome.hard_applicable[k] && c.passed == outcome.hard_passed[k]
            })
        && report.commonsense_micro == outcome.commonsense_micro
        && report.commonsense_macro_pass == outcome.commonsense_macro_pass
        && report.hard_micro == outcome.hard_micro
        && report.hard_macro_pass == outcome.hard_macro_pass
        && report.final_pass == outcome.final_pass
}

/// Batch aggregation over independent outcomes (all delivered), mirroring the
/// six published rates.
pub fn reference_aggregate(outcomes: &[CheckOutcome], options: EvalOptions) -> AggregateRates {
    let n = outcomes.len() as f64;
    let mut cs_num = 0usize;
    let mut cs_den = 0usize;
    let mut hard_num = 0usize;
    let mut hard_den = 0usize;
    for outcome in outcomes {
        cs_num += outcome.commonsense.iter().filter(|p| **p).count();
        cs_den += 8;
        for k in 0..5 {
            if options.count_vacuous_hard || outcome.hard_applicable[k] {
                hard_den += 1;
                if outcome.hard_passed[k] {
                    hard_num += 1;
                }
            }
        }
    }
    AggregateRates {
        delivery_rate: 1.0,
        commonsense_micro: cs_num as f64 / cs_den as f64,
        commonsense_macro: outcomes
            .iter()
            .filter(|o| o.commonsense_macro_pass)
            .count() as f64
            / n,
        hard_micro: hard_num as f64 / hard_den as f64,
        hard_macro: outcomes.iter().filter(|o| o.hard_macro_pass).count() as f64 / n,
        final_pass_rate: outcomes.iter().filter(|o| o.final_pass).count() as f64 / n,
    }
}

// ---------------------------------------------------------------------------
// Plan mutation
// ---------------------------------------------------------------------------

fn random_city(sandbox: &Sandbox, rng: &mut ChaCha8Rng) -> String {
    sandbox.cities[rng.gen_range(0..sandbox.cities.len())]
        .name
        .clone()
}

/// Applies 0..=3 random edits to a copy of `base`, yielding anything from a
/// pristine plan to one broken in several independent ways. Day numbers stay
/// 1-based and consecutive.
pub fn mutate_plan(base: &TravelPlan, sandbox: &Sandbox, rng: &mut ChaCha8Rng) -> TravelPlan {
    let mut plan = base.clone();
    for _ in 0..rng.gen_range(0..=3) {
        random_edit(&mut plan, sandbox, rng);
    }
    plan
}

fn random_edit(plan: &mut TravelPlan, sandbox: &Sandbox, rng: &mut ChaCha8Rng) {
    let di = rng.gen_range(0..plan.entries.len());
    let (from, to) = match day_move(&plan.entries[di].current_city) {
        Move::Between(a, b) => (a, b),
        _ => (random_city(sandbox, rng), random_city(sandbox, rng)),
    };
    let entry = &mut plan.entries[di];
    match rng.gen_range(0..13) {
        0 => *meal_slot(entry, rng) = "-".to_string(),
        1 => {
            let r = &sandbox.restaurants[rng.gen_range(0..sandbox.restaurants.len())];
            *meal_slot(entry, rng) = format!("{}, {}", r.name, r.city);
        }
        2 => {
            let city = random_city(sandbox, rng);
            *meal_slot(entry, rng) = format!("Phantom Table, {city}");
        }
        3 => entry.lunch = entry.breakfast.clone(),
        4 => {
            entry.attraction = if rng.gen_bool(0.5) || sandbox.attractions.is_empty() {
                "-".to_string()
            } else {
                let a = &sandbox.attractions[rng.gen_range(0..sandbox.attractions.len())];
                let b = &sandbox.attractions[rng.gen_range(0..sandbox.attractions.len())];
                format!("{}, {};{}, {}", a.name, a.city, b.name, b.city)
            };
        }
        5 => entry.accommodation = "-".to_string(),
        6 => {
            let a = &sandbox.accommodations[rng.gen_range(0..sandbox.accommodations.len())];
            entry.accommodation = format!("{}, {}", a.name, a.city);
        }
        7 => entry.transportation = "-".to_string(),
        8 => {
            let label = if rng.gen_bool(0.5) { "Taxi" } else { "Self-driving" };
            entry.transportation = format!("{label}, from {from} to {to}");
        }
        9 => {
            let number = match sandbox
                .links
                .iter()
                .filter_map(|l| l.flight_number.as_deref())
                .nth(rng.gen_range(0..24))
            {
                Some(n) => n.to_string(),
                None => "F9999999".to_string(),
            };
            entry.transportation = format!("Flight Number: {number}, from {from} to {to}");
        }
        10 => entry.current_city = random_city(sandbox, rng),
        11 => {
            let a = random_city(sandbox, rng);
            let b = random_city(sandbox, rng);
            entry.current_city = format!("from {a} to {b}");
        }
        _ => {
            if plan.entries.len() > 1 {
                plan.entries.pop();
            }
        }
    }
}

fn meal_slot<'a>(
    entry: &'a mut tripwright_core::plan::DayEntry,
    rng: &mut ChaCha8Rng,
) -> &'a mut String {
    match rng.gen_range(0..3) {
        0 => &mut entry.breakfast,
        1 => &mut entry.lunch,
        _ => &mut entry.dinner,
    }
}

/// Random response text distribution for reward fuzzing: raw noise, broken
/// envelopes, and envelopes around mutated plans.
pub fn fuzz_response(
    sandbox: &Sandbox,
    base: &TravelPlan,
    rng: &mut ChaCha8Rng,
) -> String {
    let think_pool = [
        "",
        "short note",
        "a much longer deliberation that weighs budgets and routes before committing REFLECTION settles nothing here",
        "plain reasoning text REFLECTION(Now, I need to reflect on whether there are any errors in my reasoning above): none found",
    ];
    let think = think_pool[rng.gen_range(0..think_pool.len())];
    match rng.gen_range(0..8) {
        0 => String::new(),
        1 => "no tags at all, just prose".to_string(),
        2 => format!("<think>{think}"),
        3 => format!("<think>{think}</think>"),
        4 => format!("<think>{think}</think>not a plan"),
        5 => format!("<think>{think}</think>{{\"day\":1}}"),
        6 => {
            let plan = mutate_plan(base, sandbox, rng);
            format!(
                "<think>{think}</think>{}",
                tripwright_core::plan::serialize_plan(&plan)
            )
        }
        _ => {
            let plan = mutate_plan(base, sandbox, rng);
            format!(
                "<think>{think}</think>```json\n{}\n```",
                tripwright_core::plan::serialize_plan(&plan)
            )
        }
    }
}
