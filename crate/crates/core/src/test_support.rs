//! Shared fixtures for unit tests: a seed-42 tiny sandbox, a plain 3-day
//! query over an intra-region pair, and a hand-built plan that satisfies
//! every commonsense check.

use chrono::{Days, NaiveDate};

use crate::plan::{DayEntry, TravelPlan};
use crate::query_gen::{Level, LocalConstraint, Query};
use crate::sandbox::{generate_sandbox, Sandbox, SizeProfile};

pub fn tiny() -> Sandbox {
    generate_sandbox(42, SizeProfile::Tiny)
}

/// Intra-region ordered pair rich enough to host a fully valid 3-day plan:
/// both cities connected by taxi, enough distinct restaurants, an attraction
/// and a short-stay accommodation at the destination.
pub fn pick_pair(sb: &Sandbox) -> (String, String) {
    for chunk in sb.cities.chunks(4) {
        for a in chunk {
            for b in chunk {
                if a.name == b.name {
                    continue;
                }
                if sb.restaurants_in(&a.name).len() >= 4
                    && sb.restaurants_in(&b.name).len() >= 5
                    && !sb.attractions_in(&b.name).is_empty()
                    && sb
                        .accommodations_in(&b.name)
                        .iter()
                        .any(|acc| acc.min_nights <= 2)
                {
                    return (a.name.clone(), b.name.clone());
                }
            }
        }
    }
    panic!("tiny sandbox has no suitable pair");
}

pub fn base_query(sb: &Sandbox) -> Query {
    let (origin, dest) = pick_pair(sb);
    let start = NaiveDate::from_ymd_opt(2022, 3, 10).unwrap();
    Query {
        origin,
        destination: vec![dest],
        days: 3,
        visiting_city_number: 1,
        date: (0..3).map(|d| start + Days::new(d)).collect(),
        people_number: 2,
        local_constraint: LocalConstraint::default(),
        budget: 100_000.0,
        level: Level::Easy,
        query_text: String::new(),
    }
}

/// Plan that passes all eight commonsense checks for `base_query`.
pub fn valid_plan(sb: &Sandbox, q: &Query) -> TravelPlan {
    let o = &q.origin;
    let d = &q.destination[0];
    let ro = sb.restaurants_in(o);
    let rd = sb.restaurants_in(d);
    let attr = sb.attractions_in(d);
    let acc = sb
        .accommodations_in(d)
        .into_iter()
        .find(|a| a.min_nights <= 2)
        .expect("stayable accommodation");
    let meal = |r: &crate::sandbox::Restaurant| format!("{}, {}", r.name, r.city);
    let lodging = format!("{}, {}", acc.name, acc.city);
    TravelPlan {
        entries: vec![
            DayEntry {
                day: 1,
                current_city: format!("from {o} to {d}"),
                transportation: format!("Taxi, from {o} to {d}"),
                breakfast: meal(ro[0]),
                lunch: meal(ro[1]),
                dinner: meal(rd[0]),
                attraction: format!("{}, {}", attr[0].name, attr[0].city),
                accommodation: lodging.clone(),
            },
            DayEntry {
                day: 2,
                current_city: d.clone(),
                transportation: "-".to_string(),
                breakfast: meal(rd[1]),
                lunch: meal(rd[2]),
                dinner: meal(rd[3]),
                attraction: "-".to_string(),
                accommodation: lodging,
            },
            DayEntry {
                day: 3,
                current_city: format!("from {d} to {o}"),
                transportation: format!("Taxi, from {d} to {o}"),
                breakfast: meal(rd[4]),
                lunch: meal(ro[2]),
                dinner: meal(ro[3]),
                attraction: "-".to_string(),
                accommodation: "-".to_string(),
            },
        ],
    }
}
