//! Deterministic reference planner and the backends built on it.
//!
//! [`oracle_plan`] solves a query with the canonical odd-day template (city
//! changes on days 1, 3, 5, …, two nights per city, return on the final day)
//! using the same cost arithmetic the checker applies, and reports whether
//! its own plan satisfies every check. Infeasible components are emitted as
//! `"-"`, so the verdict and the checker's verdict agree by construction.
//! The backends wrap the planner so an end-to-end pipeline run needs no live
//! model.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;

use crate::plan::{
    format_flight, format_ground, format_name_city, format_transit_city, parse_plan,
    serialize_plan, DayEntry, TravelPlan,
};
use crate::query_gen::{accommodation_meets, itinerary_legs, Query, ReferenceInformation};
use crate::sandbox::{Accommodation, Restaurant, Sandbox, TransportLink, TransportMode};

use super::backend::{approx_tokens, AgentBackend, AgentReply, BackendError, ScriptedBackend, TokenUsage};
use super::{prompts, AgentRole, MasBackends, JUDGE_NO_ERRORS};

/// Planner output: the plan as it would be emitted, the planner's own verdict
/// on it, and the narration used as the think section of a scripted reply.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlan {
    pub plan: TravelPlan,
    /// True iff `notes` is empty: the planner found every component and the
    /// total fits the budget.
    pub feasible: bool,
    /// Total cost of the emitted components, computed exactly as the checker
    /// prices a plan.
    pub cost: f64,
    /// One line per reason the query cannot be satisfied.
    pub notes: Vec<String>,
    pub narration: String,
}

/// Minimum think-section length; keeps the reflection marker inside the
/// trailing placement window even for long reflection content.
const MIN_NARRATION_CHARS: usize = 900;

const FILLER: &str = "I re-check every name, route and price against the reference tables before committing to the final answer. ";

/// Trip-wide transport regime. Flights and self-driving may never appear in
/// the same trip, so legs are chosen within one world.
#[derive(Clone, Copy, PartialEq)]
enum World {
    Ground,
    Air,
}

struct LegPick<'a> {
    link: &'a TransportLink,
    /// What the whole group pays: flights are per person, ground per group.
    cost: f64,
}

fn leg_pick<'a>(
    sandbox: &'a Sandbox,
    from: &str,
    to: &str,
    date: NaiveDate,
    people: f64,
    world: World,
    forbidden: Option<TransportMode>,
) -> Option<LegPick<'a>> {
    sandbox
        .links_between(from, to)
        .into_iter()
        .filter_map(|link| {
            if Some(link.mode) == forbidden {
                return None;
            }
            match (world, link.mode) {
                (World::Ground, TransportMode::Flight)
                | (World::Air, TransportMode::SelfDriving) => None,
                (_, TransportMode::Flight) => link
                    .available_on(date)
                    .then_some(LegPick { link, cost: link.cost * people }),
                _ => Some(LegPick { link, cost: link.cost }),
            }
        })
        .min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap())
}

fn stay_rooms(acc: &Accommodation, people: u32) -> u32 {
    people.div_ceil(acc.max_occupancy)
}

fn night_price(acc: &Accommodation, people: u32) -> f64 {
    acc.price_per_night * stay_rooms(acc, people) as f64
}

pub fn oracle_plan(sandbox: &Sandbox, query: &Query) -> OraclePlan {
    debug_assert_eq!(
        query.days,
        2 * query.visiting_city_number + 1,
        "planner only handles the canonical odd-day template"
    );
    let people = query.people_number as f64;
    let forbidden = query.local_constraint.transportation.map(|f| f.mode());
    let mut notes: Vec<String> = Vec::new();
    let mut cost = 0.0;
    let mut narration = format!(
        "Planning a {}-day trip from {} visiting {}, for {} people with a budget of {:.0}. I will change cities on odd days, spend two nights in each city, and return on the final day.\n",
        query.days,
        query.origin,
        query.destination.join(" and "),
        query.people_number,
        query.budget
    );

    // Transport: evaluate both worlds and keep the cheaper complete one, so
    // flights and self-driving never mix.
    let legs = itinerary_legs(&query.origin, &query.destination);
    let pick_world = |world: World| -> Vec<Option<LegPick<'_>>> {
        legs.iter()
            .map(|(from, to, day)| {
                leg_pick(
                    sandbox,
                    from,
                    to,
                    query.date[*day as usize - 1],
                    people,
                    world,
                    forbidden,
                )
            })
            .collect()
    };
    let ground = pick_world(World::Ground);
    let air = pick_world(World::Air);
    let world_total =
        |picks: &[Option<LegPick>]| picks.iter().map(|p| p.as_ref().map(|x| x.cost)).sum::<Option<f64>>();
    let picks = match (world_total(&ground), world_total(&air)) {
        (Some(g), Some(a)) if a < g => air,
        (Some(_), _) => ground,
        (None, Some(_)) => air,
        (None, None) => {
            // Neither world covers every leg; keep the one covering more so
            // the emitted plan is as complete as possible.
            let covered = |p: &[Option<LegPick>]| p.iter().flatten().count();
            if covered(&air) > covered(&ground) {
                air
            } else {
                ground
            }
        }
    };

    let mut transit_by_day: BTreeMap<u32, (String, String, Option<String>)> = BTreeMap::new();
    for ((from, to, day), pick) in legs.iter().zip(picks.iter()) {
        let date = query.date[*day as usize - 1];
        match pick {
            Some(p) => {
                let (value, label) = match p.link.mode {
                    TransportMode::Flight => {
                        let number = p.link.flight_number.as_deref().unwrap_or("");
                        (format_flight(number, from, to), format!("flight {number}"))
                    }
                    mode => (format_ground(mode, from, to), mode.label().to_string()),
                };
                narration.push_str(&format!(
                    "Day {day} ({date}): {from} to {to} by {label}, {:.0} for the group.\n",
                    p.cost
                ));
                cost += p.cost;
                transit_by_day.insert(*day, (from.clone(), to.clone(), Some(value)));
            }
            None => {
                notes.push(format!("no allowed transport from {from} to {to} on {date}"));
                narration.push_str(&format!(
                    "Day {day} ({date}): I found no allowed way to get from {from} to {to}.\n"
                ));
                transit_by_day.insert(*day, (from.clone(), to.clone(), None));
            }
        }
    }

    // Lodging: cheapest stay per destination that satisfies the constraints
    // and tolerates a two-night visit.
    let mut lodging: BTreeMap<&str, &Accommodation> = BTreeMap::new();
    for city in &query.destination {
        let options = sandbox.accommodations_in(city);
        if options.is_empty() {
            continue; // nothing to book and nothing the checker requires
        }
        let best = options
            .into_iter()
            .filter(|a| accommodation_meets(a, &query.local_constraint) && a.min_nights <= 2)
            .min_by(|a, b| {
                night_price(a, query.people_number)
                    .partial_cmp(&night_price(b, query.people_number))
                    .unwrap()
            });
        match best {
            Some(acc) => {
                let per_night = night_price(acc, query.people_number);
                cost += per_night * 2.0;
                narration.push_str(&format!(
                    "In {city} I stay two nights at {}, {} room(s) at {:.0} per night.\n",
                    acc.name,
                    stay_rooms(acc, query.people_number),
                    per_night
                ));
                lodging.insert(city.as_str(), acc);
            }
            None => {
                notes.push(format!(
                    "no accommodation in {city} satisfies the constraints"
                ));
                narration.push_str(&format!(
                    "No accommodation in {city} satisfies the constraints, so those nights stay open.\n"
                ));
            }
        }
    }

    // Walk the template once to know each day's cities.
    let mut day_cities: Vec<Vec<String>> = Vec::new();
    let mut location = query.origin.clone();
    for day in 1..=query.days {
        if let Some((from, to, _)) = transit_by_day.get(&day) {
            day_cities.push(vec![from.clone(), to.clone()]);
            location = to.clone();
        } else {
            day_cities.push(vec![location.clone()]);
        }
    }

    // Reserve the cheapest restaurant serving a required cuisine before the
    // greedy fill, then fill every day with the cheapest unused restaurants.
    let mut used_restaurants: BTreeSet<(String, String)> = BTreeSet::new();
    let mut reserved: Option<(usize, String, String, f64)> = None;
    if let Some(want) = &query.local_constraint.cuisine {
        let mut best: Option<(f64, usize, String, String)> = None;
        for (idx, cities) in day_cities.iter().enumerate() {
            for city in cities {
                for r in sandbox.restaurants_in(city) {
                    if r.cuisines.contains(want)
                        && best.as_ref().is_none_or(|(c, ..)| r.avg_cost < *c)
                    {
                        best = Some((r.avg_cost, idx, r.name.clone(), r.city.clone()));
                    }
                }
            }
        }
        match best {
            Some((meal_cost, idx, name, city)) => {
                used_restaurants.insert((name.clone(), city.clone()));
                narration.push_str(&format!(
                    "To cover the {want} requirement, day {} includes a meal at {name}.\n",
                    idx + 1
                ));
                reserved = Some((idx, name, city, meal_cost));
            }
            None => {
                notes.push(format!("no reachable restaurant serves {want} cuisine"));
                narration.push_str(&format!(
                    "No restaurant along the route serves {want} cuisine.\n"
                ));
            }
        }
    }

    let mut meals: Vec<[String; 3]> = Vec::new();
    for (idx, cities) in day_cities.iter().enumerate() {
        let mut chosen: Vec<(String, String, f64)> = Vec::new();
        if let Some((ridx, name, city, meal_cost)) = &reserved {
            if *ridx == idx {
                chosen.push((name.clone(), city.clone(), *meal_cost));
            }
        }
        let mut pool: Vec<&Restaurant> = cities
            .iter()
            .flat_map(|c| sandbox.restaurants_in(c))
            .filter(|r| !used_restaurants.contains(&(r.name.clone(), r.city.clone())))
            .collect();
        pool.sort_by(|a, b| {
            a.avg_cost
                .partial_cmp(&b.avg_cost)
                .unwrap()
                .then_with(|| a.name.cmp(&b.name))
                .then_with(|| a.city.cmp(&b.city))
        });
        for r in pool {
            if chosen.len() == 3 {
                break;
            }
            used_restaurants.insert((r.name.clone(), r.city.clone()));
            chosen.push((r.name.clone(), r.city.clone(), r.avg_cost));
        }
        let any_exist = cities.iter().any(|c| !sandbox.restaurants_in(c).is_empty());
        if chosen.len() < 3 && any_exist {
            notes.push(format!(
                "day {}: only {} distinct restaurants left for three meals",
                idx + 1,
                chosen.len()
            ));
        }
        for (_, _, meal_cost) in &chosen {
            cost += meal_cost * people;
        }
        narration.push_str(&format!(
            "Day {} meals: {}.\n",
            idx + 1,
            if chosen.is_empty() {
                "none available".to_string()
            } else {
                chosen
                    .iter()
                    .map(|(n, _, _)| n.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            }
        ));
        let mut slots = chosen.iter().map(|(n, c, _)| format_name_city(n, c));
        meals.push([
            slots.next().unwrap_or_else(|| "-".to_string()),
            slots.next().unwrap_or_else(|| "-".to_string()),
            slots.next().unwrap_or_else(|| "-".to_string()),
        ]);
    }

    // One fresh attraction a day where available; attractions are free and
    // never required, so a missing one is not a defect.
    let mut used_attractions: BTreeSet<(String, String)> = BTreeSet::new();
    let mut attractions: Vec<Option<(String, String)>> = Vec::new();
    for cities in &day_cities {
        let found = cities
            .iter()
            .flat_map(|c| sandbox.attractions_in(c))
            .find(|a| !used_attractions.contains(&(a.name.clone(), a.city.clone())))
            .map(|a| (a.name.clone(), a.city.clone()));
        if let Some(key) = &found {
            used_attractions.insert(key.clone());
        }
        attractions.push(found);
    }

    if cost > query.budget {
        notes.push(format!(
            "projected cost {:.0} exceeds the budget {:.0}",
            cost, query.budget
        ));
    }
    narration.push_str(&format!(
        "Total projected cost is {:.0} against the budget of {:.0}; {}.\n",
        cost,
        query.budget,
        if cost <= query.budget {
            "the plan fits"
        } else {
            "the budget cannot be met"
        }
    ));
    while narration.chars().count() < MIN_NARRATION_CHARS {
        narration.push_str(FILLER);
    }

    let mut entries = Vec::new();
    for (idx, cities) in day_cities.iter().enumerate() {
        let day = idx as u32 + 1;
        let (current_city, transportation) = match transit_by_day.get(&day) {
            Some((from, to, value)) => (
                format_transit_city(from, to),
                value.clone().unwrap_or_else(|| "-".to_string()),
            ),
            None => (cities[0].clone(), "-".to_string()),
        };
        let night_city = cities.last().expect("every day has a city");
        let accommodation = if day < query.days {
            lodging
                .get(night_city.as_str())
                .map(|a| format_name_city(&a.name, &a.city))
                .unwrap_or_else(|| "-".to_string())
        } else {
            "-".to_string()
        };
        let [breakfast, lunch, dinner] = meals[idx].clone();
        let attraction = attractions[idx]
            .as_ref()
            .map(|(n, c)| format_name_city(n, c))
            .unwrap_or_else(|| "-".to_string());
        entries.push(DayEntry {
            day,
            current_city,
            transportation,
            breakfast,
            lunch,
            dinner,
            attraction,
            accommodation,
        });
    }

    OraclePlan {
        plan: TravelPlan { entries },
        feasible: notes.is_empty(),
        cost,
        notes,
        narration,
    }
}

/// Replays planner-built replies keyed by the exact reasoner prompt.
pub struct OracleReasoner {
    replies: HashMap<String, String>,
}

impl OracleReasoner {
    pub fn new(sandbox: &Sandbox, pairs: &[(Query, ReferenceInformation)]) -> Self {
        let replies = pairs
            .iter()
            .map(|(query, reference)| {
                let prompt = prompts::build_reasoner_prompt(query, reference);
                let solved = oracle_plan(sandbox, query);
                let reply = format!(
                    "<think>{}</think>{}",
                    solved.narration,
                    serialize_plan(&solved.plan)
                );
                (prompt, reply)
            })
            .collect();
        OracleReasoner { replies }
    }
}

impl AgentBackend for OracleReasoner {
    fn role(&self) -> AgentRole {
        AgentRole::Reasoner
    }

    fn invoke(&self, prompt: &str) -> Result<AgentReply, BackendError> {
        let content = self
            .replies
            .get(prompt)
            .cloned()
            .ok_or_else(|| BackendError::MalformedResponse {
                message: "prompt does not match any prepared query".to_string(),
            })?;
        Ok(AgentReply {
            usage: TokenUsage {
                prompt_tokens: approx_tokens(prompt),
                completion_tokens: approx_tokens(&content),
            },
            latency_ms: 0,
            content,
        })
    }
}

/// Echo reflector: restates the draft plan found in the prompt after a fixed
/// reflection paragraph. Keeps the protocol runnable when a judge reports
/// errors in a scripted run.
pub struct OracleReflector;

const REFLECTOR_TEXT: &str = "Reviewing the reasoning, a judge flagged potential issues, so I re-checked every leg, meal, stay and the cost total against the reference information. The selections hold up, and I restate the plan with each name copied verbatim.";

impl AgentBackend for OracleReflector {
    fn role(&self) -> AgentRole {
        AgentRole::Reflector
    }

    fn invoke(&self, prompt: &str) -> Result<AgentReply, BackendError> {
        let answer = last_plan_slice(prompt).unwrap_or("[]");
        let content = format!(
            "{REFLECTOR_TEXT}\n{}\n{answer}",
            prompts::FINAL_ANSWER_MARKER
        );
        Ok(AgentReply {
            usage: TokenUsage {
                prompt_tokens: approx_tokens(prompt),
                completion_tokens: approx_tokens(&content),
            },
            latency_ms: 0,
            content,
        })
    }
}

/// Longest suffix starting at a `[` that parses as a plan.
fn last_plan_slice(text: &str) -> Option<&str> {
    let mut end = text.len();
    while let Some(start) = text[..end].rfind('[') {
        if parse_plan(&text[start..]).is_ok() {
            return Some(text[start..].trim());
        }
        end = start;
    }
    None
}

/// Full backend set for a model-free pipeline run: planner-driven reasoner,
/// judges that always approve, echo reflector.
pub fn oracle_backends(sandbox: &Sandbox, pairs: &[(Query, ReferenceInformation)]) -> MasBackends {
    MasBackends {
        reasoner: Box::new(OracleReasoner::new(sandbox, pairs)),
        judges: [
            Box::new(ScriptedBackend::constant(AgentRole::Judge, JUDGE_NO_ERRORS)),
            Box::new(ScriptedBackend::constant(AgentRole::Judge, JUDGE_NO_ERRORS)),
        ],
        reflector: Box::new(OracleReflector),
    }
}
