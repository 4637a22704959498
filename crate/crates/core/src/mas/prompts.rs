//! Prompt templates for the three agent roles.
//!
//! Templates are deterministic string builders: same inputs, same bytes. The
//! reasoner prompt carries the full reference information; judges see only
//! the query and the reasoner's work; the reflector sees both.

use crate::query_gen::{Query, ReferenceInformation};
use crate::sandbox::TransportMode;

use super::{JUDGE_ERRORS, JUDGE_NO_ERRORS};

/// Line prefix the reflector is told to place before its corrected plan.
pub const FINAL_ANSWER_MARKER: &str = "FINAL ANSWER:";

/// The output contract shared with any model asked to produce a plan.
const PLAN_FORMAT_RULES: &str = "Output format: first write your reasoning between <think> and </think>, then immediately output the travel plan as a JSON array with one object per day and exactly these keys in order: day, current_city, transportation, breakfast, lunch, dinner, attraction, accommodation. Use \"-\" for an empty field. Write restaurants, attractions and accommodations as \"Name, City\". On a travel day write current_city as \"from A to B\" and transportation as \"Flight Number: F0000000, from A to B\", \"Self-driving, from A to B\" or \"Taxi, from A to B\". Attractions may list several \"Name, City\" items joined by \";\". Do not invent any name that is not in the reference information.";

pub fn render_reference(reference: &ReferenceInformation) -> String {
    let mut out = String::new();
    for segment in &reference.segments {
        out.push_str(&format!(
            "Transportation from {} to {} on {}:\n",
            segment.from, segment.to, segment.date
        ));
        if segment.options.is_empty() {
            out.push_str("- none\n");
        }
        for link in &segment.options {
            match link.mode {
                TransportMode::Flight => out.push_str(&format!(
                    "- Flight {}, cost {:.0} per person, duration {} minutes\n",
                    link.flight_number.as_deref().unwrap_or("?"),
                    link.cost,
                    link.duration
                )),
                mode => out.push_str(&format!(
                    "- {}, cost {:.0} per group, duration {} minutes\n",
                    capitalize(mode.label()),
                    link.cost,
                    link.duration
                )),
            }
        }
        out.push('\n');
    }
    for listing in &reference.cities {
        out.push_str(&format!("Restaurants in {}:\n", listing.city));
        if listing.restaurants.is_empty() {
            out.push_str("- none\n");
        }
        for r in &listing.restaurants {
            let cuisines: Vec<&str> = r.cuisines.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!(
                "- {}, cuisines: {}, average cost {:.0} per person\n",
                r.name,
                cuisines.join("/"),
                r.avg_cost
            ));
        }
        out.push_str(&format!("Attractions in {}:\n", listing.city));
        if listing.attractions.is_empty() {
            out.push_str("- none\n");
        }
        for a in &listing.attractions {
            out.push_str(&format!("- {}\n", a.name));
        }
        out.push_str(&format!("Accommodations in {}:\n", listing.city));
        if listing.accommodations.is_empty() {
            out.push_str("- none\n");
        }
        for a in &listing.accommodations {
            let rules: Vec<&str> = a.house_rules.iter().map(|s| s.as_str()).collect();
            let rules = if rules.is_empty() {
                "none".to_string()
            } else {
                rules.join(", ")
            };
            out.push_str(&format!(
                "- {}, {}, {:.0} per night per room, up to {} guests, minimum stay {} nights, house rules: {}\n",
                a.name,
                a.room_type.label(),
                a.price_per_night,
                a.max_occupancy,
                a.min_nights,
                rules
            ));
        }
        out.push('\n');
    }
    out
}

pub fn build_reasoner_prompt(query: &Query, reference: &ReferenceInformation) -> String {
    format!(
        "You are the Reasoner, an expert travel planner. Plan a trip that satisfies the query below, using only the reference information — every restaurant, attraction, accommodation, flight and route you mention must appear there verbatim.\n\nQuery: {}\n\nReference information:\n{}\n{}",
        query.query_text,
        render_reference(reference),
        PLAN_FORMAT_RULES
    )
}

pub fn build_judge_prompt(query: &Query, reasoner_think: &str, reasoner_answer: &str) -> String {
    format!(
        "You are a Judge. Review the Reasoner's reasoning below for errors with respect to the query. You only check for errors; do not rewrite the plan. If you detect an error, output \"{}\". If no errors are found, output \"{}\". Output nothing else.\n\nQuery: {}\n\nReasoner's reasoning:\n{}\n\nReasoner's answer:\n{}\n",
        JUDGE_ERRORS, JUDGE_NO_ERRORS, query.query_text, reasoner_think, reasoner_answer
    )
}

pub fn build_reflector_prompt(
    query: &Query,
    reference: &ReferenceInformation,
    reasoner_think: &str,
    reasoner_answer: &str,
) -> String {
    format!(
        "You are the Reflector. A Judge detected errors in the Reasoner's work below. First point out the errors in the reasoning, then give the corrections. Finally output a line reading exactly \"{}\" followed by the corrected travel plan as a JSON array in the same format the Reasoner was asked for.\n\nQuery: {}\n\nReference information:\n{}\nReasoner's reasoning:\n{}\n\nReasoner's answer:\n{}\n",
        FINAL_ANSWER_MARKER,
        query.query_text,
        render_reference(reference),
        reasoner_think,
        reasoner_answer
    )
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query_gen::generate_queries;
    use crate::sandbox::{generate_sandbox, SizeProfile};
    use std::collections::BTreeSet;

    fn fixture() -> (Query, ReferenceInformation) {
        let sb = generate_sandbox(42, SizeProfile::Tiny);
        let mut batch = generate_queries(&sb, 1, 7, &BTreeSet::new()).unwrap();
        batch.pop().unwrap()
    }

    #[test]
    fn reasoner_prompt_is_deterministic() {
        let (q, reference) = fixture();
        assert_eq!(
            build_reasoner_prompt(&q, &reference),
            build_reasoner_prompt(&q, &reference)
        );
    }

    #[test]
    fn reasoner_prompt_contains_every_section_header() {
        let (q, reference) = fixture();
        let prompt = build_reasoner_prompt(&q, &reference);
        for segment in &reference.segments {
            let header = format!(
                "Transportation from {} to {} on {}:",
                segment.from, segment.to, segment.date
            );
            assert!(prompt.contains(&header), "missing {header}");
        }
        for listing in &reference.cities {
            for header in [
                format!("Restaurants in {}:", listing.city),
                format!("Attractions in {}:", listing.city),
                format!("Accommodations in {}:", listing.city),
            ] {
                assert!(prompt.contains(&header), "missing {header}");
            }
        }
        assert!(prompt.contains(&q.query_text));
    }

    #[test]
    fn prompt_grows_with_reference_size() {
        let (q, reference) = fixture();
        let small = build_reasoner_prompt(&q, &reference);
        let mut bigger = reference.clone();
        let extra = bigger.cities[0].restaurants[0].clone();
        bigger.cities[0].restaurants.push(extra);
        let large = build_reasoner_prompt(&q, &bigger);
        assert!(large.len() > small.len());
    }

    #[test]
    fn judge_prompt_spells_out_both_verdicts() {
        let (q, _) = fixture();
        let prompt = build_judge_prompt(&q, "thinking...", "[]");
        assert!(prompt.contains(JUDGE_ERRORS));
        assert!(prompt.contains(JUDGE_NO_ERRORS));
        assert!(prompt.contains("thinking..."));
    }

    #[test]
    fn reflector_prompt_instructs_final_answer_marker() {
        let (q, reference) = fixture();
        let prompt = build_reflector_prompt(&q, &reference, "thinking...", "[]");
        assert!(prompt.contains(FINAL_ANSWER_MARKER));
        assert!(prompt.contains("Reference information:"));
    }
}
