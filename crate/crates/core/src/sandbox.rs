//! Deterministic synthetic travel sandbox.
//!
//! The sandbox is the single source of truth for every validity check and
//! every piece of reference information: cities, transport links, restaurants,
//! attractions and accommodations. Regeneration from the same `(seed, profile)`
//! pair is bit-identical, and all records pass referential integrity against
//! the city list.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First day of the calendar window queries and flights are drawn from.
pub fn window_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 3, 1).expect("valid date")
}

/// Number of days in the calendar window.
pub const WINDOW_DAYS: u64 = 60;

/// All dates in the calendar window, in order.
pub fn window_dates() -> Vec<NaiveDate> {
    (0..WINDOW_DAYS)
        .map(|d| window_start() + Days::new(d))
        .collect()
}

/// House rule tags an accommodation may impose.
pub const HOUSE_RULES: [&str; 5] = [
    "no pets",
    "no smoking",
    "no parties",
    "no children under 10",
    "no visitors",
];

/// Cuisine tags restaurants are drawn from.
pub const CUISINES: [&str; 7] = [
    "American",
    "Chinese",
    "French",
    "Indian",
    "Italian",
    "Mediterranean",
    "Mexican",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransportMode {
    #[serde(rename = "flight")]
    Flight,
    #[serde(rename = "self-driving")]
    SelfDriving,
    #[serde(rename = "taxi")]
    Taxi,
}

impl TransportMode {
    pub fn label(&self) -> &'static str {
        match self {
            TransportMode::Flight => "flight",
            TransportMode::SelfDriving => "self-driving",
            TransportMode::Taxi => "taxi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoomType {
    #[serde(rename = "entire room")]
    EntireRoom,
    #[serde(rename = "private room")]
    PrivateRoom,
    #[serde(rename = "shared room")]
    SharedRoom,
    #[serde(rename = "not shared room")]
    NotSharedRoom,
}

impl RoomType {
    pub fn label(&self) -> &'static str {
        match self {
            RoomType::EntireRoom => "entire room",
            RoomType::PrivateRoom => "private room",
            RoomType::SharedRoom => "shared room",
            RoomType::NotSharedRoom => "not shared room",
        }
    }

    pub fn parse(s: &str) -> Option<RoomType> {
        match s {
            "entire room" => Some(RoomType::EntireRoom),
            "private room" => Some(RoomType::PrivateRoom),
            "shared room" => Some(RoomType::SharedRoom),
            "not shared room" => Some(RoomType::NotSharedRoom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportLink {
    pub origin: String,
    pub destination: String,
    pub mode: TransportMode,
    /// Currency units per trip: per person for flights, per group otherwise.
    pub cost: f64,
    /// Minutes.
    pub duration: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flight_number: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub date_availability: Option<BTreeSet<NaiveDate>>,
}

impl TransportLink {
    /// True when this flight link can be taken on `date`. Ground links are
    /// always available.
    pub fn available_on(&self, date: NaiveDate) -> bool {
        match &self.date_availability {
            Some(dates) => dates.contains(&date),
            None => self.mode != TransportMode::Flight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restaurant {
    pub name: String,
    pub city: String,
    pub cuisines: BTreeSet<String>,
    /// Currency units per person per meal.
    pub avg_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attraction {
    pub name: String,
    pub city: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accommodation {
    pub name: String,
    pub city: String,
    pub room_type: RoomType,
    /// Currency units per room per night.
    pub price_per_night: f64,
    pub house_rules: BTreeSet<String>,
    pub max_occupancy: u32,
    pub min_nights: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandbox {
    pub cities: Vec<City>,
    pub links: Vec<TransportLink>,
    pub restaurants: Vec<Restaurant>,
    pub attractions: Vec<Attraction>,
    pub accommodations: Vec<Accommodation>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeProfile {
    Tiny,
    Standard,
}

impl SizeProfile {
    fn city_count(&self) -> usize {
        match self {
            SizeProfile::Tiny => 8,
            SizeProfile::Standard => 24,
        }
    }
}

impl std::str::FromStr for SizeProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiny" => Ok(SizeProfile::Tiny),
            "standard" => Ok(SizeProfile::Standard),
            other => Err(format!("unknown profile '{other}', expected tiny|standard")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invariant violation in {record}: {reason}")]
    Invariant { record: String, reason: String },
}

impl Sandbox {
    /// Checks every type invariant plus referential integrity. Run on load
    /// and after generation.
    pub fn validate(&self) -> Result<(), SandboxError> {
        let mut names = HashSet::new();
        for city in &self.cities {
            if city.name.is_empty() {
                return Err(invariant("city", "empty name"));
            }
            if !names.insert(city.name.as_str()) {
                return Err(invariant(
                    &format!("city '{}'", city.name),
                    "duplicate city name",
                ));
            }
        }
        for link in &self.links {
            let record = format!(
                "link {} -> {} ({})",
                link.origin,
                link.destination,
                link.mode.label()
            );
            if link.cost < 0.0 {
                return Err(invariant(&record, "negative cost"));
            }
            if link.duration == 0 {
                return Err(invariant(&record, "non-positive duration"));
            }
            if link.origin == link.destination {
                return Err(invariant(&record, "origin equals destination"));
            }
            let is_flight = link.mode == TransportMode::Flight;
            if link.flight_number.is_some() != is_flight {
                return Err(invariant(&record, "flight_number present iff mode is flight"));
            }
            if link.date_availability.is_some() != is_flight {
                return Err(invariant(
                    &record,
                    "date_availability present iff mode is flight",
                ));
            }
            self.require_city(&link.origin, &record)?;
            self.require_city(&link.destination, &record)?;
        }
        for r in &self.restaurants {
            let record = format!("restaurant '{}' in {}", r.name, r.city);
            if r.avg_cost < 0.0 {
                return Err(invariant(&record, "negative avg_cost"));
            }
            if r.cuisines.is_empty() {
                return Err(invariant(&record, "empty cuisine set"));
            }
            self.require_city(&r.city, &record)?;
        }
        let mut attraction_keys = HashSet::new();
        for a in &self.attractions {
            let record = format!("attraction '{}' in {}", a.name, a.city);
            if !attraction_keys.insert((a.name.as_str(), a.city.as_str())) {
                return Err(invariant(&record, "duplicate (name, city)"));
            }
            self.require_city(&a.city, &record)?;
        }
        for a in &self.accommodations {
            let record = format!("accommodation '{}' in {}", a.name, a.city);
            if a.price_per_night < 0.0 {
                return Err(invariant(&record, "negative price_per_night"));
            }
            if a.max_occupancy == 0 {
                return Err(invariant(&record, "max_occupancy must be >= 1"));
            }
            if a.min_nights == 0 {
                return Err(invariant(&record, "min_nights must be >= 1"));
            }
            self.require_city(&a.city, &record)?;
        }
        Ok(())
    }

    fn require_city(&self, name: &str, record: &str) -> Result<(), SandboxError> {
        if self.city(name).is_none() {
            return Err(invariant(record, &format!("unknown city '{name}'")));
        }
        Ok(())
    }

    pub fn city(&self, name: &str) -> Option<&City> {
        self.cities.iter().find(|c| c.name == name)
    }

    pub fn restaurants_in(&self, city: &str) -> Vec<&Restaurant> {
        self.restaurants.iter().filter(|r| r.city == city).collect()
    }

    pub fn restaurant(&self, name: &str, city: &str) -> Option<&Restaurant> {
        self.restaurants
            .iter()
            .find(|r| r.name == name && r.city == city)
    }

    pub fn restaurant_named(&self, name: &str) -> bool {
        self.restaurants.iter().any(|r| r.name == name)
    }

    pub fn attractions_in(&self, city: &str) -> Vec<&Attraction> {
        self.attractions.iter().filter(|a| a.city == city).collect()
    }

    pub fn attraction(&self, name: &str, city: &str) -> Option<&Attraction> {
        self.attractions
            .iter()
            .find(|a| a.name == name && a.city == city)
    }

    pub fn attraction_named(&self, name: &str) -> bool {
        self.attractions.iter().any(|a| a.name == name)
    }

    pub fn accommodations_in(&self, city: &str) -> Vec<&Accommodation> {
        self.accommodations
            .iter()
            .filter(|a| a.city == city)
            .collect()
    }

    pub fn accommodation(&self, name: &str, city: &str) -> Option<&Accommodation> {
        self.accommodations
            .iter()
            .find(|a| a.name == name && a.city == city)
    }

    pub fn accommodation_named(&self, name: &str) -> bool {
        self.accommodations.iter().any(|a| a.name == name)
    }

    pub fn links_between(&self, from: &str, to: &str) -> Vec<&TransportLink> {
        self.links
            .iter()
            .filter(|l| l.origin == from && l.destination == to)
            .collect()
    }

    pub fn flight_by_number(&self, number: &str) -> Option<&TransportLink> {
        self.links
            .iter()
            .find(|l| l.flight_number.as_deref() == Some(number))
    }
}

fn invariant(record: &str, reason: &str) -> SandboxError {
    SandboxError::Invariant {
        record: record.to_string(),
        reason: reason.to_string(),
    }
}

const CITY_POOL: [(&str, &str); 24] = [
    ("Arlington", "Texas"),
    ("Bakersfield", "California"),
    ("Carson City", "Nevada"),
    ("Dover", "Delaware"),
    ("Eugene", "Oregon"),
    ("Fairbanks", "Alaska"),
    ("Greenville", "South Carolina"),
    ("Hartford", "Connecticut"),
    ("Irvine", "California"),
    ("Joliet", "Illinois"),
    ("Knoxville", "Tennessee"),
    ("Lansing", "Michigan"),
    ("Missoula", "Montana"),
    ("Norfolk", "Virginia"),
    ("Olympia", "Washington"),
    ("Peoria", "Illinois"),
    ("Quincy", "Massachusetts"),
    ("Roswell", "New Mexico"),
    ("Savannah", "Georgia"),
    ("Tucson", "Arizona"),
    ("Utica", "New York"),
    ("Vicksburg", "Mississippi"),
    ("Waco", "Texas"),
    ("Yonkers", "New York"),
];

const RESTAURANT_POOL: [&str; 40] = [
    "Golden Fork",
    "Copper Kettle",
    "Blue Lantern",
    "Maple and Thyme",
    "The Iron Skillet",
    "Harvest Table",
    "Silver Spoon",
    "Ember and Oak",
    "The Velvet Radish",
    "Juniper Kitchen",
    "Crimson Plate",
    "Stonebridge Grill",
    "The Wandering Chef",
    "Saffron House",
    "Old Mill Diner",
    "Lantern and Vine",
    "The Salted Fig",
    "Birchwood Bistro",
    "Clearwater Cafe",
    "The Humble Pie",
    "Marigold Eatery",
    "Northside Noodle",
    "The Brass Pepper",
    "Willow and Sage",
    "Sunset Terrace",
    "The Painted Plate",
    "Cedar Smokehouse",
    "Moonlit Garden",
    "The Corner Hearth",
    "Riverbend Kitchen",
    "The Gilded Olive",
    "Prairie Spice",
    "Tidewater Tavern",
    "The Quiet Kettle",
    "Bluebird Canteen",
    "The Rustic Root",
    "Amber Wok",
    "The Cloth Napkin",
    "Foxglove Diner",
    "Granite Grill",
];

const ATTRACTION_POOL: [&str; 30] = [
    "Heritage Museum",
    "Riverside Park",
    "Old Town Hall",
    "Botanic Gardens",
    "Science Discovery Center",
    "Harbor Lighthouse",
    "Pioneer Village",
    "City Art Gallery",
    "Grand Aquarium",
    "Observatory Hill",
    "Clockwork Arcade",
    "Veterans Memorial",
    "Canyon Overlook",
    "Historic Rail Depot",
    "Sculpture Meadow",
    "Founders Square",
    "Maritime Museum",
    "Cathedral of the Pines",
    "Windmill Heights",
    "Fossil Ridge",
    "The Glass Conservatory",
    "Liberty Bridge",
    "Echo Caverns",
    "Prairie Wildlife Refuge",
    "The Paper Mill",
    "Sunken Gardens",
    "Ironworks District",
    "Beacon Tower",
    "Antique Carousel",
    "Lakeshore Promenade",
];

const ACCOMMODATION_POOL: [&str; 32] = [
    "Sunrise Loft",
    "The Dusty Compass",
    "Harborview Suites",
    "Maple Hollow Inn",
    "The Tin Roof",
    "Cedar Crest Lodge",
    "Wanderer's Rest",
    "The Velvet Pillow",
    "Juniper Bed and Breakfast",
    "Stargazer Cabin",
    "The Brick Annex",
    "Quiet Corner Rooms",
    "Foxtail Manor",
    "The Open Door",
    "Lighthouse Keep",
    "Prairie Sky Motel",
    "The Garden Flat",
    "Old Oak Guesthouse",
    "Riverstone Retreat",
    "The Attic Nook",
    "Bluebell Cottage",
    "Granite Peak Hostel",
    "The Poet's Porch",
    "Willow Way Rooms",
    "Copper Canyon Lodge",
    "The Drift Inn",
    "Morning Glory House",
    "The Slate Roof",
    "Hummingbird Haven",
    "The Long Veranda",
    "Paper Lantern Stay",
    "Crescent Moon Lodge",
];

/// Builds a sandbox deterministically from `(seed, profile)`.
///
/// Cities are partitioned into regions of four; every ordered pair within a
/// region gets one taxi and one self-driving link. Flights exist only for a
/// random subset of cross-region pairs, so some pairs are unreachable and can
/// make queries infeasible. The generator guarantees at least one
/// cross-region pair with no flight at all.
pub fn generate_sandbox(seed: u64, profile: SizeProfile) -> Sandbox {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cities = profile.city_count();

    let mut pool: Vec<(&str, &str)> = CITY_POOL.to_vec();
    pool.shuffle(&mut rng);
    let cities: Vec<City> = pool
        .iter()
        .take(n_cities)
        .map(|(name, state)| City {
            name: name.to_string(),
            state: state.to_string(),
        })
        .collect();

    let regions: Vec<Vec<String>> = cities
        .chunks(4)
        .map(|chunk| chunk.iter().map(|c| c.name.clone()).collect())
        .collect();

    let mut links = Vec::new();
    for region in &regions {
        for a in region {
            for b in region {
                if a == b {
                    continue;
                }
                let duration = rng.gen_range(30..=240);
                links.push(TransportLink {
                    origin: a.clone(),
                    destination: b.clone(),
                    mode: TransportMode::Taxi,
                    cost: rng.gen_range(30..=120) as f64,
                    duration,
                    flight_number: None,
                    date_availability: None,
                });
                links.push(TransportLink {
                    origin: a.clone(),
                    destination: b.clone(),
                    mode: TransportMode::SelfDriving,
                    cost: rng.gen_range(15..=80) as f64,
                    duration,
                    flight_number: None,
                    date_availability: None,
                });
            }
        }
    }

    let dates = window_dates();
    let mut flight_serial = 0u32;
    let mut flightless_pair_exists = false;
    let mut last_cross_pair_flights: Vec<usize> = Vec::new();
    for (ri, ra) in regions.iter().enumerate() {
        for (rj, rb) in regions.iter().enumerate() {
            if ri == rj {
                continue;
            }
            for a in ra {
                for b in rb {
                    if !rng.gen_bool(0.45) {
                        flightless_pair_exists = true;
                        continue;
                    }
                    let n_flights = rng.gen_range(1..=2);
                    last_cross_pair_flights.clear();
                    for _ in 0..n_flights {
                        flight_serial += 1;
                        let availability: BTreeSet<NaiveDate> = dates
                            .iter()
                            .filter(|_| rng.gen_bool(0.75))
                            .copied()
                            .collect();
                        last_cross_pair_flights.push(links.len());
                        links.push(TransportLink {
                            origin: a.clone(),
                            destination: b.clone(),
                            mode: TransportMode::Flight,
                            cost: rng.gen_range(80..=400) as f64,
                            duration: rng.gen_range(60..=360),
                            flight_number: Some(format!("F{:07}", 3_000_000 + flight_serial)),
                            date_availability: Some(availability),
                        });
                    }
                }
            }
        }
    }
    // Partial flight coverage must hold regardless of the seed.
    if !flightless_pair_exists {
        for idx in last_cross_pair_flights.into_iter().rev() {
            links.remove(idx);
        }
    }

    let mut restaurants = Vec::new();
    let mut attractions = Vec::new();
    let mut accommodations = Vec::new();
    for city in &cities {
        let mut rest_names: Vec<&str> = RESTAURANT_POOL.to_vec();
        rest_names.shuffle(&mut rng);
        let n_rest = rng.gen_range(4..=8);
        for name in rest_names.iter().take(n_rest) {
            let n_cuisines = rng.gen_range(1..=3);
            let mut tags: Vec<&str> = CUISINES.to_vec();
            tags.shuffle(&mut rng);
            restaurants.push(Restaurant {
                name: name.to_string(),
                city: city.name.clone(),
                cuisines: tags.iter().take(n_cuisines).map(|s| s.to_string()).collect(),
                avg_cost: rng.gen_range(10..=60) as f64,
            });
        }

        let mut attr_names: Vec<&str> = ATTRACTION_POOL.to_vec();
        attr_names.shuffle(&mut rng);
        let n_attr = rng.gen_range(3..=6);
        for name in attr_names.iter().take(n_attr) {
            attractions.push(Attraction {
                name: name.to_string(),
                city: city.name.clone(),
            });
        }

        let mut acc_names: Vec<&str> = ACCOMMODATION_POOL.to_vec();
        acc_names.shuffle(&mut rng);
        let n_acc = rng.gen_range(4..=8);
        for (i, name) in acc_names.iter().take(n_acc).enumerate() {
            let room_type = match rng.gen_range(0..4) {
                0 => RoomType::EntireRoom,
                1 => RoomType::PrivateRoom,
                2 => RoomType::SharedRoom,
                _ => RoomType::NotSharedRoom,
            };
            let house_rules: BTreeSet<String> = HOUSE_RULES
                .iter()
                .filter(|_| rng.gen_bool(0.3))
                .map(|s| s.to_string())
                .collect();
            // The first record per city always accepts short stays so that
            // two-night visits have at least one candidate.
            let min_nights = if i == 0 {
                1
            } else {
                *[1, 1, 1, 2, 2, 3].choose(&mut rng).unwrap()
            };
            accommodations.push(Accommodation {
                name: name.to_string(),
                city: city.name.clone(),
                room_type,
                price_per_night: rng.gen_range(40..=220) as f64,
                house_rules,
                max_occupancy: rng.gen_range(1..=6),
                min_nights,
            });
        }
    }

    let sandbox = Sandbox {
        cities,
        links,
        restaurants,
        attractions,
        accommodations,
        seed,
    };
    debug_assert!(sandbox.validate().is_ok());
    sandbox
}

pub fn save_sandbox(sandbox: &Sandbox, path: &Path) -> Result<(), SandboxError> {
    let json = serde_json::to_string_pretty(sandbox).expect("sandbox serializes");
    fs::write(path, json).map_err(|source| SandboxError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_sandbox(path: &Path) -> Result<Sandbox, SandboxError> {
    let text = fs::read_to_string(path).map_err(|source| SandboxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let sandbox: Sandbox = serde_json::from_str(&text).map_err(|source| SandboxError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    sandbox.validate()?;
    Ok(sandbox)
}
