//! Built-in vocabulary for synthetic worlds.
//!
//! The word choices are load-bearing for the mock backends:
//!
//! * every target object's words appear in no other phrase, so an explicit
//!   query matches exactly one caption;
//! * an implicit query has one verb and one object word. The family's vendor
//!   caption holds both among nine or more content words; each decoy holds one
//!   of them among two words. Token overlap therefore prefers the vendor while
//!   cosine similarity prefers a decoy;
//! * global-query words share no embedding bucket with any phrase;
//! * all phrases together fit in one default summary budget, so every
//!   summary keeps every phrase below it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub label: String,
    /// Scenery captions; each contains the label.
    pub scenery: Vec<String>,
}

impl RegionSpec {
    pub fn new(label: &str, scenery: &[&str]) -> Self {
        RegionSpec {
            label: label.to_string(),
            scenery: scenery.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn builtin_regions() -> Vec<RegionSpec> {
    vec![
        RegionSpec::new(
            "garden",
            &["a garden lawn", "a garden hedge", "a gravel garden path", "garden flower beds"],
        ),
        RegionSpec::new(
            "workshop",
            &["a workshop bench", "workshop tool racks", "a concrete workshop floor", "a workshop doorway"],
        ),
        RegionSpec::new(
            "library",
            &["library bookshelves", "a library reading table", "a quiet library aisle", "a library window"],
        ),
        RegionSpec::new(
            "atrium",
            &["an atrium skylight", "atrium glass walls", "a tiled atrium floor", "an atrium staircase"],
        ),
    ]
}

/// Target objects for explicit queries, as `(caption, object phrase)`.
pub const TARGETS: &[(&str, &str)] = &[
    ("a brass telescope", "brass telescope"),
    ("a red umbrella", "red umbrella"),
    ("a violin case", "violin case"),
    ("a chess board", "chess board"),
    ("a fire extinguisher", "fire extinguisher"),
    ("a yellow kayak", "yellow kayak"),
    ("a marble statue", "marble statue"),
    ("a grandfather clock", "grandfather clock"),
];

/// Explicit query templates; every word except the object is a stop word.
pub const EXPLICIT_TEMPLATES: &[&str] = &[
    "find the {object}",
    "take me to the {object}",
    "where is the {object}",
    "go to the {object}",
];

/// Implicit query templates; every word except verb and object is a stop word.
pub const IMPLICIT_TEMPLATES: &[&str] = &[
    "where can I {verb} some {object}",
    "where could I {verb} {object}",
    "I want to {verb} some {object}",
    "where can we {verb} {object}",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Family {
    pub name: &'static str,
    /// Category of the place that satisfies the intent.
    pub vendor_category: &'static str,
    pub vendor: &'static str,
    /// Category of look-alike places that do not.
    pub decoy_category: &'static str,
    pub decoys: [&'static str; 2],
    pub verbs: [&'static str; 2],
    pub objects: [&'static str; 2],
}

pub const FAMILIES: &[Family] = &[
    Family {
        name: "drinks",
        vendor_category: "vendor_counter",
        vendor: "a vendor counter where visitors buy and purchase cold drinks and soda from a cashier",
        decoy_category: "water_fountain",
        decoys: ["a drinks fountain", "a soda sign"],
        verbs: ["buy", "purchase"],
        objects: ["drinks", "soda"],
    },
    Family {
        name: "food",
        vendor_category: "bakery_stall",
        vendor: "a bakery stall where customers order and pay for fresh sandwiches and pastries at the till",
        decoy_category: "food_display",
        decoys: ["a sandwiches mural", "a pastries photo"],
        verbs: ["order", "pay"],
        objects: ["sandwiches", "pastries"],
    },
    Family {
        name: "medicine",
        vendor_category: "pharmacy_desk",
        vendor: "a pharmacy desk where patients collect and obtain prescribed medicine and bandages from staff",
        decoy_category: "health_poster",
        decoys: ["a medicine chart", "a bandages diagram"],
        verbs: ["collect", "obtain"],
        objects: ["medicine", "bandages"],
    },
    Family {
        name: "rental",
        vendor_category: "rental_kiosk",
        vendor: "a rental kiosk where travelers rent and hire bicycles and scooters by the day with a card",
        decoy_category: "vehicle_rack",
        decoys: ["a bicycles rack", "a scooters billboard"],
        verbs: ["rent", "hire"],
        objects: ["bicycles", "scooters"],
    },
];

pub const GLOBAL_QUERIES: &[&str] = &[
    "describe the general layout of this environment",
    "give me a summary of this whole building",
];

pub fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in pairs {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Every query a family can produce.
pub fn family_queries(f: &Family) -> Vec<String> {
    let mut out = Vec::new();
    for (i, (verb, object)) in [
        (f.verbs[0], f.objects[0]),
        (f.verbs[0], f.objects[1]),
        (f.verbs[1], f.objects[0]),
        (f.verbs[1], f.objects[1]),
    ]
    .into_iter()
    .enumerate()
    {
        out.push(fill(IMPLICIT_TEMPLATES[i], &[("verb", verb), ("object", object)]));
    }
    out
}
