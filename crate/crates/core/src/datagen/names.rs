//! Synthetic, globally unique entity names.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;

const ADJECTIVES: &[&str] = &[
    "Silent", "Crimson", "Hidden", "Broken", "Golden", "Distant", "Frozen", "Wild", "Hollow", "Burning", "Lost",
    "Midnight", "Electric", "Velvet", "Iron", "Paper", "Last", "Secret", "Restless", "Endless", "Northern", "Quiet",
    "Savage", "Scarlet", "Shattered", "Stolen", "Sunken", "Twisted", "Wandering", "Winter", "Amber", "Silver",
];

const NOUNS: &[&str] = &[
    "Harbor", "Empire", "Garden", "Horizon", "Mirror", "Orchard", "Signal", "Kingdom", "Voyage", "Tide", "Lantern",
    "Compass", "Frontier", "Canyon", "Citadel", "Echo", "Meadow", "Summit", "Labyrinth", "River", "Station", "Tower",
    "Cathedral", "Desert", "Island", "Machine", "Parade", "Prophecy", "Reckoning", "Sanctuary", "Symphony", "Verdict",
];

const FIRST: &[&str] = &[
    "Ada", "Bruno", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Kira", "Luca", "Mira",
    "Nils", "Olga", "Pavel", "Quinn", "Rosa", "Soren", "Tessa", "Ulric", "Vera", "Wendel", "Xenia", "Yusuf", "Zora",
    "Anton", "Bianca", "Cyril", "Dalia", "Emil", "Freya",
];

const LAST: &[&str] = &[
    "Abbott", "Brandt", "Castillo", "Dorsey", "Eriksen", "Falk", "Galloway", "Holm", "Ivers", "Jansen", "Kovacs",
    "Lindqvist", "Moreau", "Nakamura", "Okafor", "Petrov", "Quist", "Rinaldi", "Sandoval", "Thorne", "Ueda", "Varga",
    "Whitlock", "Yilmaz", "Zeller", "Ashford", "Bellamy", "Crane", "Delacroix", "Everly", "Fairbanks", "Grimaldi",
];

const GENRES: &[&str] = &[
    "Action", "Adventure", "Animation", "Biography", "Comedy", "Crime", "Documentary", "Drama", "Family", "Fantasy",
    "Noir", "History", "Horror", "Musical", "Mystery", "Romance", "Science Fiction", "Sport", "Thriller", "War",
    "Western", "Martial Arts", "Disaster", "Heist", "Satire", "Spy", "Superhero", "Teen", "Road Movie", "Epic",
    "Psychological",
];

const KEYWORDS: &[&str] = &[
    "revenge", "friendship", "time travel", "betrayal", "survival", "redemption", "first love", "small town",
    "artificial intelligence", "coming of age", "family secrets", "heist plan", "lost treasure", "haunted house",
    "space colony", "undercover", "chess", "jazz", "boxing", "shipwreck", "pandemic", "amnesia", "kidnapping",
    "election", "tournament", "volcano", "submarine", "dragon", "vampire", "robot", "orphan", "inheritance",
    "courtroom", "circus", "mountain climbing", "road trip", "ballet", "cold war", "gold rush", "mermaid",
];

const PLACES: &[&str] = &[
    "Lisbon", "Reykjavik", "Kyoto", "Marrakesh", "Valparaiso", "Tbilisi", "Oslo", "Havana", "Cairo", "Seoul",
    "Montreal", "Nairobi", "Prague", "Lima", "Hanoi", "Dublin", "Istanbul", "Perth", "Bologna", "Krakow",
];

const ORDINALS: &[&str] = &[
    "Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta", "Eta", "Theta", "Iota", "Kappa", "Lambda", "Omicron",
    "Sigma", "Tau", "Upsilon", "Phi", "Chi", "Psi", "Omega", "Rho",
];

/// Hands out names that are unique across every kind.
pub(crate) struct NameFactory {
    used: HashSet<String>,
}

impl NameFactory {
    pub fn new() -> Self {
        NameFactory { used: HashSet::new() }
    }

    fn claim(&mut self, name: String) -> Option<String> {
        self.used.insert(name.to_lowercase()).then_some(name)
    }

    /// A fresh name for an entity of `kind`; `index` is the entity's rank within its kind.
    pub fn name(&mut self, kind: &str, index: usize, rng: &mut impl Rng) -> String {
        let fixed: Option<&[&str]> = match kind {
            "type" => Some(GENRES),
            "keyword" => Some(KEYWORDS),
            "location" => Some(PLACES),
            _ => None,
        };
        if let Some(list) = fixed {
            if let Some(n) = list.get(index).and_then(|s| self.claim(s.to_string())) {
                return n;
            }
        }
        for _ in 0..64 {
            let candidate = match kind {
                "movie" => format!("{} {}", ADJECTIVES.choose(rng).unwrap(), NOUNS.choose(rng).unwrap()),
                "star" => format!("{} {}", FIRST.choose(rng).unwrap(), LAST.choose(rng).unwrap()),
                _ => format!("{} {}", ORDINALS.choose(rng).unwrap(), capitalize(kind)),
            };
            if let Some(n) = self.claim(candidate) {
                return n;
            }
        }
        // The word banks are exhausted: fall back to numbered names.
        let mut i = index;
        loop {
            if let Some(n) = self.claim(format!("{} {}", capitalize(kind), i)) {
                return n;
            }
            i += 1;
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
