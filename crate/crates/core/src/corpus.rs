//! Bundled example specifications.

pub const ADVENTURE: &str = include_str!("../corpus/adventure.tsl");
pub const FOREST: &str = include_str!("../corpus/forest.tsl");
pub const CHOICES: &str = include_str!("../corpus/choices.tsl");
pub const FIG2: &str = include_str!("../corpus/fig2.tsl");
pub const CONTRADICTION: &str = include_str!("../corpus/contradiction.tsl");

pub const ALL: [(&str, &str); 5] = [
    ("adventure", ADVENTURE),
    ("forest", FOREST),
    ("choices", CHOICES),
    ("fig2", FIG2),
    ("contradiction", CONTRADICTION),
];

/// The four task combinations: base specification plus optional forest opening.
pub fn task(n: usize) -> Option<String> {
    match n {
        1 => Some(ADVENTURE.to_string()),
        2 => Some(format!("{ADVENTURE}\n{FOREST}")),
        3 => Some(CHOICES.to_string()),
        4 => Some(format!("{CHOICES}\n{FOREST}")),
        _ => None,
    }
}

/// Looks up a bundled specification by name: a corpus file or `task1`..`task4`.
pub fn named(name: &str) -> Option<String> {
    if let Some(n) = name.strip_prefix("task").and_then(|n| n.parse().ok()) {
        return task(n);
    }
    ALL.iter().find(|(n, _)| *n == name).map(|(_, src)| src.to_string())
}
