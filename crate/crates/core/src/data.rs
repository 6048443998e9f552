//! Data files bundled into the binary.

use crate::pipeline::PolicyDocument;

pub const SEED_REGISTRY: &str = include_str!("../data/lexicons/seed_registry.json");

const LEXICONS: &[(&str, &str)] = &[
    ("verbs.json", include_str!("../data/lexicons/verbs.json")),
    ("segmentation.json", include_str!("../data/lexicons/segmentation.json")),
    ("data_groups.json", include_str!("../data/lexicons/data_groups.json")),
    ("alignment.json", include_str!("../data/lexicons/alignment.json")),
    ("reductions.json", include_str!("../data/lexicons/reductions.json")),
    ("synonyms.json", include_str!("../data/lexicons/synonyms.json")),
    ("scope.json", include_str!("../data/lexicons/scope.json")),
    ("seed_registry.json", SEED_REGISTRY),
];

const CORPUS: &[(&str, &str)] = &[
    ("chirper.txt", include_str!("../data/corpus/chirper.txt")),
    ("tiktok.txt", include_str!("../data/corpus/tiktok.txt")),
    ("tunebox.txt", include_str!("../data/corpus/tunebox.txt")),
];

pub fn lexicon(file: &str) -> Option<&'static str> {
    LEXICONS.iter().find(|(n, _)| *n == file).map(|(_, t)| *t)
}

pub fn lexicon_files() -> impl Iterator<Item = (&'static str, &'static str)> {
    LEXICONS.iter().copied()
}

pub fn corpus(file: &str) -> Option<&'static str> {
    CORPUS.iter().find(|(n, _)| *n == file).map(|(_, t)| *t)
}

pub fn corpus_files() -> impl Iterator<Item = (&'static str, &'static str)> {
    CORPUS.iter().copied()
}

/// The bundled seed corpus, in file-name order.
pub fn seed_corpus() -> Vec<PolicyDocument> {
    CORPUS
        .iter()
        .map(|(name, text)| PolicyDocument::parse(name, text).expect("bundled corpus is valid"))
        .collect()
}

const SCENARIOS: &[(&str, &str)] = &[
    ("sample-gps", include_str!("../data/scenarios/sample-gps.json")),
    ("phonograph", include_str!("../data/scenarios/phonograph.json")),
    ("legacy-app", include_str!("../data/scenarios/legacy-app.json")),
];

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}
