use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::candidates::{RequestingVerb, VerbLexicon};
use super::grouping::{AlignmentTable, ClusterLexicon};
use super::purpose::{ReductionRules, SynonymLexicon};
use super::scope::ScopeRules;
use super::segment::Segmenter;
use super::PipelineError;
use crate::data;
use crate::model::{IntentRegistry, PermissionName, PurposeLabel};

pub const VERBS_FILE: &str = "verbs.json";
pub const SEGMENTATION_FILE: &str = "segmentation.json";
pub const DATA_GROUPS_FILE: &str = "data_groups.json";
pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const REDUCTIONS_FILE: &str = "reductions.json";
pub const SYNONYMS_FILE: &str = "synonyms.json";
pub const SCOPE_FILE: &str = "scope.json";
pub const SEED_REGISTRY_FILE: &str = "seed_registry.json";

pub const LEXICON_FILES: [&str; 8] = [
    VERBS_FILE,
    SEGMENTATION_FILE,
    DATA_GROUPS_FILE,
    ALIGNMENT_FILE,
    REDUCTIONS_FILE,
    SYNONYMS_FILE,
    SCOPE_FILE,
    SEED_REGISTRY_FILE,
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerbsFile {
    #[allow(dead_code)]
    version: u64,
    requesting_verbs: Vec<VerbEntry>,
    purpose_verbs: Vec<String>,
    #[serde(default)]
    adverbs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerbEntry {
    lemma: String,
    forms: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentationFile {
    #[allow(dead_code)]
    version: u64,
    abbreviations: Vec<String>,
    #[serde(default)]
    sentence_openers: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DataGroupsFile {
    #[allow(dead_code)]
    version: u64,
    clusters: Vec<ClusterEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterEntry {
    name: String,
    expressions: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignmentFile {
    #[allow(dead_code)]
    version: u64,
    alignments: Vec<AlignmentEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignmentEntry {
    cluster: String,
    permissions: Vec<PermissionName>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReductionsFile {
    #[allow(dead_code)]
    version: u64,
    rules: Vec<ReductionEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReductionEntry {
    pattern: String,
    reduced: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynonymsFile {
    #[allow(dead_code)]
    version: u64,
    labels: Vec<SynonymEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynonymEntry {
    label: PurposeLabel,
    phrases: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScopeFile {
    #[allow(dead_code)]
    version: u64,
    off_device_verbs: Vec<RequestingVerb>,
    on_device_purposes: Vec<PurposeLabel>,
}

/// Every lexicon and rule table the pipeline needs, plus the seed registry
/// derived bindings are merged into.
#[derive(Clone, Debug)]
pub struct Lexicons {
    pub verbs: VerbLexicon,
    pub segmenter: Segmenter,
    pub clusters: ClusterLexicon,
    pub alignment: AlignmentTable,
    pub reductions: ReductionRules,
    pub synonyms: SynonymLexicon,
    pub scope: ScopeRules,
    pub seed: IntentRegistry,
}

fn parse<T: DeserializeOwned>(file: &str, text: &str) -> Result<T, PipelineError> {
    serde_json::from_str(text).map_err(|e| PipelineError::LexiconInvalid {
        file: file.to_string(),
        message: e.to_string(),
    })
}

impl Lexicons {
    /// The lexicons bundled with the crate.
    pub fn builtin() -> Self {
        static BUILTIN: OnceLock<Lexicons> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                Self::from_sources(|name| {
                    data::lexicon(name)
                        .map(str::to_string)
                        .ok_or_else(|| PipelineError::LexiconMissing { path: name.to_string() })
                })
                .expect("bundled lexicons are valid")
            })
            .clone()
    }

    /// Loads every lexicon file from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        Self::from_sources(|name| {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(PipelineError::LexiconMissing {
                    path: path.display().to_string(),
                });
            }
            fs::read_to_string(&path).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })
        })
    }

    pub fn from_sources(mut read: impl FnMut(&str) -> Result<String, PipelineError>) -> Result<Self, PipelineError> {
        let invalid = |file: &str, message: String| PipelineError::LexiconInvalid {
            file: file.to_string(),
            message,
        };

        let verbs: VerbsFile = parse(VERBS_FILE, &read(VERBS_FILE)?)?;
        let mut forms = Vec::new();
        let mut seen = Vec::new();
        for entry in verbs.requesting_verbs {
            let lemma = RequestingVerb::from_lemma(&entry.lemma)
                .ok_or_else(|| invalid(VERBS_FILE, format!("{:?} is not a requesting verb", entry.lemma)))?;
            seen.push(lemma);
            forms.push((lemma.lemma().to_string(), lemma));
            forms.extend(entry.forms.into_iter().map(|f| (f, lemma)));
        }
        if let Some(missing) = RequestingVerb::ALL.into_iter().find(|v| !seen.contains(v)) {
            return Err(invalid(VERBS_FILE, format!("no inflections for {missing}")));
        }
        let verb_lexicon = VerbLexicon::new(forms, verbs.purpose_verbs, verbs.adverbs);

        let seg: SegmentationFile = parse(SEGMENTATION_FILE, &read(SEGMENTATION_FILE)?)?;

        let seed_text = read(SEED_REGISTRY_FILE)?;
        let seed = IntentRegistry::from_json(&seed_text).map_err(|e| invalid(SEED_REGISTRY_FILE, e.to_string()))?;

        let groups: DataGroupsFile = parse(DATA_GROUPS_FILE, &read(DATA_GROUPS_FILE)?)?;
        let clusters = ClusterLexicon::new(groups.clusters.into_iter().map(|c| (c.name, c.expressions)).collect())
            .map_err(|m| invalid(DATA_GROUPS_FILE, m))?;

        let align: AlignmentFile = parse(ALIGNMENT_FILE, &read(ALIGNMENT_FILE)?)?;
        let mut rows = Vec::new();
        for entry in align.alignments {
            if !clusters.contains(&entry.cluster) {
                return Err(invalid(ALIGNMENT_FILE, format!("unknown cluster {:?}", entry.cluster)));
            }
            if let Some(p) = entry.permissions.iter().find(|p| !seed.contains_permission(p)) {
                return Err(invalid(ALIGNMENT_FILE, format!("permission {p} is not in the catalog")));
            }
            rows.push((entry.cluster, entry.permissions));
        }

        let red: ReductionsFile = parse(REDUCTIONS_FILE, &read(REDUCTIONS_FILE)?)?;
        let reductions = ReductionRules::new(red.rules.into_iter().map(|r| (r.pattern, r.reduced)))
            .map_err(|m| invalid(REDUCTIONS_FILE, m))?;

        let syn: SynonymsFile = parse(SYNONYMS_FILE, &read(SYNONYMS_FILE)?)?;
        let synonyms = SynonymLexicon::new(syn.labels.into_iter().map(|s| (s.label, s.phrases)).collect())
            .map_err(|m| invalid(SYNONYMS_FILE, m))?;

        let scope: ScopeFile = parse(SCOPE_FILE, &read(SCOPE_FILE)?)?;
        if scope.on_device_purposes.iter().any(PurposeLabel::is_not_provided) {
            return Err(invalid(SCOPE_FILE, "NOT_PROVIDED cannot be an on-device purpose".into()));
        }

        Ok(Self {
            verbs: verb_lexicon,
            segmenter: Segmenter::new(seg.abbreviations).with_sentence_openers(seg.sentence_openers),
            clusters,
            alignment: AlignmentTable::new(rows),
            reductions,
            synonyms,
            scope: ScopeRules::new(scope.off_device_verbs, scope.on_device_purposes),
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_builtin(dir: &Path) {
        for name in LEXICON_FILES {
            fs::write(dir.join(name), data::lexicon(name).unwrap()).unwrap();
        }
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = tempfile::tempdir().unwrap();
        write_builtin(dir.path());
        let lex = Lexicons::load_dir(dir.path()).unwrap();
        assert_eq!(lex.seed, Lexicons::builtin().seed);
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_builtin(dir.path());
        fs::remove_file(dir.path().join(SYNONYMS_FILE)).unwrap();
        let err = Lexicons::load_dir(dir.path()).unwrap_err();
        assert_eq!(err.code(), "LEXICON_MISSING");
        assert!(err.to_string().contains(SYNONYMS_FILE));
    }

    #[test]
    fn invalid_file() {
        let dir = tempfile::tempdir().unwrap();
        write_builtin(dir.path());
        fs::write(
            dir.path().join(ALIGNMENT_FILE),
            r#"{"version":1,"alignments":[{"cluster":"location","permissions":["FLY_TO_MOON"]}]}"#,
        )
        .unwrap();
        let err = Lexicons::load_dir(dir.path()).unwrap_err();
        assert_eq!(err.code(), "LEXICON_INVALID");
    }
}
