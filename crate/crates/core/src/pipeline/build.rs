//! End-to-end corpus processing and registry construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::candidates::{find_candidates, CandidateStatement, RequestingVerb};
use super::decompose::{decompose_statement, DVPTriple};
use super::document::PolicyDocument;
use super::grouping::{align_to_permissions, DataGroup, UNGROUPED};
use super::lexicon::Lexicons;
use super::purpose::CanonicalPurpose;
use super::PipelineError;
use crate::exec::{self, ExecMode};
use crate::model::{EntryRow, IntentRegistry, PermissionName, PurposeLabel, ScopeLimitation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordStatus {
    Extracted,
    ExtractionFailed,
}

/// How far a derivation made it through the phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DerivationStatus {
    /// Phases 1-2 only.
    Grouped,
    /// Contributes a registry binding.
    Complete,
    UnstatedPurpose,
    UnmappedPurpose,
    Ungrouped,
    /// Grouped, but the cluster aligns to no permission.
    Unaligned,
}

/// One triple of a candidate statement and what each phase made of it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Derivation {
    pub triple: DVPTriple,
    pub data_group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permissions: Option<Vec<PermissionName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_purpose: Option<CanonicalPurpose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScopeLimitation>,
    pub status: DerivationStatus,
}

/// Audit record for one candidate statement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusRecord {
    /// `<app>#<n>`, numbered per app from 1.
    pub id: String,
    pub app_name: String,
    pub app_category: String,
    pub sentence: String,
    pub matched_verbs: Vec<RequestingVerb>,
    pub status: RecordStatus,
    pub derivations: Vec<Derivation>,
}

impl CorpusRecord {
    pub fn is_complete(&self) -> bool {
        self.derivations.iter().any(|d| d.status == DerivationStatus::Complete)
    }
}

fn ingest_document(doc: &PolicyDocument, lex: &Lexicons) -> Vec<CorpusRecord> {
    let sentences = lex.segmenter.segment(&doc.body);
    find_candidates(&doc.app_name, &sentences, &lex.verbs)
        .into_iter()
        .map(|stmt| ingest_statement(doc, stmt, lex))
        .collect()
}

fn ingest_statement(doc: &PolicyDocument, stmt: CandidateStatement, lex: &Lexicons) -> CorpusRecord {
    let (status, derivations) = match decompose_statement(&stmt, &lex.verbs) {
        Ok(triples) => (
            RecordStatus::Extracted,
            triples
                .into_iter()
                .map(|triple| {
                    let group = lex.clusters.classify(&triple.object).to_string();
                    Derivation {
                        status: if group == UNGROUPED {
                            DerivationStatus::Ungrouped
                        } else {
                            DerivationStatus::Grouped
                        },
                        triple,
                        data_group: group,
                        permissions: None,
                        reduced_purpose: None,
                        canonical_purpose: None,
                        scope: None,
                    }
                })
                .collect(),
        ),
        Err(_) => (RecordStatus::ExtractionFailed, Vec::new()),
    };
    CorpusRecord {
        id: String::new(),
        app_name: doc.app_name.clone(),
        app_category: doc.app_category.clone(),
        sentence: stmt.sentence,
        matched_verbs: stmt.matched_verbs,
        status,
        derivations,
    }
}

fn ordered_documents(docs: &[PolicyDocument]) -> Vec<&PolicyDocument> {
    let mut ordered: Vec<&PolicyDocument> = docs.iter().collect();
    ordered.sort_by(|a, b| a.app_name.cmp(&b.app_name));
    ordered
}

/// Phases 1-2: segmentation, candidate selection, decomposition and data
/// grouping. Records come out in (app name, document order) sequence.
pub fn ingest(docs: &[PolicyDocument], lex: &Lexicons, mode: ExecMode) -> Vec<CorpusRecord> {
    let ordered = ordered_documents(docs);
    let mut records: Vec<CorpusRecord> = exec::map_ordered(mode, &ordered, |doc| ingest_document(doc, lex))
        .into_iter()
        .flatten()
        .collect();
    let mut counters: HashMap<String, usize> = HashMap::new();
    for r in &mut records {
        let n = counters.entry(r.app_name.clone()).or_default();
        *n += 1;
        r.id = format!("{}#{}", r.app_name, n);
    }
    records
}

/// Phases 3-5 and scope inference on already grouped derivations.
pub fn complete_derivation(d: &mut Derivation, lex: &Lexicons) {
    if d.data_group == UNGROUPED {
        d.permissions = Some(Vec::new());
        d.status = DerivationStatus::Ungrouped;
    } else {
        let group = DataGroup {
            name: d.data_group.clone(),
            members: vec![d.triple.object.clone()],
            permissions: Vec::new(),
        };
        d.permissions = Some(align_to_permissions(&group, &lex.alignment));
    }
    let Some(purpose) = &d.triple.purpose_text else {
        if d.status != DerivationStatus::Ungrouped {
            d.status = DerivationStatus::UnstatedPurpose;
        }
        return;
    };
    let reduced = lex.reductions.simplify(purpose);
    let canonical = lex.synonyms.canonicalize(&reduced);
    d.scope = canonical.label().map(|l| lex.scope.infer_scope(d.triple.verb, l));
    d.reduced_purpose = Some(reduced);
    if d.status == DerivationStatus::Ungrouped {
        d.canonical_purpose = Some(canonical);
        return;
    }
    d.status = match (&canonical, d.permissions.as_deref()) {
        (CanonicalPurpose::Unmapped, _) => DerivationStatus::UnmappedPurpose,
        (_, Some([])) => DerivationStatus::Unaligned,
        _ => DerivationStatus::Complete,
    };
    d.canonical_purpose = Some(canonical);
}

/// All phases plus scope inference.
pub fn process(docs: &[PolicyDocument], lex: &Lexicons, mode: ExecMode) -> Vec<CorpusRecord> {
    let mut records = ingest(docs, lex, mode);
    for r in &mut records {
        for d in &mut r.derivations {
            complete_derivation(d, lex);
        }
    }
    records
}

/// Clusters the data objects of `records` and aligns each cluster.
pub fn group_records(records: &[CorpusRecord], lex: &Lexicons) -> Vec<DataGroup> {
    let objects: Vec<&str> = records
        .iter()
        .flat_map(|r| r.derivations.iter().map(|d| d.triple.object.as_str()))
        .collect();
    let mut groups = lex.clusters.group_data(&objects);
    for g in &mut groups {
        g.permissions = align_to_permissions(g, &lex.alignment);
    }
    groups
}

/// Writes one JSON record per line.
pub fn write_audit<W: Write>(records: &[CorpusRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// The source of one registry binding.
pub const SEED_SOURCE: &str = "seed";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConflictingBinding {
    pub scope: ScopeLimitation,
    /// Record ids, or [`SEED_SOURCE`].
    pub sources: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub permission: PermissionName,
    pub purpose: PurposeLabel,
    pub bindings: Vec<ConflictingBinding>,
}

/// Every (permission, purpose) pair that received more than one scope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} scope conflict(s)\n", self.conflicts.len());
        for c in &self.conflicts {
            let _ = writeln!(out, "\n({}, {})", c.permission, c.purpose);
            for b in &c.bindings {
                let _ = writeln!(out, "  {:<11} <- {}", b.scope.as_str(), b.sources.join(", "));
            }
        }
        out
    }
}

/// A registry binding derived from the corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DerivedBinding {
    pub permission: PermissionName,
    pub purpose: PurposeLabel,
    pub scope: ScopeLimitation,
    pub sources: Vec<String>,
    /// Absent from the seed.
    pub added: bool,
}

#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub registry: IntentRegistry,
    pub records: Vec<CorpusRecord>,
    pub bindings: Vec<DerivedBinding>,
}

type Key = (PermissionName, PurposeLabel);

/// Runs the whole pipeline and merges the derived bindings into the seed
/// registry. The version is bumped only if the merge changed anything.
pub fn build_registry(docs: &[PolicyDocument], lex: &Lexicons, mode: ExecMode) -> Result<BuildOutput, PipelineError> {
    let records = process(docs, lex, mode);
    let seed = &lex.seed;

    let mut observed: BTreeMap<Key, BTreeMap<ScopeLimitation, Vec<String>>> = BTreeMap::new();
    let mut key_order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<String, BTreeSet<PermissionName>> = BTreeMap::new();
    for r in &records {
        for d in r.derivations.iter().filter(|d| d.status == DerivationStatus::Complete) {
            let (Some(perms), Some(CanonicalPurpose::Label(purpose)), Some(scope)) =
                (&d.permissions, &d.canonical_purpose, d.scope)
            else {
                continue;
            };
            groups.entry(d.data_group.clone()).or_default().extend(perms.iter().cloned());
            for p in perms {
                let key = (p.clone(), purpose.clone());
                let slot = observed.entry(key.clone()).or_insert_with(|| {
                    key_order.push(key.clone());
                    BTreeMap::new()
                });
                let sources = slot.entry(scope).or_default();
                if !sources.contains(&r.id) {
                    sources.push(r.id.clone());
                }
            }
        }
    }

    let mut conflicts = Vec::new();
    let mut bindings = Vec::new();
    for key in &key_order {
        let mut scopes = observed[key].clone();
        let seeded = seed.scope_for(&key.0, &key.1);
        if let Some(s) = seeded {
            scopes.entry(s).or_default().insert(0, SEED_SOURCE.to_string());
        }
        if scopes.len() > 1 {
            conflicts.push(Conflict {
                permission: key.0.clone(),
                purpose: key.1.clone(),
                bindings: scopes
                    .into_iter()
                    .map(|(scope, sources)| ConflictingBinding { scope, sources })
                    .collect(),
            });
            continue;
        }
        let (scope, sources) = observed[key].iter().next().expect("observed keys have a scope");
        bindings.push(DerivedBinding {
            permission: key.0.clone(),
            purpose: key.1.clone(),
            scope: *scope,
            sources: sources.clone(),
            added: seeded.is_none(),
        });
    }
    if !conflicts.is_empty() {
        conflicts.sort_by(|a, b| {
            let pos = |c: &Conflict| (seed.permission_position(&c.permission), c.purpose.clone());
            pos(a).cmp(&pos(b))
        });
        return Err(PipelineError::ScopeConflict(Box::new(ConflictReport { conflicts })));
    }

    let mut doc = seed.to_document();
    for b in bindings.iter().filter(|b| b.added) {
        if !doc.purposes.iter().any(|p| p == b.purpose.as_str()) {
            let at = doc
                .purposes
                .iter()
                .position(|p| p == PurposeLabel::NOT_PROVIDED_STR)
                .unwrap_or(doc.purposes.len());
            doc.purposes.insert(at, b.purpose.to_string());
        }
        doc.entries.push(EntryRow {
            permission: b.permission.to_string(),
            purpose: b.purpose.to_string(),
            scope: b.scope,
            note: None,
        });
    }
    for (group, perms) in groups {
        let members = doc.data_groups.entry(group).or_default();
        for p in perms {
            if !members.iter().any(|m| m == p.as_str()) {
                members.push(p.to_string());
            }
        }
    }
    let merged = IntentRegistry::from_document(doc).map_err(PipelineError::Registry)?;
    let changed = merged.to_document() != seed.to_document();
    let registry = if changed {
        merged.with_version(seed.version() + 1)
    } else {
        seed.clone()
    };
    bindings.sort_by(|a, b| {
        let pos = |x: &DerivedBinding| (registry.permission_position(&x.permission), registry.purpose_position(&x.purpose));
        pos(a).cmp(&pos(b))
    });
    Ok(BuildOutput {
        registry,
        records,
        bindings,
    })
}
