use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{IntentLabel, PermissionName, PermissionWithReason, PurposeLabel, ScopeLimitation};
use super::RegistryError;
use crate::exec::{self, ExecMode};

/// One `entries` row of the registry file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRow {
    pub permission: String,
    pub purpose: String,
    pub scope: ScopeLimitation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Serialized form of a registry, mirroring the file layout field by field.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryDocument {
    pub version: u64,
    #[serde(default)]
    pub notes: Vec<String>,
    pub permissions: Vec<String>,
    pub purposes: Vec<String>,
    #[serde(default)]
    pub entries: Vec<EntryRow>,
    #[serde(default)]
    pub data_groups: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Binding {
    scope: ScopeLimitation,
    note: Option<String>,
}

/// Outcome of checking a declared intent against the registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntentVerdict {
    Ok,
    PurposeNotApproved,
    ScopeMismatch,
    UnknownPermission,
}

impl IntentVerdict {
    pub fn is_ok(self) -> bool {
        self == Self::Ok
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::Ok => "OK",
            Self::PurposeNotApproved => "PURPOSE_NOT_APPROVED",
            Self::ScopeMismatch => "SCOPE_MISMATCH",
            Self::UnknownPermission => "UNKNOWN_PERMISSION",
        }
    }
}

/// The strict permission -> purpose -> scope mapping.
///
/// Immutable once built. Entries are keyed by catalog positions so every
/// iteration comes out in catalog order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntentRegistry {
    version: u64,
    notes: Vec<String>,
    permissions: Vec<PermissionName>,
    purposes: Vec<PurposeLabel>,
    permission_index: HashMap<PermissionName, usize>,
    purpose_index: HashMap<PurposeLabel, usize>,
    entries: BTreeMap<(usize, usize), Binding>,
    data_groups: BTreeMap<String, Vec<PermissionName>>,
}

impl IntentRegistry {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let doc: RegistryDocument =
            serde_json::from_str(text).map_err(|e| RegistryError::Malformed(e.to_string()))?;
        Self::from_document(doc)
    }

    /// The registry shipped with the crate: the published label table plus
    /// the two case-study bindings.
    pub fn seed() -> Self {
        Self::from_json(crate::data::SEED_REGISTRY).expect("bundled seed registry is valid")
    }

    pub fn from_document(doc: RegistryDocument) -> Result<Self, RegistryError> {
        let mut permissions = Vec::with_capacity(doc.permissions.len());
        let mut permission_index = HashMap::new();
        for raw in doc.permissions {
            let name = PermissionName::new(raw.clone())
                .map_err(|e| RegistryError::Malformed(e.to_string()))?;
            if permission_index.insert(name.clone(), permissions.len()).is_some() {
                return Err(RegistryError::Malformed(format!(
                    "permission {name} listed twice in catalog"
                )));
            }
            permissions.push(name);
        }

        let mut purposes = Vec::with_capacity(doc.purposes.len());
        let mut purpose_index = HashMap::new();
        for raw in doc.purposes {
            let label =
                PurposeLabel::new(raw).map_err(|e| RegistryError::Malformed(e.to_string()))?;
            if purpose_index.insert(label.clone(), purposes.len()).is_some() {
                return Err(RegistryError::Malformed(format!(
                    "purpose {label} listed twice in catalog"
                )));
            }
            purposes.push(label);
        }
        if !purpose_index.contains_key(&PurposeLabel::not_provided()) {
            return Err(RegistryError::Malformed(
                "purpose catalog must contain NOT_PROVIDED".into(),
            ));
        }

        let mut entries: BTreeMap<(usize, usize), Binding> = BTreeMap::new();
        for row in doc.entries {
            let permission = PermissionName::new(row.permission.clone())
                .map_err(|e| RegistryError::Malformed(e.to_string()))?;
            let p = *permission_index
                .get(&permission)
                .ok_or_else(|| RegistryError::UnknownPermission(permission.to_string()))?;
            let purpose = PurposeLabel::new(row.purpose.clone())
                .map_err(|e| RegistryError::Malformed(e.to_string()))?;
            if purpose.is_not_provided() || row.scope == ScopeLimitation::NotProvided {
                return Err(RegistryError::Malformed(format!(
                    "entry ({permission}, {purpose}, {}) uses the reserved NOT_PROVIDED value",
                    row.scope
                )));
            }
            let u = *purpose_index
                .get(&purpose)
                .ok_or_else(|| RegistryError::UnknownPurpose(purpose.to_string()))?;
            match entries.get_mut(&(p, u)) {
                Some(existing) if existing.scope != row.scope => {
                    return Err(RegistryError::DuplicateScope {
                        permission: permission.to_string(),
                        purpose: purpose.to_string(),
                        first: existing.scope,
                        second: row.scope,
                    });
                }
                Some(existing) => {
                    if existing.note.is_none() {
                        existing.note = row.note;
                    }
                }
                None => {
                    entries.insert(
                        (p, u),
                        Binding {
                            scope: row.scope,
                            note: row.note,
                        },
                    );
                }
            }
        }

        let mut data_groups = BTreeMap::new();
        for (group, members) in doc.data_groups {
            let mut resolved = Vec::with_capacity(members.len());
            for raw in members {
                let name = PermissionName::new(raw)
                    .map_err(|e| RegistryError::Malformed(e.to_string()))?;
                if !permission_index.contains_key(&name) {
                    return Err(RegistryError::UnknownPermission(name.to_string()));
                }
                if !resolved.contains(&name) {
                    resolved.push(name);
                }
            }
            resolved.sort_by_key(|n| permission_index[n]);
            data_groups.insert(group, resolved);
        }

        Ok(Self {
            version: doc.version,
            notes: doc.notes,
            permissions,
            purposes,
            permission_index,
            purpose_index,
            entries,
            data_groups,
        })
    }

    pub fn to_document(&self) -> RegistryDocument {
        RegistryDocument {
            version: self.version,
            notes: self.notes.clone(),
            permissions: self.permissions.iter().map(|p| p.to_string()).collect(),
            purposes: self.purposes.iter().map(|p| p.to_string()).collect(),
            entries: self
                .entries
                .iter()
                .map(|(&(p, u), binding)| EntryRow {
                    permission: self.permissions[p].to_string(),
                    purpose: self.purposes[u].to_string(),
                    scope: binding.scope,
                    note: binding.note.clone(),
                })
                .collect(),
            data_groups: self
                .data_groups
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|p| p.to_string()).collect()))
                .collect(),
        }
    }

    /// Canonical text form: catalog-ordered, one entry per line, trailing
    /// newline. Loading this text and serializing again yields the same bytes.
    pub fn to_canonical_json(&self) -> String {
        fn string_list(out: &mut String, key: &str, items: &[String], last: bool) {
            if items.is_empty() {
                let _ = write!(out, "  \"{key}\": []");
            } else {
                let _ = writeln!(out, "  \"{key}\": [");
                for (i, item) in items.iter().enumerate() {
                    let comma = if i + 1 < items.len() { "," } else { "" };
                    let _ = writeln!(out, "    {}{comma}", json_str(item));
                }
                out.push_str("  ]");
            }
            out.push_str(if last { "\n" } else { ",\n" });
        }

        let doc = self.to_document();
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"version\": {},", doc.version);
        string_list(&mut out, "notes", &doc.notes, false);
        string_list(&mut out, "permissions", &doc.permissions, false);
        string_list(&mut out, "purposes", &doc.purposes, false);
        if doc.entries.is_empty() {
            out.push_str("  \"entries\": [],\n");
        } else {
            out.push_str("  \"entries\": [\n");
            for (i, row) in doc.entries.iter().enumerate() {
                let comma = if i + 1 < doc.entries.len() { "," } else { "" };
                let line = serde_json::to_string(row).expect("entry rows serialize");
                let _ = writeln!(out, "    {line}{comma}");
            }
            out.push_str("  ],\n");
        }
        if doc.data_groups.is_empty() {
            out.push_str("  \"data_groups\": {}\n");
        } else {
            out.push_str("  \"data_groups\": {\n");
            let n = doc.data_groups.len();
            for (i, (group, members)) in doc.data_groups.iter().enumerate() {
                let comma = if i + 1 < n { "," } else { "" };
                let members = serde_json::to_string(members).expect("member lists serialize");
                let _ = writeln!(out, "    {}: {members}{comma}", json_str(group));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn permissions(&self) -> &[PermissionName] {
        &self.permissions
    }

    pub fn purposes(&self) -> &[PurposeLabel] {
        &self.purposes
    }

    pub fn data_groups(&self) -> &BTreeMap<String, Vec<PermissionName>> {
        &self.data_groups
    }

    pub fn contains_permission(&self, permission: &PermissionName) -> bool {
        self.permission_index.contains_key(permission)
    }

    pub fn contains_purpose(&self, purpose: &PurposeLabel) -> bool {
        self.purpose_index.contains_key(purpose)
    }

    pub fn permission_position(&self, permission: &PermissionName) -> Option<usize> {
        self.permission_index.get(permission).copied()
    }

    pub fn purpose_position(&self, purpose: &PurposeLabel) -> Option<usize> {
        self.purpose_index.get(purpose).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All (permission, purpose, scope) rows in catalog order.
    pub fn entries(&self) -> impl Iterator<Item = (&PermissionName, &PurposeLabel, ScopeLimitation)> + '_ {
        self.entries
            .iter()
            .map(|(&(p, u), b)| (&self.permissions[p], &self.purposes[u], b.scope))
    }

    pub fn note(&self, permission: &PermissionName, purpose: &PurposeLabel) -> Option<&str> {
        let key = (self.permission_position(permission)?, self.purpose_position(purpose)?);
        self.entries.get(&key)?.note.as_deref()
    }

    pub fn scope_for(&self, permission: &PermissionName, purpose: &PurposeLabel) -> Option<ScopeLimitation> {
        let key = (self.permission_position(permission)?, self.purpose_position(purpose)?);
        self.entries.get(&key).map(|b| b.scope)
    }

    /// Purposes a developer may declare for `permission`, in catalog order.
    pub fn approved_purposes(&self, permission: &PermissionName) -> Result<Vec<IntentLabel>, RegistryError> {
        let p = self
            .permission_position(permission)
            .ok_or_else(|| RegistryError::UnknownPermission(permission.to_string()))?;
        Ok(self
            .entries
            .range((p, 0)..(p + 1, 0))
            .map(|(&(_, u), b)| IntentLabel::new(self.purposes[u].clone(), b.scope))
            .collect())
    }

    pub fn validate_intent(&self, declared: &PermissionWithReason) -> IntentVerdict {
        if !self.contains_permission(&declared.permission_name) {
            return IntentVerdict::UnknownPermission;
        }
        if declared.is_legacy() {
            return IntentVerdict::Ok;
        }
        match self.scope_for(&declared.permission_name, &declared.purpose_title) {
            None => IntentVerdict::PurposeNotApproved,
            Some(scope) if scope == declared.data_scope => IntentVerdict::Ok,
            Some(_) => IntentVerdict::ScopeMismatch,
        }
    }

    pub fn validate_all(&self, declared: &[PermissionWithReason], mode: ExecMode) -> Vec<IntentVerdict> {
        exec::map_ordered(mode, declared, |d| self.validate_intent(d))
    }

    /// Same registry content under a different version number.
    pub fn with_version(&self, version: u64) -> Self {
        let mut next = self.clone();
        next.version = version;
        next
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(s: &str) -> PermissionName {
        PermissionName::new(s).unwrap()
    }

    fn purpose(s: &str) -> PurposeLabel {
        PurposeLabel::new(s).unwrap()
    }

    fn small_doc(entries: &str) -> String {
        format!(
            r#"{{"version": 3,
                "permissions": ["ACCESS_FINE_LOCATION", "USE_FINGERPRINT", "CAMERA"],
                "purposes": ["AUTHENTICATION", "TRACKING", "NOT_PROVIDED"],
                "entries": [{entries}]}}"#
        )
    }

    #[test]
    fn seed_has_fingerprint_rows() {
        let reg = IntentRegistry::seed();
        let got = reg.approved_purposes(&perm("USE_FINGERPRINT")).unwrap();
        assert_eq!(
            got,
            vec![
                IntentLabel::new(purpose("AUTHENTICATION"), ScopeLimitation::OnDevice),
                IntentLabel::new(purpose("SECURITY"), ScopeLimitation::OnDevice),
            ]
        );
    }

    #[test]
    fn empty_entries_is_valid() {
        let reg = IntentRegistry::from_json(&small_doc("")).unwrap();
        assert!(reg.is_empty());
        assert_eq!(reg.version(), 3);
        assert!(reg.approved_purposes(&perm("CAMERA")).unwrap().is_empty());
    }

    #[test]
    fn conflicting_scopes_rejected() {
        let text = small_doc(
            r#"{"permission":"ACCESS_FINE_LOCATION","purpose":"TRACKING","scope":"ON_DEVICE"},
               {"permission":"ACCESS_FINE_LOCATION","purpose":"TRACKING","scope":"OFF_DEVICE"}"#,
        );
        let err = IntentRegistry::from_json(&text).unwrap_err();
        assert_eq!(err.code(), "DUPLICATE_SCOPE");
    }

    #[test]
    fn repeated_identical_rows_collapse() {
        let text = small_doc(
            r#"{"permission":"CAMERA","purpose":"TRACKING","scope":"OFF_DEVICE"},
               {"permission":"CAMERA","purpose":"TRACKING","scope":"OFF_DEVICE"}"#,
        );
        assert_eq!(IntentRegistry::from_json(&text).unwrap().len(), 1);
    }

    #[test]
    fn load_errors() {
        assert_eq!(
            IntentRegistry::from_json("{ nope").unwrap_err().code(),
            "MALFORMED_REGISTRY"
        );
        let unknown = small_doc(r#"{"permission":"FLY_TO_MOON","purpose":"TRACKING","scope":"OFF_DEVICE"}"#);
        assert_eq!(
            IntentRegistry::from_json(&unknown).unwrap_err().code(),
            "UNKNOWN_PERMISSION"
        );
        let reserved = small_doc(r#"{"permission":"CAMERA","purpose":"NOT_PROVIDED","scope":"OFF_DEVICE"}"#);
        assert_eq!(
            IntentRegistry::from_json(&reserved).unwrap_err().code(),
            "MALFORMED_REGISTRY"
        );
        let bad_purpose = small_doc(r#"{"permission":"CAMERA","purpose":"SELLING","scope":"OFF_DEVICE"}"#);
        assert_eq!(
            IntentRegistry::from_json(&bad_purpose).unwrap_err().code(),
            "UNKNOWN_PURPOSE"
        );
        let missing = std::env::temp_dir().join("consentcore-no-such-registry.json");
        assert_eq!(IntentRegistry::load(missing).unwrap_err().code(), "IO_ERROR");
    }

    #[test]
    fn approved_purposes_unknown_permission() {
        let reg = IntentRegistry::seed();
        assert_eq!(
            reg.approved_purposes(&perm("FLY_TO_MOON")).unwrap_err().code(),
            "UNKNOWN_PERMISSION"
        );
    }

    #[test]
    fn validate_examples() {
        let reg = IntentRegistry::seed();
        let check = |p: &str, u: &str, d: &str, s| {
            let declared = PermissionWithReason::new(perm(p), purpose(u), d, s).unwrap();
            reg.validate_intent(&declared)
        };
        assert_eq!(
            check("ACCESS_FINE_LOCATION", "ADVERTISEMENT", "ads near you", ScopeLimitation::OffDevice),
            IntentVerdict::Ok
        );
        assert_eq!(
            check("USE_FINGERPRINT", "TRACKING", "x", ScopeLimitation::OffDevice),
            IntentVerdict::PurposeNotApproved
        );
        assert_eq!(
            check("ACCESS_FINE_LOCATION", "ADVERTISEMENT", "x", ScopeLimitation::OnDevice),
            IntentVerdict::ScopeMismatch
        );
        for p in reg.permissions() {
            assert_eq!(
                reg.validate_intent(&PermissionWithReason::legacy(p.clone())),
                IntentVerdict::Ok
            );
        }
        assert_eq!(
            reg.validate_intent(&PermissionWithReason::legacy(perm("FLY_TO_MOON"))),
            IntentVerdict::UnknownPermission
        );
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let reg = IntentRegistry::seed();
        let first = reg.to_canonical_json();
        let reloaded = IntentRegistry::from_json(&first).unwrap();
        assert_eq!(reloaded, reg);
        assert_eq!(reloaded.to_canonical_json(), first);
        assert_eq!(first, crate::data::SEED_REGISTRY, "bundled seed is stored canonically");
    }

    #[test]
    fn not_provided_never_in_entries() {
        let reg = IntentRegistry::seed();
        assert!(reg.entries().all(|(_, u, s)| !u.is_not_provided() && s != ScopeLimitation::NotProvided));
    }
}
