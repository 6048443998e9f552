use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::PermissionName;
use crate::text::{find_words, normalize_phrase, singular_phrase, words};

/// Cluster assigned to data expressions the lexicon does not know.
pub const UNGROUPED: &str = "UNGROUPED";

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "your", "our", "their", "its", "his", "her", "my", "any", "all", "some",
    "certain", "this", "that", "these", "those", "other", "additional", "of",
];
const SPLITTERS: &[&str] = &["and", "or", "including", "like"];

/// A semantic cluster of data expressions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataGroup {
    pub name: String,
    pub members: Vec<String>,
    pub permissions: Vec<PermissionName>,
}

#[derive(Clone, Debug)]
struct Cluster {
    name: String,
    expressions: Vec<Vec<String>>,
}

/// Expression -> cluster lexicon. Every expression belongs to exactly one
/// cluster.
#[derive(Clone, Debug, Default)]
pub struct ClusterLexicon {
    clusters: Vec<Cluster>,
    exact: HashMap<String, usize>,
}

impl ClusterLexicon {
    /// Fails with the offending expression if it appears in two clusters.
    pub fn new(clusters: Vec<(String, Vec<String>)>) -> Result<Self, String> {
        let mut lex = ClusterLexicon::default();
        for (idx, (name, exprs)) in clusters.into_iter().enumerate() {
            let mut expressions = Vec::new();
            for e in exprs {
                let norm = normalize_phrase(&e);
                if norm.is_empty() {
                    return Err(format!("empty expression in cluster {name:?}"));
                }
                if let Some(&other) = lex.exact.get(&norm) {
                    if other != idx {
                        return Err(format!(
                            "expression {norm:?} belongs to both {:?} and {name:?}",
                            lex.clusters[other].name
                        ));
                    }
                    continue;
                }
                lex.exact.insert(norm.clone(), idx);
                expressions.push(words(&norm).into_iter().map(String::from).collect());
            }
            lex.clusters.push(Cluster { name, expressions });
        }
        Ok(lex)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.clusters.iter().map(|c| c.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.clusters.iter().any(|c| c.name == name)
    }

    fn classify_conjunct(&self, conjunct: &[&str]) -> Option<usize> {
        let mut start = 0;
        while start < conjunct.len() && DETERMINERS.contains(&conjunct[start]) {
            start += 1;
        }
        let conjunct = &conjunct[start..];
        if conjunct.is_empty() {
            return None;
        }
        let plain = conjunct.join(" ");
        let single = singular_phrase(&plain);
        for form in [&plain, &single] {
            if let Some(&idx) = self.exact.get(form.as_str()) {
                return Some(idx);
            }
        }
        let single_words = words(&single);
        let mut best: Option<(usize, usize)> = None;
        for (idx, cluster) in self.clusters.iter().enumerate() {
            for expr in &cluster.expressions {
                let needle: Vec<&str> = expr.iter().map(String::as_str).collect();
                let hit = find_words(conjunct, &needle).is_some() || find_words(&single_words, &needle).is_some();
                if hit && best.is_none_or(|(len, _)| needle.len() > len) {
                    best = Some((needle.len(), idx));
                }
            }
        }
        best.map(|(_, idx)| idx)
    }

    /// Cluster name for a data expression, or [`UNGROUPED`].
    ///
    /// The expression is split into conjuncts (`names and phone numbers`);
    /// the first conjunct the lexicon recognises decides the cluster.
    pub fn classify(&self, expression: &str) -> &str {
        for part in expression.split([',', ';', '/', '&']) {
            let norm = normalize_phrase(part);
            let all = words(&norm);
            let mut conjunct: Vec<&str> = Vec::new();
            let mut i = 0;
            while i <= all.len() {
                let at_split = i == all.len()
                    || SPLITTERS.contains(&all[i])
                    || (all[i] == "such" && all.get(i + 1) == Some(&"as"));
                if at_split {
                    if let Some(idx) = self.classify_conjunct(&conjunct) {
                        return &self.clusters[idx].name;
                    }
                    conjunct.clear();
                    i += if i < all.len() && all[i] == "such" { 2 } else { 1 };
                    continue;
                }
                conjunct.push(all[i]);
                i += 1;
            }
        }
        UNGROUPED
    }

    /// Clusters the given data expressions. Groups come out in lexicon order
    /// with [`UNGROUPED`] last; members are sorted and de-duplicated.
    /// Permissions are left empty for [`align_to_permissions`].
    pub fn group_data<S: AsRef<str>>(&self, expressions: &[S]) -> Vec<DataGroup> {
        let mut buckets: Vec<Vec<String>> = vec![Vec::new(); self.clusters.len() + 1];
        for e in expressions {
            let name = self.classify(e.as_ref());
            let idx = self
                .clusters
                .iter()
                .position(|c| c.name == name)
                .unwrap_or(self.clusters.len());
            buckets[idx].push(e.as_ref().to_string());
        }
        buckets
            .into_iter()
            .enumerate()
            .filter(|(_, members)| !members.is_empty())
            .map(|(idx, mut members)| {
                members.sort();
                members.dedup();
                DataGroup {
                    name: self
                        .clusters
                        .get(idx)
                        .map_or(UNGROUPED.to_string(), |c| c.name.clone()),
                    members,
                    permissions: Vec::new(),
                }
            })
            .collect()
    }
}

/// Cluster -> platform permissions.
#[derive(Clone, Debug, Default)]
pub struct AlignmentTable {
    table: HashMap<String, Vec<PermissionName>>,
}

impl AlignmentTable {
    pub fn new(rows: impl IntoIterator<Item = (String, Vec<PermissionName>)>) -> Self {
        Self {
            table: rows.into_iter().collect(),
        }
    }

    pub fn permissions_for(&self, cluster: &str) -> &[PermissionName] {
        self.table.get(cluster).map_or(&[], Vec::as_slice)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &str> + '_ {
        self.table.keys().map(String::as_str)
    }
}

pub fn align_to_permissions(group: &DataGroup, table: &AlignmentTable) -> Vec<PermissionName> {
    if group.name == UNGROUPED {
        return Vec::new();
    }
    table.permissions_for(&group.name).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Lexicons;

    #[test]
    fn contact_information() {
        let lex = Lexicons::builtin();
        let groups = lex.clusters.group_data(&["name", "phone number"]);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].name, "contact information");
        assert_eq!(lex.clusters.classify("names and phone numbers"), "contact information");
    }

    #[test]
    fn location() {
        let lex = Lexicons::builtin();
        let groups = lex.clusters.group_data(&["Location data", "Navigation data"]);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].name, "location");
        assert_eq!(groups[0].members, ["Location data", "Navigation data"]);
    }

    #[test]
    fn ungrouped() {
        let lex = Lexicons::builtin();
        assert_eq!(lex.clusters.classify("favorite pizza topping"), UNGROUPED);
        let groups = lex.clusters.group_data(&["favorite pizza topping", "name"]);
        assert_eq!(groups.last().unwrap().name, UNGROUPED);
    }

    #[test]
    fn contained_and_plural_forms() {
        let lex = Lexicons::builtin();
        assert_eq!(lex.clusters.classify("audio files stored on your device"), "media");
        assert_eq!(lex.clusters.classify("information such as your email address"), "account information");
        assert_eq!(lex.clusters.classify("your precise location"), "location");
    }

    #[test]
    fn alignment() {
        let lex = Lexicons::builtin();
        let group = |name: &str| DataGroup {
            name: name.into(),
            members: vec!["x".into()],
            permissions: vec![],
        };
        let names = |g| {
            align_to_permissions(&group(g), &lex.alignment)
                .into_iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(names("contact information"), ["READ_CONTACTS"]);
        assert_eq!(names("location"), ["ACCESS_FINE_LOCATION", "ACCESS_NETWORK_STATE"]);
        assert!(names(UNGROUPED).is_empty());
    }

    #[test]
    fn single_membership_enforced() {
        let err = ClusterLexicon::new(vec![
            ("a".into(), vec!["name".into()]),
            ("b".into(), vec!["Name".into()]),
        ])
        .unwrap_err();
        assert!(err.contains("name"));
    }
}
