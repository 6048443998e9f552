use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Longest developer-supplied purpose description accepted in a request.
pub const MAX_DESCRIPTION_CHARS: usize = 280;

fn is_label_syntax(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_')
}

/// Platform permission identifier such as `ACCESS_FINE_LOCATION`.
///
/// Only the syntax is checked here; catalog membership is the registry's job.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PermissionName(String);

impl PermissionName {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        // Manifests often carry the fully qualified form.
        let name = match name.strip_prefix("android.permission.") {
            Some(short) => short.to_string(),
            None => name,
        };
        if is_label_syntax(&name) {
            Ok(Self(name))
        } else {
            Err(ModelError::InvalidPermissionName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PermissionName {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PermissionName> for String {
    fn from(value: PermissionName) -> Self {
        value.0
    }
}

impl fmt::Display for PermissionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A purpose label from the versioned label catalog.
///
/// The catalog itself is data (it ships inside the registry file), so the
/// label is an open newtype rather than an enum. `NOT_PROVIDED` is the one
/// label the code knows about: it marks legacy requests.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PurposeLabel(String);

impl PurposeLabel {
    pub const NOT_PROVIDED_STR: &'static str = "NOT_PROVIDED";

    pub fn new(label: impl Into<String>) -> Result<Self, ModelError> {
        let label = label.into();
        if is_label_syntax(&label) {
            Ok(Self(label))
        } else {
            Err(ModelError::InvalidPurposeLabel(label))
        }
    }

    pub fn not_provided() -> Self {
        Self(Self::NOT_PROVIDED_STR.to_string())
    }

    pub fn is_not_provided(&self) -> bool {
        self.0 == Self::NOT_PROVIDED_STR
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PurposeLabel {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PurposeLabel> for String {
    fn from(value: PurposeLabel) -> Self {
        value.0
    }
}

impl fmt::Display for PurposeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where requested data may be used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScopeLimitation {
    OnDevice,
    OffDevice,
    NotProvided,
}

impl ScopeLimitation {
    pub const ALL: [ScopeLimitation; 3] = [Self::OnDevice, Self::OffDevice, Self::NotProvided];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OnDevice => "ON_DEVICE",
            Self::OffDevice => "OFF_DEVICE",
            Self::NotProvided => "NOT_PROVIDED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|scope| scope.as_str() == s)
    }
}

impl fmt::Display for ScopeLimitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The (purpose, scope) pair disclosed to the user.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntentLabel {
    pub purpose: PurposeLabel,
    pub scope: ScopeLimitation,
}

impl IntentLabel {
    pub fn new(purpose: PurposeLabel, scope: ScopeLimitation) -> Self {
        Self { purpose, scope }
    }

    /// The label shown for requests made without any declared intent.
    pub fn not_provided() -> Self {
        Self {
            purpose: PurposeLabel::not_provided(),
            scope: ScopeLimitation::NotProvided,
        }
    }

    pub fn is_legacy(&self) -> bool {
        self.purpose.is_not_provided() && self.scope == ScopeLimitation::NotProvided
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.purpose, self.scope)
    }
}

/// A developer's declared intent for one permission of one request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPermissionWithReason", rename_all = "camelCase")]
pub struct PermissionWithReason {
    pub permission_name: PermissionName,
    pub purpose_title: PurposeLabel,
    pub purpose_description: String,
    pub data_scope: ScopeLimitation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_link: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawPermissionWithReason {
    permission_name: PermissionName,
    purpose_title: PurposeLabel,
    #[serde(default)]
    purpose_description: String,
    data_scope: ScopeLimitation,
    #[serde(default)]
    policy_link: Option<String>,
}

impl TryFrom<RawPermissionWithReason> for PermissionWithReason {
    type Error = ModelError;

    fn try_from(raw: RawPermissionWithReason) -> Result<Self, Self::Error> {
        let mut declared = Self::new(
            raw.permission_name,
            raw.purpose_title,
            raw.purpose_description,
            raw.data_scope,
        )?;
        declared.policy_link = raw.policy_link;
        Ok(declared)
    }
}

impl PermissionWithReason {
    pub fn new(
        permission_name: PermissionName,
        purpose_title: PurposeLabel,
        purpose_description: impl Into<String>,
        data_scope: ScopeLimitation,
    ) -> Result<Self, ModelError> {
        let purpose_description = purpose_description.into();
        let chars = purpose_description.chars().count();
        if chars > MAX_DESCRIPTION_CHARS {
            return Err(ModelError::DescriptionTooLong {
                permission: permission_name.to_string(),
                chars,
            });
        }
        if !purpose_title.is_not_provided() && purpose_description.trim().is_empty() {
            return Err(ModelError::EmptyDescription(permission_name.to_string()));
        }
        if data_scope == ScopeLimitation::NotProvided && !purpose_title.is_not_provided() {
            return Err(ModelError::ScopeRequiresNotProvided {
                permission: permission_name.to_string(),
                purpose: purpose_title.to_string(),
            });
        }
        Ok(Self {
            permission_name,
            purpose_title,
            purpose_description,
            data_scope,
            policy_link: None,
        })
    }

    /// The intent attached to a permission requested without a reason.
    pub fn legacy(permission_name: PermissionName) -> Self {
        Self {
            permission_name,
            purpose_title: PurposeLabel::not_provided(),
            purpose_description: String::new(),
            data_scope: ScopeLimitation::NotProvided,
            policy_link: None,
        }
    }

    pub fn with_policy_link(mut self, link: impl Into<String>) -> Self {
        self.policy_link = Some(link.into());
        self
    }

    pub fn intent(&self) -> IntentLabel {
        IntentLabel::new(self.purpose_title.clone(), self.data_scope)
    }

    pub fn is_legacy(&self) -> bool {
        self.intent().is_legacy()
    }
}
