use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::broker::{ConsentDecision, GrantMode, Prompt, Verdict};
use crate::model::PermissionName;

/// One entry of a scripted decision list, matched to prompts by permission
/// (and app, when given) in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptedDecision {
    pub permission: PermissionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<GrantMode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPolicy {
    AllowAll,
    DenyAll,
    Scripted,
    Random,
}

/// The automated user.
#[derive(Clone, Debug)]
pub enum AutoDecider {
    AllowAll(GrantMode),
    DenyAll(GrantMode),
    /// Unmatched prompts stay pending.
    Scripted { script: Vec<ScriptedDecision>, default_mode: GrantMode },
    Random { rng: ChaCha8Rng, allow_probability: f64, mode: GrantMode },
}

impl AutoDecider {
    pub fn random(seed: u64, allow_probability: f64, mode: GrantMode) -> Self {
        Self::Random {
            rng: ChaCha8Rng::seed_from_u64(seed),
            allow_probability: allow_probability.clamp(0.0, 1.0),
            mode,
        }
    }

    pub fn decide(&mut self, prompt: &Prompt) -> Option<ConsentDecision> {
        match self {
            Self::AllowAll(mode) => Some(ConsentDecision::new(Verdict::Allow, *mode)),
            Self::DenyAll(mode) => Some(ConsentDecision::new(Verdict::Deny, *mode)),
            Self::Scripted { script, default_mode } => {
                let i = script.iter().position(|s| {
                    s.permission == prompt.permission && s.app.as_deref().is_none_or(|a| a == prompt.app_id.as_str())
                })?;
                let s = script.remove(i);
                Some(ConsentDecision::new(s.verdict, s.mode.unwrap_or(*default_mode)))
            }
            Self::Random {
                rng,
                allow_probability,
                mode,
            } => {
                let verdict = if rng.random_bool(*allow_probability) {
                    Verdict::Allow
                } else {
                    Verdict::Deny
                };
                Some(ConsentDecision::new(verdict, *mode))
            }
        }
    }
}
