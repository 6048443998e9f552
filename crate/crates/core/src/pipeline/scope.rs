use crate::model::{PurposeLabel, ScopeLimitation};

use super::candidates::RequestingVerb;

/// Scope heuristics: some verbs always move data off the device; otherwise
/// data is assumed to leave the device unless the purpose is one that can
/// only be served locally.
#[derive(Clone, Debug)]
pub struct ScopeRules {
    off_device_verbs: Vec<RequestingVerb>,
    on_device_purposes: Vec<PurposeLabel>,
}

impl ScopeRules {
    pub fn new(off_device_verbs: Vec<RequestingVerb>, on_device_purposes: Vec<PurposeLabel>) -> Self {
        Self {
            off_device_verbs,
            on_device_purposes,
        }
    }

    pub fn on_device_purposes(&self) -> &[PurposeLabel] {
        &self.on_device_purposes
    }

    /// `NOT_PROVIDED` purposes yield `NOT_PROVIDED` scope; they never come
    /// out of the pipeline but the function stays total.
    pub fn infer_scope(&self, verb: RequestingVerb, purpose: &PurposeLabel) -> ScopeLimitation {
        if purpose.is_not_provided() {
            return ScopeLimitation::NotProvided;
        }
        if self.off_device_verbs.contains(&verb) {
            return ScopeLimitation::OffDevice;
        }
        if self.on_device_purposes.contains(purpose) {
            ScopeLimitation::OnDevice
        } else {
            ScopeLimitation::OffDevice
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntentRegistry;
    use crate::pipeline::Lexicons;

    fn label(s: &str) -> PurposeLabel {
        PurposeLabel::new(s).unwrap()
    }

    #[test]
    fn examples() {
        let rules = Lexicons::builtin().scope;
        assert_eq!(rules.infer_scope(RequestingVerb::Access, &label("USER_CONNECT")), ScopeLimitation::OffDevice);
        assert_eq!(rules.infer_scope(RequestingVerb::Use, &label("PLAY_MUSIC")), ScopeLimitation::OnDevice);
        assert_eq!(rules.infer_scope(RequestingVerb::Collect, &label("NAVIGATION")), ScopeLimitation::OnDevice);
        assert_eq!(rules.infer_scope(RequestingVerb::Share, &label("NAVIGATION")), ScopeLimitation::OffDevice);
    }

    #[test]
    fn transfer_is_always_off_device() {
        let rules = Lexicons::builtin().scope;
        for purpose in IntentRegistry::seed().purposes() {
            if purpose.is_not_provided() {
                continue;
            }
            assert_eq!(rules.infer_scope(RequestingVerb::Transfer, purpose), ScopeLimitation::OffDevice, "{purpose}");
            assert_eq!(rules.infer_scope(RequestingVerb::Share, purpose), ScopeLimitation::OffDevice, "{purpose}");
        }
    }
}
