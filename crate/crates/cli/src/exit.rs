use consentcore::broker::BrokerError;
use consentcore::harness::HarnessError;
use consentcore::model::RegistryError;
use consentcore::pipeline::PipelineError;
use consentcore_service::ServiceError;

pub const SUCCESS: u8 = 0;
pub const ASSERTION_FAILED: u8 = 1;
pub const IO_OR_CONFIG: u8 = 2;
pub const DATA_CONFLICT: u8 = 3;

/// A message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub message: String,
}

impl Failure {
    pub fn new(exit: u8, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(IO_OR_CONFIG, message)
    }

    pub fn assertion(message: impl Into<String>) -> Self {
        Self::new(ASSERTION_FAILED, message)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let exit = match &e {
            PipelineError::ScopeConflict(_) => DATA_CONFLICT,
            PipelineError::Registry(RegistryError::DuplicateScope { .. }) => DATA_CONFLICT,
            _ => IO_OR_CONFIG,
        };
        Self::new(exit, format!("{}: {e}", e.code()))
    }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        let exit = match &e {
            RegistryError::DuplicateScope { .. } => DATA_CONFLICT,
            _ => IO_OR_CONFIG,
        };
        Self::new(exit, format!("{}: {e}", e.code()))
    }
}

impl From<BrokerError> for Failure {
    fn from(e: BrokerError) -> Self {
        let exit = match &e {
            BrokerError::JournalIo { .. } | BrokerError::JournalCorrupt { .. } | BrokerError::QueueClosed => {
                IO_OR_CONFIG
            }
            BrokerError::RegistryConflict { .. } => DATA_CONFLICT,
            _ => ASSERTION_FAILED,
        };
        Self::new(exit, format!("{}: {e}", e.code()))
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let exit = match &e {
            HarnessError::Broker(_) | HarnessError::Stress(_) => ASSERTION_FAILED,
            _ => IO_OR_CONFIG,
        };
        Self::new(exit, format!("{}: {e}", e.code()))
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Self::io(format!("{}: {e}", e.code()))
    }
}
