//! Settings shared by every subcommand.
//!
//! Three layers, later ones winning: the TOML config file, command-line
//! flags, then `CONSENTCORE_*` environment variables.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use consentcore_service::DEFAULT_LISTEN;
use log::LevelFilter;
use serde::Deserialize;

use crate::exit::Failure;

pub const ENV_PREFIX: &str = "CONSENTCORE_";

/// One layer of optional settings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub registry: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub listen: Option<String>,
    pub log_level: Option<String>,
}

impl Layer {
    pub fn from_toml(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::io(format!("config file {}: {e}", path.display())))
    }

    /// Reads `CONSENTCORE_REGISTRY`, `CONSENTCORE_CORPUS`, ... through `var`.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Self {
        let get = |key: &str| var(&format!("{ENV_PREFIX}{key}")).filter(|v| !v.is_empty());
        Self {
            registry: get("REGISTRY").map(PathBuf::from),
            corpus: get("CORPUS").map(PathBuf::from),
            lexicons: get("LEXICONS").map(PathBuf::from),
            journal: get("JOURNAL").map(PathBuf::from),
            listen: get("LISTEN"),
            log_level: get("LOG_LEVEL"),
        }
    }

    /// `over` wins wherever it has a value.
    pub fn overlay(self, over: Layer) -> Layer {
        Layer {
            registry: over.registry.or(self.registry),
            corpus: over.corpus.or(self.corpus),
            lexicons: over.lexicons.or(self.lexicons),
            journal: over.journal.or(self.journal),
            listen: over.listen.or(self.listen),
            log_level: over.log_level.or(self.log_level),
        }
    }
}

/// Resolved and validated settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliConfig {
    pub registry_path: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    pub journal_path: Option<PathBuf>,
    pub listen: SocketAddr,
    pub log_level: LevelFilter,
}

impl CliConfig {
    pub fn resolve(file: Layer, flags: Layer, env: Layer) -> Result<Self, Failure> {
        let merged = file.overlay(flags).overlay(env);
        let listen = merged.listen.as_deref().unwrap_or(DEFAULT_LISTEN);
        let listen = SocketAddr::from_str(listen)
            .map_err(|_| Failure::io(format!("listen address {listen:?} is not host:port")))?;
        let log_level = match merged.log_level.as_deref() {
            None => LevelFilter::Warn,
            Some(level) => LevelFilter::from_str(level)
                .map_err(|_| Failure::io(format!("unknown log level {level:?}")))?,
        };
        let config = Self {
            registry_path: merged.registry,
            corpus_dir: merged.corpus,
            lexicon_dir: merged.lexicons,
            journal_path: merged.journal,
            listen,
            log_level,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        if let Some(p) = &self.registry_path {
            if !p.is_file() {
                return Err(Failure::io(format!("registry file {} does not exist", p.display())));
            }
        }
        for (what, dir) in [("corpus", &self.corpus_dir), ("lexicon", &self.lexicon_dir)] {
            if let Some(d) = dir {
                if !d.is_dir() {
                    return Err(Failure::io(format!("{what} directory {} does not exist", d.display())));
                }
            }
        }
        if let Some(j) = &self.journal_path {
            if j.is_dir() {
                return Err(Failure::io(format!("journal path {} is a directory", j.display())));
            }
            if let Some(parent) = j.parent().filter(|p| !p.as_os_str().is_empty()) {
                if !parent.is_dir() {
                    return Err(Failure::io(format!("journal directory {} does not exist", parent.display())));
                }
            }
        }
        Ok(())
    }
}
