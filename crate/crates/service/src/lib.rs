//! HTTP interface to the consent broker.
//!
//! Every handler forwards to the broker's serialized command queue, so any
//! number of clients (a consent UI, scripted simulators) can share one
//! broker. Bodies are JSON envelopes `{v, requestId, payload | error}`;
//! prompt changes are pushed over server-sent events at
//! `GET /v1/prompts/stream`. The wire format is described in
//! `docs/api.md`.

mod envelope;
mod routes;
mod stream;

use std::net::SocketAddr;
use std::sync::atomic::AtomicU64;
use std::sync::Arc;

use consentcore::broker::{Broker, BrokerHandle, EventRecord};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;

pub use envelope::{ApiError, REQUEST_ID_HEADER, WIRE_VERSION};
pub use stream::DEFAULT_KINDS;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8787";

/// Live events buffered per stream subscriber before it counts as lagging.
const EVENT_BUFFER: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    BindFailed {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Server(#[source] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BindFailed { .. } => "BIND_FAILED",
            Self::Server(_) => "SERVER_ERROR",
        }
    }
}

#[derive(Clone)]
pub(crate) struct AppState {
    broker: BrokerHandle,
    events: broadcast::Sender<Arc<EventRecord>>,
    shutdown: watch::Receiver<bool>,
    next_request: Arc<AtomicU64>,
}

/// A running service. Dropping it leaves the server running until the
/// runtime stops; call [`ServiceHandle::shutdown`] to stop it cleanly.
pub struct ServiceHandle {
    addr: SocketAddr,
    broker: BrokerHandle,
    stop: watch::Sender<bool>,
    server: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    /// The bound address; useful when listening on port 0.
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn broker(&self) -> &BrokerHandle {
        &self.broker
    }

    /// Closes open event streams, waits for in-flight requests, then stops
    /// the broker worker and hands the broker back.
    pub async fn shutdown(self) -> Result<Option<Broker>, ServiceError> {
        let _ = self.stop.send(true);
        match self.server.await {
            Ok(result) => result.map_err(ServiceError::Server)?,
            Err(join) => return Err(ServiceError::Server(std::io::Error::other(join))),
        }
        let broker = self.broker.clone();
        let stopped = tokio::task::spawn_blocking(move || broker.shutdown())
            .await
            .map_err(|e| ServiceError::Server(std::io::Error::other(e)))?;
        log::info!("service on {} stopped", self.addr);
        Ok(stopped)
    }
}

/// Binds `config.listen` and starts serving `broker` on the current tokio
/// runtime.
pub async fn serve(config: ServiceConfig, mut broker: Broker) -> Result<ServiceHandle, ServiceError> {
    let listener = TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServiceError::BindFailed {
            addr: config.listen,
            source,
        })?;
    let addr = listener.local_addr().map_err(ServiceError::Server)?;

    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let publisher = events.clone();
    broker.set_observer(Box::new(move |rec: &EventRecord| {
        // no subscribers is fine
        let _ = publisher.send(Arc::new(rec.clone()));
    }));
    let handle = BrokerHandle::spawn(broker);

    let (stop, shutdown) = watch::channel(false);
    let state = AppState {
        broker: handle.clone(),
        events,
        shutdown: shutdown.clone(),
        next_request: Arc::new(AtomicU64::new(0)),
    };
    let app = routes::router(state);
    let mut signal = shutdown;
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = signal.wait_for(|stop| *stop).await;
            })
            .await
    });
    log::info!("consent service listening on {addr}");
    Ok(ServiceHandle {
        addr,
        broker: handle,
        stop,
        server,
    })
}
