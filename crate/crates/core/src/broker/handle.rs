use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use super::engine::Broker;
use super::BrokerError;

type Job = Box<dyn FnOnce(&mut Broker) + Send>;

enum Msg {
    Job(Job),
    Stop,
}

/// Command queue in front of a [`Broker`].
///
/// A single worker thread owns the broker and runs submitted closures one at
/// a time in submission order. Handles are cheap to clone and may be used
/// from any thread.
#[derive(Clone)]
pub struct BrokerHandle {
    tx: Sender<Msg>,
    worker: Arc<Mutex<Option<JoinHandle<Broker>>>>,
}

/// Reply to a submitted command.
pub struct Ticket<R>(Receiver<R>);

impl<R> Ticket<R> {
    pub fn wait(self) -> Result<R, BrokerError> {
        self.0.recv().map_err(|_| BrokerError::QueueClosed)
    }
}

impl BrokerHandle {
    pub fn spawn(broker: Broker) -> Self {
        let (tx, rx) = mpsc::channel::<Msg>();
        let worker = thread::Builder::new()
            .name("consent-broker".into())
            .spawn(move || {
                let mut broker = broker;
                while let Ok(Msg::Job(job)) = rx.recv() {
                    job(&mut broker);
                }
                broker
            })
            .expect("spawn broker worker");
        Self {
            tx,
            worker: Arc::new(Mutex::new(Some(worker))),
        }
    }

    /// Queues `f`; `done` receives its result on the worker thread.
    pub fn submit_with<R, F, D>(&self, f: F, done: D) -> Result<(), BrokerError>
    where
        F: FnOnce(&mut Broker) -> R + Send + 'static,
        D: FnOnce(R) + Send + 'static,
    {
        self.tx
            .send(Msg::Job(Box::new(move |b| done(f(b)))))
            .map_err(|_| BrokerError::QueueClosed)
    }

    pub fn submit<R, F>(&self, f: F) -> Ticket<R>
    where
        R: Send + 'static,
        F: FnOnce(&mut Broker) -> R + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        // a closed queue drops `tx`, which `wait` reports as QueueClosed
        let _ = self.submit_with(f, move |r| {
            let _ = tx.send(r);
        });
        Ticket(rx)
    }

    /// Submits and blocks for the result.
    pub fn call<R, F>(&self, f: F) -> Result<R, BrokerError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Broker) -> R + Send + 'static,
    {
        self.submit(f).wait()
    }

    /// Drains queued commands, stops the worker and returns the broker.
    /// `None` if another clone already shut it down.
    pub fn shutdown(&self) -> Option<Broker> {
        let worker = self.worker.lock().ok()?.take()?;
        let _ = self.tx.send(Msg::Stop);
        worker.join().ok()
    }
}
