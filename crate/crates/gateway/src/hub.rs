//! Fan-out of render commands to connected dashboards.
//!
//! Each client has its own bounded queue. A client whose queue is full is
//! dropped rather than allowed to stall the pipeline. The most recent
//! commands are kept in a bounded backlog that new clients receive first.

use std::collections::VecDeque;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use aiar_core::sink::TransportError;
use aiar_core::{CommandTransport, RenderCommand};

use crate::wire::command_line;

pub type Line = Arc<str>;

#[derive(Debug, Clone, Copy)]
pub struct HubConfig {
    pub client_queue: usize,
    /// At most `client_queue`.
    pub backlog: usize,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            client_queue: 4_096,
            backlog: 1_024,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HubCounters {
    pub clients: usize,
    pub broadcast: u64,
    /// Commands that left the backlog without reaching any client.
    pub discarded: u64,
    pub slow_clients_dropped: u64,
}

struct Backlogged {
    line: Line,
    delivered: bool,
}

struct State {
    clients: Vec<(u64, SyncSender<Line>)>,
    backlog: VecDeque<Backlogged>,
    next_id: u64,
    counters: HubCounters,
}

#[derive(Clone)]
pub struct Hub {
    config: HubConfig,
    state: Arc<Mutex<State>>,
}

impl Hub {
    pub fn new(config: HubConfig) -> Self {
        assert!(config.backlog <= config.client_queue, "backlog must fit in a client queue");
        Self {
            config,
            state: Arc::new(Mutex::new(State {
                clients: Vec::new(),
                backlog: VecDeque::new(),
                next_id: 0,
                counters: HubCounters::default(),
            })),
        }
    }

    /// Adds a client, pre-loaded with the backlog.
    pub fn register(&self) -> (u64, Receiver<Line>) {
        let (tx, rx) = sync_channel(self.config.client_queue);
        let mut st = self.state.lock().unwrap();
        for b in st.backlog.iter_mut() {
            tx.try_send(b.line.clone()).expect("backlog fits in a fresh queue");
            b.delivered = true;
        }
        let id = st.next_id;
        st.next_id += 1;
        st.clients.push((id, tx));
        st.counters.clients = st.clients.len();
        (id, rx)
    }

    pub fn unregister(&self, id: u64) {
        let mut st = self.state.lock().unwrap();
        st.clients.retain(|(c, _)| *c != id);
        st.counters.clients = st.clients.len();
    }

    /// Drops every client sender so client loops finish once their queues drain.
    pub fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.clients.clear();
        st.counters.clients = 0;
    }

    pub fn counters(&self) -> HubCounters {
        self.state.lock().unwrap().counters
    }

    pub fn broadcast(&self, cmds: &[RenderCommand]) {
        let mut st = self.state.lock().unwrap();
        for cmd in cmds {
            let line: Line = command_line(cmd).into();
            let mut slow = 0;
            st.clients.retain(|(id, tx)| match tx.try_send(line.clone()) {
                Ok(()) => true,
                Err(TrySendError::Full(_)) => {
                    log::warn!("client {id} is not keeping up; dropping it");
                    slow += 1;
                    false
                }
                Err(TrySendError::Disconnected(_)) => false,
            });
            st.counters.slow_clients_dropped += slow;
            st.counters.clients = st.clients.len();
            st.counters.broadcast += 1;
            let delivered = !st.clients.is_empty();
            st.backlog.push_back(Backlogged { line, delivered });
            while st.backlog.len() > self.config.backlog {
                if !st.backlog.pop_front().unwrap().delivered {
                    st.counters.discarded += 1;
                }
            }
        }
    }
}

impl CommandTransport for Hub {
    fn send(&mut self, cmds: &[RenderCommand]) -> Result<(), TransportError> {
        self.broadcast(cmds);
        Ok(())
    }
}
