//! WebSocket endpoint for dashboards: commands out, signals in.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{Receiver, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;
use tungstenite::{Message, WebSocket};

use crate::hub::{Hub, Line};
use crate::wire::WireSignal;

const POLL: Duration = Duration::from_millis(10);
const WRITE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SignalCounters {
    pub received: u64,
    pub malformed: u64,
}

#[derive(Default)]
struct Inbox {
    latest: WireSignal,
    fresh: bool,
    interacted: bool,
    counters: SignalCounters,
}

/// Latest-wins mailbox between client threads and the pipeline.
#[derive(Clone, Default)]
pub struct SignalInbox(Arc<Mutex<Inbox>>);

impl SignalInbox {
    pub fn push(&self, signal: WireSignal) {
        let mut st = self.0.lock().unwrap();
        let interacted = signal.is_interaction(&st.latest);
        st.interacted |= interacted;
        st.latest = signal;
        st.fresh = true;
        st.counters.received += 1;
    }

    pub fn reject(&self) {
        self.0.lock().unwrap().counters.malformed += 1;
    }

    /// The newest signal since the last call, and whether any signal in
    /// between was an interaction.
    pub fn take(&self) -> Option<(WireSignal, bool)> {
        let mut st = self.0.lock().unwrap();
        if !st.fresh {
            return None;
        }
        st.fresh = false;
        let interacted = std::mem::take(&mut st.interacted);
        Some((st.latest.clone(), interacted))
    }

    pub fn counters(&self) -> SignalCounters {
        self.0.lock().unwrap().counters
    }
}

pub struct DashboardServer {
    addr: SocketAddr,
    hub: Hub,
    clients: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl DashboardServer {
    /// Binds and starts accepting clients in the background.
    pub fn start(bind: SocketAddr, hub: Hub, inbox: SignalInbox) -> io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let clients: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();
        let (h, c) = (hub.clone(), clients.clone());
        thread::Builder::new().name("ws-accept".into()).spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (hub, inbox) = (h.clone(), inbox.clone());
                let handle = thread::spawn(move || serve_client(stream, hub, inbox));
                c.lock().unwrap().push(handle);
            }
        })?;
        Ok(Self { addr, hub, clients })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Lets connected clients drain what they were sent, up to `grace`.
    pub fn shutdown(self, grace: Duration) {
        self.hub.close();
        let deadline = Instant::now() + grace;
        let handles: Vec<_> = std::mem::take(&mut *self.clients.lock().unwrap());
        for h in handles {
            while !h.is_finished() && Instant::now() < deadline {
                thread::sleep(POLL);
            }
        }
    }
}

fn serve_client(stream: TcpStream, hub: Hub, inbox: SignalInbox) {
    let peer = stream.peer_addr().ok();
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake with {peer:?} failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err()
        || ws.get_ref().set_write_timeout(Some(WRITE_TIMEOUT)).is_err()
    {
        return;
    }
    let (id, rx) = hub.register();
    log::info!("client {id} connected from {peer:?}");
    let reason = pump(&mut ws, &rx, &inbox);
    hub.unregister(id);
    let _ = ws.close(None);
    let _ = ws.flush();
    log::info!("client {id} left: {reason}");
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

fn pump(ws: &mut WebSocket<TcpStream>, rx: &Receiver<Line>, inbox: &SignalInbox) -> String {
    loop {
        loop {
            match rx.try_recv() {
                Ok(line) => {
                    if let Err(e) = ws.write(Message::text(line.as_ref())) {
                        return format!("write failed: {e}");
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.flush();
                    return "server closed the stream".into();
                }
            }
        }
        if let Err(e) = ws.flush() {
            if !is_timeout(&e) {
                return format!("flush failed: {e}");
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match WireSignal::parse(text.as_str()) {
                Some(sig) => inbox.push(sig),
                None => inbox.reject(),
            },
            Ok(Message::Binary(_)) => return "binary frames are not part of the protocol".into(),
            Ok(Message::Close(_)) => return "closed by client".into(),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return format!("read failed: {e}"),
        }
    }
}
