//! The websocket server: one session and one physics thread per client.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::Notify;

use myoimp::session::{derive_seed, save_batch, Batch, BatchSpec, Condition, Models, Protocol, TrialRecord};

use crate::config::{Clock, ServiceConfig};
use crate::error::{Result, ServiceError};
use crate::session::{Session, SessionSettings};
use crate::wire::{ClientMessage, ServerMessage};

/// Longest the wall-clock physics loop sleeps between catch-up steps.
const QUANTUM: Duration = Duration::from_millis(2);

/// A finished trial and the session it belongs to.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub session: u64,
    pub record: TrialRecord,
}

struct Shared {
    models: Arc<Models>,
    protocol: Protocol,
    cfg: ServiceConfig,
    next_id: AtomicU64,
    log: Mutex<Vec<SessionRecord>>,
}

#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    pub fn new(models: Models, protocol: Protocol, cfg: ServiceConfig) -> Result<Self> {
        cfg.validate()?;
        let plant = &models.pipeline.plant;
        protocol.validate(plant.q_min, plant.q_max)?;
        Ok(Service {
            shared: Arc::new(Shared {
                models: Arc::new(models),
                protocol,
                cfg,
                next_id: AtomicU64::new(0),
                log: Mutex::new(Vec::new()),
            }),
        })
    }

    /// Routes: `GET /ws` upgrades to a session socket.
    pub fn router(&self) -> Router {
        Router::new()
            .route("/ws", get(upgrade))
            .with_state(self.shared.clone())
    }

    /// Every trial finished so far, in completion order.
    pub fn records(&self) -> Vec<SessionRecord> {
        self.shared.log.lock().expect("record log poisoned").clone()
    }

    pub async fn serve(&self, listener: TcpListener) -> Result<()> {
        axum::serve(listener, self.router()).await?;
        Ok(())
    }

    /// Binds the configured address and serves until the process ends.
    pub async fn run(&self) -> Result<()> {
        let addr: SocketAddr = format!("{}:{}", self.shared.cfg.bind, self.shared.cfg.port)
            .parse()
            .map_err(|e| ServiceError::Rejected(format!("bad bind address: {e}")))?;
        let listener = TcpListener::bind(addr).await?;
        log::info!("listening on ws://{}/ws", listener.local_addr()?);
        self.serve(listener).await
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, shared))
}

/// Outgoing frames. State frames are dropped oldest-first once `capacity`
/// of them are waiting; events and errors are always kept.
struct Outbox {
    inner: Mutex<OutboxInner>,
    notify: Notify,
    capacity: usize,
}

#[derive(Default)]
struct OutboxInner {
    queue: VecDeque<ServerMessage>,
    states: usize,
    closed: bool,
}

impl Outbox {
    fn new(capacity: usize) -> Self {
        Outbox {
            inner: Mutex::new(OutboxInner::default()),
            notify: Notify::new(),
            capacity,
        }
    }

    fn push(&self, msg: ServerMessage) {
        let mut inner = self.inner.lock().expect("outbox poisoned");
        if msg.is_state() {
            if inner.states >= self.capacity {
                if let Some(i) = inner.queue.iter().position(ServerMessage::is_state) {
                    inner.queue.remove(i);
                    inner.states -= 1;
                }
            }
            inner.states += 1;
        }
        inner.queue.push_back(msg);
        drop(inner);
        self.notify.notify_one();
    }

    fn close(&self) {
        self.inner.lock().expect("outbox poisoned").closed = true;
        self.notify.notify_one();
    }

    /// Waits for frames; `None` once closed and drained.
    async fn next(&self) -> Option<Vec<ServerMessage>> {
        loop {
            {
                let mut inner = self.inner.lock().expect("outbox poisoned");
                if !inner.queue.is_empty() {
                    inner.states = 0;
                    return Some(inner.queue.drain(..).collect());
                }
                if inner.closed {
                    return None;
                }
            }
            self.notify.notified().await;
        }
    }
}

async fn client(socket: WebSocket, shared: Arc<Shared>) {
    let id = shared.next_id.fetch_add(1, Ordering::SeqCst);
    let cfg = &shared.cfg;
    let settings = SessionSettings {
        client_clock: cfg.clock == Clock::Client,
        underrun_timeout: cfg.underrun_timeout,
        max_advance: cfg.max_advance,
        norm_max: cfg.norm_max.clone(),
        metrics: cfg.metrics,
    };
    let outbox = Arc::new(Outbox::new(cfg.queue_capacity));
    let (mut sink, mut stream) = socket.split();
    let session = match Session::new(shared.models.clone(), shared.protocol.clone(), settings, derive_seed(cfg.seed, id)) {
        Ok(s) => s,
        Err(e) => {
            let msg = ServerMessage::Error { message: e.to_string() };
            let _ = sink.send(Message::Text(msg.to_json().into())).await;
            return;
        }
    };
    log::info!("session {id} connected");

    let writer = {
        let outbox = outbox.clone();
        tokio::spawn(async move {
            while let Some(batch) = outbox.next().await {
                for msg in batch {
                    if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                        return;
                    }
                }
            }
            let _ = sink.close().await;
        })
    };

    let (tx, rx) = mpsc::channel();
    let physics = {
        let outbox = outbox.clone();
        let shared = shared.clone();
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || physics_loop(session, rx, &outbox, &shared, id))
    };
    let physics = match physics {
        Ok(h) => h,
        Err(e) => {
            log::error!("session {id}: cannot start physics thread: {e}");
            outbox.close();
            let _ = writer.await;
            return;
        }
    };

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match ClientMessage::parse(text.as_str()) {
                Ok(m) => {
                    if tx.send(m).is_err() {
                        break;
                    }
                }
                Err(e) => outbox.push(ServerMessage::Error { message: e.to_string() }),
            },
            Message::Binary(_) => outbox.push(ServerMessage::Error {
                message: "binary frames are not supported".into(),
            }),
            Message::Close(_) => break,
            _ => {}
        }
    }
    drop(tx);
    let _ = tokio::task::spawn_blocking(move || physics.join()).await;
    outbox.close();
    let _ = writer.await;
    log::info!("session {id} closed");
}

fn physics_loop(mut session: Session, rx: mpsc::Receiver<ClientMessage>, outbox: &Outbox, shared: &Shared, id: u64) {
    let mut records = Vec::new();
    let mut publish = |session: &mut Session| {
        for msg in session.take_output() {
            outbox.push(msg);
        }
        let done = session.take_records();
        if !done.is_empty() {
            records.extend(done.iter().cloned());
            persist(shared, id, &session, &records);
            let mut log = shared.log.lock().expect("record log poisoned");
            log.extend(done.into_iter().map(|record| SessionRecord { session: id, record }));
        }
    };

    match shared.cfg.clock {
        Clock::Client => {
            while let Ok(msg) = rx.recv() {
                session.handle(msg);
                publish(&mut session);
            }
        }
        Clock::Wall => {
            let start = Instant::now();
            let speed = shared.cfg.speed;
            'outer: loop {
                loop {
                    match rx.try_recv() {
                        Ok(msg) => session.handle(msg),
                        Err(TryRecvError::Empty) => break,
                        Err(TryRecvError::Disconnected) => break 'outer,
                    }
                }
                session.advance_to(start.elapsed().as_secs_f64() * speed);
                publish(&mut session);
                match rx.recv_timeout(QUANTUM) {
                    Ok(msg) => session.handle(msg),
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
        }
    }
    session.disconnect();
    publish(&mut session);
}

/// Rewrites the session's batch directory with every trial so far.
fn persist(shared: &Shared, id: u64, session: &Session, records: &[TrialRecord]) {
    let Some(root) = &shared.cfg.record_dir else { return };
    let mut conditions: Vec<Condition> = Vec::new();
    for r in records {
        if !conditions.contains(&r.condition) {
            conditions.push(r.condition);
        }
    }
    let batch = Batch {
        protocol: session.protocol().clone(),
        spec: BatchSpec {
            conditions,
            trials: records.len(),
            seed: session.seed(),
            metrics: shared.cfg.metrics,
            ..Default::default()
        },
        records: records.to_vec(),
    };
    let dir = root.join(format!("session_{id:04}"));
    if let Err(e) = save_batch(Path::new(&dir), &batch) {
        log::error!("session {id}: cannot write {}: {e}", dir.display());
    }
}
