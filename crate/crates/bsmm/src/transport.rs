//! Nonblocking point-to-point messaging between simulated ranks.
//!
//! Each rank owns one endpoint. Sends are buffered and complete as soon as
//! they are posted; receives complete inside [`Transport::waitall`], which
//! blocks until every listed message has been delivered. A [`LinkModel`]
//! stamps every message with the instant it becomes visible at the receiver,
//! charging per-message latency and the sender's outgoing bandwidth, so time
//! blocked in `waitall` measures communication that computation did not hide.

use std::collections::HashMap;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Delivery cost of a message: `latency + bytes / bytes_per_sec`, with
/// transfers from one rank serialized on its outgoing link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub latency: Duration,
    /// Outgoing bandwidth of a rank; `f64::INFINITY` for free transfers.
    pub bytes_per_sec: f64,
}

impl LinkModel {
    pub fn instant() -> Self {
        Self {
            latency: Duration::ZERO,
            bytes_per_sec: f64::INFINITY,
        }
    }

    /// Every message arrives exactly `delay` after it is posted.
    pub fn fixed_delay(delay: Duration) -> Self {
        Self {
            latency: delay,
            bytes_per_sec: f64::INFINITY,
        }
    }

    pub fn transfer_time(&self, bytes: usize) -> Duration {
        if self.bytes_per_sec.is_infinite() {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(bytes as f64 / self.bytes_per_sec)
        }
    }
}

impl Default for LinkModel {
    /// 5 us latency and 1 GB/s per rank.
    fn default() -> Self {
        Self {
            latency: Duration::from_micros(5),
            bytes_per_sec: 1e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferKind {
    Send,
    Recv,
}

/// Token for one posted transfer. Completion state lives in the endpoint;
/// passing a consumed handle to `waitall` again is a usage error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransferHandle {
    id: u64,
    peer: usize,
    tag: u64,
    kind: TransferKind,
    bytes: usize,
}

impl TransferHandle {
    pub fn peer(&self) -> usize {
        self.peer
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    /// Payload size of a send; 0 for a receive, whose size is known only once
    /// it completes.
    pub fn bytes(&self) -> usize {
        self.bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandleState {
    Pending,
    Complete,
    /// Passed through `waitall`; using it again is an error.
    Consumed,
}

/// Result of a successful [`Transport::waitall`].
#[derive(Debug)]
pub struct Completion {
    /// Time spent blocked inside the call.
    pub elapsed: Duration,
    /// Received payloads, aligned with the handle list (`None` for sends).
    pub payloads: Vec<Option<Vec<u8>>>,
    pub bytes_received: usize,
}

pub trait Transport {
    fn rank(&self) -> usize;
    fn ranks(&self) -> usize;
    fn isend(&mut self, peer: usize, tag: u64, payload: Vec<u8>) -> Result<TransferHandle>;
    fn irecv(&mut self, peer: usize, tag: u64) -> Result<TransferHandle>;
    fn waitall(&mut self, handles: &[TransferHandle]) -> Result<Completion>;
    fn state(&self, handle: &TransferHandle) -> Option<HandleState>;
}

#[derive(Debug)]
struct Message {
    src: usize,
    tag: u64,
    payload: Vec<u8>,
    ready_at: Instant,
}

/// In-process endpoint backed by unbounded channels.
#[derive(Debug)]
pub struct ChannelEndpoint {
    rank: usize,
    peers: Vec<Sender<Message>>,
    inbox: Receiver<Message>,
    unmatched: Vec<Message>,
    states: HashMap<u64, HandleState>,
    next_id: u64,
    link: LinkModel,
    link_free_at: Instant,
    timeout: Duration,
}

/// Fully connected set of endpoints, one per rank.
pub fn channel_fabric(ranks: usize, link: LinkModel) -> Vec<ChannelEndpoint> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..ranks).map(|_| mpsc::channel()).unzip();
    let now = Instant::now();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| ChannelEndpoint {
            rank,
            peers: senders.clone(),
            inbox,
            unmatched: Vec::new(),
            states: HashMap::new(),
            next_id: 0,
            link,
            link_free_at: now,
            timeout: Duration::from_secs(300),
        })
        .collect()
}

impl ChannelEndpoint {
    /// Upper bound on how long `waitall` waits for a single message.
    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    fn handle(&mut self, peer: usize, tag: u64, kind: TransferKind, bytes: usize) -> Result<TransferHandle> {
        if peer >= self.peers.len() {
            return Err(Error::param(format!(
                "peer rank {peer} outside a fabric of {} ranks",
                self.peers.len()
            )));
        }
        let id = self.next_id;
        self.next_id += 1;
        Ok(TransferHandle {
            id,
            peer,
            tag,
            kind,
            bytes,
        })
    }

    fn take_matching(&mut self, src: usize, tag: u64) -> Result<Message> {
        if let Some(pos) = self.unmatched.iter().position(|m| m.src == src && m.tag == tag) {
            return Ok(self.unmatched.swap_remove(pos));
        }
        loop {
            match self.inbox.recv_timeout(self.timeout) {
                Ok(msg) if msg.src == src && msg.tag == tag => return Ok(msg),
                Ok(msg) => self.unmatched.push(msg),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Transport(format!(
                        "rank {} timed out waiting for tag {tag} from rank {src}",
                        self.rank
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport(format!(
                        "rank {}: all peers hung up before tag {tag} from rank {src} arrived",
                        self.rank
                    )))
                }
            }
        }
    }
}

impl Transport for ChannelEndpoint {
    fn rank(&self) -> usize {
        self.rank
    }

    fn ranks(&self) -> usize {
        self.peers.len()
    }

    fn isend(&mut self, peer: usize, tag: u64, payload: Vec<u8>) -> Result<TransferHandle> {
        let handle = self.handle(peer, tag, TransferKind::Send, payload.len())?;
        let now = Instant::now();
        let start = now.max(self.link_free_at);
        let done = start + self.link.transfer_time(payload.len());
        self.link_free_at = done;
        let msg = Message {
            src: self.rank,
            tag,
            payload,
            ready_at: done + self.link.latency,
        };
        self.peers[peer]
            .send(msg)
            .map_err(|_| Error::Transport(format!("rank {peer} is gone")))?;
        self.states.insert(handle.id, HandleState::Complete);
        Ok(handle)
    }

    fn irecv(&mut self, peer: usize, tag: u64) -> Result<TransferHandle> {
        let handle = self.handle(peer, tag, TransferKind::Recv, 0)?;
        self.states.insert(handle.id, HandleState::Pending);
        Ok(handle)
    }

    fn waitall(&mut self, handles: &[TransferHandle]) -> Result<Completion> {
        let start = Instant::now();
        for (i, h) in handles.iter().enumerate() {
            match self.states.get(&h.id) {
                None => return Err(Error::param(format!("handle {} unknown to rank {}", h.id, self.rank))),
                Some(HandleState::Consumed) => {
                    return Err(Error::param(format!(
                        "handle {} (peer {}, tag {}) was already completed by an earlier waitall",
                        h.id, h.peer, h.tag
                    )))
                }
                Some(_) => {}
            }
            if handles[..i].iter().any(|o| o.id == h.id) {
                return Err(Error::param(format!("handle {} listed twice", h.id)));
            }
        }
        let mut payloads = Vec::with_capacity(handles.len());
        let mut bytes_received = 0;
        for h in handles {
            match h.kind {
                TransferKind::Send => payloads.push(None),
                TransferKind::Recv => {
                    let msg = self.take_matching(h.peer, h.tag)?;
                    let now = Instant::now();
                    if msg.ready_at > now {
                        std::thread::sleep(msg.ready_at - now);
                    }
                    bytes_received += msg.payload.len();
                    payloads.push(Some(msg.payload));
                }
            }
        }
        for h in handles {
            self.states.insert(h.id, HandleState::Consumed);
        }
        Ok(Completion {
            elapsed: start.elapsed(),
            payloads,
            bytes_received,
        })
    }

    fn state(&self, handle: &TransferHandle) -> Option<HandleState> {
        self.states.get(&handle.id).copied()
    }
}
