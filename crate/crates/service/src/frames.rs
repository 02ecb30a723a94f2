//! Stream frames and the per-subscriber queue.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use litforage_core::{ClusterAssignment, GraphDocument, InteractionEvent, PaperId, Vec3};
use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Frame {
    Graph { document: GraphDocument },
    Positions { alpha: f64, positions: BTreeMap<PaperId, Vec3>, pins: BTreeMap<PaperId, Vec3> },
    Clusters { clusters: Vec<ClusterAssignment> },
    Event { event: InteractionEvent },
}

impl Frame {
    pub fn graph(doc: &GraphDocument) -> Self {
        Frame::Graph { document: doc.clone() }
    }

    pub fn positions(doc: &GraphDocument) -> Self {
        Frame::Positions {
            alpha: doc.layout.alpha,
            positions: doc.layout.positions.clone(),
            pins: doc.layout.pins.clone(),
        }
    }

    pub fn clusters(doc: &GraphDocument) -> Self {
        Frame::Clusters { clusters: doc.clusters.clone() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Frame::Graph { .. } => "graph",
            Frame::Positions { .. } => "positions",
            Frame::Clusters { .. } => "clusters",
            Frame::Event { .. } => "event",
        }
    }
}

/// Ordered frames for one subscriber. A positions frame replaces a
/// positions frame still waiting at the tail; every other frame is kept.
#[derive(Default)]
pub struct FrameQueue {
    frames: Mutex<VecDeque<Frame>>,
    ready: Notify,
    closed: Mutex<bool>,
}

impl FrameQueue {
    pub fn push(&self, frame: Frame) {
        let mut frames = self.frames.lock().unwrap();
        match (frames.back_mut(), &frame) {
            (Some(last @ Frame::Positions { .. }), Frame::Positions { .. }) => *last = frame,
            _ => frames.push_back(frame),
        }
        drop(frames);
        self.ready.notify_one();
    }

    pub fn close(&self) {
        *self.closed.lock().unwrap() = true;
        self.ready.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        *self.closed.lock().unwrap()
    }

    pub fn try_pop(&self) -> Option<Frame> {
        self.frames.lock().unwrap().pop_front()
    }

    /// Next frame, or `None` once closed and drained.
    pub async fn pop(&self) -> Option<Frame> {
        loop {
            if let Some(f) = self.try_pop() {
                return Some(f);
            }
            if self.is_closed() {
                return None;
            }
            self.ready.notified().await;
        }
    }

    pub fn len(&self) -> usize {
        self.frames.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
