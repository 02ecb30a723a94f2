//! Deterministic 3D force-directed layout.
//!
//! The force family follows the d3-force model: link springs, many-body
//! charge (Barnes-Hut), centering, plus a per-cluster anchor spring. Each
//! tick cools `alpha` geometrically, accumulates velocity increments scaled
//! by `alpha`, decays velocities, and integrates positions explicitly.
//!
//! All forces for a tick are evaluated from the state at the start of that
//! tick, so the update is order-independent and reproducible bit for bit.

mod octree;
pub mod vec3;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDocument, PaperId, Violation};
use crate::hash::{fnv1a64, splitmix64, unit_symmetric};

pub use octree::{Octree, Visit};
pub use vec3::Vec3;
use vec3::{add, dot, is_finite, scale, sub};

/// Below this separation two nodes count as coincident and interact through jitter.
pub const COINCIDENT_DISTANCE: f64 = 1e-6;
const JITTER_SCALE: f64 = 1e-6;
const INITIAL_RADIUS: f64 = 10.0;
pub const DEFAULT_REHEAT: f64 = 0.3;
pub const EXACT_FORCES_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutState {
    pub positions: BTreeMap<PaperId, Vec3>,
    pub velocities: BTreeMap<PaperId, Vec3>,
    /// Fixed positions of pinned nodes.
    #[serde(default)]
    pub pins: BTreeMap<PaperId, Vec3>,
    pub alpha: f64,
    pub rng_seed: u64,
}

impl Default for LayoutState {
    fn default() -> Self {
        LayoutState {
            positions: BTreeMap::new(),
            velocities: BTreeMap::new(),
            pins: BTreeMap::new(),
            alpha: 1.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceConfig {
    pub link_distance: f64,
    pub link_iterations: u32,
    pub manybody_strength: f64,
    /// Barnes-Hut opening criterion on cell width / distance.
    pub theta: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub center_strength: f64,
    pub cluster_anchor_strength: f64,
    pub velocity_decay: f64,
    pub alpha_min: f64,
    pub alpha_decay: f64,
    pub alpha_target: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        let alpha_min = 0.001;
        ForceConfig {
            link_distance: 30.0,
            link_iterations: 1,
            manybody_strength: -30.0,
            theta: 0.9,
            distance_min: 1.0,
            distance_max: f64::INFINITY,
            center_strength: 1.0,
            cluster_anchor_strength: 0.1,
            velocity_decay: 0.4,
            alpha_min,
            alpha_decay: 1.0 - alpha_min.powf(1.0 / 300.0),
            alpha_target: 0.0,
        }
    }
}

impl ForceConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.theta >= 0.0
            && self.alpha_min > 0.0
            && self.alpha_min < 1.0
            && self.velocity_decay > 0.0
            && self.velocity_decay < 1.0
            && self.link_iterations >= 1
            && self.distance_min >= 0.0
            && self.distance_max > self.distance_min
            && (0.0..=1.0).contains(&self.center_strength)
            && self.cluster_anchor_strength >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid force configuration: {self:?}")))
        }
    }
}

/// How the many-body term is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManyBody {
    BarnesHut { theta: f64 },
    Exact,
}

/// Deterministic offset in [-1e-6, 1e-6)^3 for a node under a seed.
pub fn jitter(id: &PaperId, seed: u64) -> Vec3 {
    let mut state = fnv1a64(id.as_str().as_bytes()) ^ seed.rotate_left(17);
    let mut next = || unit_symmetric(splitmix64(&mut state)) * JITTER_SCALE;
    [next(), next(), next()]
}

/// Spiral placement for the node with insertion index `index`.
///
/// Radius is `10 * cbrt(index)`; directions advance by fixed golden-angle
/// increments in roll and yaw from a phase derived from `seed`. Index 0 sits
/// at the origin plus the node's jitter.
pub fn initial_position(index: usize, id: &PaperId, seed: u64) -> Vec3 {
    if index == 0 {
        return jitter(id, seed);
    }
    let roll_step = PI * (3.0 - 5f64.sqrt());
    let yaw_step = PI * 20.0 / (9.0 + 221f64.sqrt());
    let mut s = seed;
    let roll0 = unit_symmetric(splitmix64(&mut s)) * PI;
    let yaw0 = unit_symmetric(splitmix64(&mut s)) * PI;
    let i = index as f64;
    let radius = INITIAL_RADIUS * i.cbrt();
    let roll = roll0 + i * roll_step;
    let yaw = yaw0 + i * yaw_step;
    [radius * roll.sin() * yaw.cos(), radius * roll.cos(), radius * roll.sin() * yaw.sin()]
}

/// Fresh layout for a document: spiral positions, zero velocities, alpha 1.
pub fn init_positions(doc: &GraphDocument, seed: u64) -> LayoutState {
    let mut state = LayoutState { rng_seed: seed, ..LayoutState::default() };
    for (i, node) in doc.nodes.iter().enumerate() {
        state.positions.insert(node.id.clone(), initial_position(i, &node.id, seed));
        state.velocities.insert(node.id.clone(), [0.0; 3]);
    }
    state
}

struct Link {
    source: usize,
    target: usize,
    strength: f64,
    bias: f64,
}

/// Dense, index-addressed view of the state for one force evaluation.
struct Frame {
    ids: Vec<PaperId>,
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    jitter: Vec<Vec3>,
    links: Vec<Link>,
    anchors: Vec<Option<Vec3>>,
}

impl Frame {
    fn build(state: &LayoutState, doc: &GraphDocument) -> Result<Frame> {
        let n = doc.nodes.len();
        let mut index = BTreeMap::new();
        let mut ids = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut vel = Vec::with_capacity(n);
        for (i, node) in doc.nodes.iter().enumerate() {
            let p = state.positions.get(&node.id);
            let v = state.velocities.get(&node.id);
            let (Some(p), Some(v)) = (p, v) else {
                return Err(Error::Integrity(format!("layout state does not cover node {}", node.id)));
            };
            if !is_finite(p) || !is_finite(v) {
                return Err(Error::Numeric(format!("node {} has a non-finite position or velocity", node.id)));
            }
            index.insert(&node.id, i);
            ids.push(node.id.clone());
            pos.push(*p);
            vel.push(*v);
        }
        if !state.alpha.is_finite() {
            return Err(Error::Numeric("alpha is not finite".into()));
        }

        let mut degree = vec![0usize; n];
        let mut pairs = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            let (Some(&s), Some(&t)) = (index.get(&e.source), index.get(&e.target)) else {
                return Err(Error::Integrity(format!("edge {}->{} has a missing endpoint", e.source, e.target)));
            };
            degree[s] += 1;
            degree[t] += 1;
            pairs.push((s, t));
        }
        let links = pairs
            .into_iter()
            .map(|(s, t)| Link {
                source: s,
                target: t,
                strength: 1.0 / degree[s].min(degree[t]) as f64,
                bias: degree[s] as f64 / (degree[s] + degree[t]) as f64,
            })
            .collect();

        let mut anchors = vec![None; n];
        for c in &doc.clusters {
            for m in &c.member_ids {
                if let Some(&i) = index.get(m) {
                    anchors[i] = Some(c.anchor);
                }
            }
        }

        let jitter = ids.iter().map(|id| jitter(id, state.rng_seed)).collect();
        Ok(Frame { ids, pos, vel, jitter, links, anchors })
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    /// Separation vector from `i` to `j`, substituting jitter when coincident.
    fn separation(&self, i: usize, j: usize) -> (Vec3, f64) {
        let d = sub(self.pos[j], self.pos[i]);
        let l = dot(&d, &d);
        if l >= COINCIDENT_DISTANCE * COINCIDENT_DISTANCE {
            return (d, l);
        }
        let d = sub(self.jitter[j], self.jitter[i]);
        (d, dot(&d, &d))
    }

    fn link_deltas(&self, cfg: &ForceConfig, alpha: f64) -> Vec<Vec3> {
        let mut dv = vec![[0.0; 3]; self.len()];
        for _ in 0..cfg.link_iterations {
            let mut step = vec![[0.0; 3]; self.len()];
            for link in &self.links {
                let (s, t) = (link.source, link.target);
                let predicted_t = add(add(self.pos[t], self.vel[t]), dv[t]);
                let predicted_s = add(add(self.pos[s], self.vel[s]), dv[s]);
                let mut d = sub(predicted_t, predicted_s);
                let mut l = dot(&d, &d).sqrt();
                if l < COINCIDENT_DISTANCE {
                    d = sub(self.jitter[t], self.jitter[s]);
                    l = dot(&d, &d).sqrt();
                    if l == 0.0 {
                        continue;
                    }
                }
                let k = (l - cfg.link_distance) / l * alpha * link.strength;
                let f = scale(d, k);
                step[t] = sub(step[t], scale(f, link.bias));
                step[s] = add(step[s], scale(f, 1.0 - link.bias));
            }
            for (acc, s) in dv.iter_mut().zip(&step) {
                *acc = add(*acc, *s);
            }
        }
        dv
    }

    /// Velocity increment on `i` from a charge `charge` at separation `d` (squared length `l`).
    fn charge_term(cfg: &ForceConfig, d: Vec3, mut l: f64, charge: f64) -> Vec3 {
        if l == 0.0 || l >= cfg.distance_max * cfg.distance_max {
            return [0.0; 3];
        }
        let min2 = cfg.distance_min * cfg.distance_min;
        if l < min2 {
            l = (min2 * l).sqrt();
        }
        scale(d, charge / l)
    }

    fn manybody_deltas(&self, cfg: &ForceConfig, alpha: f64, method: ManyBody) -> Vec<Vec3> {
        let n = self.len();
        let charge = cfg.manybody_strength * alpha;
        match method {
            ManyBody::Exact => (0..n)
                .map(|i| {
                    (0..n).filter(|&j| j != i).fold([0.0; 3], |acc, j| {
                        let (d, l) = self.separation(i, j);
                        add(acc, Self::charge_term(cfg, d, l, charge))
                    })
                })
                .collect(),
            ManyBody::BarnesHut { theta } => {
                let tree = Octree::build(&self.pos);
                (0..n)
                    .map(|i| {
                        let mut acc = [0.0; 3];
                        tree.visit(&self.pos[i], theta, |visit| match visit {
                            Visit::Points(points) => {
                                for &j in points.iter().filter(|&&j| j != i) {
                                    let (d, l) = self.separation(i, j);
                                    acc = add(acc, Self::charge_term(cfg, d, l, charge));
                                }
                            }
                            Visit::Aggregate { count, com } => {
                                let d = sub(com, self.pos[i]);
                                let l = dot(&d, &d);
                                acc = add(acc, Self::charge_term(cfg, d, l, charge * count as f64));
                            }
                        });
                        acc
                    })
                    .collect()
            }
        }
    }

    fn anchor_deltas(&self, cfg: &ForceConfig, alpha: f64) -> Vec<Vec3> {
        self.anchors
            .iter()
            .zip(&self.pos)
            .map(|(anchor, p)| match anchor {
                Some(a) => scale(sub(*a, *p), cfg.cluster_anchor_strength * alpha),
                None => [0.0; 3],
            })
            .collect()
    }

    /// Position shift moving the centroid toward the origin.
    fn center_shift(&self, cfg: &ForceConfig) -> Vec3 {
        if self.pos.is_empty() {
            return [0.0; 3];
        }
        let sum = self.pos.iter().fold([0.0; 3], |acc, p| add(acc, *p));
        scale(sum, -cfg.center_strength / self.len() as f64)
    }

    /// Per-node velocity increments (link + many-body + anchor) at `alpha`.
    fn velocity_deltas(&self, cfg: &ForceConfig, alpha: f64, method: ManyBody) -> Vec<Vec3> {
        let link = self.link_deltas(cfg, alpha);
        let body = self.manybody_deltas(cfg, alpha, method);
        let anchor = self.anchor_deltas(cfg, alpha);
        (0..self.len()).map(|i| add(add(link[i], body[i]), anchor[i])).collect()
    }
}

/// Total per-node force (velocity increment plus centering shift) at the current alpha.
pub fn forces(
    state: &LayoutState,
    doc: &GraphDocument,
    config: &ForceConfig,
    method: ManyBody,
) -> Result<BTreeMap<PaperId, Vec3>> {
    let frame = Frame::build(state, doc)?;
    let shift = frame.center_shift(config);
    let dv = frame.velocity_deltas(config, state.alpha, method);
    Ok(frame.ids.into_iter().zip(dv).map(|(id, v)| (id, add(v, shift))).collect())
}

/// Many-body term alone, for checking the octree against direct summation.
pub fn manybody_forces(
    state: &LayoutState,
    doc: &GraphDocument,
    config: &ForceConfig,
    method: ManyBody,
) -> Result<BTreeMap<PaperId, Vec3>> {
    if method == ManyBody::Exact && doc.nodes.len() > EXACT_FORCES_LIMIT {
        return Err(Error::Capacity(format!(
            "exact forces limited to {EXACT_FORCES_LIMIT} nodes, document has {}",
            doc.nodes.len()
        )));
    }
    let frame = Frame::build(state, doc)?;
    let dv = frame.manybody_deltas(config, state.alpha, method);
    Ok(frame.ids.into_iter().zip(dv).collect())
}

/// O(n^2) reference forces; refuses documents above 2,000 nodes.
pub fn exact_forces(
    state: &LayoutState,
    doc: &GraphDocument,
    config: &ForceConfig,
) -> Result<BTreeMap<PaperId, Vec3>> {
    if doc.nodes.len() > EXACT_FORCES_LIMIT {
        return Err(Error::Capacity(format!(
            "exact forces limited to {EXACT_FORCES_LIMIT} nodes, document has {}",
            doc.nodes.len()
        )));
    }
    forces(state, doc, config, ManyBody::Exact)
}

impl LayoutState {
    /// One integration step.
    pub fn tick(&mut self, doc: &GraphDocument, config: &ForceConfig) -> Result<()> {
        let frame = Frame::build(self, doc)?;
        for (id, pin) in &self.pins {
            if !is_finite(pin) {
                return Err(Error::Numeric(format!("pin for {id} is not finite")));
            }
        }
        let alpha = self.alpha + (config.alpha_target - self.alpha) * config.alpha_decay;
        let dv = frame.velocity_deltas(config, alpha, ManyBody::BarnesHut { theta: config.theta });
        let shift = frame.center_shift(config);
        let keep = 1.0 - config.velocity_decay;

        let mut positions = BTreeMap::new();
        let mut velocities = BTreeMap::new();
        for (i, id) in frame.ids.iter().enumerate() {
            let (p, v) = match self.pins.get(id) {
                Some(pin) => (*pin, [0.0; 3]),
                None => {
                    let v = scale(add(frame.vel[i], dv[i]), keep);
                    (add(add(frame.pos[i], shift), v), v)
                }
            };
            if !is_finite(&p) || !is_finite(&v) {
                return Err(Error::Numeric(format!("node {id} diverged")));
            }
            positions.insert(id.clone(), p);
            velocities.insert(id.clone(), v);
        }
        self.positions = positions;
        self.velocities = velocities;
        self.alpha = alpha;
        Ok(())
    }

    /// Tick until alpha drops below `alpha_min` or `max_ticks` have run.
    /// Returns the number of ticks executed.
    pub fn run(&mut self, doc: &GraphDocument, config: &ForceConfig, max_ticks: usize) -> Result<usize> {
        let mut ticks = 0;
        while ticks < max_ticks && !self.is_cool(config) {
            self.tick(doc, config)?;
            ticks += 1;
        }
        Ok(ticks)
    }

    pub fn is_cool(&self, config: &ForceConfig) -> bool {
        self.alpha < config.alpha_min
    }

    pub fn pin(&mut self, id: &PaperId, pos: Vec3) -> Result<()> {
        if !is_finite(&pos) {
            return Err(Error::Numeric(format!("pin position for {id} is not finite")));
        }
        let slot = self.positions.get_mut(id).ok_or_else(|| Error::not_found(id))?;
        *slot = pos;
        self.velocities.insert(id.clone(), [0.0; 3]);
        self.pins.insert(id.clone(), pos);
        Ok(())
    }

    pub fn unpin(&mut self, id: &PaperId) -> Result<()> {
        if !self.positions.contains_key(id) {
            return Err(Error::not_found(id));
        }
        self.pins.remove(id);
        Ok(())
    }

    /// Place a node directly. A pinned node's pin follows it.
    pub fn move_to(&mut self, id: &PaperId, pos: Vec3) -> Result<()> {
        if !is_finite(&pos) {
            return Err(Error::Numeric(format!("position for {id} is not finite")));
        }
        let slot = self.positions.get_mut(id).ok_or_else(|| Error::not_found(id))?;
        *slot = pos;
        self.velocities.insert(id.clone(), [0.0; 3]);
        if let Some(pin) = self.pins.get_mut(id) {
            *pin = pos;
        }
        Ok(())
    }

    pub fn is_pinned(&self, id: &PaperId) -> bool {
        self.pins.contains_key(id)
    }

    /// Raise alpha to at least `alpha_restart`.
    pub fn reheat(&mut self, alpha_restart: f64) -> Result<()> {
        if !(alpha_restart > 0.0 && alpha_restart <= 1.0) {
            return Err(Error::Validation(format!("reheat alpha {alpha_restart} outside (0, 1]")));
        }
        self.alpha = self.alpha.max(alpha_restart);
        Ok(())
    }

    pub(crate) fn forget(&mut self, id: &PaperId) {
        self.positions.remove(id);
        self.velocities.remove(id);
        self.pins.remove(id);
    }

    pub(crate) fn violations(&self, ids: &BTreeSet<&PaperId>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |subject: String, message: &str| {
            out.push(Violation { subject, message: message.to_string() })
        };
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            push("layout".into(), "alpha outside [0,1]");
        }
        for id in ids {
            let subject = format!("layout {id}");
            match (self.positions.get(*id), self.velocities.get(*id)) {
                (Some(p), Some(v)) => {
                    if !is_finite(p) || !is_finite(v) {
                        push(subject.clone(), "non-finite position or velocity");
                    }
                    if let Some(pin) = self.pins.get(*id) {
                        if v != &[0.0; 3] {
                            push(subject.clone(), "pinned node has nonzero velocity");
                        }
                        if pin != p {
                            push(subject, "pinned node is away from its pin");
                        }
                    }
                }
                _ => push(subject, "missing position or velocity"),
            }
        }
        for id in self.positions.keys().chain(self.velocities.keys()).chain(self.pins.keys()) {
            if !ids.contains(id) {
                push(format!("layout {id}"), "entry for a node not in the document");
            }
        }
        out
    }
}

impl GraphDocument {
    /// One layout tick against this document's own graph.
    pub fn tick(&mut self, config: &ForceConfig) -> Result<()> {
        let mut state = std::mem::take(&mut self.layout);
        let result = state.tick(self, config);
        self.layout = state;
        result
    }

    pub fn run_layout(&mut self, config: &ForceConfig, max_ticks: usize) -> Result<usize> {
        let mut state = std::mem::take(&mut self.layout);
        let result = state.run(self, config, max_ticks);
        self.layout = state;
        result
    }

    /// Re-initialize every position from the spiral under `seed`.
    pub fn init_layout(&mut self, seed: u64) {
        self.layout = init_positions(self, seed);
    }
}
