//! Full graph construction, tip colouring and type propagation.

use std::collections::VecDeque;

use rand::Rng;

use super::{holding_time, transition_rates, AsegParams};
use crate::error::Result;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Coalescence,
    Branching,
    PairwiseBranching,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Coalescence => "coalescence",
            EventKind::Branching => "branching",
            EventKind::PairwiseBranching => "pairwise_branching",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub birth_time: f64,
    /// `None` while the vertex is active at the horizon.
    pub deactivation_time: Option<f64>,
    /// 0 or 1 once coloured.
    pub ty: Option<u8>,
}

impl Vertex {
    pub fn active_at_horizon(&self) -> bool {
        self.deactivation_time.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Vertices deactivated by the event.
    pub parents: Vec<usize>,
    /// Vertices created by the event.
    pub children: Vec<usize>,
}

/// Vertices in creation order; the first `n0` are the roots at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AsegGraph {
    pub n0: usize,
    pub horizon: f64,
    pub vertices: Vec<Vertex>,
    /// `(producer, produced)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub events: Vec<GraphEvent>,
    pub exploded_at: Option<f64>,
}

impl AsegGraph {
    pub fn tips(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| v.active_at_horizon())
    }

    pub fn roots(&self) -> &[Vertex] {
        &self.vertices[..self.n0]
    }

    /// Number of vertices active at time `t`.
    pub fn active_at(&self, t: f64) -> usize {
        self.vertices
            .iter()
            .filter(|v| v.birth_time <= t && v.deactivation_time.is_none_or(|d| d > t))
            .count()
    }
}

/// Event-by-event construction on `[0, T]`, choosing participants uniformly
/// among active vertices.
pub fn simulate_graph(params: &AsegParams, ceiling: u64, rng: &mut Stream) -> Result<AsegGraph> {
    params.validate()?;
    let n0 = params.n0 as usize;
    let mut vertices: Vec<Vertex> = (0..n0)
        .map(|id| Vertex {
            id,
            birth_time: 0.0,
            deactivation_time: None,
            ty: None,
        })
        .collect();
    let mut active: Vec<usize> = (0..n0).collect();
    let mut edges = Vec::new();
    let mut events = Vec::new();
    let mut exploded_at = None;
    let mut t = 0.0;

    let retire = |vertices: &mut Vec<Vertex>, active: &mut Vec<usize>, rng: &mut Stream, t: f64| {
        let slot = rng.random_range(0..active.len());
        let id = active.swap_remove(slot);
        vertices[id].deactivation_time = Some(t);
        id
    };

    loop {
        let j = active.len() as u64;
        if j > ceiling {
            exploded_at = Some(t);
            break;
        }
        let (_, coalesce) = transition_rates(j, params.alpha, params.kappa);
        let branch = params.alpha * j as f64;
        let pairwise = params.kappa * coalesce;
        let total = coalesce + branch + pairwise;
        if total <= 0.0 {
            break;
        }
        t += holding_time(total, rng);
        if t > params.horizon {
            break;
        }
        let u = rng.random::<f64>() * total;
        let kind = if u < coalesce {
            EventKind::Coalescence
        } else if u < coalesce + branch {
            EventKind::Branching
        } else {
            EventKind::PairwiseBranching
        };
        let (parents, n_children) = match kind {
            EventKind::Coalescence => {
                let a = retire(&mut vertices, &mut active, rng, t);
                let b = retire(&mut vertices, &mut active, rng, t);
                (vec![a, b], 1)
            }
            _ => (vec![retire(&mut vertices, &mut active, rng, t)], 2),
        };
        let mut children = Vec::with_capacity(n_children);
        for _ in 0..n_children {
            let id = vertices.len();
            vertices.push(Vertex {
                id,
                birth_time: t,
                deactivation_time: None,
                ty: None,
            });
            active.push(id);
            children.push(id);
            for &p in &parents {
                edges.push((p, id));
            }
        }
        events.push(GraphEvent {
            time: t,
            kind,
            parents,
            children,
        });
    }

    Ok(AsegGraph {
        n0,
        horizon: params.horizon,
        vertices,
        edges,
        events,
        exploded_at,
    })
}

/// Colours each tip 0 with probability `x` (in id order) and propagates:
/// an inner vertex is 1 iff a directed path leads from it to a type-1 tip.
pub fn color_and_propagate(mut graph: AsegGraph, x: f64, rng: &mut Stream) -> AsegGraph {
    let tips: Vec<usize> = graph.tips().map(|v| v.id).collect();
    let tip_types: Vec<u8> = tips.iter().map(|_| (rng.random::<f64>() >= x) as u8).collect();
    propagate(&mut graph, &tips, &tip_types);
    graph
}

/// Types every vertex from given tip types by reverse reachability.
pub(crate) fn propagate(graph: &mut AsegGraph, tips: &[usize], tip_types: &[u8]) {
    let n = graph.vertices.len();
    let mut producers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(p, c) in &graph.edges {
        producers[c].push(p);
    }
    let mut ty = vec![0u8; n];
    let mut queue = VecDeque::new();
    for (&id, &t) in tips.iter().zip(tip_types) {
        if t == 1 {
            ty[id] = 1;
            queue.push_back(id);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &p in &producers[v] {
            if ty[p] == 0 {
                ty[p] = 1;
                queue.push_back(p);
            }
        }
    }
    for (v, t) in graph.vertices.iter_mut().zip(ty) {
        v.ty = Some(t);
    }
}
