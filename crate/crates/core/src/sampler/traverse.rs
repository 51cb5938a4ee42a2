use std::collections::{HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    label_connectivity, Direction, GraphStore, Method, SampleError, SampledNode, SamplerConfig,
    Subgraph,
};
use crate::model::NodeRef;

/// One neighbor-sampling call of Forest Fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopTrace {
    pub hop: usize,
    /// Unvisited neighbors offered to the sampler.
    pub candidates: usize,
    pub budget: usize,
    pub added: usize,
}

struct State<'a> {
    store: &'a GraphStore,
    cfg: &'a SamplerConfig,
    in_v: Vec<bool>,
    nodes: Vec<u32>,
    edge_in: HashSet<u32>,
    edges: Vec<u32>,
    stopped: bool,
    trace: Vec<HopTrace>,
}

impl<'a> State<'a> {
    fn start(store: &'a GraphStore, cfg: &'a SamplerConfig, root: &NodeRef) -> Result<(Self, u32), SampleError> {
        cfg.validate()?;
        let &r = store.index.get(root).ok_or_else(|| SampleError::RootNotFound(root.clone()))?;
        if !cfg.node_type_filter.allows(&root.kind()) {
            return Err(SampleError::RootFiltered(root.clone()));
        }
        let mut s = State {
            store,
            cfg,
            in_v: vec![false; store.node_count()],
            nodes: Vec::new(),
            edge_in: HashSet::new(),
            edges: Vec::new(),
            stopped: false,
            trace: Vec::new(),
        };
        s.take_node(r);
        Ok((s, r))
    }

    /// Incident `(edge, other endpoint)` pairs that pass the direction and type filters.
    fn neighbors(&self, v: u32) -> Vec<(u32, u32)> {
        let g = self.store;
        let mut out = Vec::new();
        let mut push = |eid: u32, other: u32| {
            let e = &g.edges[eid as usize];
            if self.cfg.edge_type_filter.allows(&e.edge_type)
                && self.cfg.node_type_filter.allows(&g.nodes[other as usize].kind())
            {
                out.push((eid, other));
            }
        };
        if self.cfg.direction != Direction::In {
            for &eid in &g.out_adj[v as usize] {
                push(eid, g.index[&g.edges[eid as usize].dst]);
            }
        }
        if self.cfg.direction != Direction::Out {
            for &eid in &g.in_adj[v as usize] {
                push(eid, g.index[&g.edges[eid as usize].src]);
            }
        }
        out
    }

    fn node_room(&self) -> usize {
        self.cfg.max_nodes.saturating_sub(self.nodes.len())
    }

    fn edge_room(&self) -> bool {
        self.edges.len() < self.cfg.max_edges
    }

    fn take_node(&mut self, i: u32) {
        self.in_v[i as usize] = true;
        self.nodes.push(i);
        if self.cfg.stop_on_nodes.contains(&self.store.nodes[i as usize].kind()) {
            self.stopped = true;
        }
    }

    fn take_edge(&mut self, eid: u32) {
        self.edge_in.insert(eid);
        self.edges.push(eid);
        if self.cfg.stop_on_edges.contains(&self.store.edges[eid as usize].edge_type) {
            self.stopped = true;
        }
    }

    /// Expands `u` by one step along `eid` to `w`. Returns whether `w` is newly added.
    fn step(&mut self, eid: u32, w: u32) -> bool {
        if self.edge_in.contains(&eid) || !self.edge_room() {
            return false;
        }
        if self.in_v[w as usize] {
            self.take_edge(eid);
            return false;
        }
        if self.node_room() == 0 {
            return false;
        }
        self.take_node(w);
        self.take_edge(eid);
        true
    }

    fn finish(self, root: &NodeRef) -> Result<Subgraph, SampleError> {
        let cfg = self.cfg;
        if self.nodes.len() < cfg.min_nodes || self.edges.len() < cfg.min_edges {
            return Err(SampleError::TooSmall {
                nodes: self.nodes.len(),
                edges: self.edges.len(),
                min_nodes: cfg.min_nodes,
                min_edges: cfg.min_edges,
            });
        }
        let g = self.store;
        let refs: Vec<NodeRef> = self.nodes.iter().map(|&i| g.nodes[i as usize].clone()).collect();
        let edges: Vec<_> = self.edges.iter().map(|&e| g.edges[e as usize].clone()).collect();
        let label = label_connectivity(&refs, &edges);
        let nodes = self
            .nodes
            .iter()
            .zip(refs)
            .map(|(&i, node)| SampledNode {
                node,
                script_type: g.script_types[i as usize],
            })
            .collect();
        Ok(Subgraph {
            root: root.clone(),
            nodes,
            edges,
            label,
            trace: self.trace,
        })
    }
}

/// Breadth-first expansion up to `h_max` hops from the root.
pub fn sample_bfs(store: &GraphStore, root: &NodeRef, cfg: &SamplerConfig) -> Result<Subgraph, SampleError> {
    let (mut s, r) = State::start(store, cfg, root)?;
    let mut queue = VecDeque::from([(r, 0usize)]);
    'outer: while let Some((u, depth)) = queue.pop_front() {
        if depth >= cfg.h_max {
            continue;
        }
        for (eid, w) in s.neighbors(u) {
            if s.stopped {
                break 'outer;
            }
            if s.step(eid, w) {
                queue.push_back((w, depth + 1));
            }
        }
    }
    s.finish(root)
}

/// Depth-first preorder expansion up to `h_max` hops from the root.
pub fn sample_dfs(store: &GraphStore, root: &NodeRef, cfg: &SamplerConfig) -> Result<Subgraph, SampleError> {
    let (mut s, r) = State::start(store, cfg, root)?;
    let mut stack = vec![(r, 0usize, s.neighbors(r), 0usize)];
    while let Some(top) = stack.last_mut() {
        if s.stopped || top.1 >= cfg.h_max || top.3 >= top.2.len() {
            stack.pop();
            continue;
        }
        let (eid, w) = top.2[top.3];
        top.3 += 1;
        let depth = top.1;
        if s.step(eid, w) {
            let nb = s.neighbors(w);
            stack.push((w, depth + 1, nb, 0));
        }
    }
    s.finish(root)
}

struct Fire<'a> {
    s: State<'a>,
    rng: ChaCha8Rng,
}

impl Fire<'_> {
    fn traverse_hop(&mut self, v: u32, h: usize) {
        let s = &mut self.s;
        let mut fresh_edges = Vec::new();
        let mut candidates = Vec::new();
        let mut offered = HashSet::new();
        for (eid, w) in s.neighbors(v) {
            if s.edge_in.contains(&eid) {
                continue;
            }
            fresh_edges.push(eid);
            if !s.in_v[w as usize] && offered.insert(w) {
                candidates.push(w);
            }
        }
        let budget = s.cfg.hop_budget(h);
        let k = budget.min(s.node_room()).min(candidates.len());
        let mut picks = rand::seq::index::sample(&mut self.rng, candidates.len(), k).into_vec();
        picks.sort_unstable();
        let sampled: HashSet<u32> = picks.iter().map(|&p| candidates[p]).collect();
        for &p in &picks {
            s.take_node(candidates[p]);
        }
        s.trace.push(HopTrace {
            hop: h,
            candidates: candidates.len(),
            budget,
            added: k,
        });
        let mut next = Vec::new();
        let mut queued = HashSet::new();
        for eid in fresh_edges {
            let target = s.store.index[&s.store.edges[eid as usize].dst];
            if sampled.contains(&target) && s.edge_room() {
                s.take_edge(eid);
                if queued.insert(target) {
                    next.push(target);
                }
            }
        }
        if h < s.cfg.h_max && !s.stopped {
            for x in next {
                if self.s.stopped {
                    break;
                }
                self.traverse_hop(x, h + 1);
            }
        }
    }
}

/// Forest Fire with a per-hop neighbor budget of `max(n - h * delta, 0)`.
///
/// Hop 0 samples the root's neighbors. Each call keeps only edges whose
/// directed target was sampled in that call and recurses into those targets
/// while `h < h_max`, so nodes reached solely through incoming edges stay
/// isolated in the sample.
pub fn sample_forest_fire(
    store: &GraphStore,
    root: &NodeRef,
    cfg: &SamplerConfig,
) -> Result<Subgraph, SampleError> {
    let (s, r) = State::start(store, cfg, root)?;
    let mut fire = Fire {
        s,
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
    };
    if !fire.s.stopped {
        fire.traverse_hop(r, 0);
    }
    fire.s.finish(root)
}

pub fn sample(
    store: &GraphStore,
    root: &NodeRef,
    method: Method,
    cfg: &SamplerConfig,
) -> Result<Subgraph, SampleError> {
    match method {
        Method::Bfs => sample_bfs(store, root, cfg),
        Method::Dfs => sample_dfs(store, root, cfg),
        Method::ForestFire => sample_forest_fire(store, root, cfg),
    }
}
