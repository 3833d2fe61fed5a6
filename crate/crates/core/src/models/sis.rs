//! Jump skeleton of an SIS epidemic on a finite network.
//!
//! Infected vertices are cured at rate `β`, susceptible vertices are infected
//! at rate `α` per infected neighbour, and an empty network receives a new
//! infection at a uniformly chosen vertex. The reverse proposal flips one
//! vertex at a time, weighted by an `ε`-regularised conditional label law
//! with a centre-of-mass tilt on grids.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, ProposalError, Result};
use crate::scalar::Real;
use crate::smc::{Ensemble, ReverseModel, ReverseStep};

/// Undirected simple graph, optionally carrying grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    adjacency: Vec<Vec<u32>>,
    /// `(rows, cols)` when built as a grid; vertex `r·cols + c` sits at
    /// row `r` (the vertical coordinate, increasing upwards) and column `c`.
    grid: Option<(usize, usize)>,
    by_degree: BTreeMap<usize, Vec<u32>>,
}

impl Network {
    fn from_adjacency(mut adjacency: Vec<Vec<u32>>, grid: Option<(usize, usize)>) -> Self {
        let mut by_degree: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for (v, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            nbrs.dedup();
            by_degree.entry(nbrs.len()).or_default().push(v as u32);
        }
        Self {
            adjacency,
            grid,
            by_degree,
        }
    }

    /// Four-nearest-neighbour grid.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParams("grid needs at least one row and column".into()));
        }
        if rows.checked_mul(cols).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::InvalidParams("grid too large".into()));
        }
        let id = |r: usize, c: usize| (r * cols + c) as u32;
        let mut adj = vec![Vec::with_capacity(4); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let v = id(r, c) as usize;
                if r > 0 {
                    adj[v].push(id(r - 1, c));
                }
                if r + 1 < rows {
                    adj[v].push(id(r + 1, c));
                }
                if c > 0 {
                    adj[v].push(id(r, c - 1));
                }
                if c + 1 < cols {
                    adj[v].push(id(r, c + 1));
                }
            }
        }
        Ok(Self::from_adjacency(adj, Some((rows, cols))))
    }

    /// Parses one `u v` pair of zero-based vertex indices per line.
    ///
    /// Blank lines and lines starting with `#` are skipped. The vertex count
    /// is one more than the largest index. Such networks have no geometry, so
    /// the centre-of-mass weight is identically one.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<u32> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("edge list line {}: expected `u v`", lineno + 1)))
            };
            let (u, v) = (parse(it.next())?, parse(it.next())?);
            if it.next().is_some() {
                return Err(Error::InvalidConfig(format!("edge list line {}: trailing tokens", lineno + 1)));
            }
            if u == v {
                return Err(Error::InvalidConfig(format!("edge list line {}: self-loop", lineno + 1)));
            }
            max = max.max(Some(u.max(v)));
            edges.push((u, v));
        }
        let n = max.ok_or_else(|| Error::InvalidConfig("edge list is empty".into()))? as usize + 1;
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        Ok(Self::from_adjacency(adj, None))
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// `(row, col)` of a grid vertex.
    pub fn coords(&self, v: u32) -> Option<(usize, usize)> {
        self.grid.map(|(_, cols)| (v as usize / cols, v as usize % cols))
    }

    /// Grid vertex at `(row, col)`.
    pub fn vertex_at(&self, row: usize, col: usize) -> Option<u32> {
        let (rows, cols) = self.grid?;
        (row < rows && col < cols).then(|| (row * cols + col) as u32)
    }

    /// Neighbours above, below, right and left; off-grid entries are `None`.
    fn directional(&self, v: u32) -> Option<[Option<u32>; 4]> {
        let (r, c) = self.coords(v)?;
        Some([
            self.vertex_at(r + 1, c),
            r.checked_sub(1).and_then(|r| self.vertex_at(r, c)),
            self.vertex_at(r, c + 1),
            c.checked_sub(1).and_then(|c| self.vertex_at(r, c)),
        ])
    }
}

/// Set of infected vertices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SisState {
    infected: Vec<u32>,
}

impl SisState {
    pub fn new(mut infected: Vec<u32>) -> Self {
        infected.sort_unstable();
        infected.dedup();
        Self { infected }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn infected(&self) -> &[u32] {
        &self.infected
    }

    pub fn len(&self) -> usize {
        self.infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.infected.binary_search(&v).is_ok()
    }

    /// The state with the label of `v` flipped.
    pub fn flipped(&self, v: u32) -> Self {
        let mut infected = self.infected.clone();
        match infected.binary_search(&v) {
            Ok(i) => {
                infected.remove(i);
            }
            Err(i) => infected.insert(i, v),
        }
        Self { infected }
    }

    /// The single vertex on which two states differ, if there is exactly one.
    pub fn single_flip(&self, other: &Self) -> Option<u32> {
        let (big, small) = match self.len().checked_sub(other.len()) {
            Some(1) => (self, other),
            _ if other.len() == self.len() + 1 => (other, self),
            _ => return None,
        };
        let mut extra = None;
        let mut j = 0;
        for &v in &big.infected {
            if j < small.len() && small.infected[j] == v {
                j += 1;
            } else if extra.is_none() {
                extra = Some(v);
            } else {
                return None;
            }
        }
        (j == small.len()).then_some(extra).flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisParams<F> {
    /// Infection rate per infected neighbour.
    pub alpha: F,
    /// Cure rate.
    pub beta: F,
    /// Rate at which an infection enters an empty network. It does not affect
    /// the jump chain, where entry is the only move from the empty state.
    pub gamma: F,
    /// Regulariser allowing isolated reverse infections.
    pub epsilon: F,
    /// Detection size `M`.
    pub detection_size: usize,
}

impl<F: Real> SisParams<F> {
    pub fn new(alpha: F, beta: F, gamma: F, epsilon: F, detection_size: usize) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            epsilon,
            detection_size,
        };
        if !(alpha > F::zero() && beta > F::zero() && gamma > F::zero() && epsilon > F::zero()) {
            return Err(Error::InvalidParams("SIS rates and epsilon must be positive".into()));
        }
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite() && epsilon.is_finite()) {
            return Err(Error::InvalidParams("SIS rates must be finite".into()));
        }
        if detection_size == 0 {
            return Err(Error::InvalidParams("detection size must be at least 1".into()));
        }
        Ok(p)
    }

    /// `ε` with `|V|·ε = 10⁻²`.
    pub fn default_epsilon(vertices: usize) -> F {
        F::lit(1e-2) / F::from_count(vertices.max(1))
    }

    pub fn validate_for(&self, net: &Network) -> Result<()> {
        if self.detection_size > net.len() {
            return Err(Error::InvalidParams(format!(
                "detection size {} exceeds {} vertices",
                self.detection_size,
                net.len()
            )));
        }
        Ok(())
    }
}

fn infected_neighbours(v: u32, x: &SisState, net: &Network) -> usize {
    net.neighbors(v).iter().filter(|&&u| x.contains(u)).count()
}

/// Number of edges joining an infected and a susceptible vertex.
pub fn boundary_edges(x: &SisState, net: &Network) -> usize {
    x.infected()
        .iter()
        .map(|&u| net.neighbors(u).iter().filter(|&&w| !x.contains(w)).count())
        .sum()
}

fn total_rate<F: Real>(x: &SisState, boundary: usize, p: &SisParams<F>) -> F {
    p.beta * F::from_count(x.len()) + p.alpha * F::from_count(boundary)
}

/// Successor states of `x` with their rates.
pub fn forward_rates_sis<F: Real>(x: &SisState, p: &SisParams<F>, net: &Network) -> Vec<(SisState, F)> {
    if x.is_empty() {
        let each = p.gamma / F::from_count(net.len());
        return (0..net.len() as u32).map(|v| (SisState::new(vec![v]), each)).collect();
    }
    let mut out: Vec<(SisState, F)> = x.infected().iter().map(|&v| (x.flipped(v), p.beta)).collect();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &u in x.infected() {
        for &w in net.neighbors(u) {
            if !x.contains(w) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    out.extend(counts.into_iter().map(|(v, n)| (x.flipped(v), p.alpha * F::from_count(n))));
    out
}

/// Jump-chain transition probability `P(x, y)`.
pub fn forward_jump_prob<F: Real>(x: &SisState, y: &SisState, p: &SisParams<F>, net: &Network) -> F {
    let Some(v) = x.single_flip(y) else {
        return F::zero();
    };
    if x.is_empty() {
        return F::one() / F::from_count(net.len());
    }
    let rate = if x.contains(v) {
        p.beta
    } else {
        p.alpha * F::from_count(infected_neighbours(v, x, net))
    };
    rate / total_rate(x, boundary_edges(x, net), p)
}

/// Mean `(row, col)` of the infected vertices on a grid.
fn centre_of_mass(x: &SisState, net: &Network) -> Option<(f64, f64)> {
    if x.is_empty() {
        return None;
    }
    let (mut r, mut c) = (0.0, 0.0);
    for &v in x.infected() {
        let (vr, vc) = net.coords(v)?;
        r += vr as f64;
        c += vc as f64;
    }
    let k = x.len() as f64;
    Some((r / k, c / k))
}

fn direction(coord: usize, mean: f64) -> i32 {
    let d = coord as f64 - mean;
    if d.abs() <= 1e-9 {
        0
    } else if d < 0.0 {
        1
    } else {
        -1
    }
}

fn com_weight_with<F: Real>(v: u32, labels: &SisState, com: Option<(f64, f64)>, net: &Network) -> F {
    let (Some((mr, mc)), Some(dirs)) = (com, net.directional(v)) else {
        return F::one();
    };
    let (r, c) = net.coords(v).expect("grid vertex");
    let j = |u: Option<u32>| i32::from(u.is_some_and(|u| labels.contains(u)));
    let [up, down, right, left] = dirs;
    let exponent = -(j(up) - j(down)) * direction(r, mr) - (j(right) - j(left)) * direction(c, mc);
    F::lit(2f64.powi(exponent))
}

/// Centre-of-mass tilt `w(v)` using neighbour labels and the centre of mass
/// of `x`. Equal to one off the grid or when `x` is empty.
pub fn com_weight<F: Real>(v: u32, x: &SisState, net: &Network) -> F {
    com_weight_with(v, x, centre_of_mass(x, net), net)
}

/// Regularised conditional law `(P(J), P(S))` of the label of `v` given the
/// labels of the other vertices in `x`.
pub fn csd_sis<F: Real>(v: u32, x: &SisState, p: &SisParams<F>, net: &Network) -> (F, F) {
    let n = F::from_count(infected_neighbours(v, x, net));
    let denom = p.alpha * n + p.beta + p.epsilon;
    let j = (p.alpha * n + p.epsilon) / denom * com_weight(v, x, net);
    let s = p.beta / denom;
    (j / (j + s), s / (j + s))
}

/// One explicitly enumerated predecessor `y` with vertex `vertex` flipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flip<F> {
    pub vertex: u32,
    /// Unnormalised proposal weight: CSD ratio times `P(x, y)`.
    pub weight: F,
    /// Forward probability `P(x, y)`.
    pub forward: F,
}

/// Susceptible vertices with no infected neighbour and a common degree,
/// which all share one proposal weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolatedGroup<F> {
    pub degree: usize,
    pub count: usize,
    /// Weight of each member.
    pub weight: F,
    pub forward: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SisSupport<F> {
    pub flips: Vec<Flip<F>>,
    pub isolated: Vec<IsolatedGroup<F>>,
    /// Total weight over all predecessors.
    pub normalizer: F,
    /// An isolated vertex whose flip would recreate the observed state.
    excluded: Option<u32>,
    local: HashMap<u32, usize>,
}

impl<F: Real> SisSupport<F> {
    pub fn predecessor_count(&self) -> usize {
        self.flips.len() + self.isolated.iter().map(|g| g.count).sum::<usize>()
    }
}

#[derive(Debug, Clone)]
pub struct SisModel<F> {
    params: SisParams<F>,
    network: Network,
    observed: SisState,
}

impl<F: Real> SisModel<F> {
    pub fn new(params: SisParams<F>, network: Network, observed: SisState) -> Result<Self> {
        params.validate_for(&network)?;
        if observed.is_empty() {
            return Err(Error::InvalidParams("observed configuration must be non-empty".into()));
        }
        if observed.infected().iter().any(|&v| v as usize >= network.len()) {
            return Err(Error::InvalidParams("observed vertex outside the network".into()));
        }
        Ok(Self {
            params,
            network,
            observed,
        })
    }

    pub fn params(&self) -> &SisParams<F> {
        &self.params
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn observed(&self) -> &SisState {
        &self.observed
    }

    /// Predecessors of `y` reachable by one forward jump, excluding the
    /// observed configuration, with their proposal weights.
    pub fn proposal_support(&self, y: &SisState) -> std::result::Result<SisSupport<F>, ProposalError> {
        let (p, net) = (&self.params, &self.network);
        if y.is_empty() {
            return Err(Error::InvalidParams("the empty state has no predecessor".into()).into());
        }
        // Infected-neighbour counts for every vertex touching the infection.
        let mut local: HashMap<u32, usize> = HashMap::with_capacity(5 * y.len());
        for &u in y.infected() {
            local.entry(u).or_default();
            for &w in net.neighbors(u) {
                *local.entry(w).or_default() += 1;
            }
        }
        let boundary: usize = y
            .infected()
            .iter()
            .map(|&u| net.degree(u) - local[&u])
            .sum();
        let com = centre_of_mass(y, net);
        let k = y.len();
        // First-hitting constraint: no predecessor may equal the target.
        let target_flip = self.observed.single_flip(y);

        let mut flips = Vec::with_capacity(local.len());
        let mut keys: Vec<u32> = local.keys().copied().collect();
        keys.sort_unstable();
        for v in keys {
            let n = local[&v];
            let deg = net.degree(v);
            if target_flip == Some(v) {
                continue;
            }
            let tilt = com_weight_with::<F>(v, y, com, net);
            let odds_j = (p.alpha * F::from_count(n) + p.epsilon) * tilt / p.beta;
            let (forward, ratio) = if y.contains(v) {
                // Predecessor lacks v; forward step infects it.
                let forward = if k == 1 {
                    F::one() / F::from_count(net.len())
                } else if n == 0 {
                    continue;
                } else {
                    let e = boundary + n - (deg - n);
                    p.alpha * F::from_count(n) / (p.beta * F::from_count(k - 1) + p.alpha * F::from_count(e))
                };
                (forward, F::one() / odds_j)
            } else {
                // Predecessor has v infected; forward step cures it.
                let e = boundary - n + (deg - n);
                (p.beta / (p.beta * F::from_count(k + 1) + p.alpha * F::from_count(e)), odds_j)
            };
            flips.push(Flip {
                vertex: v,
                weight: ratio * forward,
                forward,
            });
        }

        let excluded = target_flip.filter(|v| !local.contains_key(v));
        let mut isolated = Vec::new();
        let ratio = p.epsilon / p.beta;
        for (&deg, members) in &net.by_degree {
            let touched = local.keys().filter(|&&v| net.degree(v) == deg).count();
            let count = members.len() - touched - usize::from(excluded.is_some_and(|v| net.degree(v) == deg));
            if count == 0 {
                continue;
            }
            let e = boundary + deg;
            let forward = p.beta / (p.beta * F::from_count(k + 1) + p.alpha * F::from_count(e));
            isolated.push(IsolatedGroup {
                degree: deg,
                count,
                weight: ratio * forward,
                forward,
            });
        }

        let normalizer = flips.iter().map(|f| f.weight).sum::<F>()
            + isolated.iter().map(|g| g.weight * F::from_count(g.count)).sum::<F>();
        if !(normalizer > F::zero()) {
            return Err(ProposalError::EmptySupport);
        }
        Ok(SisSupport {
            flips,
            isolated,
            normalizer,
            excluded,
            local,
        })
    }

    fn sample_isolated<R: Rng + ?Sized>(&self, support: &SisSupport<F>, degree: usize, rng: &mut R) -> u32 {
        let members = &self.network.by_degree[&degree];
        let eligible = |v: &u32| !support.local.contains_key(v) && support.excluded != Some(*v);
        for _ in 0..64 {
            let v = members[rng.random_range(0..members.len())];
            if eligible(&v) {
                return v;
            }
        }
        let pool: Vec<u32> = members.iter().copied().filter(eligible).collect();
        pool[rng.random_range(0..pool.len())]
    }
}

impl<F: Real> ReverseModel<F> for SisModel<F> {
    type State = SisState;

    fn forward_density(&self, from: &SisState, to: &SisState) -> F {
        forward_jump_prob(from, to, &self.params, &self.network)
    }

    fn reverse_propose<R: Rng + ?Sized>(
        &self,
        current: &SisState,
        rng: &mut R,
    ) -> std::result::Result<ReverseStep<SisState, F>, ProposalError> {
        let support = self.proposal_support(current)?;
        let u = F::sample_unit(rng) * support.normalizer;
        let mut acc = F::zero();
        let mut chosen = None;
        for f in &support.flips {
            acc = acc + f.weight;
            if u < acc {
                chosen = Some((f.vertex, f.weight, f.forward));
                break;
            }
        }
        if chosen.is_none() {
            for g in &support.isolated {
                acc = acc + g.weight * F::from_count(g.count);
                if u < acc {
                    chosen = Some((self.sample_isolated(&support, g.degree, rng), g.weight, g.forward));
                    break;
                }
            }
        }
        // Rounding can leave the cumulative sum just short of the total.
        let (v, weight, forward) = match chosen {
            Some(c) => c,
            None => match support.isolated.last() {
                Some(g) => (self.sample_isolated(&support, g.degree, rng), g.weight, g.forward),
                None => {
                    let f = support.flips.last().ok_or(ProposalError::EmptySupport)?;
                    (f.vertex, f.weight, f.forward)
                }
            },
        };
        Ok(ReverseStep {
            state: current.flipped(v),
            log_increment: forward.ln() - weight.ln() + support.normalizer.ln(),
        })
    }

    fn proposal_density(&self, current: &SisState, predecessor: &SisState) -> std::result::Result<F, ProposalError> {
        let Some(v) = predecessor.single_flip(current) else {
            return Ok(F::zero());
        };
        let support = self.proposal_support(current)?;
        if let Some(f) = support.flips.iter().find(|f| f.vertex == v) {
            return Ok(f.weight / support.normalizer);
        }
        if support.local.contains_key(&v) || support.excluded == Some(v) {
            return Ok(F::zero());
        }
        let deg = self.network.degree(v);
        Ok(support
            .isolated
            .iter()
            .find(|g| g.degree == deg)
            .map_or(F::zero(), |g| g.weight / support.normalizer))
    }

    fn is_initial(&self, state: &SisState) -> bool {
        state.is_empty()
    }

    fn is_target(&self, state: &SisState) -> bool {
        *state == self.observed
    }

    fn initial_density(&self, state: &SisState) -> F {
        if state.is_empty() {
            F::one()
        } else {
            F::zero()
        }
    }

    fn terminal_sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> SisState {
        self.observed.clone()
    }

    fn terminal_density(&self, state: &SisState) -> F {
        if *state == self.observed {
            F::one()
        } else {
            F::zero()
        }
    }

    fn level(&self, state: &SisState) -> usize {
        state.len()
    }
}

/// Self-normalised estimate of `P(X₁ = {v} | τ_T < τ_I)` for every vertex:
/// the weighted fraction of reverse trajectories whose last state before the
/// empty network is `{v}`.
pub fn likelihood_surface<F: Real>(ensemble: &Ensemble<SisState, F>, vertices: usize) -> Result<Vec<F>> {
    let max = ensemble
        .particles
        .iter()
        .map(|p| p.log_weight)
        .fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return Err(Error::ZeroWeights);
    }
    let mut surface = vec![F::zero(); vertices];
    let mut total = F::zero();
    for p in &ensemble.particles {
        if p.log_weight == F::neg_infinity() {
            continue;
        }
        let w = (p.log_weight - max).exp();
        let source = match (p.trajectory.last().is_empty(), p.trajectory.from_end(1)) {
            (true, Some(s)) if s.len() == 1 => s.infected()[0] as usize,
            _ => return Err(Error::Numerical("weighted trajectory does not end at a single source".into())),
        };
        if source >= vertices {
            return Err(Error::InvalidParams("source vertex outside the surface".into()));
        }
        surface[source] = surface[source] + w;
        total = total + w;
    }
    for s in &mut surface {
        *s = *s / total;
    }
    Ok(surface)
}

/// All vertices attaining the maximum of the surface (ties within a relative
/// `1e-12`), in increasing order.
pub fn argmax_vertices<F: Real>(surface: &[F]) -> Vec<usize> {
    let Some(best) = surface.iter().copied().reduce(F::max) else {
        return Vec::new();
    };
    let tol = F::lit(1e-12) * best.abs();
    surface
        .iter()
        .enumerate()
        .filter(|(_, &s)| best - s <= tol)
        .map(|(v, _)| v)
        .collect()
}

/// A synthetic detection event.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub observed: SisState,
    pub source: u32,
    /// Epidemics that died out before detection.
    pub restarts: usize,
}

/// Runs the forward jump chain from the empty network until `M` vertices are
/// infected at once, restarting whenever the infection dies out.
pub fn simulate_forward_epidemic<F: Real, R: Rng + ?Sized>(
    p: &SisParams<F>,
    net: &Network,
    max_restarts: usize,
    rng: &mut R,
) -> Result<Detection> {
    p.validate_for(net)?;
    let n = net.len();
    let max_degree = net.by_degree.keys().next_back().copied().unwrap_or(0);
    let mut infected = vec![false; n];
    let mut list: Vec<u32> = Vec::with_capacity(p.detection_size);
    for restarts in 0..=max_restarts {
        for &v in &list {
            infected[v as usize] = false;
        }
        list.clear();
        let source = rng.random_range(0..n) as u32;
        infected[source as usize] = true;
        list.push(source);
        let mut boundary = net.degree(source);
        while !list.is_empty() && list.len() < p.detection_size {
            let cure = p.beta * F::from_count(list.len());
            let total = cure + p.alpha * F::from_count(boundary);
            let (v, add) = if F::sample_unit(rng) * total < cure {
                (list.swap_remove(rng.random_range(0..list.len())), false)
            } else {
                // Uniform boundary edge by rejection over (infected, slot) pairs.
                loop {
                    let u = list[rng.random_range(0..list.len())];
                    let slot = rng.random_range(0..max_degree);
                    if let Some(&w) = net.neighbors(u).get(slot) {
                        if !infected[w as usize] {
                            list.push(w);
                            break (w, true);
                        }
                    }
                }
            };
            infected[v as usize] = add;
            let nb = net.neighbors(v).iter().filter(|&&w| infected[w as usize]).count();
            let free = net.degree(v) - nb;
            boundary = if add { boundary + free - nb } else { boundary + nb - free };
        }
        if list.len() == p.detection_size {
            return Ok(Detection {
                observed: SisState::new(list),
                source,
                restarts,
            });
        }
    }
    Err(Error::DetectionNotReached { restarts: max_restarts })
}

/// Whether the infected vertices form one connected component.
pub fn is_connected(x: &SisState, net: &Network) -> bool {
    let Some(&start) = x.infected().first() else {
        return true;
    };
    let mut seen = vec![start];
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &w in net.neighbors(u) {
            if x.contains(w) && !seen.contains(&w) {
                seen.push(w);
                stack.push(w);
            }
        }
    }
    seen.len() == x.len()
}
