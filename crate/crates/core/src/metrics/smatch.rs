use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::sbn::{TripleSet, TripleTarget, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmatchOptions {
    /// Total number of climbs, the concept-matched start included.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl SmatchOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        SmatchOptions {
            restarts: restarts.max(1),
            seed,
            max_iterations: 10_000,
        }
    }
}

impl Default for SmatchOptions {
    fn default() -> Self {
        Self::new(4, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub pred_total: usize,
    pub gold_total: usize,
    /// Gold counterpart of each predicted variable.
    pub mapping: Vec<(Variable, Option<Variable>)>,
}

impl MatchResult {
    pub fn from_counts(matched: usize, pred_total: usize, gold_total: usize) -> (f64, f64, f64) {
        let p = if pred_total == 0 {
            0.0
        } else {
            matched as f64 / pred_total as f64
        };
        let r = if gold_total == 0 {
            0.0
        } else {
            matched as f64 / gold_total as f64
        };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

/// Precomputed match tables for one pair of triple sets.
///
/// A mapping's score splits into a per-variable part (triples with a constant
/// target, and self loops) and a part for each variable-to-variable triple.
struct Problem {
    np: usize,
    ng: usize,
    unary: Vec<Vec<u32>>,
    binary: Vec<(usize, u32, usize)>,
    incident: Vec<Vec<usize>>,
    gold_binary: HashSet<(usize, u32, usize)>,
    /// For each pred variable, the gold variables sharing at least one triple
    /// shape with it (same relation in the same position, or a constant match).
    compatible: Vec<Vec<usize>>,
}

impl Problem {
    fn new(pred: &TripleSet, gold: &TripleSet) -> Self {
        let mut relations: HashMap<String, u32> = HashMap::new();
        let mut rel = |r: &str| -> u32 {
            if let Some(&id) = relations.get(r) {
                return id;
            }
            let next = relations.len() as u32;
            relations.insert(r.to_string(), next);
            next
        };
        let np = pred.variables.len();
        let ng = gold.variables.len();

        let mut gold_const: HashMap<(u32, &str), Vec<usize>> = HashMap::new();
        let mut gold_loops: HashMap<u32, Vec<usize>> = HashMap::new();
        let mut gold_binary = HashSet::new();
        for t in &gold.triples {
            let r = rel(&t.relation);
            match &t.target {
                TripleTarget::Const(c) => gold_const.entry((r, c.as_str())).or_default().push(t.source),
                TripleTarget::Var(v) if *v == t.source => gold_loops.entry(r).or_default().push(*v),
                TripleTarget::Var(v) => {
                    gold_binary.insert((t.source, r, *v));
                }
            }
        }

        let mut unary = vec![vec![0u32; ng]; np];
        let mut binary = Vec::new();
        let mut incident = vec![Vec::new(); np];
        for t in &pred.triples {
            let r = rel(&t.relation);
            match &t.target {
                TripleTarget::Const(c) => {
                    for &j in gold_const.get(&(r, c.as_str())).into_iter().flatten() {
                        unary[t.source][j] += 1;
                    }
                }
                TripleTarget::Var(v) if *v == t.source => {
                    for &j in gold_loops.get(&r).into_iter().flatten() {
                        unary[t.source][j] += 1;
                    }
                }
                TripleTarget::Var(v) => {
                    incident[t.source].push(binary.len());
                    incident[*v].push(binary.len());
                    binary.push((t.source, r, *v));
                }
            }
        }
        let mut gold_roles: Vec<HashSet<(u32, bool)>> = vec![HashSet::new(); ng];
        for &(s, r, t) in &gold_binary {
            gold_roles[s].insert((r, true));
            gold_roles[t].insert((r, false));
        }
        let mut pred_roles: Vec<HashSet<(u32, bool)>> = vec![HashSet::new(); np];
        for &(s, r, t) in &binary {
            pred_roles[s].insert((r, true));
            pred_roles[t].insert((r, false));
        }
        let compatible = (0..np)
            .map(|i| {
                (0..ng)
                    .filter(|&j| unary[i][j] > 0 || !pred_roles[i].is_disjoint(&gold_roles[j]))
                    .collect()
            })
            .collect();
        Problem {
            np,
            ng,
            unary,
            binary,
            incident,
            gold_binary,
            compatible,
        }
    }

    fn edge_hit(&self, m: &[Option<usize>], e: usize) -> i64 {
        let (s, r, t) = self.binary[e];
        match (m[s], m[t]) {
            (Some(a), Some(b)) => i64::from(self.gold_binary.contains(&(a, r, b))),
            _ => 0,
        }
    }

    fn score(&self, m: &[Option<usize>]) -> i64 {
        let unary: i64 = (0..self.np)
            .filter_map(|i| m[i].map(|j| i64::from(self.unary[i][j])))
            .sum();
        let binary: i64 = (0..self.binary.len()).map(|e| self.edge_hit(m, e)).sum();
        unary + binary
    }

    /// Score restricted to the given variables and the edges touching them.
    fn local(&self, m: &[Option<usize>], vars: &[usize], edges: &[usize]) -> i64 {
        let unary: i64 = vars
            .iter()
            .filter_map(|&i| m[i].map(|j| i64::from(self.unary[i][j])))
            .sum();
        unary + edges.iter().map(|&e| self.edge_hit(m, e)).sum::<i64>()
    }

    fn touched_edges(&self, vars: &[usize]) -> Vec<usize> {
        let mut edges: Vec<usize> = vars.iter().flat_map(|&v| self.incident[v].iter().copied()).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Steepest-ascent climb from `m`. Only strictly improving moves are taken.
    fn climb(&self, mut m: Vec<Option<usize>>, max_iterations: usize) -> (i64, Vec<Option<usize>>) {
        let mut inverse = vec![None; self.ng];
        for (i, j) in m.iter().enumerate() {
            if let Some(j) = j {
                inverse[*j] = Some(i);
            }
        }
        let mut score = self.score(&m);
        for _ in 0..max_iterations {
            let mut best: Option<(i64, usize, Option<usize>)> = None;
            for i in 0..self.np {
                let targets = std::iter::once(None).chain((0..self.ng).map(Some));
                for target in targets {
                    if target == m[i] {
                        continue;
                    }
                    let other = target.and_then(|g| inverse[g]);
                    let vars: Vec<usize> = std::iter::once(i).chain(other).collect();
                    let edges = self.touched_edges(&vars);
                    let before = self.local(&m, &vars, &edges);
                    let old = m[i];
                    m[i] = target;
                    if let Some(k) = other {
                        m[k] = old;
                    }
                    let delta = self.local(&m, &vars, &edges) - before;
                    m[i] = old;
                    if let Some(k) = other {
                        m[k] = target;
                    }
                    if delta > 0 && best.is_none_or(|(d, _, _)| delta > d) {
                        best = Some((delta, i, target));
                    }
                }
            }
            let Some((delta, i, target)) = best else { break };
            let old = m[i];
            let other = target.and_then(|g| inverse[g]);
            m[i] = target;
            if let Some(g) = target {
                inverse[g] = Some(i);
            }
            match other {
                Some(k) => {
                    m[k] = old;
                    if let Some(o) = old {
                        inverse[o] = Some(k);
                    }
                }
                None => {
                    if let Some(o) = old {
                        inverse[o] = None;
                    }
                }
            }
            score += delta;
        }
        debug_assert_eq!(score, self.score(&m));
        (score, m)
    }

    /// Greedy start that pairs variables sharing the most constant-valued triples.
    fn concept_start(&self) -> Vec<Option<usize>> {
        let mut used = vec![false; self.ng];
        let mut m = vec![None; self.np];
        for (i, slot) in m.iter_mut().enumerate() {
            let mut best: Option<(u32, usize)> = None;
            for j in (0..self.ng).filter(|&j| !used[j]) {
                let w = self.unary[i][j];
                if w > 0 && best.is_none_or(|(bw, _)| w > bw) {
                    best = Some((w, j));
                }
            }
            if let Some((_, j)) = best {
                used[j] = true;
                *slot = Some(j);
            }
        }
        // Variables without a concept match take the remaining gold variables in
        // order, so that edge-only matches are reachable by single moves.
        let mut free = (0..self.ng).filter(|&j| !used[j]);
        for slot in m.iter_mut().filter(|s| s.is_none()) {
            match free.next() {
                Some(j) => *slot = Some(j),
                None => break,
            }
        }
        m
    }

    /// Random injective mapping. Each variable, visited in random order, takes a
    /// random free gold variable it is compatible with, or any free one if none is.
    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<Option<usize>> {
        let mut order: Vec<usize> = (0..self.np).collect();
        order.shuffle(rng);
        let mut used = vec![false; self.ng];
        let mut m = vec![None; self.np];
        let mut pending = Vec::new();
        for i in order {
            let free: Vec<usize> = self.compatible[i].iter().copied().filter(|&j| !used[j]).collect();
            match free.choose(rng) {
                Some(&j) => {
                    used[j] = true;
                    m[i] = Some(j);
                }
                None => pending.push(i),
            }
        }
        let mut rest: Vec<usize> = (0..self.ng).filter(|&j| !used[j]).collect();
        rest.shuffle(rng);
        for (i, j) in pending.into_iter().zip(rest) {
            m[i] = Some(j);
        }
        m
    }
}

/// Triple-overlap F1 maximized over variable mappings by restarted hill climbing.
///
/// Restart 0 starts from a concept-matched mapping; restart `k > 0` starts from a
/// random injective mapping drawn from its own stream of `seed`, so adding
/// restarts never lowers the result.
pub fn smatch_f1(pred: &TripleSet, gold: &TripleSet, options: &SmatchOptions) -> MatchResult {
    let problem = Problem::new(pred, gold);
    let mut best = problem.climb(problem.concept_start(), options.max_iterations);
    for k in 1..options.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(k as u64);
        let start = problem.random_start(&mut rng);
        let found = problem.climb(start, options.max_iterations);
        if found.0 > best.0 {
            best = found;
        }
    }
    let matched = best.0 as usize;
    let (precision, recall, f1) = MatchResult::from_counts(matched, pred.len(), gold.len());
    MatchResult {
        precision,
        recall,
        f1,
        matched,
        pred_total: pred.len(),
        gold_total: gold.len(),
        mapping: best
            .1
            .iter()
            .enumerate()
            .map(|(i, j)| (pred.variables[i], j.map(|j| gold.variables[j])))
            .collect(),
    }
}
