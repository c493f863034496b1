//! Connected-graph sums over bond weights, the subset deconvolution that
//! computes them at scale, labeled-tree enumeration, and the spanning-tree
//! upper bound.
//!
//! Conventions: a configuration of `m` points carries vertex labels
//! `0..m`. Products over edges always run in lexicographic pair order, so
//! results are bit-reproducible for a fixed input order. Sums use Neumaier
//! compensation; cancellation between signed graph terms is severe for
//! attractive wells.

use crate::error::{Error, Result};
use crate::potential::PairPotential;

/// Literal-definition path: enumerate every connected labeled graph.
pub const GRAPH_SUM_CAP: usize = 7;
/// Production path: subset deconvolution, `3^m` work and `2^m` memory.
pub const SUBSET_RECURSION_CAP: usize = 20;
/// Spanning-tree bound enumeration cap.
pub const TREE_CAP: usize = 9;

/// Ordered tuple of points in d-dimensional space, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dimension: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(dimension: usize, coords: Vec<f64>) -> Result<Self> {
        if dimension == 0 || coords.len() % dimension != 0 || coords.is_empty() {
            return Err(Error::InvalidGeometry(
                "coordinate buffer must hold >= 1 point of positive dimension".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry(
                "configuration coordinates must be finite".into(),
            ));
        }
        Ok(Configuration { dimension, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::InvalidGeometry("ragged point list".into()));
            }
            coords.extend_from_slice(p);
        }
        Configuration::new(d, coords)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }
}

#[inline]
pub(crate) fn separation(d: usize, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..d {
        let dx = a[k] - b[k];
        acc += dx * dx;
    }
    acc.sqrt()
}

/// Bond weight `exp(-beta v(|x_i - x_j|)) - 1`: exactly `-1` on hard-core
/// overlap, exactly `0` at separations at or beyond the range.
#[inline]
pub fn f_bond(potential: &PairPotential, beta: f64, xi: &[f64], xj: &[f64]) -> f64 {
    let r = separation(potential.dimension(), xi, xj);
    if r >= potential.range() {
        return 0.0;
    }
    (-beta * potential.evaluate_unchecked(r)).exp() - 1.0
}

/// Symmetric matrix of bond weights for one configuration.
#[derive(Clone, Debug)]
pub struct EdgeWeights {
    m: usize,
    f: Vec<f64>,
}

impl EdgeWeights {
    pub fn from_configuration(
        potential: &PairPotential,
        beta: f64,
        config: &Configuration,
    ) -> EdgeWeights {
        let m = config.len();
        let mut w = EdgeWeights {
            m,
            f: vec![0.0; m * m],
        };
        for i in 0..m {
            for j in (i + 1)..m {
                let f = f_bond(potential, beta, config.point(i), config.point(j));
                w.f[i * m + j] = f;
                w.f[j * m + i] = f;
            }
        }
        w
    }

    /// Weights supplied directly (tests and oracles).
    pub fn from_matrix(m: usize, entries: &[(usize, usize, f64)]) -> EdgeWeights {
        let mut w = EdgeWeights {
            m,
            f: vec![0.0; m * m],
        };
        for &(i, j, f) in entries {
            w.f[i * m + j] = f;
            w.f[j * m + i] = f;
        }
        w
    }

    /// Refill in place from a flat coordinate buffer (`m` points of
    /// dimension `d`); the vertex count must match.
    pub fn fill_from_coords(
        &mut self,
        potential: &PairPotential,
        beta: f64,
        coords: &[f64],
        d: usize,
    ) {
        let m = self.m;
        debug_assert_eq!(coords.len(), m * d);
        for i in 0..m {
            for j in (i + 1)..m {
                let f = f_bond(
                    potential,
                    beta,
                    &coords[i * d..(i + 1) * d],
                    &coords[j * d..(j + 1) * d],
                );
                self.f[i * m + j] = f;
                self.f[j * m + i] = f;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn f(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.m + j]
    }
}

/// Neumaier compensated accumulator; adding an exact zero is a no-op, so
/// skip-zero fast paths do not perturb results.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Labeled graph on `m` vertices as a bitmask over the `m(m-1)/2` pairs in
/// lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledGraph {
    pub m: usize,
    pub edges: u32,
}

#[inline]
fn pair_bit(i: usize, j: usize) -> u32 {
    // i < j; bits ordered (0,1), (0,2), (1,2), (0,3), ...
    debug_assert!(i < j);
    (j * (j - 1) / 2 + i) as u32
}

impl LabeledGraph {
    pub fn edge_count(&self) -> u32 {
        self.edges.count_ones()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.edges >> pair_bit(i, j) & 1 == 1
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 1..self.m {
            for i in 0..j {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.m <= 1 {
            return true;
        }
        let mut adj = [0u32; 32];
        for j in 1..self.m {
            for i in 0..j {
                if self.edges >> pair_bit(i, j) & 1 == 1 {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        let full = (1u32 << self.m) - 1;
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let mut next = 0u32;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[v];
            }
            frontier = next & !seen;
            seen |= next;
            if seen == full {
                return true;
            }
        }
        seen == full
    }
}

/// Every connected labeled graph on `m` vertices, each exactly once.
pub fn connected_graphs(m: usize) -> Result<impl Iterator<Item = LabeledGraph>> {
    if m > GRAPH_SUM_CAP {
        return Err(Error::over_cap_hint(
            "connected-graph enumeration",
            m,
            GRAPH_SUM_CAP,
            "; use the subset recursion for larger orders",
        ));
    }
    let bits = m * (m - 1) / 2;
    Ok((0u32..1u32 << bits)
        .map(move |edges| LabeledGraph { m, edges })
        .filter(|g| g.is_connected()))
}

/// Connected labeled graph count (exhaustive).
pub fn count_connected_graphs(m: usize) -> Result<u64> {
    Ok(connected_graphs(m)?.count() as u64)
}

/// Sum over connected graphs of the product of bond weights. Literal
/// definition; serves as the oracle for the subset recursion.
pub fn ursell_graph_sum(weights: &EdgeWeights) -> Result<f64> {
    let m = weights.len();
    if m > GRAPH_SUM_CAP {
        return Err(Error::over_cap_hint(
            "graph-sum evaluation",
            m,
            GRAPH_SUM_CAP,
            "; use the subset recursion for larger orders",
        ));
    }
    if m == 1 {
        return Ok(1.0);
    }
    if m == 2 {
        return Ok(weights.f(0, 1));
    }
    let bits = m * (m - 1) / 2;
    // pair lookup in bit order
    let mut pairs = Vec::with_capacity(bits);
    for j in 1..m {
        for i in 0..j {
            pairs.push((i, j));
        }
    }
    let mut acc = Accumulator::default();
    for edges in 0u32..1u32 << bits {
        let g = LabeledGraph { m, edges };
        if !g.is_connected() {
            continue;
        }
        let mut prod = 1.0;
        let mut e = edges;
        while e != 0 {
            let b = e.trailing_zeros() as usize;
            e &= e - 1;
            let (i, j) = pairs[b];
            prod *= weights.f(i, j);
            if prod == 0.0 {
                break;
            }
        }
        acc.add(prod);
    }
    Ok(acc.value())
}

/// Reusable buffers for the subset recursion.
#[derive(Clone, Debug, Default)]
pub struct UrsellWorkspace {
    w: Vec<f64>,
    phi: Vec<f64>,
}

/// Connected part of the all-graphs sum via first-vertex deconvolution.
///
/// With `W(S) = prod_{pairs in S} (1 + f_ij)` (the all-graphs sum on `S`),
/// the connected part satisfies
/// `Phi(S) = W(S) - sum_{T proper subset of S, min(S) in T} Phi(T) W(S\T)`,
/// and `Phi` of the full vertex set is the value wanted. `3^m` work.
pub fn ursell_subset_recursion_with(
    weights: &EdgeWeights,
    ws: &mut UrsellWorkspace,
) -> Result<f64> {
    let m = weights.len();
    if m > SUBSET_RECURSION_CAP {
        return Err(Error::over_cap(
            "subset recursion",
            m,
            SUBSET_RECURSION_CAP,
        ));
    }
    if m == 1 {
        return Ok(1.0);
    }
    if m == 2 {
        return Ok(weights.f(0, 1));
    }
    let full = (1usize << m) - 1;
    ws.w.clear();
    ws.w.resize(full + 1, 0.0);
    ws.phi.clear();
    ws.phi.resize(full + 1, 0.0);
    ws.w[0] = 1.0;
    for s in 1..=full {
        let j = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let mut w = ws.w[rest];
        let mut r = rest;
        while r != 0 && w != 0.0 {
            let i = r.trailing_zeros() as usize;
            r &= r - 1;
            w *= 1.0 + weights.f(i, j);
        }
        ws.w[s] = w;
    }
    // subsets containing vertex 0, in increasing mask order
    for s in (1..=full).step_by(2) {
        let mut acc = Accumulator::default();
        acc.add(ws.w[s]);
        // proper submasks of s containing bit 0
        let inner = s & !1usize;
        let mut u = inner;
        loop {
            u = u.wrapping_sub(1) & inner;
            let t = u | 1;
            if t != s {
                acc.add(-ws.phi[t] * ws.w[s & !t]);
            }
            if u == 0 {
                break;
            }
        }
        ws.phi[s] = acc.value();
    }
    Ok(ws.phi[full])
}

/// Allocation-per-call convenience wrapper around the subset recursion.
pub fn ursell_subset_recursion(weights: &EdgeWeights) -> Result<f64> {
    ursell_subset_recursion_with(weights, &mut UrsellWorkspace::default())
}

/// Evaluate the connected-part sum for a configuration of points.
pub fn ursell_value(
    potential: &PairPotential,
    beta: f64,
    config: &Configuration,
) -> Result<f64> {
    let w = EdgeWeights::from_configuration(potential, beta, config);
    ursell_subset_recursion(&w)
}

/// Decode one sequence over `{0..m-1}^(m-2)` into the labeled tree it
/// encodes, appending edges to `out`. Linear-time pointer scan.
fn decode_tree(m: usize, seq: &[usize], degree: &mut [u32], out: &mut Vec<(usize, usize)>) {
    out.clear();
    if m == 2 {
        out.push((0, 1));
        return;
    }
    for d in degree.iter_mut() {
        *d = 1;
    }
    for &a in seq {
        degree[a] += 1;
    }
    let mut ptr = 0;
    while degree[ptr] != 1 {
        ptr += 1;
    }
    let mut leaf = ptr;
    for &a in seq {
        out.push((leaf, a));
        degree[a] -= 1;
        if degree[a] == 1 && a < ptr {
            leaf = a;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    out.push((leaf, m - 1));
}

/// Visit every labeled tree on `m >= 2` vertices exactly once; there are
/// `m^(m-2)` of them.
pub fn for_each_tree<F>(m: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[(usize, usize)]),
{
    if m < 2 {
        return Err(Error::InvalidGeometry(
            "trees need at least two vertices".into(),
        ));
    }
    let mut seq = vec![0usize; m.saturating_sub(2)];
    let mut degree = vec![0u32; m];
    let mut edges = Vec::with_capacity(m - 1);
    loop {
        decode_tree(m, &seq, &mut degree, &mut edges);
        visit(&edges);
        // odometer over sequences
        let mut k = 0;
        loop {
            if k == seq.len() {
                return Ok(());
            }
            seq[k] += 1;
            if seq[k] < m {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
    }
}

/// All labeled trees, materialized. Convenience for tests and small orders.
pub fn enumerate_trees(m: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut out = Vec::new();
    for_each_tree(m, |edges| out.push(edges.to_vec()))?;
    Ok(out)
}

pub fn count_trees(m: usize) -> Result<u64> {
    if m < 2 {
        return Err(Error::InvalidGeometry(
            "trees need at least two vertices".into(),
        ));
    }
    Ok((m as u64).pow(m as u32 - 2))
}

/// Spanning-tree upper bound on the connected-part magnitude:
/// `exp(beta c_decl m) * sum over trees of prod (1 - exp(-beta |v|))`.
/// Each edge factor lies in `[0, 1]`.
pub fn tree_bound(
    potential: &PairPotential,
    beta: f64,
    config: &Configuration,
) -> Result<f64> {
    let m = config.len();
    if m > TREE_CAP {
        return Err(Error::over_cap("tree-bound enumeration", m, TREE_CAP));
    }
    if m == 1 {
        return Ok((beta * potential.c_decl()).exp());
    }
    let mut u = vec![0.0f64; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let r = separation(config.dimension(), config.point(i), config.point(j));
            let v = potential.evaluate_unchecked(r);
            let w = 1.0 - (-beta * v.abs()).exp();
            u[i * m + j] = w;
            u[j * m + i] = w;
        }
    }
    let mut acc = Accumulator::default();
    for_each_tree(m, |edges| {
        let mut prod = 1.0;
        for &(i, j) in edges {
            prod *= u[i * m + j];
            if prod == 0.0 {
                break;
            }
        }
        acc.add(prod);
    })?;
    Ok((beta * potential.c_decl() * m as f64).exp() * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn square_well() -> PairPotential {
        PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0)).unwrap()
    }

    fn random_config(
        rng: &mut rand_chacha::ChaCha8Rng,
        m: usize,
        span: f64,
    ) -> Configuration {
        let coords: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..span)).collect();
        Configuration::new(1, coords).unwrap()
    }

    #[test]
    fn connected_counts_match_known_sequence() {
        let expect = [1u64, 1, 4, 38, 728, 26704];
        for (m, &want) in (1..=6).zip(&expect) {
            assert_eq!(count_connected_graphs(m).unwrap(), want, "m = {m}");
        }
        assert!(connected_graphs(8).is_err());
    }

    #[test]
    fn tree_counts_match_cayley() {
        for m in 2..=8 {
            let mut n = 0u64;
            for_each_tree(m, |_| n += 1).unwrap();
            assert_eq!(n, count_trees(m).unwrap());
            assert_eq!(n, (m as u64).pow(m as u32 - 2));
        }
        assert_eq!(enumerate_trees(3).unwrap().len(), 3);
        assert_eq!(enumerate_trees(5).unwrap().len(), 125);
    }

    #[test]
    fn trees_are_distinct_and_valid() {
        for m in 2..=6 {
            let trees = enumerate_trees(m).unwrap();
            let mut seen = std::collections::HashSet::new();
            for t in &trees {
                assert_eq!(t.len(), m - 1);
                let mut mask = 0u32;
                for &(i, j) in t {
                    let (i, j) = if i < j { (i, j) } else { (j, i) };
                    mask |= 1 << pair_bit(i, j);
                }
                let g = LabeledGraph { m, edges: mask };
                assert_eq!(g.edge_count() as usize, m - 1, "no repeated edges");
                assert!(g.is_connected());
                assert!(seen.insert(mask), "duplicate tree emitted");
            }
        }
    }

    #[test]
    fn f_bond_exact_values() {
        let p = square_well();
        assert_eq!(f_bond(&p, 1.0, &[0.0], &[1.7]), 0.0);
        assert_eq!(f_bond(&p, 1.0, &[0.0], &[0.2]), -1.0);
        assert_relative_eq!(
            f_bond(&p, 1.0, &[0.0], &[0.7]),
            std::f64::consts::E - 1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn graph_sum_small_cases() {
        let p = square_well();
        let single = Configuration::new(1, vec![0.3]).unwrap();
        let w = EdgeWeights::from_configuration(&p, 1.0, &single);
        assert_eq!(ursell_graph_sum(&w).unwrap(), 1.0);

        let pair = Configuration::new(1, vec![0.0, 0.7]).unwrap();
        let w = EdgeWeights::from_configuration(&p, 1.0, &pair);
        assert_eq!(
            ursell_graph_sum(&w).unwrap(),
            f_bond(&p, 1.0, &[0.0], &[0.7])
        );
    }

    #[test]
    fn isolated_vertex_kills_every_graph() {
        let p = square_well();
        // pair (0,1) in range, vertex 2 far away
        let cfg = Configuration::new(1, vec![0.0, 0.7, 10.0]).unwrap();
        let w = EdgeWeights::from_configuration(&p, 1.0, &cfg);
        assert_eq!(ursell_graph_sum(&w).unwrap(), 0.0);
    }

    #[test]
    fn recursion_matches_graph_sum() {
        let p = square_well();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for m in 2..=6 {
            for _ in 0..100 {
                let cfg = random_config(&mut rng, m, 0.9 * m as f64);
                let w = EdgeWeights::from_configuration(&p, 1.0, &cfg);
                let a = ursell_graph_sum(&w).unwrap();
                let b = ursell_subset_recursion(&w).unwrap();
                assert!(
                    (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                    "m={m}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn recursion_vanishes_across_cluster_split() {
        let p = square_well();
        // two clusters farther apart than the range
        let cfg =
            Configuration::new(1, vec![0.0, 0.6, 0.9, 5.0, 5.7]).unwrap();
        let w = EdgeWeights::from_configuration(&p, 1.0, &cfg);
        assert!(ursell_subset_recursion(&w).unwrap().abs() <= 1e-12);
        assert_eq!(ursell_graph_sum(&w).unwrap(), 0.0);
    }

    #[test]
    fn complete_overlap_values() {
        // all bonds -1: known alternating values (-1)^(m-1) (m-1)!
        for m in 2..=6 {
            let mut entries = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    entries.push((i, j, -1.0));
                }
            }
            let w = EdgeWeights::from_matrix(m, &entries);
            let want = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 }
                * (1..m as u64).product::<u64>() as f64;
            assert_eq!(ursell_graph_sum(&w).unwrap(), want);
            assert_relative_eq!(
                ursell_subset_recursion(&w).unwrap(),
                want,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn tree_bound_dominates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for p in [square_well(), PairPotential::hard_rod(1.0).unwrap()] {
            for m in 2..=6 {
                for _ in 0..2000 {
                    let cfg = random_config(&mut rng, m, 0.9 * m as f64);
                    let w = EdgeWeights::from_configuration(&p, 1.0, &cfg);
                    let phi = ursell_subset_recursion(&w).unwrap();
                    let bound = tree_bound(&p, 1.0, &cfg).unwrap();
                    assert!(
                        phi.abs() <= bound * (1.0 + 1e-12) + 1e-12,
                        "m={m}: |{phi}| > {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn tree_bound_two_point_cases() {
        let p = square_well();
        let far = Configuration::new(1, vec![0.0, 2.0]).unwrap();
        assert_eq!(tree_bound(&p, 1.0, &far).unwrap(), 0.0);
        let overlap = Configuration::new(1, vec![0.0, 0.1]).unwrap();
        let b = tree_bound(&p, 1.0, &overlap).unwrap();
        assert_relative_eq!(b, (2.0f64).exp(), max_relative = 1e-15);
        assert!(b >= 1.0); // dominates |f| = 1
        assert!(tree_bound(&p, 1.0, &random_cfg_n(12)).is_err());
    }

    fn random_cfg_n(m: usize) -> Configuration {
        Configuration::new(1, (0..m).map(|k| k as f64 * 0.3).collect()).unwrap()
    }

    #[test]
    fn over_cap_errors() {
        let w = EdgeWeights::from_matrix(8, &[]);
        assert!(ursell_graph_sum(&w).is_err());
        let w = EdgeWeights::from_matrix(21, &[]);
        assert!(ursell_subset_recursion(&w).is_err());
    }

    proptest! {
        #[test]
        fn permutation_symmetry(
            seed in 0u64..1000,
            m in 3usize..6,
        ) {
            let p = square_well();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = random_config(&mut rng, m, 0.8 * m as f64);
            let base = ursell_subset_recursion(
                &EdgeWeights::from_configuration(&p, 1.0, &cfg)).unwrap();
            // swap two labels (including the first) and compare
            let mut pts: Vec<f64> = (0..m).map(|i| cfg.point(i)[0]).collect();
            let a = (seed as usize) % m;
            let b = (seed as usize / m) % m;
            pts.swap(a, b);
            let permuted = Configuration::new(1, pts).unwrap();
            let v = ursell_subset_recursion(
                &EdgeWeights::from_configuration(&p, 1.0, &permuted)).unwrap();
            prop_assert!((base - v).abs() <= 1e-10 * base.abs().max(1.0));
        }

        #[test]
        fn locality_disconnected_proximity_graph(shift in 2.0f64..50.0) {
            let p = square_well();
            let cfg = Configuration::new(
                1, vec![0.0, 0.7, shift + 1.0, shift + 1.6]).unwrap();
            let w = EdgeWeights::from_configuration(&p, 1.0, &cfg);
            prop_assert_eq!(ursell_graph_sum(&w).unwrap(), 0.0);
            prop_assert!(ursell_subset_recursion(&w).unwrap().abs() <= 1e-12);
        }
    }
}
