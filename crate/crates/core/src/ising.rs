//! Lattice-gas Ising models over `L` spins `σ_i ∈ {0, 1}`.
//!
//! Microstate `α` is the bitstring `σ_1 σ_2 … σ_L`, read as a binary number, so
//! spin 1 is the most significant bit and labels sort lexicographically.
//!
//! A spin subset is a `u32` bitmask with bit `i−1` standing for spin `i`. A family
//! of subsets (for `L ≤ 6`) is a `u64` with bit `s` set when subset `s` belongs to
//! it.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::constraints::{to_architecture, ArchitectureMatrix, CoefficientMatrix};
use crate::linalg::Matrix;
use crate::simplex::{spin_value, CountVector, Distribution, SupportMask};
use crate::{Error, Result};

/// Largest `L` for which families fit in a `u64`.
pub const MAX_FAMILY_SPINS: usize = 6;
/// Largest `L` for which the microstate space is enumerated.
pub const MAX_SPINS: usize = 20;

/// Members of a spin subset, 1-based and ascending.
pub fn subset_members(s: u32) -> Vec<usize> {
    (0..32)
        .filter(|b| s >> b & 1 == 1)
        .map(|b| b as usize + 1)
        .collect()
}

/// Canonical subset order: by size, then lexicographically by sorted members.
pub fn cmp_subsets(a: u32, b: u32) -> Ordering {
    a.count_ones().cmp(&b.count_ones()).then_with(|| {
        // Equal sizes: the list holding the smallest differing member is first.
        let d = a ^ b;
        if d == 0 {
            Ordering::Equal
        } else if a & d & d.wrapping_neg() != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    })
}

/// All non-empty subsets of `{1..L}` in canonical order.
pub fn canonical_subsets(l: usize) -> Vec<u32> {
    let mut v: Vec<u32> = (1..(1u32 << l)).collect();
    v.sort_by(|&a, &b| cmp_subsets(a, b));
    v
}

/// Spins that are up in microstate `alpha`, as a subset mask.
pub fn up_spins(alpha: usize, l: usize) -> u32 {
    (1..=l)
        .filter(|&i| spin_value(alpha, i, l))
        .fold(0, |m, i| m | 1 << (i - 1))
}

/// Whether all spins of subset `s` are up in microstate `alpha`.
pub fn subset_active(s: u32, alpha: usize, l: usize) -> bool {
    s & !up_spins(alpha, l) == 0
}

fn format_subsets(sets: &[u32]) -> String {
    sets.iter()
        .map(|&s| {
            subset_members(s)
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Set of interactions among `L` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypergraph {
    l: usize,
    edges: Vec<u32>,
}

impl Hypergraph {
    /// Hyperedges as lists of 1-based spin indices. Duplicates are merged.
    pub fn new(l: usize, edges: &[Vec<usize>]) -> Result<Self> {
        if l == 0 || l > MAX_SPINS {
            return Err(Error::InvalidHypergraph(format!(
                "spin count must be in 1..={MAX_SPINS}, got {l}"
            )));
        }
        let mut masks = Vec::with_capacity(edges.len());
        for e in edges {
            if e.is_empty() {
                return Err(Error::InvalidHypergraph("empty hyperedge".into()));
            }
            let mut m = 0u32;
            for &i in e {
                if i == 0 || i > l {
                    return Err(Error::InvalidHypergraph(format!(
                        "spin {i} out of range 1..={l}"
                    )));
                }
                m |= 1 << (i - 1);
            }
            masks.push(m);
        }
        masks.sort_by(|&a, &b| cmp_subsets(a, b));
        masks.dedup();
        Ok(Self { l, edges: masks })
    }

    /// `{{1,2,3},{1,2,4},{3,5},{4,5}}` on five spins.
    pub fn g_ising() -> Self {
        Self::new(5, &[vec![1, 2, 3], vec![1, 2, 4], vec![3, 5], vec![4, 5]])
            .expect("valid hypergraph")
    }

    pub fn spins(&self) -> usize {
        self.l
    }

    pub fn edges(&self) -> Vec<Vec<usize>> {
        self.edges.iter().map(|&s| subset_members(s)).collect()
    }

    pub fn edge_masks(&self) -> &[u32] {
        &self.edges
    }

    /// Parses `"1,2,3;3,5"`; the empty string is the empty hypergraph.
    pub fn parse(l: usize, s: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let e = part
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidHypergraph(format!("bad hyperedge '{part}': {e}")))?;
            edges.push(e);
        }
        Self::new(l, &edges)
    }
}

impl fmt::Display for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_subsets(&self.edges))
    }
}

/// Downward-closed family of non-empty spin subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InteractionClosure {
    l: usize,
    family: u64,
}

impl InteractionClosure {
    /// From a family bitmask; fails unless the family is downward closed.
    pub fn from_family(l: usize, family: u64) -> Result<Self> {
        if l == 0 || l > MAX_FAMILY_SPINS {
            return Err(Error::InvalidHypergraph(format!(
                "families need 1..={MAX_FAMILY_SPINS} spins, got {l}"
            )));
        }
        if family & 1 != 0 || (l < MAX_FAMILY_SPINS && family >> (1u32 << l) != 0) {
            return Err(Error::InvalidHypergraph(
                "family contains subsets outside the spin range".into(),
            ));
        }
        let c = Self { l, family };
        for s in c.members() {
            for b in 0..l {
                let sub = s & !(1 << b);
                if sub != s && sub != 0 && family >> sub & 1 == 0 {
                    return Err(Error::InvalidHypergraph(
                        "family is not downward closed".into(),
                    ));
                }
            }
        }
        Ok(c)
    }

    pub fn empty(l: usize) -> Self {
        Self { l, family: 0 }
    }

    pub fn spins(&self) -> usize {
        self.l
    }

    pub fn family(&self) -> u64 {
        self.family
    }

    pub fn len(&self) -> usize {
        self.family.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.family == 0
    }

    pub fn contains(&self, s: u32) -> bool {
        s < 64 && self.family >> s & 1 == 1
    }

    /// Members in canonical order.
    pub fn members(&self) -> Vec<u32> {
        let mut v: Vec<u32> = (1..64u32).filter(|&s| self.family >> s & 1 == 1).collect();
        v.sort_by(|&a, &b| cmp_subsets(a, b));
        v
    }

    /// Members not contained in any other member, i.e. the generating hypergraph.
    pub fn maximal(&self) -> Vec<u32> {
        let m = self.members();
        m.iter()
            .copied()
            .filter(|&s| !m.iter().any(|&t| t != s && t & s == s))
            .collect()
    }

    pub fn is_subfamily_of(&self, other: &Self) -> bool {
        self.family & !other.family == 0
    }

    pub fn hypergraph(&self) -> Hypergraph {
        Hypergraph {
            l: self.l,
            edges: self.maximal(),
        }
    }

    /// Microstates forced to zero probability by the data: every cell of a
    /// maximal member's marginal table that has no counts removes all its
    /// microstates.
    pub fn forced_zeros(&self, counts: &CountVector) -> SupportMask {
        let n = 1usize << self.l;
        let up: Vec<u32> = (0..n).map(|alpha| up_spins(alpha, self.l)).collect();
        let mut keep = vec![true; n];
        let mut seen = vec![false; n];
        for h in self.maximal() {
            // Cells of h's marginal table are indexed by the up spins within h.
            seen.iter_mut().for_each(|x| *x = false);
            for (alpha, &c) in counts.counts().iter().enumerate() {
                if c > 0 {
                    seen[(up[alpha] & h) as usize] = true;
                }
            }
            for (alpha, k) in keep.iter_mut().enumerate() {
                if !seen[(up[alpha] & h) as usize] {
                    *k = false;
                }
            }
        }
        SupportMask::new(keep)
    }
}

impl fmt::Display for InteractionClosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_subsets(&self.maximal()))
    }
}

/// Canonical family order: by number of members, then by member lists compared
/// lexicographically in canonical subset order.
pub fn cmp_families(a: &InteractionClosure, b: &InteractionClosure) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        let (ma, mb) = (a.members(), b.members());
        ma.into_iter().map(Rank).cmp(mb.into_iter().map(Rank))
    })
}

#[derive(PartialEq, Eq)]
struct Rank(u32);

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_subsets(self.0, other.0)
    }
}

/// All non-empty subsets of the hyperedges.
pub fn closure(g: &Hypergraph) -> Result<InteractionClosure> {
    if g.l > MAX_FAMILY_SPINS {
        return Err(Error::InvalidHypergraph(format!(
            "closures need at most {MAX_FAMILY_SPINS} spins"
        )));
    }
    let mut family = 0u64;
    for &e in &g.edges {
        // Enumerate the non-empty submasks of e.
        let mut s = e;
        while s != 0 {
            family |= 1 << s;
            s = (s - 1) & e;
        }
    }
    Ok(InteractionClosure { l: g.l, family })
}

/// Normalization row followed by one product-indicator row per member, in
/// canonical order. Moments are those of the uniform distribution; rebind them
/// to data with [`CoefficientMatrix::with_moments_of`].
pub fn to_coefficients(c: &InteractionClosure) -> CoefficientMatrix {
    let n = 1usize << c.l;
    let mut rows = vec![vec![1.0; n]];
    for s in c.members() {
        rows.push(
            (0..n)
                .map(|alpha| f64::from(u8::from(subset_active(s, alpha, c.l))))
                .collect(),
        );
    }
    let c = CoefficientMatrix::new(Matrix::from_rows(&rows), vec![0.0; rows.len()])
        .expect("indicator rows are valid");
    c.with_moments_of(&Distribution::uniform(n))
        .expect("dimensions match")
}

/// Canonical architecture of a closure (moments of the uniform distribution).
pub fn architecture(c: &InteractionClosure) -> ArchitectureMatrix {
    to_architecture(&to_coefficients(c)).expect("indicator systems are consistent")
}

/// Every downward-closed family of non-empty subsets of `{1..L}`, in canonical
/// order. Their architectures are pairwise distinct.
pub fn enumerate_models(l: usize) -> Result<Vec<InteractionClosure>> {
    if l == 0 || l > MAX_FAMILY_SPINS {
        return Err(Error::InvalidHypergraph(format!(
            "enumeration supports 1..={MAX_FAMILY_SPINS} spins, got {l}"
        )));
    }
    let subsets = canonical_subsets(l);
    let mut out = Vec::new();
    extend_down_sets(&subsets, 0, 0, l, &mut out);
    let mut models: Vec<InteractionClosure> = out
        .into_iter()
        .map(|family| InteractionClosure { l, family })
        .collect();
    models.sort_by(cmp_families);
    Ok(models)
}

/// Decides subsets in canonical order; a subset may join only when all of its
/// maximal proper subsets already have (they precede it in the order).
fn extend_down_sets(subsets: &[u32], idx: usize, family: u64, l: usize, out: &mut Vec<u64>) {
    let Some(&s) = subsets.get(idx) else {
        out.push(family);
        return;
    };
    extend_down_sets(subsets, idx + 1, family, l, out);
    let admissible = (0..l).all(|b| {
        let sub = s & !(1 << b);
        sub == s || sub == 0 || family >> sub & 1 == 1
    });
    if admissible {
        extend_down_sets(subsets, idx + 1, family | 1 << s, l, out);
    }
}

/// Coefficients of the energy `E(σ) = Σ_S c_S Π_{i∈S} σ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParams {
    l: usize,
    values: Vec<(u32, f64)>,
}

impl IsingParams {
    /// Coefficients keyed by 1-based spin lists.
    pub fn new(l: usize, values: &[(Vec<usize>, f64)]) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (members, v) in values {
            let g = Hypergraph::new(l, std::slice::from_ref(members))?;
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "non-finite coefficient for {members:?}"
                )));
            }
            out.push((g.edges[0], *v));
        }
        out.sort_by(|a, b| cmp_subsets(a.0, b.0));
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig("duplicate coefficient key".into()));
        }
        Ok(Self { l, values: out })
    }

    pub fn spins(&self) -> usize {
        self.l
    }

    /// `(subset mask, coefficient)` in canonical subset order.
    pub fn values(&self) -> &[(u32, f64)] {
        &self.values
    }

    pub fn get(&self, members: &[usize]) -> Option<f64> {
        let mask = members.iter().fold(0u32, |m, &i| m | 1 << (i - 1));
        self.values
            .iter()
            .find(|(s, _)| *s == mask)
            .map(|(_, v)| *v)
    }

    pub fn energy(&self, alpha: usize) -> f64 {
        self.values
            .iter()
            .filter(|(s, _)| subset_active(*s, alpha, self.l))
            .map(|(_, v)| v)
            .sum()
    }
}

/// Standard-normal coefficient for every member of the closure of `g`, drawn in
/// canonical order.
pub fn random_params<R: Rng + ?Sized>(g: &Hypergraph, rng: &mut R) -> Result<IsingParams> {
    if let Some(&e) = g.edges.iter().find(|e| e.count_ones() > 3) {
        return Err(Error::InvalidHypergraph(format!(
            "hyperedge {{{}}} exceeds the cubic Hamiltonian",
            format_subsets(&[e])
        )));
    }
    let c = closure(g)?;
    let values = c
        .members()
        .into_iter()
        .map(|s| (s, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Ok(IsingParams { l: g.l, values })
}

/// `q(σ) ∝ exp E(σ)` over all `2^L` microstates.
pub fn boltzmann(p: &IsingParams) -> Result<Distribution> {
    if p.l > MAX_SPINS {
        return Err(Error::InvalidSpace(format!(
            "at most {MAX_SPINS} spins can be enumerated"
        )));
    }
    let energies: Vec<f64> = (0..1usize << p.l).map(|a| p.energy(a)).collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (e - max).exp()).collect();
    Ok(Distribution::from_weights(weights))
}

/// `(|sel ∩ truth| / |truth|, |sel \ truth| / (2^L − 1 − |truth|))`. An empty
/// denominator yields rate 1 for TP and 0 for FP.
pub fn tp_fp_rates(
    selected: &InteractionClosure,
    truth: &InteractionClosure,
) -> Result<(f64, f64)> {
    if selected.l != truth.l {
        return Err(Error::DimensionMismatch {
            expected: truth.l,
            found: selected.l,
        });
    }
    let universe = (1usize << truth.l) - 1;
    let t = truth.len();
    let tp = (selected.family & truth.family).count_ones() as usize;
    let fp = (selected.family & !truth.family).count_ones() as usize;
    let tp_rate = if t == 0 { 1.0 } else { tp as f64 / t as f64 };
    let fp_rate = if universe == t {
        0.0
    } else {
        fp as f64 / (universe - t) as f64
    };
    Ok((tp_rate, fp_rate))
}

impl FromStr for Hypergraph {
    type Err = Error;

    /// `"L:1,2;2,3"` form.
    fn from_str(s: &str) -> Result<Self> {
        let (l, edges) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidHypergraph(format!("expected 'L:edges', got '{s}'")))?;
        let l = l
            .trim()
            .parse()
            .map_err(|e| Error::InvalidHypergraph(format!("bad spin count: {e}")))?;
        Self::parse(l, edges)
    }
}
