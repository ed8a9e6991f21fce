//! Kikuchi matrices: vertex index spaces, the even-arity field and group
//! constructions, the odd-arity pair construction, degree statistics, local
//! degrees, and quadratic forms.
//!
//! Matrices are stored as directed labeled edge lists. The complex entry of
//! an edge is a phase derived from its label, never stored as floating point;
//! Hermitian structure is a property of the label set and is checked exactly
//! on exponents.

mod spectral;
mod vertex;

pub use spectral::{scaled_norm, scaled_norm_impl, NormEstimate, DENSE_EIGEN_THRESHOLD};
pub use vertex::{Vertex, VertexKind, VertexSpace};

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;

use crate::algebra::{Elem, GroupSpec, Phase};
use crate::combin::{binomial, for_each_subset};
use crate::error::{KlinError, Result};
use crate::instance::{KLinInstance, SparseVec};

/// Label identifying the constraint terms an edge came from.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum EdgeLabel {
    /// Even-arity kinds: equation position and scalar β.
    Even { pos: u32, beta: Elem },
    /// Odd-arity kinds: bucket index, the ordered pair of member indices
    /// within the bucket, and the scalar β.
    Odd { bucket: u32, mem_a: u32, mem_b: u32, beta: Elem },
}

#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub row: u32,
    pub col: u32,
    pub label: EdgeLabel,
}

/// One bucket of a bipartite decomposition, already scaled: every member is
/// the full scaled vector (with `u` as a prefix) plus its scaled right-hand
/// side and, for group domains, its formal support.
#[derive(Clone, Debug)]
pub struct OddBucket {
    pub u: SparseVec,
    pub members: Vec<OddMember>,
}

#[derive(Clone, Debug)]
pub struct OddMember {
    /// Position of the source equation in the original instance.
    pub pos: u32,
    /// Scaled vector βv (u-prefixed).
    pub vector: SparseVec,
    /// Scaled right-hand side βb_v.
    pub rhs: Elem,
    /// Formal support of the scaled vector (sorted, size k, superset of the
    /// actual support). Equal to the actual support for field instances.
    pub support: Vec<u32>,
}

impl OddMember {
    pub fn exact(pos: u32, vector: SparseVec, rhs: Elem) -> Self {
        let support = vector.support();
        OddMember { pos, vector, rhs, support }
    }
}

#[derive(Clone, Debug)]
pub struct KikuchiMatrix {
    pub space: VertexSpace,
    pub edges: Vec<Edge>,
    /// Closed-form ordered-pair count per label; the constructive edge count
    /// is asserted against it at build time for even kinds.
    pub delta: u128,
    /// |H| of the source instance (even kinds) or Σ_u |H_u| (odd kinds).
    pub num_equations: usize,
    /// Arity of the construction: the uniform formal support size (even) or
    /// k - t (odd).
    pub arity: usize,
    /// Phase of each edge, parallel to `edges`.
    phases: Vec<Phase>,
}

#[derive(Clone, Debug)]
pub struct Degrees {
    pub per_vertex: Vec<u64>,
    pub total: u128,
    pub avg: f64,
}

impl Degrees {
    /// Γ_U = deg(U) + d, strictly positive whenever the matrix is nonempty.
    pub fn gamma(&self, u: usize) -> f64 {
        self.per_vertex[u] as f64 + self.avg
    }

    pub fn trace_gamma(&self) -> f64 {
        2.0 * self.total as f64
    }
}

/// Per-(vertex, equation, side) partner counts of an odd-arity matrix.
#[derive(Clone, Debug, Default)]
pub struct LocalDegreeStats {
    pub counts: HashMap<(u32, u32, u8), u32>,
    pub max: u32,
}

impl KikuchiMatrix {
    /// Assemble a matrix from an explicit edge/phase list (used when pruning
    /// an existing matrix). The caller is responsible for Hermitian pairing.
    pub fn from_parts(
        space: VertexSpace,
        edges: Vec<Edge>,
        phases: Vec<Phase>,
        delta: u128,
        num_equations: usize,
        arity: usize,
    ) -> Self {
        assert_eq!(edges.len(), phases.len());
        KikuchiMatrix { space, edges, delta, num_equations, arity, phases }
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn phase_of(&self, i: usize) -> Phase {
        self.phases[i]
    }

    /// Row/column degree per the label-count definition: the number of
    /// directed edges leaving each vertex. Errors when the matrix has no
    /// edges, since degree scaling then certifies nothing.
    pub fn degrees(&self) -> Result<Degrees> {
        if self.edges.is_empty() {
            return Err(KlinError::NoCertificate(
                "matrix has no edges; no degree scaling is possible".into(),
            ));
        }
        let n = self.space.size as usize;
        let mut per_vertex = vec![0u64; n];
        for e in &self.edges {
            per_vertex[e.row as usize] += 1;
        }
        let total: u128 = per_vertex.iter().map(|&d| d as u128).sum();
        let avg = total as f64 / n as f64;
        Ok(Degrees { per_vertex, total, avg })
    }

    /// y† A y with the y construction matching the vertex kind
    /// (y_U = χ_U(x), componentwise over pair sides).
    pub fn quadratic_form(&self, x: &[Elem]) -> Complex64 {
        let spec = &self.space.spec;
        let n = self.space.size as usize;
        let mut y = vec![Complex64::new(1.0, 0.0); n];
        for (i, yi) in y.iter_mut().enumerate() {
            let ph = self.space.vertex_character(i as u128, x);
            *yi = spec.phase_to_complex(ph);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, &ph) in self.edges.iter().zip(&self.phases) {
            acc += y[e.row as usize].conj() * spec.phase_to_complex(ph) * y[e.col as usize];
        }
        acc
    }

    /// Exact Hermitian check at the label/exponent level: every stored edge
    /// must have its conjugate transpose present.
    pub fn check_hermitian(&self) -> bool {
        let spec = &self.space.spec;
        let mut multiset: HashMap<(u32, u32, u64), i64> = HashMap::new();
        for (e, &ph) in self.edges.iter().zip(&self.phases) {
            *multiset.entry((e.row, e.col, ph.0)).or_insert(0) += 1;
            let conj = spec.phase_conj(ph);
            *multiset.entry((e.col, e.row, conj.0)).or_insert(0) -= 1;
        }
        multiset.values().all(|&c| c == 0)
    }

    /// Exact counts d_{U,v,b} by edge-label scan (odd kinds only).
    pub fn local_degrees(&self) -> LocalDegreeStats {
        let mut partners: HashMap<(u32, u32, u8), HashSet<u32>> = HashMap::new();
        for e in &self.edges {
            if let EdgeLabel::Odd { bucket, mem_a, mem_b, .. } = e.label {
                let a = encode_member(bucket, mem_a);
                let b = encode_member(bucket, mem_b);
                partners.entry((e.row, a, 0)).or_default().insert(b);
                partners.entry((e.row, b, 1)).or_default().insert(a);
            }
        }
        let counts: HashMap<(u32, u32, u8), u32> =
            partners.into_iter().map(|(k, v)| (k, v.len() as u32)).collect();
        let max = counts.values().copied().max().unwrap_or(0);
        LocalDegreeStats { counts, max }
    }

    /// Coordinate text dump: one line per directed edge, phases as exponents.
    pub fn dump(&self) -> String {
        let spec = &self.space.spec;
        let mut out = format!(
            "kikuchi v1 kind={} N={}\n",
            self.space.kind.name(),
            self.space.size
        );
        for (e, &ph) in self.edges.iter().zip(&self.phases) {
            let exps: Vec<String> =
                spec.phase_exponents(ph).iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("{} {} {}\n", e.row, e.col, exps.join(",")));
        }
        out
    }
}

/// Bucket-qualified member id used in local-degree bookkeeping.
fn encode_member(bucket: u32, mem: u32) -> u32 {
    bucket.wrapping_mul(0x10000).wrapping_add(mem)
}

// ---------------------------------------------------------------------------
// Even-arity field construction
// ---------------------------------------------------------------------------

/// Level-ℓ Kikuchi matrix over a field: vertices are ℓ-sparse vectors, with an
/// edge U → V labeled (v, β) whenever U - V = βv and supp(U) ⊕ supp(V) =
/// supp(v). Requires even k and exact weight-k equations.
pub fn build_even_field(inst: &KLinInstance, l: usize) -> Result<KikuchiMatrix> {
    let spec = &inst.spec;
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch("even-field matrix needs a field domain".into()));
    }
    let k = inst.k;
    if k % 2 != 0 {
        return Err(KlinError::InvalidParams(format!("even-arity construction needs even k, got {k}")));
    }
    if l < k / 2 || 2 * l > inst.n {
        return Err(KlinError::InvalidParams(format!(
            "level must satisfy k/2 <= l <= n/2, got l={l}, k={k}, n={}",
            inst.n
        )));
    }
    for (pos, eq) in inst.equations.iter().enumerate() {
        if eq.lhs.wt() != k {
            return Err(KlinError::InvalidParams(format!(
                "equation {pos} has weight {} != k={k}; the field construction needs exact weights",
                eq.lhs.wt()
            )));
        }
    }
    let space = VertexSpace::even_field(spec.clone(), inst.n, l)?;
    let units = spec.units() as u128;
    let delta = binomial(k as u64, k as u64 / 2)
        * binomial((inst.n - k) as u64, (l - k / 2) as u64)
        * units.pow((l - k / 2) as u32);

    let mut edges = Vec::new();
    let n = inst.n;
    let outside_size = l - k / 2;
    for (pos, eq) in inst.equations.iter().enumerate() {
        let sup = eq.lhs.support();
        let rest: Vec<u32> = (0..n as u32).filter(|i| !sup.contains(i)).collect();
        for beta in spec.nonzero_elems() {
            let scaled = eq.lhs.scale(spec, beta);
            let mut count = 0u128;
            for_each_subset(k, k / 2, |half_idx| {
                let a_set: Vec<u32> = half_idx.iter().map(|&i| sup[i as usize]).collect();
                let b_set: Vec<u32> =
                    sup.iter().copied().filter(|i| !a_set.contains(i)).collect();
                for_each_subset(rest.len(), outside_size, |out_idx| {
                    let outside: Vec<u32> =
                        out_idx.iter().map(|&i| rest[i as usize]).collect();
                    // enumerate the free values in mixed radix over F*
                    let total = units.pow(outside_size as u32);
                    for code in 0..total {
                        let mut c = code;
                        let mut u_entries: Vec<(u32, Elem)> = Vec::with_capacity(l);
                        let mut v_entries: Vec<(u32, Elem)> = Vec::with_capacity(l);
                        for &i in &a_set {
                            u_entries.push((i, scaled.get(i)));
                        }
                        for &i in &b_set {
                            v_entries.push((i, spec.neg(scaled.get(i))));
                        }
                        for &i in &outside {
                            let val = Elem((c % units as u128) as u64 + 1);
                            c /= units as u128;
                            u_entries.push((i, val));
                            v_entries.push((i, val));
                        }
                        u_entries.sort_by_key(|e| e.0);
                        v_entries.sort_by_key(|e| e.0);
                        let u = SparseVec { n, entries: u_entries };
                        let v = SparseVec { n, entries: v_entries };
                        let row = space.rank(&Vertex::Sparse(u)) as u32;
                        let col = space.rank(&Vertex::Sparse(v)) as u32;
                        edges.push(Edge { row, col, label: EdgeLabel::Even { pos: pos as u32, beta } });
                        count += 1;
                    }
                });
            });
            debug_assert_eq!(count, delta, "constructive count must match the closed form");
        }
    }
    let phases = even_phases(inst, &edges);
    Ok(KikuchiMatrix {
        space,
        edges,
        delta,
        num_equations: inst.m(),
        arity: k,
        phases,
    })
}

// ---------------------------------------------------------------------------
// Even-arity group construction
// ---------------------------------------------------------------------------

/// Level-ℓ Kikuchi matrix over an Abelian group: vertices are pairs (U, S)
/// with supp(U) ⊆ S and |S| = ℓ; an edge (U,S) → (V,T) labeled (v, β) exists
/// when U - V = βv and S ⊕ T = σ(v), with σ(v) the equation's formal support.
///
/// Sub-k-sparse vectors are admitted by padding σ(v) up to exactly k indices
/// (smallest unused indices when no explicit supports are given), which keeps
/// the pair count per label uniform.
pub fn build_even_group(inst: &KLinInstance, l: usize) -> Result<KikuchiMatrix> {
    build_even_group_with_supports(inst, l, None)
}

pub fn build_even_group_with_supports(
    inst: &KLinInstance,
    l: usize,
    formal_supports: Option<&[Vec<u32>]>,
) -> Result<KikuchiMatrix> {
    let spec = &inst.spec;
    let k = inst.k;
    if k % 2 != 0 {
        return Err(KlinError::InvalidParams(format!("even-arity construction needs even k, got {k}")));
    }
    if l < k / 2 || 2 * l > inst.n {
        return Err(KlinError::InvalidParams(format!(
            "level must satisfy k/2 <= l <= n/2, got l={l}, k={k}, n={}",
            inst.n
        )));
    }
    let supports: Vec<Vec<u32>> = match formal_supports {
        Some(s) => {
            if s.len() != inst.m() {
                return Err(KlinError::InvalidParams("one formal support per equation required".into()));
            }
            for (sup, eq) in s.iter().zip(&inst.equations) {
                let ok = sup.len() == k
                    && sup.windows(2).all(|w| w[0] < w[1])
                    && eq.lhs.support().iter().all(|i| sup.binary_search(i).is_ok());
                if !ok {
                    return Err(KlinError::InvalidParams(
                        "formal support must be a sorted k-superset of the actual support".into(),
                    ));
                }
            }
            s.to_vec()
        }
        None => inst
            .equations
            .iter()
            .map(|eq| pad_support(&eq.lhs.support(), k, inst.n))
            .collect::<Result<Vec<_>>>()?,
    };

    let space = VertexSpace::even_group(spec.clone(), inst.n, l)?;
    let order = spec.order as u128;
    let delta = binomial(k as u64, k as u64 / 2)
        * binomial((inst.n - k) as u64, (l - k / 2) as u64)
        * order.pow((l - k / 2) as u32);

    let mut edges = Vec::new();
    let n = inst.n;
    let outside_size = l - k / 2;
    for (pos, (eq, sigma)) in inst.equations.iter().zip(&supports).enumerate() {
        let rest: Vec<u32> = (0..n as u32).filter(|i| sigma.binary_search(i).is_err()).collect();
        for beta in spec.nonzero_elems() {
            let scaled = eq.lhs.scale(spec, beta);
            let mut count = 0u128;
            for_each_subset(k, k / 2, |half_idx| {
                let a_set: Vec<u32> = half_idx.iter().map(|&i| sigma[i as usize]).collect();
                let b_set: Vec<u32> =
                    sigma.iter().copied().filter(|i| !a_set.contains(i)).collect();
                for_each_subset(rest.len(), outside_size, |out_idx| {
                    let outside: Vec<u32> =
                        out_idx.iter().map(|&i| rest[i as usize]).collect();
                    let total = order.pow(outside_size as u32);
                    for code in 0..total {
                        let mut c = code;
                        let mut u_entries: Vec<(u32, Elem)> = Vec::new();
                        let mut v_entries: Vec<(u32, Elem)> = Vec::new();
                        let mut s_set: Vec<u32> = a_set.clone();
                        let mut t_set: Vec<u32> = b_set.clone();
                        for &i in &a_set {
                            let val = scaled.get(i);
                            if val.0 != 0 {
                                u_entries.push((i, val));
                            }
                        }
                        for &i in &b_set {
                            let val = spec.neg(scaled.get(i));
                            if val.0 != 0 {
                                v_entries.push((i, val));
                            }
                        }
                        for &i in &outside {
                            let val = Elem((c % order) as u64);
                            c /= order;
                            if val.0 != 0 {
                                u_entries.push((i, val));
                                v_entries.push((i, val));
                            }
                            s_set.push(i);
                            t_set.push(i);
                        }
                        u_entries.sort_by_key(|e| e.0);
                        v_entries.sort_by_key(|e| e.0);
                        s_set.sort_unstable();
                        t_set.sort_unstable();
                        let u = SparseVec { n, entries: u_entries };
                        let v = SparseVec { n, entries: v_entries };
                        let row = space.rank(&Vertex::Pair(u, s_set)) as u32;
                        let col = space.rank(&Vertex::Pair(v, t_set)) as u32;
                        edges.push(Edge { row, col, label: EdgeLabel::Even { pos: pos as u32, beta } });
                        count += 1;
                    }
                });
            });
            debug_assert_eq!(count, delta, "constructive count must match the closed form");
        }
    }
    let phases = even_phases(inst, &edges);
    Ok(KikuchiMatrix {
        space,
        edges,
        delta,
        num_equations: inst.m(),
        arity: k,
        phases,
    })
}

fn pad_support(actual: &[u32], k: usize, n: usize) -> Result<Vec<u32>> {
    if actual.len() > k {
        return Err(KlinError::InvalidParams("support larger than arity".into()));
    }
    let mut sigma: Vec<u32> = actual.to_vec();
    let mut next = 0u32;
    while sigma.len() < k {
        while actual.binary_search(&next).is_ok() || sigma.contains(&next) {
            next += 1;
        }
        if next as usize >= n {
            return Err(KlinError::InvalidParams("not enough coordinates to pad support".into()));
        }
        sigma.push(next);
    }
    sigma.sort_unstable();
    Ok(sigma)
}

/// c_{v,β} = χ_β(b_v) for each even edge label.
fn even_phases(inst: &KLinInstance, edges: &[Edge]) -> Vec<Phase> {
    let spec = &inst.spec;
    let mut table: HashMap<(u32, Elem), Phase> = HashMap::new();
    edges
        .iter()
        .map(|e| match e.label {
            EdgeLabel::Even { pos, beta } => *table.entry((pos, beta)).or_insert_with(|| {
                spec.character(beta, inst.equations[pos as usize].rhs)
            }),
            EdgeLabel::Odd { .. } => unreachable!("even matrix cannot hold odd labels"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Odd-arity construction
// ---------------------------------------------------------------------------

/// Closed-form ordered-pair count per (v, v', β) label of the odd-arity
/// construction with side sparsity `kt = k - t`. Zero when the level cannot
/// host any edges. `radix` is |F*| for the field kind and |G| for the group
/// kind.
pub fn odd_delta(radix: u64, n: usize, kt: usize, l: usize) -> u128 {
    let Some(free) = l.checked_sub(kt) else {
        return 0;
    };
    let orient = if kt % 2 == 1 { 2u128 } else { 1u128 };
    orient
        * binomial(kt as u64, (kt / 2) as u64)
        * binomial(kt as u64, kt.div_ceil(2) as u64)
        * binomial((2 * n - 2 * kt) as u64, free as u64)
        * (radix as u128).pow(free as u32)
}

/// Level-ℓ odd-arity Kikuchi matrix for a bucketed (bipartite) vector
/// collection. Vertices are pairs (U¹, U²) with wt(U¹) + wt(U²) = ℓ; an edge
/// labeled (v, v', β) requires U¹ - V¹ = βv_u with a balanced support split,
/// and U² - V² = -βv'_u with the complementary split.
pub fn build_odd(
    spec: &GroupSpec,
    n: usize,
    k: usize,
    t: usize,
    buckets: &[OddBucket],
    l: usize,
) -> Result<KikuchiMatrix> {
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch(
            "the odd-arity pair construction needs a field domain".into(),
        ));
    }
    if t > k {
        return Err(KlinError::InvalidParams(format!("bucket sparsity t={t} exceeds k={k}")));
    }
    if l < 1 || l > n {
        return Err(KlinError::InvalidParams(format!(
            "level must satisfy 1 <= l <= n, got l={l}"
        )));
    }
    let kt = k - t;
    for bucket in buckets {
        if bucket.u.wt() != t {
            return Err(KlinError::InvalidParams(format!(
                "bucket key has weight {} != t={t}",
                bucket.u.wt()
            )));
        }
        for m in &bucket.members {
            if !bucket.u.is_prefix_of(&m.vector) {
                return Err(KlinError::InvalidParams(
                    "bucket member does not extend its key".into(),
                ));
            }
            if m.vector.wt() != k {
                return Err(KlinError::InvalidParams(
                    "odd-arity members must have exact weight k".into(),
                ));
            }
        }
    }

    let space = VertexSpace::odd_pair(spec.clone(), n, l)?;
    let delta = odd_delta(spec.units(), n, kt, l);

    let mut edges = Vec::new();
    for (bi, bucket) in buckets.iter().enumerate() {
        let members = &bucket.members;
        for (ai, a) in members.iter().enumerate() {
            for (bi2, b) in members.iter().enumerate() {
                if ai == bi2 {
                    continue;
                }
                let va = a.vector.sub(spec, &bucket.u);
                let vb = b.vector.sub(spec, &bucket.u);
                debug_assert_eq!(va.wt(), kt);
                debug_assert_eq!(vb.wt(), kt);
                for beta in spec.nonzero_elems() {
                    let label = EdgeLabel::Odd {
                        bucket: bi as u32,
                        mem_a: ai as u32,
                        mem_b: bi2 as u32,
                        beta,
                    };
                    let count =
                        emit_odd_edges(spec, n, l, kt, &va, &vb, beta, label, &space, &mut edges);
                    debug_assert_eq!(count, delta, "constructive odd count must match closed form");
                }
            }
        }
    }
    let phases = odd_phases(spec, buckets, &edges);
    let num_equations = buckets.iter().map(|b| b.members.len()).sum();
    Ok(KikuchiMatrix { space, edges, delta, num_equations, arity: kt, phases })
}

#[allow(clippy::too_many_arguments)]
fn emit_odd_edges(
    spec: &GroupSpec,
    n: usize,
    l: usize,
    kt: usize,
    va: &SparseVec,
    vb: &SparseVec,
    beta: Elem,
    label: EdgeLabel,
    space: &VertexSpace,
    edges: &mut Vec<Edge>,
) -> u128 {
    let Some(free_total) = l.checked_sub(kt) else {
        return 0;
    };
    let units = spec.units() as u128;
    let sva = va.scale(spec, beta);
    let svb = vb.scale(spec, spec.neg(beta));
    let sup_a = va.support();
    let sup_b = vb.support();
    let rest_a: Vec<u32> = (0..n as u32).filter(|i| !sup_a.contains(i)).collect();
    let rest_b: Vec<u32> = (0..n as u32).filter(|i| !sup_b.contains(i)).collect();

    let mut orientations = vec![(kt / 2, kt.div_ceil(2))];
    if kt % 2 == 1 {
        orientations.push((kt.div_ceil(2), kt / 2));
    }

    let mut count = 0u128;
    for (ia, ib) in orientations {
        for_each_subset(kt, ia, |aidx| {
            let a_half: Vec<u32> = aidx.iter().map(|&i| sup_a[i as usize]).collect();
            for_each_subset(kt, ib, |bidx| {
                let b_half: Vec<u32> = bidx.iter().map(|&i| sup_b[i as usize]).collect();
                // split the free coordinates across the two sides
                for w1 in 0..=free_total {
                    let w2 = free_total - w1;
                    if w1 > rest_a.len() || w2 > rest_b.len() {
                        continue;
                    }
                    for_each_subset(rest_a.len(), w1, |o1idx| {
                        let o1: Vec<u32> = o1idx.iter().map(|&i| rest_a[i as usize]).collect();
                        for_each_subset(rest_b.len(), w2, |o2idx| {
                            let o2: Vec<u32> =
                                o2idx.iter().map(|&i| rest_b[i as usize]).collect();
                            let total = units.pow(free_total as u32);
                            for code in 0..total {
                                let mut c = code;
                                let mut u1: Vec<(u32, Elem)> = Vec::new();
                                let mut v1: Vec<(u32, Elem)> = Vec::new();
                                let mut u2: Vec<(u32, Elem)> = Vec::new();
                                let mut v2: Vec<(u32, Elem)> = Vec::new();
                                // side 1: U¹ matches βva on a_half, V¹ takes the rest
                                for &i in &a_half {
                                    u1.push((i, sva.get(i)));
                                }
                                for &i in &sup_a {
                                    if !a_half.contains(&i) {
                                        v1.push((i, spec.neg(sva.get(i))));
                                    }
                                }
                                // side 2: U² matches -βvb on b_half
                                for &i in &b_half {
                                    u2.push((i, svb.get(i)));
                                }
                                for &i in &sup_b {
                                    if !b_half.contains(&i) {
                                        v2.push((i, spec.neg(svb.get(i))));
                                    }
                                }
                                for &i in &o1 {
                                    let val = Elem((c % units) as u64 + 1);
                                    c /= units;
                                    u1.push((i, val));
                                    v1.push((i, val));
                                }
                                for &i in &o2 {
                                    let val = Elem((c % units) as u64 + 1);
                                    c /= units;
                                    u2.push((i, val));
                                    v2.push((i, val));
                                }
                                u1.sort_by_key(|e| e.0);
                                v1.sort_by_key(|e| e.0);
                                u2.sort_by_key(|e| e.0);
                                v2.sort_by_key(|e| e.0);
                                let uv = Vertex::TwoSided(
                                    SparseVec { n, entries: u1 },
                                    SparseVec { n, entries: u2 },
                                );
                                let vv = Vertex::TwoSided(
                                    SparseVec { n, entries: v1 },
                                    SparseVec { n, entries: v2 },
                                );
                                let row = space.rank(&uv) as u32;
                                let col = space.rank(&vv) as u32;
                                edges.push(Edge { row, col, label });
                                count += 1;
                            }
                        });
                    });
                }
            });
        });
    }
    count
}

/// Level-ℓ odd-arity Kikuchi matrix over an Abelian group: vertices are pairs
/// of (U, S) sides with |S¹| + |S²| = ℓ; the edge rule tracks formal support
/// sets exactly as in the even-arity group construction.
pub fn build_odd_group(
    spec: &GroupSpec,
    n: usize,
    k: usize,
    t: usize,
    buckets: &[OddBucket],
    l: usize,
) -> Result<KikuchiMatrix> {
    if t > k {
        return Err(KlinError::InvalidParams(format!("bucket sparsity t={t} exceeds k={k}")));
    }
    if l < 1 || l > n {
        return Err(KlinError::InvalidParams(format!(
            "level must satisfy 1 <= l <= n, got l={l}"
        )));
    }
    let kt = k - t;
    for bucket in buckets {
        if bucket.u.wt() != t {
            return Err(KlinError::InvalidParams(format!(
                "bucket key has weight {} != t={t}",
                bucket.u.wt()
            )));
        }
        for m in &bucket.members {
            let ok = m.support.len() == k
                && m.support.windows(2).all(|w| w[0] < w[1])
                && m.vector.support().iter().all(|i| m.support.binary_search(i).is_ok())
                && bucket.u.support().iter().all(|i| m.support.binary_search(i).is_ok())
                && bucket.u.is_prefix_of(&m.vector);
            if !ok {
                return Err(KlinError::InvalidParams(
                    "bucket member support must be a sorted k-superset covering u".into(),
                ));
            }
        }
    }

    let space = VertexSpace::odd_group_pair(spec.clone(), n, l)?;
    let delta = odd_delta(spec.order, n, kt, l);

    let mut edges = Vec::new();
    for (bi, bucket) in buckets.iter().enumerate() {
        let u_sup = bucket.u.support();
        for (ai, a) in bucket.members.iter().enumerate() {
            for (bi2, b) in bucket.members.iter().enumerate() {
                if ai == bi2 {
                    continue;
                }
                let va = a.vector.sub(spec, &bucket.u);
                let vb = b.vector.sub(spec, &bucket.u);
                let sig_a: Vec<u32> =
                    a.support.iter().filter(|i| !u_sup.contains(i)).copied().collect();
                let sig_b: Vec<u32> =
                    b.support.iter().filter(|i| !u_sup.contains(i)).copied().collect();
                debug_assert_eq!(sig_a.len(), kt);
                debug_assert_eq!(sig_b.len(), kt);
                for beta in spec.nonzero_elems() {
                    let label = EdgeLabel::Odd {
                        bucket: bi as u32,
                        mem_a: ai as u32,
                        mem_b: bi2 as u32,
                        beta,
                    };
                    let count = emit_odd_group_edges(
                        spec, n, l, kt, &va, &sig_a, &vb, &sig_b, beta, label, &space, &mut edges,
                    );
                    debug_assert_eq!(count, delta);
                }
            }
        }
    }
    let phases = odd_phases(spec, buckets, &edges);
    let num_equations = buckets.iter().map(|b| b.members.len()).sum();
    Ok(KikuchiMatrix { space, edges, delta, num_equations, arity: kt, phases })
}

#[allow(clippy::too_many_arguments)]
fn emit_odd_group_edges(
    spec: &GroupSpec,
    n: usize,
    l: usize,
    kt: usize,
    va: &SparseVec,
    sig_a: &[u32],
    vb: &SparseVec,
    sig_b: &[u32],
    beta: Elem,
    label: EdgeLabel,
    space: &VertexSpace,
    edges: &mut Vec<Edge>,
) -> u128 {
    let Some(free_total) = l.checked_sub(kt) else {
        return 0;
    };
    let order = spec.order as u128;
    let sva = va.scale(spec, beta);
    let svb = vb.scale(spec, spec.neg(beta));
    let rest_a: Vec<u32> = (0..n as u32).filter(|i| !sig_a.contains(i)).collect();
    let rest_b: Vec<u32> = (0..n as u32).filter(|i| !sig_b.contains(i)).collect();

    let mut orientations = vec![(kt / 2, kt.div_ceil(2))];
    if kt % 2 == 1 {
        orientations.push((kt.div_ceil(2), kt / 2));
    }

    let mut count = 0u128;
    for (ia, ib) in orientations {
        for_each_subset(kt, ia, |aidx| {
            let a_half: Vec<u32> = aidx.iter().map(|&i| sig_a[i as usize]).collect();
            for_each_subset(kt, ib, |bidx| {
                let b_half: Vec<u32> = bidx.iter().map(|&i| sig_b[i as usize]).collect();
                for w1 in 0..=free_total {
                    let w2 = free_total - w1;
                    if w1 > rest_a.len() || w2 > rest_b.len() {
                        continue;
                    }
                    for_each_subset(rest_a.len(), w1, |o1idx| {
                        let o1: Vec<u32> = o1idx.iter().map(|&i| rest_a[i as usize]).collect();
                        for_each_subset(rest_b.len(), w2, |o2idx| {
                            let o2: Vec<u32> =
                                o2idx.iter().map(|&i| rest_b[i as usize]).collect();
                            let total = order.pow(free_total as u32);
                            for code in 0..total {
                                let mut c = code;
                                let push_val =
                                    |list: &mut Vec<(u32, Elem)>, i: u32, v: Elem| {
                                        if v.0 != 0 {
                                            list.push((i, v));
                                        }
                                    };
                                let mut u1: Vec<(u32, Elem)> = Vec::new();
                                let mut v1: Vec<(u32, Elem)> = Vec::new();
                                let mut u2: Vec<(u32, Elem)> = Vec::new();
                                let mut v2: Vec<(u32, Elem)> = Vec::new();
                                let mut s1: Vec<u32> = a_half.clone();
                                let mut t1: Vec<u32> =
                                    sig_a.iter().filter(|i| !a_half.contains(i)).copied().collect();
                                let mut s2: Vec<u32> = b_half.clone();
                                let mut t2: Vec<u32> =
                                    sig_b.iter().filter(|i| !b_half.contains(i)).copied().collect();
                                for &i in &a_half {
                                    push_val(&mut u1, i, sva.get(i));
                                }
                                for &i in &t1.clone() {
                                    push_val(&mut v1, i, spec.neg(sva.get(i)));
                                }
                                for &i in &b_half {
                                    push_val(&mut u2, i, svb.get(i));
                                }
                                for &i in &t2.clone() {
                                    push_val(&mut v2, i, spec.neg(svb.get(i)));
                                }
                                for &i in &o1 {
                                    let val = Elem((c % order) as u64);
                                    c /= order;
                                    push_val(&mut u1, i, val);
                                    push_val(&mut v1, i, val);
                                    s1.push(i);
                                    t1.push(i);
                                }
                                for &i in &o2 {
                                    let val = Elem((c % order) as u64);
                                    c /= order;
                                    push_val(&mut u2, i, val);
                                    push_val(&mut v2, i, val);
                                    s2.push(i);
                                    t2.push(i);
                                }
                                u1.sort_by_key(|e| e.0);
                                v1.sort_by_key(|e| e.0);
                                u2.sort_by_key(|e| e.0);
                                v2.sort_by_key(|e| e.0);
                                s1.sort_unstable();
                                t1.sort_unstable();
                                s2.sort_unstable();
                                t2.sort_unstable();
                                let uv = Vertex::TwoSidedGroup(
                                    (SparseVec { n, entries: u1 }, s1),
                                    (SparseVec { n, entries: u2 }, s2),
                                );
                                let vv = Vertex::TwoSidedGroup(
                                    (SparseVec { n, entries: v1 }, t1),
                                    (SparseVec { n, entries: v2 }, t2),
                                );
                                let row = space.rank(&uv) as u32;
                                let col = space.rank(&vv) as u32;
                                edges.push(Edge { row, col, label });
                                count += 1;
                            }
                        });
                    });
                }
            });
        });
    }
    count
}

/// c_{v,β} · conj(c_{v',β}) for each odd edge label.
fn odd_phases(spec: &GroupSpec, buckets: &[OddBucket], edges: &[Edge]) -> Vec<Phase> {
    edges
        .iter()
        .map(|e| match e.label {
            EdgeLabel::Odd { bucket, mem_a, mem_b, beta } => {
                let a = &buckets[bucket as usize].members[mem_a as usize];
                let b = &buckets[bucket as usize].members[mem_b as usize];
                let ca = spec.character(beta, a.rhs);
                let cb = spec.character(beta, b.rhs);
                spec.phase_mul(ca, spec.phase_conj(cb))
            }
            EdgeLabel::Even { .. } => unreachable!("odd matrix cannot hold even labels"),
        })
        .collect()
}

#[cfg(test)]
mod tests;
