//! Odd-arity refutation: regular decomposition, per-stage bipartite spectral
//! bounds with local-degree edge deletion, and the combined certificate.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use super::decompose::{audit_decomposition, regular_decompose, StageDecomposition};
use super::{make_params, Certificate, Soundness, TrailEntry, CERT_SCHEMA};
use crate::algebra::{Elem, GroupSpec, Phase};
use crate::error::{KlinError, Result};
use crate::instance::KLinInstance;
use crate::kikuchi::{
    build_odd, build_odd_group, odd_delta, scaled_norm, Edge, EdgeLabel, KikuchiMatrix,
    OddBucket, OddMember,
};

/// Default local-degree bound η = 3^k ⌈ε^{-2}⌉.
pub fn default_eta(k: usize, eps: f64) -> Result<u64> {
    let pow = 3u64
        .checked_pow(k as u32)
        .ok_or_else(|| KlinError::InvalidParams(format!("k={k} is far beyond any usable arity")))?;
    Ok(pow * (1.0 / (eps * eps)).ceil().max(1.0) as u64)
}

/// Bound the local degrees of an odd-arity matrix by η: delete edges at
/// overloaded (vertex, equation, side) triples, then rebalance so that every
/// (v, v', β) type retains the same count. Hermitian pairs are deleted
/// together. Returns the pruned matrix, the deleted fraction ρ, and the
/// uniform retained count per type.
pub fn edge_delete(mat: &KikuchiMatrix, eta: u64) -> Result<(KikuchiMatrix, f64, u128)> {
    if eta < 1 {
        return Err(KlinError::InvalidParams("eta must be at least 1".into()));
    }
    if mat.edges.is_empty() {
        return Ok((mat.clone(), 0.0, mat.delta));
    }
    let spec = &mat.space.spec;
    let mut alive = vec![true; mat.edges.len()];

    type Key = (u32, u32, u32, u32, u32, u64); // row, col, bucket, mem_a, mem_b, beta
    let key_of = |e: &Edge| -> Key {
        match e.label {
            EdgeLabel::Odd { bucket, mem_a, mem_b, beta } => {
                (e.row, e.col, bucket, mem_a, mem_b, beta.0)
            }
            EdgeLabel::Even { .. } => unreachable!("edge deletion applies to odd matrices"),
        }
    };
    let mut index: HashMap<Key, usize> = HashMap::new();
    for (i, e) in mat.edges.iter().enumerate() {
        index.insert(key_of(e), i);
    }
    let partner_of = |i: usize| -> usize {
        let e = &mat.edges[i];
        match e.label {
            EdgeLabel::Odd { bucket, mem_a, mem_b, beta } => {
                let nb = spec.neg(beta);
                index[&(e.col, e.row, bucket, mem_a, mem_b, nb.0)]
            }
            EdgeLabel::Even { .. } => unreachable!(),
        }
    };

    // Step 1: clear local-degree overloads. Counts are recomputed per round;
    // deterministic order picks the smallest offending triple.
    loop {
        let mut partners: BTreeMap<(u32, u32, u32, u8), Vec<usize>> = BTreeMap::new();
        for (i, e) in mat.edges.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            if let EdgeLabel::Odd { bucket, mem_a, mem_b, .. } = e.label {
                partners.entry((e.row, bucket, mem_a, 0)).or_default().push(i);
                partners.entry((e.row, bucket, mem_b, 1)).or_default().push(i);
            }
        }
        let mut offender: Option<usize> = None;
        'scan: for ((_, bucket, _, side), edge_ids) in &partners {
            let mut distinct: std::collections::HashSet<u32> = Default::default();
            for &i in edge_ids {
                if let EdgeLabel::Odd { mem_a, mem_b, .. } = mat.edges[i].label {
                    distinct.insert(if *side == 0 { mem_b } else { mem_a });
                }
            }
            let _ = bucket;
            if (distinct.len() as u64) > eta {
                offender = Some(edge_ids[0]);
                break 'scan;
            }
        }
        match offender {
            Some(i) => {
                alive[i] = false;
                alive[partner_of(i)] = false;
            }
            None => break,
        }
    }

    // Step 2: rebalance to the uniform per-type retained count.
    let type_of = |e: &Edge| -> (u32, u32, u32, u64) {
        match e.label {
            EdgeLabel::Odd { bucket, mem_a, mem_b, beta } => (bucket, mem_a, mem_b, beta.0),
            EdgeLabel::Even { .. } => unreachable!(),
        }
    };
    let mut counts: BTreeMap<(u32, u32, u32, u64), u64> = BTreeMap::new();
    for (i, e) in mat.edges.iter().enumerate() {
        *counts.entry(type_of(e)).or_insert(0) += u64::from(alive[i]);
    }
    let target = counts.values().copied().min().unwrap_or(0);
    let types: Vec<(u32, u32, u32, u64)> = counts.keys().copied().collect();
    for ty in types {
        while counts[&ty] > target {
            let i = mat
                .edges
                .iter()
                .enumerate()
                .position(|(i, e)| alive[i] && type_of(e) == ty)
                .expect("an alive edge of an over-count type exists");
            let j = partner_of(i);
            alive[i] = false;
            *counts.get_mut(&ty).unwrap() -= 1;
            if j != i {
                let tj = type_of(&mat.edges[j]);
                alive[j] = false;
                *counts.get_mut(&tj).unwrap() -= 1;
            }
        }
    }
    debug_assert!(counts.values().all(|&c| c == target));

    let edges: Vec<Edge> = mat
        .edges
        .iter()
        .zip(&alive)
        .filter(|&(_, &a)| a)
        .map(|(e, _)| *e)
        .collect();
    let phases: Vec<Phase> = mat
        .phases()
        .iter()
        .zip(&alive)
        .filter(|&(_, &a)| a)
        .map(|(&p, _)| p)
        .collect();
    let rho = 1.0 - target as f64 / mat.delta as f64;
    let pruned = KikuchiMatrix::from_parts(
        mat.space.clone(),
        edges,
        phases,
        mat.delta,
        mat.num_equations,
        mat.arity,
    );
    Ok((pruned, rho, target as u128))
}

/// Materialize one decomposition stage into scaled buckets.
pub fn materialize_stage(
    inst: &KLinInstance,
    stage: &StageDecomposition,
) -> Result<Vec<OddBucket>> {
    let spec = &inst.spec;
    let k = inst.k;
    stage
        .buckets
        .iter()
        .map(|bucket| {
            let members = bucket
                .members
                .iter()
                .map(|mem| {
                    let eq = &inst.equations[mem.pos as usize];
                    let vector = eq.lhs.scale(spec, mem.beta);
                    let rhs = spec.mul(mem.beta, eq.rhs);
                    let support =
                        super::pad_from_preferred(&vector.support(), &eq.lhs.support(), k, inst.n)?;
                    Ok(OddMember { pos: mem.pos, vector, rhs, support })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OddBucket { u: bucket.u.clone(), members })
        })
        .collect()
}

/// Direct evaluation of the bipartite polynomial of one stage:
/// Ψ_t(x) = (k²|U|/(|H|²|G|)) Σ_{u,β} |Σ_{v ∈ H_u} χ_β(b̃_v)·conj(χ_{β(ṽ-u)}(x))|².
/// Serves as the exhaustive oracle for the spectral bound.
pub fn psi_value(
    spec: &GroupSpec,
    m_total: usize,
    k: usize,
    buckets: &[OddBucket],
    x: &[Elem],
) -> f64 {
    let num_u = buckets.len() as f64;
    let mut acc = 0.0f64;
    for bucket in buckets {
        for beta in spec.nonzero_elems() {
            let mut inner = Complex64::new(0.0, 0.0);
            for mem in &bucket.members {
                let diff = mem.vector.sub(spec, &bucket.u);
                let mut ph = spec.character(beta, mem.rhs);
                for &(i, v) in &diff.scale(spec, beta).entries {
                    ph = spec.phase_mul(ph, spec.phase_conj(spec.character(v, x[i as usize])));
                }
                inner += spec.phase_to_complex(ph);
            }
            acc += inner.norm_sqr();
        }
    }
    (k * k) as f64 * num_u * acc / ((m_total * m_total) as f64 * spec.order as f64)
}

struct StageBound {
    bound: f64,
    entry: TrailEntry,
    loose: bool,
}

/// Certified upper bound on max_x |Ψ_t(x)| for one stage.
#[allow(clippy::too_many_arguments)]
fn bipartite_bound(
    inst: &KLinInstance,
    t: usize,
    buckets: &[OddBucket],
    l: usize,
    eta: u64,
    seed: u64,
) -> Result<StageBound> {
    let spec = &inst.spec;
    let k = inst.k;
    let m = inst.m() as f64;
    let order = spec.order as f64;
    let units = spec.units() as f64;
    let num_u = buckets.len() as f64;
    let members: u64 = buckets.iter().map(|b| b.members.len() as u64).sum();
    let pair_count: u64 = buckets
        .iter()
        .map(|b| {
            let h = b.members.len() as u64;
            h * (h - 1) / 2
        })
        .sum();

    // diagonal (v = v') part of the bipartite polynomial
    let diag = (k * k) as f64 * members as f64 * num_u * units / (m * m * order);

    if pair_count == 0 {
        let entry = TrailEntry::Bipartite {
            t,
            members,
            buckets: buckets.len() as u64,
            pair_count,
            diag,
            spectral: 0.0,
            norm: 0.0,
            rho: 0.0,
            eta,
            delta_retained: 0,
            adv: diag.max(0.0).sqrt(),
        };
        return Ok(StageBound { bound: diag, entry, loose: false });
    }

    // When the level cannot host any edges the spectral route is void; fall
    // back to the trivial per-term bound on the off-diagonal part.
    let radix = if spec.is_field() { spec.units() } else { spec.order };
    if odd_delta(radix, inst.n, k - t, l) == 0 {
        let trivial = (k * k) as f64 * num_u * units * 2.0 * pair_count as f64 / (m * m * order);
        let entry = TrailEntry::Bipartite {
            t,
            members,
            buckets: buckets.len() as u64,
            pair_count,
            diag,
            spectral: trivial,
            norm: 0.0,
            rho: 0.0,
            eta,
            delta_retained: 0,
            adv: (diag + trivial).max(0.0).sqrt(),
        };
        return Ok(StageBound { bound: diag + trivial, entry, loose: false });
    }
    let mat = if spec.is_field() {
        build_odd(spec, inst.n, k, t, buckets, l)?
    } else {
        build_odd_group(spec, inst.n, k, t, buckets, l)?
    };

    // Edge deletion engages only below the t >= k/2 threshold where the
    // trivial local-degree bound already suffices.
    let (mat, rho, delta_hat) = if 2 * t < k {
        edge_delete(&mat, eta)?
    } else {
        let d = mat.delta;
        (mat, 0.0, d)
    };
    if delta_hat == 0 || mat.edges.is_empty() {
        let trivial = (k * k) as f64 * num_u * units * 2.0 * pair_count as f64 / (m * m * order);
        let entry = TrailEntry::Bipartite {
            t,
            members,
            buckets: buckets.len() as u64,
            pair_count,
            diag,
            spectral: trivial,
            norm: 0.0,
            rho,
            eta,
            delta_retained: 0,
            adv: (diag + trivial).max(0.0).sqrt(),
        };
        return Ok(StageBound { bound: diag + trivial, entry, loose: false });
    }

    let degrees = mat.degrees()?;
    let est = scaled_norm(&mat, &degrees, seed)?;
    let spectral =
        (k * k) as f64 * num_u * degrees.trace_gamma() * est.value / (delta_hat as f64 * m * m * order);
    let bound = diag + spectral;
    let entry = TrailEntry::Bipartite {
        t,
        members,
        buckets: buckets.len() as u64,
        pair_count,
        diag,
        spectral,
        norm: est.value,
        rho,
        eta,
        delta_retained: delta_hat as u64,
        adv: bound.max(0.0).sqrt(),
    };
    Ok(StageBound { bound, entry, loose: !est.converged })
}

/// Odd-arity refutation: decompose, bound each stage's bipartite polynomial,
/// and output 1/|G| + Σ_t sqrt(bound_t).
pub fn refute_odd(
    inst: &KLinInstance,
    l: usize,
    eps: f64,
    eta_override: Option<u64>,
    seed: u64,
) -> Result<Certificate> {
    let spec = &inst.spec;
    if inst.m() == 0 {
        return Err(KlinError::NoCertificate("cannot refute an empty instance".into()));
    }
    if spec.is_field() {
        for (pos, eq) in inst.equations.iter().enumerate() {
            if eq.lhs.wt() != inst.k {
                return Err(KlinError::InvalidParams(format!(
                    "equation {pos} has weight {} != k; the field pipeline needs exact weights",
                    eq.lhs.wt()
                )));
            }
        }
    }
    let eta = match eta_override {
        Some(e) => e,
        None => default_eta(inst.k, eps)?,
    };
    let decomp = regular_decompose(inst, l, eps)?;
    let report = audit_decomposition(inst, &decomp);
    if !report.accepted() {
        return Err(KlinError::VerifyMismatch(format!(
            "decomposition audit rejected its own output: {report:?}"
        )));
    }

    let mut trail = Vec::new();
    let mut total_adv = 0.0f64;
    let mut soundness = Soundness::Exact;
    for stage in &decomp.stages {
        if stage.buckets.is_empty() {
            continue;
        }
        let buckets = materialize_stage(inst, stage)?;
        let sb = bipartite_bound(inst, stage.t, &buckets, l, eta, seed)?;
        total_adv += sb.bound.max(0.0).sqrt();
        if sb.loose {
            soundness = Soundness::Loose;
        }
        trail.push(sb.entry);
    }

    let alg_val = (1.0 / spec.order as f64 + total_adv).min(1.0);
    let kind = if spec.is_field() { "odd" } else { "odd-group" };
    Ok(Certificate {
        schema: CERT_SCHEMA.into(),
        kind: kind.into(),
        alg_val,
        params: make_params(inst, l, eps, Some(eta), seed),
        trail,
        soundness,
    })
}
