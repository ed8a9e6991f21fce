//! Certified refutation pipelines: even-arity field, even-arity group with
//! quotient reduction, and the odd-arity bipartite pipeline. Every pipeline
//! outputs a `Certificate` whose `alg_val` upper-bounds the instance value.

pub mod decompose;
pub mod odd;

pub use decompose::{
    audit_decomposition, regular_decompose, tau_threshold, AuditReport, DecompBucket,
    DecompMember, RegularDecomposition, StageDecomposition,
};
pub use odd::{edge_delete, psi_value, refute_odd};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    find_quotient_subgroup, project_elem, quotient_spec, robustness, Elem,
};
use crate::error::{KlinError, Result};
use crate::instance::{Equation, KLinInstance, SparseVec};
use crate::kikuchi::{
    build_even_field, build_even_group_with_supports, scaled_norm, KikuchiMatrix,
};

pub const CERT_SCHEMA: &str = "klin-cert v1";

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Soundness {
    Exact,
    Loose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertParams {
    pub domain: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub eps: f64,
    pub eta: Option<u64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum TrailEntry {
    Spectral {
        kind: String,
        vertices: u64,
        delta: u64,
        total_degree: u64,
        avg_degree: f64,
        norm: f64,
        raw_bound: f64,
        robustness: Option<String>,
    },
    GroupSplit {
        quotient: String,
        case: String,
        w0: String,
        w1: String,
        w2: String,
        val0: Option<String>,
        alg1: Option<f64>,
        alg2: Option<f64>,
    },
    Bipartite {
        t: usize,
        members: u64,
        buckets: u64,
        pair_count: u64,
        diag: f64,
        spectral: f64,
        norm: f64,
        rho: f64,
        eta: u64,
        delta_retained: u64,
        adv: f64,
    },
    Note {
        text: String,
    },
}

/// A refutation certificate: `alg_val` is a certified upper bound on the
/// instance value, with the per-stage trail needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema: String,
    pub kind: String,
    pub alg_val: f64,
    pub params: CertParams,
    pub trail: Vec<TrailEntry>,
    pub soundness: Soundness,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| KlinError::Parse { line: 0, reason: format!("certificate json: {e}") })
    }
}

fn ratio_string(r: Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub(crate) fn make_params(inst: &KLinInstance, l: usize, eps: f64, eta: Option<u64>, seed: u64) -> CertParams {
    CertParams {
        domain: inst.spec.spec_string(),
        n: inst.n,
        k: inst.k,
        m: inst.m(),
        l,
        eps,
        eta,
        seed,
    }
}

/// Shared spectral step of the even pipelines: raw bound
/// 1/|G| + tr(Γ)·‖Γ^{-1/2}AΓ^{-1/2}‖ / (|G|·|H|·Δ), which equals
/// 1/|G| + (2·|units|/|G|)·‖·‖ by the total-degree identity.
fn even_spectral(
    mat: &KikuchiMatrix,
    m: usize,
    seed: u64,
    lambda: Option<Ratio<u64>>,
) -> Result<(f64, TrailEntry, Soundness)> {
    let spec = &mat.space.spec;
    let degrees = mat.degrees()?;
    assert_eq!(
        degrees.total,
        m as u128 * spec.units() as u128 * mat.delta,
        "total degree must match |H|·|units|·Δ"
    );
    let est = scaled_norm(mat, &degrees, seed)?;
    let order = spec.order as f64;
    let raw = 1.0 / order
        + degrees.trace_gamma() * est.value / (order * m as f64 * mat.delta as f64);
    let entry = TrailEntry::Spectral {
        kind: mat.space.kind.name().to_string(),
        vertices: mat.space.size as u64,
        delta: mat.delta as u64,
        total_degree: degrees.total as u64,
        avg_degree: degrees.avg,
        norm: est.value,
        raw_bound: raw,
        robustness: lambda.map(ratio_string),
    };
    let soundness = if est.converged { Soundness::Exact } else { Soundness::Loose };
    Ok((raw, entry, soundness))
}

/// Even-arity field refutation: alg-val = 1/|F| + (2|F*|/|F|)·‖Γ^{-1/2}AΓ^{-1/2}‖,
/// clamped into [0, 1].
pub fn refute_even_field(inst: &KLinInstance, l: usize, eps: f64, seed: u64) -> Result<Certificate> {
    let mat = build_even_field(inst, l)?;
    let (raw, entry, soundness) = even_spectral(&mat, inst.m(), seed, None)?;
    Ok(Certificate {
        schema: CERT_SCHEMA.into(),
        kind: "even-field".into(),
        alg_val: raw.min(1.0),
        params: make_params(inst, l, eps, None, seed),
        trail: vec![entry],
        soundness,
    })
}

/// Even-arity group refutation on a (λ-robust) instance, recording the
/// measured robustness. Sub-k-sparse equations are admitted through formal
/// supports.
pub fn refute_even_group_robust(
    inst: &KLinInstance,
    l: usize,
    eps: f64,
    seed: u64,
) -> Result<Certificate> {
    let (raw, entry, soundness) = group_spectral(inst, None, l, seed)?;
    Ok(Certificate {
        schema: CERT_SCHEMA.into(),
        kind: "even-group".into(),
        alg_val: raw.min(1.0),
        params: make_params(inst, l, eps, None, seed),
        trail: vec![entry],
        soundness,
    })
}

fn group_spectral(
    inst: &KLinInstance,
    supports: Option<&[Vec<u32>]>,
    l: usize,
    seed: u64,
) -> Result<(f64, TrailEntry, Soundness)> {
    let spec = &inst.spec;
    let mat = build_even_group_with_supports(inst, l, supports)?;
    // measured robustness: the minimum thinness over all half-size
    // subequations, taken over the formal supports
    let mut lambda: Option<Ratio<u64>> = None;
    for (pos, eq) in inst.equations.iter().enumerate() {
        let sigma: Vec<u32> = match supports {
            Some(s) => s[pos].clone(),
            None => eq.lhs.support(),
        };
        let coeffs: Vec<Elem> = sigma.iter().map(|&i| eq.lhs.get(i)).collect();
        if coeffs.len() < inst.k / 2 {
            continue;
        }
        let r = robustness(spec, &coeffs, inst.k)?;
        lambda = Some(match lambda {
            None => r,
            Some(cur) => cur.min(r),
        });
    }
    even_spectral(&mat, inst.m(), seed, lambda)
}

/// Reduction pipeline for k-LIN over an Abelian group: quotient by a subgroup
/// chosen at t = ⌈4/ε⌉, split the modded instance by surviving weight, refute
/// the main part and the arity-reduced part spectrally, solve the (sub-)linear
/// part exactly, and combine with exact rational weights.
pub fn reduce_group_pipeline(
    inst: &KLinInstance,
    l: usize,
    eps: f64,
    seed: u64,
) -> Result<Certificate> {
    let spec = &inst.spec;
    if inst.k % 2 != 0 {
        return Err(KlinError::InvalidParams("the group reduction needs even k".into()));
    }
    if inst.m() == 0 {
        return Err(KlinError::NoCertificate("cannot refute an empty instance".into()));
    }
    if eps <= 0.0 {
        return Err(KlinError::InvalidParams("eps must be positive".into()));
    }
    let params = make_params(inst, l, eps, None, seed);

    if spec.is_field() {
        // Fields have no proper quotients of interest; the pipeline reduces to
        // the plain even-arity field path.
        let mat = build_even_field(inst, l)?;
        let (raw, entry, soundness) = even_spectral(&mat, inst.m(), seed, None)?;
        return Ok(Certificate {
            schema: CERT_SCHEMA.into(),
            kind: "group-reduction".into(),
            alg_val: raw.min(1.0),
            params,
            trail: vec![
                TrailEntry::Note { text: "field domain: identity quotient".into() },
                entry,
            ],
            soundness,
        });
    }

    let t = (4.0 / eps).ceil().max(2.0) as u64;
    let (h, case) = find_quotient_subgroup(spec, t)?;
    let (qspec, kept) = quotient_spec(spec, &h)?;
    let k = inst.k;

    // Mod every equation into G/H, remembering the original support.
    struct Modded {
        lhs: SparseVec,
        rhs: Elem,
        original_support: Vec<u32>,
    }
    let modded: Vec<Modded> = inst
        .equations
        .iter()
        .map(|eq| {
            let entries: Vec<(u32, Elem)> = eq
                .lhs
                .entries
                .iter()
                .map(|&(i, v)| (i, project_elem(spec, &h, &kept, v)))
                .filter(|&(_, v)| v.0 != 0)
                .collect();
            Modded {
                lhs: SparseVec { n: inst.n, entries },
                rhs: project_elem(spec, &h, &kept, eq.rhs),
                original_support: eq.lhs.support(),
            }
        })
        .collect();

    // Route: weight <= 1 exact; >= 2 zeroed coefficients to the arity-reduced
    // instance; the rest keeps full arity.
    let mut i0: Vec<&Modded> = Vec::new();
    let mut i1: Vec<&Modded> = Vec::new();
    let mut i2: Vec<&Modded> = Vec::new();
    for mq in &modded {
        let w = mq.lhs.wt();
        if w <= 1 {
            i0.push(mq);
        } else if k - w >= 2 {
            i2.push(mq);
        } else {
            i1.push(mq);
        }
    }
    let m_total = inst.m() as u64;
    let w0 = Ratio::new(i0.len() as u64, m_total);
    let w1 = Ratio::new(i1.len() as u64, m_total);
    let w2 = Ratio::new(i2.len() as u64, m_total);
    assert_eq!(w0 + w1 + w2, Ratio::new(1, 1), "weights must sum to one exactly");

    let mut trail = vec![TrailEntry::Note {
        text: format!("quotient search at t={t}"),
    }];
    let mut soundness = Soundness::Exact;

    // Exact value of the (sub-)linear part: weight-0 equations are satisfied
    // iff their right-hand side is zero; weight-1 equations are maximized per
    // variable independently.
    let val0 = if i0.is_empty() {
        None
    } else {
        let mut sat = 0u64;
        let mut per_var: std::collections::HashMap<u32, Vec<(Elem, Elem)>> = Default::default();
        for mq in &i0 {
            if mq.lhs.wt() == 0 {
                if mq.rhs.0 == 0 {
                    sat += 1;
                }
            } else {
                let (i, c) = mq.lhs.entries[0];
                per_var.entry(i).or_default().push((c, mq.rhs));
            }
        }
        for (_, eqs) in per_var {
            let best = qspec
                .elems()
                .map(|a| eqs.iter().filter(|&&(c, b)| qspec.mul(c, a) == b).count() as u64)
                .max()
                .unwrap_or(0);
            sat += best;
        }
        Some(Ratio::new(sat, i0.len() as u64))
    };

    // w <= eps/4 compared in floating point; the cutoff only decides whether
    // a sub-instance is worth refuting, never soundness
    let mass_small =
        |w: Ratio<u64>| -> bool { (*w.numer() as f64 / *w.denom() as f64) <= eps / 4.0 };

    let mut spectral_part = |eqs: &[&Modded], arity: usize, label: &str| -> Result<Option<f64>> {
        if eqs.is_empty() {
            return Ok(None);
        }
        let w = Ratio::new(eqs.len() as u64, m_total);
        if mass_small(w) {
            trail.push(TrailEntry::Note {
                text: format!("{label}: mass {} <= eps/4, assigned alg-val 1", ratio_string(w)),
            });
            return Ok(Some(1.0));
        }
        let sub_eqs: Vec<Equation> = eqs
            .iter()
            .map(|mq| Equation { lhs: mq.lhs.clone(), rhs: mq.rhs })
            .collect();
        let sub = KLinInstance::new(qspec.clone(), inst.n, arity, sub_eqs)?;
        let supports: Vec<Vec<u32>> = eqs
            .iter()
            .map(|mq| pad_from_preferred(&mq.lhs.support(), &mq.original_support, arity, inst.n))
            .collect::<Result<Vec<_>>>()?;
        let (raw, entry, s) = group_spectral(&sub, Some(&supports), l, seed)?;
        if s == Soundness::Loose {
            soundness = Soundness::Loose;
        }
        trail.push(entry);
        Ok(Some(raw.min(1.0)))
    };

    let alg1 = spectral_part(&i1, k, "main part")?;
    let alg2 = spectral_part(&i2, k - 2, "arity-reduced part")?;

    let to_f = |r: Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
    let mut total = 0.0f64;
    if let Some(v0) = val0 {
        total += to_f(w0) * to_f(v0);
    }
    if let Some(a1) = alg1 {
        total += to_f(w1) * a1;
    }
    if let Some(a2) = alg2 {
        total += to_f(w2) * a2;
    }
    trail.insert(
        1,
        TrailEntry::GroupSplit {
            quotient: qspec.spec_string(),
            case: format!("{case:?}"),
            w0: ratio_string(w0),
            w1: ratio_string(w1),
            w2: ratio_string(w2),
            val0: val0.map(ratio_string),
            alg1,
            alg2,
        },
    );
    Ok(Certificate {
        schema: CERT_SCHEMA.into(),
        kind: "group-reduction".into(),
        alg_val: total.min(1.0),
        params,
        trail,
        soundness,
    })
}

/// Formal support of size `arity`: the actual support, padded first from the
/// preferred coordinate list and then from the smallest unused indices.
pub(crate) fn pad_from_preferred(
    actual: &[u32],
    preferred: &[u32],
    arity: usize,
    n: usize,
) -> Result<Vec<u32>> {
    let mut sigma: Vec<u32> = actual.to_vec();
    for &i in preferred {
        if sigma.len() == arity {
            break;
        }
        if !sigma.contains(&i) {
            sigma.push(i);
        }
    }
    let mut next = 0u32;
    while sigma.len() < arity {
        while sigma.contains(&next) {
            next += 1;
        }
        if next as usize >= n {
            return Err(KlinError::InvalidParams("cannot pad support".into()));
        }
        sigma.push(next);
    }
    sigma.sort_unstable();
    Ok(sigma)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Pipeline {
    Auto,
    EvenField,
    Group,
    Odd,
}

#[derive(Clone, Debug)]
pub struct RefuteOptions {
    pub l: usize,
    pub eps: f64,
    pub eta: Option<u64>,
    pub seed: u64,
    pub pipeline: Pipeline,
    /// Opt-in for the experimental odd-arity group path.
    pub allow_group_odd: bool,
}

impl Default for RefuteOptions {
    fn default() -> Self {
        RefuteOptions {
            l: 1,
            eps: 0.5,
            eta: None,
            seed: 0,
            pipeline: Pipeline::Auto,
            allow_group_odd: false,
        }
    }
}

/// Pipeline dispatcher: even k goes to the even-arity constructions (field or
/// group reduction), odd k to the bipartite pipeline.
pub fn refute(inst: &KLinInstance, opts: &RefuteOptions) -> Result<Certificate> {
    if inst.m() == 0 {
        return Err(KlinError::NoCertificate("cannot refute an empty instance".into()));
    }
    let field = inst.spec.is_field();
    let pipeline = match opts.pipeline {
        Pipeline::Auto => {
            if inst.k % 2 == 0 {
                if field {
                    Pipeline::EvenField
                } else {
                    Pipeline::Group
                }
            } else {
                Pipeline::Odd
            }
        }
        p => p,
    };
    match pipeline {
        Pipeline::EvenField => refute_even_field(inst, opts.l, opts.eps, opts.seed),
        Pipeline::Group => reduce_group_pipeline(inst, opts.l, opts.eps, opts.seed),
        Pipeline::Odd => {
            if !field && !opts.allow_group_odd {
                return Err(KlinError::InvalidParams(
                    "odd-arity refutation over groups is experimental; pass --experimental-group-odd".into(),
                ));
            }
            refute_odd(inst, opts.l, opts.eps, opts.eta, opts.seed)
        }
        Pipeline::Auto => unreachable!(),
    }
}

/// Recompute the certificate from its own parameters and compare.
pub fn verify_certificate(cert: &Certificate, inst: &KLinInstance) -> Result<()> {
    if cert.schema != CERT_SCHEMA {
        return Err(KlinError::VerifyMismatch(format!("unknown schema {:?}", cert.schema)));
    }
    if cert.params.domain != inst.spec.spec_string()
        || cert.params.n != inst.n
        || cert.params.k != inst.k
        || cert.params.m != inst.m()
    {
        return Err(KlinError::VerifyMismatch(
            "certificate parameters do not match the instance".into(),
        ));
    }
    let pipeline = match cert.kind.as_str() {
        "even-field" => Pipeline::EvenField,
        "group-reduction" | "even-group" => Pipeline::Group,
        "odd" | "odd-group" => Pipeline::Odd,
        other => {
            return Err(KlinError::VerifyMismatch(format!("unknown certificate kind {other:?}")))
        }
    };
    let recomputed = match cert.kind.as_str() {
        "even-group" => refute_even_group_robust(inst, cert.params.l, cert.params.eps, cert.params.seed)?,
        _ => refute(
            inst,
            &RefuteOptions {
                l: cert.params.l,
                eps: cert.params.eps,
                eta: cert.params.eta,
                seed: cert.params.seed,
                pipeline,
                allow_group_odd: true,
            },
        )?,
    };
    if (recomputed.alg_val - cert.alg_val).abs() > 1e-9 {
        return Err(KlinError::VerifyMismatch(format!(
            "alg_val mismatch: recomputed {} vs stated {}",
            recomputed.alg_val, cert.alg_val
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
