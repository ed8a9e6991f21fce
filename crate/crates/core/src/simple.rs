//! The brute-force local refuter: average the exact optimum of every induced
//! subinstance on an ℓ-subset of the variables.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::algebra::Elem;
use crate::combin::{binomial, for_each_subset};
use crate::error::{KlinError, Result};
use crate::instance::KLinInstance;
use crate::refute::{make_params, Certificate, Soundness, TrailEntry, CERT_SCHEMA};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimpleVariant {
    Random,
    /// Assigns the trivial value 1 to subsets holding less than an ε/(2C)
    /// mass fraction of the constraints.
    Semirandom,
}

/// alg-val = (Σ_S alg-val(I_S)·|H_S|) / (|H|·C(n-k, ℓ-k)), where I_S is the
/// subinstance induced on S and alg-val(I_S) its exact optimum. Every
/// equation lands in exactly C(n-k, ℓ-k) subsets, so at ℓ = n the output is
/// the exact instance value.
pub fn simple_refute(
    inst: &KLinInstance,
    l: usize,
    variant: SimpleVariant,
    eps: f64,
    seed: u64,
    cap: u128,
) -> Result<(Certificate, Ratio<u128>)> {
    let spec = &inst.spec;
    let n = inst.n;
    let k = inst.k;
    if l < k || l > n {
        return Err(KlinError::InvalidParams(format!(
            "level must satisfy k <= l <= n, got l={l}, k={k}, n={n}"
        )));
    }
    if inst.m() == 0 {
        return Err(KlinError::NoCertificate("cannot refute an empty instance".into()));
    }
    (spec.order as u128)
        .checked_pow(l as u32)
        .filter(|&c| c <= cap)
        .ok_or_else(|| {
            KlinError::ResourceCap(format!("per-subset search |G|^l exceeds cap {cap}"))
        })?;

    let m = inst.m() as u128;
    // mass cutoff for the semirandom variant: |H_S| < (eps / 2C)·|H| with
    // C = C(n, l) / C(n, l-k)
    let c_ratio = binomial(n as u64, l as u64) as f64
        / binomial(n as u64, (l - k) as u64).max(1) as f64;
    let cutoff = eps / (2.0 * c_ratio) * m as f64;

    let mut total: u128 = 0;
    let mut nonempty_subsets = 0u64;
    let mut trivial_subsets = 0u64;
    let mut covered: u128 = 0;
    for_each_subset(n, l, |s| {
        let members: Vec<usize> = inst
            .equations
            .iter()
            .enumerate()
            .filter(|(_, eq)| eq.lhs.support().iter().all(|i| s.binary_search(i).is_ok()))
            .map(|(pos, _)| pos)
            .collect();
        if members.is_empty() {
            return;
        }
        nonempty_subsets += 1;
        covered += members.len() as u128;
        if matches!(variant, SimpleVariant::Semirandom) && (members.len() as f64) < cutoff {
            // sparse bucket: assume the trivial optimum
            total += members.len() as u128;
            trivial_subsets += 1;
            return;
        }
        total += local_optimum(inst, s, &members) as u128;
    });

    let denom = m * binomial((n - k) as u64, (l - k) as u64);
    let exact = Ratio::new(total, denom);
    let alg_val = *exact.numer() as f64 / *exact.denom() as f64;
    let cert = Certificate {
        schema: CERT_SCHEMA.into(),
        kind: "simple".into(),
        alg_val: alg_val.min(1.0),
        params: make_params(inst, l, eps, None, seed),
        trail: vec![TrailEntry::Note {
            text: format!(
                "exact {}/{}; {} nonempty subsets ({} below mass cutoff), coverage {}",
                exact.numer(),
                exact.denom(),
                nonempty_subsets,
                trivial_subsets,
                covered
            ),
        }],
        soundness: Soundness::Exact,
    };
    Ok((cert, exact))
}

/// Exact maximum number of satisfied constraints of the subinstance induced
/// on `s`, over all assignments to the variables in `s` (variables outside
/// `s` cannot affect these equations).
fn local_optimum(inst: &KLinInstance, s: &[u32], members: &[usize]) -> u64 {
    let spec = &inst.spec;
    let order = spec.order;
    let l = s.len();
    let total = (order as u128).pow(l as u32);
    let mut best = 0u64;
    let mut assign = vec![Elem(0); l];
    for code in 0..total {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = Elem((c % order as u128) as u64);
            c /= order as u128;
        }
        let sat = members
            .iter()
            .filter(|&&pos| {
                let eq = &inst.equations[pos];
                let mut acc = Elem(0);
                for &(i, v) in &eq.lhs.entries {
                    let slot = s.binary_search(&i).expect("support inside s");
                    acc = spec.add(acc, spec.mul(v, assign[slot]));
                }
                acc == eq.rhs
            })
            .count() as u64;
        best = best.max(sat);
    }
    best
}
