//! Greedy regularity decomposition of an instance into t-sparse bipartite
//! bucket collections, and the independent audit pass over its guarantees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::Elem;
use crate::combin::for_each_subset;
use crate::error::{KlinError, Result};
use crate::instance::{KLinInstance, SparseVec};

/// A scaled bucket member: `beta * lhs[pos]` extends the bucket key and the
/// right-hand side scales along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompMember {
    pub pos: u32,
    pub beta: Elem,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompBucket {
    pub u: SparseVec,
    pub members: Vec<DecompMember>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageDecomposition {
    pub t: usize,
    pub tau: u64,
    pub buckets: Vec<DecompBucket>,
}

impl StageDecomposition {
    pub fn member_count(&self) -> usize {
        self.buckets.iter().map(|b| b.members.len()).sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularDecomposition {
    pub k: usize,
    pub l: usize,
    pub eps: f64,
    /// τ_t for t = 1..=k (index t-1).
    pub taus: Vec<u64>,
    /// One stage per t in 1..=k (index t-1); stages may be empty.
    pub stages: Vec<StageDecomposition>,
}

/// τ_t = ⌈max(1, (n·|units|/ℓ)^{k/2-t}) · 4k² ε^{-2}⌉.
pub fn tau_threshold(n: usize, units: u64, l: usize, k: usize, eps: f64, t: usize) -> u64 {
    let base = (n as f64 * units as f64 / l as f64).powf(k as f64 / 2.0 - t as f64);
    let tau = base.max(1.0) * 4.0 * (k as f64) * (k as f64) / (eps * eps);
    tau.ceil() as u64
}

/// Greedy decomposition: for t = k down to 1, repeatedly extract a bucket of
/// exactly τ_t scaled copies sharing a t-sparse prefix (lexicographically
/// smallest key among maximizers, smallest positions first); leftovers land in
/// stage-1 buckets keyed by their leading coordinate, with non-unit leading
/// coefficients bucketed unscaled.
pub fn regular_decompose(inst: &KLinInstance, l: usize, eps: f64) -> Result<RegularDecomposition> {
    if eps <= 0.0 {
        return Err(KlinError::InvalidParams("eps must be positive".into()));
    }
    let spec = &inst.spec;
    let k = inst.k;
    let units: Vec<Elem> = spec.nonzero_elems().filter(|&b| spec.is_unit(b)).collect();
    let taus: Vec<u64> = (1..=k)
        .map(|t| tau_threshold(inst.n, spec.units(), l, k, eps, t))
        .collect();

    let mut pool: Vec<u32> = (0..inst.m() as u32).collect();
    let mut stages: Vec<StageDecomposition> = (1..=k)
        .map(|t| StageDecomposition { t, tau: taus[t - 1], buckets: vec![] })
        .collect();

    for t in (1..=k).rev() {
        let tau = taus[t - 1];
        loop {
            // key: prefix entries; value: position -> scalar (first scalar kept)
            let mut cands: BTreeMap<Vec<(u32, u64)>, BTreeMap<u32, Elem>> = BTreeMap::new();
            for &pos in &pool {
                let v = &inst.equations[pos as usize].lhs;
                if v.wt() < t {
                    continue;
                }
                let sup = v.support();
                for_each_subset(sup.len(), t, |sidx| {
                    let idxs: Vec<u32> = sidx.iter().map(|&i| sup[i as usize]).collect();
                    for &beta in &units {
                        let scaled = v.scale(spec, beta);
                        let key: Vec<(u32, u64)> =
                            idxs.iter().map(|&i| (i, scaled.get(i).0)).collect();
                        cands.entry(key).or_default().entry(pos).or_insert(beta);
                    }
                });
            }
            let best = cands
                .into_iter()
                .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)));
            let Some((key, positions)) = best else { break };
            if (positions.len() as u64) < tau {
                break;
            }
            let members: Vec<DecompMember> = positions
                .into_iter()
                .take(tau as usize)
                .map(|(pos, beta)| DecompMember { pos, beta })
                .collect();
            let taken: Vec<u32> = members.iter().map(|m| m.pos).collect();
            pool.retain(|p| !taken.contains(p));
            let u = SparseVec {
                n: inst.n,
                entries: key.into_iter().map(|(i, v)| (i, Elem(v))).collect(),
            };
            stages[t - 1].buckets.push(DecompBucket { u, members });
        }
    }

    // Leftovers: bucket by leading coordinate. Unit leading coefficients are
    // normalized to 1; zero divisors are grouped under their own value.
    let mut leftover: BTreeMap<Vec<(u32, u64)>, Vec<DecompMember>> = BTreeMap::new();
    for &pos in &pool {
        let v = &inst.equations[pos as usize].lhs;
        let (i, lead) = v.entries[0];
        let (key_val, beta) = match spec.inverse(lead) {
            Some(inv) => (spec.one(), inv),
            None => (lead, spec.one()),
        };
        leftover.entry(vec![(i, key_val.0)]).or_default().push(DecompMember { pos, beta });
    }
    for (key, members) in leftover {
        let u = SparseVec {
            n: inst.n,
            entries: key.into_iter().map(|(i, v)| (i, Elem(v))).collect(),
        };
        stages[0].buckets.push(DecompBucket { u, members });
    }

    Ok(RegularDecomposition { k, l, eps, taus, stages })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    /// Every equation position appears exactly once across all buckets.
    pub partition_ok: bool,
    /// Every bucket key is a prefix of each member's scaled vector and has
    /// the stage's weight.
    pub prefix_ok: bool,
    /// Stage-t buckets have exactly τ_t members for t >= 2 and at most τ_1
    /// for t = 1.
    pub sizes_ok: bool,
    /// |U^(t)| <= |H|/τ_t for t >= 2 and |U^(1)| <= |H|/τ_1 + n.
    pub bucket_count_ok: bool,
    /// The density-dependent form |U^(t)| <= 2|H|/τ_t for all t.
    pub bucket_count_2x_ok: bool,
    /// No bucket contains τ_{t'} members sharing a prefix wider than t.
    pub regularity_ok: bool,
}

impl AuditReport {
    /// The unconditional guarantees (everything except the density-dependent
    /// bucket-count form).
    pub fn accepted(&self) -> bool {
        self.partition_ok
            && self.prefix_ok
            && self.sizes_ok
            && self.bucket_count_ok
            && self.regularity_ok
    }

    pub fn accepted_strict(&self) -> bool {
        self.accepted() && self.bucket_count_2x_ok
    }
}

/// Independent post-hoc audit of a decomposition, by scans separate from the
/// construction path.
pub fn audit_decomposition(inst: &KLinInstance, decomp: &RegularDecomposition) -> AuditReport {
    let spec = &inst.spec;
    let m = inst.m();
    let k = decomp.k;

    let mut seen = vec![0usize; m];
    let mut prefix_ok = true;
    let mut sizes_ok = true;
    let mut bucket_count_ok = true;
    let mut bucket_count_2x_ok = true;
    let mut regularity_ok = true;

    for stage in &decomp.stages {
        let t = stage.t;
        let tau = stage.tau;
        for bucket in &stage.buckets {
            if bucket.u.wt() != t {
                prefix_ok = false;
            }
            if t >= 2 && bucket.members.len() as u64 != tau {
                sizes_ok = false;
            }
            if t == 1 && bucket.members.len() as u64 > tau {
                sizes_ok = false;
            }
            for mem in &bucket.members {
                seen[mem.pos as usize] += 1;
                let scaled = inst.equations[mem.pos as usize].lhs.scale(spec, mem.beta);
                if !bucket.u.is_prefix_of(&scaled) {
                    prefix_ok = false;
                }
            }
            // regularity: no wider prefix shared by tau_{t'} members
            let scaled: Vec<SparseVec> = bucket
                .members
                .iter()
                .map(|mem| inst.equations[mem.pos as usize].lhs.scale(spec, mem.beta))
                .collect();
            for v in &scaled {
                let sup = v.support();
                for tp in (t + 1)..=k.min(sup.len()) {
                    let tau_tp = decomp.taus[tp - 1];
                    for_each_subset(sup.len(), tp, |sidx| {
                        let idxs: Vec<u32> = sidx.iter().map(|&i| sup[i as usize]).collect();
                        let w = v.restrict(&idxs);
                        let count = scaled.iter().filter(|vp| w.is_prefix_of(vp)).count();
                        if count as u64 >= tau_tp {
                            regularity_ok = false;
                        }
                    });
                }
            }
        }
        let nb = stage.buckets.len() as u64;
        if t >= 2 {
            if nb * tau > m as u64 {
                bucket_count_ok = false;
            }
        } else if nb > m as u64 / tau + inst.n as u64 {
            bucket_count_ok = false;
        }
        if nb * tau > 2 * m as u64 {
            bucket_count_2x_ok = false;
        }
    }
    let partition_ok = seen.iter().all(|&c| c == 1);
    AuditReport {
        partition_ok,
        prefix_ok,
        sizes_ok,
        bucket_count_ok,
        bucket_count_2x_ok,
        regularity_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GroupSpec;
    use crate::instance::{gen_random, Equation};

    fn f3() -> GroupSpec {
        GroupSpec::prime_field(3).unwrap()
    }

    fn sv(n: usize, entries: &[(u32, u64)]) -> SparseVec {
        SparseVec::new(n, entries.iter().map(|&(i, v)| (i, Elem(v))).collect()).unwrap()
    }

    #[test]
    fn decompose_random_instances_pass_audit() {
        for seed in 0..10 {
            let inst = gen_random(&f3(), 6, 3, 20, seed).unwrap();
            let d = regular_decompose(&inst, 2, 0.5).unwrap();
            let report = audit_decomposition(&inst, &d);
            assert!(report.accepted(), "audit failed for seed {seed}: {report:?}");
        }
    }

    #[test]
    fn low_density_goes_to_leading_coordinate_buckets() {
        let inst = gen_random(&f3(), 8, 3, 10, 3).unwrap();
        let d = regular_decompose(&inst, 2, 0.5).unwrap();
        for stage in &d.stages {
            if stage.t > 1 {
                assert!(stage.buckets.is_empty(), "sparse instance must fall through to t=1");
            }
        }
        assert_eq!(d.stages[0].member_count(), 10);
        // every leftover key is the unit-normalized leading coordinate
        for bucket in &d.stages[0].buckets {
            assert_eq!(bucket.u.wt(), 1);
            assert_eq!(bucket.u.entries[0].1, Elem(1));
        }
    }

    #[test]
    fn forced_t2_bucket() {
        // τ_2 identical copies sharing a 2-sparse prefix must form a t=2 bucket.
        let spec = f3();
        let n = 6;
        let k = 3;
        let l = 2;
        let eps = 2.0;
        let tau2 = tau_threshold(n, spec.units(), l, k, eps, 2);
        let mut eqs = Vec::new();
        for j in 0..tau2 {
            let third = 2 + (j % 4) as u32;
            let val = 1 + (j % 2);
            eqs.push(Equation {
                lhs: sv(n, &[(0, 1), (1, 2), (third, val)]),
                rhs: Elem(j % 3),
            });
        }
        let inst = KLinInstance::new(spec, n, k, eqs).unwrap();
        let d = regular_decompose(&inst, l, eps).unwrap();
        assert!(
            !d.stages[1].buckets.is_empty(),
            "a t=2 bucket must be extracted: {:?}",
            d.stages.iter().map(|s| (s.t, s.buckets.len())).collect::<Vec<_>>()
        );
        let report = audit_decomposition(&inst, &d);
        assert!(report.accepted());
    }

    #[test]
    fn group_zero_divisor_leftovers_are_unscaled() {
        let spec = GroupSpec::abelian_product(vec![4]).unwrap();
        let inst = KLinInstance::new(
            spec.clone(),
            4,
            2,
            vec![
                Equation { lhs: sv(4, &[(0, 2), (1, 1)]), rhs: Elem(3) },
                Equation { lhs: sv(4, &[(1, 3), (2, 2)]), rhs: Elem(1) },
            ],
        )
        .unwrap();
        let d = regular_decompose(&inst, 2, 0.5).unwrap();
        let report = audit_decomposition(&inst, &d);
        assert!(report.accepted());
        // the 2x_1 + x_2 equation has zero-divisor lead: bucketed with β = 1
        let b0 = d.stages[0]
            .buckets
            .iter()
            .find(|b| b.members.iter().any(|m| m.pos == 0))
            .unwrap();
        assert_eq!(b0.u, sv(4, &[(0, 2)]));
        assert_eq!(b0.members[0].beta, spec.one());
        // the unit-led equation is normalized
        let b1 = d.stages[0]
            .buckets
            .iter()
            .find(|b| b.members.iter().any(|m| m.pos == 1))
            .unwrap();
        assert_eq!(b1.u, sv(4, &[(1, 1)]));
    }

    #[test]
    fn scaled_copies_preserve_value() {
        // Scaling an equation by a unit never changes its satisfiability.
        let spec = f3();
        let inst = gen_random(&spec, 4, 2, 6, 7).unwrap();
        let d = regular_decompose(&inst, 1, 1.0).unwrap();
        for stage in &d.stages {
            for bucket in &stage.buckets {
                for mem in &bucket.members {
                    let eq = &inst.equations[mem.pos as usize];
                    let scaled_lhs = eq.lhs.scale(&spec, mem.beta);
                    let scaled_rhs = spec.mul(mem.beta, eq.rhs);
                    for x in crate::instance::all_assignments(&spec, 4) {
                        let orig = {
                            let mut acc = Elem(0);
                            for &(i, v) in &eq.lhs.entries {
                                acc = spec.add(acc, spec.mul(v, x[i as usize]));
                            }
                            acc == eq.rhs
                        };
                        let scaled = {
                            let mut acc = Elem(0);
                            for &(i, v) in &scaled_lhs.entries {
                                acc = spec.add(acc, spec.mul(v, x[i as usize]));
                            }
                            acc == scaled_rhs
                        };
                        assert_eq!(orig, scaled);
                    }
                }
            }
        }
    }
}
