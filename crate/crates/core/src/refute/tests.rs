use super::*;
use crate::algebra::GroupSpec;
use crate::instance::{all_assignments, gen_random, Equation, SparseVec};
use crate::kikuchi::{build_odd, EdgeLabel, KikuchiMatrix};
use crate::refute::odd::{default_eta, materialize_stage};

fn f2() -> GroupSpec {
    GroupSpec::prime_field(2).unwrap()
}

fn f3() -> GroupSpec {
    GroupSpec::prime_field(3).unwrap()
}

fn z4() -> GroupSpec {
    GroupSpec::abelian_product(vec![4]).unwrap()
}

fn sv(n: usize, entries: &[(u32, u64)]) -> SparseVec {
    SparseVec::new(n, entries.iter().map(|&(i, v)| (i, Elem(v))).collect()).unwrap()
}

fn bf(inst: &KLinInstance) -> f64 {
    let (v, _) = inst.brute_force_val(1 << 22).unwrap();
    *v.numer() as f64 / *v.denom() as f64
}

// -- even field ---------------------------------------------------------------

#[test]
fn even_field_sound_on_tiny_sweep() {
    let spec = f3();
    let mut count = 0;
    for m in 2..=12 {
        for seed in 0..9 {
            let inst = gen_random(&spec, 5, 2, m, seed).unwrap();
            let cert = refute_even_field(&inst, 1, 0.5, 0).unwrap();
            assert!(
                cert.alg_val + 1e-6 >= bf(&inst),
                "unsound at m={m} seed={seed}: {} < {}",
                cert.alg_val,
                bf(&inst)
            );
            count += 1;
        }
    }
    assert!(count >= 99);
}

#[test]
fn even_field_single_equation_is_trivial() {
    let spec = f3();
    let inst = KLinInstance::new(
        spec,
        4,
        2,
        vec![Equation { lhs: sv(4, &[(0, 1), (1, 2)]), rhs: Elem(2) }],
    )
    .unwrap();
    let cert = refute_even_field(&inst, 1, 0.5, 0).unwrap();
    // one equation is always satisfiable; the clamped bound must reach 1
    assert!((cert.alg_val - 1.0).abs() <= 1e-12);
    assert!((bf(&inst) - 1.0).abs() < 1e-12);
}

#[test]
fn even_field_alg_val_decreases_with_density() {
    let spec = f3();
    let median = |m: usize| -> f64 {
        let mut vals: Vec<f64> = (0..10)
            .map(|seed| {
                let inst = gen_random(&spec, 8, 2, m, seed).unwrap();
                refute_even_field(&inst, 1, 0.5, 0).unwrap().alg_val
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        (vals[4] + vals[5]) / 2.0
    };
    let m0 = median(30);
    let m1 = median(120);
    assert!(m1 < m0, "denser instances must certify lower values: {m0} -> {m1}");
}

#[test]
fn even_field_rejects_empty_instance() {
    let inst = KLinInstance::new(f3(), 4, 2, vec![]).unwrap();
    assert!(refute_even_field(&inst, 1, 0.5, 0).is_err());
}

// -- even group ----------------------------------------------------------------

#[test]
fn even_group_sound_on_z4() {
    let spec = z4();
    for m in 2..=10 {
        for seed in 0..3 {
            let inst = gen_random(&spec, 4, 2, m, seed).unwrap();
            let cert = refute_even_group_robust(&inst, 1, 0.5, 0).unwrap();
            assert!(cert.alg_val + 1e-6 >= bf(&inst), "m={m} seed={seed}");
        }
    }
}

#[test]
fn field_as_group_both_sound() {
    // The group path on a prime-field instance uses a different vertex space,
    // so the values differ; both must dominate the true value.
    let spec = f3();
    for seed in 0..5 {
        let inst = gen_random(&spec, 4, 2, 6, seed).unwrap();
        let field_cert = refute_even_field(&inst, 1, 0.5, 0).unwrap();
        let group_inst = KLinInstance::new(
            GroupSpec::abelian_product(vec![3]).unwrap(),
            4,
            2,
            inst.equations.clone(),
        )
        .unwrap();
        let group_cert = refute_even_group_robust(&group_inst, 1, 0.5, 0).unwrap();
        let v = bf(&inst);
        assert!(field_cert.alg_val + 1e-6 >= v);
        assert!(group_cert.alg_val + 1e-6 >= v);
    }
}

#[test]
fn even_group_records_robustness() {
    let spec = z4();
    let eqs: Vec<Equation> = (0..4)
        .map(|j| Equation { lhs: sv(5, &[(j, 2), (j + 1, 2)]), rhs: Elem(1) })
        .collect();
    let inst = KLinInstance::new(spec, 5, 2, eqs).unwrap();
    let cert = refute_even_group_robust(&inst, 1, 0.5, 0).unwrap();
    match &cert.trail[0] {
        TrailEntry::Spectral { robustness, .. } => {
            assert_eq!(robustness.as_deref(), Some("1/2"));
        }
        other => panic!("expected spectral entry, got {other:?}"),
    }
}

// -- group reduction -------------------------------------------------------------

#[test]
fn group_reduction_on_prime_field_matches_even_field() {
    let spec = f3();
    for seed in 0..4 {
        let inst = gen_random(&spec, 5, 2, 8, seed).unwrap();
        let a = refute_even_field(&inst, 1, 0.5, 0).unwrap();
        let b = reduce_group_pipeline(&inst, 1, 0.5, 0).unwrap();
        assert!((a.alg_val - b.alg_val).abs() <= 1e-12);
        assert_eq!(b.kind, "group-reduction");
    }
}

#[test]
fn group_reduction_routes_z6_multiples_of_three() {
    // All coefficients multiples of 3 in Z_6 vanish in the quotient; the
    // pipeline must solve them exactly and stay sound.
    let spec = GroupSpec::abelian_product(vec![6]).unwrap();
    let eqs = vec![
        Equation { lhs: sv(4, &[(0, 3), (1, 3)]), rhs: Elem(0) },
        Equation { lhs: sv(4, &[(1, 3), (2, 3)]), rhs: Elem(3) },
        Equation { lhs: sv(4, &[(2, 3), (3, 3)]), rhs: Elem(1) },
        Equation { lhs: sv(4, &[(0, 3), (3, 3)]), rhs: Elem(2) },
    ];
    let inst = KLinInstance::new(spec, 4, 2, eqs).unwrap();
    let cert = reduce_group_pipeline(&inst, 1, 2.0, 0).unwrap();
    assert!(cert.alg_val + 1e-6 >= bf(&inst));
    let split = cert
        .trail
        .iter()
        .find_map(|e| match e {
            TrailEntry::GroupSplit { w0, .. } => Some(w0.clone()),
            _ => None,
        })
        .expect("group split entry");
    assert_eq!(split, "1/1", "all equations must land in the exact bucket");
}

#[test]
fn group_reduction_exact_linear_part() {
    // Weight-1 equations are solved exactly, one variable at a time.
    let spec = z4();
    let eqs = vec![
        Equation { lhs: sv(3, &[(0, 2)]), rhs: Elem(2) },
        Equation { lhs: sv(3, &[(0, 2)]), rhs: Elem(0) },
        Equation { lhs: sv(3, &[(1, 1)]), rhs: Elem(3) },
    ];
    let inst = KLinInstance::new(spec, 3, 2, eqs).unwrap();
    let cert = reduce_group_pipeline(&inst, 1, 2.0, 0).unwrap();
    let v = bf(&inst);
    assert!((v - 2.0 / 3.0).abs() < 1e-12);
    assert!(cert.alg_val + 1e-9 >= v);
}

#[test]
fn group_reduction_sound_on_random_groups() {
    for (spec, n) in [
        (z4(), 4),
        (GroupSpec::abelian_product(vec![6]).unwrap(), 4),
        (GroupSpec::abelian_product(vec![2, 2]).unwrap(), 4),
    ] {
        for seed in 0..5 {
            let inst = gen_random(&spec, n, 2, 8, seed).unwrap();
            let cert = reduce_group_pipeline(&inst, 1, 0.5, 0).unwrap();
            assert!(
                cert.alg_val + 1e-6 >= bf(&inst),
                "unsound on {} seed {seed}",
                spec.spec_string()
            );
        }
    }
}

// -- edge deletion ----------------------------------------------------------------

fn odd_test_matrix(
    seed: u64,
    m: usize,
) -> (KLinInstance, Vec<crate::kikuchi::OddBucket>, KikuchiMatrix) {
    let spec = f2();
    let inst = gen_random(&spec, 5, 3, m, seed).unwrap();
    let decomp = regular_decompose(&inst, 2, 1.0).unwrap();
    let buckets = materialize_stage(&inst, &decomp.stages[0]).unwrap();
    let mat = build_odd(&spec, 5, 3, 1, &buckets, 2).unwrap();
    (inst, buckets, mat)
}

#[test]
fn edge_delete_identity_when_already_bounded() {
    let (_, _, mat) = odd_test_matrix(1, 6);
    let stats = mat.local_degrees();
    let eta = stats.max.max(1) as u64;
    let (pruned, rho, delta_hat) = edge_delete(&mat, eta).unwrap();
    assert_eq!(rho, 0.0);
    assert_eq!(delta_hat, mat.delta);
    assert_eq!(pruned.edges.len(), mat.edges.len());
}

#[test]
fn edge_delete_enforces_eta_and_uniform_types() {
    let (_, _, mat) = odd_test_matrix(3, 10);
    let before = mat.local_degrees();
    assert!(before.max >= 2, "fixture must have something to delete");
    let (pruned, rho, delta_hat) = edge_delete(&mat, 1).unwrap();
    let after = pruned.local_degrees();
    assert!(after.max <= 1, "local degrees must be bounded by eta");
    assert!(rho > 0.0);
    // uniform per-type retained count
    let mut counts: std::collections::HashMap<(u32, u32, u32, u64), u128> = Default::default();
    for e in &pruned.edges {
        if let EdgeLabel::Odd { bucket, mem_a, mem_b, beta } = e.label {
            *counts.entry((bucket, mem_a, mem_b, beta.0)).or_insert(0) += 1;
        }
    }
    for (_, c) in counts {
        assert_eq!(c, delta_hat);
    }
    assert!(pruned.check_hermitian(), "deletion must preserve hermitian pairing");
    // deletion never increases any local degree
    for (k, &c) in &after.counts {
        let b = before.counts.get(k).copied().unwrap_or(0);
        assert!(c <= b);
    }
}

#[test]
fn edge_delete_rejects_eta_zero() {
    let (_, _, mat) = odd_test_matrix(1, 6);
    assert!(edge_delete(&mat, 0).is_err());
}

// -- odd pipeline ------------------------------------------------------------------

#[test]
fn odd_sound_on_f2_sweep() {
    let spec = f2();
    for m in [3usize, 6, 9, 12, 15] {
        for l in [2usize, 3] {
            for seed in 0..3 {
                let inst = gen_random(&spec, 5, 3, m, seed).unwrap();
                let cert = refute_odd(&inst, l, 0.5, None, 0).unwrap();
                assert!(
                    cert.alg_val + 1e-6 >= bf(&inst),
                    "unsound at m={m} l={l} seed={seed}"
                );
            }
        }
    }
}

#[test]
fn odd_advantages_nonnegative() {
    let inst = gen_random(&f3(), 5, 3, 8, 2).unwrap();
    let cert = refute_odd(&inst, 2, 0.5, None, 0).unwrap();
    for entry in &cert.trail {
        if let TrailEntry::Bipartite { adv, .. } = entry {
            assert!(*adv >= 0.0);
        }
    }
}

#[test]
fn bipartite_bound_dominates_exhaustive_psi() {
    // F_2, n=4, k=3, l=1: compare each stage bound against max_x |Ψ_t(x)|
    // over all 16 assignments.
    let spec = f2();
    for seed in 0..6 {
        let inst = gen_random(&spec, 4, 3, 5, seed).unwrap();
        let cert = refute_odd(&inst, 1, 1.0, None, 0).unwrap();
        let decomp = regular_decompose(&inst, 1, 1.0).unwrap();
        for entry in &cert.trail {
            if let TrailEntry::Bipartite { t, adv, .. } = entry {
                let stage = &decomp.stages[*t - 1];
                let buckets = materialize_stage(&inst, stage).unwrap();
                let mut max_psi = 0.0f64;
                for x in all_assignments(&spec, 4) {
                    let psi = psi_value(&spec, inst.m(), inst.k, &buckets, &x);
                    max_psi = max_psi.max(psi.abs());
                }
                assert!(
                    adv * adv + 1e-9 >= max_psi,
                    "stage t={t} bound {} < max psi {max_psi} (seed {seed})",
                    adv * adv
                );
            }
        }
    }
}

#[test]
fn odd_singleton_buckets_have_diagonal_only_bound() {
    // Every bucket a singleton: no pairs, so only the diagonal term remains.
    let spec = f3();
    let eqs = vec![
        Equation { lhs: sv(6, &[(0, 1), (1, 1), (2, 1)]), rhs: Elem(0) },
        Equation { lhs: sv(6, &[(3, 1), (4, 1), (5, 2)]), rhs: Elem(1) },
    ];
    let inst = KLinInstance::new(spec, 6, 3, eqs).unwrap();
    let cert = refute_odd(&inst, 2, 0.5, None, 0).unwrap();
    for entry in &cert.trail {
        if let TrailEntry::Bipartite { pair_count, spectral, .. } = entry {
            assert_eq!(*pair_count, 0);
            assert_eq!(*spectral, 0.0);
        }
    }
}

#[test]
fn odd_on_even_k_is_also_sound() {
    let spec = f3();
    for seed in 0..3 {
        let inst = gen_random(&spec, 5, 2, 8, seed).unwrap();
        let cert = refute_odd(&inst, 1, 0.5, None, 0).unwrap();
        assert!(cert.alg_val + 1e-6 >= bf(&inst));
    }
}

#[test]
fn odd_group_experimental_sound() {
    let spec = z4();
    for seed in 0..4 {
        let inst = gen_random(&spec, 4, 3, 6, seed).unwrap();
        let cert = refute(
            &inst,
            &RefuteOptions {
                l: 2,
                eps: 0.5,
                pipeline: Pipeline::Odd,
                allow_group_odd: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cert.kind, "odd-group");
        assert!(cert.alg_val + 1e-6 >= bf(&inst), "seed {seed}");
    }
}

#[test]
fn default_eta_formula() {
    assert_eq!(default_eta(3, 0.5).unwrap(), 27 * 4);
    assert_eq!(default_eta(2, 1.0).unwrap(), 9);
}

// -- dispatch and certificates --------------------------------------------------------

#[test]
fn dispatch_prefers_even_pipeline_for_even_k() {
    let inst = gen_random(&f3(), 5, 2, 6, 0).unwrap();
    let cert = refute(&inst, &RefuteOptions::default()).unwrap();
    assert_eq!(cert.kind, "even-field");

    let ginst = gen_random(&z4(), 4, 2, 6, 0).unwrap();
    let cert = refute(&ginst, &RefuteOptions::default()).unwrap();
    assert_eq!(cert.kind, "group-reduction");

    let oinst = gen_random(&f2(), 5, 3, 6, 0).unwrap();
    let cert = refute(&oinst, &RefuteOptions { l: 2, ..Default::default() }).unwrap();
    assert_eq!(cert.kind, "odd");
}

#[test]
fn group_odd_requires_opt_in() {
    let inst = gen_random(&z4(), 4, 3, 6, 0).unwrap();
    let err = refute(&inst, &RefuteOptions { l: 2, ..Default::default() });
    assert!(matches!(err, Err(KlinError::InvalidParams(_))));
}

#[test]
fn certificate_json_roundtrip_and_verify() {
    let inst = gen_random(&f3(), 5, 2, 8, 4).unwrap();
    let cert = refute(&inst, &RefuteOptions::default()).unwrap();
    let json = cert.to_json();
    let back = Certificate::from_json(&json).unwrap();
    assert_eq!(back, cert);
    verify_certificate(&back, &inst).unwrap();

    let mut tampered = cert.clone();
    tampered.alg_val -= 0.01;
    let err = verify_certificate(&tampered, &inst);
    assert!(matches!(err, Err(KlinError::VerifyMismatch(_))));
}

#[test]
fn certificates_are_deterministic() {
    let inst = gen_random(&f2(), 5, 3, 10, 9).unwrap();
    let a = refute_odd(&inst, 2, 0.5, None, 7).unwrap();
    let b = refute_odd(&inst, 2, 0.5, None, 7).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
