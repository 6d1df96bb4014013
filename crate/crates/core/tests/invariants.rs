//! Property tests for the algebraic and numerical invariants.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use permsft::entropy::{
    bound_lower_formula, bound_upper_weighted, estimate_report, running_infimum, torus_estimates,
    torus_permanent, transfer_pressure_z, upper_estimates, TransferMatrix, WindowSchedule,
};
use permsft::fkdet::{
    fk_finite_sections, jensen_mahler_1d, mahler_measure, per_vs_det_report, sign_probe_all,
    ExampleFamily, FamilyId, QuadratureConfig, SignVerdict,
};
use permsft::par::{tree_sum, Exec};
use permsft::patterns::PatternSpace;
use permsft::permanent::{
    det_in_ia_check, finite_det_ffstar, iper_af, matrix_permanent, per_af, signed_target_sum,
    signed_target_sum_with, Backend, LogValue, PermanentOptions, WeightedBipartite,
};
use permsft::{GroupRingElement, LatticePoint, TorusQuotient, Window};
use proptest::prelude::*;

use common::{coords, naive_interior, naive_permanent, pt};

// ---------------------------------------------------------------------------
// strategies

fn element_1d(lo: i64, hi: i64, max_terms: usize) -> impl Strategy<Value = GroupRingElement> {
    prop::collection::btree_map(lo..=hi, 1u32..=3, 1..=max_terms)
        .prop_map(|m| GroupRingElement::laurent(&m.into_iter().map(|(k, c)| (k, c as f64)).collect::<Vec<_>>()))
}

fn real_element_1d(lo: i64, hi: i64, max_terms: usize) -> impl Strategy<Value = GroupRingElement> {
    prop::collection::btree_map(lo..=hi, 0.1f64..3.0, 1..=max_terms)
        .prop_map(|m| GroupRingElement::laurent(&m.into_iter().collect::<Vec<_>>()))
}

fn signed_element(dim: usize, max_terms: usize) -> impl Strategy<Value = GroupRingElement> {
    let coord = if dim == 1 { -2i64..=2 } else { -1i64..=1 };
    prop::collection::btree_map(
        prop::collection::vec(coord, dim),
        prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        1..=max_terms,
    )
    .prop_map(move |m| GroupRingElement::from_terms(dim, m.into_iter().map(|(p, c)| (LatticePoint::new(p), c))).unwrap())
}

fn int_element(dim: usize, max_terms: usize) -> impl Strategy<Value = GroupRingElement> {
    let coord = if dim == 1 { -2i64..=2 } else { -1i64..=1 };
    prop::collection::btree_map(prop::collection::vec(coord, dim), prop_oneof![-3i32..=-1, 1i32..=3], 1..=max_terms).prop_map(move |m| {
        GroupRingElement::from_terms(dim, m.into_iter().map(|(p, c)| (LatticePoint::new(p), c as f64))).unwrap()
    })
}

fn window(dim: usize, max: usize) -> impl Strategy<Value = Window> {
    let hi = if dim == 1 { 7i64 } else { 2 };
    prop::collection::btree_set(prop::collection::vec(0..=hi, dim), 1..=max)
        .prop_map(|s| Window::from_points(s.into_iter().map(LatticePoint::new).collect()).unwrap())
}

fn offset(dim: usize) -> impl Strategy<Value = LatticePoint> {
    prop::collection::vec(-6i64..=6, dim).prop_map(LatticePoint::new)
}

fn opts(b: Backend) -> PermanentOptions {
    PermanentOptions::with_backend(b)
}

fn ind(v: &[i64]) -> GroupRingElement {
    GroupRingElement::laurent(&v.iter().map(|&k| (k, 1.0)).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// group ring

proptest! {
    #[test]
    fn adjoint_is_an_involution(f in signed_element(2, 4)) {
        prop_assert_eq!(f.adjoint().adjoint(), f.clone());
        let neg: BTreeSet<LatticePoint> = f.support().unwrap().iter().map(|p| -p).collect();
        let adj: BTreeSet<LatticePoint> = f.adjoint().support().unwrap().iter().cloned().collect();
        prop_assert_eq!(neg, adj);
    }

    #[test]
    fn convolution_is_associative_and_distributive(
        f in int_element(2, 3), g in int_element(2, 3), h in int_element(2, 3)
    ) {
        prop_assert_eq!(f.convolve(&g).convolve(&h), f.convolve(&g.convolve(&h)));
        prop_assert_eq!(f.convolve(&g.add(&h)), f.convolve(&g).add(&f.convolve(&h)));
    }

    #[test]
    fn interior_sits_inside_the_window(a in window(2, 3), f in window(2, 7)) {
        let a = a.translate(&-&a.points()[0]).union(&Window::from_points(vec![pt(&[0, 0])]).unwrap());
        let int = f.interior(&a);
        prop_assert!(int.iter().all(|t| f.contains(t)));
        let expect: Vec<LatticePoint> = naive_interior(&coords(&a), &coords(&f)).iter().map(|p| pt(p)).collect();
        prop_assert_eq!(&int, &expect);
        if !int.is_empty() {
            let grown = Window::from_points(int).unwrap().dilate(&a);
            let cover = f.union(&f.dilate(&a));
            prop_assert!(grown.is_subset(&cover));
        }
    }

    #[test]
    fn projection_is_a_ring_homomorphism(f in int_element(2, 3), g in int_element(2, 3), m in 1usize..5, n in 1usize..5) {
        let q = TorusQuotient::new(vec![m, n]).unwrap();
        let pf = f.project(&q).unwrap();
        let pg = g.project(&q).unwrap();
        let mut conv = vec![0.0; q.order()];
        for i in 0..q.order() {
            for j in 0..q.order() {
                let s = &q.representative(i) + &q.representative(j);
                conv[q.index_of(&s)] += pf[i] * pg[j];
            }
        }
        prop_assert_eq!(f.convolve(&g).project(&q).unwrap(), conv);
    }
}

// ---------------------------------------------------------------------------
// patterns

proptest! {
    #[test]
    fn pattern_counts_match_the_naive_oracle(a in window(1, 3), f in window(1, 6)) {
        let a = a.translate(&pt(&[-1]));
        let space = PatternSpace::new(&a, &f).unwrap();
        let (inj, _) = naive_permanent(&coords(&a), &coords(&f), |_| 1.0, false);
        let (adm, _) = naive_permanent(&coords(&a), &coords(&f), |_| 1.0, true);
        prop_assert_eq!(space.injective().count() as u128, inj.unwrap());
        prop_assert_eq!(space.admissible().count() as u128, adm.unwrap());
    }

    #[test]
    fn pattern_counts_are_translation_equivariant(a in window(2, 3), f in window(2, 5), s in offset(2), t in offset(2)) {
        let base = PatternSpace::new(&a, &f).unwrap();
        let left = PatternSpace::new(&a, &f.translate(&s)).unwrap();
        let right = PatternSpace::new(&a.translate(&t), &f).unwrap();
        let n = base.injective().count();
        prop_assert_eq!(left.injective().count(), n);
        prop_assert_eq!(right.injective().count(), n);
        let m = base.admissible().count();
        prop_assert_eq!(left.admissible().count(), m);
        prop_assert_eq!(right.admissible().count(), m);
        // the same choice sequences occur in every space
        let ch: BTreeSet<Vec<usize>> = base.admissible().map(|x| x.choices).collect();
        let ch_right: BTreeSet<Vec<usize>> = right.admissible().map(|x| x.choices).collect();
        prop_assert_eq!(ch, ch_right);
    }

    #[test]
    fn admissible_patterns_are_injective(a in window(1, 3), f in window(1, 6)) {
        let space = PatternSpace::new(&a, &f).unwrap();
        let inj: BTreeSet<Vec<usize>> = space.injective().map(|x| x.choices).collect();
        let adm: BTreeSet<Vec<usize>> = space.admissible().map(|x| x.choices).collect();
        prop_assert!(adm.is_subset(&inj));
        if f.interior(&a).is_empty() {
            prop_assert_eq!(adm, inj);
        }
    }

    #[test]
    fn signs_square_to_one_and_flip_under_a_swap(a in window(1, 3), f in window(1, 5)) {
        let space = PatternSpace::new(&a, &f).unwrap();
        for x in space.injective().take(200) {
            let image = space.image(&x);
            let s = space.sign(&x, &image).unwrap();
            prop_assert_eq!(s * s, 1);
            let n = f.len();
            let identity: Vec<usize> = (0..n).collect();
            prop_assert_eq!(space.sign_with(&x, &image, &identity).unwrap(), s);
            if n >= 2 {
                let mut swapped = identity.clone();
                swapped.swap(0, n - 1);
                prop_assert_eq!(space.sign_with(&x, &image, &swapped).unwrap(), -s);
            }
        }
    }

    #[test]
    fn squared_signed_sums_do_not_depend_on_psi(f in signed_element(1, 3), w in window(1, 5), seed in any::<u64>()) {
        let a = f.support().unwrap();
        let space = PatternSpace::new(&a, &w).unwrap();
        let n = w.len();
        // a pseudo-random bijection from the seed
        let mut psi: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            psi.swap(i, (state >> 33) as usize % (i + 1));
        }
        for image in space.theta(false).take(40) {
            let a1 = signed_target_sum(&f, &w, &image).unwrap();
            let a2 = signed_target_sum_with(&f, &w, &image, &psi).unwrap();
            prop_assert!((a1 * a1 - a2 * a2).abs() <= 1e-12 * (a1 * a1).max(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// permanent kernels

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backends_agree(f in real_element_1d(-1, 2, 4), w in window(1, 10)) {
        let a = f.support().unwrap();
        for require in [false, true] {
            let mut vals: Vec<LogValue> = Vec::new();
            for b in [Backend::Ryser, Backend::Backtrack, Backend::Profile, Backend::InclusionExclusion] {
                let r = if require { per_af(&f, &a, &w, &opts(b)) } else { iper_af(&f, &a, &w, &opts(b)) };
                match r {
                    Ok(v) => vals.push(v),
                    Err(e) if e.is_capacity() => {}
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            }
            prop_assert!(vals.len() >= 2);
            for v in &vals[1..] {
                prop_assert!(vals[0].rel_diff(v) <= 1e-10, "{:?} vs {:?}", vals[0], v);
            }
        }
    }

    #[test]
    fn two_dimensional_backends_agree(f in int_element(2, 3), w in window(2, 6)) {
        let f = f.abs();
        let a = f.support().unwrap();
        let exact = per_af(&f, &a, &w, &opts(Backend::Backtrack)).unwrap();
        for b in [Backend::Ryser, Backend::Profile, Backend::InclusionExclusion] {
            match per_af(&f, &a, &w, &opts(b)) {
                Ok(v) => prop_assert!(exact.rel_diff(&v) <= 1e-10),
                Err(e) => prop_assert!(e.is_capacity()),
            }
        }
        let (oracle, _) = naive_permanent(&coords(&a), &coords(&w), |p| f.coef(&pt(p)), true);
        prop_assert_eq!(exact.exact, oracle);
    }

    #[test]
    fn subadditivity_with_min_weight(f in real_element_1d(-1, 2, 4), w1 in window(1, 6), w2 in window(1, 6)) {
        let a = f.support().unwrap();
        let kappa = f.min_positive().unwrap().ln();
        let o = PermanentOptions::default();
        let u = w1.union(&w2);
        for require in [true, false] {
            let p = |w: &Window| {
                let v = if require { per_af(&f, &a, w, &o) } else { iper_af(&f, &a, w, &o) };
                v.unwrap().log - w.len() as f64 * kappa
            };
            let lhs = p(&u);
            let rhs = p(&w1) + p(&w2);
            prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn pointwise_product_is_submultiplicative(
        f in real_element_1d(-1, 2, 4), g in real_element_1d(-1, 2, 4), w in window(1, 7)
    ) {
        let a = f.support().unwrap().union(&g.support().unwrap());
        let fg = f.pointwise(&g);
        let o = PermanentOptions::default();
        for require in [true, false] {
            let p = |h: &GroupRingElement| {
                let v = if require { per_af(h, &a, &w, &o) } else { iper_af(h, &a, &w, &o) };
                v.unwrap().log
            };
            if fg.is_zero() {
                continue;
            }
            let lhs = p(&fg);
            let rhs = p(&f) + p(&g);
            prop_assert!(lhs == f64::NEG_INFINITY || lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn determinant_identity_holds(f in signed_element(1, 4), w in window(1, 8)) {
        let (lhs, rhs) = det_in_ia_check(&f, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn determinant_is_bounded_by_squared_injective_permanent(f in signed_element(2, 4), w in window(2, 6)) {
        let det = finite_det_ffstar(&f, &w);
        let g = f.abs();
        let iper = iper_af(&g, &g.support().unwrap(), &w, &PermanentOptions::default()).unwrap().linear();
        prop_assert!(det <= iper * iper * (1.0 + 1e-9));
        let schedule = WindowSchedule::new(vec![("w".into(), w.clone())]).unwrap();
        let rows = per_vs_det_report(&f, &schedule, &PermanentOptions::default()).unwrap();
        prop_assert!(rows[0].inequality_holds);
    }

    #[test]
    fn log_values_round_trip(e in -300.0f64..300.0, m in 1.0f64..10.0) {
        let x = m * 10f64.powf(e);
        prop_assume!(x.is_finite() && x > 0.0);
        let v = LogValue::from_linear(x);
        prop_assert!((v.linear() - x).abs() <= 1e-12 * x);
    }
}

// ---------------------------------------------------------------------------
// entropy estimates

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn window_values_dominate_the_transfer_value(f in real_element_1d(-2, 2, 4), lo in 1usize..4) {
        let a = f.support().unwrap();
        let p = transfer_pressure_z(&f).unwrap();
        let schedule = WindowSchedule::cubes(1, lo, lo + 6).unwrap();
        for row in upper_estimates(&f, &a, &schedule, &PermanentOptions::default()).unwrap() {
            prop_assert!(row.per_normalized.unwrap() >= p - 1e-9);
            prop_assert!(row.iper_normalized.unwrap() >= p - 1e-9);
        }
    }

    #[test]
    fn closed_form_bounds_sandwich_the_transfer_value(f in real_element_1d(-2, 3, 5)) {
        let p = transfer_pressure_z(&f).unwrap();
        prop_assert!(bound_lower_formula(&f) <= p + 1e-9);
        prop_assert!(p <= bound_upper_weighted(&f) + 1e-9);
    }

    #[test]
    fn running_infimum_is_nonincreasing(f in element_1d(-1, 2, 4)) {
        let a = f.support().unwrap();
        let schedule = WindowSchedule::cubes(1, 2, 9).unwrap();
        let rows = upper_estimates(&f, &a, &schedule, &PermanentOptions::default()).unwrap();
        let inf: Vec<f64> = running_infimum(&rows).into_iter().flatten().collect();
        prop_assert!(inf.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(*inf.last().unwrap() >= bound_lower_formula(&f) - 1e-12);
    }

    #[test]
    fn estimates_are_translation_invariant(f in real_element_1d(-1, 2, 3), s in offset(1)) {
        let schedule = WindowSchedule::cubes(1, 3, 8).unwrap();
        let o = PermanentOptions::default();
        let g = f.translate(&s);
        let rf = upper_estimates(&f, &f.support().unwrap(), &schedule, &o).unwrap();
        let rg = upper_estimates(&g, &g.support().unwrap(), &schedule, &o).unwrap();
        for (x, y) in rf.iter().zip(&rg) {
            prop_assert_eq!(x.per_log.unwrap().to_bits(), y.per_log.unwrap().to_bits());
            prop_assert_eq!(x.iper_log.unwrap().to_bits(), y.iper_log.unwrap().to_bits());
        }
        prop_assert_eq!(transfer_pressure_z(&f).unwrap().to_bits(), transfer_pressure_z(&g).unwrap().to_bits());
    }

    #[test]
    fn estimates_are_monotone_in_f(f in element_1d(-1, 2, 4), bump in element_1d(-1, 2, 4)) {
        let g = f.add(&bump);
        let a = g.support().unwrap();
        let schedule = WindowSchedule::cubes(1, 2, 7).unwrap();
        let o = PermanentOptions::default();
        let rf = upper_estimates(&f, &a, &schedule, &o).unwrap();
        let rg = upper_estimates(&g, &a, &schedule, &o).unwrap();
        for (x, y) in rf.iter().zip(&rg) {
            let (xe, ye): (u128, u128) = (x.per_exact.as_ref().unwrap().parse().unwrap(), y.per_exact.as_ref().unwrap().parse().unwrap());
            prop_assert!(xe <= ye);
        }
        prop_assert!(transfer_pressure_z(&f).unwrap() <= transfer_pressure_z(&g).unwrap() + 1e-12);
    }

    #[test]
    fn scaling_shifts_estimates_by_log_c(f in real_element_1d(-1, 2, 3), c in 0.2f64..5.0) {
        let a = f.support().unwrap();
        let schedule = WindowSchedule::cubes(1, 2, 7).unwrap();
        let o = PermanentOptions::default();
        let rf = upper_estimates(&f, &a, &schedule, &o).unwrap();
        let rc = upper_estimates(&f.scale(c), &a, &schedule, &o).unwrap();
        for (x, y) in rf.iter().zip(&rc) {
            let want = x.per_normalized.unwrap() + c.ln();
            prop_assert!((y.per_normalized.unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        let want = transfer_pressure_z(&f).unwrap() + c.ln();
        prop_assert!((transfer_pressure_z(&f.scale(c)).unwrap() - want).abs() <= 1e-10);
    }

    #[test]
    fn integer_scaling_is_exact(f in element_1d(-1, 2, 3), c in 2u32..5) {
        let a = f.support().unwrap();
        let w = Window::cube(1, 6).unwrap();
        let o = PermanentOptions::default();
        let base = per_af(&f, &a, &w, &o).unwrap().exact.unwrap();
        let scaled = per_af(&f.scale(c as f64), &a, &w, &o).unwrap().exact.unwrap();
        prop_assert_eq!(scaled, base * (c as u128).pow(6));
    }

    #[test]
    fn trace_powers_reproduce_torus_values(f in element_1d(-1, 2, 4), extra in 0usize..5) {
        let tm = TransferMatrix::new(&f).unwrap();
        let k = tm.span();
        let n = 2 * k + 2 + extra;
        let q = TorusQuotient::new(vec![n]).unwrap();
        let torus = torus_permanent(&f, &q, &PermanentOptions::default()).unwrap();
        prop_assert_eq!(tm.trace_power(n).exact, torus.exact);
        prop_assert!(torus.exact.is_some());
    }
}

// ---------------------------------------------------------------------------
// determinants

/// `prod (u - r_i)` together with its Mahler measure from the roots.
fn from_roots(roots: &[f64]) -> (GroupRingElement, f64) {
    let mut coef = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; coef.len() + 1];
        for (i, &c) in coef.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= r * c;
        }
        coef = next;
    }
    let f = GroupRingElement::laurent(&coef.iter().enumerate().map(|(k, &c)| (k as i64, c)).collect::<Vec<_>>());
    let m = roots.iter().map(|r| r.abs().max(1.0).ln()).sum();
    (f, m)
}

fn root() -> impl Strategy<Value = f64> {
    prop_oneof![-0.8f64..0.8, 1.25f64..3.0, -3.0f64..-1.25]
}

/// Roots at distance ratio 2 from the circle, where the sections are within
/// 0.05 by `n = 32`.
fn far_root() -> impl Strategy<Value = f64> {
    prop_oneof![-0.5f64..0.5, 2.0f64..3.0, -3.0f64..-2.0]
}

fn quick() -> QuadratureConfig {
    QuadratureConfig::new(32, 2, 1e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mahler_matches_the_root_oracle(roots in prop::collection::vec(root(), 1..=4)) {
        let (f, m) = from_roots(&roots);
        let q = mahler_measure(&f, &quick()).unwrap();
        prop_assert!((q.value - m).abs() <= 1e-8 + q.error, "{} vs {m}", q.value);
        prop_assert!((jensen_mahler_1d(&f).unwrap() - m).abs() <= 1e-8);
    }

    #[test]
    fn mahler_is_adjoint_invariant(f in signed_element(2, 4)) {
        let a = mahler_measure(&f, &quick()).unwrap();
        let b = mahler_measure(&f.adjoint(), &quick()).unwrap();
        prop_assert!((a.value - b.value).abs() <= a.error + b.error + 1e-9);
    }

    #[test]
    fn mahler_is_additive_under_convolution(r in prop::collection::vec(root(), 1..=3), s in prop::collection::vec(root(), 1..=3)) {
        let (f, _) = from_roots(&r);
        let (g, _) = from_roots(&s);
        let cfg = quick();
        let mf = mahler_measure(&f, &cfg).unwrap();
        let mg = mahler_measure(&g, &cfg).unwrap();
        let mfg = mahler_measure(&f.convolve(&g), &cfg).unwrap();
        prop_assert!((mfg.value - mf.value - mg.value).abs() <= mf.error + mg.error + mfg.error + 1e-9);
    }

    #[test]
    fn finite_sections_never_undershoot(roots in prop::collection::vec(root(), 1..=4)) {
        let (f, m) = from_roots(&roots);
        let schedule = WindowSchedule::cubes(1, 1, 24).unwrap();
        for r in fk_finite_sections(&f, &schedule, Exec::default()).unwrap() {
            prop_assert!(r.value >= m - 1e-9, "{}: {} < {m}", r.window, r.value);
        }
    }

    #[test]
    fn finite_sections_approach_from_above(roots in prop::collection::vec(far_root(), 1..=3)) {
        let (f, m) = from_roots(&roots);
        let schedule = WindowSchedule::cubes(1, 4, 32).unwrap();
        let rows = fk_finite_sections(&f, &schedule, Exec::default()).unwrap();
        for r in &rows {
            prop_assert!(r.value >= m - 1e-9, "{}: {} < {m}", r.window, r.value);
        }
        prop_assert!((rows.last().unwrap().value - m).abs() <= 0.05);
    }
}

/// Two-dimensional families: every representative has constant sign on every
/// image. One-dimensional families: every image has some representative of
/// constant sign (which one depends on the image).
#[test]
fn example_families_have_constant_signs_on_small_boxes() {
    for id in FamilyId::ALL {
        let k = match id {
            FamilyId::ThreePointZ => Some(2),
            FamilyId::FourPointZ => Some(3),
            _ => None,
        };
        let n_params = (1..=4)
            .find(|&n| ExampleFamily::new(id, vec![1.0; n], k).is_ok())
            .unwrap();
        let fam = ExampleFamily::new(id, vec![1.0; n_params], k).unwrap();
        let sides: &[usize] = if fam.dim() == 1 { &[4, 6, 8] } else { &[2, 3] };
        let reps = fam.determinant_elements();
        for &n in sides {
            let w = Window::cube(fam.dim(), n).unwrap();
            let probes: Vec<Vec<SignVerdict>> = reps
                .iter()
                .map(|f| sign_probe_all(f, &w).unwrap().into_iter().map(|p| p.verdict).collect())
                .collect();
            for j in 0..probes[0].len() {
                let ok: Vec<bool> = probes.iter().map(|p| p[j] != SignVerdict::NonConstant).collect();
                if fam.dim() == 2 {
                    assert!(ok.iter().all(|&b| b), "{id} on side {n}, image #{j}");
                } else {
                    assert!(ok.iter().any(|&b| b), "{id} on side {n}, image #{j}");
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// determinism

#[test]
fn sequential_and_parallel_runs_are_bitwise_equal() {
    let dimer = GroupRingElement::from_terms(
        2,
        [(pt(&[-1, 0]), 1.3), (pt(&[1, 0]), 0.7), (pt(&[0, -1]), 1.1), (pt(&[0, 1]), 0.9)],
    )
    .unwrap();
    let a = dimer.support().unwrap();
    let w = Window::cube(2, 4).unwrap();
    for b in [Backend::Ryser, Backend::Profile, Backend::Backtrack] {
        let seq = per_af(&dimer, &a, &w, &PermanentOptions { exec: Exec::Sequential, ..opts(b) });
        let par = per_af(&dimer, &a, &w, &PermanentOptions { exec: Exec::Parallel, ..opts(b) });
        match (seq, par) {
            (Ok(x), Ok(y)) => assert_eq!(x.log.to_bits(), y.log.to_bits(), "{b:?}"),
            (Err(x), Err(y)) => assert!(x.is_capacity() && y.is_capacity()),
            other => panic!("{b:?}: {other:?}"),
        }
    }
    let dense: Vec<Vec<f64>> = (0..18)
        .map(|i| (0..18).map(|j| 0.1 + ((i * 7 + j * 3) % 5) as f64 * 0.3).collect())
        .collect();
    let m = WeightedBipartite::from_dense(&dense).unwrap();
    let seq = matrix_permanent(&m, &PermanentOptions { exec: Exec::Sequential, ..opts(Backend::Ryser) }).unwrap();
    let par = matrix_permanent(&m, &PermanentOptions { exec: Exec::Parallel, ..opts(Backend::Ryser) }).unwrap();
    assert_eq!(seq.log.to_bits(), par.log.to_bits());

    let g = GroupRingElement::laurent(&[(2, 1.0), (1, 1.0), (0, -1.0)]);
    let mq = |exec| mahler_measure(&g, &QuadratureConfig { exec, ..QuadratureConfig::default() }).unwrap();
    assert_eq!(mq(Exec::Sequential).value.to_bits(), mq(Exec::Parallel).value.to_bits());

    let tori: Vec<TorusQuotient> = (3..=5).map(|n| TorusQuotient::new(vec![n, n]).unwrap()).collect();
    let t = |exec| torus_estimates(&dimer, &tori, &PermanentOptions { exec, ..Default::default() }).unwrap();
    let (ts, tp) = (t(Exec::Sequential), t(Exec::Parallel));
    for (x, y) in ts.iter().zip(&tp) {
        assert_eq!(x.log_value.to_bits(), y.log_value.to_bits());
    }

    let values: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1009) as f64 * 1e-3).collect();
    assert_eq!(tree_sum(&values).to_bits(), tree_sum(&values).to_bits());
}

#[test]
fn reports_separate_certified_and_heuristic_values() {
    let f = ind(&[0, 1, 2]);
    let schedule = WindowSchedule::cubes(1, 4, 10).unwrap();
    let tori: Vec<TorusQuotient> = (5..=9).map(|n| TorusQuotient::new(vec![n]).unwrap()).collect();
    let r = estimate_report(&f, &f.support().unwrap(), &schedule, &tori, Some(&quick()), &PermanentOptions::default()).unwrap();
    let lower = r.certified_lower();
    assert!(lower <= r.certified_upper.unwrap());
    assert!(r.bound_upper >= r.certified_upper.unwrap().min(r.bound_upper));
    let kinds: BTreeMap<&str, usize> = r.table().iter().fold(BTreeMap::new(), |mut m, row| {
        *m.entry(row.kind).or_default() += 1;
        m
    });
    assert_eq!(kinds["upper"], 7);
    assert_eq!(kinds["torus"], 5);
    assert_eq!(kinds["transfer"], 1);
    assert_eq!(kinds["bound"], 2);
}
