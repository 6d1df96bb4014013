//! Seeded invariant checks over a random corpus.

use permsft::entropy::{
    bound_lower_formula, bound_upper_formula, estimate_report, torus_permanent, transfer_pressure_z,
    TransferMatrix, WindowSchedule,
};
use permsft::fkdet::{jensen_mahler_1d, mahler_measure, QuadratureConfig};
use permsft::permanent::{
    bregman_bound, det_in_ia_check, doubly_stochastic_extension, finite_det_ffstar, iper_af,
    matrix_permanent, per_af, vdw_bound, Backend, PermanentOptions, WeightedBipartite,
};
use permsft::{Exec, GroupRingElement, LatticePoint, TorusQuotient, Window};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::commands::Outcome;
use crate::output::Table;

type Check = fn(&mut ChaCha8Rng, usize, Exec) -> Result<String, String>;

const CHECKS: [(&str, Check); 9] = [
    ("determinant-identity", determinant_identity),
    ("determinant-below-squared-iper", det_below_iper),
    ("backends-agree", backends_agree),
    ("subadditivity-and-products", subadditivity),
    ("closed-form-sandwich", sandwich),
    ("trace-equals-torus", trace_torus),
    ("golden-ratio", golden),
    ("van-der-waerden-and-bregman", vdw_bregman),
    ("translation-and-scaling", translation_scaling),
];

pub fn run(seed: u64, cases: usize, exec: Exec) -> Outcome {
    let mut table = Table::new(&["check", "status", "detail"]);
    let mut results = Vec::new();
    let mut failures = 0;
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let (pass, detail) = match check(&mut rng, cases.max(1), exec) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if !pass {
            failures += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        table.push(vec![name.to_string(), status.into(), detail.clone()]);
        results.push(json!({"check": name, "pass": pass, "detail": detail}));
    }
    Outcome {
        json: json!({"command": "verify", "seed": seed, "cases": cases, "failures": failures, "checks": results}),
        table,
        capacity: Vec::new(),
        failures,
    }
}

fn opts(exec: Exec) -> PermanentOptions {
    PermanentOptions {
        exec,
        ..Default::default()
    }
}

/// Random support in `lo..=hi` with `1..=max_terms` points.
fn support_1d(rng: &mut ChaCha8Rng, lo: i64, hi: i64, max_terms: usize) -> Vec<i64> {
    let span = (hi - lo + 1) as usize;
    let k = rng.gen_range(1..=max_terms.min(span));
    let mut v: Vec<i64> = sample(rng, span, k).into_iter().map(|i| lo + i as i64).collect();
    v.sort_unstable();
    v
}

fn element_1d(rng: &mut ChaCha8Rng, lo: i64, hi: i64, max_terms: usize, signed: bool) -> GroupRingElement {
    let terms: Vec<(i64, f64)> = support_1d(rng, lo, hi, max_terms)
        .into_iter()
        .map(|k| {
            let c = rng.gen_range(0.25..3.0);
            let s = if signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            (k, s * c)
        })
        .collect();
    GroupRingElement::laurent(&terms)
}

fn interval(rng: &mut ChaCha8Rng, max: usize) -> Window {
    let n = rng.gen_range(1..=max);
    let lo = rng.gen_range(-3..=3);
    Window::boxed(&[lo], &[n]).expect("nonempty interval")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn determinant_identity(rng: &mut ChaCha8Rng, cases: usize, _: Exec) -> Result<String, String> {
    let mut worst = 0f64;
    for _ in 0..cases {
        let f = element_1d(rng, -2, 2, 4, true);
        let w = interval(rng, 7);
        let (lhs, rhs) = det_in_ia_check(&f, &w).map_err(|e| e.to_string())?;
        let rel = (lhs - rhs).abs() / lhs.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("{f} on {} points: det {lhs} vs {rhs}", w.len()));
        }
    }
    Ok(format!("{cases} cases, worst relative gap {worst:.1e}"))
}

fn det_below_iper(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    for _ in 0..cases {
        let f = element_1d(rng, -2, 2, 4, true);
        let w = interval(rng, 8);
        let det = finite_det_ffstar(&f, &w);
        let g = f.abs();
        let a = g.support().map_err(|e| e.to_string())?;
        let iper = iper_af(&g, &a, &w, &opts(exec)).map_err(|e| e.to_string())?.linear();
        if det > iper * iper * (1.0 + 1e-9) {
            return Err(format!("{f}: det {det} exceeds iper^2 {}", iper * iper));
        }
    }
    Ok(format!("{cases} cases"))
}

fn backends_agree(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    let backends = [Backend::Ryser, Backend::Backtrack, Backend::Profile, Backend::InclusionExclusion];
    let mut compared = 0;
    for _ in 0..cases {
        let f = element_1d(rng, -1, 2, 4, false);
        let a = f.support().map_err(|e| e.to_string())?;
        let w = interval(rng, 9);
        let mut vals = Vec::new();
        for b in backends {
            let o = PermanentOptions {
                backend: b,
                exec,
                ..Default::default()
            };
            match per_af(&f, &a, &w, &o) {
                Ok(v) => vals.push((b, v)),
                Err(e) if e.is_capacity() => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        for (b, v) in &vals[1..] {
            compared += 1;
            if vals[0].1.rel_diff(v) > 1e-10 {
                return Err(format!("{f}: {:?} {:?} vs {b:?} {v:?}", vals[0].0, vals[0].1));
            }
        }
    }
    Ok(format!("{cases} cases, {compared} comparisons"))
}

fn subadditivity(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    let o = opts(exec);
    for _ in 0..cases {
        let f = element_1d(rng, -1, 2, 4, false);
        let g = element_1d(rng, -1, 2, 4, false);
        let a = f.support().map_err(|e| e.to_string())?;
        let kappa = f.min_positive().expect("nonzero element").ln();
        let (w1, w2) = (interval(rng, 6), interval(rng, 6));
        let p = |h: &GroupRingElement, alph: &Window, w: &Window| {
            per_af(h, alph, w, &o).map(|v| v.log).map_err(|e| e.to_string())
        };
        let u = w1.union(&w2);
        let lhs = p(&f, &a, &u)? - u.len() as f64 * kappa;
        let rhs = p(&f, &a, &w1)? - w1.len() as f64 * kappa + p(&f, &a, &w2)? - w2.len() as f64 * kappa;
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            return Err(format!("{f}: union {lhs} > parts {rhs}"));
        }
        let fg = f.pointwise(&g);
        if !fg.is_zero() {
            let ab = a.union(&g.support().map_err(|e| e.to_string())?);
            let lhs = p(&fg, &ab, &w1)?;
            let rhs = p(&f, &ab, &w1)? + p(&g, &ab, &w1)?;
            if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
                return Err(format!("{f} * {g}: product {lhs} > {rhs}"));
            }
        }
    }
    Ok(format!("{cases} cases"))
}

fn sandwich(rng: &mut ChaCha8Rng, cases: usize, _: Exec) -> Result<String, String> {
    for _ in 0..cases {
        let s = support_1d(rng, 0, 6, 7);
        let f = GroupRingElement::laurent(&s.iter().map(|&k| (k, 1.0)).collect::<Vec<_>>());
        let p = transfer_pressure_z(&f).map_err(|e| e.to_string())?;
        let (lo, hi) = (bound_lower_formula(&f), bound_upper_formula(s.len()));
        if !(lo <= p + 1e-12 && p <= hi + 1e-12) {
            return Err(format!("A = {s:?}: {p} outside [{lo}, {hi}]"));
        }
    }
    Ok(format!("{cases} subsets of 0..6"))
}

fn trace_torus(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    for _ in 0..cases {
        let s = support_1d(rng, -1, 2, 4);
        let f = GroupRingElement::laurent(&s.iter().map(|&k| (k, 1.0)).collect::<Vec<_>>());
        let tm = TransferMatrix::new(&f).map_err(|e| e.to_string())?;
        let n = 2 * tm.span() + 2 + rng.gen_range(0..5);
        let q = TorusQuotient::new(vec![n]).map_err(|e| e.to_string())?;
        let torus = torus_permanent(&f, &q, &opts(exec)).map_err(|e| e.to_string())?;
        let trace = tm.trace_power(n);
        if trace.exact != torus.exact || torus.exact.is_none() {
            return Err(format!("A = {s:?}, n = {n}: trace {:?} vs torus {:?}", trace.exact, torus.exact));
        }
    }
    Ok(format!("{cases} cases"))
}

fn golden(_: &mut ChaCha8Rng, _: usize, exec: Exec) -> Result<String, String> {
    let phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let f = GroupRingElement::laurent(&[(-1, 1.0), (0, 1.0), (1, 1.0)]);
    let p = transfer_pressure_z(&f).map_err(|e| e.to_string())?;
    let g = GroupRingElement::laurent(&[(2, 1.0), (1, 1.0), (0, -1.0)]);
    let j = jensen_mahler_1d(&g).map_err(|e| e.to_string())?;
    let cfg = QuadratureConfig {
        exec,
        ..Default::default()
    };
    let m = mahler_measure(&g, &cfg).map_err(|e| e.to_string())?;
    if !(close(p, phi, 1e-12) && close(j, phi, 1e-10) && (m.value - phi).abs() <= m.error.max(1e-6)) {
        return Err(format!("transfer {p}, Jensen {j}, quadrature {} vs {phi}", m.value));
    }
    Ok(format!("transfer, Jensen and quadrature give {phi:.9}"))
}

fn vdw_bregman(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    let o = opts(exec);
    let mut margin = f64::INFINITY;
    for _ in 0..cases {
        let mut s = support_1d(rng, -1, 2, 3);
        if !s.contains(&0) {
            s.push(0);
        }
        let k = s.len() as f64;
        let f = GroupRingElement::laurent(&s.iter().map(|&x| (x, 1.0 / k)).collect::<Vec<_>>());
        let a = f.support().map_err(|e| e.to_string())?;
        let w = interval(rng, 5);
        let (c, _) = doubly_stochastic_extension(&f, &a, &w).map_err(|e| e.to_string())?;
        let b = WeightedBipartite::from_matrix(&c).map_err(|e| e.to_string())?;
        let per = matrix_permanent(&b, &o).map_err(|e| e.to_string())?.log;
        let floor = vdw_bound(c.nrows()).ln();
        margin = margin.min(per - floor);
        if per < floor - 1e-12 {
            return Err(format!("A = {s:?}: log per {per} below van der Waerden {floor}"));
        }
        let zero_one: Vec<Vec<f64>> = (0..c.nrows())
            .map(|i| (0..c.ncols()).map(|j| if c[(i, j)] > 0.0 { 1.0 } else { 0.0 }).collect())
            .collect();
        let z = WeightedBipartite::from_dense(&zero_one).map_err(|e| e.to_string())?;
        let count = matrix_permanent(&z, &o).map_err(|e| e.to_string())?.linear();
        let bound = bregman_bound(&z).map_err(|e| e.to_string())?;
        if count > bound * (1.0 + 1e-9) {
            return Err(format!("A = {s:?}: permanent {count} above Bregman {bound}"));
        }
    }
    Ok(format!("{cases} cases, smallest log margin {margin:.2e}"))
}

fn translation_scaling(rng: &mut ChaCha8Rng, cases: usize, exec: Exec) -> Result<String, String> {
    let o = opts(exec);
    for _ in 0..cases {
        let f = element_1d(rng, -1, 2, 3, false);
        let a = f.support().map_err(|e| e.to_string())?;
        let schedule = WindowSchedule::cubes(1, 3, 5).map_err(|e| e.to_string())?;
        let base = estimate_report(&f, &a, &schedule, &[], None, &o).map_err(|e| e.to_string())?;
        let s = LatticePoint::new(vec![rng.gen_range(-5..=5)]);
        let g = f.translate(&s);
        let moved = estimate_report(&g, &g.support().map_err(|e| e.to_string())?, &schedule, &[], None, &o)
            .map_err(|e| e.to_string())?;
        if base.certified_upper != moved.certified_upper || base.transfer != moved.transfer {
            return Err(format!("{f} shifted by {s:?} changed the estimates"));
        }
        let c: f64 = rng.gen_range(0.2..5.0);
        let scaled = estimate_report(&f.scale(c), &a, &schedule, &[], None, &o).map_err(|e| e.to_string())?;
        let (u0, u1) = (base.certified_upper.unwrap_or(f64::NAN), scaled.certified_upper.unwrap_or(f64::NAN));
        let (t0, t1) = (base.transfer.unwrap_or(f64::NAN), scaled.transfer.unwrap_or(f64::NAN));
        if !(close(u1, u0 + c.ln(), 1e-10) && close(t1, t0 + c.ln(), 1e-10)) {
            return Err(format!("{f} scaled by {c}: upper {u0} -> {u1}, transfer {t0} -> {t1}"));
        }
    }
    Ok(format!("{cases} cases"))
}
