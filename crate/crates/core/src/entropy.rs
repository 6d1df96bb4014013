//! Estimates of `per(f)`: window upper bounds, torus values, the exact
//! transfer matrix on `Z` and the closed-form bounds.
//!
//! Every window value `(1/|F|) log per_{A,F}(f)` is an upper bound for
//! `per(f)`, so the running infimum along a schedule is certified. Torus values
//! approach `per(f)` from below along `Z/nZ`; on `Z^d` with `d >= 2` they are
//! only a heuristic.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fkdet::{mahler_measure, MahlerResult, QuadratureConfig};
use crate::group_ring::{GroupRingElement, LatticePoint, TorusQuotient, Window};
use crate::par::{map_indexed, map_slice};
use crate::permanent::{iper_af, matrix_permanent, per_af, LogValue, PermanentOptions, WeightedBipartite};

const MAX_TRANSFER_SPAN: usize = 20;
const PERRON_TOL: f64 = 1e-12;
const PERRON_MAX_ITER: usize = 1_000_000;

/// Increasing sequence of windows.
#[derive(Clone, Debug)]
pub struct WindowSchedule {
    windows: Vec<(String, Window)>,
}

impl WindowSchedule {
    pub fn new(windows: Vec<(String, Window)>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidParameters("empty window schedule".into()));
        }
        if windows.windows(2).any(|w| w[0].1.len() >= w[1].1.len()) {
            return Err(Error::InvalidParameters(
                "window cardinalities must be strictly increasing".into(),
            ));
        }
        Ok(WindowSchedule { windows })
    }

    /// Cubes `[0, n)^d` for `n` in `lo..=hi`.
    pub fn cubes(dim: usize, lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameters(format!("bad window range {lo}..{hi}")));
        }
        let windows = (lo..=hi)
            .map(|n| Ok((cube_label(dim, n), Window::cube(dim, n)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(windows)
    }

    pub fn windows(&self) -> &[(String, Window)] {
        &self.windows
    }
}

fn cube_label(dim: usize, n: usize) -> String {
    vec![n.to_string(); dim].join("x")
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowEstimate {
    pub window: String,
    pub size: usize,
    /// `log per_{A,F}(f)`.
    pub per_log: Option<f64>,
    pub per_normalized: Option<f64>,
    pub iper_log: Option<f64>,
    pub iper_normalized: Option<f64>,
    /// Exact pattern count when the weights are integers.
    pub per_exact: Option<String>,
    pub capacity_error: Option<String>,
}

impl WindowEstimate {
    /// Whether both values were computed.
    pub fn is_complete(&self) -> bool {
        self.capacity_error.is_none()
    }
}

/// Window values along a schedule. Capacity failures are recorded per window.
pub fn upper_estimates(
    f: &GroupRingElement,
    alphabet: &Window,
    schedule: &WindowSchedule,
    opts: &PermanentOptions,
) -> Result<Vec<WindowEstimate>> {
    let rows = map_slice(schedule.windows(), opts.exec, |(label, w)| -> Result<WindowEstimate> {
        let mut est = WindowEstimate {
            window: label.clone(),
            size: w.len(),
            per_log: None,
            per_normalized: None,
            iper_log: None,
            iper_normalized: None,
            per_exact: None,
            capacity_error: None,
        };
        match per_af(f, alphabet, w, opts) {
            Ok(v) => {
                est.per_log = Some(v.log);
                est.per_normalized = Some(v.normalized(w.len()));
                est.per_exact = v.exact.map(|n| n.to_string());
            }
            Err(e) if e.is_capacity() => est.capacity_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        match iper_af(f, alphabet, w, opts) {
            Ok(v) => {
                est.iper_log = Some(v.log);
                est.iper_normalized = Some(v.normalized(w.len()));
            }
            Err(e) if e.is_capacity() => {
                est.capacity_error.get_or_insert(e.to_string());
            }
            Err(e) => return Err(e),
        }
        Ok(est)
    });
    rows.into_iter().collect()
}

/// Running minimum of the computed `per` values; `None` until the first one.
pub fn running_infimum(rows: &[WindowEstimate]) -> Vec<Option<f64>> {
    let mut best: Option<f64> = None;
    rows.iter()
        .map(|r| {
            if let Some(v) = r.per_normalized {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
            best
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusEstimate {
    pub torus: String,
    pub order: usize,
    pub log_value: f64,
    pub normalized: f64,
    pub exact: Option<String>,
}

/// Rejects quotients under which two points of `supp(f)` collide.
pub fn check_torus_injective(f: &GroupRingElement, q: &TorusQuotient) -> Result<()> {
    let a = f.support()?;
    if q.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: q.dim(),
        });
    }
    for (i, p) in a.iter().enumerate() {
        for r in &a.points()[i + 1..] {
            if q.is_trivial(&(r - p)) {
                return Err(Error::TorusCollision {
                    a: p.coords().to_vec(),
                    b: r.coords().to_vec(),
                    moduli: q.moduli().to_vec(),
                });
            }
        }
    }
    Ok(())
}

/// The square matrix of `pi(f)` on the quotient group: entry `f_a` at
/// `(g, g + a)`.
pub fn torus_matrix(f: &GroupRingElement, q: &TorusQuotient) -> Result<WeightedBipartite> {
    f.check_nonnegative()?;
    check_torus_injective(f, q)?;
    let (f, q) = relabel_axes(f, q)?;
    let n = q.order();
    let rows = (0..n)
        .map(|g| {
            let base = q.representative(g);
            f.terms()
                .map(|(a, w)| (q.index_of(&(&base + a)), w))
                .collect()
        })
        .collect();
    WeightedBipartite::new(n, rows, Vec::new())
}

/// Relabels axes so the largest modulus varies slowest. The permanent is
/// unchanged and profile widths stay near a few layers of the other axes.
fn relabel_axes(
    f: &GroupRingElement,
    q: &TorusQuotient,
) -> Result<(GroupRingElement, TorusQuotient)> {
    let mut axes: Vec<usize> = (0..q.dim()).collect();
    axes.sort_by_key(|&k| std::cmp::Reverse(q.moduli()[k]));
    let q2 = TorusQuotient::new(axes.iter().map(|&k| q.moduli()[k]).collect())?;
    let f2 = GroupRingElement::from_terms(
        f.dim(),
        f.terms().map(|(p, w)| {
            (LatticePoint::new(axes.iter().map(|&k| p.coords()[k]).collect()), w)
        }),
    )?;
    Ok((f2, q2))
}

/// `per(pi(f))`. Falls back to conditioning on the entries that wrap around
/// the first axis when the direct computation exceeds capacity.
pub fn torus_permanent(
    f: &GroupRingElement,
    q: &TorusQuotient,
    opts: &PermanentOptions,
) -> Result<LogValue> {
    let b = torus_matrix(f, q)?;
    match matrix_permanent(&b, opts) {
        Err(e) if e.is_capacity() => torus_permanent_by_cut(f, q, opts),
        r => r,
    }
}

const MAX_CUT_CONDITIONS: usize = 1 << 20;

/// Entry of the torus matrix: `(row, column, weight)`.
type Entry = (usize, usize, f64);

/// `per(pi(f))` as a sum, over every partial matching `S` of the entries that
/// wrap around the first axis, of the weight of `S` times the permanent of the
/// cylinder left after removing `S` and all other wrap entries. Matchings equal
/// up to translation along the remaining axes are evaluated once.
pub fn torus_permanent_by_cut(
    f: &GroupRingElement,
    q: &TorusQuotient,
    opts: &PermanentOptions,
) -> Result<LogValue> {
    f.check_nonnegative()?;
    check_torus_injective(f, q)?;
    let (f, q) = relabel_axes(f, q)?;
    let (f, q) = (&f, &q);
    let n = q.order();
    let n0 = q.moduli()[0] as i64;
    let mut inner: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut wrap: Vec<Entry> = Vec::new();
    for (g, row) in inner.iter_mut().enumerate() {
        let base = q.representative(g);
        for (a, w) in f.terms() {
            let t = &base + a;
            let c = q.index_of(&t);
            if (0..n0).contains(&t.coords()[0]) {
                row.push((c, w));
            } else {
                wrap.push((g, c, w));
            }
        }
    }

    let matchings = wrap_matchings(&wrap, n)?;
    let shifts: Vec<LatticePoint> = (0..n)
        .map(|g| q.representative(g))
        .filter(|p| p.coords()[0] == 0)
        .collect();
    let shift_entry = |e: &Entry, t: &LatticePoint| -> (usize, usize) {
        (
            q.index_of(&(&q.representative(e.0) + t)),
            q.index_of(&(&q.representative(e.1) + t)),
        )
    };
    let mut orbits: std::collections::BTreeMap<Vec<(usize, usize)>, (u128, usize)> =
        Default::default();
    for (k, m) in matchings.iter().enumerate() {
        let canon = shifts
            .iter()
            .map(|t| {
                let mut v: Vec<(usize, usize)> = m.iter().map(|&i| shift_entry(&wrap[i], t)).collect();
                v.sort_unstable();
                v
            })
            .min()
            .unwrap_or_default();
        orbits.entry(canon).or_insert((0, k)).0 += 1;
    }
    let reps: Vec<(u128, usize)> = orbits.into_values().collect();

    let inner_opts = PermanentOptions {
        exec: crate::par::Exec::Sequential,
        ..*opts
    };
    let terms = map_slice(&reps, opts.exec, |&(mult, k)| -> Result<(LogValue, f64)> {
        let m = &matchings[k];
        let mut used_row = vec![false; n];
        let mut used_col = vec![false; n];
        let mut weight = 1.0;
        for &i in m {
            let (r, c, w) = wrap[i];
            used_row[r] = true;
            used_col[c] = true;
            weight *= w;
        }
        let mut col_map = vec![usize::MAX; n];
        let mut nc = 0;
        for (c, slot) in col_map.iter_mut().enumerate() {
            if !used_col[c] {
                *slot = nc;
                nc += 1;
            }
        }
        let rows = (0..n)
            .filter(|&r| !used_row[r])
            .map(|r| {
                inner[r]
                    .iter()
                    .filter(|e| !used_col[e.0])
                    .map(|&(c, w)| (col_map[c], w))
                    .collect()
            })
            .collect();
        let sub = WeightedBipartite::new(nc, rows, Vec::new())?;
        let v = matrix_permanent(&sub, &inner_opts)?;
        Ok((v, weight * mult as f64))
    });

    let mut exact: Option<u128> = Some(0);
    let mut logs = Vec::with_capacity(terms.len());
    for (t, &(mult, k)) in terms.into_iter().zip(&reps) {
        let (v, scale) = t?;
        if v.is_zero() {
            continue;
        }
        let w: f64 = matchings[k].iter().map(|&i| wrap[i].2).product();
        exact = match (exact, v.exact) {
            (Some(acc), Some(x)) if w.fract() == 0.0 && w < 1e15 => (w as u128)
                .checked_mul(mult)
                .and_then(|m| m.checked_mul(x))
                .and_then(|y| acc.checked_add(y)),
            _ => None,
        };
        logs.push(v.log + scale.ln());
    }
    if let Some(x) = exact {
        return Ok(if x == 0 { LogValue::zero() } else { LogValue::from_exact(x) });
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(LogValue::zero());
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    Ok(LogValue::from_log(max + crate::par::tree_sum(&scaled).ln()))
}

/// All partial matchings among the wrap entries, as index lists.
fn wrap_matchings(wrap: &[Entry], n: usize) -> Result<Vec<Vec<usize>>> {
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in wrap.iter().enumerate() {
        by_row[e.0].push(i);
    }
    let rows: Vec<&Vec<usize>> = by_row.iter().filter(|v| !v.is_empty()).collect();
    let mut out = Vec::new();
    let mut used = vec![false; n];
    let mut cur = Vec::new();
    fn rec(
        k: usize,
        rows: &[&Vec<usize>],
        wrap: &[Entry],
        used: &mut [bool],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if k == rows.len() {
            if out.len() >= MAX_CUT_CONDITIONS {
                return Err(Error::Capacity(format!(
                    "more than {MAX_CUT_CONDITIONS} wrap conditions"
                )));
            }
            out.push(cur.clone());
            return Ok(());
        }
        rec(k + 1, rows, wrap, used, cur, out)?;
        for &i in rows[k] {
            let c = wrap[i].1;
            if !used[c] {
                used[c] = true;
                cur.push(i);
                rec(k + 1, rows, wrap, used, cur, out)?;
                cur.pop();
                used[c] = false;
            }
        }
        Ok(())
    }
    rec(0, &rows, wrap, &mut used, &mut cur, &mut out)?;
    Ok(out)
}

/// `(1/|G|) log per(pi(f))` for each quotient.
pub fn torus_estimates(
    f: &GroupRingElement,
    tori: &[TorusQuotient],
    opts: &PermanentOptions,
) -> Result<Vec<TorusEstimate>> {
    let rows = map_slice(tori, opts.exec, |q| -> Result<TorusEstimate> {
        let v = torus_permanent(f, q, opts)?;
        Ok(TorusEstimate {
            torus: q.label(),
            order: q.order(),
            log_value: v.log,
            normalized: v.normalized(q.order()),
            exact: v.exact.map(|n| n.to_string()),
        })
    });
    rows.into_iter().collect()
}

/// Perron root with Collatz-Wielandt bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PerronRoot {
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Profile transfer matrix for `f` on `Z`.
///
/// After translating `supp(f)` into `{0, .., K}`, a state is the set of
/// positions among the next `K` sites already claimed by earlier sites. A site
/// picks an unclaimed displacement, must itself be claimed afterwards, and the
/// window shifts by one.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    span: usize,
    n_states: usize,
    /// `(from, to, weight)`, sorted by `from`.
    edges: Vec<(usize, usize, f64)>,
}

impl TransferMatrix {
    pub fn new(f: &GroupRingElement) -> Result<Self> {
        if f.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: f.dim(),
            });
        }
        f.check_nonnegative()?;
        let min = f.min_point().ok_or(Error::EmptySupport)?.coords()[0];
        let terms: Vec<(usize, f64)> = f
            .terms()
            .map(|(p, w)| ((p.coords()[0] - min) as usize, w))
            .collect();
        let span = terms.iter().map(|t| t.0).max().unwrap_or(0);
        if span > MAX_TRANSFER_SPAN {
            return Err(Error::Capacity(format!(
                "transfer matrix span {span} exceeds {MAX_TRANSFER_SPAN}"
            )));
        }
        let n_states = 1usize << span;
        let mut edges = Vec::new();
        for s in 0..n_states {
            for &(e, w) in &terms {
                let bit = 1usize << e;
                if s & bit != 0 {
                    continue;
                }
                let ns = s | bit;
                if ns & 1 == 0 {
                    continue;
                }
                edges.push((s, ns >> 1, w));
            }
        }
        Ok(TransferMatrix {
            span,
            n_states,
            edges,
        })
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_states, self.n_states);
        for &(i, j, w) in &self.edges {
            m[(i, j)] += w;
        }
        m
    }

    /// Spectral radius: the largest Perron root over strongly connected
    /// components, each by power iteration on `T + I`.
    pub fn perron_root(&self) -> PerronRoot {
        let mut g: DiGraph<(), f64> = DiGraph::with_capacity(self.n_states, self.edges.len());
        let nodes: Vec<_> = (0..self.n_states).map(|_| g.add_node(())).collect();
        for &(i, j, w) in &self.edges {
            g.add_edge(nodes[i], nodes[j], w);
        }
        let sccs = tarjan_scc(&g);
        let mut best = PerronRoot {
            rho: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            converged: true,
        };
        for comp in sccs {
            let mut local = vec![usize::MAX; self.n_states];
            for (k, n) in comp.iter().enumerate() {
                local[n.index()] = k;
            }
            let edges: Vec<(usize, usize, f64)> = self
                .edges
                .iter()
                .filter(|e| local[e.0] != usize::MAX && local[e.1] != usize::MAX)
                .map(|&(i, j, w)| (local[i], local[j], w))
                .collect();
            if edges.is_empty() {
                continue;
            }
            let r = perron_irreducible(comp.len(), &edges);
            if r.rho > best.rho {
                best = PerronRoot {
                    iterations: best.iterations.max(r.iterations),
                    converged: best.converged && r.converged,
                    ..r
                };
            } else {
                best.iterations = best.iterations.max(r.iterations);
                best.converged &= r.converged;
            }
        }
        best
    }

    /// `log rho(T)`, which equals `per(f)` on `Z`.
    pub fn pressure(&self) -> f64 {
        self.perron_root().rho.ln()
    }

    /// `trace(T^n)`, exact when the weights are integers.
    pub fn trace_power(&self, n: usize) -> LogValue {
        if self.edges.iter().all(|e| e.2.fract() == 0.0 && e.2 < 1e15) {
            if let Some(t) = self.trace_power_exact(n) {
                return LogValue::from_exact(t);
            }
        }
        self.trace_power_float(n)
    }

    fn trace_power_exact(&self, n: usize) -> Option<u128> {
        let mut total: u128 = 0;
        for s in 0..self.n_states {
            let mut v = vec![0u128; self.n_states];
            v[s] = 1;
            for _ in 0..n {
                let mut next = vec![0u128; self.n_states];
                for &(i, j, w) in &self.edges {
                    if v[i] != 0 {
                        next[j] = next[j].checked_add(v[i].checked_mul(w as u128)?)?;
                    }
                }
                v = next;
            }
            total = total.checked_add(v[s])?;
        }
        Some(total)
    }

    fn trace_power_float(&self, n: usize) -> LogValue {
        let logs = map_indexed(self.n_states, Default::default(), |s| {
            let mut v = vec![0.0f64; self.n_states];
            v[s] = 1.0;
            let mut offset = 0.0;
            for _ in 0..n {
                let mut next = vec![0.0f64; self.n_states];
                for &(i, j, w) in &self.edges {
                    next[j] += v[i] * w;
                }
                let m = next.iter().fold(0.0f64, |a, &b| a.max(b));
                if m == 0.0 {
                    return f64::NEG_INFINITY;
                }
                for x in &mut next {
                    *x /= m;
                }
                offset += m.ln();
                v = next;
            }
            if v[s] > 0.0 {
                v[s].ln() + offset
            } else {
                f64::NEG_INFINITY
            }
        });
        let max = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if max == f64::NEG_INFINITY {
            return LogValue::zero();
        }
        let sum: f64 = logs.iter().map(|&l| (l - max).exp()).sum();
        LogValue::from_log(max + sum.ln())
    }
}

fn perron_irreducible(n: usize, edges: &[(usize, usize, f64)]) -> PerronRoot {
    let mut x = vec![1.0f64; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for it in 1..=PERRON_MAX_ITER {
        // y = (T + I) x
        let mut y = x.clone();
        for &(i, j, w) in edges {
            y[i] += w * x[j];
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in y.iter().zip(&x) {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lower = f64::max(lower, lo);
        upper = upper.min(hi);
        if upper - lower <= PERRON_TOL * lower {
            return PerronRoot {
                rho: 0.5 * (lower + upper) - 1.0,
                lower: lower - 1.0,
                upper: upper - 1.0,
                iterations: it,
                converged: true,
            };
        }
        let m = y.iter().fold(0.0f64, |a, &b| a.max(b));
        x = y.into_iter().map(|v| v / m).collect();
    }
    PerronRoot {
        rho: 0.5 * (lower + upper) - 1.0,
        lower: lower - 1.0,
        upper: upper - 1.0,
        iterations: PERRON_MAX_ITER,
        converged: false,
    }
}

/// `per(f)` for `f` on `Z` via the transfer matrix.
pub fn transfer_pressure_z(f: &GroupRingElement) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::EmptySupport);
    }
    Ok(TransferMatrix::new(f)?.pressure())
}

/// `log(||f||_1 / e)`, a lower bound for `per(f)`.
pub fn bound_lower_formula(f: &GroupRingElement) -> f64 {
    f.norm1().ln() - 1.0
}

/// `(1/|A|) log |A|!`, an upper bound for the entropy of `X_A`.
pub fn bound_upper_formula(alphabet_size: usize) -> f64 {
    if alphabet_size == 0 {
        return f64::NEG_INFINITY;
    }
    crate::permanent::ln_factorial(alphabet_size) / alphabet_size as f64
}

/// Upper bound for weighted `f`: `log ||f||_inf + (1/|A|) log |A|!`, by
/// monotonicity and scaling from the indicator case.
pub fn bound_upper_weighted(f: &GroupRingElement) -> f64 {
    f.norm_inf().ln() + bound_upper_formula(f.num_terms())
}

/// Whether `X_A` has zero entropy. In `Z^d` every nonzero difference has
/// infinite order, so this is exactly `|A| <= 2`.
pub fn zero_entropy_classifier(alphabet: &Window) -> bool {
    alphabet.len() <= 2
}

/// How far a torus value can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorusKind {
    /// On `Z` the torus values converge to `per(f)` along `n`.
    ConvergingLower,
    /// On `Z^d`, `d >= 2`, no convergence statement is available.
    HeuristicLower,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub dim: usize,
    pub support_size: usize,
    pub windows: Vec<WindowEstimate>,
    pub running_infimum: Vec<Option<f64>>,
    /// Smallest window value; certified upper bound.
    pub certified_upper: Option<f64>,
    pub tori: Vec<TorusEstimate>,
    pub torus_max: Option<f64>,
    pub torus_kind: TorusKind,
    /// Exact value on `Z`.
    pub transfer: Option<f64>,
    pub bound_lower: f64,
    pub bound_upper: f64,
    /// `det_FK(f) <= per(f)` for nonnegative `f`; a lower bound up to the
    /// quadrature error.
    pub det_lower: Option<MahlerResult>,
    pub capacity_errors: Vec<String>,
}

impl EstimateReport {
    /// Best certified lower value: closed form, transfer value, and the
    /// determinant lower bound less its error estimate.
    pub fn certified_lower(&self) -> f64 {
        let mut lo = self.bound_lower;
        if let Some(t) = self.transfer {
            lo = lo.max(t);
        }
        if let Some(d) = &self.det_lower {
            if d.converged {
                lo = lo.max(d.value - d.error);
            }
        }
        lo
    }

    /// Rows `(window, size, log_value, normalized, kind)`.
    pub fn table(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for w in &self.windows {
            if let (Some(l), Some(n)) = (w.per_log, w.per_normalized) {
                rows.push(ReportRow {
                    window: w.window.clone(),
                    size: w.size,
                    log_value: l,
                    normalized: n,
                    kind: "upper",
                });
            }
        }
        for t in &self.tori {
            rows.push(ReportRow {
                window: format!("torus {}", t.torus),
                size: t.order,
                log_value: t.log_value,
                normalized: t.normalized,
                kind: "torus",
            });
        }
        if let Some(v) = self.transfer {
            rows.push(ReportRow {
                window: "transfer".into(),
                size: 1,
                log_value: v,
                normalized: v,
                kind: "transfer",
            });
        }
        for (name, v) in [("lower", self.bound_lower), ("upper", self.bound_upper)] {
            rows.push(ReportRow {
                window: format!("closed-form {name}"),
                size: 1,
                log_value: v,
                normalized: v,
                kind: "bound",
            });
        }
        rows
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub window: String,
    pub size: usize,
    pub log_value: f64,
    pub normalized: f64,
    pub kind: &'static str,
}

/// Runs every estimator that applies to `f`.
pub fn estimate_report(
    f: &GroupRingElement,
    alphabet: &Window,
    schedule: &WindowSchedule,
    tori: &[TorusQuotient],
    quadrature: Option<&QuadratureConfig>,
    opts: &PermanentOptions,
) -> Result<EstimateReport> {
    let support = f.support()?;
    let windows = upper_estimates(f, alphabet, schedule, opts)?;
    let running = running_infimum(&windows);
    let certified_upper = running.iter().rev().find_map(|v| *v);
    let mut capacity_errors: Vec<String> = windows
        .iter()
        .filter_map(|w| w.capacity_error.as_ref().map(|e| format!("{}: {e}", w.window)))
        .collect();

    let mut torus_rows = Vec::new();
    for q in tori {
        match torus_estimates(f, std::slice::from_ref(q), opts) {
            Ok(mut v) => torus_rows.append(&mut v),
            Err(e) if e.is_capacity() => capacity_errors.push(format!("torus {}: {e}", q.label())),
            Err(e) => return Err(e),
        }
    }
    let torus_max = torus_rows
        .iter()
        .map(|t| t.normalized)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let transfer = if f.dim() == 1 {
        Some(transfer_pressure_z(f)?)
    } else {
        None
    };
    let det_lower = match quadrature {
        Some(cfg) => Some(mahler_measure(f, cfg)?),
        None => None,
    };
    Ok(EstimateReport {
        dim: f.dim(),
        support_size: support.len(),
        windows,
        running_infimum: running,
        certified_upper,
        tori: torus_rows,
        torus_max,
        torus_kind: if f.dim() == 1 {
            TorusKind::ConvergingLower
        } else {
            TorusKind::HeuristicLower
        },
        transfer,
        bound_lower: bound_lower_formula(f),
        bound_upper: bound_upper_weighted(f),
        det_lower,
        capacity_errors,
    })
}

/// Square tori `n x .. x n` for `n` in `lo..=hi`.
pub fn cube_tori(dim: usize, lo: usize, hi: usize) -> Result<Vec<TorusQuotient>> {
    (lo..=hi).map(|n| TorusQuotient::new(vec![n; dim])).collect()
}

/// Translate of `f` with its lexicographically smallest support point at the
/// origin.
pub fn anchor_at_origin(f: &GroupRingElement) -> Result<GroupRingElement> {
    let p: LatticePoint = f.min_point().ok_or(Error::EmptySupport)?.clone();
    Ok(f.translate(&-&p))
}
