//! Permanent kernels for the bipartite graph `F -> FA` weighted by `f`.
//!
//! All kernels compute the same quantity: the sum, over injective maps from the
//! rows into the columns whose image contains a set of required columns, of the
//! product of the chosen weights. With no required columns this is the
//! rectangular permanent, i.e. `iper_{A,F}(f)`; with the interior as required
//! set it is `per_{A,F}(f)`.
//!
//! Backends:
//!
//! - [`Backend::Ryser`]: inclusion-exclusion over column subsets with a Gray
//!   code, exact in `i128` for integer weights and in double-double otherwise.
//! - [`Backend::Backtrack`]: depth-first search with a node budget.
//! - [`Backend::Profile`]: dynamic programming over rows, the state being the
//!   set of claimed columns among those still reachable.
//! - [`Backend::InclusionExclusion`]: `sum_{S subset R} (-1)^|S| iper(B \ S)`.

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::group_ring::{GroupRingElement, LatticePoint, Window};
use crate::par::{map_indexed, tree_reduce, CompensatedSum, Exec};
use crate::patterns::PatternSpace;

/// Default node/transition budget for the exact kernels.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

const MAX_RYSER_COLS: usize = 30;
const MAX_IE_REQUIRED: usize = 24;
const MAX_PROFILE_WIDTH: usize = 128;
const PROFILE_CHUNK: usize = 4096;
const MAX_PROFILE_ENTRIES: usize = 1 << 24;

/// A nonnegative quantity stored by its natural logarithm, plus the exact
/// integer when the computation ran in integer mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    pub log: f64,
    pub exact: Option<u128>,
}

impl LogValue {
    pub fn zero() -> Self {
        LogValue {
            log: f64::NEG_INFINITY,
            exact: Some(0),
        }
    }

    pub fn one() -> Self {
        LogValue {
            log: 0.0,
            exact: Some(1),
        }
    }

    pub fn from_exact(n: u128) -> Self {
        LogValue {
            log: (n as f64).ln(),
            exact: Some(n),
        }
    }

    pub fn from_linear(x: f64) -> Self {
        assert!(x >= 0.0, "LogValue holds nonnegative values");
        LogValue {
            log: x.ln(),
            exact: None,
        }
    }

    pub fn from_log(log: f64) -> Self {
        LogValue { log, exact: None }
    }

    pub fn is_zero(&self) -> bool {
        self.log == f64::NEG_INFINITY
    }

    /// The value itself; may overflow to infinity for large logs.
    pub fn linear(&self) -> f64 {
        match self.exact {
            Some(n) => n as f64,
            None => self.log.exp(),
        }
    }

    /// `(1 / n) log value`.
    pub fn normalized(&self, n: usize) -> f64 {
        self.log / n as f64
    }

    pub fn mul(&self, other: &LogValue) -> LogValue {
        let exact = match (self.exact, other.exact) {
            (Some(a), Some(b)) => a.checked_mul(b),
            _ => None,
        };
        let log = if self.is_zero() || other.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.log + other.log
        };
        LogValue { log, exact }
    }

    /// `|a / b - 1|` computed from the logs; zero when both vanish.
    pub fn rel_diff(&self, other: &LogValue) -> f64 {
        if let (Some(a), Some(b)) = (self.exact, other.exact) {
            if a == b {
                return 0.0;
            }
        }
        match (self.is_zero(), other.is_zero()) {
            (true, true) => 0.0,
            (false, false) => (self.log - other.log).exp_m1().abs(),
            _ => f64::INFINITY,
        }
    }
}

/// Kernel selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Auto,
    Ryser,
    Backtrack,
    Profile,
    InclusionExclusion,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "ryser" => Ok(Backend::Ryser),
            "backtrack" => Ok(Backend::Backtrack),
            "profile" => Ok(Backend::Profile),
            "ie" | "inclusion-exclusion" => Ok(Backend::InclusionExclusion),
            _ => Err(Error::Parse(format!("unknown backend {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PermanentOptions {
    pub backend: Backend,
    pub exec: Exec,
    /// Upper limit on search nodes (backtracking), state transitions
    /// (profile) or subset evaluations (Ryser).
    pub budget: u64,
}

impl Default for PermanentOptions {
    fn default() -> Self {
        PermanentOptions {
            backend: Backend::Auto,
            exec: Exec::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

impl PermanentOptions {
    pub fn with_backend(backend: Backend) -> Self {
        PermanentOptions {
            backend,
            ..Default::default()
        }
    }
}

/// A sparse nonnegative matrix with rows `0..m`, columns `0..n` and a set of
/// columns every counted map must hit.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedBipartite {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    required: Vec<usize>,
}

impl WeightedBipartite {
    pub fn new(n_cols: usize, rows: Vec<Vec<(usize, f64)>>, required: Vec<usize>) -> Result<Self> {
        if rows.len() > n_cols {
            return Err(Error::TooManyRows {
                rows: rows.len(),
                cols: n_cols,
            });
        }
        let mut clean = Vec::with_capacity(rows.len());
        for row in rows {
            let mut r: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, w) in row {
                if c >= n_cols {
                    return Err(Error::InvalidParameters(format!("column {c} out of range")));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidParameters(format!(
                        "matrix entry {w} is not a finite nonnegative number"
                    )));
                }
                if w > 0.0 {
                    r.push((c, w));
                }
            }
            r.sort_by_key(|e| e.0);
            if r.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidParameters("repeated column in a row".into()));
            }
            clean.push(r);
        }
        let mut required = required;
        required.sort_unstable();
        required.dedup();
        if required.iter().any(|&c| c >= n_cols) {
            return Err(Error::InvalidParameters("required column out of range".into()));
        }
        Ok(WeightedBipartite {
            n_cols,
            rows: clean,
            required,
        })
    }

    pub fn from_dense(m: &[Vec<f64>]) -> Result<Self> {
        let n = m.first().map_or(0, |r| r.len());
        if m.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameters("ragged matrix".into()));
        }
        let rows = m
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::new(n, rows, Vec::new())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        Self::from_dense(&rows)
    }

    /// `B_{F,FA,f}`: rows `F`, columns `FA`, entry `f_{t' - t}`. With
    /// `require_interior` the interior columns become required.
    pub fn from_element(
        f: &GroupRingElement,
        alphabet: &Window,
        window: &Window,
        require_interior: bool,
    ) -> Result<Self> {
        check_weight(f, alphabet)?;
        let space = PatternSpace::new(alphabet, window)?;
        let weights: Vec<f64> = alphabet.iter().map(|a| f.coef(a)).collect();
        let rows = space
            .targets()
            .iter()
            .map(|row| row.iter().zip(&weights).map(|(&c, &w)| (c, w)).collect())
            .collect();
        let required = if require_interior {
            space.required().to_vec()
        } else {
            Vec::new()
        };
        Self::new(space.num_cols(), rows, required)
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn required(&self) -> &[usize] {
        &self.required
    }

    pub fn with_required(&self, required: Vec<usize>) -> Result<Self> {
        Self::new(self.n_cols, self.rows.clone(), required)
    }

    /// Deletes the given columns and renumbers the rest; required columns among
    /// the deleted ones are dropped from the requirement.
    pub fn without_columns(&self, drop: &[usize]) -> Self {
        let mut keep = vec![true; self.n_cols];
        for &c in drop {
            keep[c] = false;
        }
        let mut new_idx = vec![usize::MAX; self.n_cols];
        let mut n = 0;
        for c in 0..self.n_cols {
            if keep[c] {
                new_idx[c] = n;
                n += 1;
            }
        }
        WeightedBipartite {
            n_cols: n,
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .filter(|e| keep[e.0])
                        .map(|&(c, w)| (new_idx[c], w))
                        .collect()
                })
                .collect(),
            required: self
                .required
                .iter()
                .filter(|&&c| keep[c])
                .map(|&c| new_idx[c])
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.n_cols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, w) in r {
                m[(i, c)] = w;
            }
        }
        m
    }

    /// Integer weights, if every entry is an integer below `2^53`.
    fn integral(&self) -> Option<Vec<Vec<(usize, u128)>>> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(c, w)| (w.fract() == 0.0 && w < 9.007_199_254_740_992e15).then_some((c, w as u128)))
                    .collect()
            })
            .collect()
    }

    /// Rows divided by their maximum entry, with the log of the removed factor.
    fn scaled(&self) -> (Vec<Vec<(usize, f64)>>, f64) {
        let mut offset = 0.0;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let m = r.iter().fold(0.0f64, |m, e| m.max(e.1));
                if m == 0.0 {
                    return Vec::new();
                }
                offset += m.ln();
                r.iter().map(|&(c, w)| (c, w / m)).collect()
            })
            .collect();
        (rows, offset)
    }

    /// Connected components of the row-column graph, each with its columns
    /// renumbered; ordered by smallest row. Untouched columns are dropped.
    fn components(&self) -> Vec<WeightedBipartite> {
        let n = self.rows();
        let mut parent: Vec<usize> = (0..n + self.n_cols).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, _) in r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, n + c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let root_of_row: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut roots = root_of_row.clone();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() <= 1 {
            return vec![self.clone()];
        }
        let mut col_map = vec![usize::MAX; self.n_cols];
        let mut col_counts = vec![0usize; roots.len()];
        let comp_index = |root: usize| roots.binary_search(&root).expect("root of some row");
        for c in 0..self.n_cols {
            let r = find(&mut parent, n + c);
            if let Ok(k) = roots.binary_search(&r) {
                col_map[c] = col_counts[k];
                col_counts[k] += 1;
            }
        }
        let mut parts: Vec<WeightedBipartite> = col_counts
            .iter()
            .map(|&nc| WeightedBipartite {
                n_cols: nc,
                rows: Vec::new(),
                required: Vec::new(),
            })
            .collect();
        for (i, r) in self.rows.iter().enumerate() {
            let k = comp_index(root_of_row[i]);
            parts[k].rows.push(r.iter().map(|&(c, w)| (col_map[c], w)).collect());
        }
        for &c in &self.required {
            let k = comp_index(find(&mut parent, n + c));
            parts[k].required.push(col_map[c]);
        }
        parts
    }

    /// Whether some required column has no entry at all, or some row is empty.
    fn trivially_zero(&self) -> bool {
        if self.rows() > self.n_cols || self.rows.iter().any(|r| r.is_empty()) {
            return true;
        }
        let mut touched = vec![false; self.n_cols];
        for r in &self.rows {
            for &(c, _) in r {
                touched[c] = true;
            }
        }
        self.required.iter().any(|&c| !touched[c]) || self.required.len() > self.rows()
    }
}

fn check_weight(f: &GroupRingElement, alphabet: &Window) -> Result<()> {
    if f.dim() != alphabet.dim() {
        return Err(Error::DimensionMismatch {
            expected: alphabet.dim(),
            found: f.dim(),
        });
    }
    f.check_nonnegative()?;
    for (p, _) in f.terms() {
        if !alphabet.contains(p) {
            return Err(Error::SupportOutsideAlphabet(p.coords().to_vec()));
        }
    }
    Ok(())
}

/// Sum over injective row maps covering the required columns.
pub fn matrix_permanent(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<LogValue> {
    if b.rows() == 0 {
        return Ok(LogValue::one());
    }
    if b.trivially_zero() {
        return Ok(LogValue::zero());
    }
    let parts = b.components();
    if parts.len() > 1 {
        let mut acc = LogValue::one();
        for part in &parts {
            let v = matrix_permanent(part, opts)?;
            if v.is_zero() {
                return Ok(LogValue::zero());
            }
            acc = acc.mul(&v);
        }
        return Ok(acc);
    }
    let backend = match opts.backend {
        Backend::Auto => auto_backend(b),
        other => other,
    };
    match backend {
        Backend::Ryser => ryser(b, opts),
        Backend::Backtrack => backtrack(b, opts),
        Backend::Profile => profile(b, opts),
        Backend::InclusionExclusion => inclusion_exclusion(b, opts),
        Backend::Auto => unreachable!(),
    }
}

fn auto_backend(b: &WeightedBipartite) -> Backend {
    let width = ProfilePlan::new(b).width;
    if (width <= 40 || width < b.n_cols() && b.n_cols() > MAX_RYSER_COLS)
        && width <= MAX_PROFILE_WIDTH {
            return Backend::Profile;
        }
    if b.n_cols() <= 24 {
        Backend::Ryser
    } else if width <= MAX_PROFILE_WIDTH {
        Backend::Profile
    } else {
        Backend::Backtrack
    }
}

/// `iper_{A,F}(f)`: weighted count of injective patterns.
pub fn iper_af(
    f: &GroupRingElement,
    alphabet: &Window,
    window: &Window,
    opts: &PermanentOptions,
) -> Result<LogValue> {
    let b = WeightedBipartite::from_element(f, alphabet, window, false)?;
    matrix_permanent(&b, opts)
}

/// `per_{A,F}(f)`: weighted count of admissible patterns.
pub fn per_af(
    f: &GroupRingElement,
    alphabet: &Window,
    window: &Window,
    opts: &PermanentOptions,
) -> Result<LogValue> {
    let b = WeightedBipartite::from_element(f, alphabet, window, true)?;
    matrix_permanent(&b, opts)
}

// ---------------------------------------------------------------------------
// double-double arithmetic

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    #[inline]
    fn add_f64(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// ---------------------------------------------------------------------------
// Ryser

struct Binomials {
    f: Vec<Vec<f64>>,
    i: Vec<Vec<i128>>,
}

impl Binomials {
    fn new(n: usize) -> Self {
        let mut f = vec![vec![0.0; n + 1]; n + 1];
        let mut i = vec![vec![0i128; n + 1]; n + 1];
        for a in 0..=n {
            f[a][0] = 1.0;
            i[a][0] = 1;
            for b in 1..=a {
                f[a][b] = f[a - 1][b - 1] + if b < a { f[a - 1][b] } else { 0.0 };
                i[a][b] = i[a - 1][b - 1] + if b < a { i[a - 1][b] } else { 0 };
            }
        }
        Binomials { f, i }
    }
}

/// Subset split used by Ryser: `2^high` chunks of `2^low` Gray-code steps.
fn ryser_split(n: usize) -> (usize, usize) {
    let high = n.min(6);
    (high, n - high)
}

fn column_lists<W: Copy>(rows: &[Vec<(usize, W)>], n: usize) -> Vec<Vec<(usize, W)>> {
    let mut cols = vec![Vec::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &(c, w) in r {
            cols[c].push((i, w));
        }
    }
    cols
}

fn ryser_cost(b: &WeightedBipartite) -> u64 {
    (1u64 << b.n_cols().min(62)).saturating_mul(b.rows() as u64)
}

fn ryser(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<LogValue> {
    if b.n_cols() > MAX_RYSER_COLS {
        return Err(Error::Capacity(format!(
            "Ryser needs at most {MAX_RYSER_COLS} columns, got {}",
            b.n_cols()
        )));
    }
    if ryser_cost(b) > opts.budget {
        return Err(Error::Capacity(format!(
            "Ryser cost {} exceeds budget {}",
            ryser_cost(b),
            opts.budget
        )));
    }
    if let Some(v) = ryser_exact(b, opts.exec) {
        return Ok(exact_to_value(v));
    }
    let (rows, offset) = b.scaled();
    let v = ryser_dd(&rows, b.n_cols(), b.required(), opts.exec);
    Ok(dd_to_value(v, offset))
}

fn exact_to_value(v: i128) -> LogValue {
    assert!(v >= 0, "negative permanent from an exact kernel");
    LogValue::from_exact(v as u128)
}

fn dd_to_value(v: Dd, offset: f64) -> LogValue {
    let x = v.to_f64();
    if x <= 0.0 {
        LogValue::zero()
    } else {
        LogValue::from_log(x.ln() + offset)
    }
}

fn required_mask(required: &[usize]) -> u64 {
    required.iter().fold(0u64, |m, &c| m | (1u64 << c))
}

/// Ryser in `i128`, or `None` when the magnitude bound does not fit.
fn ryser_exact(b: &WeightedBipartite, exec: Exec) -> Option<i128> {
    let rows = b.integral()?;
    let n = b.n_cols();
    let m = b.rows();
    let mut log2_bound = 2.0 * n as f64 + 2.0;
    for r in &rows {
        let t: u128 = r.iter().map(|e| e.1).sum();
        log2_bound += (t.max(1) as f64).log2();
    }
    if log2_bound > 120.0 {
        return None;
    }
    let rows: Vec<Vec<(usize, i128)>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(c, w)| (c, w as i128)).collect())
        .collect();
    let cols = column_lists(&rows, n);
    let binom = Binomials::new(n);
    let rmask = required_mask(b.required());
    let (high, low) = ryser_split(n);
    let chunk = |h: usize| -> i128 {
        let mut sums = vec![0i128; m];
        let mut x = (h as u64) << low;
        for c in low..n {
            if x >> c & 1 == 1 {
                for &(i, w) in &cols[c] {
                    sums[i] += w;
                }
            }
        }
        let term = |x: u64, sums: &[i128]| -> i128 {
            let k = x.count_ones() as usize;
            let u = (x | rmask).count_ones() as usize;
            if u > m {
                return 0;
            }
            let mut p = binom.i[n - u][m - u];
            for &s in sums {
                if s == 0 {
                    return 0;
                }
                p *= s;
            }
            if (m - k) % 2 == 1 {
                -p
            } else {
                p
            }
        };
        let mut acc = term(x, &sums);
        for t in 1u64..(1u64 << low) {
            let j = t.trailing_zeros() as usize;
            x ^= 1 << j;
            if x >> j & 1 == 1 {
                for &(i, w) in &cols[j] {
                    sums[i] += w;
                }
            } else {
                for &(i, w) in &cols[j] {
                    sums[i] -= w;
                }
            }
            acc += term(x, &sums);
        }
        acc
    };
    let parts = map_indexed(1 << high, exec, chunk);
    Some(tree_reduce(&parts, 0i128, &|a, b| a + b))
}

fn ryser_dd(rows: &[Vec<(usize, f64)>], n: usize, required: &[usize], exec: Exec) -> Dd {
    let m = rows.len();
    let cols = column_lists(rows, n);
    let binom = Binomials::new(n);
    let rmask = required_mask(required);
    let (high, low) = ryser_split(n);
    let chunk = |h: usize| -> Dd {
        let mut sums = vec![Dd::ZERO; m];
        let mut x = (h as u64) << low;
        for c in low..n {
            if x >> c & 1 == 1 {
                for &(i, w) in &cols[c] {
                    sums[i] = sums[i].add_f64(w);
                }
            }
        }
        let term = |x: u64, sums: &[Dd]| -> Dd {
            let k = x.count_ones() as usize;
            let u = (x | rmask).count_ones() as usize;
            if u > m {
                return Dd::ZERO;
            }
            let mut p = Dd::from_f64(binom.f[n - u][m - u]);
            for &s in sums {
                if s.hi == 0.0 {
                    return Dd::ZERO;
                }
                p = p.mul(s);
            }
            if (m - k) % 2 == 1 {
                Dd { hi: -p.hi, lo: -p.lo }
            } else {
                p
            }
        };
        let mut acc = term(x, &sums);
        for t in 1u64..(1u64 << low) {
            let j = t.trailing_zeros() as usize;
            x ^= 1 << j;
            let sign = if x >> j & 1 == 1 { 1.0 } else { -1.0 };
            for &(i, w) in &cols[j] {
                sums[i] = sums[i].add_f64(sign * w);
            }
            acc = acc.add(term(x, &sums));
        }
        acc
    };
    let parts = map_indexed(1 << high, exec, chunk);
    tree_reduce(&parts, Dd::ZERO, &|a, b| a.add(b))
}

// ---------------------------------------------------------------------------
// semiring used by the search kernels

trait Weight: Copy + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, o: Self) -> Option<Self>;
    fn mul(self, o: Self) -> Option<Self>;
    fn is_zero(self) -> bool;
    /// Rescales a layer and returns the log of the removed factor.
    fn renormalize(values: &mut [(u128, Self)]) -> f64;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(self, o: Self) -> Option<Self> {
        Some(self + o)
    }
    fn mul(self, o: Self) -> Option<Self> {
        Some(self * o)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn renormalize(values: &mut [(u128, Self)]) -> f64 {
        let m = values.iter().fold(0.0f64, |m, v| m.max(v.1));
        if m == 0.0 || m == 1.0 {
            return 0.0;
        }
        for v in values.iter_mut() {
            v.1 /= m;
        }
        m.ln()
    }
}

impl Weight for u128 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn add(self, o: Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn mul(self, o: Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn is_zero(self) -> bool {
        self == 0
    }
    fn renormalize(_: &mut [(u128, Self)]) -> f64 {
        0.0
    }
}

/// Row index after which each required column can no longer be reached.
fn closing_lists<W>(rows: &[Vec<(usize, W)>], n_cols: usize, required: &[usize]) -> Vec<Vec<usize>> {
    let mut last = vec![usize::MAX; n_cols];
    for (i, r) in rows.iter().enumerate() {
        for &(c, _) in r {
            last[c] = i;
        }
    }
    let mut closing = vec![Vec::new(); rows.len()];
    for &c in required {
        closing[last[c]].push(c);
    }
    closing
}

// ---------------------------------------------------------------------------
// backtracking

struct Dfs<'a, W> {
    rows: &'a [Vec<(usize, W)>],
    closing: Vec<Vec<usize>>,
    used: Vec<bool>,
    nodes: u64,
    budget: u64,
}

enum DfsError {
    Budget,
    Overflow,
}

impl<W: Weight> Dfs<'_, W> {
    fn run(&mut self, i: usize) -> std::result::Result<W, DfsError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(DfsError::Budget);
        }
        if i == self.rows.len() {
            return Ok(W::one());
        }
        let mut acc = W::zero();
        for k in 0..self.rows[i].len() {
            let (c, w) = self.rows[i][k];
            if self.used[c] {
                continue;
            }
            self.used[c] = true;
            if self.closing[i].iter().all(|&r| self.used[r]) {
                let sub = self.run(i + 1)?;
                if !sub.is_zero() {
                    let t = w.mul(sub).ok_or(DfsError::Overflow)?;
                    acc = acc.add(t).ok_or(DfsError::Overflow)?;
                }
            }
            self.used[c] = false;
        }
        Ok(acc)
    }
}

fn dfs<W: Weight>(
    rows: &[Vec<(usize, W)>],
    n_cols: usize,
    required: &[usize],
    budget: u64,
) -> std::result::Result<W, DfsError> {
    let mut s = Dfs {
        rows,
        closing: closing_lists(rows, n_cols, required),
        used: vec![false; n_cols],
        nodes: 0,
        budget,
    };
    s.run(0)
}

fn backtrack(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<LogValue> {
    let budget_err = || Error::Capacity(format!("backtracking exceeded {} nodes", opts.budget));
    if let Some(rows) = b.integral() {
        match dfs(&rows, b.n_cols(), b.required(), opts.budget) {
            Ok(v) => return Ok(LogValue::from_exact(v)),
            Err(DfsError::Budget) => return Err(budget_err()),
            Err(DfsError::Overflow) => {}
        }
    }
    let (rows, offset) = b.scaled();
    match dfs(&rows, b.n_cols(), b.required(), opts.budget) {
        Ok(v) if v > 0.0 => Ok(LogValue::from_log(v.ln() + offset)),
        Ok(_) => Ok(LogValue::zero()),
        Err(_) => Err(budget_err()),
    }
}

// ---------------------------------------------------------------------------
// profile dynamic programming

/// Slot assignment for live columns: a column is live from the first row that
/// can reach it to the last one.
struct ProfilePlan {
    slot: Vec<usize>,
    /// Columns whose last row is `i`.
    ending: Vec<u128>,
    /// Required columns among `ending[i]`.
    ending_required: Vec<u128>,
    width: usize,
}

impl ProfilePlan {
    fn new(b: &WeightedBipartite) -> Self {
        let m = b.rows();
        let n = b.n_cols();
        let mut first = vec![usize::MAX; n];
        let mut last = vec![0usize; n];
        for (i, r) in b.rows.iter().enumerate() {
            for &(c, _) in r {
                first[c] = first[c].min(i);
                last[c] = last[c].max(i);
            }
        }
        let mut starting = vec![Vec::new(); m];
        let mut ending_cols = vec![Vec::new(); m];
        for c in 0..n {
            if first[c] != usize::MAX {
                starting[first[c]].push(c);
                ending_cols[last[c]].push(c);
            }
        }
        let mut free: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
        let mut next = 0usize;
        let mut slot = vec![usize::MAX; n];
        let mut width = 0;
        let mut ending = vec![0u128; m];
        let mut ending_required = vec![0u128; m];
        let mut is_required = vec![false; n];
        for &c in &b.required {
            is_required[c] = true;
        }
        for i in 0..m {
            for &c in &starting[i] {
                let s = match free.pop_first() {
                    Some(s) => s,
                    None => {
                        next += 1;
                        next - 1
                    }
                };
                slot[c] = s;
            }
            width = width.max(next);
            for &c in &ending_cols[i] {
                free.insert(slot[c]);
                if slot[c] < MAX_PROFILE_WIDTH {
                    ending[i] |= 1u128 << slot[c];
                    if is_required[c] {
                        ending_required[i] |= 1u128 << slot[c];
                    }
                }
            }
        }
        ProfilePlan {
            slot,
            ending,
            ending_required,
            width,
        }
    }
}

fn profile(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<LogValue> {
    let plan = ProfilePlan::new(b);
    if plan.width > MAX_PROFILE_WIDTH {
        return Err(Error::Capacity(format!(
            "profile width {} exceeds {MAX_PROFILE_WIDTH}",
            plan.width
        )));
    }
    if let Some(rows) = b.integral() {
        match profile_run(&rows, &plan, opts) {
            Ok(Some((v, _))) => return Ok(LogValue::from_exact(v)),
            Ok(None) => {}
            Err(e) => return Err(e),
        }
    }
    let (rows, offset) = b.scaled();
    match profile_run(&rows, &plan, opts)? {
        Some((v, log)) if v > 0.0 => Ok(LogValue::from_log(v.ln() + log + offset)),
        _ => Ok(LogValue::zero()),
    }
}

/// Runs the layer recursion; `Ok(None)` signals integer overflow.
fn profile_run<W: Weight>(
    rows: &[Vec<(usize, W)>],
    plan: &ProfilePlan,
    opts: &PermanentOptions,
) -> Result<Option<(W, f64)>> {
    let mut states: Vec<(u128, W)> = vec![(0, W::one())];
    let mut log = 0.0;
    let mut work = 0u64;
    for (i, row) in rows.iter().enumerate() {
        work = work.saturating_add((states.len() * row.len()) as u64);
        if states.len() * row.len() > MAX_PROFILE_ENTRIES {
            return Err(Error::Capacity(format!(
                "profile layer would hold more than {MAX_PROFILE_ENTRIES} entries"
            )));
        }
        if work > opts.budget {
            return Err(Error::Capacity(format!(
                "profile recursion exceeded {} transitions",
                opts.budget
            )));
        }
        let end = plan.ending[i];
        let end_req = plan.ending_required[i];
        let n_chunks = states.len().div_ceil(PROFILE_CHUNK);
        let parts = map_indexed(n_chunks, opts.exec, |k| -> Option<Vec<(u128, W)>> {
            let lo = k * PROFILE_CHUNK;
            let hi = (lo + PROFILE_CHUNK).min(states.len());
            let mut out = Vec::with_capacity((hi - lo) * row.len());
            for &(mask, v) in &states[lo..hi] {
                for &(c, w) in row {
                    let bit = 1u128 << plan.slot[c];
                    if mask & bit != 0 {
                        continue;
                    }
                    let nm = mask | bit;
                    if nm & end_req != end_req {
                        continue;
                    }
                    out.push((nm & !end, v.mul(w)?));
                }
            }
            Some(out)
        });
        let mut next: Vec<(u128, W)> = Vec::new();
        for p in parts {
            match p {
                Some(v) => next.extend(v),
                None => return Ok(None),
            }
        }
        sort_by_mask(&mut next, opts.exec);
        let mut merged: Vec<(u128, W)> = Vec::with_capacity(next.len());
        for (k, v) in next {
            match merged.last_mut() {
                Some(last) if last.0 == k => match last.1.add(v) {
                    Some(s) => last.1 = s,
                    None => return Ok(None),
                },
                _ => merged.push((k, v)),
            }
        }
        if merged.is_empty() {
            return Ok(Some((W::zero(), 0.0)));
        }
        log += W::renormalize(&mut merged);
        states = merged;
    }
    debug_assert!(states.len() == 1 && states[0].0 == 0);
    Ok(Some((states[0].1, log)))
}

/// Stable sort, so equal masks keep the deterministic generation order.
fn sort_by_mask<W: Send>(v: &mut [(u128, W)], exec: Exec) {
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel if v.len() > 1 << 16 => {
            use rayon::slice::ParallelSliceMut;
            v.par_sort_by_key(|e| e.0);
        }
        _ => v.sort_by_key(|e| e.0),
    }
}

// ---------------------------------------------------------------------------
// inclusion-exclusion over required columns

fn inclusion_exclusion(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<LogValue> {
    let r = b.required().to_vec();
    if r.len() > MAX_IE_REQUIRED {
        return Err(Error::Capacity(format!(
            "inclusion-exclusion over {} required columns exceeds {MAX_IE_REQUIRED}",
            r.len()
        )));
    }
    let base = b.with_required(Vec::new())?;
    let subsets = 1usize << r.len();
    let drop_of = |s: usize| -> Vec<usize> {
        (0..r.len()).filter(|&k| s >> k & 1 == 1).map(|k| r[k]).collect()
    };
    let inner_opts = PermanentOptions {
        exec: Exec::Sequential,
        ..*opts
    };

    // exact integer path
    if base.integral().is_some() {
        let terms = map_indexed(subsets, opts.exec, |s| -> Result<Option<i128>> {
            let sub = base.without_columns(&drop_of(s));
            let v = iper_exact_inner(&sub, &inner_opts)?;
            Ok(v.map(|v| if s.count_ones() % 2 == 1 { -v } else { v }))
        });
        let mut vals = Vec::with_capacity(subsets);
        for t in terms {
            match t? {
                Some(v) => vals.push(v),
                None => {
                    vals.clear();
                    break;
                }
            }
        }
        if vals.len() == subsets {
            let total = tree_reduce(&vals, 0i128, &|a, b| a + b);
            return Ok(exact_to_value(total));
        }
    }

    let (rows, offset) = base.scaled();
    let scaled = WeightedBipartite {
        n_cols: base.n_cols,
        rows,
        required: Vec::new(),
    };
    let terms = map_indexed(subsets, opts.exec, |s| -> Result<Dd> {
        let sub = scaled.without_columns(&drop_of(s));
        let v = iper_dd_inner(&sub, &inner_opts)?;
        Ok(if s.count_ones() % 2 == 1 {
            Dd { hi: -v.hi, lo: -v.lo }
        } else {
            v
        })
    });
    let vals = terms.into_iter().collect::<Result<Vec<_>>>()?;
    let total = tree_reduce(&vals, Dd::ZERO, &|a, b| a.add(b));
    // cancellation below the working precision of the terms means zero
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.hi.abs()));
    if total.hi <= scale * 1e-28 {
        return Ok(LogValue::zero());
    }
    Ok(dd_to_value(total, offset))
}

fn iper_exact_inner(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<Option<i128>> {
    if b.trivially_zero() {
        return Ok(Some(0));
    }
    if b.n_cols() <= 20 {
        if let Some(v) = ryser_exact(b, Exec::Sequential) {
            return Ok(Some(v));
        }
    }
    let plan = ProfilePlan::new(b);
    if plan.width > MAX_PROFILE_WIDTH {
        return Err(Error::Capacity("profile width too large".into()));
    }
    let rows = b.integral().expect("integral input");
    Ok(profile_run(&rows, &plan, opts)?.and_then(|(v, _)| i128::try_from(v).ok()))
}

fn iper_dd_inner(b: &WeightedBipartite, opts: &PermanentOptions) -> Result<Dd> {
    if b.trivially_zero() {
        return Ok(Dd::ZERO);
    }
    if b.n_cols() <= 20 {
        return Ok(ryser_dd(&b.rows, b.n_cols(), &[], Exec::Sequential));
    }
    let v = profile(b, opts)?;
    Ok(Dd::from_f64(v.linear()))
}

// ---------------------------------------------------------------------------
// signed sums and determinants

/// `sum_{x in X_{A,F,F'}} sgn(psi o phi) prod f_{x_t}` with `A = supp(f)` and
/// `psi` the increasing bijection `F' -> F`.
pub fn signed_target_sum(f: &GroupRingElement, window: &Window, image: &Window) -> Result<f64> {
    let a = f.support()?;
    let space = PatternSpace::new(&a, window)?;
    let w: Vec<f64> = a.iter().map(|p| f.coef(p)).collect();
    let mut acc = CompensatedSum::default();
    for x in space.with_image(image)? {
        let prod: f64 = x.choices.iter().map(|&k| w[k]).product();
        acc.add(f64::from(x.sign()) * prod);
    }
    Ok(acc.value())
}

/// As [`signed_target_sum`] with a caller-chosen bijection `psi` (see
/// [`PatternSpace::sign_with`]).
pub fn signed_target_sum_with(
    f: &GroupRingElement,
    window: &Window,
    image: &Window,
    psi: &[usize],
) -> Result<f64> {
    let a = f.support()?;
    let space = PatternSpace::new(&a, window)?;
    let w: Vec<f64> = a.iter().map(|p| f.coef(p)).collect();
    let mut acc = CompensatedSum::default();
    for x in space.with_image(image)? {
        let prod: f64 = x.choices.iter().map(|&k| w[k]).product();
        acc.add(f64::from(space.sign_with(&x, image, psi)?) * prod);
    }
    Ok(acc.value())
}

/// The section `M_{s,t} = (ff*)_{s - t}` for `s, t in -F`.
pub fn ffstar_section(f: &GroupRingElement, window: &Window) -> DMatrix<f64> {
    let g = f.convolve(&f.adjoint());
    let idx = window.negate();
    let n = idx.len();
    DMatrix::from_fn(n, n, |i, j| g.coef(&(&idx.points()[i] - &idx.points()[j])))
}

/// `det M` for the section of `ff*` on `-F`.
pub fn finite_det_ffstar(f: &GroupRingElement, window: &Window) -> f64 {
    ffstar_section(f, window).lu().determinant()
}

/// `log det M` from the LU factors; `-inf` when the section is singular.
pub fn log_det_ffstar(f: &GroupRingElement, window: &Window) -> f64 {
    let m = ffstar_section(f, window);
    let n = m.nrows();
    if let Some(ch) = m.clone().cholesky() {
        let l = ch.l_dirty();
        return 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    }
    let lu = m.lu();
    let u = lu.u();
    let mut sum = 0.0;
    let mut neg = lu.p().determinant::<f64>() < 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        neg ^= d < 0.0;
        sum += d.abs().ln();
    }
    if neg {
        f64::NEG_INFINITY
    } else {
        sum
    }
}

/// Both sides of the finite identity
/// `det M = sum_{F' in Theta^i(A,F)} |signed_target_sum(f, F, F')|^2`.
///
/// The right side groups the injective patterns by image; images carrying no
/// pattern contribute zero.
pub fn det_in_ia_check(f: &GroupRingElement, window: &Window) -> Result<(f64, f64)> {
    let lhs = finite_det_ffstar(f, window);
    let a = f.support()?;
    let space = PatternSpace::new(&a, window)?;
    if space.num_cols() > 128 {
        return Err(Error::Capacity(format!(
            "{} target columns exceed the 128-bit image key",
            space.num_cols()
        )));
    }
    let w: Vec<f64> = a.iter().map(|p| f.coef(p)).collect();
    let mut groups: FxHashMap<u128, CompensatedSum> = FxHashMap::default();
    for x in space.injective() {
        let prod: f64 = x.choices.iter().map(|&k| w[k]).product();
        groups
            .entry(x.image_mask())
            .or_default()
            .add(f64::from(x.sign()) * prod);
    }
    let mut keyed: Vec<(u128, f64)> = groups.into_iter().map(|(k, s)| (k, s.value())).collect();
    keyed.sort_unstable_by_key(|e| e.0);
    let mut rhs = CompensatedSum::default();
    for (_, v) in keyed {
        rhs.add(v * v);
    }
    Ok((lhs, rhs.value()))
}

/// The doubly stochastic matrix `C_{FA,f} = sum_s f_s P_{sigma_s}` on `FA`.
///
/// `sigma_s` is `t -> t + s` on `F`, completed to a bijection of `FA` by
/// pairing the remaining sources with the remaining targets in lexicographic
/// order. Returns the matrix and the window `FA` indexing it.
pub fn doubly_stochastic_extension(
    f: &GroupRingElement,
    alphabet: &Window,
    window: &Window,
) -> Result<(DMatrix<f64>, Window)> {
    check_weight(f, alphabet)?;
    if !alphabet.contains(&LatticePoint::origin(alphabet.dim())) {
        return Err(Error::InvalidParameters(
            "the alphabet must contain the origin so that F lies in FA".into(),
        ));
    }
    let norm = f.norm1();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(norm));
    }
    let fa = window.dilate(alphabet);
    let n = fa.len();
    let mut c = DMatrix::zeros(n, n);
    for (s, w) in f.terms() {
        let mut sigma = vec![usize::MAX; n];
        let mut hit = vec![false; n];
        for t in window.iter() {
            let src = fa.index_of(t).expect("F lies in FA");
            let dst = fa.index_of(&(t + s)).expect("t + s lies in FA");
            sigma[src] = dst;
            hit[dst] = true;
        }
        let free_targets: Vec<usize> = (0..n).filter(|&j| !hit[j]).collect();
        let free_sources: Vec<usize> = (0..n).filter(|&i| sigma[i] == usize::MAX).collect();
        for (&i, &j) in free_sources.iter().zip(&free_targets) {
            sigma[i] = j;
        }
        for (i, &j) in sigma.iter().enumerate() {
            c[(i, j)] += w;
        }
    }
    Ok((c, fa))
}

/// Bregman bound `prod_i (r_i!)^{1/r_i}` for a square 0-1 matrix.
pub fn bregman_bound(b: &WeightedBipartite) -> Result<f64> {
    if b.rows() != b.n_cols() {
        return Err(Error::InvalidParameters("Bregman bound needs a square matrix".into()));
    }
    if b.rows.iter().flatten().any(|e| e.1 != 1.0) {
        return Err(Error::InvalidParameters("Bregman bound needs a 0-1 matrix".into()));
    }
    let mut log = 0.0;
    for r in &b.rows {
        let k = r.len();
        if k == 0 {
            return Ok(0.0);
        }
        log += ln_factorial(k) / k as f64;
    }
    Ok(log.exp())
}

/// `n! / n^n`, the minimum permanent of an `n x n` doubly stochastic matrix.
pub fn vdw_bound(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    (ln_factorial(n) - n as f64 * (n as f64).ln()).exp()
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
