//! Lattice arithmetic on `Z^d`: points, finite windows, real group-ring
//! elements and projections onto finite tori `Z^d / (n_1 Z x .. x n_d Z)`.
//!
//! Points compare lexicographically; this is the canonical total order used for
//! windows, enumeration order and the order isomorphisms behind permutation signs.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut c = vec![0; dim];
        c[i] = 1;
        LatticePoint(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn scaled(&self, k: i64) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| c * k).collect())
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl From<i64> for LatticePoint {
    fn from(v: i64) -> Self {
        LatticePoint(vec![v])
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

fn check_dim(expected: usize, p: &LatticePoint) -> Result<()> {
    if p.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: p.dim(),
        });
    }
    Ok(())
}

/// A nonempty finite set of lattice points, stored sorted without duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    dim: usize,
    points: Vec<LatticePoint>,
}

impl Window {
    /// Builds a window from an explicit list. Duplicates are rejected.
    pub fn from_points(points: Vec<LatticePoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyWindow)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for p in &points {
            check_dim(dim, p)?;
        }
        let mut points = points;
        points.sort();
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint(w[0].coords().to_vec()));
        }
        Ok(Window { dim, points })
    }

    /// Convenience constructor for `Z`.
    pub fn from_ints(values: &[i64]) -> Result<Self> {
        Self::from_points(values.iter().map(|&v| LatticePoint::from(v)).collect())
    }

    /// Sorts and deduplicates; for internally generated point sets.
    fn from_unsorted(dim: usize, mut points: Vec<LatticePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyWindow);
        }
        points.sort();
        points.dedup();
        Ok(Window { dim, points })
    }

    /// The box `origin + [0, l_1) x .. x [0, l_d)`.
    pub fn boxed(origin: &[i64], lengths: &[usize]) -> Result<Self> {
        if origin.len() != lengths.len() {
            return Err(Error::DimensionMismatch {
                expected: origin.len(),
                found: lengths.len(),
            });
        }
        if origin.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if lengths.contains(&0) {
            return Err(Error::EmptyWindow);
        }
        let dim = origin.len();
        let total: usize = lengths.iter().product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        // odometer with the last coordinate fastest, which is lexicographic order
        for _ in 0..total {
            points.push(LatticePoint(
                origin.iter().zip(&idx).map(|(o, i)| o + *i as i64).collect(),
            ));
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < lengths[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Window { dim, points })
    }

    /// The cube `[0, n)^d`.
    pub fn cube(dim: usize, n: usize) -> Result<Self> {
        Self::boxed(&vec![0; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LatticePoint> {
        self.points.iter()
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.index_of(p).is_some()
    }

    pub fn is_subset(&self, other: &Window) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn translate(&self, s: &LatticePoint) -> Window {
        // translation preserves lexicographic order
        Window {
            dim: self.dim,
            points: self.points.iter().map(|p| p + s).collect(),
        }
    }

    /// The reflected window `-F`.
    pub fn negate(&self) -> Window {
        let mut points: Vec<_> = self.points.iter().map(|p| -p).collect();
        points.reverse();
        Window {
            dim: self.dim,
            points,
        }
    }

    /// The sumset `F + A = {t + a}`.
    pub fn dilate(&self, a: &Window) -> Window {
        assert_eq!(self.dim, a.dim, "dimension mismatch in dilate");
        let mut pts = Vec::with_capacity(self.len() * a.len());
        for t in &self.points {
            for s in &a.points {
                pts.push(t + s);
            }
        }
        Window::from_unsorted(self.dim, pts).expect("sumset of nonempty sets")
    }

    /// `{t : t - a in F for every a in A}`, the positions every admissible
    /// pattern on `F` must hit. May be empty.
    pub fn interior(&self, a: &Window) -> Vec<LatticePoint> {
        assert_eq!(self.dim, a.dim, "dimension mismatch in interior");
        let a0 = &a.points[0];
        self.points
            .iter()
            .map(|p| p + a0)
            .filter(|t| a.points.iter().all(|s| self.contains(&(t - s))))
            .collect()
    }

    pub fn union(&self, other: &Window) -> Window {
        assert_eq!(self.dim, other.dim);
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        Window::from_unsorted(self.dim, pts).expect("nonempty")
    }

    /// Points of `self` that are not in `other`.
    pub fn difference(&self, other: &Window) -> Vec<LatticePoint> {
        self.points
            .iter()
            .filter(|p| !other.contains(p))
            .cloned()
            .collect()
    }

    /// Folner defect `|F K \ F| / |F|`.
    pub fn folner_defect(&self, k: &Window) -> f64 {
        let fk = self.dilate(k);
        fk.difference(self).len() as f64 / self.len() as f64
    }

    pub fn to_spec(&self) -> WindowSpec {
        WindowSpec::Points {
            points: self.points.iter().map(|p| p.coords().to_vec()).collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: WindowSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.build()
    }
}

impl<'a> IntoIterator for &'a Window {
    type Item = &'a LatticePoint;
    type IntoIter = std::slice::Iter<'a, LatticePoint>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Finitely supported real function on `Z^d`, written `f = sum f_s s`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRingElement {
    dim: usize,
    terms: BTreeMap<LatticePoint, f64>,
}

impl GroupRingElement {
    pub fn zero(dim: usize) -> Self {
        GroupRingElement {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// Sums repeated points and drops zero coefficients.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticePoint, f64)>,
    {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut out = GroupRingElement::zero(dim);
        for (p, c) in terms {
            check_dim(dim, &p)?;
            if !c.is_finite() {
                return Err(Error::InvalidParameters(format!(
                    "non-finite coefficient at {p}"
                )));
            }
            *out.terms.entry(p).or_insert(0.0) += c;
        }
        out.terms.retain(|_, c| *c != 0.0);
        Ok(out)
    }

    /// One-variable Laurent polynomial `sum c_k u^k` from `(k, c_k)` pairs.
    pub fn laurent(terms: &[(i64, f64)]) -> Self {
        Self::from_terms(1, terms.iter().map(|&(k, c)| (LatticePoint::from(k), c)))
            .expect("one-dimensional terms")
    }

    pub fn monomial(p: LatticePoint, coef: f64) -> Self {
        let dim = p.dim();
        Self::from_terms(dim, [(p, coef)]).expect("valid monomial")
    }

    pub fn delta(p: LatticePoint) -> Self {
        Self::monomial(p, 1.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(LatticePoint::origin(dim), c)
    }

    /// The indicator `1_A`.
    pub fn indicator(a: &Window) -> Self {
        GroupRingElement {
            dim: a.dim(),
            terms: a.iter().map(|p| (p.clone(), 1.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coef(&self, p: &LatticePoint) -> f64 {
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LatticePoint, f64)> {
        self.terms.iter().map(|(p, c)| (p, *c))
    }

    pub fn support(&self) -> Result<Window> {
        if self.is_zero() {
            return Err(Error::EmptySupport);
        }
        Ok(Window {
            dim: self.dim,
            points: self.terms.keys().cloned().collect(),
        })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.terms.values().all(|&c| c >= 0.0)
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.terms.iter().find(|(_, &c)| c < 0.0) {
            Some((p, &c)) => Err(Error::NegativeCoefficient {
                point: p.coords().to_vec(),
                coef: c,
            }),
            None => Ok(()),
        }
    }

    /// Whether every coefficient is `1`.
    pub fn is_indicator(&self) -> bool {
        !self.is_zero() && self.terms.values().all(|&c| c == 1.0)
    }

    /// `f* = sum f_s s^{-1}`.
    pub fn adjoint(&self) -> Self {
        GroupRingElement {
            dim: self.dim,
            terms: self.terms.iter().map(|(p, c)| (-p, *c)).collect(),
        }
    }

    /// Group-ring product `fg = sum f_s g_t (s + t)`.
    pub fn convolve(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in convolve");
        let mut terms: BTreeMap<LatticePoint, f64> = BTreeMap::new();
        for (s, a) in &self.terms {
            for (t, b) in &other.terms {
                *terms.entry(s + t).or_insert(0.0) += a * b;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        GroupRingElement {
            dim: self.dim,
            terms,
        }
    }

    /// Coefficientwise product `(f . g)_s = f_s g_s`.
    pub fn pointwise(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in pointwise");
        let terms = self
            .terms
            .iter()
            .filter_map(|(p, a)| {
                let v = a * other.coef(p);
                (v != 0.0).then(|| (p.clone(), v))
            })
            .collect();
        GroupRingElement {
            dim: self.dim,
            terms,
        }
    }

    /// Right translate `fs`; on an abelian group this equals `sf`.
    pub fn translate(&self, s: &LatticePoint) -> Self {
        GroupRingElement {
            dim: self.dim,
            terms: self.terms.iter().map(|(p, c)| (p + s, *c)).collect(),
        }
    }

    /// `|f| = sum |f_s| s`.
    pub fn abs(&self) -> Self {
        GroupRingElement {
            dim: self.dim,
            terms: self.terms.iter().map(|(p, c)| (p.clone(), c.abs())).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return GroupRingElement::zero(self.dim);
        }
        GroupRingElement {
            dim: self.dim,
            terms: self.terms.iter().map(|(p, c)| (p.clone(), c * k)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        for (p, c) in &other.terms {
            *terms.entry(p.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        GroupRingElement {
            dim: self.dim,
            terms,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn norm1(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Smallest positive coefficient.
    pub fn min_positive(&self) -> Option<f64> {
        self.terms
            .values()
            .copied()
            .filter(|&c| c > 0.0)
            .fold(None, |m, c| Some(m.map_or(c, |m: f64| m.min(c))))
    }

    /// Componentwise `f <= g`.
    pub fn le(&self, other: &Self) -> bool {
        let keys = self.terms.keys().chain(other.terms.keys());
        keys.into_iter().all(|p| self.coef(p) <= other.coef(p))
    }

    /// Lexicographically smallest support point.
    pub fn min_point(&self) -> Option<&LatticePoint> {
        self.terms.keys().next()
    }

    /// Pushforward onto the torus: a dense row-major array over
    /// `Z/n_1 x .. x Z/n_d` holding fibre sums.
    pub fn project(&self, q: &TorusQuotient) -> Result<Vec<f64>> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        let mut out = vec![0.0; q.order()];
        for (p, c) in &self.terms {
            out[q.index_of(p)] += c;
        }
        Ok(out)
    }

    pub fn to_spec(&self) -> ElementSpec {
        ElementSpec {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| TermSpec {
                    exp: p.coords().to_vec(),
                    coef: *c,
                })
                .collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ElementSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("serializable")
    }
}

impl fmt::Display for GroupRingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*{p}")?;
        }
        Ok(())
    }
}

/// The quotient `Z^d / (n_1 Z x .. x n_d Z)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TorusQuotient {
    moduli: Vec<usize>,
}

impl TorusQuotient {
    pub fn new(moduli: Vec<usize>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some(&m) = moduli.iter().find(|&&m| m == 0) {
            return Err(Error::InvalidModulus(m as i64));
        }
        Ok(TorusQuotient { moduli })
    }

    /// Parses `"4x4"` or `"7"`.
    pub fn parse(s: &str) -> Result<Self> {
        let moduli = s
            .trim()
            .split('x')
            .map(|t| {
                let v: i64 = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad torus modulus {t:?}")))?;
                if v < 1 {
                    return Err(Error::InvalidModulus(v));
                }
                Ok(v as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(moduli)
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn moduli(&self) -> &[usize] {
        &self.moduli
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().product()
    }

    /// Row-major index of the coset of `p`.
    pub fn index_of(&self, p: &LatticePoint) -> usize {
        debug_assert_eq!(p.dim(), self.dim());
        let mut idx = 0usize;
        for (c, &n) in p.coords().iter().zip(&self.moduli) {
            idx = idx * n + c.rem_euclid(n as i64) as usize;
        }
        idx
    }

    /// Canonical representative in `[0, n_1) x .. x [0, n_d)`.
    pub fn representative(&self, mut idx: usize) -> LatticePoint {
        let mut coords = vec![0i64; self.dim()];
        for k in (0..self.dim()).rev() {
            coords[k] = (idx % self.moduli[k]) as i64;
            idx /= self.moduli[k];
        }
        LatticePoint(coords)
    }

    /// Whether `p` lies in the subgroup `n_1 Z x .. x n_d Z`.
    pub fn is_trivial(&self, p: &LatticePoint) -> bool {
        p.coords()
            .iter()
            .zip(&self.moduli)
            .all(|(c, &n)| c.rem_euclid(n as i64) == 0)
    }

    pub fn label(&self) -> String {
        self.moduli
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }
}

/// JSON form of an element: `{"dim": d, "terms": [{"exp": [..], "coef": c}, ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ElementSpec {
    pub dim: usize,
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermSpec {
    pub exp: Vec<i64>,
    pub coef: f64,
}

impl ElementSpec {
    pub fn build(&self) -> Result<GroupRingElement> {
        GroupRingElement::from_terms(
            self.dim,
            self.terms
                .iter()
                .map(|t| (LatticePoint::new(t.exp.clone()), t.coef)),
        )
    }
}

/// JSON form of a window: `{"box": {"origin": [..], "lengths": [..]}}` or
/// `{"points": [[..], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum WindowSpec {
    Box {
        #[serde(rename = "box")]
        bounds: BoxSpec,
    },
    Points {
        points: Vec<Vec<i64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoxSpec {
    pub origin: Vec<i64>,
    pub lengths: Vec<usize>,
}

impl WindowSpec {
    pub fn build(&self) -> Result<Window> {
        match self {
            WindowSpec::Box { bounds } => Window::boxed(&bounds.origin, &bounds.lengths),
            WindowSpec::Points { points } => {
                Window::from_points(points.iter().cloned().map(LatticePoint::new).collect())
            }
        }
    }
}
