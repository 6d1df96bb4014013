//! Fuglede-Kadison determinants on `Z^d`: logarithmic Mahler measure by
//! quadrature, finite sections of `ff*`, and the worked example families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::entropy::{
    bound_lower_formula, cube_tori, torus_estimates, upper_estimates, TransferMatrix,
    WindowSchedule,
};
use crate::error::{Error, Result};
use crate::group_ring::{GroupRingElement, LatticePoint, Window};
use crate::par::{map_indexed, map_slice, tree_sum, Exec};
use crate::patterns::PatternSpace;
use crate::permanent::{iper_af, log_det_ffstar, PermanentOptions};

const CHUNK: usize = 4096;
const MAX_POINTS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureConfig {
    /// Points per dimension on the coarsest grid.
    pub grid: usize,
    /// Number of doublings after the coarsest grid; at least 2.
    pub levels: usize,
    /// Smallest floor in the sweep `eps * 1e4, eps * 1e2, eps`.
    pub eps: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            grid: 64,
            levels: 2,
            eps: 1e-12,
            exec: Exec::default(),
        }
    }
}

impl QuadratureConfig {
    pub fn new(grid: usize, levels: usize, eps: f64) -> Result<Self> {
        let cfg = QuadratureConfig {
            grid,
            levels,
            eps,
            exec: Exec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 8 {
            return Err(Error::InvalidParameters(format!("grid {} < 8", self.grid)));
        }
        if self.levels < 2 {
            return Err(Error::InvalidParameters(format!(
                "need at least 2 refinement levels, got {}",
                self.levels
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 1e-6) {
            return Err(Error::InvalidParameters(format!(
                "eps {} outside (0, 1e-6]",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn eps_sweep(&self) -> [f64; 3] {
        [self.eps * 1e4, self.eps * 1e2, self.eps]
    }

    fn finest(&self) -> usize {
        self.grid << self.levels
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MahlerResult {
    pub value: f64,
    pub error: f64,
    /// False when the last refinement did not shrink the difference.
    pub converged: bool,
    /// Estimated convergence order used for extrapolation.
    pub order: f64,
}

/// Midpoint rule for `integral over [0,1)^dim of log max(g, eps)` at each
/// floor of the sweep, on an `n^dim` grid.
fn midpoint_logs<G>(dim: usize, n: usize, eps: &[f64; 3], exec: Exec, g: &G) -> [f64; 3]
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let total = n.pow(dim as u32);
    let chunks = total.div_ceil(CHUNK);
    let parts = map_indexed(chunks, exec, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(total);
        let mut theta = vec![0.0; dim];
        let mut vals: [Vec<f64>; 3] = Default::default();
        for v in &mut vals {
            v.reserve(hi - lo);
        }
        for idx in lo..hi {
            let mut r = idx;
            for t in theta.iter_mut().rev() {
                *t = ((r % n) as f64 + 0.5) / n as f64;
                r /= n;
            }
            let x = g(&theta);
            for (v, &e) in vals.iter_mut().zip(eps) {
                v.push(x.max(e).ln());
            }
        }
        [tree_sum(&vals[0]), tree_sum(&vals[1]), tree_sum(&vals[2])]
    });
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let col: Vec<f64> = parts.iter().map(|p| p[k]).collect();
        *o = tree_sum(&col) / total as f64;
    }
    out
}

fn richardson(i1: f64, i2: f64, i4: f64) -> (f64, f64, f64, bool) {
    let d1 = i2 - i1;
    let d2 = i4 - i2;
    let noise = 1e-13 * i4.abs().max(1.0);
    if d2.abs() <= noise {
        return (i4, d2.abs(), f64::INFINITY, true);
    }
    let ratio = d1 / d2;
    let p = if ratio > 1.0 { ratio.log2().clamp(1.0, 4.0) } else { 1.0 };
    let corr = d2 / (2f64.powf(p) - 1.0);
    // below order 1 the refinements are pre-asymptotic; widen the estimate
    let err = if ratio < 2.0 { corr.abs() + d2.abs() } else { corr.abs() };
    (i4 + corr, err, p, d2.abs() < d1.abs())
}

/// `integral over [0,1)^dim of log g`, with `g >= 0`, by refined midpoint
/// rules, Richardson extrapolation and the floor sweep.
pub fn integrate_log<G>(dim: usize, g: G, cfg: &QuadratureConfig) -> Result<MahlerResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let finest = cfg
        .finest()
        .checked_pow(dim as u32)
        .filter(|&m| m <= MAX_POINTS)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "quadrature grid {}^{dim} exceeds {MAX_POINTS} points",
                cfg.finest()
            ))
        })?;
    debug_assert!(finest > 0);
    let eps = cfg.eps_sweep();
    let sizes = [cfg.grid << (cfg.levels - 2), cfg.grid << (cfg.levels - 1), cfg.finest()];
    let runs: Vec<[f64; 3]> = sizes
        .iter()
        .map(|&n| midpoint_logs(dim, n, &eps, cfg.exec, &g))
        .collect();
    let extrap: Vec<(f64, f64, f64, bool)> = (0..3)
        .map(|k| richardson(runs[0][k], runs[1][k], runs[2][k]))
        .collect();
    let (value, err, order, converged) = extrap[2];
    let spread = (extrap[2].0 - extrap[1].0).abs();
    Ok(MahlerResult {
        value,
        error: err + spread,
        converged,
        order,
    })
}

fn element_terms(f: &GroupRingElement) -> Vec<(Vec<f64>, f64)> {
    f.terms()
        .map(|(p, c)| (p.coords().iter().map(|&k| k as f64).collect(), c))
        .collect()
}

/// `|f(e^{2 pi i theta})|`.
pub fn eval_abs(terms: &[(Vec<f64>, f64)], theta: &[f64]) -> f64 {
    let mut z = Complex64::new(0.0, 0.0);
    for (p, c) in terms {
        let phase: f64 = p.iter().zip(theta).map(|(a, b)| a * b).sum();
        z += Complex64::from_polar(*c, 2.0 * PI * phase);
    }
    z.norm()
}

/// Logarithmic Mahler measure `integral log |f(e^{2 pi i theta})| d theta`.
pub fn mahler_measure(f: &GroupRingElement, cfg: &QuadratureConfig) -> Result<MahlerResult> {
    if f.is_zero() {
        return Err(Error::EmptySupport);
    }
    if f.num_terms() == 1 {
        let c = f.terms().next().map(|t| t.1.abs()).unwrap_or(0.0);
        cfg.validate()?;
        return Ok(MahlerResult {
            value: c.ln(),
            error: 0.0,
            converged: true,
            order: f64::INFINITY,
        });
    }
    let terms = element_terms(f);
    integrate_log(f.dim(), |t| eval_abs(&terms, t), cfg)
}

/// Mahler measure on `Z` by Jensen's formula: `log |lead| + sum log |root|`
/// over roots outside the unit circle, with roots from the companion matrix.
pub fn jensen_mahler_1d(f: &GroupRingElement) -> Result<f64> {
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.dim(),
        });
    }
    let lo = f.min_point().ok_or(Error::EmptySupport)?.coords()[0];
    let hi = f.terms().map(|(p, _)| p.coords()[0]).max().unwrap_or(lo);
    let deg = (hi - lo) as usize;
    let mut c = vec![0.0; deg + 1];
    for (p, v) in f.terms() {
        c[(p.coords()[0] - lo) as usize] = v;
    }
    let lead = c[deg];
    if deg == 0 {
        return Ok(lead.abs().ln());
    }
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[deg - 1 - j] / lead
        } else if j + 1 == i {
            1.0
        } else {
            0.0
        }
    });
    let roots = comp.complex_eigenvalues();
    let outside: f64 = roots
        .iter()
        .map(|r: &Complex64| r.norm())
        .filter(|&r| r > 1.0)
        .map(f64::ln)
        .sum();
    Ok(lead.abs().ln() + outside)
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionValue {
    pub window: String,
    pub size: usize,
    /// `log det` of the section of `ff*`; `-inf` when singular.
    pub log_det: f64,
    /// `log_det / (2|F|)`.
    pub value: f64,
}

/// Normalized finite sections `(1/(2|F|)) log det` of `ff*` along a schedule.
pub fn fk_finite_sections(
    f: &GroupRingElement,
    schedule: &WindowSchedule,
    exec: Exec,
) -> Result<Vec<SectionValue>> {
    if f.is_zero() {
        return Err(Error::EmptySupport);
    }
    Ok(map_slice(schedule.windows(), exec, |(label, w)| {
        let log_det = log_det_ffstar(f, w);
        SectionValue {
            window: label.clone(),
            size: w.len(),
            log_det,
            value: log_det / (2.0 * w.len() as f64),
        }
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct PerVsDetRow {
    pub window: String,
    pub size: usize,
    /// `log iper_{A,F}(|f|)`.
    pub iper_log: f64,
    pub iper_normalized: f64,
    pub log_det: f64,
    pub section_value: f64,
    /// `det <= iper^2` up to `1e-9` relative.
    pub inequality_holds: bool,
}

/// Compares the injective permanent of `|f|` with the finite sections of
/// `ff*`, window by window.
pub fn per_vs_det_report(
    f: &GroupRingElement,
    schedule: &WindowSchedule,
    opts: &PermanentOptions,
) -> Result<Vec<PerVsDetRow>> {
    let g = f.abs();
    let a = g.support()?;
    let rows = map_slice(schedule.windows(), opts.exec, |(label, w)| -> Result<PerVsDetRow> {
        let iper = iper_af(&g, &a, w, opts)?;
        let log_det = log_det_ffstar(f, w);
        Ok(PerVsDetRow {
            window: label.clone(),
            size: w.len(),
            iper_log: iper.log,
            iper_normalized: iper.normalized(w.len()),
            log_det,
            section_value: log_det / (2.0 * w.len() as f64),
            inequality_holds: log_det <= 2.0 * iper.log + 1e-9,
        })
    });
    rows.into_iter().collect()
}

// ---------------------------------------------------------------------------
// example families

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    QuadZ2,
    Dimer,
    AffineZ2,
    TrinomialZ,
    ThreePointZ,
    FourPointZ,
}

impl FamilyId {
    pub const ALL: [FamilyId; 6] = [
        FamilyId::QuadZ2,
        FamilyId::Dimer,
        FamilyId::AffineZ2,
        FamilyId::TrinomialZ,
        FamilyId::ThreePointZ,
        FamilyId::FourPointZ,
    ];

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    fn spec(self) -> &'static FamilySpec {
        FAMILIES.iter().find(|s| s.id == self).expect("every family has a table entry")
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FAMILIES
            .iter()
            .find(|f| f.name == s)
            .map(|f| f.id)
            .ok_or_else(|| Error::Parse(format!("unknown family `{s}`")))
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent of a family term; `K(o)` is `K + o` on `Z`.
#[derive(Clone, Copy, Debug)]
enum Exp {
    Fixed(&'static [i64]),
    K(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Combine {
    /// All signed representatives have the same determinant.
    Equal,
    /// The permanent is the largest of the determinants.
    Max,
}

struct FamilySpec {
    id: FamilyId,
    name: &'static str,
    dim: usize,
    n_params: usize,
    /// Minimum `K`, for families with a variable exponent.
    min_k: Option<usize>,
    /// `(exponent, parameter index)`.
    terms: &'static [(Exp, usize)],
    /// Signs of the determinant-side representatives, one per term.
    reps: &'static [&'static [i8]],
    combine: Combine,
}

static FAMILIES: &[FamilySpec] = &[
    FamilySpec {
        id: FamilyId::QuadZ2,
        name: "quad-Z2",
        dim: 2,
        n_params: 4,
        min_k: None,
        terms: &[
            (Exp::Fixed(&[0, 0]), 0),
            (Exp::Fixed(&[1, 0]), 1),
            (Exp::Fixed(&[0, 1]), 2),
            (Exp::Fixed(&[1, 1]), 3),
        ],
        reps: &[&[1, -1, 1, 1], &[1, 1, 1, -1]],
        combine: Combine::Equal,
    },
    FamilySpec {
        id: FamilyId::Dimer,
        name: "dimer",
        dim: 2,
        n_params: 2,
        min_k: None,
        terms: &[
            (Exp::Fixed(&[-1, 0]), 0),
            (Exp::Fixed(&[0, 1]), 1),
            (Exp::Fixed(&[0, -1]), 1),
            (Exp::Fixed(&[1, 0]), 0),
        ],
        reps: &[&[1, 1, 1, -1], &[1, -1, 1, 1]],
        combine: Combine::Equal,
    },
    FamilySpec {
        id: FamilyId::AffineZ2,
        name: "affine-Z2",
        dim: 2,
        n_params: 3,
        min_k: None,
        terms: &[
            (Exp::Fixed(&[0, 0]), 0),
            (Exp::Fixed(&[1, 0]), 1),
            (Exp::Fixed(&[0, 1]), 2),
        ],
        reps: &[&[1, 1, 1]],
        combine: Combine::Equal,
    },
    FamilySpec {
        id: FamilyId::TrinomialZ,
        name: "trinomial-Z",
        dim: 1,
        n_params: 3,
        min_k: None,
        terms: &[(Exp::Fixed(&[2]), 0), (Exp::Fixed(&[1]), 1), (Exp::Fixed(&[0]), 2)],
        reps: &[&[1, 1, -1]],
        combine: Combine::Equal,
    },
    FamilySpec {
        id: FamilyId::ThreePointZ,
        name: "three-point-Z",
        dim: 1,
        n_params: 3,
        min_k: Some(2),
        terms: &[(Exp::K(0), 0), (Exp::K(-1), 1), (Exp::Fixed(&[0]), 2)],
        reps: &[&[1, 1, -1], &[1, 1, 1]],
        combine: Combine::Max,
    },
    FamilySpec {
        id: FamilyId::FourPointZ,
        name: "four-point-Z",
        dim: 1,
        n_params: 4,
        min_k: Some(3),
        terms: &[
            (Exp::K(0), 0),
            (Exp::K(-1), 1),
            (Exp::Fixed(&[1]), 2),
            (Exp::Fixed(&[0]), 3),
        ],
        reps: &[&[1, 1, 1, -1], &[1, 1, -1, 1]],
        combine: Combine::Max,
    },
];

/// A family together with validated parameters.
#[derive(Clone, Debug, Serialize)]
pub struct ExampleFamily {
    pub id: FamilyId,
    pub params: Vec<f64>,
    pub k: Option<usize>,
}

impl ExampleFamily {
    pub fn new(id: FamilyId, params: Vec<f64>, k: Option<usize>) -> Result<Self> {
        let spec = id.spec();
        if params.len() != spec.n_params {
            return Err(Error::InvalidParameters(format!(
                "{} takes {} parameters, got {}",
                spec.name,
                spec.n_params,
                params.len()
            )));
        }
        if let Some(p) = params.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidParameters(format!("parameter {p} is not positive")));
        }
        let k = match (spec.min_k, k) {
            (None, None) => None,
            (None, Some(_)) => {
                return Err(Error::InvalidParameters(format!("{} takes no K", spec.name)))
            }
            (Some(m), Some(k)) if k >= m => Some(k),
            (Some(m), _) => {
                return Err(Error::InvalidParameters(format!("{} needs K >= {m}", spec.name)))
            }
        };
        Ok(ExampleFamily { id, params, k })
    }

    pub fn dim(&self) -> usize {
        self.id.spec().dim
    }

    fn build(&self, signs: &[i8]) -> GroupRingElement {
        let spec = self.id.spec();
        let terms = spec.terms.iter().zip(signs).map(|(&(e, pi), &s)| {
            let p = match e {
                Exp::Fixed(c) => LatticePoint::new(c.to_vec()),
                Exp::K(o) => LatticePoint::new(vec![self.k.unwrap_or(0) as i64 + o]),
            };
            (p, f64::from(s) * self.params[pi])
        });
        GroupRingElement::from_terms(spec.dim, terms).expect("family terms are finite")
    }

    /// The nonnegative element `h` on the permanent side.
    pub fn permanent_element(&self) -> GroupRingElement {
        self.build(&vec![1; self.id.spec().terms.len()])
    }

    /// Signed representatives on the determinant side.
    pub fn determinant_elements(&self) -> Vec<GroupRingElement> {
        self.id.spec().reps.iter().map(|s| self.build(s)).collect()
    }

    pub fn label(&self) -> String {
        let mut s = self
            .params
            .iter()
            .map(|p| format!("{p}"))
            .collect::<Vec<_>>()
            .join(";");
        if let Some(k) = self.k {
            s.push_str(&format!(";K={k}"));
        }
        s
    }
}

/// Settings for the permanent side of a family evaluation.
#[derive(Clone, Debug)]
pub struct FamilyEvalConfig {
    pub quadrature: QuadratureConfig,
    /// Cube sides for the window upper bounds of `d = 2` families.
    pub windows: (usize, usize),
    /// Square torus sides for the heuristic lower values of `d = 2` families.
    pub tori: Option<(usize, usize)>,
    pub opts: PermanentOptions,
}

impl Default for FamilyEvalConfig {
    fn default() -> Self {
        FamilyEvalConfig {
            quadrature: QuadratureConfig::default(),
            windows: (6, 6),
            tori: None,
            opts: PermanentOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DetSide {
    pub element: String,
    pub mahler: MahlerResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyEvaluation {
    pub family: FamilyId,
    pub params: String,
    pub element: String,
    /// Certified lower value for `per(h)`.
    pub per_low: f64,
    /// Certified upper value for `per(h)`.
    pub per_high: f64,
    pub per_method: &'static str,
    /// Largest torus value; not certified for `d >= 2`.
    pub torus_max: Option<f64>,
    pub det_sides: Vec<DetSide>,
    pub det_value: f64,
    pub det_error: f64,
}

/// Evaluates both sides of a family identity.
pub fn example_family_eval(
    family: &ExampleFamily,
    cfg: &FamilyEvalConfig,
) -> Result<FamilyEvaluation> {
    let spec = family.id.spec();
    let h = family.permanent_element();
    let det_sides = family
        .determinant_elements()
        .into_iter()
        .map(|f| {
            Ok(DetSide {
                element: f.to_string(),
                mahler: mahler_measure(&f, &cfg.quadrature)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = match spec.combine {
        Combine::Equal => &det_sides[0],
        Combine::Max => det_sides
            .iter()
            .max_by(|a, b| a.mahler.value.total_cmp(&b.mahler.value))
            .expect("at least one representative"),
    };
    let (det_value, mut det_error) = (best.mahler.value, best.mahler.error);
    if spec.combine == Combine::Equal {
        for d in &det_sides[1..] {
            det_error = det_error.max((d.mahler.value - det_value).abs());
        }
    }

    let (per_low, per_high, per_method, torus_max) = if spec.dim == 1 {
        let r = TransferMatrix::new(&h)?.perron_root();
        (r.lower.ln(), r.upper.ln(), "transfer", None)
    } else {
        let a = h.support()?;
        let schedule = WindowSchedule::cubes(spec.dim, cfg.windows.0, cfg.windows.1)?;
        let rows = upper_estimates(&h, &a, &schedule, &cfg.opts)?;
        let high = rows
            .iter()
            .filter_map(|r| r.per_normalized)
            .fold(f64::INFINITY, f64::min);
        if !high.is_finite() {
            let msg = rows.iter().find_map(|r| r.capacity_error.clone());
            return Err(Error::Capacity(msg.unwrap_or_else(|| "no window computed".into())));
        }
        let own = mahler_measure(&h, &cfg.quadrature)?;
        let mut low = bound_lower_formula(&h);
        if own.converged {
            low = low.max(own.value - own.error);
        }
        let torus_max = match cfg.tori {
            Some((lo, hi)) => {
                let tori = cube_tori(spec.dim, lo, hi)?;
                let vals = torus_estimates(&h, &tori, &cfg.opts)?;
                vals.iter().map(|t| t.normalized).reduce(f64::max)
            }
            None => None,
        };
        (low, high, "window-bracket", torus_max)
    };
    Ok(FamilyEvaluation {
        family: family.id,
        params: family.label(),
        element: h.to_string(),
        per_low,
        per_high,
        per_method,
        torus_max,
        det_sides,
        det_value,
        det_error,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentativeGap {
    pub params: String,
    pub det_first: f64,
    pub det_second: f64,
    /// `det_first - det_second`.
    pub gap: f64,
    pub error: f64,
}

/// Determinants of both signed representatives over a parameter grid, for
/// the families where the permanent is their maximum.
pub fn representative_gap_sweep(
    families: &[ExampleFamily],
    cfg: &QuadratureConfig,
    exec: Exec,
) -> Result<Vec<RepresentativeGap>> {
    let rows = map_slice(families, exec, |fam| -> Result<RepresentativeGap> {
        let reps = fam.determinant_elements();
        if reps.len() != 2 {
            return Err(Error::InvalidParameters(format!(
                "{} has no pair of representatives",
                fam.id
            )));
        }
        let a = mahler_measure(&reps[0], cfg)?;
        let b = mahler_measure(&reps[1], cfg)?;
        Ok(RepresentativeGap {
            params: fam.label(),
            det_first: a.value,
            det_second: b.value,
            gap: a.value - b.value,
            error: a.error + b.error,
        })
    });
    rows.into_iter().collect()
}

/// Integrand forms of the dimer determinant, all equal to
/// `det_FK(a u1^-1 + b u2 + b u2^-1 - a u1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimerForm {
    /// `2a^2 + 2b^2 - 2a^2 cos 4 pi x + 2b^2 cos 4 pi y`
    Cos4Mixed,
    /// `2a^2 + 2b^2 - 2a^2 cos 4 pi x - 2b^2 cos 4 pi y`
    Cos4,
    /// `2a^2 + 2b^2 - 2a^2 cos 2 pi x - 2b^2 cos 2 pi y`
    Cos2,
    /// `2a^2 + 2b^2 - 2a^2 cos pi x - 2b^2 cos pi y`
    CosPi,
}

impl DimerForm {
    pub const ALL: [DimerForm; 4] = [
        DimerForm::Cos4Mixed,
        DimerForm::Cos4,
        DimerForm::Cos2,
        DimerForm::CosPi,
    ];
}

/// `(1/2) integral log(...)` over the unit square for a dimer integrand form.
pub fn dimer_integral(a: f64, b: f64, form: DimerForm, cfg: &QuadratureConfig) -> Result<MahlerResult> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameters("dimer weights must be positive".into()));
    }
    let (a2, b2) = (a * a, b * b);
    let (freq, sy) = match form {
        DimerForm::Cos4Mixed => (2.0, -1.0),
        DimerForm::Cos4 => (2.0, 1.0),
        DimerForm::Cos2 => (1.0, 1.0),
        DimerForm::CosPi => (0.5, 1.0),
    };
    let r = integrate_log(
        2,
        |t| {
            2.0 * a2 + 2.0 * b2
                - 2.0 * a2 * (2.0 * PI * freq * t[0]).cos()
                - sy * 2.0 * b2 * (2.0 * PI * freq * t[1]).cos()
        },
        cfg,
    )?;
    Ok(MahlerResult {
        value: 0.5 * r.value,
        error: 0.5 * r.error,
        ..r
    })
}

// ---------------------------------------------------------------------------
// sign probe

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignVerdict {
    Constant,
    NonConstant,
    Vacuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignProbe {
    pub image: Vec<LatticePoint>,
    pub patterns: usize,
    pub positive: usize,
    pub negative: usize,
    pub verdict: SignVerdict,
}

/// Signs of `sgn(psi o phi) prod f_{x_t}` over `X_{A,F,F'}` with
/// `A = supp(f)`.
pub fn constant_sign_probe(f: &GroupRingElement, window: &Window, image: &Window) -> Result<SignProbe> {
    let a = f.support()?;
    let space = PatternSpace::new(&a, window)?;
    probe_with(&space, f, image)
}

/// [`constant_sign_probe`] for every `F'` in `Theta(A, F)`.
pub fn sign_probe_all(f: &GroupRingElement, window: &Window) -> Result<Vec<SignProbe>> {
    let a = f.support()?;
    let space = PatternSpace::new(&a, window)?;
    space
        .theta(true)
        .map(|img| probe_with(&space, f, &img))
        .collect()
}

fn probe_with(space: &PatternSpace, f: &GroupRingElement, image: &Window) -> Result<SignProbe> {
    let neg: Vec<bool> = space.alphabet().iter().map(|p| f.coef(p) < 0.0).collect();
    let (mut pos, mut negc) = (0usize, 0usize);
    for x in space.with_image(image)? {
        let flips = x.choices.iter().filter(|&&k| neg[k]).count();
        if (x.sign() < 0) ^ (flips % 2 == 1) {
            negc += 1;
        } else {
            pos += 1;
        }
    }
    let verdict = match (pos, negc) {
        (0, 0) => SignVerdict::Vacuous,
        (_, 0) | (0, _) => SignVerdict::Constant,
        _ => SignVerdict::NonConstant,
    };
    Ok(SignProbe {
        image: image.points().to_vec(),
        patterns: pos + negc,
        positive: pos,
        negative: negc,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> QuadratureConfig {
        QuadratureConfig::new(32, 2, 1e-12).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::new(4, 2, 1e-12).is_err());
        assert!(QuadratureConfig::new(8, 1, 1e-12).is_err());
        assert!(QuadratureConfig::new(8, 2, 1e-3).is_err());
        assert!(QuadratureConfig::new(8, 2, 0.0).is_err());
        assert!(QuadratureConfig::new(8, 2, 1e-6).is_ok());
    }

    #[test]
    fn mahler_trivial_cases() {
        let c = GroupRingElement::constant(2, 3.0);
        assert!((mahler_measure(&c, &quick()).unwrap().value - 3f64.ln()).abs() < 1e-15);
        let g = GroupRingElement::laurent(&[(0, 2.0), (1, 1.0)]);
        let shifted = g.translate(&LatticePoint::from(5));
        let (a, b) = (
            mahler_measure(&g, &quick()).unwrap(),
            mahler_measure(&shifted, &quick()).unwrap(),
        );
        assert!((a.value - 2f64.ln()).abs() < 1e-12);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!(mahler_measure(&GroupRingElement::zero(1), &quick()).is_err());
    }

    #[test]
    fn golden_trinomial() {
        let f = GroupRingElement::laurent(&[(2, 1.0), (1, 1.0), (0, -1.0)]);
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((jensen_mahler_1d(&f).unwrap() - golden).abs() < 1e-12);
        let m = mahler_measure(&f, &quick()).unwrap();
        assert!(m.converged);
        assert!((m.value - golden).abs() < 1e-10);
    }

    #[test]
    fn singular_on_circle() {
        let f = GroupRingElement::laurent(&[(0, 1.0), (1, 1.0)]);
        let m = mahler_measure(&f, &QuadratureConfig::default()).unwrap();
        assert!(m.value.abs() < 1e-3, "{m:?}");
        assert!(jensen_mahler_1d(&f).unwrap().abs() < 1e-9);
    }

    #[test]
    fn sections_of_one_plus_u() {
        let f = GroupRingElement::laurent(&[(0, 1.0), (1, 1.0)]);
        let sched = WindowSchedule::cubes(1, 4, 32).unwrap();
        let rows = fk_finite_sections(&f, &sched, Exec::Sequential).unwrap();
        for (r, n) in rows.iter().zip(4..) {
            let expect = ((n + 1) as f64).ln() / (2.0 * n as f64);
            assert!((r.value - expect).abs() < 1e-10, "{n}: {}", r.value);
        }
        let c = GroupRingElement::laurent(&[(0, 2.0)]);
        for r in fk_finite_sections(&c, &sched, Exec::Sequential).unwrap() {
            assert!((r.value - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn family_validation() {
        assert!(ExampleFamily::new(FamilyId::Dimer, vec![1.0], None).is_err());
        assert!(ExampleFamily::new(FamilyId::Dimer, vec![1.0, 0.0], None).is_err());
        assert!(ExampleFamily::new(FamilyId::ThreePointZ, vec![1.0; 3], Some(1)).is_err());
        assert!(ExampleFamily::new(FamilyId::ThreePointZ, vec![1.0; 3], None).is_err());
        assert!(ExampleFamily::new(FamilyId::FourPointZ, vec![1.0; 4], Some(2)).is_err());
        assert!(ExampleFamily::new(FamilyId::FourPointZ, vec![1.0; 4], Some(3)).is_ok());
        assert!(ExampleFamily::new(FamilyId::TrinomialZ, vec![1.0; 3], Some(3)).is_err());
        for id in FamilyId::ALL {
            assert_eq!(id.name().parse::<FamilyId>().unwrap(), id);
        }
    }

    #[test]
    fn family_elements() {
        let fam = ExampleFamily::new(FamilyId::FourPointZ, vec![1.0, 2.0, 3.0, 4.0], Some(5)).unwrap();
        let h = fam.permanent_element();
        assert_eq!(h.coef(&LatticePoint::from(5)), 1.0);
        assert_eq!(h.coef(&LatticePoint::from(4)), 2.0);
        assert_eq!(h.coef(&LatticePoint::from(1)), 3.0);
        assert_eq!(h.coef(&LatticePoint::from(0)), 4.0);
        let reps = fam.determinant_elements();
        assert_eq!(reps[0].coef(&LatticePoint::from(0)), -4.0);
        assert_eq!(reps[1].coef(&LatticePoint::from(1)), -3.0);
        for r in &reps {
            assert_eq!(&r.abs(), &h);
        }
    }

    #[test]
    fn trinomial_family_sides_agree() {
        let fam = ExampleFamily::new(FamilyId::TrinomialZ, vec![1.0; 3], None).unwrap();
        let cfg = FamilyEvalConfig {
            quadrature: quick(),
            ..Default::default()
        };
        let ev = example_family_eval(&fam, &cfg).unwrap();
        assert!((ev.per_low - ev.det_value).abs() < 1e-9);
        assert!(ev.per_low <= ev.per_high);
    }

    #[test]
    fn dimer_forms_agree() {
        let cfg = QuadratureConfig::new(64, 2, 1e-12).unwrap();
        let vals: Vec<f64> = DimerForm::ALL
            .iter()
            .map(|&f| dimer_integral(1.0, 1.0, f, &cfg).unwrap().value)
            .collect();
        for v in &vals {
            assert!((v - vals[2]).abs() < 1e-4, "{vals:?}");
        }
    }

    #[test]
    fn probe_single_term_and_vacuous() {
        let f = GroupRingElement::laurent(&[(0, 1.0), (1, 1.0)]);
        let w = Window::from_ints(&[0, 1, 2]).unwrap();
        let img = Window::from_ints(&[1, 2, 3]).unwrap();
        let p = constant_sign_probe(&f, &w, &img).unwrap();
        assert_eq!((p.patterns, p.verdict), (1, SignVerdict::Constant));
        let g = GroupRingElement::laurent(&[(0, 1.0), (2, -1.0)]);
        let w = Window::from_ints(&[0, 1]).unwrap();
        let img = Window::from_ints(&[0, 2]).unwrap();
        let p = constant_sign_probe(&g, &w, &img).unwrap();
        assert_eq!(p.verdict, SignVerdict::Vacuous);
    }
}
