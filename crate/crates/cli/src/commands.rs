use std::fmt;

use permsft::entropy::{
    estimate_report, torus_estimates, zero_entropy_classifier, EstimateReport, WindowSchedule,
};
use permsft::fkdet::{
    example_family_eval, fk_finite_sections, jensen_mahler_1d, mahler_measure,
    representative_gap_sweep, ExampleFamily, FamilyEvalConfig, FamilyId, QuadratureConfig,
};
use permsft::permanent::{iper_af, per_af, Backend, PermanentOptions};
use permsft::{Error, Exec, GroupRingElement, LatticePoint, TorusQuotient, Window};
use serde_json::{json, Value};

use crate::args::{BackendArg, Command, ElementArgs, GlobalOpts, QuadratureArgs};
use crate::output::{num, Table};
use crate::verify;

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inputs (exit 2).
    Usage(String),
    /// A computation exceeded its budget and nothing could be reported (exit 3).
    Capacity(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Capacity(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Result of one command: a JSON document and the same data as a table.
pub struct Outcome {
    pub json: Value,
    pub table: Table,
    /// Capacity errors met along the way; the output is partial when nonempty.
    pub capacity: Vec<String>,
    /// Failed assertions (verify only).
    pub failures: usize,
}

impl Outcome {
    fn complete(json: Value, table: Table) -> Self {
        Outcome {
            json,
            table,
            capacity: Vec::new(),
            failures: 0,
        }
    }
}

pub fn exec_for(global: &GlobalOpts) -> Exec {
    match global.threads {
        Some(1) => Exec::Sequential,
        _ => Exec::default(),
    }
}

fn perm_options(global: &GlobalOpts) -> PermanentOptions {
    let backend = match global.backend {
        BackendArg::Auto => Backend::Auto,
        BackendArg::Ryser => Backend::Ryser,
        BackendArg::Backtrack => Backend::Backtrack,
        BackendArg::Profile => Backend::Profile,
        BackendArg::InclusionExclusion => Backend::InclusionExclusion,
    };
    let mut opts = PermanentOptions::with_backend(backend);
    opts.exec = exec_for(global);
    if let Some(b) = global.budget {
        opts.budget = b;
    }
    opts
}

fn quadrature(q: &QuadratureArgs, global: &GlobalOpts) -> CliResult<QuadratureConfig> {
    let mut cfg = QuadratureConfig::new(q.grid, q.levels, q.eps)?;
    cfg.exec = exec_for(global);
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// parsing

pub fn parse_points(s: &str, dim: usize) -> CliResult<Vec<LatticePoint>> {
    let ints = |part: &str| -> CliResult<Vec<i64>> {
        part.split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse::<i64>().map_err(|_| usage(format!("not an integer: {t:?}"))))
            .collect()
    };
    let points: Vec<Vec<i64>> = if s.contains(';') {
        s.split(';').filter(|p| !p.trim().is_empty()).map(ints).collect::<CliResult<_>>()?
    } else {
        if dim == 0 {
            return Err(usage("--dim must be at least 1"));
        }
        let flat = ints(s)?;
        if flat.len() % dim != 0 {
            return Err(usage(format!("{} integers do not split into {dim}-dimensional points", flat.len())));
        }
        flat.chunks(dim).map(|c| c.to_vec()).collect()
    };
    if points.is_empty() {
        return Err(usage("empty point list"));
    }
    Ok(points.into_iter().map(LatticePoint::new).collect())
}

pub fn load_element(args: &ElementArgs) -> CliResult<GroupRingElement> {
    if let Some(path) = &args.input {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        return Ok(GroupRingElement::from_json(&text)?);
    }
    if let Some(text) = &args.inline {
        return Ok(GroupRingElement::from_json(text)?);
    }
    if let Some(set) = &args.set {
        let w = Window::from_points(parse_points(set, args.dim)?)?;
        return Ok(GroupRingElement::indicator(&w));
    }
    Err(usage("one of --input, --inline or --set is required"))
}

/// `"lo..hi"` (inclusive) or a single `"n"`.
pub fn parse_range(s: &str) -> CliResult<(usize, usize)> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| usage(format!("bad range bound {t:?}")));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(usage(format!("window range {s:?} is empty")));
    }
    Ok((lo, hi))
}

/// `"4x4,5x6"`, `"4,5,6"` (one-dimensional) or a cube side range `"4..8"`.
pub fn parse_tori(s: &str, dim: usize) -> CliResult<Vec<TorusQuotient>> {
    if s.contains("..") {
        let (lo, hi) = parse_range(s)?;
        return (lo..=hi)
            .map(|n| TorusQuotient::new(vec![n; dim]).map_err(CliError::from))
            .collect();
    }
    let tori = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| TorusQuotient::parse(t.trim()).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(q) = tori.iter().find(|q| q.dim() != dim) {
        return Err(usage(format!("torus {} does not have dimension {dim}", q.label())));
    }
    Ok(tori)
}

fn parse_window(s: &str, dim: usize) -> CliResult<Window> {
    let s = s.trim();
    if s.starts_with('{') {
        return Ok(Window::from_json(s)?);
    }
    let n: usize = s.parse().map_err(|_| usage(format!("window must be JSON or a cube side, got {s:?}")))?;
    Ok(Window::cube(dim, n)?)
}

fn parse_params(s: &str) -> CliResult<Vec<f64>> {
    s.split([',', ';'])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad parameter {t:?}"))))
        .collect()
}

// ---------------------------------------------------------------------------
// commands

pub fn run(command: &Command, global: &GlobalOpts) -> CliResult<Outcome> {
    match command {
        Command::Entropy { element, windows, tori } => {
            let f = load_element(element)?;
            let a = f.support()?;
            let f = GroupRingElement::indicator(&a);
            report("entropy", &f, windows, tori.as_deref(), None, global)
        }
        Command::Pressure {
            element,
            windows,
            tori,
            with_det,
            quadrature: q,
        } => {
            let f = load_element(element)?;
            f.check_nonnegative()?;
            let cfg = if *with_det { Some(quadrature(q, global)?) } else { None };
            report("pressure", &f, windows, tori.as_deref(), cfg.as_ref(), global)
        }
        Command::Permanent {
            element,
            window,
            alphabet,
        } => permanent(element, window, alphabet.as_deref(), global),
        Command::Mahler {
            element,
            quadrature: q,
            sections,
        } => mahler(element, q, sections.as_deref(), global),
        Command::Compare {
            family,
            params,
            k,
            windows,
            tori,
            representatives,
            quadrature: q,
        } => compare(family, params, *k, windows, tori.as_deref(), *representatives, q, global),
        Command::Periodic { element, tori } => periodic(element, tori, global),
        Command::Verify { seed, cases } => Ok(verify::run(*seed, *cases, exec_for(global))),
    }
}

const REPORT_COLUMNS: [&str; 5] = ["window", "size", "log_value", "normalized", "kind"];

fn report(
    command: &str,
    f: &GroupRingElement,
    windows: &str,
    tori: Option<&str>,
    cfg: Option<&QuadratureConfig>,
    global: &GlobalOpts,
) -> CliResult<Outcome> {
    let (lo, hi) = parse_range(windows)?;
    let schedule = WindowSchedule::cubes(f.dim(), lo, hi)?;
    let tori = match tori {
        Some(t) => parse_tori(t, f.dim())?,
        None => Vec::new(),
    };
    let a = f.support()?;
    let r: EstimateReport = estimate_report(f, &a, &schedule, &tori, cfg, &perm_options(global))?;
    let mut table = Table::new(&REPORT_COLUMNS);
    for row in r.table() {
        table.push(vec![
            row.window,
            row.size.to_string(),
            num(row.log_value),
            num(row.normalized),
            row.kind.to_string(),
        ]);
    }
    if let Some(d) = &r.det_lower {
        let kind = if d.converged { "det-lower" } else { "det-lower-unconverged" };
        table.push(vec!["determinant".into(), "1".into(), num(d.value), num(d.value), kind.into()]);
    }
    let json = json!({
        "command": command,
        "element": f.to_spec(),
        "certified_lower": r.certified_lower(),
        "certified_upper": r.certified_upper,
        "zero_entropy_by_support_size": zero_entropy_classifier(&a),
        "report": r,
    });
    Ok(Outcome {
        json,
        table,
        capacity: r.capacity_errors.clone(),
        failures: 0,
    })
}

fn permanent(
    element: &ElementArgs,
    window: &str,
    alphabet: Option<&str>,
    global: &GlobalOpts,
) -> CliResult<Outcome> {
    let f = load_element(element)?;
    let w = parse_window(window, f.dim())?;
    let a = match alphabet {
        Some(s) => Window::from_points(parse_points(s, f.dim())?)?,
        None => f.support()?,
    };
    let opts = perm_options(global);
    let per = per_af(&f, &a, &w, &opts)?;
    let iper = iper_af(&f, &a, &w, &opts)?;
    let mut table = Table::new(&["window", "size", "log_value", "normalized", "kind", "exact"]);
    let label = format!("{} points", w.len());
    for (kind, v) in [("per", &per), ("iper", &iper)] {
        table.push(vec![
            label.clone(),
            w.len().to_string(),
            num(v.log),
            num(v.normalized(w.len())),
            kind.to_string(),
            v.exact.map(|e| e.to_string()).unwrap_or_default(),
        ]);
    }
    let side = |v: &permsft::LogValue| {
        json!({
            "log": v.log,
            "normalized": v.normalized(w.len()),
            "exact": v.exact.map(|e| e.to_string()),
        })
    };
    let json = json!({
        "command": "permanent",
        "element": f.to_spec(),
        "window": w.to_spec(),
        "size": w.len(),
        "per": side(&per),
        "iper": side(&iper),
    });
    Ok(Outcome::complete(json, table))
}

fn mahler(
    element: &ElementArgs,
    q: &QuadratureArgs,
    sections: Option<&str>,
    global: &GlobalOpts,
) -> CliResult<Outcome> {
    let f = load_element(element)?;
    let cfg = quadrature(q, global)?;
    let m = mahler_measure(&f, &cfg)?;
    let jensen = if f.dim() == 1 { Some(jensen_mahler_1d(&f)?) } else { None };
    let mut table = Table::new(&REPORT_COLUMNS);
    table.push(vec!["quadrature".into(), "1".into(), num(m.value), num(m.value), "mahler".into()]);
    if let Some(j) = jensen {
        table.push(vec!["jensen".into(), "1".into(), num(j), num(j), "mahler".into()]);
    }
    let rows = match sections {
        Some(s) => {
            let (lo, hi) = parse_range(s)?;
            let schedule = WindowSchedule::cubes(f.dim(), lo, hi)?;
            fk_finite_sections(&f, &schedule, cfg.exec)?
        }
        None => Vec::new(),
    };
    for r in &rows {
        table.push(vec![r.window.clone(), r.size.to_string(), num(r.log_det), num(r.value), "section".into()]);
    }
    let json = json!({
        "command": "mahler",
        "element": f.to_spec(),
        "quadrature": cfg,
        "mahler": m,
        "jensen": jensen,
        "sections": rows,
    });
    Ok(Outcome::complete(json, table))
}

#[allow(clippy::too_many_arguments)]
fn compare(
    family: &str,
    params: &[String],
    k: Option<usize>,
    windows: &str,
    tori: Option<&str>,
    representatives: bool,
    q: &QuadratureArgs,
    global: &GlobalOpts,
) -> CliResult<Outcome> {
    let id: FamilyId = family.parse().map_err(CliError::from)?;
    let families = params
        .iter()
        .map(|p| Ok(ExampleFamily::new(id, parse_params(p)?, k)?))
        .collect::<CliResult<Vec<_>>>()?;
    let cfg = quadrature(q, global)?;
    if representatives {
        let gaps = representative_gap_sweep(&families, &cfg, cfg.exec)?;
        let mut table = Table::new(&["family", "params", "det_first", "det_second", "gap", "det_error_estimate"]);
        for g in &gaps {
            table.push(vec![
                id.to_string(),
                g.params.clone(),
                num(g.det_first),
                num(g.det_second),
                num(g.gap),
                num(g.error),
            ]);
        }
        let json = json!({"command": "compare", "family": id, "representatives": gaps});
        return Ok(Outcome::complete(json, table));
    }
    let tori = match tori {
        Some(t) => Some(parse_range(t)?),
        None => None,
    };
    let eval_cfg = FamilyEvalConfig {
        quadrature: cfg,
        windows: parse_range(windows)?,
        tori,
        opts: perm_options(global),
    };
    let mut table = Table::new(&[
        "family",
        "params",
        "per_estimate_low",
        "per_estimate_high",
        "det_value",
        "det_error_estimate",
    ]);
    let mut evals = Vec::new();
    for fam in &families {
        let ev = example_family_eval(fam, &eval_cfg)?;
        table.push(vec![
            id.to_string(),
            ev.params.clone(),
            num(ev.per_low),
            num(ev.per_high),
            num(ev.det_value),
            num(ev.det_error),
        ]);
        evals.push(ev);
    }
    let json = json!({"command": "compare", "family": id, "evaluations": evals});
    Ok(Outcome::complete(json, table))
}

fn periodic(element: &ElementArgs, tori: &str, global: &GlobalOpts) -> CliResult<Outcome> {
    let f = load_element(element)?;
    let tori = parse_tori(tori, f.dim())?;
    let opts = perm_options(global);
    let mut rows = Vec::new();
    let mut capacity = Vec::new();
    for q in &tori {
        match torus_estimates(&f, std::slice::from_ref(q), &opts) {
            Ok(mut v) => rows.append(&mut v),
            Err(e) if e.is_capacity() => capacity.push(format!("torus {}: {e}", q.label())),
            Err(e) => return Err(e.into()),
        }
    }
    let mut table = Table::new(&["window", "size", "log_value", "normalized", "kind", "exact"]);
    for t in &rows {
        table.push(vec![
            format!("torus {}", t.torus),
            t.order.to_string(),
            num(t.log_value),
            num(t.normalized),
            "torus".into(),
            t.exact.clone().unwrap_or_default(),
        ]);
    }
    let json = json!({
        "command": "periodic",
        "element": f.to_spec(),
        "tori": rows,
        "capacity_errors": capacity,
    });
    Ok(Outcome {
        json,
        table,
        capacity,
        failures: 0,
    })
}
