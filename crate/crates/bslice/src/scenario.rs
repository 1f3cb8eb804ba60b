//! Line-oriented scenario files.
//!
//! ```text
//! name = torus_example
//! seed = 1
//!
//! [chart]
//! t = real 0 1
//! x = line
//! y = line
//! s = defining 1
//!
//! [form omega]
//! (s/sin(s)) * dt ^ dlog(s)
//! dx ^ dy
//!
//! [torus]
//! leaf = x y
//! monodromy = -y, x
//! period = 1
//! order = 4
//!
//! [action]
//! group = circle
//! params = u
//! degree = 4
//! t' = t + 4*u
//!
//! [anchor exceptional]
//! t = 1/2
//! ```
//!
//! Form terms are `coeff * d<u> ^ dlog(<a>) ^ ...`, one or more per line
//! joined by top-level `+`; coefficients containing sums need parentheses.

use std::collections::BTreeMap;
use std::sync::Arc;

use bslice_core::actions::{so3_diag_components, Atom, GroupAction, GroupDescriptor};
use bslice_core::bcalc::BForm;
use bslice_core::expr::{parse, Chart, Coordinate, CoordinateMap, Expr, Rational};
use bslice_core::torus::{CollarModel, MappingTorus};

use crate::Error;

/// Raw scenario text split into sections, with line numbers kept for
/// error messages.
#[derive(Clone, Debug, Default)]
struct Raw {
    header: Vec<(usize, String, String)>,
    sections: Vec<Section>,
}

#[derive(Clone, Debug)]
struct Section {
    line: usize,
    kind: String,
    name: Option<String>,
    lines: Vec<(usize, String)>,
}

impl Section {
    fn pairs(&self) -> Result<Vec<(usize, String, String)>, Error> {
        self.lines
            .iter()
            .map(|(n, l)| {
                let (k, v) = l
                    .split_once('=')
                    .ok_or_else(|| Error::parse(*n, format!("expected `key = value` in [{}]", self.kind)))?;
                Ok((*n, k.trim().to_string(), v.trim().to_string()))
            })
            .collect()
    }

    fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("[{} {}]", self.kind, n),
            None => format!("[{}]", self.kind),
        }
    }
}

fn split_sections(text: &str) -> Result<Raw, Error> {
    let mut raw = Raw::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| Error::parse(n, "unterminated section header"))?;
            let mut words = inner.split_whitespace();
            let kind = words.next().ok_or_else(|| Error::parse(n, "empty section header"))?.to_string();
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(Error::parse(n, "section header takes at most one name"));
            }
            raw.sections.push(Section { line: n, kind, name, lines: Vec::new() });
            continue;
        }
        match raw.sections.last_mut() {
            Some(s) => s.lines.push((n, line.to_string())),
            None => {
                let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(n, "expected `key = value`"))?;
                raw.header.push((n, k.trim().to_string(), v.trim().to_string()));
            }
        }
    }
    Ok(raw)
}

/// Splits at top-level occurrences of `sep` (outside parentheses).
fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if ch == sep && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    out.push(cur);
    out.into_iter().map(|t| t.trim().to_string()).collect()
}

/// `d<name>` or `dlog(<name>)`.
fn differential(chart: &Arc<Chart>, token: &str) -> Option<BForm> {
    let token = token.trim();
    if let Some(inner) = token.strip_prefix("dlog(").and_then(|r| r.strip_suffix(')')) {
        let i = chart.index_of(inner.trim())?;
        return (chart.defining() == Some(i)).then(|| BForm::frame(chart.clone(), i));
    }
    let i = chart.index_of(token.strip_prefix('d')?)?;
    Some(BForm::differential(chart.clone(), i))
}

fn differentials(chart: &Arc<Chart>, chunk: &str) -> Option<BForm> {
    let mut acc: Option<BForm> = None;
    for tok in split_top(chunk, '^') {
        let d = differential(chart, &tok)?;
        acc = Some(match acc {
            None => d,
            Some(w) => w.wedge(&d).ok()?,
        });
    }
    acc
}

/// One term `coeff * d.. ^ d..`, optionally with a leading sign.
pub fn parse_term(chart: &Arc<Chart>, term: &str) -> Result<BForm, String> {
    let (sign, body) = match term.trim().strip_prefix('-') {
        Some(rest) => (-1, rest.trim()),
        None => (1, term.trim()),
    };
    let chunks = split_top(body, '*');
    let last = chunks.last().cloned().unwrap_or_default();
    let form = differentials(chart, &last)
        .ok_or_else(|| format!("`{last}` is not a wedge of d<coord> / dlog(<defining coord>)"))?;
    let coeff = if chunks.len() > 1 {
        let text = chunks[..chunks.len() - 1].join(" * ");
        parse(&text, chart).map_err(|e| e.to_string())?
    } else {
        Expr::one()
    };
    Ok(form.scale(&(Expr::int(sign) * coeff).normalize()))
}

fn parse_terms(chart: &Arc<Chart>, terms: &[(usize, String)]) -> Result<BForm, Error> {
    let mut acc: Option<BForm> = None;
    for (n, line) in terms {
        for t in split_top(line, '+') {
            let w = parse_term(chart, &t).map_err(|m| Error::parse(*n, m))?;
            acc = Some(match acc {
                None => w,
                Some(a) => a.add(&w).map_err(|e| Error::parse(*n, e.to_string()))?,
            });
        }
    }
    acc.ok_or_else(|| Error::parse(0, "form without terms"))
}

fn parse_rational(n: usize, s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num: i64 = num.trim().parse().map_err(|_| Error::parse(n, format!("`{s}` is not a rational")))?;
    let den: i64 = den.trim().parse().map_err(|_| Error::parse(n, format!("`{s}` is not a rational")))?;
    if den == 0 {
        return Err(Error::parse(n, "zero denominator"));
    }
    Ok(Rational::new(num, den))
}

fn parse_f64(n: usize, s: &str) -> Result<f64, Error> {
    let e = parse(s, &Chart::new(vec![]).expect("empty chart")).map_err(|e| Error::parse(n, e.to_string()))?;
    e.eval(&[]).map_err(|e| Error::parse(n, e.to_string()))
}

fn parse_bool(n: usize, s: &str) -> Result<bool, Error> {
    match s {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(Error::parse(n, format!("`{s}` is not a boolean"))),
    }
}

fn parse_usize(n: usize, s: &str) -> Result<usize, Error> {
    s.parse().map_err(|_| Error::parse(n, format!("`{s}` is not a non-negative integer")))
}

fn parse_group(n: usize, s: &str) -> Result<GroupDescriptor, Error> {
    let factors: Vec<GroupDescriptor> = s
        .split(" x ")
        .map(|f| {
            let words: Vec<&str> = f.split_whitespace().collect();
            match words.as_slice() {
                ["trivial"] => Ok(GroupDescriptor::Trivial),
                ["circle"] => Ok(GroupDescriptor::Circle),
                ["so2"] => Ok(GroupDescriptor::SO2),
                ["so3"] => Ok(GroupDescriptor::SO3),
                ["torus", r] => Ok(GroupDescriptor::Torus(parse_usize(n, r)?)),
                ["cyclic", k] => Ok(GroupDescriptor::Cyclic(parse_usize(n, k)? as u32)),
                _ => Err(Error::parse(n, format!("unknown group `{f}`"))),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(if factors.len() == 1 { factors.into_iter().next().expect("one factor") } else { GroupDescriptor::Product(factors) })
}

/// Commands a scenario can request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Check,
    Invariants,
    Cover,
    NormalForm,
    Moser,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Check => "check",
            Task::Invariants => "invariants",
            Task::Cover => "cover",
            Task::NormalForm => "normal-form",
            Task::Moser => "moser",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        [Task::Check, Task::Invariants, Task::Cover, Task::NormalForm, Task::Moser].into_iter().find(|t| t.name() == s)
    }
}

/// The `[moser]` section.
#[derive(Clone, Debug)]
pub struct MoserSpec {
    pub omega0: String,
    pub omega1: String,
    pub anchor: String,
    pub symmetry: Option<String>,
    pub orbit: Option<Vec<usize>>,
}

/// A validated scenario with all objects built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub chart: Arc<Chart>,
    pub forms: BTreeMap<String, BForm>,
    /// Collar form name and the collar, when a `[torus]` is declared.
    pub collar: Option<(String, CollarModel)>,
    pub actions: BTreeMap<String, GroupAction>,
    pub anchors: Vec<(String, Vec<f64>)>,
    pub tasks: Vec<Task>,
    pub steps: usize,
    pub samples: usize,
    /// Attach a Moser certification to each normal form.
    pub certify: bool,
    pub moser: Option<MoserSpec>,
}

impl Scenario {
    /// The action used by the slice pipeline: the one named `action`, else
    /// the only one declared.
    pub fn main_action(&self) -> Option<(&String, &GroupAction)> {
        self.actions.get_key_value("action").or_else(|| {
            if self.actions.len() == 1 {
                self.actions.iter().next()
            } else {
                None
            }
        })
    }

    pub fn anchor(&self, name: &str) -> Option<&Vec<f64>> {
        self.anchors.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

fn build_chart(section: &Section) -> Result<Arc<Chart>, Error> {
    let mut coords = Vec::new();
    for (n, name, spec) in section.pairs()? {
        let words: Vec<&str> = spec.split_whitespace().collect();
        let c = match words.as_slice() {
            ["line"] => Coordinate::line(&name),
            ["angle"] => Coordinate::angle(&name, 1.into()),
            ["angle", p] => Coordinate::angle(&name, parse_rational(n, p)?),
            ["real", lo, hi] => Coordinate::real(&name, parse_f64(n, lo)?, parse_f64(n, hi)?),
            ["defining"] => Coordinate::defining(&name, 1.0),
            ["defining", w] => Coordinate::defining(&name, parse_f64(n, w)?),
            _ => return Err(Error::parse(n, format!("unknown coordinate kind `{spec}`"))),
        };
        coords.push(c);
    }
    Chart::new(coords).map_err(|e| Error::parse(section.line, e.to_string()))
}

/// Inline form: a known form name or terms joined by top-level `+`.
fn inline_form(
    n: usize,
    value: &str,
    chart: &Arc<Chart>,
    forms: &BTreeMap<String, BForm>,
) -> Result<BForm, Error> {
    if let Some(w) = forms.get(value) {
        return Ok(w.clone());
    }
    parse_terms(chart, &[(n, value.to_string())])
}

fn build_torus(
    section: &Section,
    chart: &Arc<Chart>,
    forms: &BTreeMap<String, BForm>,
    seed: u64,
) -> Result<(String, CollarModel), Error> {
    let kv: BTreeMap<String, (usize, String)> =
        section.pairs()?.into_iter().map(|(n, k, v)| (k, (n, v))).collect();
    let get = |k: &str| kv.get(k).ok_or_else(|| Error::parse(section.line, format!("[torus] needs `{k}`")));
    let (n_leaf, leaf_names) = get("leaf")?;
    let names: Vec<&str> = leaf_names.split_whitespace().collect();
    let a = chart.defining().ok_or_else(|| Error::validation("collar chart needs exactly one defining coordinate"))?;
    let expected: Vec<&str> = (1..a).map(|i| chart.name(i)).collect();
    if names != expected || a + 1 != chart.dim() {
        return Err(Error::parse(
            *n_leaf,
            "collar chart must be ordered (t, leaf coordinates..., defining coordinate)",
        ));
    }
    let leaf_idx: Vec<usize> = (1..a).collect();
    let leaf = chart.restrict(&leaf_idx).map_err(|e| Error::parse(*n_leaf, e.to_string()))?;
    let form_name = kv.get("form").map_or("omega".to_string(), |(_, v)| v.clone());
    let omega = forms
        .get(&form_name)
        .cloned()
        .ok_or_else(|| Error::parse(section.line, format!("unknown form `{form_name}`")))?;

    // β: given, or the leaf part of the collar form.
    let beta_full = match kv.get("beta") {
        Some((n, v)) => inline_form(*n, v, chart, forms)?,
        None => BForm::from_terms(
            chart.clone(),
            2,
            omega.terms().filter(|(m, _)| m & (1 | 1 << a) == 0).map(|(m, c)| (m, c.clone())),
        ),
    };
    let remap = |i: usize| if i >= 1 && i < a { Expr::Var(i - 1) } else { Expr::zero() };
    let beta = BForm::from_terms(
        leaf.clone(),
        2,
        beta_full.terms().map(|(m, c)| (m >> 1, c.substitute(&remap).normalize())),
    );
    let (n_mono, mono) = get("monodromy")?;
    let comps: Vec<Expr> = split_top(mono, ',')
        .iter()
        .map(|c| parse(c, &leaf).map_err(|e| Error::parse(*n_mono, e.to_string())))
        .collect::<Result<_, _>>()?;
    let monodromy =
        CoordinateMap::new(leaf.clone(), leaf.clone(), comps).map_err(|e| Error::parse(*n_mono, e.to_string()))?;
    let (n_p, p) = get("period")?;
    let period = parse_rational(*n_p, p)?;
    let (n_o, o) = get("order")?;
    let order = parse_usize(*n_o, o)? as u32;
    let mut torus = MappingTorus::new(leaf, beta, monodromy, period, order, seed)?;
    let compact = kv.get("compact").map(|(n, v)| parse_bool(*n, v)).transpose()?.unwrap_or(true);
    let simply = kv.get("simply_connected").map(|(n, v)| parse_bool(*n, v)).transpose()?.unwrap_or(false);
    torus = torus.with_flags(compact, simply);
    Ok((form_name, CollarModel::new(torus, omega, seed)?))
}

fn build_action(section: &Section, chart: &Arc<Chart>) -> Result<GroupAction, Error> {
    let pairs = section.pairs()?;
    let mut group = None;
    let mut params: Vec<String> = Vec::new();
    let mut degree = 0i64;
    let mut so3: Vec<(usize, usize)> = Vec::new();
    let mut overrides: Vec<(usize, usize, String)> = Vec::new();
    for (n, k, v) in &pairs {
        match k.as_str() {
            "group" => group = Some(parse_group(*n, v)?),
            "params" => params = v.split_whitespace().map(str::to_string).collect(),
            "degree" => degree = v.parse().map_err(|_| Error::parse(*n, "degree must be an integer"))?,
            "so3" => {
                for pair in split_top(v, ',') {
                    let w: Vec<&str> = pair.split_whitespace().collect();
                    let idx = |s: &str| chart.index_of(s).ok_or_else(|| Error::parse(*n, format!("unknown coordinate `{s}`")));
                    match w.as_slice() {
                        [u, v] => so3.push((idx(u)?, idx(v)?)),
                        _ => return Err(Error::parse(*n, "so3 pairs are written `u v, u' v'`")),
                    }
                }
            }
            other => {
                let name = other
                    .strip_suffix('\'')
                    .ok_or_else(|| Error::parse(*n, format!("unknown key `{other}` in {}", section.label())))?;
                let i = chart.index_of(name).ok_or_else(|| Error::parse(*n, format!("unknown coordinate `{name}`")))?;
                overrides.push((*n, i, v.clone()));
            }
        }
    }
    let group = group.ok_or_else(|| Error::parse(section.line, format!("{} needs `group`", section.label())))?;
    let dim = chart.dim();
    if let GroupDescriptor::Cyclic(k) = group {
        let mut comps: Vec<Expr> = (0..dim).map(Expr::Var).collect();
        for (n, i, text) in overrides {
            comps[i] = parse(&text, chart).map_err(|e| Error::parse(n, e.to_string()))?;
        }
        let generator = CoordinateMap::new(chart.clone(), chart.clone(), comps)
            .map_err(|e| Error::parse(section.line, e.to_string()))?;
        return Ok(GroupAction::cyclic(k, generator)?);
    }
    let param_chart = Chart::new(params.iter().map(|p| Coordinate::angle(p, 1.into())).collect())
        .map_err(|e| Error::parse(section.line, e.to_string()))?;
    let extended = chart.extend(&param_chart).map_err(|e| Error::parse(section.line, e.to_string()))?;
    let mut comps: Vec<Expr> = (0..dim).map(Expr::Var).collect();
    if !so3.is_empty() {
        let mut offset = 0;
        let mut euler = None;
        for atom in group.atoms() {
            if atom == Atom::Rotation {
                euler = Some([dim + offset, dim + offset + 1, dim + offset + 2]);
                break;
            }
            offset += atom.param_count();
        }
        let euler = euler.ok_or_else(|| Error::parse(section.line, "`so3` pairs need an so3 factor"))?;
        let rotated = so3_diag_components(dim, &so3, euler);
        for &(u, v) in &so3 {
            comps[u] = rotated[u].clone();
            comps[v] = rotated[v].clone();
        }
    }
    for (n, i, text) in overrides {
        comps[i] = parse(&text, &extended).map_err(|e| Error::parse(n, e.to_string()))?;
    }
    let names: Vec<&str> = params.iter().map(String::as_str).collect();
    Ok(GroupAction::new(group, chart.clone(), &names, comps, degree)?.with_so3_pairs(so3))
}

fn build_anchor(section: &Section, chart: &Arc<Chart>) -> Result<Vec<f64>, Error> {
    let mut p = vec![0.0; chart.dim()];
    for (n, k, v) in section.pairs()? {
        let i = chart.index_of(&k).ok_or_else(|| Error::parse(n, format!("unknown coordinate `{k}`")))?;
        p[i] = parse_f64(n, &v)?;
    }
    if let Some(a) = chart.defining() {
        if p[a] != 0.0 {
            return Err(Error::validation(format!("anchor {} is not on a = 0", section.label())));
        }
    }
    if !chart.contains(&p) {
        return Err(Error::validation(format!("anchor {} is outside the chart", section.label())));
    }
    Ok(p)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, Error> {
    let raw = split_sections(text)?;
    let mut name = String::from("scenario");
    let mut description = String::new();
    let mut seed = 1u64;
    for (n, k, v) in &raw.header {
        match k.as_str() {
            "name" => name = v.clone(),
            "description" => description = v.clone(),
            "seed" => seed = v.parse().map_err(|_| Error::parse(*n, "seed must be an unsigned integer"))?,
            other => return Err(Error::parse(*n, format!("unknown header key `{other}`"))),
        }
    }
    let charts: Vec<&Section> = raw.sections.iter().filter(|s| s.kind == "chart").collect();
    let chart = match charts.as_slice() {
        [one] => build_chart(one)?,
        [] => return Err(Error::parse(0, "scenario needs a [chart] section")),
        [_, second, ..] => return Err(Error::parse(second.line, "only one [chart] section is supported")),
    };
    if chart.defining().is_none() {
        return Err(Error::validation("chart needs a defining coordinate"));
    }

    let mut forms = BTreeMap::new();
    for s in raw.sections.iter().filter(|s| s.kind == "form") {
        let name = s.name.clone().ok_or_else(|| Error::parse(s.line, "[form] needs a name"))?;
        if s.lines.is_empty() {
            return Err(Error::parse(s.line, format!("{} has no terms", s.label())));
        }
        forms.insert(name, parse_terms(&chart, &s.lines)?);
    }

    let mut collar = None;
    for s in raw.sections.iter().filter(|s| s.kind == "torus") {
        if collar.is_some() {
            return Err(Error::parse(s.line, "only one [torus] section is supported"));
        }
        collar = Some(build_torus(s, &chart, &forms, seed)?);
    }

    let mut actions = BTreeMap::new();
    for s in raw.sections.iter().filter(|s| s.kind == "action") {
        let name = s.name.clone().unwrap_or_else(|| "action".into());
        actions.insert(name, build_action(s, &chart)?);
    }

    let mut anchors = Vec::new();
    for s in raw.sections.iter().filter(|s| s.kind == "anchor") {
        let name = s.name.clone().ok_or_else(|| Error::parse(s.line, "[anchor] needs a name"))?;
        anchors.push((name, build_anchor(s, &chart)?));
    }

    let mut tasks = vec![Task::Check];
    let (mut steps, mut samples, mut certify) = (200usize, 16usize, false);
    let mut moser = None;
    for s in &raw.sections {
        match s.kind.as_str() {
            "chart" | "form" | "torus" | "action" | "anchor" => {}
            "task" => {
                for (n, k, v) in s.pairs()? {
                    match k.as_str() {
                        "run" => {
                            tasks = v
                                .split_whitespace()
                                .map(|t| Task::from_name(t).ok_or_else(|| Error::parse(n, format!("unknown task `{t}`"))))
                                .collect::<Result<_, _>>()?;
                        }
                        "steps" => steps = parse_usize(n, &v)?,
                        "samples" => samples = parse_usize(n, &v)?,
                        "certify" => certify = parse_bool(n, &v)?,
                        other => return Err(Error::parse(n, format!("unknown key `{other}` in [task]"))),
                    }
                }
            }
            "moser" => {
                let kv: BTreeMap<String, (usize, String)> =
                    s.pairs()?.into_iter().map(|(n, k, v)| (k, (n, v))).collect();
                let need = |k: &str| {
                    kv.get(k).map(|(_, v)| v.clone()).ok_or_else(|| Error::parse(s.line, format!("[moser] needs `{k}`")))
                };
                let orbit = match kv.get("orbit") {
                    Some((n, v)) => Some(
                        v.split_whitespace()
                            .map(|c| chart.index_of(c).ok_or_else(|| Error::parse(*n, format!("unknown coordinate `{c}`"))))
                            .collect::<Result<Vec<_>, _>>()?,
                    ),
                    None => None,
                };
                let spec = MoserSpec {
                    omega0: need("omega0")?,
                    omega1: need("omega1")?,
                    anchor: need("anchor")?,
                    symmetry: kv.get("symmetry").map(|(_, v)| v.clone()),
                    orbit,
                };
                for f in [&spec.omega0, &spec.omega1] {
                    if !forms.contains_key(f) {
                        return Err(Error::parse(s.line, format!("unknown form `{f}`")));
                    }
                }
                if !anchors.iter().any(|(n, _)| *n == spec.anchor) {
                    return Err(Error::parse(s.line, format!("unknown anchor `{}`", spec.anchor)));
                }
                if let Some(sym) = &spec.symmetry {
                    if !actions.contains_key(sym) {
                        return Err(Error::parse(s.line, format!("unknown action `{sym}`")));
                    }
                }
                moser = Some(spec);
            }
            other => return Err(Error::parse(s.line, format!("unknown section [{other}]"))),
        }
    }
    Ok(Scenario {
        name,
        description,
        seed,
        chart,
        forms,
        collar,
        actions,
        anchors,
        tasks,
        steps,
        samples,
        certify,
        moser,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bslice_core::bcalc::mask_of;

    const SMALL: &str = "
name = small
seed = 3
[chart]
t = angle 1
x = line
y = line
a = defining 1
[form omega]
dt ^ dlog(a)   # modular part
dx ^ dy
[form omega1]
dt ^ dlog(a) + (101/100) * dx ^ dy
";

    #[test]
    fn parses_forms_and_comments() {
        let s = parse_scenario(SMALL).unwrap();
        assert_eq!((s.name.as_str(), s.seed), ("small", 3));
        let w = &s.forms["omega"];
        assert_eq!(w.coefficient(mask_of(&[0, 3])), Expr::one());
        assert_eq!(w.coefficient(mask_of(&[1, 2])), Expr::one());
        let w1 = &s.forms["omega1"];
        assert_eq!(w1.coefficient(mask_of(&[1, 2])), Expr::ratio(101, 100));
    }

    #[test]
    fn da_is_a_times_frame() {
        let s = parse_scenario(SMALL).unwrap();
        let w = parse_term(&s.chart, "dx ^ da").unwrap();
        assert_eq!(w.coefficient(mask_of(&[1, 3])), Expr::var(3));
        let w = parse_term(&s.chart, "-2*x * dy ^ dx").unwrap();
        assert_eq!(w.coefficient(mask_of(&[1, 2])), (Expr::int(2) * Expr::var(1)).normalize());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "[chart]\nt = angle\nx = curve\n";
        match parse_scenario(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "[chart]\nt = angle\nx = line\ny = line\na = defining\n[form w]\ndt ^ dq\n";
        assert!(matches!(parse_scenario(bad), Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn anchors_must_lie_on_z() {
        let bad = format!("{SMALL}[anchor p]\na = 1/2\n");
        assert!(matches!(parse_scenario(&bad), Err(Error::Validation(_))));
    }
}
