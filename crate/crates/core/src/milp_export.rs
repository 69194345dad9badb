//! Solver-agnostic MILP models of the k-sum problem and an LP-format writer.
//!
//! Four formulations are built:
//!
//! | kind         | variables                          | constraints                                   |
//! |--------------|------------------------------------|-----------------------------------------------|
//! | `CoverZ`     | x_j, z_i_j, v                      | z ≥ p(1−x), z ≥ (1−p)x, Σ_{i∈S} Σ_j z_ij ≤ v   |
//! | `CoverX`     | x_j, v                             | Σ_j γ_j(S)(1−x_j) + Σ_j (k−γ_j(S))x_j ≤ v       |
//! | `KCentrum`   | x_j, z_i_j, d_i, vi_i, t           | vi ≥ d − t, d ≥ Σ_j z, z ≥ x(1−p) + p(1−x)      |
//! | `Assignment` | x_j, z_i_j, d_i, u_i, vh_h         | u_i + vh_h ≥ d_i, d ≥ Σ_j z, z ≥ x(1−p)+p(1−x)  |
//!
//! The cover kinds range over voter sets S with |S| = k, either all of them
//! or none (to be added lazily with [`add_cover_cut`]). Indices in variable
//! names are 1-based. All coefficients are integers.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::bounds::Cut;
use crate::error::{Error, Result};
use crate::model::{self, Committee, Instance, OwaWeights};
use crate::polysolve::{binomial, for_each_combination};

/// Default cap on the number of enumerated cover constraints.
pub const COVER_BUDGET: u128 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutPolicy {
    /// One constraint per voter set of size k.
    FullEnumeration,
    /// No cover constraints; they are separated on demand.
    SeedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    CoverZ(CutPolicy),
    CoverX(CutPolicy),
    KCentrum,
    Assignment,
}

impl FormulationKind {
    fn tag(&self) -> &'static str {
        match self {
            FormulationKind::CoverZ(CutPolicy::FullEnumeration) => "coverz",
            FormulationKind::CoverZ(CutPolicy::SeedOnly) => "coverz-seed",
            FormulationKind::CoverX(CutPolicy::FullEnumeration) => "coverx",
            FormulationKind::CoverX(CutPolicy::SeedOnly) => "coverx-seed",
            FormulationKind::KCentrum => "kcentrum",
            FormulationKind::Assignment => "assignment",
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FormulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use CutPolicy::*;
        use FormulationKind::*;
        Ok(match s {
            "coverz" => CoverZ(FullEnumeration),
            "coverz-seed" => CoverZ(SeedOnly),
            "coverx" => CoverX(FullEnumeration),
            "coverx-seed" => CoverX(SeedOnly),
            "kcentrum" => KCentrum,
            "assignment" => Assignment,
            _ => return Err(Error::invalid(format!("unknown formulation {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub lower: i64,
    pub upper: Option<i64>,
    pub integer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    /// (variable index, coefficient), no zero coefficients.
    pub terms: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

/// Which formulation a model encodes, needed to evaluate it at a committee.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMeta {
    pub kind: FormulationKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

/// A minimisation MILP with integer data.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearModel {
    pub meta: Option<ModelMeta>,
    pub variables: Vec<Variable>,
    pub objective: Vec<(usize, i64)>,
    pub constraints: Vec<Constraint>,
    index: HashMap<String, usize>,
    row_names: HashSet<String>,
}

impl LinearModel {
    pub fn add_variable(&mut self, name: impl Into<String>, lower: i64, upper: Option<i64>, integer: bool) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate variable {name}")));
        }
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            integer,
        });
        Ok(id)
    }

    fn binary(&mut self, name: String) -> usize {
        self.add_variable(name, 0, Some(1), true)
            .expect("builder names are unique")
    }

    fn continuous(&mut self, name: String) -> usize {
        self.add_variable(name, 0, None, false)
            .expect("builder names are unique")
    }

    pub fn variable(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, i64)>,
        sense: Sense,
        rhs: i64,
    ) -> Result<()> {
        let name = name.into();
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(Error::invalid(format!("constraint {name} references undeclared variable {v}")));
        }
        if !self.row_names.insert(name.clone()) {
            return Err(Error::invalid(format!("duplicate constraint {name}")));
        }
        let terms = terms.into_iter().filter(|&(_, c)| c != 0).collect();
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
        Ok(())
    }

    pub fn binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.integer).count()
    }

    pub fn continuous_count(&self) -> usize {
        self.variables.len() - self.binaries()
    }

    /// Number of constraints whose name starts with `prefix`.
    pub fn count_rows(&self, prefix: &str) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .count()
    }
}

fn x_name(j: usize) -> String {
    format!("x_{}", j + 1)
}

fn z_name(i: usize, j: usize) -> String {
    format!("z_{}_{}", i + 1, j + 1)
}

/// Builds the model of `kind` for the k-sum problem, optionally with Σ_j x_j ≤ `size`.
pub fn build(instance: &Instance, k: usize, kind: FormulationKind, size: Option<usize>) -> Result<LinearModel> {
    build_with_budget(instance, k, kind, size, COVER_BUDGET)
}

pub fn build_with_budget(
    instance: &Instance,
    k: usize,
    kind: FormulationKind,
    size: Option<usize>,
    budget: u128,
) -> Result<LinearModel> {
    let (n, m) = (instance.n(), instance.m());
    OwaWeights::TopK(k).validate(n)?;
    if let Some(c) = size {
        if c > m {
            return Err(Error::invalid(format!("committee size {c} outside [0, {m}]")));
        }
    }
    if let FormulationKind::CoverZ(CutPolicy::FullEnumeration) | FormulationKind::CoverX(CutPolicy::FullEnumeration) = kind {
        let count = binomial(n, k);
        if count > budget {
            return Err(Error::ResourceLimit {
                what: format!("cover constraints C({n}, {k})"),
                required: count,
                budget,
            });
        }
    }

    let mut model = LinearModel {
        meta: Some(ModelMeta { kind, n, m, k }),
        ..LinearModel::default()
    };
    let x: Vec<usize> = (0..m).map(|j| model.binary(x_name(j))).collect();
    let p = |i: usize, j: usize| i64::from(instance.approves(i, j));

    match kind {
        FormulationKind::CoverZ(policy) => {
            let z: Vec<Vec<usize>> = (0..n)
                .map(|i| (0..m).map(|j| model.continuous(z_name(i, j))).collect())
                .collect();
            let v = model.continuous("v".into());
            model.objective = vec![(v, 1)];
            for (i, zi) in z.iter().enumerate() {
                for j in 0..m {
                    // z_ij ≥ p_ij (1 − x_j)
                    model.add_constraint(
                        format!("za_{}_{}", i + 1, j + 1),
                        vec![(zi[j], 1), (x[j], p(i, j))],
                        Sense::Ge,
                        p(i, j),
                    )?;
                    // z_ij ≥ (1 − p_ij) x_j
                    model.add_constraint(
                        format!("zb_{}_{}", i + 1, j + 1),
                        vec![(z[i][j], 1), (x[j], p(i, j) - 1)],
                        Sense::Ge,
                        0,
                    )?;
                }
            }
            if policy == CutPolicy::FullEnumeration {
                let mut rows = Vec::new();
                for_each_combination(n, k, |s| rows.push(s.to_vec()));
                for s in rows {
                    add_coverz_row(&mut model, &s)?;
                }
            }
        }
        FormulationKind::CoverX(policy) => {
            let v = model.continuous("v".into());
            model.objective = vec![(v, 1)];
            if policy == CutPolicy::FullEnumeration {
                let mut rows = Vec::new();
                for_each_combination(n, k, |s| rows.push(s.to_vec()));
                for s in rows {
                    let counts = model::subset_counts(instance, &s)?;
                    add_coverx_row(&mut model, &s, &counts)?;
                }
            }
        }
        FormulationKind::KCentrum => {
            let z = hamming_block(&mut model, instance, &x)?;
            let d = distance_block(&mut model, n, &z)?;
            let vi: Vec<usize> = (0..n).map(|i| model.continuous(format!("vi_{}", i + 1))).collect();
            let t = model.continuous("t".into());
            for i in 0..n {
                // vi_i ≥ d_i − t
                model.add_constraint(
                    format!("kc_{}", i + 1),
                    vec![(vi[i], 1), (d[i], -1), (t, 1)],
                    Sense::Ge,
                    0,
                )?;
            }
            model.objective = std::iter::once((t, k as i64))
                .chain(vi.iter().map(|&v| (v, 1)))
                .collect();
        }
        FormulationKind::Assignment => {
            let z = hamming_block(&mut model, instance, &x)?;
            let d = distance_block(&mut model, n, &z)?;
            let u: Vec<usize> = (0..n).map(|i| model.continuous(format!("u_{}", i + 1))).collect();
            let vh: Vec<usize> = (0..k).map(|h| model.continuous(format!("vh_{}", h + 1))).collect();
            for i in 0..n {
                for (h, &vhh) in vh.iter().enumerate() {
                    // u_i + vh_h ≥ d_i
                    model.add_constraint(
                        format!("asg_{}_{}", i + 1, h + 1),
                        vec![(u[i], 1), (vhh, 1), (d[i], -1)],
                        Sense::Ge,
                        0,
                    )?;
                }
            }
            model.objective = u.iter().chain(&vh).map(|&v| (v, 1)).collect();
        }
    }

    if let Some(c) = size {
        model.add_constraint("card", x.iter().map(|&v| (v, 1)).collect(), Sense::Le, c as i64)?;
    }
    Ok(model)
}

/// z_ij ≥ x_j(1 − p_ij) + p_ij(1 − x_j), i.e. z_ij − (1 − 2p_ij) x_j ≥ p_ij.
fn hamming_block(model: &mut LinearModel, instance: &Instance, x: &[usize]) -> Result<Vec<Vec<usize>>> {
    let (n, m) = (instance.n(), instance.m());
    let z: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..m).map(|j| model.continuous(z_name(i, j))).collect())
        .collect();
    for (i, zi) in z.iter().enumerate() {
        for j in 0..m {
            let p = i64::from(instance.approves(i, j));
            model.add_constraint(
                format!("ham_{}_{}", i + 1, j + 1),
                vec![(zi[j], 1), (x[j], 2 * p - 1)],
                Sense::Ge,
                p,
            )?;
        }
    }
    Ok(z)
}

/// d_i ≥ Σ_j z_ij.
fn distance_block(model: &mut LinearModel, n: usize, z: &[Vec<usize>]) -> Result<Vec<usize>> {
    let d: Vec<usize> = (0..n).map(|i| model.continuous(format!("d_{}", i + 1))).collect();
    for i in 0..n {
        let mut terms = vec![(d[i], 1)];
        terms.extend(z[i].iter().map(|&v| (v, -1)));
        model.add_constraint(format!("dist_{}", i + 1), terms, Sense::Ge, 0)?;
    }
    Ok(d)
}

fn cover_name(voters: &[usize]) -> String {
    let mut name = String::from("cov");
    for &i in voters {
        let _ = write!(name, "_{}", i + 1);
    }
    name
}

fn add_coverz_row(model: &mut LinearModel, voters: &[usize]) -> Result<()> {
    let m = model.meta.map_or(0, |meta| meta.m);
    let v = model.variable("v").ok_or_else(|| Error::invalid("model has no v"))?;
    let mut terms = Vec::with_capacity(voters.len() * m + 1);
    for &i in voters {
        for j in 0..m {
            let z = model
                .variable(&z_name(i, j))
                .ok_or_else(|| Error::invalid("model has no z variables"))?;
            terms.push((z, 1));
        }
    }
    terms.push((v, -1));
    model.add_constraint(cover_name(voters), terms, Sense::Le, 0)
}

/// Σ_j (k − 2γ_j(S)) x_j − v ≤ −Σ_j γ_j(S).
fn add_coverx_row(model: &mut LinearModel, voters: &[usize], counts: &[u32]) -> Result<()> {
    let k = voters.len() as i64;
    let v = model.variable("v").ok_or_else(|| Error::invalid("model has no v"))?;
    let mut terms = Vec::with_capacity(counts.len() + 1);
    for (j, &g) in counts.iter().enumerate() {
        let x = model
            .variable(&x_name(j))
            .ok_or_else(|| Error::invalid("cut has more candidates than the model"))?;
        terms.push((x, k - 2 * i64::from(g)));
    }
    terms.push((v, -1));
    let constant: i64 = counts.iter().map(|&g| i64::from(g)).sum();
    model.add_constraint(cover_name(voters), terms, Sense::Le, -constant)
}

/// Appends a separated cut to a cover model (either kind).
pub fn add_cover_cut(model: &mut LinearModel, cut: &Cut) -> Result<()> {
    let meta = model.meta.ok_or_else(|| Error::invalid("model has no formulation metadata"))?;
    if cut.k() != meta.k || cut.counts.len() != meta.m {
        return Err(Error::invalid("cut does not match the model dimensions"));
    }
    match meta.kind {
        FormulationKind::CoverX(_) => add_coverx_row(model, &cut.voters, &cut.counts),
        FormulationKind::CoverZ(_) => add_coverz_row(model, &cut.voters),
        other => Err(Error::invalid(format!("{other} models take no cover cuts"))),
    }
}

/// Result of fixing x in a model and minimising the auxiliary variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub feasible: bool,
    pub objective: i64,
    pub values: Vec<i64>,
}

/// Fixes x to `committee` and gives every other variable its least value
/// compatible with the rows already determined, in the order
/// z → d → (t, vh) → (vi, u, v). For `t` and every `vh_h` that value is
/// the k-th largest distance d_(k); the remaining ones follow from their rows.
/// With binary x every value is an integer. Then all rows are checked.
pub fn evaluate_at(model: &LinearModel, committee: &Committee) -> Result<Evaluation> {
    let meta = model.meta.ok_or_else(|| Error::invalid("model has no formulation metadata"))?;
    if committee.len() != meta.m {
        return Err(Error::invalid(format!(
            "committee has length {}, model has {} candidates",
            committee.len(),
            meta.m
        )));
    }
    let nvars = model.variables.len();
    let mut values: Vec<Option<i64>> = vec![None; nvars];
    for j in 0..meta.m {
        let id = model
            .variable(&x_name(j))
            .ok_or_else(|| Error::invalid(format!("model lacks {}", x_name(j))))?;
        values[id] = Some(i64::from(committee.contains(j)));
    }

    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); nvars];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, _) in &c.terms {
            rows_of[v].push(r);
        }
    }

    let propagate = |fam: &str, values: &mut Vec<Option<i64>>| {
        for (id, var) in model.variables.iter().enumerate() {
            if values[id].is_some() || family(&var.name) != fam {
                continue;
            }
            let mut lo = var.lower;
            for &r in &rows_of[id] {
                if let Some(b) = implied_lower(&model.constraints[r], id, values) {
                    lo = lo.max(b);
                }
            }
            values[id] = Some(lo);
        }
    };

    propagate("z", &mut values);
    propagate("d", &mut values);
    let d: Vec<i64> = (0..meta.n)
        .filter_map(|i| model.variable(&format!("d_{}", i + 1)).and_then(|id| values[id]))
        .collect();
    if !d.is_empty() {
        let mut sorted = d.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let kth = sorted[meta.k - 1];
        for (id, var) in model.variables.iter().enumerate() {
            if matches!(family(&var.name), "t" | "vh") {
                values[id] = Some(kth.max(var.lower));
            }
        }
    }
    for fam in ["vi", "u", "v"] {
        propagate(fam, &mut values);
    }

    let values: Vec<i64> = values
        .into_iter()
        .zip(&model.variables)
        .map(|(v, var)| v.unwrap_or(var.lower))
        .collect();
    let feasible = model.variables.iter().zip(&values).all(|(var, &v)| {
        v >= var.lower && var.upper.is_none_or(|u| v <= u)
    }) && model.constraints.iter().all(|c| {
        let lhs: i64 = c.terms.iter().map(|&(v, a)| a * values[v]).sum();
        match c.sense {
            Sense::Le => lhs <= c.rhs,
            Sense::Ge => lhs >= c.rhs,
            Sense::Eq => lhs == c.rhs,
        }
    });
    let objective = model.objective.iter().map(|&(v, a)| a * values[v]).sum();
    Ok(Evaluation {
        feasible,
        objective,
        values,
    })
}

fn family(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

/// Lower bound on `target` implied by row `c` when every other variable is set.
fn implied_lower(c: &Constraint, target: usize, values: &[Option<i64>]) -> Option<i64> {
    let mut coef = 0;
    let mut rest = 0;
    for &(v, a) in &c.terms {
        if v == target {
            coef = a;
        } else {
            rest += a * values[v]?;
        }
    }
    // coef * target (sense) rhs - rest
    let slack = c.rhs - rest;
    match (c.sense, coef.signum()) {
        (Sense::Ge, 1) | (Sense::Eq, 1) => Some(div_ceil(slack, coef)),
        (Sense::Le, -1) | (Sense::Eq, -1) => Some(div_ceil(-slack, -coef)),
        _ => None,
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    let q = a / b;
    if a % b != 0 && a > 0 {
        q + 1
    } else {
        q
    }
}

fn push_terms(out: &mut String, model: &LinearModel, terms: &[(usize, i64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for (pos, &(v, a)) in terms.iter().enumerate() {
        let sign = if a < 0 { "-" } else { "+" };
        if pos > 0 || a < 0 {
            out.push(' ');
            out.push_str(sign);
        }
        out.push(' ');
        if a.abs() != 1 {
            let _ = write!(out, "{} ", a.abs());
        }
        out.push_str(&model.variables[v].name);
    }
}

/// Renders the model in LP text format.
///
/// Sections: `Minimize`, `Subject To` (omitted when there are no rows),
/// `Bounds`, `Binaries`, `End`. A leading `\` comment records the formulation.
/// Rendering is deterministic.
pub fn format_lp(model: &LinearModel) -> String {
    let mut out = String::new();
    if let Some(meta) = model.meta {
        let _ = writeln!(
            out,
            "\\ kvote kind={} n={} m={} k={}",
            meta.kind, meta.n, meta.m, meta.k
        );
    }
    out.push_str("Minimize\n obj:");
    push_terms(&mut out, model, &model.objective);
    out.push('\n');
    if !model.constraints.is_empty() {
        out.push_str("Subject To\n");
        for c in &model.constraints {
            let _ = write!(out, " {}:", c.name);
            push_terms(&mut out, model, &c.terms);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
        }
    }
    let bounded: Vec<&Variable> = model.variables.iter().filter(|v| !v.integer).collect();
    if !bounded.is_empty() {
        out.push_str("Bounds\n");
        for v in bounded {
            match v.upper {
                Some(u) => {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, u);
                }
                None => {
                    let _ = writeln!(out, " {} >= {}", v.name, v.lower);
                }
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.integer)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_lp(model))?;
    Ok(())
}

pub fn read_lp(path: impl AsRef<Path>) -> Result<LinearModel> {
    parse_lp(&fs::read_to_string(path)?)
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    Binaries,
    End,
}

/// Parses the subset of LP format produced by [`format_lp`].
///
type ParsedRow = (String, Vec<(String, i64)>, Sense, i64);

/// Binaries are declared first in the resulting model, followed by the
/// continuous variables in `Bounds` order; this matches every model built here.
pub fn parse_lp(text: &str) -> Result<LinearModel> {
    let mut meta = None;
    let mut objective_terms: Vec<(String, i64)> = Vec::new();
    let mut rows: Vec<ParsedRow> = Vec::new();
    let mut continuous: Vec<(String, i64, Option<i64>)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();
    let mut section = Section::Start;

    for (lineno, raw) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('\\') {
            if section == Section::Start {
                meta = parse_meta(comment.trim(), lineno)?;
            }
            continue;
        }
        let next = match line {
            "Minimize" => Some(Section::Objective),
            "Subject To" => Some(Section::Rows),
            "Bounds" => Some(Section::Bounds),
            "Binaries" => Some(Section::Binaries),
            "End" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        let col = raw.len() - raw.trim_start().len() + 1;
        match section {
            Section::Objective => {
                let body = line.strip_prefix("obj:").unwrap_or(line);
                objective_terms = parse_terms(body, lineno, col)?;
            }
            Section::Rows => {
                let (name, body) = line
                    .split_once(':')
                    .ok_or_else(|| Error::parse(lineno, col, "constraint without a name"))?;
                let (sense, pos) = ["<=", ">=", "="]
                    .iter()
                    .find_map(|s| body.find(s).map(|p| (*s, p)))
                    .ok_or_else(|| Error::parse(lineno, col, "constraint without a sense"))?;
                let sense = match sense {
                    "<=" => Sense::Le,
                    ">=" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let lhs = parse_terms(&body[..pos], lineno, col)?;
                let rhs_text = body[pos..].trim_start_matches(['<', '>', '=']).trim();
                let rhs = rhs_text
                    .parse::<i64>()
                    .map_err(|e| Error::parse(lineno, col, format!("bad right-hand side {rhs_text:?}: {e}")))?;
                rows.push((name.trim().to_string(), lhs, sense, rhs));
            }
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let num = |s: &str| {
                    s.parse::<i64>()
                        .map_err(|e| Error::parse(lineno, col, format!("bad bound {s:?}: {e}")))
                };
                match toks.as_slice() {
                    [name, ">=", lo] => continuous.push((name.to_string(), num(lo)?, None)),
                    [lo, "<=", name, "<=", hi] => {
                        continuous.push((name.to_string(), num(lo)?, Some(num(hi)?)))
                    }
                    _ => return Err(Error::parse(lineno, col, format!("unsupported bound {line:?}"))),
                }
            }
            Section::Binaries => binaries.extend(line.split_whitespace().map(String::from)),
            Section::Start | Section::End => {
                return Err(Error::parse(lineno, col, format!("unexpected text {line:?}")))
            }
        }
    }
    if section != Section::End {
        return Err(Error::parse(text.lines().count() + 1, 1, "missing End"));
    }

    let mut model = LinearModel {
        meta,
        ..LinearModel::default()
    };
    for name in binaries {
        model.add_variable(name, 0, Some(1), true)?;
    }
    for (name, lo, hi) in continuous {
        model.add_variable(name, lo, hi, false)?;
    }
    let resolve = |model: &LinearModel, terms: Vec<(String, i64)>| -> Result<Vec<(usize, i64)>> {
        terms
            .into_iter()
            .map(|(name, a)| {
                model
                    .variable(&name)
                    .map(|id| (id, a))
                    .ok_or_else(|| Error::invalid(format!("undeclared variable {name}")))
            })
            .collect()
    };
    model.objective = resolve(&model, objective_terms)?;
    for (name, terms, sense, rhs) in rows {
        let terms = resolve(&model, terms)?;
        model.add_constraint(name, terms, sense, rhs)?;
    }
    Ok(model)
}

fn parse_meta(comment: &str, lineno: usize) -> Result<Option<ModelMeta>> {
    let Some(rest) = comment.strip_prefix("kvote") else {
        return Ok(None);
    };
    let mut kind = None;
    let (mut n, mut m, mut k) = (None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, 1, format!("bad header field {field:?}")))?;
        let num = || {
            value
                .parse::<usize>()
                .map_err(|e| Error::parse(lineno, 1, format!("bad {key}: {e}")))
        };
        match key {
            "kind" => kind = Some(value.parse::<FormulationKind>()?),
            "n" => n = Some(num()?),
            "m" => m = Some(num()?),
            "k" => k = Some(num()?),
            _ => return Err(Error::parse(lineno, 1, format!("unknown header key {key:?}"))),
        }
    }
    match (kind, n, m, k) {
        (Some(kind), Some(n), Some(m), Some(k)) => Ok(Some(ModelMeta { kind, n, m, k })),
        _ => Err(Error::parse(lineno, 1, "incomplete kvote header")),
    }
}

fn parse_terms(body: &str, lineno: usize, col: usize) -> Result<Vec<(String, i64)>> {
    let mut terms = Vec::new();
    let mut sign = 1i64;
    let mut coef: Option<i64> = None;
    for tok in body.split_whitespace() {
        match tok {
            "+" => sign = 1,
            "-" => sign = -1,
            _ => {
                if let Ok(c) = tok.parse::<i64>() {
                    if coef.is_some() {
                        return Err(Error::parse(lineno, col, format!("two coefficients in a row near {tok:?}")));
                    }
                    coef = Some(c);
                } else {
                    terms.push((tok.to_string(), sign * coef.take().unwrap_or(1)));
                    sign = 1;
                }
            }
        }
    }
    match coef {
        // a lone "0" stands for an empty expression
        Some(0) if terms.is_empty() => Ok(terms),
        Some(_) => Err(Error::parse(lineno, col, "coefficient without a variable")),
        None => Ok(terms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::separate_committee;

    fn t1() -> Instance {
        Instance::from_rows(&["110", "101", "011"]).unwrap()
    }

    fn c(s: &str) -> Committee {
        s.parse().unwrap()
    }

    const ALL_KINDS: [FormulationKind; 6] = [
        FormulationKind::CoverZ(CutPolicy::FullEnumeration),
        FormulationKind::CoverZ(CutPolicy::SeedOnly),
        FormulationKind::CoverX(CutPolicy::FullEnumeration),
        FormulationKind::CoverX(CutPolicy::SeedOnly),
        FormulationKind::KCentrum,
        FormulationKind::Assignment,
    ];

    #[test]
    fn kcentrum_dimensions() {
        let model = build(&t1(), 1, FormulationKind::KCentrum, None).unwrap();
        assert_eq!(model.binaries(), 3);
        assert_eq!(model.continuous_count(), 9 + 3 + 3 + 1);
        assert_eq!(model.constraints.len(), 15);
        assert_eq!(model.count_rows("ham_"), 9);
        assert_eq!(model.count_rows("dist_"), 3);
        assert_eq!(model.count_rows("kc_"), 3);
    }

    #[test]
    fn cover_dimensions() {
        let t = t1();
        let model = build(&t, 2, FormulationKind::CoverX(CutPolicy::FullEnumeration), None).unwrap();
        assert_eq!(model.constraints.len(), 3);
        assert_eq!((model.binaries(), model.continuous_count()), (3, 1));
        let seed = build(&t, 2, FormulationKind::CoverX(CutPolicy::SeedOnly), None).unwrap();
        assert!(seed.constraints.is_empty());

        let model = build(&t, 2, FormulationKind::CoverZ(CutPolicy::FullEnumeration), None).unwrap();
        assert_eq!(model.continuous_count(), 9 + 1);
        assert_eq!(model.constraints.len(), 2 * 9 + 3);
        let seed = build(&t, 2, FormulationKind::CoverZ(CutPolicy::SeedOnly), None).unwrap();
        assert_eq!(seed.constraints.len(), 18);
    }

    #[test]
    fn assignment_dimensions() {
        let model = build(&t1(), 2, FormulationKind::Assignment, None).unwrap();
        assert_eq!(model.count_rows("asg_"), 6);
        assert_eq!(model.continuous_count(), 9 + 3 + 3 + 2);
    }

    #[test]
    fn cardinality_row() {
        for kind in ALL_KINDS {
            let plain = build(&t1(), 2, kind, None).unwrap();
            let model = build(&t1(), 2, kind, Some(2)).unwrap();
            assert_eq!(model.constraints.len(), plain.constraints.len() + 1);
            assert_eq!(model.count_rows("card"), 1);
        }
        assert!(build(&t1(), 2, FormulationKind::KCentrum, Some(4)).is_err());
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(build(&t1(), 0, FormulationKind::KCentrum, None).is_err());
        let big = Instance::from_rows(&vec!["1"; 30]).unwrap();
        match build(&big, 15, FormulationKind::CoverX(CutPolicy::FullEnumeration), None) {
            Err(Error::ResourceLimit { required, .. }) => assert_eq!(required, 155_117_520),
            other => panic!("{other:?}"),
        }
        assert!(build(&big, 15, FormulationKind::CoverX(CutPolicy::SeedOnly), None).is_ok());
    }

    #[test]
    fn evaluation_examples() {
        let t = t1();
        let model = build(&t, 2, FormulationKind::KCentrum, None).unwrap();
        let e = evaluate_at(&model, &c("111")).unwrap();
        assert!(e.feasible);
        assert_eq!(e.objective, 2);

        let model = build(&t, 2, FormulationKind::CoverX(CutPolicy::FullEnumeration), None).unwrap();
        let e = evaluate_at(&model, &c("111")).unwrap();
        assert_eq!((e.feasible, e.objective), (true, 2));

        let model = build(&t, 2, FormulationKind::Assignment, None).unwrap();
        let e = evaluate_at(&model, &c("110")).unwrap();
        assert_eq!((e.feasible, e.objective), (true, 4));

        assert!(evaluate_at(&model, &c("11")).is_err());
    }

    #[test]
    fn cardinality_infeasibility_is_reported() {
        let model = build(&t1(), 2, FormulationKind::KCentrum, Some(1)).unwrap();
        assert!(!evaluate_at(&model, &c("110")).unwrap().feasible);
        assert!(evaluate_at(&model, &c("100")).unwrap().feasible);
    }

    #[test]
    fn every_kind_scores_every_committee() {
        let inst = Instance::from_rows(&["1100", "1010", "0111", "0001"]).unwrap();
        for k in 1..=4 {
            for kind in ALL_KINDS {
                if matches!(kind, FormulationKind::CoverX(CutPolicy::SeedOnly) | FormulationKind::CoverZ(CutPolicy::SeedOnly)) {
                    continue;
                }
                let model = build(&inst, k, kind, None).unwrap();
                for code in 0..16 {
                    let x = Committee::from_code(code, 4);
                    let e = evaluate_at(&model, &x).unwrap();
                    let s = model::score(&inst, &x, OwaWeights::TopK(k)).unwrap().score;
                    assert!(e.feasible, "{kind} k={k} x={x}");
                    assert_eq!(e.objective as u64, s, "{kind} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn cuts_extend_seed_models() {
        let t = t1();
        for kind in [FormulationKind::CoverX(CutPolicy::SeedOnly), FormulationKind::CoverZ(CutPolicy::SeedOnly)] {
            let mut model = build(&t, 2, kind, None).unwrap();
            let before = model.constraints.len();
            let cut = separate_committee(&t, &c("110"), 0, 2).unwrap().unwrap();
            add_cover_cut(&mut model, &cut).unwrap();
            assert_eq!(model.constraints.len(), before + 1);
            assert!(add_cover_cut(&mut model, &cut).is_err(), "duplicate row");
            let e = evaluate_at(&model, &c("110")).unwrap();
            assert_eq!(e.objective, 4);
        }
        let mut kc = build(&t, 2, FormulationKind::KCentrum, None).unwrap();
        let cut = separate_committee(&t, &c("110"), 0, 2).unwrap().unwrap();
        assert!(add_cover_cut(&mut kc, &cut).is_err());
    }

    #[test]
    fn lp_text_for_seed_model() {
        let model = build(&t1(), 2, FormulationKind::CoverX(CutPolicy::SeedOnly), None).unwrap();
        assert_eq!(
            format_lp(&model),
            "\\ kvote kind=coverx-seed n=3 m=3 k=2\nMinimize\n obj: v\nBounds\n v >= 0\nBinaries\n x_1\n x_2\n x_3\nEnd\n"
        );
    }

    #[test]
    fn lp_round_trip_all_kinds() {
        let inst = Instance::from_rows(&["1100", "1010", "0111", "0001"]).unwrap();
        for kind in ALL_KINDS {
            for size in [None, Some(2)] {
                let model = build(&inst, 2, kind, size).unwrap();
                let text = format_lp(&model);
                let back = parse_lp(&text).unwrap();
                assert_eq!(back, model, "{kind}");
                assert_eq!(format_lp(&back), text);
            }
        }
    }

    #[test]
    fn lp_parse_errors() {
        assert!(parse_lp("Minimize\n obj: v\n").is_err());
        assert!(parse_lp("Minimize\n obj: v\nSubject To\n c1: v\nEnd\n").is_err());
        assert!(parse_lp("Minimize\n obj: y\nEnd\n").is_err());
        match parse_lp("Minimize\n obj: v\nBounds\n v in 0\nEnd\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ceil_division() {
        assert_eq!(div_ceil(3, 2), 2);
        assert_eq!(div_ceil(-3, 2), -1);
        assert_eq!(div_ceil(4, 2), 2);
        assert_eq!(div_ceil(0, 3), 0);
    }
}
