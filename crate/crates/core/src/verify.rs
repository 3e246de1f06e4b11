//! Turns findings into bug reports: interprocedural refinement, access
//! check and developer-enforced check suppression.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::alias::AliasGraph;
use crate::detect::{BugKind, Finding};
use crate::graph::PropertyGraph;
use crate::ir::{FunctionIr, Location, PackageIr, Statement, Terminator, Ty, RETURN_LOCAL};
use crate::types::TraitMap;

/// Splits a callee path into `::` segments, ignoring generic arguments.
fn path_segments(path: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = path.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'<' => depth += 1,
            b'>' => depth -= 1,
            b':' if depth == 0 && bytes.get(i + 1) == Some(&b':') => {
                out.push(&path[start..i]);
                i += 2;
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    out.push(&path[start..]);
    out.into_iter()
        .map(|s| s.split('<').next().unwrap_or("").trim())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Whether `pattern`'s segments are a suffix of `callee`'s segments.
pub fn callee_matches(callee: &str, pattern: &str) -> bool {
    let c = path_segments(callee);
    let p = path_segments(pattern);
    !p.is_empty() && c.ends_with(&p)
}

/// Callees whose contracts make a pointer argument an access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsafeApiCatalog {
    pub general: Vec<String>,
    /// Consulted for mismatched-scope findings only.
    pub encoding: Vec<String>,
}

impl Default for UnsafeApiCatalog {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        UnsafeApiCatalog {
            general: s(&[
                "ptr::read",
                "ptr::copy",
                "ptr::as_ref",
                "slice::from_raw_parts",
                "slice::from_raw_parts_mut",
                "ptr::write",
            ]),
            encoding: s(&["str::from_utf8_unchecked", "CStr::from_ptr"]),
        }
    }
}

impl UnsafeApiCatalog {
    pub fn matches(&self, callee: &str, kind: BugKind) -> bool {
        let extra: &[String] = if kind == BugKind::MismatchedScope { &self.encoding } else { &[] };
        self.general.iter().chain(extra).any(|p| callee_matches(callee, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckPosition {
    Pre,
    Post,
}

/// Developer-enforced check patterns: callee path to the detectors it
/// guards and whether it must precede or follow the conversion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CheckCatalog {
    pub entries: BTreeMap<String, BTreeMap<BugKind, CheckPosition>>,
}

impl Default for CheckCatalog {
    fn default() -> Self {
        use BugKind::*;
        use CheckPosition::*;
        let table: &[(&str, BugKind, CheckPosition)] = &[
            ("mem::align_of", Misalignment, Pre),
            ("mem::align_of_val", Misalignment, Pre),
            ("alloc::alloc", Misalignment, Pre),
            ("alloc::alloc_zeroed", Misalignment, Pre),
            ("Layout::from_size_align", Misalignment, Pre),
            ("ptr::read_unaligned", Misalignment, Post),
            ("ptr::write_unaligned", Misalignment, Post),
            ("mem::size_of", InconsistentLayout, Pre),
            ("mem::size_of_val", InconsistentLayout, Pre),
            ("str::from_utf8", MismatchedScope, Pre),
            ("char::from_u32", MismatchedScope, Pre),
            ("CStr::from_bytes_with_nul", MismatchedScope, Pre),
        ];
        let mut entries: BTreeMap<String, BTreeMap<BugKind, CheckPosition>> = BTreeMap::new();
        for (name, kind, pos) in table {
            entries.entry(name.to_string()).or_default().insert(*kind, *pos);
        }
        CheckCatalog { entries }
    }
}

impl CheckCatalog {
    pub fn merge(&mut self, other: CheckCatalog) {
        for (name, kinds) in other.entries {
            self.entries.entry(name).or_default().extend(kinds);
        }
    }

    /// The first pattern (in name order) matching `callee` for `kind`.
    pub fn lookup(&self, callee: &str, kind: BugKind) -> Option<(&str, CheckPosition)> {
        self.entries
            .iter()
            .filter(|(name, _)| callee_matches(callee, name))
            .find_map(|(name, kinds)| kinds.get(&kind).map(|p| (name.as_str(), *p)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub interprocedural: bool,
    pub unsafe_apis: UnsafeApiCatalog,
    pub checks: CheckCatalog,
}

impl VerifyOptions {
    pub fn new(interprocedural: bool) -> VerifyOptions {
        VerifyOptions { interprocedural, ..VerifyOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    DerefInFunction,
    UnsafeApiArgument,
    ReturnedAsReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessEvidence {
    pub kind: EvidenceKind,
    pub function: String,
    pub site: Location,
    pub aliased_local: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionReason {
    PreTypeCheck,
    PostTypeCheck,
    CallerConversionChain,
    ConstructorGuard,
}

/// A matched check pattern. `applied` is false for patterns found in the
/// wrong position relative to the conversion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Suppression {
    pub reason: SuppressionReason,
    pub function: String,
    pub site: Location,
    pub pattern: String,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BugReport {
    pub package: String,
    pub finding: Finding,
    pub evidence: AccessEvidence,
    pub suppressions_considered: Vec<Suppression>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reported,
    Refined,
    NoAccess,
    Suppressed,
}

/// Full verification trail for one finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub finding: Finding,
    pub outcome: Outcome,
    pub evidence: Option<AccessEvidence>,
    pub suppressions: Vec<Suppression>,
}

fn first_after<'a>(
    func: &'a FunctionIr,
    site: Location,
) -> impl Iterator<Item = (Location, Option<&'a Statement>, Option<&'a Terminator>)> + 'a {
    func.blocks.iter().enumerate().flat_map(move |(b, block)| {
        let stmts = block
            .statements
            .iter()
            .enumerate()
            .map(move |(i, s)| (Location::new(b as u32, i as u32), Some(s), None));
        let term = std::iter::once((Location::new(b as u32, block.statements.len() as u32), None, Some(&block.terminator)));
        stmts.chain(term)
    })
    .filter(move |(loc, ..)| *loc > site)
}

/// Dereference of, or unsafe-API call on, a local aliasing the converted
/// pointer after the conversion site.
pub fn access_in_function(f: &Finding, func: &FunctionIr, g: &AliasGraph, apis: &UnsafeApiCatalog) -> Option<AccessEvidence> {
    let dst = f.pair.dst_local;
    let evidence = |kind, site, aliased_local| AccessEvidence { kind, function: func.name.clone(), site, aliased_local };
    for (loc, stmt, term) in first_after(func, f.pair.site) {
        if let Some(Statement::Assign { lhs, rvalue }) = stmt {
            let places = std::iter::once(*lhs).chain(rvalue.operand().place);
            if let Some(p) = places.filter(|p| p.deref).find(|p| g.aliases(p.local, dst)) {
                return Some(evidence(EvidenceKind::DerefInFunction, loc, p.local));
            }
        }
        if let Some(Terminator::Call { callee, args, is_unsafe_api, .. }) = term {
            if let Some(p) = args.iter().filter_map(|a| a.place).find(|p| p.deref && g.aliases(p.local, dst)) {
                return Some(evidence(EvidenceKind::DerefInFunction, loc, p.local));
            }
            if *is_unsafe_api || apis.matches(callee, f.kind) {
                if let Some(l) = args.iter().filter_map(|a| a.local()).find(|&l| g.aliases(l, dst)) {
                    return Some(evidence(EvidenceKind::UnsafeApiArgument, loc, l));
                }
            }
        }
    }
    None
}

/// Evidence when the function returns a top-level reference that aliases
/// the converted pointer.
pub fn accessible_to_caller(f: &Finding, func: &FunctionIr, g: &AliasGraph) -> Option<AccessEvidence> {
    if !func.return_type.is_reference() || !g.aliases(RETURN_LOCAL, f.pair.dst_local) {
        return None;
    }
    let site = func
        .blocks
        .iter()
        .enumerate()
        .find(|(_, b)| matches!(b.terminator, Terminator::Return))
        .map(|(i, b)| Location::new(i as u32, b.statements.len() as u32))
        .unwrap_or(f.pair.site);
    Some(AccessEvidence {
        kind: EvidenceKind::ReturnedAsReference,
        function: func.name.clone(),
        site,
        aliased_local: RETURN_LOCAL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Own,
    Caller,
    Callee,
    Constructor,
}

/// Aggregates the conversion's source may stem from: the method receiver
/// and the aggregate types of locals reachable from the source operand.
fn source_aggregates(f: &Finding, func: &FunctionIr, g: &AliasGraph) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = func.method_of.iter().cloned().collect();
    if let Some(src) = f.pair.src_local {
        let mut locals = g.descendants(src).unwrap_or_default();
        locals.insert(src);
        for l in locals {
            if let Some(name) = func.local_ty(l).and_then(Ty::base_adt) {
                out.insert(name.to_string());
            }
        }
    }
    out
}

/// Package functions constructing the types the conversion's source may
/// stem from, excluding the finding's own function.
pub fn constructors_for(f: &Finding, func: &FunctionIr, pg: &PropertyGraph) -> Vec<String> {
    let Some(record) = pg.record(&func.name) else { return Vec::new() };
    let set: BTreeSet<String> = source_aggregates(f, func, &record.alias_graph)
        .into_iter()
        .flat_map(|name| pg.find_constructors(&Ty::adt(name)))
        .filter(|c| *c != func.name)
        .collect();
    set.into_iter().collect()
}

/// The finding's function plus, when interprocedural analysis is on, its
/// depth-1 callers, callees and constructors defined in the package.
pub fn reachable_functions<'a>(
    f: &Finding,
    pg: &PropertyGraph,
    pkg: &'a PackageIr,
    interprocedural: bool,
) -> Vec<(&'a FunctionIr, Role)> {
    let Some(own) = pg.function(pkg, &f.pair.function) else { return Vec::new() };
    let mut roles: BTreeMap<&str, Role> = BTreeMap::new();
    if interprocedural {
        for c in pg.callers_of(&own.name) {
            if let Some(func) = pg.function(pkg, &c) {
                roles.insert(&func.name, Role::Caller);
            }
        }
        for c in pg.callees_of(&own.name) {
            if let Some(func) = pg.function(pkg, &c) {
                roles.insert(&func.name, Role::Callee);
            }
        }
        for c in constructors_for(f, own, pg) {
            if let Some(func) = pg.function(pkg, &c) {
                roles.insert(&func.name, Role::Constructor);
            }
        }
    }
    roles.remove(own.name.as_str());
    std::iter::once((own, Role::Own))
        .chain(roles.into_iter().filter_map(|(name, role)| pg.function(pkg, name).map(|func| (func, role))))
        .collect()
}

/// Every check pattern found in the reachable functions, in reachable
/// order. Patterns in the finding's own function apply only in their
/// stated position; in other functions any occurrence applies.
pub fn dev_check_candidates(f: &Finding, reachable: &[(&FunctionIr, Role)], checks: &CheckCatalog) -> Vec<Suppression> {
    let mut out = Vec::new();
    if f.kind == BugKind::InconsistentLayout {
        for b in f.pair.bounds.iter().filter(|b| TraitMap::is_layout_guard(b)) {
            out.push(Suppression {
                reason: SuppressionReason::PreTypeCheck,
                function: f.pair.function.clone(),
                site: f.pair.site,
                pattern: format!("bound {b}"),
                applied: true,
            });
        }
    }
    for (func, role) in reachable {
        for (loc, callee, ..) in func.calls() {
            let Some((pattern, position)) = checks.lookup(callee, f.kind) else { continue };
            let positional = match position {
                CheckPosition::Pre => SuppressionReason::PreTypeCheck,
                CheckPosition::Post => SuppressionReason::PostTypeCheck,
            };
            let (reason, applied) = match role {
                Role::Own => {
                    let ok = match position {
                        CheckPosition::Pre => loc < f.pair.site,
                        CheckPosition::Post => loc > f.pair.site,
                    };
                    (positional, ok)
                }
                Role::Constructor => (SuppressionReason::ConstructorGuard, true),
                Role::Caller | Role::Callee => (positional, true),
            };
            out.push(Suppression { reason, function: func.name.clone(), site: loc, pattern: pattern.to_string(), applied });
        }
    }
    out
}

pub fn has_dev_check(f: &Finding, reachable: &[(&FunctionIr, Role)], checks: &CheckCatalog) -> Option<Suppression> {
    dev_check_candidates(f, reachable, checks).into_iter().find(|s| s.applied)
}

/// Drops the finding when its source flows in from a parameter and every
/// caller produced that argument by the inverse conversion (or a
/// constructor performs the inverse conversion). `Err` carries the reason.
pub fn interprocedural_refine(f: Finding, pg: &PropertyGraph, pkg: &PackageIr) -> Result<Finding, Suppression> {
    let Some(func) = pg.function(pkg, &f.pair.function) else { return Ok(f) };
    let Some(record) = pg.record(&func.name) else { return Ok(f) };
    let inverted = |p: &crate::graph::ConversionPair| p.src == f.pair.dst && p.dst == f.pair.src;

    let from_param = f
        .pair
        .src_local
        .is_some_and(|s| func.params.iter().any(|p| record.alias_graph.aliases(s, p.local)));
    let callers: Vec<&FunctionIr> = pg.callers_of(&func.name).iter().filter_map(|c| pg.function(pkg, c)).collect();
    if from_param && !callers.is_empty() {
        let mut chain = Vec::new();
        for caller in &callers {
            let Some(crec) = pg.record(&caller.name) else { break };
            let args: Vec<u32> = caller
                .calls()
                .filter(|(_, callee, ..)| *callee == func.name)
                .flat_map(|(_, _, args, ..)| args.iter().filter_map(|a| a.local()))
                .collect();
            let hit = crec
                .conversion_pairs
                .iter()
                .find(|p| inverted(p) && args.iter().any(|&a| crec.alias_graph.aliases(a, p.dst_local)));
            match hit {
                Some(p) => chain.push((caller.name.clone(), p.site)),
                None => break,
            }
        }
        if chain.len() == callers.len() {
            let (function, site) = chain.swap_remove(0);
            return Err(Suppression {
                reason: SuppressionReason::CallerConversionChain,
                function,
                site,
                pattern: format!("{} -> {}", f.pair.dst, f.pair.src),
                applied: true,
            });
        }
    }

    for c in constructors_for(&f, func, pg) {
        if let Some(p) = pg.record(&c).and_then(|r| r.conversion_pairs.iter().find(|p| inverted(p))) {
            return Err(Suppression {
                reason: SuppressionReason::ConstructorGuard,
                function: c.clone(),
                site: p.site,
                pattern: format!("{} -> {}", f.pair.dst, f.pair.src),
                applied: true,
            });
        }
    }
    Ok(f)
}

/// Runs the verification pipeline and keeps the full trail.
pub fn verify_detailed(f: Finding, pg: &PropertyGraph, pkg: &PackageIr, opts: &VerifyOptions) -> Verification {
    let f = if opts.interprocedural {
        match interprocedural_refine(f.clone(), pg, pkg) {
            Ok(kept) => kept,
            Err(s) => return Verification { finding: f, outcome: Outcome::Refined, evidence: None, suppressions: vec![s] },
        }
    } else {
        f
    };
    let (Some(func), Some(record)) = (pg.function(pkg, &f.pair.function), pg.record(&f.pair.function)) else {
        return Verification { finding: f, outcome: Outcome::NoAccess, evidence: None, suppressions: Vec::new() };
    };
    let g = &record.alias_graph;
    let evidence = access_in_function(&f, func, g, &opts.unsafe_apis).or_else(|| accessible_to_caller(&f, func, g));
    let reachable = reachable_functions(&f, pg, pkg, opts.interprocedural);
    let suppressions = dev_check_candidates(&f, &reachable, &opts.checks);
    let outcome = match (&evidence, suppressions.iter().any(|s| s.applied)) {
        (None, _) => Outcome::NoAccess,
        (Some(_), true) => Outcome::Suppressed,
        (Some(_), false) => Outcome::Reported,
    };
    Verification { finding: f, outcome, evidence, suppressions }
}

pub fn verify(f: Finding, pg: &PropertyGraph, pkg: &PackageIr, opts: &VerifyOptions) -> Option<BugReport> {
    let v = verify_detailed(f, pg, pkg, opts);
    match (v.outcome, v.evidence) {
        (Outcome::Reported, Some(evidence)) => Some(BugReport {
            package: pkg.name.clone(),
            finding: v.finding,
            evidence,
            suppressions_considered: v.suppressions,
        }),
        _ => None,
    }
}
