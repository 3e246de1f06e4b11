//! Package-wide property graph: per-function records, call edges and a
//! return-type index used for constructor discovery.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::alias::{build_alias_graph, AliasGraph};
use crate::ir::{validate, FunctionIr, LocalId, Location, PackageIr, Rvalue, Statement, Ty, Violation};
use crate::types::{get_trait_bounds, visibility_of, TraitMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Cast,
    Transmute,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Cast => "cast",
            Operation::Transmute => "transmute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scenario {
    ConCon,
    ConGen,
    GenCon,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One cast or transmute. `src` and `dst` are the compared types: the
/// pointees when both sides are pointers, the declared types otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversionPair {
    pub function: String,
    pub site: Location,
    pub operation: Operation,
    pub src: Ty,
    pub dst: Ty,
    pub src_decl: Ty,
    pub dst_decl: Ty,
    pub src_local: Option<LocalId>,
    pub dst_local: LocalId,
    pub dst_mutable: bool,
    pub scenario: Scenario,
    pub generic_param: Option<String>,
    pub bounds: BTreeSet<String>,
}

impl ConversionPair {
    /// The pair with its generic side replaced by `with`.
    pub fn substituted(&self, with: &Ty) -> ConversionPair {
        let mut out = self.clone();
        if let Some(param) = &self.generic_param {
            out.src = self.src.substitute(param, with);
            out.dst = self.dst.substitute(param, with);
            out.src_decl = self.src_decl.substitute(param, with);
            out.dst_decl = self.dst_decl.substitute(param, with);
        }
        out.scenario = Scenario::ConCon;
        out.generic_param = None;
        out
    }
}

fn compared(src: &Ty, dst: &Ty) -> (Ty, Ty) {
    match (src.pointee(), dst.pointee()) {
        (Some(s), Some(d)) => (s.clone(), d.clone()),
        _ => (src.clone(), dst.clone()),
    }
}

/// One pair per cast/transmute whose sides are not both generic.
pub fn collect_conversion_pairs(func: &FunctionIr, bounds: &BTreeMap<String, BTreeSet<String>>) -> Vec<ConversionPair> {
    let mut out = Vec::new();
    for (site, stmt) in func.statements() {
        let Statement::Assign { lhs, rvalue } = stmt else { continue };
        let (operation, src_decl, dst_decl) = match rvalue {
            Rvalue::CastPtrToPtr { src_type, dst_type, .. } => (Operation::Cast, src_type, dst_type),
            Rvalue::Transmute { src_type, dst_type, .. } => (Operation::Transmute, src_type, dst_type),
            _ => continue,
        };
        let (src, dst) = compared(src_decl, dst_decl);
        let (scenario, generic_param) = match (src.generic_param(), dst.generic_param()) {
            (Some(_), Some(_)) => continue,
            (Some(p), None) => (Scenario::GenCon, Some(p.to_string())),
            (None, Some(p)) => (Scenario::ConGen, Some(p.to_string())),
            (None, None) => (Scenario::ConCon, None),
        };
        let pair_bounds = generic_param
            .as_ref()
            .and_then(|p| bounds.get(p).cloned())
            .unwrap_or_default();
        out.push(ConversionPair {
            function: func.name.clone(),
            site,
            operation,
            dst_mutable: dst_decl.is_mut_pointer(),
            src,
            dst,
            src_decl: src_decl.clone(),
            dst_decl: dst_decl.clone(),
            src_local: rvalue.operand().local(),
            dst_local: lhs.local,
            scenario,
            generic_param,
            bounds: pair_bounds,
        });
    }
    out
}

/// Number of cast/transmute rvalues in a function, including generic-to-generic ones.
pub fn count_conversions(func: &FunctionIr) -> usize {
    func.statements()
        .filter(|(_, s)| matches!(s, Statement::Assign { rvalue, .. } if rvalue.conversion().is_some()))
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionRecord {
    pub name: String,
    pub return_type: Ty,
    pub method_of: Option<String>,
    pub marked_unsafe: bool,
    pub visible: bool,
    pub conversion_pairs: Vec<ConversionPair>,
    pub trait_bounds: BTreeMap<String, BTreeSet<String>>,
    pub alias_graph: AliasGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyGraph {
    pub records: BTreeMap<String, FunctionRecord>,
    pub call_edges: BTreeSet<(String, String)>,
    pub return_index: BTreeMap<String, BTreeSet<String>>,
    #[serde(skip)]
    pub trait_map: TraitMap,
    /// Position of each function in the package's function list.
    #[serde(skip)]
    function_index: BTreeMap<String, usize>,
    /// `call_edges` keyed by callee.
    #[serde(skip)]
    callers: BTreeMap<String, BTreeSet<String>>,
}

/// Key under which a return type is indexed: the aggregate name for ADTs,
/// the rendered type otherwise.
pub fn return_type_key(ty: &Ty) -> String {
    match ty {
        Ty::Adt { name } => name.clone(),
        other => other.to_string(),
    }
}

pub fn build_function_record(func: &FunctionIr, pkg: &PackageIr, trait_map: &TraitMap) -> FunctionRecord {
    let visible = visibility_of(func, pkg);
    let trait_bounds = get_trait_bounds(func, trait_map, visible);
    FunctionRecord {
        name: func.name.clone(),
        return_type: func.return_type.clone(),
        method_of: func.method_of.clone(),
        marked_unsafe: func.contains_unsafe,
        visible,
        conversion_pairs: collect_conversion_pairs(func, &trait_bounds),
        trait_bounds,
        alias_graph: build_alias_graph(func),
    }
}

pub fn build_property_graph(pkg: &PackageIr, trait_map: TraitMap) -> Result<PropertyGraph, Vec<Violation>> {
    let violations = validate(pkg);
    if !violations.is_empty() {
        return Err(violations);
    }
    let records: BTreeMap<String, FunctionRecord> = pkg
        .functions
        .iter()
        .map(|f| (f.name.clone(), build_function_record(f, pkg, &trait_map)))
        .collect();
    let call_edges: BTreeSet<(String, String)> = pkg
        .functions
        .iter()
        .flat_map(|f| f.calls().map(move |(_, callee, ..)| (f.name.clone(), callee.to_string())))
        .collect();
    let mut callers: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (from, to) in &call_edges {
        callers.entry(to.clone()).or_default().insert(from.clone());
    }
    let function_index = pkg.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
    let return_index = index_return_types(records.values());
    Ok(PropertyGraph { records, call_edges, return_index, trait_map, function_index, callers })
}

pub fn index_return_types<'a>(records: impl IntoIterator<Item = &'a FunctionRecord>) -> BTreeMap<String, BTreeSet<String>> {
    let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        index.entry(return_type_key(&r.return_type)).or_default().insert(r.name.clone());
    }
    index
}

impl PropertyGraph {
    pub fn record(&self, name: &str) -> Option<&FunctionRecord> {
        self.records.get(name)
    }

    /// The IR of function `name`, looked up through the graph's index.
    /// `pkg` must be the package the graph was built from.
    pub fn function<'a>(&self, pkg: &'a PackageIr, name: &str) -> Option<&'a FunctionIr> {
        self.function_index
            .get(name)
            .and_then(|&i| pkg.functions.get(i))
            .filter(|f| f.name == name)
    }

    pub fn find_constructors(&self, ty: &Ty) -> Vec<String> {
        self.return_index
            .get(&return_type_key(ty))
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Direct callers of `name`.
    pub fn callers_of(&self, name: &str) -> Vec<String> {
        self.callers.get(name).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    /// Direct callees of `name`, including external ones.
    pub fn callees_of(&self, name: &str) -> Vec<String> {
        self.call_edges
            .range((name.to_string(), String::new())..)
            .take_while(|(from, _)| from == name)
            .map(|(_, to)| to.clone())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("property graph serialization is infallible")
    }
}
