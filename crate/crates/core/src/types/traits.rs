use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::{lookup_aggregate, SYNTHETIC_PADDING};
use crate::ir::{FunctionIr, PackageIr, Primitive, TraitDef, Ty, Visibility};

/// Marker bounds implemented by every primitive.
pub const BUILTIN_MARKERS: [&str; 7] = ["Copy", "Clone", "Send", "Sync", "Sized", "'static", "Unpin"];

/// Markers that hold for every candidate and never narrow a candidate set.
pub const UNIVERSAL_MARKERS: [&str; 5] = ["'static", "Sized", "Send", "Sync", "Unpin"];

/// Traits that guarantee an initialized, stable layout for implementors.
pub const LAYOUT_GUARDS: [&str; 2] = ["Plain", "Pod"];

/// Trait name to implementor types, plus the supertrait edges needed to
/// expand bounds that have no implementor entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TraitMap {
    implementors: BTreeMap<String, BTreeSet<Ty>>,
    supertraits: BTreeMap<String, Vec<String>>,
}

impl TraitMap {
    pub fn builtin() -> TraitMap {
        let mut map = TraitMap::default();
        let all: BTreeSet<Ty> = Primitive::ALL.into_iter().map(Ty::prim).collect();
        for m in BUILTIN_MARKERS {
            map.implementors.insert(m.to_string(), all.clone());
        }
        let plain: BTreeSet<Ty> = Primitive::ALL
            .into_iter()
            .filter(|p| p.is_integer() || p.is_float())
            .map(Ty::prim)
            .collect();
        for g in LAYOUT_GUARDS {
            map.implementors.insert(g.to_string(), plain.clone());
        }
        map.supertraits.insert("Copy".into(), vec!["Clone".into()]);
        map
    }

    /// Built-in entries extended with the package's trait table and any
    /// overlay definitions.
    pub fn for_package(pkg: &PackageIr, overlay: &[TraitDef]) -> TraitMap {
        let mut map = TraitMap::builtin();
        for def in pkg.traits.iter().chain(overlay) {
            map.add(def);
        }
        map
    }

    /// Merges a definition. Traits without implementors only contribute
    /// their supertrait edges.
    pub fn add(&mut self, def: &TraitDef) {
        if !def.implementors.is_empty() {
            self.implementors
                .entry(def.name.clone())
                .or_default()
                .extend(def.implementors.iter().cloned());
        }
        if !def.supertraits.is_empty() {
            let supers = self.supertraits.entry(def.name.clone()).or_default();
            for s in &def.supertraits {
                if !supers.contains(s) {
                    supers.push(s.clone());
                }
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.implementors.contains_key(name)
    }

    pub fn implementors(&self, name: &str) -> Option<&BTreeSet<Ty>> {
        self.implementors.get(name)
    }

    pub fn supertraits(&self, name: &str) -> &[String] {
        self.supertraits.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn is_layout_guard(name: &str) -> bool {
        let last = name.rsplit("::").next().unwrap_or(name);
        LAYOUT_GUARDS.contains(&last)
    }
}

/// Expands one generic's bound list: bounds present in the map are kept;
/// otherwise, for visible functions, bounds with supertraits are replaced
/// by the expansion of those supertraits; anything else is kept as-is.
pub fn expand_bounds<S: AsRef<str>>(bounds: &[S], map: &TraitMap, visible: bool) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut visited = HashSet::new();
    for b in bounds {
        expand_one(b.as_ref(), map, visible, &mut visited, &mut out);
    }
    out
}

fn expand_one(bound: &str, map: &TraitMap, visible: bool, visited: &mut HashSet<String>, out: &mut BTreeSet<String>) {
    if !visited.insert(bound.to_string()) {
        return;
    }
    let supers = map.supertraits(bound);
    if map.contains(bound) {
        out.insert(bound.to_string());
    } else if visible && !supers.is_empty() {
        for s in supers {
            expand_one(s, map, visible, visited, out);
        }
    } else {
        out.insert(bound.to_string());
    }
}

/// Expanded bound sets for each generic parameter of `func`.
pub fn get_trait_bounds(func: &FunctionIr, map: &TraitMap, visible: bool) -> BTreeMap<String, BTreeSet<String>> {
    func.generics
        .iter()
        .map(|g| (g.name.clone(), expand_bounds(&g.bounds, map, visible)))
        .collect()
}

/// Concrete types that may instantiate a generic. An unconstrained set has
/// no types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CandidateTypeSet {
    pub types: BTreeSet<Ty>,
    pub unconstrained: bool,
}

impl CandidateTypeSet {
    pub fn unconstrained() -> CandidateTypeSet {
        CandidateTypeSet { types: BTreeSet::new(), unconstrained: true }
    }
}

pub fn candidate_types(bounds: &BTreeSet<String>, map: &TraitMap) -> CandidateTypeSet {
    let known: Vec<&str> = bounds.iter().map(String::as_str).filter(|b| map.contains(b)).collect();
    if known.is_empty() {
        return CandidateTypeSet::unconstrained();
    }
    let mut acc: Option<BTreeSet<Ty>> = None;
    for b in known.iter().filter(|b| !UNIVERSAL_MARKERS.contains(b)) {
        let imps = map.implementors(b).cloned().unwrap_or_default();
        acc = Some(match acc {
            None => imps,
            Some(prev) => prev.intersection(&imps).cloned().collect(),
        });
    }
    let mut types = acc.unwrap_or_else(|| Primitive::ALL.into_iter().map(Ty::prim).collect());
    if !bounds.iter().any(|b| TraitMap::is_layout_guard(b)) {
        types.insert(Ty::adt(SYNTHETIC_PADDING));
    }
    CandidateTypeSet { types, unconstrained: false }
}

/// A function is visible when external code can call it with values it
/// built itself: the function is public and, for methods, the receiver and
/// every field reachable from it are public.
pub fn visibility_of(func: &FunctionIr, pkg: &PackageIr) -> bool {
    if func.visibility != Visibility::Public {
        return false;
    }
    match &func.method_of {
        None => true,
        Some(receiver) => externally_constructible(receiver, pkg, &mut HashSet::new()),
    }
}

fn externally_constructible<'a>(name: &'a str, pkg: &'a PackageIr, visiting: &mut HashSet<&'a str>) -> bool {
    let Some(def) = lookup_aggregate(name, pkg) else { return true };
    if !visiting.insert(name) {
        return true;
    }
    def.visibility == Visibility::Public
        && def.fields.iter().all(|f| {
            f.visibility == Visibility::Public
                && f.ty.base_adt().is_none_or(|inner| externally_constructible(inner, pkg, visiting))
        })
}
