//! Conversion checks for the three bug classes over concrete and generic
//! conversion pairs.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{ConversionPair, PropertyGraph, Scenario};
use crate::ir::{PackageIr, Repr, Ty};
use crate::types::{
    alignment_of, candidate_types, has_padding, layout_class, lookup_aggregate, pattern_class, ArchWidth,
    CandidateTypeSet, LayoutClass, PatternClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BugKind {
    #[serde(rename = "I")]
    Misalignment,
    #[serde(rename = "II")]
    InconsistentLayout,
    #[serde(rename = "III")]
    MismatchedScope,
}

impl BugKind {
    pub const ALL: [BugKind; 3] = [BugKind::Misalignment, BugKind::InconsistentLayout, BugKind::MismatchedScope];

    pub fn numeral(self) -> &'static str {
        match self {
            BugKind::Misalignment => "I",
            BugKind::InconsistentLayout => "II",
            BugKind::MismatchedScope => "III",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            BugKind::Misalignment => "misalignment",
            BugKind::InconsistentLayout => "inconsistent layout",
            BugKind::MismatchedScope => "mismatched scope",
        }
    }
}

impl fmt::Display for BugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

impl FromStr for BugKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "I" | "1" => Ok(BugKind::Misalignment),
            "II" | "2" => Ok(BugKind::InconsistentLayout),
            "III" | "3" => Ok(BugKind::MismatchedScope),
            other => Err(format!("unknown detector `{other}` (expected I, II or III)")),
        }
    }
}

/// A conversion marked as producing an invalid type pointer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: BugKind,
    pub pair: ConversionPair,
    pub witness: Option<Ty>,
    pub rule_id: String,
    /// Architectures on which the alignment rule fails; empty for the
    /// other bug classes.
    pub arches: Vec<ArchWidth>,
}

fn rule(kind: BugKind, scenario: Scenario, detail: &str) -> String {
    let t = match kind {
        BugKind::Misalignment => "T1",
        BugKind::InconsistentLayout => "T2",
        BugKind::MismatchedScope => "T3",
    };
    format!("{t}-{scenario}-{detail}")
}

/// ABI identity: aggregates by name, opaque externals by symbol, anything
/// else by its rendered form.
pub fn abi_compatible(src: &Ty, dst: &Ty) -> bool {
    fn identity(t: &Ty) -> String {
        match t {
            Ty::Adt { name } => name.clone(),
            Ty::Opaque { symbol } => symbol.clone(),
            other => other.to_string(),
        }
    }
    identity(src) == identity(dst)
}

/// Concrete outcome: `Some((detail, failing arches))` when the rule marks.
type Outcome = Option<(&'static str, Vec<ArchWidth>)>;

fn misalignment_concrete(src: &Ty, dst: &Ty, arches: &[ArchWidth], pkg: &PackageIr) -> Outcome {
    let failing: Vec<ArchWidth> = arches
        .iter()
        .copied()
        .filter(|&a| match (alignment_of(src, a, pkg), alignment_of(dst, a, pkg)) {
            (Some(s), Some(d)) => d != 0 && s % d != 0,
            _ => false,
        })
        .collect();
    (!failing.is_empty()).then_some(("align-mod", failing))
}

fn is_scalar(ty: &Ty) -> bool {
    match ty {
        Ty::Primitive { .. } => true,
        Ty::Slice { element } | Ty::Array { element, .. } => is_scalar(element),
        _ => false,
    }
}

fn padded_c_aggregate(ty: &Ty, pkg: &PackageIr) -> bool {
    match ty {
        Ty::Adt { name } => lookup_aggregate(name, pkg).is_some_and(|d| d.repr == Repr::C) && has_padding(ty, pkg),
        Ty::Slice { element } | Ty::Array { element, .. } => padded_c_aggregate(element, pkg),
        _ => false,
    }
}

fn layout_concrete(src: &Ty, dst: &Ty, pkg: &PackageIr) -> Outcome {
    let detail = match (layout_class(src, pkg), layout_class(dst, pkg)) {
        (LayoutClass::Unstable, LayoutClass::Stable) => "unstable-stable",
        (LayoutClass::Unstable, LayoutClass::Unstable) if !abi_compatible(src, dst) => "unstable-abi",
        (LayoutClass::Stable, _) if padded_c_aggregate(src, pkg) && is_scalar(dst) => "padding-exposure",
        _ => return None,
    };
    Some((detail, Vec::new()))
}

fn scope_concrete(src: &Ty, dst: &Ty, dst_mutable: bool, pkg: &PackageIr) -> Outcome {
    let detail = match (pattern_class(src, pkg), pattern_class(dst, pkg)) {
        (Some(PatternClass::Weak), Some(PatternClass::Strict)) => "weak-strict",
        (Some(PatternClass::Strict), Some(PatternClass::Weak)) if dst_mutable => "strict-mutweak",
        _ => return None,
    };
    Some((detail, Vec::new()))
}

fn concrete(kind: BugKind, pair: &ConversionPair, arches: &[ArchWidth], pkg: &PackageIr) -> Outcome {
    match kind {
        BugKind::Misalignment => misalignment_concrete(&pair.src, &pair.dst, arches, pkg),
        BugKind::InconsistentLayout => layout_concrete(&pair.src, &pair.dst, pkg),
        BugKind::MismatchedScope => scope_concrete(&pair.src, &pair.dst, pair.dst_mutable, pkg),
    }
}

/// Rule for an unconstrained generic side.
fn unconstrained(kind: BugKind, pair: &ConversionPair, arches: &[ArchWidth], pkg: &PackageIr) -> Outcome {
    match (kind, pair.scenario) {
        (BugKind::Misalignment, Scenario::ConGen) => Some(("unconstrained", arches.to_vec())),
        (BugKind::Misalignment, Scenario::GenCon) => {
            let failing: Vec<ArchWidth> = arches
                .iter()
                .copied()
                .filter(|&a| alignment_of(&pair.dst, a, pkg).is_some_and(|d| d != 1))
                .collect();
            (!failing.is_empty()).then_some(("unconstrained-align", failing))
        }
        (BugKind::InconsistentLayout, Scenario::ConGen) => {
            (layout_class(&pair.src, pkg) == LayoutClass::Unstable).then(|| ("unconstrained", Vec::new()))
        }
        (BugKind::InconsistentLayout, Scenario::GenCon) => {
            let marks = layout_class(&pair.dst, pkg) == LayoutClass::Stable || !abi_compatible(&pair.src, &pair.dst);
            marks.then(|| ("unconstrained", Vec::new()))
        }
        (BugKind::MismatchedScope, Scenario::ConGen) => match pattern_class(&pair.src, pkg) {
            Some(PatternClass::Weak) | None => Some(("unconstrained-weak", Vec::new())),
            Some(PatternClass::Strict) => pair.dst_mutable.then(|| ("unconstrained-strict-mut", Vec::new())),
        },
        (BugKind::MismatchedScope, Scenario::GenCon) => match pattern_class(&pair.dst, pkg) {
            Some(PatternClass::Strict) | None => Some(("unconstrained-strict", Vec::new())),
            Some(PatternClass::Weak) => pair.dst_mutable.then(|| ("unconstrained-mutweak", Vec::new())),
        },
        (_, Scenario::ConCon) => None,
    }
}

/// Runs one detector on one pair. Generic sides are either handled by the
/// unconstrained rule or replaced by each candidate in turn; the
/// candidate with the smallest rendered name among those that mark is
/// reported as the witness.
pub fn check(
    kind: BugKind,
    pair: &ConversionPair,
    ty_set: &CandidateTypeSet,
    arches: &[ArchWidth],
    pkg: &PackageIr,
) -> Option<Finding> {
    let finding = |detail: &str, witness, arches| Finding {
        kind,
        pair: pair.clone(),
        witness,
        rule_id: rule(kind, pair.scenario, detail),
        arches,
    };
    if pair.scenario == Scenario::ConCon {
        let (detail, failing) = concrete(kind, pair, arches, pkg)?;
        return Some(finding(detail, None, failing));
    }
    if ty_set.unconstrained {
        let (detail, failing) = unconstrained(kind, pair, arches, pkg)?;
        return Some(finding(detail, None, failing));
    }
    ty_set
        .types
        .iter()
        .filter_map(|c| concrete(kind, &pair.substituted(c), arches, pkg).map(|o| (c, o)))
        .min_by_key(|(c, _)| c.to_string())
        .map(|(c, (detail, failing))| finding(detail, Some(c.clone()), failing))
}

pub fn check_misalignment(pair: &ConversionPair, ty_set: &CandidateTypeSet, arches: &[ArchWidth], pkg: &PackageIr) -> Option<Finding> {
    check(BugKind::Misalignment, pair, ty_set, arches, pkg)
}

pub fn check_inconsistent_layout(pair: &ConversionPair, ty_set: &CandidateTypeSet, pkg: &PackageIr) -> Option<Finding> {
    check(BugKind::InconsistentLayout, pair, ty_set, &ArchWidth::ALL, pkg)
}

pub fn check_mismatched_scope(pair: &ConversionPair, ty_set: &CandidateTypeSet, pkg: &PackageIr) -> Option<Finding> {
    check(BugKind::MismatchedScope, pair, ty_set, &ArchWidth::ALL, pkg)
}

/// All findings of the enabled detectors over every pair in functions
/// marked unsafe, in function, site and detector order.
pub fn detect(pg: &PropertyGraph, pkg: &PackageIr, kinds: &BTreeSet<BugKind>, arches: &[ArchWidth]) -> Vec<Finding> {
    let mut out = Vec::new();
    for record in pg.records.values().filter(|r| r.marked_unsafe) {
        for pair in &record.conversion_pairs {
            let ty_set = if pair.scenario == Scenario::ConCon {
                CandidateTypeSet::default()
            } else {
                candidate_types(&pair.bounds, &pg.trait_map)
            };
            for &kind in kinds {
                out.extend(check(kind, pair, &ty_set, arches, pkg));
            }
        }
    }
    out
}
