use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lookup_aggregate;
use crate::ir::{PackageIr, Primitive, Repr, Ty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArchWidth {
    #[serde(rename = "32")]
    Bits32,
    #[serde(rename = "64")]
    Bits64,
}

impl ArchWidth {
    pub const ALL: [ArchWidth; 2] = [ArchWidth::Bits32, ArchWidth::Bits64];

    pub fn word_bytes(self) -> u64 {
        match self {
            ArchWidth::Bits32 => 4,
            ArchWidth::Bits64 => 8,
        }
    }
}

impl fmt::Display for ArchWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchWidth::Bits32 => "32",
            ArchWidth::Bits64 => "64",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutClass {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternClass {
    Weak,
    Strict,
}

pub fn primitive_alignment(p: Primitive, arch: ArchWidth) -> u64 {
    match p {
        Primitive::Bool | Primitive::U8 | Primitive::I8 | Primitive::Str => 1,
        Primitive::U16 | Primitive::I16 => 2,
        Primitive::Char | Primitive::U32 | Primitive::I32 | Primitive::F32 => 4,
        Primitive::U64 | Primitive::I64 | Primitive::F64 => 8,
        Primitive::U128 | Primitive::I128 => 16,
        Primitive::Usize | Primitive::Isize => arch.word_bytes(),
    }
}

/// Longest primitive name occurring in the last `::` segment of `symbol`;
/// among equally long matches the leftmost wins.
pub fn extract_external_type_hint(symbol: &str) -> Option<Primitive> {
    let segment = symbol.rsplit("::").next().unwrap_or(symbol);
    Primitive::ALL
        .into_iter()
        .filter_map(|p| segment.find(p.name()).map(|pos| (p, pos)))
        .min_by(|(a, pa), (b, pb)| b.name().len().cmp(&a.name().len()).then(pa.cmp(pb)))
        .map(|(p, _)| p)
}

/// Alignment in bytes; `None` when unknown (generics, opaque symbols
/// without a primitive hint, aggregates containing either).
pub fn alignment_of(ty: &Ty, arch: ArchWidth, pkg: &PackageIr) -> Option<u64> {
    align_inner(ty, arch, pkg, &mut HashSet::new())
}

fn align_inner<'a>(ty: &'a Ty, arch: ArchWidth, pkg: &'a PackageIr, visiting: &mut HashSet<&'a str>) -> Option<u64> {
    match ty {
        Ty::Primitive { name } => Some(primitive_alignment(*name, arch)),
        Ty::RawPtr { .. } | Ty::Ref { .. } => Some(arch.word_bytes()),
        Ty::Slice { element } | Ty::Array { element, .. } => align_inner(element, arch, pkg, visiting),
        Ty::Adt { name } => {
            let def = lookup_aggregate(name, pkg)?;
            if !visiting.insert(name.as_str()) {
                return None;
            }
            let mut align = Some(1);
            for f in &def.fields {
                align = match (align, align_inner(&f.ty, arch, pkg, visiting)) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            visiting.remove(name.as_str());
            align
        }
        Ty::Generic { .. } => None,
        Ty::Opaque { symbol } => extract_external_type_hint(symbol).map(|p| primitive_alignment(p, arch)),
    }
}

/// `(size, align)` under C layout rules: fields in declaration order,
/// each at the next multiple of its alignment, total rounded up. `None`
/// for unsized or unknown types.
pub fn c_layout(ty: &Ty, arch: ArchWidth, pkg: &PackageIr) -> Option<(u64, u64)> {
    c_layout_inner(ty, arch, pkg, &mut HashSet::new())
}

fn c_layout_inner<'a>(
    ty: &'a Ty,
    arch: ArchWidth,
    pkg: &'a PackageIr,
    visiting: &mut HashSet<&'a str>,
) -> Option<(u64, u64)> {
    match ty {
        Ty::Primitive { name: Primitive::Str } | Ty::Slice { .. } => None,
        Ty::Primitive { name } => {
            let a = primitive_alignment(*name, arch);
            Some((a, a))
        }
        Ty::RawPtr { pointee, .. } | Ty::Ref { pointee, .. } => {
            let w = arch.word_bytes();
            let fat = matches!(**pointee, Ty::Slice { .. } | Ty::Primitive { name: Primitive::Str });
            Some((if fat { 2 * w } else { w }, w))
        }
        Ty::Array { element, length } => {
            let (s, a) = c_layout_inner(element, arch, pkg, visiting)?;
            Some((s.checked_mul(*length)?, a))
        }
        Ty::Adt { name } => {
            let def = lookup_aggregate(name, pkg)?;
            if !visiting.insert(name.as_str()) {
                return None;
            }
            let mut offset = 0u64;
            let mut align = 1u64;
            let mut ok = true;
            for f in &def.fields {
                let Some((s, a)) = c_layout_inner(&f.ty, arch, pkg, visiting) else {
                    ok = false;
                    break;
                };
                offset = offset.next_multiple_of(a) + s;
                align = align.max(a);
            }
            visiting.remove(name.as_str());
            ok.then(|| (offset.next_multiple_of(align), align))
        }
        Ty::Generic { .. } | Ty::Opaque { .. } => None,
    }
}

/// Whether a C-representation aggregate contains padding bytes on either
/// architecture, directly or in a nested aggregate field.
pub fn has_padding(ty: &Ty, pkg: &PackageIr) -> bool {
    padding_inner(ty, pkg, &mut HashSet::new())
}

fn padding_inner<'a>(ty: &'a Ty, pkg: &'a PackageIr, visiting: &mut HashSet<&'a str>) -> bool {
    match ty {
        Ty::Array { element, .. } => padding_inner(element, pkg, visiting),
        Ty::Adt { name } => {
            let Some(def) = lookup_aggregate(name, pkg) else { return false };
            if !visiting.insert(name.as_str()) {
                return false;
            }
            let direct = ArchWidth::ALL.into_iter().any(|arch| {
                let fields: Option<u64> = def
                    .fields
                    .iter()
                    .map(|f| c_layout(&f.ty, arch, pkg).map(|(s, _)| s))
                    .sum();
                match (fields, c_layout(ty, arch, pkg)) {
                    (Some(sum), Some((total, _))) => sum < total,
                    _ => false,
                }
            });
            let nested = direct || def.fields.iter().any(|f| padding_inner(&f.ty, pkg, visiting));
            visiting.remove(name.as_str());
            nested
        }
        _ => false,
    }
}

pub fn layout_class(ty: &Ty, pkg: &PackageIr) -> LayoutClass {
    layout_inner(ty, pkg, &mut HashSet::new())
}

fn layout_inner<'a>(ty: &'a Ty, pkg: &'a PackageIr, visiting: &mut HashSet<&'a str>) -> LayoutClass {
    match ty {
        Ty::Primitive { .. } | Ty::RawPtr { .. } | Ty::Ref { .. } => LayoutClass::Stable,
        Ty::Slice { element } | Ty::Array { element, .. } => layout_inner(element, pkg, visiting),
        Ty::Adt { name } => {
            let Some(def) = lookup_aggregate(name, pkg) else { return LayoutClass::Unstable };
            if pkg.is_zero_sized(ty) {
                return LayoutClass::Stable;
            }
            match def.repr {
                Repr::Default => LayoutClass::Unstable,
                Repr::C => LayoutClass::Stable,
                Repr::Transparent => {
                    if !visiting.insert(name.as_str()) {
                        return LayoutClass::Unstable;
                    }
                    let class = def
                        .fields
                        .iter()
                        .find(|f| !pkg.is_zero_sized(&f.ty))
                        .map_or(LayoutClass::Stable, |f| layout_inner(&f.ty, pkg, visiting));
                    visiting.remove(name.as_str());
                    class
                }
            }
        }
        Ty::Generic { .. } | Ty::Opaque { .. } => LayoutClass::Unstable,
    }
}

/// Bit-pattern class; `None` when unknown (generics, opaque symbols, and
/// aggregates with an unknown field but no strict one).
pub fn pattern_class(ty: &Ty, pkg: &PackageIr) -> Option<PatternClass> {
    pattern_inner(ty, pkg, &mut HashSet::new())
}

fn pattern_inner<'a>(ty: &'a Ty, pkg: &'a PackageIr, visiting: &mut HashSet<&'a str>) -> Option<PatternClass> {
    match ty {
        Ty::Primitive { name: Primitive::Bool | Primitive::Char | Primitive::Str } => Some(PatternClass::Strict),
        Ty::Primitive { .. } | Ty::RawPtr { .. } => Some(PatternClass::Weak),
        Ty::Ref { .. } => Some(PatternClass::Strict),
        Ty::Slice { element } | Ty::Array { element, .. } => pattern_inner(element, pkg, visiting),
        Ty::Adt { name } => {
            let def = lookup_aggregate(name, pkg)?;
            if !visiting.insert(name.as_str()) {
                return Some(PatternClass::Weak);
            }
            let mut unknown = false;
            let mut strict = false;
            for f in &def.fields {
                match pattern_inner(&f.ty, pkg, visiting) {
                    Some(PatternClass::Strict) => strict = true,
                    Some(PatternClass::Weak) => {}
                    None => unknown = true,
                }
            }
            visiting.remove(name.as_str());
            if strict {
                Some(PatternClass::Strict)
            } else if unknown {
                None
            } else {
                Some(PatternClass::Weak)
            }
        }
        Ty::Generic { .. } | Ty::Opaque { .. } => None,
    }
}
