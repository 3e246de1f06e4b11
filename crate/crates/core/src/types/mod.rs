//! Per-type metadata and generic candidate resolution.

mod layout;
mod traits;

use std::sync::OnceLock;

use crate::ir::{AggregateDef, FieldDef, PackageIr, Primitive, Repr, Ty, Visibility};

pub use layout::{
    alignment_of, c_layout, extract_external_type_hint, has_padding, layout_class, pattern_class,
    primitive_alignment, ArchWidth, LayoutClass, PatternClass,
};
pub use traits::{
    candidate_types, expand_bounds, get_trait_bounds, visibility_of, CandidateTypeSet, TraitMap,
    BUILTIN_MARKERS, LAYOUT_GUARDS, UNIVERSAL_MARKERS,
};

/// Name of the padded aggregate added to candidate sets of generics that
/// carry no layout guard.
pub const SYNTHETIC_PADDING: &str = "SyntheticPadding";

/// `{ a: u8, b: u16, c: u8 }` with default representation.
pub fn synthetic_padding() -> &'static AggregateDef {
    static DEF: OnceLock<AggregateDef> = OnceLock::new();
    DEF.get_or_init(|| {
        let field = |name: &str, p| FieldDef {
            name: name.into(),
            ty: Ty::prim(p),
            visibility: Visibility::Public,
        };
        AggregateDef {
            name: SYNTHETIC_PADDING.into(),
            repr: Repr::Default,
            fields: vec![field("a", Primitive::U8), field("b", Primitive::U16), field("c", Primitive::U8)],
            visibility: Visibility::Public,
        }
    })
}

/// Resolves an aggregate name against the package, falling back to the
/// synthetic padded aggregate.
pub fn lookup_aggregate<'a>(name: &str, pkg: &'a PackageIr) -> Option<&'a AggregateDef> {
    pkg.aggregate(name)
        .or_else(|| (name == SYNTHETIC_PADDING).then(synthetic_padding))
}
