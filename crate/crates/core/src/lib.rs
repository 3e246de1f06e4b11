//! Static detection of type-confusion bugs (misalignment, inconsistent
//! layout, mismatched scope) in pointer conversions of a MIR-like IR.
//!
//! The pipeline: [`ir::parse_package`] → [`graph::build_property_graph`] →
//! [`detect::detect`] → [`verify::verify`]. [`scan::run_scan`] drives it over
//! many documents.

pub mod alias;
pub mod detect;
pub mod graph;
pub mod ir;
pub mod report;
pub mod scan;
pub mod types;
pub mod verify;

pub use alias::{build_alias_graph, AliasError, AliasGraph};
pub use detect::{
    abi_compatible, check_inconsistent_layout, check_mismatched_scope, check_misalignment, detect, BugKind, Finding,
};
pub use graph::{
    build_property_graph, collect_conversion_pairs, ConversionPair, FunctionRecord, Operation, PropertyGraph, Scenario,
};
pub use ir::{parse_document, parse_package, resolve_aggregate, validate, IrError, Location, PackageIr, Primitive, Ty};
pub use report::{render_report, Format};
pub use scan::{run_scan, PackageResult, ScanConfig, ScanSummary, Status};
pub use types::{
    alignment_of, candidate_types, extract_external_type_hint, get_trait_bounds, layout_class, pattern_class,
    visibility_of, ArchWidth, CandidateTypeSet, LayoutClass, PatternClass, TraitMap,
};
pub use verify::{
    access_in_function, accessible_to_caller, has_dev_check, interprocedural_refine, verify, AccessEvidence, BugReport,
    EvidenceKind, Suppression, SuppressionReason, VerifyOptions,
};
