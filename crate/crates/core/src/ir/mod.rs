//! The analysis IR.
//!
//! A package is a set of functions in a MIR-like shape (basic blocks of
//! `Assign`/`StorageDead` statements closed by `Call`/`Return`/`Goto`
//! terminators) together with the aggregate and trait definitions the
//! functions refer to. Packages are loaded from JSON documents; see
//! [`parse_package`].

mod validate;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use validate::{validate, Violation, ViolationKind, ViolationSite};

pub type LocalId = u32;
pub type BlockId = u32;

/// Local 0 always holds the function's return value.
pub const RETURN_LOCAL: LocalId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Bool,
    Char,
    Str,
    U8,
    U16,
    U32,
    U64,
    U128,
    Usize,
    I8,
    I16,
    I32,
    I64,
    I128,
    Isize,
    F32,
    F64,
}

impl Primitive {
    pub const ALL: [Primitive; 17] = [
        Primitive::Bool,
        Primitive::Char,
        Primitive::Str,
        Primitive::U8,
        Primitive::U16,
        Primitive::U32,
        Primitive::U64,
        Primitive::U128,
        Primitive::Usize,
        Primitive::I8,
        Primitive::I16,
        Primitive::I32,
        Primitive::I64,
        Primitive::I128,
        Primitive::Isize,
        Primitive::F32,
        Primitive::F64,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Bool => "bool",
            Primitive::Char => "char",
            Primitive::Str => "str",
            Primitive::U8 => "u8",
            Primitive::U16 => "u16",
            Primitive::U32 => "u32",
            Primitive::U64 => "u64",
            Primitive::U128 => "u128",
            Primitive::Usize => "usize",
            Primitive::I8 => "i8",
            Primitive::I16 => "i16",
            Primitive::I32 => "i32",
            Primitive::I64 => "i64",
            Primitive::I128 => "i128",
            Primitive::Isize => "isize",
            Primitive::F32 => "f32",
            Primitive::F64 => "f64",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_integer(self) -> bool {
        !matches!(
            self,
            Primitive::Bool | Primitive::Char | Primitive::Str | Primitive::F32 | Primitive::F64
        )
    }

    pub fn is_float(self) -> bool {
        matches!(self, Primitive::F32 | Primitive::F64)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Structural description of a type. Aggregates are referenced by name,
/// so descriptors are always finite trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ty {
    Primitive { name: Primitive },
    RawPtr { mutable: bool, pointee: Box<Ty> },
    Ref { mutable: bool, pointee: Box<Ty> },
    Slice { element: Box<Ty> },
    Array { element: Box<Ty>, length: u64 },
    Adt { name: String },
    Generic { name: String },
    Opaque { symbol: String },
}

impl Ty {
    pub fn prim(p: Primitive) -> Ty {
        Ty::Primitive { name: p }
    }

    pub fn adt(name: impl Into<String>) -> Ty {
        Ty::Adt { name: name.into() }
    }

    pub fn generic(name: impl Into<String>) -> Ty {
        Ty::Generic { name: name.into() }
    }

    pub fn opaque(symbol: impl Into<String>) -> Ty {
        Ty::Opaque { symbol: symbol.into() }
    }

    pub fn raw_ptr(mutable: bool, pointee: Ty) -> Ty {
        Ty::RawPtr { mutable, pointee: Box::new(pointee) }
    }

    pub fn reference(mutable: bool, pointee: Ty) -> Ty {
        Ty::Ref { mutable, pointee: Box::new(pointee) }
    }

    pub fn slice(element: Ty) -> Ty {
        Ty::Slice { element: Box::new(element) }
    }

    pub fn array(element: Ty, length: u64) -> Ty {
        Ty::Array { element: Box::new(element), length }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, Ty::RawPtr { .. } | Ty::Ref { .. })
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, Ty::Ref { .. })
    }

    /// Pointee of a raw pointer or reference.
    pub fn pointee(&self) -> Option<&Ty> {
        match self {
            Ty::RawPtr { pointee, .. } | Ty::Ref { pointee, .. } => Some(pointee),
            _ => None,
        }
    }

    /// Mutability of a raw pointer or reference; `false` for everything else.
    pub fn is_mut_pointer(&self) -> bool {
        matches!(self, Ty::RawPtr { mutable: true, .. } | Ty::Ref { mutable: true, .. })
    }

    /// Name of the first generic parameter found in a pre-order walk.
    pub fn generic_param(&self) -> Option<&str> {
        match self {
            Ty::Generic { name } => Some(name),
            Ty::RawPtr { pointee, .. } | Ty::Ref { pointee, .. } => pointee.generic_param(),
            Ty::Slice { element } | Ty::Array { element, .. } => element.generic_param(),
            Ty::Primitive { .. } | Ty::Adt { .. } | Ty::Opaque { .. } => None,
        }
    }

    /// Replaces every occurrence of generic `param` with `with`.
    pub fn substitute(&self, param: &str, with: &Ty) -> Ty {
        match self {
            Ty::Generic { name } if name == param => with.clone(),
            Ty::RawPtr { mutable, pointee } => Ty::raw_ptr(*mutable, pointee.substitute(param, with)),
            Ty::Ref { mutable, pointee } => Ty::reference(*mutable, pointee.substitute(param, with)),
            Ty::Slice { element } => Ty::slice(element.substitute(param, with)),
            Ty::Array { element, length } => Ty::array(element.substitute(param, with), *length),
            other => other.clone(),
        }
    }

    /// Aggregate name after peeling pointers, references, slices and arrays.
    pub fn base_adt(&self) -> Option<&str> {
        match self {
            Ty::Adt { name } => Some(name),
            Ty::RawPtr { pointee, .. } | Ty::Ref { pointee, .. } => pointee.base_adt(),
            Ty::Slice { element } | Ty::Array { element, .. } => element.base_adt(),
            _ => None,
        }
    }

    fn for_each_mut(&mut self, f: &mut impl FnMut(&mut Ty)) {
        f(self);
        match self {
            Ty::RawPtr { pointee, .. } | Ty::Ref { pointee, .. } => pointee.for_each_mut(f),
            Ty::Slice { element } | Ty::Array { element, .. } => element.for_each_mut(f),
            _ => {}
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Primitive { name } => write!(f, "{name}"),
            Ty::RawPtr { mutable, pointee } => {
                write!(f, "*{} {pointee}", if *mutable { "mut" } else { "const" })
            }
            Ty::Ref { mutable, pointee } => {
                write!(f, "&{}{pointee}", if *mutable { "mut " } else { "" })
            }
            Ty::Slice { element } => write!(f, "[{element}]"),
            Ty::Array { element, length } => write!(f, "[{element}; {length}]"),
            Ty::Adt { name } => f.write_str(name),
            Ty::Generic { name } => f.write_str(name),
            Ty::Opaque { symbol } => f.write_str(symbol),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    #[default]
    Private,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Repr {
    #[default]
    Default,
    C,
    Transparent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: Ty,
    #[serde(default)]
    pub visibility: Visibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateDef {
    pub name: String,
    #[serde(default)]
    pub repr: Repr,
    #[serde(default)]
    pub fields: Vec<FieldDef>,
    #[serde(default)]
    pub visibility: Visibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitDef {
    pub name: String,
    #[serde(default)]
    pub supertraits: Vec<String>,
    #[serde(default)]
    pub implementors: Vec<Ty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Place {
    pub local: LocalId,
    #[serde(default)]
    pub deref: bool,
}

impl Place {
    pub fn local(local: LocalId) -> Place {
        Place { local, deref: false }
    }

    pub fn deref(local: LocalId) -> Place {
        Place { local, deref: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperandMode {
    Move,
    Copy,
    Const,
}

/// An rvalue operand; constants carry no place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawOperand", into = "RawOperand")]
pub struct Operand {
    pub mode: OperandMode,
    pub place: Option<Place>,
}

impl Operand {
    pub fn copy(place: Place) -> Operand {
        Operand { mode: OperandMode::Copy, place: Some(place) }
    }

    pub fn moved(place: Place) -> Operand {
        Operand { mode: OperandMode::Move, place: Some(place) }
    }

    pub fn constant() -> Operand {
        Operand { mode: OperandMode::Const, place: None }
    }

    pub fn local(&self) -> Option<LocalId> {
        self.place.map(|p| p.local)
    }

    pub fn is_move(&self) -> bool {
        self.mode == OperandMode::Move
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperand {
    mode: OperandMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    local: Option<LocalId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    deref: bool,
}

impl TryFrom<RawOperand> for Operand {
    type Error = String;

    fn try_from(raw: RawOperand) -> Result<Self, Self::Error> {
        match (raw.mode, raw.local) {
            (OperandMode::Const, None) if !raw.deref => Ok(Operand::constant()),
            (OperandMode::Const, _) => Err("constant operands carry no place".into()),
            (mode, Some(local)) => Ok(Operand { mode, place: Some(Place { local, deref: raw.deref }) }),
            (_, None) => Err("move/copy operands require a `local`".into()),
        }
    }
}

impl From<Operand> for RawOperand {
    fn from(op: Operand) -> Self {
        RawOperand {
            mode: op.mode,
            local: op.place.map(|p| p.local),
            deref: op.place.is_some_and(|p| p.deref),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rvalue {
    Ref {
        operand: Operand,
        #[serde(default)]
        mutable: bool,
    },
    RawPtr {
        operand: Operand,
        #[serde(default)]
        mutable: bool,
    },
    CastPtrToPtr {
        operand: Operand,
        src_type: Ty,
        dst_type: Ty,
    },
    Transmute {
        operand: Operand,
        src_type: Ty,
        dst_type: Ty,
    },
    Use {
        operand: Operand,
    },
}

impl Rvalue {
    pub fn operand(&self) -> &Operand {
        match self {
            Rvalue::Ref { operand, .. }
            | Rvalue::RawPtr { operand, .. }
            | Rvalue::CastPtrToPtr { operand, .. }
            | Rvalue::Transmute { operand, .. }
            | Rvalue::Use { operand } => operand,
        }
    }

    /// The four rvalue kinds that make the assigned local point where the
    /// operand points.
    pub fn creates_alias(&self) -> bool {
        !matches!(self, Rvalue::Use { .. })
    }

    /// `(src, dst)` for casts and transmutes.
    pub fn conversion(&self) -> Option<(&Ty, &Ty)> {
        match self {
            Rvalue::CastPtrToPtr { src_type, dst_type, .. }
            | Rvalue::Transmute { src_type, dst_type, .. } => Some((src_type, dst_type)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statement {
    Assign { lhs: Place, rvalue: Rvalue },
    StorageDead { local: LocalId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Terminator {
    Call {
        callee: String,
        #[serde(default)]
        args: Vec<Operand>,
        dest: LocalId,
        #[serde(default)]
        is_unsafe_api: bool,
    },
    Return,
    Goto {
        target: BlockId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasicBlock {
    #[serde(default)]
    pub statements: Vec<Statement>,
    pub terminator: Terminator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericParam {
    pub name: String,
    #[serde(default)]
    pub bounds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub local: LocalId,
    #[serde(rename = "type")]
    pub ty: Ty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalDecl {
    pub id: LocalId,
    #[serde(rename = "type")]
    pub ty: Ty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionIr {
    pub name: String,
    #[serde(default)]
    pub visibility: Visibility,
    #[serde(default)]
    pub method_of: Option<String>,
    #[serde(default)]
    pub contains_unsafe: bool,
    #[serde(default)]
    pub generics: Vec<GenericParam>,
    #[serde(default)]
    pub params: Vec<Param>,
    pub return_type: Ty,
    pub locals: Vec<LocalDecl>,
    #[serde(default)]
    pub blocks: Vec<BasicBlock>,
}

/// Position of a statement inside a function body. A block's terminator
/// sits at `statement == statements.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub block: BlockId,
    pub statement: u32,
}

impl Location {
    pub fn new(block: BlockId, statement: u32) -> Location {
        Location { block, statement }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bb{}[{}]", self.block, self.statement)
    }
}

impl FunctionIr {
    pub fn local_ty(&self, id: LocalId) -> Option<&Ty> {
        self.locals.iter().find(|l| l.id == id).map(|l| &l.ty)
    }

    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }

    pub fn bounds_of(&self, param: &str) -> Option<&[String]> {
        self.generics.iter().find(|g| g.name == param).map(|g| g.bounds.as_slice())
    }

    /// All statements in block order.
    pub fn statements(&self) -> impl Iterator<Item = (Location, &Statement)> {
        self.blocks.iter().enumerate().flat_map(|(b, block)| {
            block
                .statements
                .iter()
                .enumerate()
                .map(move |(i, s)| (Location::new(b as BlockId, i as u32), s))
        })
    }

    /// All terminators in block order.
    pub fn terminators(&self) -> impl Iterator<Item = (Location, &Terminator)> {
        self.blocks.iter().enumerate().map(|(b, block)| {
            (Location::new(b as BlockId, block.statements.len() as u32), &block.terminator)
        })
    }

    /// Call terminators as `(location, callee, args, dest, is_unsafe_api)`.
    pub fn calls(&self) -> impl Iterator<Item = (Location, &str, &[Operand], LocalId, bool)> {
        self.terminators().filter_map(|(loc, t)| match t {
            Terminator::Call { callee, args, dest, is_unsafe_api } => {
                Some((loc, callee.as_str(), args.as_slice(), *dest, *is_unsafe_api))
            }
            _ => None,
        })
    }

    fn types_mut(&mut self) -> impl Iterator<Item = &mut Ty> {
        let params = self.params.iter_mut().map(|p| &mut p.ty);
        let locals = self.locals.iter_mut().map(|l| &mut l.ty);
        let rvalues = self.blocks.iter_mut().flat_map(|b| b.statements.iter_mut()).flat_map(|s| {
            let tys: Vec<&mut Ty> = match s {
                Statement::Assign {
                    rvalue:
                        Rvalue::CastPtrToPtr { src_type, dst_type, .. }
                        | Rvalue::Transmute { src_type, dst_type, .. },
                    ..
                } => vec![src_type, dst_type],
                _ => Vec::new(),
            };
            tys
        });
        std::iter::once(&mut self.return_type).chain(params).chain(locals).chain(rvalues)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackageIr {
    pub name: String,
    #[serde(default)]
    pub functions: Vec<FunctionIr>,
    #[serde(default)]
    pub aggregates: Vec<AggregateDef>,
    #[serde(default)]
    pub traits: Vec<TraitDef>,
}

impl PackageIr {
    pub fn function(&self, name: &str) -> Option<&FunctionIr> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn aggregate(&self, name: &str) -> Option<&AggregateDef> {
        resolve_aggregate(name, self)
    }

    pub fn trait_def(&self, name: &str) -> Option<&TraitDef> {
        self.traits.iter().find(|t| t.name == name)
    }

    /// Zero-sized types: empty arrays, and aggregates whose fields are all
    /// zero-sized (including aggregates without fields).
    pub fn is_zero_sized(&self, ty: &Ty) -> bool {
        self.zero_sized_inner(ty, &mut HashSet::new())
    }

    fn zero_sized_inner<'a>(&'a self, ty: &'a Ty, visiting: &mut HashSet<&'a str>) -> bool {
        match ty {
            Ty::Array { length: 0, .. } => true,
            Ty::Array { element, .. } => self.zero_sized_inner(element, visiting),
            Ty::Adt { name } => {
                let Some(def) = self.aggregate(name) else { return false };
                if !visiting.insert(name.as_str()) {
                    return false;
                }
                let zst = def.fields.iter().all(|f| self.zero_sized_inner(&f.ty, visiting));
                visiting.remove(name.as_str());
                zst
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR serialization is infallible")
    }

    /// Rewrites aggregate references that have no definition in this package
    /// into opaque descriptors carrying the same symbol.
    fn externalize_unresolved(&mut self) {
        let known: HashSet<String> = self.aggregates.iter().map(|a| a.name.clone()).collect();
        let mut fix = |ty: &mut Ty| {
            ty.for_each_mut(&mut |t| {
                if let Ty::Adt { name } = t {
                    if !known.contains(name.as_str()) {
                        *t = Ty::Opaque { symbol: std::mem::take(name) };
                    }
                }
            })
        };
        for agg in &mut self.aggregates {
            agg.fields.iter_mut().for_each(|f| fix(&mut f.ty));
        }
        for tr in &mut self.traits {
            tr.implementors.iter_mut().for_each(&mut fix);
        }
        for func in &mut self.functions {
            func.types_mut().for_each(&mut fix);
        }
    }
}

#[derive(Debug, Error)]
pub enum IrError {
    #[error("malformed document at `{path}`: {message}")]
    Malformed { path: String, message: String },
    #[error("dangling reference at `{}`: {}", .0.site.path(), .0.kind)]
    DanglingReference(Violation),
}

/// Deserializes a document without checking package invariants.
pub fn parse_document(document: &str) -> Result<PackageIr, IrError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let mut pkg: PackageIr = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        IrError::Malformed { path, message: e.into_inner().to_string() }
    })?;
    pkg.externalize_unresolved();
    Ok(pkg)
}

/// Parses and validates a package document. Aggregate names without a
/// definition are kept as opaque descriptors.
pub fn parse_package(document: &str) -> Result<PackageIr, IrError> {
    let pkg = parse_document(document)?;
    let violations = validate(&pkg);
    if let Some(v) = violations.into_iter().next() {
        return Err(if v.kind.is_dangling() {
            IrError::DanglingReference(v)
        } else {
            IrError::Malformed { path: v.site.path(), message: v.kind.to_string() }
        });
    }
    Ok(pkg)
}

pub fn resolve_aggregate<'a>(name: &str, pkg: &'a PackageIr) -> Option<&'a AggregateDef> {
    pkg.aggregates.iter().find(|a| a.name == name)
}
