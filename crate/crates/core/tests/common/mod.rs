#![allow(dead_code)]

use std::path::PathBuf;

use castlint_core::ir::{
    AggregateDef, BasicBlock, FunctionIr, GenericParam, LocalDecl, Operand, PackageIr, Param, Place, Rvalue,
    Statement, Terminator, Visibility,
};
use castlint_core::{Primitive, Ty};

pub fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn fixture_paths() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus().join("fixtures"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

pub fn u8() -> Ty {
    Ty::prim(Primitive::U8)
}

pub fn ptr(t: Ty) -> Ty {
    Ty::raw_ptr(false, t)
}

pub fn assign(lhs: u32, rvalue: Rvalue) -> Statement {
    Statement::Assign { lhs: Place::local(lhs), rvalue }
}

pub fn cast(from: u32, src: Ty, dst: Ty) -> Rvalue {
    Rvalue::CastPtrToPtr { operand: Operand::copy(Place::local(from)), src_type: src, dst_type: dst }
}

pub fn block(statements: Vec<Statement>, terminator: Terminator) -> BasicBlock {
    BasicBlock { statements, terminator }
}

/// A public unsafe function whose locals after the parameters are `extra`.
pub fn function(
    name: &str,
    params: Vec<Ty>,
    ret: Ty,
    extra: Vec<Ty>,
    generics: Vec<(&str, Vec<&str>)>,
    blocks: Vec<BasicBlock>,
) -> FunctionIr {
    let mut locals = vec![LocalDecl { id: 0, ty: ret.clone() }];
    let mut ps = Vec::new();
    for (i, t) in params.into_iter().enumerate() {
        let id = i as u32 + 1;
        locals.push(LocalDecl { id, ty: t.clone() });
        ps.push(Param { local: id, ty: t });
    }
    let base = locals.len() as u32;
    for (i, t) in extra.into_iter().enumerate() {
        locals.push(LocalDecl { id: base + i as u32, ty: t });
    }
    FunctionIr {
        name: name.into(),
        visibility: Visibility::Public,
        method_of: None,
        contains_unsafe: true,
        generics: generics
            .into_iter()
            .map(|(n, b)| GenericParam { name: n.into(), bounds: b.into_iter().map(String::from).collect() })
            .collect(),
        params: ps,
        return_type: ret,
        locals,
        blocks,
    }
}

pub fn package(functions: Vec<FunctionIr>, aggregates: Vec<AggregateDef>) -> PackageIr {
    PackageIr { name: "t".into(), functions, aggregates, traits: vec![] }
}

/// `fn f(p: *const src) -> *const dst { p as *const dst }`.
pub fn cast_function(src: Ty, dst: Ty) -> FunctionIr {
    function(
        "f",
        vec![ptr(src.clone())],
        ptr(dst.clone()),
        vec![],
        vec![],
        vec![block(vec![assign(0, cast(1, ptr(src), ptr(dst)))], Terminator::Return)],
    )
}
