//! Synthetic packages for benchmarking the analysis pipeline.

use castlint_core::ir::{
    BasicBlock, FunctionIr, GenericParam, LocalDecl, Operand, PackageIr, Param, Place, Rvalue, Statement, Terminator,
    TraitDef, Visibility,
};
use castlint_core::{Primitive, Ty};

fn ptr(t: Ty) -> Ty {
    Ty::raw_ptr(false, t)
}

fn assign(lhs: u32, rvalue: Rvalue) -> Statement {
    Statement::Assign { lhs: Place::local(lhs), rvalue }
}

/// One function of shape `i % 3`:
/// 0. concrete `u8 -> u32` cast read through a deref,
/// 1. `u8 -> T` cast with a `Codec` bound, passed to an unsafe API,
/// 2. a caller of the previous function that converts `u32 -> u8` first.
fn function(i: usize) -> FunctionIr {
    let u8 = Ty::prim(Primitive::U8);
    let u32 = Ty::prim(Primitive::U32);
    let t = Ty::generic("T");
    let (generics, ret, extra, blocks) = match i % 3 {
        0 => (
            vec![],
            u32.clone(),
            vec![ptr(u32.clone())],
            vec![BasicBlock {
                statements: vec![
                    assign(2, Rvalue::CastPtrToPtr { operand: Operand::copy(Place::local(1)), src_type: ptr(u8.clone()), dst_type: ptr(u32.clone()) }),
                    assign(0, Rvalue::Use { operand: Operand::copy(Place::deref(2)) }),
                ],
                terminator: Terminator::Return,
            }],
        ),
        1 => (
            vec![GenericParam { name: "T".into(), bounds: vec!["Codec".into(), "Copy".into()] }],
            t.clone(),
            vec![ptr(t.clone())],
            vec![
                BasicBlock {
                    statements: vec![assign(
                        2,
                        Rvalue::CastPtrToPtr { operand: Operand::copy(Place::local(1)), src_type: ptr(u8.clone()), dst_type: ptr(t) },
                    )],
                    terminator: Terminator::Call {
                        callee: "core::ptr::read".into(),
                        args: vec![Operand::copy(Place::local(2))],
                        dest: 0,
                        is_unsafe_api: true,
                    },
                },
                BasicBlock { statements: vec![], terminator: Terminator::Return },
            ],
        ),
        _ => (
            vec![],
            u32.clone(),
            vec![ptr(u32.clone()), ptr(u8.clone())],
            vec![
                BasicBlock {
                    statements: vec![
                        assign(2, Rvalue::RawPtr { operand: Operand::copy(Place::deref(1)), mutable: false }),
                        assign(3, Rvalue::CastPtrToPtr { operand: Operand::copy(Place::local(2)), src_type: ptr(u32.clone()), dst_type: ptr(u8) }),
                    ],
                    terminator: Terminator::Call {
                        callee: format!("f{}", i - 2),
                        args: vec![Operand::copy(Place::local(3))],
                        dest: 0,
                        is_unsafe_api: false,
                    },
                },
                BasicBlock { statements: vec![], terminator: Terminator::Return },
            ],
        ),
    };
    let param = if i % 3 == 2 { Ty::reference(false, u32) } else { ptr(Ty::prim(Primitive::U8)) };
    let mut locals = vec![LocalDecl { id: 0, ty: ret.clone() }, LocalDecl { id: 1, ty: param.clone() }];
    locals.extend(extra.into_iter().enumerate().map(|(k, ty)| LocalDecl { id: k as u32 + 2, ty }));
    FunctionIr {
        name: format!("f{i}"),
        visibility: Visibility::Public,
        method_of: None,
        contains_unsafe: true,
        generics,
        params: vec![Param { local: 1, ty: param }],
        return_type: ret,
        locals,
        blocks,
    }
}

/// A valid package with `functions` functions cycling through three shapes.
pub fn synthetic_package(functions: usize) -> PackageIr {
    let codec = TraitDef {
        name: "Codec".into(),
        supertraits: vec![],
        implementors: [Primitive::U8, Primitive::U16, Primitive::U32, Primitive::F64].into_iter().map(Ty::prim).collect(),
    };
    PackageIr {
        name: format!("synthetic-{functions}"),
        functions: (0..functions).map(function).collect(),
        aggregates: vec![],
        traits: vec![codec],
    }
}
