use std::collections::HashSet;
use std::fmt;

use super::{
    BlockId, FunctionIr, LocalId, Operand, PackageIr, Repr, Rvalue, Statement, Terminator,
    RETURN_LOCAL,
};

/// Where a violation was found. Terminators are reported with the statement
/// index one past the block's last statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationSite {
    Package,
    Aggregate { index: usize, name: String },
    Trait { index: usize, name: String },
    Function { index: usize, name: String, block: Option<BlockId>, statement: Option<u32>, terminator: bool },
}

impl ViolationSite {
    /// JSON-pointer-like path into the source document.
    pub fn path(&self) -> String {
        match self {
            ViolationSite::Package => String::from("."),
            ViolationSite::Aggregate { index, .. } => format!("aggregates[{index}]"),
            ViolationSite::Trait { index, .. } => format!("traits[{index}]"),
            ViolationSite::Function { index, block, statement, terminator, .. } => {
                let mut p = format!("functions[{index}]");
                if let Some(b) = block {
                    p.push_str(&format!(".blocks[{b}]"));
                    if *terminator {
                        p.push_str(".terminator");
                    } else if let Some(s) = statement {
                        p.push_str(&format!(".statements[{s}]"));
                    }
                }
                p
            }
        }
    }
}

impl fmt::Display for ViolationSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationSite::Package => f.write_str("package"),
            ViolationSite::Aggregate { name, .. } => write!(f, "aggregate `{name}`"),
            ViolationSite::Trait { name, .. } => write!(f, "trait `{name}`"),
            ViolationSite::Function { name, block, statement, .. } => {
                write!(f, "function `{name}`")?;
                if let Some(b) = block {
                    write!(f, ", block {b}")?;
                }
                if let Some(s) = statement {
                    write!(f, ", statement {s}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DanglingLocal(LocalId),
    DanglingBlock(BlockId),
    MissingReturnSlot,
    ReturnSlotType,
    DuplicateLocal(LocalId),
    ParamOrder { position: usize, expected: LocalId, found: LocalId },
    ParamType(LocalId),
    DuplicateFunction(String),
    DuplicateAggregate(String),
    DuplicateTrait(String),
    TransparentFields(usize),
}

impl ViolationKind {
    /// Out-of-range local or block ids.
    pub fn is_dangling(&self) -> bool {
        matches!(self, ViolationKind::DanglingLocal(_) | ViolationKind::DanglingBlock(_))
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::DanglingLocal(l) => write!(f, "local _{l} is not in the local table"),
            ViolationKind::DanglingBlock(b) => write!(f, "block bb{b} does not exist"),
            ViolationKind::MissingReturnSlot => f.write_str("local _0 (return slot) is missing"),
            ViolationKind::ReturnSlotType => f.write_str("type of _0 differs from the return type"),
            ViolationKind::DuplicateLocal(l) => write!(f, "local _{l} declared twice"),
            ViolationKind::ParamOrder { position, expected, found } => {
                write!(f, "parameter {position} is _{found}, expected _{expected}")
            }
            ViolationKind::ParamType(l) => write!(f, "parameter _{l} type differs from its local"),
            ViolationKind::DuplicateFunction(n) => write!(f, "function `{n}` defined twice"),
            ViolationKind::DuplicateAggregate(n) => write!(f, "aggregate `{n}` defined twice"),
            ViolationKind::DuplicateTrait(n) => write!(f, "trait `{n}` defined twice"),
            ViolationKind::TransparentFields(n) => {
                write!(f, "transparent aggregate has {n} non-zero-sized fields, expected 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub site: ViolationSite,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.site, self.kind)
    }
}

/// Checks every package invariant and returns all violations found, in
/// document order. Never panics on any deserialized package.
pub fn validate(pkg: &PackageIr) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for (index, agg) in pkg.aggregates.iter().enumerate() {
        let site = || ViolationSite::Aggregate { index, name: agg.name.clone() };
        if !seen.insert(agg.name.as_str()) {
            out.push(Violation { site: site(), kind: ViolationKind::DuplicateAggregate(agg.name.clone()) });
        }
        if agg.repr == Repr::Transparent {
            let non_zst = agg.fields.iter().filter(|f| !pkg.is_zero_sized(&f.ty)).count();
            if non_zst != 1 {
                out.push(Violation { site: site(), kind: ViolationKind::TransparentFields(non_zst) });
            }
        }
    }

    let mut seen = HashSet::new();
    for (index, tr) in pkg.traits.iter().enumerate() {
        if !seen.insert(tr.name.as_str()) {
            out.push(Violation {
                site: ViolationSite::Trait { index, name: tr.name.clone() },
                kind: ViolationKind::DuplicateTrait(tr.name.clone()),
            });
        }
    }

    let mut seen = HashSet::new();
    for (index, func) in pkg.functions.iter().enumerate() {
        if !seen.insert(func.name.as_str()) {
            out.push(Violation {
                site: fn_site(index, func, None, None, false),
                kind: ViolationKind::DuplicateFunction(func.name.clone()),
            });
        }
        validate_function(index, func, &mut out);
    }
    out
}

fn fn_site(
    index: usize,
    func: &FunctionIr,
    block: Option<BlockId>,
    statement: Option<u32>,
    terminator: bool,
) -> ViolationSite {
    ViolationSite::Function { index, name: func.name.clone(), block, statement, terminator }
}

fn validate_function(index: usize, func: &FunctionIr, out: &mut Vec<Violation>) {
    let header = |kind| Violation { site: fn_site(index, func, None, None, false), kind };

    let mut ids = HashSet::new();
    for l in &func.locals {
        if !ids.insert(l.id) {
            out.push(header(ViolationKind::DuplicateLocal(l.id)));
        }
    }
    match func.local_ty(RETURN_LOCAL) {
        None => out.push(header(ViolationKind::MissingReturnSlot)),
        Some(ty) if *ty != func.return_type => out.push(header(ViolationKind::ReturnSlotType)),
        Some(_) => {}
    }
    for (position, p) in func.params.iter().enumerate() {
        let expected = position as LocalId + 1;
        if p.local != expected {
            out.push(header(ViolationKind::ParamOrder { position, expected, found: p.local }));
        }
        match func.local_ty(p.local) {
            None => out.push(header(ViolationKind::DanglingLocal(p.local))),
            Some(ty) if *ty != p.ty => out.push(header(ViolationKind::ParamType(p.local))),
            Some(_) => {}
        }
    }

    let block_count = func.blocks.len();
    for (b, block) in func.blocks.iter().enumerate() {
        let b = b as BlockId;
        for (s, stmt) in block.statements.iter().enumerate() {
            let mut locals = Vec::new();
            match stmt {
                Statement::Assign { lhs, rvalue } => {
                    locals.push(lhs.local);
                    locals.extend(rvalue_local(rvalue));
                }
                Statement::StorageDead { local } => locals.push(*local),
            }
            for l in locals.into_iter().filter(|l| !ids.contains(l)) {
                out.push(Violation {
                    site: fn_site(index, func, Some(b), Some(s as u32), false),
                    kind: ViolationKind::DanglingLocal(l),
                });
            }
        }
        let site = || fn_site(index, func, Some(b), Some(block.statements.len() as u32), true);
        match &block.terminator {
            Terminator::Call { args, dest, .. } => {
                let used = std::iter::once(*dest).chain(args.iter().filter_map(Operand::local));
                for l in used.filter(|l| !ids.contains(l)) {
                    out.push(Violation { site: site(), kind: ViolationKind::DanglingLocal(l) });
                }
            }
            Terminator::Goto { target } => {
                if *target as usize >= block_count {
                    out.push(Violation { site: site(), kind: ViolationKind::DanglingBlock(*target) });
                }
            }
            Terminator::Return => {}
        }
    }
}

fn rvalue_local(rvalue: &Rvalue) -> Option<LocalId> {
    rvalue.operand().local()
}
