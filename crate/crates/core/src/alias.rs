//! Ownership-aware alias graphs over a function's locals.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{FunctionIr, LocalId, Statement, Terminator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AliasError {
    #[error("local _{0} is not a node of the alias graph")]
    UnknownNode(LocalId),
}

/// Directed graph where `a -> b` means `a` was created as an alias of `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AliasGraph {
    nodes: BTreeSet<LocalId>,
    edges: BTreeMap<LocalId, BTreeSet<LocalId>>,
}

impl AliasGraph {
    pub fn new(nodes: impl IntoIterator<Item = LocalId>) -> AliasGraph {
        AliasGraph { nodes: nodes.into_iter().collect(), edges: BTreeMap::new() }
    }

    pub fn contains(&self, node: LocalId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = LocalId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (LocalId, LocalId)> + '_ {
        self.edges.iter().flat_map(|(&a, outs)| outs.iter().map(move |&b| (a, b)))
    }

    pub fn successors(&self, node: LocalId) -> impl Iterator<Item = LocalId> + '_ {
        self.edges.get(&node).into_iter().flatten().copied()
    }

    /// Inserts `from -> to`; ignored unless both endpoints are nodes.
    pub fn insert_edge(&mut self, from: LocalId, to: LocalId) {
        if self.contains(from) && self.contains(to) {
            self.edges.entry(from).or_default().insert(to);
        }
    }

    pub fn remove_edge(&mut self, from: LocalId, to: LocalId) {
        if let Some(outs) = self.edges.get_mut(&from) {
            outs.remove(&to);
            if outs.is_empty() {
                self.edges.remove(&from);
            }
        }
    }

    pub fn clear_outgoing(&mut self, from: LocalId) {
        self.edges.remove(&from);
    }

    /// Nodes reachable from `a`; `a` itself only when it lies on a cycle.
    pub fn descendants(&self, a: LocalId) -> Result<BTreeSet<LocalId>, AliasError> {
        if !self.contains(a) {
            return Err(AliasError::UnknownNode(a));
        }
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<LocalId> = self.successors(a).collect();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(self.successors(n));
            }
        }
        Ok(seen)
    }

    /// Whether `a` and `b`, together with their descendants, share a node.
    pub fn may_alias(&self, a: LocalId, b: LocalId) -> Result<bool, AliasError> {
        let mut da = self.descendants(a)?;
        da.insert(a);
        let mut db = self.descendants(b)?;
        db.insert(b);
        Ok(!da.is_disjoint(&db))
    }

    /// `may_alias` that treats unknown locals as non-aliasing.
    pub fn aliases(&self, a: LocalId, b: LocalId) -> bool {
        self.may_alias(a, b).unwrap_or(false)
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", name.replace('"', "\\\""));
        for n in &self.nodes {
            let _ = writeln!(out, "    _{n};");
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "    _{a} -> _{b};");
        }
        out.push_str("}\n");
        out
    }
}

/// Replays the function's statements, then its call terminators, over a
/// graph whose nodes are the function's locals.
pub fn build_alias_graph(func: &FunctionIr) -> AliasGraph {
    let mut g = AliasGraph::new(func.locals.iter().map(|l| l.id));
    for (_, stmt) in func.statements() {
        match stmt {
            Statement::Assign { lhs, rvalue } if rvalue.creates_alias() => {
                let op = rvalue.operand();
                if let Some(src) = op.local() {
                    g.insert_edge(lhs.local, src);
                    if op.is_move() {
                        g.remove_edge(lhs.local, src);
                    }
                }
            }
            Statement::Assign { .. } => {}
            Statement::StorageDead { local } => g.clear_outgoing(*local),
        }
    }
    for (_, term) in func.terminators() {
        if let Terminator::Call { args, dest, .. } = term {
            for arg in args {
                if let Some(src) = arg.local() {
                    g.insert_edge(*dest, src);
                    if arg.is_move() {
                        g.remove_edge(*dest, src);
                    }
                }
            }
        }
    }
    g
}
