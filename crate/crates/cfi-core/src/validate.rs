//! Structural validation of a facts snapshot.
//!
//! Validation never mutates its input and never fails: every violated
//! invariant becomes one [`Diagnostic`] with a stable code, the offending
//! id, and a human-readable message. An empty result means the snapshot is
//! safe for every downstream engine.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::facts::{
    Callsite, CallsiteKind, ClassId, EntryKind, GadgetAnnotations, ProgramFacts,
};
use crate::types::TypeExpr;

/// Stable machine-readable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticCode {
    DanglingClassRef,
    DanglingFunctionRef,
    InheritanceCycle,
    VirtualFlagMismatch,
    PureNotVirtual,
    VirtualWithoutClass,
    EntryMissingFunction,
    EntryTargetNotVirtual,
    PureEntryHasFunction,
    OffsetEntryHasFunction,
    OffsetEntryHasIndex,
    EntryIndexMissing,
    EntryIndexNotDense,
    DuplicateVTableOrder,
    DuplicateBasePath,
    BasePathOwnerMismatch,
    BasePathBrokenLink,
    VTableOnNonVirtualClass,
    CallsiteMissingDispatchFields,
    CallsiteUnexpectedDispatchFields,
    CallsiteStaticNotVirtual,
    CallsiteNoSuchTable,
    CallsiteEntryOutOfRange,
    EmptyTypeIdentifier,
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticCode::DanglingClassRef => "DANGLING_CLASS_REF",
            DiagnosticCode::DanglingFunctionRef => "DANGLING_FUNCTION_REF",
            DiagnosticCode::InheritanceCycle => "INHERITANCE_CYCLE",
            DiagnosticCode::VirtualFlagMismatch => "VIRTUAL_FLAG_MISMATCH",
            DiagnosticCode::PureNotVirtual => "PURE_NOT_VIRTUAL",
            DiagnosticCode::VirtualWithoutClass => "VIRTUAL_WITHOUT_CLASS",
            DiagnosticCode::EntryMissingFunction => "ENTRY_MISSING_FUNCTION",
            DiagnosticCode::EntryTargetNotVirtual => "ENTRY_TARGET_NOT_VIRTUAL",
            DiagnosticCode::PureEntryHasFunction => "PURE_ENTRY_HAS_FUNCTION",
            DiagnosticCode::OffsetEntryHasFunction => "OFFSET_ENTRY_HAS_FUNCTION",
            DiagnosticCode::OffsetEntryHasIndex => "OFFSET_ENTRY_HAS_INDEX",
            DiagnosticCode::EntryIndexMissing => "ENTRY_INDEX_MISSING",
            DiagnosticCode::EntryIndexNotDense => "ENTRY_INDEX_NOT_DENSE",
            DiagnosticCode::DuplicateVTableOrder => "DUPLICATE_VTABLE_ORDER",
            DiagnosticCode::DuplicateBasePath => "DUPLICATE_BASE_PATH",
            DiagnosticCode::BasePathOwnerMismatch => "BASE_PATH_OWNER_MISMATCH",
            DiagnosticCode::BasePathBrokenLink => "BASE_PATH_BROKEN_LINK",
            DiagnosticCode::VTableOnNonVirtualClass => "VTABLE_ON_NON_VIRTUAL_CLASS",
            DiagnosticCode::CallsiteMissingDispatchFields => "CALLSITE_MISSING_DISPATCH_FIELDS",
            DiagnosticCode::CallsiteUnexpectedDispatchFields => {
                "CALLSITE_UNEXPECTED_DISPATCH_FIELDS"
            }
            DiagnosticCode::CallsiteStaticNotVirtual => "CALLSITE_STATIC_NOT_VIRTUAL",
            DiagnosticCode::CallsiteNoSuchTable => "CALLSITE_NO_SUCH_TABLE",
            DiagnosticCode::CallsiteEntryOutOfRange => "CALLSITE_ENTRY_OUT_OF_RANGE",
            DiagnosticCode::EmptyTypeIdentifier => "EMPTY_TYPE_IDENTIFIER",
        };
        f.write_str(s)
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Id of the record the violation was detected on.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}): {}", self.code, self.subject, self.message)
    }
}

/// Check every model invariant of `facts`. Empty result iff well-formed.
pub fn validate_facts(facts: &ProgramFacts) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_classes(facts, &mut out);
    check_functions(facts, &mut out);
    check_vtables(facts, &mut out);
    check_callsites(facts, &mut out);
    out
}

/// Check that every function referenced by gadget annotations exists.
pub fn validate_gadgets(facts: &ProgramFacts, gadgets: &GadgetAnnotations) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for id in gadgets.flags.keys() {
        if !facts.functions.contains_key(id) {
            push(
                &mut out,
                DiagnosticCode::DanglingFunctionRef,
                id.as_str(),
                "gadget annotation references unknown function",
            );
        }
    }
    out
}

fn push(out: &mut Vec<Diagnostic>, code: DiagnosticCode, subject: &str, message: impl Into<String>) {
    out.push(Diagnostic {
        code,
        subject: String::from(subject),
        message: message.into(),
    });
}

fn check_classes(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) {
    for class in facts.classes.values() {
        for base in &class.bases {
            if !facts.classes.contains_key(&base.class) {
                push(
                    out,
                    DiagnosticCode::DanglingClassRef,
                    base.class.as_str(),
                    format!("base of class {} does not resolve", class.id),
                );
            }
        }
    }

    let cyclic = detect_cycles(facts, out);
    if !cyclic {
        check_virtual_flags(facts, out);
    }
}

/// Three-color DFS over the base relation. Returns true if any cycle was
/// reported.
fn detect_cycles(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color: BTreeMap<&ClassId, Color> =
        facts.classes.keys().map(|id| (id, Color::White)).collect();
    let mut found = false;

    for start in facts.classes.keys() {
        if color[start] != Color::White {
            continue;
        }
        // Iterative DFS; stack holds (node, next base position).
        let mut stack: Vec<(&ClassId, usize)> = alloc::vec![(start, 0)];
        color.insert(start, Color::Gray);
        while let Some((node, pos)) = stack.pop() {
            let bases = &facts.classes[node].bases;
            if pos < bases.len() {
                stack.push((node, pos + 1));
                let next = &bases[pos].class;
                match color.get(next) {
                    Some(Color::White) => {
                        color.insert(next, Color::Gray);
                        stack.push((next, 0));
                    }
                    Some(Color::Gray) => {
                        if !found {
                            push(
                                out,
                                DiagnosticCode::InheritanceCycle,
                                next.as_str(),
                                "class base relation contains a cycle",
                            );
                        }
                        found = true;
                    }
                    _ => {}
                }
            } else {
                color.insert(node, Color::Black);
            }
        }
    }
    found
}

/// Recompute virtual-ness from the closure of inherited virtual functions
/// and compare against the declared flag. Requires an acyclic hierarchy.
fn check_virtual_flags(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) {
    let mut own_virtual: BTreeSet<&ClassId> = BTreeSet::new();
    for f in facts.functions.values() {
        if f.is_virtual {
            if let Some(c) = &f.owning_class {
                own_virtual.insert(c);
            }
        }
    }
    let mut memo: BTreeMap<&ClassId, bool> = BTreeMap::new();
    for id in facts.classes.keys() {
        let computed = is_virtual_closure(facts, id, &own_virtual, &mut memo);
        let declared = facts.classes[id].is_virtual_class;
        if computed != declared {
            push(
                out,
                DiagnosticCode::VirtualFlagMismatch,
                id.as_str(),
                format!("declared is_virtual_class={declared}, computed {computed}"),
            );
        }
    }
}

fn is_virtual_closure<'f>(
    facts: &'f ProgramFacts,
    id: &'f ClassId,
    own: &BTreeSet<&ClassId>,
    memo: &mut BTreeMap<&'f ClassId, bool>,
) -> bool {
    if let Some(&v) = memo.get(id) {
        return v;
    }
    let mut v = own.contains(id);
    if !v {
        for base in &facts.classes[id].bases {
            if facts.classes.contains_key(&base.class)
                && is_virtual_closure(facts, &base.class, own, memo)
            {
                v = true;
                break;
            }
        }
    }
    memo.insert(id, v);
    v
}

fn check_functions(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) {
    for f in facts.functions.values() {
        if f.is_pure_virtual && !f.is_virtual {
            push(
                out,
                DiagnosticCode::PureNotVirtual,
                f.id.as_str(),
                "pure-virtual function not marked virtual",
            );
        }
        if f.is_virtual && f.owning_class.is_none() {
            push(
                out,
                DiagnosticCode::VirtualWithoutClass,
                f.id.as_str(),
                "virtual function has no owning class",
            );
        }
        if let Some(c) = &f.owning_class {
            if !facts.classes.contains_key(c) {
                push(
                    out,
                    DiagnosticCode::DanglingClassRef,
                    c.as_str(),
                    format!("owning class of function {} does not resolve", f.id),
                );
            }
        }
        for t in f.params.iter().chain(core::iter::once(&f.return_type)) {
            check_type(t, f.id.as_str(), out);
        }
    }
}

fn check_type(t: &TypeExpr, subject: &str, out: &mut Vec<Diagnostic>) {
    match t {
        TypeExpr::Ptr(inner) => check_type(inner, subject, out),
        TypeExpr::Named(name) if name.is_empty() => push(
            out,
            DiagnosticCode::EmptyTypeIdentifier,
            subject,
            "named type with empty identifier",
        ),
        _ => {}
    }
}

fn check_vtables(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) {
    let mut seen_order: BTreeSet<(&ClassId, u32)> = BTreeSet::new();
    let mut seen_path: BTreeSet<(&ClassId, &[ClassId])> = BTreeSet::new();

    for vt in facts.vtables.values() {
        match facts.classes.get(&vt.owning_class) {
            None => push(
                out,
                DiagnosticCode::DanglingClassRef,
                vt.owning_class.as_str(),
                format!("owning class of vtable {} does not resolve", vt.id),
            ),
            Some(c) if !c.is_virtual_class => push(
                out,
                DiagnosticCode::VTableOnNonVirtualClass,
                vt.id.as_str(),
                "vtable owned by a non-virtual class",
            ),
            _ => {}
        }

        if !seen_order.insert((&vt.owning_class, vt.order)) {
            push(
                out,
                DiagnosticCode::DuplicateVTableOrder,
                vt.id.as_str(),
                format!("class {} already has a table with order {}", vt.owning_class, vt.order),
            );
        }

        check_base_path(facts, vt, &mut seen_path, out);

        let mut next_index = 0u32;
        for entry in &vt.entries {
            match entry.kind {
                EntryKind::Function | EntryKind::Thunk => match &entry.function_id {
                    None => push(
                        out,
                        DiagnosticCode::EntryMissingFunction,
                        vt.id.as_str(),
                        "function/thunk entry without function id",
                    ),
                    Some(fid) => match facts.functions.get(fid) {
                        None => push(
                            out,
                            DiagnosticCode::DanglingFunctionRef,
                            fid.as_str(),
                            format!("vtable {} entry references unknown function", vt.id),
                        ),
                        Some(f) if !f.is_virtual => push(
                            out,
                            DiagnosticCode::EntryTargetNotVirtual,
                            fid.as_str(),
                            format!("vtable {} entry targets a non-virtual function", vt.id),
                        ),
                        _ => {}
                    },
                },
                EntryKind::Pure => {
                    if entry.function_id.is_some() {
                        push(
                            out,
                            DiagnosticCode::PureEntryHasFunction,
                            vt.id.as_str(),
                            "pure entry carries a function id",
                        );
                    }
                }
                EntryKind::Offset => {
                    if entry.function_id.is_some() {
                        push(
                            out,
                            DiagnosticCode::OffsetEntryHasFunction,
                            vt.id.as_str(),
                            "offset entry carries a function id",
                        );
                    }
                    if entry.entry_index.is_some() {
                        push(
                            out,
                            DiagnosticCode::OffsetEntryHasIndex,
                            vt.id.as_str(),
                            "offset entry carries an entry index",
                        );
                    }
                }
            }
            if entry.kind.is_function_slot() {
                match entry.entry_index {
                    None => push(
                        out,
                        DiagnosticCode::EntryIndexMissing,
                        vt.id.as_str(),
                        "function slot without entry index",
                    ),
                    Some(i) if i != next_index => push(
                        out,
                        DiagnosticCode::EntryIndexNotDense,
                        vt.id.as_str(),
                        format!("function slot index {i}, expected {next_index}"),
                    ),
                    _ => {}
                }
                next_index += 1;
            }
        }
    }
}

fn check_base_path<'f>(
    facts: &'f ProgramFacts,
    vt: &'f crate::facts::VTableRecord,
    seen_path: &mut BTreeSet<(&'f ClassId, &'f [ClassId])>,
    out: &mut Vec<Diagnostic>,
) {
    if vt.base_path.first() != Some(&vt.owning_class) {
        push(
            out,
            DiagnosticCode::BasePathOwnerMismatch,
            vt.id.as_str(),
            "base path must start at the owning class",
        );
        return;
    }
    if !seen_path.insert((&vt.owning_class, vt.base_path.as_slice())) {
        push(
            out,
            DiagnosticCode::DuplicateBasePath,
            vt.id.as_str(),
            "class already has a table with this base path",
        );
    }
    for pair in vt.base_path.windows(2) {
        let (from, to) = (&pair[0], &pair[1]);
        match facts.classes.get(from) {
            None => {
                push(
                    out,
                    DiagnosticCode::DanglingClassRef,
                    from.as_str(),
                    format!("base path of vtable {} does not resolve", vt.id),
                );
                return;
            }
            Some(c) => {
                if !c.bases.iter().any(|b| &b.class == to) {
                    push(
                        out,
                        DiagnosticCode::BasePathBrokenLink,
                        vt.id.as_str(),
                        format!("{to} is not a direct base of {from}"),
                    );
                }
            }
        }
    }
    if let Some(last) = vt.base_path.last() {
        if !facts.classes.contains_key(last) {
            push(
                out,
                DiagnosticCode::DanglingClassRef,
                last.as_str(),
                format!("base path of vtable {} does not resolve", vt.id),
            );
        }
    }
}

fn check_callsites(facts: &ProgramFacts, out: &mut Vec<Diagnostic>) {
    // (class, order) -> table, for dispatch coordinate checks.
    let mut by_coord: BTreeMap<(&ClassId, u32), &crate::facts::VTableRecord> = BTreeMap::new();
    for vt in facts.vtables.values() {
        by_coord.entry((&vt.owning_class, vt.order)).or_insert(vt);
    }

    for cs in facts.callsites.values() {
        for t in &cs.args {
            check_type(t, cs.id.as_str(), out);
        }
        if let Some(fid) = &cs.enclosing_function {
            if !facts.functions.contains_key(fid) {
                push(
                    out,
                    DiagnosticCode::DanglingFunctionRef,
                    fid.as_str(),
                    format!("enclosing function of callsite {} does not resolve", cs.id),
                );
            }
        }
        match cs.kind {
            CallsiteKind::FunctionPointer => {
                if cs.static_class.is_some() || cs.table_order.is_some() || cs.entry_index.is_some()
                {
                    push(
                        out,
                        DiagnosticCode::CallsiteUnexpectedDispatchFields,
                        cs.id.as_str(),
                        "function-pointer callsite carries dispatch coordinates",
                    );
                }
            }
            CallsiteKind::VirtualDispatch => check_dispatch(facts, cs, &by_coord, out),
        }
    }
}

fn check_dispatch(
    facts: &ProgramFacts,
    cs: &Callsite,
    by_coord: &BTreeMap<(&ClassId, u32), &crate::facts::VTableRecord>,
    out: &mut Vec<Diagnostic>,
) {
    let (class, order, index) = match (&cs.static_class, cs.table_order, cs.entry_index) {
        (Some(c), Some(o), Some(i)) => (c, o, i),
        _ => {
            push(
                out,
                DiagnosticCode::CallsiteMissingDispatchFields,
                cs.id.as_str(),
                "virtual dispatch requires static class, table order and entry index",
            );
            return;
        }
    };
    let record = match facts.classes.get(class) {
        None => {
            push(
                out,
                DiagnosticCode::DanglingClassRef,
                class.as_str(),
                format!("static class of callsite {} does not resolve", cs.id),
            );
            return;
        }
        Some(r) => r,
    };
    if !record.is_virtual_class {
        push(
            out,
            DiagnosticCode::CallsiteStaticNotVirtual,
            cs.id.as_str(),
            format!("static class {class} is not virtual"),
        );
    }
    match by_coord.get(&(class, order)) {
        None => push(
            out,
            DiagnosticCode::CallsiteNoSuchTable,
            cs.id.as_str(),
            format!("class {class} has no table with order {order}"),
        ),
        Some(table) => {
            let slots = table.function_slot_count() as u32;
            if index >= slots {
                push(
                    out,
                    DiagnosticCode::CallsiteEntryOutOfRange,
                    cs.id.as_str(),
                    format!("entry index {index} out of range (table has {slots} function slots)"),
                );
            }
        }
    }
}
