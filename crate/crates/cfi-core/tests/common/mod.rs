//! Hand-built facts fixtures shared by the integration tests.

#![allow(dead_code)]

use cfi_core::facts::*;
use cfi_core::types::TypeExpr;

pub fn class(id: &str, bases: &[&str], is_virtual: bool) -> ClassRecord {
    ClassRecord {
        id: ClassId::new(id),
        name: id.to_string(),
        bases: bases
            .iter()
            .map(|b| BaseRef {
                class: ClassId::new(*b),
                is_virtual_base: false,
            })
            .collect(),
        is_virtual_class: is_virtual,
    }
}

pub fn loc(line: u32) -> SourceLoc {
    SourceLoc {
        file: "test.cc".to_string(),
        line,
        column: 1,
    }
}

pub fn method(id: &str, class: &str, name: &str, params: Vec<TypeExpr>, ret: TypeExpr) -> FunctionRecord {
    FunctionRecord {
        id: FunctionId::new(id),
        name: name.to_string(),
        owning_class: Some(ClassId::new(class)),
        params,
        is_variadic: false,
        return_type: ret,
        is_virtual: true,
        is_pure_virtual: false,
        source_loc: loc(1),
        direct_call_count: 0,
        has_return: true,
    }
}

pub fn pure_method(id: &str, class: &str, name: &str, params: Vec<TypeExpr>, ret: TypeExpr) -> FunctionRecord {
    FunctionRecord {
        is_pure_virtual: true,
        ..method(id, class, name, params, ret)
    }
}

pub fn free_fn(id: &str, name: &str, params: Vec<TypeExpr>, ret: TypeExpr) -> FunctionRecord {
    FunctionRecord {
        id: FunctionId::new(id),
        name: name.to_string(),
        owning_class: None,
        params,
        is_variadic: false,
        return_type: ret,
        is_virtual: false,
        is_pure_virtual: false,
        source_loc: loc(2),
        direct_call_count: 0,
        has_return: true,
    }
}

pub fn fn_entry(index: u32, function: &str) -> VTableEntry {
    VTableEntry {
        kind: EntryKind::Function,
        function_id: Some(FunctionId::new(function)),
        entry_index: Some(index),
    }
}

pub fn thunk_entry(index: u32, function: &str) -> VTableEntry {
    VTableEntry {
        kind: EntryKind::Thunk,
        function_id: Some(FunctionId::new(function)),
        entry_index: Some(index),
    }
}

pub fn pure_entry(index: u32) -> VTableEntry {
    VTableEntry {
        kind: EntryKind::Pure,
        function_id: None,
        entry_index: Some(index),
    }
}

pub fn offset_entry() -> VTableEntry {
    VTableEntry {
        kind: EntryKind::Offset,
        function_id: None,
        entry_index: None,
    }
}

pub fn vtable(id: &str, class: &str, order: u32, path: &[&str], entries: Vec<VTableEntry>) -> VTableRecord {
    VTableRecord {
        id: VTableId::new(id),
        owning_class: ClassId::new(class),
        order,
        base_path: path.iter().map(|c| ClassId::new(*c)).collect(),
        entries,
    }
}

pub fn vcall(
    id: &str,
    class: &str,
    order: u32,
    index: u32,
    args: Vec<TypeExpr>,
    returns_used: bool,
    hint: &str,
) -> Callsite {
    Callsite {
        id: CallsiteId::new(id),
        kind: CallsiteKind::VirtualDispatch,
        source_loc: loc(10),
        args,
        returns_used,
        callee_name_hint: Some(hint.to_string()),
        static_class: Some(ClassId::new(class)),
        table_order: Some(order),
        entry_index: Some(index),
        enclosing_function: None,
    }
}

pub fn fpcall(id: &str, args: Vec<TypeExpr>, returns_used: bool, hint: Option<&str>) -> Callsite {
    Callsite {
        id: CallsiteId::new(id),
        kind: CallsiteKind::FunctionPointer,
        source_loc: loc(11),
        args,
        returns_used,
        callee_name_hint: hint.map(str::to_string),
        static_class: None,
        table_order: None,
        entry_index: None,
        enclosing_function: None,
    }
}

pub fn facts(
    classes: Vec<ClassRecord>,
    functions: Vec<FunctionRecord>,
    vtables: Vec<VTableRecord>,
    callsites: Vec<Callsite>,
) -> ProgramFacts {
    ProgramFacts {
        format_version: 1,
        classes: classes.into_iter().map(|c| (c.id.clone(), c)).collect(),
        functions: functions.into_iter().map(|f| (f.id.clone(), f)).collect(),
        vtables: vtables.into_iter().map(|v| (v.id.clone(), v)).collect(),
        callsites: callsites.into_iter().map(|c| (c.id.clone(), c)).collect(),
    }
}

/// Single class A with one virtual function and one dispatch on it.
pub fn minimal() -> ProgramFacts {
    facts(
        vec![class("A", &[], true)],
        vec![method("f_a", "A", "mf", vec![TypeExpr::I32], TypeExpr::Void)],
        vec![vtable("vt_a", "A", 0, &["A"], vec![fn_entry(0, "f_a")])],
        vec![vcall("cs0", "A", 0, 0, vec![TypeExpr::I32], false, "mf")],
    )
}

/// Chain A <- B <- C, slot 0 overridden at each level.
pub fn chain3() -> ProgramFacts {
    facts(
        vec![
            class("A", &[], true),
            class("B", &["A"], true),
            class("C", &["B"], true),
        ],
        vec![
            method("f_a", "A", "mf", vec![], TypeExpr::Void),
            method("f_b", "B", "mf", vec![], TypeExpr::Void),
            method("f_c", "C", "mf", vec![], TypeExpr::Void),
        ],
        vec![
            vtable("vt_a", "A", 0, &["A"], vec![fn_entry(0, "f_a")]),
            vtable("vt_b", "B", 0, &["B", "A"], vec![fn_entry(0, "f_b")]),
            vtable("vt_c", "C", 0, &["C", "B", "A"], vec![fn_entry(0, "f_c")]),
        ],
        vec![vcall("cs0", "A", 0, 0, vec![], false, "mf")],
    )
}

/// Two unrelated single-class hierarchies.
pub fn two_islands() -> ProgramFacts {
    facts(
        vec![class("A", &[], true), class("X", &[], true)],
        vec![
            method("f_a", "A", "mf", vec![], TypeExpr::Void),
            method("f_x", "X", "mx", vec![], TypeExpr::Void),
        ],
        vec![
            vtable("vt_a", "A", 0, &["A"], vec![fn_entry(0, "f_a")]),
            vtable("vt_x", "X", 0, &["X"], vec![fn_entry(0, "f_x")]),
        ],
        vec![
            vcall("cs_a", "A", 0, 0, vec![], false, "mf"),
            vcall("cs_x", "X", 0, 0, vec![], false, "mx"),
        ],
    )
}

/// Multiple inheritance D : A, B with both slots overridden in D. The
/// class-rooted sub-hierarchy at A picks up D's B-path table, the
/// table-rooted one does not.
pub fn mi_diamond() -> ProgramFacts {
    facts(
        vec![
            class("A", &[], true),
            class("B", &[], true),
            class("D", &["A", "B"], true),
        ],
        vec![
            method("f_a", "A", "mf", vec![TypeExpr::I32], TypeExpr::Void),
            method("f_b", "B", "mg", vec![], TypeExpr::I32),
            method("f_da", "D", "mf", vec![TypeExpr::I32], TypeExpr::Void),
            method("f_db", "D", "mg", vec![], TypeExpr::I32),
        ],
        vec![
            vtable("vt_a", "A", 0, &["A"], vec![fn_entry(0, "f_a")]),
            vtable("vt_b", "B", 0, &["B"], vec![fn_entry(0, "f_b")]),
            vtable("vt_d0", "D", 0, &["D", "A"], vec![fn_entry(0, "f_da")]),
            vtable(
                "vt_d1",
                "D",
                1,
                &["D", "B"],
                vec![offset_entry(), thunk_entry(0, "f_db")],
            ),
        ],
        vec![vcall("cs_a", "A", 0, 0, vec![TypeExpr::I32], false, "mf")],
    )
}
