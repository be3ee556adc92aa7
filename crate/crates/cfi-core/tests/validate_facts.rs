mod common;

use cfi_core::facts::*;
use cfi_core::types::TypeExpr;
use cfi_core::validate::{validate_facts, validate_gadgets, DiagnosticCode};
use common::*;

#[test]
fn minimal_program_is_clean() {
    assert_eq!(validate_facts(&minimal()), vec![]);
}

#[test]
fn dangling_class_reference_is_reported() {
    let mut f = minimal();
    let cs = f.callsites.get_mut(&CallsiteId::new("cs0")).unwrap();
    cs.static_class = Some(ClassId::new("Z"));
    let diags = validate_facts(&f);
    assert!(diags
        .iter()
        .any(|d| d.code == DiagnosticCode::DanglingClassRef && d.subject == "Z"));
}

#[test]
fn inheritance_cycle_is_reported() {
    let mut a = class("A", &["B"], true);
    a.is_virtual_class = true;
    let f = facts(
        vec![a, class("B", &["A"], true)],
        vec![method("f_a", "A", "mf", vec![], TypeExpr::Void)],
        vec![],
        vec![],
    );
    let diags = validate_facts(&f);
    assert!(diags.iter().any(|d| d.code == DiagnosticCode::InheritanceCycle));
}

#[test]
fn virtual_flag_mismatch_is_recomputed() {
    // B derives A and inherits mf, but claims to be non-virtual.
    let f = facts(
        vec![class("A", &[], true), class("B", &["A"], false)],
        vec![method("f_a", "A", "mf", vec![], TypeExpr::Void)],
        vec![vtable("vt_a", "A", 0, &["A"], vec![fn_entry(0, "f_a")])],
        vec![],
    );
    let diags = validate_facts(&f);
    assert!(diags
        .iter()
        .any(|d| d.code == DiagnosticCode::VirtualFlagMismatch && d.subject == "B"));
}

#[test]
fn function_flag_invariants() {
    let mut bad_pure = free_fn("f0", "g", vec![], TypeExpr::Void);
    bad_pure.is_pure_virtual = true;
    let mut headless = free_fn("f1", "h", vec![], TypeExpr::Void);
    headless.is_virtual = true;
    let f = facts(vec![], vec![bad_pure, headless], vec![], vec![]);
    let diags = validate_facts(&f);
    assert!(diags.iter().any(|d| d.code == DiagnosticCode::PureNotVirtual));
    assert!(diags.iter().any(|d| d.code == DiagnosticCode::VirtualWithoutClass));
}

#[test]
fn entry_invariants() {
    // Sparse entry indices.
    let f = facts(
        vec![class("A", &[], true)],
        vec![
            method("f_a", "A", "mf", vec![], TypeExpr::Void),
            method("f_b", "A", "mg", vec![], TypeExpr::Void),
        ],
        vec![vtable(
            "vt_a",
            "A",
            0,
            &["A"],
            vec![fn_entry(0, "f_a"), fn_entry(2, "f_b")],
        )],
        vec![],
    );
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::EntryIndexNotDense));

    // Pure slot carrying a function id.
    let mut bad_pure = pure_entry(0);
    bad_pure.function_id = Some(FunctionId::new("f_a"));
    let f = facts(
        vec![class("A", &[], true)],
        vec![method("f_a", "A", "mf", vec![], TypeExpr::Void)],
        vec![vtable("vt_a", "A", 0, &["A"], vec![bad_pure])],
        vec![],
    );
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::PureEntryHasFunction));

    // Entry pointing at a non-virtual function.
    let f = facts(
        vec![class("A", &[], true)],
        vec![
            method("f_a", "A", "mf", vec![], TypeExpr::Void),
            free_fn("f_free", "g", vec![], TypeExpr::Void),
        ],
        vec![vtable(
            "vt_a",
            "A",
            0,
            &["A"],
            vec![fn_entry(0, "f_a"), fn_entry(1, "f_free")],
        )],
        vec![],
    );
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::EntryTargetNotVirtual));
}

#[test]
fn duplicate_table_order_is_reported() {
    let mut f = minimal();
    f.vtables.insert(
        VTableId::new("vt_a2"),
        vtable("vt_a2", "A", 0, &["A"], vec![fn_entry(0, "f_a")]),
    );
    let diags = validate_facts(&f);
    assert!(diags.iter().any(|d| d.code == DiagnosticCode::DuplicateVTableOrder));
    assert!(diags.iter().any(|d| d.code == DiagnosticCode::DuplicateBasePath));
}

#[test]
fn base_path_must_chain_through_direct_bases() {
    let f = facts(
        vec![class("A", &[], true), class("B", &[], true)],
        vec![
            method("f_a", "A", "mf", vec![], TypeExpr::Void),
            method("f_b", "B", "mg", vec![], TypeExpr::Void),
        ],
        // B is not a base of A.
        vec![vtable("vt_a", "A", 0, &["A", "B"], vec![fn_entry(0, "f_a")])],
        vec![],
    );
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::BasePathBrokenLink));
}

#[test]
fn callsite_invariants() {
    // Dispatch slot beyond the table.
    let mut f = minimal();
    f.callsites.get_mut(&CallsiteId::new("cs0")).unwrap().entry_index = Some(5);
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::CallsiteEntryOutOfRange));

    // Function-pointer callsite with dispatch coordinates.
    let mut f = minimal();
    let mut cs = fpcall("cs1", vec![], false, None);
    cs.static_class = Some(ClassId::new("A"));
    f.callsites.insert(cs.id.clone(), cs);
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::CallsiteUnexpectedDispatchFields));

    // Virtual dispatch without coordinates.
    let mut f = minimal();
    f.callsites.get_mut(&CallsiteId::new("cs0")).unwrap().table_order = None;
    assert!(validate_facts(&f)
        .iter()
        .any(|d| d.code == DiagnosticCode::CallsiteMissingDispatchFields));
}

#[test]
fn validation_is_pure() {
    let f = mi_diamond();
    assert_eq!(validate_facts(&f), validate_facts(&f));
}

#[test]
fn gadget_annotations_must_resolve() {
    let f = minimal();
    let mut gadgets = GadgetAnnotations::default();
    gadgets.flags.insert(
        FunctionId::new("nope"),
        GadgetFlags {
            has_forward_gadget: true,
            has_return_gadget: false,
        },
    );
    let diags = validate_gadgets(&f, &gadgets);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, DiagnosticCode::DanglingFunctionRef);

    gadgets.flags.clear();
    gadgets.flags.insert(FunctionId::new("f_a"), GadgetFlags::default());
    assert!(validate_gadgets(&f, &gadgets).is_empty());
}
