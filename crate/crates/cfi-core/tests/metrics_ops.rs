mod common;

use cfi_core::facts::*;
use cfi_core::metrics::{bcga, fcga, rtr};
use cfi_core::policy::{EngineOptions, Evaluator, PolicyId, TargetSet};
use cfi_core::types::TypeExpr;
use common::*;

fn flags(fwd: bool, ret: bool) -> GadgetFlags {
    GadgetFlags {
        has_forward_gadget: fwd,
        has_return_gadget: ret,
    }
}

/// f and g, plus one pointer callsite whose signature matches only f.
fn one_target_program() -> ProgramFacts {
    facts(
        vec![],
        vec![
            free_fn("f", "f", vec![TypeExpr::I32], TypeExpr::Void),
            free_fn("g", "g", vec![TypeExpr::F64], TypeExpr::Void),
        ],
        vec![],
        vec![fpcall("cs0", vec![TypeExpr::I32], false, Some("f"))],
    )
}

fn eval_all(facts: &ProgramFacts, policy: PolicyId) -> Vec<TargetSet> {
    let ev = Evaluator::new(facts, EngineOptions::default());
    facts
        .callsites
        .values()
        .map(|cs| ev.eval(policy, cs).unwrap())
        .collect()
}

#[test]
fn rtr_counts_indirect_reachers_per_return_site() {
    let facts = one_target_program();
    let sets = eval_all(&facts, PolicyId::SrcTypes);
    let summary = rtr(&facts, &sets);
    // Ordered by function id: f then g.
    assert_eq!(summary.distribution.values(), &[1, 0]);
    assert_eq!(summary.total, 1);
}

#[test]
fn rtr_adds_direct_calls_and_skips_noreturn_functions() {
    let mut facts = one_target_program();
    facts.functions.get_mut(&FunctionId::new("f")).unwrap().direct_call_count = 3;
    let g = facts.functions.get_mut(&FunctionId::new("g")).unwrap();
    g.has_return = false;

    let sets = eval_all(&facts, PolicyId::SrcTypes);
    let summary = rtr(&facts, &sets);
    // g has no return site, so only f contributes: 1 indirect + 3 direct.
    assert_eq!(summary.distribution.values(), &[4]);
    assert_eq!(summary.total, 4);
}

#[test]
fn fcga_counts_flagged_targets() {
    let facts = one_target_program();
    let sets = eval_all(&facts, PolicyId::BinTypes); // both f and g match
    assert_eq!(sets[0].size(), 2);

    let mut gadgets = GadgetAnnotations::default();
    gadgets.flags.insert(FunctionId::new("f"), flags(true, false));
    gadgets.flags.insert(FunctionId::new("g"), flags(false, false));
    assert_eq!(fcga(&sets, &gadgets), 1);
    assert_eq!(fcga(&sets, &GadgetAnnotations::default()), 0);
}

#[test]
fn bcga_needs_a_flagged_enclosing_function() {
    let mut facts = one_target_program();
    facts
        .callsites
        .get_mut(&CallsiteId::new("cs0"))
        .unwrap()
        .enclosing_function = Some(FunctionId::new("g"));
    let sets = eval_all(&facts, PolicyId::SrcTypes);

    let mut gadgets = GadgetAnnotations::default();
    gadgets.flags.insert(FunctionId::new("g"), flags(false, true));
    // The callsite sits in g (ret-flagged) and reaches one return site.
    assert_eq!(bcga(&facts, &sets, &gadgets), 1);

    // Without the flag, or without enclosing attribution, nothing counts.
    gadgets.flags.insert(FunctionId::new("g"), flags(false, false));
    assert_eq!(bcga(&facts, &sets, &gadgets), 0);
    let mut detached = facts.clone();
    detached
        .callsites
        .get_mut(&CallsiteId::new("cs0"))
        .unwrap()
        .enclosing_function = None;
    let sets = eval_all(&detached, PolicyId::SrcTypes);
    let mut gadgets = GadgetAnnotations::default();
    gadgets.flags.insert(FunctionId::new("g"), flags(false, true));
    assert_eq!(bcga(&detached, &sets, &gadgets), 0);
}
