//! Brute-force reference evaluation for differential testing.
//!
//! [`oracle_targets`] has the same contract as [`crate::policy::Evaluator`]
//! but is computed by naive full enumeration over the raw facts on every
//! call: no prebuilt hierarchies, no signature groups, no slot caches, and
//! no code shared with the evaluator. It is asymptotically slower and
//! exists purely so the two routes can be checked against each other.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::facts::{
    Callsite, CallsiteKind, ClassId, EntryKind, FunctionId, ProgramFacts, VTableRecord,
};
use crate::policy::{
    BinArityDirection, EngineOptions, OverSixArgs, PolicyError, PolicyId, TargetSet,
};
use crate::types::TypeExpr;

/// Evaluate `policy` on `cs` by exhaustive enumeration.
pub fn oracle_targets(
    facts: &ProgramFacts,
    options: EngineOptions,
    policy: PolicyId,
    cs: &Callsite,
) -> Result<TargetSet, PolicyError> {
    if policy.requires_virtual_dispatch() && cs.kind != CallsiteKind::VirtualDispatch {
        return Err(PolicyError::NotApplicable {
            policy,
            callsite: cs.id.clone(),
        });
    }
    let members = match policy {
        PolicyId::BinTypes => bin_types(facts, options, cs),
        PolicyId::SafeSrcTypes => src_like(facts, cs, pointer_blind_eq),
        PolicyId::SrcTypes => src_like(facts, cs, structural_eq),
        PolicyId::StrictSrcTypes => strict_src(facts, options, cs)?,
        PolicyId::AllVtables => all_vtables(facts),
        PolicyId::VtableIsland => island(facts, cs)?,
        PolicyId::SubHierarchy => sub_hierarchy(facts, cs)?,
        PolicyId::StrictSubHierarchy => strict_sub_hierarchy(facts, cs)?,
    };
    Ok(TargetSet {
        callsite: cs.id.clone(),
        policy,
        members,
    })
}

// Structural type equality, written out so the oracle does not lean on
// the model's derived PartialEq.
fn structural_eq(a: &TypeExpr, b: &TypeExpr) -> bool {
    match (a, b) {
        (TypeExpr::Ptr(x), TypeExpr::Ptr(y)) => structural_eq(x, y),
        (TypeExpr::Named(x), TypeExpr::Named(y)) => x == y,
        (TypeExpr::Void, TypeExpr::Void)
        | (TypeExpr::Bool, TypeExpr::Bool)
        | (TypeExpr::Char, TypeExpr::Char)
        | (TypeExpr::I8, TypeExpr::I8)
        | (TypeExpr::I16, TypeExpr::I16)
        | (TypeExpr::I32, TypeExpr::I32)
        | (TypeExpr::I64, TypeExpr::I64)
        | (TypeExpr::U8, TypeExpr::U8)
        | (TypeExpr::U16, TypeExpr::U16)
        | (TypeExpr::U32, TypeExpr::U32)
        | (TypeExpr::U64, TypeExpr::U64)
        | (TypeExpr::F32, TypeExpr::F32)
        | (TypeExpr::F64, TypeExpr::F64) => true,
        _ => false,
    }
}

fn pointer_blind_eq(a: &TypeExpr, b: &TypeExpr) -> bool {
    match (a, b) {
        (TypeExpr::Ptr(_), TypeExpr::Ptr(_)) => true,
        _ => structural_eq(a, b),
    }
}

fn params_eq(a: &[TypeExpr], b: &[TypeExpr], eq: fn(&TypeExpr, &TypeExpr) -> bool) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| eq(x, y))
}

fn bin_types(facts: &ProgramFacts, options: EngineOptions, cs: &Callsite) -> BTreeSet<FunctionId> {
    let mut out = BTreeSet::new();
    let provided = cs.args.len();
    let cap = if provided > 6 {
        match options.bin_over_six_args {
            OverSixArgs::Cap => 6,
            OverSixArgs::Drop => return out,
        }
    } else {
        provided
    };
    for f in facts.functions.values() {
        if f.is_pure_virtual {
            continue;
        }
        let arity = f.params.len();
        let admitted = match options.bin_arity_direction {
            BinArityDirection::CalleeAtMostCallsite => arity <= cap,
            BinArityDirection::CallsiteAtMostCallee => cap <= arity && arity <= 6,
        };
        if !admitted {
            continue;
        }
        if cs.returns_used && matches!(f.return_type, TypeExpr::Void) {
            continue;
        }
        out.insert(f.id.clone());
    }
    out
}

fn src_like(
    facts: &ProgramFacts,
    cs: &Callsite,
    eq: fn(&TypeExpr, &TypeExpr) -> bool,
) -> BTreeSet<FunctionId> {
    facts
        .functions
        .values()
        .filter(|f| !f.is_pure_virtual && !f.is_variadic && params_eq(&cs.args, &f.params, eq))
        .map(|f| f.id.clone())
        .collect()
}

fn strict_src(
    facts: &ProgramFacts,
    options: EngineOptions,
    cs: &Callsite,
) -> Result<BTreeSet<FunctionId>, PolicyError> {
    let name = cs
        .callee_name_hint
        .as_ref()
        .ok_or(PolicyError::MissingNameHint {
            callsite: cs.id.clone(),
        })?;
    let in_tables = vtable_function_pool(facts);
    let eq: fn(&TypeExpr, &TypeExpr) -> bool = if options.strict_src_interchangeable_pointers {
        pointer_blind_eq
    } else {
        structural_eq
    };
    Ok(facts
        .functions
        .values()
        .filter(|f| {
            f.is_virtual
                && !f.is_pure_virtual
                && !f.is_variadic
                && in_tables.contains(&f.id)
                && &f.name == name
                && params_eq(&cs.args, &f.params, eq)
        })
        .map(|f| f.id.clone())
        .collect())
}

fn virtual_class_tables(facts: &ProgramFacts) -> Vec<&VTableRecord> {
    facts
        .vtables
        .values()
        .filter(|vt| {
            facts
                .classes
                .get(&vt.owning_class)
                .map(|c| c.is_virtual_class)
                .unwrap_or(false)
        })
        .collect()
}

/// Every function some vtable entry points at (thunks resolved, pure
/// slots skipped).
fn vtable_function_pool(facts: &ProgramFacts) -> BTreeSet<FunctionId> {
    let mut pool = BTreeSet::new();
    for vt in virtual_class_tables(facts) {
        for entry in &vt.entries {
            if matches!(entry.kind, EntryKind::Function | EntryKind::Thunk) {
                if let Some(fid) = &entry.function_id {
                    pool.insert(fid.clone());
                }
            }
        }
    }
    pool
}

fn all_vtables(facts: &ProgramFacts) -> BTreeSet<FunctionId> {
    vtable_function_pool(facts)
}

/// Function at the `index`-th function slot of `vt`, if the table is that
/// long and the slot is not pure.
fn slot_at(vt: &VTableRecord, index: u32) -> Option<Option<&FunctionId>> {
    let mut pos = 0u32;
    for entry in &vt.entries {
        if matches!(entry.kind, EntryKind::Offset) {
            continue;
        }
        if pos == index {
            return Some(match entry.kind {
                EntryKind::Pure => None,
                _ => entry.function_id.as_ref(),
            });
        }
        pos += 1;
    }
    None
}

fn dispatch_coords(cs: &Callsite) -> Result<(&ClassId, u32, u32), PolicyError> {
    match (&cs.static_class, cs.table_order, cs.entry_index) {
        (Some(c), Some(o), Some(i)) => Ok((c, o, i)),
        _ => Err(PolicyError::MissingDispatchData {
            callsite: cs.id.clone(),
        }),
    }
}

/// Island membership by breadth-first search from the static class's
/// tables: tables are adjacent when they share a class or when one's
/// base path is a suffix of the other's.
fn island(facts: &ProgramFacts, cs: &Callsite) -> Result<BTreeSet<FunctionId>, PolicyError> {
    let (static_class, _, index) = dispatch_coords(cs)?;
    let tables = virtual_class_tables(facts);
    let n = tables.len();

    let seed = tables
        .iter()
        .position(|vt| &vt.owning_class == static_class)
        .ok_or(PolicyError::MissingDispatchData {
            callsite: cs.id.clone(),
        })?;

    let mut visited = alloc::vec![false; n];
    visited[seed] = true;
    let mut queue = alloc::vec![seed];
    while let Some(v) = queue.pop() {
        let tv = tables[v];
        for (u, tu) in tables.iter().enumerate() {
            if visited[u] {
                continue;
            }
            let linked = tv.owning_class == tu.owning_class
                || is_suffix(&tv.base_path, &tu.base_path)
                || is_suffix(&tu.base_path, &tv.base_path);
            if linked {
                visited[u] = true;
                queue.push(u);
            }
        }
    }

    let mut out = BTreeSet::new();
    for (v, vt) in tables.iter().enumerate() {
        if !visited[v] {
            continue;
        }
        if let Some(Some(fid)) = slot_at(vt, index) {
            out.insert(fid.clone());
        }
    }
    Ok(out)
}

fn is_suffix(shorter: &[ClassId], longer: &[ClassId]) -> bool {
    shorter.len() <= longer.len() && longer[longer.len() - shorter.len()..] == shorter[..]
}

fn sub_hierarchy(facts: &ProgramFacts, cs: &Callsite) -> Result<BTreeSet<FunctionId>, PolicyError> {
    let (static_class, _, index) = dispatch_coords(cs)?;
    if !facts.classes.contains_key(static_class) {
        return Err(PolicyError::MissingDispatchData {
            callsite: cs.id.clone(),
        });
    }

    // Derived closure by repeated scans of the base lists.
    let mut closure: BTreeSet<&ClassId> = BTreeSet::new();
    closure.insert(static_class);
    let mut grew = true;
    while grew {
        grew = false;
        for class in facts.classes.values() {
            if closure.contains(&class.id) {
                continue;
            }
            if class.bases.iter().any(|b| closure.contains(&b.class)) {
                closure.insert(&class.id);
                grew = true;
            }
        }
    }

    let mut out = BTreeSet::new();
    for vt in virtual_class_tables(facts) {
        if !closure.contains(&vt.owning_class) {
            continue;
        }
        if let Some(Some(fid)) = slot_at(vt, index) {
            out.insert(fid.clone());
        }
    }
    Ok(out)
}

fn strict_sub_hierarchy(
    facts: &ProgramFacts,
    cs: &Callsite,
) -> Result<BTreeSet<FunctionId>, PolicyError> {
    let (static_class, order, index) = dispatch_coords(cs)?;
    let root = facts
        .vtables
        .values()
        .find(|vt| &vt.owning_class == static_class && vt.order == order)
        .ok_or(PolicyError::MissingDispatchData {
            callsite: cs.id.clone(),
        })?;

    let mut out = BTreeSet::new();
    for vt in virtual_class_tables(facts) {
        if !is_suffix(&root.base_path, &vt.base_path) {
            continue;
        }
        if let Some(Some(fid)) = slot_at(vt, index) {
            out.insert(fid.clone());
        }
    }
    Ok(out)
}
