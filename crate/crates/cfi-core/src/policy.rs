//! The eight CFI target-restriction policies.
//!
//! Each policy takes an indirect callsite and produces the set of
//! functions the callsite may legitimately reach once the policy is
//! enforced. Evaluations are pure: an [`Evaluator`] is built once per
//! facts snapshot, holds only immutable indices, and may be shared across
//! threads; distinct callsites can be evaluated concurrently.
//!
//! # The policies
//!
//! | # | Policy | Restricts with | Callsites |
//! |---|--------|----------------|-----------|
//! | 1 | Bin types | argument count (≤ 6) and void/non-void bit | all indirect |
//! | 2 | Safe src types | parameter types, pointers interchangeable | all indirect |
//! | 3 | Src types | exact parameter types | all indirect |
//! | 4 | Strict src types | exact parameter types + function name, virtual targets | virtual (any hinted callsite accepted) |
//! | 5 | All vTables | every function present in any vtable | virtual |
//! | 6 | vTable hierarchy | same slot index across the callsite's vtable island | virtual |
//! | 7 | Sub-hierarchy | slot index across all tables of the static class's derived closure | virtual |
//! | 8 | Strict sub-hierarchy | slot index across the dispatched table's derived closure | virtual |
//!
//! # Modeling a new policy
//!
//! Answer five questions, then wire the answers into an evaluation
//! routine next to the existing eight:
//!
//! 1. **Which primitives does the policy consume?** Function types,
//!    callsite types, vtable layouts and entries, the class hierarchy,
//!    the vtable hierarchy, or islands — all are prebuilt on
//!    [`Evaluator`].
//! 2. **Is there a nesting or subset relation between those
//!    primitives?** E.g. vtable islands partition tables; sub-hierarchies
//!    nest along derivation. Reuse the relation instead of recomputing it.
//! 3. **Does the policy rely on hierarchical metadata?** If yes, root the
//!    computation at the callsite's static class or dispatched table; if
//!    no, a whole-program candidate pool (as for the source-type
//!    policies) is enough.
//! 4. **What is the callsite/calltarget matching criterion?** Express it
//!    as a predicate over the prebuilt indices, or as a precomputed
//!    grouping key so equal callsites share one candidate set.
//! 5. **How is a match counted?** Targets are deduplicated functions:
//!    thunks resolve to their ultimate target and pure-virtual slots
//!    never count.
//!
//! Extend [`PolicyId`], derive the callsite's [`TargetKey`], and add a
//! mirror of the routine to the independent oracle so differential tests
//! keep covering the new policy.

use alloc::borrow::Cow;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::facts::{
    Callsite, CallsiteId, CallsiteKind, ClassId, FunctionId, ProgramFacts,
};
use crate::hierarchy::{
    build_class_hierarchy, build_vtable_hierarchy, ClassHierarchy, VTableHierarchy,
};
use crate::types::TypeExpr;

/// Enumeration of the eight supported policies, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyId {
    BinTypes,
    SafeSrcTypes,
    SrcTypes,
    StrictSrcTypes,
    AllVtables,
    VtableIsland,
    SubHierarchy,
    StrictSubHierarchy,
}

impl PolicyId {
    pub const ALL: [PolicyId; 8] = [
        PolicyId::BinTypes,
        PolicyId::SafeSrcTypes,
        PolicyId::SrcTypes,
        PolicyId::StrictSrcTypes,
        PolicyId::AllVtables,
        PolicyId::VtableIsland,
        PolicyId::SubHierarchy,
        PolicyId::StrictSubHierarchy,
    ];

    /// 1-based position used by the tabular reports.
    pub fn number(self) -> u8 {
        match self {
            PolicyId::BinTypes => 1,
            PolicyId::SafeSrcTypes => 2,
            PolicyId::SrcTypes => 3,
            PolicyId::StrictSrcTypes => 4,
            PolicyId::AllVtables => 5,
            PolicyId::VtableIsland => 6,
            PolicyId::SubHierarchy => 7,
            PolicyId::StrictSubHierarchy => 8,
        }
    }

    /// Human label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            PolicyId::BinTypes => "Bin types",
            PolicyId::SafeSrcTypes => "Safe src types",
            PolicyId::SrcTypes => "Src types",
            PolicyId::StrictSrcTypes => "Strict src types",
            PolicyId::AllVtables => "All vTables",
            PolicyId::VtableIsland => "vTable hierarchy",
            PolicyId::SubHierarchy => "Sub-hierarchy",
            PolicyId::StrictSubHierarchy => "Strict sub-hierarchy",
        }
    }

    /// Stable machine-readable name.
    pub fn slug(self) -> &'static str {
        match self {
            PolicyId::BinTypes => "bin-types",
            PolicyId::SafeSrcTypes => "safe-src-types",
            PolicyId::SrcTypes => "src-types",
            PolicyId::StrictSrcTypes => "strict-src-types",
            PolicyId::AllVtables => "all-vtables",
            PolicyId::VtableIsland => "vtable-hierarchy",
            PolicyId::SubHierarchy => "sub-hierarchy",
            PolicyId::StrictSubHierarchy => "strict-sub-hierarchy",
        }
    }

    /// Whether the policy is defined for function-pointer callsites as
    /// well as virtual dispatches. Policies (1)-(3) are; the rest are
    /// reported for virtual callsites only.
    pub fn applies_to_all_indirect(self) -> bool {
        matches!(
            self,
            PolicyId::BinTypes | PolicyId::SafeSrcTypes | PolicyId::SrcTypes
        )
    }

    /// Whether the evaluator rejects function-pointer callsites outright.
    /// Strict src types is reported for virtual callsites but accepts any
    /// callsite carrying a callee name hint.
    pub fn requires_virtual_dispatch(self) -> bool {
        matches!(
            self,
            PolicyId::AllVtables
                | PolicyId::VtableIsland
                | PolicyId::SubHierarchy
                | PolicyId::StrictSubHierarchy
        )
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl core::str::FromStr for PolicyId {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = match s {
            "1" | "bin-types" => PolicyId::BinTypes,
            "2" | "safe-src-types" => PolicyId::SafeSrcTypes,
            "3" | "src-types" => PolicyId::SrcTypes,
            "4" | "strict-src-types" => PolicyId::StrictSrcTypes,
            "5" | "all-vtables" => PolicyId::AllVtables,
            "6" | "vtable-hierarchy" | "vtable-island" => PolicyId::VtableIsland,
            "7" | "sub-hierarchy" => PolicyId::SubHierarchy,
            "8" | "strict-sub-hierarchy" => PolicyId::StrictSubHierarchy,
            _ => return Err(UnknownPolicy(String::from(s))),
        };
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPolicy(pub String);

impl fmt::Display for UnknownPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown policy '{}'", self.0)
    }
}

impl core::error::Error for UnknownPolicy {}

/// The per-callsite legitimate target set a policy produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSet {
    pub callsite: CallsiteId,
    pub policy: PolicyId,
    pub members: BTreeSet<FunctionId>,
}

impl TargetSet {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Direction of the argument-count comparison used by Bin types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinArityDirection {
    /// A target matches when it needs at most as many parameters as the
    /// callsite provides. Default.
    #[default]
    CalleeAtMostCallsite,
    /// Alternative reading: the callsite provides at most as many
    /// arguments as the target expects (target arity still capped at 6).
    CallsiteAtMostCallee,
}

/// What Bin types does with callsites providing more than six arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverSixArgs {
    /// Evaluate with the argument count capped at six. Default.
    #[default]
    Cap,
    /// Treat the callsite as matching nothing.
    Drop,
}

/// Switches for the deliberately ambiguous policy corners. Defaults model
/// the canonical behaviors; the alternatives are kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    pub bin_arity_direction: BinArityDirection,
    pub bin_over_six_args: OverSixArgs,
    /// When set, strict src types treats pointer parameters as
    /// interchangeable, like safe src types. Off by default: the policy
    /// distinguishes pointer types.
    pub strict_src_interchangeable_pointers: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyError {
    /// The callsite kind is outside the policy's applicability.
    NotApplicable { policy: PolicyId, callsite: CallsiteId },
    /// Strict src types needs a callee name hint.
    MissingNameHint { callsite: CallsiteId },
    /// Virtual-dispatch coordinates absent or unresolvable.
    MissingDispatchData { callsite: CallsiteId },
    /// The dynamic class is not the static class or one of its derived
    /// classes.
    NotDerived { callsite: CallsiteId, class: ClassId },
    /// The dynamic class has no table corresponding to the dispatched
    /// sub-object.
    NoCorrespondingTable { callsite: CallsiteId, class: ClassId },
    /// The dispatch slot does not exist in the resolved table.
    EntryOutOfRange { callsite: CallsiteId },
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::NotApplicable { policy, callsite } => {
                write!(f, "policy {policy} is not applicable to callsite {callsite}")
            }
            PolicyError::MissingNameHint { callsite } => {
                write!(f, "callsite {callsite} carries no callee name hint")
            }
            PolicyError::MissingDispatchData { callsite } => {
                write!(f, "callsite {callsite} has no usable dispatch coordinates")
            }
            PolicyError::NotDerived { callsite, class } => {
                write!(f, "{class} does not derive the static class of callsite {callsite}")
            }
            PolicyError::NoCorrespondingTable { callsite, class } => {
                write!(f, "{class} has no table for the sub-object dispatched at {callsite}")
            }
            PolicyError::EntryOutOfRange { callsite } => {
                write!(f, "dispatch slot out of range at callsite {callsite}")
            }
        }
    }
}

impl core::error::Error for PolicyError {}

/// Memoization key identifying a callsite's target set for one policy.
///
/// Callsites with equal keys have identical target sets, so callers that
/// evaluate many callsites can share the member lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetKey {
    Empty,
    /// The whole-program constant set of All vTables.
    Constant,
    BinBucket { cap: u8, returns_used: bool },
    SafeGroup(u32),
    SrcGroup(u32),
    StrictGroup(u32),
    IslandSlot { island: u32, slot: u32 },
    ClassSlot { class: u32, slot: u32 },
    TableSlot { table: u32, slot: u32 },
}

/// Immutable per-program evaluation state: interned functions, hierarchy
/// structures, signature groups and slot indices.
pub struct Evaluator<'f> {
    facts: &'f ProgramFacts,
    options: EngineOptions,
    class_hierarchy: ClassHierarchy,
    vtable_hierarchy: VTableHierarchy,

    fn_ids: Vec<&'f FunctionId>,
    fn_index: BTreeMap<&'f FunctionId, u32>,

    /// Resolved function slots per vtable-hierarchy node: `None` = pure.
    slots: Vec<Vec<Option<u32>>>,
    /// vtable-hierarchy nodes per class, ascending by table order.
    class_tables: BTreeMap<&'f ClassId, Vec<u32>>,
    /// (class, order) -> vtable-hierarchy node.
    table_by_coord: BTreeMap<(&'f ClassId, u32), u32>,

    /// Distinct functions reachable from any vtable slot.
    all_vtable_targets: Vec<u32>,

    safe_groups: Groups<Vec<TypeExpr>>,
    src_groups: Groups<Vec<TypeExpr>>,
    strict_groups: Groups<(String, Vec<TypeExpr>)>,
    /// `bin_sets[cap][returns_used]`, cap 0..=6.
    bin_sets: Vec<[Vec<u32>; 2]>,
    /// (island, slot) -> distinct functions at that slot in the island.
    island_slots: BTreeMap<(u32, u32), Vec<u32>>,
    /// Island of each class's tables.
    class_island: BTreeMap<&'f ClassId, u32>,
}

struct Groups<K: Ord> {
    lookup: BTreeMap<K, u32>,
    members: Vec<Vec<u32>>,
}

impl<K: Ord> Groups<K> {
    fn new() -> Self {
        Groups {
            lookup: BTreeMap::new(),
            members: Vec::new(),
        }
    }

    fn insert(&mut self, key: K, member: u32) {
        let idx = *self.lookup.entry(key).or_insert_with(|| {
            self.members.push(Vec::new());
            (self.members.len() - 1) as u32
        });
        self.members[idx as usize].push(member);
    }
}

/// Collapse a parameter list the way safe matching compares it: any
/// pointer becomes the same marker, everything else stays itself.
fn collapse_params(params: &[TypeExpr]) -> Vec<TypeExpr> {
    params
        .iter()
        .map(|t| {
            if t.is_ptr() {
                TypeExpr::Void.ptr()
            } else {
                t.clone()
            }
        })
        .collect()
}

impl<'f> Evaluator<'f> {
    pub fn new(facts: &'f ProgramFacts, options: EngineOptions) -> Self {
        let class_hierarchy = build_class_hierarchy(facts);
        let vtable_hierarchy = build_vtable_hierarchy(facts);

        let fn_ids: Vec<&FunctionId> = facts.functions.keys().collect();
        let fn_index: BTreeMap<&FunctionId, u32> = fn_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, i as u32))
            .collect();

        let table_count = vtable_hierarchy.node_count();
        let mut slots: Vec<Vec<Option<u32>>> = Vec::with_capacity(table_count);
        let mut class_tables: BTreeMap<&ClassId, Vec<u32>> = BTreeMap::new();
        let mut table_by_coord: BTreeMap<(&ClassId, u32), u32> = BTreeMap::new();
        let mut all_targets: BTreeSet<u32> = BTreeSet::new();
        for node in 0..table_count as u32 {
            let vt = &facts.vtables[vtable_hierarchy.id_of(node)];
            let mut resolved = Vec::with_capacity(vt.entries.len());
            for entry in vt.function_slots() {
                let target = entry
                    .function_id
                    .as_ref()
                    .and_then(|fid| fn_index.get(fid).copied())
                    .filter(|_| entry.kind != crate::facts::EntryKind::Pure);
                if let Some(t) = target {
                    all_targets.insert(t);
                }
                resolved.push(target);
            }
            slots.push(resolved);
            class_tables.entry(&vt.owning_class).or_default().push(node);
            table_by_coord.insert((&vt.owning_class, vt.order), node);
        }
        for tables in class_tables.values_mut() {
            tables.sort_by_key(|&n| facts.vtables[vtable_hierarchy.id_of(n)].order);
        }

        let in_vtable = all_targets;
        let all_vtable_targets: Vec<u32> = in_vtable.iter().copied().collect();

        // Signature groups over non-variadic, non-pure functions.
        let mut safe_groups = Groups::new();
        let mut src_groups = Groups::new();
        let mut strict_groups = Groups::new();
        for (idx, id) in fn_ids.iter().enumerate() {
            let f = &facts.functions[*id];
            if f.is_pure_virtual || f.is_variadic {
                continue;
            }
            let idx = idx as u32;
            safe_groups.insert(collapse_params(&f.params), idx);
            src_groups.insert(f.params.clone(), idx);
            if f.is_virtual && in_vtable.contains(&idx) {
                let params = if options.strict_src_interchangeable_pointers {
                    collapse_params(&f.params)
                } else {
                    f.params.clone()
                };
                strict_groups.insert((f.name.clone(), params), idx);
            }
        }

        // Bin-type buckets for the configured arity direction.
        let mut bin_sets: Vec<[Vec<u32>; 2]> = (0..=6).map(|_| [Vec::new(), Vec::new()]).collect();
        for (idx, id) in fn_ids.iter().enumerate() {
            let f = &facts.functions[*id];
            if f.is_pure_virtual {
                continue;
            }
            let arity = f.fixed_arity();
            let void_ret = f.return_type.is_void();
            for (cap, bucket) in bin_sets.iter_mut().enumerate() {
                let admitted = match options.bin_arity_direction {
                    BinArityDirection::CalleeAtMostCallsite => arity <= cap,
                    BinArityDirection::CallsiteAtMostCallee => cap <= arity && arity <= 6,
                };
                if admitted {
                    bucket[0].push(idx as u32);
                    if !void_ret {
                        bucket[1].push(idx as u32);
                    }
                }
            }
        }

        // Distinct functions per (island, slot).
        let mut island_sets: BTreeMap<(u32, u32), BTreeSet<u32>> = BTreeMap::new();
        for node in 0..table_count as u32 {
            let island = vtable_hierarchy.island_of_node(node);
            for (slot, target) in slots[node as usize].iter().enumerate() {
                if let Some(t) = target {
                    island_sets.entry((island, slot as u32)).or_default().insert(*t);
                }
            }
        }
        let island_slots = island_sets
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();

        let class_island: BTreeMap<&ClassId, u32> = class_tables
            .iter()
            .filter_map(|(class, tables)| {
                tables.first().map(|&n| (*class, vtable_hierarchy.island_of_node(n)))
            })
            .collect();

        Evaluator {
            facts,
            options,
            class_hierarchy,
            vtable_hierarchy,
            fn_ids,
            fn_index,
            slots,
            class_tables,
            table_by_coord,
            all_vtable_targets,
            safe_groups,
            src_groups,
            strict_groups,
            bin_sets,
            island_slots,
            class_island,
        }
    }

    pub fn facts(&self) -> &'f ProgramFacts {
        self.facts
    }

    pub fn options(&self) -> EngineOptions {
        self.options
    }

    pub fn class_hierarchy(&self) -> &ClassHierarchy {
        &self.class_hierarchy
    }

    pub fn vtable_hierarchy(&self) -> &VTableHierarchy {
        &self.vtable_hierarchy
    }

    pub fn function_count(&self) -> usize {
        self.fn_ids.len()
    }

    pub fn function_id(&self, node: u32) -> &'f FunctionId {
        self.fn_ids[node as usize]
    }

    pub fn function_index(&self, id: &FunctionId) -> Option<u32> {
        self.fn_index.get(id).copied()
    }

    /// Derive the memoization key for `(policy, callsite)`. Equal keys
    /// guarantee equal member sets.
    pub fn target_key(&self, policy: PolicyId, cs: &Callsite) -> Result<TargetKey, PolicyError> {
        if policy.requires_virtual_dispatch() && cs.kind != CallsiteKind::VirtualDispatch {
            return Err(PolicyError::NotApplicable {
                policy,
                callsite: cs.id.clone(),
            });
        }
        match policy {
            PolicyId::BinTypes => {
                let provided = cs.args.len();
                let cap = if provided > 6 {
                    match self.options.bin_over_six_args {
                        OverSixArgs::Cap => 6,
                        OverSixArgs::Drop => return Ok(TargetKey::Empty),
                    }
                } else {
                    provided
                };
                Ok(TargetKey::BinBucket {
                    cap: cap as u8,
                    returns_used: cs.returns_used,
                })
            }
            PolicyId::SafeSrcTypes => Ok(self
                .safe_groups
                .lookup
                .get(&collapse_params(&cs.args))
                .map(|&g| TargetKey::SafeGroup(g))
                .unwrap_or(TargetKey::Empty)),
            PolicyId::SrcTypes => Ok(self
                .src_groups
                .lookup
                .get(&cs.args)
                .map(|&g| TargetKey::SrcGroup(g))
                .unwrap_or(TargetKey::Empty)),
            PolicyId::StrictSrcTypes => {
                let name = cs.callee_name_hint.as_ref().ok_or(PolicyError::MissingNameHint {
                    callsite: cs.id.clone(),
                })?;
                let params = if self.options.strict_src_interchangeable_pointers {
                    collapse_params(&cs.args)
                } else {
                    cs.args.clone()
                };
                Ok(self
                    .strict_groups
                    .lookup
                    .get(&(name.clone(), params))
                    .map(|&g| TargetKey::StrictGroup(g))
                    .unwrap_or(TargetKey::Empty))
            }
            PolicyId::AllVtables => Ok(TargetKey::Constant),
            PolicyId::VtableIsland => {
                let (class, _, slot) = self.dispatch_coords(cs)?;
                let island = self
                    .class_island
                    .get(class)
                    .copied()
                    .ok_or(PolicyError::MissingDispatchData {
                        callsite: cs.id.clone(),
                    })?;
                Ok(TargetKey::IslandSlot { island, slot })
            }
            PolicyId::SubHierarchy => {
                let (class, _, slot) = self.dispatch_coords(cs)?;
                let node = self.class_hierarchy.node_index(class).ok_or(
                    PolicyError::MissingDispatchData {
                        callsite: cs.id.clone(),
                    },
                )?;
                Ok(TargetKey::ClassSlot { class: node, slot })
            }
            PolicyId::StrictSubHierarchy => {
                let (class, order, slot) = self.dispatch_coords(cs)?;
                let table = self.table_by_coord.get(&(class, order)).copied().ok_or(
                    PolicyError::MissingDispatchData {
                        callsite: cs.id.clone(),
                    },
                )?;
                Ok(TargetKey::TableSlot { table, slot })
            }
        }
    }

    fn dispatch_coords(&self, cs: &Callsite) -> Result<(&'f ClassId, u32, u32), PolicyError> {
        match (&cs.static_class, cs.table_order, cs.entry_index) {
            (Some(class), Some(order), Some(index)) => {
                // Borrow the id owned by the facts, not by the callsite.
                let class = self
                    .facts
                    .classes
                    .get(class)
                    .map(|c| &c.id)
                    .ok_or(PolicyError::MissingDispatchData {
                        callsite: cs.id.clone(),
                    })?;
                Ok((class, order, index))
            }
            _ => Err(PolicyError::MissingDispatchData {
                callsite: cs.id.clone(),
            }),
        }
    }

    /// Member function nodes for a key, sorted ascending. Borrows the
    /// precomputed set when one exists.
    pub fn members_for_key(&self, key: TargetKey) -> Cow<'_, [u32]> {
        match key {
            TargetKey::Empty => Cow::Borrowed(&[]),
            TargetKey::Constant => Cow::Borrowed(self.all_vtable_targets.as_slice()),
            TargetKey::BinBucket { cap, returns_used } => {
                Cow::Borrowed(self.bin_sets[cap as usize][returns_used as usize].as_slice())
            }
            TargetKey::SafeGroup(g) => Cow::Borrowed(self.safe_groups.members[g as usize].as_slice()),
            TargetKey::SrcGroup(g) => Cow::Borrowed(self.src_groups.members[g as usize].as_slice()),
            TargetKey::StrictGroup(g) => {
                Cow::Borrowed(self.strict_groups.members[g as usize].as_slice())
            }
            TargetKey::IslandSlot { island, slot } => self
                .island_slots
                .get(&(island, slot))
                .map(|v| Cow::Borrowed(v.as_slice()))
                .unwrap_or(Cow::Borrowed(&[])),
            TargetKey::ClassSlot { class, slot } => {
                let mut members = BTreeSet::new();
                for &c in self.class_hierarchy.descendant_nodes(class) {
                    let class_id = self.class_hierarchy.id_of(c);
                    if let Some(tables) = self.class_tables.get(class_id) {
                        for &t in tables {
                            if let Some(Some(target)) = self.slots[t as usize].get(slot as usize) {
                                members.insert(*target);
                            }
                        }
                    }
                }
                Cow::Owned(members.into_iter().collect())
            }
            TargetKey::TableSlot { table, slot } => {
                let mut members = BTreeSet::new();
                let mut stack = alloc::vec![table];
                let mut seen: BTreeSet<u32> = BTreeSet::new();
                seen.insert(table);
                while let Some(t) = stack.pop() {
                    if let Some(Some(target)) = self.slots[t as usize].get(slot as usize) {
                        members.insert(*target);
                    }
                    for &k in self.vtable_hierarchy.children_of_node(t) {
                        if seen.insert(k) {
                            stack.push(k);
                        }
                    }
                }
                Cow::Owned(members.into_iter().collect())
            }
        }
    }

    /// Evaluate `policy` on `cs`, returning member function nodes.
    pub fn eval_members(&self, policy: PolicyId, cs: &Callsite) -> Result<Cow<'_, [u32]>, PolicyError> {
        Ok(self.members_for_key(self.target_key(policy, cs)?))
    }

    /// Evaluate `policy` on `cs`, materializing the target set.
    pub fn eval(&self, policy: PolicyId, cs: &Callsite) -> Result<TargetSet, PolicyError> {
        let members = self
            .eval_members(policy, cs)?
            .iter()
            .map(|&n| self.fn_ids[n as usize].clone())
            .collect();
        Ok(TargetSet {
            callsite: cs.id.clone(),
            policy,
            members,
        })
    }

    /// The function a benign C++-style dispatch would invoke for `cs`
    /// when the receiver's dynamic type is `dynamic_class`: resolve the
    /// dispatch slot in the dynamic class's table for the dispatched
    /// sub-object. `Ok(None)` when that slot is pure.
    pub fn benign_dispatch_target(
        &self,
        cs: &Callsite,
        dynamic_class: &ClassId,
    ) -> Result<Option<&'f FunctionId>, PolicyError> {
        if cs.kind != CallsiteKind::VirtualDispatch {
            return Err(PolicyError::NotApplicable {
                policy: PolicyId::SubHierarchy,
                callsite: cs.id.clone(),
            });
        }
        let (static_class, order, slot) = self.dispatch_coords(cs)?;
        if !self.class_hierarchy.derives(static_class, dynamic_class) {
            return Err(PolicyError::NotDerived {
                callsite: cs.id.clone(),
                class: dynamic_class.clone(),
            });
        }
        let static_table =
            self.table_by_coord
                .get(&(static_class, order))
                .copied()
                .ok_or(PolicyError::MissingDispatchData {
                    callsite: cs.id.clone(),
                })?;
        let static_path = &self.facts.vtables[self.vtable_hierarchy.id_of(static_table)].base_path;

        // The dynamic class's table for the dispatched sub-object is the
        // one whose base path ends with the static table's base path. A
        // repeated (non-virtual) diamond can yield several; dispatch
        // through the lowest-ordered one.
        let table = self
            .class_tables
            .get(dynamic_class)
            .into_iter()
            .flatten()
            .copied()
            .find(|&t| {
                let path = &self.facts.vtables[self.vtable_hierarchy.id_of(t)].base_path;
                path.len() >= static_path.len() && path[path.len() - static_path.len()..] == static_path[..]
            })
            .ok_or(PolicyError::NoCorrespondingTable {
                callsite: cs.id.clone(),
                class: dynamic_class.clone(),
            })?;

        match self.slots[table as usize].get(slot as usize) {
            None => Err(PolicyError::EntryOutOfRange {
                callsite: cs.id.clone(),
            }),
            Some(None) => Ok(None),
            Some(Some(target)) => Ok(Some(self.fn_ids[*target as usize])),
        }
    }
}
