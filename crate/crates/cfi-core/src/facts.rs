//! The immutable whole-program facts snapshot.
//!
//! A `ProgramFacts` value is built once (by a parser or generator), checked
//! by [`crate::validate::validate_facts`], and then only read. All
//! collections are keyed and iterated in ascending id order, which keeps
//! every downstream computation deterministic.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::types::TypeExpr;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self::new(s)
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Identifier of a class record.
    ClassId
);
id_type!(
    /// Identifier of a function record.
    FunctionId
);
id_type!(
    /// Identifier of a virtual table record.
    VTableId
);
id_type!(
    /// Identifier of an indirect callsite record.
    CallsiteId
);

/// Source position a record was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceLoc {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A direct base of a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseRef {
    pub class: ClassId,
    /// C++ `virtual` inheritance. Accepted in the model but carries the
    /// same edge semantics as an ordinary base; construction tables are
    /// not modeled.
    pub is_virtual_base: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRecord {
    pub id: ClassId,
    pub name: String,
    /// Direct bases in declaration order.
    pub bases: Vec<BaseRef>,
    /// True iff the class defines or inherits at least one virtual
    /// function. The validator recomputes this from the hierarchy.
    pub is_virtual_class: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionRecord {
    pub id: FunctionId,
    /// Unqualified literal name, with no class qualification attached.
    pub name: String,
    pub owning_class: Option<ClassId>,
    /// Fixed parameters; a trailing variadic marker is `is_variadic`.
    pub params: Vec<TypeExpr>,
    pub is_variadic: bool,
    pub return_type: TypeExpr,
    pub is_virtual: bool,
    pub is_pure_virtual: bool,
    pub source_loc: SourceLoc,
    /// Count of direct (non-indirect) callsites targeting this function,
    /// when the producer recorded them. Feeds return-target metrics only.
    pub direct_call_count: u64,
    /// False for functions known never to return. Defaults to true.
    pub has_return: bool,
}

impl FunctionRecord {
    /// Number of fixed parameters, ignoring any variadic tail.
    pub fn fixed_arity(&self) -> usize {
        self.params.len()
    }
}

/// Kind of a virtual table slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// Plain virtual function pointer.
    Function,
    /// Adjusting thunk; `function_id` is the ultimate target.
    Thunk,
    /// Non-call data (offset-to-top and friends). Excluded from the
    /// function-slot index space.
    Offset,
    /// Pure-virtual marker slot. Never a legitimate target.
    Pure,
}

impl EntryKind {
    /// Whether the entry occupies a function slot (participates in the
    /// dense `entry_index` sequence used by dispatch).
    pub fn is_function_slot(self) -> bool {
        !matches!(self, EntryKind::Offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VTableEntry {
    pub kind: EntryKind,
    /// Present exactly for `Function` and `Thunk` entries.
    pub function_id: Option<FunctionId>,
    /// Dense 0-based position among function slots; absent for `Offset`.
    pub entry_index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VTableRecord {
    pub id: VTableId,
    pub owning_class: ClassId,
    /// 0 = primary table, k > 0 = k-th secondary table.
    pub order: u32,
    /// Class chain from the owning class toward the base sub-object this
    /// table corresponds to; first element is the owning class.
    pub base_path: Vec<ClassId>,
    pub entries: Vec<VTableEntry>,
}

impl VTableRecord {
    /// Entries occupying function slots, in slot order.
    pub fn function_slots(&self) -> impl Iterator<Item = &VTableEntry> {
        self.entries.iter().filter(|e| e.kind.is_function_slot())
    }

    /// Number of function slots.
    pub fn function_slot_count(&self) -> usize {
        self.function_slots().count()
    }
}

/// Kind of indirect control transfer a callsite performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallsiteKind {
    VirtualDispatch,
    FunctionPointer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Callsite {
    pub id: CallsiteId,
    pub kind: CallsiteKind,
    pub source_loc: SourceLoc,
    /// Argument types provided at the call.
    pub args: Vec<TypeExpr>,
    /// True iff the call result is consumed.
    pub returns_used: bool,
    /// Unqualified name of the statically named callee, when known.
    /// Required by the strict source-type policy.
    pub callee_name_hint: Option<String>,
    /// Static class of the dispatched object. Virtual dispatch only.
    pub static_class: Option<ClassId>,
    /// Which sub-object table the dispatch goes through. Virtual only.
    pub table_order: Option<u32>,
    /// Function-slot index used by the dispatch. Virtual only.
    pub entry_index: Option<u32>,
    /// Function lexically containing this callsite, when recorded.
    /// Feeds backward gadget attribution only.
    pub enclosing_function: Option<FunctionId>,
}

/// Immutable whole-program snapshot.
///
/// Collections are `BTreeMap`s so that iteration is ascending by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProgramFacts {
    pub format_version: u32,
    pub classes: BTreeMap<ClassId, ClassRecord>,
    pub functions: BTreeMap<FunctionId, FunctionRecord>,
    pub vtables: BTreeMap<VTableId, VTableRecord>,
    pub callsites: BTreeMap<CallsiteId, Callsite>,
}

impl ProgramFacts {
    pub fn class(&self, id: &ClassId) -> Option<&ClassRecord> {
        self.classes.get(id)
    }

    pub fn function(&self, id: &FunctionId) -> Option<&FunctionRecord> {
        self.functions.get(id)
    }

    pub fn vtable(&self, id: &VTableId) -> Option<&VTableRecord> {
        self.vtables.get(id)
    }

    pub fn callsite(&self, id: &CallsiteId) -> Option<&Callsite> {
        self.callsites.get(id)
    }

    /// Tables of `class`, ascending by `order`.
    pub fn vtable_set(&self, class: &ClassId) -> Vec<&VTableRecord> {
        let mut tables: Vec<&VTableRecord> = self
            .vtables
            .values()
            .filter(|t| &t.owning_class == class)
            .collect();
        tables.sort_by_key(|t| t.order);
        tables
    }

    /// Callsites of `kind`, ascending by id.
    pub fn callsites_of_kind(&self, kind: CallsiteKind) -> impl Iterator<Item = &Callsite> {
        self.callsites.values().filter(move |c| c.kind == kind)
    }
}

/// Per-function gadget flags supplied by an external gadget inventory.
///
/// Functions absent from the map count as having no gadgets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GadgetAnnotations {
    pub flags: BTreeMap<FunctionId, GadgetFlags>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GadgetFlags {
    pub has_forward_gadget: bool,
    pub has_return_gadget: bool,
}

impl GadgetAnnotations {
    pub fn get(&self, id: &FunctionId) -> GadgetFlags {
        self.flags.get(id).copied().unwrap_or_default()
    }
}
