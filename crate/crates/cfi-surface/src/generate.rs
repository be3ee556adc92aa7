//! Deterministic synthetic corpus generation.
//!
//! Builds a whole-program facts snapshot from a seeded configuration:
//! classes with single and multiple inheritance, Itanium-style vtable
//! groups (primary table per class, one secondary table per additional
//! direct base with virtual functions, overrides replacing inherited
//! slots, new virtuals appending, thunks in secondary tables, an offset
//! slot at the head of each secondary table), free functions, and both
//! dispatch and function-pointer callsites.
//!
//! The same configuration always yields byte-identical facts. The exact
//! corpus produced for a seed is an artifact of this implementation, not
//! a cross-tool contract.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use cfi_core::facts::*;
use cfi_core::types::TypeExpr;

/// Weights of the type-expression categories used when sampling
/// parameter and return types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeWeights {
    pub primitive: u32,
    pub pointer: u32,
    pub named: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_classes: u32,
    pub n_free_functions: u32,
    pub n_callsites: u32,
    /// Upper bound on direct bases per class. At least 1.
    pub max_bases: u32,
    /// Probability a derived class overrides an inherited slot.
    pub p_override: f64,
    /// Probability a callsite is a virtual dispatch.
    pub p_virtual_callsite: f64,
    /// Maximum fixed parameters per function, at most 8.
    pub max_params: u32,
    /// Weight of each arity `0..=max_params`.
    pub arity_weights: Vec<u32>,
    pub type_weights: TypeWeights,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            n_classes: 10,
            n_free_functions: 20,
            n_callsites: 40,
            max_bases: 2,
            p_override: 0.5,
            p_virtual_callsite: 0.6,
            max_params: 8,
            arity_weights: vec![18, 25, 20, 15, 10, 6, 3, 2, 1],
            type_weights: TypeWeights {
                primitive: 6,
                pointer: 3,
                named: 2,
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.p_override) {
            return bad("p_override must be within [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_virtual_callsite) {
            return bad("p_virtual_callsite must be within [0, 1]");
        }
        if self.max_bases < 1 {
            return bad("max_bases must be at least 1");
        }
        if self.max_params > 8 {
            return bad("max_params must be at most 8");
        }
        if self.arity_weights.len() != self.max_params as usize + 1 {
            return bad("arity_weights must have max_params + 1 entries");
        }
        if self.arity_weights.iter().sum::<u32>() == 0 {
            return bad("arity_weights must not all be zero");
        }
        let tw = self.type_weights;
        if tw.primitive + tw.pointer + tw.named == 0 {
            return bad("type_weights must not all be zero");
        }
        Ok(())
    }
}

const PRIMITIVES: [TypeExpr; 12] = [
    TypeExpr::Bool,
    TypeExpr::Char,
    TypeExpr::I8,
    TypeExpr::I16,
    TypeExpr::I32,
    TypeExpr::I64,
    TypeExpr::U8,
    TypeExpr::U16,
    TypeExpr::U32,
    TypeExpr::U64,
    TypeExpr::F32,
    TypeExpr::F64,
];

const METHOD_NAMES: [&str; 12] = [
    "run", "step", "get", "set", "size", "reset", "emit", "close", "read", "write", "flush",
    "init",
];

const EXTRA_TYPE_NAMES: [&str; 4] = ["Str", "Buf", "Ctx", "Obj"];

/// One virtual-function slot as laid out in some table. `binding` is the
/// function currently bound at the owning class.
#[derive(Clone)]
struct Slot {
    info: usize,
    binding: usize,
}

/// Identity of a slot declaration, shared by every table that carries it.
struct SlotInfo {
    name: String,
    params: Vec<TypeExpr>,
    ret: TypeExpr,
    introduced_by: usize,
    overridden: bool,
}

struct FnPlan {
    name: String,
    params: Vec<TypeExpr>,
    ret: TypeExpr,
    owner: Option<usize>,
    is_virtual: bool,
    pure: bool,
    variadic: bool,
    direct_calls: u64,
}

struct ClassPlan {
    bases: Vec<usize>,
    vbase_flags: Vec<bool>,
    /// Class chain of the primary table, starting at this class.
    primary_path: Vec<usize>,
    primary: Vec<Slot>,
    /// One per additional direct base: (base, path, layout).
    secondaries: Vec<(usize, Vec<usize>, Vec<Slot>)>,
}

struct Gen<'c> {
    cfg: &'c GeneratorConfig,
    rng: ChaCha8Rng,
    named_pool: Vec<String>,
    slot_infos: Vec<SlotInfo>,
    functions: Vec<FnPlan>,
    classes: Vec<ClassPlan>,
    /// (class, slot info) -> override function, so a repeated diamond
    /// reuses one override across the class's tables.
    override_memo: BTreeMap<(usize, usize), usize>,
}

/// Generate a validated facts snapshot. Pure function of the config.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<ProgramFacts, GeneratorError> {
    cfg.validate()?;
    if cfg.n_callsites > 0 && cfg.n_classes == 0 && cfg.n_free_functions == 0 {
        return Err(GeneratorError::Infeasible(
            "callsites requested but the program has no functions".to_string(),
        ));
    }

    let named_pool: Vec<String> = (0..cfg.n_classes.min(8))
        .map(|i| format!("Cls{i}"))
        .chain(EXTRA_TYPE_NAMES.iter().map(|s| s.to_string()))
        .collect();

    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        named_pool,
        slot_infos: Vec::new(),
        functions: Vec::new(),
        classes: Vec::new(),
        override_memo: BTreeMap::new(),
    };

    g.plan_classes();
    g.mark_pure_declarations();
    g.plan_free_functions();
    let callsites = g.plan_callsites()?;
    Ok(g.emit(callsites))
}

impl Gen<'_> {
    fn gen_type(&mut self, depth: u32) -> TypeExpr {
        let tw = self.cfg.type_weights;
        let pointer_w = if depth < 3 { tw.pointer } else { 0 };
        let total = tw.primitive + pointer_w + tw.named;
        let roll = self.rng.gen_range(0..total);
        if roll < tw.primitive {
            PRIMITIVES[self.rng.gen_range(0..PRIMITIVES.len())].clone()
        } else if roll < tw.primitive + pointer_w {
            self.gen_type(depth + 1).ptr()
        } else {
            let name = &self.named_pool[self.rng.gen_range(0..self.named_pool.len())];
            TypeExpr::Named(name.clone())
        }
    }

    fn gen_params(&mut self) -> Vec<TypeExpr> {
        let total: u32 = self.cfg.arity_weights.iter().sum();
        let mut roll = self.rng.gen_range(0..total);
        let mut arity = 0usize;
        for (a, &w) in self.cfg.arity_weights.iter().enumerate() {
            if roll < w {
                arity = a;
                break;
            }
            roll -= w;
        }
        (0..arity).map(|_| self.gen_type(0)).collect()
    }

    fn gen_return(&mut self) -> TypeExpr {
        if self.rng.gen_bool(0.4) {
            TypeExpr::Void
        } else {
            self.gen_type(0)
        }
    }

    fn method_name(&mut self) -> String {
        METHOD_NAMES[self.rng.gen_range(0..METHOD_NAMES.len())].to_string()
    }

    fn plan_classes(&mut self) {
        for i in 0..self.cfg.n_classes as usize {
            // Base selection: earlier classes only, so the hierarchy is
            // acyclic by construction.
            let k_max = (self.cfg.max_bases as usize).min(i);
            let mut bases: Vec<usize> = Vec::new();
            if k_max > 0 && !self.rng.gen_bool(0.3) {
                bases.push(self.rng.gen_range(0..i));
                while bases.len() < k_max && self.rng.gen_bool(0.3) {
                    let cand = self.rng.gen_range(0..i);
                    if !bases.contains(&cand) {
                        bases.push(cand);
                    }
                }
            }
            let vbase_flags: Vec<bool> = bases.iter().map(|_| self.rng.gen_bool(0.1)).collect();

            // Primary layout comes from the first base; overrides replace
            // slots, new virtuals append.
            let mut primary: Vec<Slot> = bases
                .first()
                .map(|&b| self.classes[b].primary.clone())
                .unwrap_or_default();
            let primary_path: Vec<usize> = match bases.first() {
                Some(&b) => {
                    let mut p = vec![i];
                    p.extend(&self.classes[b].primary_path);
                    p
                }
                None => vec![i],
            };
            for slot in primary.iter_mut() {
                if self.rng.gen_bool(self.cfg.p_override) {
                    slot.binding = self.override_slot(i, slot.info);
                }
            }
            let n_new = if bases.is_empty() {
                self.rng.gen_range(1..=3)
            } else {
                // Mostly 0 or 1 fresh virtuals per derived class.
                [0, 0, 1, 1, 1, 2][self.rng.gen_range(0..6)]
            };
            for _ in 0..n_new {
                let slot = self.introduce_slot(i);
                primary.push(slot);
            }

            // Secondary tables for the remaining direct bases.
            let mut secondaries = Vec::new();
            for &b in bases.iter().skip(1) {
                let mut layout = self.classes[b].primary.clone();
                for slot in layout.iter_mut() {
                    if self.rng.gen_bool(self.cfg.p_override) {
                        slot.binding = self.override_slot(i, slot.info);
                    }
                }
                let mut path = vec![i];
                path.extend(&self.classes[b].primary_path);
                secondaries.push((b, path, layout));
            }

            self.classes.push(ClassPlan {
                bases,
                vbase_flags,
                primary_path,
                primary,
                secondaries,
            });
        }
    }

    fn introduce_slot(&mut self, class: usize) -> Slot {
        let name = self.method_name();
        let params = self.gen_params();
        let ret = self.gen_return();
        let fn_idx = self.functions.len();
        self.functions.push(FnPlan {
            name: name.clone(),
            params: params.clone(),
            ret: ret.clone(),
            owner: Some(class),
            is_virtual: true,
            pure: false,
            variadic: false,
            direct_calls: 0,
        });
        let info = self.slot_infos.len();
        self.slot_infos.push(SlotInfo {
            name,
            params,
            ret,
            introduced_by: fn_idx,
            overridden: false,
        });
        Slot {
            info,
            binding: fn_idx,
        }
    }

    fn override_slot(&mut self, class: usize, info: usize) -> usize {
        if let Some(&existing) = self.override_memo.get(&(class, info)) {
            return existing;
        }
        let fn_idx = self.functions.len();
        let si = &mut self.slot_infos[info];
        si.overridden = true;
        let (name, params, ret) = (si.name.clone(), si.params.clone(), si.ret.clone());
        self.functions.push(FnPlan {
            name,
            params,
            ret,
            owner: Some(class),
            is_virtual: true,
            pure: false,
            variadic: false,
            direct_calls: 0,
        });
        self.override_memo.insert((class, info), fn_idx);
        fn_idx
    }

    /// A declaration that some class overrides may retroactively become
    /// pure virtual; tables that still bind the declaration then carry a
    /// pure slot. Declarations nobody overrides stay concrete so that
    /// every slot remains dispatchable somewhere.
    fn mark_pure_declarations(&mut self) {
        for info in 0..self.slot_infos.len() {
            if self.slot_infos[info].overridden && self.rng.gen_bool(0.15) {
                let decl = self.slot_infos[info].introduced_by;
                self.functions[decl].pure = true;
            }
        }
    }

    fn plan_free_functions(&mut self) {
        for _ in 0..self.cfg.n_free_functions {
            let params = self.gen_params();
            let ret = self.gen_return();
            let variadic = self.rng.gen_bool(0.1);
            let direct_calls = if self.rng.gen_bool(0.3) {
                self.rng.gen_range(1..=3)
            } else {
                0
            };
            let idx = self.functions.len();
            self.functions.push(FnPlan {
                name: format!("f{idx}"),
                params,
                ret,
                owner: None,
                is_virtual: false,
                pure: false,
                variadic,
                direct_calls,
            });
        }
    }

    fn plan_callsites(&mut self) -> Result<Vec<Callsite>, GeneratorError> {
        let non_pure: Vec<usize> = (0..self.functions.len())
            .filter(|&i| !self.functions[i].pure)
            .collect();
        let mut out = Vec::new();
        for cs_idx in 0..self.cfg.n_callsites as usize {
            let id = CallsiteId::new(format!("S{cs_idx:06}"));
            let virt = self.cfg.n_classes > 0 && self.rng.gen_bool(self.cfg.p_virtual_callsite);
            let loc = SourceLoc {
                file: format!("gen_{:03}.cc", self.rng.gen_range(0..24)),
                line: self.rng.gen_range(1..5000),
                column: self.rng.gen_range(1..80),
            };
            let enclosing = if !non_pure.is_empty() && self.rng.gen_bool(0.8) {
                let pick = non_pure[self.rng.gen_range(0..non_pure.len())];
                Some(FunctionId::new(format!("F{pick:06}")))
            } else {
                None
            };
            let cs = if virt {
                let class = self.rng.gen_range(0..self.cfg.n_classes as usize);
                let plan = &self.classes[class];
                let n_secondary = plan.secondaries.len();
                let (order, layout) = if n_secondary > 0 && !self.rng.gen_bool(0.7) {
                    let j = self.rng.gen_range(0..n_secondary);
                    (j as u32 + 1, &plan.secondaries[j].2)
                } else {
                    (0, &plan.primary)
                };
                let slot = self.rng.gen_range(0..layout.len());
                let info = &self.slot_infos[layout[slot].info];
                let returns_used = !info.ret.is_void() && self.rng.gen_bool(0.6);
                Callsite {
                    id,
                    kind: CallsiteKind::VirtualDispatch,
                    source_loc: loc,
                    args: info.params.clone(),
                    returns_used,
                    callee_name_hint: Some(info.name.clone()),
                    static_class: Some(ClassId::new(format!("C{class:05}"))),
                    table_order: Some(order),
                    entry_index: Some(slot as u32),
                    enclosing_function: enclosing,
                }
            } else {
                if non_pure.is_empty() {
                    return Err(GeneratorError::Infeasible(
                        "function-pointer callsites need a callable function".to_string(),
                    ));
                }
                let (args, returns_used, hint) = if self.rng.gen_bool(0.15) {
                    // A signature matching no particular function.
                    let args = self.gen_params();
                    let name = self.method_name();
                    (args, self.rng.gen_bool(0.5), name)
                } else {
                    let pick = non_pure[self.rng.gen_range(0..non_pure.len())];
                    let f = &self.functions[pick];
                    let mut args = f.params.clone();
                    let extra = if f.variadic { self.rng.gen_range(0..3) } else { 0 };
                    let returns_used = !f.ret.is_void() && self.rng.gen_bool(0.6);
                    let name = f.name.clone();
                    for _ in 0..extra {
                        args.push(self.gen_type(0));
                    }
                    (args, returns_used, name)
                };
                Callsite {
                    id,
                    kind: CallsiteKind::FunctionPointer,
                    source_loc: loc,
                    args,
                    returns_used,
                    callee_name_hint: Some(hint),
                    static_class: None,
                    table_order: None,
                    entry_index: None,
                    enclosing_function: enclosing,
                }
            };
            out.push(cs);
        }
        Ok(out)
    }

    fn emit(&mut self, callsites: Vec<Callsite>) -> ProgramFacts {
        let mut facts = ProgramFacts {
            format_version: crate::io::FORMAT_VERSION,
            ..ProgramFacts::default()
        };

        for (i, plan) in self.classes.iter().enumerate() {
            let id = ClassId::new(format!("C{i:05}"));
            facts.classes.insert(
                id.clone(),
                ClassRecord {
                    id,
                    name: format!("Cls{i}"),
                    bases: plan
                        .bases
                        .iter()
                        .zip(&plan.vbase_flags)
                        .map(|(&b, &virt)| BaseRef {
                            class: ClassId::new(format!("C{b:05}")),
                            is_virtual_base: virt,
                        })
                        .collect(),
                    // Every generated class defines or inherits a virtual
                    // function.
                    is_virtual_class: true,
                },
            );
        }

        for (idx, f) in self.functions.iter().enumerate() {
            let id = FunctionId::new(format!("F{idx:06}"));
            facts.functions.insert(
                id.clone(),
                FunctionRecord {
                    id,
                    name: f.name.clone(),
                    owning_class: f.owner.map(|c| ClassId::new(format!("C{c:05}"))),
                    params: f.params.clone(),
                    is_variadic: f.variadic,
                    return_type: f.ret.clone(),
                    is_virtual: f.is_virtual,
                    is_pure_virtual: f.pure,
                    source_loc: SourceLoc {
                        file: match f.owner {
                            Some(c) => format!("cls_{c:03}.cc"),
                            None => "free.cc".to_string(),
                        },
                        line: (idx as u32 % 900) * 7 + 3,
                        column: 5,
                    },
                    direct_call_count: f.direct_calls,
                    has_return: true,
                },
            );
        }

        for (i, plan) in self.classes.iter().enumerate() {
            let class_id = format!("C{i:05}");
            let path_ids = |path: &[usize]| -> Vec<ClassId> {
                path.iter().map(|&c| ClassId::new(format!("C{c:05}"))).collect()
            };
            let mut tables: Vec<(u32, Vec<ClassId>, &[Slot], bool)> = Vec::new();
            tables.push((0, path_ids(&plan.primary_path), &plan.primary, false));
            for (j, (_, path, layout)) in plan.secondaries.iter().enumerate() {
                tables.push((j as u32 + 1, path_ids(path), layout, true));
            }
            for (order, base_path, layout, is_secondary) in tables {
                let mut entries = Vec::new();
                if is_secondary {
                    entries.push(VTableEntry {
                        kind: EntryKind::Offset,
                        function_id: None,
                        entry_index: None,
                    });
                }
                for (slot_idx, slot) in layout.iter().enumerate() {
                    let f = &self.functions[slot.binding];
                    let entry = if f.pure {
                        VTableEntry {
                            kind: EntryKind::Pure,
                            function_id: None,
                            entry_index: Some(slot_idx as u32),
                        }
                    } else {
                        let kind = if is_secondary && f.owner == Some(i) {
                            EntryKind::Thunk
                        } else {
                            EntryKind::Function
                        };
                        VTableEntry {
                            kind,
                            function_id: Some(FunctionId::new(format!("F{:06}", slot.binding))),
                            entry_index: Some(slot_idx as u32),
                        }
                    };
                    entries.push(entry);
                }
                let id = VTableId::new(format!("V{class_id}_{order}"));
                facts.vtables.insert(
                    id.clone(),
                    VTableRecord {
                        id,
                        owning_class: ClassId::new(class_id.clone()),
                        order,
                        base_path,
                        entries,
                    },
                );
            }
        }

        for cs in callsites {
            facts.callsites.insert(cs.id.clone(), cs);
        }
        facts
    }
}
