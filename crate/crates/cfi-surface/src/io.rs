//! The `.cfifacts.json` file format and the gadget annotations file.
//!
//! The on-disk form is UTF-8 JSON with a fixed key order and every
//! collection sorted ascending by id, so serialization is canonical:
//! parse-then-write of any valid document is idempotent, and semantically
//! equal snapshots serialize byte-identically regardless of how they were
//! assembled.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cfi_core::facts::{
    BaseRef, Callsite, CallsiteId, CallsiteKind, ClassId, ClassRecord, EntryKind, FunctionId,
    FunctionRecord, GadgetAnnotations, GadgetFlags, ProgramFacts, SourceLoc, VTableEntry,
    VTableId, VTableRecord,
};
use cfi_core::types::{parse_type, TypeExpr};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FactsIoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported facts format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("decode error: {0}")]
    Decode(String),
}

fn syntax_error(e: serde_json::Error) -> FactsIoError {
    FactsIoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

// --- wire layer ---------------------------------------------------------

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactsDoc {
    format_version: u32,
    classes: Vec<ClassDto>,
    functions: Vec<FunctionDto>,
    vtables: Vec<VTableDto>,
    callsites: Vec<CallsiteDto>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassDto {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bases: Vec<BaseDto>,
    is_virtual_class: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct BaseDto {
    class: String,
    #[serde(default, skip_serializing_if = "is_false")]
    virtual_base: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct LocDto {
    file: String,
    line: u32,
    column: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct FunctionDto {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    owning_class: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    is_variadic: bool,
    return_type: String,
    #[serde(default, skip_serializing_if = "is_false")]
    is_virtual: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    is_pure_virtual: bool,
    source_loc: LocDto,
    #[serde(default, skip_serializing_if = "is_zero")]
    direct_call_count: u64,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    has_return: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct VTableDto {
    id: String,
    owning_class: String,
    order: u32,
    base_path: Vec<String>,
    entries: Vec<EntryDto>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryDto {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entry_index: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CallsiteDto {
    id: String,
    kind: String,
    source_loc: LocDto,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    args: Vec<String>,
    returns_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    callee_name_hint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    static_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entry_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enclosing_function: Option<String>,
}

// --- parsing ------------------------------------------------------------

/// Decode a facts document. The caller is expected to run
/// `cfi_core::validate_facts` on the result before analysis.
pub fn parse_facts(bytes: &[u8]) -> Result<ProgramFacts, FactsIoError> {
    // Probe the version first so `{}` and future versions fail with the
    // version error, not a missing-field complaint.
    let probe: serde_json::Value = serde_json::from_slice(bytes).map_err(syntax_error)?;
    match probe.get("format_version") {
        Some(v) if v == &serde_json::json!(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(FactsIoError::VersionMismatch { found: v.to_string() });
        }
        None => {
            return Err(FactsIoError::VersionMismatch {
                found: "missing".to_string(),
            });
        }
    }
    let doc: FactsDoc = serde_json::from_slice(bytes).map_err(syntax_error)?;

    let mut facts = ProgramFacts {
        format_version: doc.format_version,
        ..ProgramFacts::default()
    };
    for c in doc.classes {
        let record = class_from_dto(c)?;
        let id = record.id.clone();
        if facts.classes.insert(id.clone(), record).is_some() {
            return Err(FactsIoError::Decode(format!("duplicate class id {id}")));
        }
    }
    for f in doc.functions {
        let record = function_from_dto(f)?;
        let id = record.id.clone();
        if facts.functions.insert(id.clone(), record).is_some() {
            return Err(FactsIoError::Decode(format!("duplicate function id {id}")));
        }
    }
    for v in doc.vtables {
        let record = vtable_from_dto(v)?;
        let id = record.id.clone();
        if facts.vtables.insert(id.clone(), record).is_some() {
            return Err(FactsIoError::Decode(format!("duplicate vtable id {id}")));
        }
    }
    for c in doc.callsites {
        let record = callsite_from_dto(c)?;
        let id = record.id.clone();
        if facts.callsites.insert(id.clone(), record).is_some() {
            return Err(FactsIoError::Decode(format!("duplicate callsite id {id}")));
        }
    }
    Ok(facts)
}

fn parse_type_field(text: &str, context: &str) -> Result<TypeExpr, FactsIoError> {
    parse_type(text).map_err(|e| FactsIoError::Decode(format!("{context}: {e}")))
}

fn class_from_dto(dto: ClassDto) -> Result<ClassRecord, FactsIoError> {
    Ok(ClassRecord {
        id: ClassId::new(dto.id),
        name: dto.name,
        bases: dto
            .bases
            .into_iter()
            .map(|b| BaseRef {
                class: ClassId::new(b.class),
                is_virtual_base: b.virtual_base,
            })
            .collect(),
        is_virtual_class: dto.is_virtual_class,
    })
}

fn loc_from_dto(dto: LocDto) -> SourceLoc {
    SourceLoc {
        file: dto.file,
        line: dto.line,
        column: dto.column,
    }
}

fn function_from_dto(dto: FunctionDto) -> Result<FunctionRecord, FactsIoError> {
    let context = format!("function {}", dto.id);
    let params = dto
        .params
        .iter()
        .map(|p| parse_type_field(p, &context))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionRecord {
        id: FunctionId::new(dto.id),
        name: dto.name,
        owning_class: dto.owning_class.map(ClassId::new),
        params,
        is_variadic: dto.is_variadic,
        return_type: parse_type_field(&dto.return_type, &context)?,
        is_virtual: dto.is_virtual,
        is_pure_virtual: dto.is_pure_virtual,
        source_loc: loc_from_dto(dto.source_loc),
        direct_call_count: dto.direct_call_count,
        has_return: dto.has_return,
    })
}

fn vtable_from_dto(dto: VTableDto) -> Result<VTableRecord, FactsIoError> {
    let entries = dto
        .entries
        .into_iter()
        .map(|e| {
            let kind = match e.kind.as_str() {
                "function" => EntryKind::Function,
                "thunk" => EntryKind::Thunk,
                "offset" => EntryKind::Offset,
                "pure" => EntryKind::Pure,
                other => {
                    return Err(FactsIoError::Decode(format!(
                        "vtable {}: unknown entry kind '{other}'",
                        dto.id
                    )))
                }
            };
            Ok(VTableEntry {
                kind,
                function_id: e.function.map(FunctionId::new),
                entry_index: e.entry_index,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VTableRecord {
        id: VTableId::new(dto.id),
        owning_class: ClassId::new(dto.owning_class),
        order: dto.order,
        base_path: dto.base_path.into_iter().map(ClassId::new).collect(),
        entries,
    })
}

fn callsite_from_dto(dto: CallsiteDto) -> Result<Callsite, FactsIoError> {
    let context = format!("callsite {}", dto.id);
    let kind = match dto.kind.as_str() {
        "virtual_dispatch" => CallsiteKind::VirtualDispatch,
        "function_pointer" => CallsiteKind::FunctionPointer,
        other => {
            return Err(FactsIoError::Decode(format!(
                "{context}: unknown callsite kind '{other}'"
            )))
        }
    };
    let args = dto
        .args
        .iter()
        .map(|a| parse_type_field(a, &context))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Callsite {
        id: CallsiteId::new(dto.id),
        kind,
        source_loc: loc_from_dto(dto.source_loc),
        args,
        returns_used: dto.returns_used,
        callee_name_hint: dto.callee_name_hint,
        static_class: dto.static_class.map(ClassId::new),
        table_order: dto.table_order,
        entry_index: dto.entry_index,
        enclosing_function: dto.enclosing_function.map(FunctionId::new),
    })
}

// --- serialization ------------------------------------------------------

/// Serialize to the canonical byte form (pretty JSON, fixed key order,
/// collections ascending by id, newline-terminated).
pub fn write_facts(facts: &ProgramFacts) -> Vec<u8> {
    let doc = FactsDoc {
        format_version: facts.format_version,
        classes: facts.classes.values().map(class_to_dto).collect(),
        functions: facts.functions.values().map(function_to_dto).collect(),
        vtables: facts.vtables.values().map(vtable_to_dto).collect(),
        callsites: facts.callsites.values().map(callsite_to_dto).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("facts serialize");
    bytes.push(b'\n');
    bytes
}

fn class_to_dto(c: &ClassRecord) -> ClassDto {
    ClassDto {
        id: c.id.to_string(),
        name: c.name.clone(),
        bases: c
            .bases
            .iter()
            .map(|b| BaseDto {
                class: b.class.to_string(),
                virtual_base: b.is_virtual_base,
            })
            .collect(),
        is_virtual_class: c.is_virtual_class,
    }
}

fn loc_to_dto(loc: &SourceLoc) -> LocDto {
    LocDto {
        file: loc.file.clone(),
        line: loc.line,
        column: loc.column,
    }
}

fn function_to_dto(f: &FunctionRecord) -> FunctionDto {
    FunctionDto {
        id: f.id.to_string(),
        name: f.name.clone(),
        owning_class: f.owning_class.as_ref().map(|c| c.to_string()),
        params: f.params.iter().map(|p| p.to_string()).collect(),
        is_variadic: f.is_variadic,
        return_type: f.return_type.to_string(),
        is_virtual: f.is_virtual,
        is_pure_virtual: f.is_pure_virtual,
        source_loc: loc_to_dto(&f.source_loc),
        direct_call_count: f.direct_call_count,
        has_return: f.has_return,
    }
}

fn vtable_to_dto(v: &VTableRecord) -> VTableDto {
    VTableDto {
        id: v.id.to_string(),
        owning_class: v.owning_class.to_string(),
        order: v.order,
        base_path: v.base_path.iter().map(|c| c.to_string()).collect(),
        entries: v
            .entries
            .iter()
            .map(|e| EntryDto {
                kind: match e.kind {
                    EntryKind::Function => "function",
                    EntryKind::Thunk => "thunk",
                    EntryKind::Offset => "offset",
                    EntryKind::Pure => "pure",
                }
                .to_string(),
                function: e.function_id.as_ref().map(|f| f.to_string()),
                entry_index: e.entry_index,
            })
            .collect(),
    }
}

fn callsite_to_dto(c: &Callsite) -> CallsiteDto {
    CallsiteDto {
        id: c.id.to_string(),
        kind: match c.kind {
            CallsiteKind::VirtualDispatch => "virtual_dispatch",
            CallsiteKind::FunctionPointer => "function_pointer",
        }
        .to_string(),
        source_loc: loc_to_dto(&c.source_loc),
        args: c.args.iter().map(|a| a.to_string()).collect(),
        returns_used: c.returns_used,
        callee_name_hint: c.callee_name_hint.clone(),
        static_class: c.static_class.as_ref().map(|s| s.to_string()),
        table_order: c.table_order,
        entry_index: c.entry_index,
        enclosing_function: c.enclosing_function.as_ref().map(|f| f.to_string()),
    }
}

// --- gadget annotations ---------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct GadgetDto {
    #[serde(default)]
    fwd: bool,
    #[serde(default)]
    ret: bool,
}

// --- normalized aggregates -------------------------------------------------

#[derive(Debug, Deserialize)]
struct AggregatesDoc {
    aggregates: Vec<AggregateDto>,
}

#[derive(Debug, Deserialize)]
struct AggregateDto {
    policy: String,
    avg: serde_json::Value,
    sd: serde_json::Value,
    p90: serde_json::Value,
}

fn decimal_field(v: &serde_json::Value, field: &str) -> Result<cfi_core::metrics::Decimal2, FactsIoError> {
    let text = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(FactsIoError::Decode(format!("{field}: expected a number, got {other}"))),
    };
    text.parse()
        .map_err(|e| FactsIoError::Decode(format!("{field}: {e}")))
}

/// Parse a precomputed normalized-aggregates file, as accepted by the
/// `rank` subcommand: `{"aggregates": [{"policy", "avg", "sd", "p90"}]}`
/// with values given as numbers or strings with at most two decimals.
pub fn parse_aggregates(
    bytes: &[u8],
) -> Result<Vec<cfi_core::metrics::PolicyAggregates>, FactsIoError> {
    let doc: AggregatesDoc = serde_json::from_slice(bytes).map_err(syntax_error)?;
    doc.aggregates
        .iter()
        .map(|a| {
            let policy: cfi_core::policy::PolicyId = a
                .policy
                .parse()
                .map_err(|e| FactsIoError::Decode(format!("{e}")))?;
            Ok(cfi_core::metrics::PolicyAggregates {
                policy,
                avg: decimal_field(&a.avg, "avg")?,
                sd: decimal_field(&a.sd, "sd")?,
                p90: decimal_field(&a.p90, "p90")?,
            })
        })
        .collect()
}

/// Parse a gadget annotations file: a JSON object mapping function id to
/// `{"fwd": bool, "ret": bool}`.
pub fn parse_gadgets(bytes: &[u8]) -> Result<GadgetAnnotations, FactsIoError> {
    let raw: BTreeMap<String, GadgetDto> = serde_json::from_slice(bytes).map_err(syntax_error)?;
    Ok(GadgetAnnotations {
        flags: raw
            .into_iter()
            .map(|(id, g)| {
                (
                    FunctionId::new(id),
                    GadgetFlags {
                        has_forward_gadget: g.fwd,
                        has_return_gadget: g.ret,
                    },
                )
            })
            .collect(),
    })
}
