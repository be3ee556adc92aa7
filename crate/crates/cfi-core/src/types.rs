//! Canonical type expressions for function and callsite signatures.
//!
//! The grammar is deliberately small: the scalar types a C-family frontend
//! would lower to, opaque named types, and pointers. Every expression has
//! exactly one textual form, so parsing and printing round-trip.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

/// A canonical type expression.
///
/// `Ptr` nests arbitrarily; `Named` carries an opaque identifier (class or
/// typedef name). Variadic markers are not type expressions: a function's
/// trailing `...` is the `is_variadic` flag on its record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Void,
    Bool,
    Char,
    I8,
    I16,
    I32,
    I64,
    U8,
    U16,
    U32,
    U64,
    F32,
    F64,
    Ptr(Box<TypeExpr>),
    Named(String),
}

impl TypeExpr {
    /// Pointer to `self`.
    pub fn ptr(self) -> TypeExpr {
        TypeExpr::Ptr(Box::new(self))
    }

    /// Named type; the identifier must be non-empty.
    pub fn named(name: &str) -> TypeExpr {
        debug_assert!(!name.is_empty());
        TypeExpr::Named(name.to_owned())
    }

    pub fn is_void(&self) -> bool {
        matches!(self, TypeExpr::Void)
    }

    pub fn is_ptr(&self) -> bool {
        matches!(self, TypeExpr::Ptr(_))
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Void => f.write_str("void"),
            TypeExpr::Bool => f.write_str("bool"),
            TypeExpr::Char => f.write_str("char"),
            TypeExpr::I8 => f.write_str("i8"),
            TypeExpr::I16 => f.write_str("i16"),
            TypeExpr::I32 => f.write_str("i32"),
            TypeExpr::I64 => f.write_str("i64"),
            TypeExpr::U8 => f.write_str("u8"),
            TypeExpr::U16 => f.write_str("u16"),
            TypeExpr::U32 => f.write_str("u32"),
            TypeExpr::U64 => f.write_str("u64"),
            TypeExpr::F32 => f.write_str("f32"),
            TypeExpr::F64 => f.write_str("f64"),
            TypeExpr::Ptr(inner) => write!(f, "ptr({inner})"),
            TypeExpr::Named(name) => write!(f, "named({name})"),
        }
    }
}

/// Parse failure, with the byte offset of the offending input position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTypeError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed type at byte {}: {}", self.offset, self.message)
    }
}

impl core::error::Error for ParseTypeError {}

impl FromStr for TypeExpr {
    type Err = ParseTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

/// Parse a canonical type string. The entire input must be consumed.
pub fn parse_type(text: &str) -> Result<TypeExpr, ParseTypeError> {
    let bytes = text.as_bytes();
    let (expr, rest) = parse_at(bytes, 0)?;
    if rest != bytes.len() {
        return Err(err(rest, "trailing input"));
    }
    Ok(expr)
}

fn err(offset: usize, message: &str) -> ParseTypeError {
    ParseTypeError {
        offset,
        message: message.to_owned(),
    }
}

fn parse_at(bytes: &[u8], pos: usize) -> Result<(TypeExpr, usize), ParseTypeError> {
    let word_end = bytes[pos..]
        .iter()
        .position(|b| !b.is_ascii_alphanumeric())
        .map(|i| pos + i)
        .unwrap_or(bytes.len());
    let word = core::str::from_utf8(&bytes[pos..word_end]).map_err(|_| err(pos, "not ascii"))?;
    let simple = match word {
        "void" => Some(TypeExpr::Void),
        "bool" => Some(TypeExpr::Bool),
        "char" => Some(TypeExpr::Char),
        "i8" => Some(TypeExpr::I8),
        "i16" => Some(TypeExpr::I16),
        "i32" => Some(TypeExpr::I32),
        "i64" => Some(TypeExpr::I64),
        "u8" => Some(TypeExpr::U8),
        "u16" => Some(TypeExpr::U16),
        "u32" => Some(TypeExpr::U32),
        "u64" => Some(TypeExpr::U64),
        "f32" => Some(TypeExpr::F32),
        "f64" => Some(TypeExpr::F64),
        _ => None,
    };
    if let Some(t) = simple {
        return Ok((t, word_end));
    }
    match word {
        "ptr" => {
            let after_open = expect(bytes, word_end, b'(')?;
            let (inner, after_inner) = parse_at(bytes, after_open)?;
            let after_close = expect(bytes, after_inner, b')')?;
            Ok((TypeExpr::Ptr(Box::new(inner)), after_close))
        }
        "named" => {
            let after_open = expect(bytes, word_end, b'(')?;
            let ident_end = parse_ident(bytes, after_open)?;
            let ident = core::str::from_utf8(&bytes[after_open..ident_end]).unwrap();
            let after_close = expect(bytes, ident_end, b')')?;
            Ok((TypeExpr::Named(ident.to_owned()), after_close))
        }
        "" => Err(err(pos, "expected a type")),
        _ => Err(err(pos, "unknown type keyword")),
    }
}

fn expect(bytes: &[u8], pos: usize, want: u8) -> Result<usize, ParseTypeError> {
    if bytes.get(pos) == Some(&want) {
        Ok(pos + 1)
    } else {
        Err(ParseTypeError {
            offset: pos,
            message: alloc::format!("expected '{}'", want as char),
        })
    }
}

// Identifiers: leading alpha or '_', then alphanumeric, '_' or ':' (to
// admit qualified names). Must be non-empty.
fn parse_ident(bytes: &[u8], pos: usize) -> Result<usize, ParseTypeError> {
    match bytes.get(pos) {
        Some(b) if b.is_ascii_alphabetic() || *b == b'_' => {}
        _ => return Err(err(pos, "expected identifier")),
    }
    let mut end = pos + 1;
    while let Some(b) = bytes.get(end) {
        if b.is_ascii_alphanumeric() || *b == b'_' || *b == b':' {
            end += 1;
        } else {
            break;
        }
    }
    Ok(end)
}
