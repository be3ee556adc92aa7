//! Callsite/function signature keys and the matching predicates the
//! source-type policies are built from.
//!
//! The predicates form a strictness chain: a strict match is also an
//! exact source-type match, which is also a safe (pointer-interchanging)
//! match.

use alloc::string::String;
use alloc::vec::Vec;

use crate::facts::{Callsite, FunctionRecord};
use crate::types::TypeExpr;

/// Canonical signature of a callsite or a candidate target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignatureKey {
    pub param_types: Vec<TypeExpr>,
    pub return_is_void: bool,
    /// Unqualified name; present when the key was built for named
    /// matching (always for functions, hint-dependent for callsites).
    pub name: Option<String>,
}

impl SignatureKey {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

/// Signature provided by a callsite: the argument types, whether the
/// result is consumed, and the statically named callee if known.
pub fn callsite_signature(cs: &Callsite) -> SignatureKey {
    SignatureKey {
        param_types: cs.args.clone(),
        return_is_void: !cs.returns_used,
        name: cs.callee_name_hint.clone(),
    }
}

/// Signature expected by a function: its fixed parameters, whether it
/// returns void, and its unqualified name.
pub fn function_signature(f: &FunctionRecord) -> SignatureKey {
    SignatureKey {
        param_types: f.params.clone(),
        return_is_void: f.return_type.is_void(),
        name: Some(f.name.clone()),
    }
}

fn params_match_safe(a: &[TypeExpr], b: &[TypeExpr]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x == y || (x.is_ptr() && y.is_ptr()))
}

/// Arity-exact parameter match with all pointer types interchangeable
/// (only the outermost constructor is compared for pointers). Return
/// types and names are ignored.
pub fn match_safe(cs_sig: &SignatureKey, fn_sig: &SignatureKey) -> bool {
    params_match_safe(&cs_sig.param_types, &fn_sig.param_types)
}

/// Arity-exact parameter match with distinct pointer types. Return types
/// and names are ignored.
pub fn match_src(cs_sig: &SignatureKey, fn_sig: &SignatureKey) -> bool {
    cs_sig.param_types == fn_sig.param_types
}

/// Exact parameter match plus equal unqualified names. Both keys must
/// carry a name. Return types are ignored (they may be polymorphic).
pub fn match_strict(cs_sig: &SignatureKey, fn_sig: &SignatureKey) -> bool {
    match (&cs_sig.name, &fn_sig.name) {
        (Some(a), Some(b)) => a == b && cs_sig.param_types == fn_sig.param_types,
        _ => false,
    }
}

/// Strict matching with safe-style pointer interchange, for the
/// alternative strict-source interpretation behind
/// [`crate::policy::EngineOptions::strict_src_interchangeable_pointers`].
pub fn match_strict_interchangeable(cs_sig: &SignatureKey, fn_sig: &SignatureKey) -> bool {
    match (&cs_sig.name, &fn_sig.name) {
        (Some(a), Some(b)) => a == b && params_match_safe(&cs_sig.param_types, &fn_sig.param_types),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(params: Vec<TypeExpr>, name: Option<&str>) -> SignatureKey {
        SignatureKey {
            param_types: params,
            return_is_void: false,
            name: name.map(String::from),
        }
    }

    #[test]
    fn safe_interchanges_pointers() {
        let a = sig(alloc::vec![TypeExpr::I32.ptr()], None);
        let b = sig(alloc::vec![TypeExpr::named("Foo").ptr()], None);
        assert!(match_safe(&a, &b));
        assert!(!match_src(&a, &b));

        let c = sig(alloc::vec![TypeExpr::I32], None);
        let d = sig(alloc::vec![TypeExpr::I64], None);
        assert!(!match_safe(&c, &d));

        let e = sig(alloc::vec![TypeExpr::I32, TypeExpr::I8.ptr()], None);
        let f = sig(alloc::vec![TypeExpr::I32, TypeExpr::F64.ptr()], None);
        assert!(match_safe(&e, &f));
    }

    #[test]
    fn src_needs_identical_params() {
        let a = sig(alloc::vec![TypeExpr::I32.ptr()], None);
        assert!(match_src(&a, &a.clone()));
        let b = sig(alloc::vec![TypeExpr::I8.ptr()], None);
        assert!(!match_src(&a, &b));
        assert!(match_src(&sig(alloc::vec![], None), &sig(alloc::vec![], None)));
    }

    #[test]
    fn strict_needs_equal_names() {
        let cs = sig(alloc::vec![TypeExpr::I32], Some("f"));
        assert!(match_strict(&cs, &sig(alloc::vec![TypeExpr::I32], Some("f"))));
        assert!(!match_strict(&cs, &sig(alloc::vec![TypeExpr::I32], Some("g"))));
        assert!(!match_strict(&cs, &sig(alloc::vec![TypeExpr::I64], Some("f"))));
        assert!(!match_strict(&cs, &sig(alloc::vec![TypeExpr::I32], None)));
    }

    fn leaf_type() -> impl Strategy<Value = TypeExpr> {
        prop_oneof![
            Just(TypeExpr::Bool),
            Just(TypeExpr::I32),
            Just(TypeExpr::I64),
            Just(TypeExpr::F64),
            Just(TypeExpr::I8.ptr()),
            Just(TypeExpr::I32.ptr()),
            Just(TypeExpr::named("A").ptr()),
            Just(TypeExpr::named("A")),
            Just(TypeExpr::named("B")),
        ]
    }

    fn sig_strategy() -> impl Strategy<Value = SignatureKey> {
        (
            proptest::collection::vec(leaf_type(), 0..4),
            proptest::bool::ANY,
            proptest::option::of(prop_oneof![Just("f"), Just("g")]),
        )
            .prop_map(|(params, rv, name)| SignatureKey {
                param_types: params,
                return_is_void: rv,
                name: name.map(String::from),
            })
    }

    proptest! {
        // Monotone strictness chain: strict => src => safe.
        #[test]
        fn strictness_chain(a in sig_strategy(), b in sig_strategy()) {
            if match_strict(&a, &b) {
                prop_assert!(match_src(&a, &b));
            }
            if match_src(&a, &b) {
                prop_assert!(match_safe(&a, &b));
            }
        }

        // The type-comparison core is symmetric.
        #[test]
        fn symmetry(a in sig_strategy(), b in sig_strategy()) {
            prop_assert_eq!(match_safe(&a, &b), match_safe(&b, &a));
            prop_assert_eq!(match_src(&a, &b), match_src(&b, &a));
            prop_assert_eq!(match_strict(&a, &b), match_strict(&b, &a));
        }
    }
}
