use std::fmt;
use std::str::FromStr;

/// What an argument position holds. Drives operator canonicalization at
/// parse time and candidate-pool selection during alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgRole {
    EntityName,
    ConceptName,
    AttributeKey,
    /// String attribute value (FilterStr, VerifyStr).
    StringValue,
    /// Attribute value of any kind, matched as text (QueryAttrQualifier).
    AnyValue,
    Predicate,
    QualifierKey,
    /// String qualifier value (QFilterStr).
    QualifierStringValue,
    /// Qualifier value of any kind, matched as text (QueryAttrUnderCondition).
    QualifierAnyValue,
    QuantityLiteral,
    YearLiteral,
    DateLiteral,
    /// `=`, `!=`, `<`, `>`
    Comparison,
    /// `forward` / `backward`
    Direction,
    /// `less` / `greater`
    BetweenOp,
    /// `smallest` / `largest`
    AmongOp,
}

macro_rules! functions {
    ($( $variant:ident => $inputs:literal, [$($role:ident),*]; )*) => {
        /// The closed KoPL function inventory.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Function {
            $($variant,)*
        }

        impl Function {
            pub const ALL: &'static [Function] = &[$(Function::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Function::$variant => stringify!($variant),)*
                }
            }

            /// Number of earlier results this function consumes.
            pub fn input_arity(self) -> usize {
                match self {
                    $(Function::$variant => $inputs,)*
                }
            }

            pub fn arg_roles(self) -> &'static [ArgRole] {
                match self {
                    $(Function::$variant => &[$(ArgRole::$role),*],)*
                }
            }
        }

        impl FromStr for Function {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $(stringify!($variant) => Ok(Function::$variant),)*
                    _ => Err(()),
                }
            }
        }
    };
}

functions! {
    FindAll => 0, [];
    Find => 0, [EntityName];
    FilterConcept => 1, [ConceptName];
    FilterStr => 1, [AttributeKey, StringValue];
    FilterNum => 1, [AttributeKey, QuantityLiteral, Comparison];
    FilterYear => 1, [AttributeKey, YearLiteral, Comparison];
    FilterDate => 1, [AttributeKey, DateLiteral, Comparison];
    QFilterStr => 1, [QualifierKey, QualifierStringValue];
    QFilterNum => 1, [QualifierKey, QuantityLiteral, Comparison];
    QFilterYear => 1, [QualifierKey, YearLiteral, Comparison];
    QFilterDate => 1, [QualifierKey, DateLiteral, Comparison];
    Relate => 1, [Predicate, Direction];
    And => 2, [];
    Or => 2, [];
    QueryName => 1, [];
    Count => 1, [];
    QueryAttr => 1, [AttributeKey];
    QueryAttrUnderCondition => 1, [AttributeKey, QualifierKey, QualifierAnyValue];
    QueryRelation => 2, [];
    SelectBetween => 2, [AttributeKey, BetweenOp];
    SelectAmong => 1, [AttributeKey, AmongOp];
    VerifyStr => 1, [StringValue];
    VerifyNum => 1, [QuantityLiteral, Comparison];
    VerifyYear => 1, [YearLiteral, Comparison];
    VerifyDate => 1, [DateLiteral, Comparison];
    QueryAttrQualifier => 1, [AttributeKey, AnyValue, QualifierKey];
    QueryRelationQualifier => 2, [Predicate, QualifierKey];
}

impl Function {
    /// Exact argument count.
    pub fn arg_count(self) -> usize {
        self.arg_roles().len()
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
