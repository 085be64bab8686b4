//! Literal values stored in the knowledge base and compared by the executor.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};

use crate::text;

/// Relative tolerance used for quantity equality.
pub const QUANTITY_REL_TOLERANCE: f64 = 1e-9;

/// Unit string denoting a dimensionless quantity.
pub const DIMENSIONLESS: &str = "1";

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKind {
    String,
    Quantity,
    Year,
    Date,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::String => "string",
            ValueKind::Quantity => "quantity",
            ValueKind::Year => "year",
            ValueKind::Date => "date",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        let unit = unit.into();
        let unit = if unit.trim().is_empty() {
            DIMENSIONLESS.to_string()
        } else {
            unit.trim().to_string()
        };
        Quantity { value, unit }
    }

    /// `None` when units differ: no unit conversion is attempted.
    pub fn compare(&self, other: &Quantity) -> Option<Ordering> {
        if self.unit != other.unit {
            return None;
        }
        Some(compare_numbers(self.value, other.value))
    }
}

/// Numeric ordering with equality under [`QUANTITY_REL_TOLERANCE`].
pub fn compare_numbers(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= QUANTITY_REL_TOLERANCE * a.abs().max(b.abs()) {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

/// Integers print without a decimal point; everything else uses the shortest
/// representation that parses back to the same `f64`.
pub fn render_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    String(String),
    Quantity(Quantity),
    Year(i32),
    Date(NaiveDate),
}

impl TypedValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            TypedValue::String(_) => ValueKind::String,
            TypedValue::Quantity(_) => ValueKind::Quantity,
            TypedValue::Year(_) => ValueKind::Year,
            TypedValue::Date(_) => ValueKind::Date,
        }
    }

    /// Parse `text` as a literal of the given kind.
    ///
    /// Quantities are a number optionally followed by a unit (`"12 kilometre"`);
    /// a bare number is dimensionless. Years are integers, dates ISO-8601 days.
    pub fn parse_as(kind: ValueKind, text: &str) -> Option<TypedValue> {
        let text = text.trim();
        match kind {
            ValueKind::String => Some(TypedValue::String(text.to_string())),
            ValueKind::Quantity => {
                let (num, unit) = match text.split_once(char::is_whitespace) {
                    Some((n, u)) => (n, u.trim()),
                    None => (text, DIMENSIONLESS),
                };
                Some(TypedValue::Quantity(Quantity::new(
                    parse_number(num)?,
                    unit,
                )))
            }
            ValueKind::Year => text.parse().ok().map(TypedValue::Year),
            ValueKind::Date => parse_date(text).map(TypedValue::Date),
        }
    }

    /// Year view: years as-is, dates by their calendar year.
    pub fn as_year(&self) -> Option<i32> {
        match self {
            TypedValue::Year(y) => Some(*y),
            TypedValue::Date(d) => Some(d.year()),
            _ => None,
        }
    }

    /// Ordering between two values of the same kind. Strings compare by their
    /// normalized form; quantities require equal units.
    pub fn compare(&self, other: &TypedValue) -> Option<Ordering> {
        match (self, other) {
            (TypedValue::String(a), TypedValue::String(b)) => {
                Some(text::normalize(a).cmp(&text::normalize(b)))
            }
            (TypedValue::Quantity(a), TypedValue::Quantity(b)) => a.compare(b),
            (TypedValue::Year(a), TypedValue::Year(b)) => Some(a.cmp(b)),
            (TypedValue::Date(a), TypedValue::Date(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Equality against free text, parsing the text as this value's kind.
    pub fn matches_text(&self, literal: &str) -> bool {
        TypedValue::parse_as(self.kind(), literal)
            .and_then(|lit| self.compare(&lit))
            .is_some_and(Ordering::is_eq)
    }
}

pub fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text.trim(), DATE_FORMAT).ok()
}

pub fn render_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedValue::String(s) => f.write_str(s),
            TypedValue::Quantity(q) => {
                f.write_str(&render_number(q.value))?;
                if q.unit != DIMENSIONLESS {
                    write!(f, " {}", q.unit)?;
                }
                Ok(())
            }
            TypedValue::Year(y) => write!(f, "{y}"),
            TypedValue::Date(d) => f.write_str(&render_date(*d)),
        }
    }
}

/// Comparison operator of the Filter/QFilter/Verify families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CmpOp {
    /// Accepts the canonical tokens and their word synonyms.
    pub fn parse(token: &str) -> Option<CmpOp> {
        match text::normalize(token).as_str() {
            "=" | "==" | "equal" | "equals" => Some(CmpOp::Eq),
            "!=" | "not equal" => Some(CmpOp::Ne),
            "<" | "less" | "less than" => Some(CmpOp::Lt),
            ">" | "greater" | "greater than" => Some(CmpOp::Gt),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord.is_eq(),
            CmpOp::Ne => ord.is_ne(),
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Gt => ord.is_gt(),
        }
    }

    /// `value op literal`; incomparable pairs never satisfy, not even `!=`.
    pub fn test(self, value: &TypedValue, literal: &TypedValue) -> bool {
        value.compare(literal).is_some_and(|o| self.holds(o))
    }
}
