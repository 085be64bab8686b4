//! KoPL programs: the function inventory, validated program values, the
//! linearized `<func>`/`<arg>` text encoding and the structured JSON form.
//!
//! Programs are flat step lists evaluated with stack semantics: each step pops
//! as many results as its function's input arity and pushes one. A valid
//! program never underflows and leaves exactly one result.

mod function;
pub mod random;
mod text;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use function::{ArgRole, Function};
pub(crate) use text::write_step;
pub use text::{parse_program, print_program};

use crate::kb::Direction;
use crate::text::normalize;
use crate::value::CmpOp;

pub const FUNC_TOKEN: &str = "<func>";
pub const ARG_TOKEN: &str = "<arg>";
pub const RETURN_TOKEN: &str = "<return>";
pub const MASK_TOKEN: &str = "<mask>";

/// Tokens that may never appear inside a function argument.
pub const RESERVED_TOKENS: [&str; 4] = [FUNC_TOKEN, ARG_TOKEN, RETURN_TOKEN, MASK_TOKEN];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("empty program")]
    EmptyProgram,
    #[error("step {step}: unknown function {name:?}")]
    UnknownFunction { step: usize, name: String },
    #[error("step {step}: {function} takes {expected} argument(s), got {found}")]
    Arity {
        step: usize,
        function: Function,
        expected: usize,
        found: usize,
    },
    #[error("stack shape error: {0}")]
    StackShape(StackFault),
    #[error("step {step}: argument contains reserved token {token}")]
    ReservedToken { step: usize, token: &'static str },
    #[error("step {step}: {function} does not accept {value:?} as argument {argument}")]
    InvalidOperator {
        step: usize,
        function: Function,
        argument: usize,
        value: String,
    },
    #[error(
        "step {step}: declared dependencies {declared:?} disagree with stack order {expected:?}"
    )]
    Dependencies {
        step: usize,
        declared: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("malformed structured program: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackFault {
    Underflow {
        step: usize,
        function: Function,
        needs: usize,
        available: usize,
    },
    FinalDepth(usize),
}

impl fmt::Display for StackFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackFault::Underflow {
                step,
                function,
                needs,
                available,
            } => write!(
                f,
                "step {step}: {function} needs {needs} input(s), {available} available"
            ),
            StackFault::FinalDepth(d) => write!(f, "program leaves {d} results, expected 1"),
        }
    }
}

/// One function application. Arguments are trimmed and operator-like
/// arguments canonicalized on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgramStep {
    function: Function,
    arguments: Vec<String>,
}

impl ProgramStep {
    pub fn new<S: AsRef<str>>(function: Function, arguments: &[S]) -> Result<Self, ProgramError> {
        Self::checked(
            0,
            function,
            arguments.iter().map(|s| s.as_ref().to_string()).collect(),
        )
    }

    pub(crate) fn checked(
        step: usize,
        function: Function,
        arguments: Vec<String>,
    ) -> Result<Self, ProgramError> {
        let roles = function.arg_roles();
        if arguments.len() != roles.len() {
            return Err(ProgramError::Arity {
                step,
                function,
                expected: roles.len(),
                found: arguments.len(),
            });
        }
        let mut out = Vec::with_capacity(arguments.len());
        for (i, (arg, role)) in arguments.into_iter().zip(roles).enumerate() {
            if let Some(token) = reserved_token_in(&arg) {
                return Err(ProgramError::ReservedToken { step, token });
            }
            let arg = arg.trim();
            let invalid = || ProgramError::InvalidOperator {
                step,
                function,
                argument: i,
                value: arg.to_string(),
            };
            let canonical = match role {
                ArgRole::Comparison => CmpOp::parse(arg).ok_or_else(invalid)?.token().to_string(),
                ArgRole::Direction => Direction::parse(arg)
                    .ok_or_else(invalid)?
                    .as_str()
                    .to_string(),
                ArgRole::BetweenOp => match normalize(arg).as_str() {
                    "less" | "<" => "less".to_string(),
                    "greater" | ">" => "greater".to_string(),
                    _ => return Err(invalid()),
                },
                ArgRole::AmongOp => match normalize(arg).as_str() {
                    "smallest" => "smallest".to_string(),
                    "largest" => "largest".to_string(),
                    _ => return Err(invalid()),
                },
                _ => arg.to_string(),
            };
            out.push(canonical);
        }
        Ok(ProgramStep {
            function,
            arguments: out,
        })
    }

    pub fn function(&self) -> Function {
        self.function
    }

    pub fn arguments(&self) -> &[String] {
        &self.arguments
    }

    pub fn argument(&self, i: usize) -> &str {
        &self.arguments[i]
    }

    /// Swap in an aligned argument. Callers pass pool members, which are
    /// already trimmed and free of reserved tokens.
    pub(crate) fn set_argument(&mut self, i: usize, value: String) {
        debug_assert!(reserved_token_in(&value).is_none());
        self.arguments[i] = value;
    }
}

pub fn reserved_token_in(s: &str) -> Option<&'static str> {
    RESERVED_TOKENS.into_iter().find(|t| s.contains(t))
}

/// A non-empty, stack-valid sequence of steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    steps: Vec<ProgramStep>,
}

impl Program {
    pub fn new(steps: Vec<ProgramStep>) -> Result<Self, ProgramError> {
        check_stack(&steps)?;
        Ok(Program { steps })
    }

    pub fn steps(&self) -> &[ProgramStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Build from structured steps. When every step declares dependencies
    /// (KQA Pro layout) they must match what the stack would supply.
    pub fn from_structured(steps: Vec<StructuredStep>) -> Result<Self, ProgramError> {
        let mut out = Vec::with_capacity(steps.len());
        let mut stack: Vec<usize> = Vec::new();
        for (i, s) in steps.into_iter().enumerate() {
            // KQA Pro files spell QueryName as "What".
            let name = match s.function.trim() {
                "What" => "QueryName",
                other => other,
            };
            let function: Function = name.parse().map_err(|_| ProgramError::UnknownFunction {
                step: i,
                name: s.function.clone(),
            })?;
            let step = ProgramStep::checked(i, function, s.arguments)?;
            let needs = function.input_arity();
            if stack.len() < needs {
                return Err(ProgramError::StackShape(StackFault::Underflow {
                    step: i,
                    function,
                    needs,
                    available: stack.len(),
                }));
            }
            let popped = stack.split_off(stack.len() - needs);
            if let Some(declared) = s.dependencies {
                if declared != popped {
                    return Err(ProgramError::Dependencies {
                        step: i,
                        declared,
                        expected: popped,
                    });
                }
            }
            stack.push(i);
            out.push(step);
        }
        Program::new(out)
    }

    pub fn to_structured(&self) -> Vec<StructuredStep> {
        self.steps
            .iter()
            .map(|s| StructuredStep {
                function: s.function.name().to_string(),
                arguments: s.arguments.clone(),
                dependencies: None,
            })
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self, ProgramError> {
        let steps: Vec<StructuredStep> =
            serde_json::from_str(s).map_err(|e| ProgramError::Json(e.to_string()))?;
        Program::from_structured(steps)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_structured()).expect("plain strings serialize")
    }

    pub(crate) fn from_validated(steps: Vec<ProgramStep>) -> Self {
        debug_assert!(check_stack(&steps).is_ok());
        Program { steps }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

/// One element of the JSON program form. `inputs` is accepted as an alias of
/// `arguments`; `dependencies` is optional and only checked when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredStep {
    pub function: String,
    #[serde(default, alias = "inputs")]
    pub arguments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependencies: Option<Vec<usize>>,
}

impl Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.to_structured().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let steps = Vec::<StructuredStep>::deserialize(de)?;
        Program::from_structured(steps).map_err(serde::de::Error::custom)
    }
}

/// Pure arity check: simulate pushes and pops.
pub fn check_stack(steps: &[ProgramStep]) -> Result<(), ProgramError> {
    if steps.is_empty() {
        return Err(ProgramError::EmptyProgram);
    }
    let mut depth = 0usize;
    for (i, s) in steps.iter().enumerate() {
        let needs = s.function.input_arity();
        if depth < needs {
            return Err(ProgramError::StackShape(StackFault::Underflow {
                step: i,
                function: s.function,
                needs,
                available: depth,
            }));
        }
        depth = depth - needs + 1;
    }
    if depth != 1 {
        return Err(ProgramError::StackShape(StackFault::FinalDepth(depth)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_what_reads_as_query_name() {
        let p = Program::from_json_str(
            r#"[{"function": "Find", "inputs": ["x"], "dependencies": []},
                {"function": "What", "inputs": [], "dependencies": [0]}]"#,
        )
        .unwrap();
        assert_eq!(p.steps()[1].function(), Function::QueryName);
        assert!("What".parse::<Function>().is_err());
    }

    #[test]
    fn operators_canonicalize() {
        let s = ProgramStep::new(Function::FilterNum, &["population", "5", "greater"]).unwrap();
        assert_eq!(s.arguments(), ["population", "5", ">"]);
        let s = ProgramStep::new(Function::Relate, &["part of", " Forward "]).unwrap();
        assert_eq!(s.argument(1), "forward");
        let s = ProgramStep::new(Function::SelectBetween, &["area", ">"]).unwrap();
        assert_eq!(s.argument(1), "greater");
    }

    #[test]
    fn bad_operators_rejected() {
        assert!(matches!(
            ProgramStep::new(Function::FilterNum, &["population", "5", "<="]),
            Err(ProgramError::InvalidOperator { argument: 2, .. })
        ));
        assert!(matches!(
            ProgramStep::new(Function::Relate, &["part of", "sideways"]),
            Err(ProgramError::InvalidOperator { .. })
        ));
        assert!(matches!(
            ProgramStep::new(Function::SelectAmong, &["area", "biggest"]),
            Err(ProgramError::InvalidOperator { .. })
        ));
    }

    #[test]
    fn reserved_tokens_rejected() {
        assert_eq!(
            ProgramStep::new(Function::Find, &["a <mask> b"]),
            Err(ProgramError::ReservedToken {
                step: 0,
                token: MASK_TOKEN
            })
        );
    }

    #[test]
    fn stack_validation() {
        let find = ProgramStep::new(Function::Find, &["x"]).unwrap();
        let and = ProgramStep::new::<&str>(Function::And, &[]).unwrap();
        assert!(Program::new(vec![find.clone(), find.clone(), and.clone()]).is_ok());
        assert!(matches!(
            Program::new(vec![find.clone(), and]),
            Err(ProgramError::StackShape(StackFault::Underflow {
                step: 1,
                ..
            }))
        ));
        assert_eq!(
            Program::new(vec![find.clone(), find]),
            Err(ProgramError::StackShape(StackFault::FinalDepth(2)))
        );
        assert_eq!(Program::new(vec![]), Err(ProgramError::EmptyProgram));
    }

    #[test]
    fn kqa_pro_structured_form() {
        let json = r#"[
            {"function": "Find", "dependencies": [], "inputs": ["Quincy"]},
            {"function": "Find", "dependencies": [], "inputs": ["Massachusetts"]},
            {"function": "QueryRelation", "dependencies": [0, 1], "inputs": []}
        ]"#;
        let p = Program::from_json_str(json).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(
            print_program(&p),
            "Find <arg> Quincy <func> Find <arg> Massachusetts <func> QueryRelation"
        );

        let bad = r#"[
            {"function": "Find", "dependencies": [], "inputs": ["a"]},
            {"function": "Find", "dependencies": [], "inputs": ["b"]},
            {"function": "QueryRelation", "dependencies": [1, 0], "inputs": []}
        ]"#;
        assert!(matches!(
            Program::from_json_str(bad),
            Err(ProgramError::Dependencies { step: 2, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let p = parse_program("FindAll <func> FilterStr <arg> nick name <arg> City of Presidents")
            .unwrap();
        let again = Program::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(p, again);
        let via_serde: Program = serde_json::from_value(serde_json::to_value(&p).unwrap()).unwrap();
        assert_eq!(p, via_serde);
    }
}
