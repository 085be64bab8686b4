//! Parse, repair and execute KoPL programs over a small knowledge base, and
//! turn their execution traces into model-ready context strings.

pub mod align;
pub mod context;
pub mod dataset;
pub mod exec;
pub mod kb;
pub mod pipeline;
pub mod program;
pub mod text;
pub mod value;

pub use align::{AlignmentRecord, AlignmentReport};
pub use context::{ContextConfig, ContextRecord};
pub use dataset::{load_dataset, DatasetRecord};
pub use exec::{
    brute_force_execute, execute, execute_with, ExecOptions, ExecutionTrace, StepResult,
};
pub use kb::{KbError, KnowledgeBase};
pub use program::{parse_program, print_program, Function, Program, ProgramError};
