use super::{Function, Program, ProgramError, ProgramStep, ARG_TOKEN, FUNC_TOKEN};

/// Parse the linearized form `f <arg> a <arg> b <func> g ...`.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    if text.trim().is_empty() {
        return Err(ProgramError::EmptyProgram);
    }
    let mut steps = Vec::new();
    for (i, segment) in text.split(FUNC_TOKEN).enumerate() {
        let mut fields = segment.split(ARG_TOKEN);
        let name = fields.next().unwrap_or_default().trim();
        let function: Function = name.parse().map_err(|_| ProgramError::UnknownFunction {
            step: i,
            name: name.to_string(),
        })?;
        let args = fields.map(|a| a.trim().to_string()).collect();
        steps.push(ProgramStep::checked(i, function, args)?);
    }
    Program::new(steps)
}

/// Canonical single-space linearization.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, step) in p.steps().iter().enumerate() {
        if i > 0 {
            out.push(' ');
            out.push_str(FUNC_TOKEN);
            out.push(' ');
        }
        write_step(&mut out, step);
    }
    out
}

pub(crate) fn write_step(out: &mut String, step: &ProgramStep) {
    out.push_str(step.function().name());
    for arg in step.arguments() {
        out.push(' ');
        out.push_str(ARG_TOKEN);
        out.push(' ');
        out.push_str(arg);
    }
}
