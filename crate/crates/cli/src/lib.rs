//! Scenario files, builtin scenarios and the task runner behind the
//! `filippov` binary.

pub mod builtins;
pub mod pipeline;
pub mod scenario;
