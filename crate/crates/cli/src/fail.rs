//! Structured errors and exit codes.

use gblab_core::Error;
use serde::Serialize;

pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_UNIMPLEMENTED: i32 = 5;

#[derive(Debug, Serialize)]
pub struct Failure {
    #[serde(skip)]
    pub exit: i32,
    pub code: String,
    pub message: String,
    pub argument: Option<String>,
}

impl Failure {
    pub fn invalid(argument: &str, message: impl Into<String>) -> Self {
        Failure {
            exit: EXIT_INVALID,
            code: "InvalidArgument".into(),
            message: message.into(),
            argument: Some(argument.into()),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Failure {
            exit: EXIT_INVALID,
            code: "Io".into(),
            message: format!("{}: {e}", path.display()),
            argument: None,
        }
    }

    /// Attaches an argument name when the library did not name one.
    pub fn about(mut self, argument: &str) -> Self {
        self.argument.get_or_insert_with(|| argument.to_string());
        self
    }

    pub fn emit(&self) {
        eprintln!(
            "{}",
            serde_json::to_string(self).expect("plain error object")
        );
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match e {
            Error::EnumerationCapExceeded { .. }
            | Error::SupportTooLarge { .. }
            | Error::DimensionCapExceeded { .. } => EXIT_CAP,
            Error::BudgetExhausted { .. } => EXIT_BUDGET,
            Error::UnimplementedStep => EXIT_UNIMPLEMENTED,
            _ => EXIT_INVALID,
        };
        let argument = match &e {
            Error::InvalidArgument { argument, .. } => Some(argument.clone()),
            Error::NotPrime(_) | Error::NoPrimeInRange { .. } => Some("p".into()),
            Error::DegenerateFrequencySet => Some("S".into()),
            _ => None,
        };
        Failure {
            exit,
            code: e.code().into(),
            message: e.to_string(),
            argument,
        }
    }
}

impl From<clap::Error> for Failure {
    fn from(e: clap::Error) -> Self {
        use clap::error::{ContextKind, ContextValue};
        let argument = e.get(ContextKind::InvalidArg).and_then(|v| match v {
            ContextValue::String(s) => Some(s.clone()),
            ContextValue::Strings(v) => Some(v.join(" ")),
            _ => None,
        });
        let rendered = e.render().to_string();
        let message = rendered
            .lines()
            .map(str::trim)
            .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
            .collect::<Vec<_>>()
            .join(" ");
        Failure {
            exit: EXIT_INVALID,
            code: "Usage".into(),
            message: message.trim_start_matches("error: ").to_string(),
            argument,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
