use std::fmt;

use seasonality_core::Error;

/// Error category reported on the command line, one per exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Input,
    Schema,
    Numeric,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Input => 2,
            Category::Schema => 3,
            Category::Numeric => 4,
            Category::Internal => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Schema => "schema",
            Category::Numeric => "numeric",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(Category::Input, message)
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl fmt::Display for CliError {
    /// `error[<category>]: <message>` on a single line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {flat}", self.category.name())
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let category = match &e {
            Error::Parse { .. }
            | Error::Completeness { .. }
            | Error::Duplicate { .. }
            | Error::Domain(_)
            | Error::Invariant(_)
            | Error::Contract(_)
            | Error::Io(_)
            | Error::Csv(_) => Category::Input,
            Error::Schema(_) => Category::Schema,
            Error::InsufficientData { .. }
            | Error::Degenerate(_)
            | Error::DegenerateBinDays(_)
            | Error::ZeroDenominator { .. }
            | Error::Infeasible { .. }
            | Error::Unpairable(_) => Category::Numeric,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_map_to_exit_codes() {
        let e: CliError = Error::Schema("x".into()).into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = Error::ZeroDenominator { bin: 2 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: CliError = Error::Domain("x".into()).into();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn display_is_one_line() {
        let e = CliError::input("bad\nthing");
        assert_eq!(e.to_string(), "error[input]: bad thing");
    }
}
