use std::fmt;

use realsub::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    InputData,
    ExternalService,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::InputData => 3,
            Category::ExternalService => 4,
            Category::Internal => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::InputData => "input-data",
            Category::ExternalService => "external-service",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub detail: String,
}

impl CliError {
    pub fn new(category: Category, detail: impl Into<String>) -> Self {
        Self {
            category,
            detail: detail.into(),
        }
    }

    pub fn config(detail: impl Into<String>) -> Self {
        Self::new(Category::Config, detail)
    }

    pub fn input(detail: impl Into<String>) -> Self {
        Self::new(Category::InputData, detail)
    }

    /// Prefixes the detail, e.g. with the file being processed.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.detail = format!("{what}: {}", self.detail);
        self
    }
}

/// `error[category]: detail`, flattened to one line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {}", self.category.as_str(), detail)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let category = match &e {
            Error::InvalidParameter(_) => Category::Config,
            Error::External { .. } => Category::ExternalService,
            Error::NanLoss { .. } => Category::Internal,
            Error::Io { .. }
            | Error::MalformedRecord { .. }
            | Error::InvalidUtf8 { .. }
            | Error::DuplicateId { .. }
            | Error::InvalidLabel { .. }
            | Error::BadMagic { .. }
            | Error::SizeMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::UnknownId(_)
            | Error::IdMismatch { .. }
            | Error::EmptyInput(_)
            | Error::InvalidData(_)
            | Error::DegenerateTrainingSet(_) => Category::InputData,
        };
        Self::new(category, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, CliError>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| e.into().context(what))
    }
}
