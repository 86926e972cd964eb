use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An explicit refusal: the requested computation exceeds a configured budget.
    #[error("budget `{budget}` exceeded: requires {required}, limit is {limit}")]
    Budget {
        budget: &'static str,
        required: String,
        limit: String,
    },

    #[error("signature mismatch: {0}")]
    Signature(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// The scheme cannot be applied to this pair of parts (identification or
    /// set-membership of identified constants is inconsistent).
    #[error("scheme not applicable: {0}")]
    NotApplicable(String),

    #[error("unknown theory digest {0}")]
    UnknownDigest(String),

    #[error("unbound variable `{0}`")]
    Unbound(String),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn budget(budget: &'static str, required: impl ToString, limit: impl ToString) -> Self {
        Error::Budget {
            budget,
            required: required.to_string(),
            limit: limit.to_string(),
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
