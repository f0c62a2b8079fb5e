use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of failure codes the northbound interface may report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    AlreadyExist,
    ConnectionFailed,
    NotFound,
    InvalidRange,
    BlockingOccured,
    PathOperFailed,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 6] = [
        ErrorCode::AlreadyExist,
        ErrorCode::ConnectionFailed,
        ErrorCode::NotFound,
        ErrorCode::InvalidRange,
        ErrorCode::BlockingOccured,
        ErrorCode::PathOperFailed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::AlreadyExist => "AlreadyExist",
            ErrorCode::ConnectionFailed => "ConnectionFailed",
            ErrorCode::NotFound => "NotFound",
            ErrorCode::InvalidRange => "InvalidRange",
            ErrorCode::BlockingOccured => "BlockingOccured",
            ErrorCode::PathOperFailed => "PathOperFailed",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct NbiError {
    pub code: ErrorCode,
    pub message: String,
}

impl NbiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        NbiError {
            code,
            message: message.into(),
        }
    }

    pub fn already_exist(what: impl fmt::Display) -> Self {
        Self::new(ErrorCode::AlreadyExist, format!("{what} already exists"))
    }

    pub fn not_found(what: impl fmt::Display) -> Self {
        Self::new(ErrorCode::NotFound, format!("{what} does not exist"))
    }

    pub fn invalid_range(msg: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRange, msg)
    }

    pub fn blocking(msg: impl Into<String>) -> Self {
        Self::new(ErrorCode::BlockingOccured, msg)
    }

    pub fn path_oper_failed(msg: impl Into<String>) -> Self {
        Self::new(ErrorCode::PathOperFailed, msg)
    }

    pub fn connection_failed(msg: impl Into<String>) -> Self {
        Self::new(ErrorCode::ConnectionFailed, msg)
    }
}

pub type Result<T, E = NbiError> = std::result::Result<T, E>;
