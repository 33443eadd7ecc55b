use thiserror::Error;

/// Errors surfaced by configuration, protocol execution, adversary
/// strategies, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A participant presented classical data inconsistent with the protocol,
    /// e.g. a decoy announcement referencing non-decoy positions.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    /// An operation was attempted by a participant not scheduled for it.
    #[error("schedule violation: {0}")]
    ScheduleViolation(String),

    /// An operation was called in a session state that does not admit it.
    #[error("invalid session state: {0}")]
    InvalidState(String),

    /// An adversary strategy was asked to do something it has no access for.
    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario or grid file could not be parsed.
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
