//! Exit codes and the one-line failure record written to stderr:
//!
//! ```text
//! rrcnn-error code=<n> kind=<kind>: <message>
//! ```
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | usage or configuration error, missing input |
//! | 2 | data or format error |
//! | 3 | numerical failure (divergence, gradient check breach) |

use rrcnn_core::Error;

pub const SUCCESS: i32 = 0;
pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERICAL: i32 = 3;

/// Exit code and short kind for a library error.
pub fn classify(err: &Error) -> (i32, &'static str) {
    match err {
        Error::Config(_) => (USAGE, "config"),
        Error::Io { .. } => (DATA, "io"),
        Error::Format { .. } => (DATA, "format"),
        Error::Dimension { .. } => (DATA, "dimension"),
        Error::InvalidArgument { .. } => (DATA, "invalid-argument"),
        Error::MissingTile { .. } => (DATA, "missing-tile"),
        Error::EmptyLossSupport => (DATA, "empty-loss-support"),
        Error::NoForwardCache(_) => (DATA, "internal"),
        Error::Diverged { .. } => (NUMERICAL, "diverged"),
        Error::GradCheck { .. } => (NUMERICAL, "gradcheck"),
    }
}

/// The stderr record; newlines in the message are flattened so it stays on
/// one line.
pub fn reason_line(code: i32, kind: &str, message: &str) -> String {
    let flat: String = message.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("rrcnn-error code={code} kind={kind}: {flat}")
}
