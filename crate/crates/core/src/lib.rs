//! Social-history (SDOH) event extraction toolkit.
//!
//! Reads and writes brat standoff corpora, scores predicted events against
//! gold with per-target trigger/argument counting, and provides two
//! extraction systems: independent sentence classification plus per-target
//! CRF tagging (`s1`), and joint CRF phrase detection linked by pattern
//! rules (`s3`). A table codec converts events to and from the prompt/table
//! text used by generative extractors.

pub mod brat;
pub mod bundle;
pub mod codec;
pub mod crf;
pub mod events;
pub mod findings;
pub mod linear;
pub mod persist;
pub mod s1;
pub mod s3;
pub mod schema;
pub mod scorer;
pub mod span;
pub mod synth;
pub mod systems;
pub mod textproc;

pub use brat::{AnnotatedDocument, TextDocument};
pub use events::SdohEvent;
pub use findings::{Finding, Severity};
pub use schema::{Schema, Target};
pub use span::{Mention, Span};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
