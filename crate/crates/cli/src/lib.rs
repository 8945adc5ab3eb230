//! Library half of the `mcfod` command-line tool: experiment harness,
//! solver discovery, and the small amount of shared plumbing the
//! subcommands need.  Kept as a library so integration tests (and other
//! tools) can drive batch runs without spawning the binary.

pub mod experiment;
pub mod solver;

use mcfod_core::model::Variant;

/// Parses a variant name as used on the command line and in experiment
/// specs.  Accepts the canonical names plus the common shorthands.
pub fn parse_variant(text: &str) -> Result<Variant, String> {
    match text.to_ascii_uppercase().replace('-', "_").as_str() {
        "FREE" => Ok(Variant::Free),
        "FIXED_OPTIMISTIC" | "OPTIMISTIC" => Ok(Variant::FixedOptimistic),
        "FIXED_RELAXED" | "RELAXED" => Ok(Variant::FixedRelaxed),
        other => Err(format!(
            "unknown variant {other:?}; expected FREE, FIXED_OPTIMISTIC or FIXED_RELAXED"
        )),
    }
}
