//! Command-line frontend: the instance document format, the inline text
//! grammar and the subcommands. See `docs/cli.md` for the grammar and schema.

pub mod cli;
pub mod doc;
pub mod text;
