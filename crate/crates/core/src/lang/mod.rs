//! Concrete syntax, resolution, static checks and structural functions.

pub mod ast;
pub mod check;
pub mod lexer;
pub mod parser;
pub mod print;
pub mod sets;

pub use ast::{ChorAst, ComponentDecl, GuardedSend, Program, Receive, SystemDecl, VarDecl};
pub use check::check_well_formed;
pub use parser::{parse, parse_guarded_update, parse_qualified_expr, parse_split, parse_value};
pub use print::{print_expr, print_program, print_term, print_update};
pub use sets::{end_set, participants, start_set};
