//! First-order logic with generalized quantifiers over finite relational
//! structures.
//!
//! The crate provides:
//!
//! * [`structures`] — vocabularies, finite structures, assignments, contexts;
//! * [`quantifiers`] — generalized quantifiers (cardinality built-ins, the
//!   Härtig equicardinality quantifier, a Hamiltonian-path quantifier, and a
//!   small expression language for custom cardinality predicates) together
//!   with an isomorphism-invariance checker;
//! * [`formulas`] — the formula AST with a concrete syntax, evaluation, and
//!   extensions;
//! * [`types`] — joint depth-`d` type partitions of tuple universes, with
//!   defining formulas;
//! * [`ef_game`] — the Ehrenfeucht–Fraïssé-style comparison game with set
//!   moves and contestation;
//! * [`size_games`] — the class, pair, and weak formula-size games;
//! * [`oracle`] — exact bottom-up formula synthesis used to cross-validate
//!   the game solvers.

pub mod caps;
pub mod ef_game;
mod error;
pub mod formulas;
pub mod oracle;
pub mod quantifiers;
pub mod size_games;
pub mod structures;
pub mod types;

pub use caps::Caps;
pub use error::{Error, Result};
