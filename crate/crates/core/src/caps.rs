use serde::{Deserialize, Serialize};

/// Resource caps for the exponential-core operations.
///
/// Every solver and the synthesis oracle check their inputs against these
/// caps and refuse (with [`crate::Error::CapExceeded`], naming the cap)
/// rather than start a search that cannot finish. All caps can be raised by
/// the caller; the defaults are sized so that the stock test corpora run in
/// seconds. Caps apply to the *inputs* of an operation — positions produced
/// internally during a solve may grow past them (growth is bounded by the
/// round or size budget).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Largest structure domain accepted by the game solvers.
    pub max_domain: usize,
    /// Most contexts per class in the class and weak games.
    pub max_class_contexts: usize,
    /// Largest size budget for the formula-size games and the oracle.
    pub max_budget: usize,
    /// Most rounds for the comparison game and depth for type partitions.
    pub max_rounds: usize,
    /// Most cells a type-partition stratum may have before union
    /// enumeration for non-cardinality quantifiers is refused.
    pub max_type_cells: usize,
    /// Fresh variables available to the synthesis oracle.
    pub fresh_vars: usize,
    /// Most repetition-respecting tuples per quantifier component in a game
    /// move (set moves enumerate subsets of this universe).
    pub max_tuple_universe: usize,
    /// Most extended contexts the oracle will evaluate formulas on.
    pub max_family: usize,
    /// Most distinct truth tables a single synthesis run may retain.
    pub max_synth_entries: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_domain: 4,
            max_class_contexts: 4,
            max_budget: 8,
            max_rounds: 6,
            max_type_cells: 16,
            fresh_vars: 2,
            max_tuple_universe: 12,
            max_family: 64,
            max_synth_entries: 200_000,
        }
    }
}

impl Caps {
    pub(crate) fn check(&self, cap: &str, limit: usize, actual: usize) -> crate::Result<()> {
        if actual > limit {
            Err(crate::Error::cap(cap, limit, actual))
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_domain(&self, domain: usize) -> crate::Result<()> {
        self.check("max-domain", self.max_domain, domain)
    }
}
