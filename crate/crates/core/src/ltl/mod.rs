//! LTL formulas in negation normal form, their Büchi automata, and lasso-word
//! acceptance.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::gridworld::{LabelSet, Symbol};

mod buchi;
mod guard;
mod parser;
mod semantics;

pub use buchi::{accepts_lasso, to_buchi, BuchiAutomaton, BuchiDocument, BuchiEdge, BuchiEdgeDocument};
pub use guard::{Conjunction, Guard};
pub use parser::{parse_ltl, parse_ltl_with_alphabet};
pub use semantics::eval_ltl_on_lasso;

/// A finite word position: the set of propositions that hold.
pub type Letter = LabelSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("negation applied to a non-atomic formula at column {column}")]
    NegatedNonAtom { column: usize },
    #[error("undeclared atom {name:?} at column {column}")]
    UndeclaredAtom { name: String, column: usize },
    #[error("lasso cycle must be non-empty")]
    EmptyCycle,
}

/// Syntax tree: true, atoms, negated atoms, disjunction, conjunction, until,
/// eventually and always.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    Atom(Symbol),
    NegAtom(Symbol),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(Symbol::new(name).expect("valid atom name"))
    }

    pub fn neg_atom(name: &str) -> Formula {
        Formula::NegAtom(Symbol::new(name).expect("valid atom name"))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(a: Formula) -> Formula {
        Formula::Eventually(Box::new(a))
    }

    pub fn always(a: Formula) -> Formula {
        Formula::Always(Box::new(a))
    }

    /// Number of syntax-tree nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) | Formula::NegAtom(_) => 1,
            Formula::Eventually(a) | Formula::Always(a) => 1 + a.size(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Formula::True => {}
            Formula::Atom(s) | Formula::NegAtom(s) => {
                out.insert(s.clone());
            }
            Formula::Eventually(a) | Formula::Always(a) => a.collect_atoms(out),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            Formula::Eventually(_) | Formula::Always(_) => 4,
            Formula::True | Formula::Atom(_) | Formula::NegAtom(_) => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(s) => write!(f, "{s}"),
            Formula::NegAtom(s) => write!(f, "!{s}"),
            Formula::Eventually(a) => {
                f.write_str("F ")?;
                a.fmt_at(f, 4)
            }
            Formula::Always(a) => {
                f.write_str("G ")?;
                a.fmt_at(f, 4)
            }
            // & and | parse left-associative, U right-associative
            Formula::Or(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" | ")?;
                b.fmt_at(f, 2)
            }
            Formula::And(a, b) => {
                a.fmt_at(f, 2)?;
                f.write_str(" & ")?;
                b.fmt_at(f, 3)
            }
            Formula::Until(a, b) => {
                a.fmt_at(f, 4)?;
                f.write_str(" U ")?;
                b.fmt_at(f, 3)
            }
        }
    }
}

/// Prints in the surface syntax accepted by [`parse_ltl`] with minimal parentheses.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}
