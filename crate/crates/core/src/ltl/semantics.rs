//! Direct evaluation of formulas on ultimately periodic words.
//!
//! Positions of `prefix · cycle^ω` are folded onto the `prefix.len() +
//! cycle.len()` distinct suffixes. Until is the least fixpoint and always the
//! greatest fixpoint of its one-step unfolding over that finite successor graph.

use super::{Formula, Letter, LtlError};

struct Lasso<'a> {
    word: Vec<&'a Letter>,
    loop_start: usize,
}

impl Lasso<'_> {
    fn next(&self, i: usize) -> usize {
        if i + 1 < self.word.len() {
            i + 1
        } else {
            self.loop_start
        }
    }

    fn eval(&self, f: &Formula) -> Vec<bool> {
        let n = self.word.len();
        match f {
            Formula::True => vec![true; n],
            Formula::Atom(s) => self.word.iter().map(|l| l.contains(s)).collect(),
            Formula::NegAtom(s) => self.word.iter().map(|l| !l.contains(s)).collect(),
            Formula::And(a, b) => zip(self.eval(a), self.eval(b), |x, y| x && y),
            Formula::Or(a, b) => zip(self.eval(a), self.eval(b), |x, y| x || y),
            Formula::Until(a, b) => self.until(&self.eval(a), &self.eval(b)),
            Formula::Eventually(a) => self.until(&vec![true; n], &self.eval(a)),
            Formula::Always(a) => {
                let a = self.eval(a);
                let mut x = vec![true; n];
                loop {
                    let y: Vec<bool> = (0..n).map(|i| a[i] && x[self.next(i)]).collect();
                    if y == x {
                        return x;
                    }
                    x = y;
                }
            }
        }
    }

    fn until(&self, a: &[bool], b: &[bool]) -> Vec<bool> {
        let n = self.word.len();
        let mut x = vec![false; n];
        loop {
            let y: Vec<bool> = (0..n).map(|i| b[i] || (a[i] && x[self.next(i)])).collect();
            if y == x {
                return x;
            }
            x = y;
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// Does `prefix · cycle^ω` satisfy `formula`?
pub fn eval_ltl_on_lasso(formula: &Formula, prefix: &[Letter], cycle: &[Letter]) -> Result<bool, LtlError> {
    if cycle.is_empty() {
        return Err(LtlError::EmptyCycle);
    }
    let lasso = Lasso {
        word: prefix.iter().chain(cycle).collect(),
        loop_start: prefix.len(),
    };
    Ok(lasso.eval(formula)[0])
}
