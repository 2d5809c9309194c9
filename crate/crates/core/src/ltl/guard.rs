//! Edge guards as disjunctions of literal conjunctions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::LtlError;
use crate::gridworld::{LabelSet, Symbol};

/// Literal conjunction: symbol -> required polarity. The empty map is `true`.
pub type Conjunction = BTreeMap<Symbol, bool>;

/// A guard in disjunctive normal form. No term is `false` and no term is
/// subsumed by another, so the representation of simple guards is canonical.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Guard {
    terms: BTreeSet<Conjunction>,
}

impl Guard {
    pub fn tt() -> Guard {
        Guard {
            terms: [Conjunction::new()].into(),
        }
    }

    pub fn ff() -> Guard {
        Guard::default()
    }

    pub fn literal(symbol: Symbol, positive: bool) -> Guard {
        Guard {
            terms: [[(symbol, positive)].into()].into(),
        }
    }

    pub fn from_conjunction(conj: Conjunction) -> Guard {
        Guard {
            terms: [conj].into(),
        }
    }

    pub fn terms(&self) -> &BTreeSet<Conjunction> {
        &self.terms
    }

    pub fn is_true(&self) -> bool {
        self.terms.contains(&Conjunction::new())
    }

    pub fn is_false(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn atoms(&self) -> BTreeSet<Symbol> {
        self.terms
            .iter()
            .flat_map(|t| t.keys().cloned())
            .collect()
    }

    pub fn satisfied_by(&self, letter: &LabelSet) -> bool {
        self.terms
            .iter()
            .any(|t| t.iter().all(|(s, &pos)| letter.contains(s) == pos))
    }

    pub fn or(&self, other: &Guard) -> Guard {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Guard::simplified(terms)
    }

    pub fn and(&self, other: &Guard) -> Guard {
        let mut terms = BTreeSet::new();
        for a in &self.terms {
            'pair: for b in &other.terms {
                let mut merged = a.clone();
                for (s, &pos) in b {
                    if let Some(&prev) = merged.get(s) {
                        if prev != pos {
                            continue 'pair;
                        }
                    }
                    merged.insert(s.clone(), pos);
                }
                terms.insert(merged);
            }
        }
        Guard::simplified(terms)
    }

    // Absorption plus merging of terms that differ in the polarity of one
    // literal, repeated to a fixpoint.
    fn simplified(mut terms: BTreeSet<Conjunction>) -> Guard {
        loop {
            let list: Vec<&Conjunction> = terms.iter().collect();
            let mut merged = None;
            'search: for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    if !a.keys().eq(b.keys()) {
                        continue;
                    }
                    let mut differing = a.iter().filter(|(s, p)| b.get(*s) != Some(*p));
                    if let (Some((s, _)), None) = (differing.next(), differing.next()) {
                        let mut m = (*a).clone();
                        m.remove(s);
                        merged = Some(((*a).clone(), (*b).clone(), m));
                        break 'search;
                    }
                }
            }
            match merged {
                Some((a, b, m)) => {
                    terms.remove(&a);
                    terms.remove(&b);
                    terms.insert(m);
                }
                None => break,
            }
        }
        let subsumed: Vec<Conjunction> = terms
            .iter()
            .filter(|t| {
                terms
                    .iter()
                    .any(|u| u.len() < t.len() && u.iter().all(|(s, p)| t.get(s) == Some(p)))
            })
            .cloned()
            .collect();
        for t in subsumed {
            terms.remove(&t);
        }
        Guard { terms }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return f.write_str("false");
        }
        if self.is_true() {
            return f.write_str("true");
        }
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            for (j, (s, pos)) in term.iter().enumerate() {
                if j > 0 {
                    f.write_str(" & ")?;
                }
                if !pos {
                    f.write_str("!")?;
                }
                write!(f, "{s}")?;
            }
        }
        Ok(())
    }
}

/// Parses the DNF string produced by `Display`.
impl FromStr for Guard {
    type Err = LtlError;

    fn from_str(text: &str) -> Result<Guard, LtlError> {
        let bad = |message: String| LtlError::Syntax { column: 1, message };
        match text.trim() {
            "true" => return Ok(Guard::tt()),
            "false" => return Ok(Guard::ff()),
            _ => {}
        }
        let mut out = Guard::ff();
        for term in text.split('|') {
            let mut conj = Guard::tt();
            for lit in term.split('&') {
                let lit = lit.trim();
                let (name, pos) = match lit.strip_prefix('!') {
                    Some(rest) => (rest.trim(), false),
                    None => (lit, true),
                };
                let sym = Symbol::new(name).map_err(|e| bad(format!("bad literal {lit:?}: {e}")))?;
                conj = conj.and(&Guard::literal(sym, pos));
            }
            out = out.or(&conj);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(name: &str, pos: bool) -> Guard {
        Guard::literal(Symbol::new(name).unwrap(), pos)
    }

    fn letter(names: &[&str]) -> LabelSet {
        names.iter().map(|n| Symbol::new(n).unwrap()).collect()
    }

    #[test]
    fn complementary_terms_collapse() {
        assert_eq!(lit("a", true).or(&lit("a", false)), Guard::tt());
        let ab = lit("a", true).and(&lit("b", true));
        let anb = lit("a", true).and(&lit("b", false));
        assert_eq!(ab.or(&anb), lit("a", true));
    }

    #[test]
    fn contradiction_is_false() {
        assert!(lit("a", true).and(&lit("a", false)).is_false());
    }

    #[test]
    fn absorption() {
        let a = lit("a", true);
        let ab = a.and(&lit("b", true));
        assert_eq!(a.or(&ab), a);
    }

    #[test]
    fn display_and_parse() {
        let g = lit("b", true)
            .and(&lit("square", false))
            .or(&lit("p", true));
        assert_eq!(g.to_string(), "b & !square | p");
        assert_eq!(g.to_string().parse::<Guard>().unwrap(), g);
        assert_eq!("true".parse::<Guard>().unwrap(), Guard::tt());
        assert_eq!("false".parse::<Guard>().unwrap(), Guard::ff());
    }

    #[test]
    fn evaluation() {
        let g = lit("b", true).and(&lit("square", false));
        assert!(g.satisfied_by(&letter(&["b"])));
        assert!(!g.satisfied_by(&letter(&["b", "square"])));
        assert!(!g.satisfied_by(&letter(&[])));
        assert!(Guard::tt().satisfied_by(&letter(&[])));
        assert!(!Guard::ff().satisfied_by(&letter(&["b"])));
    }
}
