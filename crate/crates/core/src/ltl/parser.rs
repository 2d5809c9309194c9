//! Recursive-descent parser for the surface syntax.
//!
//! ```text
//! or    := and ('|' and)*
//! and   := until ('&' until)*
//! until := unary ('U' until)?
//! unary := 'F' unary | 'G' unary | '!' atom | primary
//! primary := 'true' | ident | '(' or ')'
//! ```

use std::collections::BTreeSet;

use super::{Formula, LtlError};
use crate::gridworld::Symbol;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    F,
    G,
    U,
    And,
    Or,
    Not,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '&' => Tok::And,
            '|' => Tok::Or,
            '!' => Tok::Not,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "F" => Tok::F,
                    "G" => Tok::G,
                    "U" => Tok::U,
                    "true" => Tok::True,
                    "X" => {
                        return Err(LtlError::Syntax {
                            column,
                            message: "the next operator X is not supported".into(),
                        })
                    }
                    _ => Tok::Ident(word),
                };
                out.push((tok, column));
                continue;
            }
            other => {
                return Err(LtlError::Syntax {
                    column,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        out.push((tok, column));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_column: usize,
    alphabet: Option<&'a BTreeSet<Symbol>>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LtlError> {
        Err(LtlError::Syntax {
            column: self.column(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::U) {
            self.bump();
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek() {
            Some(Tok::F) => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Some(Tok::G) => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Some(Tok::Not) => {
                let column = self.column();
                self.bump();
                match self.peek() {
                    Some(Tok::Ident(_)) => {
                        let Some(Tok::Ident(name)) = self.bump() else { unreachable!() };
                        Ok(Formula::NegAtom(self.symbol(name, column + 1)?))
                    }
                    None => self.error("expected an atom after '!'"),
                    Some(_) => Err(LtlError::NegatedNonAtom { column }),
                }
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, LtlError> {
        let column = self.column();
        match self.bump() {
            Some(Tok::True) => Ok(Formula::True),
            Some(Tok::Ident(name)) => Ok(Formula::Atom(self.symbol(name, column)?)),
            Some(Tok::LParen) => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.error("expected ')'");
                }
                self.bump();
                Ok(inner)
            }
            Some(t) => {
                self.pos -= 1;
                self.error(format!("unexpected token {t:?}"))
            }
            None => self.error("unexpected end of formula"),
        }
    }

    fn symbol(&self, name: String, column: usize) -> Result<Symbol, LtlError> {
        let sym = Symbol::new(&name).map_err(|e| LtlError::Syntax {
            column,
            message: e.to_string(),
        })?;
        if let Some(alphabet) = self.alphabet {
            if !alphabet.contains(&sym) {
                return Err(LtlError::UndeclaredAtom { name, column });
            }
        }
        Ok(sym)
    }
}

fn parse(text: &str, alphabet: Option<&BTreeSet<Symbol>>) -> Result<Formula, LtlError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_column: text.chars().count() + 1,
        alphabet,
    };
    let f = p.or()?;
    if p.peek().is_some() {
        return p.error("trailing input");
    }
    Ok(f)
}

/// Parses a formula without restricting its atoms.
pub fn parse_ltl(text: &str) -> Result<Formula, LtlError> {
    parse(text, None)
}

/// Parses a formula whose atoms must all belong to `alphabet`.
pub fn parse_ltl_with_alphabet(text: &str, alphabet: &BTreeSet<Symbol>) -> Result<Formula, LtlError> {
    parse(text, Some(alphabet))
}
