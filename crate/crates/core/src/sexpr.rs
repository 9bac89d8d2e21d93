//! Minimal s-expression reader shared by the spec parser and the solver
//! model reader.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Line/column of the first character of a token, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }

    /// Head symbol of a non-empty list whose first element is an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexp::as_atom)
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s, _) => f.write_str(s),
            Sexp::List(items, _) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReadError {
    #[error("{0}: unbalanced ')'")]
    UnexpectedClose(Pos),
    #[error("{0}: unclosed '('")]
    Unclosed(Pos),
    #[error("{0}: unterminated quoted symbol")]
    UnterminatedQuote(Pos),
}

impl ReadError {
    pub fn pos(&self) -> Pos {
        match self {
            ReadError::UnexpectedClose(p) | ReadError::Unclosed(p) | ReadError::UnterminatedQuote(p) => *p,
        }
    }
}

/// Reads every top-level s-expression in `text`. `;` starts a line comment.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, ReadError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();

    let push = |stack: &mut Vec<(Vec<Sexp>, Pos)>, top: &mut Vec<Sexp>, s: Sexp| match stack.last_mut() {
        Some((items, _)) => items.push(s),
        None => top.push(s),
    };

    while let Some(c) = chars.next() {
        let here = Pos { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
                continue;
            }
            c if c.is_whitespace() => {}
            '(' => stack.push((Vec::new(), here)),
            ')' => {
                let (items, p) = stack.pop().ok_or(ReadError::UnexpectedClose(here))?;
                push(&mut stack, &mut top, Sexp::List(items, p));
            }
            '|' => {
                let mut s = String::from("|");
                let mut closed = false;
                for c in chars.by_ref() {
                    col += 1;
                    if c == '\n' {
                        line += 1;
                        col = 1;
                    }
                    s.push(c);
                    if c == '|' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(ReadError::UnterminatedQuote(here));
                }
                push(&mut stack, &mut top, Sexp::Atom(s, here));
            }
            _ => {
                let mut s = c.to_string();
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                    col += 1;
                }
                push(&mut stack, &mut top, Sexp::Atom(s, here));
            }
        }
        col += 1;
    }
    if let Some((_, p)) = stack.pop() {
        return Err(ReadError::Unclosed(p));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let v = read_all("(a (b c)\n  d) ; trailing\n(e)").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].to_string(), "(a (b c) d)");
        let inner = &v[0].as_list().unwrap()[2];
        assert_eq!(inner.pos(), Pos { line: 2, col: 3 });
        assert_eq!(v[1].pos(), Pos { line: 3, col: 1 });
    }

    #[test]
    fn reports_unbalanced_input() {
        assert!(matches!(read_all("(a"), Err(ReadError::Unclosed(_))));
        assert!(matches!(read_all("a)"), Err(ReadError::UnexpectedClose(_))));
    }

    #[test]
    fn quoted_symbols_are_single_atoms() {
        let v = read_all("(|a b| c)").unwrap();
        assert_eq!(v[0].as_list().unwrap()[0].as_atom(), Some("|a b|"));
    }
}
