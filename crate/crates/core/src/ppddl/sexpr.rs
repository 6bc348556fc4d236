//! S-expression reader with source positions.

use super::PpddlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Atom(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Atom(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Atom(..) => None,
        }
    }

    /// Head keyword of a list, if its first element is an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexpr::as_atom)
    }
}

pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> PpddlError {
    PpddlError::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

/// Reads every top-level expression. Atoms are lowercased; `;` starts a comment.
pub fn read_all(text: &str) -> Result<Vec<Sexpr>, PpddlError> {
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    let mut atom = String::new();
    let mut atom_pos = Pos { line: 1, col: 1 };

    fn flush(atom: &mut String, pos: Pos, stack: &mut [(Vec<Sexpr>, Pos)], out: &mut Vec<Sexpr>) {
        if atom.is_empty() {
            return;
        }
        let a = Sexpr::Atom(std::mem::take(atom).to_lowercase(), pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(a),
            None => out.push(a),
        }
    }

    while let Some(c) = chars.next() {
        if c == '\n' {
            flush(&mut atom, atom_pos, &mut stack, &mut out);
            line += 1;
            col = 0;
            continue;
        }
        col += 1;
        let here = Pos { line, col };
        match c {
            ';' => {
                flush(&mut atom, atom_pos, &mut stack, &mut out);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                flush(&mut atom, atom_pos, &mut stack, &mut out);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut atom, atom_pos, &mut stack, &mut out);
                let (items, p) = stack.pop().ok_or_else(|| syntax(here, "unbalanced ')'"))?;
                let l = Sexpr::List(items, p);
                match stack.last_mut() {
                    Some((items, _)) => items.push(l),
                    None => out.push(l),
                }
            }
            c if c.is_whitespace() => flush(&mut atom, atom_pos, &mut stack, &mut out),
            c => {
                if atom.is_empty() {
                    atom_pos = here;
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_pos, &mut stack, &mut out);
    if let Some((_, p)) = stack.last() {
        return Err(syntax(*p, "unclosed '('"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let e = read_all("(a (B c)\n ; note\n d)").unwrap();
        assert_eq!(e.len(), 1);
        let l = e[0].as_list().unwrap();
        assert_eq!(l[0].as_atom(), Some("a"));
        assert_eq!(l[1].head(), Some("b"));
        assert_eq!(l[2].pos(), Pos { line: 3, col: 2 });
    }

    #[test]
    fn unbalanced_reports_position() {
        match read_all("(a\n  (b)") {
            Err(PpddlError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 1)),
            other => panic!("{other:?}"),
        }
        match read_all("a)\n") {
            Err(PpddlError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 2)),
            other => panic!("{other:?}"),
        }
    }
}
