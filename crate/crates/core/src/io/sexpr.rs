//! Minimal s-expression reader for the preference-subset importer.

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Symbol(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sexp {
    pub node: Node,
    pub line: usize,
    pub column: usize,
}

impl Sexp {
    pub fn symbol(&self) -> Option<&str> {
        match &self.node {
            Node::Symbol(s) => Some(s),
            Node::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match &self.node {
            Node::List(items) => Some(items),
            Node::Symbol(_) => None,
        }
    }

    /// The leading symbol of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::symbol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Reads every top-level expression. Symbols are lowercased; `;` starts a comment.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, ReadError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 0);
    while let Some(c) = chars.next() {
        column += 1;
        match c {
            '\n' => {
                line += 1;
                column = 0;
            }
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '(' => stack.push((Vec::new(), line, column)),
            ')' => {
                let (items, l, col) = stack.pop().ok_or(ReadError {
                    line,
                    column,
                    message: "unbalanced `)`".into(),
                })?;
                let sexp = Sexp {
                    node: Node::List(items),
                    line: l,
                    column: col,
                };
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(sexp),
                    None => top.push(sexp),
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let (l, col) = (line, column);
                let mut sym = c.to_lowercase().to_string();
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    sym.extend(n.to_lowercase());
                    chars.next();
                    column += 1;
                }
                let sexp = Sexp {
                    node: Node::Symbol(sym),
                    line: l,
                    column: col,
                };
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(sexp),
                    None => top.push(sexp),
                }
            }
        }
    }
    if let Some((_, l, col)) = stack.pop() {
        return Err(ReadError {
            line: l,
            column: col,
            message: "unclosed `(`".into(),
        });
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_with_comments() {
        let all = read_all("; header\n(define (Domain X) ; trailing\n  (:requirements :strips))").unwrap();
        assert_eq!(all.len(), 1);
        let items = all[0].list().unwrap();
        assert_eq!(items[0].symbol(), Some("define"));
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[1].list().unwrap()[1].symbol(), Some("x"));
        assert_eq!(items[2].line, 3);
    }

    #[test]
    fn unbalanced_input_is_located() {
        let e = read_all("(a (b)\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = read_all("(a))").unwrap_err();
        assert_eq!(e.column, 4);
    }
}
