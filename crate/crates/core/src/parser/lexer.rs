use super::Pos;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Punctuation and operators, stored verbatim.
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// True when no whitespace separates this token from the previous one.
    pub glued: bool,
}

const SYMBOLS: &[&str] = &[
    "->", "..", ":=", "==", "!=", "<=", ">=", "&&", "||", "[]", "{", "}", "(", ")", "[", "]", ";", ":", ",", ".",
    "=", "<", ">", "!", "?", "+", "-", "*", "/",
];

pub fn lex(src: &str) -> Result<Vec<Token>, (Pos, String)> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut glued = false;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            glued = false;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            glued = false;
            continue;
        }
        if src[i..].starts_with("//") || c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            glued = false;
            continue;
        }
        let pos = Pos { line, col };
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let v = text.parse::<i64>().map_err(|_| (pos, format!("integer literal `{text}` out of range")))?;
            out.push(Token { tok: Tok::Int(v), pos, glued });
            col += i - start;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), pos, glued });
            col += i - start;
        } else {
            // `[]` is only a token directly after `A`; elsewhere it is two brackets.
            let sym = SYMBOLS
                .iter()
                .find(|s| src[i..].starts_with(**s) && (**s != "[]" || matches!(out.last(), Some(Token { tok: Tok::Ident(a), .. }) if a == "A")))
                .ok_or_else(|| (pos, format!("unexpected character `{}`", src[i..].chars().next().unwrap_or('?'))))?;
            out.push(Token { tok: Tok::Sym(sym), pos, glued });
            i += sym.len();
            col += sym.len();
        }
        glued = true;
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col }, glued: false });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_symbols() {
        let toks = lex("var x: int[0..15] = 0;\n  x := x->y").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("var".into()));
        assert!(toks.iter().any(|t| t.tok == Tok::Sym("..")));
        let assign = toks.iter().find(|t| t.tok == Tok::Sym(":=")).unwrap();
        assert_eq!(assign.pos, Pos { line: 2, col: 5 });
    }

    #[test]
    fn time_literal_is_glued() {
        let toks = lex("after 5s").unwrap();
        assert_eq!(toks[1].tok, Tok::Int(5));
        assert_eq!(toks[2].tok, Tok::Ident("s".into()));
        assert!(toks[2].glued);
    }

    #[test]
    fn comments_skipped() {
        let toks = lex("// hello\n# also\nx").unwrap();
        assert_eq!(toks.len(), 2);
    }
}
