use super::ast::{Formula, PredicateRef, PredicateRegistry};
use crate::error::{Error, Result};

/// Recursive-descent parser for the concrete specification syntax.
///
/// ```text
/// formula  := or ('->' formula)?
/// or       := and ('|' and)*
/// and      := until ('&' until)*
/// until    := unary ('U' '[' int ',' int ']' unary)*
/// unary    := '!' unary | 'X' unary
///           | 'F' '[' int ',' int ']' unary | 'G' '[' int ',' int ']' unary
///           | atom
/// atom     := 'true' | 'false' | '(' formula ')'
///           | ('reach'|'avoid'|'stay') '<' int ',' int ',' pred '>'
///           | pred
/// pred     := 'ball' '(' num ',' num ',' num ')'
///           | 'box' '(' num ',' num ',' num ',' num ')'
///           | 'obs' '(' ')'
///           | 'around' '(' num ',' num ',' num ')'
///           | 'behind' '(' int ',' num ')'
///           | ident                      -- registry lookup
/// ```
pub fn parse_formula(text: &str, registry: &PredicateRegistry) -> Result<Formula> {
    let mut p = Parser::new(text, registry);
    let f = p.formula()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    registry: &'a PredicateRegistry,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, registry: &'a PredicateRegistry) -> Self {
        Parser { src: text.as_bytes(), pos: 0, registry }
    }

    fn line_col(&self) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &b in &self.src[..self.pos] {
            if b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.line_col();
        Error::Syntax { line, col, msg: msg.into() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", b as char)))
        }
    }

    fn try_eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Peek an identifier without consuming it.
    fn peek_ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.src.len()
            && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
        {
            end += 1;
        }
        if end > start && self.src[start].is_ascii_alphabetic() {
            Some(std::str::from_utf8(&self.src[start..end]).unwrap())
        } else {
            None
        }
    }

    fn eat_ident(&mut self) -> Result<&'a str> {
        match self.peek_ident() {
            Some(id) => {
                self.pos += id.len();
                Ok(id)
            }
            None => Err(self.err("expected identifier")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || self.src[self.pos] == b'e'
                || self.src[self.pos] == b'E'
                || (self.pos > start
                    && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+')
                    && matches!(self.src[self.pos - 1], b'e' | b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.err("expected number")
        })
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<usize>().map_err(|_| {
            self.pos = start;
            self.err("expected integer")
        })
    }

    /// `[a,b]` with the interval invariant a <= b.
    fn interval(&mut self) -> Result<(usize, usize)> {
        self.eat(b'[')?;
        let a = self.integer()?;
        self.eat(b',')?;
        let b = self.integer()?;
        self.eat(b']')?;
        if b < a {
            return Err(Error::MalformedInterval { a, b });
        }
        Ok((a, b))
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        self.skip_ws();
        if self.src[self.pos..].starts_with(b"->") {
            self.pos += 2;
            let rhs = self.formula()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.try_eat(b'|') {
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.until()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            let rhs = self.until()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.peek_ident() == Some("U") {
            self.pos += 1;
            let (a, b) = self.interval()?;
            let rhs = self.unary()?;
            lhs = Formula::Until { a, b, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.try_eat(b'!') {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        match self.peek_ident() {
            Some("X") => {
                self.pos += 1;
                Ok(Formula::Next(Box::new(self.unary()?)))
            }
            Some("F") => {
                self.pos += 1;
                let (a, b) = self.interval()?;
                Ok(Formula::Eventually { a, b, child: Box::new(self.unary()?) })
            }
            Some("G") => {
                self.pos += 1;
                let (a, b) = self.interval()?;
                Ok(Formula::Globally { a, b, child: Box::new(self.unary()?) })
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let f = self.formula()?;
            self.eat(b')')?;
            return Ok(f);
        }
        let ident = match self.peek_ident() {
            Some(id) => id,
            None => return Err(self.err("expected formula")),
        };
        match ident {
            "true" => {
                self.pos += ident.len();
                Ok(Formula::True)
            }
            "false" => {
                self.pos += ident.len();
                Ok(Formula::False)
            }
            "reach" | "avoid" | "stay" => {
                self.pos += ident.len();
                self.eat(b'<')?;
                let t1 = self.integer()?;
                self.eat(b',')?;
                let t2 = self.integer()?;
                self.eat(b',')?;
                let pred = self.predicate()?;
                self.eat(b'>')?;
                if t2 < t1 {
                    return Err(Error::MalformedInterval { a: t1, b: t2 });
                }
                Ok(match ident {
                    "reach" => Formula::Reach { t1, t2, pred },
                    "avoid" => Formula::Avoid { t1, t2, pred },
                    _ => Formula::Stay { t1, t2, pred },
                })
            }
            _ => Ok(Formula::Pred(self.predicate()?)),
        }
    }

    fn predicate(&mut self) -> Result<PredicateRef> {
        let ident = self.eat_ident()?;
        match ident {
            "ball" => {
                self.eat(b'(')?;
                let cx = self.number()?;
                self.eat(b',')?;
                let cy = self.number()?;
                self.eat(b',')?;
                let r = self.number()?;
                self.eat(b')')?;
                Ok(PredicateRef::Ball { cx, cy, r })
            }
            "box" => {
                self.eat(b'(')?;
                let x0 = self.number()?;
                self.eat(b',')?;
                let y0 = self.number()?;
                self.eat(b',')?;
                let x1 = self.number()?;
                self.eat(b',')?;
                let y1 = self.number()?;
                self.eat(b')')?;
                Ok(PredicateRef::BoxRegion { x0, y0, x1, y1 })
            }
            "obs" => {
                self.eat(b'(')?;
                self.eat(b')')?;
                Ok(PredicateRef::Obs)
            }
            "around" => {
                self.eat(b'(')?;
                let x = self.number()?;
                self.eat(b',')?;
                let y = self.number()?;
                self.eat(b',')?;
                let r = self.number()?;
                self.eat(b')')?;
                Ok(PredicateRef::Around { x, y, r })
            }
            "behind" => {
                self.eat(b'(')?;
                let obj = self.integer()? as u32;
                self.eat(b',')?;
                let r = self.number()?;
                self.eat(b')')?;
                Ok(PredicateRef::Behind { obj, r })
            }
            name => match self.registry.lookup(name) {
                Some(p) => Ok(p.clone()),
                None => Err(Error::UnknownPredicate(name.to_string())),
            },
        }
    }
}
