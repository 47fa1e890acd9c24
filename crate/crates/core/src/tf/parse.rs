//! Recursive-descent parser for factored transfer functions.
//!
//! ```text
//! tf       := [sign] prodpart [ "/" prodpart ]
//! prodpart := factor { ["*"] factor }
//! factor   := "(" content ")" | "s" [ "^" integer ] | decimal
//! content  := item { ["*"] item }
//! item     := "(" content ")" | poly
//! poly     := [sign] term { ("+" | "-") term }
//! term     := decimal [ ["*"] "s" [ "^" integer ] [ "/" decimal ] ]
//!           | "s" [ "^" integer ] [ "/" decimal ]
//! ```
//!
//! Whitespace is ignored. A lone `gain * prodpart` is just a prodpart whose
//! first factor is a number. Polynomials must have degree <= 2; a single
//! monomial such as `s^2` or `(3s)` is split into a constant and factors of `s`.

use super::{FactoredTF, TfError};
use crate::poly::RealPolynomial;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    S,
    Caret,
    Star,
    Slash,
    Plus,
    Minus,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::S => "'s'".into(),
            Tok::Caret => "'^'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, TfError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b's' => Tok::S,
            b'^' => Tok::Caret,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Exponent, only when followed by digits.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| TfError::Parse {
                    position: start,
                    expected: vec!["decimal number"],
                    found: format!("{lit:?}"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(TfError::Parse {
                    position: i,
                    expected: vec!["number", "'s'", "'('", "')'", "operator"],
                    found: format!("{ch:?}"),
                });
            }
        };
        out.push((tok, i));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

#[derive(Debug)]
enum Item {
    Const(f64),
    SPow(u32),
    Poly(RealPolynomial),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Tok {
        self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> Tok {
        self.toks[(self.pos + ahead).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<&'static str>) -> TfError {
        TfError::Parse {
            position: self.offset(),
            expected,
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), TfError> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(vec![name]))
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Tok::LParen | Tok::S | Tok::Num(_))
    }

    fn tf(&mut self) -> Result<FactoredTF, TfError> {
        let mut sign = 1.0;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = -1.0;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        let num = self.prodpart()?;
        let den = if self.peek() == Tok::Slash {
            self.bump();
            self.prodpart()?
        } else {
            Vec::new()
        };
        if self.peek() != Tok::End {
            let mut expected = vec!["'*'", "'('", "'s'", "end of input"];
            if den.is_empty() {
                expected.insert(0, "'/'");
            }
            return Err(self.error(expected));
        }

        let mut tf = FactoredTF::constant(sign);
        for item in num {
            match item {
                Item::Const(c) => tf.gain *= c,
                Item::SPow(k) => tf
                    .zero_factors
                    .extend((0..k).map(|_| RealPolynomial::new(vec![0.0, 1.0]))),
                Item::Poly(p) => tf.zero_factors.push(p),
            }
        }
        for item in den {
            match item {
                Item::Const(c) => tf.gain /= c,
                Item::SPow(k) => tf.integrator_order += k,
                Item::Poly(p) => tf.pole_factors.push(p),
            }
        }
        Ok(tf)
    }

    fn prodpart(&mut self) -> Result<Vec<Item>, TfError> {
        if !self.starts_factor() {
            return Err(self.error(vec!["number", "'s'", "'('"]));
        }
        let mut items = Vec::new();
        loop {
            items.extend(self.factor()?);
            if self.peek() == Tok::Star {
                self.bump();
                if !self.starts_factor() {
                    return Err(self.error(vec!["number", "'s'", "'('"]));
                }
            } else if !self.starts_factor() {
                break;
            }
        }
        Ok(items)
    }

    fn factor(&mut self) -> Result<Vec<Item>, TfError> {
        match self.peek() {
            Tok::LParen => {
                self.bump();
                let items = self.content()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(items)
            }
            Tok::S => {
                self.bump();
                Ok(vec![Item::SPow(self.power()?)])
            }
            Tok::Num(v) => {
                self.bump();
                Ok(vec![Item::Const(v)])
            }
            _ => Err(self.error(vec!["number", "'s'", "'('"])),
        }
    }

    fn power(&mut self) -> Result<u32, TfError> {
        if self.peek() != Tok::Caret {
            return Ok(1);
        }
        self.bump();
        match self.peek() {
            Tok::Num(v) if v.fract() == 0.0 && (0.0..=64.0).contains(&v) => {
                self.bump();
                Ok(v as u32)
            }
            _ => Err(self.error(vec!["integer exponent"])),
        }
    }

    fn content(&mut self) -> Result<Vec<Item>, TfError> {
        let mut items = Vec::new();
        loop {
            if self.peek() == Tok::LParen {
                self.bump();
                items.extend(self.content()?);
                self.expect(Tok::RParen, "')'")?;
            } else {
                items.extend(self.poly()?);
            }
            if self.peek() == Tok::Star {
                self.bump();
            } else if !matches!(self.peek(), Tok::LParen | Tok::S | Tok::Num(_)) {
                break;
            }
        }
        Ok(items)
    }

    fn poly(&mut self) -> Result<Vec<Item>, TfError> {
        let start = self.offset();
        let mut coeffs: Vec<f64> = Vec::new();
        let mut terms = 0usize;
        let mut sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        loop {
            let (c, k) = self.term()?;
            if coeffs.len() <= k {
                coeffs.resize(k + 1, 0.0);
            }
            coeffs[k] += sign * c;
            terms += 1;
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => break,
            };
            self.bump();
        }
        let p = RealPolynomial::new(coeffs);
        let degree = p.degree();
        let nonzero = p.coeffs().iter().filter(|c| **c != 0.0).count();
        if degree == 0 {
            return Ok(vec![Item::Const(p.coeffs()[0])]);
        }
        if nonzero == 1 && terms >= 1 {
            // c * s^k
            return Ok(vec![Item::Const(p.leading()), Item::SPow(degree as u32)]);
        }
        if degree > 2 {
            return Err(TfError::Degree {
                position: start,
                degree,
            });
        }
        Ok(vec![Item::Poly(p)])
    }

    /// Returns `(coefficient, power)`.
    fn term(&mut self) -> Result<(f64, usize), TfError> {
        match self.peek() {
            Tok::Num(v) => {
                self.bump();
                match (self.peek(), self.peek_at(1)) {
                    (Tok::Star, Tok::S) => {
                        self.bump();
                        let (c, k) = self.s_part()?;
                        Ok((v * c, k))
                    }
                    (Tok::S, _) => {
                        let (c, k) = self.s_part()?;
                        Ok((v * c, k))
                    }
                    _ => Ok((v, 0)),
                }
            }
            Tok::S => self.s_part(),
            _ => Err(self.error(vec!["number", "'s'"])),
        }
    }

    fn s_part(&mut self) -> Result<(f64, usize), TfError> {
        self.expect(Tok::S, "'s'")?;
        let k = self.power()? as usize;
        if self.peek() == Tok::Slash {
            if let Tok::Num(d) = self.peek_at(1) {
                self.bump();
                self.bump();
                return Ok((1.0 / d, k));
            }
            return Err(TfError::Parse {
                position: self.toks[self.pos + 1].1,
                expected: vec!["number"],
                found: self.peek_at(1).describe(),
            });
        }
        Ok((1.0, k))
    }
}

/// Parses the factored text notation, e.g. `5/((s/1+1)(s/2+1)(s/3+1))` or
/// `-5*(s/2-1)/(s*(s/1+1))`. Factors are kept as written; use
/// [`FactoredTF::normalized`] for a canonical form.
pub fn parse_tf(text: &str) -> Result<FactoredTF, TfError> {
    let toks = tokenize(text)?;
    if toks.len() == 1 {
        return Err(TfError::Parse {
            position: 0,
            expected: vec!["number", "'s'", "'('"],
            found: "end of input".into(),
        });
    }
    let mut parser = Parser { toks, pos: 0 };
    parser.tf()
}
