//! Exact arithmetic over decimal literals.
//!
//! Expressions are evaluated as rationals over `i128`; results that have a
//! terminating decimal expansion print exactly, others are rounded half-even
//! to [`MAX_FRACTION_DIGITS`] places. Trailing zeros are always stripped.

use std::cmp::Ordering;
use std::fmt;

pub const MAX_FRACTION_DIGITS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CalcError {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

impl CalcError {
    /// Tool error class for this failure.
    pub fn error_class(&self) -> &'static str {
        match self {
            CalcError::Parse { .. } => "parse",
            CalcError::DivisionByZero | CalcError::Overflow => "math",
        }
    }
}

/// Normalized fraction: positive denominator, lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn integer(n: i128) -> Self {
        Ratio { num: n, den: 1 }
    }

    fn new(num: i128, den: i128) -> Result<Self, CalcError> {
        if den == 0 {
            return Err(CalcError::DivisionByZero);
        }
        let g = gcd(num, den).max(1);
        let (mut num, mut den) = (num / g, den / g);
        if den < 0 {
            num = num.checked_neg().ok_or(CalcError::Overflow)?;
            den = den.checked_neg().ok_or(CalcError::Overflow)?;
        }
        Ok(Ratio { num, den })
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    fn add(self, o: Ratio) -> Result<Ratio, CalcError> {
        let l = self.num.checked_mul(o.den).ok_or(CalcError::Overflow)?;
        let r = o.num.checked_mul(self.den).ok_or(CalcError::Overflow)?;
        let den = self.den.checked_mul(o.den).ok_or(CalcError::Overflow)?;
        Ratio::new(l.checked_add(r).ok_or(CalcError::Overflow)?, den)
    }

    fn neg(self) -> Result<Ratio, CalcError> {
        Ok(Ratio {
            num: self.num.checked_neg().ok_or(CalcError::Overflow)?,
            den: self.den,
        })
    }

    fn sub(self, o: Ratio) -> Result<Ratio, CalcError> {
        self.add(o.neg()?)
    }

    fn mul(self, o: Ratio) -> Result<Ratio, CalcError> {
        let g1 = gcd(self.num, o.den).max(1);
        let g2 = gcd(o.num, self.den).max(1);
        let num = (self.num / g1)
            .checked_mul(o.num / g2)
            .ok_or(CalcError::Overflow)?;
        let den = (self.den / g2)
            .checked_mul(o.den / g1)
            .ok_or(CalcError::Overflow)?;
        Ratio::new(num, den)
    }

    fn div(self, o: Ratio) -> Result<Ratio, CalcError> {
        if o.num == 0 {
            return Err(CalcError::DivisionByZero);
        }
        self.mul(Ratio { num: o.den, den: o.num }.normalized()?)
    }

    fn normalized(self) -> Result<Ratio, CalcError> {
        Ratio::new(self.num, self.den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_ratio(*self))
    }
}

/// `(10 * rem) / den` and `(10 * rem) % den` for `rem < den <= 2^127`,
/// without forming `10 * rem`.
fn times_ten_divmod(rem: u128, den: u128) -> (u8, u128) {
    let mut digit = 0u8;
    let mut acc = 0u128;
    for _ in 0..10 {
        acc += rem;
        if acc >= den {
            acc -= den;
            digit += 1;
        }
    }
    (digit, acc)
}

/// Decimal text of `r`, see the module docs for the rounding rule.
pub fn format_ratio(r: Ratio) -> String {
    let negative = r.num < 0;
    let num = r.num.unsigned_abs();
    let den = r.den.unsigned_abs();
    let int_part = num / den;
    let mut rem = num % den;

    let mut digits = Vec::new();
    while rem != 0 && digits.len() < MAX_FRACTION_DIGITS as usize {
        let (digit, next) = times_ten_divmod(rem, den);
        digits.push(digit);
        rem = next;
    }
    let mut int_part = int_part;
    if rem != 0 {
        // half-even on the remaining tail
        let round_up = match (rem * 2).cmp(&den) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => digits.last().is_some_and(|d| d % 2 == 1),
        };
        if round_up {
            let mut i = digits.len();
            loop {
                if i == 0 {
                    int_part += 1;
                    break;
                }
                i -= 1;
                if digits[i] == 9 {
                    digits[i] = 0;
                } else {
                    digits[i] += 1;
                    break;
                }
            }
        }
    }
    while digits.last() == Some(&0) {
        digits.pop();
    }
    let mut out = String::new();
    if negative && (int_part != 0 || !digits.is_empty()) {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if !digits.is_empty() {
        out.push('.');
        out.extend(digits.iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Evaluates `expr` and formats the result.
pub fn calc_eval(expr: &str) -> Result<String, CalcError> {
    evaluate(expr).map(format_ratio)
}

pub fn evaluate(expr: &str) -> Result<Ratio, CalcError> {
    let tokens = tokenize(expr)?;
    let mut parser = Parser { tokens, pos: 0, len: expr.chars().count() };
    let value = parser.expression()?;
    match parser.tokens.get(parser.pos) {
        None => Ok(value),
        Some((at, _)) => Err(CalcError::Parse {
            position: *at,
            message: "unexpected trailing input".into(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(Ratio),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn tokenize(expr: &str) -> Result<Vec<(usize, Token)>, CalcError> {
    let chars: Vec<char> = expr.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Token::Plus,
            '-' | '−' => Token::Minus,
            '*' | '×' => Token::Star,
            '/' | '÷' => Token::Slash,
            '(' => Token::LParen,
            ')' => Token::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let literal: String = chars[start..i].iter().collect();
                out.push((start, Token::Num(parse_decimal(&literal, start)?)));
                continue;
            }
            other => {
                return Err(CalcError::Parse {
                    position: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

fn parse_decimal(literal: &str, position: usize) -> Result<Ratio, CalcError> {
    let bad = || CalcError::Parse {
        position,
        message: format!("malformed number `{literal}`"),
    };
    let (int_part, frac_part) = match literal.split_once('.') {
        Some((i, f)) => (i, f),
        None => (literal, ""),
    };
    if (int_part.is_empty() && frac_part.is_empty()) || frac_part.contains('.') {
        return Err(bad());
    }
    let mut num: i128 = 0;
    let mut den: i128 = 1;
    for d in int_part.chars().chain(frac_part.chars()) {
        let digit = d.to_digit(10).ok_or_else(bad)? as i128;
        num = num
            .checked_mul(10)
            .and_then(|n| n.checked_add(digit))
            .ok_or(CalcError::Overflow)?;
    }
    for _ in 0..frac_part.len() {
        den = den.checked_mul(10).ok_or(CalcError::Overflow)?;
    }
    Ratio::new(num, den)
}

/// expression := term (('+' | '-') term)*
/// term       := unary (('*' | '/') unary)*
/// unary      := '-' unary | primary
/// primary    := number | '(' expression ')'
struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).map(|(_, t)| *t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(p, _)| *p)
    }

    fn expression(&mut self) -> Result<Ratio, CalcError> {
        let mut acc = self.term()?;
        while let Some(op @ (Token::Plus | Token::Minus)) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == Token::Plus { acc.add(rhs)? } else { acc.sub(rhs)? };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Ratio, CalcError> {
        let mut acc = self.unary()?;
        while let Some(op @ (Token::Star | Token::Slash)) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == Token::Star { acc.mul(rhs)? } else { acc.div(rhs)? };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Ratio, CalcError> {
        if self.peek() == Some(Token::Minus) {
            self.pos += 1;
            return self.unary()?.neg();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ratio, CalcError> {
        let position = self.position();
        match self.peek() {
            Some(Token::Num(n)) => {
                self.pos += 1;
                Ok(n)
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expression()?;
                if self.peek() != Some(Token::RParen) {
                    return Err(CalcError::Parse {
                        position: self.position(),
                        message: "expected `)`".into(),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => Err(CalcError::Parse {
                position,
                message: "expected a number or `(`".into(),
            }),
            None => Err(CalcError::Parse {
                position,
                message: "unexpected end of expression".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(calc_eval("2+3").unwrap(), "5");
        assert_eq!(calc_eval("10/4").unwrap(), "2.5");
        assert_eq!(calc_eval("2*(3+4)").unwrap(), "14");
        assert_eq!(calc_eval("1/0"), Err(CalcError::DivisionByZero));
        assert_eq!(CalcError::DivisionByZero.error_class(), "math");
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(calc_eval("2+3*4").unwrap(), "14");
        assert_eq!(calc_eval("8-3-2").unwrap(), "3");
        assert_eq!(calc_eval("8/4/2").unwrap(), "1");
        assert_eq!(calc_eval("-(2-7)*2").unwrap(), "10");
        assert_eq!(calc_eval("2 − 7 × 3 ÷ 2").unwrap(), "-8.5");
        assert_eq!(calc_eval("0.1+0.2").unwrap(), "0.3");
        assert_eq!(calc_eval("1.50*2").unwrap(), "3");
    }

    #[test]
    fn non_terminating_results_round_half_even() {
        assert_eq!(calc_eval("1/3").unwrap(), "0.333333333333");
        assert_eq!(calc_eval("2/3").unwrap(), "0.666666666667");
        assert_eq!(calc_eval("-1/7").unwrap(), "-0.142857142857");
        // exactly representable: printed in full, never rounded
        assert_eq!(calc_eval("1/1024").unwrap(), "0.0009765625");
        assert_eq!(calc_eval("0-0").unwrap(), "0");
        assert_eq!(calc_eval("-0.0000000000001").unwrap(), "0");
    }

    #[test]
    fn parse_errors_carry_position() {
        assert!(matches!(calc_eval("2+"), Err(CalcError::Parse { position: 2, .. })));
        assert!(matches!(calc_eval("2 $ 3"), Err(CalcError::Parse { position: 2, .. })));
        assert!(matches!(calc_eval("(1+2"), Err(CalcError::Parse { position: 4, .. })));
        assert!(matches!(calc_eval("1..2"), Err(CalcError::Parse { position: 0, .. })));
        assert!(matches!(calc_eval("3 4"), Err(CalcError::Parse { position: 2, .. })));
        assert!(matches!(calc_eval(""), Err(CalcError::Parse { position: 0, .. })));
    }

    #[test]
    fn overflow_is_a_math_error() {
        let big = "9".repeat(30);
        let expr = format!("{big}*{big}*{big}");
        let err = calc_eval(&expr).unwrap_err();
        assert_eq!(err, CalcError::Overflow);
        assert_eq!(err.error_class(), "math");
    }
}
