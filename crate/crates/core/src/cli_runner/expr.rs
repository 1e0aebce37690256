//! Parser for scenario expressions such as `compose(hopf, perturbed(0.3, 1))`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Call { name: String, args: Vec<Expr> },
}

impl Expr {
    pub fn name(&self) -> Option<&str> {
        match self {
            Expr::Call { name, .. } => Some(name),
            Expr::Number(_) => None,
        }
    }

    pub fn args(&self) -> &[Expr] {
        match self {
            Expr::Call { args, .. } => args,
            Expr::Number(_) => &[],
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Expr::Number(v) => Some(*v),
            Expr::Call { .. } => None,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Call { name, args } if args.is_empty() => f.write_str(name),
            Expr::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Open,
    Close,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            ')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            ',' => {
                out.push((i, Token::Comma));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Token::Ident(chars[start..i].iter().collect())));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| format!("invalid number `{text}` at column {}", start + 1))?;
                out.push((start, Token::Number(v)));
            }
            other => return Err(format!("unexpected character `{other}` at column {}", i + 1)),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(c, _)| *c) + 1
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let col = self.column();
        match self.tokens.get(self.pos).cloned() {
            Some((_, Token::Number(v))) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some((_, Token::Ident(name))) => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.peek() == Some(&Token::Open) {
                    self.pos += 1;
                    if self.peek() == Some(&Token::Close) {
                        self.pos += 1;
                        return Ok(Expr::Call { name, args });
                    }
                    loop {
                        args.push(self.expr()?);
                        let col = self.column();
                        match self.peek() {
                            Some(Token::Comma) => self.pos += 1,
                            Some(Token::Close) => {
                                self.pos += 1;
                                break;
                            }
                            _ => return Err(format!("expected `,` or `)` at column {col}")),
                        }
                    }
                }
                Ok(Expr::Call { name, args })
            }
            _ => Err(format!("expected a name or a number at column {col}")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, String> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, len: src.chars().count() };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected trailing input at column {}", p.column()));
    }
    Ok(e)
}
